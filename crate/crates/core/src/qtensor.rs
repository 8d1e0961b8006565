//! Algebra of symmetric traceless 3×3 order-parameter tensors and of the
//! thin-film subspace in which `e3` is always a principal axis.
//!
//! Fields are stored in the linear `(p, r)` coordinates of that subspace;
//! full tensors are only materialized for I/O and cross-checks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `|Q13| + |Q23|` below which a tensor counts as thin-film.
pub const S0_TOLERANCE: f64 = 1e-12;

/// Default relative gap under which two eigenvalues are considered equal.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QTensorError {
    #[error("tensor has out-of-plane shear |Q13|+|Q23| = {0:e}")]
    NotInS0(f64),
    #[error("director undefined where p vanishes")]
    ZeroP,
    #[error("matrix is not symmetric and traceless (defect {0:e})")]
    NotSymmetricTraceless(f64),
}

/// Symmetric traceless 3×3 tensor stored as `z1..z5`:
///
/// ```text
/// [ z1  z2  z4 ]
/// [ z2  z3  z5 ]
/// [ z4  z5  -z1-z3 ]
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QTensor {
    pub z: [f64; 5],
}

impl QTensor {
    pub const ZERO: QTensor = QTensor { z: [0.0; 5] };

    /// Reads the independent entries of a matrix, rejecting anything that is
    /// not symmetric and traceless to within `1e-12` of its entry scale.
    pub fn from_matrix(m: &[[f64; 3]; 3]) -> Result<Self, QTensorError> {
        let scale = m.iter().flatten().fold(1.0_f64, |acc, v| acc.max(v.abs()));
        let asym = (m[0][1] - m[1][0]).abs() + (m[0][2] - m[2][0]).abs() + (m[1][2] - m[2][1]).abs();
        let trace = (m[0][0] + m[1][1] + m[2][2]).abs();
        let defect = asym.max(trace);
        if defect > 1e-12 * scale {
            return Err(QTensorError::NotSymmetricTraceless(defect));
        }
        Ok(QTensor { z: [m[0][0], m[0][1], m[1][1], m[0][2], m[1][2]] })
    }

    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let [z1, z2, z3, z4, z5] = self.z;
        [[z1, z2, z4], [z2, z3, z5], [z4, z5, -z1 - z3]]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.to_matrix()[i][j]
    }

    /// Determinant by cofactor expansion of the assembled matrix.
    pub fn det(&self) -> f64 {
        let m = self.to_matrix();
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Squared Frobenius norm `Q_ij Q_ij`.
    pub fn norm2(&self) -> f64 {
        self.to_matrix().iter().flatten().map(|v| v * v).sum()
    }

    /// `tr(Q^3)`, computed from the matrix product.
    pub fn trace_cube(&self) -> f64 {
        let m = self.to_matrix();
        let mut t = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    t += m[i][j] * m[j][k] * m[k][i];
                }
            }
        }
        t
    }

    /// Out-of-plane shear `|Q13| + |Q23|`.
    pub fn out_of_plane(&self) -> f64 {
        self.z[3].abs() + self.z[4].abs()
    }

    pub fn is_in_s0(&self) -> bool {
        self.out_of_plane() <= S0_TOLERANCE
    }
}

/// A point of the thin-film subspace in `(p, r)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PRPoint {
    pub p: [f64; 2],
    pub r: f64,
}

impl PRPoint {
    pub fn new(p1: f64, p2: f64, r: f64) -> Self {
        PRPoint { p: [p1, p2], r }
    }

    pub fn p_norm(&self) -> f64 {
        self.p[0].hypot(self.p[1])
    }

    pub fn p_norm2(&self) -> f64 {
        self.p[0] * self.p[0] + self.p[1] * self.p[1]
    }

    /// Point on the in-plane well `|p| = |s|/2, r = s/3` with director angle `angle`.
    pub fn on_well(s: f64, angle: f64) -> Self {
        let a = 0.5 * s.abs();
        PRPoint { p: [a * (2.0 * angle).cos(), a * (2.0 * angle).sin()], r: s / 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseKind {
    Isotropic,
    Uniaxial,
    Biaxial,
}

/// Spectral data of a thin-film tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub kind: PhaseKind,
    /// `(r/2 + |p|, r/2 - |p|, -r)`; the first two belong to in-plane eigenvectors.
    pub eigenvalues: [f64; 3],
    /// Angle of the in-plane eigenvector of the first eigenvalue, in `[0, π)`.
    /// `None` when `p = 0` and every in-plane direction is an eigenvector.
    pub leading_angle: Option<f64>,
}

/// Assembles the tensor
///
/// ```text
/// [ p1 + r/2   p2        0  ]
/// [ p2         r/2 - p1  0  ]
/// [ 0          0         -r ]
/// ```
pub fn from_pr(point: PRPoint) -> QTensor {
    let [p1, p2] = point.p;
    let r = point.r;
    QTensor { z: [p1 + 0.5 * r, p2, 0.5 * r - p1, 0.0, 0.0] }
}

pub fn to_pr(q: &QTensor) -> Result<PRPoint, QTensorError> {
    let off = q.out_of_plane();
    if off > S0_TOLERANCE {
        return Err(QTensorError::NotInS0(off));
    }
    let [z1, z2, z3, _, _] = q.z;
    Ok(PRPoint { p: [0.5 * (z1 - z3), z2], r: z1 + z3 })
}

fn classify(ev: [f64; 3], tol: f64) -> PhaseKind {
    let scale = ev.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let eq = |a: f64, b: f64| (a - b).abs() <= tol * scale;
    let pairs = [eq(ev[0], ev[1]), eq(ev[0], ev[2]), eq(ev[1], ev[2])];
    match pairs.iter().filter(|&&e| e).count() {
        0 => PhaseKind::Biaxial,
        3 => PhaseKind::Isotropic,
        // With a tolerance the relation need not be transitive; two matching
        // pairs still means all three collapse together.
        2 => PhaseKind::Isotropic,
        _ => PhaseKind::Uniaxial,
    }
}

/// Eigenvalues and phase class of `Q(p, r)` from the closed-form spectrum.
pub fn eigensystem_pr(point: PRPoint, degeneracy_tol: f64) -> Phase {
    let a = point.p_norm();
    let half_r = 0.5 * point.r;
    let eigenvalues = [half_r + a, half_r - a, -point.r];
    let leading_angle = director_angle(point.p).ok();
    Phase { kind: classify(eigenvalues, degeneracy_tol), eigenvalues, leading_angle }
}

/// `(det Q, |Q|²)` in closed form: `((|p|² - r²/4) r, 2|p|² + 3r²/2)`.
pub fn invariants(point: PRPoint) -> (f64, f64) {
    let psq = point.p_norm2();
    let r = point.r;
    ((psq - 0.25 * r * r) * r, 2.0 * psq + 1.5 * r * r)
}

/// Director (line-field) angle: half the phase of `p`, reduced to `[0, π)`.
pub fn director_angle(p: [f64; 2]) -> Result<f64, QTensorError> {
    if p[0] == 0.0 && p[1] == 0.0 {
        return Err(QTensorError::ZeroP);
    }
    Ok(reduce_mod_pi(0.5 * p[1].atan2(p[0])))
}

pub(crate) fn reduce_mod_pi(angle: f64) -> f64 {
    let a = angle.rem_euclid(PI);
    // rem_euclid can return exactly PI after rounding
    if a >= PI {
        0.0
    } else {
        a
    }
}

/// Scalar order parameters `(s1, s2)` of the decomposition
/// `Q = s1 m⊗m + s2 m⊥⊗m⊥ - (s1+s2)/3 I` with `m` the leading in-plane eigenvector.
pub fn order_parameters(point: PRPoint) -> (f64, f64) {
    let a = point.p_norm();
    (a + 1.5 * point.r, 1.5 * point.r - a)
}

/// Angle of the uniaxial axis of the limiting texture: the leading director
/// for `s > 0`, its perpendicular for `s < 0`.
pub fn uniaxial_axis_angle(p: [f64; 2], s: f64) -> Result<f64, QTensorError> {
    let m = director_angle(p)?;
    Ok(if s > 0.0 { m } else { reduce_mod_pi(m + 0.5 * PI) })
}

/// Rotates a `(p, r)` value under an in-plane rotation by `angle`
/// (`R Q Rᵗ`): `p` turns by twice the angle, `r` is unchanged.
pub fn rotate_pr(point: PRPoint, angle: f64) -> PRPoint {
    let (s2, c2) = (2.0 * angle).sin_cos();
    let [p1, p2] = point.p;
    PRPoint { p: [c2 * p1 - s2 * p2, s2 * p1 + c2 * p2], r: point.r }
}

/// Conjugates a full tensor by the in-plane rotation `R(angle)`.
pub fn rotate_tensor(q: &QTensor, angle: f64) -> QTensor {
    let (s, c) = angle.sin_cos();
    let rot = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
    let m = q.to_matrix();
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    acc += rot[i][a] * m[a][b] * rot[j][b];
                }
            }
            out[i][j] = acc;
        }
    }
    // symmetrize away rounding before re-reading
    for i in 0..3 {
        for j in (i + 1)..3 {
            let v = 0.5 * (out[i][j] + out[j][i]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    let tr = (out[0][0] + out[1][1] + out[2][2]) / 3.0;
    for (i, row) in out.iter_mut().enumerate() {
        row[i] -= tr;
    }
    QTensor::from_matrix(&out).expect("conjugation preserves symmetry and trace")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{Matrix3, SymmetricEigen};
    use proptest::prelude::*;

    fn sorted_eig(q: &QTensor) -> [f64; 3] {
        let m = Matrix3::from_fn(|i, j| q.get(i, j));
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        [ev[0], ev[1], ev[2]]
    }

    #[test]
    fn from_pr_examples() {
        assert_eq!(from_pr(PRPoint::new(0.0, 0.0, 0.0)), QTensor::ZERO);
        let m = from_pr(PRPoint::new(0.5, -0.25, 0.3)).to_matrix();
        let want = [[0.65, -0.25, 0.0], [-0.25, -0.35, 0.0], [0.0, 0.0, -0.3]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(m[i][j], want[i][j], epsilon = 1e-15);
            }
        }
        let m = from_pr(PRPoint::new(1.0, 0.0, 0.0)).to_matrix();
        assert_eq!(m, [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]]);
    }

    #[test]
    fn to_pr_examples() {
        let q = QTensor::from_matrix(&[[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(to_pr(&q).unwrap(), PRPoint::new(1.0, 0.0, 0.0));
        assert_eq!(to_pr(&QTensor::ZERO).unwrap(), PRPoint::new(0.0, 0.0, 0.0));
        let q = QTensor::from_matrix(&[[0.65, -0.25, 0.0], [-0.25, -0.35, 0.0], [0.0, 0.0, -0.3]]).unwrap();
        let pr = to_pr(&q).unwrap();
        assert_abs_diff_eq!(pr.p[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(pr.p[1], -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(pr.r, 0.3, epsilon = 1e-15);
    }

    #[test]
    fn to_pr_rejects_shear() {
        let q = QTensor { z: [0.1, 0.0, 0.2, 1e-6, 0.0] };
        assert!(matches!(to_pr(&q), Err(QTensorError::NotInS0(_))));
    }

    #[test]
    fn from_matrix_rejects_asymmetric() {
        let m = [[1.0, 0.5, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]];
        assert!(QTensor::from_matrix(&m).is_err());
        let m = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]];
        assert!(QTensor::from_matrix(&m).is_err());
    }

    #[test]
    fn eigensystem_examples() {
        let ph = eigensystem_pr(PRPoint::new(3.0, 4.0, 2.0), DEFAULT_DEGENERACY_TOL);
        assert_eq!(ph.eigenvalues, [6.0, -4.0, -2.0]);
        assert_eq!(ph.kind, PhaseKind::Biaxial);

        let ph = eigensystem_pr(PRPoint::default(), DEFAULT_DEGENERACY_TOL);
        assert_eq!(ph.eigenvalues, [0.0, 0.0, 0.0]);
        assert_eq!(ph.kind, PhaseKind::Isotropic);
        assert!(ph.leading_angle.is_none());
    }

    #[test]
    fn well_point_is_uniaxial_and_matches_director_form() {
        // s = 1.5, |p| = s/2 at angle 0, r = s/3
        let s = 1.5;
        let pt = PRPoint::new(0.75, 0.0, 0.5);
        let ph = eigensystem_pr(pt, DEFAULT_DEGENERACY_TOL);
        assert_abs_diff_eq!(ph.eigenvalues[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ph.eigenvalues[1], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ph.eigenvalues[2], -0.5, epsilon = 1e-15);
        assert_eq!(ph.kind, PhaseKind::Uniaxial);
        // s (e1⊗e1 - I/3) assembled independently
        let want = [[s * (1.0 - 1.0 / 3.0), 0.0, 0.0], [0.0, -s / 3.0, 0.0], [0.0, 0.0, -s / 3.0]];
        let got = from_pr(pt).to_matrix();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(got[i][j], want[i][j], epsilon = 1e-15);
            }
        }
        let ev = sorted_eig(&from_pr(pt));
        assert_abs_diff_eq!(ev[0], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[1], -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(ev[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn invariants_examples() {
        assert_eq!(invariants(PRPoint::new(1.0, 0.0, 0.0)), (0.0, 2.0));
        assert_eq!(invariants(PRPoint::new(0.0, 0.0, 1.0)), (-0.25, 1.5));
        let pt = PRPoint::new(0.5, -0.25, 0.3);
        let (det, n2) = invariants(pt);
        assert_abs_diff_eq!(det, 0.087, epsilon = 1e-15);
        assert_abs_diff_eq!(n2, 0.76, epsilon = 1e-15);
        let q = from_pr(pt);
        assert_abs_diff_eq!(q.det(), 0.087, epsilon = 1e-15);
        assert_abs_diff_eq!(q.norm2(), 0.76, epsilon = 1e-15);
    }

    #[test]
    fn director_angle_examples() {
        assert_eq!(director_angle([1.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(director_angle([-1.0, 0.0]).unwrap(), PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(director_angle([0.0, 1.0]).unwrap(), PI / 4.0, epsilon = 1e-15);
        assert_eq!(director_angle([0.0, 0.0]), Err(QTensorError::ZeroP));
        // lower half-plane phases fold into [0, π)
        let a = director_angle([0.0, -1.0]).unwrap();
        assert_abs_diff_eq!(a, 3.0 * PI / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn director_is_leading_eigenvector() {
        let pt = PRPoint::new(-0.3, 0.4, 0.1);
        let q = from_pr(pt);
        let angle = director_angle(pt.p).unwrap();
        let (s, c) = angle.sin_cos();
        let m = q.to_matrix();
        let qm = [m[0][0] * c + m[0][1] * s, m[1][0] * c + m[1][1] * s];
        let lambda = eigensystem_pr(pt, DEFAULT_DEGENERACY_TOL).eigenvalues[0];
        assert_abs_diff_eq!(qm[0], lambda * c, epsilon = 1e-14);
        assert_abs_diff_eq!(qm[1], lambda * s, epsilon = 1e-14);
    }

    #[test]
    fn classification_boundaries() {
        // |p| = 0, r ≠ 0
        assert_eq!(eigensystem_pr(PRPoint::new(0.0, 0.0, 0.7), 1e-9).kind, PhaseKind::Uniaxial);
        // r = 2|p|/3 makes λ2 = λ3, r = -2|p|/3 makes λ1 = λ3
        let p = [0.3, -0.4];
        let r0 = 1.0 / 3.0;
        assert_eq!(eigensystem_pr(PRPoint { p, r: r0 }, 1e-9).kind, PhaseKind::Uniaxial);
        assert_eq!(eigensystem_pr(PRPoint { p, r: -r0 }, 1e-9).kind, PhaseKind::Uniaxial);
        assert_eq!(eigensystem_pr(PRPoint { p, r: 1.0 }, 1e-9).kind, PhaseKind::Biaxial);
        assert_eq!(eigensystem_pr(PRPoint { p, r: 0.3 }, 1e-9).kind, PhaseKind::Biaxial);
        // the tolerance absorbs sub-tolerance noise
        assert_eq!(eigensystem_pr(PRPoint { p, r: r0 + 1e-12 }, 1e-9).kind, PhaseKind::Uniaxial);
    }

    #[test]
    fn director_axis_swaps_with_sign_of_s() {
        let p = [0.2, 0.2];
        let m = director_angle(p).unwrap();
        assert_abs_diff_eq!(uniaxial_axis_angle(p, 1.0).unwrap(), m, epsilon = 1e-15);
        assert_abs_diff_eq!(uniaxial_axis_angle(p, -1.0).unwrap(), m + PI / 2.0, epsilon = 1e-15);
        // s < 0 well: r = s/3 < 0 and the distinguished axis is m⊥
        let s = -1.2;
        let pt = PRPoint::on_well(s, 0.3);
        let ph = eigensystem_pr(pt, 1e-9);
        assert_eq!(ph.kind, PhaseKind::Uniaxial);
        // the non-degenerate eigenvalue is 2s/3 and belongs to m⊥
        let (s1, s2) = order_parameters(pt);
        assert_abs_diff_eq!(s1, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s2, s, epsilon = 1e-15);
        assert_abs_diff_eq!(ph.eigenvalues[1], 2.0 * s / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn order_parameters_reassemble_tensor() {
        let pt = PRPoint::new(0.31, -0.12, 0.44);
        let (s1, s2) = order_parameters(pt);
        let (sn, cs) = director_angle(pt.p).unwrap().sin_cos();
        let m = [cs, sn, 0.0];
        let mp = [-sn, cs, 0.0];
        let q = from_pr(pt).to_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                let v = s1 * m[i] * m[j] + s2 * mp[i] * mp[j] - (s1 + s2) / 3.0 * id;
                assert_abs_diff_eq!(v, q[i][j], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn round_trip_ten_thousand_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let pt = PRPoint::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let back = to_pr(&from_pr(pt)).unwrap();
            assert!((back.p[0] - pt.p[0]).abs() <= 1e-15 * pt.p[0].abs().max(1.0));
            assert!((back.p[1] - pt.p[1]).abs() <= 1e-15 * pt.p[1].abs().max(1.0));
            assert!((back.r - pt.r).abs() <= 1e-15 * pt.r.abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn eigenvalues_match_generic_solver(p1 in -3.0..3.0f64, p2 in -3.0..3.0f64, r in -3.0..3.0f64) {
            let pt = PRPoint::new(p1, p2, r);
            let mut ev = eigensystem_pr(pt, 1e-9).eigenvalues;
            ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let got = sorted_eig(&from_pr(pt));
            for i in 0..3 {
                prop_assert!((ev[i] - got[i]).abs() < 1e-10);
            }
            let sum: f64 = ev.iter().sum();
            prop_assert!(sum.abs() < 1e-12);
        }

        #[test]
        fn invariants_match_matrix(p1 in -3.0..3.0f64, p2 in -3.0..3.0f64, r in -3.0..3.0f64) {
            let pt = PRPoint::new(p1, p2, r);
            let (det, n2) = invariants(pt);
            let q = from_pr(pt);
            prop_assert!((det - q.det()).abs() <= 1e-12 * det.abs().max(1.0));
            prop_assert!((n2 - q.norm2()).abs() <= 1e-12 * n2.max(1.0));
            // tr Q³ = 3 det Q for traceless Q
            prop_assert!((q.trace_cube() - 3.0 * det).abs() <= 1e-11 * det.abs().max(1.0));
        }

        #[test]
        fn rotation_preserves_invariants(p1 in -2.0..2.0f64, p2 in -2.0..2.0f64, r in -2.0..2.0f64, a in 0.0..6.3f64) {
            let pt = PRPoint::new(p1, p2, r);
            let q = from_pr(pt);
            let rq = rotate_tensor(&q, a);
            prop_assert!((rq.det() - q.det()).abs() <= 1e-12 * q.det().abs().max(1.0));
            prop_assert!((rq.norm2() - q.norm2()).abs() <= 1e-12 * q.norm2().max(1.0));
            // in (p, r) the conjugation doubles the phase of p
            let rp = rotate_pr(pt, a);
            let back = to_pr(&rq).unwrap();
            prop_assert!((back.p[0] - rp.p[0]).abs() < 1e-12);
            prop_assert!((back.p[1] - rp.p[1]).abs() < 1e-12);
            prop_assert!((back.r - rp.r).abs() < 1e-12);
        }
    }
}
