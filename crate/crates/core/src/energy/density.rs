//! Pointwise densities: elastic forms, bulk potentials and their derivatives.

use std::fmt;
use std::sync::Arc;

use super::EnergyError;

/// Gradient of `(p, r)` at a point. `dp[c][d]` is `∂_d p_c`, `dr[d]` is `∂_d r`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradientSample {
    pub dp: [[f64; 2]; 2],
    pub dr: [f64; 2],
}

impl GradientSample {
    pub fn new(p1x: f64, p1y: f64, p2x: f64, p2y: f64, rx: f64, ry: f64) -> Self {
        GradientSample { dp: [[p1x, p1y], [p2x, p2y]], dr: [rx, ry] }
    }

    pub fn from_components(g: &[[f64; 2]; 3]) -> Self {
        GradientSample { dp: [g[0], g[1]], dr: g[2] }
    }

    pub fn to_components(self) -> [[f64; 2]; 3] {
        [self.dp[0], self.dp[1], self.dr]
    }

    pub fn dp_norm2(&self) -> f64 {
        self.dp.iter().flatten().map(|v| v * v).sum()
    }

    pub fn dr_norm2(&self) -> f64 {
        self.dr[0] * self.dr[0] + self.dr[1] * self.dr[1]
    }

    /// Jacobian determinant `p1x p2y - p1y p2x`.
    pub fn det_dp(&self) -> f64 {
        self.dp[0][0] * self.dp[1][1] - self.dp[0][1] * self.dp[1][0]
    }

    pub fn is_finite(&self) -> bool {
        self.dp.iter().flatten().chain(self.dr.iter()).all(|v| v.is_finite())
    }
}

/// Elastic constants with `L1 > 0` and `L1 + L2 + L3 > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticConstants {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl ElasticConstants {
    pub fn new(l1: f64, l2: f64, l3: f64) -> Result<Self, EnergyError> {
        if !(l1.is_finite() && l2.is_finite() && l3.is_finite()) {
            return Err(EnergyError::NonFinite("elastic constant"));
        }
        if l1 <= 0.0 || l1 + l2 + l3 <= 0.0 {
            return Err(EnergyError::InvalidElastic { l1, l2, l3 });
        }
        Ok(ElasticConstants { l1, l2, l3 })
    }

    /// `L2 + L3`, the coupling coefficient between `p` and `r`.
    pub fn coupling(&self) -> f64 {
        self.l2 + self.l3
    }

    /// Coercivity constant `min(L1, L1+L2+L3)`.
    pub fn coercivity(&self) -> f64 {
        self.l1.min(self.l1 + self.l2 + self.l3)
    }

    /// Prefactor of `ln(1/ε)` per unit winding and unit `s²`:
    /// energies grow like `(2L1+L2+L3) s² π k / 4 · ln(1/ε)`.
    pub fn log_prefactor(&self) -> f64 {
        2.0 * self.l1 + self.coupling()
    }
}

/// Elastic density in its expanded form, with the Jacobian term weighted by `|L2+L3|`.
pub fn g_e_mixed(grad: &GradientSample, el: &ElasticConstants) -> f64 {
    let k = el.coupling();
    let [[p1x, p1y], [p2x, p2y]] = grad.dp;
    let [rx, ry] = grad.dr;
    (el.l1 + 0.5 * k) * grad.dp_norm2()
        + (0.75 * el.l1 + 0.125 * k) * grad.dr_norm2()
        + 0.5 * k * (p1x * rx - p1y * ry + rx * p2y + ry * p2x)
        + k.abs() * (p1x * p2y - p1y * p2x)
}

/// The two squares of the sum-of-squares form, chosen by the sign of `L2+L3`.
fn sos_squares(grad: &GradientSample, nonneg: bool) -> (f64, f64) {
    let [[p1x, p1y], [p2x, p2y]] = grad.dp;
    let [rx, ry] = grad.dr;
    if nonneg {
        (p1x + 0.5 * rx + p2y, p2x - p1y + 0.5 * ry)
    } else {
        (0.5 * rx - p1x - p2y, p2x - p1y - 0.5 * ry)
    }
}

/// Elastic density written as a sum of squares. Equal to [`g_e_mixed`] pointwise.
pub fn g_e_sos(grad: &GradientSample, el: &ElasticConstants) -> f64 {
    let k = el.coupling();
    let base = grad.dp_norm2() + 0.75 * grad.dr_norm2();
    if k >= 0.0 {
        let (u, v) = sos_squares(grad, true);
        el.l1 * base + 0.5 * k * (u * u + v * v)
    } else {
        let (u, v) = sos_squares(grad, false);
        (el.l1 + k) * base - 0.5 * k * (u * u + v * v + grad.dr_norm2())
    }
}

/// Derivative of [`g_e_sos`] with respect to each gradient entry.
pub fn g_e_sos_grad(grad: &GradientSample, el: &ElasticConstants) -> GradientSample {
    let k = el.coupling();
    let [[p1x, p1y], [p2x, p2y]] = grad.dp;
    let [rx, ry] = grad.dr;
    if k >= 0.0 {
        let (u, v) = sos_squares(grad, true);
        let a = 2.0 * el.l1;
        GradientSample::new(
            a * p1x + k * u,
            a * p1y - k * v,
            a * p2x + k * v,
            a * p2y + k * u,
            1.5 * el.l1 * rx + 0.5 * k * u,
            1.5 * el.l1 * ry + 0.5 * k * v,
        )
    } else {
        let (u, v) = sos_squares(grad, false);
        let a = 2.0 * (el.l1 + k);
        let b = 1.5 * (el.l1 + k) - k;
        GradientSample::new(
            a * p1x + k * u,
            a * p1y + k * v,
            a * p2x - k * v,
            a * p2y + k * u,
            b * rx - 0.5 * k * u,
            b * ry + 0.5 * k * v,
        )
    }
}

/// Symmetric matrix `A` with `g_e = ½ gᵀ A g`, where `g` lists
/// `(p1x, p1y, p2x, p2y, rx, ry)`.
pub fn g_e_matrix(el: &ElasticConstants) -> [[f64; 6]; 6] {
    let mut a = [[0.0; 6]; 6];
    for (j, col) in (0..6).map(|j| {
        let mut e = [0.0; 6];
        e[j] = 1.0;
        (j, e)
    }) {
        let g = GradientSample::new(col[0], col[1], col[2], col[3], col[4], col[5]);
        let d = g_e_sos_grad(&g, el);
        let flat = [d.dp[0][0], d.dp[0][1], d.dp[1][0], d.dp[1][1], d.dr[0], d.dr[1]];
        for i in 0..6 {
            a[i][j] = flat[i];
        }
    }
    a
}

/// Full-tensor elastic density with out-of-plane derivatives set to zero.
/// `dq[i][j][k]` is `∂_k Q_ij` for `k ∈ {x, y}`.
pub fn f_e(dq: &[[[f64; 2]; 3]; 3], el: &ElasticConstants) -> f64 {
    let mut t1 = 0.0;
    let mut t3 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..2 {
                t1 += dq[i][j][k] * dq[i][j][k];
                // Q_ij,k Q_ik,j needs j as a derivative index
                if j < 2 {
                    t3 += dq[i][j][k] * dq[i][k][j];
                }
            }
        }
    }
    let mut t2 = 0.0;
    for i in 0..3 {
        let div: f64 = (0..2).map(|j| dq[i][j][j]).sum();
        t2 += div * div;
    }
    0.5 * (el.l1 * t1 + el.l2 * t2 + el.l3 * t3)
}

/// Coefficients of the classic quartic bulk potential, with `d` fixed so its minimum is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicBulk {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    s: f64,
}

impl ClassicBulk {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self, EnergyError> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(EnergyError::NonFinite("bulk coefficient"));
        }
        if b <= 0.0 || c <= 0.0 || a >= b * b / (27.0 * c) {
            return Err(EnergyError::InvalidBulk { a, b, c });
        }
        let s = (b + (b * b - 24.0 * a * c).sqrt()) / (4.0 * c);
        // value of the un-offset potential on the well, negated
        let d = -(2.0 * a * s * s / 3.0 - 4.0 * b * s * s * s / 27.0 + 2.0 * c * s.powi(4) / 9.0);
        Ok(ClassicBulk { a, b, c, d, s })
    }

    /// Well scalar `s = (b + √(b² - 24ac)) / 4c`.
    pub fn s(&self) -> f64 {
        self.s
    }

    fn eval(&self, psq: f64, r: f64) -> f64 {
        let n2 = 2.0 * psq + 1.5 * r * r;
        self.a * n2 - 2.0 * self.b * r * (psq - 0.25 * r * r) + 0.5 * self.c * n2 * n2 + self.d
    }

    fn partials(&self, psq: f64, r: f64) -> (f64, f64) {
        let n2 = 2.0 * psq + 1.5 * r * r;
        let gp = 2.0 * self.a - 2.0 * self.b * r + 2.0 * self.c * n2;
        let gr = 3.0 * self.a * r - 2.0 * self.b * psq + 1.5 * self.b * r * r + 3.0 * self.c * r * n2;
        (gp, gr)
    }

    fn second(&self, psq: f64, r: f64) -> [f64; 3] {
        let gpp = 4.0 * self.c;
        let gpr = -2.0 * self.b + 6.0 * self.c * r;
        let grr = 3.0 * self.a + 3.0 * self.b * r + 6.0 * self.c * psq + 13.5 * self.c * r * r;
        [gpp, gpr, grr]
    }
}

/// Evaluates the classic potential `g_b(|p|², r)`.
pub fn g_b0(psq: f64, r: f64, spec: &ClassicBulk) -> Result<f64, EnergyError> {
    if psq < 0.0 {
        return Err(EnergyError::NegativePsq(psq));
    }
    Ok(spec.eval(psq, r))
}

pub type BulkFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type BulkPartialsFn = Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;
pub type BulkSecondFn = Arc<dyn Fn(f64, f64) -> [f64; 3] + Send + Sync>;

/// Structural constants a user-supplied potential declares about its wells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellConstants {
    pub s: f64,
    pub delta: f64,
    pub m: [f64; 4],
}

/// A user-supplied potential in the variables `(|p|², r)`.
#[derive(Clone)]
pub struct CustomBulk {
    pub density: BulkFn,
    /// `(∂g/∂|p|², ∂g/∂r)`.
    pub partials: BulkPartialsFn,
    /// `(∂²/∂|p|²², ∂²/∂|p|²∂r, ∂²/∂r²)`. When absent, differences of `partials` are used.
    pub second: Option<BulkSecondFn>,
    pub wells: WellConstants,
}

impl fmt::Debug for CustomBulk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomBulk").field("wells", &self.wells).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum BulkSpec {
    Classic(ClassicBulk),
    Custom(CustomBulk),
}

impl BulkSpec {
    pub fn classic(a: f64, b: f64, c: f64) -> Result<Self, EnergyError> {
        ClassicBulk::new(a, b, c).map(BulkSpec::Classic)
    }

    pub fn s(&self) -> f64 {
        match self {
            BulkSpec::Classic(c) => c.s(),
            BulkSpec::Custom(c) => c.wells.s,
        }
    }

    pub fn eval(&self, psq: f64, r: f64) -> f64 {
        match self {
            BulkSpec::Classic(c) => c.eval(psq, r),
            BulkSpec::Custom(c) => (c.density)(psq, r),
        }
    }

    pub fn partials(&self, psq: f64, r: f64) -> (f64, f64) {
        match self {
            BulkSpec::Classic(c) => c.partials(psq, r),
            BulkSpec::Custom(c) => (c.partials)(psq, r),
        }
    }

    pub fn second(&self, psq: f64, r: f64) -> [f64; 3] {
        match self {
            BulkSpec::Classic(c) => c.second(psq, r),
            BulkSpec::Custom(c) => match &c.second {
                Some(f) => f(psq, r),
                None => {
                    let h = 1e-6 * (1.0 + psq.abs() + r.abs());
                    let (pp, rp) = (c.partials)(psq + h, r);
                    let (pm, rm) = (c.partials)((psq - h).max(0.0), r);
                    let hp = psq + h - (psq - h).max(0.0);
                    let (qp, sp) = (c.partials)(psq, r + h);
                    let (qm, sm) = (c.partials)(psq, r - h);
                    let gpp = (pp - pm) / hp;
                    let gpr = 0.5 * ((rp - rm) / hp + (qp - qm) / (2.0 * h));
                    let grr = (sp - sm) / (2.0 * h);
                    [gpp, gpr, grr]
                }
            },
        }
    }

    /// Residual of the well conditions `g(s²/4, s/3) = 0` and `g(0, -2s/3) = 0`.
    pub fn well_defect(&self) -> f64 {
        let s = self.s();
        self.eval(0.25 * s * s, s / 3.0).abs().max(self.eval(0.0, -2.0 * s / 3.0).abs())
    }

    /// Value, gradient and Hessian in `(p1, p2, r)` coordinates.
    pub fn pr_value(&self, u: &[f64; 3]) -> f64 {
        self.eval(u[0] * u[0] + u[1] * u[1], u[2])
    }

    pub fn pr_gradient(&self, u: &[f64; 3]) -> [f64; 3] {
        let (gp, gr) = self.partials(u[0] * u[0] + u[1] * u[1], u[2]);
        [2.0 * u[0] * gp, 2.0 * u[1] * gp, gr]
    }

    pub fn pr_hessian(&self, u: &[f64; 3]) -> [[f64; 3]; 3] {
        let psq = u[0] * u[0] + u[1] * u[1];
        let (gp, _) = self.partials(psq, u[2]);
        let [gpp, gpr, grr] = self.second(psq, u[2]);
        let (p1, p2) = (u[0], u[1]);
        let h11 = 2.0 * gp + 4.0 * p1 * p1 * gpp;
        let h12 = 4.0 * p1 * p2 * gpp;
        let h22 = 2.0 * gp + 4.0 * p2 * p2 * gpp;
        let h13 = 2.0 * p1 * gpr;
        let h23 = 2.0 * p2 * gpr;
        [[h11, h12, h13], [h12, h22, h23], [h13, h23, grr]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn el(l1: f64, l2: f64, l3: f64) -> ElasticConstants {
        ElasticConstants::new(l1, l2, l3).unwrap()
    }

    #[test]
    fn mixed_examples() {
        let g = GradientSample::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(g_e_mixed(&g, &el(1.0, 0.0, 0.0)), 1.0);
        assert_eq!(g_e_mixed(&g, &el(1.0, 1.0, 1.0)), 2.0);
        assert_eq!(g_e_sos(&g, &el(1.0, 1.0, 1.0)), 2.0);
        let g = GradientSample::new(0.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        assert_eq!(g_e_mixed(&g, &el(1.0, 0.0, 0.0)), 0.75);
        assert_eq!(g_e_sos(&GradientSample::default(), &el(1.0, 0.3, -0.9)), 0.0);
    }

    #[test]
    fn constants_are_validated() {
        assert!(ElasticConstants::new(0.0, 1.0, 1.0).is_err());
        assert!(ElasticConstants::new(1.0, -1.0, -0.5).is_err());
        assert!(ElasticConstants::new(1.0, -0.4, -0.5).is_ok());
        assert!(ClassicBulk::new(0.0, 0.0, 1.0).is_err());
        assert!(ClassicBulk::new(0.0, 1.0, 0.0).is_err());
        // a must stay below b²/27c
        assert!(ClassicBulk::new(1.0 / 3.0, 3.0, 1.0).is_err());
        assert!(ClassicBulk::new(0.3, 3.0, 1.0).is_ok());
    }

    #[test]
    fn classic_bulk_examples() {
        let spec = ClassicBulk::new(0.0, 3.0, 1.0).unwrap();
        assert_eq!(spec.s(), 1.5);
        assert_relative_eq!(spec.d, 0.375, epsilon = 1e-15);
        assert!(g_b0(0.5625, 0.5, &spec).unwrap().abs() < 1e-12);
        assert!(g_b0(0.0, -1.0, &spec).unwrap().abs() < 1e-12);
        assert!(matches!(g_b0(-0.1, 0.0, &spec), Err(EnergyError::NegativePsq(_))));
        // substitution by hand: n2 = 2·0.5625 + 1.5·0.25 = 1.5
        let hand: f64 = -2.0 * 3.0 * 0.5 * (0.5625 - 0.0625) + 0.5 * 1.5 * 1.5 + 0.375;
        assert!(hand.abs() < 1e-15);
    }

    #[test]
    fn classic_wells_for_several_coefficients() {
        for &(a, b, c) in &[(0.0, 3.0, 1.0), (0.0, 1.0, 0.5), (-1.0, 2.0, 1.5), (0.02, 1.0, 1.0)] {
            let spec = BulkSpec::classic(a, b, c).unwrap();
            assert!(spec.well_defect() < 1e-10, "{a} {b} {c}");
        }
    }

    #[test]
    fn classic_is_nonnegative_on_a_sample() {
        let spec = ClassicBulk::new(-0.5, 2.0, 1.0).unwrap();
        for i in 0..60 {
            for j in 0..60 {
                let psq = i as f64 * 0.05;
                let r = -2.0 + j as f64 * 0.07;
                assert!(g_b0(psq, r, &spec).unwrap() > -1e-12);
            }
        }
    }

    #[test]
    fn well_hessian_in_invariant_variables_is_positive() {
        // Hessian of (|p|², r) ↦ g at the in-plane well
        for &(a, b, c) in &[(0.0, 3.0, 1.0), (0.0, 1.0, 0.5), (-1.0, 2.0, 1.5)] {
            let spec = BulkSpec::classic(a, b, c).unwrap();
            let s = spec.s();
            let [gpp, gpr, grr] = spec.second(0.25 * s * s, s / 3.0);
            assert!(gpp > 0.0);
            assert!(gpp * grr - gpr * gpr > 0.0, "{a} {b} {c}");
        }
    }

    #[test]
    fn custom_bulk_difference_second_partials() {
        let classic = BulkSpec::classic(0.0, 3.0, 1.0).unwrap();
        let BulkSpec::Classic(cb) = classic.clone() else { unreachable!() };
        let custom = BulkSpec::Custom(CustomBulk {
            density: Arc::new(move |p, r| cb.eval(p, r)),
            partials: Arc::new(move |p, r| cb.partials(p, r)),
            second: None,
            wells: WellConstants { s: 1.5, delta: 0.1, m: [1.0; 4] },
        });
        let got = custom.second(0.4, 0.3);
        let want = classic.second(0.4, 0.3);
        for i in 0..3 {
            assert!((got[i] - want[i]).abs() < 1e-6);
        }
        assert!(custom.well_defect() < 1e-10);
    }

    fn sample() -> impl Strategy<Value = GradientSample> {
        prop::array::uniform6(-3.0..3.0f64).prop_map(|a| GradientSample::new(a[0], a[1], a[2], a[3], a[4], a[5]))
    }

    fn elastic() -> impl Strategy<Value = ElasticConstants> {
        (0.1..3.0f64, -2.0..2.0f64, -2.0..2.0f64)
            .prop_filter("admissible", |(l1, l2, l3)| l1 + l2 + l3 > 0.05)
            .prop_map(|(l1, l2, l3)| ElasticConstants::new(l1, l2, l3).unwrap())
    }

    proptest! {
        #[test]
        fn forms_agree(g in sample(), e in elastic()) {
            let a = g_e_mixed(&g, &e);
            let b = g_e_sos(&g, &e);
            let scale = (g.dp_norm2() + g.dr_norm2()) * (e.l1.abs() + e.l2.abs() + e.l3.abs());
            prop_assert!((a - b).abs() <= 1e-12 * scale.max(1e-300));
        }

        #[test]
        fn sos_is_coercive(g in sample(), e in elastic()) {
            let c0 = e.coercivity();
            // the |∇r|² weight in the expanded form is at least 3/4 of the p weight
            let lower = c0 * (g.dp_norm2() + 0.75 * g.dr_norm2());
            prop_assert!(g_e_sos(&g, &e) >= lower * (1.0 - 1e-12) - 1e-12);
        }

        #[test]
        fn sos_gradient_matches_differences(g in sample(), e in elastic()) {
            let d = g_e_sos_grad(&g, &e).to_components();
            let base = g.to_components();
            for c in 0..3 {
                for k in 0..2 {
                    let h = 1e-6;
                    let mut plus = base;
                    let mut minus = base;
                    plus[c][k] += h;
                    minus[c][k] -= h;
                    let fd = (g_e_sos(&GradientSample::from_components(&plus), &e)
                        - g_e_sos(&GradientSample::from_components(&minus), &e)) / (2.0 * h);
                    prop_assert!((fd - d[c][k]).abs() < 1e-6 * (1.0 + d[c][k].abs()));
                }
            }
        }

        #[test]
        fn bulk_hessian_matches_differences(p1 in -1.0..1.0f64, p2 in -1.0..1.0f64, r in -1.0..1.0f64) {
            let spec = BulkSpec::classic(-0.3, 2.0, 1.2).unwrap();
            let u = [p1, p2, r];
            let hess = spec.pr_hessian(&u);
            let grad = spec.pr_gradient(&u);
            for j in 0..3 {
                let h = 1e-6;
                let mut up = u;
                let mut um = u;
                up[j] += h;
                um[j] -= h;
                let fd = (spec.pr_value(&up) - spec.pr_value(&um)) / (2.0 * h);
                prop_assert!((fd - grad[j]).abs() < 1e-6 * (1.0 + grad[j].abs()));
                let gp = spec.pr_gradient(&up);
                let gm = spec.pr_gradient(&um);
                for i in 0..3 {
                    let fd2 = (gp[i] - gm[i]) / (2.0 * h);
                    prop_assert!((fd2 - hess[i][j]).abs() < 1e-5 * (1.0 + hess[i][j].abs()));
                }
            }
        }
    }

    #[test]
    fn quadratic_form_is_positive_definite() {
        use nalgebra::{Matrix6, SymmetricEigen};
        for &(l1, l2, l3) in &[(1.0, 0.0, 0.0), (1.0, 0.5, 0.5), (1.0, -0.3, -0.4), (0.5, 2.0, 1.0)] {
            let e = el(l1, l2, l3);
            let a = g_e_matrix(&e);
            let m = Matrix6::from_fn(|i, j| a[i][j]);
            assert!((m - m.transpose()).abs().max() < 1e-14);
            let ev = SymmetricEigen::new(m).eigenvalues;
            // ½ gᵀAg ≥ c0 (|∇p|² + ¾|∇r|²)  ⇒  λ_min(A) ≥ 2·c0·¾
            assert!(ev.min() >= 1.5 * e.coercivity() - 1e-12, "{l1} {l2} {l3}: {}", ev.min());
        }
    }
}
