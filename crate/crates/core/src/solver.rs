//! Newton minimization of the discrete energies with fixed boundary values
//! and ε-continuation.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{BoundaryData, DomainError, Grid, NodeKind};
use crate::energy::{
    discrete_energy, discrete_gradient, CshModel, EnergyBreakdown, EnergyError, GlModel, HessianStructure, LdgModel,
    LocalModel, ModelParams,
};
use crate::field::{Field, PRField, PlanarField};
use crate::renorm::{HarmonicSolver, RenormError};
use crate::sparse::{cholesky, SparseError, Symbolic};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("energy became non-finite at eps = {eps}")]
    Diverged { eps: f64 },
    #[error("initial defect centers are {distance:.4} apart or from the boundary; need more than {limit:.4}")]
    DefectsTooClose { distance: f64, limit: f64 },
    #[error("{centers} initial centers for boundary degree {k}")]
    CenterCountMismatch { centers: usize, k: i32 },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Renorm(#[from] RenormError),
}

/// Decreasing ε-ladder with per-rung iteration and tolerance settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSchedule {
    pub eps: Vec<f64>,
    pub max_iter: usize,
    /// Residual tolerance in units of `s²/ε`.
    pub tol: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Largest nodal change allowed in one step, in units of `|s|`.
    pub max_step: f64,
    /// Uniform noise of this amplitude (times `|s|`) added before every rung after the first.
    pub perturbation: Option<f64>,
    pub seed: u64,
}

impl Default for SolveSchedule {
    fn default() -> Self {
        SolveSchedule {
            eps: vec![0.1],
            max_iter: 200,
            tol: 1e-6,
            armijo: 1e-4,
            max_step: 0.5,
            perturbation: None,
            seed: 0,
        }
    }
}

impl SolveSchedule {
    pub fn single(eps: f64) -> Self {
        SolveSchedule { eps: vec![eps], ..Default::default() }
    }

    /// Rungs from `from` down to `to` with ratio at most `ratio` between neighbors,
    /// ending exactly at `to`.
    pub fn ladder(from: f64, to: f64, ratio: f64) -> Self {
        let steps = ((from / to).ln() / ratio.ln()).ceil().max(0.0) as usize;
        Self::geometric(from, to, steps + 1)
    }

    /// `rungs` geometrically spaced values from `from` to `to`.
    pub fn geometric(from: f64, to: f64, rungs: usize) -> Self {
        let eps = if rungs <= 1 {
            vec![to]
        } else {
            (0..rungs).map(|i| from * (to / from).powf(i as f64 / (rungs - 1) as f64)).collect()
        };
        SolveSchedule { eps, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::InvalidSchedule(m.to_string()));
        if self.eps.is_empty() {
            return bad("empty epsilon ladder");
        }
        if self.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return bad("epsilon values must be positive");
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return bad("epsilon ladder must be strictly decreasing");
        }
        if !(self.tol > 0.0) || !(self.armijo > 0.0 && self.armijo < 0.5) || !(self.max_step > 0.0) {
            return bad("tolerances must be positive and the Armijo constant below 1/2");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RungStatus {
    Converged,
    /// No step along the Newton direction lowered the energy.
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RungReport {
    pub eps: f64,
    /// Energy of the warm start at this ε.
    pub start_energy: f64,
    pub energy: EnergyBreakdown,
    /// Max-norm of the nodal residual `|∂E/∂u_n| / w_n` over interior nodes.
    pub residual: f64,
    pub tolerance: f64,
    pub iterations: usize,
    pub status: RungStatus,
    /// Energy after every accepted step, starting from the warm start.
    pub history: Vec<f64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolveReport {
    pub rungs: Vec<RungReport>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.rungs.iter().all(|r| r.status == RungStatus::Converged)
    }

    pub fn last(&self) -> Option<&RungReport> {
        self.rungs.last()
    }
}

/// Max-norm over interior nodes of the lumped strong-form residual.
pub fn nodal_residual<const N: usize>(grid: &Grid, grad: &[[f64; N]]) -> f64 {
    grid.free_nodes
        .iter()
        .map(|&n| grad[n].iter().fold(0.0_f64, |m, v| m.max(v.abs())) / grid.node_weight[n])
        .fold(0.0, f64::max)
}

/// Sparse Newton machinery for one grid and one set of elastic constants.
pub struct NewtonSystem<const N: usize> {
    structure: HessianStructure<N>,
    symbolic: Arc<Symbolic>,
    elastic: Vec<f64>,
}

struct Settings {
    tol: f64,
    max_iter: usize,
    armijo: f64,
    max_step: f64,
}

impl<const N: usize> NewtonSystem<N> {
    pub fn new<M: LocalModel<N>>(grid: &Grid, model: &M) -> Self {
        let structure = HessianStructure::<N>::new(grid);
        let symbolic = Arc::new(Symbolic::analyze(&structure.pattern, structure.order.clone()));
        let elastic = structure.elastic_values(grid, model);
        NewtonSystem { structure, symbolic, elastic }
    }

    /// Solves `(H + μ·diag(mass)) d = rhs`; returns `d` and `dᵀ H d` for the unshifted `H`.
    /// Fails when the shifted matrix is not positive definite.
    fn damped_step<M: LocalModel<N>>(&self, hessian: &[f64], shift: &[f64], mu: f64, rhs: &[f64]) -> Option<(Vec<f64>, f64)> {
        let mut values = hessian.to_vec();
        if mu > 0.0 {
            for (i, &m) in shift.iter().enumerate() {
                values[self.structure.diagonal(i)] += mu * m;
            }
        }
        let factor = cholesky(&self.symbolic, &values).ok()?;
        let d = factor.solve(rhs).ok()?;
        let hd = self.structure.pattern.matvec(hessian, &d);
        let curvature = d.iter().zip(&hd).map(|(a, b)| a * b).sum();
        Some((d, curvature))
    }

    fn descend<M: LocalModel<N>>(&self, field: &mut Field<N>, model: &M, eps: f64, set: &Settings) -> Result<RungReport, SolveError> {
        let start = Instant::now();
        let grid = Arc::clone(&field.grid);
        let mut energy = discrete_energy(field, model);
        if !energy.total.is_finite() {
            return Err(SolveError::Diverged { eps });
        }
        let start_energy = energy.total;
        let mut history = vec![energy.total];
        let mut status = RungStatus::MaxIterations;
        let mut iterations = 0;
        let mut grad = discrete_gradient(field, model);
        let mut residual = nodal_residual(&grid, &grad);
        // damping acts like a bulk curvature of size μ·ε⁻² on every node
        let bulk = if model.bulk_scale() > 0.0 { model.bulk_scale() } else { 1.0 };
        let shift: Vec<f64> =
            grid.free_nodes.iter().flat_map(|&n| std::iter::repeat(bulk * grid.node_weight[n]).take(N)).collect();
        let mut mu = 0.0_f64;
        let mut attempts = 0usize;
        while iterations < set.max_iter && attempts < 4 * set.max_iter {
            if residual < set.tol {
                status = RungStatus::Converged;
                break;
            }
            let rhs: Vec<f64> = grid.free_nodes.iter().flat_map(|&n| grad[n].map(|v| -v)).collect();
            let mut hessian = self.elastic.clone();
            self.structure.add_bulk(&mut hessian, field, model, false);
            let x0 = field.free_vector();
            let mut accepted = false;
            while attempts < 4 * set.max_iter {
                attempts += 1;
                let Some((dir, curvature)) = self.damped_step::<M>(&hessian, &shift, mu, &rhs) else {
                    mu = (4.0 * mu).max(MU_MIN);
                    continue;
                };
                let biggest = dir.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                if biggest > set.max_step {
                    mu = (4.0 * mu).max(MU_MIN);
                    continue;
                }
                let slope: f64 = -rhs.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
                let predicted = -(slope + 0.5 * curvature);
                let trial: Vec<f64> = x0.iter().zip(&dir).map(|(x, d)| x + d).collect();
                field.set_free(&trial);
                let e = discrete_energy(field, model);
                let actual = energy.total - e.total;
                // below rounding of the total only monotonicity can be checked
                let rounding = predicted.abs() <= 1e-13 * energy.total.abs().max(1.0);
                let good = e.total.is_finite() && actual >= 0.0 && (rounding || actual >= set.armijo * predicted);
                if good {
                    if !rounding && actual > 0.75 * predicted {
                        mu = if mu <= MU_MIN { 0.0 } else { 0.25 * mu };
                    }
                    energy = e;
                    accepted = true;
                    break;
                }
                field.set_free(&x0);
                if rounding || mu > MU_MAX {
                    break;
                }
                mu = (4.0 * mu).max(MU_MIN);
            }
            if !accepted {
                field.set_free(&x0);
                status = RungStatus::Stalled;
                break;
            }
            history.push(energy.total);
            iterations += 1;
            grad = discrete_gradient(field, model);
            residual = nodal_residual(&grid, &grad);
        }
        if residual < set.tol {
            status = RungStatus::Converged;
        }
        Ok(RungReport {
            eps,
            start_energy,
            energy,
            residual,
            tolerance: set.tol,
            iterations,
            status,
            history,
            wall_time: start.elapsed(),
        })
    }
}

const MU_MIN: f64 = 1e-8;
const MU_MAX: f64 = 1e8;

fn perturb<const N: usize>(field: &mut Field<N>, amplitude: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &n in &field.grid.free_nodes {
        for v in field.values[n].iter_mut() {
            *v += amplitude * rng.gen_range(-1.0..1.0);
        }
    }
}

/// Runs the ladder on any local model built per ε; `unit` is the squared
/// field scale used for the tolerance and step limits.
pub fn minimize_model<const N: usize, M: LocalModel<N>>(
    field: Field<N>,
    schedule: &SolveSchedule,
    unit: f64,
    make_model: impl Fn(f64) -> Result<M, SolveError>,
) -> Result<(Field<N>, SolveReport), SolveError> {
    minimize_model_observed(field, schedule, unit, make_model, |_, _| {})
}

/// [`minimize_model`] calling `observe` with the field and report after every rung.
pub fn minimize_model_observed<const N: usize, M: LocalModel<N>>(
    mut field: Field<N>,
    schedule: &SolveSchedule,
    unit: f64,
    make_model: impl Fn(f64) -> Result<M, SolveError>,
    mut observe: impl FnMut(&Field<N>, &RungReport),
) -> Result<(Field<N>, SolveReport), SolveError> {
    schedule.validate()?;
    let grid = Arc::clone(&field.grid);
    let first = make_model(schedule.eps[0])?;
    let system = NewtonSystem::<N>::new(&grid, &first);
    let mut report = SolveReport::default();
    for (i, &eps) in schedule.eps.iter().enumerate() {
        let model = make_model(eps)?;
        if i > 0 {
            if let Some(amp) = schedule.perturbation {
                perturb(&mut field, amp * unit.sqrt(), schedule.seed.wrapping_add(i as u64));
            }
        }
        let settings = Settings {
            tol: schedule.tol * unit / eps,
            max_iter: schedule.max_iter,
            armijo: schedule.armijo,
            max_step: schedule.max_step * unit.sqrt(),
        };
        let rung = system.descend(&mut field, &model, eps, &settings)?;
        observe(&field, &rung);
        report.rungs.push(rung);
    }
    Ok((field, report))
}

/// Minimizes the thin-film energy along the schedule's ε-ladder, warm-starting each rung.
pub fn minimize(field: PRField, params: &ModelParams, schedule: &SolveSchedule) -> Result<(PRField, SolveReport), SolveError> {
    let s = params.s();
    minimize_model(field, schedule, s * s, |eps| Ok(LdgModel { params: params.with_eps(eps)? }))
}

/// Ginzburg–Landau minimization with well radius `well`.
pub fn minimize_gl(field: PlanarField, well: f64, schedule: &SolveSchedule) -> Result<(PlanarField, SolveReport), SolveError> {
    minimize_model(field, schedule, well * well, |eps| Ok(GlModel { eps, well }))
}

/// Minimization of the sextic-potential comparison energy.
pub fn minimize_csh(field: PlanarField, schedule: &SolveSchedule) -> Result<(PlanarField, SolveReport), SolveError> {
    minimize_model(field, schedule, 1.0, |eps| Ok(CshModel { eps }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitStrategy {
    /// Unit-degree vortices at `centers` with cores of radius `core`, phase
    /// corrected by a harmonic function to match the boundary data.
    ProductAnsatz { centers: Vec<[f64; 2]>, core: f64 },
    /// Independent uniform values in `[-|s|/2, |s|/2]² × [-|s|/3, |s|/3]`.
    Random { seed: u64 },
    /// `p = (|s|/2) e^{i·offset}`, `r = s/3` everywhere.
    ConstantWell,
}

fn core_profile(t: f64) -> f64 {
    if t >= 1.0 {
        1.0
    } else {
        1.0 - (1.0 - t) * (1.0 - t)
    }
}

/// Initial field in the admissible class: interior values from `strategy`,
/// boundary values from `bdata`.
pub fn init_field(grid: &Arc<Grid>, bdata: &BoundaryData, strategy: &InitStrategy) -> Result<PRField, SolveError> {
    let s = bdata.s;
    let amp = 0.5 * s.abs();
    let mut field = match strategy {
        InitStrategy::ConstantWell => {
            let p = [amp * bdata.offset.cos(), amp * bdata.offset.sin()];
            PRField::from_fn(Arc::clone(grid), |_| [p[0], p[1], bdata.r0])
        }
        InitStrategy::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut f = PRField::zeros(Arc::clone(grid));
            let third = s.abs() / 3.0;
            for n in 0..grid.node_count() {
                if grid.kind[n] != NodeKind::Exterior {
                    f.values[n] =
                        [rng.gen_range(-amp..=amp), rng.gen_range(-amp..=amp), rng.gen_range(-third..=third)];
                }
            }
            f
        }
        InitStrategy::ProductAnsatz { centers, core } => {
            if centers.len() != bdata.k.unsigned_abs() as usize {
                return Err(SolveError::CenterCountMismatch { centers: centers.len(), k: bdata.k });
            }
            let limit = 4.0 * grid.h;
            for (i, &b) in centers.iter().enumerate() {
                let to_boundary = if grid.shape.contains(b) {
                    let cp = grid.shape.project(b);
                    (cp.point[0] - b[0]).hypot(cp.point[1] - b[1])
                } else {
                    0.0
                };
                let to_others =
                    centers[..i].iter().map(|c| (c[0] - b[0]).hypot(c[1] - b[1])).fold(f64::INFINITY, f64::min);
                let distance = to_boundary.min(to_others);
                if distance <= limit {
                    return Err(SolveError::DefectsTooClose { distance, limit });
                }
            }
            let sign = bdata.k.signum() as f64;
            let h = HarmonicSolver::new(Arc::clone(grid))?.phase_correction(centers, bdata)?;
            let core = core.max(1e-12);
            let mut f = PRField::zeros(Arc::clone(grid));
            for n in 0..grid.node_count() {
                if grid.kind[n] == NodeKind::Exterior {
                    continue;
                }
                let x = grid.pos[n];
                let mut phase = h[n];
                let mut modulus = amp;
                for b in centers {
                    let d = [x[0] - b[0], x[1] - b[1]];
                    phase += sign * d[1].atan2(d[0]);
                    modulus *= core_profile(d[0].hypot(d[1]) / core);
                }
                f.values[n] = [modulus * phase.cos(), modulus * phase.sin(), bdata.r0];
            }
            f
        }
    };
    field.pin_boundary(bdata);
    Ok(field)
}

/// Planar field for the comparison models: the `p` part of [`init_field`]
/// rescaled so the boundary has modulus `amplitude`.
pub fn init_planar(
    grid: &Arc<Grid>,
    bdata: &BoundaryData,
    strategy: &InitStrategy,
    amplitude: f64,
) -> Result<PlanarField, SolveError> {
    let pr = init_field(grid, bdata, strategy)?;
    let scale = amplitude / (0.5 * bdata.s.abs());
    let mut f = pr.p_part();
    for v in f.values.iter_mut() {
        v[0] *= scale;
        v[1] *= scale;
    }
    f.pin_boundary_scaled(bdata, amplitude);
    Ok(f)
}

/// Max-norm of the Euler–Lagrange operator in strong form, from centered
/// differences on interior nodes whose eight lattice neighbors are interior.
///
/// The elastic part is `-Σ A ∂x∂y u`, with `A` the model's elastic matrix.
pub fn el_residual_model<const N: usize, M: LocalModel<N>>(field: &Field<N>, model: &M) -> f64 {
    let grid = field.grid.as_ref();
    let a = model.elastic_matrix();
    let dim = 2 * N;
    let h2 = grid.h * grid.h;
    let scale = model.bulk_scale();
    let v = &field.values;
    let mut worst = 0.0_f64;
    for &n in &grid.free_nodes {
        let (i, j) = grid.coords(n);
        if i == 0 || j == 0 || i + 1 >= grid.nx || j + 1 >= grid.ny {
            continue;
        }
        let at = |di: isize, dj: isize| grid.index((i as isize + di) as usize, (j as isize + dj) as usize);
        let deep = (-1..=1).all(|dj| (-1..=1).all(|di| grid.kind[at(di, dj)] == NodeKind::Interior));
        if !deep {
            continue;
        }
        let b = if scale != 0.0 { model.bulk_grad(&v[n]) } else { [0.0; N] };
        for c in 0..N {
            let mut acc = scale * b[c];
            for d in 0..N {
                let u = |di, dj| v[at(di, dj)][d];
                let uxx = (u(1, 0) - 2.0 * u(0, 0) + u(-1, 0)) / h2;
                let uyy = (u(0, 1) - 2.0 * u(0, 0) + u(0, -1)) / h2;
                let uxy = (u(1, 1) - u(1, -1) - u(-1, 1) + u(-1, -1)) / (4.0 * h2);
                let second = [[uxx, uxy], [uxy, uyy]];
                for x in 0..2 {
                    for y in 0..2 {
                        acc -= a[(2 * c + x) * dim + 2 * d + y] * second[x][y];
                    }
                }
            }
            worst = worst.max(acc.abs());
        }
    }
    worst
}

/// [`el_residual_model`] for the thin-film energy.
pub fn el_residual(field: &PRField, params: &ModelParams) -> f64 {
    el_residual_model(field, &LdgModel { params: params.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{make_boundary_data, Shape};
    use crate::energy::{gradient_g, total_g, BulkSpec};

    fn params(l1: f64, l2: f64, l3: f64, eps: f64) -> ModelParams {
        ModelParams::new(l1, l2, l3, BulkSpec::classic(0.0, 3.0, 1.0).unwrap(), eps).unwrap()
    }

    fn disk(res: f64) -> Arc<Grid> {
        Arc::new(Grid::build(Shape::disk(1.0), res).unwrap())
    }

    #[test]
    fn ladder_is_decreasing_and_hits_the_end() {
        let s = SolveSchedule::ladder(0.2, 0.03, 2f64.sqrt());
        assert!(s.validate().is_ok());
        assert_eq!(*s.eps.first().unwrap(), 0.2);
        assert!((s.eps.last().unwrap() - 0.03).abs() < 1e-15);
        assert!(s.eps.windows(2).all(|w| w[0] / w[1] <= 2f64.sqrt() + 1e-12));
        let bad = SolveSchedule { eps: vec![0.1, 0.2], ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_well_is_the_minimizer_for_degree_zero() {
        let g = disk(16.0);
        let p = params(1.0, 0.5, 0.5, 0.1);
        let bd = make_boundary_data(&g, p.s(), 0, 0.7);
        let f = init_field(&g, &bd, &InitStrategy::ConstantWell).unwrap();
        assert!(total_g(&f, &p).total.abs() < 1e-12);
        assert_eq!(el_residual(&f, &p), 0.0);
    }

    #[test]
    fn random_start_relaxes_to_the_well() {
        let g = disk(16.0);
        let p = params(1.0, 0.5, 0.5, 0.1);
        let bd = make_boundary_data(&g, p.s(), 0, 0.3);
        let f = init_field(&g, &bd, &InitStrategy::Random { seed: 11 }).unwrap();
        let (out, report) = minimize(f, &p, &SolveSchedule::single(0.1)).unwrap();
        let rung = report.last().unwrap();
        assert_eq!(rung.status, RungStatus::Converged, "{rung:?}");
        assert!(rung.energy.total < 1e-8, "{}", rung.energy.total);
        assert!(rung.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.boundary_matches(&bd));
    }

    #[test]
    fn random_init_is_reproducible() {
        let g = disk(16.0);
        let bd = make_boundary_data(&g, 1.5, 1, 0.0);
        let a = init_field(&g, &bd, &InitStrategy::Random { seed: 5 }).unwrap();
        let b = init_field(&g, &bd, &InitStrategy::Random { seed: 5 }).unwrap();
        let c = init_field(&g, &bd, &InitStrategy::Random { seed: 6 }).unwrap();
        assert_eq!(a.max_abs_diff(&b), 0.0);
        assert!(a.max_abs_diff(&c) > 0.0);
    }

    #[test]
    fn product_ansatz_matches_boundary_and_well() {
        let g = Arc::new(Grid::build(Shape::ellipse(1.0, 0.7), 32.0).unwrap());
        let bd = make_boundary_data(&g, 1.5, 2, 0.4);
        let centers = vec![[-0.3, 0.1], [0.35, -0.05]];
        let f = init_field(&g, &bd, &InitStrategy::ProductAnsatz { centers, core: 0.1 }).unwrap();
        assert!(f.boundary_matches(&bd));
        // the interior value next to each boundary node continues the boundary data
        for b in &g.boundary {
            let n = b.node;
            for m in g.neighbors(n) {
                if g.kind[m] == NodeKind::Interior {
                    let d = crate::domain::phase_increment([f.values[n][0], f.values[n][1]], [f.values[m][0], f.values[m][1]]);
                    assert!(d.abs() < 0.5, "{d}");
                }
            }
        }
        for n in 0..g.node_count() {
            let x = g.pos[n];
            let far = [[-0.3, 0.1], [0.35, -0.05]].iter().all(|c: &[f64; 2]| (x[0] - c[0]).hypot(x[1] - c[1]) > 0.1);
            if g.kind[n] != NodeKind::Exterior && far {
                assert!((f.values[n][0].hypot(f.values[n][1]) - 0.75).abs() < 1e-12);
                assert_eq!(f.values[n][2], 0.5);
            }
        }
    }

    #[test]
    fn product_ansatz_rejects_close_centers() {
        let g = disk(32.0);
        let bd = make_boundary_data(&g, 1.5, 2, 0.0);
        let centers = vec![[0.0, 0.0], [0.05, 0.0]];
        let err = init_field(&g, &bd, &InitStrategy::ProductAnsatz { centers, core: 0.1 }).unwrap_err();
        assert!(matches!(err, SolveError::DefectsTooClose { .. }));
        let err = init_field(&g, &bd, &InitStrategy::ProductAnsatz { centers: vec![[0.0, 0.0], [0.95, 0.0]], core: 0.1 })
            .unwrap_err();
        assert!(matches!(err, SolveError::DefectsTooClose { .. }));
    }

    #[test]
    fn product_ansatz_energy_grows_like_the_log_slope() {
        // E(ε) - slope·ln(1/ε) stays bounded for the unrelaxed ansatz
        let g = disk(64.0);
        let p = params(1.0, 0.5, 0.5, 0.1);
        let bd = make_boundary_data(&g, p.s(), 1, 0.0);
        let slope = p.log_slope(1);
        let rest: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&eps| {
                let f = init_field(&g, &bd, &InitStrategy::ProductAnsatz { centers: vec![[0.0, 0.0]], core: eps }).unwrap();
                total_g(&f, &p.with_eps(eps).unwrap()).total - slope * (1.0 / eps).ln()
            })
            .collect();
        let spread = rest.iter().cloned().fold(f64::MIN, f64::max) - rest.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 0.1 * slope, "{rest:?}");
    }

    #[test]
    fn disk_degree_one_converges_with_small_residual() {
        let g = disk(32.0);
        let p = params(1.0, 0.5, 0.5, 0.15);
        let bd = make_boundary_data(&g, p.s(), 1, 0.0);
        let f = init_field(&g, &bd, &InitStrategy::ProductAnsatz { centers: vec![[0.0, 0.0]], core: 0.15 }).unwrap();
        let schedule = SolveSchedule { eps: vec![0.3, 0.2, 0.15], ..Default::default() };
        let (out, report) = minimize(f, &p, &schedule).unwrap();
        assert!(report.converged(), "{:?}", report.rungs.iter().map(|r| r.status).collect::<Vec<_>>());
        for pair in report.rungs.windows(2) {
            // the warm start evaluated at the next ε bounds the next minimum
            assert!(pair[1].energy.total <= pair[1].start_energy);
            assert!(pair[1].history.windows(2).all(|w| w[1] <= w[0]));
        }
        let grad = gradient_g(&out, &p);
        assert!(nodal_residual(&g, &grad) < 1e-6 * p.s() * p.s() / 0.15);
        assert!(out.boundary_matches(&bd));
        // the core sits at the center
        let center = g.index(g.nx / 2, g.ny / 2);
        let pm = |n: usize| out.values[n][0].hypot(out.values[n][1]);
        assert!((0..g.node_count()).filter(|&n| g.kind[n] == NodeKind::Interior).all(|n| pm(n) >= pm(center) - 1e-9));
    }

    #[test]
    fn residual_decouples_without_coupling_constants() {
        // L2 + L3 = 0: the p rows are -2L1 Δp + ε⁻² ∂g_b/∂p
        let g = disk(24.0);
        let p = params(1.3, 0.4, -0.4, 0.2);
        let f = PRField::from_fn(Arc::clone(&g), |x| [0.3 * x[0] * x[0] + 0.1, 0.2 * x[0] * x[1], 0.4 + 0.5 * x[1] * x[1]]);
        let model = LdgModel { params: p.clone() };
        let mut expected = 0.0_f64;
        let p_only = el_residual_model(&f, &model);
        for &n in &g.free_nodes {
            let (i, j) = g.coords(n);
            let deep = (0..9).all(|k| g.kind[g.index(i + k % 3 - 1, j + k / 3 - 1)] == NodeKind::Interior);
            if !deep {
                continue;
            }
            let b = model.bulk_grad(&f.values[n]);
            let lap = [0.6, 0.0, 1.0];
            let coef = [2.0 * 1.3, 2.0 * 1.3, 1.5 * 1.3];
            for c in 0..3 {
                expected = expected.max((-coef[c] * lap[c] + b[c] / 0.04).abs());
            }
        }
        assert!((p_only - expected).abs() < 1e-9 * expected, "{p_only} vs {expected}");
    }

    #[test]
    fn residual_of_minimizers_sits_at_solver_tolerance() {
        let p = params(1.0, 0.5, 0.5, 0.25);
        for r in [16.0, 32.0] {
            let g = disk(r);
            let bd = make_boundary_data(&g, p.s(), 1, 0.0);
            let f = init_field(&g, &bd, &InitStrategy::ProductAnsatz { centers: vec![[0.0, 0.0]], core: 0.25 }).unwrap();
            let before = el_residual(&f, &p);
            let (out, report) = minimize(f, &p, &SolveSchedule::single(0.25)).unwrap();
            let after = el_residual(&out, &p);
            assert!(after <= report.last().unwrap().tolerance, "{after}");
            assert!(after < 1e-6 * before);
        }
    }

    #[test]
    fn planar_models_converge() {
        let g = disk(32.0);
        let bd = make_boundary_data(&g, 1.5, 1, 0.0);
        let strat = InitStrategy::ProductAnsatz { centers: vec![[0.0, 0.0]], core: 0.2 };
        let f = init_planar(&g, &bd, &strat, 1.0).unwrap();
        let (_, report) = minimize_gl(f.clone(), 1.0, &SolveSchedule::single(0.2)).unwrap();
        assert!(report.converged());
        let (_, report) = minimize_csh(f, &SolveSchedule::single(0.2)).unwrap();
        assert!(report.converged());
    }
}
