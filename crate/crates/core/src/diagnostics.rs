//! Checks on solved fields: the disk Pohozaev balance, the bulk bound along a
//! ladder, log-scaling fits and the null-Lagrangian energy shift.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{winding_of_samples, DomainError, Grid, Shape};
use crate::energy::{corollary_shift_expected, total_f, total_g, ModelParams};
use crate::field::PRField;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("domain must be a disk centered at the origin")]
    NotADisk,
    #[error("need at least 4 samples spanning a factor of 4 in epsilon (got {count} spanning {span:.2})")]
    InsufficientSamples { count: usize, span: f64 },
    #[error("sampling point {0:?} fell outside the triangulation")]
    OffGrid([f64; 2]),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Boundary and interior terms of the Pohozaev balance on a disk of radius `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PohozaevReport {
    pub radius: f64,
    /// `R (L1 + (L2+L3)/2) ∮ |p_τ|²`.
    pub tangential_p: f64,
    /// `R (L1 + (L2+L3)/2) ∮ |p_ν|²`.
    pub normal_p: f64,
    /// `R (3L1/4 + (L2+L3)/8) ∮ |r_ν|²`.
    pub normal_r: f64,
    /// `R (3L1/4 + (L2+L3)/8) ∮ |r_τ|²`, zero for constant `r` data.
    pub tangential_r: f64,
    /// `((L2+L3)/2) R ∮ r_ν (cos 2θ, sin 2θ)·p_ν`.
    pub mixed: f64,
    /// `R |L2+L3|/2 ∮ (|r_ν|²/4 + |p_ν|²)`, an upper bound for `|mixed|`.
    pub mixed_bound: f64,
    /// `2 ε⁻² ∫ g_b`.
    pub interior: f64,
    /// `normal_p - tangential_p + normal_r - tangential_r + mixed + interior`, zero for exact solutions.
    pub residual: f64,
    /// `|residual| / tangential_p`.
    pub relative_residual: f64,
    /// Whether `tangential_p >= interior`.
    pub inequality_holds: bool,
}

fn require_disk(grid: &Grid) -> Result<f64, DiagnosticsError> {
    match grid.shape {
        Shape::Disk { center, radius } if center[0].abs() < 1e-12 && center[1].abs() < 1e-12 => Ok(radius),
        _ => Err(DiagnosticsError::NotADisk),
    }
}

/// Derivative at the middle of three samples at signed offsets `-a`, `0`, `b`.
fn three_point(fm: f64, f0: f64, fp: f64, a: f64, b: f64) -> f64 {
    (a * a * fp - b * b * fm + (b * b - a * a) * f0) / (a * b * (a + b))
}

/// Evaluates every term of the disk Pohozaev balance. Normal derivatives use a
/// one-sided second-order stencil of step `h` into the domain; tangential ones
/// use the boundary loop.
pub fn pohozaev_check(field: &PRField, params: &ModelParams) -> Result<PohozaevReport, DiagnosticsError> {
    let grid = field.grid.as_ref();
    let radius = require_disk(grid)?;
    let el = &params.elastic;
    let coupling = el.coupling();
    let a_p = el.l1 + 0.5 * coupling;
    let a_r = 0.75 * el.l1 + 0.125 * coupling;
    let m = grid.boundary.len();
    let weights = grid.boundary_weights();
    let step = grid.h;
    let mut sums = [0.0; 6];
    for (i, b) in grid.boundary.iter().enumerate() {
        let x = grid.pos[b.node];
        let u0 = field.values[b.node];
        let inward = |d: f64| {
            let y = [x[0] - d * b.normal[0], x[1] - d * b.normal[1]];
            grid.interpolate(&field.values, y).ok_or(DiagnosticsError::OffGrid(y))
        };
        let (u1, u2) = (inward(step)?, inward(2.0 * step)?);
        let nu: Vec<f64> = (0..3).map(|c| (3.0 * u0[c] - 4.0 * u1[c] + u2[c]) / (2.0 * step)).collect();
        let (prev, next) = (&grid.boundary[(i + m - 1) % m], &grid.boundary[(i + 1) % m]);
        let (xp, xn) = (grid.pos[prev.node], grid.pos[next.node]);
        let a = (x[0] - xp[0]).hypot(x[1] - xp[1]);
        let c = (xn[0] - x[0]).hypot(xn[1] - x[1]);
        let (vp, vn) = (field.values[prev.node], field.values[next.node]);
        let tau: Vec<f64> = (0..3).map(|k| three_point(vp[k], u0[k], vn[k], a, c)).collect();
        let theta2 = 2.0 * x[1].atan2(x[0]);
        let w = weights[i];
        sums[0] += w * (tau[0] * tau[0] + tau[1] * tau[1]);
        sums[1] += w * (nu[0] * nu[0] + nu[1] * nu[1]);
        sums[2] += w * nu[2] * nu[2];
        sums[3] += w * tau[2] * tau[2];
        sums[4] += w * nu[2] * (theta2.cos() * nu[0] + theta2.sin() * nu[1]);
        sums[5] += w * (0.25 * nu[2] * nu[2] + nu[0] * nu[0] + nu[1] * nu[1]);
    }
    let tangential_p = radius * a_p * sums[0];
    let normal_p = radius * a_p * sums[1];
    let normal_r = radius * a_r * sums[2];
    let tangential_r = radius * a_r * sums[3];
    let mixed = 0.5 * coupling * radius * sums[4];
    let mixed_bound = 0.5 * coupling.abs() * radius * sums[5];
    let interior = 2.0 * total_g(field, params).bulk;
    let residual = normal_p - tangential_p + normal_r - tangential_r + mixed + interior;
    Ok(PohozaevReport {
        radius,
        tangential_p,
        normal_p,
        normal_r,
        tangential_r,
        mixed,
        mixed_bound,
        interior,
        residual,
        relative_residual: if tangential_p > 0.0 { residual.abs() / tangential_p } else { residual.abs() },
        inequality_holds: tangential_p >= interior,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkBoundRow {
    pub eps: f64,
    /// `ε⁻² ∫ g_b`.
    pub scaled_bulk: f64,
    /// Ratio to the previous row, if that row is positive.
    pub growth: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkBoundTable {
    pub rows: Vec<BulkBoundRow>,
    /// Growth ratio above which a rung is flagged.
    pub threshold: f64,
    pub any_flagged: bool,
}

/// Tabulates `(ε, ε⁻²∫g_b)` along a ladder and flags rungs where it grows by more than 50%.
pub fn bulk_bound_monitor(ladder: &[(f64, f64)]) -> BulkBoundTable {
    let threshold = 1.5;
    let mut rows = Vec::with_capacity(ladder.len());
    for (i, &(eps, scaled_bulk)) in ladder.iter().enumerate() {
        let growth = if i > 0 && ladder[i - 1].1 > 0.0 { Some(scaled_bulk / ladder[i - 1].1) } else { None };
        rows.push(BulkBoundRow { eps, scaled_bulk, growth, flagged: growth.is_some_and(|g| g > threshold) });
    }
    let any_flagged = rows.iter().any(|r| r.flagged);
    BulkBoundTable { rows, threshold, any_flagged }
}

/// Which log-scaling law an energy ladder is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlopeTarget {
    /// Tensor energy: `(2L1+L2+L3) s² π k / 4`.
    Ldg { k: i32, s: f64, l1: f64, l2: f64, l3: f64 },
    /// Ginzburg–Landau with well radius `well`: `π k well²`.
    Gl { k: i32, well: f64 },
    /// Chern–Simons–Higgs: `π k`.
    Csh { k: i32 },
}

impl SlopeTarget {
    pub fn slope(&self) -> f64 {
        match *self {
            SlopeTarget::Ldg { k, s, l1, l2, l3 } => (2.0 * l1 + l2 + l3) * s * s * PI * k as f64 / 4.0,
            SlopeTarget::Gl { k, well } => PI * k as f64 * well * well,
            SlopeTarget::Csh { k } => PI * k as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsFit {
    /// `(ε, energy)` pairs.
    pub samples: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub target: SlopeTarget,
    pub target_slope: f64,
    pub relative_error: f64,
    /// Slope refit without the largest-ε sample.
    pub slope_without_coarsest: f64,
    /// Root-mean-square deviation of the samples from the fitted line.
    pub rms_residual: f64,
}

fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Least-squares fit of energy against `ln(1/ε)`.
pub fn fit_energy_asymptotics(samples: &[(f64, f64)], target: SlopeTarget) -> Result<AsymptoticsFit, DiagnosticsError> {
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    let span = if samples.is_empty() || lo <= 0.0 { 0.0 } else { hi / lo };
    if samples.len() < 4 || span < 4.0 - 1e-9 {
        return Err(DiagnosticsError::InsufficientSamples { count: samples.len(), span });
    }
    let xs: Vec<f64> = samples.iter().map(|s| (1.0 / s.0).ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (slope, intercept) = line_fit(&xs, &ys);
    let coarsest = samples.iter().enumerate().max_by(|a, b| a.1 .0.total_cmp(&b.1 .0)).map(|(i, _)| i).unwrap();
    let (rx, ry): (Vec<f64>, Vec<f64>) =
        xs.iter().zip(&ys).enumerate().filter(|(i, _)| *i != coarsest).map(|(_, (x, y))| (*x, *y)).unzip();
    let slope_without_coarsest = line_fit(&rx, &ry).0;
    let rms_residual =
        (xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
    let target_slope = target.slope();
    Ok(AsymptoticsFit {
        samples: samples.to_vec(),
        slope,
        intercept,
        target,
        target_slope,
        relative_error: (slope - target_slope).abs() / target_slope.abs(),
        slope_without_coarsest,
        rms_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftCheck {
    pub g: f64,
    pub f: f64,
    /// Measured `G - F`.
    pub shift: f64,
    /// Closed form `(L3 - L2 + |L3+L2|) s² π k / 4`.
    pub expected: f64,
    pub k: i32,
    pub relative_error: f64,
}

/// Compares `G - F` with its closed form, taking `k` from the boundary winding of the field.
pub fn corollary_shift_check(field: &PRField, params: &ModelParams) -> Result<ShiftCheck, DiagnosticsError> {
    let grid = field.grid.as_ref();
    let trace: Vec<[f64; 2]> = grid.boundary.iter().map(|b| [field.values[b.node][0], field.values[b.node][1]]).collect();
    let k = winding_of_samples(&trace, 0.25 * params.s().abs())?;
    let g = total_g(field, params).total;
    let f = total_f(field, params);
    let shift = g - f;
    let expected = corollary_shift_expected(params, k);
    let relative_error = if expected == 0.0 { shift.abs() } else { (shift - expected).abs() / expected.abs() };
    Ok(ShiftCheck { g, f, shift, expected, k, relative_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_boundary_data;
    use crate::energy::BulkSpec;
    use crate::solver::{init_field, InitStrategy};
    use std::sync::Arc;

    fn params(l2: f64, l3: f64) -> ModelParams {
        ModelParams::new(1.0, l2, l3, BulkSpec::classic(-0.5, 1.0, 1.0).unwrap(), 0.1).unwrap()
    }

    #[test]
    fn constant_well_balance_is_trivial() {
        let p = params(0.5, 0.5);
        let s = p.s();
        let g = Arc::new(Grid::build(Shape::disk(1.0), 32.0).unwrap());
        let f = PRField::from_fn(Arc::clone(&g), |_| [0.5 * s, 0.0, s / 3.0]);
        let r = pohozaev_check(&f, &p).unwrap();
        for v in [r.tangential_p, r.normal_p, r.normal_r, r.tangential_r, r.mixed, r.interior, r.residual] {
            assert!(v.abs() < 1e-10, "{r:?}");
        }
        assert!(r.inequality_holds);
    }

    #[test]
    fn off_center_disk_is_rejected() {
        let p = params(0.0, 0.0);
        let g = Arc::new(Grid::build(Shape::disk(1.0).translated([0.1, 0.0]), 32.0).unwrap());
        let f = PRField::zeros(Arc::clone(&g));
        assert!(matches!(pohozaev_check(&f, &p), Err(DiagnosticsError::NotADisk)));
        let g = Arc::new(Grid::build(Shape::ellipse(1.0, 0.7), 32.0).unwrap());
        let f = PRField::zeros(g);
        assert!(matches!(pohozaev_check(&f, &p), Err(DiagnosticsError::NotADisk)));
    }

    #[test]
    fn boundary_derivatives_of_a_quadratic_texture() {
        // p = (x² - y², 2xy) has |p_ν|² = |p_τ|² = 4 on the unit circle
        let p = ModelParams::new(1.0, 0.0, 0.0, BulkSpec::classic(-0.5, 1.0, 1.0).unwrap(), 0.1).unwrap();
        let g = Arc::new(Grid::build(Shape::disk(1.0), 96.0).unwrap());
        let f = PRField::from_fn(Arc::clone(&g), |x| [x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1], 0.0]);
        let r = pohozaev_check(&f, &p).unwrap();
        let exact = 4.0 * 2.0 * PI;
        assert!((r.tangential_p - exact).abs() < 0.02 * exact, "{r:?}");
        assert!((r.normal_p - exact).abs() < 0.03 * exact, "{r:?}");
    }

    #[test]
    fn mixed_term_matches_closed_form_and_bound() {
        // r = ρ², p = ρ²(cos 2θ, sin 2θ): r_ν = 2, p_ν = 2(cos 2θ, sin 2θ) on the unit circle,
        // so ∮ r_ν (cos 2θ, sin 2θ)·p_ν = 8π
        let p = params(0.5, 0.5);
        let g = Arc::new(Grid::build(Shape::disk(1.0), 96.0).unwrap());
        let f = PRField::from_fn(Arc::clone(&g), |x| {
            [x[0] * x[0] - x[1] * x[1], 2.0 * x[0] * x[1], x[0] * x[0] + x[1] * x[1]]
        });
        let r = pohozaev_check(&f, &p).unwrap();
        let exact = 0.5 * 1.0 * 8.0 * PI;
        assert!((r.mixed - exact).abs() < 0.03 * exact, "{r:?}");
        assert!(r.mixed.abs() <= r.mixed_bound);
    }

    #[test]
    fn slope_targets() {
        let t = SlopeTarget::Ldg { k: 1, s: 2.0, l1: 1.0, l2: 0.0, l3: 0.0 };
        assert!((t.slope() - 2.0 * PI).abs() < 1e-12);
        assert!((SlopeTarget::Gl { k: 1, well: 1.0 }.slope() - PI).abs() < 1e-12);
        assert!((SlopeTarget::Csh { k: 2 }.slope() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn exact_log_law_is_recovered() {
        let samples: Vec<(f64, f64)> =
            [0.2, 0.14, 0.1, 0.07, 0.05].iter().map(|&e: &f64| (e, 3.0 * (1.0 / e).ln() + 1.25)).collect();
        let fit = fit_energy_asymptotics(&samples, SlopeTarget::Csh { k: 1 }).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12 && (fit.intercept - 1.25).abs() < 1e-12);
        assert!((fit.slope_without_coarsest - 3.0).abs() < 1e-12);
        assert!((fit.relative_error - (3.0 - PI).abs() / PI).abs() < 1e-12);
    }

    #[test]
    fn short_ladders_are_rejected() {
        let few = [(0.2, 1.0), (0.1, 2.0), (0.05, 3.0)];
        assert!(matches!(
            fit_energy_asymptotics(&few, SlopeTarget::Csh { k: 1 }),
            Err(DiagnosticsError::InsufficientSamples { count: 3, .. })
        ));
        let narrow = [(0.2, 1.0), (0.15, 2.0), (0.1, 3.0), (0.08, 4.0)];
        assert!(matches!(
            fit_energy_asymptotics(&narrow, SlopeTarget::Csh { k: 1 }),
            Err(DiagnosticsError::InsufficientSamples { count: 4, .. })
        ));
    }

    #[test]
    fn bulk_monitor_flags_growth() {
        let t = bulk_bound_monitor(&[(0.2, 0.0), (0.1, 0.0)]);
        assert!(!t.any_flagged);
        let t = bulk_bound_monitor(&[(0.2, 1.0), (0.14, 1.2), (0.1, 1.1), (0.07, 2.0)]);
        let flags: Vec<bool> = t.rows.iter().map(|r| r.flagged).collect();
        assert_eq!(flags, vec![false, false, false, true]);
    }

    #[test]
    fn shift_matches_closed_form_and_ignores_interior() {
        let g = Arc::new(Grid::build(Shape::disk(1.0), 32.0).unwrap());
        let p = ModelParams::new(1.0, 0.0, 1.0, BulkSpec::classic(-0.5, 1.0, 1.0).unwrap(), 0.1).unwrap();
        let bd = make_boundary_data(&g, p.s(), 1, 0.0);
        let a = init_field(&g, &bd, &InitStrategy::Random { seed: 1 }).unwrap();
        let b = init_field(&g, &bd, &InitStrategy::Random { seed: 2 }).unwrap();
        let ca = corollary_shift_check(&a, &p).unwrap();
        let cb = corollary_shift_check(&b, &p).unwrap();
        assert_eq!(ca.k, 1);
        assert!((ca.shift - cb.shift).abs() < 1e-10);
        assert!((ca.expected - 2.0 * p.s() * p.s() * PI / 4.0).abs() < 1e-12);
        let zero = ModelParams::new(1.0, 0.0, 0.0, BulkSpec::classic(-0.5, 1.0, 1.0).unwrap(), 0.1).unwrap();
        assert!(corollary_shift_check(&a, &zero).unwrap().shift.abs() < 1e-10);
    }
}
