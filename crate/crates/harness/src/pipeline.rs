//! Executes a run config: renormalized-energy search, minimization along the
//! ε-ladder, per-rung observables and the enabled checks.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use nemfilm_core::defects::{
    detect_vortices, director_field, vortex_well_metrics, well_metrics, DefectSet, DirectorField, WellMetrics,
};
use nemfilm_core::diagnostics::{
    bulk_bound_monitor, corollary_shift_check, fit_energy_asymptotics, pohozaev_check, SlopeTarget,
};
use nemfilm_core::domain::{make_boundary_data, BoundaryData, Grid, Shape};
use nemfilm_core::energy::{CshModel, GlModel, LdgModel, ModelParams};
use nemfilm_core::field::{Field, PRField, PlanarField};
use nemfilm_core::io;
use nemfilm_core::renorm::{
    annulus_fit, argmin_w, cell_problem_l, renormalized_w, scan_points, Configuration, HarmonicSolver, SearchMethod,
    WEvaluator, WMinimum,
};
use nemfilm_core::solver::{
    el_residual_model, init_field, init_planar, minimize_model_observed, InitStrategy, RungReport, RungStatus,
    SolveReport, SolveSchedule,
};

use crate::config::{EnergyKind, InitKind, RunConfig};
use crate::report::{
    AnnulusSummary, CellSummary, Check, GridSummary, PositionMatch, RunReport, RungSummary, StartSummary, SCHEMA,
};
use crate::HarnessError;

/// A solved field of either kind.
#[derive(Debug, Clone)]
pub enum Snapshot {
    Tensor(PRField),
    Planar(PlanarField),
}

impl Snapshot {
    pub fn grid(&self) -> &Arc<Grid> {
        match self {
            Snapshot::Tensor(f) => &f.grid,
            Snapshot::Planar(f) => &f.grid,
        }
    }

    /// The planar part: `p` for tensor fields.
    pub fn planar(&self) -> Vec<[f64; 2]> {
        match self {
            Snapshot::Tensor(f) => f.values.iter().map(|v| [v[0], v[1]]).collect(),
            Snapshot::Planar(f) => f.values.clone(),
        }
    }
}

pub struct RunOutcome {
    pub report: RunReport,
    /// Field after each rung of the chosen start.
    pub fields: Vec<Snapshot>,
    pub director: Option<DirectorField>,
}

struct Solved {
    report: SolveReport,
    fields: Vec<Snapshot>,
}

fn solve_failed(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::SolveFailed(e.to_string())
}

fn observe<const N: usize>(
    rungs: &mut Vec<Snapshot>,
    wrap: fn(Field<N>) -> Snapshot,
) -> impl FnMut(&Field<N>, &RungReport) + '_ {
    move |f, _| rungs.push(wrap(f.clone()))
}

fn solve_from(
    config: &RunConfig,
    grid: &Arc<Grid>,
    bd: &BoundaryData,
    params: &ModelParams,
    strategy: &InitStrategy,
    schedule: &SolveSchedule,
) -> Result<Solved, HarnessError> {
    let s = params.s();
    let mut fields = Vec::new();
    let report = match config.model.energy {
        EnergyKind::Ldg => {
            let field = init_field(grid, bd, strategy).map_err(solve_failed)?;
            let make = |eps: f64| Ok(LdgModel { params: params.with_eps(eps)? });
            minimize_model_observed(field, schedule, s * s, make, observe(&mut fields, Snapshot::Tensor))
                .map_err(solve_failed)?
                .1
        }
        EnergyKind::Gl => {
            let well = config.model.well;
            let field = init_planar(grid, bd, strategy, well).map_err(solve_failed)?;
            let make = |eps: f64| Ok(GlModel { eps, well });
            minimize_model_observed(field, schedule, well * well, make, observe(&mut fields, Snapshot::Planar))
                .map_err(solve_failed)?
                .1
        }
        EnergyKind::Csh => {
            let field = init_planar(grid, bd, strategy, 1.0).map_err(solve_failed)?;
            let make = |eps: f64| Ok(CshModel { eps });
            minimize_model_observed(field, schedule, 1.0, make, observe(&mut fields, Snapshot::Planar))
                .map_err(solve_failed)?
                .1
        }
    };
    Ok(Solved { report, fields })
}

/// Rotates a configuration about the disk center so its first point lies on
/// the positive x-axis; on a disk this leaves the renormalized energy unchanged
/// and gives mirror-symmetric starts.
fn align_on_disk(points: &[[f64; 2]], center: [f64; 2]) -> Vec<[f64; 2]> {
    let Some(first) = points.first() else { return Vec::new() };
    let angle = -(first[1] - center[1]).atan2(first[0] - center[0]);
    let (c, s) = (angle.cos(), angle.sin());
    points
        .iter()
        .map(|p| {
            let d = [p[0] - center[0], p[1] - center[1]];
            [center[0] + c * d[0] - s * d[1], center[1] + s * d[0] + c * d[1]]
        })
        .collect()
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(k - 1) {
        for slot in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(slot, k - 1);
            out.push(p);
        }
    }
    out
}

/// Best match of `predicted` to `found` over relabelings and, when
/// `rotate_about` is given, rotations about that point.
fn match_positions(found: &[[f64; 2]], predicted: &[[f64; 2]], rotate_about: Option<[f64; 2]>) -> (Vec<[f64; 2]>, f64) {
    let mut best = (Vec::new(), f64::INFINITY);
    let k = found.len();
    if k == 0 || k != predicted.len() || k > 6 {
        return best;
    }
    for perm in permutations(k) {
        let mut cand: Vec<[f64; 2]> = perm.iter().map(|&i| predicted[i]).collect();
        if let Some(c) = rotate_about {
            let (mut cross, mut dot) = (0.0, 0.0);
            for (a, b) in cand.iter().zip(found) {
                let (a, b) = ([a[0] - c[0], a[1] - c[1]], [b[0] - c[0], b[1] - c[1]]);
                cross += a[0] * b[1] - a[1] * b[0];
                dot += a[0] * b[0] + a[1] * b[1];
            }
            let t = cross.atan2(dot);
            let (ct, st) = (t.cos(), t.sin());
            for p in cand.iter_mut() {
                let d = [p[0] - c[0], p[1] - c[1]];
                *p = [c[0] + ct * d[0] - st * d[1], c[1] + st * d[0] + ct * d[1]];
            }
        }
        let worst = cand.iter().zip(found).map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1])).fold(0.0, f64::max);
        if worst < best.1 {
            best = (cand, worst);
        }
    }
    best
}

fn distance_to_boundary(shape: &Shape, x: [f64; 2]) -> f64 {
    let cp = shape.project(x);
    (cp.point[0] - x[0]).hypot(cp.point[1] - x[1])
}

/// Annulus radii below half the smallest distance between points or to the boundary.
fn annulus_radii(shape: &Shape, points: &[[f64; 2]]) -> Vec<f64> {
    let mut d = points.iter().map(|&p| distance_to_boundary(shape, p)).fold(f64::INFINITY, f64::min);
    for (i, a) in points.iter().enumerate() {
        for b in &points[..i] {
            d = d.min(0.5 * (a[0] - b[0]).hypot(a[1] - b[1]));
        }
    }
    let scale = (d / 0.34).min(1.0);
    [0.05, 0.08, 0.11, 0.14, 0.17].iter().map(|r| r * scale).collect()
}

fn nonincreasing(values: &[f64], rel: f64) -> (bool, f64) {
    let worst = values.windows(2).map(|w| (w[1] - w[0]) / w[0].abs().max(1e-300)).fold(f64::NEG_INFINITY, f64::max);
    (values.len() < 2 || worst <= rel, worst)
}

/// Runs the configured experiment without touching the filesystem.
pub fn execute(config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    config.validate()?;
    let ladder = config.schedule.ladder();
    let params = config.model.params(ladder[0])?;
    let s = params.s();
    let mut checks = Vec::new();
    let mut report = RunReport {
        schema: SCHEMA,
        version: env!("CARGO_PKG_VERSION").to_string(),
        recipe: config.recipe.clone(),
        seed: config.seed,
        config: config.clone(),
        grid: None,
        starts: Vec::new(),
        solve: None,
        rungs: Vec::new(),
        defects: None,
        el_residual: None,
        w_minimum: None,
        positions: None,
        annulus: None,
        fit: None,
        bulk_bound: None,
        shift: None,
        cell_problem: None,
        checks: Vec::new(),
        passed: true,
    };
    let mut fields = Vec::new();
    let mut director = None;

    if config.solve {
        let grid = config.grid()?;
        report.grid = Some(GridSummary {
            h: grid.h,
            nodes: grid.node_count(),
            interior: grid.free_nodes.len(),
            boundary: grid.boundary.len(),
        });
        let k = config.boundary.k;
        let signed_k = if config.boundary.conjugate { -k } else { k };
        let bd = config.boundary_data(&grid, s);
        let amplitude = config.model.amplitude(s);
        let shape = grid.shape;
        let centered_disk = config.domain.shape == crate::config::ShapeKind::Disk;

        let need_w = k > 0 && (config.init.kind == InitKind::ArgminW || config.checks.w_compare || config.checks.annulus);
        let harmonic = if need_w { Some(HarmonicSolver::new(Arc::clone(&grid)).map_err(solve_failed)?) } else { None };
        // the renormalized energy is unchanged by conjugating the data
        let positive = make_boundary_data(&grid, s, k, config.boundary.offset);
        let wmin: Option<WMinimum> = match &harmonic {
            Some(solver) => {
                let mut w = argmin_w(&positive, solver, SearchMethod::Scan { points_across: config.init.scan })
                    .map_err(solve_failed)?;
                if centered_disk {
                    w.config.points = align_on_disk(&w.config.points, shape.center());
                }
                Some(w)
            }
            None => None,
        };

        let primary = match config.init.kind {
            InitKind::ArgminW if k == 0 => InitStrategy::ConstantWell,
            InitKind::ArgminW => InitStrategy::ProductAnsatz {
                centers: wmin.as_ref().expect("searched").config.points.clone(),
                core: config.init.core,
            },
            InitKind::Ansatz => InitStrategy::ProductAnsatz { centers: config.init.centers.clone(), core: config.init.core },
            InitKind::Random => InitStrategy::Random { seed: config.seed },
            InitKind::Well => InitStrategy::ConstantWell,
        };
        let schedule = config.schedule.schedule(config.seed);
        let mut starts = vec![(format!("{:?}", config.init.kind).to_lowercase(), primary)];
        for i in 0..config.init.random_starts {
            let seed = config.seed.wrapping_add(1 + i as u64);
            starts.push((format!("random-{seed}"), InitStrategy::Random { seed }));
        }
        let mut best: Option<(usize, Solved)> = None;
        for (i, (label, strategy)) in starts.iter().enumerate() {
            let solved = solve_from(config, &grid, &bd, &params, strategy, &schedule)?;
            let last = solved.report.last().expect("ladder is nonempty");
            report.starts.push(StartSummary {
                label: label.clone(),
                final_energy: last.energy.total,
                converged: solved.report.converged(),
                chosen: false,
            });
            if best.as_ref().map_or(true, |b| last.energy.total < b.1.report.last().unwrap().energy.total) {
                best = Some((i, solved));
            }
        }
        let (chosen, solved) = best.expect("at least one start");
        report.starts[chosen].chosen = true;

        let worst_ratio = solved.report.rungs.iter().map(|r| r.residual / r.tolerance).fold(0.0, f64::max);
        let converged = solved.report.rungs.iter().all(|r| r.status == RungStatus::Converged);
        checks.push(Check::new(
            "solver_converged",
            converged,
            worst_ratio,
            1.0,
            "largest final residual over its tolerance across rungs",
        ));

        // per-rung defects
        let detections: Vec<Result<DefectSet, String>> = solved
            .fields
            .iter()
            .map(|f| detect_vortices(&grid, &f.planar(), amplitude, config.checks.defect_mu).map_err(|e| e.to_string()))
            .collect();
        let final_set = detections.last().and_then(|d| d.as_ref().ok()).cloned();
        if config.checks.defects {
            let (passed, count, detail) = match detections.last() {
                Some(Ok(set)) => {
                    let want = signed_k.signum();
                    let ok = set.defects.len() == k as usize && set.defects.iter().all(|d| d.winding == want);
                    let windings: Vec<i32> = set.defects.iter().map(|d| d.winding).collect();
                    (ok, set.defects.len() as f64, format!("expected {k} defects of winding {want}, found windings {windings:?}"))
                }
                Some(Err(e)) => (false, f64::NAN, e.clone()),
                None => (false, f64::NAN, "no rungs".into()),
            };
            checks.push(Check::new("defect_count", passed, count, 0.0, detail));
        }
        let final_positions = final_set.as_ref().map(|d| d.positions()).unwrap_or_default();
        let rho = if config.checks.rho > 0.0 { config.checks.rho } else { final_set.as_ref().map_or(0.0, |d| d.rho) };

        let mut rungs = Vec::new();
        for ((rung, field), detection) in solved.report.rungs.iter().zip(&solved.fields).zip(&detections) {
            let centers = match detection {
                Ok(set) if set.defects.len() == k as usize => set.positions(),
                _ => final_positions.clone(),
            };
            let well: Option<WellMetrics> = config.checks.well.then(|| match field {
                Snapshot::Tensor(f) => well_metrics(f, s, &centers, rho, &config.checks.well_mus),
                Snapshot::Planar(f) => {
                    vortex_well_metrics(&grid, &f.values, amplitude, &centers, rho, &config.checks.well_mus)
                }
            });
            let bad_area_scaled = well.as_ref().and_then(|w| {
                w.bad_area.iter().find(|b| b.0 == config.checks.bad_set_mu).map(|b| b.1 / (rung.eps * rung.eps))
            });
            let pohozaev = match (config.checks.pohozaev, field) {
                (true, Snapshot::Tensor(f)) => {
                    let p = params.with_eps(rung.eps).map_err(solve_failed)?;
                    Some(pohozaev_check(f, &p).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?)
                }
                _ => None,
            };
            rungs.push(RungSummary {
                eps: rung.eps,
                energy: rung.energy,
                residual: rung.residual,
                tolerance: rung.tolerance,
                iterations: rung.iterations,
                status: rung.status,
                defects: detection.as_ref().ok().cloned(),
                defect_error: detection.as_ref().err().cloned(),
                well,
                bad_area_scaled,
                pohozaev,
            });
        }

        if config.checks.well && k > 0 {
            let sup_p: Vec<f64> = rungs.iter().filter_map(|r| r.well.as_ref().map(|w| w.sup_p)).collect();
            let sup_r: Vec<f64> = rungs.iter().filter_map(|r| r.well.as_ref().map(|w| w.sup_r)).collect();
            let (ok_p, worst_p) = nonincreasing(&sup_p, 0.0);
            checks.push(Check::new(
                "well_distance_p_decreasing",
                ok_p,
                worst_p,
                0.0,
                format!("largest relative rung-to-rung change of sup ||p|-|s|/2| outside radius {rho:.4}"),
            ));
            if config.model.energy == EnergyKind::Ldg {
                let (ok_r, worst_r) = nonincreasing(&sup_r, 0.0);
                checks.push(Check::new(
                    "well_distance_r_decreasing",
                    ok_r,
                    worst_r,
                    0.0,
                    format!("largest relative rung-to-rung change of sup |r-s/3| outside radius {rho:.4}"),
                ));
            }
            let scaled: Vec<(f64, f64)> = rungs.iter().filter_map(|r| r.bad_area_scaled.map(|a| (r.eps, a))).collect();
            let table = bulk_bound_monitor(&scaled);
            let growth = table.rows.iter().filter_map(|r| r.growth).fold(0.0, f64::max);
            checks.push(Check::new(
                "bad_set_bounded",
                !table.any_flagged,
                growth,
                table.threshold,
                format!("largest rung-to-rung growth of bad-set area / eps^2 at mu = {}", config.checks.bad_set_mu),
            ));
        }

        if config.checks.bulk_bound {
            let ladder: Vec<(f64, f64)> = rungs.iter().map(|r| (r.eps, r.energy.bulk)).collect();
            let table = bulk_bound_monitor(&ladder);
            let growth = table.rows.iter().filter_map(|r| r.growth).fold(0.0, f64::max);
            checks.push(Check::new(
                "bulk_bound",
                !table.any_flagged,
                growth,
                table.threshold,
                "largest rung-to-rung growth of eps^-2 * bulk integral",
            ));
            report.bulk_bound = Some(table);
        }

        if config.checks.pohozaev {
            let holds = rungs.iter().all(|r| r.pohozaev.as_ref().is_some_and(|p| p.inequality_holds));
            let margin = rungs
                .iter()
                .filter_map(|r| r.pohozaev.as_ref().map(|p| (p.tangential_p - p.interior) / p.tangential_p.max(1e-300)))
                .fold(f64::INFINITY, f64::min);
            checks.push(Check::new(
                "pohozaev_inequality",
                holds,
                margin,
                0.0,
                "smallest relative margin of the boundary term over 2 eps^-2 * bulk integral",
            ));
        }

        if config.checks.fit {
            let kk = signed_k.abs();
            let target = match config.model.energy {
                EnergyKind::Ldg => SlopeTarget::Ldg { k: kk, s, l1: config.model.l1, l2: config.model.l2, l3: config.model.l3 },
                EnergyKind::Gl => SlopeTarget::Gl { k: kk, well: config.model.well },
                EnergyKind::Csh => SlopeTarget::Csh { k: kk },
            };
            let samples: Vec<(f64, f64)> = rungs.iter().map(|r| (r.eps, r.energy.total)).collect();
            match fit_energy_asymptotics(&samples, target) {
                Ok(fit) => {
                    checks.push(Check::new(
                        "energy_slope",
                        fit.relative_error <= config.checks.fit_tolerance,
                        fit.relative_error,
                        config.checks.fit_tolerance,
                        format!("fitted slope {:.6} against {:.6}", fit.slope, fit.target_slope),
                    ));
                    report.fit = Some(fit);
                }
                Err(e) => return Err(HarnessError::ConfigInvalid(e.to_string())),
            }
        }

        let last_field = solved.fields.last().expect("ladder is nonempty");
        if config.checks.shift {
            if let Snapshot::Tensor(f) = last_field {
                let p = params.with_eps(ladder[ladder.len() - 1]).map_err(solve_failed)?;
                let shift = corollary_shift_check(f, &p).map_err(solve_failed)?;
                let passed = if shift.expected == 0.0 {
                    shift.shift.abs() <= 1e-10
                } else {
                    shift.relative_error <= config.checks.shift_tolerance
                };
                checks.push(Check::new(
                    "corollary_shift",
                    passed,
                    shift.relative_error,
                    config.checks.shift_tolerance,
                    format!("G - F = {:.6}, closed form {:.6}", shift.shift, shift.expected),
                ));
                report.shift = Some(shift);
            }
        }

        if let (Some(w), Some(solver)) = (&wmin, &harmonic) {
            if config.checks.w_compare {
                let tolerance = config.checks.position_tolerance_h * grid.h + w.scan_cell;
                let rotate = centered_disk.then(|| shape.center());
                let (predicted, max_distance) = match_positions(&final_positions, &w.config.points, rotate);
                checks.push(Check::new(
                    "defect_positions",
                    max_distance <= tolerance,
                    max_distance,
                    tolerance,
                    "largest distance from a defect to its predicted position",
                ));
                report.positions = Some(PositionMatch { found: final_positions.clone(), predicted, max_distance, tolerance });
            }
            if config.checks.annulus {
                let rhos = annulus_radii(&shape, &w.config.points);
                let fit = annulus_fit(&w.config, &positive, solver, &rhos).map_err(solve_failed)?;
                let value = renormalized_w(&w.config, &positive, solver).map_err(solve_failed)?;
                let relative_error = (fit.intercept - value).abs() / value.abs();
                checks.push(Check::new(
                    "annulus_identity",
                    relative_error <= config.checks.annulus_tolerance,
                    relative_error,
                    config.checks.annulus_tolerance,
                    format!("annulus limit {:.6} against {:.6}", fit.intercept, value),
                ));
                report.annulus = Some(AnnulusSummary { fit, w: value, relative_error });
            }
        }

        report.el_residual = Some(match last_field {
            Snapshot::Tensor(f) => el_residual_model(f, &LdgModel { params: params.with_eps(ladder[ladder.len() - 1]).map_err(solve_failed)? }),
            Snapshot::Planar(f) => match config.model.energy {
                EnergyKind::Gl => el_residual_model(f, &GlModel { eps: ladder[ladder.len() - 1], well: config.model.well }),
                _ => el_residual_model(f, &CshModel { eps: ladder[ladder.len() - 1] }),
            },
        });
        if let (Some(set), Snapshot::Tensor(f)) = (&final_set, last_field) {
            director = Some(director_field(f, set, rho));
        }
        report.defects = final_set;
        report.w_minimum = wmin;
        report.rungs = rungs;
        report.solve = Some(solved.report);
        fields = solved.fields;
    }

    if config.checks.cell_problem {
        let cell = &config.cell;
        let mut results = Vec::new();
        for &beta in &cell.betas {
            results.push(cell_problem_l(&cell.taus, &params, cell.resolution, beta).map_err(solve_failed)?);
        }
        let base = &results[0];
        // values follow decreasing τ, so a nondecreasing L(τ) never rises along them
        let worst_rise = base
            .values
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(1e-300))
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::new(
            "cell_monotone",
            worst_rise <= cell.monotone_tolerance,
            worst_rise,
            cell.monotone_tolerance,
            "largest relative increase of L as tau decreases",
        ));
        let mut spread: f64 = 0.0;
        for r in &results[1..] {
            for (a, b) in r.values.iter().zip(&base.values) {
                spread = spread.max((a - b).abs() / b.abs().max(1e-300));
            }
        }
        checks.push(Check::new(
            "cell_beta_independence",
            spread <= cell.beta_tolerance,
            spread,
            cell.beta_tolerance,
            format!("largest relative spread of L across betas {:?}", cell.betas),
        ));
        checks.push(Check::new(
            "cell_gamma_finite",
            base.gamma.is_finite(),
            base.gamma,
            f64::INFINITY,
            format!("extrapolated core energy, fit residual {:.3e}, exponent {:.3}", base.fit_residual, base.exponent),
        ));
        report.cell_problem = Some(CellSummary { betas: cell.betas.clone(), results, beta_spread: spread });
    }

    report.passed = checks.iter().all(|c| c.passed);
    report.checks = checks;
    Ok(RunOutcome { report, fields, director })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, HarnessError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_snapshot(dir: &Path, name: &str, snapshot: &Snapshot) -> Result<(), HarnessError> {
    let w = create(dir, name)?;
    match snapshot {
        Snapshot::Tensor(f) => io::write_field_csv(w, f, ["p1", "p2", "r"])?,
        Snapshot::Planar(f) => io::write_field_csv(w, f, ["p1", "p2"])?,
    }
    Ok(())
}

/// Writes the report and the enabled artifacts into `dir`.
pub fn write_artifacts(outcome: &RunOutcome, config: &RunConfig, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), outcome.report.to_json())?;
    std::fs::write(dir.join("config.toml"), config.to_toml())?;
    if let Some(last) = outcome.fields.last() {
        if config.output.fields {
            write_snapshot(dir, "field.csv", last)?;
            io::write_grid_csv(create(dir, "grid.csv")?, last.grid())?;
            if let Some(set) = &outcome.report.defects {
                io::write_defects_csv(create(dir, "defects.csv")?, set)?;
            }
            if let Some(d) = &outcome.director {
                io::write_director_csv(create(dir, "director.csv")?, last.grid(), d)?;
            }
        }
        if config.output.rung_fields {
            for (i, f) in outcome.fields.iter().enumerate() {
                write_snapshot(dir, &format!("field_rung{i}.csv"), f)?;
            }
        }
        if config.output.checkpoint {
            let w = create(dir, "checkpoint.csv")?;
            match last {
                Snapshot::Tensor(f) => io::save_checkpoint(w, f)?,
                Snapshot::Planar(f) => io::save_checkpoint(w, f)?,
            }
        }
    }
    if let Some(cell) = &outcome.report.cell_problem {
        for (beta, r) in cell.betas.iter().zip(&cell.results) {
            io::write_cell_problem_csv(create(dir, &format!("cell_beta{beta}.csv"))?, r)?;
        }
    }
    Ok(())
}

/// [`execute`] followed by [`write_artifacts`] when `out` is given.
pub fn run(config: &RunConfig, out: Option<&Path>) -> Result<RunReport, HarnessError> {
    let outcome = execute(config)?;
    if let Some(dir) = out {
        write_artifacts(&outcome, config, dir)?;
    }
    Ok(outcome.report)
}

/// Renormalized-energy landscape: every scan point for `k = 1`; for larger
/// `k` the first point moves over the scan while the rest stay at the minimizer.
pub fn wmap(config: &RunConfig, k: i32, scan: usize) -> Result<(WMinimum, Vec<(Configuration, f64)>), HarnessError> {
    if k < 1 {
        return Err(HarnessError::ConfigInvalid("wmap needs k >= 1".into()));
    }
    if scan < 2 {
        return Err(HarnessError::ConfigInvalid("wmap needs at least 2 scan points across".into()));
    }
    let grid = config.grid()?;
    let params = config.model.params(config.schedule.ladder()[0])?;
    let bd = make_boundary_data(&grid, params.s(), k, config.boundary.offset);
    let solver = HarmonicSolver::new(Arc::clone(&grid)).map_err(solve_failed)?;
    let best = argmin_w(&bd, &solver, SearchMethod::Scan { points_across: scan }).map_err(solve_failed)?;
    let shape = grid.shape;
    let [ex, ey] = shape.half_extent();
    let cell = 2.0 * ex.max(ey) / scan as f64;
    let evaluator = WEvaluator::new(&solver, &bd).map_err(solve_failed)?;
    let points = scan_points(&shape, cell, evaluator.margin());
    let rows = {
        use rayon::prelude::*;
        points
            .par_iter()
            .filter_map(|&p| {
                let mut pts = best.config.points.clone();
                pts[0] = p;
                let c = Configuration::new(pts);
                let v = evaluator.eval(&c).ok().filter(|v| v.is_finite())?;
                Some((c, v))
            })
            .collect()
    };
    Ok((best, rows))
}
