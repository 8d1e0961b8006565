//! JSON run summary.

use serde::Serialize;

use nemfilm_core::defects::{DefectSet, WellMetrics};
use nemfilm_core::diagnostics::{AsymptoticsFit, BulkBoundTable, PohozaevReport, ShiftCheck};
use nemfilm_core::energy::EnergyBreakdown;
use nemfilm_core::renorm::{AnnulusFit, CellProblemResult, WMinimum};
use nemfilm_core::solver::{RungStatus, SolveReport};

use crate::config::RunConfig;

pub const SCHEMA: u32 = 1;

/// One pass/fail line with the number it was decided on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, value: f64, tolerance: f64, detail: impl Into<String>) -> Check {
        Check { name: name.into(), passed, value, tolerance, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub h: f64,
    pub nodes: usize,
    pub interior: usize,
    pub boundary: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct StartSummary {
    pub label: String,
    pub final_energy: f64,
    pub converged: bool,
    pub chosen: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RungSummary {
    pub eps: f64,
    pub energy: EnergyBreakdown,
    pub residual: f64,
    pub tolerance: f64,
    pub iterations: usize,
    pub status: RungStatus,
    pub defects: Option<DefectSet>,
    pub defect_error: Option<String>,
    pub well: Option<WellMetrics>,
    /// Bad-set area over `ε²` at the configured `μ`.
    pub bad_area_scaled: Option<f64>,
    pub pohozaev: Option<PohozaevReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PositionMatch {
    pub found: Vec<[f64; 2]>,
    /// Predicted positions after the best relabeling (and rotation, on a centered disk).
    pub predicted: Vec<[f64; 2]>,
    pub max_distance: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnulusSummary {
    pub fit: AnnulusFit,
    pub w: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub betas: Vec<f64>,
    pub results: Vec<CellProblemResult>,
    /// Largest relative spread of `L(τ)` across `betas`.
    pub beta_spread: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema: u32,
    pub version: String,
    pub recipe: String,
    pub seed: u64,
    pub config: RunConfig,
    pub grid: Option<GridSummary>,
    pub starts: Vec<StartSummary>,
    pub solve: Option<SolveReport>,
    pub rungs: Vec<RungSummary>,
    pub defects: Option<DefectSet>,
    pub el_residual: Option<f64>,
    pub w_minimum: Option<WMinimum>,
    pub positions: Option<PositionMatch>,
    pub annulus: Option<AnnulusSummary>,
    pub fit: Option<AsymptoticsFit>,
    pub bulk_bound: Option<BulkBoundTable>,
    pub shift: Option<ShiftCheck>,
    pub cell_problem: Option<CellSummary>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}
