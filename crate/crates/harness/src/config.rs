//! Run configuration: a TOML file with sections, layered over a named recipe.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use nemfilm_core::domain::{make_boundary_data, BoundaryData, Grid, Shape};
use nemfilm_core::energy::{BulkSpec, ModelParams};
use nemfilm_core::solver::SolveSchedule;

use crate::recipe;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub recipe: String,
    pub seed: u64,
    /// Skip minimization entirely (recipes that only run the cell problem).
    pub solve: bool,
    pub domain: DomainConfig,
    pub model: ModelConfig,
    pub boundary: BoundaryConfig,
    pub schedule: ScheduleConfig,
    pub init: InitConfig,
    pub checks: ChecksConfig,
    pub cell: CellConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            recipe: "theorem-a".into(),
            seed: 1,
            solve: true,
            domain: DomainConfig::default(),
            model: ModelConfig::default(),
            boundary: BoundaryConfig::default(),
            schedule: ScheduleConfig::default(),
            init: InitConfig::default(),
            checks: ChecksConfig::default(),
            cell: CellConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Disk,
    Ellipse,
    RoundedRect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub shape: ShapeKind,
    pub center: [f64; 2],
    /// Disk radius.
    pub radius: f64,
    /// Ellipse semi-axes along x and y.
    pub semi_axes: [f64; 2],
    /// Rounded rectangle: width, height and corner radius.
    pub width: f64,
    pub height: f64,
    pub corner: f64,
    /// Lattice nodes per unit length.
    pub resolution: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            shape: ShapeKind::Disk,
            center: [0.0, 0.0],
            radius: 1.0,
            semi_axes: [1.0, 0.7],
            width: 2.0,
            height: 1.2,
            corner: 0.3,
            resolution: 64.0,
        }
    }
}

impl DomainConfig {
    pub fn shape(&self) -> Shape {
        let base = match self.shape {
            ShapeKind::Disk => Shape::disk(self.radius),
            ShapeKind::Ellipse => Shape::ellipse(self.semi_axes[0], self.semi_axes[1]),
            ShapeKind::RoundedRect => Shape::rounded_rect(self.width, self.height, self.corner),
        };
        base.translated(self.center)
    }

    pub fn is_centered_disk(&self) -> bool {
        self.shape == ShapeKind::Disk && self.center == [0.0, 0.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyKind {
    /// Thin-film tensor energy in `(p1, p2, r)`.
    Ldg,
    /// Ginzburg–Landau comparison energy.
    Gl,
    /// Sextic-potential comparison energy.
    Csh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub energy: EnergyKind,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    /// Bulk coefficients of the quartic potential.
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Ginzburg–Landau well radius.
    pub well: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { energy: EnergyKind::Ldg, l1: 1.0, l2: 0.0, l3: 0.0, a: 0.0, b: 3.0, c: 1.0, well: 1.0 }
    }
}

impl ModelConfig {
    pub fn params(&self, eps: f64) -> Result<ModelParams, HarnessError> {
        let bulk = BulkSpec::classic(self.a, self.b, self.c).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        ModelParams::new(self.l1, self.l2, self.l3, bulk, eps).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))
    }

    /// Modulus of the planar field on its well.
    pub fn amplitude(&self, s: f64) -> f64 {
        match self.energy {
            EnergyKind::Ldg => 0.5 * s.abs(),
            EnergyKind::Gl => self.well,
            EnergyKind::Csh => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    /// Winding of `p` on the boundary; the line field has degree `k/2`.
    pub k: i32,
    pub offset: f64,
    /// Use the complex-conjugate data, which has winding `-k`.
    pub conjugate: bool,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig { k: 1, offset: 0.0, conjugate: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    /// Explicit ladder; when empty the ladder runs from `eps_from` to `eps_to`.
    pub eps: Vec<f64>,
    pub eps_from: f64,
    pub eps_to: f64,
    /// Number of geometric rungs; zero means "ratio at most `ratio`".
    pub rungs: usize,
    pub ratio: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub armijo: f64,
    pub max_step: f64,
    /// Noise amplitude added between rungs; zero disables it.
    pub perturbation: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        let d = SolveSchedule::default();
        ScheduleConfig {
            eps: Vec::new(),
            eps_from: 0.2,
            eps_to: 0.03,
            rungs: 0,
            ratio: std::f64::consts::SQRT_2,
            max_iter: d.max_iter,
            tol: d.tol,
            armijo: d.armijo,
            max_step: d.max_step,
            perturbation: 0.0,
        }
    }
}

impl ScheduleConfig {
    pub fn ladder(&self) -> Vec<f64> {
        if !self.eps.is_empty() {
            self.eps.clone()
        } else if self.rungs > 0 {
            SolveSchedule::geometric(self.eps_from, self.eps_to, self.rungs).eps
        } else {
            SolveSchedule::ladder(self.eps_from, self.eps_to, self.ratio).eps
        }
    }

    pub fn schedule(&self, seed: u64) -> SolveSchedule {
        SolveSchedule {
            eps: self.ladder(),
            max_iter: self.max_iter,
            tol: self.tol,
            armijo: self.armijo,
            max_step: self.max_step,
            perturbation: (self.perturbation > 0.0).then_some(self.perturbation),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// Product ansatz at the minimizing configuration of the renormalized energy.
    ArgminW,
    /// Product ansatz at `centers`.
    Ansatz,
    Random,
    Well,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    pub kind: InitKind,
    pub centers: Vec<[f64; 2]>,
    /// Core radius of the ansatz.
    pub core: f64,
    /// Scan points across the domain for the renormalized-energy search.
    pub scan: usize,
    /// Extra solves from seeded random fields; the lowest final energy is kept.
    pub random_starts: usize,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig { kind: InitKind::ArgminW, centers: Vec::new(), core: 0.2, scan: 24, random_starts: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksConfig {
    /// Defect count and windings on the final rung.
    pub defects: bool,
    /// Detection threshold: cores are where the modulus is below `(1 - mu)` of the well value.
    pub defect_mu: f64,
    /// Distance-to-well observables along the ladder.
    pub well: bool,
    pub well_mus: Vec<f64>,
    /// The `μ` whose bad-set area over `ε²` must stay bounded.
    pub bad_set_mu: f64,
    /// Exclusion radius; zero picks four times the largest final core radius.
    pub rho: f64,
    pub bulk_bound: bool,
    /// Energy against `ln(1/ε)`.
    pub fit: bool,
    pub fit_tolerance: f64,
    pub pohozaev: bool,
    pub shift: bool,
    pub shift_tolerance: f64,
    /// Final defect positions against the renormalized-energy minimizer.
    pub w_compare: bool,
    /// Position tolerance in grid spacings, added to the scan cell.
    pub position_tolerance_h: f64,
    /// Renormalized energy recovered from annulus energies.
    pub annulus: bool,
    pub annulus_tolerance: f64,
    pub cell_problem: bool,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig {
            defects: true,
            defect_mu: 0.5,
            well: true,
            well_mus: vec![0.05, 0.1, 0.2],
            bad_set_mu: 0.1,
            rho: 0.0,
            bulk_bound: true,
            fit: false,
            fit_tolerance: 0.05,
            pohozaev: false,
            shift: false,
            shift_tolerance: 0.03,
            w_compare: false,
            position_tolerance_h: 3.0,
            annulus: false,
            annulus_tolerance: 0.02,
            cell_problem: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellConfig {
    pub taus: Vec<f64>,
    pub resolution: f64,
    /// Rotations of the boundary texture; the values must agree across them.
    pub betas: Vec<f64>,
    /// Allowed relative rise of `L` from one `τ` to the next smaller one.
    pub monotone_tolerance: f64,
    pub beta_tolerance: f64,
}

impl Default for CellConfig {
    fn default() -> Self {
        CellConfig {
            taus: vec![0.4, 0.3, 0.2, 0.14, 0.1],
            resolution: 64.0,
            betas: vec![0.0, 1.0],
            monotone_tolerance: 1e-3,
            beta_tolerance: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Final field, defects and director CSVs.
    pub fields: bool,
    /// One field CSV per rung.
    pub rung_fields: bool,
    pub checkpoint: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { fields: true, rung_fields: false, checkpoint: true }
    }
}

/// Recursively overlays `top` on `base`; tables merge, everything else replaces.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn parse_table(text: &str, what: &str) -> Result<toml::Table, HarnessError> {
    text.parse::<toml::Table>().map_err(|e| HarnessError::ConfigInvalid(format!("{what}: {e}")))
}

impl RunConfig {
    /// Parses a config, layering it over the recipe it names (or `theorem-a`).
    pub fn from_toml(text: &str) -> Result<RunConfig, HarnessError> {
        let user = parse_table(text, "config")?;
        let name = match user.get("recipe") {
            Some(toml::Value::String(s)) => s.clone(),
            Some(_) => return Err(HarnessError::ConfigInvalid("recipe must be a string".into())),
            None => RunConfig::default().recipe,
        };
        let overlay = recipe::lookup(&name).ok_or_else(|| {
            HarnessError::ConfigInvalid(format!("unknown recipe {name:?}; known: {}", recipe::names().join(", ")))
        })?;
        let mut table = parse_table(overlay, "recipe")?;
        table.insert("recipe".into(), toml::Value::String(name));
        merge(&mut table, user);
        let config: RunConfig =
            table.try_into().map_err(|e: toml::de::Error| HarnessError::ConfigInvalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<RunConfig, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::ConfigInvalid(m));
        self.domain.shape().validate().map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        let eps0 = self.schedule.ladder().first().copied().unwrap_or(0.1);
        self.model.params(eps0)?;
        if self.model.energy == EnergyKind::Gl && !(self.model.well > 0.0) {
            return bad(format!("model.well must be positive (got {})", self.model.well));
        }
        if self.boundary.k < 0 {
            return bad(format!("boundary.k must be nonnegative; use boundary.conjugate for negative windings (got {})", self.boundary.k));
        }
        self.schedule.schedule(self.seed).validate().map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        if self.checks.pohozaev && !self.domain.is_centered_disk() {
            return bad(nemfilm_core::diagnostics::DiagnosticsError::NotADisk.to_string());
        }
        if self.checks.pohozaev && self.model.energy != EnergyKind::Ldg {
            return bad("the Pohozaev check applies to the tensor energy only".into());
        }
        if self.init.kind == InitKind::Ansatz && self.init.centers.len() != self.boundary.k as usize {
            return bad(format!("init.centers lists {} points for k = {}", self.init.centers.len(), self.boundary.k));
        }
        if (self.checks.w_compare || self.checks.annulus) && self.boundary.k == 0 {
            return bad("renormalized-energy checks need k >= 1".into());
        }
        if !(0.0..1.0).contains(&self.checks.defect_mu) {
            return bad(format!("checks.defect_mu must lie in [0, 1) (got {})", self.checks.defect_mu));
        }
        if self.checks.well && !self.checks.well_mus.contains(&self.checks.bad_set_mu) {
            return bad("checks.bad_set_mu must be one of checks.well_mus".into());
        }
        if self.checks.cell_problem {
            if self.cell.taus.len() < 3 || self.cell.taus.windows(2).any(|w| w[1] >= w[0]) {
                return bad("cell.taus needs at least 3 strictly decreasing values".into());
            }
            if self.cell.betas.is_empty() {
                return bad("cell.betas must not be empty".into());
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<Grid>, HarnessError> {
        Grid::build(self.domain.shape(), self.domain.resolution)
            .map(Arc::new)
            .map_err(|e| HarnessError::ConfigInvalid(e.to_string()))
    }

    pub fn boundary_data(&self, grid: &Grid, s: f64) -> BoundaryData {
        let bd = make_boundary_data(grid, s, self.boundary.k, self.boundary.offset);
        if self.boundary.conjugate {
            bd.conjugated()
        } else {
            bd
        }
    }
}
