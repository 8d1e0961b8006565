//! One-parameter sweeps over ε, the boundary winding or the grid resolution.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use nemfilm_core::diagnostics::AsymptoticsFit;
use nemfilm_core::solver::RungStatus;

use crate::config::RunConfig;
use crate::pipeline::execute;
use crate::report::Check;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// All values form one ε-ladder, solved with warm starts.
    Eps,
    /// One run per boundary winding.
    K,
    /// One run per grid resolution at the config's final ε.
    Resolution,
}

impl std::str::FromStr for SweepParam {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "eps" => Ok(SweepParam::Eps),
            "k" => Ok(SweepParam::K),
            "resolution" => Ok(SweepParam::Resolution),
            other => Err(HarnessError::ConfigInvalid(format!("unknown sweep parameter {other:?} (eps, k, resolution)"))),
        }
    }
}

impl SweepParam {
    /// Sweep values from a range: geometric for ε and resolution, integer steps for `k`.
    pub fn values(self, from: f64, to: f64, count: usize) -> Result<Vec<f64>, HarnessError> {
        let bad = |m: &str| Err(HarnessError::ConfigInvalid(m.into()));
        match self {
            SweepParam::K => {
                if from < 0.0 || to < from || from.fract() != 0.0 || to.fract() != 0.0 {
                    return bad("k sweeps need integers 0 <= from <= to");
                }
                Ok((from as i64..=to as i64).map(|k| k as f64).collect())
            }
            SweepParam::Eps | SweepParam::Resolution => {
                if !(from > 0.0 && to > 0.0) || count < 2 {
                    return bad("sweep range needs positive endpoints and at least 2 values");
                }
                Ok((0..count).map(|i| from * (to / from).powf(i as f64 / (count - 1) as f64)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub eps: f64,
    pub energy: f64,
    pub elastic: f64,
    pub bulk: f64,
    pub residual: f64,
    pub status: RungStatus,
    pub defects: Option<usize>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
    /// Energy against `ln(1/ε)`, for ε sweeps.
    pub fit: Option<AsymptoticsFit>,
    /// `(E_a - E_b) / (E_b - E_c)` over consecutive resolution triples.
    pub richardson: Vec<f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep report serializes")
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "value,eps,energy,elastic,bulk,residual,status,defects,passed")?;
        for r in &self.rows {
            let status = serde_json::to_value(r.status).expect("status serializes");
            let defects = r.defects.map_or(String::new(), |d| d.to_string());
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.value,
                r.eps,
                r.energy,
                r.elastic,
                r.bulk,
                r.residual,
                status.as_str().unwrap_or(""),
                defects,
                r.passed
            )?;
        }
        Ok(())
    }
}

/// Ratios `(E_a - E_b) / (E_b - E_c)` for consecutive triples; near 4 for a
/// second-order scheme when the resolution doubles.
pub fn richardson_ratios(energies: &[f64]) -> Vec<f64> {
    energies.windows(3).map(|w| (w[0] - w[1]) / (w[1] - w[2])).collect()
}

pub fn sweep(config: &RunConfig, param: SweepParam, values: &[f64]) -> Result<SweepReport, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::ConfigInvalid("empty sweep".into()));
    }
    let mut rows = Vec::new();
    let mut fit = None;
    let mut checks = Vec::new();
    match param {
        SweepParam::Eps => {
            let mut c = config.clone();
            c.schedule.eps = values.to_vec();
            c.checks.fit = values.len() >= 4;
            let report = execute(&c)?.report;
            for (v, r) in values.iter().zip(&report.rungs) {
                rows.push(SweepRow {
                    value: *v,
                    eps: r.eps,
                    energy: r.energy.total,
                    elastic: r.energy.elastic,
                    bulk: r.energy.bulk,
                    residual: r.residual,
                    status: r.status,
                    defects: r.defects.as_ref().map(|d| d.defects.len()),
                    passed: r.status == RungStatus::Converged,
                });
            }
            fit = report.fit;
            checks = report.checks;
        }
        SweepParam::K | SweepParam::Resolution => {
            for &v in values {
                let mut c = config.clone();
                if param == SweepParam::K {
                    c.boundary.k = v as i32;
                } else {
                    c.domain.resolution = v;
                }
                let report = execute(&c)?.report;
                let last = report.rungs.last().ok_or_else(|| HarnessError::ConfigInvalid("sweeps need solve = true".into()))?;
                rows.push(SweepRow {
                    value: v,
                    eps: last.eps,
                    energy: last.energy.total,
                    elastic: last.energy.elastic,
                    bulk: last.energy.bulk,
                    residual: last.residual,
                    status: last.status,
                    defects: report.defects.as_ref().map(|d| d.defects.len()),
                    passed: report.passed,
                });
            }
        }
    }
    let richardson = if param == SweepParam::Resolution {
        richardson_ratios(&rows.iter().map(|r| r.energy).collect::<Vec<_>>())
    } else {
        Vec::new()
    };
    let passed = rows.iter().all(|r| r.passed) && checks.iter().all(|c| c.passed);
    Ok(SweepReport { param, rows, fit, richardson, checks, passed })
}

/// Writes `sweep.csv` and `sweep.json` into `dir`.
pub fn write_sweep(report: &SweepReport, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    report.write_csv(std::io::BufWriter::new(std::fs::File::create(dir.join("sweep.csv"))?))?;
    std::fs::write(dir.join("sweep.json"), report.to_json())?;
    Ok(())
}
