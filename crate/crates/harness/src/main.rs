use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use nemfilm_harness::config::RunConfig;
use nemfilm_harness::sweep::{sweep, write_sweep, SweepParam};
use nemfilm_harness::{pipeline, HarnessError, EXIT_CHECK_FAILED};

/// Thin-film nematic defect experiments.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Worker threads; defaults to NEMFILM_WORKERS, then to the number of cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one config and run its checks.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat a config over a range of one parameter.
    Sweep {
        config: PathBuf,
        /// eps, k or resolution.
        #[arg(long)]
        param: SweepParam,
        #[arg(long, required_unless_present = "values")]
        from: Option<f64>,
        #[arg(long, required_unless_present = "values")]
        to: Option<f64>,
        /// Number of values for eps and resolution sweeps.
        #[arg(long, default_value_t = 5)]
        rungs: usize,
        /// Explicit comma-separated values instead of a range.
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["from", "to"])]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the renormalized energy over scan points.
    Wmap {
        config: PathBuf,
        #[arg(long)]
        k: i32,
        /// Scan points across the domain.
        #[arg(long, default_value_t = 40)]
        scan: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn set_workers(flag: Option<usize>) -> anyhow::Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("NEMFILM_WORKERS") {
            Ok(v) => Some(v.parse().with_context(|| format!("NEMFILM_WORKERS={v:?} is not a count"))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn print_checks(checks: &[nemfilm_harness::report::Check]) {
    for c in checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        println!("{mark} {:<28} value {:<12.6e} tolerance {:<10.3e} {}", c.name, c.value, c.tolerance, c.detail);
    }
}

fn load(path: &Path) -> anyhow::Result<RunConfig> {
    Ok(RunConfig::load(path)?)
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    set_workers(cli.workers)?;
    match cli.command {
        Command::Run { config, out } => {
            let config = load(&config)?;
            let report = pipeline::run(&config, out.as_deref())?;
            print_checks(&report.checks);
            if out.is_none() {
                println!("{}", report.to_json());
            }
            Ok(report.passed)
        }
        Command::Sweep { config, param, from, to, rungs, values, out } => {
            let config = load(&config)?;
            let values = if values.is_empty() {
                param.values(from.expect("required"), to.expect("required"), rungs)?
            } else {
                values
            };
            let report = sweep(&config, param, &values)?;
            match &out {
                Some(dir) => write_sweep(&report, dir)?,
                None => report.write_csv(std::io::stdout().lock())?,
            }
            if let Some(fit) = &report.fit {
                println!("slope {:.6} against {:.6} (relative error {:.4})", fit.slope, fit.target_slope, fit.relative_error);
            }
            if !report.richardson.is_empty() {
                println!("richardson ratios {:?}", report.richardson);
            }
            print_checks(&report.checks);
            Ok(report.passed)
        }
        Command::Wmap { config, k, scan, out } => {
            let config = load(&config)?;
            let (best, rows) = pipeline::wmap(&config, k, scan)?;
            std::fs::create_dir_all(&out)?;
            let file = std::fs::File::create(out.join("wmap.csv"))?;
            nemfilm_core::io::write_wmap_csv(std::io::BufWriter::new(file), &rows).map_err(HarnessError::from)?;
            std::fs::write(out.join("argmin.json"), serde_json::to_string_pretty(&best)?)?;
            println!("minimum {:.6} at {:?} ({} map points)", best.value, best.config.points, rows.len());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<HarnessError>().map_or(1, HarnessError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
