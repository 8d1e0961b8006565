//! CSV exports and the restart checkpoint.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading a
//! checkpoint back reproduces every value bit for bit.

use std::io::{BufRead, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::defects::{DefectSet, DirectorField};
use crate::domain::{Grid, NodeKind};
use crate::field::Field;
use crate::renorm::{CellProblemResult, Configuration};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("checkpoint does not match the grid: {0}")]
    GridMismatch(String),
}

const CHECKPOINT_MAGIC: &str = "# nemfilm checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// Node table `x,y,mask` with mask 0 exterior, 1 interior, 2 boundary.
pub fn write_grid_csv(mut w: impl Write, grid: &Grid) -> Result<(), IoError> {
    writeln!(w, "x,y,mask")?;
    for n in 0..grid.node_count() {
        let mask = match grid.kind[n] {
            NodeKind::Exterior => 0,
            NodeKind::Interior => 1,
            NodeKind::Boundary => 2,
        };
        let [x, y] = grid.pos[n];
        writeln!(w, "{x},{y},{mask}")?;
    }
    Ok(())
}

/// Active nodes in node order, one column per component after `x,y`.
pub fn write_field_csv<const N: usize>(mut w: impl Write, field: &Field<N>, names: [&str; N]) -> Result<(), IoError> {
    writeln!(w, "x,y,{}", names.join(","))?;
    let grid = field.grid.as_ref();
    for n in 0..grid.node_count() {
        if grid.kind[n] == NodeKind::Exterior {
            continue;
        }
        let [x, y] = grid.pos[n];
        write!(w, "{x},{y}")?;
        for v in field.values[n] {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_defects_csv(mut w: impl Write, set: &DefectSet) -> Result<(), IoError> {
    writeln!(w, "x,y,winding,core_radius,depth")?;
    for d in &set.defects {
        writeln!(w, "{},{},{},{},{}", d.position[0], d.position[1], d.winding, d.core_radius, d.depth)?;
    }
    Ok(())
}

pub fn write_director_csv(mut w: impl Write, grid: &Grid, director: &DirectorField) -> Result<(), IoError> {
    writeln!(w, "x,y,angle")?;
    for &(n, angle) in &director.angles {
        let [x, y] = grid.pos[n];
        writeln!(w, "{x},{y},{angle}")?;
    }
    Ok(())
}

/// One row per configuration: point coordinates followed by the energy.
pub fn write_wmap_csv(mut w: impl Write, rows: &[(Configuration, f64)]) -> Result<(), IoError> {
    let k = rows.first().map_or(0, |r| r.0.points.len());
    let mut header: Vec<String> = (1..=k).flat_map(|i| [format!("b{i}x"), format!("b{i}y")]).collect();
    header.push("W".into());
    writeln!(w, "{}", header.join(","))?;
    for (config, value) in rows {
        for p in &config.points {
            write!(w, "{},{},", p[0], p[1])?;
        }
        writeln!(w, "{value}")?;
    }
    Ok(())
}

pub fn write_cell_problem_csv(mut w: impl Write, result: &CellProblemResult) -> Result<(), IoError> {
    writeln!(w, "tau,L")?;
    for (t, v) in result.taus.iter().zip(&result.values) {
        writeln!(w, "{t},{v}")?;
    }
    Ok(())
}

/// Writes every node, exterior ones included, after a header naming the
/// format version and node count.
pub fn save_checkpoint<const N: usize>(mut w: impl Write, field: &Field<N>) -> Result<(), IoError> {
    let grid = field.grid.as_ref();
    writeln!(w, "{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION} components={N} nodes={}", grid.node_count())?;
    for n in 0..grid.node_count() {
        let [x, y] = grid.pos[n];
        write!(w, "{x},{y}")?;
        for v in field.values[n] {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse { line, message: message.into() }
}

/// Reads a checkpoint written by [`save_checkpoint`] for the same grid.
pub fn load_checkpoint<const N: usize>(r: impl BufRead, grid: Arc<Grid>) -> Result<Field<N>, IoError> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty checkpoint"))??;
    let rest = header.strip_prefix(CHECKPOINT_MAGIC).ok_or_else(|| parse_err(1, "not a checkpoint"))?;
    let mut version = None;
    let mut components = None;
    let mut nodes = None;
    for token in rest.split_whitespace() {
        if let Some(v) = token.strip_prefix('v') {
            version = v.parse::<u32>().ok();
        } else if let Some(v) = token.strip_prefix("components=") {
            components = v.parse::<usize>().ok();
        } else if let Some(v) = token.strip_prefix("nodes=") {
            nodes = v.parse::<usize>().ok();
        }
    }
    if version != Some(CHECKPOINT_VERSION) {
        return Err(parse_err(1, format!("unsupported version {version:?}")));
    }
    if components != Some(N) {
        return Err(IoError::GridMismatch(format!("{components:?} components, expected {N}")));
    }
    if nodes != Some(grid.node_count()) {
        return Err(IoError::GridMismatch(format!("{nodes:?} nodes, grid has {}", grid.node_count())));
    }
    let tol = 1e-9 * grid.h;
    let mut values = Vec::with_capacity(grid.node_count());
    for (n, line) in lines.enumerate() {
        let line = line?;
        let lineno = n + 2;
        let nums: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| parse_err(lineno, e.to_string())))
            .collect::<Result<_, _>>()?;
        if nums.len() != N + 2 {
            return Err(parse_err(lineno, format!("expected {} columns, found {}", N + 2, nums.len())));
        }
        if n >= grid.node_count() {
            return Err(parse_err(lineno, "more rows than nodes"));
        }
        let [x, y] = grid.pos[n];
        if (nums[0] - x).abs() > tol || (nums[1] - y).abs() > tol {
            return Err(IoError::GridMismatch(format!("node {n} at ({}, {}), grid has ({x}, {y})", nums[0], nums[1])));
        }
        let mut v = [0.0; N];
        v.copy_from_slice(&nums[2..]);
        values.push(v);
    }
    if values.len() != grid.node_count() {
        return Err(IoError::GridMismatch(format!("{} rows, grid has {} nodes", values.len(), grid.node_count())));
    }
    Ok(Field { grid, values })
}
