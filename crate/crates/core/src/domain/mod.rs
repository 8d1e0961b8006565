//! Reference domains, their masked lattice discretization and the
//! half-integer-degree Dirichlet data.

mod grid;
mod shape;

use std::f64::consts::PI;

use thiserror::Error;

pub use grid::{BoundaryNode, Grid, NodeKind, Triangle};
pub use shape::{CurvePoint, Shape};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("resolution gives only {across:.1} nodes across the narrowest part of the domain (need 16)")]
    ResolutionTooCoarse { across: f64 },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("rectangles need a positive corner radius")]
    SharpCorner,
    #[error("lattice boundary is not a single simple loop")]
    BoundaryNotSimple,
    #[error("cell {cell:?} cannot be split into well-shaped triangles")]
    DegenerateCell { cell: [usize; 2] },
    #[error("phase jumps by {jump:.3} rad between consecutive samples")]
    PhaseJumpTooLarge { jump: f64 },
    #[error("field magnitude {magnitude:e} on the loop is below the admissible floor {floor:e}")]
    FieldVanishes { magnitude: f64, floor: f64 },
}

/// Dirichlet values on the boundary loop, in loop order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub s: f64,
    /// Winding number of `p0`; the tensor trace has degree `k/2`.
    pub k: i32,
    /// Constant phase added to `2α`.
    pub offset: f64,
    pub p0: Vec<[f64; 2]>,
    pub r0: f64,
}

impl BoundaryData {
    /// Values `(p1, p2, r)` at boundary loop slot `i`.
    pub fn value(&self, i: usize) -> [f64; 3] {
        [self.p0[i][0], self.p0[i][1], self.r0]
    }

    /// The same data with `p0` conjugated, reversing every winding.
    pub fn conjugated(&self) -> Self {
        BoundaryData {
            p0: self.p0.iter().map(|p| [p[0], -p[1]]).collect(),
            k: -self.k,
            offset: -self.offset,
            ..self.clone()
        }
    }
}

/// Uniaxial data `p0 = (s/2)(cos 2α, sin 2α)`, `r0 = s/3` with `α(t) = πkt + offset/2`.
///
/// `k = 0` gives constant data; negative `k` reverses the orientation of the texture.
pub fn make_boundary_data(grid: &Grid, s: f64, k: i32, offset: f64) -> BoundaryData {
    let amp = 0.5 * s.abs();
    let p0 = grid
        .boundary
        .iter()
        .map(|b| {
            let phase = 2.0 * PI * k as f64 * b.t + offset;
            [amp * phase.cos(), amp * phase.sin()]
        })
        .collect();
    BoundaryData { s, k, offset, p0, r0: s / 3.0 }
}

/// Principal-branch phase increment from `a` to `b`, in `(-π, π]`; zero if either vanishes.
pub fn phase_increment(a: [f64; 2], b: [f64; 2]) -> f64 {
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1];
    if cross == 0.0 && dot == 0.0 {
        // a zero vector has no phase; signed zeros would give ±π
        return 0.0;
    }
    let d = cross.atan2(dot);
    if d <= -PI {
        d + 2.0 * PI
    } else {
        d
    }
}

/// Winding number of a closed sequence of planar vectors.
///
/// Every sample must have magnitude at least `floor`, and consecutive
/// samples may turn by less than `π/2`.
pub fn winding_of_samples(samples: &[[f64; 2]], floor: f64) -> Result<i32, DomainError> {
    let m = samples.len();
    if let Some(magnitude) = samples.iter().map(|a| a[0].hypot(a[1])).find(|&x| x < floor) {
        return Err(DomainError::FieldVanishes { magnitude, floor });
    }
    let mut total = 0.0;
    for i in 0..m {
        let d = phase_increment(samples[i], samples[(i + 1) % m]);
        if d.abs() >= 0.5 * PI {
            return Err(DomainError::PhaseJumpTooLarge { jump: d });
        }
        total += d;
    }
    Ok((total / (2.0 * PI)).round() as i32)
}

/// Winding of `p0` around the boundary loop.
pub fn boundary_degree(trace: &BoundaryData) -> Result<i32, DomainError> {
    winding_of_samples(&trace.p0, 0.25 * trace.s.abs())
}
