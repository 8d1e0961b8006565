//! Nodal fields on a grid.

use std::sync::Arc;

use crate::domain::{BoundaryData, Grid, NodeKind};
use crate::qtensor::PRPoint;

/// `N` scalar components per lattice node. Exterior nodes hold zeros.
#[derive(Debug, Clone)]
pub struct Field<const N: usize> {
    pub grid: Arc<Grid>,
    pub values: Vec<[f64; N]>,
}

/// `(p1, p2, r)` per node.
pub type PRField = Field<3>;
/// A planar vector per node, for the scalar-complex comparison models.
pub type PlanarField = Field<2>;

impl<const N: usize> Field<N> {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.node_count();
        Field { grid, values: vec![[0.0; N]; n] }
    }

    /// Evaluates `f` at every active node position.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 2]) -> [f64; N]) -> Self {
        let values = (0..grid.node_count())
            .map(|n| if grid.kind[n] == NodeKind::Exterior { [0.0; N] } else { f(grid.pos[n]) })
            .collect();
        Field { grid, values }
    }

    /// Interior values flattened in free-node order.
    pub fn free_vector(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.free_nodes.len() * N);
        for &n in &self.grid.free_nodes {
            out.extend_from_slice(&self.values[n]);
        }
        out
    }

    pub fn set_free(&mut self, x: &[f64]) {
        for (f, &n) in self.grid.free_nodes.iter().enumerate() {
            self.values[n].copy_from_slice(&x[f * N..(f + 1) * N]);
        }
    }

    /// Linear interpolation onto another grid of the same shape. Boundary
    /// values are interpolated too; pin them again if exact data matters.
    pub fn resample(&self, grid: Arc<Grid>) -> Option<Self> {
        let mut values = vec![[0.0; N]; grid.node_count()];
        for n in 0..grid.node_count() {
            if grid.kind[n] != NodeKind::Exterior {
                values[n] = self.grid.interpolate_clamped(&self.values, grid.pos[n])?;
            }
        }
        Some(Field { grid, values })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }

    /// Maximum absolute difference over active nodes.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

impl PRField {
    pub fn point(&self, n: usize) -> PRPoint {
        let [p1, p2, r] = self.values[n];
        PRPoint { p: [p1, p2], r }
    }

    /// Writes the Dirichlet values onto the boundary loop.
    pub fn pin_boundary(&mut self, bd: &BoundaryData) {
        for (i, b) in self.grid.boundary.iter().enumerate() {
            self.values[b.node] = bd.value(i);
        }
    }

    /// True when every boundary node equals the data bit for bit.
    pub fn boundary_matches(&self, bd: &BoundaryData) -> bool {
        self.grid.boundary.iter().enumerate().all(|(i, b)| self.values[b.node] == bd.value(i))
    }

    /// The `p` components as a planar field.
    pub fn p_part(&self) -> PlanarField {
        Field { grid: Arc::clone(&self.grid), values: self.values.iter().map(|v| [v[0], v[1]]).collect() }
    }
}

impl PlanarField {
    /// Boundary values `amplitude · p0 / |p0|`.
    pub fn pin_boundary_scaled(&mut self, bd: &BoundaryData, amplitude: f64) {
        for (i, b) in self.grid.boundary.iter().enumerate() {
            let p = bd.p0[i];
            let m = p[0].hypot(p[1]);
            self.values[b.node] = [amplitude * p[0] / m, amplitude * p[1] / m];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Shape;

    #[test]
    fn resampling_keeps_affine_fields() {
        let coarse = Arc::new(Grid::build(Shape::ellipse(1.0, 0.7), 24.0).unwrap());
        let fine = Arc::new(Grid::build(Shape::ellipse(1.0, 0.7), 40.0).unwrap());
        let affine = |x: [f64; 2]| [1.0 + 2.0 * x[0] - x[1], 0.5 * x[1]];
        let f = PlanarField::from_fn(Arc::clone(&coarse), affine);
        let g = f.resample(Arc::clone(&fine)).unwrap();
        for &n in &fine.free_nodes {
            let want = affine(fine.pos[n]);
            assert!((g.values[n][0] - want[0]).abs() < 1e-12 && (g.values[n][1] - want[1]).abs() < 1e-12);
        }
        assert!(g.values.iter().all(|v| v.iter().all(|c| c.is_finite())));
    }
}
