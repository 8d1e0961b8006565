//! Discrete energies on the P1 triangulation: elastic terms integrated per
//! triangle, potentials by lumped nodal quadrature.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::f_e;
use super::{CshModel, GlModel, LdgModel, LocalModel, ModelParams};
use crate::domain::{Grid, Triangle};
use crate::field::{Field, PRField, PlanarField};
use crate::qtensor::{from_pr, PRPoint};
use crate::sparse::{nested_dissection, SymPattern};

/// Fixed reduction blocks keep sums independent of the thread count.
const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub elastic: f64,
    /// Potential term including its `ε⁻²` factor.
    pub bulk: f64,
    pub total: f64,
}

fn tri_gradient<const N: usize>(tri: &Triangle, values: &[[f64; N]]) -> [[f64; 2]; N] {
    let mut g = [[0.0; 2]; N];
    for a in 0..3 {
        let u = &values[tri.nodes[a]];
        for c in 0..N {
            g[c][0] += u[c] * tri.grad[a][0];
            g[c][1] += u[c] * tri.grad[a][1];
        }
    }
    g
}

fn chunked_sum<T: Sync>(items: &[T], f: impl Fn(&T) -> f64 + Sync) -> f64 {
    let partial: Vec<f64> = items.par_chunks(CHUNK).map(|chunk| chunk.iter().map(&f).sum::<f64>()).collect();
    partial.iter().sum()
}

/// Elastic and potential integrals of a field.
pub fn discrete_energy<const N: usize, M: LocalModel<N>>(field: &Field<N>, model: &M) -> EnergyBreakdown {
    let grid = field.grid.as_ref();
    let values = &field.values;
    let elastic = chunked_sum(&grid.triangles, |t| t.weight * model.elastic(&tri_gradient(t, values)));
    let scale = model.bulk_scale();
    let bulk = if scale == 0.0 {
        0.0
    } else {
        let nodes: Vec<usize> = (0..grid.node_count()).collect();
        scale
            * chunked_sum(&nodes, |&n| {
                let w = grid.node_weight[n];
                if w == 0.0 {
                    0.0
                } else {
                    w * model.bulk(&values[n])
                }
            })
    };
    EnergyBreakdown { elastic, bulk, total: elastic + bulk }
}

/// Exact derivative of [`discrete_energy`] with respect to every nodal value.
/// Entries at boundary nodes are the partials a free boundary would feel.
pub fn discrete_gradient<const N: usize, M: LocalModel<N>>(field: &Field<N>, model: &M) -> Vec<[f64; N]> {
    let grid = field.grid.as_ref();
    let values = &field.values;
    let local: Vec<[[f64; N]; 3]> = grid
        .triangles
        .par_iter()
        .with_min_len(CHUNK)
        .map(|t| {
            let d = model.elastic_grad(&tri_gradient(t, values));
            let mut out = [[0.0; N]; 3];
            for a in 0..3 {
                for c in 0..N {
                    out[a][c] = t.weight * (d[c][0] * t.grad[a][0] + d[c][1] * t.grad[a][1]);
                }
            }
            out
        })
        .collect();
    let scale = model.bulk_scale();
    (0..grid.node_count())
        .into_par_iter()
        .with_min_len(CHUNK)
        .map(|n| {
            let mut g = [0.0; N];
            for &(t, corner) in &grid.node_tri[grid.node_tri_ptr[n]..grid.node_tri_ptr[n + 1]] {
                let l = &local[t as usize][corner as usize];
                for c in 0..N {
                    g[c] += l[c];
                }
            }
            let w = grid.node_weight[n];
            if scale != 0.0 && w > 0.0 {
                let b = model.bulk_grad(&values[n]);
                for c in 0..N {
                    g[c] += scale * w * b[c];
                }
            }
            g
        })
        .collect()
}

/// Thin-film energy: sum-of-squares elastic part plus `ε⁻²` times the bulk integral.
pub fn total_g(field: &PRField, params: &ModelParams) -> EnergyBreakdown {
    discrete_energy(field, &LdgModel { params: params.clone() })
}

/// Gradient of [`total_g`] with respect to interior values; zero elsewhere.
pub fn gradient_g(field: &PRField, params: &ModelParams) -> Vec<[f64; 3]> {
    let mut g = discrete_gradient(field, &LdgModel { params: params.clone() });
    for (n, gn) in g.iter_mut().enumerate() {
        if field.grid.free_index[n] == usize::MAX {
            *gn = [0.0; 3];
        }
    }
    g
}

/// Full-tensor energy: the three elastic contractions of `∇Q` with `Q = Q(p, r)`.
pub fn total_f(field: &PRField, params: &ModelParams) -> f64 {
    let grid = field.grid.as_ref();
    let values = &field.values;
    let elastic = chunked_sum(&grid.triangles, |t| {
        let g = tri_gradient(t, values);
        // Q is linear in (p, r), so its derivatives are Q evaluated at the derivatives
        let qx = from_pr(PRPoint { p: [g[0][0], g[1][0]], r: g[2][0] }).to_matrix();
        let qy = from_pr(PRPoint { p: [g[0][1], g[1][1]], r: g[2][1] }).to_matrix();
        let mut dq = [[[0.0; 2]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                dq[i][j] = [qx[i][j], qy[i][j]];
            }
        }
        t.weight * f_e(&dq, &params.elastic)
    });
    let bulk = discrete_energy(field, &LdgModel { params: params.clone() }).bulk;
    elastic + bulk
}

/// Closed-form value of `G - F` for boundary winding `k`: `(L3 - L2 + |L3 + L2|) s² π k / 4`.
pub fn corollary_shift_expected(params: &ModelParams, k: i32) -> f64 {
    let e = &params.elastic;
    let s = params.s();
    (e.l3 - e.l2 + (e.l3 + e.l2).abs()) * s * s * PI * k as f64 / 4.0
}

/// Ginzburg–Landau energy with well radius `s`.
pub fn total_gl(field: &PlanarField, eps: f64, s: f64) -> f64 {
    discrete_energy(field, &GlModel { eps, well: s }).total
}

/// Chern–Simons–Higgs energy.
pub fn total_csh(field: &PlanarField, eps: f64) -> f64 {
    discrete_energy(field, &CshModel { eps }).total
}

/// Sparsity pattern and fill-reducing order of the Hessian over interior unknowns.
#[derive(Debug, Clone)]
pub struct HessianStructure<const N: usize> {
    pub pattern: SymPattern,
    /// `order[new] = old` dof permutation from nested dissection.
    pub order: Vec<usize>,
    /// Value positions of the `N × N` diagonal block of each free node.
    diag_pos: Vec<usize>,
}

impl<const N: usize> HessianStructure<N> {
    pub fn new(grid: &Grid) -> Self {
        let nfree = grid.free_nodes.len();
        let mut columns: Vec<Vec<usize>> = vec![Vec::new(); nfree * N];
        for (fu, &u) in grid.free_nodes.iter().enumerate() {
            let mut nodes: Vec<usize> = grid.neighbors(u).into_iter().chain(std::iter::once(u)).collect();
            nodes.retain(|&v| grid.free_index[v] != usize::MAX);
            for c in 0..N {
                let col = &mut columns[fu * N + c];
                for &v in &nodes {
                    let fv = grid.free_index[v];
                    col.extend((0..N).map(|d| fv * N + d));
                }
            }
        }
        let pattern = SymPattern::from_columns(columns);
        let mut diag_pos = Vec::with_capacity(nfree * N * N);
        for f in 0..nfree {
            for i in 0..N {
                for j in 0..N {
                    diag_pos.push(pattern.find(f * N + i, f * N + j).expect("diagonal block present"));
                }
            }
        }
        let coords: Vec<[i64; 2]> = grid
            .free_nodes
            .iter()
            .map(|&n| {
                let (i, j) = grid.coords(n);
                [i as i64, j as i64]
            })
            .collect();
        let order = nested_dissection(&coords).into_iter().flat_map(|f| (0..N).map(move |c| f * N + c)).collect();
        HessianStructure { pattern, order, diag_pos }
    }

    /// Value position of diagonal entry `dof`.
    pub fn diagonal(&self, dof: usize) -> usize {
        let c = dof % N;
        self.diag_pos[dof * N + c]
    }

    /// Constant elastic part of the Hessian.
    pub fn elastic_values<M: LocalModel<N>>(&self, grid: &Grid, model: &M) -> Vec<f64> {
        let a = model.elastic_matrix();
        let dim = 2 * N;
        let mut values = vec![0.0; self.pattern.nnz()];
        for t in &grid.triangles {
            for ia in 0..3 {
                let fa = grid.free_index[t.nodes[ia]];
                if fa == usize::MAX {
                    continue;
                }
                for ib in 0..3 {
                    let fb = grid.free_index[t.nodes[ib]];
                    if fb == usize::MAX {
                        continue;
                    }
                    for c in 0..N {
                        for d in 0..N {
                            let mut acc = 0.0;
                            for x in 0..2 {
                                for y in 0..2 {
                                    acc += a[(2 * c + x) * dim + 2 * d + y] * t.grad[ia][x] * t.grad[ib][y];
                                }
                            }
                            if acc != 0.0 {
                                let pos = self.pattern.find(fa * N + c, fb * N + d).expect("pattern covers triangle");
                                values[pos] += t.weight * acc;
                            }
                        }
                    }
                }
            }
        }
        values
    }

    /// Adds the weighted potential Hessian blocks. With `convexify`, each block is
    /// replaced by its positive semidefinite part, which keeps the sum positive definite.
    pub fn add_bulk<M: LocalModel<N>>(&self, values: &mut [f64], field: &Field<N>, model: &M, convexify: bool) {
        let scale = model.bulk_scale();
        if scale == 0.0 {
            return;
        }
        let grid = field.grid.as_ref();
        let blocks: Vec<[[f64; N]; N]> = grid
            .free_nodes
            .par_iter()
            .with_min_len(CHUNK)
            .map(|&n| {
                let mut hb = model.bulk_hess(&field.values[n]);
                if convexify {
                    hb = psd_part(&hb);
                }
                let w = scale * grid.node_weight[n];
                for row in hb.iter_mut() {
                    for v in row.iter_mut() {
                        *v *= w;
                    }
                }
                hb
            })
            .collect();
        for (f, hb) in blocks.iter().enumerate() {
            for i in 0..N {
                for j in 0..N {
                    values[self.diag_pos[(f * N + i) * N + j]] += hb[i][j];
                }
            }
        }
    }
}

fn psd_part<const N: usize>(m: &[[f64; N]; N]) -> [[f64; N]; N] {
    let mat = DMatrix::from_fn(N, N, |i, j| 0.5 * (m[i][j] + m[j][i]));
    let eig = SymmetricEigen::new(mat);
    let mut out = [[0.0; N]; N];
    for k in 0..N {
        let lam = eig.eigenvalues[k].max(0.0);
        if lam == 0.0 {
            continue;
        }
        for i in 0..N {
            for j in 0..N {
                out[i][j] += lam * eig.eigenvectors[(i, k)] * eig.eigenvectors[(j, k)];
            }
        }
    }
    out
}
