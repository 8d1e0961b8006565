//! Defect detection and the observables measured away from defect cores.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{phase_increment, winding_of_samples, DomainError, Grid, NodeKind};
use crate::field::{Field, PRField};

#[derive(Debug, Error)]
pub enum DefectError {
    #[error("detected windings sum to {found}, boundary degree is {expected}")]
    ChargeMismatch { found: i32, expected: i32 },
    #[error("loop must contain at least three samples")]
    EmptyLoop,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defect {
    pub position: [f64; 2],
    /// Winding number of `p`; the line field has half this degree.
    pub winding: i32,
    /// Mean radius at which `|p|` recovers to 90% of its well value.
    pub core_radius: f64,
    /// Smallest nodal `|p|` in the core.
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectSet {
    pub defects: Vec<Defect>,
    /// Detection threshold: cores are where `|p| < (1 - mu)·|s|/2`.
    pub mu: f64,
    /// Default exclusion radius, four times the largest core radius.
    pub rho: f64,
    /// Sublevel components that reach the boundary.
    pub warnings: Vec<String>,
}

impl DefectSet {
    pub fn total_winding(&self) -> i32 {
        self.defects.iter().map(|d| d.winding).sum()
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.defects.iter().map(|d| d.position).collect()
    }

    /// Smallest pairwise distance divided by the smallest core radius (infinite below two defects).
    pub fn separation_ratio(&self) -> f64 {
        let r = self.defects.iter().map(|d| d.core_radius).fold(f64::INFINITY, f64::min);
        let mut best = f64::INFINITY;
        for (i, a) in self.defects.iter().enumerate() {
            for b in &self.defects[..i] {
                best = best.min((a.position[0] - b.position[0]).hypot(a.position[1] - b.position[1]));
            }
        }
        best / r
    }
}

fn modulus(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Winding on the boundary of the union of lattice cells touching the region,
/// summed cell by cell.
fn region_winding(grid: &Grid, p: &[[f64; 2]], in_region: &[bool]) -> i32 {
    let mut total = 0.0;
    for cell in grid.cell_triangles() {
        let tris = &grid.triangles[cell];
        if !tris.iter().any(|t| t.nodes.iter().any(|&n| in_region[n])) {
            continue;
        }
        for t in tris {
            let [a, b, c] = t.nodes;
            let turn = phase_increment(p[a], p[b]) + phase_increment(p[b], p[c]) + phase_increment(p[c], p[a]);
            // both diagonal splits cover a full cell, so weigh by area share
            total += t.weight / triangle_area(grid, &t.nodes) * turn;
        }
    }
    (total / (2.0 * PI)).round() as i32
}

fn triangle_area(grid: &Grid, nodes: &[usize; 3]) -> f64 {
    let [a, b, c] = nodes.map(|n| grid.pos[n]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Minimizer of a quadratic fitted to `|p|²` on the 3×3 lattice block around `n`,
/// if the block is interior and the fit has a minimum inside it.
fn subpixel(grid: &Grid, p: &[[f64; 2]], n: usize) -> Option<[f64; 2]> {
    let (i, j) = grid.coords(n);
    if i == 0 || j == 0 || i + 1 >= grid.nx || j + 1 >= grid.ny {
        return None;
    }
    let mut rows = Vec::with_capacity(9);
    let mut rhs = Vec::with_capacity(9);
    for dj in -1i64..=1 {
        for di in -1i64..=1 {
            let m = grid.index((i as i64 + di) as usize, (j as i64 + dj) as usize);
            if grid.kind[m] != NodeKind::Interior {
                return None;
            }
            let (x, y) = (di as f64, dj as f64);
            rows.push([1.0, x, y, x * x, x * y, y * y]);
            rhs.push(p[m][0] * p[m][0] + p[m][1] * p[m][1]);
        }
    }
    let a = nalgebra::DMatrix::from_fn(9, 6, |r, c| rows[r][c]);
    let b = nalgebra::DVector::from_vec(rhs);
    let c = a.svd(true, true).solve(&b, 1e-14).ok()?;
    let (hxx, hxy, hyy) = (2.0 * c[3], c[4], 2.0 * c[5]);
    let det = hxx * hyy - hxy * hxy;
    if !(hxx > 0.0 && det > 0.0) {
        return None;
    }
    let dx = -(hyy * c[1] - hxy * c[2]) / det;
    let dy = -(hxx * c[2] - hxy * c[1]) / det;
    if dx.abs() > 1.0 || dy.abs() > 1.0 {
        return None;
    }
    let x = grid.pos[n];
    Some([x[0] + dx * grid.h, x[1] + dy * grid.h])
}

/// Radius where `|p|` first reaches `level`, averaged over 16 rays.
fn recovery_radius(grid: &Grid, p: &[[f64; 2]], center: [f64; 2], level: f64) -> f64 {
    let step = 0.25 * grid.h;
    let rays = 16;
    let mut sum = 0.0;
    for q in 0..rays {
        let a = 2.0 * PI * q as f64 / rays as f64;
        let dir = [a.cos(), a.sin()];
        let mut r = 0.0;
        loop {
            let next = r + step;
            let x = [center[0] + next * dir[0], center[1] + next * dir[1]];
            match grid.interpolate(p, x) {
                Some(v) if modulus(v) < level => r = next,
                Some(_) => {
                    r = next;
                    break;
                }
                None => break,
            }
        }
        sum += r;
    }
    sum / rays as f64
}

/// Defects of a planar field with well modulus `amplitude`: connected components
/// of `{|v| < (1 - mu)·amplitude}`, each located at its `|v|`-argmin with
/// subpixel refinement. The total winding must equal the boundary winding.
pub fn detect_vortices(grid: &Grid, p: &[[f64; 2]], amplitude: f64, mu: f64) -> Result<DefectSet, DefectError> {
    let threshold = (1.0 - mu) * amplitude;
    let count = grid.node_count();
    let below: Vec<bool> = (0..count).map(|n| grid.kind[n] != NodeKind::Exterior && modulus(p[n]) < threshold).collect();
    let mut label = vec![usize::MAX; count];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for start in 0..count {
        if !below[start] || label[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        label[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            for m in grid.neighbors(n) {
                if below[m] && label[m] == usize::MAX {
                    label[m] = id;
                    members.push(m);
                    queue.push_back(m);
                }
            }
        }
        components.push(members);
    }
    let mut defects = Vec::new();
    let mut warnings = Vec::new();
    for members in &components {
        let argmin = *members
            .iter()
            .min_by(|&&a, &&b| modulus(p[a]).partial_cmp(&modulus(p[b])).unwrap().then(a.cmp(&b)))
            .expect("components are nonempty");
        if members.iter().any(|&n| grid.kind[n] == NodeKind::Boundary) {
            let x = grid.pos[argmin];
            warnings.push(format!("sublevel set touches the boundary near ({:.4}, {:.4})", x[0], x[1]));
            continue;
        }
        let mut region = vec![false; count];
        members.iter().for_each(|&n| region[n] = true);
        let winding = region_winding(grid, p, &region);
        let position = subpixel(grid, p, argmin).unwrap_or(grid.pos[argmin]);
        let core_radius = recovery_radius(grid, p, position, 0.9 * amplitude);
        defects.push(Defect { position, winding, core_radius, depth: modulus(p[argmin]) });
    }
    defects.sort_by(|a, b| {
        (a.position[0], a.position[1]).partial_cmp(&(b.position[0], b.position[1])).unwrap()
    });
    let rho = 4.0 * defects.iter().map(|d| d.core_radius).fold(0.0, f64::max);
    let set = DefectSet { defects, mu, rho, warnings };
    let boundary: Vec<[f64; 2]> = grid.boundary.iter().map(|b| p[b.node]).collect();
    let expected = winding_of_samples(&boundary, 0.5 * amplitude)?;
    let found = set.total_winding();
    if found != expected {
        return Err(DefectError::ChargeMismatch { found, expected });
    }
    Ok(set)
}

/// [`detect_vortices`] on the `p` part of a tensor field with well scalar `s`.
pub fn detect_defects(field: &PRField, s: f64, mu: f64) -> Result<DefectSet, DefectError> {
    let p = field.p_part();
    detect_vortices(&field.grid, &p.values, 0.5 * s.abs(), mu)
}

/// Winding of `p` along a closed cycle of nodes.
pub fn winding_on_loop<const N: usize>(field: &Field<N>, nodes: &[usize], floor: f64) -> Result<i32, DefectError> {
    if nodes.len() < 3 {
        return Err(DefectError::EmptyLoop);
    }
    let samples: Vec<[f64; 2]> = nodes.iter().map(|&n| [field.values[n][0], field.values[n][1]]).collect();
    Ok(winding_of_samples(&samples, floor)?)
}

/// Winding of `p` on a circle, sampled by interpolation.
pub fn winding_on_circle<const N: usize>(
    field: &Field<N>,
    center: [f64; 2],
    radius: f64,
    samples: usize,
    floor: f64,
) -> Result<i32, DefectError> {
    let pts: Option<Vec<[f64; 2]>> = (0..samples.max(3))
        .map(|i| {
            let a = 2.0 * PI * i as f64 / samples.max(3) as f64;
            let v = field.grid.interpolate(&field.values, [center[0] + radius * a.cos(), center[1] + radius * a.sin()])?;
            Some([v[0], v[1]])
        })
        .collect();
    let pts = pts.ok_or(DefectError::EmptyLoop)?;
    Ok(winding_of_samples(&pts, floor)?)
}

/// Nodes on the outer ring of the `(2m+1)²` lattice block centered at lattice node `n`,
/// counterclockwise; `None` if the ring leaves the interior.
pub fn lattice_ring(grid: &Grid, n: usize, m: usize) -> Option<Vec<usize>> {
    let (i, j) = grid.coords(n);
    let (i, j, m) = (i as i64, j as i64, m as i64);
    let mut out = Vec::new();
    let mut push = |a: i64, b: i64| -> Option<()> {
        if a < 0 || b < 0 || a >= grid.nx as i64 || b >= grid.ny as i64 {
            return None;
        }
        let k = grid.index(a as usize, b as usize);
        if grid.kind[k] == NodeKind::Exterior {
            return None;
        }
        out.push(k);
        Some(())
    };
    for a in -m..m {
        push(i + a, j - m)?;
    }
    for b in -m..m {
        push(i + m, j + b)?;
    }
    for a in (-m + 1..=m).rev() {
        push(i + a, j + m)?;
    }
    for b in (-m + 1..=m).rev() {
        push(i - m, j + b)?;
    }
    Some(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellMetrics {
    pub rho: f64,
    /// `sup ||p| - |s|/2|` over nodes outside the exclusion disks.
    pub sup_p: f64,
    /// `sup |r - s/3|` over the same nodes.
    pub sup_r: f64,
    /// `(μ, area)` of `{||p| - |s|/2| + |r - s/3| > μ}`.
    pub bad_area: Vec<(f64, f64)>,
}

/// Distance-to-well observables of a tensor field with well scalar `s`.
pub fn well_metrics(field: &PRField, s: f64, centers: &[[f64; 2]], rho: f64, mus: &[f64]) -> WellMetrics {
    let (a, r0) = (0.5 * s.abs(), s / 3.0);
    metrics_from(field.grid.as_ref(), centers, rho, mus, |n| {
        let [p1, p2, r] = field.values[n];
        ((p1.hypot(p2) - a).abs(), (r - r0).abs())
    })
}

/// [`well_metrics`] for a planar field whose well is the circle of radius `amplitude`; `sup_r` is zero.
pub fn vortex_well_metrics(
    grid: &Grid,
    v: &[[f64; 2]],
    amplitude: f64,
    centers: &[[f64; 2]],
    rho: f64,
    mus: &[f64],
) -> WellMetrics {
    metrics_from(grid, centers, rho, mus, |n| ((modulus(v[n]) - amplitude).abs(), 0.0))
}

fn metrics_from(
    grid: &Grid,
    centers: &[[f64; 2]],
    rho: f64,
    mus: &[f64],
    distance: impl Fn(usize) -> (f64, f64),
) -> WellMetrics {
    let mut sup_p = 0.0_f64;
    let mut sup_r = 0.0_f64;
    let mut bad_area = vec![0.0; mus.len()];
    for n in 0..grid.node_count() {
        if grid.kind[n] == NodeKind::Exterior {
            continue;
        }
        let (dp, dr) = distance(n);
        for (slot, &mu) in bad_area.iter_mut().zip(mus) {
            if dp + dr > mu {
                *slot += grid.node_weight[n];
            }
        }
        let x = grid.pos[n];
        if centers.iter().all(|c| (x[0] - c[0]).hypot(x[1] - c[1]) >= rho) {
            sup_p = sup_p.max(dp);
            sup_r = sup_r.max(dr);
        }
    }
    WellMetrics { rho, sup_p, sup_r, bad_area: mus.iter().copied().zip(bad_area).collect() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectorField {
    /// `(node, angle)` with the angle in `[0, π)`, for nodes outside the exclusion disks.
    pub angles: Vec<(usize, f64)>,
    /// Degree of the line field about each defect: half the winding of `p`.
    pub degrees: Vec<f64>,
}

/// Director angle `½ phase(p) mod π` away from the cores.
pub fn director_field(field: &PRField, defects: &DefectSet, rho: f64) -> DirectorField {
    let grid = field.grid.as_ref();
    let centers = defects.positions();
    let angles = (0..grid.node_count())
        .filter(|&n| grid.kind[n] != NodeKind::Exterior)
        .filter(|&n| {
            let x = grid.pos[n];
            centers.iter().all(|c| (x[0] - c[0]).hypot(x[1] - c[1]) >= rho)
        })
        .filter_map(|n| {
            let [p1, p2, _] = field.values[n];
            crate::qtensor::director_angle([p1, p2]).ok().map(|a| (n, a))
        })
        .collect();
    DirectorField { angles, degrees: defects.defects.iter().map(|d| 0.5 * d.winding as f64).collect() }
}
