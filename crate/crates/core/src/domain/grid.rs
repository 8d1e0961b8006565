//! Uniform lattice cut by the boundary curve. Boundary nodes lie exactly on
//! the curve, either where lattice edges cross it or at inside nodes snapped
//! onto it; cut cells are fan-triangulated, full cells use both diagonals.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::shape::{CurvePoint, Shape};
use super::DomainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
}

/// One vertex of the boundary loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub node: usize,
    /// Normalized arc length of the node's position on the curve.
    pub t: f64,
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
}

/// A P1 element: vertex indices, gradients of the three hat functions and
/// its quadrature weight (area, halved when both diagonal splits of a cell are used).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub grad: [[f64; 2]; 3],
    pub weight: f64,
}

/// Inside nodes closer to the curve than this fraction of `h` (along a lattice
/// edge) are moved onto it, which keeps cut-cell triangles well shaped.
const SNAP_FRACTION: f64 = 0.3;

/// Full cells use one diagonal split when the other has a triangle below this
/// fraction of `h²/2`.
const MIN_TRIANGLE_QUALITY: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct Grid {
    pub shape: Shape,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: [f64; 2],
    /// Kind of every node. The first `nx·ny` nodes are lattice nodes in
    /// row-major order; boundary nodes on lattice edges follow.
    pub kind: Vec<NodeKind>,
    /// Node coordinates.
    pub pos: Vec<[f64; 2]>,
    /// Boundary nodes ordered by arc length, positively oriented.
    pub boundary: Vec<BoundaryNode>,
    pub triangles: Vec<Triangle>,
    /// Lumped quadrature weight of each node.
    pub node_weight: Vec<f64>,
    /// Interior nodes in increasing index order.
    pub free_nodes: Vec<usize>,
    /// Inverse of `free_nodes`; `usize::MAX` for pinned or exterior nodes.
    pub free_index: Vec<usize>,
    /// For each node, the `(triangle, corner)` pairs that touch it, in triangle order.
    pub node_tri_ptr: Vec<usize>,
    pub node_tri: Vec<(u32, u8)>,
    /// Triangles of each lattice cell (cells indexed by their lower-left node).
    cell_tri_ptr: Vec<usize>,
    /// Boundary loop position of each node; `usize::MAX` off the loop.
    pub boundary_slot: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Inside,
    Snapped,
    Outside,
}

/// Point where the segment from inside point `a` to outside point `b` leaves the shape,
/// as a fraction of the segment.
fn crossing_fraction(shape: &Shape, a: [f64; 2], b: [f64; 2]) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let x = [a[0] + mid * (b[0] - a[0]), a[1] + mid * (b[1] - a[1])];
        if shape.contains(x) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl Grid {
    /// Builds the grid with spacing `1 / resolution`.
    pub fn build(shape: Shape, resolution: f64) -> Result<Grid, DomainError> {
        shape.validate()?;
        let across = resolution * shape.min_feature();
        if !(across >= 16.0) {
            return Err(DomainError::ResolutionTooCoarse { across });
        }
        let h = 1.0 / resolution;
        let c = shape.center();
        let [ex, ey] = shape.half_extent();
        let mx = (ex / h).ceil() as usize + 2;
        let my = (ey / h).ceil() as usize + 2;
        let (nx, ny) = (2 * mx + 1, 2 * my + 1);
        let lattice_count = nx * ny;
        // the center sits on a lattice node
        let origin = [c[0] - mx as f64 * h, c[1] - my as f64 * h];
        let mut pos: Vec<[f64; 2]> =
            (0..lattice_count).map(|n| [origin[0] + (n % nx) as f64 * h, origin[1] + (n / nx) as f64 * h]).collect();
        let inside: Vec<bool> = pos.iter().map(|&x| shape.contains(x)).collect();

        // lattice edges: horizontal edge e = n (from n to n+1), vertical edge e = n (from n to n+nx)
        let edge_ends = |n: usize, vertical: bool| if vertical { (n, n + nx) } else { (n, n + 1) };
        let mut crossings: Vec<(usize, bool, f64)> = Vec::new();
        for n in 0..lattice_count {
            let (i, j) = (n % nx, n / nx);
            for vertical in [false, true] {
                if (!vertical && i + 1 >= nx) || (vertical && j + 1 >= ny) {
                    continue;
                }
                let (a, b) = edge_ends(n, vertical);
                if inside[a] != inside[b] {
                    let (pin, pout) = if inside[a] { (a, b) } else { (b, a) };
                    crossings.push((n, vertical, crossing_fraction(&shape, pos[pin], pos[pout])));
                }
            }
        }

        // snap inside nodes that sit almost on the curve
        let mut status: Vec<Status> =
            inside.iter().map(|&x| if x { Status::Inside } else { Status::Outside }).collect();
        let mut closest = vec![(f64::INFINITY, [0.0; 2]); lattice_count];
        for &(n, vertical, frac) in &crossings {
            let (a, b) = edge_ends(n, vertical);
            let (pin, pout) = if inside[a] { (a, b) } else { (b, a) };
            if frac < closest[pin].0 {
                let x = [pos[pin][0] + frac * (pos[pout][0] - pos[pin][0]), pos[pin][1] + frac * (pos[pout][1] - pos[pin][1])];
                closest[pin] = (frac, x);
            }
        }
        let mut curve_point: Vec<Option<CurvePoint>> = vec![None; lattice_count];
        for n in 0..lattice_count {
            if inside[n] && closest[n].0 < SNAP_FRACTION {
                status[n] = Status::Snapped;
                let cp = shape.project(closest[n].1);
                pos[n] = cp.point;
                curve_point[n] = Some(cp);
            }
        }

        // boundary nodes on edges joining an unsnapped inside node to an outside one
        let mut edge_node: HashMap<(usize, bool), usize> = HashMap::new();
        for &(n, vertical, frac) in &crossings {
            let (a, b) = edge_ends(n, vertical);
            let (pin, pout) = if inside[a] { (a, b) } else { (b, a) };
            if status[pin] != Status::Inside {
                continue;
            }
            let x = [pos[pin][0] + frac * (pos[pout][0] - pos[pin][0]), pos[pin][1] + frac * (pos[pout][1] - pos[pin][1])];
            let cp = shape.project(x);
            edge_node.insert((n, vertical), pos.len());
            pos.push(cp.point);
            curve_point.push(Some(cp));
        }
        let total = pos.len();
        let mut kind: Vec<NodeKind> = (0..total)
            .map(|n| {
                if n >= lattice_count {
                    NodeKind::Boundary
                } else {
                    match status[n] {
                        Status::Inside => NodeKind::Interior,
                        Status::Snapped => NodeKind::Boundary,
                        Status::Outside => NodeKind::Exterior,
                    }
                }
            })
            .collect();

        // triangulate each cell's part of the domain
        let (cx, cy) = (nx - 1, ny - 1);
        let mut triangles = Vec::new();
        let mut cell_tri_ptr = vec![0usize; cx * cy + 1];
        for cj in 0..cy {
            for ci in 0..cx {
                let n00 = cj * nx + ci;
                let corners = [n00, n00 + 1, n00 + nx + 1, n00 + nx];
                // edge from corner q to corner q+1, keyed by its lower/left node
                let edges = [(n00, false), (n00 + 1, true), (n00 + nx, false), (n00, true)];
                let mut poly = Vec::with_capacity(6);
                for q in 0..4 {
                    if status[corners[q]] != Status::Outside {
                        poly.push(corners[q]);
                    }
                    if let Some(&m) = edge_node.get(&edges[q]) {
                        poly.push(m);
                    }
                }
                let full = corners.iter().all(|&m| status[m] != Status::Outside);
                if full {
                    let split_a = [[corners[0], corners[1], corners[2]], [corners[0], corners[2], corners[3]]];
                    let split_b = [[corners[0], corners[1], corners[3]], [corners[1], corners[2], corners[3]]];
                    let quality = |tri: &[usize; 3]| signed_area(&pos, tri) / (0.5 * h * h);
                    let good_a = split_a.iter().all(|t| quality(t) >= MIN_TRIANGLE_QUALITY);
                    let good_b = split_b.iter().all(|t| quality(t) >= MIN_TRIANGLE_QUALITY);
                    let (tris, share): (Vec<[usize; 3]>, f64) = match (good_a, good_b) {
                        (true, true) => (split_a.iter().chain(split_b.iter()).copied().collect(), 0.5),
                        (true, false) => (split_a.to_vec(), 1.0),
                        (false, true) => (split_b.to_vec(), 1.0),
                        (false, false) => return Err(DomainError::DegenerateCell { cell: [ci, cj] }),
                    };
                    for tri in tris {
                        triangles.push(make_triangle(&pos, tri, share));
                    }
                } else if poly.len() >= 3 {
                    for (tri, share) in fan(&pos, &poly, h).ok_or(DomainError::DegenerateCell { cell: [ci, cj] })? {
                        triangles.push(make_triangle(&pos, tri, share));
                    }
                }
                cell_tri_ptr[cj * cx + ci + 1] = triangles.len();
            }
        }

        let mut node_weight = vec![0.0; total];
        let mut counts = vec![0usize; total + 1];
        for tri in &triangles {
            for &n in &tri.nodes {
                node_weight[n] += tri.weight / 3.0;
                counts[n + 1] += 1;
            }
        }
        for n in 0..total {
            counts[n + 1] += counts[n];
        }
        let node_tri_ptr = counts.clone();
        let mut fill = counts;
        let mut node_tri = vec![(0u32, 0u8); node_tri_ptr[total]];
        for (t, tri) in triangles.iter().enumerate() {
            for (corner, &n) in tri.nodes.iter().enumerate() {
                node_tri[fill[n]] = (t as u32, corner as u8);
                fill[n] += 1;
            }
        }
        // nodes outside every triangle carry no unknowns
        for n in 0..total {
            if node_tri_ptr[n + 1] == node_tri_ptr[n] && kind[n] != NodeKind::Exterior {
                if kind[n] == NodeKind::Boundary {
                    return Err(DomainError::BoundaryNotSimple);
                }
                kind[n] = NodeKind::Exterior;
            }
        }

        let mut boundary: Vec<BoundaryNode> = (0..total)
            .filter(|&n| kind[n] == NodeKind::Boundary)
            .map(|n| {
                let cp = curve_point[n].expect("boundary nodes lie on the curve");
                BoundaryNode { node: n, t: cp.t, normal: cp.normal, tangent: cp.tangent() }
            })
            .collect();
        boundary.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap().then(a.node.cmp(&b.node)));
        let mut boundary_slot = vec![usize::MAX; total];
        for (i, b) in boundary.iter().enumerate() {
            boundary_slot[b.node] = i;
        }

        let free_nodes: Vec<usize> = (0..total).filter(|&n| kind[n] == NodeKind::Interior).collect();
        let mut free_index = vec![usize::MAX; total];
        for (f, &n) in free_nodes.iter().enumerate() {
            free_index[n] = f;
        }

        let grid = Grid {
            shape,
            nx,
            ny,
            h,
            origin,
            kind,
            pos,
            boundary,
            triangles,
            node_weight,
            free_nodes,
            free_index,
            node_tri_ptr,
            node_tri,
            cell_tri_ptr,
            boundary_slot,
        };
        let loop_area = grid.loop_signed_area();
        if !(loop_area > 0.0) || (loop_area - grid.area()).abs() > 1e-9 * loop_area {
            return Err(DomainError::BoundaryNotSimple);
        }
        Ok(grid)
    }

    pub fn node_count(&self) -> usize {
        self.pos.len()
    }

    pub fn lattice_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Lattice coordinates of a lattice node; boundary nodes on edges report
    /// the lattice cell corner nearest to them.
    pub fn coords(&self, n: usize) -> (usize, usize) {
        if n < self.lattice_count() {
            (n % self.nx, n / self.nx)
        } else {
            let x = self.pos[n];
            let i = ((x[0] - self.origin[0]) / self.h).round().clamp(0.0, (self.nx - 1) as f64) as usize;
            let j = ((x[1] - self.origin[1]) / self.h).round().clamp(0.0, (self.ny - 1) as f64) as usize;
            (i, j)
        }
    }

    pub fn lattice_pos(&self, n: usize) -> [f64; 2] {
        let (i, j) = self.coords(n);
        [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h]
    }

    pub fn is_active(&self, n: usize) -> bool {
        self.kind[n] != NodeKind::Exterior
    }

    pub fn count(&self, k: NodeKind) -> usize {
        self.kind.iter().filter(|&&x| x == k).count()
    }

    /// Shoelace area enclosed by the boundary loop.
    pub fn loop_signed_area(&self) -> f64 {
        let m = self.boundary.len();
        (0..m)
            .map(|i| {
                let a = self.pos[self.boundary[i].node];
                let b = self.pos[self.boundary[(i + 1) % m].node];
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
            * 0.5
    }

    /// Total quadrature weight, the discrete area of the domain.
    pub fn area(&self) -> f64 {
        self.triangles.iter().map(|t| t.weight).sum()
    }

    /// Trapezoid weights of the boundary loop: half the adjacent chord lengths.
    pub fn boundary_weights(&self) -> Vec<f64> {
        let m = self.boundary.len();
        let chord = |i: usize| {
            let a = self.pos[self.boundary[i].node];
            let b = self.pos[self.boundary[(i + 1) % m].node];
            (a[0] - b[0]).hypot(a[1] - b[1])
        };
        let chords: Vec<f64> = (0..m).map(chord).collect();
        (0..m).map(|i| 0.5 * (chords[i] + chords[(i + m - 1) % m])).collect()
    }

    /// Nodes sharing a triangle with `n`, in increasing order.
    pub fn neighbors(&self, n: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.node_tri[self.node_tri_ptr[n]..self.node_tri_ptr[n + 1]]
            .iter()
            .flat_map(|&(t, _)| self.triangles[t as usize].nodes)
            .filter(|&m| m != n)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Triangle index ranges of each lattice cell.
    pub fn cell_triangles(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.cell_tri_ptr.windows(2).map(|w| w[0]..w[1])
    }

    /// Locates a triangle containing `x` and its barycentric coordinates.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 3])> {
        self.nearest_triangle(x).filter(|b| b.2 >= -1e-9).map(|b| (b.0, b.1))
    }

    /// Triangle near `x` whose smallest barycentric coordinate is largest.
    fn nearest_triangle(&self, x: [f64; 2]) -> Option<(usize, [f64; 3], f64)> {
        let (cx, cy) = (self.nx - 1, self.ny - 1);
        let i = ((x[0] - self.origin[0]) / self.h).floor() as isize;
        let j = ((x[1] - self.origin[1]) / self.h).floor() as isize;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for dj in -1..=1 {
            for di in -1..=1 {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= cx as isize || b >= cy as isize {
                    continue;
                }
                let cell = b as usize * cx + a as usize;
                for t in self.cell_tri_ptr[cell]..self.cell_tri_ptr[cell + 1] {
                    let tri = &self.triangles[t];
                    let bary = barycentric(&self.pos, &tri.nodes, x);
                    let worst = bary.iter().cloned().fold(f64::INFINITY, f64::min);
                    if best.as_ref().map_or(true, |b| worst > b.2) {
                        best = Some((t, bary, worst));
                    }
                }
            }
        }
        best
    }

    /// Linear interpolation of nodal data at `x`.
    pub fn interpolate<const N: usize>(&self, values: &[[f64; N]], x: [f64; 2]) -> Option<[f64; N]> {
        let (t, bary) = self.locate(x)?;
        let nodes = self.triangles[t].nodes;
        let mut out = [0.0; N];
        for a in 0..3 {
            for c in 0..N {
                out[c] += bary[a] * values[nodes[a]][c];
            }
        }
        Some(out)
    }

    /// Like [`Grid::interpolate`], but points just outside the triangulation
    /// take the value at the closest point of a nearby triangle.
    pub fn interpolate_clamped<const N: usize>(&self, values: &[[f64; N]], x: [f64; 2]) -> Option<[f64; N]> {
        let (t, bary, _) = self.nearest_triangle(x)?;
        let clamped = bary.map(|b| b.max(0.0));
        let total: f64 = clamped.iter().sum();
        let nodes = self.triangles[t].nodes;
        let mut out = [0.0; N];
        for a in 0..3 {
            for c in 0..N {
                out[c] += clamped[a] / total * values[nodes[a]][c];
            }
        }
        Some(out)
    }
}

/// Fan triangulations of a cut-cell polygon from the roots that keep the
/// smallest triangle largest; tied roots are averaged so that mirror-image
/// cells get mirror-image triangles. Negligible triangles are dropped.
fn fan(pos: &[[f64; 2]], poly: &[usize], h: f64) -> Option<Vec<([usize; 3], f64)>> {
    let m = poly.len();
    let fans: Vec<(f64, Vec<[usize; 3]>)> = (0..m)
        .map(|root| {
            let tris: Vec<[usize; 3]> =
                (1..m - 1).map(|k| [poly[root], poly[(root + k) % m], poly[(root + k + 1) % m]]).collect();
            let worst = tris.iter().map(|t| signed_area(pos, t)).fold(f64::INFINITY, f64::min);
            (worst, tris)
        })
        .collect();
    let best = fans.iter().map(|f| f.0).fold(f64::NEG_INFINITY, f64::max);
    let tiny = 1e-12 * h * h;
    if best < -tiny {
        return None;
    }
    let chosen: Vec<&Vec<[usize; 3]>> = fans.iter().filter(|f| f.0 >= best - 1e-9 * h * h).map(|f| &f.1).collect();
    let share = 1.0 / chosen.len() as f64;
    Some(chosen.into_iter().flatten().filter(|t| signed_area(pos, t) > tiny).map(|&t| (t, share)).collect())
}

fn signed_area(pos: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = [pos[tri[0]], pos[tri[1]], pos[tri[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn barycentric(pos: &[[f64; 2]], tri: &[usize; 3], x: [f64; 2]) -> [f64; 3] {
    let area = signed_area(pos, tri);
    let mut out = [0.0; 3];
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        let pb = pos[tri[b]];
        let pc = pos[tri[c]];
        out[a] = 0.5 * ((pb[0] - x[0]) * (pc[1] - x[1]) - (pc[0] - x[0]) * (pb[1] - x[1])) / area;
    }
    out
}

fn make_triangle(pos: &[[f64; 2]], tri: [usize; 3], share: f64) -> Triangle {
    let area = signed_area(pos, &tri);
    let mut grad = [[0.0; 2]; 3];
    for a in 0..3 {
        let (b, c) = ((a + 1) % 3, (a + 2) % 3);
        let pb = pos[tri[b]];
        let pc = pos[tri[c]];
        grad[a] = [(pb[1] - pc[1]) / (2.0 * area), (pc[0] - pb[0]) / (2.0 * area)];
    }
    Triangle { nodes: tri, grad, weight: share * area }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn disk_node_count_matches_area() {
        let g = Grid::build(Shape::disk(1.0), 64.0).unwrap();
        let active = (0..g.lattice_count()).filter(|&n| g.kind[n] != NodeKind::Exterior).count();
        let target = PI * 64.0 * 64.0;
        assert!((active as f64 - target).abs() / target < 0.02, "{active} vs {target}");
    }

    #[test]
    fn rounded_rect_loop_is_positive() {
        let g = Grid::build(Shape::rounded_rect(2.0, 1.0, 0.2), 64.0).unwrap();
        assert!(g.loop_signed_area() > 0.0);
        let m = g.boundary.len();
        for i in 0..m {
            let a = g.boundary[i].node;
            let b = g.boundary[(i + 1) % m].node;
            let (pa, pb) = (g.pos[a], g.pos[b]);
            let chord = (pa[0] - pb[0]).hypot(pa[1] - pb[1]);
            assert!(chord > 0.0 && chord < 1.5 * g.h, "{chord}");
        }
    }

    #[test]
    fn ellipse_interior_nodes_are_inside() {
        let g = Grid::build(Shape::ellipse(1.0, 0.5), 64.0).unwrap();
        for n in 0..g.node_count() {
            if g.kind[n] == NodeKind::Interior {
                let [x, y] = g.pos[n];
                assert!(x * x + (y / 0.5).powi(2) < 1.0);
            }
        }
    }

    #[test]
    fn interior_nodes_have_active_neighbors() {
        let g = Grid::build(Shape::ellipse(1.0, 0.6), 40.0).unwrap();
        for n in 0..g.node_count() {
            if g.kind[n] != NodeKind::Interior {
                continue;
            }
            let nb = g.neighbors(n);
            assert!(nb.len() >= 4);
            assert!(nb.iter().all(|&m| g.kind[m] != NodeKind::Exterior));
            let (i, j) = g.coords(n);
            let deep = (0..9).all(|k| g.kind[g.index(i + k % 3 - 1, j + k / 3 - 1)] == NodeKind::Interior);
            if deep {
                assert_eq!(nb.len(), 8);
            }
        }
    }

    #[test]
    fn triangulation_covers_the_loop_polygon() {
        for shape in [Shape::disk(1.0), Shape::ellipse(1.0, 0.6), Shape::rounded_rect(2.0, 1.0, 0.25)] {
            for res in [16.0, 24.0, 37.0, 64.0] {
                let g = Grid::build(shape, res).unwrap();
                assert!((g.area() - g.loop_signed_area()).abs() < 1e-12, "{shape:?} {res}");
                for t in &g.triangles {
                    assert!(t.weight > 0.0);
                }
                let wsum: f64 = g.node_weight.iter().sum();
                assert!((wsum - g.area()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn area_converges_at_second_order() {
        let errs: Vec<f64> = [16.0, 32.0, 64.0]
            .iter()
            .map(|&r| (Grid::build(Shape::disk(1.0), r).unwrap().area() - PI).abs())
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1]);
        assert!(errs[2] < 4e-3, "{errs:?}");
    }

    #[test]
    fn boundary_nodes_sit_on_the_curve() {
        let g = Grid::build(Shape::ellipse(1.0, 0.6), 32.0).unwrap();
        for b in &g.boundary {
            let [x, y] = g.pos[b.node];
            assert!((x * x + (y / 0.6).powi(2) - 1.0).abs() < 1e-12);
        }
        // parameters increase around the loop, wrapping at most once
        let m = g.boundary.len();
        let wraps = (0..m).filter(|&i| g.boundary[(i + 1) % m].t < g.boundary[i].t).count();
        assert_eq!(wraps, 1);
    }

    #[test]
    fn coarse_resolution_is_rejected() {
        assert!(matches!(Grid::build(Shape::disk(1.0), 7.0), Err(DomainError::ResolutionTooCoarse { .. })));
    }

    #[test]
    fn interpolation_reproduces_linear_data() {
        let g = Grid::build(Shape::disk(1.0), 20.0).unwrap();
        let vals: Vec<[f64; 1]> = g.pos.iter().map(|p| [2.0 * p[0] - 3.0 * p[1] + 0.5]).collect();
        for &x in &[[0.1, 0.2], [-0.73, 0.4], [0.0, -0.98]] {
            let v = g.interpolate(&vals, x).unwrap()[0];
            assert!((v - (2.0 * x[0] - 3.0 * x[1] + 0.5)).abs() < 1e-12);
        }
        assert!(g.interpolate(&vals, [1.5, 0.0]).is_none());
    }
}
