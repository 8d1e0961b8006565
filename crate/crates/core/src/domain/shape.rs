//! Smooth reference domains: closest-point projection and arc-length parametrization.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::DomainError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Disk { center: [f64; 2], radius: f64 },
    /// Semi-axes `a` along x and `b` along y.
    Ellipse { center: [f64; 2], a: f64, b: f64 },
    /// Rectangle `width × height` whose corners are rounded with radius `corner`.
    RoundedRect { center: [f64; 2], width: f64, height: f64, corner: f64 },
}

/// Closest point of the boundary curve, with its outward normal and
/// normalized arc-length parameter `t ∈ [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub point: [f64; 2],
    pub normal: [f64; 2],
    pub t: f64,
}

impl CurvePoint {
    /// Counterclockwise unit tangent, the normal rotated by +90°.
    pub fn tangent(&self) -> [f64; 2] {
        [-self.normal[1], self.normal[0]]
    }
}

// 8-point Gauss–Legendre on [-1, 1]
const GL_X: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_W: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Arc length of the ellipse `(a cos φ, b sin φ)` from 0 to `phi ∈ [0, 2π]`.
fn ellipse_arc(a: f64, b: f64, phi: f64) -> f64 {
    let panels = 64;
    let full = (phi / TAU * panels as f64).floor() as usize;
    let width = TAU / panels as f64;
    let speed = |u: f64| (a * a * u.sin().powi(2) + b * b * u.cos().powi(2)).sqrt();
    let panel = |lo: f64, hi: f64| {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        GL_X.iter().zip(GL_W.iter()).map(|(x, w)| w * speed(mid + half * x)).sum::<f64>() * half
    };
    let mut total = 0.0;
    for i in 0..full.min(panels) {
        total += panel(i as f64 * width, (i + 1) as f64 * width);
    }
    let start = full as f64 * width;
    if full < panels && phi > start {
        total += panel(start, phi);
    }
    total
}

impl Shape {
    pub fn disk(radius: f64) -> Self {
        Shape::Disk { center: [0.0, 0.0], radius }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        Shape::Ellipse { center: [0.0, 0.0], a, b }
    }

    pub fn rounded_rect(width: f64, height: f64, corner: f64) -> Self {
        Shape::RoundedRect { center: [0.0, 0.0], width, height, corner }
    }

    pub fn center(&self) -> [f64; 2] {
        match *self {
            Shape::Disk { center, .. } | Shape::Ellipse { center, .. } | Shape::RoundedRect { center, .. } => center,
        }
    }

    /// The same shape moved by `shift`.
    pub fn translated(&self, shift: [f64; 2]) -> Self {
        let mv = |c: [f64; 2]| [c[0] + shift[0], c[1] + shift[1]];
        match *self {
            Shape::Disk { center, radius } => Shape::Disk { center: mv(center), radius },
            Shape::Ellipse { center, a, b } => Shape::Ellipse { center: mv(center), a, b },
            Shape::RoundedRect { center, width, height, corner } => {
                Shape::RoundedRect { center: mv(center), width, height, corner }
            }
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let ok = match *self {
            Shape::Disk { radius, .. } => radius > 0.0 && radius.is_finite(),
            Shape::Ellipse { a, b, .. } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            Shape::RoundedRect { width, height, corner, .. } => {
                if corner <= 0.0 {
                    return Err(DomainError::SharpCorner);
                }
                width > 0.0 && height > 0.0 && 2.0 * corner <= width.min(height) && width.is_finite() && height.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(DomainError::InvalidShape(format!("{self:?}")))
        }
    }

    /// Smallest width of the domain, used for the resolution floor.
    pub fn min_feature(&self) -> f64 {
        match *self {
            Shape::Disk { radius, .. } => 2.0 * radius,
            Shape::Ellipse { a, b, .. } => 2.0 * a.min(b),
            Shape::RoundedRect { width, height, .. } => width.min(height),
        }
    }

    /// Half extents of the bounding box.
    pub fn half_extent(&self) -> [f64; 2] {
        match *self {
            Shape::Disk { radius, .. } => [radius, radius],
            Shape::Ellipse { a, b, .. } => [a, b],
            Shape::RoundedRect { width, height, .. } => [0.5 * width, 0.5 * height],
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Shape::Disk { radius, .. } => PI * radius * radius,
            Shape::Ellipse { a, b, .. } => PI * a * b,
            Shape::RoundedRect { width, height, corner, .. } => width * height - (4.0 - PI) * corner * corner,
        }
    }

    pub fn perimeter(&self) -> f64 {
        match *self {
            Shape::Disk { radius, .. } => TAU * radius,
            Shape::Ellipse { a, b, .. } => ellipse_arc(a, b, TAU),
            Shape::RoundedRect { width, height, corner, .. } => {
                2.0 * (width - 2.0 * corner) + 2.0 * (height - 2.0 * corner) + TAU * corner
            }
        }
    }

    /// Strictly inside the open domain.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        let c = self.center();
        let (dx, dy) = (x[0] - c[0], x[1] - c[1]);
        match *self {
            Shape::Disk { radius, .. } => dx * dx + dy * dy < radius * radius,
            Shape::Ellipse { a, b, .. } => (dx / a).powi(2) + (dy / b).powi(2) < 1.0,
            Shape::RoundedRect { width, height, corner, .. } => {
                let ix = 0.5 * width - corner;
                let iy = 0.5 * height - corner;
                let ex = (dx.abs() - ix).max(0.0);
                let ey = (dy.abs() - iy).max(0.0);
                dx.abs() < 0.5 * width && dy.abs() < 0.5 * height && ex * ex + ey * ey < corner * corner
            }
        }
    }

    /// Closest point on the boundary curve.
    pub fn project(&self, x: [f64; 2]) -> CurvePoint {
        let c = self.center();
        let q = [x[0] - c[0], x[1] - c[1]];
        let (local, normal) = match *self {
            Shape::Disk { radius, .. } => {
                let n = q[0].hypot(q[1]);
                let dir = if n > 0.0 { [q[0] / n, q[1] / n] } else { [1.0, 0.0] };
                ([radius * dir[0], radius * dir[1]], dir)
            }
            Shape::Ellipse { a, b, .. } => {
                let phi = ellipse_closest_param(a, b, q);
                ellipse_point(a, b, phi)
            }
            Shape::RoundedRect { width, height, corner, .. } => rect_closest(width, height, corner, q),
        };
        let t = self.local_param(local);
        CurvePoint { point: [local[0] + c[0], local[1] + c[1]], normal, t }
    }

    /// Normalized arc length of a point lying on the centered curve.
    fn local_param(&self, p: [f64; 2]) -> f64 {
        let t = match *self {
            Shape::Disk { .. } => p[1].atan2(p[0]).rem_euclid(TAU) / TAU,
            Shape::Ellipse { a, b, .. } => {
                let phi = (p[1] / b).atan2(p[0] / a).rem_euclid(TAU);
                ellipse_arc(a, b, phi) / ellipse_arc(a, b, TAU)
            }
            Shape::RoundedRect { width, height, corner, .. } => rect_arc(width, height, corner, p) / self.perimeter(),
        };
        if t >= 1.0 {
            0.0
        } else {
            t
        }
    }

    /// Point and outward normal at normalized arc length `t`.
    pub fn point_at(&self, t: f64) -> CurvePoint {
        let t = t.rem_euclid(1.0);
        let c = self.center();
        let (local, normal) = match *self {
            Shape::Disk { radius, .. } => {
                let (s, co) = (TAU * t).sin_cos();
                ([radius * co, radius * s], [co, s])
            }
            Shape::Ellipse { a, b, .. } => {
                // invert the arc-length map by bisection then Newton polish
                let total = ellipse_arc(a, b, TAU);
                let target = t * total;
                let (mut lo, mut hi) = (0.0, TAU);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if ellipse_arc(a, b, mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                ellipse_point(a, b, 0.5 * (lo + hi))
            }
            Shape::RoundedRect { width, height, corner, .. } => rect_at(width, height, corner, t * self.perimeter()),
        };
        CurvePoint { point: [local[0] + c[0], local[1] + c[1]], normal, t }
    }
}

fn ellipse_point(a: f64, b: f64, phi: f64) -> ([f64; 2], [f64; 2]) {
    let (s, c) = phi.sin_cos();
    let n = [b * c, a * s];
    let len = n[0].hypot(n[1]);
    ([a * c, b * s], [n[0] / len, n[1] / len])
}

fn ellipse_closest_param(a: f64, b: f64, q: [f64; 2]) -> f64 {
    let dist2 = |phi: f64| {
        let (s, c) = phi.sin_cos();
        (q[0] - a * c).powi(2) + (q[1] - b * s).powi(2)
    };
    let samples = 256;
    let mut best = 0.0;
    let mut best_d = f64::INFINITY;
    for i in 0..samples {
        let phi = TAU * i as f64 / samples as f64;
        let d = dist2(phi);
        if d < best_d {
            best_d = d;
            best = phi;
        }
    }
    // Newton on the stationarity condition, kept inside the bracketing sample cell
    let step = TAU / samples as f64;
    let (lo, hi) = (best - step, best + step);
    let mut phi = best;
    for _ in 0..50 {
        let (s, c) = phi.sin_cos();
        let f = (a * a - b * b) * s * c - q[0] * a * s + q[1] * b * c;
        let df = (a * a - b * b) * (c * c - s * s) - q[0] * a * c - q[1] * b * s;
        if df == 0.0 {
            break;
        }
        let next = (phi - f / df).clamp(lo, hi);
        if (next - phi).abs() < 1e-15 {
            phi = next;
            break;
        }
        phi = next;
    }
    if dist2(phi) > best_d {
        phi = best;
    }
    phi.rem_euclid(TAU)
}

fn rect_closest(width: f64, height: f64, corner: f64, q: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    let ix = 0.5 * width - corner;
    let iy = 0.5 * height - corner;
    let qc = [q[0].clamp(-ix, ix), q[1].clamp(-iy, iy)];
    let d = [q[0] - qc[0], q[1] - qc[1]];
    let len = d[0].hypot(d[1]);
    if len > 0.0 {
        let n = [d[0] / len, d[1] / len];
        return ([qc[0] + corner * n[0], qc[1] + corner * n[1]], n);
    }
    // inside the inner rectangle: nearest flat side
    let gap_x = 0.5 * width - q[0].abs();
    let gap_y = 0.5 * height - q[1].abs();
    if gap_x <= gap_y {
        let sx = if q[0] >= 0.0 { 1.0 } else { -1.0 };
        ([sx * 0.5 * width, q[1]], [sx, 0.0])
    } else {
        let sy = if q[1] >= 0.0 { 1.0 } else { -1.0 };
        ([q[0], sy * 0.5 * height], [0.0, sy])
    }
}

/// Pieces of the rounded rectangle in counterclockwise order starting at the
/// midpoint of the right side. Each is (length, kind).
fn rect_pieces(width: f64, height: f64, corner: f64) -> [(f64, u8); 9] {
    let sx = width - 2.0 * corner;
    let sy = height - 2.0 * corner;
    let arc = 0.5 * PI * corner;
    [(0.5 * sy, 0), (arc, 1), (sx, 2), (arc, 3), (sy, 4), (arc, 5), (sx, 6), (arc, 7), (0.5 * sy, 8)]
}

fn rect_at(width: f64, height: f64, corner: f64, mut s: f64) -> ([f64; 2], [f64; 2]) {
    let ix = 0.5 * width - corner;
    let iy = 0.5 * height - corner;
    let (w2, h2) = (0.5 * width, 0.5 * height);
    let arc_at = |cx: f64, cy: f64, start: f64, u: f64| {
        let ang = start + u / corner;
        let (sn, cs) = ang.sin_cos();
        ([cx + corner * cs, cy + corner * sn], [cs, sn])
    };
    for (len, kind) in rect_pieces(width, height, corner) {
        if s <= len || kind == 8 {
            return match kind {
                0 => ([w2, s], [1.0, 0.0]),
                1 => arc_at(ix, iy, 0.0, s),
                2 => ([ix - s, h2], [0.0, 1.0]),
                3 => arc_at(-ix, iy, 0.5 * PI, s),
                4 => ([-w2, iy - s], [-1.0, 0.0]),
                5 => arc_at(-ix, -iy, PI, s),
                6 => ([-ix + s, -h2], [0.0, -1.0]),
                7 => arc_at(ix, -iy, 1.5 * PI, s),
                _ => ([w2, -iy + s], [1.0, 0.0]),
            };
        }
        s -= len;
    }
    unreachable!("loop returns on the last piece")
}

fn rect_arc(width: f64, height: f64, corner: f64, p: [f64; 2]) -> f64 {
    let ix = 0.5 * width - corner;
    let iy = 0.5 * height - corner;
    let pieces = rect_pieces(width, height, corner);
    let offset = |kind: usize| pieces[..kind].iter().map(|(l, _)| l).sum::<f64>();
    let dx = p[0].abs() - ix;
    let dy = p[1].abs() - iy;
    if dx > 0.0 && dy > 0.0 {
        let (kind, cx, cy, start) = match (p[0] > 0.0, p[1] > 0.0) {
            (true, true) => (1, ix, iy, 0.0),
            (false, true) => (3, -ix, iy, 0.5 * PI),
            (false, false) => (5, -ix, -iy, PI),
            (true, false) => (7, ix, -iy, 1.5 * PI),
        };
        let ang = (p[1] - cy).atan2(p[0] - cx);
        return offset(kind) + corner * (ang - start).rem_euclid(TAU).min(0.5 * PI);
    }
    if dx > 0.0 {
        if p[0] > 0.0 {
            if p[1] >= 0.0 {
                p[1]
            } else {
                offset(8) + (p[1] + iy)
            }
        } else {
            offset(4) + (iy - p[1])
        }
    } else if p[1] > 0.0 {
        offset(2) + (ix - p[0])
    } else {
        offset(6) + (p[0] + ix)
    }
}
