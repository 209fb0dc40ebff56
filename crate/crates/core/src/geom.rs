//! Planar geometry: reference paths, Frenet conversion and oriented boxes.
//!
//! A [`ReferencePath`] is a polyline parameterized by arc length. Each vertex
//! carries a unit normal (the bisector of its adjacent segment normals) and the
//! frame inside a segment uses the linear blend of the two vertex normals. The
//! resulting `(s, d) -> (x, y)` map is continuous across vertices, so
//! [`to_frenet`] and [`to_cartesian`] are exact inverses inside the corridor
//! where the normal lines do not cross.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const ROOT_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("invalid reference path: {0}")]
    InvalidPath(String),
    #[error("station {s:.3} m outside path extent [0, {length:.3}] m")]
    OutOfRange { s: f64, length: f64 },
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CartesianPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl CartesianPose {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    pub fn distance(&self, other: &CartesianPose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Path-relative pose. `s` is measured relative to the ego station passed to
/// the conversion, `d` is positive to the left of the travel direction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrenetPose {
    pub s: f64,
    pub d: f64,
    pub theta: f64,
}

impl FrenetPose {
    pub const fn new(s: f64, d: f64, theta: f64) -> Self {
        Self { s, d, theta }
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let wrapped = (theta + PI).rem_euclid(two_pi) - PI;
    // rem_euclid can round up to exactly 2*pi for tiny negative inputs
    if wrapped >= PI {
        wrapped - two_pi
    } else {
        wrapped
    }
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath {
    points: Vec<[f64; 2]>,
    cumulative: Vec<f64>,
    normals: Vec<[f64; 2]>,
}

impl ReferencePath {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self, GeomError> {
        if points.len() < 2 {
            return Err(GeomError::InvalidPath(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if points
            .iter()
            .any(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(GeomError::InvalidPath("non-finite point".into()));
        }
        let mut cumulative = Vec::with_capacity(points.len());
        cumulative.push(0.0);
        for (i, w) in points.windows(2).enumerate() {
            let len = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            if len <= 1e-9 {
                return Err(GeomError::InvalidPath(format!(
                    "points {} and {} coincide",
                    i,
                    i + 1
                )));
            }
            cumulative.push(cumulative[i] + len);
        }

        let seg_normals: Vec<[f64; 2]> = points
            .windows(2)
            .map(|w| {
                let t = unit(sub(w[1], w[0]));
                [-t[1], t[0]]
            })
            .collect();
        let mut normals = Vec::with_capacity(points.len());
        normals.push(seg_normals[0]);
        for pair in seg_normals.windows(2) {
            let bis = [pair[0][0] + pair[1][0], pair[0][1] + pair[1][1]];
            if bis[0].hypot(bis[1]) < 1e-6 {
                return Err(GeomError::InvalidPath("path reverses on itself".into()));
            }
            normals.push(unit(bis));
        }
        normals.push(*seg_normals.last().unwrap());

        Ok(Self {
            points,
            cumulative,
            normals,
        })
    }

    /// Straight path from `start` along `heading` with the given length.
    pub fn straight(start: [f64; 2], heading: f64, length: f64) -> Result<Self, GeomError> {
        let end = [
            start[0] + length * heading.cos(),
            start[1] + length * heading.sin(),
        ];
        Self::new(vec![start, end])
    }

    /// Chaikin corner cutting, keeping both endpoints.
    pub fn smoothed(&self, iterations: u32) -> Result<Self, GeomError> {
        let mut pts = self.points.clone();
        for _ in 0..iterations {
            let mut next = Vec::with_capacity(pts.len() * 2);
            next.push(pts[0]);
            for w in pts.windows(2) {
                next.push([
                    0.75 * w[0][0] + 0.25 * w[1][0],
                    0.75 * w[0][1] + 0.25 * w[1][1],
                ]);
                next.push([
                    0.25 * w[0][0] + 0.75 * w[1][0],
                    0.25 * w[0][1] + 0.75 * w[1][1],
                ]);
            }
            next.push(*pts.last().unwrap());
            next.dedup_by(|a, b| (a[0] - b[0]).hypot(a[1] - b[1]) <= 1e-9);
            pts = next;
        }
        Self::new(pts)
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn cumulative_arclength(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn segment_count(&self) -> usize {
        self.points.len() - 1
    }

    fn segment_of(&self, s: f64) -> usize {
        let idx = self.cumulative.partition_point(|&c| c <= s);
        idx.saturating_sub(1).min(self.segment_count() - 1)
    }

    /// Point and unit left normal at absolute station `s`. Stations outside
    /// the path extrapolate the end segments.
    fn frame_at(&self, s: f64) -> ([f64; 2], [f64; 2]) {
        let i = self.segment_of(s);
        let a = self.points[i];
        let b = self.points[i + 1];
        let len = self.cumulative[i + 1] - self.cumulative[i];
        let u = (s - self.cumulative[i]) / len;
        let (n0, n1) = (self.normals[i], self.normals[i + 1]);
        // blending is only meaningful inside the segment
        let ub = u.clamp(0.0, 1.0);
        let n = unit([n0[0] + ub * (n1[0] - n0[0]), n0[1] + ub * (n1[1] - n0[1])]);
        ([a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])], n)
    }

    /// Tangent heading at absolute station `s`.
    pub fn heading_at(&self, s: f64) -> f64 {
        let (_, n) = self.frame_at(s);
        (-n[0]).atan2(n[1])
    }

    /// Centerline point at absolute station `s` (clamped to the path).
    pub fn point_at(&self, s: f64) -> [f64; 2] {
        self.frame_at(s.clamp(0.0, self.length())).0
    }

    /// Signed curvature at absolute station `s` by central difference of the
    /// tangent heading.
    pub fn curvature_at(&self, s: f64) -> f64 {
        let h = 0.5;
        let lo = (s - h).max(0.0);
        let hi = (s + h).min(self.length());
        if hi - lo < 1e-9 {
            return 0.0;
        }
        normalize_angle(self.heading_at(hi) - self.heading_at(lo)) / (hi - lo)
    }

    /// Absolute-station projection of a Cartesian point: `(s_abs, d)`.
    pub fn project(&self, x: f64, y: f64) -> (f64, f64) {
        let p = [x, y];
        let last = self.segment_count() - 1;
        let mut best: Option<(f64, f64)> = None;
        let mut consider = |s: f64, d: f64| match best {
            // strictly closer wins; equal distance keeps the smaller station
            Some((_, bd)) if d.abs() > bd.abs() + 1e-12 => {}
            Some((bs, bd)) if (d.abs() - bd.abs()).abs() <= 1e-12 && s >= bs => {}
            _ => best = Some((s, d)),
        };

        for i in 0..=last {
            let a = self.points[i];
            let e = sub(self.points[i + 1], a);
            let w = sub(p, a);
            let n0 = self.normals[i];
            let dn = sub(self.normals[i + 1], n0);
            // cross(N(u), w - u e) = 0 with N(u) = n0 + u dn
            let qa = -cross(dn, e);
            let qb = cross(dn, w) - cross(n0, e);
            let qc = cross(n0, w);
            let len = self.cumulative[i + 1] - self.cumulative[i];
            let lo = if i == 0 { f64::NEG_INFINITY } else { -ROOT_EPS };
            let hi = if i == last {
                f64::INFINITY
            } else {
                1.0 + ROOT_EPS
            };
            for u in quadratic_roots(qa, qb, qc) {
                if u < lo || u > hi {
                    continue;
                }
                let ub = u.clamp(0.0, 1.0);
                let n = unit([n0[0] + ub * dn[0], n0[1] + ub * dn[1]]);
                let r = [w[0] - u * e[0], w[1] - u * e[1]];
                // a root with the wrong blend (outside [0,1]) on the end
                // segments keeps the end normal; reject anything not normal
                if cross(n, r).abs() > 1e-6 * (1.0 + r[0].hypot(r[1])) {
                    continue;
                }
                consider(self.cumulative[i] + u * len, dot(r, n));
            }
        }

        best.unwrap_or_else(|| self.nearest_point_projection(p))
    }

    /// Plain nearest-point projection; used only when no frame root exists.
    fn nearest_point_projection(&self, p: [f64; 2]) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY, 0.0);
        for i in 0..self.segment_count() {
            let a = self.points[i];
            let e = sub(self.points[i + 1], a);
            let len2 = dot(e, e);
            let u = (dot(sub(p, a), e) / len2).clamp(0.0, 1.0);
            let q = [a[0] + u * e[0], a[1] + u * e[1]];
            let r = sub(p, q);
            let dist = r[0].hypot(r[1]);
            if dist < best.1 - 1e-12 {
                let side = cross(e, r).signum();
                best = (self.cumulative[i] + u * len2.sqrt(), dist, side * dist);
            }
        }
        (best.0, best.2)
    }

    /// Rigidly transforms every point: rotate by `angle` about the origin,
    /// then translate.
    pub fn transformed(&self, angle: f64, tx: f64, ty: f64) -> Self {
        let (sn, cs) = angle.sin_cos();
        let pts = self
            .points
            .iter()
            .map(|p| [cs * p[0] - sn * p[1] + tx, sn * p[0] + cs * p[1] + ty])
            .collect();
        Self::new(pts).expect("rigid transform preserves validity")
    }
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return vec![];
    }
    if a.abs() <= 1e-12 * scale {
        if b.abs() <= 1e-15 * scale {
            return vec![];
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Converts a Cartesian pose into Frenet coordinates relative to `ego_s`.
///
/// Ties between equally distant projections resolve to the smallest station.
pub fn to_frenet(
    path: &ReferencePath,
    pose: &CartesianPose,
    ego_s: f64,
) -> Result<FrenetPose, GeomError> {
    if !pose.is_finite() {
        return Err(GeomError::NonFinite("pose"));
    }
    if !ego_s.is_finite() {
        return Err(GeomError::NonFinite("ego_s"));
    }
    let (s_abs, d) = path.project(pose.x, pose.y);
    Ok(FrenetPose {
        s: s_abs - ego_s,
        d,
        theta: pose.theta - path.heading_at(s_abs),
    })
}

/// Inverse of [`to_frenet`].
pub fn to_cartesian(
    path: &ReferencePath,
    fp: &FrenetPose,
    ego_s: f64,
) -> Result<CartesianPose, GeomError> {
    if !(fp.s.is_finite() && fp.d.is_finite() && fp.theta.is_finite() && ego_s.is_finite()) {
        return Err(GeomError::NonFinite("frenet pose"));
    }
    let s = ego_s + fp.s;
    let length = path.length();
    let tol = 1e-9 * length.max(1.0);
    if s < -tol || s > length + tol {
        return Err(GeomError::OutOfRange { s, length });
    }
    let s = s.clamp(0.0, length);
    let (p, n) = path.frame_at(s);
    Ok(CartesianPose {
        x: p[0] + fp.d * n[0],
        y: p[1] + fp.d * n[1],
        theta: fp.theta + (-n[0]).atan2(n[1]),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: CartesianPose,
    pub width: f64,
    pub length: f64,
}

impl OrientedBox {
    pub fn new(center: CartesianPose, width: f64, length: f64) -> Self {
        debug_assert!(width > 0.0 && length > 0.0);
        Self {
            center,
            width,
            length,
        }
    }

    pub fn inflated(&self, margin: f64) -> Self {
        Self {
            center: self.center,
            width: self.width + 2.0 * margin,
            length: self.length + 2.0 * margin,
        }
    }

    fn axes(&self) -> ([f64; 2], [f64; 2]) {
        let (s, c) = self.center.theta.sin_cos();
        ([c, s], [-s, c])
    }

    /// Corners in counter-clockwise order starting front-left.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (fwd, left) = self.axes();
        let (hl, hw) = (0.5 * self.length, 0.5 * self.width);
        let c = [self.center.x, self.center.y];
        let at = |a: f64, b: f64| {
            [
                c[0] + a * fwd[0] + b * left[0],
                c[1] + a * fwd[1] + b * left[1],
            ]
        };
        [at(hl, hw), at(-hl, hw), at(-hl, -hw), at(hl, -hw)]
    }

    pub fn circumradius(&self) -> f64 {
        0.5 * self.width.hypot(self.length)
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        let (fwd, left) = self.axes();
        let r = [x - self.center.x, y - self.center.y];
        dot(r, fwd).abs() <= 0.5 * self.length && dot(r, left).abs() <= 0.5 * self.width
    }
}

fn projection_interval(corners: &[[f64; 2]; 4], axis: [f64; 2]) -> (f64, f64) {
    corners
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            let p = dot(*c, axis);
            (lo.min(p), hi.max(p))
        })
}

/// Separating-axis overlap test over the four edge normals. Touching counts
/// as a collision.
pub fn boxes_collide(a: &OrientedBox, b: &OrientedBox) -> bool {
    let reach = a.circumradius() + b.circumradius();
    if a.center.distance(&b.center) > reach {
        return false;
    }
    let ca = a.corners();
    let cb = b.corners();
    let (a0, a1) = a.axes();
    let (b0, b1) = b.axes();
    for axis in [a0, a1, b0, b1] {
        let (alo, ahi) = projection_interval(&ca, axis);
        let (blo, bhi) = projection_interval(&cb, axis);
        if ahi < blo || bhi < alo {
            return false;
        }
    }
    true
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let e = sub(b, a);
    let u = (dot(sub(p, a), e) / dot(e, e)).clamp(0.0, 1.0);
    let q = [a[0] + u * e[0], a[1] + u * e[1]];
    (p[0] - q[0]).hypot(p[1] - q[1])
}

/// Euclidean clearance between two boxes; zero when they overlap.
pub fn box_distance(a: &OrientedBox, b: &OrientedBox) -> f64 {
    if boxes_collide(a, b) {
        return 0.0;
    }
    let ca = a.corners();
    let cb = b.corners();
    let mut best = f64::INFINITY;
    for (pts, poly) in [(&ca, &cb), (&cb, &ca)] {
        for p in pts.iter() {
            for k in 0..4 {
                best = best.min(point_segment_distance(*p, poly[k], poly[(k + 1) % 4]));
            }
        }
    }
    best
}
