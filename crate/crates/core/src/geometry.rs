//! Planar geometry in the global metric frame (+x east, +y north).

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Mul, Sub};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ZERO: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        math::hypot(self.x, self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Point {
        let n = self.norm();
        if n == 0.0 {
            self
        } else {
            self * (1.0 / n)
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Point {
    fn add_assign(&mut self, rhs: Point) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    /// Smallest rectangle containing every point; `None` for an empty input.
    pub fn bounding<I: IntoIterator<Item = Point>>(points: I) -> Option<Rect> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut r = Rect::new(first, first);
        for p in it {
            r.min.x = r.min.x.min(p.x);
            r.min.y = r.min.y.min(p.y);
            r.max.x = r.max.x.max(p.x);
            r.max.y = r.max.y.max(p.y);
        }
        Some(r)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn expanded(&self, margin: f64) -> Rect {
        Rect::new(
            Point::new(self.min.x - margin, self.min.y - margin),
            Point::new(self.max.x + margin, self.max.y + margin),
        )
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }

    pub fn translated(&self, d: Point) -> Rect {
        Rect::new(self.min + d, self.max + d)
    }
}

/// Simple polygon without holes; the closing edge is implicit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Self { vertices }
    }

    pub fn rectangle(min: Point, max: Point) -> Self {
        Self::new(alloc::vec![
            min,
            Point::new(max.x, min.y),
            max,
            Point::new(min.x, max.y),
        ])
    }

    /// Shoelace area, positive for counter-clockwise winding.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            acc += a.cross(b);
        }
        0.5 * acc
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn bounds(&self) -> Option<Rect> {
        Rect::bounding(self.vertices.iter().copied())
    }

    /// Even-odd crossing test with a half-open rule on vertex rows, so a
    /// point is inside exactly one of two polygons sharing an edge.
    pub fn contains(&self, p: Point) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let mut inside = false;
        let mut j = n - 1;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[j];
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    pub fn translated(&self, d: Point) -> Polygon {
        Polygon::new(self.vertices.iter().map(|&v| v + d).collect())
    }
}

/// Polyline with cached cumulative arc length, for sampling by distance.
#[derive(Debug, Clone)]
pub struct Polyline {
    points: Vec<Point>,
    cumulative: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<Point>) -> Self {
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                acc += p.distance(points[i - 1]);
            }
            cumulative.push(acc);
        }
        Self { points, cumulative }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Position and unit tangent at arc length `s`, clamped to the ends.
    pub fn sample(&self, s: f64) -> (Point, Point) {
        let n = self.points.len();
        assert!(n >= 2, "polyline needs at least two points");
        let s = s.clamp(0.0, self.length());
        let seg = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap_or(core::cmp::Ordering::Less))
        {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let a = self.points[seg];
        let b = self.points[seg + 1];
        let len = self.cumulative[seg + 1] - self.cumulative[seg];
        let u = if len > 0.0 {
            (s - self.cumulative[seg]) / len
        } else {
            0.0
        };
        (a + (b - a) * u, (b - a).normalized())
    }

    /// Offsets every vertex along the averaged left normal by `d` metres
    /// (negative `d` offsets to the right).
    pub fn offset(&self, d: f64) -> Polyline {
        let pts = &self.points;
        let n = pts.len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let prev = if i > 0 { Some((pts[i] - pts[i - 1]).normalized()) } else { None };
            let next = if i + 1 < n { Some((pts[i + 1] - pts[i]).normalized()) } else { None };
            let p = match (prev, next) {
                (Some(t0), Some(t1)) => {
                    let n0 = t0.perp();
                    let n1 = t1.perp();
                    let bis = (n0 + n1).normalized();
                    // miter length so both adjacent edges sit exactly `d` away
                    let cos_half = bis.dot(n0).max(0.2);
                    pts[i] + bis * (d / cos_half)
                }
                (Some(t), None) | (None, Some(t)) => pts[i] + t.perp() * d,
                (None, None) => pts[i],
            };
            out.push(p);
        }
        Polyline::new(out)
    }

    pub fn reversed(&self) -> Polyline {
        let mut pts = self.points.clone();
        pts.reverse();
        Polyline::new(pts)
    }
}

/// Strip between lateral offsets `right` and `left` (`right < left`) of a
/// centreline, as a simple polygon.
pub fn strip_polygon(center: &Polyline, right: f64, left: f64) -> Polygon {
    let l = center.offset(left);
    let r = center.offset(right);
    let mut verts: Vec<Point> = r.points().to_vec();
    verts.extend(l.points().iter().rev().copied());
    Polygon::new(verts)
}

/// Replaces the corner `p0 -> corner -> p2` with a circular arc of `radius`
/// tangent to both legs, sampled with `segments` chords.
pub fn filleted_path(p0: Point, corner: Point, p2: Point, radius: f64, segments: usize) -> Vec<Point> {
    let d0 = (p0 - corner).normalized();
    let d2 = (p2 - corner).normalized();
    let cos_theta = d0.dot(d2).clamp(-1.0, 1.0);
    let theta = libm::acos(cos_theta);
    if theta < 1e-9 || (core::f64::consts::PI - theta) < 1e-9 {
        return alloc::vec![p0, corner, p2];
    }
    let tangent_len = radius / libm::tan(theta / 2.0);
    let t0 = corner + d0 * tangent_len;
    let t2 = corner + d2 * tangent_len;
    let bisector = (d0 + d2).normalized();
    let center = corner + bisector * (radius / libm::sin(theta / 2.0));
    let a0 = math::atan2(t0.y - center.y, t0.x - center.x);
    let a2 = math::atan2(t2.y - center.y, t2.x - center.x);
    let mut sweep = math::normalize_angle(a2 - a0);
    if sweep == core::f64::consts::PI && (t0 - center).cross(t2 - center) < 0.0 {
        sweep = -sweep;
    }
    let mut out = alloc::vec![p0];
    for k in 0..=segments {
        let a = a0 + sweep * (k as f64) / (segments as f64);
        out.push(center + Point::new(math::cos(a), math::sin(a)) * radius);
    }
    out.push(p2);
    out
}
