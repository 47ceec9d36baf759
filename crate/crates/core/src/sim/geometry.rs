//! Planar vector math and oriented-box tests.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotate(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut t = (theta + std::f64::consts::PI) % two_pi;
    if t < 0.0 {
        t += two_pi;
    }
    t - std::f64::consts::PI
}

/// Oriented rectangle: a vehicle footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: Vec2,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl Obb {
    pub fn new(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        Self {
            center,
            heading,
            half_length: 0.5 * length,
            half_width: 0.5 * width,
        }
    }

    pub fn axes(&self) -> [Vec2; 2] {
        let fwd = Vec2::from_angle(self.heading);
        [fwd, fwd.perp()]
    }

    /// Corners in counter-clockwise order starting front-left.
    pub fn corners(&self) -> [Vec2; 4] {
        let [fwd, left] = self.axes();
        let f = fwd * self.half_length;
        let l = left * self.half_width;
        [
            self.center + f + l,
            self.center - f + l,
            self.center - f - l,
            self.center + f - l,
        ]
    }

    fn project(&self, axis: Vec2) -> (f64, f64) {
        let [fwd, left] = self.axes();
        let c = self.center.dot(axis);
        let r = self.half_length * fwd.dot(axis).abs() + self.half_width * left.dot(axis).abs();
        (c - r, c + r)
    }

    /// Separating-axis overlap test. Touching boxes count as overlapping.
    pub fn overlaps(&self, other: &Obb) -> bool {
        let axes = self.axes().into_iter().chain(other.axes());
        for axis in axes {
            let (a0, a1) = self.project(axis);
            let (b0, b1) = other.project(axis);
            if a1 < b0 || b1 < a0 {
                return false;
            }
        }
        true
    }

    /// Euclidean gap between the two footprints, zero when they overlap.
    pub fn gap(&self, other: &Obb) -> f64 {
        if self.overlaps(other) {
            return 0.0;
        }
        let a = self.corners();
        let b = other.corners();
        let mut best = f64::INFINITY;
        for i in 0..4 {
            let (p0, p1) = (a[i], a[(i + 1) % 4]);
            let (q0, q1) = (b[i], b[(i + 1) % 4]);
            for j in 0..4 {
                best = best.min(point_segment_distance(b[j], p0, p1));
                best = best.min(point_segment_distance(a[j], q0, q1));
            }
        }
        best
    }
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Unsigned shoelace area of a simple polygon.
pub fn polygon_area(points: &[Vec2]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n).map(|i| points[i].cross(points[(i + 1) % n])).sum();
    0.5 * twice.abs()
}

pub fn triangle_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * (b - a).cross(c - a).abs()
}
