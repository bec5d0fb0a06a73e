//! Small fixed-size linear algebra helpers: 2-vectors, rotations and the
//! segment intersection primitive the raycaster and contact generator share.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Vec2 {
        Vec2 { x, y }
    }

    pub fn dot(self, rhs: Vec2) -> f64 {
        self.x * rhs.x + self.y * rhs.y
    }

    /// Z component of the 3-D cross product of two in-plane vectors.
    pub fn cross(self, rhs: Vec2) -> f64 {
        self.x * rhs.y - self.y * rhs.x
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn length(self) -> f64 {
        self.length_squared().sqrt()
    }

    pub fn normalized(self) -> Vec2 {
        let len = self.length();
        if len > 0.0 {
            self * (1.0 / len)
        } else {
            Vec2::ZERO
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Cross product of a scalar (angular velocity) with a vector: w × v.
pub fn cross_sv(w: f64, v: Vec2) -> Vec2 {
    Vec2::new(-w * v.y, w * v.x)
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

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

/// Precomputed sine/cosine of a body angle.
#[derive(Clone, Copy, Debug)]
pub struct Rot {
    pub sin: f64,
    pub cos: f64,
}

impl Rot {
    pub fn new(angle: f64) -> Rot {
        Rot {
            sin: angle.sin(),
            cos: angle.cos(),
        }
    }

    pub fn apply(self, v: Vec2) -> Vec2 {
        Vec2::new(self.cos * v.x - self.sin * v.y, self.sin * v.x + self.cos * v.y)
    }

    pub fn apply_inv(self, v: Vec2) -> Vec2 {
        Vec2::new(self.cos * v.x + self.sin * v.y, -self.sin * v.x + self.cos * v.y)
    }
}

/// Rigid transform (rotation followed by translation).
#[derive(Clone, Copy, Debug)]
pub struct Transform {
    pub position: Vec2,
    pub rot: Rot,
}

impl Transform {
    pub fn new(position: Vec2, angle: f64) -> Transform {
        Transform {
            position,
            rot: Rot::new(angle),
        }
    }

    pub fn apply(self, v: Vec2) -> Vec2 {
        self.position + self.rot.apply(v)
    }

    pub fn apply_inv(self, v: Vec2) -> Vec2 {
        self.rot.apply_inv(v - self.position)
    }
}

/// Symmetric 2x2 effective-mass solve for point constraints:
/// returns K^-1 * b for K = [[a, b], [b, c]] given as (k11, k12, k22).
pub fn solve22(k11: f64, k12: f64, k22: f64, rhs: Vec2) -> Vec2 {
    let det = k11 * k22 - k12 * k12;
    if det.abs() < 1e-12 {
        return Vec2::ZERO;
    }
    let inv = 1.0 / det;
    Vec2::new(
        inv * (k22 * rhs.x - k12 * rhs.y),
        inv * (k11 * rhs.y - k12 * rhs.x),
    )
}

/// Parametric intersection of the segment `a0 + t*(a1-a0)`, t in [0,1], with
/// the segment `b0..b1`. Returns the smallest valid `t` on the first segment.
/// Parallel (including collinear) segments yield `None`.
pub fn segment_intersection(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> Option<f64> {
    let r = a1 - a0;
    let s = b1 - b0;
    let denom = r.cross(s);
    if denom == 0.0 {
        return None;
    }
    let qp = b0 - a0;
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}
