//! Points, axis-aligned boxes and the segment queries the scene is built on.
//!
//! Coordinates are meters in a right-handed frame with the table surface at
//! `z = 0` and `+z` pointing up.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::num::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 3]", into = "[T; 3]")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> From<[T; 3]> for Vec3<T> {
    fn from([x, y, z]: [T; 3]) -> Self {
        Self { x, y, z }
    }
}

impl<T: Scalar> From<Vec3<T>> for [T; 3] {
    fn from(v: Vec3<T>) -> Self {
        [v.x, v.y, v.z]
    }
}

impl<T: Scalar> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_f64(x: f64, y: f64, z: f64) -> Self {
        Self::new(T::lit(x), T::lit(y), T::lit(z))
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Point at parameter `t` on the segment from `self` to `other`.
    pub fn lerp(self, other: Self, t: T) -> Self {
        self + (other - self) * t
    }

    pub fn component(self, axis: usize) -> T {
        match axis {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis index {axis} out of range"),
        }
    }

    pub fn map(self, f: impl Fn(T) -> T) -> Self {
        Self::new(f(self.x), f(self.y), f(self.z))
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }
}

impl<T: Scalar> Add for Vec3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl<T: Scalar> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl<T: Scalar> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        Self::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl<T: Scalar> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Axis-aligned box given by its center and (strictly positive) half extents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct BoundingVolume<T> {
    pub center: Vec3<T>,
    pub half_extents: Vec3<T>,
}

impl<T: Scalar> BoundingVolume<T> {
    pub fn new(center: Vec3<T>, half_extents: Vec3<T>) -> Self {
        Self {
            center,
            half_extents,
        }
    }

    pub fn has_positive_extents(&self) -> bool {
        let h = self.half_extents;
        h.is_finite() && h.x > T::zero() && h.y > T::zero() && h.z > T::zero()
    }

    pub fn min(&self) -> Vec3<T> {
        self.center - self.half_extents
    }

    pub fn max(&self) -> Vec3<T> {
        self.center + self.half_extents
    }

    /// Box grown by `margin` on every side. A negative margin shrinks it.
    pub fn inflated(&self, margin: T) -> Self {
        Self::new(self.center, self.half_extents.map(|h| h + margin))
    }

    pub fn translated(&self, offset: Vec3<T>) -> Self {
        Self::new(self.center + offset, self.half_extents)
    }

    /// Closed containment test.
    pub fn contains(&self, p: Vec3<T>) -> bool {
        let (lo, hi) = (self.min(), self.max());
        (0..3).all(|a| {
            let c = p.component(a);
            c >= lo.component(a) && c <= hi.component(a)
        })
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        let (a_lo, a_hi, b_lo, b_hi) = (self.min(), self.max(), other.min(), other.max());
        (0..3).all(|a| a_lo.component(a) <= b_hi.component(a) && b_lo.component(a) <= a_hi.component(a))
    }

    /// Euclidean distance from `p` to the box; zero inside.
    pub fn distance_to_point(&self, p: Vec3<T>) -> T {
        let d = (p - self.center).map(|c| c.abs()) - self.half_extents;
        d.map(|c| c.max(T::zero())).norm()
    }

    /// Parameter interval `[t_enter, t_exit] ⊆ [0, 1]` over which the segment
    /// `from → to` lies inside the box (slab method), or `None` if it misses.
    pub fn segment_interval(&self, from: Vec3<T>, to: Vec3<T>) -> Option<(T, T)> {
        let dir = to - from;
        let (lo, hi) = (self.min(), self.max());
        let mut t_enter = T::zero();
        let mut t_exit = T::one();
        for axis in 0..3 {
            let o = from.component(axis);
            let d = dir.component(axis);
            let (slab_lo, slab_hi) = (lo.component(axis), hi.component(axis));
            if d == T::zero() {
                if o < slab_lo || o > slab_hi {
                    return None;
                }
                continue;
            }
            let inv = T::one() / d;
            let mut t0 = (slab_lo - o) * inv;
            let mut t1 = (slab_hi - o) * inv;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_enter = t_enter.max(t0);
            t_exit = t_exit.min(t1);
            if t_enter > t_exit {
                return None;
            }
        }
        Some((t_enter, t_exit))
    }

    pub fn intersects_segment(&self, from: Vec3<T>, to: Vec3<T>) -> bool {
        self.segment_interval(from, to).is_some()
    }

    /// Smallest distance between the box and any point of the segment.
    ///
    /// The point-to-box distance is convex along the segment, so a
    /// golden-section search over the parameter converges to the minimum.
    pub fn distance_to_segment(&self, from: Vec3<T>, to: Vec3<T>) -> T {
        if self.intersects_segment(from, to) {
            return T::zero();
        }
        let f = |t: T| self.distance_to_point(from.lerp(to, t));
        let inv_phi = T::lit(0.618_033_988_749_894_8);
        let (mut a, mut b) = (T::zero(), T::one());
        let mut c = b - (b - a) * inv_phi;
        let mut d = a + (b - a) * inv_phi;
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..80 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - (b - a) * inv_phi;
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + (b - a) * inv_phi;
                fd = f(d);
            }
        }
        f(T::zero()).min(f(T::one())).min(fc.min(fd))
    }
}
