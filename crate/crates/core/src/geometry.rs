//! Planar points and zero-thickness segment predicates.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero())
    }

    /// Unit vector at `angle` radians from +x.
    #[inline]
    pub fn from_angle(angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c, s)
    }

    #[inline]
    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(self, other: Self) -> T {
        (other - self).norm()
    }

    /// Counter-clockwise perpendicular `(-y, x)`.
    #[inline]
    pub fn left_normal(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        (n > T::zero() && n.is_finite()).then(|| self * (T::one() / n))
    }

    #[inline]
    pub fn midpoint(self, other: Self) -> Self {
        (self + other) * T::lit(0.5)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<T: Real> Add for Point2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Point2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Mul<T> for Point2<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        Self::new(self.x * k, self.y * k)
    }
}

impl<T: Real> Neg for Point2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Twice the signed area of `abc`; positive when `c` lies left of `a -> b`.
#[inline]
pub fn orient<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> T {
    (b - a).cross(c - a)
}

/// Strict proper crossing: the segments share exactly one point that is interior to both.
/// Endpoint contact and collinear overlap do not count.
pub fn segments_cross<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>, d: Point2<T>) -> bool {
    if a.x.max(b.x) < c.x.min(d.x)
        || c.x.max(d.x) < a.x.min(b.x)
        || a.y.max(b.y) < c.y.min(d.y)
        || c.y.max(d.y) < a.y.min(b.y)
    {
        return false;
    }
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);
    let zero = T::zero();
    ((d1 > zero && d2 < zero) || (d1 < zero && d2 > zero))
        && ((d3 > zero && d4 < zero) || (d3 < zero && d4 > zero))
}

pub fn point_segment_distance<T: Real>(p: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 <= T::zero() {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).max(T::zero()).min(T::one());
    p.distance(a + ab * t)
}

pub fn segment_distance<T: Real>(a: Point2<T>, b: Point2<T>, c: Point2<T>, d: Point2<T>) -> T {
    if segments_cross(a, b, c, d) {
        return T::zero();
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Whether any segment of `p` properly crosses any segment of `q`.
pub fn polylines_cross<T: Real>(p: &[Point2<T>], q: &[Point2<T>]) -> bool {
    p.windows(2)
        .any(|s| q.windows(2).any(|r| segments_cross(s[0], s[1], r[0], r[1])))
}

/// Smallest distance between the two polylines.
pub fn polyline_distance<T: Real>(p: &[Point2<T>], q: &[Point2<T>]) -> T {
    let mut best = T::infinity();
    for s in p.windows(2) {
        for r in q.windows(2) {
            best = best.min(segment_distance(s[0], s[1], r[0], r[1]));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    #[test]
    fn x_crossing() {
        assert!(segments_cross(p(0., -10.), p(10., 10.), p(0., 10.), p(10., -10.)));
    }

    #[test]
    fn endpoint_touch_is_not_a_crossing() {
        assert!(!segments_cross(p(0., 0.), p(1., 1.), p(1., 1.), p(2., 0.)));
        // T-junction: endpoint of one on the interior of the other
        assert!(!segments_cross(p(0., 0.), p(2., 0.), p(1., 0.), p(1., 1.)));
    }

    #[test]
    fn collinear_overlap_is_not_a_crossing() {
        assert!(!segments_cross(p(0., 0.), p(2., 0.), p(1., 0.), p(3., 0.)));
    }

    #[test]
    fn distances() {
        assert_eq!(point_segment_distance(p(1., 1.), p(0., 0.), p(2., 0.)), 1.0);
        assert_eq!(segment_distance(p(0., 1.), p(2., 1.), p(0., 0.), p(2., 0.)), 1.0);
        assert_eq!(segment_distance(p(0., -1.), p(0., 1.), p(-1., 0.), p(1., 0.)), 0.0);
    }

    #[test]
    fn works_in_single_precision() {
        let a = Point2::<f32>::new(0., -10.);
        let b = Point2::<f32>::new(10., 10.);
        assert!(segments_cross(a, b, Point2::new(0., 10.), Point2::new(10., -10.)));
    }
}
