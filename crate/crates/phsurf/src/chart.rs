//! Chart-level linear algebra: points, tangent vectors, covectors, and the
//! adapted orthonormal frame (X, Y = JX, T).
//!
//! Components always refer to the coordinate basis of the owning model's
//! chart. Vectors and covectors remember their base point; mixing base
//! points in arithmetic is a programming error and panics.

use crate::num::{det3, solve3};

/// A point in a 3-dimensional coordinate chart.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ChartPoint {
    pub coords: [f64; 3],
}

impl ChartPoint {
    pub fn new(coords: [f64; 3]) -> Self {
        ChartPoint { coords }
    }

    /// The same point shifted along one coordinate axis.
    pub fn shifted(&self, axis: usize, delta: f64) -> Self {
        let mut c = self.coords;
        c[axis] += delta;
        ChartPoint { coords: c }
    }

    /// The point displaced by the chart components of a tangent vector.
    pub fn displaced(&self, v: &TangentVector, t: f64) -> Self {
        ChartPoint {
            coords: [
                self.coords[0] + t * v.comps[0],
                self.coords[1] + t * v.comps[1],
                self.coords[2] + t * v.comps[2],
            ],
        }
    }
}

/// Tangent vector in chart coordinates at a base point.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct TangentVector {
    pub base: ChartPoint,
    pub comps: [f64; 3],
}

impl TangentVector {
    pub fn new(base: ChartPoint, comps: [f64; 3]) -> Self {
        TangentVector { base, comps }
    }

    fn assert_same_base(&self, other: &TangentVector) {
        assert!(
            self.base.coords == other.base.coords,
            "tangent vector arithmetic across distinct base points"
        );
    }

    pub fn add(&self, other: &TangentVector) -> TangentVector {
        self.assert_same_base(other);
        TangentVector::new(
            self.base,
            [
                self.comps[0] + other.comps[0],
                self.comps[1] + other.comps[1],
                self.comps[2] + other.comps[2],
            ],
        )
    }

    pub fn sub(&self, other: &TangentVector) -> TangentVector {
        self.assert_same_base(other);
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> TangentVector {
        TangentVector::new(
            self.base,
            [s * self.comps[0], s * self.comps[1], s * self.comps[2]],
        )
    }
}

/// Covector (1-form value) in chart coordinates at a base point.
#[derive(Clone, Copy, Debug)]
pub struct Covector {
    pub base: ChartPoint,
    pub comps: [f64; 3],
}

impl Covector {
    pub fn new(base: ChartPoint, comps: [f64; 3]) -> Self {
        Covector { base, comps }
    }

    /// Natural pairing with a tangent vector at the same point.
    pub fn pair(&self, v: &TangentVector) -> f64 {
        assert!(
            self.base.coords == v.base.coords,
            "covector paired with vector at a different base point"
        );
        self.comps[0] * v.comps[0] + self.comps[1] * v.comps[1] + self.comps[2] * v.comps[2]
    }
}

/// The adapted frame at a point: X = e1-ring, Y = JX, T = Reeb field.
/// Orthonormal for the Levi metric; theta(X) = theta(Y) = 0, theta(T) = 1.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub x: TangentVector,
    pub y: TangentVector,
    pub t: TangentVector,
}

impl Frame {
    pub fn base(&self) -> ChartPoint {
        self.x.base
    }

    /// Components of v in the (X, Y, T) basis, by exact 3x3 solve.
    pub fn decompose(&self, v: &TangentVector) -> [f64; 3] {
        solve3([self.x.comps, self.y.comps, self.t.comps], v.comps)
            .expect("adapted frame must span the tangent space")
    }

    /// Rebuild a chart vector from frame components.
    pub fn compose(&self, c: [f64; 3]) -> TangentVector {
        self.x
            .scale(c[0])
            .add(&self.y.scale(c[1]))
            .add(&self.t.scale(c[2]))
    }

    /// Levi inner product g = theta (x) theta + (horizontal part, Euclidean
    /// in frame components). X, Y, T are orthonormal for it by construction.
    pub fn levi_inner(&self, v: &TangentVector, w: &TangentVector) -> f64 {
        let a = self.decompose(v);
        let b = self.decompose(w);
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    pub fn levi_norm(&self, v: &TangentVector) -> f64 {
        self.levi_inner(v, v).sqrt()
    }

    /// The CR rotation J applied to the horizontal part of v:
    /// J(aX + bY) = aY - bX. Any Reeb component is discarded.
    pub fn j_horizontal(&self, v: &TangentVector) -> TangentVector {
        let c = self.decompose(v);
        self.x.scale(-c[1]).add(&self.y.scale(c[0]))
    }

    /// Volume of the frame parallelepiped in chart coordinates; nonzero iff
    /// the frame spans.
    pub fn det(&self) -> f64 {
        det3(self.x.comps, self.y.comps, self.t.comps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy_frame() -> Frame {
        let p = ChartPoint::new([0.1, -0.2, 0.3]);
        Frame {
            x: TangentVector::new(p, [1.0, 0.2, 0.0]),
            y: TangentVector::new(p, [-0.2, 1.0, 0.1]),
            t: TangentVector::new(p, [0.0, 0.0, 1.0]),
        }
    }

    #[test]
    fn decompose_compose_roundtrip() {
        let f = toy_frame();
        let v = TangentVector::new(f.base(), [0.7, -0.4, 2.0]);
        let c = f.decompose(&v);
        let w = f.compose(c);
        for i in 0..3 {
            assert_relative_eq!(w.comps[i], v.comps[i], epsilon = 1e-13);
        }
    }

    #[test]
    fn frame_vectors_are_levi_orthonormal_by_definition() {
        let f = toy_frame();
        assert_relative_eq!(f.levi_inner(&f.x, &f.x), 1.0, epsilon = 1e-14);
        assert_relative_eq!(f.levi_inner(&f.x, &f.y), 0.0, epsilon = 1e-14);
        assert_relative_eq!(f.levi_inner(&f.t, &f.t), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn j_rotates_x_to_y() {
        let f = toy_frame();
        let jx = f.j_horizontal(&f.x);
        let jy = f.j_horizontal(&f.y);
        for i in 0..3 {
            assert_relative_eq!(jx.comps[i], f.y.comps[i], epsilon = 1e-13);
            assert_relative_eq!(jy.comps[i], -f.x.comps[i], epsilon = 1e-13);
        }
    }

    #[test]
    #[should_panic(expected = "distinct base points")]
    fn arithmetic_across_points_panics() {
        let p = ChartPoint::new([0.0, 0.0, 0.0]);
        let q = ChartPoint::new([1.0, 0.0, 0.0]);
        let v = TangentVector::new(p, [1.0, 0.0, 0.0]);
        let w = TangentVector::new(q, [1.0, 0.0, 0.0]);
        let _ = v.add(&w);
    }
}
