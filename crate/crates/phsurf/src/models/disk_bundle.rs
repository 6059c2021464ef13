//! The disk bundle B^1 x R: unit disk times a real line, coordinates (x, y, t).
//!
//! Contact form   theta = dt + (4/(1-r^2)) (x dy - y dx),  r^2 = x^2 + y^2.
//! Adapted frame  X = ((1-r^2)/2) dx-dir + 2y dt-dir,
//!                Y = ((1-r^2)/2) dy-dir - 2x dt-dir,  T = dt-dir.
//! Connection     omega = (2/(1-r^2)) (x dy - y dx), so omega(X) = -y, omega(Y) = x.
//! Torsion vanishes; the Webster curvature is the constant -1/2.

use super::ModelGeometry;
use crate::chart::{ChartPoint, Covector, Frame, TangentVector};
use num_complex::Complex64;

pub fn make_disk_bundle() -> ModelGeometry {
    ModelGeometry {
        name: "disk-bundle".into(),
        kind: super::ModelKind::DiskBundle,
        periods: [None, None, None],
        domain: Box::new(|c| c[0] * c[0] + c[1] * c[1] < 1.0),
        theta: Box::new(|p: ChartPoint| {
            let [x, y, _] = p.coords;
            let f = 4.0 / (1.0 - x * x - y * y);
            Covector::new(p, [-f * y, f * x, 1.0])
        }),
        omega: Box::new(|p: ChartPoint| {
            let [x, y, _] = p.coords;
            let g = 2.0 / (1.0 - x * x - y * y);
            Covector::new(p, [-g * y, g * x, 0.0])
        }),
        frame: Box::new(|p: ChartPoint| {
            let [x, y, _] = p.coords;
            let half = 0.5 * (1.0 - x * x - y * y);
            Frame {
                x: TangentVector::new(p, [half, 0.0, 2.0 * y]),
                y: TangentVector::new(p, [0.0, half, -2.0 * x]),
                t: TangentVector::new(p, [0.0, 0.0, 1.0]),
            }
        }),
        torsion: Box::new(|_| Complex64::new(0.0, 0.0)),
        webster: Box::new(|_| -0.5),
        extras: Box::new(|_| Complex64::new(0.0, 0.0)),
        sample_box: [[-0.97, 0.97], [-0.97, 0.97], [-2.0, 2.0]],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::covariant_derivative;
    use approx::assert_relative_eq;

    #[test]
    fn webster_is_minus_half_and_torsion_zero() {
        let m = make_disk_bundle();
        let p = m.point([0.3, 0.1, 5.0]).unwrap();
        assert_eq!(m.webster_w(&p), -0.5);
        assert_eq!(m.torsion_a11(&p), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn dtheta_on_frame_is_two_at_center() {
        let m = make_disk_bundle();
        let p = m.point([0.0, 0.0, 0.0]).unwrap();
        let fr = m.frame_at(&p);
        assert_relative_eq!(m.dtheta_fd(&p, fr.x.comps, fr.y.comps), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_points_outside_the_disk() {
        let m = make_disk_bundle();
        assert!(m.point([0.8, 0.7, 0.0]).is_err());
        assert!(m.point([0.8, 0.5, -3.0]).is_ok());
    }

    /// nabla_X X = omega(X) Y = -y Y, checked through the generic
    /// covariant-derivative path with X as a chart-dependent field.
    #[test]
    fn covariant_derivative_of_x_along_x() {
        let m = make_disk_bundle();
        let p = m.point([0.2, 0.7, 1.0]).unwrap();
        let fr = m.frame_at(&p);
        let field = |q: ChartPoint| m.frame_at(&q).x;
        let dxx = covariant_derivative(&m, &fr.x, &field).unwrap();
        let expected = fr.y.scale(-0.7);
        for i in 0..3 {
            assert_relative_eq!(dxx.comps[i], expected.comps[i], epsilon = 1e-8);
        }
        // nabla_Y X = omega(Y) Y = x Y at the same point.
        let dyx = covariant_derivative(&m, &fr.y, &field).unwrap();
        let expected = fr.y.scale(0.2);
        for i in 0..3 {
            assert_relative_eq!(dyx.comps[i], expected.comps[i], epsilon = 1e-8);
        }
    }

    /// The Reeb field is parallel: nabla_d T = 0 for any direction.
    #[test]
    fn reeb_is_parallel() {
        let m = make_disk_bundle();
        let p = m.point([0.4, -0.3, 0.2]).unwrap();
        let fr = m.frame_at(&p);
        let field = |q: ChartPoint| m.frame_at(&q).t;
        for dir in [fr.x, fr.y, fr.t] {
            let d = covariant_derivative(&m, &dir, &field).unwrap();
            for c in d.comps {
                assert_relative_eq!(c, 0.0, epsilon = 1e-9);
            }
        }
    }
}
