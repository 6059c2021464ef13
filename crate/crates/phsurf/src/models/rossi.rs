//! The Rossi spheres: the unit 3-sphere with CR structure deformed by a real
//! parameter t, |t| < 1, in torus-like coordinates (rho_1, phi_1, phi_2) with
//! rho_2 = sqrt(1 - rho_1^2) and both angles mod 2 pi.
//!
//! With sigma = phi_1 + phi_2 and mu = sqrt((1+t)/(1-t)):
//!   theta = rho_1^2 dphi_1 + rho_2^2 dphi_2,   T = dphi_1-dir + dphi_2-dir,
//!   X = ( mu rho_2 cos sigma, -mu (rho_2/rho_1) sin sigma,  mu (rho_1/rho_2) sin sigma ),
//!   Y = ( rho_2 sin sigma / mu,  (rho_2/rho_1) cos sigma / mu, -(rho_1/rho_2) cos sigma / mu ),
//!   omega = -2 (1+t^2)/(1-t^2) theta.
//! Webster curvature and torsion are the constants
//!   W = 2 (1+t^2)/(1-t^2),   A_11 = 4 i t / (1-t^2),
//! so the correction scalar for the second density vanishes identically
//! (theta annihilates X and Y, hence the connection term drops too).
//!
//! The chart excludes collars rho_1 <= delta and rho_1 >= 1 - delta around
//! the two degenerate circles; delta defaults to 1e-3.

use super::ModelGeometry;
use crate::chart::{ChartPoint, Covector, Frame, TangentVector};
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::TAU;

const DELTA: f64 = 1e-3;

pub fn make_rossi_sphere(t: f64) -> Result<ModelGeometry> {
    if !(t.abs() < 1.0) {
        return Err(Error::InvalidParameter {
            what: format!("rossi parameter must satisfy |t| < 1, got {t}"),
        });
    }
    let mu = ((1.0 + t) / (1.0 - t)).sqrt();
    let w = 2.0 * (1.0 + t * t) / (1.0 - t * t);
    let a11 = Complex64::new(0.0, 4.0 * t / (1.0 - t * t));
    Ok(ModelGeometry {
        name: format!("rossi:{t}"),
        kind: super::ModelKind::Rossi { t },
        periods: [None, Some(TAU), Some(TAU)],
        domain: Box::new(|c| c[0] > DELTA && c[0] < 1.0 - DELTA),
        theta: Box::new(|p: ChartPoint| {
            let r1 = p.coords[0];
            Covector::new(p, [0.0, r1 * r1, 1.0 - r1 * r1])
        }),
        omega: Box::new(move |p: ChartPoint| {
            let r1 = p.coords[0];
            let s = -2.0 * (1.0 + t * t) / (1.0 - t * t);
            Covector::new(p, [0.0, s * r1 * r1, s * (1.0 - r1 * r1)])
        }),
        frame: Box::new(move |p: ChartPoint| {
            let [r1, p1, p2] = p.coords;
            let r2 = (1.0 - r1 * r1).sqrt();
            let (sin_s, cos_s) = (p1 + p2).sin_cos();
            Frame {
                x: TangentVector::new(
                    p,
                    [
                        mu * r2 * cos_s,
                        -mu * (r2 / r1) * sin_s,
                        mu * (r1 / r2) * sin_s,
                    ],
                ),
                y: TangentVector::new(
                    p,
                    [
                        r2 * sin_s / mu,
                        (r2 / r1) * cos_s / mu,
                        -(r1 / r2) * cos_s / mu,
                    ],
                ),
                t: TangentVector::new(p, [0.0, 1.0, 1.0]),
            }
        }),
        torsion: Box::new(move |_| a11),
        webster: Box::new(move |_| w),
        extras: Box::new(|_| Complex64::new(0.0, 0.0)),
        sample_box: [[0.05, 0.95], [0.0, TAU], [0.0, TAU]],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn t_zero_is_the_standard_cr_sphere() {
        let m = make_rossi_sphere(0.0).unwrap();
        let p = m.point([0.6, 1.0, 2.0]).unwrap();
        assert_relative_eq!(m.webster_w(&p), 2.0);
        assert_eq!(m.torsion_a11(&p).norm(), 0.0);
        // omega = -2 theta means omega(T) = -2.
        for q in m.sample_points(50, 3) {
            let fr = m.frame_at(&q);
            assert_relative_eq!(m.omega_at(&q).pair(&fr.t), -2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn constants_match_closed_forms() {
        let t0 = 4.0 - 15.0f64.sqrt();
        let m = make_rossi_sphere(t0).unwrap();
        let p = m.point([0.5, 0.3, 0.4]).unwrap();
        assert_relative_eq!(m.webster_w(&p), 2.0 * (1.0 + t0 * t0) / (1.0 - t0 * t0), epsilon = 1e-15);
        assert_relative_eq!(m.torsion_a11(&p).im, 4.0 * t0 / (1.0 - t0 * t0), epsilon = 1e-15);
        assert_relative_eq!(m.torsion_a11(&p).im, 0.51640, epsilon = 1e-5);
        assert_relative_eq!(m.webster_w(&p), 2.0656, epsilon = 1e-4);
    }

    #[test]
    fn boundary_parameter_is_rejected() {
        assert!(make_rossi_sphere(0.9999999999).is_ok());
        assert!(make_rossi_sphere(1.0).is_err());
        assert!(make_rossi_sphere(-1.0).is_err());
        assert!(make_rossi_sphere(f64::NAN).is_err());
    }

    #[test]
    fn chart_excludes_degenerate_circles() {
        let m = make_rossi_sphere(0.2).unwrap();
        assert!(m.point([0.0005, 0.0, 0.0]).is_err());
        assert!(m.point([0.9995, 0.0, 0.0]).is_err());
        // Angles are normalized into [0, 2 pi).
        let p = m.point([0.5, -1.0, 7.0]).unwrap();
        assert!(p.coords[1] >= 0.0 && p.coords[1] < TAU);
        assert!(p.coords[2] >= 0.0 && p.coords[2] < TAU);
    }
}
