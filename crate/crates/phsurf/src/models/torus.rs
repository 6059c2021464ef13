//! Product models over a closed plane curve: the chart is (s, x, y) with s
//! running along a unit-speed generating curve gamma(s) = (xi(s), eta(s)) and
//! (x, y) on a translation 2-torus. The contact form is
//!   theta = eta' dx + xi' dy,
//! with Reeb field T = eta' d/dx + xi' d/dy, and the unitary horizontal frame
//!   X = sqrt(2/kappa) d/ds,
//!   Y = sqrt(2/kappa) (xi' d/dx - eta' d/dy)
//! satisfies dtheta(X, Y) = 2 exactly because kappa = eta'' xi' - xi'' eta'
//! is the signed curvature, required strictly positive. Connection, torsion
//! and curvature reduce to curve data:
//!   omega = (kappa'/(2 kappa))(xi' dx - eta' dy) - (kappa/2)(eta' dx + xi' dy),
//!   A_11  = -(i/2) kappa,
//!   W     = (kappa^4 - kappa kappa'' + kappa'^2) / (2 kappa^3).
//! The density correction scalar, in the frame adapted to a slice
//! {s = const}, is i (W'/6 - (2/3) kappa') / sqrt(2 kappa); W'(s) is obtained
//! by differencing W to avoid a third curvature derivative.

use super::{ModelGeometry, ModelKind};
use crate::chart::{ChartPoint, Covector, Frame, TangentVector};
use crate::error::{Error, Result};
use crate::num::{cumulative_simpson, deriv5, MonotoneCubic};
use num_complex::Complex64;
use std::f64::consts::TAU;
use std::sync::Arc;

/// A closed plane curve in unit-speed parametrization together with its
/// signed curvature and the first two arclength derivatives of the curvature.
/// Callbacks accept any real s and reduce it modulo `period` themselves.
pub struct GeneratingCurve {
    pub name: String,
    pub period: f64,
    pub position: Box<dyn Fn(f64) -> [f64; 2] + Send + Sync>,
    pub tangent: Box<dyn Fn(f64) -> [f64; 2] + Send + Sync>,
    pub curvature: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub curvature_d1: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub curvature_d2: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

/// Circle of radius r, traversed counterclockwise, so kappa = 1/r.
pub fn circle_curve(r: f64) -> Result<GeneratingCurve> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("circle radius must be positive, got {r}"),
        });
    }
    Ok(GeneratingCurve {
        name: format!("torus-circle:{r}"),
        period: TAU * r,
        position: Box::new(move |s| {
            let (sn, cs) = (s / r).sin_cos();
            [r * cs, r * sn]
        }),
        tangent: Box::new(move |s| {
            let (sn, cs) = (s / r).sin_cos();
            [-sn, cs]
        }),
        curvature: Box::new(move |_| 1.0 / r),
        curvature_d1: Box::new(|_| 0.0),
        curvature_d2: Box::new(|_| 0.0),
    })
}

/// Arclength of the ellipse (a cos t, b sin t) from parameter 0 to t.
pub fn ellipse_arclength(a: f64, b: f64, t: f64) -> f64 {
    let f = |u: f64| (a * a * u.sin().powi(2) + b * b * u.cos().powi(2)).sqrt();
    cumulative_simpson(&f, 0.0, t, 2048).last().unwrap().1
}

/// Precomputed arclength table for an ellipse, with a monotone cubic inverse
/// refined by Newton steps. Node spacing is fine enough that the local
/// Simpson correction between nodes is exact to roundoff.
struct EllipseArc {
    a: f64,
    b: f64,
    dt: f64,
    total: f64,
    s_nodes: Vec<f64>,
    inverse: MonotoneCubic,
}

const ELLIPSE_PANELS: usize = 4096;

impl EllipseArc {
    fn new(a: f64, b: f64) -> Self {
        let f = move |t: f64| speed(a, b, t);
        let table = cumulative_simpson(&f, 0.0, TAU, ELLIPSE_PANELS);
        let t_nodes: Vec<f64> = table.iter().map(|&(t, _)| t).collect();
        let s_nodes: Vec<f64> = table.iter().map(|&(_, s)| s).collect();
        let inverse = MonotoneCubic::new(s_nodes.clone(), t_nodes)
            .expect("ellipse arclength table must be strictly increasing");
        EllipseArc {
            a,
            b,
            dt: TAU / ELLIPSE_PANELS as f64,
            total: *s_nodes.last().unwrap(),
            s_nodes,
            inverse,
        }
    }

    fn s_of_t(&self, t: f64) -> f64 {
        let tr = t.rem_euclid(TAU);
        let wraps = ((t - tr) / TAU).round();
        let i = ((tr / self.dt) as usize).min(ELLIPSE_PANELS - 1);
        let t_i = i as f64 * self.dt;
        let f = |u: f64| speed(self.a, self.b, u);
        let local = cumulative_simpson(&f, t_i, tr, 4).last().unwrap().1;
        wraps * self.total + self.s_nodes[i] + local
    }

    fn t_of_s(&self, s: f64) -> f64 {
        let sr = s.rem_euclid(self.total);
        let mut t = self.inverse.eval(sr);
        for _ in 0..3 {
            t -= (self.s_of_t(t) - sr) / speed(self.a, self.b, t);
        }
        t
    }
}

fn speed(a: f64, b: f64, t: f64) -> f64 {
    let (sn, cs) = t.sin_cos();
    (a * a * sn * sn + b * b * cs * cs).sqrt()
}

fn speed_d1(a: f64, b: f64, t: f64) -> f64 {
    (a * a - b * b) * t.sin() * t.cos() / speed(a, b, t)
}

fn speed_d2(a: f64, b: f64, t: f64) -> f64 {
    let v1 = speed_d1(a, b, t);
    ((a * a - b * b) * (2.0 * t).cos() - v1 * v1) / speed(a, b, t)
}

/// Ellipse (a cos t, b sin t), counterclockwise, reparametrized by arclength.
/// Curvature ab/v^3 with v^2 = a^2 sin^2 t + b^2 cos^2 t; its arclength
/// derivatives use d/ds = (1/v) d/dt.
pub fn ellipse_curve(a: f64, b: f64) -> Result<GeneratingCurve> {
    if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("ellipse semi-axes must be positive, got {a}, {b}"),
        });
    }
    let arc = Arc::new(EllipseArc::new(a, b));
    let (c1, c2, c3, c4, c5) = (
        arc.clone(),
        arc.clone(),
        arc.clone(),
        arc.clone(),
        arc.clone(),
    );
    Ok(GeneratingCurve {
        name: format!("torus-ellipse:{a},{b}"),
        period: arc.total,
        position: Box::new(move |s| {
            let t = c1.t_of_s(s);
            [a * t.cos(), b * t.sin()]
        }),
        tangent: Box::new(move |s| {
            let t = c2.t_of_s(s);
            let v = speed(a, b, t);
            [-a * t.sin() / v, b * t.cos() / v]
        }),
        curvature: Box::new(move |s| {
            let t = c3.t_of_s(s);
            a * b / speed(a, b, t).powi(3)
        }),
        curvature_d1: Box::new(move |s| {
            let t = c4.t_of_s(s);
            -3.0 * a * b * speed_d1(a, b, t) / speed(a, b, t).powi(5)
        }),
        curvature_d2: Box::new(move |s| {
            let t = c5.t_of_s(s);
            let (v, v1, v2) = (speed(a, b, t), speed_d1(a, b, t), speed_d2(a, b, t));
            -3.0 * a * b * (v2 * v - 5.0 * v1 * v1) / v.powi(7)
        }),
    })
}

fn webster_of(curve: &GeneratingCurve, s: f64) -> f64 {
    let k = (curve.curvature)(s);
    let k1 = (curve.curvature_d1)(s);
    let k2 = (curve.curvature_d2)(s);
    (k.powi(4) - k * k2 + k1 * k1) / (2.0 * k.powi(3))
}

pub fn make_torus(curve: GeneratingCurve) -> Result<ModelGeometry> {
    validate_curve(&curve)?;
    let period = curve.period;
    let curve = Arc::new(curve);
    let (ct, co, cf, ca, cw, ce) = (
        curve.clone(),
        curve.clone(),
        curve.clone(),
        curve.clone(),
        curve.clone(),
        curve.clone(),
    );
    Ok(ModelGeometry {
        name: curve.name.clone(),
        kind: ModelKind::Torus { period },
        periods: [Some(period), Some(TAU), Some(TAU)],
        domain: Box::new(|_| true),
        theta: Box::new(move |p: ChartPoint| {
            let [tx, ty] = (ct.tangent)(p.coords[0]);
            Covector::new(p, [0.0, ty, tx])
        }),
        omega: Box::new(move |p: ChartPoint| {
            let s = p.coords[0];
            let [tx, ty] = (co.tangent)(s);
            let k = (co.curvature)(s);
            let half_log = (co.curvature_d1)(s) / (2.0 * k);
            Covector::new(
                p,
                [
                    0.0,
                    half_log * tx - 0.5 * k * ty,
                    -half_log * ty - 0.5 * k * tx,
                ],
            )
        }),
        frame: Box::new(move |p: ChartPoint| {
            let s = p.coords[0];
            let [tx, ty] = (cf.tangent)(s);
            let c = (2.0 / (cf.curvature)(s)).sqrt();
            Frame {
                x: TangentVector::new(p, [c, 0.0, 0.0]),
                y: TangentVector::new(p, [0.0, c * tx, -c * ty]),
                t: TangentVector::new(p, [0.0, ty, tx]),
            }
        }),
        torsion: Box::new(move |p: ChartPoint| {
            Complex64::new(0.0, -0.5 * (ca.curvature)(p.coords[0]))
        }),
        webster: Box::new(move |p: ChartPoint| webster_of(&cw, p.coords[0])),
        extras: Box::new(move |p: ChartPoint| {
            let s = p.coords[0];
            let k = (ce.curvature)(s);
            let w1 = deriv5(&|u| webster_of(&ce, u), s, 1e-4);
            Complex64::new(0.0, (w1 / 6.0 - (2.0 / 3.0) * (ce.curvature_d1)(s)) / (2.0 * k).sqrt())
        }),
        sample_box: [[0.0, period], [0.0, TAU], [0.0, TAU]],
    })
}

/// Differencing check that the supplied callbacks describe one closed,
/// unit-speed, positively curved curve. Guards hand-built curves.
fn validate_curve(curve: &GeneratingCurve) -> Result<()> {
    if !(curve.period.is_finite() && curve.period > 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("curve period must be positive, got {}", curve.period),
        });
    }
    let h = 1e-4;
    for j in 0..129 {
        let s = curve.period * j as f64 / 129.0;
        let [tx, ty] = (curve.tangent)(s);
        let norm = tx.hypot(ty);
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter {
                what: format!("tangent is not unit at s = {s}: |gamma'| = {norm}"),
            });
        }
        let dx = deriv5(&|u| (curve.position)(u)[0], s, h);
        let dy = deriv5(&|u| (curve.position)(u)[1], s, h);
        if (dx - tx).abs() > 1e-6 || (dy - ty).abs() > 1e-6 {
            return Err(Error::InvalidParameter {
                what: format!("tangent disagrees with differenced position at s = {s}"),
            });
        }
        let k = (curve.curvature)(s);
        if !(k > 1e-12) {
            return Err(Error::InvalidParameter {
                what: format!("curvature must be strictly positive, got {k} at s = {s}"),
            });
        }
        let dtx = deriv5(&|u| (curve.tangent)(u)[0], s, h);
        let dty = deriv5(&|u| (curve.tangent)(u)[1], s, h);
        let k_fd = dty * tx - dtx * ty;
        if (k_fd - k).abs() > 1e-6 * (1.0 + k.abs()) {
            return Err(Error::InvalidParameter {
                what: format!("curvature disagrees with differenced tangent at s = {s}"),
            });
        }
        let k1_fd = deriv5(&|u| (curve.curvature)(u), s, h);
        if (k1_fd - (curve.curvature_d1)(s)).abs() > 1e-5 * (1.0 + k.abs()) {
            return Err(Error::InvalidParameter {
                what: format!("curvature_d1 disagrees with differenced curvature at s = {s}"),
            });
        }
        let k2_fd = deriv5(&|u| (curve.curvature_d1)(u), s, h);
        if (k2_fd - (curve.curvature_d2)(s)).abs() > 1e-5 * (1.0 + (curve.curvature_d2)(s).abs()) {
            return Err(Error::InvalidParameter {
                what: format!("curvature_d2 disagrees with differenced curvature_d1 at s = {s}"),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn circle_model_reduces_to_constants() {
        let m = make_torus(circle_curve(2.0).unwrap()).unwrap();
        let p = m.point([1.3, 0.7, 5.9]).unwrap();
        assert_relative_eq!(m.webster_w(&p), 0.25, epsilon = 1e-14);
        assert_relative_eq!(m.torsion_a11(&p).im, -0.25, epsilon = 1e-14);
        assert_eq!(m.torsion_a11(&p).re, 0.0);
        assert!(m.density_extras(&p).norm() < 1e-12);
        // omega = -(kappa/2) theta on a circle, so omega(T) = -1/(2r).
        let fr = m.frame_at(&p);
        assert_relative_eq!(m.omega_at(&p).pair(&fr.t), -0.25, epsilon = 1e-12);
    }

    #[test]
    fn ellipse_curvature_hits_axis_values() {
        let (a, b) = (2.0, 1.0);
        let c = ellipse_curve(a, b).unwrap();
        assert_relative_eq!((c.curvature)(0.0), a / (b * b), epsilon = 1e-10);
        let quarter = c.period / 4.0;
        assert_relative_eq!((c.curvature)(quarter), b / (a * a), epsilon = 1e-10);
        // kappa' vanishes at both axis crossings.
        assert!((c.curvature_d1)(0.0).abs() < 1e-10);
        assert!((c.curvature_d1)(quarter).abs() < 1e-10);
    }

    #[test]
    fn ellipse_perimeter_matches_reference() {
        // 4 a E(m) with m = 1 - b^2/a^2 = 3/4.
        let c = ellipse_curve(2.0, 1.0).unwrap();
        assert_relative_eq!(c.period, 9.688448220547675, epsilon = 1e-5);
        assert_relative_eq!(
            c.period,
            ellipse_arclength(2.0, 1.0, std::f64::consts::TAU),
            epsilon = 1e-10
        );
    }

    #[test]
    fn unit_ellipse_degenerates_to_unit_circle() {
        let e = ellipse_curve(1.0, 1.0).unwrap();
        let c = circle_curve(1.0).unwrap();
        assert_relative_eq!(e.period, c.period, epsilon = 1e-10);
        for j in 0..7 {
            let s = 0.9 * j as f64;
            let (pe, pc) = ((e.position)(s), (c.position)(s));
            assert_relative_eq!(pe[0], pc[0], epsilon = 1e-8);
            assert_relative_eq!(pe[1], pc[1], epsilon = 1e-8);
            assert_relative_eq!((e.curvature)(s), 1.0, epsilon = 1e-10);
            assert!((e.curvature_d1)(s).abs() < 1e-8);
        }
    }

    #[test]
    fn curvature_derivatives_match_differencing() {
        let c = ellipse_curve(2.0, 1.0).unwrap();
        for j in 1..9 {
            let s = c.period * j as f64 / 9.0;
            let k1_fd = deriv5(&|u| (c.curvature)(u), s, 1e-4);
            assert_relative_eq!(k1_fd, (c.curvature_d1)(s), epsilon = 1e-7);
            let k2_fd = deriv5(&|u| (c.curvature_d1)(u), s, 1e-4);
            assert_relative_eq!(k2_fd, (c.curvature_d2)(s), epsilon = 1e-6);
        }
    }

    #[test]
    fn arclength_inversion_roundtrip() {
        let (a, b) = (2.0, 1.0);
        let c = ellipse_curve(a, b).unwrap();
        for j in 0..24 {
            let t = std::f64::consts::TAU * j as f64 / 24.0;
            let s = ellipse_arclength(a, b, t);
            let p = (c.position)(s);
            assert_relative_eq!(p[0], a * t.cos(), epsilon = 1e-9);
            assert_relative_eq!(p[1], b * t.sin(), epsilon = 1e-9);
        }
    }

    #[test]
    fn ellipse_webster_matches_slice_constant_combination() {
        // On a circle W = kappa/2; on the ellipse at the axis crossings
        // kappa' = 0 but kappa'' does not vanish, so W deviates from kappa/2.
        let m = make_torus(ellipse_curve(2.0, 1.0).unwrap()).unwrap();
        let p = m.point([0.0, 0.0, 0.0]).unwrap();
        let c = ellipse_curve(2.0, 1.0).unwrap();
        let (k, k2) = ((c.curvature)(0.0), (c.curvature_d2)(0.0));
        let expected = (k.powi(4) - k * k2) / (2.0 * k.powi(3));
        assert_relative_eq!(m.webster_w(&p), expected, epsilon = 1e-9);
    }

    #[test]
    fn invalid_curves_are_rejected() {
        assert!(circle_curve(0.0).is_err());
        assert!(circle_curve(-2.0).is_err());
        assert!(ellipse_curve(1.0, 0.0).is_err());
        assert!(ellipse_curve(f64::NAN, 1.0).is_err());
        // Doctored curvature must be caught by the differencing check.
        let mut bad = circle_curve(1.0).unwrap();
        bad.curvature = Box::new(|_| 2.0);
        assert!(make_torus(bad).is_err());
    }
}
