//! Euler-Lagrange residuals for the two energies and numeric first
//! variations under normal deformations.
//!
//! The E1 residual is assembled twice on purpose: once by contracting the
//! h-symbol hierarchy (route A) and once from the expanded right side of
//! the same identity (route B). The two must agree to stencil tolerance;
//! `frak_f` and the residual always use route B. The vanishing-torsion
//! (CYZ) forms are kept as independent cross-checks rather than folded
//! into the general code path.

use rand::{Rng, SeedableRng};

use crate::chart::ChartPoint;
use crate::error::{Error, Result};
use crate::functionals::{integrate_engine, Functional};
use crate::models::ModelGeometry;
use crate::surface::{Direction, Engine, SurfacePatch};

/// Below this |H_cr| the E1 residual is reported undefined, not
/// regularized.
pub const TOL_HCR: f64 = 1e-8;

/// The h-symbols, cached tangential derivatives and both assemblies of
/// |H_cr| frak_f at one point.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ELIntermediates {
    pub alpha: f64,
    pub h_cr: f64,
    pub h11: f64,
    pub h10: f64,
    pub h00: f64,
    pub h111: f64,
    pub h110: f64,
    pub h100: f64,
    /// route_b / |H_cr|; meaningful only when |H_cr| > TOL_HCR.
    pub frak_f: f64,
    /// |H_cr| frak_f contracted from the symbol hierarchy.
    pub route_a: f64,
    /// |H_cr| frak_f from the expanded identity.
    pub route_b: f64,
    pub e1_alpha: f64,
    pub v_alpha: f64,
    pub e1_h: f64,
    pub v_h: f64,
    pub v_h10: f64,
    pub x6_re: f64,
    pub x6_im: f64,
    pub w: f64,
    pub im_a11: f64,
    pub re_a11: f64,
}

/// A deformation field X = f e2 + g T given in parameter coordinates,
/// with the finite-difference step for the variation.
pub struct Deformation {
    pub f: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub g: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub delta: f64,
}

fn bump_profile(s2: f64) -> f64 {
    if s2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s2)).exp()
    }
}

impl Deformation {
    /// Smooth compactly supported bump at (u0, v0), radius `width`, with
    /// component weights (wf, wg); peak amplitude max(|wf|, |wg|) <= 1.
    /// `periods` wraps the offsets on periodic axes.
    pub fn bump(
        u0: f64,
        v0: f64,
        width: f64,
        wf: f64,
        wg: f64,
        periods: [Option<f64>; 2],
    ) -> Deformation {
        assert!(width > 0.0, "bump width must be positive");
        let offset = move |x: f64, x0: f64, per: Option<f64>| {
            let mut d = x - x0;
            if let Some(p) = per {
                d -= p * (d / p).round();
            }
            d
        };
        let s2_at = move |u: f64, v: f64| {
            let du = offset(u, u0, periods[0]) / width;
            let dv = offset(v, v0, periods[1]) / width;
            du * du + dv * dv
        };
        Deformation {
            f: Box::new(move |u, v| wf * bump_profile(s2_at(u, v))),
            g: Box::new(move |u, v| wg * bump_profile(s2_at(u, v))),
            delta: 1e-3,
        }
    }

    /// Seeded random bump inside the middle of the rectangle. Widths stay
    /// broad: the linear part of the deformed energy is a total divergence
    /// built from third derivatives of the profile, and the variation
    /// quadrature must resolve it. The cap keeps the support inside half a
    /// period, away from the wrapped-distance crease.
    pub fn random(rect: [[f64; 2]; 2], periods: [Option<f64>; 2], seed: u64) -> Deformation {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let span_u = rect[0][1] - rect[0][0];
        let span_v = rect[1][1] - rect[1][0];
        let u0 = rect[0][0] + span_u * rng.gen_range(0.25..0.75);
        let v0 = rect[1][0] + span_v * rng.gen_range(0.25..0.75);
        let width = span_u.min(span_v) * rng.gen_range(0.36..0.46);
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        Deformation::bump(u0, v0, width, phi.cos(), phi.sin(), periods)
    }
}

fn interior_samples(eng: &Engine) -> Vec<(f64, f64)> {
    let rect = eng
        .immersion_rect()
        .unwrap_or([[-0.3, 0.3], [-0.3, 0.3]]);
    let mut pts = Vec::new();
    for i in 0..4 {
        for j in 0..3 {
            let fu = 0.12 + 0.76 * i as f64 / 3.0;
            let fv = 0.15 + 0.7 * j as f64 / 2.0;
            pts.push((
                rect[0][0] + fu * (rect[0][1] - rect[0][0]),
                rect[1][0] + fv * (rect[1][1] - rect[1][0]),
            ));
        }
    }
    pts
}

/// Sampled check that W is constant and the torsion is as `imag_only`
/// demands: A identically zero, or constant purely imaginary.
fn check_model_hypotheses(eng: &Engine, imag_only: bool, label: &str) -> Result<()> {
    let mut w0 = None;
    let mut im0 = None;
    let mut seen = 0usize;
    for (u, v) in interior_samples(eng) {
        let p = match eng.point(u, v) {
            Ok(p) => p,
            Err(_) => continue,
        };
        seen += 1;
        let w = eng.model.webster_w(&p);
        let a = eng.model.torsion_a11(&p);
        let wr = w0.get_or_insert(w);
        if (w - *wr).abs() > 1e-10 * (1.0 + wr.abs()) {
            return Err(Error::InapplicableModel {
                reason: format!("{label}: Webster curvature is not constant"),
            });
        }
        if imag_only {
            if a.re.abs() > 1e-10 {
                return Err(Error::InapplicableModel {
                    reason: format!("{label}: torsion has a real part"),
                });
            }
            let ir = im0.get_or_insert(a.im);
            if (a.im - *ir).abs() > 1e-10 * (1.0 + ir.abs()) {
                return Err(Error::InapplicableModel {
                    reason: format!("{label}: torsion is not constant"),
                });
            }
        } else if a.norm() > 1e-10 {
            return Err(Error::InapplicableModel {
                reason: format!("{label}: torsion does not vanish"),
            });
        }
    }
    if seen < 6 {
        return Err(Error::InapplicableModel {
            reason: format!("{label}: could not sample the model hypotheses"),
        });
    }
    Ok(())
}

struct PointScalars {
    alpha: f64,
    h: f64,
    e1_alpha: f64,
    e1_h: f64,
    v_h: f64,
    w: f64,
    im_a: f64,
    re_a: f64,
    x6_re: f64,
    x6_im: f64,
}

fn scalars_at(eng: &Engine, u: f64, v: f64) -> Result<PointScalars> {
    let n = eng.node(u, v)?;
    if n.singular {
        return Err(Error::SingularPoint { detail: "residual at a singular node".into() });
    }
    let alpha_field = |x: f64, y: f64| eng.alpha_at(x, y);
    let h_field = |x: f64, y: f64| eng.h_pair(x, y).map(|t| t.0);
    let (h, _) = eng.h_pair(u, v)?;
    let a = eng.model.torsion_a11(&n.p);
    let x6 = eng.x6(u, v)?;
    Ok(PointScalars {
        alpha: n.alpha,
        h,
        e1_alpha: eng.d_dir(u, v, Direction::E1, &alpha_field)?,
        e1_h: eng.d_dir(u, v, Direction::E1, &h_field)?,
        v_h: eng.d_dir(u, v, Direction::V, &h_field)?,
        w: eng.model.webster_w(&n.p),
        im_a: a.im,
        re_a: a.re,
        x6_re: x6.re,
        x6_im: x6.im,
    })
}

/// Expanded right side of the |H_cr| frak_f identity (route B).
fn rhs_general(eng: &Engine, u: f64, v: f64) -> Result<f64> {
    let s = scalars_at(eng, u, v)?;
    let (alpha, h) = (s.alpha, s.h);
    // A^1_1bar components in the surface frame: conjugate of A_11.
    let im_up = -s.im_a;
    let h10_field = |x: f64, y: f64| -> Result<f64> {
        let m = eng.node(x, y)?;
        if m.singular {
            return Err(Error::SingularPoint { detail: "singular node in residual stencil".into() });
        }
        let e1a = eng.d_dir(x, y, Direction::E1, &|xx, yy| eng.alpha_at(xx, yy))?;
        let aq = eng.model.torsion_a11(&m.p);
        let wq = eng.model.webster_w(&m.p);
        Ok(e1a + 0.5 * m.alpha * m.alpha - aq.im + 0.25 * wq)
    };
    let v_h10 = eng.d_dir(u, v, Direction::V, &h10_field)?;
    Ok(
        (s.e1_alpha + 0.5 * alpha * alpha + h * h / 3.0 - s.im_a + 0.25 * s.w)
            * (s.e1_h - 2.0 * alpha * h + 3.0 * s.re_a)
            + h * s.v_h
            - 3.0 * alpha * h * s.e1_alpha
            - 3.0 * alpha.powi(3) * h
            - 1.5 * alpha * h * s.w
            + 3.0 * alpha * h * im_up
            + 3.0 * alpha * h * s.im_a
            + 3.0 * h * s.x6_re
            + 1.5 * v_h10
            + 1.5 * alpha * h * s.e1_alpha
            + 1.5 * alpha.powi(3) * h
            + 0.75 * alpha * h * s.w
            - 1.5 * alpha * h * im_up
            - 1.5 * alpha * h * s.im_a
            - 1.5 * h * s.x6_re,
    )
}

fn intermediates_at(eng: &Engine, u: f64, v: f64) -> Result<ELIntermediates> {
    let s = scalars_at(eng, u, v)?;
    let hcr = eng.hcr(u, v)?;
    let alpha_field = |x: f64, y: f64| eng.alpha_at(x, y);
    let v_alpha = eng.d_dir(u, v, Direction::V, &alpha_field)?;
    let h10_field = |x: f64, y: f64| -> Result<f64> {
        let m = eng.node(x, y)?;
        if m.singular {
            return Err(Error::SingularPoint { detail: "singular node in residual stencil".into() });
        }
        let e1a = eng.d_dir(x, y, Direction::E1, &|xx, yy| eng.alpha_at(xx, yy))?;
        let aq = eng.model.torsion_a11(&m.p);
        let wq = eng.model.webster_w(&m.p);
        Ok(e1a + 0.5 * m.alpha * m.alpha - aq.im + 0.25 * wq)
    };
    let v_h10 = eng.d_dir(u, v, Direction::V, &h10_field)?;

    let (alpha, h) = (s.alpha, s.h);
    let im_up = -s.im_a;
    let h11 = h;
    let h10 = s.e1_alpha + 0.5 * alpha * alpha - s.im_a + 0.25 * s.w;
    let h00 = v_alpha + s.x6_im - alpha * s.re_a;
    let h111 = s.e1_h - 2.0 * alpha * h + 3.0 * s.re_a;
    let h110 = s.v_h - 3.0 * alpha * s.e1_alpha - 3.0 * alpha.powi(3) - 1.5 * alpha * s.w
        + 3.0 * alpha * im_up
        + 3.0 * alpha * s.im_a
        + 3.0 * s.x6_re;
    let h100 = v_h10 + alpha * h * s.e1_alpha + alpha.powi(3) * h + 0.5 * alpha * h * s.w
        - alpha * h * im_up
        - alpha * h * s.im_a
        - h * s.x6_re;
    let route_a = h10 * h111 + h11 * h11 * h111 / 3.0 + h11 * h110 + 1.5 * h100;
    let route_b = rhs_general(eng, u, v)?;
    Ok(ELIntermediates {
        alpha,
        h_cr: hcr,
        h11,
        h10,
        h00,
        h111,
        h110,
        h100,
        frak_f: route_b / hcr.abs().max(f64::MIN_POSITIVE),
        route_a,
        route_b,
        e1_alpha: s.e1_alpha,
        v_alpha,
        e1_h: s.e1_h,
        v_h: s.v_h,
        v_h10,
        x6_re: s.x6_re,
        x6_im: s.x6_im,
        w: s.w,
        im_a11: s.im_a,
        re_a11: s.re_a,
    })
}

/// h-symbols and both |H_cr| frak_f assemblies at a chart point.
pub fn el_intermediates(
    model: &ModelGeometry,
    surface: &SurfacePatch,
    p: &ChartPoint,
) -> Result<ELIntermediates> {
    let (eng, u, v) = Engine::at_point(model, surface, p)?;
    intermediates_at(&eng, u, v)
}

fn el1_from(
    eng: &Engine,
    u: f64,
    v: f64,
    rhs: &dyn Fn(f64, f64) -> Result<f64>,
    bracket: f64,
) -> Result<f64> {
    let hcr = eng.hcr(u, v)?;
    if hcr.abs() <= TOL_HCR {
        return Err(Error::ResidualUndefined { h_cr: hcr });
    }
    let n = eng.node(u, v)?;
    let sign = hcr.signum();
    // |H_cr|^{1/2} frak_f under the outer e1 derivative. A cutoff or sign
    // change anywhere on the stencil makes the residual undefined; the
    // square root must not be differenced across its kink.
    let field = |x: f64, y: f64| -> Result<f64> {
        let hq = eng.hcr(x, y)?;
        if hq.abs() <= TOL_HCR || hq.signum() != sign {
            return Err(Error::ResidualUndefined { h_cr: hq });
        }
        Ok(rhs(x, y)? / hq.abs().sqrt())
    };
    let e1_sqf = eng.d_dir(u, v, Direction::E1, &field)?;
    let sq = hcr.abs().sqrt();
    let frak = rhs(u, v)? / hcr.abs();
    Ok(e1_sqf + 1.5 * sq * n.alpha * frak + 0.5 * sign * sq * bracket)
}

/// General E1 Euler-Lagrange residual.
pub fn el1_general(model: &ModelGeometry, surface: &SurfacePatch, p: &ChartPoint) -> Result<f64> {
    let (eng, u, v) = Engine::at_point(model, surface, p)?;
    let ints = intermediates_at(&eng, u, v)?;
    let bracket = 9.0 * ints.h00 + 6.0 * ints.h11 * ints.h10 + 2.0 / 3.0 * ints.h11.powi(3);
    let rhs = |x: f64, y: f64| rhs_general(&eng, x, y);
    el1_from(&eng, u, v, &rhs, bracket)
}

/// Vanishing-torsion (CYZ) E1 residual; requires constant W and A = 0.
pub fn el1_cyz(model: &ModelGeometry, surface: &SurfacePatch, p: &ChartPoint) -> Result<f64> {
    let (eng, u, v) = Engine::at_point(model, surface, p)?;
    check_model_hypotheses(&eng, false, "CYZ form inapplicable")?;
    let s = scalars_at(&eng, u, v)?;
    let alpha_field = |x: f64, y: f64| eng.alpha_at(x, y);
    let v_alpha = eng.d_dir(u, v, Direction::V, &alpha_field)?;
    let bracket = 9.0 * v_alpha
        + 6.0 * s.h * (s.e1_alpha + 0.5 * s.alpha * s.alpha + 0.25 * s.w)
        + 2.0 / 3.0 * s.h.powi(3);
    let rhs = |x: f64, y: f64| -> Result<f64> {
        let q = scalars_at(&eng, x, y)?;
        let ta_field = |xx: f64, yy: f64| -> Result<f64> {
            let m = eng.node(xx, yy)?;
            if m.singular {
                return Err(Error::SingularPoint {
                    detail: "singular node in residual stencil".into(),
                });
            }
            let e1a = eng.d_dir(xx, yy, Direction::E1, &|a, b| eng.alpha_at(a, b))?;
            Ok(e1a + 0.5 * m.alpha * m.alpha)
        };
        let v_ta = eng.d_dir(x, y, Direction::V, &ta_field)?;
        let (alpha, h) = (q.alpha, q.h);
        Ok(q.e1_h * (q.e1_alpha + 0.5 * alpha * alpha + h * h / 3.0 + 0.25 * q.w)
            + h * q.v_h
            + 1.5 * v_ta
            - 3.5 * alpha * h * q.e1_alpha
            - 2.5 * alpha.powi(3) * h
            - 2.0 / 3.0 * alpha * h.powi(3)
            - 1.25 * alpha * h * q.w)
    };
    el1_from(&eng, u, v, &rhs, bracket)
}

/// E2 residual under constant W and constant purely imaginary torsion.
pub fn el2_constant(model: &ModelGeometry, surface: &SurfacePatch, p: &ChartPoint) -> Result<f64> {
    let (eng, u, v) = Engine::at_point(model, surface, p)?;
    check_model_hypotheses(&eng, true, "constant-torsion form inapplicable")?;
    let s = scalars_at(&eng, u, v)?;
    let e1h_field = |x: f64, y: f64| {
        eng.d_dir(x, y, Direction::E1, &|xx, yy| eng.h_pair(xx, yy).map(|t| t.0))
    };
    let vh_field = |x: f64, y: f64| {
        eng.d_dir(x, y, Direction::V, &|xx, yy| eng.h_pair(xx, yy).map(|t| t.0))
    };
    let e1e1_h = eng.d_dir(u, v, Direction::E1, &e1h_field)?;
    let e1_v_h = eng.d_dir(u, v, Direction::E1, &vh_field)?;
    let (alpha, h) = (s.alpha, s.h);
    let im_block = 6.0
        * s.im_a
        * (0.5 * s.im_a - s.e1_alpha - 2.0 * alpha * alpha - 0.625 * s.w - h * h / 6.0);
    Ok(4.0 / 9.0
        * (h * e1e1_h
            + 3.0 * e1_v_h
            + s.e1_h * s.e1_h
            + h.powi(4) / 3.0
            + 3.0 * s.e1_alpha * s.e1_alpha
            + 12.0 * alpha * alpha * s.e1_alpha
            + 12.0 * alpha.powi(4)
            - alpha * h * s.e1_h
            + 2.0 * h * h * s.e1_alpha
            + 5.0 * alpha * alpha * h * h
            + 1.5 * s.w * (s.e1_alpha + 2.0 / 3.0 * h * h + 5.0 * alpha * alpha + 0.5 * s.w)
            + im_block))
}

/// Vanishing-torsion (CYZ) E2 residual; requires constant W and A = 0.
pub fn el2_cyz(model: &ModelGeometry, surface: &SurfacePatch, p: &ChartPoint) -> Result<f64> {
    let (eng, u, v) = Engine::at_point(model, surface, p)?;
    check_model_hypotheses(&eng, false, "CYZ form inapplicable")?;
    let s = scalars_at(&eng, u, v)?;
    let e1h_field = |x: f64, y: f64| {
        eng.d_dir(x, y, Direction::E1, &|xx, yy| eng.h_pair(xx, yy).map(|t| t.0))
    };
    let vh_field = |x: f64, y: f64| {
        eng.d_dir(x, y, Direction::V, &|xx, yy| eng.h_pair(xx, yy).map(|t| t.0))
    };
    let e1e1_h = eng.d_dir(u, v, Direction::E1, &e1h_field)?;
    let e1_v_h = eng.d_dir(u, v, Direction::E1, &vh_field)?;
    let (alpha, h) = (s.alpha, s.h);
    Ok(4.0 / 9.0
        * (h * e1e1_h
            + 3.0 * e1_v_h
            + s.e1_h * s.e1_h
            + h.powi(4) / 3.0
            + 3.0 * s.e1_alpha * s.e1_alpha
            + 12.0 * alpha * alpha * s.e1_alpha
            + 12.0 * alpha.powi(4)
            - alpha * h * s.e1_h
            + 2.0 * h * h * s.e1_alpha
            + 5.0 * alpha * alpha * h * h
            + 1.5 * s.w * (s.e1_alpha + 2.0 / 3.0 * h * h + 5.0 * alpha * alpha + 0.5 * s.w)))
}

/// Centered-difference first variation of E1 or E2 under X = f e2 + g T,
/// Richardson-extrapolated over delta and delta/2.
pub fn first_variation(
    model: &ModelGeometry,
    surface: &SurfacePatch,
    which: Functional,
    d: &Deformation,
) -> Result<f64> {
    let eng = Engine::for_patch(model, surface).map_err(|_| Error::InvalidParameter {
        what: "first variation requires an immersion patch".into(),
    })?;
    let rect = eng.immersion_rect().expect("immersion engine has a rectangle");
    let periodic = eng.immersion_periodic();

    // The deformation must keep clear of the singular set by two stencil
    // widths.
    let margin = 8.0 * eng.h;
    let nscan = 48;
    let mut singular_nodes = Vec::new();
    let mut support_nodes = Vec::new();
    for i in 0..nscan {
        for j in 0..nscan {
            let u = rect[0][0] + (i as f64 + 0.5) / nscan as f64 * (rect[0][1] - rect[0][0]);
            let v = rect[1][0] + (j as f64 + 0.5) / nscan as f64 * (rect[1][1] - rect[1][0]);
            let is_singular = match eng.node(u, v) {
                Ok(n) => n.singular,
                Err(_) => true,
            };
            if is_singular {
                singular_nodes.push((u, v));
            }
            if (d.f)(u, v).abs() + (d.g)(u, v).abs() > 1e-12 {
                support_nodes.push((u, v));
            }
        }
    }
    let wrap = |delta: f64, axis: usize| -> f64 {
        if periodic[axis] {
            let span = rect[axis][1] - rect[axis][0];
            let mut d = delta;
            d -= span * (d / span).round();
            d
        } else {
            delta
        }
    };
    for &(su, sv) in &support_nodes {
        for &(qu, qv) in &singular_nodes {
            let du = wrap(su - qu, 0);
            let dv = wrap(sv - qv, 1);
            if (du * du + dv * dv).sqrt() < margin {
                return Err(Error::SingularPoint {
                    detail: "deformation touches the singular set".into(),
                });
            }
        }
    }

    let step = eng.h.min(crate::surface::DEFAULT_PARAM_STEP);
    let energy = |delta: f64| -> Result<f64> {
        let def_map = |u: f64, v: f64| -> [f64; 3] {
            match eng.node(u, v) {
                Ok(n) => {
                    let fv = (d.f)(u, v);
                    let gv = (d.g)(u, v);
                    let e2 = eng.e2_chart(&n);
                    let t = eng.model.frame_at(&n.p).t;
                    [
                        n.p.coords[0] + delta * (fv * e2.comps[0] + gv * t.comps[0]),
                        n.p.coords[1] + delta * (fv * e2.comps[1] + gv * t.comps[1]),
                        n.p.coords[2] + delta * (fv * e2.comps[2] + gv * t.comps[2]),
                    ]
                }
                Err(_) => [f64::NAN; 3],
            }
        };
        let deng = Engine::from_map(eng.model, &def_map, rect, periodic, step, eng.eps);
        // The linear density change integrates to zero through lobe
        // cancellation; resolving it needs a much finer grid than the
        // plain energies do.
        let r = integrate_engine(&deng, which, (64, 64))?;
        if r.excluded_fraction > 1e-3 {
            return Err(Error::InvalidParameter {
                what: format!(
                    "deformed surface leaves the chart ({:.2}% of nodes excluded)",
                    r.excluded_fraction * 100.0
                ),
            });
        }
        Ok(r.value)
    };

    let dd = d.delta;
    let d1 = (energy(dd)? - energy(-dd)?) / (2.0 * dd);
    let d2 = (energy(0.5 * dd)? - energy(-0.5 * dd)?) / dd;
    Ok((4.0 * d2 - d1) / 3.0)
}
