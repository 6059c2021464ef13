//! The two invariant surface densities, quadrature of the energies
//! E1 = int dA1 and E2 = int dA2 over immersion patches, and a pointwise
//! conformal-invariance check of the dA1 form under contact rescalings
//! theta -> lambda^2 theta.
//!
//! Densities (per unit parameter area, against (theta wedge e^1)(F_u, F_v)):
//!
//!   dA1 = |e1(alpha) + alpha^2/2 - Im A11 + W/4 + H^2/6|^{3/2}
//!   dA2 = V(alpha) + (2/3)(e1(alpha) + alpha^2/2 - Im A11 + W/4) H
//!         + (2/27) H^3 + Im(W^{,1}/6 + (2i/3)(A^11)_{,1}) - alpha Re A11
//!
//! with V = T + alpha e2 and the complex term evaluated in the surface
//! frame.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::chart::ChartPoint;
use crate::error::{Error, Result};
use crate::models::ModelGeometry;
use crate::num::{chart_step, pairwise_sum};
use crate::surface::{Direction, Engine, SurfacePatch};

/// Which energy to integrate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Functional {
    E1,
    E2,
}

impl std::str::FromStr for Functional {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "E1" | "e1" => Ok(Functional::E1),
            "E2" | "e2" => Ok(Functional::E2),
            other => Err(Error::InvalidParameter { what: format!("unknown functional {other:?}") }),
        }
    }
}

/// Pointwise density report.
#[derive(Clone, Debug, serde::Serialize)]
pub struct DensityValue {
    pub p: ChartPoint,
    /// |H_cr|^{3/2}, the dA1 scalar; nonnegative.
    #[serde(rename = "dA1_scalar")]
    pub da1_scalar: f64,
    /// The dA2 bracket.
    #[serde(rename = "dA2_scalar")]
    pub da2_scalar: f64,
    /// (theta wedge e^1)(F_u, F_v) on the parameter basis.
    pub area2form: f64,
}

/// Quadrature output with a one-refinement error estimate.
#[derive(Clone, Debug, serde::Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub excluded_fraction: f64,
    pub nodes: usize,
}

/// A positive chart function with analytic first and second derivatives,
/// used as the conformal factor lambda in theta -> lambda^2 theta.
pub struct ConformalFactor {
    pub label: String,
    pub lambda: Box<dyn Fn(&ChartPoint) -> f64 + Send + Sync>,
    pub grad: Box<dyn Fn(&ChartPoint) -> [f64; 3] + Send + Sync>,
    pub hess: Box<dyn Fn(&ChartPoint) -> [[f64; 3]; 3] + Send + Sync>,
}

impl ConformalFactor {
    pub fn constant(c: f64) -> Self {
        assert!(c > 0.0, "conformal factor must be positive");
        ConformalFactor {
            label: format!("const:{c}"),
            lambda: Box::new(move |_| c),
            grad: Box::new(|_| [0.0; 3]),
            hess: Box::new(|_| [[0.0; 3]; 3]),
        }
    }

    /// lambda = 1 + eps x0 (first chart coordinate).
    pub fn linear_x(eps: f64) -> Self {
        ConformalFactor {
            label: format!("linear:{eps}"),
            lambda: Box::new(move |p: &ChartPoint| 1.0 + eps * p.coords[0]),
            grad: Box::new(move |_| [eps, 0.0, 0.0]),
            hess: Box::new(|_| [[0.0; 3]; 3]),
        }
    }

    /// Smooth positive factor: 1.2 plus three low-frequency sine terms with
    /// total amplitude below 0.45, so lambda >= 0.75 on the whole chart.
    pub fn random_trig(seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        for _ in 0..3 {
            let amp = rng.gen_range(0.05..0.15);
            let k = [
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ];
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            terms.push((amp, k, phase));
        }
        let t1 = terms.clone();
        let t2 = terms.clone();
        let t3 = terms;
        let arg = |k: [f64; 3], phase: f64, p: &ChartPoint| {
            k[0] * p.coords[0] + k[1] * p.coords[1] + k[2] * p.coords[2] + phase
        };
        ConformalFactor {
            label: format!("trig:{seed}"),
            lambda: Box::new(move |p: &ChartPoint| {
                1.2 + t1.iter().map(|&(a, k, ph)| a * arg(k, ph, p).sin()).sum::<f64>()
            }),
            grad: Box::new(move |p: &ChartPoint| {
                let mut g = [0.0; 3];
                for &(a, k, ph) in &t2 {
                    let c = a * arg(k, ph, p).cos();
                    for ax in 0..3 {
                        g[ax] += c * k[ax];
                    }
                }
                g
            }),
            hess: Box::new(move |p: &ChartPoint| {
                let mut h = [[0.0; 3]; 3];
                for &(a, k, ph) in &t3 {
                    let s = -a * arg(k, ph, p).sin();
                    for i in 0..3 {
                        for j in 0..3 {
                            h[i][j] += s * k[i] * k[j];
                        }
                    }
                }
                h
            }),
        }
    }
}

/// Both density scalars in parameter space; shared by the pointwise ops and
/// the quadrature loop.
pub(crate) fn density_at(eng: &Engine, u: f64, v: f64) -> Result<DensityValue> {
    let hcr = eng.hcr(u, v)?;
    let area2form = eng.area2(u, v)?;
    let n = eng.node(u, v)?;
    let alpha_field = |x: f64, y: f64| eng.alpha_at(x, y);
    let e1a = eng.d_dir(u, v, Direction::E1, &alpha_field)?;
    let va = eng.d_dir(u, v, Direction::V, &alpha_field)?;
    let (h, _) = eng.h_pair(u, v)?;
    let a11 = eng.model.torsion_a11(&n.p);
    let w = eng.model.webster_w(&n.p);
    let x6 = eng.x6(u, v)?;
    let alpha = n.alpha;
    let da2 = va
        + (2.0 / 3.0) * (e1a + 0.5 * alpha * alpha - a11.im + 0.25 * w) * h
        + (2.0 / 27.0) * h * h * h
        + x6.im
        - alpha * a11.re;
    Ok(DensityValue { p: n.p, da1_scalar: hcr.abs().powf(1.5), da2_scalar: da2, area2form })
}

/// dA1 density at a chart point.
pub fn density_da1(
    model: &ModelGeometry,
    surface: &SurfacePatch,
    p: &ChartPoint,
) -> Result<DensityValue> {
    let (eng, u, v) = Engine::at_point(model, surface, p)?;
    density_at(&eng, u, v)
}

/// dA2 density at a chart point.
pub fn density_da2(
    model: &ModelGeometry,
    surface: &SurfacePatch,
    p: &ChartPoint,
) -> Result<DensityValue> {
    density_da1(model, surface, p)
}

/// Nodes and weights of one quadrature axis: midpoint on periodic axes,
/// composite Simpson (even panel count) on bounded axes.
fn axis_nodes(lo: f64, hi: f64, n: usize, periodic: bool) -> Vec<(f64, f64)> {
    let span = hi - lo;
    if periodic {
        let h = span / n as f64;
        (0..n).map(|i| (lo + (i as f64 + 0.5) * h, h)).collect()
    } else {
        let panels = if n % 2 == 0 { n } else { n + 1 };
        let h = span / panels as f64;
        (0..=panels)
            .map(|i| {
                let w = if i == 0 || i == panels {
                    h / 3.0
                } else if i % 2 == 1 {
                    4.0 * h / 3.0
                } else {
                    2.0 * h / 3.0
                };
                (lo + i as f64 * h, w)
            })
            .collect()
    }
}

fn quad_pass(eng: &Engine, which: Functional, nu: usize, nv: usize) -> (f64, usize, usize) {
    let rect = match eng_rect(eng) {
        Some(r) => r,
        None => unreachable!("quad_pass runs on immersion engines only"),
    };
    let per = eng_periodic(eng);
    let us = axis_nodes(rect[0][0], rect[0][1], nu, per[0]);
    let vs = axis_nodes(rect[1][0], rect[1][1], nv, per[1]);
    let cells: Vec<(f64, f64, f64)> = us
        .iter()
        .flat_map(|&(u, wu)| vs.iter().map(move |&(v, wv)| (u, v, wu * wv)))
        .collect();
    let vals: Vec<Option<f64>> = cells
        .par_iter()
        .map(|&(u, v, w)| {
            density_at(eng, u, v).ok().map(|d| {
                let scalar = match which {
                    Functional::E1 => d.da1_scalar,
                    Functional::E2 => d.da2_scalar,
                };
                w * scalar * d.area2form
            })
        })
        .collect();
    let total = vals.len();
    let excluded = vals.iter().filter(|x| x.is_none()).count();
    let kept: Vec<f64> = vals.into_iter().flatten().collect();
    (pairwise_sum(&kept), excluded, total)
}

// Small accessors so the quadrature loop can see the immersion rectangle
// without re-matching the patch representation.
fn eng_rect(eng: &Engine) -> Option<[[f64; 2]; 2]> {
    eng.immersion_rect()
}

fn eng_periodic(eng: &Engine) -> [bool; 2] {
    eng.immersion_periodic()
}

/// Integrate E1 or E2 over an immersion patch with a (n_u, n_v) base grid.
/// The reported value comes from the doubled grid; the error estimate is
/// the Richardson gap |fine - coarse| / 3. Nodes whose evaluation fails
/// (singular or off-chart stencils) are excluded and counted.
pub fn integrate(
    model: &ModelGeometry,
    surface: &SurfacePatch,
    which: Functional,
    grid: (usize, usize),
) -> Result<QuadratureResult> {
    let eng = Engine::for_patch(model, surface)?;
    integrate_engine(&eng, which, grid)
}

/// Quadrature core shared by `integrate` and the deformed-surface energies
/// of the variational module.
pub(crate) fn integrate_engine(
    eng: &Engine,
    which: Functional,
    grid: (usize, usize),
) -> Result<QuadratureResult> {
    if grid.0 < 8 || grid.1 < 8 {
        return Err(Error::InvalidParameter { what: "quadrature grid must be at least 8x8".into() });
    }
    let (coarse, _, _) = quad_pass(eng, which, grid.0, grid.1);
    let (fine, excluded, total) = quad_pass(eng, which, 2 * grid.0, 2 * grid.1);
    let excluded_fraction = excluded as f64 / total as f64;
    if excluded_fraction > 0.5 {
        return Err(Error::MostlySingular { fraction: excluded_fraction });
    }
    Ok(QuadratureResult {
        value: fine,
        error_estimate: (fine - coarse).abs() / 3.0,
        excluded_fraction,
        nodes: total,
    })
}

/// Second covariant derivative of mu = 1/lambda along frozen horizontal
/// directions: mu_ab = e_a(e_b(mu)) - (nabla_{e_a} e_b)(mu), with e_b
/// extended by freezing its (X, Y) components and the connection acting by
/// nabla X = omega Y, nabla Y = -omega X.
fn second_cov_mu(
    model: &ModelGeometry,
    p: &ChartPoint,
    ea_chart: [f64; 3],
    eb_xy: (f64, f64),
    factor: &ConformalFactor,
) -> f64 {
    let grad_mu = |q: &ChartPoint| {
        let lam = (factor.lambda)(q);
        let g = (factor.grad)(q);
        let s = -1.0 / (lam * lam);
        [s * g[0], s * g[1], s * g[2]]
    };
    let xmu = |q: &ChartPoint| {
        let fr = model.frame_at(q);
        let g = grad_mu(q);
        fr.x.comps[0] * g[0] + fr.x.comps[1] * g[1] + fr.x.comps[2] * g[2]
    };
    let ymu = |q: &ChartPoint| {
        let fr = model.frame_at(q);
        let g = grad_mu(q);
        fr.y.comps[0] * g[0] + fr.y.comps[1] * g[1] + fr.y.comps[2] * g[2]
    };
    let (c1, c2) = eb_xy;
    let ebmu = |q: &ChartPoint| c1 * xmu(q) + c2 * ymu(q);
    let scale = p.coords.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let h = chart_step(scale);
    let ev = |s: f64| {
        ebmu(&ChartPoint::new([
            p.coords[0] + s * ea_chart[0],
            p.coords[1] + s * ea_chart[1],
            p.coords[2] + s * ea_chart[2],
        ]))
    };
    let d = (ev(-2.0 * h) - 8.0 * ev(-h) + 8.0 * ev(h) - ev(2.0 * h)) / (12.0 * h);
    let om = model.omega_at(p);
    let om_ea = om.comps[0] * ea_chart[0] + om.comps[1] * ea_chart[1] + om.comps[2] * ea_chart[2];
    d - om_ea * (c1 * ymu(p) - c2 * xmu(p))
}

/// Pointwise conformal check of the dA1 form under theta -> lambda^2 theta:
/// returns (original, transformed) values of |H_cr|^{3/2} theta wedge e^1
/// on (F_u, F_v). The transformed value assembles every tilde quantity from
/// the rescaling table (never from the identity being tested); the exact
/// relation theta~ wedge e~^1 = lambda^3 theta wedge e^1 converts the frame
/// factor.
pub fn conformal_check(
    model: &ModelGeometry,
    surface: &SurfacePatch,
    factor: &ConformalFactor,
    p: &ChartPoint,
) -> Result<(f64, f64)> {
    let (mut eng, u, v) = Engine::at_point(model, surface, p)?;
    // Wide steps are tuned for constant-field patches; an oscillatory factor
    // raises the along-stencil frequency, so cap the step here.
    eng.h = eng.h.min(5e-3);
    let n = eng.node(u, v)?;
    if n.singular {
        return Err(Error::SingularPoint { detail: "conformal check at a singular node".into() });
    }
    let lam = (factor.lambda)(&n.p);
    if !(lam.is_finite() && lam > 0.0) {
        return Err(Error::InvalidParameter { what: format!("conformal factor not positive: {lam}") });
    }
    let li = 1.0 / lam;

    let hcr = eng.hcr(u, v)?;
    let area2 = eng.area2(u, v)?;
    let (h, _) = eng.h_pair(u, v)?;

    let e1c = eng.e1_chart(&n);
    let e2c = eng.e2_chart(&n);
    let g = (factor.grad)(&n.p);
    let e1l = g[0] * e1c.comps[0] + g[1] * e1c.comps[1] + g[2] * e1c.comps[2];
    let e2l = g[0] * e2c.comps[0] + g[1] * e2c.comps[1] + g[2] * e2c.comps[2];

    let mu11 = second_cov_mu(model, &n.p, e1c.comps, (n.a, n.b), factor);
    let mu22 = second_cov_mu(model, &n.p, e2c.comps, (-n.b, n.a), factor);

    let im_a = model.torsion_a11(&n.p).im;
    let w = model.webster_w(&n.p);

    let alpha_tilde = li * n.alpha + li * li * e1l;
    let h_tilde = li * h - 3.0 * li * li * e2l;
    let im_tilde = li * li * im_a
        + 0.5 * (li.powi(4) * e2l * e2l - li.powi(4) * e1l * e1l + li * mu22 - li * mu11);
    let w_tilde = 2.0 * li * (mu11 + mu22) - 4.0 * li.powi(4) * (e1l * e1l + e2l * e2l) + li * li * w;

    // alpha~ as a field on the surface, differentiated along e1 and scaled
    // by lambda^{-1} to get e~1(alpha~).
    let alpha_tilde_field = |x: f64, y: f64| -> Result<f64> {
        let m = eng.node(x, y)?;
        if m.singular {
            return Err(Error::SingularPoint { detail: "singular node in conformal stencil".into() });
        }
        let lq = (factor.lambda)(&m.p);
        if !(lq.is_finite() && lq > 0.0) {
            return Err(Error::InvalidParameter { what: "conformal factor not positive".into() });
        }
        let e1q = eng.e1_chart(&m);
        let gq = (factor.grad)(&m.p);
        let dl = gq[0] * e1q.comps[0] + gq[1] * e1q.comps[1] + gq[2] * e1q.comps[2];
        Ok(m.alpha / lq + dl / (lq * lq))
    };
    let e1_alpha_tilde = li * eng.d_dir(u, v, Direction::E1, &alpha_tilde_field)?;

    let hcr_tilde = e1_alpha_tilde + 0.5 * alpha_tilde * alpha_tilde - im_tilde + 0.25 * w_tilde
        + h_tilde * h_tilde / 6.0;

    let original = hcr.abs().powf(1.5) * area2;
    let transformed = hcr_tilde.abs().powf(1.5) * lam.powi(3) * area2;
    Ok((original, transformed))
}

/// Max relative deviation of the dA1 conformal invariance over a sweep of
/// random factors and interior sample points. Shared by the property test
/// and the acceptance gate.
pub fn conformal_invariance_sweep(
    model: &ModelGeometry,
    surface: &SurfacePatch,
    n_factors: usize,
    seed: u64,
) -> Result<f64> {
    let rect = surface.rect().ok_or_else(|| Error::InvalidParameter {
        what: "conformal sweep requires an immersion patch".into(),
    })?;
    let pts: Vec<(f64, f64)> = (0..5)
        .map(|i| {
            let f = 0.15 + 0.7 * i as f64 / 4.0;
            (
                rect[0][0] + f * (rect[0][1] - rect[0][0]),
                rect[1][0] + (1.0 - f) * (rect[1][1] - rect[1][0]),
            )
        })
        .collect();
    let mut worst = 0.0f64;
    for k in 0..n_factors {
        let factor = ConformalFactor::random_trig(seed.wrapping_add(k as u64));
        for &(u, v) in &pts {
            let p = surface.chart_point(model, u, v)?;
            let (orig, tilde) = conformal_check(model, surface, &factor, &p)?;
            let dev = (tilde - orig).abs() / orig.abs().max(1e-6);
            worst = worst.max(dev);
        }
    }
    Ok(worst)
}

/// Complex density term accessor used by reports.
pub fn density_extras_term(
    model: &ModelGeometry,
    surface: &SurfacePatch,
    p: &ChartPoint,
) -> Result<Complex64> {
    crate::surface::density_extras(model, surface, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::from_spec as model_from_spec;
    use crate::surface::from_spec as surface_from_spec;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, TAU};

    #[test]
    fn da1_matches_the_three_reference_values() {
        let disk = model_from_spec("disk-bundle").unwrap();
        // Zero-density plane family: c^2/(a^2+b^2) = 3/4.
        let plane0 = surface_from_spec(&disk, "plane:0,1,0.8660254037844386").unwrap();
        let p = plane0.chart_point(&disk, 0.2, 0.4).unwrap();
        let d = density_da1(&disk, &plane0, &p).unwrap();
        assert!(d.da1_scalar < 1e-18, "expected vanishing density, got {}", d.da1_scalar);

        let plane_c0 = surface_from_spec(&disk, "plane:0,1,0").unwrap();
        let q = plane_c0.chart_point(&disk, -0.3, 0.7).unwrap();
        let d0 = density_da1(&disk, &plane_c0, &q).unwrap();
        assert_abs_diff_eq!(d0.da1_scalar, 0.125f64.powf(1.5), epsilon = 1e-14);

        let rossi = model_from_spec("rossi:0").unwrap();
        let cliff = surface_from_spec(&rossi, &format!("rossi-sigma:{FRAC_1_SQRT_2}")).unwrap();
        let r = cliff.chart_point(&rossi, 1.0, 2.0).unwrap();
        let dc = density_da1(&rossi, &cliff, &r).unwrap();
        assert_abs_diff_eq!(dc.da1_scalar, 0.5f64.powf(1.5), epsilon = 1e-12);
    }

    #[test]
    fn da2_matches_the_reference_values() {
        let disk = model_from_spec("disk-bundle").unwrap();
        // H = 0 kills every bracket term.
        let plane_c0 = surface_from_spec(&disk, "plane:0,1,0").unwrap();
        let q = plane_c0.chart_point(&disk, 0.1, 0.2).unwrap();
        assert_abs_diff_eq!(density_da2(&disk, &plane_c0, &q).unwrap().da2_scalar, 0.0, epsilon = 1e-14);

        // H = -sqrt(3)/2 family: bracket reduces to (-1/12 + H^2 * 2/27) H.
        let plane34 = surface_from_spec(&disk, "plane:0,1,0.8660254037844386").unwrap();
        let p = plane34.chart_point(&disk, 0.0, 0.5).unwrap();
        let h = -(3.0f64.sqrt()) / 2.0;
        let want = (-1.0 / 12.0 + 2.0 / 27.0 * h * h) * h;
        let d = density_da2(&disk, &plane34, &p).unwrap();
        assert_abs_diff_eq!(d.da2_scalar, want, epsilon = 1e-12);
        assert_abs_diff_eq!(d.da2_scalar, 0.024056261216234408, epsilon = 1e-12);

        // Rossi slice: bracket equals ((1-8t+t^2)/(3(1-t^2))) H + (2/27) H^3
        // with the local H.
        let t = 0.3;
        let rossi = model_from_spec(&format!("rossi:{t}")).unwrap();
        let slice = surface_from_spec(&rossi, "rossi-sigma:0.6").unwrap();
        for (u, v) in [(0.3, 1.1), (2.5, 4.0)] {
            let p = slice.chart_point(&rossi, u, v).unwrap();
            let h = crate::surface::p_mean_curvature(&rossi, &slice, &p).unwrap();
            let want = (1.0 - 8.0 * t + t * t) / (3.0 * (1.0 - t * t)) * h + 2.0 / 27.0 * h * h * h;
            let d = density_da2(&rossi, &slice, &p).unwrap();
            assert_abs_diff_eq!(d.da2_scalar, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn e1_of_the_zero_energy_plane_vanishes() {
        let disk = model_from_spec("disk-bundle").unwrap();
        let plane = surface_from_spec(&disk, "plane:0,1,0.8660254037844386").unwrap();
        let r = integrate(&disk, &plane, Functional::E1, (128, 128)).unwrap();
        assert!(r.value.abs() < 1e-10, "E1 = {}", r.value);
        // Only the two rectangle corners whose admissible stencil interval
        // degenerates to a point may drop out.
        assert!(r.excluded_fraction < 1e-4, "excluded {}", r.excluded_fraction);
    }

    #[test]
    fn e1_of_the_symmetric_rossi_slice_matches_the_constant_density() {
        let rossi = model_from_spec("rossi:0").unwrap();
        let cliff = surface_from_spec(&rossi, &format!("rossi-sigma:{FRAC_1_SQRT_2}")).unwrap();
        let r = integrate(&rossi, &cliff, Functional::E1, (32, 32)).unwrap();
        let want = 0.5f64.powf(1.5) * 0.5 * TAU * TAU;
        assert_abs_diff_eq!(r.value, want, epsilon = 1e-9);
        assert!(r.error_estimate < 1e-9);
    }

    #[test]
    fn e2_of_symmetric_rossi_slices_vanishes_for_any_t() {
        for t in [0.0, 0.4, -0.35] {
            let rossi = model_from_spec(&format!("rossi:{t}")).unwrap();
            let cliff = surface_from_spec(&rossi, &format!("rossi-sigma:{FRAC_1_SQRT_2}")).unwrap();
            let r = integrate(&rossi, &cliff, Functional::E2, (16, 16)).unwrap();
            assert!(r.value.abs() < 1e-10, "E2 at t={t}: {}", r.value);
        }
    }

    #[test]
    fn graph_e1_matches_the_closed_form_and_converges_at_order_two_plus() {
        // Density of the t^2 = c graph against the parameter area:
        // 1/(sqrt(8) r sqrt(1 - r^2)) per unit angle, integrable in closed
        // form via artanh(sqrt(1 - r^2)).
        let disk = model_from_spec("disk-bundle").unwrap();
        let graph = surface_from_spec(&disk, "graph-t2:1").unwrap();
        let art = |x: f64| x.atanh();
        let anti = |r: f64| -art((1.0 - r * r).sqrt());
        let want = TAU / 8.0f64.sqrt() * (anti(0.9) - anti(0.1));
        let mut vals = Vec::new();
        for n in [8, 16, 32] {
            let r = integrate(&disk, &graph, Functional::E1, (16, n)).unwrap();
            vals.push(r.value);
        }
        let d1 = (vals[0] - vals[1]).abs();
        let d2 = (vals[1] - vals[2]).abs();
        let order = (d1 / d2).log2();
        assert!(order >= 2.0, "observed quadrature order {order:.2}");
        let fine = integrate(&disk, &graph, Functional::E1, (16, 128)).unwrap();
        assert_abs_diff_eq!(fine.value, want, epsilon = 1e-6);
    }

    #[test]
    fn refined_value_stays_within_four_error_estimates() {
        let disk = model_from_spec("disk-bundle").unwrap();
        let graph = surface_from_spec(&disk, "graph-t2:1").unwrap();
        let base = integrate(&disk, &graph, Functional::E1, (12, 12)).unwrap();
        let refined = integrate(&disk, &graph, Functional::E1, (24, 24)).unwrap();
        let change = (refined.value - base.value).abs();
        assert!(
            change < 4.0 * base.error_estimate + 1e-15,
            "change {change:.3e} vs estimate {:.3e}",
            base.error_estimate
        );
    }

    #[test]
    fn da2_reduction_identity_on_alpha_free_constant_torsion_surfaces() {
        // With alpha = 0 and constant W, A the bracket loses its V(alpha),
        // alpha Re A11 and extras terms; the remaining integrand must give
        // the same total.
        let t = 0.3;
        let rossi = model_from_spec(&format!("rossi:{t}")).unwrap();
        let slice = surface_from_spec(&rossi, "rossi-sigma:0.6").unwrap();
        let full = integrate(&rossi, &slice, Functional::E2, (24, 24)).unwrap();
        let eng = Engine::for_patch(&rossi, &slice).unwrap();
        let rect = slice.rect().unwrap();
        let mut acc = Vec::new();
        let n = 48;
        for i in 0..n {
            for j in 0..n {
                let u = rect[0][0] + (i as f64 + 0.5) / n as f64 * (rect[0][1] - rect[0][0]);
                let v = rect[1][0] + (j as f64 + 0.5) / n as f64 * (rect[1][1] - rect[1][0]);
                let nn = eng.node(u, v).unwrap();
                let alpha_field = |x: f64, y: f64| eng.alpha_at(x, y);
                let e1a = eng.d_dir(u, v, Direction::E1, &alpha_field).unwrap();
                let (h, _) = eng.h_pair(u, v).unwrap();
                let a11 = rossi.torsion_a11(&nn.p);
                let w = rossi.webster_w(&nn.p);
                let reduced = (2.0 / 3.0) * (-a11.im + 0.25 * w) * h
                    + 2.0 / 27.0 * h * h * h
                    + (2.0 / 3.0) * h * e1a;
                let area = eng.area2(u, v).unwrap();
                let cell = (rect[0][1] - rect[0][0]) * (rect[1][1] - rect[1][0]) / (n * n) as f64;
                acc.push(reduced * area * cell);
            }
        }
        let reduced_total = pairwise_sum(&acc);
        assert!(
            (full.value - reduced_total).abs() < 1e-8,
            "full {} vs reduced {}",
            full.value,
            reduced_total
        );
    }

    #[test]
    fn integrate_input_validation() {
        let disk = model_from_spec("disk-bundle").unwrap();
        let graph = surface_from_spec(&disk, "graph-t2:1").unwrap();
        assert!(matches!(
            integrate(&disk, &graph, Functional::E1, (4, 16)),
            Err(Error::InvalidParameter { .. })
        ));
        let ls = SurfacePatch::level_set(
            "ls",
            Box::new(|p: &ChartPoint| p.coords[2]),
            Box::new(|_| [0.0, 0.0, 1.0]),
        );
        assert!(matches!(
            integrate(&disk, &ls, Functional::E1, (16, 16)),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn mostly_singular_surface_is_a_hard_error() {
        let rossi = model_from_spec("rossi:0.8").unwrap();
        let slice = surface_from_spec(&rossi, "rossi-sigma:0.05")
            .unwrap()
            .with_singular_threshold(0.16);
        match integrate(&rossi, &slice, Functional::E1, (16, 16)) {
            Err(Error::MostlySingular { fraction }) => assert!(fraction > 0.5),
            other => panic!("expected MostlySingular, got {other:?}"),
        }
    }

    #[test]
    fn conformal_identity_and_constant_factors() {
        let disk = model_from_spec("disk-bundle").unwrap();
        let cyl = surface_from_spec(&disk, "cylinder:0.55").unwrap();
        let p = cyl.chart_point(&disk, 1.2, 0.4).unwrap();
        let (o, t) = conformal_check(&disk, &cyl, &ConformalFactor::constant(1.0), &p).unwrap();
        assert_abs_diff_eq!(o, t, epsilon = 1e-13);
        let (o2, t2) = conformal_check(&disk, &cyl, &ConformalFactor::constant(2.0), &p).unwrap();
        assert_abs_diff_eq!(o2, t2, epsilon = 1e-10 * (1.0 + o2.abs()));
    }

    #[test]
    fn conformal_linear_factor_agrees_to_1e5() {
        let disk = model_from_spec("disk-bundle").unwrap();
        let cyl = surface_from_spec(&disk, "cylinder:0.55").unwrap();
        let factor = ConformalFactor::linear_x(0.1);
        for (u, v) in [(0.3, 0.2), (2.0, 0.7), (4.5, 0.5)] {
            let p = cyl.chart_point(&disk, u, v).unwrap();
            let (o, t) = conformal_check(&disk, &cyl, &factor, &p).unwrap();
            assert!((t - o).abs() <= 1e-5 * o.abs().max(1e-6), "dev {} vs {}", o, t);
        }
    }

    #[test]
    fn conformal_invariance_random_sweep() {
        let disk = model_from_spec("disk-bundle").unwrap();
        let cyl = surface_from_spec(&disk, "cylinder:0.55").unwrap();
        let dev = conformal_invariance_sweep(&disk, &cyl, 20, 41).unwrap();
        assert!(dev < 1e-4, "cylinder sweep deviation {dev:.3e}");

        let rossi = model_from_spec("rossi:0.3").unwrap();
        let slice = surface_from_spec(&rossi, "rossi-sigma:0.6").unwrap();
        let dev = conformal_invariance_sweep(&rossi, &slice, 20, 42).unwrap();
        assert!(dev < 1e-4, "slice sweep deviation {dev:.3e}");
    }

    #[test]
    fn conformal_rejects_nonpositive_factor() {
        let disk = model_from_spec("disk-bundle").unwrap();
        let cyl = surface_from_spec(&disk, "cylinder:0.55").unwrap();
        let p = cyl.chart_point(&disk, 0.4, 0.5).unwrap();
        let bad = ConformalFactor {
            label: "bad".into(),
            lambda: Box::new(|_| -1.0),
            grad: Box::new(|_| [0.0; 3]),
            hess: Box::new(|_| [[0.0; 3]; 3]),
        };
        assert!(matches!(
            conformal_check(&disk, &cyl, &bad, &p),
            Err(Error::InvalidParameter { .. })
        ));
    }
}
