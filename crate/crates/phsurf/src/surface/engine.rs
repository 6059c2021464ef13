//! Parameter-space evaluation engine shared by every surface operation.
//!
//! Both representations are reduced to the same picture: a map from a
//! parameter rectangle into the chart, with tangents either analytic or by
//! finite differences of the map. Level sets get a local graph over the
//! steepest chart axis, anchored at the query point, so the same stencil
//! machinery serves both. All tangential derivatives are one-dimensional
//! 5-point stencils along straight lines in parameter space; near a
//! non-periodic edge the stencil shifts rather than shrinks, so the order
//! stays four everywhere that a stencil fits at all.

use num_complex::Complex64;

use crate::chart::{ChartPoint, Frame, TangentVector};
use crate::error::{Error, Result};
use crate::models::ModelGeometry;
use crate::num::{chart_step, solve3};

use super::{Direction, FramePointData, GradField, ScalarField, SurfacePatch, SurfaceRep};

/// Step used for finite differences of an immersion map without an
/// analytic jacobian. The map is smooth on the chart scale, so a fixed
/// moderate step beats a tiny one.
const MAP_FD_STEP: f64 = 1e-3;

/// Half-width of the synthetic parameter rectangle of a local graph.
const GRAPH_SPAN: f64 = 0.5;

/// Relative tolerance on the tangency defect of a requested direction.
const TANGENCY_TOL: f64 = 1e-6;

/// Relative tolerance on the least-squares defect of the alpha solve.
const ALPHA_RESID_TOL: f64 = 1e-8;

/// First-derivative weights on five equispaced nodes, times 12h.
/// Row s differentiates at node index s; row 2 is the centered stencil.
const D1_COEF: [[f64; 5]; 5] = [
    [-25.0, 48.0, -36.0, 16.0, -3.0],
    [-3.0, -10.0, 18.0, -6.0, 1.0],
    [1.0, -8.0, 0.0, 8.0, -1.0],
    [-1.0, 6.0, -18.0, 10.0, 3.0],
    [3.0, -16.0, 36.0, -48.0, 25.0],
];

pub(crate) type MapRef<'a> = &'a (dyn Fn(f64, f64) -> [f64; 3] + Sync);
pub(crate) type JacRef<'a> = &'a (dyn Fn(f64, f64) -> ([f64; 3], [f64; 3]) + Sync);

enum View<'a> {
    Immersed {
        map: MapRef<'a>,
        jac: Option<JacRef<'a>>,
        rect: [[f64; 2]; 2],
        periodic: [bool; 2],
    },
    /// Local graph of a level set over chart axis `axes[2]`, parameters
    /// running along axes `axes[0]`, `axes[1]`, anchored at `base`.
    Graph {
        u_fn: &'a ScalarField,
        grad_fn: &'a GradField,
        base: ChartPoint,
        axes: [usize; 3],
    },
}

/// One evaluated surface node: chart point, parameter tangents, adapted
/// frame components and the derivation function value.
pub(crate) struct Node {
    pub p: ChartPoint,
    pub fu: TangentVector,
    pub fv: TangentVector,
    pub frame: Frame,
    /// e1 = a X + b Y with a^2 + b^2 = 1 at non-singular nodes.
    pub a: f64,
    pub b: f64,
    pub singular: bool,
    /// NaN at singular nodes.
    pub alpha: f64,
}

/// A 5-node differentiation stencil along a parameter line.
pub(crate) struct StencilLine {
    pub pts: [(f64, f64); 5],
    pub w: [f64; 5],
    /// Index of the evaluation node within the stencil.
    pub s: usize,
}

pub(crate) struct Engine<'a> {
    pub model: &'a ModelGeometry,
    view: View<'a>,
    /// Parameter-space stencil step.
    pub h: f64,
    /// Singularity threshold on `sigma`.
    pub eps: f64,
}

impl<'a> Engine<'a> {
    /// Engine over the full parameter rectangle of an immersion patch.
    pub fn for_patch(model: &'a ModelGeometry, patch: &'a SurfacePatch) -> Result<Engine<'a>> {
        match &patch.rep {
            SurfaceRep::Immersion { map, jac, rect, periodic } => Ok(Engine {
                model,
                view: View::Immersed {
                    map: &**map,
                    jac: jac.as_ref().map(|j| &**j as JacRef<'a>),
                    rect: *rect,
                    periodic: *periodic,
                },
                h: patch.param_step,
                eps: patch.singular_threshold,
            }),
            SurfaceRep::LevelSet { .. } => Err(Error::InvalidParameter {
                what: "parameter-grid evaluation requires an immersion patch".into(),
            }),
        }
    }

    /// Engine over a raw parameter map, for internally built deformed
    /// surfaces (finite-difference tangents only).
    pub fn from_map(
        model: &'a ModelGeometry,
        map: MapRef<'a>,
        rect: [[f64; 2]; 2],
        periodic: [bool; 2],
        h: f64,
        eps: f64,
    ) -> Engine<'a> {
        Engine { model, view: View::Immersed { map, jac: None, rect, periodic }, h, eps }
    }

    /// Engine anchored at a chart point, together with the parameters of
    /// that point. Level sets anchor a local graph at `p`; immersions
    /// invert the map.
    pub fn at_point(
        model: &'a ModelGeometry,
        patch: &'a SurfacePatch,
        p: &ChartPoint,
    ) -> Result<(Engine<'a>, f64, f64)> {
        if !model.contains(p) {
            return Err(Error::OutOfChart { model: model.name().into(), coords: p.coords });
        }
        match &patch.rep {
            SurfaceRep::LevelSet { u, grad_u } => {
                let val = u(p);
                if val.abs() >= 1e-10 {
                    return Err(Error::NotOnSurface { residual: val.abs() });
                }
                let g = grad_u(p);
                let mut k = 0;
                for ax in 1..3 {
                    if g[ax].abs() > g[k].abs() {
                        k = ax;
                    }
                }
                if g[k].abs() < 1e-12 {
                    return Err(Error::SingularPoint {
                        detail: "defining function has vanishing chart gradient".into(),
                    });
                }
                let axes = match k {
                    0 => [1, 2, 0],
                    1 => [0, 2, 1],
                    _ => [0, 1, 2],
                };
                let eng = Engine {
                    model,
                    view: View::Graph { u_fn: u, grad_fn: grad_u, base: *p, axes },
                    h: patch.param_step,
                    eps: patch.singular_threshold,
                };
                Ok((eng, 0.0, 0.0))
            }
            SurfaceRep::Immersion { .. } => {
                let eng = Engine::for_patch(model, patch)?;
                let (u, v) = eng.locate(p)?;
                Ok((eng, u, v))
            }
        }
    }

    fn rect(&self) -> [[f64; 2]; 2] {
        match &self.view {
            View::Immersed { rect, .. } => *rect,
            View::Graph { .. } => [[-GRAPH_SPAN, GRAPH_SPAN], [-GRAPH_SPAN, GRAPH_SPAN]],
        }
    }

    fn periodic(&self) -> [bool; 2] {
        match &self.view {
            View::Immersed { periodic, .. } => *periodic,
            View::Graph { .. } => [false, false],
        }
    }

    pub(crate) fn immersion_rect(&self) -> Option<[[f64; 2]; 2]> {
        match &self.view {
            View::Immersed { rect, .. } => Some(*rect),
            View::Graph { .. } => None,
        }
    }

    pub(crate) fn immersion_periodic(&self) -> [bool; 2] {
        self.periodic()
    }

    /// Chart point of parameters (u, v), validated against the model domain.
    pub fn point(&self, u: f64, v: f64) -> Result<ChartPoint> {
        let p = self.raw_point(u, v)?;
        if !p.coords.iter().all(|c| c.is_finite()) {
            return Err(Error::Numeric { what: "surface map produced non-finite coordinates".into() });
        }
        if !self.model.contains(&p) {
            return Err(Error::OutOfChart { model: self.model.name().into(), coords: p.coords });
        }
        Ok(p)
    }

    fn raw_point(&self, u: f64, v: f64) -> Result<ChartPoint> {
        match &self.view {
            View::Immersed { map, .. } => Ok(ChartPoint::new(map(u, v))),
            View::Graph { u_fn, grad_fn, base, axes } => {
                let [i, j, k] = *axes;
                let mut c = base.coords;
                c[i] += u;
                c[j] += v;
                let mut w = 0.0;
                for _ in 0..60 {
                    let mut cc = c;
                    cc[k] += w;
                    let q = ChartPoint::new(cc);
                    let val = u_fn(&q);
                    let gk = grad_fn(&q)[k];
                    if gk.abs() < 1e-13 {
                        return Err(Error::Numeric {
                            what: "local graph axis degenerated during solve".into(),
                        });
                    }
                    let step = val / gk;
                    w -= step;
                    if step.abs() <= 1e-14 * (1.0 + w.abs()) {
                        c[k] += w;
                        return Ok(ChartPoint::new(c));
                    }
                }
                Err(Error::Numeric { what: "local graph solve did not converge".into() })
            }
        }
    }

    /// Chart point plus parameter tangents F_u, F_v.
    pub fn tangents(&self, u: f64, v: f64) -> Result<(ChartPoint, TangentVector, TangentVector)> {
        let p = self.point(u, v)?;
        match &self.view {
            View::Immersed { map, jac, .. } => {
                if let Some(j) = jac {
                    let (cu, cv) = j(u, v);
                    return Ok((p, TangentVector::new(p, cu), TangentVector::new(p, cv)));
                }
                let h = MAP_FD_STEP;
                let eval = |du: f64, dv: f64| map(u + du, v + dv);
                let (am2, am1, ap1, ap2) =
                    (eval(-2.0 * h, 0.0), eval(-h, 0.0), eval(h, 0.0), eval(2.0 * h, 0.0));
                let (bm2, bm1, bp1, bp2) =
                    (eval(0.0, -2.0 * h), eval(0.0, -h), eval(0.0, h), eval(0.0, 2.0 * h));
                let mut cu = [0.0; 3];
                let mut cv = [0.0; 3];
                for ax in 0..3 {
                    cu[ax] = (am2[ax] - 8.0 * am1[ax] + 8.0 * ap1[ax] - ap2[ax]) / (12.0 * h);
                    cv[ax] = (bm2[ax] - 8.0 * bm1[ax] + 8.0 * bp1[ax] - bp2[ax]) / (12.0 * h);
                }
                Ok((p, TangentVector::new(p, cu), TangentVector::new(p, cv)))
            }
            View::Graph { grad_fn, axes, .. } => {
                let [i, j, k] = *axes;
                let g = grad_fn(&p);
                if g[k].abs() < 1e-13 {
                    return Err(Error::Numeric {
                        what: "local graph axis degenerated at a stencil node".into(),
                    });
                }
                let mut cu = [0.0; 3];
                let mut cv = [0.0; 3];
                cu[i] = 1.0;
                cu[k] = -g[i] / g[k];
                cv[j] = 1.0;
                cv[k] = -g[j] / g[k];
                Ok((p, TangentVector::new(p, cu), TangentVector::new(p, cv)))
            }
        }
    }

    /// Full node evaluation: adapted-frame components and alpha.
    ///
    /// Orientation: immersions orient e1 so that (theta wedge e^1)(F_u, F_v)
    /// is positive; level sets orient by the subgradient of the defining
    /// function. Both are smooth along any stencil.
    pub fn node(&self, u: f64, v: f64) -> Result<Node> {
        let (p, fu, fv) = self.tangents(u, v)?;
        let frame = self.model.frame_at(&p);
        let theta = self.model.theta_at(&p);

        let (ar, br, sigma);
        match &self.view {
            View::Immersed { .. } => {
                let nu = euclid(fu.comps);
                let nv = euclid(fv.comps);
                if nu < 1e-13 || nv < 1e-13 {
                    return Err(Error::Numeric { what: "degenerate parameter tangent".into() });
                }
                let eu = fu.scale(1.0 / nu);
                let ev = fv.scale(1.0 / nv);
                let cand = eu.scale(-theta.pair(&ev)).add(&ev.scale(theta.pair(&eu)));
                let c = frame.decompose(&cand);
                ar = c[0];
                br = c[1];
                sigma = (c[0] * c[0] + c[1] * c[1]).sqrt();
            }
            View::Graph { grad_fn, .. } => {
                let g = grad_fn(&p);
                let xu = dot(g, frame.x.comps);
                let yu = dot(g, frame.y.comps);
                ar = yu;
                br = -xu;
                sigma = (xu * xu + yu * yu).sqrt();
            }
        }

        let singular = sigma < self.eps;
        let (a, b) = if sigma > 0.0 { (ar / sigma, br / sigma) } else { (0.0, 0.0) };

        let mut alpha = f64::NAN;
        if !singular {
            match &self.view {
                View::Graph { u_fn: _, grad_fn, .. } => {
                    let g = grad_fn(&p);
                    let tu = dot(g, frame.t.comps);
                    alpha = -tu / sigma;
                }
                View::Immersed { .. } => {
                    let e2 = frame.compose([-b, a, 0.0]);
                    let c = solve3([fu.comps, fv.comps, e2.comps], frame.t.comps)?;
                    let mut resid = 0.0;
                    for ax in 0..3 {
                        let r = c[0] * fu.comps[ax] + c[1] * fv.comps[ax] + c[2] * e2.comps[ax]
                            - frame.t.comps[ax];
                        resid += r * r;
                    }
                    let scale = 1.0 + euclid(frame.t.comps);
                    if resid.sqrt() / scale > ALPHA_RESID_TOL {
                        return Err(Error::Numeric {
                            what: format!(
                                "tangency solve for alpha left residual {:.3e}",
                                resid.sqrt() / scale
                            ),
                        });
                    }
                    alpha = -c[2];
                }
            }
        }

        Ok(Node { p, fu, fv, frame, a, b, singular, alpha })
    }

    /// e1 as a chart tangent vector at a non-singular node.
    pub fn e1_chart(&self, n: &Node) -> TangentVector {
        n.frame.compose([n.a, n.b, 0.0])
    }

    /// e2 = J e1 as a chart tangent vector.
    pub fn e2_chart(&self, n: &Node) -> TangentVector {
        n.frame.compose([-n.b, n.a, 0.0])
    }

    /// V = T + alpha e2, the tangential complement of e1.
    pub fn v_chart(&self, n: &Node) -> TangentVector {
        self.e2_chart(n).scale(n.alpha).add(&n.frame.t)
    }

    /// Decompose a tangent direction into parameter components; errors if
    /// the direction fails to be tangent to the surface.
    pub fn param_direction(&self, n: &Node, dir: &TangentVector) -> Result<(f64, f64)> {
        let cr = cross(n.fu.comps, n.fv.comps);
        let ncr = euclid(cr);
        if ncr < 1e-13 {
            return Err(Error::Numeric { what: "parameter tangents are linearly dependent".into() });
        }
        let c = solve3([n.fu.comps, n.fv.comps, cr], dir.comps)?;
        let ndir = euclid(dir.comps);
        let defect = (c[2] * ncr).abs() / (ndir + 1e-300);
        if defect > TANGENCY_TOL {
            return Err(Error::Numeric {
                what: format!("direction not tangent (defect {:.3e})", defect),
            });
        }
        Ok((c[0], c[1]))
    }

    /// Stencil along the parameter line through (u, v) with velocity
    /// (du, dv), shifted as needed to stay inside non-periodic edges.
    pub fn stencil_line(&self, u: f64, v: f64, du: f64, dv: f64) -> Result<StencilLine> {
        if (du * du + dv * dv).sqrt() < 1e-12 {
            return Err(Error::Numeric { what: "zero direction for tangential stencil".into() });
        }
        let rect = self.rect();
        let periodic = self.periodic();
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        // An axis component that is pure roundoff (V on a ruled patch has
        // du ~ 1e-17) must not pin the stencil to the boundary.
        let dnorm = du.abs() + dv.abs();
        for (axis, (x, d)) in [(0usize, (u, du)), (1usize, (v, dv))] {
            if periodic[axis] || d.abs() <= 1e-9 * dnorm {
                continue;
            }
            let t0 = (rect[axis][0] - x) / d;
            let t1 = (rect[axis][1] - x) / d;
            lo = lo.max(t0.min(t1));
            hi = hi.min(t0.max(t1));
        }
        // Near a rectangle corner the admissible interval can be much
        // shorter than 4h (the direction may be nearly parallel to one
        // edge); halve the step until a shifted stencil fits.
        let mut h = self.h;
        for _ in 0..7 {
            for s in [2usize, 1, 3, 0, 4] {
                let tmin = -(s as f64) * h;
                let tmax = (4 - s) as f64 * h;
                if tmin >= lo - 1e-12 && tmax <= hi + 1e-12 {
                    let mut pts = [(0.0, 0.0); 5];
                    let mut w = [0.0; 5];
                    for (j, (pt, wj)) in pts.iter_mut().zip(w.iter_mut()).enumerate() {
                        let t = (j as f64 - s as f64) * h;
                        *pt = (u + t * du, v + t * dv);
                        *wj = D1_COEF[s][j] / (12.0 * h);
                    }
                    return Ok(StencilLine { pts, w, s });
                }
            }
            h *= 0.5;
        }
        Err(Error::Numeric {
            what: "derivative stencil does not fit inside the parameter rectangle".into(),
        })
    }

    /// d/dtau of `field` along the parameter line (u, v) + tau (du, dv).
    pub fn d_along(
        &self,
        u: f64,
        v: f64,
        du: f64,
        dv: f64,
        field: &dyn Fn(f64, f64) -> Result<f64>,
    ) -> Result<f64> {
        let line = self.stencil_line(u, v, du, dv)?;
        let mut acc = 0.0;
        for j in 0..5 {
            acc += line.w[j] * field(line.pts[j].0, line.pts[j].1)?;
        }
        Ok(acc)
    }

    /// Tangential derivative of a parameter-space field along e1 or V.
    pub fn d_dir(
        &self,
        u: f64,
        v: f64,
        which: Direction,
        field: &dyn Fn(f64, f64) -> Result<f64>,
    ) -> Result<f64> {
        let n = self.node(u, v)?;
        if n.singular {
            return Err(Error::SingularPoint {
                detail: "tangential derivative at a singular node".into(),
            });
        }
        let dir = match which {
            Direction::E1 => self.e1_chart(&n),
            Direction::V => self.v_chart(&n),
        };
        let (du, dv) = self.param_direction(&n, &dir)?;
        self.d_along(u, v, du, dv, field)
    }

    /// Alpha at a node, erroring on singular nodes. The standard field fed
    /// to stencils.
    pub fn alpha_at(&self, u: f64, v: f64) -> Result<f64> {
        let n = self.node(u, v)?;
        if n.singular {
            return Err(Error::SingularPoint { detail: "alpha at a singular node".into() });
        }
        Ok(n.alpha)
    }

    /// p-mean curvature by the rotation-angle route together with the
    /// covariant cross-check value: (H_rot, H_cov).
    ///
    /// Both reuse one stencil of frame components along e1; the angle is
    /// unwrapped outward from the evaluation node.
    pub fn h_pair(&self, u: f64, v: f64) -> Result<(f64, f64)> {
        let n = self.node(u, v)?;
        if n.singular {
            return Err(Error::SingularPoint { detail: "mean curvature at a singular node".into() });
        }
        let e1 = self.e1_chart(&n);
        let (du, dv) = self.param_direction(&n, &e1)?;
        let line = self.stencil_line(u, v, du, dv)?;
        let mut aa = [0.0; 5];
        let mut bb = [0.0; 5];
        for j in 0..5 {
            let nj = self.node(line.pts[j].0, line.pts[j].1)?;
            if nj.singular {
                return Err(Error::SingularPoint {
                    detail: "singular node inside a curvature stencil".into(),
                });
            }
            aa[j] = nj.a;
            bb[j] = nj.b;
        }
        let mut phi = [0.0; 5];
        for j in 0..5 {
            phi[j] = bb[j].atan2(aa[j]);
        }
        let tau = std::f64::consts::TAU;
        for j in (line.s + 1)..5 {
            phi[j] -= tau * ((phi[j] - phi[j - 1]) / tau).round();
        }
        for j in (0..line.s).rev() {
            phi[j] -= tau * ((phi[j] - phi[j + 1]) / tau).round();
        }
        let mut e1phi = 0.0;
        let mut e1a = 0.0;
        let mut e1b = 0.0;
        for j in 0..5 {
            e1phi += line.w[j] * phi[j];
            e1a += line.w[j] * aa[j];
            e1b += line.w[j] * bb[j];
        }
        let om = self.model.omega_at(&n.p).pair(&e1);
        Ok((e1phi + om, n.a * e1b - n.b * e1a + om))
    }

    pub fn h(&self, u: f64, v: f64) -> Result<f64> {
        Ok(self.h_pair(u, v)?.0)
    }

    /// H_cr = e1(alpha) + alpha^2/2 - Im A11 + W/4 + H^2/6.
    pub fn hcr(&self, u: f64, v: f64) -> Result<f64> {
        let n = self.node(u, v)?;
        if n.singular {
            return Err(Error::SingularPoint { detail: "H_cr at a singular node".into() });
        }
        let e1a = self.d_dir(u, v, Direction::E1, &|x, y| self.alpha_at(x, y))?;
        let (h, _) = self.h_pair(u, v)?;
        let w = self.model.webster_w(&n.p);
        let ima = self.model.torsion_a11(&n.p).im;
        Ok(e1a + 0.5 * n.alpha * n.alpha - ima + 0.25 * w + h * h / 6.0)
    }

    /// (theta wedge e^1)(F_u, F_v); positive for immersion orientation.
    pub fn area2(&self, u: f64, v: f64) -> Result<f64> {
        let n = self.node(u, v)?;
        if n.singular {
            return Ok(0.0);
        }
        let theta = self.model.theta_at(&n.p);
        let cu = n.frame.decompose(&n.fu);
        let cv = n.frame.decompose(&n.fv);
        let e1u = cu[0] * n.a + cu[1] * n.b;
        let e1v = cv[0] * n.a + cv[1] * n.b;
        Ok(theta.pair(&n.fu) * e1v - theta.pair(&n.fv) * e1u)
    }

    /// The complex combination W^{,1}/6 + (2i/3) (A^11)_{,1} evaluated in
    /// the surface frame: Z1 = (e1 - i e2)/2 acts by ambient chart
    /// differentiation, and the covariant correction uses omega(Z1).
    pub fn x6(&self, u: f64, v: f64) -> Result<Complex64> {
        let n = self.node(u, v)?;
        if n.singular {
            return Err(Error::SingularPoint { detail: "density term at a singular node".into() });
        }
        let e1 = self.e1_chart(&n);
        let e2 = self.e2_chart(&n);
        let model = self.model;

        let amb = |f: &dyn Fn(&ChartPoint) -> f64, dir: [f64; 3]| -> f64 {
            let scale = n.p.coords.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            let h = chart_step(scale);
            let ev = |s: f64| {
                f(&ChartPoint::new([
                    n.p.coords[0] + s * dir[0],
                    n.p.coords[1] + s * dir[1],
                    n.p.coords[2] + s * dir[2],
                ]))
            };
            (ev(-2.0 * h) - 8.0 * ev(-h) + 8.0 * ev(h) - ev(2.0 * h)) / (12.0 * h)
        };

        let w_field = |q: &ChartPoint| model.webster_w(q);
        let re_field = |q: &ChartPoint| model.torsion_a11(q).conj().re;
        let im_field = |q: &ChartPoint| model.torsion_a11(q).conj().im;

        let z1 = |f: &dyn Fn(&ChartPoint) -> f64| {
            Complex64::new(amb(f, e1.comps), 0.0) - Complex64::new(0.0, amb(f, e2.comps))
        };

        let z1w = z1(&w_field) * 0.5;
        let z1abar = (z1(&re_field) + Complex64::new(0.0, 1.0) * z1(&im_field)) * 0.5;

        let om = self.model.omega_at(&n.p);
        let om_z1 = Complex64::new(om.pair(&e1), -om.pair(&e2)) * 0.5;
        let abar = self.model.torsion_a11(&n.p).conj();
        let cov = z1abar + Complex64::new(0.0, 2.0) * om_z1 * abar;

        Ok(z1w / 6.0 + Complex64::new(0.0, 2.0 / 3.0) * cov)
    }

    /// All pointwise quantities in one report. Singular nodes carry NaN
    /// scalars and zero vectors rather than an error so that grid sweeps
    /// can flag and skip them.
    pub fn data(&self, u: f64, v: f64) -> Result<FramePointData> {
        let n = self.node(u, v)?;
        if n.singular {
            return Ok(FramePointData {
                p: n.p,
                e1: TangentVector::new(n.p, [0.0; 3]),
                e2: TangentVector::new(n.p, [0.0; 3]),
                alpha: f64::NAN,
                h: f64::NAN,
                h_cr: f64::NAN,
                area2form: 0.0,
                singular: true,
            });
        }
        let (h, _) = self.h_pair(u, v)?;
        let h_cr = self.hcr(u, v)?;
        let area2form = self.area2(u, v)?;
        Ok(FramePointData {
            p: n.p,
            e1: self.e1_chart(&n),
            e2: self.e2_chart(&n),
            alpha: n.alpha,
            h,
            h_cr,
            area2form,
            singular: false,
        })
    }

    /// Invert an immersion: parameters of a chart point on the surface.
    pub fn locate(&self, p: &ChartPoint) -> Result<(f64, f64)> {
        let rect = self.rect();
        let periodic = self.periodic();
        let scale = 1.0 + p.coords.iter().fold(0.0f64, |m, c| m.max(c.abs()));

        let diff = |q: [f64; 3]| -> [f64; 3] {
            let mut d = [q[0] - p.coords[0], q[1] - p.coords[1], q[2] - p.coords[2]];
            for (ax, dk) in d.iter_mut().enumerate() {
                if let Some(per) = self.model.period(ax) {
                    *dk -= per * (*dk / per).round();
                }
            }
            d
        };

        let map = match &self.view {
            View::Immersed { map, .. } => map,
            View::Graph { .. } => {
                return Err(Error::InvalidParameter {
                    what: "locate applies to immersion patches only".into(),
                })
            }
        };

        // Coarse grid seed, then Gauss-Newton on the wrapped residual.
        let nscan = 48;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for iu in 0..nscan {
            let u = rect[0][0]
                + (iu as f64 + 0.5) / nscan as f64 * (rect[0][1] - rect[0][0]);
            for iv in 0..nscan {
                let v = rect[1][0]
                    + (iv as f64 + 0.5) / nscan as f64 * (rect[1][1] - rect[1][0]);
                let r = diff(map(u, v));
                let n2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
                if n2 < best.0 {
                    best = (n2, u, v);
                }
            }
        }
        let (mut u, mut v) = (best.1, best.2);
        for _ in 0..60 {
            let (_, fu, fv) = self.tangents(u, v)?;
            let r = diff(map(u, v));
            let rn = euclid(r);
            if rn <= 1e-12 * scale {
                break;
            }
            let m11 = dot(fu.comps, fu.comps);
            let m12 = dot(fu.comps, fv.comps);
            let m22 = dot(fv.comps, fv.comps);
            let b1 = -dot(fu.comps, r);
            let b2 = -dot(fv.comps, r);
            let det = m11 * m22 - m12 * m12;
            if det.abs() < 1e-300 {
                return Err(Error::Numeric { what: "degenerate normal equations in locate".into() });
            }
            let du = (b1 * m22 - b2 * m12) / det;
            let dv = (b2 * m11 - b1 * m12) / det;
            u += du;
            v += dv;
            for (axis, x) in [(0usize, &mut u), (1usize, &mut v)] {
                let span = rect[axis][1] - rect[axis][0];
                if periodic[axis] {
                    *x = rect[axis][0] + (*x - rect[axis][0]).rem_euclid(span);
                } else {
                    *x = x.clamp(rect[axis][0], rect[axis][1]);
                }
            }
            if du.abs() + dv.abs() < 1e-15 {
                break;
            }
        }
        let resid = euclid(diff(map(u, v)));
        if resid > 1e-8 * scale {
            return Err(Error::NotOnSurface { residual: resid });
        }
        Ok((u, v))
    }
}

fn euclid(c: [f64; 3]) -> f64 {
    (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
