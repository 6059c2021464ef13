//! Surfaces inside a model chart and their adapted geometry: the Legendrian
//! frame (e1, e2 = J e1), the derivation function alpha, the p-mean
//! curvature H, and the curvature combination
//!
//!   H_cr = e1(alpha) + alpha^2/2 - Im A11 + W/4 + H^2/6,
//!
//! all evaluated pointwise with intrinsic (in-surface) differentiation.
//!
//! A surface is either a level set { u = 0 } or a parameterized immersion.
//! Level sets orient e2 along the sub-gradient of u and take e1 = -J e2;
//! immersions orient e1 by the parameter orientation of (F_u, F_v). The
//! built-in families below reproduce the standard examples in each model.

mod engine;

pub(crate) use engine::Engine;

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use num_complex::Complex64;

use crate::chart::{ChartPoint, TangentVector};
use crate::error::{Error, Result};
use crate::models::{ModelGeometry, ModelKind};

/// Scalar chart field, used as a level-set defining function.
pub type ScalarField = Box<dyn Fn(&ChartPoint) -> f64 + Send + Sync>;
/// Chart gradient of a defining function.
pub type GradField = Box<dyn Fn(&ChartPoint) -> [f64; 3] + Send + Sync>;
/// Parameterized immersion into the chart.
pub type MapFn = Box<dyn Fn(f64, f64) -> [f64; 3] + Send + Sync>;
/// Analytic parameter tangents (F_u, F_v) of an immersion.
pub type JacFn = Box<dyn Fn(f64, f64) -> ([f64; 3], [f64; 3]) + Send + Sync>;

const DEFAULT_SINGULAR_THRESHOLD: f64 = 1e-6;

/// Default stencil step for surfaces whose invariants vary along the patch.
pub(crate) const DEFAULT_PARAM_STEP: f64 = 2e-3;

/// Step for patches whose frame scalars are constant along every stencil
/// line (planes, cylinders, slice tori): truncation vanishes identically,
/// so a wide step only suppresses roundoff amplification.
const WIDE_PARAM_STEP: f64 = 5e-2;

/// How a surface patch is presented to the engine.
pub enum SurfaceRep {
    /// Zero set of `u` with its chart gradient.
    LevelSet { u: ScalarField, grad_u: GradField },
    /// Immersion over a parameter rectangle. `periodic` marks parameter
    /// axes whose span is a full period of the map.
    Immersion {
        map: MapFn,
        jac: Option<JacFn>,
        rect: [[f64; 2]; 2],
        periodic: [bool; 2],
    },
}

/// A surface patch inside one model chart.
pub struct SurfacePatch {
    rep: SurfaceRep,
    singular_threshold: f64,
    param_step: f64,
    name: String,
}

/// Pointwise report of the adapted geometry at one surface point.
/// At singular points the scalar entries are NaN and the vectors zero.
#[derive(Clone, Debug, serde::Serialize)]
pub struct FramePointData {
    pub p: ChartPoint,
    pub e1: TangentVector,
    pub e2: TangentVector,
    pub alpha: f64,
    pub h: f64,
    pub h_cr: f64,
    pub area2form: f64,
    pub singular: bool,
}

/// Tangential differentiation directions: e1 or V = T + alpha e2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    E1,
    V,
}

impl SurfacePatch {
    pub fn level_set(name: &str, u: ScalarField, grad_u: GradField) -> Self {
        SurfacePatch {
            rep: SurfaceRep::LevelSet { u, grad_u },
            singular_threshold: DEFAULT_SINGULAR_THRESHOLD,
            param_step: DEFAULT_PARAM_STEP,
            name: name.into(),
        }
    }

    pub fn immersion(
        name: &str,
        map: MapFn,
        jac: Option<JacFn>,
        rect: [[f64; 2]; 2],
        periodic: [bool; 2],
    ) -> Self {
        SurfacePatch {
            rep: SurfaceRep::Immersion { map, jac, rect, periodic },
            singular_threshold: DEFAULT_SINGULAR_THRESHOLD,
            param_step: DEFAULT_PARAM_STEP,
            name: name.into(),
        }
    }

    pub fn with_param_step(mut self, h: f64) -> Self {
        assert!(h > 0.0, "parameter step must be positive");
        self.param_step = h;
        self
    }

    pub fn with_singular_threshold(mut self, eps: f64) -> Self {
        assert!(eps > 0.0, "singular threshold must be positive");
        self.singular_threshold = eps;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn param_step(&self) -> f64 {
        self.param_step
    }

    pub fn singular_threshold(&self) -> f64 {
        self.singular_threshold
    }

    pub fn is_immersion(&self) -> bool {
        matches!(self.rep, SurfaceRep::Immersion { .. })
    }

    /// Parameter rectangle of an immersion patch.
    pub fn rect(&self) -> Option<[[f64; 2]; 2]> {
        match &self.rep {
            SurfaceRep::Immersion { rect, .. } => Some(*rect),
            SurfaceRep::LevelSet { .. } => None,
        }
    }

    /// Periodicity flags of the two parameter axes.
    pub fn periodic_axes(&self) -> Option<[bool; 2]> {
        match &self.rep {
            SurfaceRep::Immersion { periodic, .. } => Some(*periodic),
            SurfaceRep::LevelSet { .. } => None,
        }
    }

    /// Chart point of immersion parameters, normalized and validated.
    pub fn chart_point(&self, model: &ModelGeometry, u: f64, v: f64) -> Result<ChartPoint> {
        let eng = Engine::for_patch(model, self)?;
        let p = eng.point(u, v)?;
        model.point(p.coords)
    }

    /// Cell-centered parameter grid, row-major in v then u.
    pub fn midpoint_grid(&self, nu: usize, nv: usize) -> Result<Vec<(f64, f64)>> {
        let rect = self.rect().ok_or_else(|| Error::InvalidParameter {
            what: "parameter grid requires an immersion patch".into(),
        })?;
        if nu == 0 || nv == 0 {
            return Err(Error::InvalidParameter { what: "empty parameter grid".into() });
        }
        let mut out = Vec::with_capacity(nu * nv);
        for iu in 0..nu {
            let u = rect[0][0] + (iu as f64 + 0.5) / nu as f64 * (rect[0][1] - rect[0][0]);
            for iv in 0..nv {
                let v = rect[1][0] + (iv as f64 + 0.5) / nv as f64 * (rect[1][1] - rect[1][0]);
                out.push((u, v));
            }
        }
        Ok(out)
    }
}

/// Adapted frame at a surface point: (e1, e2, singular flag).
pub fn legendrian_frame(
    model: &ModelGeometry,
    surface: &SurfacePatch,
    p: &ChartPoint,
) -> Result<(TangentVector, TangentVector, bool)> {
    let d = frame_point_data(model, surface, p)?;
    Ok((d.e1, d.e2, d.singular))
}

/// The derivation function alpha, defined by (T + alpha e2) tangent to the
/// surface.
pub fn derivation_alpha(model: &ModelGeometry, surface: &SurfacePatch, p: &ChartPoint) -> Result<f64> {
    let (eng, u, v) = Engine::at_point(model, surface, p)?;
    eng.alpha_at(u, v)
}

/// p-mean curvature by the rotation-angle route H = e1(phi) + omega(e1).
pub fn p_mean_curvature(model: &ModelGeometry, surface: &SurfacePatch, p: &ChartPoint) -> Result<f64> {
    let (eng, u, v) = Engine::at_point(model, surface, p)?;
    eng.h(u, v)
}

/// p-mean curvature by direct covariant differentiation of the frame
/// components; retained as a cross-check of the rotation-angle route.
pub fn p_mean_curvature_covariant(
    model: &ModelGeometry,
    surface: &SurfacePatch,
    p: &ChartPoint,
) -> Result<f64> {
    let (eng, u, v) = Engine::at_point(model, surface, p)?;
    Ok(eng.h_pair(u, v)?.1)
}

/// H_cr at a surface point.
pub fn h_cr(model: &ModelGeometry, surface: &SurfacePatch, p: &ChartPoint) -> Result<f64> {
    let (eng, u, v) = Engine::at_point(model, surface, p)?;
    eng.hcr(u, v)
}

/// Directional derivative of a scalar field along e1 or V = T + alpha e2,
/// differencing in surface parameters. Iterated application through a
/// closure yields second derivatives.
pub fn tangential_derivative(
    model: &ModelGeometry,
    surface: &SurfacePatch,
    p: &ChartPoint,
    direction: Direction,
    f: &(dyn Fn(&ChartPoint) -> f64 + Sync),
) -> Result<f64> {
    let (eng, u, v) = Engine::at_point(model, surface, p)?;
    eng.d_dir(u, v, direction, &|x, y| Ok(f(&eng.point(x, y)?)))
}

/// Full pointwise report at a surface point.
pub fn frame_point_data(
    model: &ModelGeometry,
    surface: &SurfacePatch,
    p: &ChartPoint,
) -> Result<FramePointData> {
    let (eng, u, v) = Engine::at_point(model, surface, p)?;
    eng.data(u, v)
}

/// The complex density term W^{,1}/6 + (2i/3)(A^11)_{,1} in the surface
/// frame. Vanishes on every model with constant Webster curvature and
/// constant torsion.
pub fn density_extras(
    model: &ModelGeometry,
    surface: &SurfacePatch,
    p: &ChartPoint,
) -> Result<Complex64> {
    let (eng, u, v) = Engine::at_point(model, surface, p)?;
    eng.x6(u, v)
}

/// Construct a named surface family instance:
/// `plane:a,b,c`, `cylinder:rho`, `graph-t2:c` (disk bundle),
/// `rossi-sigma:c` (Rossi sphere), `torus-slice:c` (circle/ellipse torus).
pub fn from_spec(model: &ModelGeometry, spec: &str) -> Result<SurfacePatch> {
    let (family, args) = spec.split_once(':').unwrap_or((spec, ""));
    let vals: Vec<f64> = if args.is_empty() {
        Vec::new()
    } else {
        args.split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| Error::InvalidParameter {
                    what: format!("bad numeric argument {s:?} in surface spec {spec:?}"),
                })
            })
            .collect::<Result<_>>()?
    };
    let want = |n: usize| -> Result<()> {
        if vals.len() == n {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                what: format!("surface family {family:?} expects {n} parameters, got {}", vals.len()),
            })
        }
    };
    let need_kind = |ok: bool, which: &str| -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::InapplicableModel {
                reason: format!("surface family {family:?} requires a {which} model, got {}", model.name()),
            })
        }
    };

    match family {
        "plane" => {
            want(3)?;
            need_kind(matches!(model.kind(), ModelKind::DiskBundle), "disk-bundle")?;
            let (a, b, c) = (vals[0], vals[1], vals[2]);
            let n2 = a * a + b * b;
            if n2 <= 0.0 {
                return Err(Error::InvalidParameter { what: "plane normal direction is zero".into() });
            }
            let cbar = c / n2.sqrt();
            if cbar * cbar >= 1.0 {
                return Err(Error::InvalidParameter { what: "plane chord misses the open disk".into() });
            }
            // Chord through p0 = c (a,b)/(a^2+b^2) along d = (-b,a)/|(a,b)|,
            // trimmed by a collar against the disk boundary.
            let half = (1.0 - cbar * cbar).sqrt() - 1e-3;
            if half <= 1e-2 {
                return Err(Error::InvalidParameter {
                    what: "plane chord is shorter than the boundary collar".into(),
                });
            }
            let p0 = [c * a / n2, c * b / n2];
            let d = [-b / n2.sqrt(), a / n2.sqrt()];
            let map: MapFn = Box::new(move |l, t| [p0[0] + l * d[0], p0[1] + l * d[1], t]);
            let jac: JacFn = Box::new(move |_, _| ([d[0], d[1], 0.0], [0.0, 0.0, 1.0]));
            Ok(
                SurfacePatch::immersion(spec, map, Some(jac), [[-half, half], [0.0, 1.0]], [false, false])
                    .with_param_step(WIDE_PARAM_STEP),
            )
        }
        "cylinder" => {
            want(1)?;
            need_kind(matches!(model.kind(), ModelKind::DiskBundle), "disk-bundle")?;
            let rho = vals[0];
            if !(1e-3..=0.999).contains(&rho) {
                return Err(Error::InvalidParameter {
                    what: "cylinder radius outside the open disk".into(),
                });
            }
            let map: MapFn = Box::new(move |psi, t| [rho * psi.cos(), rho * psi.sin(), t]);
            let jac: JacFn = Box::new(move |psi: f64, _| {
                ([-rho * psi.sin(), rho * psi.cos(), 0.0], [0.0, 0.0, 1.0])
            });
            Ok(
                SurfacePatch::immersion(spec, map, Some(jac), [[0.0, TAU], [0.0, 1.0]], [true, false])
                    .with_param_step(WIDE_PARAM_STEP),
            )
        }
        "graph-t2" => {
            want(1)?;
            need_kind(matches!(model.kind(), ModelKind::DiskBundle), "disk-bundle")?;
            let c = vals[0];
            if c <= 0.0 {
                return Err(Error::InvalidParameter { what: "graph level must be positive".into() });
            }
            let t0 = c.sqrt();
            let map: MapFn = Box::new(move |psi, r| [r * psi.cos(), r * psi.sin(), t0]);
            let jac: JacFn = Box::new(move |psi: f64, r: f64| {
                ([-r * psi.sin(), r * psi.cos(), 0.0], [psi.cos(), psi.sin(), 0.0])
            });
            Ok(SurfacePatch::immersion(
                spec,
                map,
                Some(jac),
                [[0.0, TAU], [0.1, 0.9]],
                [true, false],
            ))
        }
        "rossi-sigma" => {
            want(1)?;
            need_kind(matches!(model.kind(), ModelKind::Rossi { .. }), "Rossi-sphere")?;
            let c = vals[0];
            if !(1e-3..=0.999).contains(&c) {
                return Err(Error::InvalidParameter {
                    what: "slice radius outside the chart collar".into(),
                });
            }
            let map: MapFn = Box::new(move |p1, p2| [c, p1, p2]);
            let jac: JacFn = Box::new(|_, _| ([0.0, 1.0, 0.0], [0.0, 0.0, 1.0]));
            // On the symmetric slice every frame scalar is constant along
            // both stencil directions, so the wide step applies there.
            let step = if (c - FRAC_1_SQRT_2).abs() < 1e-9 { WIDE_PARAM_STEP } else { DEFAULT_PARAM_STEP };
            Ok(
                SurfacePatch::immersion(spec, map, Some(jac), [[0.0, TAU], [0.0, TAU]], [true, true])
                    .with_param_step(step),
            )
        }
        "torus-slice" => {
            want(1)?;
            need_kind(matches!(model.kind(), ModelKind::Torus { .. }), "torus")?;
            let c = vals[0];
            let map: MapFn = Box::new(move |u, v| [c, v, u]);
            let jac: JacFn = Box::new(|_, _| ([0.0, 0.0, 1.0], [0.0, 1.0, 0.0]));
            Ok(
                SurfacePatch::immersion(spec, map, Some(jac), [[0.0, TAU], [0.0, TAU]], [true, true])
                    .with_param_step(WIDE_PARAM_STEP),
            )
        }
        other => Err(Error::InvalidParameter { what: format!("unknown surface family {other:?}") }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disk() -> ModelGeometry {
        crate::models::from_spec("disk-bundle").unwrap()
    }

    #[test]
    fn plane_frame_matches_standard_frame() {
        let model = disk();
        let plane = from_spec(&model, "plane:0,1,0").unwrap();
        let p = ChartPoint::new([0.3, 0.0, 1.0]);
        let (e1, e2, singular) = legendrian_frame(&model, &plane, &p).unwrap();
        assert!(!singular);
        let fr = model.frame_at(&p);
        for ax in 0..3 {
            assert_abs_diff_eq!(e1.comps[ax], fr.x.comps[ax], epsilon = 1e-12);
            assert_abs_diff_eq!(e2.comps[ax], fr.y.comps[ax], epsilon = 1e-12);
        }
    }

    #[test]
    fn plane_scalars_match_closed_forms() {
        let model = disk();
        let (a, b, c) = (1.0_f64, 2.0_f64, 0.9_f64);
        let plane = from_spec(&model, &format!("plane:{a},{b},{c}")).unwrap();
        let cbar = c / (a * a + b * b).sqrt();
        for (l, t) in [(0.0, 0.5), (0.4, 0.1), (-0.7, 0.93)] {
            let p = plane.chart_point(&model, l, t).unwrap();
            assert_abs_diff_eq!(derivation_alpha(&model, &plane, &p).unwrap(), 0.0, epsilon = 1e-12);
            let h = p_mean_curvature(&model, &plane, &p).unwrap();
            assert_abs_diff_eq!(h, -cbar, epsilon = 1e-12);
            let hcov = p_mean_curvature_covariant(&model, &plane, &p).unwrap();
            assert_abs_diff_eq!(h, hcov, epsilon = 1e-9);
            let hcr = h_cr(&model, &plane, &p).unwrap();
            assert_abs_diff_eq!(hcr, cbar * cbar / 6.0 - 0.125, epsilon = 1e-12);
        }
    }

    #[test]
    fn cylinder_frame_and_scalars() {
        let model = disk();
        let rho = 0.55_f64;
        let cyl = from_spec(&model, &format!("cylinder:{rho}")).unwrap();
        let p = ChartPoint::new([rho, 0.0, 0.3]);
        let (e1, _, _) = legendrian_frame(&model, &cyl, &p).unwrap();
        let fr = model.frame_at(&p);
        for ax in 0..3 {
            assert_abs_diff_eq!(e1.comps[ax], -fr.y.comps[ax], epsilon = 1e-10);
        }
        let h_want = -(1.0 + rho * rho) / (2.0 * rho);
        for (psi, t) in [(0.0, 0.3), (2.1, 0.8), (4.4, 0.05)] {
            let q = cyl.chart_point(&model, psi, t).unwrap();
            assert_abs_diff_eq!(derivation_alpha(&model, &cyl, &q).unwrap(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(p_mean_curvature(&model, &cyl, &q).unwrap(), h_want, epsilon = 1e-10);
            let hcr_want = -0.125 + (1.0 + rho * rho).powi(2) / (24.0 * rho * rho);
            assert_abs_diff_eq!(h_cr(&model, &cyl, &q).unwrap(), hcr_want, epsilon = 1e-10);
        }
    }

    #[test]
    fn cylinder_level_set_agrees_with_immersion() {
        let model = disk();
        let rho = 0.55_f64;
        let imm = from_spec(&model, &format!("cylinder:{rho}")).unwrap();
        let ls = SurfacePatch::level_set(
            "cylinder-ls",
            Box::new(move |p: &ChartPoint| {
                p.coords[0] * p.coords[0] + p.coords[1] * p.coords[1] - rho * rho
            }),
            Box::new(|p: &ChartPoint| [2.0 * p.coords[0], 2.0 * p.coords[1], 0.0]),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let psi = rng.gen_range(0.0..TAU);
            let t = rng.gen_range(0.05..0.95);
            let p = imm.chart_point(&model, psi, t).unwrap();
            let ai = derivation_alpha(&model, &imm, &p).unwrap();
            let al = derivation_alpha(&model, &ls, &p).unwrap();
            assert!((ai - al).abs() < 1e-7, "alpha mismatch {ai} vs {al}");
            let hi = p_mean_curvature(&model, &imm, &p).unwrap();
            let hl = p_mean_curvature(&model, &ls, &p).unwrap();
            assert!((hi - hl).abs() < 1e-6, "H mismatch {hi} vs {hl}");
            let ci = h_cr(&model, &imm, &p).unwrap();
            let cl = h_cr(&model, &ls, &p).unwrap();
            assert!((ci - cl).abs() < 1e-6, "H_cr mismatch {ci} vs {cl}");
        }
    }

    #[test]
    fn graph_alpha_h_and_radial_v() {
        let model = disk();
        let graph = from_spec(&model, "graph-t2:1").unwrap();
        for (psi, r) in [(0.3, 0.2), (1.9, 0.45), (5.0, 0.85)] {
            let p = graph.chart_point(&model, psi, r).unwrap();
            assert_abs_diff_eq!(
                derivation_alpha(&model, &graph, &p).unwrap(),
                1.0 / (2.0 * r),
                epsilon = 1e-10
            );
            assert_abs_diff_eq!(p_mean_curvature(&model, &graph, &p).unwrap(), 0.0, epsilon = 1e-11);
            assert_abs_diff_eq!(
                h_cr(&model, &graph, &p).unwrap(),
                (r * r - 1.0) / (8.0 * r * r),
                epsilon = 5e-8
            );
            // V = T + alpha e2 is angular here, so radial functions are
            // constant along it.
            let radial = |q: &ChartPoint| q.coords[0] * q.coords[0] + q.coords[1] * q.coords[1];
            let dv = tangential_derivative(&model, &graph, &p, Direction::V, &radial).unwrap();
            assert_abs_diff_eq!(dv, 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn graph_level_set_twin_alpha_crosscheck() {
        let model = disk();
        let c = 1.0_f64;
        let imm = from_spec(&model, "graph-t2:1").unwrap();
        let ls = SurfacePatch::level_set(
            "graph-ls",
            Box::new(move |p: &ChartPoint| c - p.coords[2] * p.coords[2]),
            Box::new(|p: &ChartPoint| [0.0, 0.0, -2.0 * p.coords[2]]),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let psi = rng.gen_range(0.0..TAU);
            let r = rng.gen_range(0.15..0.85);
            let p = imm.chart_point(&model, psi, r).unwrap();
            let ai = derivation_alpha(&model, &imm, &p).unwrap();
            let al = derivation_alpha(&model, &ls, &p).unwrap();
            assert!((ai - al).abs() < 1e-7, "alpha cross-check {ai} vs {al}");
        }
    }

    #[test]
    fn torus_slice_circle_scalars() {
        let r = 2.0_f64;
        let model = crate::models::from_spec(&format!("torus-circle:{r}")).unwrap();
        let slice = from_spec(&model, "torus-slice:0.9").unwrap();
        for (u, v) in [(0.2, 1.0), (3.3, 4.9)] {
            let p = slice.chart_point(&model, u, v).unwrap();
            let (e1, _, _) = legendrian_frame(&model, &slice, &p).unwrap();
            let fr = model.frame_at(&p);
            for ax in 0..3 {
                assert_abs_diff_eq!(e1.comps[ax], fr.y.comps[ax], epsilon = 1e-10);
            }
            assert_abs_diff_eq!(derivation_alpha(&model, &slice, &p).unwrap(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(p_mean_curvature(&model, &slice, &p).unwrap(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(h_cr(&model, &slice, &p).unwrap(), 5.0 / (8.0 * r), epsilon = 1e-11);
        }
    }

    #[test]
    fn torus_slice_ellipse_hcr_endpoints() {
        let (a, b) = (2.0_f64, 1.0_f64);
        let model = crate::models::from_spec(&format!("torus-ellipse:{a},{b}")).unwrap();
        // Ends of the curvature extremes: s = 0 sits at the semi-major
        // vertex, s = quarter length at the semi-minor vertex.
        let s_quarter = crate::models::ellipse_arclength(a, b, std::f64::consts::FRAC_PI_2);
        for (c, want) in [
            (0.0, (8.0 * a * a - 3.0 * b * b) / (8.0 * a * b * b)),
            (s_quarter, (8.0 * b * b - 3.0 * a * a) / (8.0 * a * a * b)),
        ] {
            let slice = from_spec(&model, &format!("torus-slice:{c}")).unwrap();
            let p = slice.chart_point(&model, 0.7, 2.2).unwrap();
            let hcr = h_cr(&model, &slice, &p).unwrap();
            assert_abs_diff_eq!(hcr, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn torus_slice_density_extras_matches_model_closure() {
        let model = crate::models::from_spec("torus-ellipse:2,1").unwrap();
        for c in [0.3, 1.7, 4.0] {
            let slice = from_spec(&model, &format!("torus-slice:{c}")).unwrap();
            let p = slice.chart_point(&model, 1.1, 0.4).unwrap();
            let generic = density_extras(&model, &slice, &p).unwrap();
            let closure = model.density_extras(&p);
            assert!(
                (generic - closure).norm() < 1e-8,
                "extras mismatch at c={c}: {generic} vs {closure}"
            );
        }
    }

    #[test]
    fn rossi_slice_oracles() {
        let t = 0.3_f64;
        let model = crate::models::from_spec(&format!("rossi:{t}")).unwrap();
        let c = 0.6_f64;
        let slice = from_spec(&model, &format!("rossi-sigma:{c}")).unwrap();
        let r2 = (1.0 - c * c).sqrt();
        for (p1, p2) in [(0.4, 1.3), (2.0, 5.1), (3.9, 0.2)] {
            let p = slice.chart_point(&model, p1, p2).unwrap();
            assert_abs_diff_eq!(derivation_alpha(&model, &slice, &p).unwrap(), 0.0, epsilon = 1e-12);
            let sig = p1 + p2;
            let amod2 = (1.0 + t * t + 2.0 * t * (2.0 * sig).cos()) / (1.0 - t * t);
            let d = frame_point_data(&model, &slice, &p).unwrap();
            assert_abs_diff_eq!(d.area2form, c * r2 * amod2.sqrt(), epsilon = 1e-10);
        }
        // Equal radii kill the mean curvature for every t; unequal radii
        // reproduce the undeformed value at t = 0.
        let model0 = crate::models::from_spec("rossi:0").unwrap();
        let slice0 = from_spec(&model0, &format!("rossi-sigma:{c}")).unwrap();
        let p = slice0.chart_point(&model0, 0.8, 1.6).unwrap();
        let h0 = p_mean_curvature(&model0, &slice0, &p).unwrap();
        assert_abs_diff_eq!(h0, (c * c - r2 * r2) / (c * r2), epsilon = 1e-9);
        let cliff = from_spec(&model, &format!("rossi-sigma:{}", FRAC_1_SQRT_2)).unwrap();
        let q = cliff.chart_point(&model, 2.7, 0.9).unwrap();
        assert_abs_diff_eq!(p_mean_curvature(&model, &cliff, &q).unwrap(), 0.0, epsilon = 1e-10);
        let hcr_want = (1.0 - 8.0 * t + t * t) / (2.0 * (1.0 - t * t));
        assert_abs_diff_eq!(h_cr(&model, &cliff, &q).unwrap(), hcr_want, epsilon = 1e-9);
    }

    #[test]
    fn frame_invariants_hold_on_bulk_grids() {
        // Six family instances, > 10^4 nodes total.
        let disk_m = disk();
        let rossi_m = crate::models::from_spec("rossi:0.3").unwrap();
        let circle_m = crate::models::from_spec("torus-circle:1").unwrap();
        let ellipse_m = crate::models::from_spec("torus-ellipse:2,1").unwrap();
        let cases: Vec<(&ModelGeometry, SurfacePatch)> = vec![
            (&disk_m, from_spec(&disk_m, "plane:1,2,0.9").unwrap()),
            (&disk_m, from_spec(&disk_m, "cylinder:0.55").unwrap()),
            (&disk_m, from_spec(&disk_m, "graph-t2:1").unwrap()),
            (&rossi_m, from_spec(&rossi_m, "rossi-sigma:0.6").unwrap()),
            (&circle_m, from_spec(&circle_m, "torus-slice:0.8").unwrap()),
            (&ellipse_m, from_spec(&ellipse_m, "torus-slice:1.1").unwrap()),
        ];
        let mut total = 0usize;
        for (model, patch) in &cases {
            let eng = Engine::for_patch(model, patch).unwrap();
            for (u, v) in patch.midpoint_grid(42, 42).unwrap() {
                let d = eng.data(u, v).unwrap();
                assert!(!d.singular, "unexpected singular node on {}", patch.name());
                let th = model.theta_at(&d.p);
                assert!(th.pair(&d.e1).abs() < 1e-10, "theta(e1) != 0 on {}", patch.name());
                assert!(th.pair(&d.e2).abs() < 1e-10, "theta(e2) != 0 on {}", patch.name());
                let fr = model.frame_at(&d.p);
                assert!((fr.levi_norm(&d.e1) - 1.0).abs() < 1e-10, "Levi norm on {}", patch.name());
                assert!(fr.levi_inner(&d.e1, &d.e2).abs() < 1e-10, "e1 . e2 on {}", patch.name());
                let je1 = fr.j_horizontal(&d.e1);
                for ax in 0..3 {
                    assert!((je1.comps[ax] - d.e2.comps[ax]).abs() < 1e-10, "e2 = J e1 on {}", patch.name());
                }
                assert!(d.area2form > 0.0, "area 2-form orientation on {}", patch.name());
                assert!(d.alpha.is_finite() && d.h.is_finite() && d.h_cr.is_finite());
                total += 1;
            }
        }
        assert!(total >= 10_000, "only {total} nodes checked");
    }

    #[test]
    fn level_set_tangency_invariants() {
        let model = disk();
        let rho = 0.48_f64;
        let ls = SurfacePatch::level_set(
            "cyl",
            Box::new(move |p: &ChartPoint| {
                p.coords[0] * p.coords[0] + p.coords[1] * p.coords[1] - rho * rho
            }),
            Box::new(|p: &ChartPoint| [2.0 * p.coords[0], 2.0 * p.coords[1], 0.0]),
        );
        let grad = |p: &ChartPoint| [2.0 * p.coords[0], 2.0 * p.coords[1], 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let psi: f64 = rng.gen_range(0.0..TAU);
            let t = rng.gen_range(0.0..1.0);
            let p = ChartPoint::new([rho * psi.cos(), rho * psi.sin(), t]);
            let d = frame_point_data(&model, &ls, &p).unwrap();
            let g = grad(&p);
            let e1u: f64 = (0..3).map(|ax| d.e1.comps[ax] * g[ax]).sum();
            assert!(e1u.abs() < 1e-8, "e1(u) = {e1u}");
            let fr = model.frame_at(&p);
            let vu: f64 = (0..3)
                .map(|ax| (fr.t.comps[ax] + d.alpha * d.e2.comps[ax]) * g[ax])
                .sum();
            assert!(vu.abs() < 1e-8, "(T + alpha e2)(u) = {vu}");
        }
    }

    #[test]
    fn nested_e1_derivative_refines_at_fourth_order() {
        let model = disk();
        let f = |q: &ChartPoint| (1.7 * (q.coords[0] * q.coords[0] + q.coords[1] * q.coords[1])).sin();
        let mut vals = Vec::new();
        for h in [3.2e-2, 1.6e-2, 8e-3] {
            let patch = from_spec(&model, "graph-t2:1").unwrap().with_param_step(h);
            let eng = Engine::for_patch(&model, &patch).unwrap();
            let inner = |x: f64, y: f64| -> Result<f64> {
                eng.d_dir(x, y, Direction::E1, &|s, t| Ok(f(&eng.point(s, t)?)))
            };
            vals.push(eng.d_dir(0.9, 0.45, Direction::E1, &inner).unwrap());
        }
        let d1 = (vals[0] - vals[1]).abs();
        let d2 = (vals[1] - vals[2]).abs();
        assert!(d2 > 0.0, "refinement stalled");
        let order = (d1 / d2).log2();
        assert!(order >= 1.8, "observed order {order:.2} (diffs {d1:.3e}, {d2:.3e})");
    }

    #[test]
    fn singular_fraction_shrinks_monotonically() {
        // Slice hugging the chart collar: the candidate tangent has Levi
        // length rho1 rho2 |a|, small everywhere, so the flagged fraction
        // sweeps from 1 to 0 as the threshold passes through its range.
        let model = crate::models::from_spec("rossi:0.8").unwrap();
        let mut fractions = Vec::new();
        for eps in [0.2, 0.1, 0.05, 0.02, 0.01] {
            let patch = from_spec(&model, "rossi-sigma:0.05")
                .unwrap()
                .with_singular_threshold(eps);
            let eng = Engine::for_patch(&model, &patch).unwrap();
            let grid = patch.midpoint_grid(64, 64).unwrap();
            let flagged = grid
                .iter()
                .filter(|(u, v)| eng.node(*u, *v).unwrap().singular)
                .count();
            fractions.push(flagged as f64 / grid.len() as f64);
        }
        assert_abs_diff_eq!(fractions[0], 1.0);
        assert_abs_diff_eq!(*fractions.last().unwrap(), 0.0);
        for w in fractions.windows(2) {
            assert!(w[1] <= w[0], "fraction increased: {fractions:?}");
        }
        assert!(fractions.iter().any(|f| *f > 0.0 && *f < 1.0), "no intermediate fraction");
    }

    #[test]
    fn family_validation_errors() {
        let model = disk();
        assert!(matches!(
            from_spec(&model, "plane:1,0,1.5"),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            from_spec(&model, "cylinder:1.2"),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            from_spec(&model, "rossi-sigma:0.5"),
            Err(Error::InapplicableModel { .. })
        ));
        assert!(matches!(
            from_spec(&model, "torus-slice:0.5"),
            Err(Error::InapplicableModel { .. })
        ));
        assert!(matches!(
            from_spec(&model, "saddle:1"),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn off_surface_point_is_rejected() {
        let model = disk();
        let cyl = from_spec(&model, "cylinder:0.55").unwrap();
        let p = ChartPoint::new([0.7, 0.0, 0.5]);
        assert!(matches!(
            frame_point_data(&model, &cyl, &p),
            Err(Error::NotOnSurface { .. })
        ));
        let ls = SurfacePatch::level_set(
            "cyl",
            Box::new(|p: &ChartPoint| {
                p.coords[0] * p.coords[0] + p.coords[1] * p.coords[1] - 0.55 * 0.55
            }),
            Box::new(|p: &ChartPoint| [2.0 * p.coords[0], 2.0 * p.coords[1], 0.0]),
        );
        match frame_point_data(&model, &ls, &p) {
            Err(Error::NotOnSurface { residual }) => assert!(residual > 0.1),
            other => panic!("expected NotOnSurface, got {other:?}"),
        }
    }
}
