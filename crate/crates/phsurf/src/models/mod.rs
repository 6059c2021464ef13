//! Model pseudohermitian 3-manifolds with exact closed-form data.
//!
//! Every model supplies, as pure closures of the chart point:
//!   theta   contact form, normalized so that dtheta(X, Y) = 2,
//!   frame   (X, Y, T) with Y = JX and T the Reeb field,
//!   omega   real connection form (omega_1^1 = i omega), so that
//!           nabla X = omega (x) Y, nabla Y = -omega (x) X, nabla T = 0,
//!   A_11    torsion coefficient (complex scalar),
//!   W       Webster scalar curvature,
//!   extras  the correction scalar (1/6) W^{,1} + (2i/3) (A^11)_{,1}
//!           entering the second invariant area density.
//!
//! Evaluators accept unnormalized periodic coordinates so that finite
//! difference stencils may cross period boundaries freely.

mod disk_bundle;
mod heisenberg;
mod rossi;
mod torus;

pub use disk_bundle::make_disk_bundle;
pub use heisenberg::make_heisenberg;
pub use rossi::make_rossi_sphere;
pub use torus::{circle_curve, ellipse_arclength, ellipse_curve, make_torus, GeneratingCurve};

use crate::chart::{ChartPoint, Covector, Frame, TangentVector};
use crate::error::{Error, Result};
use crate::num::{chart_step, deriv5};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) type RealField = Box<dyn Fn(ChartPoint) -> f64 + Send + Sync>;
pub(crate) type CplxField = Box<dyn Fn(ChartPoint) -> Complex64 + Send + Sync>;
pub(crate) type CovectorField = Box<dyn Fn(ChartPoint) -> Covector + Send + Sync>;
pub(crate) type FrameField = Box<dyn Fn(ChartPoint) -> Frame + Send + Sync>;
pub(crate) type DomainFn = Box<dyn Fn([f64; 3]) -> bool + Send + Sync>;

/// Which model this is; carries the construction parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelKind {
    DiskBundle,
    Heisenberg,
    Rossi { t: f64 },
    Torus { period: f64 },
}

/// A model pseudohermitian 3-manifold given by a chart and closed-form data.
/// Immutable after construction; all callbacks are pure functions of the
/// point, so values may be evaluated concurrently.
pub struct ModelGeometry {
    name: String,
    kind: ModelKind,
    /// Period of each chart coordinate, if that coordinate is an angle.
    periods: [Option<f64>; 3],
    domain: DomainFn,
    theta: CovectorField,
    omega: CovectorField,
    frame: FrameField,
    torsion: CplxField,
    webster: RealField,
    extras: CplxField,
    /// Box used by `sample_points`: [lo, hi] per coordinate.
    sample_box: [[f64; 2]; 3],
}

impl ModelGeometry {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// True if the (period-normalized) coordinates lie in the chart domain.
    pub fn contains(&self, p: &ChartPoint) -> bool {
        (self.domain)(p.coords)
    }

    /// Period of one chart coordinate, if that coordinate is an angle.
    pub fn period(&self, axis: usize) -> Option<f64> {
        self.periods[axis]
    }

    /// Validating constructor for chart points: normalizes angle coordinates
    /// to [0, period) and rejects out-of-domain coordinates.
    pub fn point(&self, coords: [f64; 3]) -> Result<ChartPoint> {
        let mut c = coords;
        for axis in 0..3 {
            if let Some(period) = self.periods[axis] {
                c[axis] = c[axis].rem_euclid(period);
            }
        }
        if !(self.domain)(c) {
            return Err(Error::OutOfChart { model: self.name.clone(), coords });
        }
        Ok(ChartPoint::new(c))
    }

    pub fn theta_at(&self, p: &ChartPoint) -> Covector {
        (self.theta)(*p)
    }

    pub fn omega_at(&self, p: &ChartPoint) -> Covector {
        (self.omega)(*p)
    }

    pub fn frame_at(&self, p: &ChartPoint) -> Frame {
        (self.frame)(*p)
    }

    pub fn torsion_a11(&self, p: &ChartPoint) -> Complex64 {
        (self.torsion)(*p)
    }

    pub fn webster_w(&self, p: &ChartPoint) -> f64 {
        (self.webster)(*p)
    }

    /// The scalar (1/6) W^{,1} + (2i/3) (A^11)_{,1} supplied in closed form.
    pub fn density_extras(&self, p: &ChartPoint) -> Complex64 {
        (self.extras)(*p)
    }

    /// Deterministic pseudo-random chart points for sampling invariants.
    pub fn sample_points(&self, n: usize, seed: u64) -> Vec<ChartPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let c = [
                rng.gen_range(self.sample_box[0][0]..self.sample_box[0][1]),
                rng.gen_range(self.sample_box[1][0]..self.sample_box[1][1]),
                rng.gen_range(self.sample_box[2][0]..self.sample_box[2][1]),
            ];
            if (self.domain)(c) {
                out.push(ChartPoint::new(c));
            }
        }
        out
    }

    /// Finite-difference exterior derivative of theta on a pair of
    /// constant-component vector fields: dtheta(u, v) = D_u theta(v) - D_v theta(u).
    pub fn dtheta_fd(&self, p: &ChartPoint, u: [f64; 3], v: [f64; 3]) -> f64 {
        let scale = p.coords.iter().fold(1.0f64, |m, &c| m.max(c.abs()));
        let h = chart_step(scale);
        let theta_on = |comps: [f64; 3]| {
            move |q: ChartPoint| {
                let th = (self.theta)(q);
                th.comps[0] * comps[0] + th.comps[1] * comps[1] + th.comps[2] * comps[2]
            }
        };
        let d_along = |dir: [f64; 3], g: &dyn Fn(ChartPoint) -> f64| {
            deriv5(
                |s| {
                    g(ChartPoint::new([
                        p.coords[0] + s * dir[0],
                        p.coords[1] + s * dir[1],
                        p.coords[2] + s * dir[2],
                    ]))
                },
                0.0,
                h,
            )
        };
        d_along(u, &theta_on(v)) - d_along(v, &theta_on(u))
    }
}

/// Tanaka-Webster covariant derivative of a tangent-vector field along a
/// direction at its base point. The field is decomposed into adapted-frame
/// components, those scalars are differentiated along the chart line through
/// the base point, and the frame rotation from omega is added:
/// nabla_d (aX + bY + cT) = (d(a) - omega(d) b) X + (d(b) + omega(d) a) Y + d(c) T.
pub fn covariant_derivative(
    model: &ModelGeometry,
    direction: &TangentVector,
    field: &dyn Fn(ChartPoint) -> TangentVector,
) -> Result<TangentVector> {
    let p = direction.base;
    if !model.contains(&p) {
        return Err(Error::OutOfChart { model: model.name.clone(), coords: p.coords });
    }
    let scale = p.coords.iter().fold(1.0f64, |m, &c| m.max(c.abs()));
    let dir_mag = direction
        .comps
        .iter()
        .fold(0.0f64, |m, &c| m.max(c.abs()))
        .max(1e-12);
    let h = chart_step(scale) / dir_mag;
    let comp = |i: usize| {
        deriv5(
            |s| {
                let q = p.displaced(direction, s);
                let fr = model.frame_at(&q);
                fr.decompose(&field(q))[i]
            },
            0.0,
            h,
        )
    };
    let (da, db, dc) = (comp(0), comp(1), comp(2));
    let frame = model.frame_at(&p);
    let c0 = frame.decompose(&field(p));
    let om = model.omega_at(&p).pair(direction);
    Ok(frame.compose([da - om * c0[1], db + om * c0[0], dc]))
}

/// The five models exposed by name.
pub fn catalog() -> Vec<&'static str> {
    vec!["disk-bundle", "rossi:<t>", "torus-circle:<r>", "torus-ellipse:<a>,<b>", "heisenberg"]
}

/// Build a model from its catalog spec string.
pub fn from_spec(spec: &str) -> Result<ModelGeometry> {
    let bad = |msg: &str| Error::InvalidParameter { what: format!("model spec '{spec}': {msg}") };
    if spec == "disk-bundle" {
        return Ok(make_disk_bundle());
    }
    if spec == "heisenberg" {
        return Ok(make_heisenberg());
    }
    if let Some(rest) = spec.strip_prefix("rossi:") {
        let t: f64 = rest.parse().map_err(|_| bad("expected rossi:<t>"))?;
        return make_rossi_sphere(t);
    }
    if let Some(rest) = spec.strip_prefix("torus-circle:") {
        let r: f64 = rest.parse().map_err(|_| bad("expected torus-circle:<r>"))?;
        return make_torus(circle_curve(r)?);
    }
    if let Some(rest) = spec.strip_prefix("torus-ellipse:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 2 {
            return Err(bad("expected torus-ellipse:<a>,<b>"));
        }
        let a: f64 = parts[0].parse().map_err(|_| bad("bad axis a"))?;
        let b: f64 = parts[1].parse().map_err(|_| bad("bad axis b"))?;
        return make_torus(ellipse_curve(a, b)?);
    }
    Err(bad("unknown model; see `models` for the catalog"))
}
