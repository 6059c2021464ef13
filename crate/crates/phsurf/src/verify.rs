//! Named numeric checks for the catalog of claimed critical surfaces,
//! plus parameter scans over slice families and root finding.
//!
//! Each catalog entry has an opaque id ("3.1" .. "6.2") and a fixed
//! protocol: grid scans of H_cr or of an Euler-Lagrange residual, energy
//! quadrature, or a bisection root. A report row records what was
//! measured, the expected value, the tolerance, and where the expected
//! value comes from. Three entries (3.2 second branch, 3.3, 4.2) state
//! zeros that are arithmetically inconsistent with the model geometry;
//! their reports carry failing rows next to passing closed-form rows so
//! the discrepancy is visible in the numbers themselves.

use std::time::Instant;

use rayon::prelude::*;

use crate::chart::ChartPoint;
use crate::error::{Error, Result};
use crate::functionals::{integrate, Functional};
use crate::models::{self, ellipse_arclength, ModelGeometry, ModelKind};
use crate::surface::{self, h_cr, SurfacePatch};
use crate::variational::{el1_general, el2_constant, el2_cyz};

/// Registered catalog ids, in report order.
pub const LEMMA_IDS: [&str; 11] =
    ["3.1", "3.2", "3.3", "3.4", "4.1", "4.2", "5.1", "5.2", "5.4", "6.1", "6.2"];

const T_STAR: f64 = 4.0 - 3.872_983_346_207_417; // 4 - sqrt(15)
const CLIFFORD: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// How a measured row is judged against its expected value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowKind {
    /// |value - expected| <= tolerance.
    Within,
    /// value >= expected (threshold row; tolerance unused, kept 0).
    AtLeast,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct MeasuredRow {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    /// Where the expected value comes from (stated zero, closed form, ...).
    pub provenance: String,
    pub kind: RowKind,
    pub pass: bool,
}

impl MeasuredRow {
    fn within(name: &str, value: f64, expected: f64, tol: f64, prov: &str) -> Self {
        MeasuredRow {
            name: name.into(),
            value,
            expected,
            tolerance: tol,
            provenance: prov.into(),
            kind: RowKind::Within,
            pass: (value - expected).abs() <= tol,
        }
    }

    fn at_least(name: &str, value: f64, floor: f64, prov: &str) -> Self {
        MeasuredRow {
            name: name.into(),
            value,
            expected: floor,
            tolerance: 0.0,
            provenance: prov.into(),
            kind: RowKind::AtLeast,
            pass: value >= floor,
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct LemmaReport {
    pub lemma_id: String,
    pub status: Status,
    pub measured: Vec<MeasuredRow>,
    pub runtime_ms: u64,
}

/// Grid maximum of |f| over interior midpoints, with skip accounting.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct GridMax {
    pub max_abs: f64,
    pub argmax: (f64, f64),
    pub evaluated: usize,
    pub skipped: usize,
}

/// Max of |f| over an nu x nv cell-centered parameter grid. Nodes whose
/// evaluation fails (off-chart stencil, singular point) are skipped and
/// counted; more than half the grid failing is an error.
pub fn grid_max_abs(
    model: &ModelGeometry,
    patch: &SurfacePatch,
    grid: (usize, usize),
    f: &(dyn Fn(&ModelGeometry, &SurfacePatch, &ChartPoint) -> Result<f64> + Sync),
) -> Result<GridMax> {
    let pts = patch.midpoint_grid(grid.0, grid.1)?;
    let total = pts.len();
    let evals: Vec<Option<(f64, (f64, f64))>> = pts
        .par_iter()
        .map(|&(u, v)| {
            let p = patch.chart_point(model, u, v).ok()?;
            let val = f(model, patch, &p).ok()?;
            Some((val.abs(), (u, v)))
        })
        .collect();
    let mut best: Option<(f64, (f64, f64))> = None;
    let mut evaluated = 0usize;
    for e in evals.into_iter().flatten() {
        evaluated += 1;
        if best.map_or(true, |(b, _)| e.0 > b) {
            best = Some(e);
        }
    }
    let skipped = total - evaluated;
    if evaluated * 2 < total {
        return Err(Error::Numeric {
            what: format!(
                "grid scan on {} evaluated only {evaluated} of {total} nodes",
                patch.name()
            ),
        });
    }
    let (max_abs, argmax) = best.expect("nonempty grid");
    Ok(GridMax { max_abs, argmax, evaluated, skipped })
}

fn energy(model: &ModelGeometry, patch: &SurfacePatch, which: Functional, n: usize) -> Result<f64> {
    Ok(integrate(model, patch, which, (n, n))?.value)
}

/// Surfaces certified as E1-critical by the passing catalog checks, as
/// (model spec, surface spec) pairs. Stationarity of the numeric first
/// variation on each of these is a separate property gate.
pub fn certified_e1_critical() -> Vec<(String, String)> {
    vec![
        ("disk-bundle".into(), "plane:0,1,0".into()),
        ("disk-bundle".into(), "graph-t2:1".into()),
        ("rossi:0".into(), format!("rossi-sigma:{CLIFFORD}")),
        ("rossi:0.3".into(), format!("rossi-sigma:{CLIFFORD}")),
        ("rossi:-0.4".into(), format!("rossi-sigma:{CLIFFORD}")),
        ("torus-circle:1".into(), "torus-slice:1".into()),
    ]
}

/// Runs one catalog check and wraps the measured rows into a report.
pub fn verify_lemma(id: &str) -> Result<LemmaReport> {
    verify_lemma_with(id, None)
}

/// Same check with the residual-scan grid overridden; energy quadrature
/// grids are part of each protocol and stay fixed.
pub fn verify_lemma_with(id: &str, scan: Option<(usize, usize)>) -> Result<LemmaReport> {
    let start = Instant::now();
    let measured = check_rows(id, scan)?;
    let status = if measured.iter().all(|r| r.pass) { Status::Pass } else { Status::Fail };
    Ok(LemmaReport {
        lemma_id: id.into(),
        status,
        measured,
        runtime_ms: start.elapsed().as_millis() as u64,
    })
}

/// Runs every registered check; order follows `LEMMA_IDS`.
pub fn run_all() -> Result<Vec<LemmaReport>> {
    run_all_with(None)
}

pub fn run_all_with(scan: Option<(usize, usize)>) -> Result<Vec<LemmaReport>> {
    LEMMA_IDS.par_iter().map(|id| verify_lemma_with(id, scan)).collect()
}

fn check_rows(id: &str, scan: Option<(usize, usize)>) -> Result<Vec<MeasuredRow>> {
    match id {
        "3.1" => lemma_3_1(scan),
        "3.2" => lemma_3_2(scan),
        "3.3" => lemma_3_3(scan),
        "3.4" => lemma_3_4(scan),
        "4.1" => lemma_4_1(scan),
        "4.2" => lemma_4_2(scan),
        "5.1" => lemma_5_1(scan),
        "5.2" => lemma_5_2(scan),
        "5.4" => lemma_5_4(scan),
        "6.1" => lemma_6_1(scan),
        "6.2" => lemma_6_2(scan),
        other => Err(Error::InvalidParameter {
            what: format!("unknown lemma id {other:?}; registered ids are {LEMMA_IDS:?}"),
        }),
    }
}

/// Planes ax+by=c at chord distance sqrt(3)/2: H_cr and E1 both vanish.
fn lemma_3_1(scan: Option<(usize, usize)>) -> Result<Vec<MeasuredRow>> {
    let model = models::from_spec("disk-bundle")?;
    let g = scan.unwrap_or((24, 24));
    let mut rows = Vec::new();
    for (a, b) in [(0.0f64, 1.0), (1.0, 0.0), (0.6, 0.8)] {
        let c = 0.75f64.sqrt() * (a * a + b * b).sqrt();
        let patch = surface::from_spec(&model, &format!("plane:{a},{b},{c}"))?;
        let gm = grid_max_abs(&model, &patch, g, &|m, s, p| h_cr(m, s, p))?;
        rows.push(MeasuredRow::within(
            &format!("max |H_cr| on {a}x+{b}y=c, c/|(a,b)| = sqrt(3)/2 ({}x{})", g.0, g.1),
            gm.max_abs,
            0.0,
            1e-8,
            "stated zero; constant-field value c^2/(a^2+b^2)/6 - 1/8",
        ));
    }
    let patch = surface::from_spec(&model, &format!("plane:0,1,{}", 0.75f64.sqrt()))?;
    rows.push(MeasuredRow::within(
        "E1 (48x48)",
        energy(&model, &patch, Functional::E1, 48)?,
        0.0,
        1e-9,
        "zero-energy minimum: the density |H_cr|^(3/2) vanishes identically",
    ));
    Ok(rows)
}

/// Planes with c=0 or chord distance sqrt(3/8): claimed E1-critical with
/// positive energy. The c=0 branch holds; the sqrt(3/8) branch does not
/// (the residual's own bracket vanishes at distance sqrt(9/8), which lies
/// outside the unit disk, so no second critical plane exists).
fn lemma_3_2(scan: Option<(usize, usize)>) -> Result<Vec<MeasuredRow>> {
    let model = models::from_spec("disk-bundle")?;
    let mut rows = Vec::new();

    let g = scan.unwrap_or((10, 10));
    let flat = surface::from_spec(&model, "plane:0,1,0")?;
    let gm = grid_max_abs(&model, &flat, g, &|m, s, p| el1_general(m, s, p))?;
    rows.push(MeasuredRow::within(
        &format!("max |EL1| on the c=0 plane ({}x{})", g.0, g.1),
        gm.max_abs,
        0.0,
        1e-6,
        "stated zero; H = 0 kills the residual bracket",
    ));
    rows.push(MeasuredRow::at_least(
        "E1 on the c=0 plane (48x48)",
        energy(&model, &flat, Functional::E1, 48)?,
        0.01,
        "positive energy: H_cr = -1/8 on the whole chord",
    ));

    let cbar = (3.0f64 / 8.0).sqrt();
    let tilted = surface::from_spec(&model, &format!("plane:0,1,{cbar}"))?;
    let gm = grid_max_abs(&model, &tilted, g, &|m, s, p| el1_general(m, s, p))?;
    rows.push(MeasuredRow::within(
        &format!("max |EL1| at chord distance sqrt(3/8) ({}x{})", g.0, g.1),
        gm.max_abs,
        0.0,
        1e-6,
        "stated zero",
    ));
    // Companion row: the measured residual equals the constant-field closed
    // form, so the failure above is the formula's true value, not noise.
    let p = tilted.chart_point(&model, 0.0, 0.5)?;
    let h = -cbar;
    let hcr = cbar * cbar / 6.0 - 0.125;
    let closed = 0.5 * hcr.signum() * hcr.abs().sqrt() * (2.0 / 3.0 * h.powi(3) - 0.75 * h);
    rows.push(MeasuredRow::within(
        "EL1 at the patch midpoint vs closed form",
        el1_general(&model, &tilted, &p)?,
        closed,
        1e-8,
        "closed form sign(H_cr) sqrt(|H_cr|) (2H^3/3 - 3H/4)/2 at H = -c/|(a,b)|",
    ));
    rows.push(MeasuredRow::at_least(
        "E1 at chord distance sqrt(3/8) (48x48)",
        energy(&model, &tilted, Functional::E1, 48)?,
        0.01,
        "positive energy: H_cr = -1/16 on the whole chord",
    ));
    Ok(rows)
}

/// Cylinder r = 1-sqrt(2-sqrt(3)): claimed zero-energy minimum. The
/// geometric p-mean curvature of every cylinder satisfies |H| >= 1, so
/// H_cr = -1/8 + H^2/6 >= 1/24 and the claim fails at its stated radius.
fn lemma_3_3(scan: Option<(usize, usize)>) -> Result<Vec<MeasuredRow>> {
    let model = models::from_spec("disk-bundle")?;
    let r = 1.0 - (2.0 - 3.0f64.sqrt()).sqrt();
    let g = scan.unwrap_or((24, 24));
    let patch = surface::from_spec(&model, &format!("cylinder:{r}"))?;
    let gm = grid_max_abs(&model, &patch, g, &|m, s, p| h_cr(m, s, p))?;
    let closed = -0.125 + (1.0 + r * r).powi(2) / (24.0 * r * r);
    Ok(vec![
        MeasuredRow::within(
            &format!("max |H_cr| ({}x{})", g.0, g.1),
            gm.max_abs,
            0.0,
            1e-7,
            "stated zero",
        ),
        MeasuredRow::within(
            "max |H_cr| vs constant-radius closed form",
            gm.max_abs,
            closed,
            1e-8,
            "closed form -1/8 + (1+r^2)^2/(24 r^2) from H = -(1+r^2)/(2r)",
        ),
        MeasuredRow::within(
            "E1 (48x48)",
            energy(&model, &patch, Functional::E1, 48)?,
            0.0,
            1e-6,
            "stated zero energy",
        ),
    ])
}

/// Level surfaces t^2 = c: E1-critical with positive energy.
fn lemma_3_4(scan: Option<(usize, usize)>) -> Result<Vec<MeasuredRow>> {
    let model = models::from_spec("disk-bundle")?;
    let patch = surface::from_spec(&model, "graph-t2:1")?;
    let g = scan.unwrap_or((10, 10));
    let gm = grid_max_abs(&model, &patch, g, &|m, s, p| el1_general(m, s, p))?;
    Ok(vec![
        MeasuredRow::within(
            &format!("max |EL1| ({}x{})", g.0, g.1),
            gm.max_abs,
            0.0,
            1e-5,
            "stated zero; alpha = 1/(2r) and H = 0 cancel the residual",
        ),
        MeasuredRow::at_least(
            "E1 (48x48)",
            energy(&model, &patch, Functional::E1, 48)?,
            0.01,
            "positive energy: H_cr < 0 on the annulus",
        ),
    ])
}

/// Planes at chord distance sqrt(3)/2 are E2-critical.
fn lemma_4_1(scan: Option<(usize, usize)>) -> Result<Vec<MeasuredRow>> {
    let model = models::from_spec("disk-bundle")?;
    let g = scan.unwrap_or((10, 10));
    let mut rows = Vec::new();
    for (a, b) in [(0.0f64, 1.0), (0.6, 0.8)] {
        let c = 0.75f64.sqrt() * (a * a + b * b).sqrt();
        let patch = surface::from_spec(&model, &format!("plane:{a},{b},{c}"))?;
        let gm = grid_max_abs(&model, &patch, g, &|m, s, p| el2_cyz(m, s, p))?;
        rows.push(MeasuredRow::within(
            &format!("max |EL2| on {a}x+{b}y=c ({}x{})", g.0, g.1),
            gm.max_abs,
            0.0,
            1e-6,
            "stated zero; (4/27)(H^2 - 3/4)^2 vanishes at H^2 = 3/4",
        ));
    }
    Ok(rows)
}

/// Cylinder r = 1-sqrt(2-sqrt(3)): claimed E2-critical. Fails for the
/// same reason as the zero-energy claim: H^2 = 3/4 is unreachable.
fn lemma_4_2(scan: Option<(usize, usize)>) -> Result<Vec<MeasuredRow>> {
    let model = models::from_spec("disk-bundle")?;
    let r = 1.0 - (2.0 - 3.0f64.sqrt()).sqrt();
    let g = scan.unwrap_or((10, 10));
    let patch = surface::from_spec(&model, &format!("cylinder:{r}"))?;
    let gm = grid_max_abs(&model, &patch, g, &|m, s, p| el2_cyz(m, s, p))?;
    let h = -(1.0 + r * r) / (2.0 * r);
    let closed = 4.0 / 27.0 * (h * h - 0.75).powi(2);
    Ok(vec![
        MeasuredRow::within(
            &format!("max |EL2| ({}x{})", g.0, g.1),
            gm.max_abs,
            0.0,
            1e-6,
            "stated zero",
        ),
        MeasuredRow::within(
            "max |EL2| vs constant-radius closed form",
            gm.max_abs,
            closed,
            1e-8,
            "closed form (4/27)(H^2 - 3/4)^2 at H = -(1+r^2)/(2r)",
        ),
    ])
}

/// Symmetric Rossi slice at t = 4-sqrt(15): zero-energy minimum.
fn lemma_5_1(scan: Option<(usize, usize)>) -> Result<Vec<MeasuredRow>> {
    let model = models::from_spec(&format!("rossi:{T_STAR}"))?;
    let patch = surface::from_spec(&model, &format!("rossi-sigma:{CLIFFORD}"))?;
    let closed = (1.0 - 8.0 * T_STAR + T_STAR * T_STAR) / (2.0 * (1.0 - T_STAR * T_STAR));
    let g = scan.unwrap_or((16, 16));
    let gm = grid_max_abs(&model, &patch, g, &|m, s, p| h_cr(m, s, p))?;
    Ok(vec![
        MeasuredRow::within(
            "constant-field H_cr at the root parameter",
            closed,
            0.0,
            1e-10,
            "closed form (1-8t+t^2)/(2(1-t^2)); the numerator vanishes at t = 4-sqrt(15)",
        ),
        MeasuredRow::within(
            &format!("max |H_cr| ({}x{}, frame path)", g.0, g.1),
            gm.max_abs,
            0.0,
            1e-6,
            "stated zero",
        ),
        MeasuredRow::within(
            "E1 (64x64)",
            energy(&model, &patch, Functional::E1, 64)?,
            0.0,
            1e-8,
            "zero-energy minimum",
        ),
    ])
}

/// Symmetric Rossi slices away from the root: E1-critical, positive energy.
fn lemma_5_2(scan: Option<(usize, usize)>) -> Result<Vec<MeasuredRow>> {
    let g = scan.unwrap_or((8, 8));
    let mut rows = Vec::new();
    for t in [0.0, 0.3, -0.4] {
        let model = models::from_spec(&format!("rossi:{t}"))?;
        let patch = surface::from_spec(&model, &format!("rossi-sigma:{CLIFFORD}"))?;
        let gm = grid_max_abs(&model, &patch, g, &|m, s, p| el1_general(m, s, p))?;
        rows.push(MeasuredRow::within(
            &format!("max |EL1| at t = {t} ({}x{})", g.0, g.1),
            gm.max_abs,
            0.0,
            1e-5,
            "stated zero",
        ));
        rows.push(MeasuredRow::at_least(
            &format!("E1 at t = {t} (64x64)"),
            energy(&model, &patch, Functional::E1, 64)?,
            0.1,
            "positive energy: |H_cr| = |1-8t+t^2|/(2(1-t^2)) > 0 off the root",
        ));
    }
    Ok(rows)
}

/// Sign change of the E2 residual along the symmetric slice family.
fn lemma_5_4(_scan: Option<(usize, usize)>) -> Result<Vec<MeasuredRow>> {
    let at = |t: f64| -> Result<f64> {
        let model = models::from_spec(&format!("rossi:{t}"))?;
        let patch = surface::from_spec(&model, &format!("rossi-sigma:{CLIFFORD}"))?;
        let p = patch.chart_point(&model, 1.0, 1.0)?;
        el2_constant(&model, &patch, &p)
    };
    let root = crate::num::bisect(
        &|t| at(t).expect("E2 residual evaluation failed during bisection"),
        0.05,
        0.3,
        1e-12,
        200,
    )?;
    let mut rows = vec![MeasuredRow::within(
        "bisection root of t -> EL2 on (0.05, 0.3)",
        root,
        T_STAR,
        1e-8,
        "root of t^2 - 8t + 1 inside (0, 1)",
    )];
    for t in [0.0, 0.3, -0.3] {
        rows.push(MeasuredRow::at_least(
            &format!("|EL2| at t = {t}"),
            at(t)?.abs(),
            0.01,
            "nonzero residual off the root; (4/3)(1-8t+t^2)/(1+t)^2",
        ));
    }
    Ok(rows)
}

/// Circle-torus slices: E1-critical with positive energy for every slice;
/// the E2 residual stays strictly positive there.
fn lemma_6_1(scan: Option<(usize, usize)>) -> Result<Vec<MeasuredRow>> {
    let r = 1.0;
    let model = models::from_spec(&format!("torus-circle:{r}"))?;
    let patch = surface::from_spec(&model, "torus-slice:1")?;
    let g = scan.unwrap_or((8, 8));
    let gm_e1 = grid_max_abs(&model, &patch, g, &|m, s, p| el1_general(m, s, p))?;
    let gm_hcr = grid_max_abs(&model, &patch, scan.unwrap_or((16, 16)), &|m, s, p| {
        h_cr(m, s, p).map(|v| v - 5.0 / (8.0 * r))
    })?;
    let p = patch.chart_point(&model, 1.0, 1.0)?;
    let el2 = el2_constant(&model, &patch, &p)?;
    Ok(vec![
        MeasuredRow::within(
            &format!("max |EL1| ({}x{})", g.0, g.1),
            gm_e1.max_abs,
            0.0,
            1e-6,
            "stated zero",
        ),
        MeasuredRow::within(
            "max |H_cr - 5/(8r)|",
            gm_hcr.max_abs,
            0.0,
            1e-8,
            "closed form 5/(8r) from W = 1/(2r), Im A11 = -1/(2r), H = 0",
        ),
        MeasuredRow::at_least(
            "E1 (48x48)",
            energy(&model, &patch, Functional::E1, 48)?,
            0.01,
            "positive energy: constant H_cr = 5/(8r)",
        ),
        MeasuredRow::within(
            "(9/4) EL2",
            2.25 * el2,
            15.0 / (8.0 * r * r),
            1e-6,
            "closed form 15/(8 r^2) > 0: slices are never E2-critical",
        ),
    ])
}

/// Ellipse torus with b^2/a^2 < 3/8: some slice has H_cr = 0 and zero energy.
fn lemma_6_2(scan: Option<(usize, usize)>) -> Result<Vec<MeasuredRow>> {
    let (a, b) = (2.0, 1.0);
    let model = models::from_spec(&format!("torus-ellipse:{a},{b}"))?;
    let slice_hcr = |s: f64| -> Result<f64> {
        let patch = surface::from_spec(&model, &format!("torus-slice:{s}"))?;
        let p = patch.chart_point(&model, 1.0, 1.0)?;
        h_cr(&model, &patch, &p)
    };
    let (t0, s0) = ellipse_hcr_root(a, b)?;
    let quarter = ellipse_arclength(a, b, std::f64::consts::FRAC_PI_2);
    let root_patch = surface::from_spec(&model, &format!("torus-slice:{s0}"))?;
    let g = scan.unwrap_or((16, 16));
    let gm = grid_max_abs(&model, &root_patch, g, &|m, s, p| h_cr(m, s, p))?;
    let mut rows = vec![
        MeasuredRow::within(
            "H_cr on the a-vertex slice",
            slice_hcr(0.0)?,
            (8.0 * a * a - 3.0 * b * b) / (8.0 * a * b * b),
            1e-6,
            "closed form (8a^2-3b^2)/(8ab^2) at the curvature maximum",
        ),
        MeasuredRow::within(
            "H_cr on the b-vertex slice",
            slice_hcr(quarter)?,
            (8.0 * b * b - 3.0 * a * a) / (8.0 * a * a * b),
            1e-6,
            "closed form (8b^2-3a^2)/(8a^2 b) at the curvature minimum",
        ),
        MeasuredRow::within(
            "H_cr at the bisection root slice",
            slice_hcr(s0)?,
            0.0,
            1e-8,
            "intermediate-value root between vertex slices of opposite sign",
        ),
        MeasuredRow::within(
            &format!("max |H_cr| on the root slice ({}x{})", g.0, g.1),
            gm.max_abs,
            0.0,
            1e-7,
            "stated zero",
        ),
        MeasuredRow::within(
            "E1 on the root slice (48x48)",
            energy(&model, &root_patch, Functional::E1, 48)?,
            0.0,
            1e-6,
            "zero-energy minimum",
        ),
    ];
    rows.push(MeasuredRow::at_least(
        "root parameter t0 inside (0, pi/2)",
        if t0 > 0.0 && t0 < std::f64::consts::FRAC_PI_2 { 1.0 } else { 0.0 },
        1.0,
        "bracketing interval of the bisection",
    ));
    Ok(rows)
}

/// One row of a slice-family energy scan.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct ScanRow {
    pub c: f64,
    pub e2: f64,
    pub error_estimate: f64,
}

/// E2 over the slice family rho_1 = c of a Rossi model, sorted by c.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ScanTable {
    pub t: f64,
    pub rows: Vec<ScanRow>,
    pub warnings: Vec<String>,
    /// First five rows strictly increasing (E2 falls away toward c -> 0).
    pub lower_tail_monotone: bool,
    /// Last five rows strictly increasing (E2 grows toward c -> 1).
    pub upper_tail_monotone: bool,
}

/// Condition for the slice-family energy to diverge at both ends:
/// nonpositive t needs (1+t)^3(1-t) > 2t(t^2+5t+1), nonnegative t needs
/// 1 - 4t - t^2 > 0.
pub fn e2_divergence_condition(t: f64) -> bool {
    let lower = t <= 0.0 && (1.0 + t).powi(3) * (1.0 - t) > 2.0 * t * (t * t + 5.0 * t + 1.0);
    let upper = t >= 0.0 && 1.0 - 4.0 * t - t * t > 0.0;
    lower || upper
}

/// E2 of the slices rho_1 = c for each requested c. The divergence
/// condition on t is advisory: outside it the scan still runs but the
/// table carries a warning and the tail checks lose their meaning.
pub fn scan_rossi_e2(c_values: &[f64], t: f64) -> Result<ScanTable> {
    if !(-1.0 < t && t < 1.0) {
        return Err(Error::InvalidParameter { what: format!("Rossi parameter t = {t} outside (-1, 1)") });
    }
    for &c in c_values {
        if !(1e-3..=0.999).contains(&c) {
            return Err(Error::InvalidParameter {
                what: format!("slice radius c = {c} outside the chart collar (0.001, 0.999)"),
            });
        }
    }
    let mut warnings = Vec::new();
    if !e2_divergence_condition(t) {
        warnings.push(format!(
            "t = {t} satisfies neither divergence condition; the scan runs but the tails need not be monotone"
        ));
    }
    let model = models::from_spec(&format!("rossi:{t}"))?;
    let mut rows = c_values
        .par_iter()
        .map(|&c| {
            let patch = surface::from_spec(&model, &format!("rossi-sigma:{c}"))?;
            let q = integrate(&model, &patch, Functional::E2, (48, 48))?;
            Ok(ScanRow { c, e2: q.value, error_estimate: q.error_estimate })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|x, y| x.c.total_cmp(&y.c));

    let strictly_increasing = |w: &[ScanRow]| w.windows(2).all(|p| p[1].e2 > p[0].e2);
    let (lower, upper) = if rows.len() >= 10 {
        (strictly_increasing(&rows[..5]), strictly_increasing(&rows[rows.len() - 5..]))
    } else {
        warnings.push(format!("only {} samples; tail monotonicity not assessed", rows.len()));
        (false, false)
    };
    Ok(ScanTable { t, rows, warnings, lower_tail_monotone: lower, upper_tail_monotone: upper })
}

/// Root of H_cr along the ellipse slice family. Returns the curve
/// parameter t0 in (0, pi/2) and its arclength s0. The hypothesis
/// b^2/a^2 < 3/8 makes the vertex slices bracket a sign change.
pub fn ellipse_hcr_root(a: f64, b: f64) -> Result<(f64, f64)> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter { what: format!("ellipse semi-axes must be positive, got {a}, {b}") });
    }
    if b * b / (a * a) >= 0.375 {
        return Err(Error::InapplicableModel {
            reason: format!("hypothesis of Lemma 6.2 violated: b^2/a^2 = {} >= 3/8", b * b / (a * a)),
        });
    }
    let model = models::from_spec(&format!("torus-ellipse:{a},{b}"))?;
    let hcr_at = |tpar: f64| -> Result<f64> {
        let s = ellipse_arclength(a, b, tpar);
        let patch = surface::from_spec(&model, &format!("torus-slice:{s}"))?;
        let p = patch.chart_point(&model, 1.0, 1.0)?;
        h_cr(&model, &patch, &p)
    };
    let at_zero = hcr_at(0.0)?;
    let at_quarter = hcr_at(std::f64::consts::FRAC_PI_2)?;
    if !(at_zero > 0.0 && at_quarter < 0.0) {
        return Err(Error::Numeric {
            what: format!(
                "vertex slices do not bracket a root: H_cr = {at_zero:.6e} and {at_quarter:.6e}"
            ),
        });
    }
    let t0 = crate::num::bisect(
        &|tp| hcr_at(tp).expect("slice H_cr evaluation failed during bisection"),
        0.0,
        std::f64::consts::FRAC_PI_2,
        1e-10,
        200,
    )?;
    Ok((t0, ellipse_arclength(a, b, t0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpotOutcome {
    AllPositive,
    FoundNonPositive,
    Skipped,
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct SpotSample {
    pub param: f64,
    pub e1: f64,
}

/// Sampled positivity of E1 over a slice family. A finite sample proves
/// nothing beyond itself; the report says so on every serialization.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SpotCheckReport {
    pub model: String,
    pub family: String,
    /// Always true: finitely many samples are not an impossibility proof.
    pub non_proof: bool,
    pub outcome: SpotOutcome,
    pub samples: Vec<SpotSample>,
    pub min_e1: Option<f64>,
    pub warnings: Vec<String>,
}

/// Spot check that no sampled family member has E1 = 0. Applies to Rossi
/// models with t below the H_cr root parameter and to circle tori; other
/// models are skipped with a warning rather than checked vacuously.
pub fn spot_check_no_zero_e1(
    model_spec: &str,
    surface_family: &str,
    n_samples: usize,
) -> Result<SpotCheckReport> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter { what: "spot check needs at least one sample".into() });
    }
    let model = models::from_spec(model_spec)?;
    let mut report = SpotCheckReport {
        model: model_spec.into(),
        family: surface_family.into(),
        non_proof: true,
        outcome: SpotOutcome::Skipped,
        samples: Vec::new(),
        min_e1: None,
        warnings: Vec::new(),
    };
    let params: Vec<f64> = match model.kind() {
        ModelKind::Rossi { t } => {
            if !(-1.0 < *t && *t < T_STAR) {
                report.warnings.push(format!(
                    "t = {t} is outside (-1, {T_STAR:.10}); the positivity claim does not apply, family skipped"
                ));
                return Ok(report);
            }
            if surface_family != "rossi-sigma" {
                return Err(Error::InvalidParameter {
                    what: format!("Rossi spot check expects the rossi-sigma family, got {surface_family:?}"),
                });
            }
            (0..n_samples)
                .map(|i| 0.15 + 0.7 * (i as f64 + 0.5) / n_samples as f64)
                .collect()
        }
        ModelKind::Torus { period } => {
            if surface_family != "torus-slice" {
                return Err(Error::InvalidParameter {
                    what: format!("torus spot check expects the torus-slice family, got {surface_family:?}"),
                });
            }
            if !model_spec.starts_with("torus-circle") {
                report.warnings.push(format!(
                    "slice positivity is only stated for circle generators; {} skipped",
                    model.name()
                ));
                return Ok(report);
            }
            (0..n_samples).map(|i| period * (i as f64 + 0.5) / n_samples as f64).collect()
        }
        _ => {
            report
                .warnings
                .push(format!("positivity spot check is not stated for {}; family skipped", model.name()));
            return Ok(report);
        }
    };
    let samples = params
        .par_iter()
        .map(|&c| {
            let patch = surface::from_spec(&model, &format!("{surface_family}:{c}"))?;
            let e1 = energy(&model, &patch, Functional::E1, 48)?;
            Ok(SpotSample { param: c, e1 })
        })
        .collect::<Result<Vec<_>>>()?;
    let min_e1 = samples.iter().map(|s| s.e1).fold(f64::INFINITY, f64::min);
    report.outcome =
        if min_e1 > 0.01 { SpotOutcome::AllPositive } else { SpotOutcome::FoundNonPositive };
    report.samples = samples;
    report.min_e1 = Some(min_e1);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn registry_statuses_split_into_the_known_pattern() {
        let reports = run_all().unwrap();
        assert_eq!(reports.len(), LEMMA_IDS.len());
        for (r, id) in reports.iter().zip(LEMMA_IDS) {
            assert_eq!(r.lemma_id, id);
            let want = if matches!(id, "3.2" | "3.3" | "4.2") { Status::Fail } else { Status::Pass };
            assert_eq!(
                r.status, want,
                "unexpected status for {id}: {:#?}",
                r.measured
            );
            assert_eq!(r.status == Status::Pass, r.measured.iter().all(|m| m.pass));
        }
    }

    #[test]
    fn failing_reports_carry_passing_closed_form_rows() {
        for id in ["3.3", "4.2"] {
            let r = verify_lemma(id).unwrap();
            assert_eq!(r.status, Status::Fail);
            let oracle = r
                .measured
                .iter()
                .find(|m| m.provenance.starts_with("closed form"))
                .expect("closed-form row");
            assert!(oracle.pass, "oracle row should pass for {id}: {oracle:?}");
        }
    }

    #[test]
    fn unknown_lemma_id_is_rejected() {
        assert!(matches!(verify_lemma("9.9"), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn plane_family_sweep_keeps_hcr_at_zero() {
        let model = models::from_spec("disk-bundle").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let ang: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let scale: f64 = rng.gen_range(0.5..2.0);
            let (a, b) = (scale * ang.cos(), scale * ang.sin());
            let c = 0.75f64.sqrt() * scale;
            let patch = surface::from_spec(&model, &format!("plane:{a},{b},{c}")).unwrap();
            let gm = grid_max_abs(&model, &patch, (12, 12), &|m, s, p| h_cr(m, s, p)).unwrap();
            assert!(gm.max_abs < 1e-8, "plane ({a}, {b}): max |H_cr| = {:.3e}", gm.max_abs);
        }
    }

    // The stated critical cylinder fails, but the bracket root H^2 = 9/8
    // is reached by r = 1/sqrt(2), and that cylinder really is critical.
    #[test]
    fn cylinder_at_inverse_sqrt_two_is_e1_critical() {
        let model = models::from_spec("disk-bundle").unwrap();
        let patch = surface::from_spec(&model, &format!("cylinder:{CLIFFORD}")).unwrap();
        let gm = grid_max_abs(&model, &patch, (10, 10), &|m, s, p| el1_general(m, s, p)).unwrap();
        assert!(gm.max_abs < 1e-6, "max |EL1| = {:.3e}", gm.max_abs);
        let p = patch.chart_point(&model, 0.3, 0.5).unwrap();
        assert_abs_diff_eq!(h_cr(&model, &patch, &p).unwrap(), 1.0 / 16.0, epsilon = 1e-9);
    }

    #[test]
    fn scan_tails_diverge_at_t_02() {
        let cs: Vec<f64> = (0..25).map(|i| 0.02 + 0.96 * i as f64 / 24.0).collect();
        let table = scan_rossi_e2(&cs, 0.2).unwrap();
        assert!(table.warnings.is_empty(), "{:?}", table.warnings);
        assert!(table.lower_tail_monotone && table.upper_tail_monotone);
        let first = table.rows.first().unwrap();
        let last = table.rows.last().unwrap();
        assert!(first.e2 < 0.0 && last.e2 > 0.0);
    }

    #[test]
    fn scan_at_t_zero_is_antisymmetric_about_the_symmetric_slice() {
        let cs = [0.3, 0.4, 0.5, CLIFFORD, (1.0f64 - 0.09).sqrt(), (1.0f64 - 0.16).sqrt(), (1.0f64 - 0.25).sqrt()];
        let table = scan_rossi_e2(&cs, 0.0).unwrap();
        let at = |c: f64| {
            table
                .rows
                .iter()
                .find(|r| (r.c - c).abs() < 1e-12)
                .map(|r| r.e2)
                .expect("requested slice missing from the table")
        };
        for c in [0.3f64, 0.4, 0.5] {
            let mirrored = (1.0 - c * c).sqrt();
            assert_abs_diff_eq!(at(c), -at(mirrored), epsilon = 1e-8);
        }
        assert_abs_diff_eq!(at(CLIFFORD), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn scan_warns_when_t_violates_both_conditions() {
        let cs: Vec<f64> = (0..10).map(|i| 0.1 + 0.08 * i as f64).collect();
        let table = scan_rossi_e2(&cs, 0.5).unwrap();
        assert!(!table.warnings.is_empty());
        // Deep negative t fails the lower condition as well.
        assert!(!e2_divergence_condition(-0.5));
        assert!(e2_divergence_condition(-0.2) && e2_divergence_condition(0.2));
    }

    #[test]
    fn scan_rejects_slices_outside_the_collar() {
        assert!(matches!(
            scan_rossi_e2(&[0.5, 0.9995], 0.2),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn ellipse_root_lands_between_the_vertices() {
        let (t0, s0) = ellipse_hcr_root(2.0, 1.0).unwrap();
        assert!(t0 > 0.0 && t0 < std::f64::consts::FRAC_PI_2);
        assert_abs_diff_eq!(s0, ellipse_arclength(2.0, 1.0, t0), epsilon = 1e-12);
        let model = models::from_spec("torus-ellipse:2,1").unwrap();
        let patch = surface::from_spec(&model, &format!("torus-slice:{s0}")).unwrap();
        let p = patch.chart_point(&model, 1.0, 1.0).unwrap();
        assert!(h_cr(&model, &patch, &p).unwrap().abs() < 1e-8);
    }

    #[test]
    fn round_ellipse_violates_the_hypothesis() {
        match ellipse_hcr_root(1.0, 1.0) {
            Err(Error::InapplicableModel { reason }) => {
                assert!(reason.contains("hypothesis of Lemma 6.2 violated"))
            }
            other => panic!("expected the hypothesis guard, got {other:?}"),
        }
    }

    #[test]
    fn spot_checks_find_positive_energies() {
        let r = spot_check_no_zero_e1("rossi:0", "rossi-sigma", 5).unwrap();
        assert_eq!(r.outcome, SpotOutcome::AllPositive);
        assert!(r.non_proof);
        assert!(r.min_e1.unwrap() > 0.1, "min E1 = {:?}", r.min_e1);

        let r = spot_check_no_zero_e1("torus-circle:1", "torus-slice", 4).unwrap();
        assert_eq!(r.outcome, SpotOutcome::AllPositive);
    }

    #[test]
    fn spot_check_skips_models_outside_the_hypothesis() {
        let r = spot_check_no_zero_e1("rossi:0.2", "rossi-sigma", 5).unwrap();
        assert_eq!(r.outcome, SpotOutcome::Skipped);
        assert!(r.samples.is_empty() && !r.warnings.is_empty());

        let r = spot_check_no_zero_e1("disk-bundle", "cylinder", 3).unwrap();
        assert_eq!(r.outcome, SpotOutcome::Skipped);
    }
}
