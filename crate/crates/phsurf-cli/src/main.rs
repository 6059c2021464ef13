//! Command-line front end: model catalog, energy quadrature, residual
//! grids, numeric first variations, the named-check registry, parameter
//! scans and conformal invariance sweeps.
//!
//! Exit status: 0 success, 1 a requested check failed, 2 usage or
//! evaluation error. All subcommands accept `--json` for machine output
//! and `--config <file>` with flat `key = value` lines mirroring the
//! long flags; explicit flags override the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use phsurf::functionals::{conformal_invariance_sweep, integrate, Functional};
use phsurf::models::{self, ModelGeometry};
use phsurf::surface::{self, derivation_alpha, h_cr, p_mean_curvature, SurfacePatch};
use phsurf::variational::{el1_general, el2_cyz, first_variation, Deformation, TOL_HCR};
use phsurf::verify::{self, LemmaReport, Status};

#[derive(Parser)]
#[command(
    name = "phsurf",
    version,
    about = "Surface energies and critical-surface checks on model pseudohermitian 3-manifolds",
    after_help = "Set PHSURF_WORKERS to bound the compute thread count.\n\
                  Floats in CSV and JSON output carry 17 significant digits."
)]
struct Cli {
    /// Flat key = value config file mirroring the long flags; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Emit a machine-readable JSON report instead of aligned text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the model catalog.
    Models,
    /// Integrate an energy over a surface patch.
    Evaluate(EvaluateArgs),
    /// Tabulate pointwise residuals over a parameter grid as CSV.
    #[command(after_help = "CSV columns: u, v, H, alpha, H_cr, residual.\n\
                            Nodes whose stencil leaves the chart are skipped.")]
    Residual(ResidualArgs),
    /// Differentiate an energy along a bump deformation.
    Variation(VariationArgs),
    /// Run the named checks of the critical-surface catalog.
    Verify(VerifyArgs),
    /// Scan a slice family and tabulate its energy as CSV.
    #[command(after_help = "CSV columns: c, e2, error_estimate.")]
    Scan(ScanArgs),
    /// Sweep random conformal factors and measure the dA1 invariance defect.
    ConformalCheck(ConformalArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    surface: Option<String>,
    /// E1 or E2.
    #[arg(long)]
    functional: Option<String>,
    /// Quadrature grid, e.g. 128x128; each axis at least 8.
    #[arg(long)]
    grid: Option<String>,
    /// Write the JSON report here as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ResidualArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    surface: Option<String>,
    /// Which residual: E1 or E2.
    #[arg(long)]
    which: Option<String>,
    /// Scan grid, e.g. 48x48; each axis at least 8.
    #[arg(long)]
    grid: Option<String>,
    /// CSV destination; without it the CSV streams to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VariationArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    surface: Option<String>,
    /// E1 or E2.
    #[arg(long)]
    functional: Option<String>,
    /// Bump center and width: u0,v0,width.
    #[arg(long)]
    bump: Option<String>,
    /// Normal and Reeb weights of the bump: f,g. Defaults to 1,0.
    #[arg(long)]
    fields: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run every registered check.
    #[arg(long, conflicts_with = "lemma")]
    all: bool,
    /// Run one check by its catalog id, e.g. 5.4.
    #[arg(long)]
    lemma: Option<String>,
    /// Override the residual-scan grid, e.g. 32x32; quadrature grids are fixed.
    #[arg(long)]
    grid: Option<String>,
    /// Write the JSON report here as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    /// Scan E2 over the slice family rho_1 = c of a Rossi model.
    #[arg(long = "rossi-e2")]
    rossi_e2: bool,
    /// Model parameter t in (-1, 1).
    #[arg(long)]
    t: Option<f64>,
    /// Slice range start:stop:count, e.g. 0.02:0.98:64.
    #[arg(long)]
    c: Option<String>,
    /// CSV destination; without it the CSV streams to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConformalArgs {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    surface: Option<String>,
    /// How many random factors to sweep.
    #[arg(long)]
    factors: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest tolerated relative deviation.
    #[arg(long)]
    tol: Option<f64>,
}

/// Values a run actually used, echoed into every JSON report so the run
/// can be reproduced bit-exactly from the report alone.
#[derive(serde::Serialize)]
struct RunConfig {
    model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    surface: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    functional: Option<String>,
    grid: [usize; 2],
    /// Residuals are undefined where |H_cr| falls below this.
    tol_hcr: f64,
    /// Levi length below which a node counts as singular.
    singular_eps: f64,
    /// Finite-difference step in parameter space.
    fd_step: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<String>,
    seed: u64,
}

impl RunConfig {
    fn new(model: &str, patch: Option<&SurfacePatch>, grid: (usize, usize)) -> Self {
        RunConfig {
            model: model.into(),
            surface: patch.map(|p| p.name().to_string()),
            functional: None,
            grid: [grid.0, grid.1],
            tol_hcr: TOL_HCR,
            singular_eps: patch.map_or(0.0, |p| p.singular_threshold()),
            fd_step: patch.map_or(0.0, |p| p.param_step()),
            out: None,
            seed: 0,
        }
    }
}

/// Flat key = value file; '#' starts a comment. Keys mirror long flags.
struct FileConfig(BTreeMap<String, String>);

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut map = BTreeMap::new();
        if let Some(path) = path {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| anyhow!("config line {}: expected key = value", i + 1))?;
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(FileConfig(map))
    }

    /// Flag wins, then the file, then the built-in default.
    fn pick<T: FromStr + Clone>(&self, flag: &Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.pick_opt(flag, key)?
            .map_or_else(|| Ok(default), Ok)
    }

    fn pick_opt<T: FromStr + Clone>(&self, flag: &Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(Some(v.clone()));
        }
        match self.0.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| anyhow!("config key '{key}': {e}")),
            None => Ok(None),
        }
    }

    fn require<T: FromStr + Clone>(&self, flag: &Option<T>, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.pick_opt(flag, key)?
            .ok_or_else(|| anyhow!("missing --{key} (or config key '{key}')"))
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| anyhow!("grid '{s}': expected NxM"))?;
    let g = (a.trim().parse::<usize>()?, b.trim().parse::<usize>()?);
    if g.0 < 8 || g.1 < 8 {
        bail!("grid '{s}': each axis needs at least 8 cells");
    }
    Ok(g)
}

fn parse_functional(s: &str) -> Result<Functional> {
    match s.to_ascii_uppercase().as_str() {
        "E1" => Ok(Functional::E1),
        "E2" => Ok(Functional::E2),
        other => bail!("unknown functional '{other}'; expected E1 or E2"),
    }
}

fn parse_triple(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        bail!("'{s}': expected u0,v0,width");
    }
    Ok((parts[0].trim().parse()?, parts[1].trim().parse()?, parts[2].trim().parse()?))
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        bail!("'{s}': expected f,g");
    }
    Ok((parts[0].trim().parse()?, parts[1].trim().parse()?))
}

/// start:stop:count, endpoints included.
fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("range '{s}': expected start:stop:count");
    }
    let (start, stop) = (parts[0].parse::<f64>()?, parts[1].parse::<f64>()?);
    let count = parts[2].parse::<usize>()?;
    if count < 2 || stop <= start {
        bail!("range '{s}': need stop > start and count >= 2");
    }
    Ok((0..count)
        .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
        .collect())
}

fn load_pair(model_spec: &str, surface_spec: &str) -> Result<(ModelGeometry, SurfacePatch)> {
    let model = models::from_spec(model_spec)?;
    let patch = surface::from_spec(&model, surface_spec)?;
    Ok((model, patch))
}

fn write_report(out: Option<&Path>, json: bool, report: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    if let Some(path) = out {
        fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))?;
    }
    if json {
        println!("{text}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_workers() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_workers() -> Result<()> {
    if let Ok(raw) = std::env::var("PHSURF_WORKERS") {
        let n: usize = raw
            .parse()
            .map_err(|_| anyhow!("PHSURF_WORKERS must be a positive integer, got '{raw}'"))?;
        if n == 0 {
            bail!("PHSURF_WORKERS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("installing the worker pool")?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<bool> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match &cli.cmd {
        Cmd::Models => run_models(cli),
        Cmd::Evaluate(a) => run_evaluate(cli, &file, a),
        Cmd::Residual(a) => run_residual(cli, &file, a),
        Cmd::Variation(a) => run_variation(cli, &file, a),
        Cmd::Verify(a) => run_verify(cli, &file, a),
        Cmd::Scan(a) => run_scan(cli, &file, a),
        Cmd::ConformalCheck(a) => run_conformal(cli, &file, a),
    }
}

fn run_models(cli: &Cli) -> Result<bool> {
    let specs = models::catalog();
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&specs)?);
        return Ok(true);
    }
    for s in specs {
        println!("{s}");
    }
    Ok(true)
}

#[derive(serde::Serialize)]
struct EvaluateReport {
    config: RunConfig,
    value: f64,
    error_estimate: f64,
    excluded_fraction: f64,
    nodes: usize,
}

fn run_evaluate(cli: &Cli, file: &FileConfig, a: &EvaluateArgs) -> Result<bool> {
    let model_spec: String = file.require(&a.model, "model")?;
    let surface_spec: String = file.require(&a.surface, "surface")?;
    let func = parse_functional(&file.require(&a.functional, "functional")?)?;
    let grid = parse_grid(&file.pick(&a.grid, "grid", "48x48".into())?)?;

    let (model, patch) = load_pair(&model_spec, &surface_spec)?;
    let q = integrate(&model, &patch, func, grid)?;

    let mut config = RunConfig::new(&model_spec, Some(&patch), grid);
    config.functional = Some(format!("{func:?}"));
    config.out = a.out.as_ref().map(|p| p.display().to_string());
    let report = EvaluateReport {
        config,
        value: q.value,
        error_estimate: q.error_estimate,
        excluded_fraction: q.excluded_fraction,
        nodes: q.nodes,
    };
    write_report(a.out.as_deref(), cli.json, &report)?;
    if !cli.json {
        println!("model              {model_spec}");
        println!("surface            {surface_spec}");
        println!("functional         {func:?}");
        println!("grid               {}x{}", grid.0, grid.1);
        println!("value              {:.16e}", q.value);
        println!("error_estimate     {:.16e}", q.error_estimate);
        println!("excluded_fraction  {:.16e}", q.excluded_fraction);
        println!("nodes              {}", q.nodes);
    }
    Ok(true)
}

#[derive(serde::Serialize)]
struct ResidualSummary {
    config: RunConfig,
    which: String,
    evaluated: usize,
    skipped: usize,
    max_abs_residual: f64,
    argmax: [f64; 2],
}

fn run_residual(cli: &Cli, file: &FileConfig, a: &ResidualArgs) -> Result<bool> {
    let model_spec: String = file.require(&a.model, "model")?;
    let surface_spec: String = file.require(&a.surface, "surface")?;
    let which = parse_functional(&file.require(&a.which, "which")?)?;
    let grid = parse_grid(&file.pick(&a.grid, "grid", "48x48".into())?)?;

    let (model, patch) = load_pair(&model_spec, &surface_spec)?;
    let residual_at = |u: f64, v: f64| -> phsurf::Result<[f64; 4]> {
        let p = patch.chart_point(&model, u, v)?;
        let h = p_mean_curvature(&model, &patch, &p)?;
        let alpha = derivation_alpha(&model, &patch, &p)?;
        let hcr = h_cr(&model, &patch, &p)?;
        let res = match which {
            Functional::E1 => el1_general(&model, &patch, &p)?,
            Functional::E2 => el2_cyz(&model, &patch, &p)?,
        };
        Ok([h, alpha, hcr, res])
    };

    let mut csv = String::from("u,v,H,alpha,H_cr,residual\n");
    let mut evaluated = 0usize;
    let mut skipped = 0usize;
    let mut max_abs = 0.0f64;
    let mut argmax = [f64::NAN, f64::NAN];
    for (u, v) in patch.midpoint_grid(grid.0, grid.1)? {
        match residual_at(u, v) {
            Ok([h, alpha, hcr, res]) => {
                evaluated += 1;
                if res.abs() > max_abs {
                    max_abs = res.abs();
                    argmax = [u, v];
                }
                csv.push_str(&format!(
                    "{u:.16e},{v:.16e},{h:.16e},{alpha:.16e},{hcr:.16e},{res:.16e}\n"
                ));
            }
            Err(_) => skipped += 1,
        }
    }
    if evaluated == 0 {
        bail!("no grid node evaluated cleanly on {surface_spec}");
    }

    let mut config = RunConfig::new(&model_spec, Some(&patch), grid);
    config.out = a.out.as_ref().map(|p| p.display().to_string());
    let summary = ResidualSummary {
        config,
        which: format!("{which:?}"),
        evaluated,
        skipped,
        max_abs_residual: max_abs,
        argmax,
    };
    match &a.out {
        Some(path) => {
            fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                println!("wrote               {}", path.display());
                println!("evaluated           {evaluated}");
                println!("skipped             {skipped}");
                println!("max |residual|      {max_abs:.16e}");
                println!("at (u, v)           ({:.6}, {:.6})", argmax[0], argmax[1]);
            }
        }
        None => print!("{csv}"),
    }
    Ok(true)
}

#[derive(serde::Serialize)]
struct VariationReport {
    config: RunConfig,
    bump: [f64; 3],
    fields: [f64; 2],
    derivative: f64,
}

fn run_variation(cli: &Cli, file: &FileConfig, a: &VariationArgs) -> Result<bool> {
    let model_spec: String = file.require(&a.model, "model")?;
    let surface_spec: String = file.require(&a.surface, "surface")?;
    let func = parse_functional(&file.require(&a.functional, "functional")?)?;
    let (u0, v0, width) = parse_triple(&file.require(&a.bump, "bump")?)?;
    let (wf, wg) = parse_pair(&file.pick(&a.fields, "fields", "1,0".into())?)?;
    if width <= 0.0 {
        bail!("bump width must be positive, got {width}");
    }

    let (model, patch) = load_pair(&model_spec, &surface_spec)?;
    let rect = patch
        .rect()
        .ok_or_else(|| anyhow!("variation needs an immersion patch, {surface_spec} is a level set"))?;
    let periodic = patch.periodic_axes().unwrap_or([false, false]);
    let periods = [
        periodic[0].then(|| rect[0][1] - rect[0][0]),
        periodic[1].then(|| rect[1][1] - rect[1][0]),
    ];
    let d = Deformation::bump(u0, v0, width, wf, wg, periods);
    let fv = first_variation(&model, &patch, func, &d)?;

    let mut config = RunConfig::new(&model_spec, Some(&patch), (0, 0));
    config.functional = Some(format!("{func:?}"));
    config.out = a.out.as_ref().map(|p| p.display().to_string());
    let report = VariationReport {
        config,
        bump: [u0, v0, width],
        fields: [wf, wg],
        derivative: fv,
    };
    write_report(a.out.as_deref(), cli.json, &report)?;
    if !cli.json {
        println!("model       {model_spec}");
        println!("surface     {surface_spec}");
        println!("functional  {func:?}");
        println!("bump        center ({u0}, {v0}), width {width}");
        println!("fields      normal {wf}, reeb {wg}");
        println!("derivative  {fv:.16e}");
    }
    Ok(true)
}

#[derive(serde::Serialize)]
struct VerifyReport {
    scan_grid: Option<[usize; 2]>,
    reports: Vec<LemmaReport>,
}

fn run_verify(cli: &Cli, file: &FileConfig, a: &VerifyArgs) -> Result<bool> {
    let all = a.all || file.pick(&None::<String>, "all", "false".into())? == "true";
    let lemma: Option<String> = file.pick_opt(&a.lemma, "lemma")?;
    let scan = match file.pick_opt(&a.grid, "grid")? {
        Some(s) => Some(parse_grid(&s)?),
        None => None,
    };
    let reports = match (&lemma, all) {
        (Some(id), _) => vec![verify::verify_lemma_with(id, scan)?],
        (None, true) => verify::run_all_with(scan)?,
        (None, false) => bail!("pass --all or --lemma <id>"),
    };
    let ok = reports.iter().all(|r| r.status == Status::Pass);
    let report = VerifyReport { scan_grid: scan.map(|g| [g.0, g.1]), reports: reports.clone() };
    write_report(a.out.as_deref(), cli.json, &report)?;
    if !cli.json {
        for r in &reports {
            let tag = if r.status == Status::Pass { "pass" } else { "FAIL" };
            println!("lemma {:<4} {}  {} ms", r.lemma_id, tag, r.runtime_ms);
            for m in &r.measured {
                let mark = if m.pass { "ok  " } else { "FAIL" };
                let rel = match m.kind {
                    verify::RowKind::Within => format!("expected {:.16e} tol {:.3e}", m.expected, m.tolerance),
                    verify::RowKind::AtLeast => format!("floor {:.16e}", m.expected),
                };
                println!("  {mark}  {:<58} {:.16e}  {rel}", m.name, m.value);
                println!("        source: {}", m.provenance);
            }
        }
        println!("{}", if ok { "all checks passed" } else { "checks failed" });
    }
    Ok(ok)
}

fn run_scan(cli: &Cli, file: &FileConfig, a: &ScanArgs) -> Result<bool> {
    let rossi = a.rossi_e2 || file.pick(&None::<String>, "rossi-e2", "false".into())? == "true";
    if !rossi {
        bail!("pass --rossi-e2; it is the only scan implemented");
    }
    let t: f64 = file.require(&a.t, "t")?;
    let cs = parse_range(&file.require(&a.c, "c")?)?;
    let table = verify::scan_rossi_e2(&cs, t)?;

    let mut csv = String::from("c,e2,error_estimate\n");
    for r in &table.rows {
        csv.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", r.c, r.e2, r.error_estimate));
    }
    match &a.out {
        Some(path) => {
            fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&table)?);
            } else {
                println!("wrote               {}", path.display());
                println!("t                   {t}");
                println!("samples             {}", table.rows.len());
                println!("lower tail rising   {}", table.lower_tail_monotone);
                println!("upper tail rising   {}", table.upper_tail_monotone);
                for w in &table.warnings {
                    println!("warning             {w}");
                }
            }
        }
        None => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&table)?);
            } else {
                print!("{csv}");
            }
        }
    }
    Ok(true)
}

#[derive(serde::Serialize)]
struct ConformalReport {
    config: RunConfig,
    factors: usize,
    worst_relative_deviation: f64,
    tolerance: f64,
    pass: bool,
}

fn run_conformal(cli: &Cli, file: &FileConfig, a: &ConformalArgs) -> Result<bool> {
    let model_spec: String = file.require(&a.model, "model")?;
    let surface_spec: String = file.require(&a.surface, "surface")?;
    let factors = file.pick(&a.factors, "factors", 5usize)?;
    let seed = file.pick(&a.seed, "seed", 7u64)?;
    let tol = file.pick(&a.tol, "tol", 1e-4f64)?;
    if factors == 0 || tol <= 0.0 {
        bail!("need at least one factor and a positive tolerance");
    }

    let (model, patch) = load_pair(&model_spec, &surface_spec)?;
    let worst = conformal_invariance_sweep(&model, &patch, factors, seed)?;
    let pass = worst <= tol;

    let mut config = RunConfig::new(&model_spec, Some(&patch), (0, 0));
    config.seed = seed;
    let report = ConformalReport {
        config,
        factors,
        worst_relative_deviation: worst,
        tolerance: tol,
        pass,
    };
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("model            {model_spec}");
        println!("surface          {surface_spec}");
        println!("factors          {factors} (seed {seed})");
        println!("worst deviation  {worst:.16e}");
        println!("tolerance        {tol:.16e}");
        println!("{}", if pass { "invariance holds" } else { "invariance violated" });
    }
    Ok(pass)
}
