//! Command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::audit::{self, IdentityCheck};
use crate::error::{Error, Result};
use crate::io::{self, InputDocument, SurfaceDocument};
use crate::level::{self, LevelOptions};
use crate::network::PlanarComplex;
use crate::solver::{self, HarmonicField};
use crate::tiler::{self, FlatSurface, TileOptions};
use crate::{fixtures, surgery, svg};

pub const TOL_ENV: &str = "FLAT_TILER_TOL";
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "flat-tiler", version, about = "Harmonic fields on planar networks and their rectangle tilings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the Dirichlet problem and report energy, fluxes and residuals.
    Solve(SolveArgs),
    /// Solve, tile, verify and write the surface document.
    Tile(TileArgs),
    /// Re-check a stored surface document against its input.
    Verify(VerifyArgs),
    /// Write one of the built-in test networks as an input document.
    Fixture(FixtureArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub input: PathBuf,
    /// Field document path [default: <input>.field.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip the stages that need distinct values on adjacent vertices.
    #[arg(long)]
    pub allow_flat_edges: bool,
    /// Also write the run report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Auto,
    Annulus,
    Pants,
    Ladder,
}

#[derive(Debug, Args)]
pub struct TileArgs {
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub mode: Mode,
    /// Tile annuli through edges whose ends share a value.
    #[arg(long)]
    pub allow_flat_edges: bool,
    /// Directory for SVG renderings.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Number of regular levels drawn in the input rendering.
    #[arg(long, default_value_t = 8)]
    pub levels: usize,
    /// Surface document path [default: <input>.surface.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub surface: PathBuf,
    pub input: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FixtureName {
    Annulus,
    Pants,
    Ladder4,
    Ladder5,
    TripleSaddle,
    Grid,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(value_enum)]
    pub name: FixtureName,
    /// Boundary value on the outer cycle.
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    /// Vertices per ring of the annulus.
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub nx: usize,
    #[arg(long, default_value_t = 20)]
    pub ny: usize,
    #[arg(long, default_value_t = 1)]
    pub holes: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Serialize)]
pub struct Stage {
    pub name: String,
    pub status: String,
    pub seconds: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub stages: Vec<Stage>,
    pub values: Vec<(String, f64)>,
    pub checks: Vec<IdentityCheck>,
    pub exit_code: i32,
    pub error: Option<String>,
}

impl RunReport {
    fn new(command: &str) -> Self {
        RunReport {
            schema_version: io::SCHEMA_VERSION,
            command: command.into(),
            stages: Vec::new(),
            values: Vec::new(),
            checks: Vec::new(),
            exit_code: 0,
            error: None,
        }
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f();
        let (status, detail) = match &r {
            Ok(_) => ("ok", String::new()),
            Err(e) => ("failed", e.to_string()),
        };
        self.stages.push(Stage { name: name.into(), status: status.into(), seconds: t.elapsed().as_secs_f64(), detail });
        r
    }

    fn skip(&mut self, name: &str, why: &str) {
        self.stages.push(Stage { name: name.into(), status: "skipped".into(), seconds: 0.0, detail: why.into() });
    }

    fn value(&mut self, name: impl Into<String>, v: f64) {
        self.values.push((name.into(), v));
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let status = if self.exit_code == 0 { "ok".to_string() } else { format!("failed (exit {})", self.exit_code) };
        let _ = writeln!(s, "flat-tiler {}: {status}", self.command);
        for st in &self.stages {
            let _ = writeln!(s, "  stage  {:<14} {:<8} {:>9.4}s  {}", st.name, st.status, st.seconds, st.detail);
        }
        for (k, v) in &self.values {
            let _ = writeln!(s, "  value  {k:<28} {v}");
        }
        for c in &self.checks {
            let mark = if c.passed { "ok" } else { "FAIL" };
            let _ = writeln!(s, "  check  {:<28} {:>11.3e} <= {:<9.1e} {:<4}  {}", c.name, c.residual, c.tolerance, mark, c.detail);
        }
        if let Some(e) = &self.error {
            let _ = writeln!(s, "  error  {e}");
        }
        s
    }
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Degenerate { .. } => 3,
        Error::Solver(_) => 4,
        Error::Consistency(_) | Error::NotFound(_) | Error::NotApplicable(_) => 5,
        _ => 2,
    }
}

/// Relative tolerance from the environment, or the default.
pub fn tolerance() -> Result<f64> {
    match std::env::var(TOL_ENV) {
        Err(_) => Ok(DEFAULT_TOL),
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(t) if t.is_finite() && t > 0.0 => Ok(t),
            _ => Err(Error::Malformed(format!("{TOL_ENV}={s} is not a positive number"))),
        },
    }
}

fn with_suffix(input: &Path, suffix: &str) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    input.with_file_name(format!("{stem}.{suffix}"))
}

/// Runs one command; prints the report to stdout and returns the exit code.
pub fn run(cli: Cli) -> i32 {
    let name = match &cli.command {
        Command::Solve(_) => "solve",
        Command::Tile(_) => "tile",
        Command::Verify(_) => "verify",
        Command::Fixture(_) => "fixture",
    };
    let mut rep = RunReport::new(name);
    let report_path = match &cli.command {
        Command::Solve(a) => a.report.clone(),
        Command::Tile(a) => a.report.clone(),
        Command::Verify(a) => a.report.clone(),
        Command::Fixture(_) => None,
    };
    let result = tolerance().and_then(|tol| match cli.command {
        Command::Solve(a) => cmd_solve(&a, tol, &mut rep),
        Command::Tile(a) => cmd_tile(&a, tol, &mut rep),
        Command::Verify(a) => cmd_verify(&a, tol, &mut rep),
        Command::Fixture(a) => cmd_fixture(&a),
    });
    rep.exit_code = match result {
        Ok(()) if rep.failed_checks().next().is_some() => 5,
        Ok(()) => 0,
        Err(e) => {
            rep.error = Some(e.to_string());
            exit_code(&e)
        }
    };
    print!("{}", rep.render());
    for c in rep.failed_checks() {
        eprintln!("identity failed: {} (residual {:e}, tolerance {:e}) {}", c.name, c.residual, c.tolerance, c.detail);
    }
    if let Some(e) = &rep.error {
        eprintln!("error: {e}");
    }
    if let Some(p) = report_path {
        if let Err(e) = io::write(&p, &rep) {
            eprintln!("error: {e}");
            return rep.exit_code.max(2);
        }
    }
    rep.exit_code
}

fn load(rep: &mut RunReport, path: &Path) -> Result<(InputDocument, PlanarComplex)> {
    rep.stage("read", || {
        let doc = io::read_input(path)?;
        let complex = doc.to_complex()?;
        Ok((doc, complex))
    })
}

fn solve_checks(rep: &mut RunReport, complex: &PlanarComplex, field: &HarmonicField, tol: f64) {
    let g = &field.values;
    let energy = solver::energy(g, complex);
    let fluxes = solver::boundary_fluxes(g, complex);
    let c = fluxes[0];
    rep.value("energy", energy);
    rep.value("C (outer flux length)", c);
    for (i, f) in fluxes.iter().enumerate().skip(1) {
        rep.value(format!("flux of inner boundary {}", i - 1), *f);
    }
    let max_c = complex.conductance.iter().fold(0.0f64, |a, &b| a.max(b));
    let scale = field.span() * max_c * complex.max_degree() as f64;
    let check = |name: &str, residual: f64, detail: String| IdentityCheck {
        name: name.into(),
        residual,
        tolerance: tol,
        passed: residual <= tol,
        detail,
    };
    rep.checks.push(check("harmonicity", field.residual / scale, format!("max |Laplacian| {:e}", field.residual)));
    let total: f64 = fluxes.iter().sum();
    rep.checks.push(check("flux conservation", total.abs() / c.abs(), format!("sum of boundary fluxes {total:e}")));
    rep.checks.push(check("energy = k * C", (energy - field.k() * c).abs() / energy, String::new()));
}

fn degenerate_message(e: &Error) -> Option<String> {
    match e {
        Error::Degenerate { vertices, .. } => Some(format!("degenerate vertices: {vertices:?}")),
        _ => None,
    }
}

fn cmd_solve(a: &SolveArgs, tol: f64, rep: &mut RunReport) -> Result<()> {
    let (doc, complex) = load(rep, &a.input)?;
    let field = rep.stage("solve", || solver::solve(&complex, doc.k))?;
    solve_checks(rep, &complex, &field, tol);
    let out = a.out.clone().unwrap_or_else(|| with_suffix(&a.input, "field.json"));
    io::write(&out, &io::FieldDocument::new(&complex, &field))?;

    if a.allow_flat_edges && !level::flat_edges(&field, &complex).is_empty() {
        rep.skip("index", "flat edges present");
        return Ok(());
    }
    let r = rep.stage("index", || level::index_formula_check(&field, &complex));
    match r {
        Ok(r) => {
            rep.value("singular vertices", r.singular().count() as f64);
            rep.value("index sum", r.sum as f64);
            rep.checks.push(IdentityCheck {
                name: "index sum = 2 - m".into(),
                residual: (r.sum - (2 - complex.m() as i64)).abs() as f64,
                tolerance: 0.0,
                passed: r.holds,
                detail: format!("sum {}, chi {}", r.sum, r.chi),
            });
            Ok(())
        }
        Err(e) => {
            if let Some(m) = degenerate_message(&e) {
                eprintln!("{m}");
            }
            Err(e)
        }
    }
}

fn resolve_mode(mode: Mode, m: usize) -> Result<&'static str> {
    let mismatch = |name: &str, needs: &str| Err(Error::ModeMismatch { mode: name.into(), needs: needs.into(), m });
    match mode {
        Mode::Annulus if m != 2 => mismatch("annulus", "m = 2"),
        Mode::Pants if m != 3 => mismatch("pants", "m = 3"),
        Mode::Ladder if m < 3 => mismatch("ladder", "m >= 3"),
        Mode::Auto if m < 2 => mismatch("auto", "m >= 2"),
        Mode::Auto => Ok(match m {
            2 => "annulus",
            3 => "pants",
            _ => "ladder",
        }),
        Mode::Annulus => Ok("annulus"),
        Mode::Pants => Ok("pants"),
        Mode::Ladder => Ok("ladder"),
    }
}

/// Two-sided lengths of the level set through every singular point.
fn two_sided_checks(complex: &PlanarComplex, field: &HarmonicField, surface: &FlatSurface, tol: f64) -> Result<IdentityCheck> {
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for p in &surface.singular_points {
        let h = field.values[p.vertex];
        let curve = level::extract_level(field, complex, h, LevelOptions::default())?;
        let (li, le) = surgery::two_sided_length(complex, field, &curve)?;
        let r = (li - le).abs() / le;
        if r >= worst {
            worst = r;
            detail = format!("level {h}: interior {li}, exterior {le}");
        }
    }
    Ok(IdentityCheck { name: "two-sided lengths".into(), residual: worst, tolerance: tol, passed: worst <= tol, detail })
}

fn cmd_tile(a: &TileArgs, tol: f64, rep: &mut RunReport) -> Result<()> {
    let (doc, complex) = load(rep, &a.input)?;
    let mode = resolve_mode(a.mode, complex.m())?;
    let field = rep.stage("solve", || solver::solve(&complex, doc.k))?;
    solve_checks(rep, &complex, &field, tol);
    let opts = TileOptions { allow_flat_edges: a.allow_flat_edges };
    let tiled = rep.stage("tile", || match mode {
        "pants" => tiler::tile_pair_of_pants(&complex, &field),
        "ladder" => tiler::tile_ladder(&complex, &field),
        _ => tiler::tile_surface(&complex, &field, opts),
    });
    let surface = match tiled {
        Ok(s) => s,
        Err(e) => {
            if let Some(m) = degenerate_message(&e) {
                eprintln!("{m}");
            }
            return Err(e);
        }
    };
    rep.value("cylinders", surface.cylinders.len() as f64);
    rep.value("singular points", surface.singular_points.len() as f64);
    rep.value("area", surface.area);
    for p in &surface.singular_points {
        rep.value(format!("cone angle / pi at vertex {}", p.vertex), p.cone_angle / std::f64::consts::PI);
    }
    let checks = rep.stage("verify", || audit::audit_surface(&complex, &field, &surface, tol))?;
    rep.checks.extend(checks);
    if !surface.singular_points.is_empty() {
        let c = rep.stage("two-sided", || two_sided_checks(&complex, &field, &surface, tol))?;
        rep.checks.push(c);
    }
    if rep.failed_checks().next().is_some() {
        // fail closed: nothing unverified is written
        return Ok(());
    }
    let sdoc = SurfaceDocument {
        schema_version: io::SCHEMA_VERSION,
        mode: mode.into(),
        k: doc.k,
        vertices: complex.num_vertices(),
        edges: complex.edges().len(),
        surface,
    };
    let out = a.out.clone().unwrap_or_else(|| with_suffix(&a.input, "surface.json"));
    io::write(&out, &sdoc)?;
    if let Some(dir) = &a.svg {
        rep.stage("svg", || write_svgs(dir, &complex, &field, &sdoc.surface, a.levels))?;
    }
    Ok(())
}

fn write_svgs(dir: &Path, complex: &PlanarComplex, field: &HarmonicField, surface: &FlatSurface, levels: usize) -> Result<()> {
    let fail = |e: std::io::Error| Error::Malformed(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(fail)?;
    for cyl in &surface.cylinders {
        std::fs::write(dir.join(format!("cylinder_{}.svg", cyl.id)), svg::cylinder_svg(cyl)).map_err(fail)?;
    }
    let critical: Vec<f64> = level::critical_values(field, complex)
        .map(|v| v.into_iter().filter(|&x| x > field.bottom && x < field.top).collect())
        .unwrap_or_default();
    let mut values = critical.clone();
    values.extend(svg::regular_sample(field, &critical, levels));
    let singular: Vec<usize> = surface.singular_points.iter().map(|p| p.vertex).collect();
    std::fs::write(dir.join("input.svg"), svg::input_svg(complex, field, &values, &singular)).map_err(fail)?;
    Ok(())
}

fn cmd_verify(a: &VerifyArgs, tol: f64, rep: &mut RunReport) -> Result<()> {
    let sdoc = rep.stage("read surface", || io::read_surface(&a.surface))?;
    let (doc, complex) = load(rep, &a.input)?;
    if sdoc.vertices != complex.num_vertices() || sdoc.edges != complex.edges().len() || sdoc.k != doc.k {
        return Err(Error::Malformed(format!(
            "surface was built from {} vertices, {} edges, k = {}; input has {}, {}, {}",
            sdoc.vertices,
            sdoc.edges,
            sdoc.k,
            complex.num_vertices(),
            complex.edges().len(),
            doc.k
        )));
    }
    let field = rep.stage("solve", || solver::solve(&complex, doc.k))?;
    let checks = rep.stage("verify", || audit::audit_surface(&complex, &field, &sdoc.surface, tol))?;
    rep.checks.extend(checks);
    Ok(())
}

fn cmd_fixture(a: &FixtureArgs) -> Result<()> {
    let complex = match a.name {
        FixtureName::Annulus => {
            if a.n < 3 {
                return Err(Error::Malformed("annulus needs n >= 3".into()));
            }
            fixtures::annulus(a.n)
        }
        FixtureName::Pants => fixtures::pants(),
        FixtureName::Ladder4 => fixtures::ladder4(),
        FixtureName::Ladder5 => fixtures::ladder5(),
        FixtureName::TripleSaddle => fixtures::triple_saddle(),
        FixtureName::Grid => {
            if a.nx < 6 || a.ny < 6 {
                return Err(Error::Malformed("grid needs nx, ny >= 6".into()));
            }
            fixtures::random_grid(&fixtures::GridSpec::new(a.nx, a.ny, a.holes, a.seed))
        }
    };
    io::write(&a.out, &InputDocument::from_complex(&complex, a.k))
}
