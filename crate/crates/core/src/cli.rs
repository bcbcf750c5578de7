//! Command-line front end: `gen`, `solve`, `compare` and `bench`.
//!
//! Every command reads an optional JSON config (`--config`); flags override its keys.
//! Exit codes: 0 success, 1 solver non-convergence, 2 usage or config error.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{sample_density, DensityModel, McParams};
use crate::error::Error;
use crate::field::ScalarField;
use crate::geometry::{build_grid_cloud, build_knn_cloud, BoundarySpec, PointCloud, Stencil};
use crate::io::{read_field_csv, read_points_csv, write_field_csv, write_json, write_points_csv, FieldTable};
use crate::oracles::{brute_tukey_depth, l1_error, linf_error, CANONICAL_DIRECTIONS};
use crate::schemes::{Estimator, GFunction, Hamiltonian, Rhs, SchemeSpec};
use crate::shape::Shape;
use crate::solver::{coarse_to_fine, solve_prepared, SolveOptions, SolveReport, StopReason};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_K: usize = 20;
pub const DEFAULT_STENCIL: &str = "7";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::NonFinite(_)) => EXIT_NOT_CONVERGED,
            _ => EXIT_USAGE,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "lshj", version, about = "Level-set Hamilton-Jacobi solvers on grids and point clouds")]
pub struct Cli {
    /// Worker threads for the sweeps; 0 uses every core.
    #[arg(long, global = true, env = "LSHJ_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a point cloud or lay out a grid, with a JSON manifest.
    Gen(CmdArgs),
    /// Solve a scheme and write the field plus a report.
    Solve(CmdArgs),
    /// Compare a field with another field or with an oracle.
    Compare(CmdArgs),
    /// Run a named benchmark suite and write a CSV table.
    Bench(CmdArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CmdArgs {
    /// JSON file with the same keys as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunConfig,
}

/// Every knob of every command. Unset keys fall back to per-command defaults.
#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// eikonal | tukey | mc2d | mc3d | gauss3d | affine | alpha:A | g:power:A | g:invlog
    #[arg(long)]
    pub hamiltonian: Option<String>,
    /// Shape preset, `kde`, `const:C` or a number; the sampled shape for `gen`.
    #[arg(long)]
    pub density: Option<String>,
    /// Grid node counts, e.g. `64x64`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Point-cloud CSV.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// `W`, `WxW`, `wide:W` or `ring:K`.
    #[arg(long)]
    pub stencil: Option<String>,
    /// Neighbors per node on point clouds.
    #[arg(long)]
    pub k: Option<usize>,
    /// Boundary band width around `[0,1]^d`; defaults to `2h` on clouds.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Number of sampled points for `gen`.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// auto | grid | analytic | mc
    #[arg(long)]
    pub estimator: Option<String>,
    #[arg(long)]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub mc_sigma: Option<f64>,
    #[arg(long)]
    pub kde_points: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `zero`, `const:C`, a number, or a field CSV (a coarser solution is interpolated).
    #[arg(long)]
    pub init: Option<String>,
    /// First field CSV for `compare`.
    #[arg(long)]
    pub a: Option<PathBuf>,
    /// Second field CSV for `compare`.
    #[arg(long)]
    pub b: Option<PathBuf>,
    /// `tukey:SHAPE` or `distance:SHAPE`, used by `compare` instead of `--b`.
    #[arg(long)]
    pub oracle: Option<String>,
    /// tukey-grid | tukey-cloud | eikonal-cloud-2d | eikonal-cloud-3d | affine-grid
    #[arg(long)]
    pub suite: Option<String>,
    /// Comma-separated sizes replacing the suite's defaults.
    #[arg(long)]
    pub sizes: Option<String>,
    /// Main output file (points, field, difference or table CSV).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON output (manifest or report).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($base:ident, $over:ident; $($f:ident),*) => {
        RunConfig { $($f: $over.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let file = File::open(path).map_err(|e| usage(format!("cannot open {}: {e}", path.display())))?;
        serde_json::from_reader(file).map_err(|e| usage(format!("bad config {}: {e}", path.display())))
    }

    /// Keys set in `over` win.
    pub fn merge(self, over: RunConfig) -> RunConfig {
        let base = self;
        merge_fields!(base, over; hamiltonian, density, grid, points, stencil, k, eps, n, dim,
            estimator, mc_samples, mc_sigma, kde_points, tol, max_sweeps, seed, init, a, b,
            oracle, suite, sizes, out, report)
    }

    /// Fills the defaults a command would use so outputs record the full configuration.
    pub fn resolved(&self) -> RunConfig {
        let mut c = self.clone();
        c.seed = Some(self.seed());
        c.tol = Some(self.tol.unwrap_or(3e-3));
        c.max_sweeps = Some(self.max_sweeps.unwrap_or(SolveOptions::default().max_sweeps));
        c.hamiltonian.get_or_insert_with(|| "eikonal".into());
        c.init.get_or_insert_with(|| "zero".into());
        c.estimator.get_or_insert_with(|| "auto".into());
        if c.grid.is_some() {
            c.stencil.get_or_insert_with(|| DEFAULT_STENCIL.into());
        } else {
            c.k.get_or_insert(DEFAULT_K);
        }
        c
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    fn tol(&self) -> CliResult<f64> {
        let tol = self.tol.unwrap_or(3e-3);
        if !(tol > 0.0) {
            return Err(usage(format!("tolerance must be positive, got {tol}")));
        }
        Ok(tol)
    }
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(&cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn resolve(args: &CmdArgs) -> CliResult<RunConfig> {
    let base = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Ok(base.merge(args.run.clone()))
}

fn dispatch(cmd: &Command) -> CliResult<i32> {
    match cmd {
        Command::Gen(a) => cmd_gen(&resolve(a)?.resolved()),
        Command::Solve(a) => cmd_solve(&resolve(a)?.resolved()),
        Command::Compare(a) => cmd_compare(&resolve(a)?.resolved()),
        Command::Bench(a) => {
            // Suites carry per-row tolerances, so only the seed is pinned here.
            let mut c = resolve(a)?;
            c.seed = Some(c.seed());
            cmd_bench(&c)
        }
    }
}

pub fn parse_grid(text: &str, dim: Option<usize>) -> CliResult<Vec<usize>> {
    let parts: Vec<&str> = text.split('x').collect();
    let mut dims = parts
        .iter()
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<usize>, _>>()
        .map_err(|_| usage(format!("bad grid '{text}'")))?;
    if dims.len() == 1 {
        dims = vec![dims[0]; dim.unwrap_or(2)];
    }
    Ok(dims)
}

pub fn parse_hamiltonian(text: &str, dim: usize) -> CliResult<Hamiltonian> {
    let t = text.trim().to_ascii_lowercase();
    let h = match t.as_str() {
        "eikonal" => Hamiltonian::Eikonal,
        "tukey" => Hamiltonian::Tukey,
        "mc2d" | "mcm" => Hamiltonian::Mc2d,
        "mc3d" => Hamiltonian::Mc3d,
        "gauss3d" => Hamiltonian::Gauss3d,
        "affine" if dim == 3 => Hamiltonian::Gauss3d,
        "affine" => Hamiltonian::AlphaFlow { alpha: 1.0 / 3.0 },
        "g:invlog" => Hamiltonian::GFlow(GFunction::InvLog),
        _ => {
            if let Some(a) = t.strip_prefix("alpha:") {
                Hamiltonian::AlphaFlow { alpha: parse_num(a)? }
            } else if let Some(a) = t.strip_prefix("g:power:") {
                Hamiltonian::GFlow(GFunction::Power(parse_num(a)?))
            } else {
                return Err(usage(format!("unknown hamiltonian '{text}'")));
            }
        }
    };
    Ok(h)
}

fn parse_num(s: &str) -> CliResult<f64> {
    s.trim().parse().map_err(|_| usage(format!("bad number '{s}'")))
}

fn mc_params(cfg: &RunConfig, base: McParams) -> McParams {
    McParams {
        samples: cfg.mc_samples.unwrap_or(base.samples),
        sigma: cfg.mc_sigma.unwrap_or(base.sigma),
        kde_points: cfg.kde_points.or(base.kde_points),
    }
}

/// The right-hand side named by `--density`; `f ≡ 1` when unset.
pub fn parse_rhs(cfg: &RunConfig, cloud: &PointCloud) -> CliResult<Rhs> {
    let Some(text) = cfg.density.as_deref() else {
        return Ok(Rhs::Constant(1.0));
    };
    let t = text.trim();
    if let Some(c) = t.strip_prefix("const:") {
        return Ok(Rhs::Constant(parse_num(c)?));
    }
    if let Ok(c) = t.parse::<f64>() {
        return Ok(Rhs::Constant(c));
    }
    let model = if t == "kde" {
        DensityModel::kde_calibrated(cloud)?
    } else {
        let mut m = DensityModel::preset(t, cloud.dim())?;
        m.mc = McParams::calibrated(cloud);
        m
    };
    let mc = mc_params(cfg, model.mc.clone());
    Ok(Rhs::Density(model.with_mc(mc)))
}

pub fn parse_estimator(text: Option<&str>, seed: u64) -> CliResult<Estimator> {
    Ok(match text.map(str::trim) {
        None | Some("auto") => Estimator::Auto,
        Some("grid") => Estimator::GridLineSum,
        Some("analytic") => Estimator::Analytic,
        Some("mc") => Estimator::MonteCarlo { seed },
        Some(other) => return Err(usage(format!("unknown estimator '{other}'"))),
    })
}

/// Grid from `--grid`, or a kNN cloud from `--points`.
pub fn build_domain(cfg: &RunConfig) -> CliResult<PointCloud> {
    match (&cfg.grid, &cfg.points) {
        (Some(_), Some(_)) => Err(usage("give either --grid or --points, not both")),
        (Some(g), None) => {
            let dims = parse_grid(g, cfg.dim)?;
            let stencil = Stencil::parse(cfg.stencil.as_deref().unwrap_or(DEFAULT_STENCIL), dims.len())?;
            let boundary = match cfg.eps {
                Some(e) => BoundarySpec::unit_cube_band(dims.len(), Some(e)),
                None => BoundarySpec::None,
            };
            Ok(build_grid_cloud(&dims, &stencil, boundary)?)
        }
        (None, Some(p)) => {
            let table = read_points_csv(p)?;
            let dim = table.points.first().map(|x| x.len()).unwrap_or(0);
            let boundary = match table.boundary {
                Some(mask) => BoundarySpec::Mask(mask),
                None => BoundarySpec::unit_cube_band(dim, cfg.eps),
            };
            Ok(build_knn_cloud(&table.points, cfg.k.unwrap_or(DEFAULT_K), boundary)?)
        }
        (None, None) => Err(usage("a domain is required: --grid or --points")),
    }
}

/// Initial field from `--init`.
pub fn build_init(cfg: &RunConfig, cloud: &PointCloud, dirichlet: &ScalarField) -> CliResult<ScalarField> {
    let text = cfg.init.as_deref().unwrap_or("zero").trim();
    if text == "zero" {
        return Ok(ScalarField::zeros(cloud.len()));
    }
    if let Some(c) = text.strip_prefix("const:") {
        return Ok(ScalarField::constant(cloud.len(), parse_num(c)?));
    }
    if let Ok(c) = text.parse::<f64>() {
        return Ok(ScalarField::constant(cloud.len(), c));
    }
    let table = read_field_csv(Path::new(text))?;
    let same = table.points.len() == cloud.len() && (0..cloud.len()).all(|i| table.points[i] == cloud.point(i));
    if same {
        return Ok(table.values);
    }
    let d = cloud.dim();
    let m = table.points.len();
    let side = (m as f64).powf(1.0 / d as f64).round() as usize;
    let coarse = if cloud.is_grid() && side.pow(d as u32) == m && side >= 3 {
        build_grid_cloud(&vec![side; d], &Stencil::grid_wide(d, 3, false)?, BoundarySpec::None)?
    } else {
        build_knn_cloud(&table.points, 1, BoundarySpec::None)?
    };
    Ok(coarse_to_fine(&coarse, cloud, &table.values, dirichlet)?)
}

#[derive(Serialize)]
struct Manifest<'a> {
    n: usize,
    d: usize,
    k: usize,
    h: f64,
    dtheta: f64,
    boundary_nodes: usize,
    seed: u64,
    config: &'a RunConfig,
}

fn default_path(p: &Option<PathBuf>, fallback: &str) -> PathBuf {
    p.clone().unwrap_or_else(|| PathBuf::from(fallback))
}

/// Sibling of `path` with the given extension.
fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

pub fn cmd_gen(cfg: &RunConfig) -> CliResult<i32> {
    let seed = cfg.seed();
    let out = default_path(&cfg.out, "points.csv");
    let manifest_path = cfg.report.clone().unwrap_or_else(|| sibling(&out, "json"));
    let cloud = match (&cfg.grid, &cfg.density) {
        (Some(_), _) => build_domain(&RunConfig {
            points: None,
            ..cfg.clone()
        })?,
        (None, Some(name)) => {
            let n = cfg.n.ok_or_else(|| usage("gen --density needs --n"))?;
            let dim = cfg.dim.unwrap_or(2);
            let shape = Shape::preset(name, dim)?;
            let pts = sample_density(&DensityModel::indicator(shape.clone())?, n, seed)?;
            build_knn_cloud(
                &pts,
                cfg.k.unwrap_or(DEFAULT_K),
                BoundarySpec::Band {
                    domain: shape,
                    eps: cfg.eps,
                },
            )?
        }
        (None, None) => return Err(usage("gen needs --grid or --density")),
    };
    let pts: Vec<Vec<f64>> = (0..cloud.len()).map(|i| cloud.point(i).to_vec()).collect();
    write_points_csv(&out, &pts, Some(cloud.boundary_mask()))?;
    let manifest = Manifest {
        n: cloud.len(),
        d: cloud.dim(),
        k: cloud.degree(0),
        h: cloud.h(),
        dtheta: cloud.dtheta(),
        boundary_nodes: cloud.len() - cloud.interior_count(),
        seed,
        config: cfg,
    };
    write_json(&manifest_path, &manifest)?;
    Ok(EXIT_OK)
}

/// Builds and solves the problem described by `cfg` with zero Dirichlet data.
pub fn solve_config(cfg: &RunConfig, cloud: &PointCloud) -> CliResult<SolveReport> {
    let seed = cfg.seed();
    let hamiltonian = parse_hamiltonian(cfg.hamiltonian.as_deref().unwrap_or("eikonal"), cloud.dim())?;
    let rhs = parse_rhs(cfg, cloud)?;
    let spec = SchemeSpec::new(hamiltonian, rhs)?.with_estimator(parse_estimator(cfg.estimator.as_deref(), seed)?);
    let dirichlet = ScalarField::zeros(cloud.len());
    let init = build_init(cfg, cloud, &dirichlet)?;
    let scheme = crate::schemes::Scheme::new(&spec, cloud)?;
    let options = SolveOptions {
        tol: cfg.tol()?,
        max_sweeps: cfg.max_sweeps.unwrap_or(SolveOptions::default().max_sweeps),
        ..SolveOptions::default()
    };
    Ok(solve_prepared(&scheme, &dirichlet, &init, &options)?)
}

#[derive(Serialize)]
struct SolveJson<'a> {
    iterations: usize,
    residuals: &'a [f64],
    final_residual: f64,
    wall_time_s: f64,
    h: f64,
    dtheta: f64,
    dtheta_lt_h: bool,
    flagged_nodes: usize,
    empty_nodes: usize,
    stop_reason: StopReason,
    converged: bool,
    n: usize,
    interior: usize,
    config: &'a RunConfig,
    seed: u64,
}

/// Exit status for a finished solve. Stagnation means an exact fixed point of the sweep.
pub fn solve_exit_code(report: &SolveReport) -> i32 {
    match report.stop_reason {
        StopReason::Converged | StopReason::Stagnated => EXIT_OK,
        StopReason::MaxSweeps => EXIT_NOT_CONVERGED,
    }
}

pub fn cmd_solve(cfg: &RunConfig) -> CliResult<i32> {
    let cloud = build_domain(cfg)?;
    let start = Instant::now();
    let report = solve_config(cfg, &cloud)?;
    let wall = start.elapsed().as_secs_f64();
    let out = default_path(&cfg.out, "field.csv");
    let report_path = cfg.report.clone().unwrap_or_else(|| sibling(&out, "json"));
    write_field_csv(&out, &cloud, &report.final_field)?;
    let json = SolveJson {
        iterations: report.iterations,
        residuals: &report.residual_history,
        final_residual: report.final_residual(),
        wall_time_s: wall,
        h: report.h,
        dtheta: report.dtheta,
        dtheta_lt_h: report.dtheta_lt_h,
        flagged_nodes: report.flagged_nodes.len(),
        empty_nodes: report.empty_nodes,
        stop_reason: report.stop_reason,
        converged: report.converged,
        n: cloud.len(),
        interior: cloud.interior_count(),
        config: cfg,
        seed: cfg.seed(),
    };
    write_json(&report_path, &json)?;
    let code = solve_exit_code(&report);
    if code != EXIT_OK {
        eprintln!(
            "solver stopped after {} sweeps without converging (residual {:.3e})",
            report.iterations,
            report.final_residual()
        );
    }
    Ok(code)
}

/// Reference values at `points` named by `tukey:SHAPE` or `distance:SHAPE`.
pub fn oracle_values(spec: &str, points: &[Vec<f64>]) -> CliResult<Vec<f64>> {
    let d = points.first().map(|p| p.len()).unwrap_or(2);
    if let Some(name) = spec.strip_prefix("tukey:") {
        let model = DensityModel::preset(name, d)?;
        return points
            .par_iter()
            .map(|p| brute_tukey_depth(&model, p, CANONICAL_DIRECTIONS).map_err(CliError::from))
            .collect();
    }
    if let Some(name) = spec.strip_prefix("distance:") {
        let shape = Shape::preset(name, d)?;
        return Ok(points.iter().map(|p| shape.inner_distance(p)).collect());
    }
    Err(usage(format!("unknown oracle '{spec}'")))
}

#[derive(Serialize)]
struct CompareJson<'a> {
    l1: f64,
    linf: f64,
    n: usize,
    config: &'a RunConfig,
    seed: u64,
}

pub fn cmd_compare(cfg: &RunConfig) -> CliResult<i32> {
    let a_path = cfg.a.as_ref().ok_or_else(|| usage("compare needs --a"))?;
    let a = read_field_csv(a_path)?;
    let b: Vec<f64> = match (&cfg.b, &cfg.oracle) {
        (Some(p), None) => {
            let b = read_field_csv(p)?;
            if b.points != a.points {
                return Err(usage(format!(
                    "{} and {} are on different clouds",
                    a_path.display(),
                    p.display()
                )));
            }
            b.values.into_inner()
        }
        (None, Some(o)) => oracle_values(o, &a.points)?,
        _ => return Err(usage("compare needs exactly one of --b or --oracle")),
    };
    let l1 = l1_error(&a.values, &b)?;
    let linf = linf_error(&a.values, &b)?;
    let diff: Vec<f64> = a.values.iter().zip(&b).map(|(x, y)| x - y).collect();
    let out = default_path(&cfg.out, "diff.csv");
    let report_path = cfg.report.clone().unwrap_or_else(|| sibling(&out, "json"));
    FieldTable {
        points: a.points.clone(),
        values: ScalarField::new(diff)?,
    }
    .write(&out)?;
    write_json(
        &report_path,
        &CompareJson {
            l1,
            linf,
            n: a.values.len(),
            config: cfg,
            seed: cfg.seed(),
        },
    )?;
    Ok(EXIT_OK)
}

pub const SUITES: &[&str] = &[
    "tukey-grid",
    "tukey-cloud",
    "eikonal-cloud-2d",
    "eikonal-cloud-3d",
    "affine-grid",
];

/// One row of a benchmark table.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub suite: String,
    pub case: String,
    /// Grid side or point count.
    pub size: usize,
    pub nodes: usize,
    pub iterations: Option<usize>,
    pub stop_reason: Option<StopReason>,
    pub residual: Option<f64>,
    pub time_s: Option<f64>,
    /// L¹ error against the suite's oracle, when it has one.
    pub error: Option<f64>,
    pub status: String,
}

struct Case {
    name: String,
    size: usize,
    run: Box<dyn Fn() -> CliResult<(usize, SolveReport, Option<f64>)> + Send + Sync>,
}

fn sizes_or(cfg: &RunConfig, defaults: &[usize]) -> CliResult<Vec<usize>> {
    match &cfg.sizes {
        None => Ok(defaults.to_vec()),
        Some(s) => s
            .split(',')
            .map(|x| x.trim().parse::<usize>().map_err(|_| usage(format!("bad size '{x}'"))))
            .collect(),
    }
}

fn solve_on(cloud: &PointCloud, spec: &SchemeSpec, init: &ScalarField, tol: f64, max_sweeps: usize) -> CliResult<SolveReport> {
    let scheme = crate::schemes::Scheme::new(spec, cloud)?;
    let options = SolveOptions {
        tol,
        max_sweeps,
        ..SolveOptions::default()
    };
    Ok(solve_prepared(&scheme, &ScalarField::zeros(cloud.len()), init, &options)?)
}

fn tukey_l1(model: &DensityModel, cloud: &PointCloud, u: &[f64]) -> CliResult<f64> {
    let oracle = crate::oracles::brute_tukey_field(model, cloud, CANONICAL_DIRECTIONS)?;
    Ok(l1_error(u, &oracle.values)?)
}

fn suite_cases(name: &str, cfg: &RunConfig) -> CliResult<Vec<Case>> {
    let seed = cfg.seed();
    let tol = cfg.tol;
    let max_sweeps = cfg.max_sweeps.unwrap_or(SolveOptions::default().max_sweeps);
    let mut cases = Vec::new();
    match name {
        "tukey-grid" => {
            let sizes = sizes_or(cfg, &[32, 64, 96])?;
            for shape in ["circle", "donut", "square"] {
                for &side in &sizes {
                    let tol = tol.unwrap_or(3e-3);
                    cases.push(Case {
                        name: shape.to_string(),
                        size: side,
                        run: Box::new(move || {
                            let cloud = build_grid_cloud(&[side, side], &Stencil::interp_ring(side / 2)?, BoundarySpec::None)?;
                            let model = DensityModel::preset(shape, 2)?;
                            let spec = SchemeSpec::new(Hamiltonian::Tukey, Rhs::Density(model.clone()))?;
                            let r = solve_on(&cloud, &spec, &ScalarField::zeros(cloud.len()), tol, max_sweeps)?;
                            let e = tukey_l1(&model, &cloud, &r.final_field)?;
                            Ok((cloud.len(), r, Some(e)))
                        }),
                    });
                }
            }
        }
        "tukey-cloud" => {
            for &n in &sizes_or(cfg, &[1000, 3000, 10000])? {
                let tol = tol.unwrap_or(3e-3);
                cases.push(Case {
                    name: "unit_square".into(),
                    size: n,
                    run: Box::new(move || {
                        let model = DensityModel::preset("unit_square", 2)?;
                        let pts = sample_density(&model, n, seed)?;
                        let cloud = build_knn_cloud(&pts, 30, BoundarySpec::unit_cube_band(2, None))?;
                        let spec = SchemeSpec::new(Hamiltonian::Tukey, Rhs::Density(model.clone()))?
                            .with_estimator(Estimator::Analytic);
                        let r = solve_on(&cloud, &spec, &ScalarField::zeros(cloud.len()), tol, max_sweeps)?;
                        let e = tukey_l1(&model, &cloud, &r.final_field)?;
                        Ok((cloud.len(), r, Some(e)))
                    }),
                });
            }
        }
        "eikonal-cloud-2d" | "eikonal-cloud-3d" => {
            let (dim, defaults): (usize, &[usize]) = if name.ends_with("2d") {
                (2, &[1000, 2000, 4000, 8000])
            } else {
                (3, &[4000, 8000, 16000])
            };
            for &n in &sizes_or(cfg, defaults)? {
                for shape in ["square", "ellipse", "two_balls"] {
                    let tol = tol.unwrap_or(3e-3);
                    cases.push(Case {
                        name: shape.to_string(),
                        size: n,
                        run: Box::new(move || {
                            let cube = DensityModel::preset("unit_cube", dim)?;
                            let pts = sample_density(&cube, n, seed)?;
                            let cloud = build_knn_cloud(&pts, 20, BoundarySpec::unit_cube_band(dim, None))?;
                            let f = DensityModel::preset(shape, dim)?;
                            let spec = SchemeSpec::new(Hamiltonian::Eikonal, Rhs::Density(f))?;
                            let r = solve_on(&cloud, &spec, &ScalarField::zeros(cloud.len()), tol, max_sweeps)?;
                            Ok((cloud.len(), r, None))
                        }),
                    });
                }
            }
        }
        "affine-grid" => {
            let sizes = sizes_or(cfg, &[32, 64, 128])?;
            let rows: [(&str, &str, f64, f64); 4] = [
                ("square", "square", 5e-3, 0.0),
                ("ellipse", "ellipse", 3e-3, 0.0),
                ("two_balls_init0", "two_balls", 3e-3, 0.0),
                ("two_balls_init1", "two_balls", 3e-3, 1.0),
            ];
            for (label, shape, row_tol, init) in rows {
                for &side in &sizes {
                    let tol = tol.unwrap_or(row_tol);
                    cases.push(Case {
                        name: label.to_string(),
                        size: side,
                        run: Box::new(move || {
                            let cloud = build_grid_cloud(&[side, side], &Stencil::grid_wide(2, 7, false)?, BoundarySpec::None)?;
                            let f = DensityModel::preset(shape, 2)?;
                            let spec = SchemeSpec::new(Hamiltonian::AlphaFlow { alpha: 1.0 / 3.0 }, Rhs::Density(f))?;
                            let r = solve_on(&cloud, &spec, &ScalarField::constant(cloud.len(), init), tol, max_sweeps)?;
                            Ok((cloud.len(), r, None))
                        }),
                    });
                }
            }
        }
        "" => return Err(usage(format!("empty suite name; choose one of {}", SUITES.join(", ")))),
        other => {
            return Err(usage(format!(
                "unknown suite '{other}'; choose one of {}",
                SUITES.join(", ")
            )))
        }
    }
    Ok(cases)
}

/// Runs every row of a suite; failing rows are recorded and the suite continues.
pub fn run_suite(name: &str, cfg: &RunConfig) -> CliResult<Vec<BenchRow>> {
    let cases = suite_cases(name, cfg)?;
    let mut rows = Vec::with_capacity(cases.len());
    for case in cases {
        let start = Instant::now();
        let row = match (case.run)() {
            Ok((nodes, r, error)) => BenchRow {
                suite: name.into(),
                case: case.name,
                size: case.size,
                nodes,
                iterations: Some(r.iterations),
                stop_reason: Some(r.stop_reason),
                residual: Some(r.final_residual()),
                time_s: Some(start.elapsed().as_secs_f64()),
                error,
                status: "ok".into(),
            },
            Err(e) => BenchRow {
                suite: name.into(),
                case: case.name,
                size: case.size,
                nodes: 0,
                iterations: None,
                stop_reason: None,
                residual: None,
                time_s: None,
                error: None,
                status: format!("error: {e}"),
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    let mut w = csv::Writer::from_path(path).map_err(Error::from)?;
    w.write_record([
        "suite", "case", "size", "nodes", "iterations", "stop_reason", "residual", "time_s", "error", "status",
    ])
    .map_err(Error::from)?;
    let opt = |v: Option<f64>| v.map(crate::io::fmt_f64).unwrap_or_default();
    for r in rows {
        let stop = r
            .stop_reason
            .map(|s| serde_json::to_value(s).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
            .unwrap_or_default();
        w.write_record([
            r.suite.clone(),
            r.case.clone(),
            r.size.to_string(),
            r.nodes.to_string(),
            r.iterations.map(|i| i.to_string()).unwrap_or_default(),
            stop,
            opt(r.residual),
            opt(r.time_s),
            opt(r.error),
            r.status.clone(),
        ])
        .map_err(Error::from)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

#[derive(Serialize)]
struct BenchJson<'a> {
    suite: &'a str,
    rows: &'a [BenchRow],
    config: &'a RunConfig,
    seed: u64,
}

pub fn cmd_bench(cfg: &RunConfig) -> CliResult<i32> {
    let name = cfg.suite.as_deref().map(str::trim).unwrap_or("");
    let rows = run_suite(name, cfg)?;
    let out = default_path(&cfg.out, &format!("{name}.csv"));
    let report_path = cfg.report.clone().unwrap_or_else(|| sibling(&out, "json"));
    write_bench_csv(&out, &rows)?;
    write_json(
        &report_path,
        &BenchJson {
            suite: name,
            rows: &rows,
            config: cfg,
            seed: cfg.seed(),
        },
    )?;
    for r in &rows {
        println!(
            "{:<18} {:<16} {:>6} it={:<6} t={:<8} err={} {}",
            r.suite,
            r.case,
            r.size,
            r.iterations.map(|i| i.to_string()).unwrap_or("-".into()),
            r.time_s.map(|t| format!("{t:.2}s")).unwrap_or("-".into()),
            r.error.map(|e| format!("{e:.3e}")).unwrap_or("-".into()),
            r.status
        );
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_keys() {
        let file = RunConfig {
            tol: Some(1e-2),
            seed: Some(3),
            grid: Some("32x32".into()),
            ..RunConfig::default()
        };
        let flags = RunConfig {
            tol: Some(5e-3),
            ..RunConfig::default()
        };
        let m = file.merge(flags);
        assert_eq!(m.tol, Some(5e-3));
        assert_eq!(m.seed, Some(3));
        assert_eq!(m.grid.as_deref(), Some("32x32"));
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        let ok: RunConfig = serde_json::from_str(r#"{"grid": "16x16", "tol": 0.01}"#).unwrap();
        assert_eq!(ok.grid.as_deref(), Some("16x16"));
        assert!(serde_json::from_str::<RunConfig>(r#"{"gird": "16x16"}"#).is_err());
    }

    #[test]
    fn hamiltonian_names() {
        assert!(matches!(parse_hamiltonian("affine", 2).unwrap(), Hamiltonian::AlphaFlow { .. }));
        assert!(matches!(parse_hamiltonian("affine", 3).unwrap(), Hamiltonian::Gauss3d));
        assert!(matches!(parse_hamiltonian("alpha:0.5", 2).unwrap(), Hamiltonian::AlphaFlow { alpha } if alpha == 0.5));
        assert!(parse_hamiltonian("nope", 2).is_err());
    }

    #[test]
    fn grid_shorthand() {
        assert_eq!(parse_grid("64x64", None).unwrap(), vec![64, 64]);
        assert_eq!(parse_grid("9", Some(3)).unwrap(), vec![9, 9, 9]);
        assert!(parse_grid("6x", None).is_err());
    }

    #[test]
    fn empty_suite_is_usage_error() {
        let e = run_suite("", &RunConfig::default()).err().unwrap();
        assert_eq!(e.exit_code(), EXIT_USAGE);
    }
}
