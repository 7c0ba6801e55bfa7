//! `gasdsr`: security region evaluation for gas networks.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | parse or I/O error (bad arguments, missing or malformed file) |
//! | 2 | validation error (inconsistent network, options or raster axes) |
//! | 3 | solver error (Newton divergence, conic solver breakdown, infeasible program) |
//! | 4 | a computed boundary failed simulator verification |
//!
//! Outputs are staged in temporary files and renamed into place only once
//! every computation has finished, so codes 1 to 3 leave no output files.
//! Code 4 is the exception: all outputs are complete and written, and the
//! process exits 4 afterwards so scripts notice the failed verdict.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use gas_dsr::fe::FeOptions;
use gas_dsr::grid::{build_grid, Grid, StorageStencil};
use gas_dsr::network::{load_network, load_schedule, GasNetwork};
use gas_dsr::plot::{render, Layer};
use gas_dsr::region::{evaluate_dsr, evaluate_ssr, ray_point, raster_region, Axis, CellState, Raster, RasterSpec, RegionOptions};
use gas_dsr::sim::{check_security, initialize, simulate, NewtonOptions, SecurityReport, DEFAULT_SECURITY_TOLERANCE};
use gas_dsr::{DSRegion, RegionEvaluationF64, SteadyStateF64, TrajectoryF64};

use output::{sibling, Staged};

/// Overrides `--threads` when set.
const THREADS_ENV: &str = "GASDSR_THREADS";

#[derive(Parser, Debug)]
#[command(name = "gasdsr", version, about = "Dynamic and steady-state security regions of gas networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the security region along the participation ray.
    Eval(EvalArgs),
    /// Simulate the horizon for one withdrawal point.
    Simulate(SimulateArgs),
    /// Brute-force security raster over two withdrawal axes.
    Raster(RasterArgs),
    /// Re-render saved region JSON and raster CSV files.
    Plot(PlotArgs),
}

#[derive(Args, Debug, Clone)]
struct NetworkArgs {
    /// Network JSON.
    #[arg(long)]
    network: PathBuf,
    /// Schedule JSON applied on top of the network.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Time step, s.
    #[arg(long, default_value_t = 300.0, allow_negative_numbers = true)]
    dt: f64,
    /// Horizon, s.
    #[arg(long, default_value_t = 900.0, allow_negative_numbers = true)]
    horizon: f64,
    /// Storage term of the mass balance.
    #[arg(long, value_enum, default_value_t = Stencil::Averaged)]
    stencil: Stencil,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Stencil {
    Averaged,
    Downstream,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Dynamic,
    Steady,
    Both,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    net: NetworkArgs,
    #[arg(long, value_enum, default_value_t = Mode::Dynamic)]
    mode: Mode,
    /// Caps solved per bisection round, bracket ends included.
    #[arg(long, default_value_t = 11)]
    samples: usize,
    /// Bracket width at which bisection stops; default 1e-3 * max(|eta_min|, 1).
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,
    /// Worker threads; the GASDSR_THREADS environment variable takes precedence.
    #[arg(long)]
    threads: Option<usize>,
    /// Minimum log10 eigenvalue ratio accepted as rank one.
    #[arg(long, default_value_t = 6.0)]
    rank_one_threshold: f64,
    /// Skip re-simulating the boundaries.
    #[arg(long)]
    no_verify: bool,
    /// Region JSON output.
    #[arg(long, default_value = "region.json")]
    out: PathBuf,
    /// Bisection trace JSON output.
    #[arg(long, default_value = "trace.json")]
    trace: PathBuf,
    /// Also write an SVG (default path region.svg).
    #[arg(long, num_args = 0..=1, default_missing_value = "region.svg")]
    plot: Option<PathBuf>,
    /// Raster CSV drawn under the regions in the SVG.
    #[arg(long, requires = "plot")]
    raster: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    net: NetworkArgs,
    /// Total adjustment along the participation ray, kg/s.
    #[arg(long, conflicts_with = "withdrawals", allow_hyphen_values = true)]
    dg: Option<f64>,
    /// Unit withdrawals in network order, kg/s, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    withdrawals: Option<Vec<f64>>,
    /// Relative tolerance on every security limit.
    #[arg(long, default_value_t = DEFAULT_SECURITY_TOLERANCE)]
    tolerance: f64,
    /// Trajectory CSV with columns t,pipe,seg,rho,m.
    #[arg(long, default_value = "trajectory.csv")]
    out: PathBuf,
    /// Linepack CSV; defaults to `<out>_linepack.csv`.
    #[arg(long)]
    linepack: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RasterArgs {
    #[command(flatten)]
    net: NetworkArgs,
    /// Two axes, `node:<id>` or `unit:<id>`, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    axes: Vec<String>,
    /// Cells per axis.
    #[arg(long, default_value_t = 50)]
    resolution: usize,
    /// First axis range `lo,hi`, kg/s; default 0 to twice the dispatch.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x_range: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    y_range: Option<Vec<f64>>,
    #[arg(long, default_value_t = DEFAULT_SECURITY_TOLERANCE)]
    tolerance: f64,
    /// Worker threads; the GASDSR_THREADS environment variable takes precedence.
    #[arg(long)]
    threads: Option<usize>,
    /// Region JSON whose boundary points are marked on the SVG.
    #[arg(long)]
    region: Option<PathBuf>,
    #[arg(long, default_value = "raster.csv")]
    out: PathBuf,
    /// Heatmap SVG output.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Region JSON files, as written by `eval`. Repeatable.
    #[arg(long)]
    region: Vec<PathBuf>,
    /// Raster CSV, as written by `raster`.
    #[arg(long)]
    raster: Option<PathBuf>,
    #[arg(long, default_value = "region.svg")]
    out: PathBuf,
}

/// Error carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self { code, error: error.into() }
    }

    fn io(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }

    fn validation(message: impl std::fmt::Display) -> Self {
        Self::new(2, anyhow::anyhow!("validation error: {message}"))
    }
}

impl From<gas_dsr::Error> for Failure {
    fn from(e: gas_dsr::Error) -> Self {
        Self::new(e.exit_code() as u8, e)
    }
}

type CliResult<T> = Result<T, Failure>;

/// Region JSON: one region, or both modes side by side.
#[derive(Debug, Serialize, Deserialize)]
struct RegionPair {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dynamic: Option<DSRegion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    steady: Option<DSRegion>,
}

fn read_regions(path: &Path) -> CliResult<Vec<DSRegion>> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(anyhow::Error::new(e).context(format!("reading {}", path.display()))))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure::new(1, anyhow::anyhow!("{}: {e}", path.display())))?;
    let parsed = if value.get("mode").is_some() {
        serde_json::from_value::<DSRegion>(value).map(|r| vec![r])
    } else {
        serde_json::from_value::<RegionPair>(value).map(|p| p.dynamic.into_iter().chain(p.steady).collect())
    };
    parsed.map_err(|e| Failure::new(1, anyhow::anyhow!("{}: {e}", path.display())))
}

fn read_raster(path: &Path, labels: [String; 2]) -> CliResult<Raster> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(anyhow::Error::new(e).context(format!("reading {}", path.display()))))?;
    Ok(Raster::from_csv(&text, labels)?)
}

fn thread_override(flag: Option<usize>) -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| Failure::validation(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(flag),
    }
}

struct Setup {
    network: GasNetwork,
    grid: Grid,
    initial: SteadyStateF64,
}

fn setup(args: &NetworkArgs) -> CliResult<Setup> {
    let mut network = load_network(&args.network)?;
    if let Some(s) = &args.schedule {
        network = network.with_schedule(&load_schedule(s)?)?;
    }
    let stencil = match args.stencil {
        Stencil::Averaged => StorageStencil::Averaged,
        Stencil::Downstream => StorageStencil::Downstream,
    };
    let grid = build_grid(&network, args.dt, args.horizon)?.with_stencil(stencil);
    let initial = initialize::<f64>(&network, &grid, &NewtonOptions::default())?;
    Ok(Setup { network, grid, initial })
}

fn region_layers(regions: &[DSRegion]) -> Vec<Layer<'_>> {
    let (mut d, mut s) = (0, 0);
    let nd = regions.iter().filter(|r| r.mode == gas_dsr::RegionMode::Dynamic).count();
    let ns = regions.len() - nd;
    regions
        .iter()
        .map(|r| {
            let label = match r.mode {
                gas_dsr::RegionMode::Dynamic => {
                    d += 1;
                    if nd > 1 { format!("DSR-{d}") } else { "DSR".into() }
                }
                gas_dsr::RegionMode::Steady => {
                    s += 1;
                    if ns > 1 { format!("SSR-{s}") } else { "SSR".into() }
                }
            };
            Layer::new(label, r)
        })
        .collect()
}

/// Boundary points of planar regions: both node totals move with `d_G`
/// because participation factors are non-negative.
fn planar_marks(regions: &[DSRegion]) -> Vec<[f64; 2]> {
    regions
        .iter()
        .filter(|r| r.nodes.len() == 2)
        .flat_map(|r| [[r.nodes[0].lo, r.nodes[1].lo], [r.nodes[0].hi, r.nodes[1].hi]])
        .collect()
}

fn raster_labels(regions: &[DSRegion]) -> [String; 2] {
    match regions.iter().find(|r| r.nodes.len() == 2) {
        Some(r) => [format!("node {}", r.nodes[0].id), format!("node {}", r.nodes[1].id)],
        None => ["x".into(), "y".into()],
    }
}

fn print_region_table(evals: &[&RegionEvaluationF64]) {
    println!("{:<8} {:>12} {:>12} {:>9} {:>10} {:>18}", "mode", "dG_lower", "dG_upper", "min_ratio", "certified", "verified (lo/up)");
    for e in evals {
        let r = &e.region;
        let mode = match r.mode {
            gas_dsr::RegionMode::Dynamic => "dynamic",
            gas_dsr::RegionMode::Steady => "steady",
        };
        let cert = format!("{}/{}", yes_no(r.diagnostics.certified_lower), yes_no(r.diagnostics.certified_upper));
        let verdict = |b: &gas_dsr::BoundaryResultF64| match &b.verdict {
            Some(v) if v.secure => "secure",
            Some(_) => "insecure",
            None => "-",
        };
        let ver = format!("{}/{}", verdict(&e.lower), verdict(&e.upper));
        println!("{mode:<8} {:>12.4} {:>12.4} {:>9.2} {cert:>10} {ver:>18}", r.d_g_lower, r.d_g_upper, r.diagnostics.min_ratio);
    }
    for e in evals {
        for n in &e.region.nodes {
            println!("  {:?} node {:<6} [{:.4}, {:.4}] kg/s", e.region.mode, n.id, n.lo, n.hi);
        }
    }
}

fn yes_no(b: bool) -> &'static str {
    if b { "yes" } else { "no" }
}

fn cmd_eval(args: EvalArgs) -> CliResult<u8> {
    if args.rank_one_threshold.is_nan() || args.rank_one_threshold <= 0.0 {
        return Err(Failure::validation(format!("rank-one threshold must be positive, got {}", args.rank_one_threshold)));
    }
    let threads = thread_override(args.threads)?;
    let s = setup(&args.net)?;
    let options = RegionOptions {
        fe: FeOptions {
            samples: args.samples,
            epsilon: args.epsilon,
            threads,
            rank_one_threshold: args.rank_one_threshold,
            ..FeOptions::default()
        },
        verify: !args.no_verify,
    };
    let dynamic = match args.mode {
        Mode::Dynamic | Mode::Both => Some(evaluate_dsr(&s.network, &s.grid, &s.initial, &options)?),
        Mode::Steady => None,
    };
    let steady = match args.mode {
        Mode::Steady | Mode::Both => Some(evaluate_ssr(&s.network, &s.grid, &s.initial, &options)?),
        Mode::Dynamic => None,
    };
    let evals: Vec<&RegionEvaluationF64> = dynamic.iter().chain(steady.iter()).collect();

    let region_json = match args.mode {
        Mode::Both => serde_json::to_string_pretty(&RegionPair {
            dynamic: dynamic.as_ref().map(|e| e.region.clone()),
            steady: steady.as_ref().map(|e| e.region.clone()),
        })
        .expect("regions serialize"),
        _ => evals[0].region.to_json(),
    };
    let trace: serde_json::Map<String, serde_json::Value> = [("dynamic", &dynamic), ("steady", &steady)]
        .into_iter()
        .filter_map(|(k, e)| {
            e.as_ref().map(|e| {
                let v = serde_json::json!({ "upper": e.upper, "lower": e.lower });
                (k.to_string(), v)
            })
        })
        .collect();

    let mut staged = Staged::default();
    staged.add(&args.out, &(region_json + "\n")).map_err(Failure::io)?;
    staged.add(&args.trace, &(serde_json::to_string_pretty(&trace).expect("trace serializes") + "\n")).map_err(Failure::io)?;
    if let Some(svg_path) = &args.plot {
        let regions: Vec<DSRegion> = evals.iter().map(|e| e.region.clone()).collect();
        let raster = match &args.raster {
            Some(p) => Some(read_raster(p, raster_labels(&regions))?),
            None => None,
        };
        let marks = planar_marks(&regions);
        staged.add(svg_path, &render(&region_layers(&regions), raster.as_ref(), &marks)).map_err(Failure::io)?;
    }
    staged.commit().map_err(Failure::io)?;

    print_region_table(&evals);
    for e in &evals {
        for b in [&e.lower, &e.upper] {
            if !b.certified {
                log::warn!("{:?} {:?} boundary is not certified rank one (ratio {:.2})", e.region.mode, b.direction, b.min_ratio);
            }
        }
    }
    let failed: Vec<String> = evals
        .iter()
        .flat_map(|e| [(e.region.mode, &e.lower), (e.region.mode, &e.upper)])
        .filter(|(_, b)| b.verdict.as_ref().is_some_and(|v| !v.secure))
        .map(|(m, b)| format!("{m:?} {:?} boundary at dG = {:.4}", b.direction, b.d_g))
        .collect();
    if failed.is_empty() {
        Ok(0)
    } else {
        eprintln!("verification failed: {}", failed.join("; "));
        Ok(4)
    }
}

fn trajectory_csv(network: &GasNetwork, grid: &Grid, traj: &TrajectoryF64) -> String {
    let mut out = String::from("t,pipe,seg,rho,m\n");
    for (t, state) in traj.states.iter().enumerate() {
        let time = t as f64 * grid.dt;
        for (p, pipe) in network.pipes.iter().enumerate() {
            for (k, (rho, m)) in state.rho[p].iter().zip(&state.flow[p]).enumerate() {
                out.push_str(&format!("{time},{},{k},{rho},{m}\n", pipe.id));
            }
        }
    }
    out
}

fn linepack_csv(grid: &Grid, traj: &TrajectoryF64) -> String {
    let mut out = String::from("t,linepack\n");
    for (t, lp) in traj.linepack.iter().enumerate() {
        out.push_str(&format!("{},{lp}\n", t as f64 * grid.dt));
    }
    out
}

fn print_report(report: &SecurityReport) {
    if report.is_secure() {
        println!("secure");
        return;
    }
    println!("insecure");
    println!("{:<14} {:<10} {:>6} {:>14}", "kind", "location", "t", "magnitude");
    for v in &report.violations {
        let kind = serde_json::to_value(v.kind).ok().and_then(|k| k.as_str().map(str::to_owned)).unwrap_or_default();
        let t = v.time.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
        println!("{kind:<14} {:<10} {t:>6} {:>14.6e}", v.location, v.magnitude);
    }
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<u8> {
    let s = setup(&args.net)?;
    let units = match &args.withdrawals {
        Some(w) => {
            if w.len() != s.network.units.len() {
                return Err(Failure::validation(format!("expected {} unit withdrawals, got {}", s.network.units.len(), w.len())));
            }
            w.clone()
        }
        None => s.network.withdrawals(args.dg.unwrap_or(0.0)),
    };
    let traj = simulate(&s.network, &s.grid, &s.initial, &units, &NewtonOptions::default())?;
    let report = check_security(&s.network, &traj, args.tolerance);
    let lp_path = args.linepack.clone().unwrap_or_else(|| sibling(&args.out, "linepack", "csv"));
    let mut staged = Staged::default();
    staged.add(&args.out, &trajectory_csv(&s.network, &s.grid, &traj)).map_err(Failure::io)?;
    staged.add(&lp_path, &linepack_csv(&s.grid, &traj)).map_err(Failure::io)?;
    staged.commit().map_err(Failure::io)?;
    print_report(&report);
    Ok(0)
}

fn parse_axis(network: &GasNetwork, text: &str) -> CliResult<Axis> {
    let (kind, id) = text.split_once(':').ok_or_else(|| Failure::validation(format!("axis {text:?} must be node:<id> or unit:<id>")))?;
    match kind {
        "node" => network.node_index(id).map(Axis::Node).ok_or_else(|| Failure::validation(format!("unknown node {id:?}"))),
        "unit" => network
            .units
            .iter()
            .position(|u| u.id == id)
            .map(Axis::Unit)
            .ok_or_else(|| Failure::validation(format!("unknown unit {id:?}"))),
        _ => Err(Failure::validation(format!("axis kind {kind:?} must be node or unit"))),
    }
}

fn cmd_raster(args: RasterArgs) -> CliResult<u8> {
    if args.axes.len() != 2 {
        return Err(Failure::validation(format!("raster needs exactly two axes, got {}", args.axes.len())));
    }
    let threads = thread_override(args.threads)?;
    let s = setup(&args.net)?;
    let axes = [parse_axis(&s.network, &args.axes[0])?, parse_axis(&s.network, &args.axes[1])?];
    let mut spec = RasterSpec::around_dispatch(&s.network, axes, args.resolution);
    for (k, r) in [&args.x_range, &args.y_range].into_iter().enumerate() {
        if let Some(r) = r {
            if r.len() != 2 {
                return Err(Failure::validation(format!("axis range needs lo,hi, got {} values", r.len())));
            }
            spec.ranges[k] = [r[0], r[1]];
        }
    }
    let regions = match &args.region {
        Some(p) => read_regions(p)?,
        None => Vec::new(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::new(2, anyhow::anyhow!("thread pool: {e}")))?;
    let raster = pool.install(|| raster_region(&s.network, &s.grid, &s.initial, &spec, &NewtonOptions::default(), args.tolerance))?;

    let mut warnings = Vec::new();
    if raster.count(CellState::Secure) == 0 {
        warnings.push("secure set is empty".to_string());
    }
    let diverged = raster.count(CellState::Diverged);
    if diverged > 0 {
        warnings.push(format!("{diverged} cells failed to simulate"));
    }

    let mut staged = Staged::default();
    staged.add(&args.out, &raster.to_csv()).map_err(Failure::io)?;
    if let Some(svg) = &args.svg {
        let marks: Vec<[f64; 2]> = regions
            .iter()
            .flat_map(|r| [r.d_g_lower, r.d_g_upper])
            .map(|d| ray_point(&s.network, axes, d))
            .collect();
        staged.add(svg, &render(&[], Some(&raster), &marks)).map_err(Failure::io)?;
    }
    staged.commit().map_err(Failure::io)?;

    println!("cells {} secure {} insecure {} diverged {}", raster.cells.len(), raster.count(CellState::Secure), raster.count(CellState::Insecure), diverged);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!("warnings {}", warnings.len());
    Ok(0)
}

fn cmd_plot(args: PlotArgs) -> CliResult<u8> {
    if args.region.is_empty() && args.raster.is_none() {
        return Err(Failure::validation("nothing to plot: pass --region and/or --raster"));
    }
    let mut regions = Vec::new();
    for p in &args.region {
        regions.extend(read_regions(p)?);
    }
    let raster = match &args.raster {
        Some(p) => Some(read_raster(p, raster_labels(&regions))?),
        None => None,
    };
    let marks = planar_marks(&regions);
    let mut staged = Staged::default();
    staged.add(&args.out, &render(&region_layers(&regions), raster.as_ref(), &marks)).map_err(Failure::io)?;
    staged.commit().map_err(Failure::io)?;
    Ok(0)
}

/// Error chain on one line, skipping causes already quoted by their parent.
fn describe(error: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in error.chain() {
        let s = cause.to_string();
        if !text.contains(&s) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&s);
        }
    }
    text
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Raster(a) => cmd_raster(a),
        Command::Plot(a) => cmd_plot(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", describe(&f.error));
            ExitCode::from(f.code)
        }
    }
}
