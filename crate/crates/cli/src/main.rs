//! `sysrisk`: command-line driver for clearing, limit, closed-form and
//! experiment runs. Every run writes machine-readable outputs and a
//! `manifest.json` into the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sysrisk_core::analytic::{binary_recovery_solve, binary_regime_solve, lemma_first_classify};
use sysrisk_core::experiments::{
    run_convergence, sweep_pbs, sweep_shocks, write_convergence_csv, write_curve_csv,
    write_surface_csv, ExperimentError, GridSpec, SweepOptions,
};
use sysrisk_core::finance::{
    default_metrics, expected_surplus, limit_record, solve_clearing_with, solve_limit_clearing,
    FinanceError,
};
use sysrisk_core::fixed_point::{FixedPointError, InitPolicy, SolverOptions};
use sysrisk_core::graph::{derive_seed, regular_indicator, sample_network};
use sysrisk_core::model::{ModelParams, Scenario, ValidatedParams};

const EXIT_INVALID: u8 = 1;
const EXIT_NO_CONVERGENCE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "sysrisk", version, about = "Clearing vectors and mean-field limits of a one-big-bank financial network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Economy configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Root seed; every random stream is derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "./out")]
    out: PathBuf,
    /// Common shock z_c.
    #[arg(long, default_value_t = 0.0)]
    zc: f64,
    /// Big-bank idiosyncratic shock z_b.
    #[arg(long, default_value_t = 0.0)]
    zb: f64,
    /// Overrides the number of small banks in the config.
    #[arg(long)]
    n: Option<usize>,
    /// Fixed-point stopping tolerance on the sup-norm step.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Iteration cap of the fixed-point solvers.
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample one network and compute its greatest clearing vector.
    SolveFinite(Common),
    /// Solve the two-dimensional limit clearing equations.
    SolveLimit(Common),
    /// Closed-form binary-shock regime in the regular indicator economy.
    Analytic {
        #[command(flatten)]
        common: Common,
        /// Connectivity to the big bank; defaults to the config's mean.
        #[arg(long)]
        pbs: Option<f64>,
    },
    /// Compare finite networks with the limit over sizes and seeds.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, strictly increasing network sizes.
        #[arg(long, value_delimiter = ',', default_values_t = vec![250usize, 500, 1000, 2000, 4000])]
        n_list: Vec<usize>,
        /// Number of seeds, derived from the root seed.
        #[arg(long, default_value_t = 20)]
        seed_count: u64,
    },
    /// Sweep connectivity p_bs in the regular indicator economy.
    SweepPbs {
        #[command(flatten)]
        common: Common,
        /// Grid `start:stop:step` inside (0, 1).
        #[arg(long, default_value = "0.001:0.999:0.001")]
        grid: GridSpec,
        /// Adjacent-point change in the default fraction reported as a jump.
        #[arg(long, default_value_t = 0.01)]
        jump_threshold: f64,
    },
    /// Sweep the (z_b, z_c) shock plane at fixed connectivity.
    SweepShocks {
        #[command(flatten)]
        common: Common,
        /// Connectivity to the big bank; defaults to the config's mean.
        #[arg(long)]
        pbs: Option<f64>,
        #[arg(long, default_value = "0:60:0.6")]
        zb_grid: GridSpec,
        #[arg(long, default_value = "0:30:0.3")]
        zc_grid: GridSpec,
    },
    /// Expected surplus at the limit solution.
    Surplus(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SolveFinite(_) => "solve-finite",
            Command::SolveLimit(_) => "solve-limit",
            Command::Analytic { .. } => "analytic",
            Command::Converge { .. } => "converge",
            Command::SweepPbs { .. } => "sweep-pbs",
            Command::SweepShocks { .. } => "sweep-shocks",
            Command::Surplus(_) => "surplus",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::SolveFinite(c) | Command::SolveLimit(c) | Command::Surplus(c) => c,
            Command::Analytic { common, .. }
            | Command::Converge { common, .. }
            | Command::SweepPbs { common, .. }
            | Command::SweepShocks { common, .. } => common,
        }
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    config_path: String,
    subcommand: &'a str,
    root_seed: u64,
    tool_version: &'a str,
    output_dir: String,
    started_unix_ms: u128,
    finished_unix_ms: u128,
    scenario: Scenario,
    solver: SolverOptions,
    threads: usize,
    args: Vec<String>,
    effective_config: &'a ModelParams,
    outputs: Vec<String>,
}

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn load_params(common: &Common) -> Result<ValidatedParams> {
    let text = fs::read_to_string(&common.config)
        .with_context(|| format!("reading config {}", common.config.display()))?;
    let mut params = ModelParams::from_json(&text)
        .with_context(|| format!("parsing config {}", common.config.display()))?;
    if let Some(n) = common.n {
        params.n = n;
    }
    Ok(params.validate()?)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T, outputs: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value)?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    outputs.push(name.to_string());
    Ok(())
}

/// Runs the subcommand, writing outputs into `dir`; returns the produced file names.
fn dispatch(
    command: &Command,
    params: &ValidatedParams,
    scenario: Scenario,
    solver: SolverOptions,
    dir: &Path,
) -> Result<Vec<String>> {
    let common = command.common();
    let mut outputs = Vec::new();
    match command {
        Command::SolveFinite(_) => {
            let net = sample_network(params, common.seed)?;
            let out = solve_clearing_with(&net, params, scenario, InitPolicy::FromUpper, solver)?;
            #[derive(Serialize)]
            struct FiniteOutput<'a> {
                scenario: Scenario,
                default_fraction: f64,
                clearing: &'a sysrisk_core::finance::ClearingOutcome,
                realization: sysrisk_core::graph::RealizationHeader,
            }
            let report = FiniteOutput {
                scenario,
                default_fraction: out.default_fraction(),
                clearing: &out,
                realization: net.header(),
            };
            write_json(dir, "clearing.json", &report, &mut outputs)?;
            let edges = dir.join("edges.csv");
            net.write_edge_csv(fs::File::create(&edges)?)?;
            outputs.push("edges.csv".into());
            println!(
                "n = {}, iterations = {}, X_b = {:.6}, default fraction = {:.6}",
                net.n(),
                out.vector.iterations,
                out.vector.x_big,
                out.default_fraction()
            );
        }
        Command::SolveLimit(_) => {
            let rec = limit_record(params, scenario, solver)?;
            write_json(dir, "limit.json", &rec, &mut outputs)?;
            println!(
                "xbar_s = {:.6}, xbar_b = {:.6}, x_b = {:.6}, P_D small = {:.6}, big bank defaults = {}",
                rec.xbar_s, rec.xbar_b, rec.x_big, rec.p_d_small, rec.big_defaults
            );
        }
        Command::Analytic { pbs, .. } => {
            let p_bs = pbs.unwrap_or_else(|| params.p_bs_mean());
            let regime = binary_regime_solve(params, scenario, p_bs)?;
            write_json(dir, "regime.json", &regime, &mut outputs)?;
            let econ = regular_indicator(params, p_bs)?;
            let y = econ.params().y_small.point_value().unwrap_or(f64::NAN);
            let classification = lemma_first_classify(&econ, scenario, y)?;
            write_json(dir, "classification.json", &classification, &mut outputs)?;
            if params.params().recovery.is_some() {
                match binary_recovery_solve(params, scenario, p_bs) {
                    Ok(r) => write_json(dir, "recovery.json", &r, &mut outputs)?,
                    Err(e) => eprintln!("recovery formulas not evaluated: {e}"),
                }
            }
            println!(
                "regime {} at p_bs = {p_bs}: P_D small = {:.6}, xbar = {:.6}, applicable = {}, {:?}",
                regime.regime, regime.p_d_small, regime.xbar, regime.applicable, classification
            );
        }
        Command::Converge { n_list, seed_count, .. } => {
            let seeds: Vec<u64> = (0..*seed_count).map(|i| derive_seed(common.seed, i)).collect();
            let report = run_convergence(params, scenario, n_list, &seeds)?;
            write_convergence_csv(&report, &dir.join("convergence.csv"))?;
            outputs.push("convergence.csv".into());
            write_json(dir, "convergence.json", &report.summary, &mut outputs)?;
            for s in &report.summary {
                println!(
                    "n = {:>6}: median sup error {:.3e}, median default fraction {:.4}, failed {}",
                    s.n,
                    s.median_sup_error_agg.unwrap_or(f64::NAN),
                    s.median_default_fraction.unwrap_or(f64::NAN),
                    s.failed
                );
            }
            warn_failures(report.cells.iter().filter(|c| c.error.is_some()).count());
        }
        Command::SweepPbs { grid, jump_threshold, .. } => {
            let opts = SweepOptions {
                jump_threshold: *jump_threshold,
                solver,
                ..SweepOptions::default()
            };
            let curve = sweep_pbs(params, scenario, &grid.points(), opts)?;
            write_curve_csv(&curve, &dir.join("curve.csv"))?;
            outputs.push("curve.csv".into());
            #[derive(Serialize)]
            struct CurveSummary<'a> {
                axis: &'a str,
                scenario: Scenario,
                grid: GridSpec,
                jumps: &'a [sysrisk_core::experiments::Jump],
                max_analytic_gap_p_d: f64,
                max_analytic_gap_xbar: f64,
            }
            let (gp, gx) = curve.max_analytic_gap();
            let summary = CurveSummary {
                axis: &curve.axis,
                scenario,
                grid: *grid,
                jumps: &curve.jumps,
                max_analytic_gap_p_d: gp,
                max_analytic_gap_xbar: gx,
            };
            write_json(dir, "curve.json", &summary, &mut outputs)?;
            for j in &curve.jumps {
                println!("jump at p_bs = {:.9}: {:.6} -> {:.6}", j.location, j.from, j.to);
            }
            warn_failures(curve.points.iter().filter(|p| p.error.is_some()).count());
        }
        Command::SweepShocks { pbs, zb_grid, zc_grid, .. } => {
            let p_bs = pbs.unwrap_or_else(|| params.p_bs_mean());
            let surface = sweep_shocks(params, p_bs, &zb_grid.points(), &zc_grid.points(), solver)?;
            write_surface_csv(&surface, &dir.join("surface.csv"))?;
            outputs.push("surface.csv".into());
            #[derive(Serialize)]
            struct SurfaceSummary<'a> {
                p_bs: f64,
                zb_grid: GridSpec,
                zc_grid: GridSpec,
                levels: &'a [f64],
                small_boundaries: &'a [sysrisk_core::experiments::LevelChange],
                big_boundaries: &'a [sysrisk_core::experiments::LevelChange],
            }
            let summary = SurfaceSummary {
                p_bs,
                zb_grid: *zb_grid,
                zc_grid: *zc_grid,
                levels: &surface.levels,
                small_boundaries: &surface.small_boundaries,
                big_boundaries: &surface.big_boundaries,
            };
            write_json(dir, "surface.json", &summary, &mut outputs)?;
            println!(
                "small-bank default levels {:?}; {} small and {} big-bank boundary segments",
                surface.levels,
                surface.small_boundaries.len(),
                surface.big_boundaries.len()
            );
            warn_failures(surface.failed_points());
        }
        Command::Surplus(_) => {
            let sol = solve_limit_clearing(params, scenario, solver)?;
            let metrics = default_metrics(&sol, params, scenario);
            let report = expected_surplus(&sol, params, scenario);
            #[derive(Serialize)]
            struct SurplusOutput<'a> {
                scenario: Scenario,
                limit: sysrisk_core::fixed_point::LimitSolution,
                defaults: sysrisk_core::finance::DefaultMetrics,
                surplus: &'a sysrisk_core::finance::SurplusReport,
            }
            let out = SurplusOutput {
                scenario,
                limit: sol,
                defaults: metrics,
                surplus: &report,
            };
            write_json(dir, "surplus.json", &out, &mut outputs)?;
            match report.es2 {
                Some(es2) => println!("ES1 = {:.6}, ES2 = {es2:.6}", report.es1),
                None => println!("ES1 = {:.6} (no recovery parameters: ES2 not defined)", report.es1),
            }
        }
    }
    Ok(outputs)
}

fn warn_failures(count: usize) {
    if count > 0 {
        eprintln!("warning: {count} cells failed; see the error column of the outputs");
    }
}

fn configure_threads() -> Result<usize> {
    if let Ok(raw) = std::env::var("SYSRISK_THREADS") {
        let threads: usize = raw
            .parse()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| anyhow!("SYSRISK_THREADS must be a positive integer, got {raw:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(rayon::current_num_threads())
}

fn run(cli: &Cli) -> Result<()> {
    let started = unix_ms();
    let threads = configure_threads()?;
    let command = &cli.command;
    let common = command.common();
    let params = load_params(common)?;
    let scenario = Scenario::new(common.zc, common.zb)?;
    let solver = SolverOptions {
        tol: common.tol,
        max_iter: common.max_iter,
    };
    fs::create_dir_all(&common.out)
        .with_context(|| format!("creating output directory {}", common.out.display()))?;
    let outputs = dispatch(command, &params, scenario, solver, &common.out)?;
    let manifest = RunManifest {
        config_path: common.config.display().to_string(),
        subcommand: command.name(),
        root_seed: common.seed,
        tool_version: env!("CARGO_PKG_VERSION"),
        output_dir: common.out.display().to_string(),
        started_unix_ms: started,
        finished_unix_ms: unix_ms(),
        scenario,
        solver,
        threads,
        args: std::env::args().collect(),
        effective_config: params.params(),
        outputs,
    };
    write_json(&common.out, "manifest.json", &manifest, &mut Vec::new())
}

fn is_no_convergence(err: &anyhow::Error) -> bool {
    let nc = |e: &FixedPointError| matches!(e, FixedPointError::NoConvergence { .. });
    err.chain().any(|cause| {
        cause.downcast_ref::<FixedPointError>().is_some_and(nc)
            || matches!(cause.downcast_ref::<FinanceError>(), Some(FinanceError::FixedPoint(e)) if nc(e))
            || matches!(
                cause.downcast_ref::<ExperimentError>(),
                Some(ExperimentError::Finance(FinanceError::FixedPoint(e))) if nc(e)
            )
    })
}

fn main() -> ExitCode {
    // Usage errors are validation errors; exit code 2 is reserved for
    // solver non-convergence.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_no_convergence(&err) {
                ExitCode::from(EXIT_NO_CONVERGENCE)
            } else {
                ExitCode::from(EXIT_INVALID)
            }
        }
    }
}
