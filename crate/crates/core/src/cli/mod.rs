//! Batch front-end: `solve`, `errors`, `simulate`, `gridinfo` and `testfn`.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use config::{
    ApproximatorKind, ApproximatorSection, EvaluationSection, ModelSection, RunConfig,
    SolverSection,
};

use crate::error::{Error, Result};
use crate::evaluation::{error_stats, interp_error_experiment, simulate, ErrorStats};
use crate::policy::Policy;
use crate::sparse_grid::regular_point_count;
use crate::time_iteration::{run, StopReason, TiReport};

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EARLY_STOPPED: i32 = 10;
pub const EXIT_MAX_ITERS: i32 = 11;

#[derive(Debug, Parser)]
#[command(name = "ddsg", version, about = "Time iteration over sparse grids and DDSG")]
pub struct Cli {
    /// Worker threads (default: all cores, or RAYON_NUM_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the configuration).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Simulation seed (overrides the configuration).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the model and write policy.json, report.json and metrics.csv.
    Solve(RunArgs),
    /// Euler-error table row for a solved policy.
    Errors {
        #[command(flatten)]
        run: RunArgs,
        /// Policy artifact (default: <out>/policy.json).
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Simulate a solved policy and write path.csv.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Full versus sparse grid point counts.
    Gridinfo {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        depth: usize,
    },
    /// Interpolation error of SG and DDSG on the test function.
    Testfn {
        #[arg(long, default_value_t = 20)]
        dim: usize,
        /// Exponent of the test function.
        #[arg(long, default_value_t = 1)]
        c: u32,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5])]
        depths: Vec<usize>,
        #[arg(long = "k-max", value_delimiter = ',', default_values_t = [1])]
        k_max: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Skip the full sparse grid (useful when it is too large).
        #[arg(long)]
        no_sg: bool,
    },
}

/// Errors-table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorsRow {
    pub dims: usize,
    pub level: usize,
    pub k_max: Option<usize>,
    pub points: usize,
    pub avg_log10: f64,
    pub p999_log10: f64,
    pub sec_per_step: Option<f64>,
}

pub const ERRORS_HEADER: &str = "dims,level,k_max,points,avg_log10,p999_log10,sec_per_step";

impl ErrorsRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{:.4},{:.4},{}",
            self.dims,
            self.level,
            self.k_max.map(|k| k.to_string()).unwrap_or_default(),
            self.points,
            self.avg_log10,
            self.p999_log10,
            self.sec_per_step.map(|s| format!("{s:.6}")).unwrap_or_default()
        )
    }
}

fn output_dir(cfg: &RunConfig, args: &RunArgs) -> PathBuf {
    match &args.out {
        Some(p) => p.clone(),
        None if cfg.output.as_os_str().is_empty() => PathBuf::from("out"),
        None => cfg.output.clone(),
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.evaluation.seed = seed;
    }
    Ok(cfg)
}

pub fn exit_code_for(reason: StopReason) -> i32 {
    match reason {
        StopReason::Converged => EXIT_CONVERGED,
        StopReason::EarlyStopped => EXIT_EARLY_STOPPED,
        StopReason::MaxIters => EXIT_MAX_ITERS,
    }
}

pub fn metrics_csv(report: &TiReport) -> String {
    let mut s = String::from("iteration,metric\n");
    for (i, m) in report.metric_history.iter().enumerate() {
        let _ = writeln!(s, "{},{m:e}", i + 1);
    }
    s
}

/// Solve and write the artifacts; returns the run report.
pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> Result<(Policy, TiReport)> {
    let model = cfg.build_model()?;
    let (policy, report) = run(&model, &cfg.ti_config())?;
    fs::create_dir_all(out)?;
    fs::write(out.join("policy.json"), serde_json::to_string(&policy)?)?;
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    fs::write(out.join("metrics.csv"), metrics_csv(&report))?;
    Ok((policy, report))
}

pub fn load_policy(path: &Path) -> Result<Policy> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot read policy artifact {}: {e}", path.display()),
        ))
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Simulate the policy and summarise its Euler errors.
pub fn cmd_errors(cfg: &RunConfig, policy: &Policy, report: Option<&TiReport>) -> Result<(ErrorsRow, ErrorStats)> {
    let model = cfg.build_model()?;
    let ev = &cfg.evaluation;
    let path = simulate(policy, &model, ev.t, ev.burn_in, ev.seed)?;
    let stats = error_stats(&path, policy, &model)?;
    let row = ErrorsRow {
        dims: model.params.state_dim(),
        level: cfg.approximator.grid_depth,
        k_max: match policy {
            Policy::Ddsg { model } => Some(model.k_max),
            _ => None,
        },
        points: policy.num_points(),
        avg_log10: stats.mean_log10,
        p999_log10: stats.p999_log10,
        sec_per_step: report.map(|r| r.wall_time_per_step),
    };
    Ok((row, stats))
}

pub fn path_csv(n: usize, states: &[Vec<f64>], policies: &[Vec<f64>], first_period: usize) -> String {
    let mut s = String::from("period");
    for j in 1..=n {
        let _ = write!(s, ",a_{j}");
    }
    for j in 1..=n {
        let _ = write!(s, ",k_{j}");
    }
    for j in 1..=n {
        let _ = write!(s, ",kprime_{j}");
    }
    s.push_str(",lambda\n");
    for (t, (x, p)) in states.iter().zip(policies).enumerate() {
        let _ = write!(s, "{}", first_period + t);
        for v in x.iter().chain(p) {
            let _ = write!(s, ",{v:e}");
        }
        s.push('\n');
    }
    s
}

/// Full tensor-grid count `(2^l + 1)^d`, exact when it stays below 1e18.
pub fn full_grid_count(dim: usize, depth: usize) -> String {
    let base = if depth < 64 { Some((1u128 << depth) + 1) } else { None };
    if let Some(b) = base {
        let mut acc: u128 = 1;
        let mut exact = true;
        for _ in 0..dim {
            match acc.checked_mul(b) {
                Some(v) if v <= 1_000_000_000_000_000_000 => acc = v,
                _ => {
                    exact = false;
                    break;
                }
            }
        }
        if exact {
            return acc.to_string();
        }
    }
    let log10 = dim as f64 * (2f64.powi(depth as i32) + 1.0).log10();
    format!("(2^{depth}+1)^{dim} ~ 1e{log10:.1}")
}

pub fn gridinfo_table(dim: usize, depth: usize) -> String {
    let sparse = regular_point_count(dim, depth);
    let sparse = if sparse == u128::MAX { "overflow".to_string() } else { sparse.to_string() };
    format!(
        "dims,depth,full,sparse\n{dim},{depth},{},{sparse}\n",
        full_grid_count(dim, depth)
    )
}

fn install_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {n} worker threads: {e}")))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<i32> {
    install_threads(cli.threads)?;
    match cli.command {
        Command::Solve(args) => {
            let cfg = load_config(&args)?;
            let out = output_dir(&cfg, &args);
            let (policy, report) = cmd_solve(&cfg, &out)?;
            println!(
                "{:?} after {} iterations ({} points, {:.3} s/step); artifacts in {}",
                report.stop_reason,
                report.iterations,
                policy.num_points(),
                report.wall_time_per_step,
                out.display()
            );
            Ok(exit_code_for(report.stop_reason))
        }
        Command::Errors { run, policy } => {
            let cfg = load_config(&run)?;
            let out = output_dir(&cfg, &run);
            let policy_path = policy.unwrap_or_else(|| out.join("policy.json"));
            let pol = load_policy(&policy_path)?;
            let report: Option<TiReport> = policy_path
                .parent()
                .map(|d| d.join("report.json"))
                .and_then(|p| fs::read_to_string(p).ok())
                .and_then(|t| serde_json::from_str(&t).ok());
            let (row, _) = cmd_errors(&cfg, &pol, report.as_ref())?;
            let table = format!("{ERRORS_HEADER}\n{}\n", row.csv());
            fs::create_dir_all(&out)?;
            fs::write(out.join("errors.csv"), &table)?;
            fs::write(out.join("errors.json"), serde_json::to_string_pretty(&row)?)?;
            print!("{table}");
            Ok(EXIT_CONVERGED)
        }
        Command::Simulate { run, policy } => {
            let cfg = load_config(&run)?;
            let out = output_dir(&cfg, &run);
            let pol = load_policy(&policy.unwrap_or_else(|| out.join("policy.json")))?;
            let model = cfg.build_model()?;
            let ev = &cfg.evaluation;
            let path = simulate(&pol, &model, ev.t, ev.burn_in, ev.seed)?;
            fs::create_dir_all(&out)?;
            fs::write(
                out.join("path.csv"),
                path_csv(model.n(), &path.states, &path.policies, ev.burn_in),
            )?;
            let summary = serde_json::json!({
                "periods": path.states.len(),
                "burn_in": path.burn_in,
                "seed": path.seed,
                "saturation_count": path.saturation_count,
                "saturated_periods": path.saturated_periods,
            });
            fs::write(out.join("path.json"), serde_json::to_string_pretty(&summary)?)?;
            println!("{summary}");
            Ok(EXIT_CONVERGED)
        }
        Command::Gridinfo { dim, depth } => {
            if dim == 0 {
                return Err(Error::Config("--dim must be at least 1".into()));
            }
            print!("{}", gridinfo_table(dim, depth));
            Ok(EXIT_CONVERGED)
        }
        Command::Testfn {
            dim,
            c,
            depths,
            k_max,
            samples,
            seed,
            no_sg,
        } => {
            let rows = interp_error_experiment(dim, c, &depths, &k_max, samples, seed, !no_sg)?;
            println!("method,k_max,depth,points,rel_error");
            for r in rows {
                println!("{},{},{},{},{:e}", r.method, r.k_max, r.depth, r.points, r.rel_error);
            }
            Ok(EXIT_CONVERGED)
        }
    }
}

/// Parse arguments, run the command and map the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_CONVERGED };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}
