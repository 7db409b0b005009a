//! Benchmark harness for the cost-constrained optimizer: single runs, seeded
//! replication matrices, convergence-curve aggregation, and cost histograms.
//!
//! Run histories are JSONL: one metadata object, then one object per
//! evaluation with fields `iteration`, `point`, `value`, `cost`,
//! `cumulative_cost`, `best_so_far`, `overran`, in that order. Repeated
//! invocations with identical flags produce byte-identical files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ccbo::{
    aggregate_curves, cost_histogram, default_grid, interpolate_history, log_bins,
    problem_by_name, run_bo, write_curve_csv, CostModelMode, PolicySpec, Problem, RunConfig,
    RunHistory,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(
    name = "ccbo",
    version,
    about = "Cost-constrained Bayesian optimization benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one optimization run and write its history file.
    Run(RunCmd),
    /// Execute a policies-by-seeds replication matrix with a worker pool.
    Bench(BenchCmd),
    /// Interpolate run histories onto a cost grid and write mean/std curves.
    Aggregate(AggregateCmd),
    /// Bin per-evaluation costs into a log-spaced histogram per policy.
    Hist(HistCmd),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum CostModeArg {
    /// Plan with a GP fitted to the logarithm of observed costs.
    Learned,
    /// Plan with the problem's true cost function.
    Analytic,
}

impl From<CostModeArg> for CostModelMode {
    fn from(mode: CostModeArg) -> Self {
        match mode {
            CostModeArg::Learned => CostModelMode::Learned,
            CostModeArg::Analytic => CostModelMode::Analytic,
        }
    }
}

#[derive(Args, Clone)]
struct RunSettings {
    /// Problem name: ring, ring-unit, ring-adv, or sensor<m> (for example
    /// sensor3).
    #[arg(long)]
    problem: String,
    /// Evaluation-cost budget; defaults to the problem's own budget.
    #[arg(long)]
    tau: Option<f64>,
    /// Lookahead horizon applied when a bare `rollout` or `base` policy
    /// name is given; names like `rollout4` carry their own.
    #[arg(long, default_value_t = 2)]
    horizon: usize,
    /// Rollout samples per candidate (rollout policies only).
    #[arg(long)]
    samples: Option<usize>,
    /// Cost model used for planning.
    #[arg(long, value_enum, default_value_t = CostModeArg::Learned)]
    cost_mode: CostModeArg,
    /// Initial design size; defaults to 2*dim + 2.
    #[arg(long)]
    init_points: Option<usize>,
    /// Directory run history files are written into.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct RunCmd {
    #[command(flatten)]
    settings: RunSettings,
    /// Policy name: ei, eipu, rollout<h>, or base<h>.
    #[arg(long)]
    policy: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchCmd {
    #[command(flatten)]
    settings: RunSettings,
    /// Comma-separated policy names, e.g. `ei,eipu,rollout2,rollout4`.
    #[arg(long)]
    policies: String,
    /// Seeds as a comma list (`0,3,7`) or half-open range (`0:50`).
    #[arg(long)]
    seeds: String,
    /// Worker threads for dispatching replications.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct AggregateCmd {
    /// Directory holding run history files.
    #[arg(long, default_value = "runs")]
    dir: PathBuf,
    /// Directory curve CSVs are written into; defaults to `--dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of uniform grid points on (0, tau].
    #[arg(long, default_value_t = 200)]
    grid_points: usize,
}

#[derive(Args)]
struct HistCmd {
    /// Directory holding run history files.
    #[arg(long, default_value = "runs")]
    dir: PathBuf,
    /// Output CSV path; defaults to `<dir>/cost_histogram.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of log-spaced bins.
    #[arg(long, default_value_t = 30)]
    bins: usize,
}

enum AppError {
    Config(String),
    Runtime(String),
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(m) | AppError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<ccbo::Error> for AppError {
    fn from(e: ccbo::Error) -> Self {
        match e {
            ccbo::Error::InvalidConfig(_) | ccbo::Error::InvalidProblem(_) => {
                AppError::Config(e.to_string())
            }
            other => AppError::Runtime(other.to_string()),
        }
    }
}

fn config_err(msg: impl Into<String>) -> AppError {
    AppError::Config(msg.into())
}

fn runtime_err(msg: impl fmt::Display) -> AppError {
    AppError::Runtime(msg.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Run(cmd) => run_command(cmd),
        Command::Bench(cmd) => bench_command(cmd),
        Command::Aggregate(cmd) => aggregate_command(cmd),
        Command::Hist(cmd) => hist_command(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(AppError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Resolve a policy name, applying the `--horizon` flag to bare `rollout`
/// and `base` and the `--samples` override to rollout policies.
fn resolve_policy(name: &str, horizon: usize, samples: Option<usize>) -> Result<PolicySpec, AppError> {
    let mut spec = match name {
        "rollout" => PolicySpec::rollout(horizon),
        "base" => PolicySpec::base_schedule(horizon),
        other => PolicySpec::parse(other)?,
    };
    if let Some(n) = samples {
        spec.samples = n;
    }
    spec.validate()?;
    Ok(spec)
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, AppError> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once(':') {
        let lo: u64 = lo
            .trim()
            .parse()
            .map_err(|_| config_err(format!("bad seed range start '{lo}'")))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .map_err(|_| config_err(format!("bad seed range end '{hi}'")))?;
        if hi <= lo {
            return Err(config_err(format!(
                "seed range {lo}:{hi} is empty; the end is exclusive"
            )));
        }
        return Ok((lo..hi).collect());
    }
    let seeds: Result<Vec<u64>, _> = text
        .split(',')
        .map(|s| s.trim().parse::<u64>())
        .collect();
    let seeds = seeds.map_err(|_| config_err(format!("bad seed list '{text}'")))?;
    if seeds.is_empty() {
        return Err(config_err("at least one seed is required"));
    }
    Ok(seeds)
}

struct Prepared {
    problem: Problem,
    tau: f64,
    init_points: usize,
}

fn prepare(settings: &RunSettings) -> Result<Prepared, AppError> {
    let problem = problem_by_name(&settings.problem)?;
    let tau = settings.tau.unwrap_or(problem.default_budget);
    if !(tau.is_finite() && tau > 0.0) {
        return Err(config_err(format!("budget must be finite and positive, got {tau}")));
    }
    let init_points = settings
        .init_points
        .unwrap_or(2 * problem.domain.dim() + 2);
    Ok(Prepared {
        problem,
        tau,
        init_points,
    })
}

fn run_config(prep: &Prepared, settings: &RunSettings, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::new(prep.tau, seed);
    cfg.cost_mode = settings.cost_mode.into();
    cfg.init_points = Some(prep.init_points);
    cfg
}

fn history_path(dir: &Path, problem: &str, policy: &str, seed: u64) -> PathBuf {
    dir.join(format!("{problem}_{policy}_seed{seed}.jsonl"))
}

fn execute_one(
    prep: &Prepared,
    settings: &RunSettings,
    spec: &PolicySpec,
    seed: u64,
) -> Result<PathBuf, AppError> {
    let cfg = run_config(prep, settings, seed);
    let history = run_bo(&prep.problem, spec, &cfg)?;
    let path = history_path(&settings.out, &prep.problem.name, &spec.name(), seed);
    fs::write(&path, history.to_jsonl()).map_err(runtime_err)?;
    Ok(path)
}

fn run_command(cmd: RunCmd) -> Result<(), AppError> {
    let prep = prepare(&cmd.settings)?;
    let spec = resolve_policy(&cmd.policy, cmd.settings.horizon, cmd.settings.samples)?;
    fs::create_dir_all(&cmd.settings.out).map_err(runtime_err)?;
    let path = execute_one(&prep, &cmd.settings, &spec, cmd.seed)?;
    println!("{}", path.display());
    Ok(())
}

/// Everything that determines a run's output, echoed into the manifest and
/// hashed so aggregated results can be traced back to their configuration.
#[derive(Serialize)]
struct ConfigEcho {
    problem: String,
    policy: String,
    horizon: usize,
    samples: usize,
    qmc: String,
    restarts: usize,
    max_iters: usize,
    tau: f64,
    cost_mode: String,
    init_points: usize,
}

impl ConfigEcho {
    fn new(prep: &Prepared, settings: &RunSettings, spec: &PolicySpec) -> Self {
        Self {
            problem: prep.problem.name.clone(),
            policy: spec.name(),
            horizon: spec.horizon,
            samples: spec.samples,
            qmc: spec.qmc.to_string(),
            restarts: spec.restarts,
            max_iters: spec.max_iters,
            tau: prep.tau,
            cost_mode: CostModelMode::from(settings.cost_mode).to_string(),
            init_points: prep.init_points,
        }
    }

    fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config echo serializes");
        let digest = Sha256::digest(json.as_bytes());
        format!("{digest:x}")
    }
}

#[derive(Serialize)]
struct Manifest {
    problem: String,
    tau: f64,
    policies: Vec<String>,
    seeds: Vec<u64>,
    cost_mode: String,
    init_points: usize,
    workers: usize,
    configs: BTreeMap<String, ConfigEcho>,
    config_hashes: BTreeMap<String, String>,
    files: Vec<String>,
}

fn bench_command(cmd: BenchCmd) -> Result<(), AppError> {
    let prep = prepare(&cmd.settings)?;
    let seeds = parse_seeds(&cmd.seeds)?;
    if cmd.workers == 0 {
        return Err(config_err("at least one worker is required"));
    }
    let mut specs = Vec::new();
    for name in cmd.policies.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        specs.push(resolve_policy(name, cmd.settings.horizon, cmd.settings.samples)?);
    }
    if specs.is_empty() {
        return Err(config_err("at least one policy is required"));
    }
    fs::create_dir_all(&cmd.settings.out).map_err(runtime_err)?;

    let jobs: Vec<(usize, u64)> = (0..specs.len())
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cmd.workers)
        .build()
        .map_err(runtime_err)?;
    let mut paths = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, seed)| execute_one(&prep, &cmd.settings, &specs[p], seed))
            .collect::<Result<Vec<_>, _>>()
    })?;
    paths.sort();

    let mut configs = BTreeMap::new();
    let mut config_hashes = BTreeMap::new();
    for spec in &specs {
        let echo = ConfigEcho::new(&prep, &cmd.settings, spec);
        config_hashes.insert(spec.name(), echo.hash());
        configs.insert(spec.name(), echo);
    }
    let manifest = Manifest {
        problem: prep.problem.name.clone(),
        tau: prep.tau,
        policies: specs.iter().map(|s| s.name()).collect(),
        seeds,
        cost_mode: CostModelMode::from(cmd.settings.cost_mode).to_string(),
        init_points: prep.init_points,
        workers: cmd.workers,
        configs,
        config_hashes,
        files: paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
    };
    let manifest_path = cmd.settings.out.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest).map_err(runtime_err)?;
    fs::write(&manifest_path, body + "\n").map_err(runtime_err)?;

    for path in &paths {
        println!("{}", path.display());
    }
    println!("{}", manifest_path.display());
    Ok(())
}

fn read_histories(dir: &Path) -> Result<Vec<RunHistory>, AppError> {
    let entries = fs::read_dir(dir)
        .map_err(|e| config_err(format!("cannot read {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(config_err(format!(
            "no run history files (*.jsonl) under {}",
            dir.display()
        )));
    }
    let mut histories = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(&path).map_err(runtime_err)?;
        let history = RunHistory::from_jsonl(&text)
            .map_err(|e| AppError::Runtime(format!("{}: {e}", path.display())))?;
        histories.push(history);
    }
    Ok(histories)
}

/// Format `tau` for a file name: plain decimal, no trailing zeros.
fn tau_label(tau: f64) -> String {
    format!("{tau}")
}

fn aggregate_command(cmd: AggregateCmd) -> Result<(), AppError> {
    if cmd.grid_points == 0 {
        return Err(config_err("at least one grid point is required"));
    }
    let out_dir = cmd.out.clone().unwrap_or_else(|| cmd.dir.clone());
    let histories = read_histories(&cmd.dir)?;
    fs::create_dir_all(&out_dir).map_err(runtime_err)?;

    let mut groups: BTreeMap<(String, String, u64), Vec<&RunHistory>> = BTreeMap::new();
    for history in &histories {
        groups
            .entry((
                history.meta.problem.clone(),
                history.meta.policy.clone(),
                history.meta.tau.to_bits(),
            ))
            .or_default()
            .push(history);
    }

    let mut written = 0usize;
    for ((problem, policy, tau_bits), group) in &groups {
        let tau = f64::from_bits(*tau_bits);
        if group.len() < 2 {
            eprintln!(
                "skipping {problem}/{policy} at tau {tau}: need at least 2 runs, found {}",
                group.len()
            );
            continue;
        }
        let grid = default_grid(tau, cmd.grid_points)?;
        let mut curves = Vec::with_capacity(group.len());
        for history in group {
            curves.push(interpolate_history(history, &grid)?);
        }
        let curve = aggregate_curves(&grid, &curves)?;
        let path = out_dir.join(format!("{problem}_{policy}_tau{}.csv", tau_label(tau)));
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &curve).map_err(runtime_err)?;
        fs::write(&path, buf).map_err(runtime_err)?;
        println!("{}", path.display());
        written += 1;
    }
    if written == 0 {
        return Err(config_err("no (problem, policy, tau) group had at least 2 runs"));
    }
    Ok(())
}

fn hist_command(cmd: HistCmd) -> Result<(), AppError> {
    if cmd.bins == 0 {
        return Err(config_err("at least one bin is required"));
    }
    let histories = read_histories(&cmd.dir)?;
    let costs: Vec<f64> = histories
        .iter()
        .flat_map(|h| h.records.iter().map(|r| r.cost))
        .collect();
    if costs.is_empty() {
        return Err(config_err("run histories contain no evaluations"));
    }
    let mut lo = costs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = costs.iter().cloned().fold(0.0, f64::max);
    if lo == hi {
        lo *= 0.999;
        hi *= 1.001;
    }
    let edges = log_bins(lo, hi, cmd.bins)?;
    let rows = cost_histogram(&histories, &edges)?;

    let path = cmd
        .out
        .clone()
        .unwrap_or_else(|| cmd.dir.join("cost_histogram.csv"));
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(runtime_err)?;
        }
    }
    let mut body = String::from("policy,bin_lo,bin_hi,count\n");
    for (policy, counts) in &rows {
        for (bin, count) in counts.iter().enumerate() {
            body.push_str(&format!(
                "{policy},{:.16e},{:.16e},{count}\n",
                edges[bin],
                edges[bin + 1]
            ));
        }
    }
    fs::write(&path, body).map_err(runtime_err)?;
    println!("{}", path.display());
    Ok(())
}
