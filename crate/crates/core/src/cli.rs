//! Command-line interface: `simulate`, `compare`, `ingest-tum`, `metrics`.
//!
//! Exit codes: 0 success, 1 a run failed, 2 usage or configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::metrics::{rmse_series, summarize, RunMetrics};
use crate::pipeline::{run_log, AlgoVariant, ObservationLog, PipelineConfig, RunRecord};
use crate::replay::ReplayBundle;
use crate::report::{
    read_run_csv, write_json, write_rmse_csv, write_run_csv, write_trigger_raster, RunFailure,
    Summary,
};
use crate::scenario::generate_truth;
use crate::trajio::OutlierConfig;

#[derive(Debug, Parser)]
#[command(name = "swarmtrack", version, about = "Distributed event-triggered target tracking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one variant over Monte-Carlo seeds and write per-run and summary files.
    Simulate(SimulateArgs),
    /// Run several variants (optionally over a parameter sweep) and tabulate.
    Compare(CompareArgs),
    /// Turn TUM logs into a replay bundle.
    IngestTum(IngestArgs),
    /// Recompute metrics from run CSV files.
    Metrics(MetricsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON; the built-in default scenario when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// First seed; run `m` uses `seed + m`. Defaults to the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Override the trigger threshold.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub sigma1: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Override the consensus round count.
    #[arg(long = "consensus-L")]
    pub consensus_l: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value = "EDC-CIF")]
    pub algo: AlgoVariant,
    #[arg(long, default_value_t = 1)]
    pub runs: u64,
    /// Sensor count; sensors are placed on a circle with a ring topology.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Replay bundle directory written by `ingest-tum`.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Perturb replayed measurements with N(0, R) drawn from each run's seed.
    #[arg(long)]
    pub replay_noise: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Comma-separated variants; all eight when omitted.
    #[arg(long, value_delimiter = ',')]
    pub algo: Vec<AlgoVariant>,
    #[arg(long, default_value_t = 100)]
    pub runs: u64,
    /// Comma-separated sensor counts to sweep.
    #[arg(long, value_delimiter = ',')]
    pub nodes: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_delta: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_sigma1: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub sweep_sigma2: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Target trajectory (TUM).
    #[arg(long)]
    pub target: PathBuf,
    /// Observer trajectories (TUM), one per sensor node.
    #[arg(long = "observer", required = true)]
    pub observers: Vec<PathBuf>,
    /// Common resampling rate (Hz).
    #[arg(long, default_value_t = 10.0)]
    pub rate: f64,
    #[arg(long, default_value_t = OutlierConfig::default().max_gap)]
    pub max_gap: f64,
    #[arg(long, default_value_t = OutlierConfig::default().origin_radius)]
    pub origin_radius: f64,
    /// Bundle directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Run CSV files, or directories containing `run_*.csv`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Parse `args` (including the program name) and run.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Usage(msg) | CliError::Runtime(msg)) = &e;
            eprintln!("error: {msg}");
            ExitCode::from(e.code())
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let pool = thread_pool()?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::IngestTum(a) => cmd_ingest_tum(&a),
        Command::Metrics(a) => cmd_metrics(&a),
    })
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SWARMTRACK_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| usage(format!("SWARMTRACK_THREADS must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(runtime)
}

fn load_config(a: &ScenarioArgs, nodes: Option<usize>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p).map_err(usage)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = nodes {
        if n == 0 {
            return Err(usage("--nodes must be at least 1"));
        }
        cfg = cfg.with_nodes(n);
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(d) = a.delta {
        cfg.filter.delta = d;
    }
    if let Some(s) = a.sigma1 {
        cfg.filter.sigma1 = s;
    }
    if let Some(s) = a.sigma2 {
        cfg.filter.sigma2 = s;
    }
    if let Some(l) = a.consensus_l {
        cfg.fusion.consensus_l = l;
    }
    cfg.to_pipeline().map_err(usage)?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))
}

/// Outcome of one ensemble.
pub struct Ensemble {
    pub seeds: Vec<u64>,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
}

/// Run `variant` for `runs` consecutive seeds in parallel on the current
/// rayon pool. Results are ordered by seed.
pub fn run_ensemble(
    cfg: &PipelineConfig,
    variant: AlgoVariant,
    runs: u64,
    replay: Option<(&ReplayBundle, bool)>,
) -> Ensemble {
    let spec = variant.spec(cfg.filter.ukf);
    let seeds: Vec<u64> = (0..runs).map(|m| cfg.scenario.seed.wrapping_add(m)).collect();
    let results: Vec<_> = seeds
        .par_iter()
        .map(|&seed| {
            let c = cfg.with_seed(seed);
            let log = match replay {
                Some((bundle, noisy)) => {
                    Ok(bundle.observation_log(noisy.then_some((&c.scenario.noise.r_per_sensor[..], seed))))
                }
                None => generate_truth(&c.scenario)
                    .map(|gt| ObservationLog::from_truth(&gt, &c.scenario.sensors))
                    .map_err(crate::pipeline::PipelineError::from),
            };
            log.and_then(|log| run_log(&c, &spec, variant.label(), &log))
        })
        .collect();
    let mut out = Ensemble {
        seeds: seeds.clone(),
        runs: Vec::new(),
        failures: Vec::new(),
    };
    for (seed, r) in seeds.into_iter().zip(results) {
        match r {
            Ok(rec) => out.runs.push(rec),
            Err(e) => out.failures.push(RunFailure {
                seed,
                error: e.to_string(),
                min_eigenvalue: e.min_eigenvalue(),
            }),
        }
    }
    out
}

#[derive(Serialize)]
struct Timing {
    total_wall_time_s: f64,
    per_run_wall_time_s: Vec<(u64, f64)>,
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let exp = load_config(&a.scenario, a.nodes)?;
    let mut cfg = exp.to_pipeline().map_err(usage)?;
    let bundle = match &a.replay {
        Some(dir) => {
            let b = ReplayBundle::read(dir).map_err(usage)?;
            cfg = b.configure(&cfg).map_err(usage)?;
            Some(b)
        }
        None => None,
    };
    if a.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    let out = &a.scenario.out;
    create_dir(out)?;
    let started = Instant::now();
    let ens = run_ensemble(&cfg, a.algo, a.runs, bundle.as_ref().map(|b| (b, a.replay_noise)));
    let total = started.elapsed().as_secs_f64();

    for rec in &ens.runs {
        write_run_csv(&out.join(format!("run_{}.csv", rec.seed)), rec).map_err(runtime)?;
    }
    let metrics = if ens.runs.is_empty() {
        None
    } else {
        write_rmse_csv(&out.join("rmse.csv"), &rmse_series(&ens.runs).map_err(runtime)?).map_err(runtime)?;
        write_trigger_raster(&out.join("trigger_raster.csv"), &ens.runs[0]).map_err(runtime)?;
        Some(summarize(&ens.runs).map_err(runtime)?)
    };
    let summary = Summary {
        variant: a.algo.label().to_string(),
        config_hash: exp.hash(),
        seeds: ens.seeds.clone(),
        trigger_rate_percent: metrics.as_ref().map_or(0.0, |m| m.trigger_rate * 100.0),
        metrics,
        failures: ens.failures.clone(),
    };
    write_json(&out.join("summary.json"), &summary).map_err(runtime)?;
    write_json(&out.join("config.json"), &exp).map_err(runtime)?;
    write_json(
        &out.join("timing.json"),
        &Timing {
            total_wall_time_s: total,
            per_run_wall_time_s: ens.runs.iter().map(|r| (r.seed, r.wall_time_s)).collect(),
        },
    )
    .map_err(runtime)?;

    if let Some(m) = &summary.metrics {
        println!(
            "{} runs={} pos_rmse={:.4} vel_rmse={:.4} TR={:.2}%",
            summary.variant, m.runs, m.mean_rmse_pos, m.mean_rmse_vel, summary.trigger_rate_percent
        );
    }
    if let Some(f) = ens.failures.first() {
        return Err(runtime(format!(
            "{} of {} runs failed; first (seed {}): {}",
            ens.failures.len(),
            a.runs,
            f.seed,
            f.error
        )));
    }
    Ok(())
}

/// One sweep point.
#[derive(Debug, Clone, Copy)]
enum Sweep {
    None,
    Delta(f64),
    Sigma1(f64),
    Sigma2(f64),
    Nodes(usize),
}

impl Sweep {
    fn axis(&self) -> &'static str {
        match self {
            Sweep::None => "",
            Sweep::Delta(_) => "delta",
            Sweep::Sigma1(_) => "sigma1",
            Sweep::Sigma2(_) => "sigma2",
            Sweep::Nodes(_) => "nodes",
        }
    }

    fn value(&self) -> String {
        match self {
            Sweep::None => String::new(),
            Sweep::Delta(v) | Sweep::Sigma1(v) | Sweep::Sigma2(v) => v.to_string(),
            Sweep::Nodes(n) => n.to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
struct CompareRow {
    variant: String,
    sweep: String,
    value: String,
    runs: usize,
    failures: usize,
    rmse_x: f64,
    rmse_y: f64,
    rmse_z: f64,
    rmse_vx: f64,
    rmse_vy: f64,
    rmse_vz: f64,
    rmse_omega: f64,
    rmse_pos: f64,
    rmse_vel: f64,
    trigger_rate_percent: f64,
    sensor_link: f64,
    estimator_vector: f64,
    estimator_scalars: f64,
    wall_time_s: f64,
}

fn compare_row(variant: AlgoVariant, sweep: Sweep, m: Option<&RunMetrics>, failures: usize, wall: f64) -> CompareRow {
    let nan = f64::NAN;
    let per = m.map_or([nan; 7], |m| m.mean_rmse_per_variable);
    CompareRow {
        variant: variant.label().into(),
        sweep: sweep.axis().into(),
        value: sweep.value(),
        runs: m.map_or(0, |m| m.runs),
        failures,
        rmse_x: per[0],
        rmse_y: per[1],
        rmse_z: per[2],
        rmse_vx: per[3],
        rmse_vy: per[4],
        rmse_vz: per[5],
        rmse_omega: per[6],
        rmse_pos: m.map_or(nan, |m| m.mean_rmse_pos),
        rmse_vel: m.map_or(nan, |m| m.mean_rmse_vel),
        trigger_rate_percent: m.map_or(nan, |m| m.trigger_rate * 100.0),
        sensor_link: m.map_or(nan, |m| m.messages.sensor_link),
        estimator_vector: m.map_or(nan, |m| m.messages.estimator_vector()),
        estimator_scalars: m.map_or(nan, |m| m.messages.estimator_scalars()),
        wall_time_s: wall,
    }
}

pub fn cmd_compare(a: &CompareArgs) -> Result<(), CliError> {
    let variants: Vec<AlgoVariant> = if a.algo.is_empty() {
        AlgoVariant::ALL.to_vec()
    } else {
        a.algo.clone()
    };
    if a.runs == 0 {
        return Err(usage("--runs must be at least 1"));
    }
    let axes = [
        !a.sweep_delta.is_empty(),
        !a.sweep_sigma1.is_empty(),
        !a.sweep_sigma2.is_empty(),
        a.nodes.len() > 1,
    ];
    if axes.iter().filter(|&&b| b).count() > 1 {
        return Err(usage("sweep one parameter at a time"));
    }
    let mut points: Vec<Sweep> = a
        .sweep_delta
        .iter()
        .map(|&v| Sweep::Delta(v))
        .chain(a.sweep_sigma1.iter().map(|&v| Sweep::Sigma1(v)))
        .chain(a.sweep_sigma2.iter().map(|&v| Sweep::Sigma2(v)))
        .collect();
    if a.nodes.len() > 1 {
        points = a.nodes.iter().map(|&n| Sweep::Nodes(n)).collect();
    }
    if points.is_empty() {
        points.push(Sweep::None);
    }
    let fixed_nodes = (a.nodes.len() == 1).then(|| a.nodes[0]);

    // Resolve every point first so a bad value is a usage error before any work.
    let mut jobs = Vec::new();
    for p in &points {
        let mut sa = a.scenario.clone();
        let mut nodes = fixed_nodes;
        match *p {
            Sweep::None => {}
            Sweep::Delta(v) => sa.delta = Some(v),
            Sweep::Sigma1(v) => sa.sigma1 = Some(v),
            Sweep::Sigma2(v) => sa.sigma2 = Some(v),
            Sweep::Nodes(n) => nodes = Some(n),
        }
        let exp = load_config(&sa, nodes)?;
        let cfg = exp.to_pipeline().map_err(usage)?;
        jobs.push((*p, exp, cfg));
    }

    let out = &a.scenario.out;
    create_dir(out)?;
    let table_path = out.join("compare.csv");
    let mut w = csv::Writer::from_path(&table_path).map_err(runtime)?;
    let mut any_failed = false;
    let mut hashes = Vec::new();
    for (point, exp, cfg) in &jobs {
        hashes.push(exp.hash());
        for &v in &variants {
            let started = Instant::now();
            let ens = run_ensemble(cfg, v, a.runs, None);
            let wall = started.elapsed().as_secs_f64();
            any_failed |= !ens.failures.is_empty();
            let metrics = if ens.runs.is_empty() {
                None
            } else {
                let series = rmse_series(&ens.runs).map_err(runtime)?;
                let name = match point {
                    Sweep::None => format!("rmse_{}.csv", v.label()),
                    p => format!("rmse_{}_{}_{}.csv", v.label(), p.axis(), p.value()),
                };
                write_rmse_csv(&out.join(name), &series).map_err(runtime)?;
                Some(summarize(&ens.runs).map_err(runtime)?)
            };
            for f in &ens.failures {
                log::warn!("{} seed {} failed: {}", v.label(), f.seed, f.error);
            }
            let row = compare_row(v, *point, metrics.as_ref(), ens.failures.len(), wall);
            println!(
                "{:8} {:>6} {:>8} pos={:.4} vel={:.4} TR={:.2}% failures={}",
                row.variant, row.sweep, row.value, row.rmse_pos, row.rmse_vel, row.trigger_rate_percent, row.failures
            );
            w.serialize(&row).map_err(runtime)?;
        }
    }
    w.flush().map_err(runtime)?;
    write_json(&out.join("compare_config_hashes.json"), &hashes).map_err(runtime)?;
    if any_failed {
        return Err(runtime("some runs failed; see compare.csv"));
    }
    Ok(())
}

pub fn cmd_ingest_tum(a: &IngestArgs) -> Result<(), CliError> {
    let outliers = OutlierConfig {
        max_gap: a.max_gap,
        origin_radius: a.origin_radius,
    };
    let bundle = crate::replay::ingest(&a.target, &a.observers, a.rate, outliers).map_err(usage)?;
    bundle.write(&a.out).map_err(runtime)?;
    println!(
        "wrote {} samples for {} sensors to {} ({} coincident samples skipped)",
        bundle.index.samples,
        bundle.sensors.len(),
        a.out.display(),
        bundle.index.skipped_coincident
    );
    Ok(())
}

fn collect_run_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| usage(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.file_name()
                        .and_then(|n| n.to_str())
                        .is_some_and(|n| n.starts_with("run_") && n.ends_with(".csv"))
                })
                .collect();
            found.sort();
            files.extend(found);
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            return Err(usage(format!("{}: no such file or directory", p.display())));
        }
    }
    if files.is_empty() {
        return Err(usage("no run files found"));
    }
    Ok(files)
}

pub fn cmd_metrics(a: &MetricsArgs) -> Result<(), CliError> {
    let files = collect_run_files(&a.inputs)?;
    let runs = files
        .iter()
        .map(|f| read_run_csv(f))
        .collect::<Result<Vec<_>, _>>()
        .map_err(usage)?;
    let series = rmse_series(&runs).map_err(usage)?;
    let m = summarize(&runs).map_err(usage)?;
    create_dir(&a.out)?;
    write_rmse_csv(&a.out.join("rmse.csv"), &series).map_err(runtime)?;
    write_json(&a.out.join("metrics.json"), &m).map_err(runtime)?;
    println!(
        "runs={} pos_rmse={:.4} vel_rmse={:.4} TR={:.2}%",
        m.runs,
        m.mean_rmse_pos,
        m.mean_rmse_vel,
        m.trigger_rate * 100.0
    );
    Ok(())
}
