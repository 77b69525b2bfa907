//! Sweep the trigger threshold and the scaling parameters of the
//! event-triggered gain for EDC-CIF.
//!
//! cargo run --release --example scaling_ablation -- [runs]

use swarmtrack::cli::run_ensemble;
use swarmtrack::estimator::ScalingParams;
use swarmtrack::metrics::summarize;
use swarmtrack::pipeline::{AlgoVariant, PipelineConfig};

fn report(label: &str, cfg: &PipelineConfig, runs: u64) -> Result<(), Box<dyn std::error::Error>> {
    let ens = run_ensemble(cfg, AlgoVariant::EdcCif, runs, None);
    let m = summarize(&ens.runs)?;
    println!(
        "{label:<16} pos RMSE {:.4}  vel RMSE {:.4}  TR {:>6.2}%  aborted {}",
        m.mean_rmse_pos,
        m.mean_rmse_vel,
        m.trigger_rate * 100.0,
        ens.failures.len()
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let runs: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(100);
    let base = PipelineConfig::default_tracking();
    for delta in [0.0, 0.01, 0.02, 0.04, 0.08] {
        let mut cfg = base.clone();
        cfg.filter.delta = delta;
        report(&format!("delta={delta}"), &cfg, runs)?;
    }
    for s1 in [5e-4, 5e-3, 0.05, 0.1] {
        let mut cfg = base.clone();
        cfg.filter.scaling = ScalingParams::new(s1, 5e-4)?;
        report(&format!("sigma1={s1}"), &cfg, runs)?;
    }
    for s2 in [5e-4, 5e-3, 0.05, 0.1] {
        let mut cfg = base.clone();
        cfg.filter.scaling = ScalingParams::new(5e-4, s2)?;
        report(&format!("sigma2={s2}"), &cfg, runs)?;
    }
    Ok(())
}
