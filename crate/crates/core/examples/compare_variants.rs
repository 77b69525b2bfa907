//! Monte-Carlo comparison of all eight variants on the default scenario.
//!
//! cargo run --release --example compare_variants -- [runs]

use swarmtrack::cli::run_ensemble;
use swarmtrack::metrics::summarize;
use swarmtrack::pipeline::{AlgoVariant, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let runs: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(100);
    let cfg = PipelineConfig::default_tracking();
    println!("{:8} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6}", "variant", "x", "y", "z", "pos", "vel", "TR%", "fail");
    for v in AlgoVariant::ALL {
        let ens = run_ensemble(&cfg, v, runs, None);
        let m = summarize(&ens.runs)?;
        let p = m.mean_rmse_per_variable;
        println!(
            "{:8} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.2} {:>6}",
            v.label(), p[0], p[1], p[2], m.mean_rmse_pos, m.mean_rmse_vel, m.trigger_rate * 100.0, ens.failures.len()
        );
    }
    Ok(())
}
