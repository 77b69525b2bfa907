//! Ingest the bundled TUM fixtures, write a replay bundle to a temporary
//! directory, and track the replayed target.
//!
//! cargo run --example tum_replay -- [target.tum observer.tum ...]

use std::path::PathBuf;

use swarmtrack::metrics::summarize;
use swarmtrack::pipeline::{run_log, AlgoVariant, PipelineConfig};
use swarmtrack::replay::{ingest, ReplayBundle};
use swarmtrack::trajio::OutlierConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    let (target, observers) = if args.len() >= 2 {
        (args[0].clone(), args[1..].to_vec())
    } else {
        let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
        (dir.join("target.tum"), vec![dir.join("observer_a.tum"), dir.join("observer_b.tum")])
    };
    let bundle = ingest(&target, &observers, 10.0, OutlierConfig::default())?;
    let out = std::env::temp_dir().join("swarmtrack_replay_example");
    bundle.write(&out)?;
    let bundle = ReplayBundle::read(&out)?;
    println!("bundle in {}: {} samples, {} sensors", out.display(), bundle.index.samples, bundle.sensors.len());

    let cfg = bundle.configure(&PipelineConfig::default_tracking())?;
    for v in [AlgoVariant::EcCkf, AlgoVariant::DcCif, AlgoVariant::EdcCif] {
        let spec = v.spec(cfg.filter.ukf);
        let runs: Vec<_> = (0..20)
            .map(|seed| run_log(&cfg, &spec, v.label(), &bundle.observation_log(Some((&cfg.scenario.noise.r_per_sensor, seed)))))
            .collect::<Result<_, _>>()?;
        let m = summarize(&runs)?;
        println!("{:8} pos RMSE {:.4}  TR {:.1}%", v.label(), m.mean_rmse_pos, m.trigger_rate * 100.0);
    }
    Ok(())
}
