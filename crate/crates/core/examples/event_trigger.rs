//! Send-on-delta triggering on one node: trigger instants, the held
//! measurement, and how the threshold trades transmissions for accuracy.
//!
//! cargo run --example event_trigger

use swarmtrack::estimator::{CompensationSpec, EstimatePair, LocalFilterKind, NodeFilter, ScalingParams};
use swarmtrack::scenario::{generate_truth, stream_rng, CoordinatedTurn, RangeBearingSensor, ScenarioConfig, Stream};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig::default_tracking();
    let gt = generate_truth(&cfg)?;
    let dynamics = CoordinatedTurn::new(cfg.dt);
    let sensor = RangeBearingSensor::new(cfg.sensors[2]);
    let r = cfg.noise.r_per_sensor[2];

    for delta in [0.0, 0.01, 0.04, 0.16] {
        for compensate in [false, true] {
            let mut node = NodeFilter::new(
                EstimatePair::new(cfg.initial_state, cfg.initial_cov),
                LocalFilterKind::Ckf,
                Some(delta),
                ScalingParams::default(),
                CompensationSpec { enabled: compensate, sigma: None },
                stream_rng(cfg.seed, Stream::Compensation(2)),
            );
            let mut raster = String::new();
            let mut sent = 0;
            let mut sq = 0.0;
            for k in 1..=cfg.horizon {
                let z = gt.measurements[2][k - 1];
                let out = node.step(&dynamics, &cfg.noise.q, Some(&z), &sensor, &r, k)?;
                sent += usize::from(out.gamma);
                if k <= 60 {
                    raster.push(if out.gamma { '|' } else { '.' });
                }
                sq += (out.estimate.xhat.fixed_rows::<3>(0) - gt.states[k].fixed_rows::<3>(0)).norm_squared();
            }
            println!(
                "delta {delta:<5} compensation {:<5} TR {:>5.1}%  pos RMSE {:.4}  {raster}",
                compensate,
                100.0 * sent as f64 / cfg.horizon as f64,
                (sq / cfg.horizon as f64).sqrt()
            );
        }
    }
    Ok(())
}
