//! Single-sensor tracking with the cubature filter in moment form and in
//! information form, plus the EKF and UKF linearizations of the same node.
//!
//! cargo run --example cubature_filter

use swarmtrack::estimator::{
    ckf_predict, ckf_update, CompensationSpec, EstimatePair, LocalFilterKind, NodeFilter, ScalingParams,
    UkfParams,
};
use swarmtrack::scenario::{generate_truth, stream_rng, CoordinatedTurn, RangeBearingSensor, ScenarioConfig, Stream};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ScenarioConfig::default_tracking();
    let gt = generate_truth(&cfg)?;
    let dynamics = CoordinatedTurn::new(cfg.dt);
    let sensor = RangeBearingSensor::new(cfg.sensors[0]);
    let r = cfg.noise.r_per_sensor[0];
    let initial = EstimatePair::new(cfg.initial_state, cfg.initial_cov);

    let mut ckf = initial;
    let kinds = [LocalFilterKind::Ckf, LocalFilterKind::Ekf, LocalFilterKind::Ukf(UkfParams::default())];
    let mut nodes: Vec<NodeFilter> = kinds
        .iter()
        .map(|&kind| {
            NodeFilter::new(initial, kind, None, ScalingParams::default(), CompensationSpec::default(), stream_rng(cfg.seed, Stream::Compensation(0)))
        })
        .collect();
    let mut sq = [0.0; 4];
    for k in 1..=cfg.horizon {
        let z = gt.measurements[0][k - 1];
        let prior = ckf_predict(&ckf, &dynamics, &cfg.noise.q)?;
        ckf = ckf_update(&prior, &z, &sensor, &r)?.0;
        let truth = gt.states[k];
        sq[0] += (ckf.xhat.fixed_rows::<3>(0) - truth.fixed_rows::<3>(0)).norm_squared();
        for (i, n) in nodes.iter_mut().enumerate() {
            let out = n.step(&dynamics, &cfg.noise.q, Some(&z), &sensor, &r, k)?;
            sq[i + 1] += (out.estimate.xhat.fixed_rows::<3>(0) - truth.fixed_rows::<3>(0)).norm_squared();
        }
    }
    let t = cfg.horizon as f64;
    println!("single sensor, {} steps, position RMSE:", cfg.horizon);
    println!("  CKF (moment form)       {:.4}", (sq[0] / t).sqrt());
    for (i, kind) in kinds.iter().enumerate() {
        println!("  {} (information form)  {:.4}", kind.label(), (sq[i + 1] / t).sqrt());
    }
    println!("final CKF state {:.3?}", ckf.xhat.as_slice());
    Ok(())
}
