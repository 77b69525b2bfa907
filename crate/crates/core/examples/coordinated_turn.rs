//! Simulate the default scenario and print the target track and one sensor's
//! measurements.
//!
//! cargo run --example coordinated_turn -- [seed]

use swarmtrack::scenario::{generate_truth, position_from_measurement, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ScenarioConfig::default_tracking();
    if let Some(seed) = std::env::args().nth(1) {
        cfg.seed = seed.parse()?;
    }
    let gt = generate_truth(&cfg)?;
    println!("seed {} dt {} horizon {}", cfg.seed, cfg.dt, cfg.horizon);
    println!("{:>4} {:>8} {:>8} {:>8} {:>7} {:>8} {:>8} {:>8} {:>9}", "k", "x", "y", "z", "omega", "r", "pitch", "azimuth", "recon_err");
    for k in (0..=cfg.horizon).step_by(20) {
        let x = gt.states[k];
        if k == 0 {
            println!("{k:>4} {:>8.3} {:>8.3} {:>8.3} {:>7.3}", x[0], x[1], x[2], x[6]);
            continue;
        }
        let z = gt.measurements[0][k - 1];
        let p = position_from_measurement(&z, &cfg.sensors[0]);
        let err = ((p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2) + (p[2] - x[2]).powi(2)).sqrt();
        println!(
            "{k:>4} {:>8.3} {:>8.3} {:>8.3} {:>7.3} {:>8.3} {:>8.4} {:>8.4} {:>9.4}",
            x[0], x[1], x[2], x[6], z.r, z.phi, z.rho, err
        );
    }
    Ok(())
}
