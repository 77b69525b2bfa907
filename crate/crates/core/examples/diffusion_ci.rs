//! Diffusion fusion building blocks: covariance intersection of two
//! estimates, and a full network comparing convex and CI combination.
//!
//! cargo run --example diffusion_ci

use swarmtrack::estimator::EstimatePair;
use swarmtrack::fusion::{ci_combine, diffuse_combine_convex};
use swarmtrack::linalg::{StateCov, StateVec};
use swarmtrack::metrics::summarize;
use swarmtrack::network::{diffusion_weights, Graph};
use swarmtrack::pipeline::{run, AlgoVariant, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Two estimates that are confident in different axes.
    let mut pa = StateCov::identity();
    pa[(0, 0)] = 0.1;
    let mut pb = StateCov::identity();
    pb[(1, 1)] = 0.1;
    let a = EstimatePair::new(StateVec::zeros(), pa);
    let b = EstimatePair::new(StateVec::from_element(1.0), pb);
    let w = [0.5, 0.5];
    let ci = ci_combine(&[a, b], &w)?;
    let convex = diffuse_combine_convex(&[a, b], &w)?;
    println!("CI     x0 {:.3} x1 {:.3} P00 {:.3} P11 {:.3}", ci.xhat_fus[0], ci.xhat_fus[1], ci.p_fus[(0, 0)], ci.p_fus[(1, 1)]);
    println!("convex x0 {:.3} x1 {:.3} P00 {:.3} P11 {:.3}", convex.xhat_fus[0], convex.xhat_fus[1], convex.p_fus[(0, 0)], convex.p_fus[(1, 1)]);

    let g = Graph::ring(4)?;
    println!("ring(4) diffusion weights: {:?}", diffusion_weights(&g));

    let cfg = PipelineConfig::default_tracking();
    for v in [AlgoVariant::DCif, AlgoVariant::DcCif, AlgoVariant::EdCif, AlgoVariant::EdcCif] {
        let runs: Vec<_> = (0..20).map(|s| run(&cfg.with_seed(s), v)).collect::<Result<_, _>>()?;
        let m = summarize(&runs)?;
        println!("{:8} pos RMSE {:.4}  vel RMSE {:.4}  TR {:.1}%", v.label(), m.mean_rmse_pos, m.mean_rmse_vel, m.trigger_rate * 100.0);
    }
    Ok(())
}
