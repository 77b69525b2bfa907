//! Scalars received per node for consensus and diffusion fusion on ring and
//! star graphs, next to the closed forms `n L |N_i|` and `2 n |N_i|`.
//!
//! cargo run --example message_accounting

use swarmtrack::network::Graph;
use swarmtrack::pipeline::{run, AlgoVariant, FusionKind, PipelineConfig, VECTOR_VOLUME};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let horizon = 100;
    for (name, graph) in [("ring", Graph::ring(4)?), ("star", Graph::star(4)?)] {
        println!("{name}: degrees {:?}", (0..4).map(|i| graph.degree(i)).collect::<Vec<_>>());
        for (v, rounds) in [(AlgoVariant::EcCkf, 1), (AlgoVariant::EcCkf, 5), (AlgoVariant::EcCkf, 10), (AlgoVariant::EdcCif, 1)] {
            let mut cfg = PipelineConfig::default_tracking();
            cfg.scenario.horizon = horizon;
            cfg.graph = graph.clone();
            cfg.filter.consensus_rounds = rounds;
            let rec = run(&cfg, v)?;
            let last = rec.final_counters();
            let per_step: Vec<u64> = last.nodes.iter().map(|c| c.estimator_vector() / horizon as u64).collect();
            let closed: Vec<u64> = (0..4)
                .map(|i| {
                    let d = graph.degree(i) as u64;
                    match v.spec(cfg.filter.ukf).fusion {
                        FusionKind::Consensus => VECTOR_VOLUME * rounds as u64 * d,
                        _ => 2 * VECTOR_VOLUME * d,
                    }
                })
                .collect();
            let sensor: Vec<u64> = last.nodes.iter().map(|c| c.sensor_link).collect();
            println!(
                "  {:8} L={rounds:<2} vector scalars/step {per_step:?} closed form {closed:?} sensor sends {sensor:?}",
                v.label()
            );
        }
    }
    Ok(())
}
