//! The eight algorithm variants, one synchronous network tick, message
//! accounting, and whole-run execution.
//!
//! A tick is: every node predicts and forms its local contribution (with or
//! without the trigger), then nodes exchange and fuse. Diffusion variants
//! exchange contributions once (adaptation) and estimates once
//! (combination); consensus variants update locally and then run `L` rounds
//! of information averaging.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::estimator::{
    CompensationSpec, EstimatePair, FilterError, InfoContribution, InfoPair, LocalFilterKind,
    NodeFilter, ScalingParams, UkfParams,
};
use crate::fusion::{
    ci_combine_info, consensus_fuse, diffuse_adapt, diffuse_combine_convex, ConsensusConfig,
    FusedEstimate, FusionError,
};
use crate::linalg::{MeasCov, StateCov, StateVec, STATE_DIM};
use crate::network::{diffusion_weights, metropolis_weights, Graph, WeightMatrix};
use crate::scenario::{
    generate_truth, stream_rng, CoordinatedTurn, GroundTruth, Measurement, RangeBearingSensor,
    ScenarioConfig, ScenarioError, SensorPose, Stream,
};

/// Scalars in one state vector.
pub const VECTOR_VOLUME: u64 = STATE_DIM as u64;
/// Scalars in one symmetric state matrix sent as its upper triangle.
pub const MATRIX_VOLUME: u64 = (STATE_DIM * (STATE_DIM + 1) / 2) as u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AlgoVariant {
    #[serde(rename = "C-CKF")]
    CCkf,
    #[serde(rename = "EC-EKF")]
    EcEkf,
    #[serde(rename = "EC-UKF")]
    EcUkf,
    #[serde(rename = "EC-CKF")]
    EcCkf,
    #[serde(rename = "D-CIF")]
    DCif,
    #[serde(rename = "DC-CIF")]
    DcCif,
    #[serde(rename = "ED-CIF")]
    EdCif,
    #[serde(rename = "EDC-CIF")]
    EdcCif,
}

impl AlgoVariant {
    pub const ALL: [AlgoVariant; 8] = [
        AlgoVariant::CCkf,
        AlgoVariant::EcEkf,
        AlgoVariant::EcUkf,
        AlgoVariant::EcCkf,
        AlgoVariant::DCif,
        AlgoVariant::DcCif,
        AlgoVariant::EdCif,
        AlgoVariant::EdcCif,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AlgoVariant::CCkf => "C-CKF",
            AlgoVariant::EcEkf => "EC-EKF",
            AlgoVariant::EcUkf => "EC-UKF",
            AlgoVariant::EcCkf => "EC-CKF",
            AlgoVariant::DCif => "D-CIF",
            AlgoVariant::DcCif => "DC-CIF",
            AlgoVariant::EdCif => "ED-CIF",
            AlgoVariant::EdcCif => "EDC-CIF",
        }
    }

    pub fn spec(self, ukf: UkfParams) -> VariantSpec {
        use AlgoVariant::*;
        let (local, event_triggered, fusion) = match self {
            CCkf => (LocalFilterKind::Ckf, false, FusionKind::Consensus),
            EcEkf => (LocalFilterKind::Ekf, true, FusionKind::Consensus),
            EcUkf => (LocalFilterKind::Ukf(ukf), true, FusionKind::Consensus),
            EcCkf => (LocalFilterKind::Ckf, true, FusionKind::Consensus),
            DCif => (LocalFilterKind::Ckf, false, FusionKind::DiffusionConvex),
            DcCif => (LocalFilterKind::Ckf, false, FusionKind::DiffusionCi),
            EdCif => (LocalFilterKind::Ckf, true, FusionKind::DiffusionConvex),
            EdcCif => (LocalFilterKind::Ckf, true, FusionKind::DiffusionCi),
        };
        VariantSpec {
            local,
            event_triggered,
            fusion,
        }
    }
}

impl fmt::Display for AlgoVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AlgoVariant {
    type Err = String;

    /// Case-insensitive; `_` is accepted in place of `-`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        AlgoVariant::ALL
            .into_iter()
            .find(|v| v.label() == norm)
            .ok_or_else(|| {
                let names: Vec<_> = AlgoVariant::ALL.iter().map(|v| v.label()).collect();
                format!("unknown variant {s:?}; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FusionKind {
    /// Local update, then `L` rounds of averaging of information pairs.
    Consensus,
    /// Adaptation, then `x = sum c x_j`, `P = sum c P_j`.
    DiffusionConvex,
    /// Adaptation, then covariance intersection with the same weights.
    DiffusionCi,
}

/// What a variant is made of. Variants are fixed points in this space; other
/// combinations (e.g. a consensus EKF without trigger) are also runnable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub local: LocalFilterKind,
    pub event_triggered: bool,
    pub fusion: FusionKind,
}

/// Filter and fusion tuning shared by all nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSettings {
    pub delta: f64,
    pub scaling: ScalingParams,
    pub compensation: CompensationSpec,
    pub ukf: UkfParams,
    pub trigger_normalization: Option<MeasCov>,
    /// Consensus rounds `L`.
    pub consensus_rounds: usize,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self {
            delta: 0.04,
            scaling: ScalingParams::default(),
            compensation: CompensationSpec::default(),
            ukf: UkfParams::default(),
            trigger_normalization: None,
            consensus_rounds: 5,
        }
    }
}

/// Everything needed to run one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub scenario: ScenarioConfig,
    pub graph: Graph,
    pub filter: FilterSettings,
}

impl PipelineConfig {
    /// Default scenario on a 4-node ring with default filter settings.
    pub fn default_tracking() -> Self {
        Self {
            scenario: ScenarioConfig::default_tracking(),
            graph: Graph::ring(4).expect("ring of 4 is valid"),
            filter: FilterSettings::default(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.scenario.seed = seed;
        c
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.scenario.validate()?;
        if self.graph.n_nodes() != self.scenario.sensors.len() {
            return Err(PipelineError::Config(format!(
                "graph has {} nodes but the scenario has {} sensors",
                self.graph.n_nodes(),
                self.scenario.sensors.len()
            )));
        }
        if !(self.filter.delta >= 0.0) {
            return Err(PipelineError::Config("delta must be nonnegative".into()));
        }
        if self.filter.consensus_rounds == 0 {
            return Err(PipelineError::Config("consensus_L must be at least 1".into()));
        }
        ScalingParams::new(self.filter.scaling.sigma1, self.filter.scaling.sigma2)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if !(crate::linalg::min_eigenvalue(&self.scenario.initial_cov) > 0.0) {
            return Err(PipelineError::Config("initial_cov must be positive definite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("local filter failed at k={k}, node {node}: {source}")]
    Filter {
        k: usize,
        node: usize,
        source: FilterError,
    },
    #[error("fusion failed at k={k}, node {node}: {source}")]
    Fusion {
        k: usize,
        node: usize,
        source: FusionError,
    },
}

impl PipelineError {
    /// Smallest eigenvalue behind a positive-definiteness failure, if any.
    pub fn min_eigenvalue(&self) -> Option<f64> {
        match self {
            PipelineError::Fusion {
                source: FusionError::NotPositiveDefinite { min_eigenvalue },
                ..
            }
            | PipelineError::Filter {
                source: FilterError::NotPositiveDefinite { min_eigenvalue },
                ..
            } => Some(*min_eigenvalue),
            _ => None,
        }
    }
}

/// Scalars received over estimator links in one stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageVolume {
    /// State-vector scalars (`y` or `x`).
    pub vector: u64,
    /// Matrix scalars (upper triangles of `Y`, `I` or `P`).
    pub matrix: u64,
}

impl StageVolume {
    fn add(&mut self, o: &StageVolume) {
        self.vector += o.vector;
        self.matrix += o.matrix;
    }

    fn messages(count: u64) -> Self {
        Self {
            vector: VECTOR_VOLUME * count,
            matrix: MATRIX_VOLUME * count,
        }
    }
}

/// Per-node message totals. Estimator volumes count what the node receives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCounters {
    /// Sensor-to-estimator transmissions (`tr_i`).
    pub sensor_link: u64,
    pub adaptation: StageVolume,
    pub combination: StageVolume,
    pub consensus: StageVolume,
}

impl NodeCounters {
    pub fn estimator_vector(&self) -> u64 {
        self.adaptation.vector + self.combination.vector + self.consensus.vector
    }

    pub fn estimator_matrix(&self) -> u64 {
        self.adaptation.matrix + self.combination.matrix + self.consensus.matrix
    }

    pub fn add(&mut self, o: &NodeCounters) {
        self.sensor_link += o.sensor_link;
        self.adaptation.add(&o.adaptation);
        self.combination.add(&o.combination);
        self.consensus.add(&o.consensus);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCounter {
    pub nodes: Vec<NodeCounters>,
}

impl MessageCounter {
    pub fn new(n: usize) -> Self {
        Self {
            nodes: vec![NodeCounters::default(); n],
        }
    }

    pub fn add(&mut self, delta: &MessageCounter) {
        for (a, b) in self.nodes.iter_mut().zip(&delta.nodes) {
            a.add(b);
        }
    }

    pub fn total(&self) -> NodeCounters {
        let mut t = NodeCounters::default();
        for n in &self.nodes {
            t.add(n);
        }
        t
    }
}

/// Per-node state carried between ticks.
#[derive(Debug, Clone)]
pub struct NodeRuntime {
    pub filter: NodeFilter,
    /// Information view of `filter.estimate`.
    pub info: InfoPair,
}

/// One node's observation at a tick. Poses may move (replayed logs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub z: Measurement,
    pub pose: SensorPose,
}

/// Fixed per-run context of [`step_network`].
#[derive(Debug, Clone)]
pub struct NetworkContext {
    pub spec: VariantSpec,
    pub graph: Graph,
    /// Diffusion weights `C` or consensus weights, per `spec.fusion`.
    pub weights: WeightMatrix,
    pub consensus_rounds: usize,
    pub dynamics: CoordinatedTurn,
    pub q: StateCov,
    pub r_per_sensor: Vec<MeasCov>,
}

impl NetworkContext {
    pub fn new(cfg: &PipelineConfig, spec: VariantSpec) -> Self {
        let weights = match spec.fusion {
            FusionKind::Consensus => metropolis_weights(&cfg.graph),
            FusionKind::DiffusionConvex | FusionKind::DiffusionCi => diffusion_weights(&cfg.graph),
        };
        Self {
            spec,
            graph: cfg.graph.clone(),
            weights,
            consensus_rounds: cfg.filter.consensus_rounds,
            dynamics: CoordinatedTurn::new(cfg.scenario.dt),
            q: cfg.scenario.noise.q,
            r_per_sensor: cfg.scenario.noise.r_per_sensor.clone(),
        }
    }
}

/// All nodes start from `(E{x0}, P0)`; node `i` gets compensation stream `i`.
pub fn init_network(cfg: &PipelineConfig, spec: &VariantSpec) -> Result<Vec<NodeRuntime>, PipelineError> {
    cfg.validate()?;
    let start = EstimatePair::new(cfg.scenario.initial_state, cfg.scenario.initial_cov);
    let info = crate::estimator::to_info(&start).map_err(|e| PipelineError::Config(e.to_string()))?;
    Ok((0..cfg.graph.n_nodes())
        .map(|i| {
            let mut filter = NodeFilter::new(
                start,
                spec.local,
                spec.event_triggered.then_some(cfg.filter.delta),
                cfg.filter.scaling,
                cfg.filter.compensation,
                stream_rng(cfg.scenario.seed, Stream::Compensation(i)),
            );
            if let Some(ts) = filter.trigger.as_mut() {
                ts.normalization = cfg.filter.trigger_normalization;
            }
            NodeRuntime { filter, info }
        })
        .collect())
}

/// Result of one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub fused: Vec<FusedEstimate>,
    pub gamma: Vec<bool>,
    pub counters: MessageCounter,
}

/// Advance every node by one tick. Node states are overwritten with the
/// fused estimates.
pub fn step_network(
    nodes: &mut [NodeRuntime],
    obs: &[Option<Observation>],
    ctx: &NetworkContext,
    k: usize,
) -> Result<TickOutput, PipelineError> {
    let n = nodes.len();
    assert_eq!(obs.len(), n, "one observation slot per node");
    let mut counters = MessageCounter::new(n);

    // Local phase.
    let mut locals = Vec::with_capacity(n);
    for (i, node) in nodes.iter_mut().enumerate() {
        let ferr = |source| PipelineError::Filter { k, node: i, source };
        let prior = node.filter.predict(&ctx.dynamics, &ctx.q).map_err(ferr)?;
        let (z, pose) = match &obs[i] {
            Some(o) => (Some(&o.z), o.pose),
            None => (None, SensorPose::new(0.0, 0.0, 0.0)),
        };
        let sensor = RangeBearingSensor::new(pose);
        let local = node
            .filter
            .local_update(&prior, z, &sensor, &ctx.r_per_sensor[i], k)
            .map_err(ferr)?;
        if local.gamma {
            counters.nodes[i].sensor_link += 1;
        }
        locals.push(local);
    }
    let gamma = locals.iter().map(|l| l.gamma).collect();

    let fused = match ctx.spec.fusion {
        FusionKind::Consensus => {
            let posts: Vec<InfoPair> = locals
                .iter()
                .map(|l| InfoPair {
                    yhat: l.prior_info.yhat + l.contribution.i_vec,
                    y: l.prior_info.y + l.contribution.i_mat,
                })
                .collect();
            let cfg = ConsensusConfig {
                rounds: ctx.consensus_rounds,
                weights: ctx.weights.clone(),
            };
            let out = consensus_fuse(&posts, &cfg).map_err(|source| PipelineError::Fusion {
                k,
                node: 0,
                source,
            })?;
            for i in 0..n {
                let msgs = (ctx.consensus_rounds * ctx.graph.degree(i)) as u64;
                counters.nodes[i].consensus = StageVolume::messages(msgs);
            }
            out.into_iter()
                .enumerate()
                .map(|(i, q)| {
                    FusedEstimate::from_info(q).map_err(|source| PipelineError::Fusion { k, node: i, source })
                })
                .collect::<Result<Vec<_>, _>>()?
        }
        FusionKind::DiffusionConvex | FusionKind::DiffusionCi => {
            let adapted = (0..n)
                .map(|i| {
                    let nbrs: Vec<InfoContribution> = ctx
                        .graph
                        .neighbors(i)
                        .into_iter()
                        .map(|j| locals[j].contribution)
                        .collect();
                    counters.nodes[i].adaptation = StageVolume::messages(nbrs.len() as u64);
                    diffuse_adapt(&locals[i].prior_info, &locals[i].contribution, &nbrs)
                        .map_err(|source| PipelineError::Fusion { k, node: i, source })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let moments = if ctx.spec.fusion == FusionKind::DiffusionConvex {
                Some(
                    adapted
                        .iter()
                        .enumerate()
                        .map(|(i, q)| {
                            crate::estimator::from_info(q).map_err(|source| PipelineError::Fusion {
                                k,
                                node: i,
                                source: source.into(),
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?,
                )
            } else {
                None
            };
            (0..n)
                .map(|i| {
                    let row = ctx.weights.row(i);
                    let support: Vec<usize> = (0..n).filter(|&j| j == i || row[j] != 0.0).collect();
                    let w: Vec<f64> = support.iter().map(|&j| row[j]).collect();
                    counters.nodes[i].combination = StageVolume::messages(ctx.graph.degree(i) as u64);
                    let res = match &moments {
                        Some(m) => {
                            let pairs: Vec<EstimatePair> = support.iter().map(|&j| m[j]).collect();
                            diffuse_combine_convex(&pairs, &w)
                        }
                        None => {
                            let infos: Vec<InfoPair> = support.iter().map(|&j| adapted[j]).collect();
                            ci_combine_info(&infos, &w)
                        }
                    };
                    res.map_err(|source| PipelineError::Fusion { k, node: i, source })
                })
                .collect::<Result<Vec<_>, _>>()?
        }
    };

    for (node, f) in nodes.iter_mut().zip(&fused) {
        node.filter.estimate = f.estimate();
        node.info = f.info();
    }
    Ok(TickOutput {
        fused,
        gamma,
        counters,
    })
}

/// Truth plus per-tick observations for every node.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationLog {
    /// `T + 1` truth states.
    pub truth: Vec<StateVec>,
    /// `ticks[k - 1][i]`.
    pub ticks: Vec<Vec<Option<Observation>>>,
}

impl ObservationLog {
    pub fn from_truth(gt: &GroundTruth, sensors: &[SensorPose]) -> Self {
        let horizon = gt.states.len().saturating_sub(1);
        let ticks = (0..horizon)
            .map(|k| {
                sensors
                    .iter()
                    .enumerate()
                    .map(|(i, &pose)| {
                        Some(Observation {
                            z: gt.measurements[i][k],
                            pose,
                        })
                    })
                    .collect()
            })
            .collect();
        Self {
            truth: gt.states.clone(),
            ticks,
        }
    }

    pub fn horizon(&self) -> usize {
        self.ticks.len()
    }
}

/// Everything recorded for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub variant: String,
    pub seed: u64,
    pub n_nodes: usize,
    /// `T + 1` truth states.
    pub truth: Vec<StateVec>,
    /// `estimates[k - 1][i]`, fused estimate of node `i` after tick `k`.
    pub estimates: Vec<Vec<EstimatePair>>,
    /// `gamma[k - 1][i]`.
    pub gamma: Vec<Vec<bool>>,
    /// Cumulative counters after each tick.
    pub counters: Vec<MessageCounter>,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn horizon(&self) -> usize {
        self.estimates.len()
    }

    pub fn final_counters(&self) -> MessageCounter {
        self.counters
            .last()
            .cloned()
            .unwrap_or_else(|| MessageCounter::new(self.n_nodes))
    }
}

/// Simulate truth from `cfg.scenario` and run `variant` on it.
pub fn run(cfg: &PipelineConfig, variant: AlgoVariant) -> Result<RunRecord, PipelineError> {
    let spec = variant.spec(cfg.filter.ukf);
    run_spec(cfg, &spec, variant.label())
}

/// [`run`] for an arbitrary component combination.
pub fn run_spec(cfg: &PipelineConfig, spec: &VariantSpec, label: &str) -> Result<RunRecord, PipelineError> {
    cfg.validate()?;
    let gt = generate_truth(&cfg.scenario)?;
    let log = ObservationLog::from_truth(&gt, &cfg.scenario.sensors);
    run_log(cfg, spec, label, &log)
}

/// Run on a prepared observation log (simulated or replayed).
pub fn run_log(
    cfg: &PipelineConfig,
    spec: &VariantSpec,
    label: &str,
    log: &ObservationLog,
) -> Result<RunRecord, PipelineError> {
    let started = Instant::now();
    let mut nodes = init_network(cfg, spec)?;
    let ctx = NetworkContext::new(cfg, *spec);
    let n = nodes.len();
    let horizon = log.horizon();
    let mut estimates = Vec::with_capacity(horizon);
    let mut gamma = Vec::with_capacity(horizon);
    let mut counters = Vec::with_capacity(horizon);
    let mut total = MessageCounter::new(n);
    for (k0, obs) in log.ticks.iter().enumerate() {
        let out = step_network(&mut nodes, obs, &ctx, k0 + 1)?;
        total.add(&out.counters);
        estimates.push(out.fused.iter().map(|f| f.estimate()).collect());
        gamma.push(out.gamma);
        counters.push(total.clone());
    }
    Ok(RunRecord {
        variant: label.to_string(),
        seed: cfg.scenario.seed,
        n_nodes: n,
        truth: log.truth.clone(),
        estimates,
        gamma,
        counters,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in AlgoVariant::ALL {
            assert_eq!(v.label().parse::<AlgoVariant>().unwrap(), v);
            assert_eq!(v.label().to_lowercase().replace('-', "_").parse::<AlgoVariant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.label()));
        }
        assert!("EDC".parse::<AlgoVariant>().is_err());
    }

    #[test]
    fn variant_components() {
        let u = UkfParams::default();
        assert_eq!(AlgoVariant::EdcCif.spec(u).fusion, FusionKind::DiffusionCi);
        assert!(AlgoVariant::EdcCif.spec(u).event_triggered);
        assert!(!AlgoVariant::DcCif.spec(u).event_triggered);
        assert_eq!(AlgoVariant::EcEkf.spec(u).local, LocalFilterKind::Ekf);
        assert_eq!(AlgoVariant::CCkf.spec(u).fusion, FusionKind::Consensus);
        assert_eq!(AlgoVariant::EdCif.spec(u).fusion, FusionKind::DiffusionConvex);
    }

    #[test]
    fn zero_horizon_gives_empty_record() {
        let mut cfg = PipelineConfig::default_tracking();
        cfg.scenario.horizon = 0;
        let rec = run(&cfg, AlgoVariant::EdcCif).unwrap();
        assert_eq!(rec.horizon(), 0);
        assert_eq!(rec.truth.len(), 1);
    }

    #[test]
    fn rerun_is_identical() {
        let mut cfg = PipelineConfig::default_tracking();
        cfg.scenario.horizon = 30;
        let a = run(&cfg, AlgoVariant::EdcCif).unwrap();
        let b = run(&cfg, AlgoVariant::EdcCif).unwrap();
        assert_eq!(a.estimates, b.estimates);
        assert_eq!(a.gamma, b.gamma);
        assert_eq!(a.counters, b.counters);
    }

    #[test]
    fn graph_size_must_match_sensors() {
        let mut cfg = PipelineConfig::default_tracking();
        cfg.graph = Graph::ring(5).unwrap();
        assert!(matches!(run(&cfg, AlgoVariant::DCif), Err(PipelineError::Config(_))));
    }
}
