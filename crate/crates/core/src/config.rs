//! JSON experiment configuration.
//!
//! Every field is optional; missing fields take the default tracking
//! scenario's values. Matrices may be written as nested rows, a flat
//! row-major array, or `{"diag": [...]}`.
//!
//! ```json
//! {
//!   "dt": 0.1, "horizon": 200, "seed": 42,
//!   "initial_state": [15, 10, 3, 0, 2, 0.2, 0.4],
//!   "initial_cov": {"diag": [4, 4, 4, 1, 1, 1, 0.04]},
//!   "sensors": [[0, 0, 0], [20, 0, 0], [20, 20, 0], [0, 20, 0]],
//!   "noise": {"q": {"diag": [1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-8]},
//!             "r": {"diag": [0.01, 4e-4, 4e-4]}},
//!   "topology": "ring4",
//!   "filter": {"delta": 0.04, "sigma1": 5e-4, "sigma2": 5e-4},
//!   "fusion": {"consensus_L": 5}
//! }
//! ```

use std::path::Path;

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::estimator::{CompensationSpec, ScalingParams, UkfParams};
use crate::linalg::{MeasCov, StateVec};
use crate::network::{GraphError, TopologySpec};
use crate::pipeline::{FilterSettings, PipelineConfig};
use crate::scenario::{sensors_on_circle, NoiseSpec, ScenarioConfig, SensorPose};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{field}: {msg}")]
    Invalid { field: &'static str, msg: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn invalid(field: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        msg: msg.into(),
    }
}

/// Square matrix in one of the accepted layouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
    Diag { diag: Vec<f64> },
}

impl MatrixSpec {
    pub fn from_matrix<const N: usize>(m: &SMatrix<f64, N, N>) -> Self {
        MatrixSpec::Rows((0..N).map(|i| (0..N).map(|j| m[(i, j)]).collect()).collect())
    }

    pub fn to_matrix<const N: usize>(&self, field: &'static str) -> Result<SMatrix<f64, N, N>, ConfigError> {
        match self {
            MatrixSpec::Rows(rows) => {
                if rows.len() != N || rows.iter().any(|r| r.len() != N) {
                    return Err(invalid(field, format!("expected {N}x{N} rows")));
                }
                Ok(SMatrix::from_fn(|i, j| rows[i][j]))
            }
            MatrixSpec::Flat(v) => {
                if v.len() != N * N {
                    return Err(invalid(field, format!("expected {} entries, got {}", N * N, v.len())));
                }
                Ok(SMatrix::from_row_slice(v))
            }
            MatrixSpec::Diag { diag } => {
                if diag.len() != N {
                    return Err(invalid(field, format!("expected {N} diagonal entries")));
                }
                Ok(SMatrix::from_fn(|i, j| if i == j { diag[i] } else { 0.0 }))
            }
        }
    }
}

/// One `R` for every sensor, or one per sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RSpec {
    Shared(MatrixSpec),
    PerSensor(Vec<MatrixSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub q: MatrixSpec,
    pub r: RSpec,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompensationConfig {
    pub enabled: bool,
    /// Defaults to the sensor's `R`.
    pub sigma: Option<MatrixSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub delta: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub compensation: CompensationConfig,
    pub ukf: UkfParams,
    pub trigger_normalization: Option<MatrixSpec>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let f = FilterSettings::default();
        Self {
            delta: f.delta,
            sigma1: f.scaling.sigma1,
            sigma2: f.scaling.sigma2,
            compensation: CompensationConfig::default(),
            ukf: f.ukf,
            trigger_normalization: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    #[serde(rename = "consensus_L")]
    pub consensus_l: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            consensus_l: FilterSettings::default().consensus_rounds,
        }
    }
}

/// The JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dt: f64,
    pub horizon: usize,
    pub seed: u64,
    pub initial_state: Vec<f64>,
    pub initial_cov: MatrixSpec,
    pub sensors: Vec<[f64; 3]>,
    pub noise: NoiseConfig,
    pub topology: TopologySpec,
    pub filter: FilterConfig,
    pub fusion: FusionConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = ScenarioConfig::default_tracking();
        Self {
            dt: s.dt,
            horizon: s.horizon,
            seed: s.seed,
            initial_state: s.initial_state.iter().copied().collect(),
            initial_cov: MatrixSpec::from_matrix(&s.initial_cov),
            sensors: s.sensors.iter().map(|p| [p.xs, p.ys, p.zs]).collect(),
            noise: NoiseConfig {
                q: MatrixSpec::from_matrix(&s.noise.q),
                r: RSpec::Shared(MatrixSpec::from_matrix(&s.noise.r_per_sensor[0])),
            },
            topology: TopologySpec::default(),
            filter: FilterConfig::default(),
            fusion: FusionConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Replace the sensor set with `n` sensors on a circle around the default
    /// scenario's centre and use a ring topology.
    pub fn with_nodes(mut self, n: usize) -> Self {
        let r = match &self.noise.r {
            RSpec::Shared(m) => m.clone(),
            RSpec::PerSensor(v) => v[0].clone(),
        };
        self.sensors = sensors_on_circle(n, (10.0, 10.0), 10.0 * std::f64::consts::SQRT_2)
            .into_iter()
            .map(|p| [p.xs, p.ys, p.zs])
            .collect();
        self.noise.r = RSpec::Shared(r);
        self.topology = if n >= 3 {
            TopologySpec::Preset(format!("ring{n}"))
        } else {
            TopologySpec::Preset(format!("path{n}"))
        };
        self
    }

    pub fn to_pipeline(&self) -> Result<PipelineConfig, ConfigError> {
        if self.initial_state.len() != 7 {
            return Err(invalid("initial_state", "expected 7 entries"));
        }
        let n = self.sensors.len();
        let r_per_sensor: Vec<MeasCov> = match &self.noise.r {
            RSpec::Shared(m) => vec![m.to_matrix::<3>("noise.r")?; n],
            RSpec::PerSensor(v) => {
                if v.len() != n {
                    return Err(invalid("noise.r", format!("{} matrices for {n} sensors", v.len())));
                }
                v.iter().map(|m| m.to_matrix::<3>("noise.r")).collect::<Result<_, _>>()?
            }
        };
        for r in &r_per_sensor {
            if !(crate::linalg::min_eigenvalue(r) > 0.0) {
                return Err(invalid("noise.r", "must be positive definite"));
            }
        }
        let scenario = ScenarioConfig {
            dt: self.dt,
            horizon: self.horizon,
            initial_state: StateVec::from_column_slice(&self.initial_state),
            initial_cov: self.initial_cov.to_matrix::<7>("initial_cov")?,
            sensors: self.sensors.iter().map(|s| SensorPose::new(s[0], s[1], s[2])).collect(),
            noise: NoiseSpec {
                q: self.noise.q.to_matrix::<7>("noise.q")?,
                r_per_sensor,
            },
            seed: self.seed,
        };
        let scaling = ScalingParams::new(self.filter.sigma1, self.filter.sigma2)
            .map_err(|e| invalid("filter", e.to_string()))?;
        let filter = FilterSettings {
            delta: self.filter.delta,
            scaling,
            compensation: CompensationSpec {
                enabled: self.filter.compensation.enabled,
                sigma: self
                    .filter
                    .compensation
                    .sigma
                    .as_ref()
                    .map(|m| m.to_matrix::<3>("filter.compensation.sigma"))
                    .transpose()?,
            },
            ukf: self.filter.ukf,
            trigger_normalization: self
                .filter
                .trigger_normalization
                .as_ref()
                .map(|m| m.to_matrix::<3>("filter.trigger_normalization"))
                .transpose()?,
            consensus_rounds: self.fusion.consensus_l,
        };
        let graph = self.topology.build(n)?;
        let cfg = PipelineConfig {
            scenario,
            graph,
            filter,
        };
        cfg.validate().map_err(|e| invalid("config", e.to_string()))?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON of this configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::StateCov;
    use crate::pipeline::PipelineConfig;

    #[test]
    fn empty_document_is_default_scenario() {
        let cfg = ExperimentConfig::from_json("{}").unwrap().to_pipeline().unwrap();
        assert_eq!(cfg, PipelineConfig::default_tracking());
    }

    #[test]
    fn matrix_layouts_agree() {
        let rows = r#"{"initial_cov": [[2,0,0,0,0,0,0],[0,2,0,0,0,0,0],[0,0,2,0,0,0,0],[0,0,0,2,0,0,0],[0,0,0,0,2,0,0],[0,0,0,0,0,2,0],[0,0,0,0,0,0,2]]}"#;
        let diag = r#"{"initial_cov": {"diag": [2,2,2,2,2,2,2]}}"#;
        let flat: Vec<f64> = (0..49).map(|k| if k % 8 == 0 { 2.0 } else { 0.0 }).collect();
        let flat = format!(r#"{{"initial_cov": {}}}"#, serde_json::to_string(&flat).unwrap());
        let a = ExperimentConfig::from_json(rows).unwrap().to_pipeline().unwrap();
        let b = ExperimentConfig::from_json(diag).unwrap().to_pipeline().unwrap();
        let c = ExperimentConfig::from_json(&flat).unwrap().to_pipeline().unwrap();
        assert_eq!(a.scenario.initial_cov, StateCov::identity() * 2.0);
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn fields_are_read() {
        let text = r#"{"seed": 7, "topology": {"edges": [[0,1],[1,2],[2,3]]},
            "filter": {"delta": 0.1, "sigma1": 0.01, "compensation": {"enabled": true}},
            "fusion": {"consensus_L": 3}}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap().to_pipeline().unwrap();
        assert_eq!(cfg.scenario.seed, 7);
        assert_eq!(cfg.filter.delta, 0.1);
        assert_eq!(cfg.filter.scaling.sigma1, 0.01);
        assert!(cfg.filter.compensation.enabled);
        assert_eq!(cfg.filter.consensus_rounds, 3);
        assert!(!cfg.graph.is_adjacent(0, 3));
    }

    #[test]
    fn bad_documents_rejected() {
        for text in [
            r#"{"initial_state": [1, 2]}"#,
            r#"{"noise": {"q": {"diag": [1,1,1,1,1,1,1]}, "r": {"diag": [1, 1]}}}"#,
            r#"{"filter": {"sigma1": 0}}"#,
            r#"{"fusion": {"consensus_L": 0}}"#,
            r#"{"topology": "ring5"}"#,
            r#"{"sensors": []}"#,
            r#"{"initial_cov": {"diag": [1,1,1,1,1,1,0]}}"#,
        ] {
            let parsed = ExperimentConfig::from_json(text).and_then(|c| c.to_pipeline());
            assert!(parsed.is_err(), "{text}");
        }
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(ExperimentConfig::from_json("{").is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::default();
        assert_eq!(a.hash(), ExperimentConfig::default().hash());
        let mut b = a.clone();
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn node_override_builds_ring() {
        let cfg = ExperimentConfig::default().with_nodes(8).to_pipeline().unwrap();
        assert_eq!(cfg.graph.n_nodes(), 8);
        assert_eq!(cfg.scenario.sensors.len(), 8);
        assert!((0..8).all(|i| cfg.graph.degree(i) == 2));
    }
}
