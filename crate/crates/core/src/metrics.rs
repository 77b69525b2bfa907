//! Monte-Carlo reductions: RMSE series, per-variable means, trigger rates,
//! message totals.
//!
//! Every RMSE uses the same order of reduction: root-mean-square over runs
//! for each node and step, then the mean over nodes, then (for scalar
//! summaries) the mean over steps `1..=T`.

use serde::{Deserialize, Serialize};

use crate::linalg::{StateVec, STATE_DIM};
use crate::pipeline::{NodeCounters, RunRecord};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("no runs to summarize")]
    Empty,
    #[error("runs disagree on {what}: {a} vs {b}")]
    Mismatch { what: &'static str, a: usize, b: usize },
}

/// Per-step RMSE series, index `k - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseSeries {
    pub pos: Vec<f64>,
    pub vel: Vec<f64>,
    /// Per state component.
    pub per_variable: Vec<[f64; STATE_DIM]>,
}

/// Scalar summary of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub runs: usize,
    pub horizon: usize,
    pub n_nodes: usize,
    /// Time means of the series.
    pub mean_rmse_pos: f64,
    pub mean_rmse_vel: f64,
    /// Time-mean RMSE per state component `[x, y, z, vx, vy, vz, omega]`.
    pub mean_rmse_per_variable: [f64; STATE_DIM],
    /// Average trigger rate (fraction).
    pub trigger_rate: f64,
    pub trigger_rate_per_node: Vec<f64>,
    /// Message totals summed over nodes, averaged over runs.
    pub messages: MessageTotals,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MessageTotals {
    pub sensor_link: f64,
    pub adaptation_vector: f64,
    pub adaptation_matrix: f64,
    pub combination_vector: f64,
    pub combination_matrix: f64,
    pub consensus_vector: f64,
    pub consensus_matrix: f64,
}

impl MessageTotals {
    pub fn estimator_vector(&self) -> f64 {
        self.adaptation_vector + self.combination_vector + self.consensus_vector
    }

    pub fn estimator_scalars(&self) -> f64 {
        self.estimator_vector() + self.adaptation_matrix + self.combination_matrix + self.consensus_matrix
    }
}

fn check_aligned(runs: &[RunRecord]) -> Result<(usize, usize), MetricsError> {
    let first = runs.first().ok_or(MetricsError::Empty)?;
    let (t, n) = (first.horizon(), first.n_nodes);
    for r in runs {
        if r.horizon() != t {
            return Err(MetricsError::Mismatch { what: "horizon", a: t, b: r.horizon() });
        }
        if r.n_nodes != n {
            return Err(MetricsError::Mismatch { what: "node count", a: n, b: r.n_nodes });
        }
    }
    Ok((t, n))
}

fn error(r: &RunRecord, k: usize, i: usize) -> StateVec {
    r.estimates[k][i].xhat - r.truth[k + 1]
}

/// Position / velocity / per-component RMSE at every step.
pub fn rmse_series(runs: &[RunRecord]) -> Result<RmseSeries, MetricsError> {
    let (t, n) = check_aligned(runs)?;
    let mc = runs.len() as f64;
    let mut out = RmseSeries {
        pos: Vec::with_capacity(t),
        vel: Vec::with_capacity(t),
        per_variable: Vec::with_capacity(t),
    };
    for k in 0..t {
        let (mut pos, mut vel) = (0.0, 0.0);
        let mut per = [0.0; STATE_DIM];
        for i in 0..n {
            let mut sq = [0.0; STATE_DIM];
            for r in runs {
                let e = error(r, k, i);
                for c in 0..STATE_DIM {
                    sq[c] += e[c] * e[c];
                }
            }
            pos += ((sq[0] + sq[1] + sq[2]) / mc).sqrt();
            vel += ((sq[3] + sq[4] + sq[5]) / mc).sqrt();
            for c in 0..STATE_DIM {
                per[c] += (sq[c] / mc).sqrt();
            }
        }
        out.pos.push(pos / n as f64);
        out.vel.push(vel / n as f64);
        out.per_variable.push(per.map(|v| v / n as f64));
    }
    Ok(out)
}

/// `(TR, TR_i)`: `TR_i = tr_i / T` averaged over runs, `TR` the node mean.
pub fn trigger_rate(runs: &[RunRecord]) -> Result<(f64, Vec<f64>), MetricsError> {
    let (t, n) = check_aligned(runs)?;
    if t == 0 {
        return Ok((0.0, vec![0.0; n]));
    }
    let mut per = vec![0.0; n];
    for r in runs {
        for row in &r.gamma {
            for (i, &g) in row.iter().enumerate() {
                if g {
                    per[i] += 1.0;
                }
            }
        }
    }
    let denom = (t * runs.len()) as f64;
    let per: Vec<f64> = per.into_iter().map(|c| c / denom).collect();
    Ok((per.iter().sum::<f64>() / n as f64, per))
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Full ensemble summary.
pub fn summarize(runs: &[RunRecord]) -> Result<RunMetrics, MetricsError> {
    let (t, n) = check_aligned(runs)?;
    let series = rmse_series(runs)?;
    let (tr, tr_i) = trigger_rate(runs)?;
    let mut per = [0.0; STATE_DIM];
    for c in 0..STATE_DIM {
        per[c] = mean(&series.per_variable.iter().map(|p| p[c]).collect::<Vec<_>>());
    }
    let mut msg = MessageTotals::default();
    for r in runs {
        let c: NodeCounters = r.final_counters().total();
        msg.sensor_link += c.sensor_link as f64;
        msg.adaptation_vector += c.adaptation.vector as f64;
        msg.adaptation_matrix += c.adaptation.matrix as f64;
        msg.combination_vector += c.combination.vector as f64;
        msg.combination_matrix += c.combination.matrix as f64;
        msg.consensus_vector += c.consensus.vector as f64;
        msg.consensus_matrix += c.consensus.matrix as f64;
    }
    let m = runs.len() as f64;
    let msg = MessageTotals {
        sensor_link: msg.sensor_link / m,
        adaptation_vector: msg.adaptation_vector / m,
        adaptation_matrix: msg.adaptation_matrix / m,
        combination_vector: msg.combination_vector / m,
        combination_matrix: msg.combination_matrix / m,
        consensus_vector: msg.consensus_vector / m,
        consensus_matrix: msg.consensus_matrix / m,
    };
    Ok(RunMetrics {
        runs: runs.len(),
        horizon: t,
        n_nodes: n,
        mean_rmse_pos: mean(&series.pos),
        mean_rmse_vel: mean(&series.vel),
        mean_rmse_per_variable: per,
        trigger_rate: tr,
        trigger_rate_per_node: tr_i,
        messages: msg,
    })
}

/// Normalized estimation error squared `e^T P^-1 e`; `None` if `P` is singular.
pub fn nees(xhat: &StateVec, p: &crate::linalg::StateCov, truth: &StateVec) -> Option<f64> {
    let e = xhat - truth;
    p.cholesky().map(|ch| e.dot(&ch.solve(&e)))
}
