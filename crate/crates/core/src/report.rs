//! Output files: per-run CSV, RMSE series, trigger raster, summary JSON.
//!
//! Run CSV columns, one row per tick per node (`k >= 1`):
//!
//! ```text
//! k, node,
//! x, y, z, vx, vy, vz, omega,                 fused estimate
//! true_x, ..., true_omega,                    truth at k
//! gamma,                                      1 if the node's sensor transmitted
//! sensor_link,                                cumulative counters received by
//! adaptation_vector, adaptation_matrix,       the node, in scalars
//! combination_vector, combination_matrix,
//! consensus_vector, consensus_matrix,
//! nees,                                       e^T P^-1 e (empty if P singular)
//! p00, p01, ..., p66                          upper triangle of P, row-major
//! ```
//!
//! Floats are written in shortest round-trip form, so [`read_run_csv`]
//! recovers estimates, truth, flags and counters exactly. The initial truth
//! state is not part of the file and reads back as NaN.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::estimator::EstimatePair;
use crate::linalg::{StateCov, StateVec, STATE_DIM};
use crate::metrics::{nees, RmseSeries, RunMetrics};
use crate::pipeline::{MessageCounter, NodeCounters, RunRecord, StageVolume};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ReportError + '_ {
    move |source| ReportError::Csv {
        path: path.display().to_string(),
        source,
    }
}

const STATE_NAMES: [&str; STATE_DIM] = ["x", "y", "z", "vx", "vy", "vz", "omega"];
const COUNTER_NAMES: [&str; 7] = [
    "sensor_link",
    "adaptation_vector",
    "adaptation_matrix",
    "combination_vector",
    "combination_matrix",
    "consensus_vector",
    "consensus_matrix",
];

fn run_header() -> Vec<String> {
    let mut h = vec!["k".to_string(), "node".to_string()];
    h.extend(STATE_NAMES.iter().map(|s| s.to_string()));
    h.extend(STATE_NAMES.iter().map(|s| format!("true_{s}")));
    h.push("gamma".into());
    h.extend(COUNTER_NAMES.iter().map(|s| s.to_string()));
    h.push("nees".into());
    for i in 0..STATE_DIM {
        for j in i..STATE_DIM {
            h.push(format!("p{i}{j}"));
        }
    }
    h
}

fn counters_fields(c: &NodeCounters) -> [u64; 7] {
    [
        c.sensor_link,
        c.adaptation.vector,
        c.adaptation.matrix,
        c.combination.vector,
        c.combination.matrix,
        c.consensus.vector,
        c.consensus.matrix,
    ]
}

pub fn write_run_csv(path: &Path, rec: &RunRecord) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(run_header()).map_err(csv_err(path))?;
    for (k0, row) in rec.estimates.iter().enumerate() {
        let truth = &rec.truth[k0 + 1];
        for (i, est) in row.iter().enumerate() {
            let mut f: Vec<String> = vec![(k0 + 1).to_string(), i.to_string()];
            f.extend(est.xhat.iter().map(|v| v.to_string()));
            f.extend(truth.iter().map(|v| v.to_string()));
            f.push(u8::from(rec.gamma[k0][i]).to_string());
            f.extend(counters_fields(&rec.counters[k0].nodes[i]).iter().map(|v| v.to_string()));
            f.push(nees(&est.xhat, &est.p, truth).map_or(String::new(), |v| v.to_string()));
            for a in 0..STATE_DIM {
                for b in a..STATE_DIM {
                    f.push(est.p[(a, b)].to_string());
                }
            }
            w.write_record(&f).map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Read a run CSV back; `variant` and `seed` are not stored in the file.
pub fn read_run_csv(path: &Path) -> Result<RunRecord, ReportError> {
    let fmt = |msg: String| ReportError::Format {
        path: path.display().to_string(),
        msg,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r.headers().map_err(csv_err(path))?.iter().map(String::from).collect();
    if header != run_header() {
        return Err(fmt("unexpected header".into()));
    }
    let mut rows: Vec<(usize, usize, EstimatePair, StateVec, bool, NodeCounters)> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let num = |i: usize| -> Result<f64, ReportError> {
            rec[i].parse::<f64>().map_err(|_| fmt(format!("row {}: bad number {:?}", line + 2, &rec[i])))
        };
        let int = |i: usize| -> Result<u64, ReportError> {
            rec[i].parse::<u64>().map_err(|_| fmt(format!("row {}: bad integer {:?}", line + 2, &rec[i])))
        };
        let k = int(0)? as usize;
        let node = int(1)? as usize;
        let mut xhat = StateVec::zeros();
        let mut truth = StateVec::zeros();
        for c in 0..STATE_DIM {
            xhat[c] = num(2 + c)?;
            truth[c] = num(9 + c)?;
        }
        let gamma = int(16)? == 1;
        let cv: Vec<u64> = (17..24).map(int).collect::<Result<_, _>>()?;
        let counters = NodeCounters {
            sensor_link: cv[0],
            adaptation: StageVolume { vector: cv[1], matrix: cv[2] },
            combination: StageVolume { vector: cv[3], matrix: cv[4] },
            consensus: StageVolume { vector: cv[5], matrix: cv[6] },
        };
        let mut p = StateCov::zeros();
        let mut col = 25;
        for a in 0..STATE_DIM {
            for b in a..STATE_DIM {
                p[(a, b)] = num(col)?;
                p[(b, a)] = p[(a, b)];
                col += 1;
            }
        }
        rows.push((k, node, EstimatePair { xhat, p }, truth, gamma, counters));
    }
    let horizon = rows.iter().map(|r| r.0).max().unwrap_or(0);
    let n_nodes = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    if rows.len() != horizon * n_nodes {
        return Err(fmt(format!("expected {horizon} x {n_nodes} rows, found {}", rows.len())));
    }
    let nan = StateVec::from_element(f64::NAN);
    let mut truth = vec![nan; horizon + 1];
    let blank = EstimatePair { xhat: nan, p: StateCov::from_element(f64::NAN) };
    let mut estimates = vec![vec![blank; n_nodes]; horizon];
    let mut gamma = vec![vec![false; n_nodes]; horizon];
    let mut counters = vec![MessageCounter::new(n_nodes); horizon];
    for (k, node, est, t, g, c) in rows {
        if k == 0 {
            return Err(fmt("tick 0 is not a valid row".into()));
        }
        truth[k] = t;
        estimates[k - 1][node] = est;
        gamma[k - 1][node] = g;
        counters[k - 1].nodes[node] = c;
    }
    Ok(RunRecord {
        variant: String::new(),
        seed: 0,
        n_nodes,
        truth,
        estimates,
        gamma,
        counters,
        wall_time_s: 0.0,
    })
}

/// `k, rmse_pos, rmse_vel, rmse_x, ..., rmse_omega`.
pub fn write_rmse_csv(path: &Path, s: &RmseSeries) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut h = vec!["k".to_string(), "rmse_pos".into(), "rmse_vel".into()];
    h.extend(STATE_NAMES.iter().map(|n| format!("rmse_{n}")));
    w.write_record(&h).map_err(csv_err(path))?;
    for k in 0..s.pos.len() {
        let mut f = vec![(k + 1).to_string(), s.pos[k].to_string(), s.vel[k].to_string()];
        f.extend(s.per_variable[k].iter().map(|v| v.to_string()));
        w.write_record(&f).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Trigger instants of one run: `k, node_0, ..., node_{N-1}` with 0/1 entries.
pub fn write_trigger_raster(path: &Path, rec: &RunRecord) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut h = vec!["k".to_string()];
    h.extend((0..rec.n_nodes).map(|i| format!("node_{i}")));
    w.write_record(&h).map_err(csv_err(path))?;
    for (k0, row) in rec.gamma.iter().enumerate() {
        let mut f = vec![(k0 + 1).to_string()];
        f.extend(row.iter().map(|&g| u8::from(g).to_string()));
        w.write_record(&f).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// A run that failed, with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub seed: u64,
    pub error: String,
    pub min_eigenvalue: Option<f64>,
}

/// Deterministic summary of an ensemble (no timings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub variant: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    /// Average trigger rate in percent.
    pub trigger_rate_percent: f64,
    pub metrics: Option<RunMetrics>,
    pub failures: Vec<RunFailure>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n").map_err(io_err(path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::summarize;
    use crate::pipeline::{run, AlgoVariant, PipelineConfig};

    #[test]
    fn run_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = PipelineConfig::default_tracking();
        cfg.scenario.horizon = 25;
        let rec = run(&cfg, AlgoVariant::EdcCif).unwrap();
        let path = dir.path().join("run.csv");
        write_run_csv(&path, &rec).unwrap();
        let back = read_run_csv(&path).unwrap();
        assert_eq!(back.estimates, rec.estimates);
        assert_eq!(back.gamma, rec.gamma);
        assert_eq!(back.counters, rec.counters);
        assert_eq!(&back.truth[1..], &rec.truth[1..]);
        assert_eq!(summarize(&[back]).unwrap(), summarize(&[rec]).unwrap());
    }

    #[test]
    fn header_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_run_csv(&path), Err(ReportError::Format { .. })));
    }
}
