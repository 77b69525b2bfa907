//! Replay bundles: cleaned, aligned recordings converted to measurements and
//! stored on disk for `simulate --replay`.
//!
//! Layout of a bundle directory:
//!
//! ```text
//! replay.json     index (BundleIndex)
//! truth.csv       s, t, x, y, z                        target position per sample
//! sensor_<i>.csv  s, t, xs, ys, zs, r, phi, rho, valid observer pose and measurement
//! ```
//!
//! Sample `0` initializes the filters; samples `1..` are ticks `k = 1..`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::linalg::{MeasCov, MeasVec, StateVec};
use crate::network::Graph;
use crate::pipeline::{Observation, ObservationLog, PipelineConfig};
use crate::report::ReportError;
use crate::scenario::{sample_gaussian, stream_rng, Measurement, SensorPose, Stream};
use crate::trajio::{
    align_and_resample, parse_tum, remove_outliers, to_measurements, OutlierConfig, TrajError,
};
use crate::linalg::{psd_sqrt, wrap_angle};

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("{path}: {source}")]
    Traj { path: String, source: TrajError },
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorEntry {
    pub source: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleIndex {
    pub rate_hz: f64,
    pub samples: usize,
    pub target_source: String,
    pub truth_file: String,
    pub sensors: Vec<SensorEntry>,
    pub skipped_coincident: usize,
    pub outliers: OutlierConfig,
}

/// One observer sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSample {
    pub t: f64,
    pub pose: SensorPose,
    pub z: Option<Measurement>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBundle {
    pub index: BundleIndex,
    /// `(t, position)` per sample.
    pub truth: Vec<(f64, [f64; 3])>,
    /// `sensors[i][s]`.
    pub sensors: Vec<Vec<SensorSample>>,
}

fn load_tum(path: &Path) -> Result<crate::trajio::TumTrajectory, ReplayError> {
    let wrap = |source| ReplayError::Traj {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(|e| wrap(TrajError::Io(e.to_string())))?;
    parse_tum(std::io::BufReader::new(file)).map_err(wrap)
}

/// Parse, clean, align and convert a target log and observer logs.
pub fn ingest(
    target: &Path,
    observers: &[PathBuf],
    rate_hz: f64,
    outliers: OutlierConfig,
) -> Result<ReplayBundle, ReplayError> {
    if observers.is_empty() {
        return Err(ReplayError::Invalid("at least one observer log is required".into()));
    }
    let mut cleaned = Vec::with_capacity(observers.len() + 1);
    for path in std::iter::once(target).chain(observers.iter().map(|p| p.as_path())) {
        let raw = load_tum(path)?;
        cleaned.push(remove_outliers(&raw, &outliers).map_err(|source| ReplayError::Traj {
            path: path.display().to_string(),
            source,
        })?);
    }
    let aligned = align_and_resample(&cleaned, rate_hz).map_err(|source| ReplayError::Traj {
        path: target.display().to_string(),
        source,
    })?;
    let (tgt, obs) = aligned.split_first().expect("target present");
    let log = to_measurements(tgt, obs).map_err(|source| ReplayError::Traj {
        path: target.display().to_string(),
        source,
    })?;
    let truth = tgt.rows.iter().map(|r| (r.t, r.p)).collect();
    let sensors = obs
        .iter()
        .zip(&log.per_observer)
        .map(|(o, zs)| {
            o.rows
                .iter()
                .zip(zs)
                .map(|(r, z)| SensorSample {
                    t: r.t,
                    pose: SensorPose::new(r.p[0], r.p[1], r.p[2]),
                    z: *z,
                })
                .collect()
        })
        .collect();
    Ok(ReplayBundle {
        index: BundleIndex {
            rate_hz,
            samples: tgt.len(),
            target_source: target.display().to_string(),
            truth_file: "truth.csv".into(),
            sensors: observers
                .iter()
                .enumerate()
                .map(|(i, p)| SensorEntry {
                    source: p.display().to_string(),
                    file: format!("sensor_{i}.csv"),
                })
                .collect(),
            skipped_coincident: log.skipped,
            outliers,
        },
        truth,
        sensors,
    })
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ReplayError + '_ {
    move |source| {
        ReplayError::Report(ReportError::Csv {
            path: path.display().to_string(),
            source,
        })
    }
}

impl ReplayBundle {
    pub fn write(&self, dir: &Path) -> Result<(), ReplayError> {
        std::fs::create_dir_all(dir).map_err(|source| ReportError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        crate::report::write_json(&dir.join("replay.json"), &self.index)?;
        let path = dir.join(&self.index.truth_file);
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(["s", "t", "x", "y", "z"]).map_err(csv_err(&path))?;
        for (s, (t, p)) in self.truth.iter().enumerate() {
            w.write_record([s.to_string(), t.to_string(), p[0].to_string(), p[1].to_string(), p[2].to_string()])
                .map_err(csv_err(&path))?;
        }
        w.flush().map_err(|e| csv_err(&path)(e.into()))?;
        for (entry, samples) in self.index.sensors.iter().zip(&self.sensors) {
            let path = dir.join(&entry.file);
            let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
            w.write_record(["s", "t", "xs", "ys", "zs", "r", "phi", "rho", "valid"])
                .map_err(csv_err(&path))?;
            for (s, smp) in samples.iter().enumerate() {
                let (z, valid) = match smp.z {
                    Some(z) => ([z.r, z.phi, z.rho].map(|v| v.to_string()), "1"),
                    None => (["".into(), "".into(), "".into()], "0"),
                };
                w.write_record([
                    s.to_string(),
                    smp.t.to_string(),
                    smp.pose.xs.to_string(),
                    smp.pose.ys.to_string(),
                    smp.pose.zs.to_string(),
                    z[0].clone(),
                    z[1].clone(),
                    z[2].clone(),
                    valid.to_string(),
                ])
                .map_err(csv_err(&path))?;
            }
            w.flush().map_err(|e| csv_err(&path)(e.into()))?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self, ReplayError> {
        let index_path = dir.join("replay.json");
        let text = std::fs::read_to_string(&index_path).map_err(|source| ReportError::Io {
            path: index_path.display().to_string(),
            source,
        })?;
        let index: BundleIndex = serde_json::from_str(&text).map_err(ReportError::from)?;
        let bad = |path: &Path, msg: &str| ReplayError::Invalid(format!("{}: {msg}", path.display()));

        let path = dir.join(&index.truth_file);
        let mut r = csv::Reader::from_path(&path).map_err(csv_err(&path))?;
        let mut truth = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err(&path))?;
            let v: Vec<f64> = rec
                .iter()
                .skip(1)
                .map(|f| f.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad(&path, "bad number"))?;
            if v.len() != 4 {
                return Err(bad(&path, "expected 5 columns"));
            }
            truth.push((v[0], [v[1], v[2], v[3]]));
        }
        let mut sensors = Vec::new();
        for entry in &index.sensors {
            let path = dir.join(&entry.file);
            let mut r = csv::Reader::from_path(&path).map_err(csv_err(&path))?;
            let mut samples = Vec::new();
            for rec in r.records() {
                let rec = rec.map_err(csv_err(&path))?;
                if rec.len() != 9 {
                    return Err(bad(&path, "expected 9 columns"));
                }
                let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(&path, "bad number"));
                let pose = SensorPose::new(num(2)?, num(3)?, num(4)?);
                let z = if &rec[8] == "1" {
                    Some(Measurement::new(num(5)?, num(6)?, num(7)?))
                } else {
                    None
                };
                samples.push(SensorSample { t: num(1)?, pose, z });
            }
            if samples.len() != truth.len() {
                return Err(bad(&path, "sample count differs from truth"));
            }
            sensors.push(samples);
        }
        if truth.len() != index.samples {
            return Err(bad(&dir.join(&index.truth_file), "sample count differs from index"));
        }
        Ok(Self { index, truth, sensors })
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.index.rate_hz
    }

    /// Truth states with velocities from finite differences (central inside,
    /// one-sided at the ends) and zero turn rate.
    pub fn truth_states(&self) -> Vec<StateVec> {
        let n = self.truth.len();
        (0..n)
            .map(|s| {
                let (a, b) = if n < 2 {
                    (s, s)
                } else if s == 0 {
                    (0, 1)
                } else if s == n - 1 {
                    (n - 2, n - 1)
                } else {
                    (s - 1, s + 1)
                };
                let dt = self.truth[b].0 - self.truth[a].0;
                let p = self.truth[s].1;
                let v = |c: usize| {
                    if dt > 0.0 {
                        (self.truth[b].1[c] - self.truth[a].1[c]) / dt
                    } else {
                        0.0
                    }
                };
                StateVec::from_column_slice(&[p[0], p[1], p[2], v(0), v(1), v(2), 0.0])
            })
            .collect()
    }

    /// Ticks `1..samples`. With `noise = Some((r_per_sensor, seed))` each
    /// recorded measurement is perturbed by `N(0, R_i)` from the seed's
    /// sensor streams; otherwise measurements are used as recorded.
    pub fn observation_log(&self, noise: Option<(&[MeasCov], u64)>) -> ObservationLog {
        let mut rngs: Vec<_> = (0..self.sensors.len())
            .map(|i| noise.map(|(_, seed)| stream_rng(seed, Stream::Sensor(i))))
            .collect();
        let roots: Vec<Option<MeasCov>> = (0..self.sensors.len())
            .map(|i| noise.map(|(r, _)| psd_sqrt(&r[i])))
            .collect();
        let ticks = (1..self.truth.len())
            .map(|s| {
                (0..self.sensors.len())
                    .map(|i| {
                        let smp = &self.sensors[i][s];
                        smp.z.map(|z| {
                            let z = match (&mut rngs[i], &roots[i]) {
                                (Some(rng), Some(root)) => {
                                    let v: MeasVec = z.to_vector() + sample_gaussian(rng, root);
                                    Measurement::new(v[0], v[1], wrap_angle(v[2]))
                                }
                                _ => z,
                            };
                            Observation { z, pose: smp.pose }
                        })
                    })
                    .collect()
            })
            .collect();
        ObservationLog {
            truth: self.truth_states(),
            ticks,
        }
    }

    /// Adapt `cfg` to the bundle: clock, horizon, sensor count, start state.
    /// The graph is kept when its size matches, otherwise replaced by a ring
    /// (a path for fewer than three sensors).
    pub fn configure(&self, cfg: &PipelineConfig) -> Result<PipelineConfig, ReplayError> {
        let n = self.sensors.len();
        let mut out = cfg.clone();
        out.scenario.dt = self.dt();
        out.scenario.horizon = self.truth.len().saturating_sub(1);
        out.scenario.sensors = self.sensors.iter().map(|s| s[0].pose).collect();
        let r0 = cfg.scenario.noise.r_per_sensor[0];
        out.scenario.noise.r_per_sensor.resize(n, r0);
        out.scenario.noise.r_per_sensor.truncate(n);
        if let Some(x0) = self.truth_states().first() {
            let mut x = *x0;
            x[6] = cfg.scenario.initial_state[6];
            out.scenario.initial_state = x;
        }
        if out.graph.n_nodes() != n {
            out.graph = if n >= 3 { Graph::ring(n) } else { Graph::path(n) }
                .map_err(|e| ReplayError::Invalid(e.to_string()))?;
        }
        Ok(out)
    }
}
