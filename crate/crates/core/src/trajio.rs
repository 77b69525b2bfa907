//! Recorded trajectory ingestion: TUM text parsing, cleaning, clock
//! alignment, resampling, and conversion to range/pitch/azimuth
//! measurements for replay through the pipeline.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::scenario::{observe, Measurement, SensorPose};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrajError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("read failed: {0}")]
    Io(String),
    #[error("{0}")]
    Empty(String),
    #[error("trajectories do not overlap in time")]
    NoOverlap,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// One TUM row: timestamp (s), position (m), orientation `(qx, qy, qz, qw)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TumRow {
    pub t: f64,
    pub p: [f64; 3],
    pub q: [f64; 4],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TumTrajectory {
    pub rows: Vec<TumRow>,
}

impl TumTrajectory {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn start(&self) -> Option<f64> {
        self.rows.first().map(|r| r.t)
    }

    pub fn end(&self) -> Option<f64> {
        self.rows.last().map(|r| r.t)
    }

    /// Linear interpolation at `t` (clamped to the ends); the quaternion is
    /// interpolated componentwise and renormalized.
    pub fn sample(&self, t: f64) -> Option<TumRow> {
        let rows = &self.rows;
        let first = rows.first()?;
        let last = rows.last()?;
        if t <= first.t {
            return Some(TumRow { t, ..*first });
        }
        if t >= last.t {
            return Some(TumRow { t, ..*last });
        }
        let hi = rows.partition_point(|r| r.t <= t);
        let (a, b) = (&rows[hi - 1], &rows[hi]);
        if a.t == t {
            return Some(*a);
        }
        let s = (t - a.t) / (b.t - a.t);
        let lerp = |x: f64, y: f64| x + s * (y - x);
        let p = [lerp(a.p[0], b.p[0]), lerp(a.p[1], b.p[1]), lerp(a.p[2], b.p[2])];
        let mut q = [0.0; 4];
        for i in 0..4 {
            q[i] = lerp(a.q[i], b.q[i]);
        }
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            q.iter_mut().for_each(|v| *v /= norm);
        }
        Some(TumRow { t, p, q })
    }
}

/// Parse TUM text: eight whitespace-separated numbers per line, `#` comments
/// and blank lines skipped.
pub fn parse_tum<R: BufRead>(reader: R) -> Result<TumTrajectory, TrajError> {
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| TrajError::Io(e.to_string()))?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(TrajError::Parse {
                line: line_no,
                msg: format!("expected 8 fields, found {}", fields.len()),
            });
        }
        let mut v = [0.0; 8];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse::<f64>().map_err(|_| TrajError::Parse {
                line: line_no,
                msg: format!("not a number: {f:?}"),
            })?;
            if !slot.is_finite() {
                return Err(TrajError::Parse {
                    line: line_no,
                    msg: format!("non-finite value {f:?}"),
                });
            }
        }
        rows.push(TumRow {
            t: v[0],
            p: [v[1], v[2], v[3]],
            q: [v[4], v[5], v[6], v[7]],
        });
    }
    Ok(TumTrajectory { rows })
}

pub fn parse_tum_str(text: &str) -> Result<TumTrajectory, TrajError> {
    parse_tum(text.as_bytes())
}

/// TUM text; numbers use the shortest representation that parses back to
/// the same `f64`.
pub fn serialize_tum(traj: &TumTrajectory) -> String {
    let mut out = String::from("# timestamp tx ty tz qx qy qz qw\n");
    for r in &traj.rows {
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {}\n",
            r.t, r.p[0], r.p[1], r.p[2], r.q[0], r.q[1], r.q[2], r.q[3]
        ));
    }
    out
}

/// Cleaning thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierConfig {
    /// Largest accepted interval between consecutive samples (s).
    pub max_gap: f64,
    /// Positions closer than this to the origin are spurious zero fixes (m).
    pub origin_radius: f64,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        Self {
            max_gap: 0.5,
            origin_radius: 1e-3,
        }
    }
}

/// Drop zero fixes and non-increasing timestamps, split at gaps longer than
/// `max_gap`, and keep the longest contiguous segment (the earliest on ties).
pub fn remove_outliers(traj: &TumTrajectory, cfg: &OutlierConfig) -> Result<TumTrajectory, TrajError> {
    if traj.is_empty() {
        return Err(TrajError::Empty("trajectory is empty".into()));
    }
    let mut kept: Vec<TumRow> = Vec::with_capacity(traj.len());
    for r in &traj.rows {
        let dist = (r.p[0] * r.p[0] + r.p[1] * r.p[1] + r.p[2] * r.p[2]).sqrt();
        if dist < cfg.origin_radius {
            continue;
        }
        if kept.last().is_some_and(|prev| r.t <= prev.t) {
            continue;
        }
        kept.push(*r);
    }
    let mut best: &[TumRow] = &[];
    let mut start = 0;
    for i in 1..=kept.len() {
        if i == kept.len() || kept[i].t - kept[i - 1].t > cfg.max_gap {
            if i - start > best.len() {
                best = &kept[start..i];
            }
            start = i;
        }
    }
    if best.is_empty() {
        return Err(TrajError::Empty("every row was removed as an outlier".into()));
    }
    Ok(TumTrajectory { rows: best.to_vec() })
}

/// Resample every trajectory on the common clock
/// `start + j / rate` over `[max of starts, min of ends]`.
pub fn align_and_resample(trajs: &[TumTrajectory], rate_hz: f64) -> Result<Vec<TumTrajectory>, TrajError> {
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(TrajError::InvalidParameter(format!("rate must be positive, got {rate_hz}")));
    }
    if trajs.is_empty() || trajs.iter().any(|t| t.is_empty()) {
        return Err(TrajError::Empty("nothing to align".into()));
    }
    let start = trajs.iter().filter_map(|t| t.start()).fold(f64::NEG_INFINITY, f64::max);
    let end = trajs.iter().filter_map(|t| t.end()).fold(f64::INFINITY, f64::min);
    if end < start {
        return Err(TrajError::NoOverlap);
    }
    // the small slack keeps a sample that lands on `end` up to round-off
    let count = ((end - start) * rate_hz + 1e-9).floor() as usize + 1;
    let clock: Vec<f64> = (0..count).map(|j| start + j as f64 / rate_hz).collect();
    Ok(trajs
        .iter()
        .map(|t| TumTrajectory {
            rows: clock.iter().map(|&c| t.sample(c).expect("nonempty")).collect(),
        })
        .collect())
}

/// Measurements of the target from every observer, sample by sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementLog {
    /// `per_observer[i][s]`; `None` where target and observer coincide.
    pub per_observer: Vec<Vec<Option<Measurement>>>,
    /// Number of skipped coincident samples.
    pub skipped: usize,
}

/// Noise-free observation of the target from each observer on a shared
/// clock. Coincident samples are skipped and counted.
pub fn to_measurements(target: &TumTrajectory, observers: &[TumTrajectory]) -> Result<MeasurementLog, TrajError> {
    for o in observers {
        if o.len() != target.len() {
            return Err(TrajError::InvalidParameter(
                "observer and target must share one clock; align them first".into(),
            ));
        }
    }
    let mut skipped = 0;
    let per_observer = observers
        .iter()
        .map(|o| {
            target
                .rows
                .iter()
                .zip(&o.rows)
                .map(|(tr, or)| {
                    let x = crate::linalg::StateVec::from_column_slice(&[
                        tr.p[0], tr.p[1], tr.p[2], 0.0, 0.0, 0.0, 0.0,
                    ]);
                    let pose = SensorPose::new(or.p[0], or.p[1], or.p[2]);
                    match observe::<rand_chacha::ChaCha8Rng>(&x, &pose, None, &Default::default()) {
                        Ok(z) => Some(z),
                        Err(_) => {
                            skipped += 1;
                            None
                        }
                    }
                })
                .collect()
        })
        .collect();
    if skipped > 0 {
        log::warn!("skipped {skipped} coincident target/observer samples");
    }
    Ok(MeasurementLog { per_observer, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, x: f64, y: f64, z: f64) -> TumRow {
        TumRow {
            t,
            p: [x, y, z],
            q: [0.0, 0.0, 0.0, 1.0],
        }
    }

    #[test]
    fn parse_examples() {
        let t = parse_tum_str("0.0 1 2 3 0 0 0 1").unwrap();
        assert_eq!(t.rows, vec![row(0.0, 1.0, 2.0, 3.0)]);
        assert!(parse_tum_str("# comment").unwrap().is_empty());
        match parse_tum_str("# header\n0 1 2 3 0 0 0 1\n1 2 3 4 5 6 7\n") {
            Err(TrajError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_tum_str("0 1 2 x 0 0 0 1"), Err(TrajError::Parse { line: 1, .. })));
    }

    #[test]
    fn serialize_round_trip() {
        let t = TumTrajectory {
            rows: vec![
                TumRow { t: 0.1, p: [1.0 / 3.0, -2.5e-7, 1e10], q: [0.1, 0.2, 0.3, 0.9273618495495703] },
                row(0.2, 1.0, 2.0, 3.0),
            ],
        };
        assert_eq!(parse_tum_str(&serialize_tum(&t)).unwrap(), t);
    }

    #[test]
    fn clean_input_unchanged() {
        let t = TumTrajectory {
            rows: (0..5).map(|i| row(i as f64 * 0.1, 1.0, 1.0, i as f64)).collect(),
        };
        assert_eq!(remove_outliers(&t, &OutlierConfig::default()).unwrap(), t);
    }

    #[test]
    fn origin_fix_dropped() {
        let t = TumTrajectory {
            rows: vec![row(0.0, 1.0, 0.0, 0.0), row(0.1, 0.0, 0.0, 0.0), row(0.2, 1.0, 0.0, 0.0)],
        };
        let cfg = OutlierConfig {
            max_gap: 0.5,
            origin_radius: 0.01,
        };
        let c = remove_outliers(&t, &cfg).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.rows.iter().all(|r| r.p[0] == 1.0));
    }

    #[test]
    fn longest_segment_kept_after_gap() {
        // rows at 0, 1 | gap of 10 s | 11, 12, 13
        let t = TumTrajectory {
            rows: vec![
                row(0.0, 1.0, 0.0, 0.0),
                row(1.0, 1.0, 0.0, 0.0),
                row(11.0, 2.0, 0.0, 0.0),
                row(12.0, 2.0, 0.0, 0.0),
                row(13.0, 2.0, 0.0, 0.0),
            ],
        };
        let cfg = OutlierConfig {
            max_gap: 1.0,
            origin_radius: 1e-3,
        };
        let c = remove_outliers(&t, &cfg).unwrap();
        assert_eq!(c.rows.iter().map(|r| r.t).collect::<Vec<_>>(), vec![11.0, 12.0, 13.0]);
    }

    #[test]
    fn all_dropped_is_error() {
        let t = TumTrajectory {
            rows: vec![row(0.0, 0.0, 0.0, 0.0)],
        };
        assert!(remove_outliers(&t, &OutlierConfig::default()).is_err());
    }

    #[test]
    fn native_rate_resample_is_identity() {
        let t = TumTrajectory {
            rows: (0..20).map(|i| row(i as f64 * 0.1, (i as f64).sin(), 2.0, i as f64 * 0.3)).collect(),
        };
        let out = align_and_resample(std::slice::from_ref(&t), 10.0).unwrap();
        assert_eq!(out[0].len(), t.len());
        for (a, b) in out[0].rows.iter().zip(&t.rows) {
            assert!((a.t - b.t).abs() < 1e-9);
            for c in 0..3 {
                assert!((a.p[c] - b.p[c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn offset_window() {
        let a = TumTrajectory {
            rows: (0..=15).map(|i| row(i as f64 * 0.1, 1.0, 0.0, 0.0)).collect(),
        };
        let b = TumTrajectory {
            rows: (0..=15).map(|i| row(0.5 + i as f64 * 0.1, 1.0, 0.0, 0.0)).collect(),
        };
        let out = align_and_resample(&[a, b], 10.0).unwrap();
        assert_eq!(out[0].len(), 11);
        assert_eq!(out[1].len(), 11);
        let far = TumTrajectory {
            rows: vec![row(100.0, 1.0, 0.0, 0.0)],
        };
        assert_eq!(align_and_resample(&[out[0].clone(), far], 10.0), Err(TrajError::NoOverlap));
    }

    #[test]
    fn midpoint_interpolation_exact_on_linear_motion() {
        let t = TumTrajectory {
            rows: vec![row(0.0, 0.0, 1.0, 2.0), row(1.0, 2.0, 3.0, 4.0)],
        };
        let m = t.sample(0.5).unwrap();
        assert_eq!(m.p, [1.0, 2.0, 3.0]);
    }

    #[test]
    fn quaternion_renormalized() {
        let a = TumRow { t: 0.0, p: [1.0; 3], q: [1.0, 0.0, 0.0, 0.0] };
        let b = TumRow { t: 1.0, p: [1.0; 3], q: [0.0, 0.0, 0.0, 1.0] };
        let q = TumTrajectory { rows: vec![a, b] }.sample(0.5).unwrap().q;
        assert!((q.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measurement_examples() {
        let target = TumTrajectory {
            rows: vec![row(0.0, 3.0, 4.0, 0.0), row(0.1, 3.0, 4.0, 0.0)],
        };
        let obs = TumTrajectory {
            rows: vec![row(0.0, 0.0, 0.0, 0.0), row(0.1, 3.0, 4.0, 0.0)],
        };
        let log = to_measurements(&target, &[obs]).unwrap();
        let z = log.per_observer[0][0].unwrap();
        assert!((z.r - 5.0).abs() < 1e-12);
        assert!(log.per_observer[0][1].is_none());
        assert_eq!(log.skipped, 1);
    }

    #[test]
    fn matches_simulator_observation() {
        let target = TumTrajectory { rows: vec![row(0.0, 2.0, -1.0, 4.0)] };
        let obs = TumTrajectory { rows: vec![row(0.0, 0.5, 0.5, 1.0)] };
        let z = to_measurements(&target, &[obs]).unwrap().per_observer[0][0].unwrap();
        let x = crate::linalg::StateVec::from_column_slice(&[2.0, -1.0, 4.0, 0.0, 0.0, 0.0, 0.0]);
        let sim = observe::<rand_chacha::ChaCha8Rng>(&x, &SensorPose::new(0.5, 0.5, 1.0), None, &Default::default()).unwrap();
        assert_eq!(z, sim);
    }
}
