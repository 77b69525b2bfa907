use std::path::PathBuf;

use swarmtrack::metrics::summarize;
use swarmtrack::pipeline::{run_log, AlgoVariant, PipelineConfig};
use swarmtrack::replay::{ingest, ReplayBundle};
use swarmtrack::trajio::{
    align_and_resample, parse_tum_str, remove_outliers, serialize_tum, to_measurements, OutlierConfig,
    TumTrajectory,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn load(name: &str) -> TumTrajectory {
    parse_tum_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

const NAMES: [&str; 3] = ["target.tum", "observer_a.tum", "observer_b.tum"];

#[test]
fn fixtures_parse_and_clean() {
    let raw: Vec<_> = NAMES.iter().map(|n| load(n)).collect();
    assert_eq!(raw[0].len(), 601);
    let cfg = OutlierConfig::default();
    let clean: Vec<_> = raw.iter().map(|t| remove_outliers(t, &cfg).unwrap()).collect();
    // The origin fix of the target is dropped.
    assert_eq!(clean[0].len(), 600);
    assert_eq!(clean[1].len(), raw[1].len());
    // The gap splits observer B; the earlier, longer segment survives.
    assert!(clean[2].len() < raw[2].len());
    assert!(clean[2].end().unwrap() <= 117.0 + 1e-9);
}

#[test]
fn resampled_grid_is_lossless_at_shared_stamps() {
    let cfg = OutlierConfig::default();
    let raw: Vec<_> = NAMES.iter().map(|n| load(n)).collect();
    let clean: Vec<_> = raw.iter().map(|t| remove_outliers(t, &cfg).unwrap()).collect();
    let aligned = align_and_resample(&clean, 10.0).unwrap();
    let len = aligned[0].len();
    assert!(aligned.iter().all(|t| t.len() == len));
    for (orig, res) in clean.iter().zip(&aligned) {
        let back = parse_tum_str(&serialize_tum(res)).unwrap();
        assert_eq!(&back, res);
        let mut shared = 0;
        for row in &res.rows {
            if let Some(o) = orig.rows.iter().find(|o| (o.t - row.t).abs() < 1e-9) {
                shared += 1;
                for c in 0..3 {
                    assert!((o.p[c] - row.p[c]).abs() <= 1e-9, "t={} p{c}", row.t);
                }
                for c in 0..4 {
                    assert!((o.q[c] - row.q[c]).abs() <= 1e-9, "t={} q{c}", row.t);
                }
            }
        }
        assert!(shared > len / 2, "only {shared} of {len} stamps shared");
    }
}

#[test]
fn measurements_reconstruct_target_positions() {
    let cfg = OutlierConfig::default();
    let clean: Vec<_> = NAMES.iter().map(|n| remove_outliers(&load(n), &cfg).unwrap()).collect();
    let aligned = align_and_resample(&clean, 10.0).unwrap();
    let log = to_measurements(&aligned[0], &aligned[1..]).unwrap();
    assert_eq!(log.skipped, 0);
    for (o, obs) in log.per_observer.iter().enumerate() {
        for (s, z) in obs.iter().enumerate() {
            let pose = aligned[o + 1].rows[s].p;
            let z = z.expect("no coincident samples in fixtures");
            let p = swarmtrack::scenario::position_from_measurement(
                &z,
                &swarmtrack::scenario::SensorPose::new(pose[0], pose[1], pose[2]),
            );
            for c in 0..3 {
                assert!((p[c] - aligned[0].rows[s].p[c]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn replay_bundle_round_trip_and_tracking() {
    let dir = tempfile::tempdir().unwrap();
    let observers = vec![fixture("observer_a.tum"), fixture("observer_b.tum")];
    let bundle = ingest(&fixture("target.tum"), &observers, 10.0, OutlierConfig::default()).unwrap();
    bundle.write(dir.path()).unwrap();
    let back = ReplayBundle::read(dir.path()).unwrap();
    assert_eq!(back, bundle);

    let cfg = bundle.configure(&PipelineConfig::default_tracking()).unwrap();
    assert_eq!(cfg.graph.n_nodes(), 2);
    assert!((cfg.scenario.dt - 0.1).abs() < 1e-12);
    let variant = AlgoVariant::EdcCif;
    let spec = variant.spec(cfg.filter.ukf);
    let noisy = bundle.observation_log(Some((&cfg.scenario.noise.r_per_sensor, 7)));
    let runs: Vec<_> = [bundle.observation_log(None), noisy]
        .iter()
        .map(|log| run_log(&cfg, &spec, variant.label(), log).unwrap())
        .collect();
    let m = summarize(&runs).unwrap();
    assert!(m.mean_rmse_pos.is_finite() && m.mean_rmse_pos < 1.0, "{}", m.mean_rmse_pos);
}
