//! Third-degree spherical-radial cubature rule and the plain CKF recursion.

use super::local::{sigma_measurement_moments, MeasurementMoments};
use super::{EstimatePair, FilterError, UpdateWorkspace};
use crate::linalg::{cholesky_lower, symmetrize, MeasCov, StateCov, StateVec, STATE_DIM};
use crate::scenario::{Dynamics, Measurement, MeasurementModel};

/// `2n` equally weighted points `x_hat ± sqrt(n) L e_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubatureSet {
    pub points: Vec<StateVec>,
    pub weight: f64,
}

impl CubatureSet {
    pub fn mean(&self) -> StateVec {
        self.points.iter().fold(StateVec::zeros(), |acc, p| acc + p) * self.weight
    }

    pub fn covariance(&self) -> StateCov {
        let m = self.mean();
        let scatter = self
            .points
            .iter()
            .fold(StateCov::zeros(), |acc, p| acc + (p - m) * (p - m).transpose());
        symmetrize(&(scatter * self.weight))
    }
}

pub fn cubature_points(p: &EstimatePair) -> Result<CubatureSet, FilterError> {
    let l = cholesky_lower(&p.p, "cubature square root")?;
    let scale = (STATE_DIM as f64).sqrt();
    let mut points = Vec::with_capacity(2 * STATE_DIM);
    for r in 0..STATE_DIM {
        points.push(p.xhat + l.column(r) * scale);
    }
    for r in 0..STATE_DIM {
        points.push(p.xhat - l.column(r) * scale);
    }
    Ok(CubatureSet {
        points,
        weight: 1.0 / (2 * STATE_DIM) as f64,
    })
}

/// Propagate the cubature points through `f`; prior covariance is the point
/// scatter plus `Q`.
pub fn ckf_predict<D: Dynamics + ?Sized>(
    p: &EstimatePair,
    dynamics: &D,
    q: &StateCov,
) -> Result<EstimatePair, FilterError> {
    let set = cubature_points(p)?;
    let propagated = CubatureSet {
        points: set.points.iter().map(|x| dynamics.propagate(x)).collect(),
        weight: set.weight,
    };
    Ok(EstimatePair::new(
        propagated.mean(),
        propagated.covariance() + q,
    ))
}

/// Predicted-measurement moments from cubature points of the prior.
pub fn ckf_measurement_moments<M: MeasurementModel + ?Sized>(
    prior: &EstimatePair,
    sensor: &M,
    r: &MeasCov,
) -> Result<MeasurementMoments, FilterError> {
    let set = cubature_points(prior)?;
    let w = vec![set.weight; set.points.len()];
    sigma_measurement_moments(&set.points, &w, &w, sensor, r)
}

/// Standard CKF measurement update.
pub fn ckf_update<M: MeasurementModel + ?Sized>(
    prior: &EstimatePair,
    z: &Measurement,
    sensor: &M,
    r: &MeasCov,
) -> Result<(EstimatePair, UpdateWorkspace), FilterError> {
    let moments = ckf_measurement_moments(prior, sensor, r)?;
    let prior_y = crate::linalg::spd_inverse(&prior.p, "prior covariance")?;
    let ws = UpdateWorkspace::new(&moments, &prior_y)?;
    let innovation = ws.innovation(&z.to_vector());
    let xhat = prior.xhat + ws.k * innovation;
    let p = prior.p - ws.k * ws.pzz * ws.k.transpose();
    Ok((EstimatePair::new(xhat, p), ws))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{LinearDynamics, LinearMeasurement, RangeBearingSensor, SensorPose};
    use crate::linalg::{MeasJacobian, MeasVec};

    fn random_spd(seed: u64) -> StateCov {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = StateCov::from_fn(|_, _| rng.random_range(-1.0..1.0));
        a * a.transpose() + StateCov::identity() * 0.5
    }

    #[test]
    fn identity_covariance_points() {
        let set = cubature_points(&EstimatePair::new(StateVec::zeros(), StateCov::identity())).unwrap();
        let s7 = 7f64.sqrt();
        for r in 0..7 {
            let mut e = StateVec::zeros();
            e[r] = s7;
            assert!((set.points[r] - e).norm() < 1e-15);
            assert!((set.points[r + 7] + e).norm() < 1e-15);
        }
    }

    #[test]
    fn diagonal_covariance_points() {
        let mut p = StateCov::identity();
        p[(0, 0)] = 4.0;
        let set = cubature_points(&EstimatePair::new(StateVec::zeros(), p)).unwrap();
        assert!((set.points[0][0] - 2.0 * 7f64.sqrt()).abs() < 1e-14);
        assert!((set.points[7][0] + 2.0 * 7f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn points_reproduce_moments() {
        for seed in 0..20 {
            let p = random_spd(seed);
            let x = StateVec::from_fn(|i, _| i as f64 - 3.0 + seed as f64);
            let set = cubature_points(&EstimatePair::new(x, p)).unwrap();
            assert!((set.mean() - x).abs().max() < 1e-10);
            assert!((set.covariance() - p).abs().max() < 1e-8);
        }
    }

    #[test]
    fn non_pd_covariance_is_error() {
        let mut p = StateCov::identity();
        p[(3, 3)] = -2.0;
        assert!(cubature_points(&EstimatePair::new(StateVec::zeros(), p)).is_err());
    }

    #[test]
    fn identity_dynamics_zero_noise_keeps_posterior() {
        let p = EstimatePair::new(StateVec::from_element(1.5), random_spd(3));
        let prior = ckf_predict(&p, &LinearDynamics { f: StateCov::identity() }, &StateCov::zeros()).unwrap();
        assert!((prior.xhat - p.xhat).abs().max() < 1e-12);
        assert!((prior.p - p.p).abs().max() < 1e-12);
    }

    #[test]
    fn linear_prediction_matches_kalman() {
        let dyn_ = LinearDynamics::constant_velocity(0.1);
        let q = StateCov::identity() * 0.01;
        for seed in 0..10 {
            let post = EstimatePair::new(StateVec::from_element(seed as f64), random_spd(seed));
            let prior = ckf_predict(&post, &dyn_, &q).unwrap();
            let x_kf = dyn_.f * post.xhat;
            let p_kf = dyn_.f * post.p * dyn_.f.transpose() + q;
            assert!((prior.xhat - x_kf).abs().max() < 1e-9);
            assert!((prior.p - p_kf).abs().max() < 1e-9);
        }
    }

    #[test]
    fn repeated_prediction_trace_nondecreasing() {
        let dyn_ = crate::scenario::CoordinatedTurn::new(0.1);
        let q = StateCov::identity() * 1e-4;
        let mut est = EstimatePair::new(
            StateVec::from_column_slice(&[10.0, 5.0, 1.0, 1.0, 0.5, 0.1, 0.2]),
            StateCov::identity() * 0.1,
        );
        let mut tr = est.p.trace();
        for _ in 0..50 {
            est = ckf_predict(&est, &dyn_, &q).unwrap();
            assert!(est.p.trace() >= tr - 1e-12);
            tr = est.p.trace();
        }
    }

    #[test]
    fn linear_update_matches_kalman() {
        let h = MeasJacobian::from_fn(|i, j| if j == i { 1.0 } else if j == i + 3 { 0.5 } else { 0.0 });
        let model = LinearMeasurement { h };
        let r = MeasCov::from_diagonal(&MeasVec::new(0.2, 0.3, 0.4));
        for seed in 0..10 {
            let prior = EstimatePair::new(StateVec::from_element(0.3 * seed as f64), random_spd(seed + 100));
            let z = Measurement::new(1.0, -2.0, 0.5);
            let (post, _) = ckf_update(&prior, &z, &model, &r).unwrap();
            let s = h * prior.p * h.transpose() + r;
            let k = prior.p * h.transpose() * s.try_inverse().unwrap();
            let x = prior.xhat + k * (z.to_vector() - h * prior.xhat);
            let p = (StateCov::identity() - k * h) * prior.p;
            assert!((post.xhat - x).abs().max() < 1e-9);
            assert!((post.p - p).abs().max() < 1e-9);
        }
    }

    #[test]
    fn zero_innovation_keeps_mean_and_shrinks_covariance() {
        let sensor = RangeBearingSensor::new(SensorPose::new(0.0, 0.0, 0.0));
        let r = MeasCov::from_diagonal(&MeasVec::new(0.09, 1e-4, 1e-4));
        let prior = EstimatePair::new(
            StateVec::from_column_slice(&[30.0, 40.0, 10.0, 1.0, 0.0, 0.0, 0.1]),
            StateCov::identity() * 0.5,
        );
        let moments = ckf_measurement_moments(&prior, &sensor, &r).unwrap();
        let z = Measurement::from_vector(&moments.zhat);
        let (post, _) = ckf_update(&prior, &z, &sensor, &r).unwrap();
        assert!((post.xhat - prior.xhat).abs().max() < 1e-12);
        assert!(post.p.trace() < prior.p.trace());
    }

    #[test]
    fn uninformative_measurement_leaves_prior() {
        let sensor = RangeBearingSensor::new(SensorPose::new(0.0, 0.0, 0.0));
        let r = MeasCov::from_diagonal(&MeasVec::new(0.09, 1e-4, 1e-4)) * 1e9;
        let prior = EstimatePair::new(
            StateVec::from_column_slice(&[30.0, 40.0, 10.0, 1.0, 0.0, 0.0, 0.1]),
            StateCov::identity() * 0.5,
        );
        let (post, _) = ckf_update(&prior, &Measurement::new(51.0, 0.2, 0.9), &sensor, &r).unwrap();
        assert!((post.xhat - prior.xhat).norm() <= 1e-6 * prior.xhat.norm());
        assert!((post.p - prior.p).norm() <= 1e-6 * prior.p.norm());
    }
}
