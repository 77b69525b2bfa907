//! Update for steps where the sensor did not transmit.
//!
//! The gain `M` minimizes the trace of the covariance upper bound
//!
//! ```text
//! Pbar = mu1 A P A^T + mu2 M R M^T + mu3 delta M M^T,   A = I - M G
//! ```
//!
//! which gives `M = mu1 P G^T S^-1` with
//! `S = mu1 G P G^T + mu2 R + mu3 delta I`. In information form the
//! non-triggered contribution is `Ibar = -Y (N^-1 + Y)^-1 Y` where
//! `N = Pbar - P`, so that `Y + Ibar = Pbar^-1`.

use serde::{Deserialize, Serialize};

use super::info::info_contribution;
use super::{EstimatePair, FilterError, InfoContribution, InfoPair, UpdateWorkspace};
use crate::linalg::{
    inverse, spd_inverse, symmetrize, MeasCov, MeasJacobian, MeasVec, StateCov, StateMeasMat,
};
use crate::scenario::Measurement;

/// Scaling parameters `sigma1, sigma2 > 0` of the covariance bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub sigma1: f64,
    pub sigma2: f64,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self {
            sigma1: 5e-4,
            sigma2: 5e-4,
        }
    }
}

impl ScalingParams {
    pub fn new(sigma1: f64, sigma2: f64) -> Result<Self, FilterError> {
        if !(sigma1 > 0.0 && sigma2 > 0.0 && sigma1.is_finite() && sigma2.is_finite()) {
            return Err(FilterError::InvalidParameter(format!(
                "scaling parameters must be positive, got sigma1={sigma1}, sigma2={sigma2}"
            )));
        }
        Ok(Self { sigma1, sigma2 })
    }

    pub fn mu1(&self) -> f64 {
        1.0 + self.sigma1
    }

    pub fn mu2(&self) -> f64 {
        1.0 + self.sigma2
    }

    pub fn mu3(&self) -> f64 {
        1.0 + 1.0 / self.sigma1 + 1.0 / self.sigma2
    }
}

/// Matrices of the non-triggered update for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtWorkspace {
    /// Measurement Jacobian at the prior mean.
    pub g: MeasJacobian,
    pub m: StateMeasMat,
    pub a: StateCov,
    pub s: MeasCov,
    pub n: StateCov,
    pub pbar: StateCov,
    /// Effective gain `gamma K + (1 - gamma) M`.
    pub kbar: StateMeasMat,
}

/// Bound-minimizing gain and the associated matrices.
pub fn et_gain(
    p_prior: &StateCov,
    g: &MeasJacobian,
    r: &MeasCov,
    delta: f64,
    sp: &ScalingParams,
) -> Result<EtWorkspace, FilterError> {
    let (mu1, mu2, mu3) = (sp.mu1(), sp.mu2(), sp.mu3());
    let s = symmetrize(&(g * p_prior * g.transpose() * mu1 + r * mu2 + MeasCov::identity() * (mu3 * delta)));
    let s_inv = spd_inverse(&s, "S")?;
    let m = p_prior * g.transpose() * s_inv * mu1;
    let a = StateCov::identity() - m * g;
    let pbar = symmetrize(
        &(a * p_prior * a.transpose() * mu1
            + m * r * m.transpose() * mu2
            + m * m.transpose() * (mu3 * delta)),
    );
    let mg = m * g;
    let n = symmetrize(
        &((StateCov::identity() * sp.sigma1 - mg * mu1) * p_prior
            - p_prior * mg.transpose() * mu1
            + m * s * m.transpose()),
    );
    Ok(EtWorkspace {
        g: *g,
        m,
        a,
        s,
        n,
        pbar,
        kbar: m,
    })
}

/// Information contribution under the trigger. `gamma = true` is the
/// ordinary contribution of `z_tau` (which then equals the current
/// measurement); `gamma = false` uses the bound-minimizing branch with
/// `dz_bar = z_tau - z_hat`.
///
/// `(N^-1 + Y)^-1` is evaluated as `(I + N Y)^-1 N`, which needs only
/// `I + N Y = Pbar Y` to be invertible.
#[allow(clippy::too_many_arguments)]
pub fn et_info_contribution(
    gamma: bool,
    prior_info: &InfoPair,
    prior: &EstimatePair,
    w: &UpdateWorkspace,
    et: &EtWorkspace,
    z_tau: &MeasVec,
    sp: &ScalingParams,
) -> Result<InfoContribution, FilterError> {
    if gamma {
        return info_contribution(prior_info, prior, w, &Measurement::from_vector(z_tau));
    }
    let y = &prior_info.y;
    let dz_bar = w.residual(z_tau, &w.zhat);
    let core = inverse(&(StateCov::identity() + et.n * y), "I + N Y")? * et.n;
    let i_mat = -symmetrize(&(y * core * y));
    let s_inv = spd_inverse(&et.s, "S")?;
    let i_vec =
        et.g.transpose() * s_inv * dz_bar * sp.mu1() + i_mat * (prior.xhat + et.m * dz_bar);
    Ok(InfoContribution { i_vec, i_mat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{from_info, to_info, LocalFilterKind};
    use crate::linalg::{min_eigenvalue, StateVec};
    use crate::scenario::{MeasurementModel, RangeBearingSensor, SensorPose};
    use rand::{Rng, SeedableRng};

    struct Case {
        prior: EstimatePair,
        sensor: RangeBearingSensor,
        r: MeasCov,
    }

    fn case(seed: u64) -> Case {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = StateCov::from_fn(|_, _| rng.random_range(-0.4..0.4));
        let p = a * a.transpose() + StateCov::identity() * rng.random_range(0.01..0.5);
        let x = StateVec::from_column_slice(&[
            rng.random_range(20.0..80.0),
            rng.random_range(20.0..80.0),
            rng.random_range(5.0..30.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.3..0.3),
        ]);
        Case {
            prior: EstimatePair::new(x, p),
            sensor: RangeBearingSensor::new(SensorPose::new(rng.random_range(-5.0..5.0), 0.0, 0.0)),
            r: MeasCov::from_diagonal(&MeasVec::new(
                rng.random_range(0.01..0.3),
                rng.random_range(1e-5..1e-3),
                rng.random_range(1e-5..1e-3),
            )),
        }
    }

    fn trace_pbar(m: &StateMeasMat, p: &StateCov, g: &MeasJacobian, r: &MeasCov, delta: f64, sp: &ScalingParams) -> f64 {
        let a = StateCov::identity() - m * g;
        (a * p * a.transpose() * sp.mu1() + m * r * m.transpose() * sp.mu2() + m * m.transpose() * (sp.mu3() * delta)).trace()
    }

    #[test]
    fn scaling_parameters() {
        let sp = ScalingParams::new(5e-4, 5e-4).unwrap();
        assert!((sp.mu1() - 1.0005).abs() < 1e-15);
        assert!((sp.mu2() - 1.0005).abs() < 1e-15);
        assert!((sp.mu3() - 4001.0).abs() < 1e-9);
        assert!(ScalingParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn gain_vanishes_for_large_threshold() {
        let c = case(1);
        let sp = ScalingParams::default();
        let g = c.sensor.jacobian(&c.prior.xhat).unwrap();
        let et = et_gain(&c.prior.p, &g, &c.r, 1e12, &sp).unwrap();
        assert!(et.m.norm() < 1e-12);
        assert!((et.pbar - c.prior.p * sp.mu1()).norm() < 1e-9 * c.prior.p.norm());
    }

    #[test]
    fn gain_is_stationary_point_of_trace_bound() {
        for seed in 0..20 {
            let c = case(seed);
            let sp = ScalingParams::new(0.01 + 0.01 * seed as f64, 5e-4 * (1 + seed) as f64).unwrap();
            let delta = 0.04;
            let g = c.sensor.jacobian(&c.prior.xhat).unwrap();
            let et = et_gain(&c.prior.p, &g, &c.r, delta, &sp).unwrap();
            let base = trace_pbar(&et.m, &c.prior.p, &g, &c.r, delta, &sp);
            assert!((base - et.pbar.trace()).abs() < 1e-10 * base);
            let h = 1e-6 * et.m.abs().max().max(1e-3);
            let mut grad = 0.0_f64;
            for i in 0..7 {
                for j in 0..3 {
                    let mut mp = et.m;
                    let mut mm = et.m;
                    mp[(i, j)] += h;
                    mm[(i, j)] -= h;
                    let d = (trace_pbar(&mp, &c.prior.p, &g, &c.r, delta, &sp)
                        - trace_pbar(&mm, &c.prior.p, &g, &c.r, delta, &sp))
                        / (2.0 * h);
                    grad = grad.max(d.abs());
                }
            }
            assert!(grad < 1e-6 * base, "seed {seed}: grad {grad:e}, tr {base:e}");
        }
    }

    #[test]
    fn bound_is_nondecreasing_in_threshold() {
        let c = case(4);
        let sp = ScalingParams::default();
        let g = c.sensor.jacobian(&c.prior.xhat).unwrap();
        let mut last = 0.0;
        for delta in [0.0, 1e-3, 0.01, 0.04, 0.1, 1.0, 10.0] {
            let tr = et_gain(&c.prior.p, &g, &c.r, delta, &sp).unwrap().pbar.trace();
            assert!(tr >= last - 1e-12);
            last = tr;
        }
    }

    fn workspace(c: &Case) -> (InfoPair, UpdateWorkspace) {
        let info = to_info(&c.prior).unwrap();
        let m = LocalFilterKind::Ckf.measurement_moments(&c.prior, &c.sensor, &c.r).unwrap();
        (info, UpdateWorkspace::new(&m, &info.y).unwrap())
    }

    #[test]
    fn triggered_branch_is_ordinary_contribution() {
        let c = case(8);
        let (info, ws) = workspace(&c);
        let sp = ScalingParams::default();
        let et = et_gain(&c.prior.p, &c.sensor.jacobian(&c.prior.xhat).unwrap(), &c.r, 0.04, &sp).unwrap();
        let z = ws.zhat + MeasVec::new(0.3, -0.01, 0.02);
        let a = et_info_contribution(true, &info, &c.prior, &ws, &et, &z, &sp).unwrap();
        let b = info_contribution(&info, &c.prior, &ws, &Measurement::from_vector(&z)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn untriggered_zero_deviation() {
        let c = case(9);
        let (info, ws) = workspace(&c);
        let sp = ScalingParams::default();
        let et = et_gain(&c.prior.p, &c.sensor.jacobian(&c.prior.xhat).unwrap(), &c.r, 0.04, &sp).unwrap();
        let out = et_info_contribution(false, &info, &c.prior, &ws, &et, &ws.zhat, &sp).unwrap();
        assert!((out.i_vec - out.i_mat * c.prior.xhat).norm() < 1e-12 * out.i_vec.norm().max(1.0));
    }

    /// The information route must land on the moment-form bound update
    /// `x = x_prior + M dz_bar`, `P = Pbar`.
    #[test]
    fn untriggered_matches_moment_form_bound_update() {
        for seed in 0..200 {
            let c = case(seed);
            let (info, ws) = workspace(&c);
            let sp = ScalingParams::new(5e-4 * (1 + seed % 5) as f64, 5e-4).unwrap();
            let delta = [0.01, 0.04, 0.5][seed as usize % 3];
            let g = c.sensor.jacobian(&c.prior.xhat).unwrap();
            let et = et_gain(&c.prior.p, &g, &c.r, delta, &sp).unwrap();
            let z_tau = ws.zhat + MeasVec::new(0.2, 0.003, -0.004);
            let out = et_info_contribution(false, &info, &c.prior, &ws, &et, &z_tau, &sp).unwrap();
            let y_post = info.y + out.i_mat;
            assert!(min_eigenvalue(&y_post) > 0.0);
            let post = from_info(&InfoPair { yhat: info.yhat + out.i_vec, y: y_post }).unwrap();

            let x_ref = c.prior.xhat + et.m * (z_tau - ws.zhat);
            assert!((post.xhat - x_ref).norm() < 1e-8 * x_ref.norm(), "seed {seed}");
            assert!((post.p - et.pbar).norm() < 1e-8 * et.pbar.norm(), "seed {seed}");
            assert!(post.p.trace() <= et.pbar.trace() + 1e-8);
            // N is the bound increment over the prior
            assert!((et.n - (et.pbar - c.prior.p)).norm() < 1e-9 * et.pbar.norm());
        }
    }
}
