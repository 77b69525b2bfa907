//! CKF / EKF / UKF linearizations behind a common interface: each kind
//! provides a prediction and the predicted-measurement moments
//! `(z_hat, Pzz, Pxz)`. Everything downstream (gain, information
//! contribution, event-triggered branch) is shared.

use serde::{Deserialize, Serialize};

use super::cubature::{ckf_measurement_moments, ckf_predict};
use super::{EstimatePair, FilterError};
use crate::linalg::{
    cholesky_lower, symmetrize, wrap_angle, MeasCov, MeasVec, StateCov, StateMeasMat, StateVec,
    STATE_DIM,
};
use crate::scenario::{Dynamics, MeasurementModel};

/// First and second moments of the predicted measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementMoments {
    pub zhat: MeasVec,
    /// Includes `R`.
    pub pzz: MeasCov,
    pub pxz: StateMeasMat,
    pub angular: [bool; 3],
}

/// Scaled unscented transform parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UkfParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UkfParams {
    /// `alpha = 1, beta = 2, kappa = 3 - n`.
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            kappa: 3.0 - STATE_DIM as f64,
        }
    }
}

impl UkfParams {
    fn lambda(&self) -> f64 {
        let n = STATE_DIM as f64;
        self.alpha * self.alpha * (n + self.kappa) - n
    }

    /// Sigma points with mean and covariance weights.
    pub fn sigma_points(
        &self,
        p: &EstimatePair,
    ) -> Result<(Vec<StateVec>, Vec<f64>, Vec<f64>), FilterError> {
        let n = STATE_DIM as f64;
        let lambda = self.lambda();
        if n + lambda <= 0.0 {
            return Err(FilterError::InvalidParameter(format!(
                "UKF spread n + lambda = {} must be positive",
                n + lambda
            )));
        }
        let l = cholesky_lower(&p.p, "unscented square root")?;
        let scale = (n + lambda).sqrt();
        let mut pts = Vec::with_capacity(2 * STATE_DIM + 1);
        pts.push(p.xhat);
        for r in 0..STATE_DIM {
            pts.push(p.xhat + l.column(r) * scale);
        }
        for r in 0..STATE_DIM {
            pts.push(p.xhat - l.column(r) * scale);
        }
        let wi = 1.0 / (2.0 * (n + lambda));
        let w0m = lambda / (n + lambda);
        let w0c = w0m + (1.0 - self.alpha * self.alpha + self.beta);
        let mut wm = vec![wi; 2 * STATE_DIM + 1];
        let mut wc = wm.clone();
        wm[0] = w0m;
        wc[0] = w0c;
        Ok((pts, wm, wc))
    }
}

/// Which local filter a node runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LocalFilterKind {
    Ckf,
    Ekf,
    Ukf(UkfParams),
}

impl LocalFilterKind {
    pub fn predict<D: Dynamics + ?Sized>(
        &self,
        post: &EstimatePair,
        dynamics: &D,
        q: &StateCov,
    ) -> Result<EstimatePair, FilterError> {
        match self {
            LocalFilterKind::Ckf => ckf_predict(post, dynamics, q),
            LocalFilterKind::Ekf => {
                let f = dynamics.jacobian(&post.xhat);
                Ok(EstimatePair::new(
                    dynamics.propagate(&post.xhat),
                    f * post.p * f.transpose() + q,
                ))
            }
            LocalFilterKind::Ukf(params) => {
                let (pts, wm, wc) = params.sigma_points(post)?;
                let prop: Vec<StateVec> = pts.iter().map(|x| dynamics.propagate(x)).collect();
                let mean = prop
                    .iter()
                    .zip(&wm)
                    .fold(StateVec::zeros(), |acc, (x, w)| acc + x * *w);
                let cov = prop.iter().zip(&wc).fold(StateCov::zeros(), |acc, (x, w)| {
                    acc + (x - mean) * (x - mean).transpose() * *w
                });
                Ok(EstimatePair::new(mean, cov + q))
            }
        }
    }

    pub fn measurement_moments<M: MeasurementModel + ?Sized>(
        &self,
        prior: &EstimatePair,
        sensor: &M,
        r: &MeasCov,
    ) -> Result<MeasurementMoments, FilterError> {
        match self {
            LocalFilterKind::Ckf => ckf_measurement_moments(prior, sensor, r),
            LocalFilterKind::Ekf => {
                let g = sensor.jacobian(&prior.xhat)?;
                let pxz = prior.p * g.transpose();
                Ok(MeasurementMoments {
                    zhat: sensor.predict(&prior.xhat)?,
                    pzz: symmetrize(&(g * pxz + r)),
                    pxz,
                    angular: sensor.angular_channels(),
                })
            }
            LocalFilterKind::Ukf(params) => {
                let (pts, wm, wc) = params.sigma_points(prior)?;
                sigma_measurement_moments(&pts, &wm, &wc, sensor, r)
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            LocalFilterKind::Ckf => "CKF",
            LocalFilterKind::Ekf => "EKF",
            LocalFilterKind::Ukf(_) => "UKF",
        }
    }
}

/// Weighted measurement moments of a point set. Angular channels are averaged
/// as residuals about the first point's prediction so the mean does not jump
/// across the `±pi` seam.
pub(crate) fn sigma_measurement_moments<M: MeasurementModel + ?Sized>(
    points: &[StateVec],
    wm: &[f64],
    wc: &[f64],
    sensor: &M,
    r: &MeasCov,
) -> Result<MeasurementMoments, FilterError> {
    let zs: Vec<MeasVec> = points
        .iter()
        .map(|x| sensor.predict(x))
        .collect::<Result<_, _>>()?;
    let angular = sensor.angular_channels();
    let reference = zs[0];
    let mut zhat = reference
        + zs
            .iter()
            .zip(wm)
            .fold(MeasVec::zeros(), |acc, (z, w)| acc + sensor.residual(z, &reference) * *w);
    for c in 0..3 {
        if angular[c] {
            zhat[c] = wrap_angle(zhat[c]);
        }
    }
    let xmean = points
        .iter()
        .zip(wm)
        .fold(StateVec::zeros(), |acc, (x, w)| acc + x * *w);
    let mut pzz = *r;
    let mut pxz = StateMeasMat::zeros();
    for ((x, z), w) in points.iter().zip(&zs).zip(wc) {
        let dz = sensor.residual(z, &zhat);
        pzz += dz * dz.transpose() * *w;
        pxz += (x - xmean) * dz.transpose() * *w;
    }
    Ok(MeasurementMoments {
        zhat,
        pzz: symmetrize(&pzz),
        pxz,
        angular,
    })
}
