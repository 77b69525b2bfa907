//! Per-node local filtering.
//!
//! The building blocks are the cubature Kalman filter ([`cubature`]), the
//! information-form conversions and contributions ([`info`]), the
//! send-on-delta trigger ([`trigger`]), and the covariance-bound-minimizing
//! gain used when a measurement is not transmitted ([`event`]). [`node`] ties
//! them together into one event-triggered information-filter step; [`local`]
//! supplies the CKF/EKF/UKF linearizations that feed it.

pub mod cubature;
pub mod event;
pub mod info;
pub mod local;
pub mod node;
pub mod trigger;

pub use cubature::{ckf_predict, ckf_update, cubature_points, CubatureSet};
pub use event::{et_gain, et_info_contribution, EtWorkspace, ScalingParams};
pub use info::{from_info, info_contribution, to_info};
pub use local::{LocalFilterKind, MeasurementMoments, UkfParams};
pub use node::{et_cif_step, CompensationSpec, NodeFilter, StepOutput};
pub use trigger::{trigger, TriggerState};

use crate::linalg::{
    min_eigenvalue, symmetrize, LinalgError, MeasCov, MeasJacobian, MeasVec, StateCov,
    StateMeasMat, StateVec,
};
use crate::scenario::ScenarioError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FilterError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ScenarioError),
    #[error("invalid filter parameter: {0}")]
    InvalidParameter(String),
    #[error("information matrix lost positive definiteness (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
}

/// Moment-form estimate `(x_hat, P)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatePair {
    pub xhat: StateVec,
    pub p: StateCov,
}

impl EstimatePair {
    pub fn new(xhat: StateVec, p: StateCov) -> Self {
        Self {
            xhat,
            p: symmetrize(&p),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.p)
    }
}

/// Information-form estimate `(y_hat, Y) = (P^-1 x_hat, P^-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoPair {
    pub yhat: StateVec,
    pub y: StateCov,
}

/// Additive measurement information `(i, I)` exchanged between estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoContribution {
    pub i_vec: StateVec,
    pub i_mat: StateCov,
}

impl InfoContribution {
    pub fn zero() -> Self {
        Self {
            i_vec: StateVec::zeros(),
            i_mat: StateCov::zeros(),
        }
    }
}

/// Quantities of one measurement update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateWorkspace {
    /// Predicted measurement.
    pub zhat: MeasVec,
    /// Innovation covariance.
    pub pzz: MeasCov,
    /// State/measurement cross covariance.
    pub pxz: StateMeasMat,
    /// Kalman gain `Pxz Pzz^-1`.
    pub k: StateMeasMat,
    /// `Pzz - Pxz^T Y Pxz`.
    pub d: MeasCov,
    /// Pseudo-measurement matrix `Pxz^T Y`.
    pub h: MeasJacobian,
    /// Channels whose residuals are angles and get wrapped.
    pub angular: [bool; 3],
}

impl UpdateWorkspace {
    /// Build from the predicted-measurement moments and the prior information matrix.
    pub fn new(m: &MeasurementMoments, prior_y: &StateCov) -> Result<Self, FilterError> {
        let pzz_inv = crate::linalg::spd_inverse(&m.pzz, "innovation covariance")?;
        let h = m.pxz.transpose() * prior_y;
        let d = symmetrize(&(m.pzz - h * m.pxz));
        Ok(Self {
            zhat: m.zhat,
            pzz: m.pzz,
            pxz: m.pxz,
            k: m.pxz * pzz_inv,
            d,
            h,
            angular: m.angular,
        })
    }

    /// `a - b` with angular channels wrapped to `(-pi, pi]`.
    pub fn residual(&self, a: &MeasVec, b: &MeasVec) -> MeasVec {
        crate::linalg::wrapped_residual(a, b, self.angular)
    }

    pub fn innovation(&self, z: &MeasVec) -> MeasVec {
        self.residual(z, &self.zhat)
    }
}
