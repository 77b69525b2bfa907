//! One estimator node: prediction, trigger, information contribution, and
//! the information-form posterior.

use rand_chacha::ChaCha8Rng;

use super::event::{et_gain, et_info_contribution, ScalingParams};
use super::info::{from_info, to_info};
use super::local::LocalFilterKind;
use super::trigger::TriggerState;
use super::{EstimatePair, FilterError, InfoContribution, InfoPair, UpdateWorkspace};
use crate::linalg::{psd_sqrt, MeasCov, StateCov};
use crate::scenario::{sample_gaussian, Dynamics, Measurement, MeasurementModel};

/// Random compensation of the held measurement on non-triggered steps:
/// `z_tau <- z_tau + n`, `n ~ N(0, sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompensationSpec {
    pub enabled: bool,
    /// Covariance of `n`; `None` uses the sensor's `R`.
    pub sigma: Option<MeasCov>,
}

/// Local result of one step before any fusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalUpdate {
    pub prior: EstimatePair,
    pub prior_info: InfoPair,
    pub contribution: InfoContribution,
    /// Whether the measurement was transmitted to the estimator.
    pub gamma: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub posterior_info: InfoPair,
    pub estimate: EstimatePair,
    pub contribution: InfoContribution,
    pub trigger: Option<TriggerState>,
    pub gamma: bool,
}

#[derive(Debug, Clone)]
pub struct NodeFilter {
    pub estimate: EstimatePair,
    pub kind: LocalFilterKind,
    /// `None` transmits every measurement.
    pub trigger: Option<TriggerState>,
    pub scaling: ScalingParams,
    pub compensation: CompensationSpec,
    rng: ChaCha8Rng,
}

impl NodeFilter {
    pub fn new(
        initial: EstimatePair,
        kind: LocalFilterKind,
        delta: Option<f64>,
        scaling: ScalingParams,
        compensation: CompensationSpec,
        rng: ChaCha8Rng,
    ) -> Self {
        Self {
            estimate: initial,
            kind,
            trigger: delta.map(TriggerState::new),
            scaling,
            compensation,
            rng,
        }
    }

    pub fn predict<D: Dynamics + ?Sized>(
        &self,
        dynamics: &D,
        q: &StateCov,
    ) -> Result<EstimatePair, FilterError> {
        self.kind.predict(&self.estimate, dynamics, q)
    }

    /// Trigger decision and information contribution for step `k`. A missing
    /// measurement contributes nothing.
    pub fn local_update<M: MeasurementModel + ?Sized>(
        &mut self,
        prior: &EstimatePair,
        z: Option<&Measurement>,
        sensor: &M,
        r: &MeasCov,
        k: usize,
    ) -> Result<LocalUpdate, FilterError> {
        let prior_info = to_info(prior)?;
        let Some(z) = z else {
            return Ok(LocalUpdate {
                prior: *prior,
                prior_info,
                contribution: InfoContribution::zero(),
                gamma: false,
            });
        };
        let moments = self.kind.measurement_moments(prior, sensor, r)?;
        let ws = UpdateWorkspace::new(&moments, &prior_info.y)?;

        let Some(ts) = self.trigger else {
            let contribution = super::info::info_contribution(&prior_info, prior, &ws, z)?;
            return Ok(LocalUpdate {
                prior: *prior,
                prior_info,
                contribution,
                gamma: true,
            });
        };

        let mut next = ts.evaluate(z, k);
        let contribution = if next.gamma {
            super::info::info_contribution(&prior_info, prior, &ws, z)?
        } else {
            let mut held = next.z_tau.expect("first measurement is always sent");
            if self.compensation.enabled {
                let sigma = self.compensation.sigma.unwrap_or(*r);
                held += sample_gaussian(&mut self.rng, &psd_sqrt(&sigma));
                next.z_tau = Some(held);
            }
            let g = sensor.jacobian(&prior.xhat)?;
            let et = et_gain(&prior.p, &g, r, ts.delta, &self.scaling)?;
            et_info_contribution(false, &prior_info, prior, &ws, &et, &held, &self.scaling)?
        };
        self.trigger = Some(next);
        Ok(LocalUpdate {
            prior: *prior,
            prior_info,
            contribution,
            gamma: next.gamma,
        })
    }

    /// Full local step: predict, trigger, contribution, `Y = Y_prior + Ibar`,
    /// conversion back to moment form. Updates the node's estimate.
    pub fn step<D, M>(
        &mut self,
        dynamics: &D,
        q: &StateCov,
        z: Option<&Measurement>,
        sensor: &M,
        r: &MeasCov,
        k: usize,
    ) -> Result<StepOutput, FilterError>
    where
        D: Dynamics + ?Sized,
        M: MeasurementModel + ?Sized,
    {
        let prior = self.predict(dynamics, q)?;
        let local = self.local_update(&prior, z, sensor, r, k)?;
        let posterior_info = InfoPair {
            yhat: local.prior_info.yhat + local.contribution.i_vec,
            y: local.prior_info.y + local.contribution.i_mat,
        };
        let estimate = from_info(&posterior_info)?;
        self.estimate = estimate;
        Ok(StepOutput {
            posterior_info,
            estimate,
            contribution: local.contribution,
            trigger: self.trigger,
            gamma: local.gamma,
        })
    }
}

/// One event-triggered cubature information filter step on `node`. The
/// node's [`LocalFilterKind`] selects the linearization, so the same entry
/// point also drives the EKF and UKF baselines.
pub fn et_cif_step<D, M>(
    node: &mut NodeFilter,
    dynamics: &D,
    q: &StateCov,
    z: Option<&Measurement>,
    sensor: &M,
    r: &MeasCov,
    k: usize,
) -> Result<StepOutput, FilterError>
where
    D: Dynamics + ?Sized,
    M: MeasurementModel + ?Sized,
{
    node.step(dynamics, q, z, sensor, r, k)
}
