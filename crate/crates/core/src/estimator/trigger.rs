//! Send-on-delta trigger on the sensor-to-estimator link.

use crate::linalg::{wrapped_residual, MeasCov, MeasVec};
use crate::scenario::Measurement;

/// Per-sensor trigger state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerState {
    /// Last transmitted measurement; `None` until the first transmission.
    pub z_tau: Option<MeasVec>,
    /// Time index of the last transmission.
    pub tau: usize,
    /// Flag of the most recent evaluation.
    pub gamma: bool,
    /// Threshold on the squared deviation.
    pub delta: f64,
    /// Optional per-channel scaling `W` applied as `(W d)^T (W d)`. Off by default.
    pub normalization: Option<MeasCov>,
}

impl TriggerState {
    pub fn new(delta: f64) -> Self {
        Self {
            z_tau: None,
            tau: 0,
            gamma: false,
            delta,
            normalization: None,
        }
    }

    /// Squared deviation of `z` from the last transmitted measurement, angle
    /// channels wrapped before squaring.
    pub fn deviation(&self, z: &MeasVec) -> Option<f64> {
        self.z_tau.map(|last| {
            let d = wrapped_residual(z, &last, [false, true, true]);
            let d = match &self.normalization {
                Some(w) => w * d,
                None => d,
            };
            d.dot(&d)
        })
    }

    /// Evaluate the trigger at step `k`. The first measurement is always sent.
    pub fn evaluate(&self, z: &Measurement, k: usize) -> TriggerState {
        let zv = z.to_vector();
        let gamma = match self.deviation(&zv) {
            Some(dev) => dev > self.delta,
            None => true,
        };
        TriggerState {
            z_tau: if gamma { Some(zv) } else { self.z_tau },
            tau: if gamma { k } else { self.tau },
            gamma,
            ..*self
        }
    }
}

/// Evaluate the trigger for measurement `z` at step `k`.
pub fn trigger(z: &Measurement, ts: &TriggerState, k: usize) -> TriggerState {
    ts.evaluate(z, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sent(z: MeasVec, delta: f64) -> TriggerState {
        TriggerState {
            z_tau: Some(z),
            tau: 3,
            gamma: true,
            delta,
            normalization: None,
        }
    }

    #[test]
    fn threshold_examples() {
        let base = MeasVec::new(10.0, 0.1, 0.2);
        // |dz|^2 = 0.05 > 0.04
        let ts = sent(base, 0.04);
        let z = Measurement::new(10.0 + 0.05f64.sqrt(), 0.1, 0.2);
        let out = trigger(&z, &ts, 7);
        assert!(out.gamma);
        assert_eq!(out.tau, 7);
        assert_eq!(out.z_tau, Some(z.to_vector()));

        let out = trigger(&Measurement::from_vector(&base), &ts, 8);
        assert!(!out.gamma);
        assert_eq!(out.tau, 3);
        assert_eq!(out.z_tau, Some(base));

        let out = trigger(&Measurement::new(10.0 + 1e-9, 0.1, 0.2), &sent(base, 0.0), 9);
        assert!(out.gamma);
        // equal measurement never triggers, even at delta = 0
        assert!(!trigger(&Measurement::from_vector(&base), &sent(base, 0.0), 9).gamma);
    }

    #[test]
    fn first_measurement_always_sent() {
        let out = trigger(&Measurement::new(1.0, 0.0, 0.0), &TriggerState::new(f64::INFINITY), 1);
        assert!(out.gamma);
        assert_eq!(out.tau, 1);
    }

    #[test]
    fn azimuth_seam_is_wrapped() {
        let pi = std::f64::consts::PI;
        let ts = sent(MeasVec::new(5.0, 0.0, pi - 0.01), 0.04);
        assert!(!trigger(&Measurement::new(5.0, 0.0, -pi + 0.01), &ts, 2).gamma);
    }

    #[test]
    fn normalization_scales_channels() {
        let mut ts = sent(MeasVec::new(5.0, 0.0, 0.0), 1.0);
        let z = Measurement::new(5.0, 0.05, 0.0);
        assert!(!trigger(&z, &ts, 2).gamma);
        ts.normalization = Some(MeasCov::from_diagonal(&MeasVec::new(1.0, 100.0, 100.0)));
        assert!(trigger(&z, &ts, 2).gamma);
    }

    proptest! {
        /// Against a frozen z_tau, the trigger set at a larger threshold is a
        /// subset of the set at a smaller one.
        #[test]
        fn trigger_set_shrinks_with_threshold(
            d1 in 0.0f64..0.5, extra in 0.0f64..0.5,
            zs in proptest::collection::vec((-1.0f64..1.0, -0.2f64..0.2, -0.2f64..0.2), 1..50)
        ) {
            let frozen = MeasVec::new(10.0, 0.1, 0.1);
            let d2 = d1 + extra;
            for (a, b, c) in zs {
                let z = Measurement::new(10.0 + a, 0.1 + b, 0.1 + c);
                let hi = trigger(&z, &sent(frozen, d2), 1).gamma;
                let lo = trigger(&z, &sent(frozen, d1), 1).gamma;
                prop_assert!(!hi || lo);
            }
        }
    }
}
