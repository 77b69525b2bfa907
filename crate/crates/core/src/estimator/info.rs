//! Information-form conversions and the measurement information contribution.

use super::{EstimatePair, FilterError, InfoContribution, InfoPair, UpdateWorkspace};
use crate::linalg::{spd_inverse, symmetrize};
use crate::scenario::Measurement;

/// `Y = P^-1`, `y_hat = P^-1 x_hat`.
pub fn to_info(p: &EstimatePair) -> Result<InfoPair, FilterError> {
    let y = spd_inverse(&p.p, "covariance to information")?;
    Ok(InfoPair {
        yhat: y * p.xhat,
        y,
    })
}

/// `P = Y^-1`, `x_hat = Y^-1 y_hat`.
pub fn from_info(q: &InfoPair) -> Result<EstimatePair, FilterError> {
    let p = spd_inverse(&q.y, "information to covariance").map_err(|_| {
        FilterError::NotPositiveDefinite {
            min_eigenvalue: crate::linalg::min_eigenvalue(&q.y),
        }
    })?;
    Ok(EstimatePair {
        xhat: p * q.yhat,
        p,
    })
}

/// Information contribution of a transmitted measurement:
///
/// ```text
/// i = H^T D^-1 (dz + H x_prior),   I = H^T D^-1 H,
/// H = Pxz^T Y,   D = Pzz - Pxz^T Y Pxz,   dz = z - z_hat
/// ```
///
/// Adding `(i, I)` to the prior information pair reproduces the CKF update.
pub fn info_contribution(
    _prior_info: &InfoPair,
    prior: &EstimatePair,
    w: &UpdateWorkspace,
    z: &Measurement,
) -> Result<InfoContribution, FilterError> {
    let d_inv = spd_inverse(&w.d, "D = Pzz - Pxz^T Y Pxz")?;
    let ht_dinv = w.h.transpose() * d_inv;
    let dz = w.innovation(&z.to_vector());
    Ok(InfoContribution {
        i_vec: ht_dinv * (dz + w.h * prior.xhat),
        i_mat: symmetrize(&(ht_dinv * w.h)),
    })
}
