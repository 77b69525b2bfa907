//! Fixed-size matrix aliases and the small set of numerical helpers shared by
//! the filters: symmetrization, guarded inversion, Cholesky with a one-shot
//! jitter repair, and PSD square roots for noise sampling.

use nalgebra::{Cholesky, DMatrix, SMatrix, SVector, SymmetricEigen};

/// Target state dimension `[x, y, z, vx, vy, vz, omega]`.
pub const STATE_DIM: usize = 7;
/// Measurement dimension `[r, phi, rho]`.
pub const MEAS_DIM: usize = 3;

pub type StateVec = SVector<f64, STATE_DIM>;
pub type StateCov = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type MeasVec = SVector<f64, MEAS_DIM>;
pub type MeasCov = SMatrix<f64, MEAS_DIM, MEAS_DIM>;
/// Measurement Jacobian / pseudo-measurement matrix shape (3x7).
pub type MeasJacobian = SMatrix<f64, MEAS_DIM, STATE_DIM>;
/// Gain / cross-covariance shape (7x3).
pub type StateMeasMat = SMatrix<f64, STATE_DIM, MEAS_DIM>;

/// Failure of a factorization or inversion.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is singular or not positive definite ({context})")]
    NotPositiveDefinite { context: &'static str },
    #[error("matrix is singular ({context})")]
    Singular { context: &'static str },
}

/// `(A + A^T) / 2`.
pub fn symmetrize<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute asymmetry `max |A_ij - A_ji|`.
pub fn asymmetry<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..N {
        for j in (i + 1)..N {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Eigendecomposition of the symmetric part, through the dynamic-size
/// solver so it works for any fixed `N`.
fn sym_eigen<const N: usize>(m: &SMatrix<f64, N, N>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(DMatrix::from_column_slice(N, N, symmetrize(m).as_slice()))
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    sym_eigen(m)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Lower-triangular factor `L` with `L L^T = m`.
///
/// On failure a single jitter of `1e-9 * tr(m) / N` is added to the diagonal
/// and the factorization is retried; a second failure is an error.
pub fn cholesky_lower<const N: usize>(
    m: &SMatrix<f64, N, N>,
    context: &'static str,
) -> Result<SMatrix<f64, N, N>, LinalgError> {
    let sym = symmetrize(m);
    if let Some(ch) = Cholesky::new(sym) {
        return Ok(ch.l());
    }
    let jitter = 1e-9 * sym.trace().abs().max(f64::MIN_POSITIVE) / N as f64;
    let repaired = sym + SMatrix::<f64, N, N>::identity() * jitter;
    Cholesky::new(repaired)
        .map(|ch| ch.l())
        .ok_or(LinalgError::NotPositiveDefinite { context })
}

/// Inverse of a symmetric positive-definite matrix, re-symmetrized.
pub fn spd_inverse<const N: usize>(
    m: &SMatrix<f64, N, N>,
    context: &'static str,
) -> Result<SMatrix<f64, N, N>, LinalgError> {
    let ch = Cholesky::new(symmetrize(m)).ok_or(LinalgError::NotPositiveDefinite { context })?;
    Ok(symmetrize(&ch.inverse()))
}

/// General inverse via LU.
pub fn inverse<const N: usize>(
    m: &SMatrix<f64, N, N>,
    context: &'static str,
) -> Result<SMatrix<f64, N, N>, LinalgError> {
    m.try_inverse().ok_or(LinalgError::Singular { context })
}

/// Symmetric square root factor `B` with `B B^T = m` for a PSD matrix;
/// negative eigenvalues (round-off) are clamped to zero. Works for singular
/// noise covariances where Cholesky would fail.
pub fn psd_sqrt<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    let eig = sym_eigen(m);
    let mut root = SMatrix::<f64, N, N>::zeros();
    for k in 0..N {
        let lambda = eig.eigenvalues[k].max(0.0);
        if lambda == 0.0 {
            continue;
        }
        let v = SVector::<f64, N>::from_iterator(eig.eigenvectors.column(k).iter().copied());
        root += v * v.transpose() * lambda.sqrt();
    }
    root
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// `a - b` with the flagged channels wrapped to `(-pi, pi]`.
pub fn wrapped_residual(a: &MeasVec, b: &MeasVec, angular: [bool; MEAS_DIM]) -> MeasVec {
    let mut d = a - b;
    for c in 0..MEAS_DIM {
        if angular[c] {
            d[c] = wrap_angle(d[c]);
        }
    }
    d
}
