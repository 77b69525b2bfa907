//! Network fusion: diffusion adaptation, convex and covariance-intersection
//! combination, and the consensus baseline. All functions are pure; the
//! pipeline gathers neighbor data and calls them per node.

use crate::estimator::{from_info, to_info, EstimatePair, FilterError, InfoContribution, InfoPair};
use crate::linalg::{cholesky_lower, min_eigenvalue, symmetrize, StateCov, StateVec};
use crate::network::WeightMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FusionError {
    #[error("fusion weights must be nonnegative and sum to 1 (sum {sum})")]
    BadWeights { sum: f64 },
    #[error("{pairs} estimates but {weights} weights")]
    LengthMismatch { pairs: usize, weights: usize },
    #[error("nothing to fuse")]
    Empty,
    #[error("fused information matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("consensus needs at least one round")]
    NoRounds,
    #[error(transparent)]
    Filter(#[from] FilterError),
}

/// Fused estimate in both moment and information form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedEstimate {
    pub xhat_fus: StateVec,
    pub p_fus: StateCov,
    pub yhat_fus: StateVec,
    pub y_fus: StateCov,
}

impl FusedEstimate {
    pub fn from_info(info: InfoPair) -> Result<Self, FusionError> {
        let est = from_info(&info).map_err(pd_error(&info.y))?;
        Ok(Self {
            xhat_fus: est.xhat,
            p_fus: est.p,
            yhat_fus: info.yhat,
            y_fus: info.y,
        })
    }

    pub fn from_moments(est: EstimatePair) -> Result<Self, FusionError> {
        let info = to_info(&est).map_err(pd_error(&est.p))?;
        Ok(Self {
            xhat_fus: est.xhat,
            p_fus: est.p,
            yhat_fus: info.yhat,
            y_fus: info.y,
        })
    }

    pub fn estimate(&self) -> EstimatePair {
        EstimatePair {
            xhat: self.xhat_fus,
            p: self.p_fus,
        }
    }

    pub fn info(&self) -> InfoPair {
        InfoPair {
            yhat: self.yhat_fus,
            y: self.y_fus,
        }
    }
}

fn pd_error(m: &StateCov) -> impl FnOnce(FilterError) -> FusionError + '_ {
    move |_| FusionError::NotPositiveDefinite {
        min_eigenvalue: min_eigenvalue(m),
    }
}

fn check_weights(n_pairs: usize, weights: &[f64]) -> Result<(), FusionError> {
    if n_pairs == 0 {
        return Err(FusionError::Empty);
    }
    if n_pairs != weights.len() {
        return Err(FusionError::LengthMismatch {
            pairs: n_pairs,
            weights: weights.len(),
        });
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(FusionError::BadWeights { sum });
    }
    Ok(())
}

/// Adaptation: `y = y_prior + i_own + sum_j i_j`, `Y = Y_prior + I_own + sum_j I_j`.
pub fn diffuse_adapt(
    prior_info: &InfoPair,
    own: &InfoContribution,
    nbrs: &[InfoContribution],
) -> Result<InfoPair, FusionError> {
    let mut yhat = prior_info.yhat + own.i_vec;
    let mut y = prior_info.y + own.i_mat;
    for c in nbrs {
        yhat += c.i_vec;
        y += c.i_mat;
    }
    let y = symmetrize(&y);
    if cholesky_lower(&y, "adapted information").is_err() {
        return Err(FusionError::NotPositiveDefinite {
            min_eigenvalue: min_eigenvalue(&y),
        });
    }
    Ok(InfoPair { yhat, y })
}

/// Convex combination: `x = sum c_j x_j`, `P = sum c_j P_j`.
pub fn diffuse_combine_convex(
    pairs: &[EstimatePair],
    weights_row: &[f64],
) -> Result<FusedEstimate, FusionError> {
    check_weights(pairs.len(), weights_row)?;
    let mut xhat = StateVec::zeros();
    let mut p = StateCov::zeros();
    for (e, &c) in pairs.iter().zip(weights_row) {
        xhat += e.xhat * c;
        p += e.p * c;
    }
    FusedEstimate::from_moments(EstimatePair::new(xhat, p))
}

/// Covariance intersection with fixed weights:
/// `P^-1 = sum c_j P_j^-1`, `x = P sum c_j P_j^-1 x_j`.
pub fn ci_combine(pairs: &[EstimatePair], weights_row: &[f64]) -> Result<FusedEstimate, FusionError> {
    check_weights(pairs.len(), weights_row)?;
    let infos = pairs
        .iter()
        .map(|e| to_info(e).map_err(pd_error(&e.p)))
        .collect::<Result<Vec<_>, _>>()?;
    ci_combine_info(&infos, weights_row)
}

/// Covariance intersection on information pairs: `Y = sum c_j Y_j`,
/// `y = sum c_j y_j`. Same result as [`ci_combine`] without the round trip
/// through moment form.
pub fn ci_combine_info(infos: &[InfoPair], weights_row: &[f64]) -> Result<FusedEstimate, FusionError> {
    check_weights(infos.len(), weights_row)?;
    let mut yhat = StateVec::zeros();
    let mut y = StateCov::zeros();
    for (q, &c) in infos.iter().zip(weights_row) {
        yhat += q.yhat * c;
        y += q.y * c;
    }
    FusedEstimate::from_info(InfoPair {
        yhat,
        y: symmetrize(&y),
    })
}

/// Consensus parameters: `rounds` synchronous averaging steps with `weights`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusConfig {
    pub rounds: usize,
    pub weights: WeightMatrix,
}

/// `rounds` synchronous rounds of `q_i <- sum_j w_ij q_j` on information pairs.
pub fn consensus_fuse(
    info_pairs: &[InfoPair],
    cfg: &ConsensusConfig,
) -> Result<Vec<InfoPair>, FusionError> {
    if cfg.rounds == 0 {
        return Err(FusionError::NoRounds);
    }
    if cfg.weights.n() != info_pairs.len() {
        return Err(FusionError::LengthMismatch {
            pairs: info_pairs.len(),
            weights: cfg.weights.n(),
        });
    }
    let mut cur = info_pairs.to_vec();
    for _ in 0..cfg.rounds {
        cur = (0..cur.len())
            .map(|i| {
                let mut yhat = StateVec::zeros();
                let mut y = StateCov::zeros();
                for (j, q) in cur.iter().enumerate() {
                    let w = cfg.weights.get(i, j);
                    if w != 0.0 {
                        yhat += q.yhat * w;
                        y += q.y * w;
                    }
                }
                InfoPair {
                    yhat,
                    y: symmetrize(&y),
                }
            })
            .collect();
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{metropolis_weights, Graph};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pd(rng: &mut ChaCha8Rng) -> StateCov {
        let a = StateCov::from_fn(|_, _| rng.random_range(-1.0..1.0));
        a * a.transpose() + StateCov::identity() * rng.random_range(0.01..1.0)
    }

    fn random_pair(rng: &mut ChaCha8Rng) -> EstimatePair {
        EstimatePair::new(StateVec::from_fn(|_, _| rng.random_range(-5.0..5.0)), random_pd(rng))
    }

    fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / s).collect()
    }

    #[test]
    fn adapt_without_neighbors_is_local_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let prior = to_info(&random_pair(&mut rng)).unwrap();
        let own = InfoContribution {
            i_vec: StateVec::from_element(0.3),
            i_mat: StateCov::identity() * 0.5,
        };
        let q = diffuse_adapt(&prior, &own, &[]).unwrap();
        assert_eq!(q.yhat, prior.yhat + own.i_vec);
        assert_eq!(q.y, symmetrize(&(prior.y + own.i_mat)));
    }

    #[test]
    fn adapt_is_linear_in_neighbors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let prior = to_info(&random_pair(&mut rng)).unwrap();
        let own = InfoContribution::zero();
        let c = InfoContribution {
            i_vec: StateVec::from_element(1.0),
            i_mat: StateCov::identity(),
        };
        let one = diffuse_adapt(&prior, &own, &[c]).unwrap();
        let two = diffuse_adapt(&prior, &own, &[c, c]).unwrap();
        assert!(((two.yhat - prior.yhat) - 2.0 * (one.yhat - prior.yhat)).norm() < 1e-12);
        assert!(((two.y - prior.y) - 2.0 * (one.y - prior.y)).norm() < 1e-12);
    }

    #[test]
    fn adapt_surfaces_indefinite_result() {
        let prior = InfoPair {
            yhat: StateVec::zeros(),
            y: StateCov::identity(),
        };
        let bad = InfoContribution {
            i_vec: StateVec::zeros(),
            i_mat: -StateCov::identity() * 2.0,
        };
        match diffuse_adapt(&prior, &bad, &[]) {
            Err(FusionError::NotPositiveDefinite { min_eigenvalue }) => {
                assert!((min_eigenvalue + 1.0).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn convex_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_pair(&mut rng);
        let b = random_pair(&mut rng);
        let same = diffuse_combine_convex(&[a, a, a], &[0.2, 0.3, 0.5]).unwrap();
        assert!((same.xhat_fus - a.xhat).norm() < 1e-12);
        assert!((same.p_fus - a.p).norm() < 1e-12);
        let pass = diffuse_combine_convex(&[a, b], &[1.0, 0.0]).unwrap();
        assert_eq!(pass.xhat_fus, a.xhat);
        let half = diffuse_combine_convex(&[a, b], &[0.5, 0.5]).unwrap();
        assert!((half.p_fus - (a.p + b.p) / 2.0).norm() < 1e-12);
        assert!(diffuse_combine_convex(&[a, b], &[0.5, 0.6]).is_err());
        assert!(diffuse_combine_convex(&[a, b], &[1.5, -0.5]).is_err());
    }

    #[test]
    fn ci_two_node_example() {
        let mut x1 = StateVec::zeros();
        x1[0] = 1.0;
        let mut x2 = StateVec::zeros();
        x2[0] = -1.0;
        let a = EstimatePair::new(x1, StateCov::identity());
        let b = EstimatePair::new(x2, StateCov::identity() * 3.0);
        let f = ci_combine(&[a, b], &[0.5, 0.5]).unwrap();
        assert!((f.p_fus - StateCov::identity() * 1.5).norm() < 1e-12);
        // x = 1.5 * (0.5 * 1 * 1 + 0.5 * (1/3) * (-1)) = 0.5: node 1 weighted 3x node 2
        let direct = 1.5 * (0.5 * 1.0 + -(0.5 / 3.0));
        assert!((f.xhat_fus[0] - direct).abs() < 1e-12);
        assert!((f.xhat_fus[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ci_information_is_convex_combination() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pairs: Vec<_> = (0..3).map(|_| random_pair(&mut rng)).collect();
        let w = random_weights(&mut rng, 3);
        let f = ci_combine(&pairs, &w).unwrap();
        let y: StateCov = pairs
            .iter()
            .zip(&w)
            .map(|(p, c)| p.p.try_inverse().unwrap() * *c)
            .sum();
        assert!((f.y_fus - y).norm() <= 1e-9 * y.norm());
        // forms consistent
        assert!((f.p_fus * f.y_fus - StateCov::identity()).norm() < 1e-8);
        assert!((f.y_fus * f.xhat_fus - f.yhat_fus).norm() < 1e-8 * f.yhat_fus.norm().max(1.0));
    }

    #[test]
    fn ci_and_convex_agree_for_equal_covariances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_pd(&mut rng);
        let pairs: Vec<_> = (0..4)
            .map(|_| EstimatePair::new(StateVec::from_fn(|_, _| rng.random_range(-3.0..3.0)), p))
            .collect();
        let w = random_weights(&mut rng, 4);
        let a = ci_combine(&pairs, &w).unwrap();
        let b = diffuse_combine_convex(&pairs, &w).unwrap();
        assert!((a.xhat_fus - b.xhat_fus).norm() < 1e-9 * b.xhat_fus.norm().max(1.0));
        assert!((a.p_fus - b.p_fus).norm() < 1e-9 * b.p_fus.norm());
    }

    #[test]
    fn ci_preserves_pd_and_bounds_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let n = rng.random_range(1..6);
            let pairs: Vec<_> = (0..n).map(|_| random_pair(&mut rng)).collect();
            let w = random_weights(&mut rng, n);
            let f = ci_combine(&pairs, &w).unwrap();
            assert!(min_eigenvalue(&f.p_fus) > 0.0);
            let max_tr = pairs.iter().map(|p| p.p.trace()).fold(0.0, f64::max);
            assert!(f.p_fus.trace() <= max_tr * (1.0 + 1e-12));
        }
    }

    #[test]
    fn permuting_inputs_with_weights_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pairs: Vec<_> = (0..3).map(|_| random_pair(&mut rng)).collect();
        let w = random_weights(&mut rng, 3);
        let perm = [2, 0, 1];
        let pp: Vec<_> = perm.iter().map(|&i| pairs[i]).collect();
        let wp: Vec<_> = perm.iter().map(|&i| w[i]).collect();
        for f in [ci_combine, diffuse_combine_convex] {
            let a = f(&pairs, &w).unwrap();
            let b = f(&pp, &wp).unwrap();
            assert!((a.xhat_fus - b.xhat_fus).norm() < 1e-10 * a.xhat_fus.norm().max(1.0));
            assert!((a.p_fus - b.p_fus).norm() < 1e-10 * a.p_fus.norm());
        }
    }

    #[test]
    fn consensus_identity_weights_leave_pairs_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let infos: Vec<_> = (0..3).map(|_| to_info(&random_pair(&mut rng)).unwrap()).collect();
        let cfg = ConsensusConfig {
            rounds: 1,
            weights: WeightMatrix::identity(3),
        };
        let out = consensus_fuse(&infos, &cfg).unwrap();
        for (a, b) in out.iter().zip(&infos) {
            assert_eq!(a.yhat, b.yhat);
            assert_eq!(a.y, symmetrize(&b.y));
        }
        assert!(consensus_fuse(&infos, &ConsensusConfig { rounds: 0, ..cfg }).is_err());
    }

    #[test]
    fn consensus_converges_to_network_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = Graph::ring(4).unwrap();
        let infos: Vec<_> = (0..4).map(|_| to_info(&random_pair(&mut rng)).unwrap()).collect();
        // Metropolis weights on a regular ring are doubly stochastic, so the
        // fixed point is the plain average.
        let avg_y: StateCov = infos.iter().map(|q| q.y).sum::<StateCov>() / 4.0;
        let avg_v: StateVec = infos.iter().map(|q| q.yhat).sum::<StateVec>() / 4.0;
        let cfg = ConsensusConfig {
            rounds: 200,
            weights: metropolis_weights(&g),
        };
        let out = consensus_fuse(&infos, &cfg).unwrap();
        for q in &out {
            assert!((q.y - avg_y).norm() < 1e-6 * avg_y.norm());
            assert!((q.yhat - avg_v).norm() < 1e-6 * avg_v.norm().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn convex_fixed_point(seed in 0u64..10_000, n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_pair(&mut rng);
            let w = random_weights(&mut rng, n);
            let pairs = vec![a; n];
            for f in [ci_combine, diffuse_combine_convex] {
                let out = f(&pairs, &w).unwrap();
                prop_assert!((out.xhat_fus - a.xhat).norm() <= 1e-8 * a.xhat.norm().max(1.0));
                prop_assert!((out.p_fus - a.p).norm() <= 1e-8 * a.p.norm());
            }
        }
    }
}
