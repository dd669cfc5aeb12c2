//! Reversible Markov chains with Gibbs stationary distributions.
//!
//! One chain family covers all five model kinds: pick a coordinate
//! uniformly, propose a symmetric single-coordinate move, accept with the
//! Metropolis ratio of Gibbs weights, then mix with 1/2 holding
//! probability. Laziness makes the spectrum nonnegative, so the spectral
//! gap quoted as `gap` is 1 minus the second largest eigenvalue modulus.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{proposal_moves, Beta, GibbsDistribution, ProblemInstance};

/// Entries below this are treated as exact zeros of the stationary law.
const PROB_FLOOR: f64 = 0.0;

#[derive(Debug, Clone)]
pub struct ChainEigen {
    /// Eigenvalues of the symmetrized transition matrix, sorted
    /// descending. The first is 1 with eigenvector sqrt(pi).
    pub values: Vec<f64>,
    /// Matching orthonormal eigenvectors as matrix columns.
    pub vectors: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    pub beta: f64,
    pub probs: DMatrix<f64>,
    pub stationary: GibbsDistribution,
    pub gap: f64,
    pub eigen: Arc<ChainEigen>,
    pub instance: Option<Arc<ProblemInstance>>,
}

/// Diagnostic JSON dump; the matrix is omitted above a size threshold.
#[derive(Debug, Serialize)]
pub struct ChainDump {
    pub beta: f64,
    pub size: usize,
    pub gap: f64,
    pub stationary: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

impl TransitionMatrix {
    pub fn size(&self) -> usize {
        self.probs.nrows()
    }

    pub fn dump(&self, matrix_threshold: usize) -> ChainDump {
        let n = self.size();
        let matrix = (n <= matrix_threshold).then(|| {
            (0..n)
                .map(|i| (0..n).map(|j| self.probs[(i, j)]).collect())
                .collect()
        });
        ChainDump {
            beta: self.beta,
            size: n,
            gap: self.gap,
            stationary: self.stationary.probs.clone(),
            matrix,
        }
    }

    /// Build a chain from a raw row-stochastic matrix; the stationary
    /// distribution is solved for, and reversibility is checked.
    pub fn from_raw(probs: DMatrix<f64>, beta: f64) -> Result<Self> {
        let n = probs.nrows();
        if probs.ncols() != n || n == 0 {
            return Err(Error::Contract("matrix must be square and nonempty".into()));
        }
        for i in 0..n {
            let row: f64 = (0..n).map(|j| probs[(i, j)]).sum();
            if (row - 1.0).abs() > 1e-12 {
                return Err(Error::Contract(format!("row {i} sums to {row}")));
            }
        }
        // Solve pi P = pi, sum pi = 1 via the bordered linear system
        // (P^T - I + 1 1^T) x = 1.
        let mut a = probs.transpose() - DMatrix::identity(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] += 1.0;
            }
        }
        let rhs = DVector::from_element(n, 1.0);
        let pi = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Contract("stationary solve failed".into()))?;
        let total: f64 = pi.iter().sum();
        let probs_vec: Vec<f64> = pi.iter().map(|p| p / total).collect();
        check_detailed_balance(&probs, &probs_vec, 1e-12)?;
        let stationary = GibbsDistribution {
            beta: Beta::Finite(beta),
            probs: probs_vec,
            log_z: 0.0,
        };
        finish_chain(probs, stationary, beta, None)
    }
}

fn check_detailed_balance(p: &DMatrix<f64>, pi: &[f64], tol: f64) -> Result<()> {
    let n = p.nrows();
    for x in 0..n {
        for y in 0..n {
            let lhs = pi[x] * p[(x, y)];
            let rhs = pi[y] * p[(y, x)];
            if (lhs - rhs).abs() > tol {
                return Err(Error::Contract(format!(
                    "detailed balance violated at ({x},{y}): {lhs} vs {rhs}"
                )));
            }
        }
    }
    Ok(())
}

fn finish_chain(
    probs: DMatrix<f64>,
    stationary: GibbsDistribution,
    beta: f64,
    instance: Option<Arc<ProblemInstance>>,
) -> Result<TransitionMatrix> {
    let eigen = symmetrized_eigen(&probs, &stationary.probs)?;
    let gap = gap_from_spectrum(&eigen.values);
    Ok(TransitionMatrix {
        beta,
        probs,
        stationary,
        gap,
        eigen: Arc::new(eigen),
        instance,
    })
}

/// Lazy single-coordinate Metropolis chain reversible with respect to
/// gibbs(instance, beta).
pub fn build_chain(instance: &Arc<ProblemInstance>, beta: f64) -> Result<TransitionMatrix> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::Domain(format!("beta must be finite >= 0, got {beta}")));
    }
    let stationary = instance.gibbs(Beta::Finite(beta))?;
    let n = instance.size();
    let mut p = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        let (den, targets) = proposal_moves(instance, x);
        let prop = 1.0 / den as f64;
        let mut leave = 0.0;
        for &y in &targets {
            // Acceptance from the ratio of unnormalized Gibbs weights,
            // evaluated in log space.
            let log_ratio = (stationary.probs[y].max(PROB_FLOOR)).ln()
                - (stationary.probs[x].max(PROB_FLOOR)).ln();
            let accept = log_ratio.min(0.0).exp();
            // Laziness folds in here: half the move probability.
            let q = 0.5 * prop * accept;
            p[(x, y)] += q;
            leave += q;
        }
        p[(x, x)] = 1.0 - leave;
    }
    finish_chain(p, stationary, beta, Some(Arc::clone(instance)))
}

/// Eigendecomposition of D = diag(sqrt(pi)) P diag(1/sqrt(pi)). The
/// matrix is symmetric for reversible chains; it is symmetrized exactly
/// before the solve so roundoff cannot leak into complex arithmetic.
fn symmetrized_eigen(p: &DMatrix<f64>, pi: &[f64]) -> Result<ChainEigen> {
    let n = p.nrows();
    let sqrt_pi: Vec<f64> = pi.iter().map(|x| x.max(0.0).sqrt()).collect();
    let mut d = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            if sqrt_pi[y] > 0.0 {
                d[(x, y)] = sqrt_pi[x] * p[(x, y)] / sqrt_pi[y];
            }
        }
    }
    let sym = (&d + d.transpose()) * 0.5;
    let max_asym = (&d - d.transpose()).abs().max();
    if max_asym > 1e-8 {
        return Err(Error::Contract(format!(
            "chain is not reversible: symmetrization residual {max_asym:.3e}"
        )));
    }
    let se = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &se.eigenvectors.column(i));
    }
    // Fix the sign of the top eigenvector to align with sqrt(pi).
    let align: f64 = (0..n).map(|x| vectors[(x, 0)] * sqrt_pi[x]).sum();
    if align < 0.0 {
        for x in 0..n {
            vectors[(x, 0)] = -vectors[(x, 0)];
        }
    }
    Ok(ChainEigen { values, vectors })
}

fn gap_from_spectrum(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 1.0;
    }
    let slem = values[1..]
        .iter()
        .map(|v| v.abs())
        .fold(0.0f64, f64::max);
    (1.0 - slem).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Spectral gap of a reversible chain: 1 minus the second largest
/// eigenvalue modulus of the symmetrized matrix.
pub fn spectral_gap(chain: &TransitionMatrix) -> f64 {
    chain.gap
}

/// Exact classical mixing: nu_t = nu_0 P^t by repeated vector-matrix
/// application.
pub fn classical_mix(chain: &TransitionMatrix, nu0: &[f64], t: usize) -> Vec<f64> {
    let n = chain.size();
    assert_eq!(nu0.len(), n);
    let mut nu = nu0.to_vec();
    for _ in 0..t {
        let mut next = vec![0.0; n];
        for x in 0..n {
            let w = nu[x];
            if w == 0.0 {
                continue;
            }
            for y in 0..n {
                next[y] += w * chain.probs[(x, y)];
            }
        }
        nu = next;
    }
    nu
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// L2(pi) norm of nu/pi - 1, the warm-start divergence.
pub fn chi_square_divergence(nu: &[f64], pi: &[f64]) -> f64 {
    nu.iter()
        .zip(pi)
        .map(|(n, p)| {
            if *p > 0.0 {
                p * (n / p - 1.0).powi(2)
            } else {
                0.0
            }
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::bundled;

    fn arc(i: ProblemInstance) -> Arc<ProblemInstance> {
        Arc::new(i)
    }
    use crate::problem::ProblemInstance;

    #[test]
    fn two_state_flat_chain_has_gap_one() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let chain = TransitionMatrix::from_raw(p, 0.0).unwrap();
        assert!((spectral_gap(&chain) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lazy_two_state_chain_has_gap_half() {
        let p = DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.25, 0.75]);
        let chain = TransitionMatrix::from_raw(p, 0.0).unwrap();
        assert!((spectral_gap(&chain) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_reversible_chain_is_rejected() {
        let p = DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
        );
        assert!(TransitionMatrix::from_raw(p, 0.0).is_err());
    }

    #[test]
    fn rows_sum_to_one_and_entries_nonnegative() {
        for (_, inst) in bundled::all_set() {
            let inst = arc(inst);
            for beta in [0.0, 0.7] {
                let chain = build_chain(&inst, beta).unwrap();
                let n = chain.size();
                for x in 0..n {
                    let mut row = 0.0;
                    for y in 0..n {
                        assert!(chain.probs[(x, y)] >= 0.0);
                        row += chain.probs[(x, y)];
                    }
                    assert!((row - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn beta_zero_is_uniform_stationary() {
        let inst = arc(bundled::k3_coloring());
        let chain = build_chain(&inst, 0.0).unwrap();
        for &p in &chain.stationary.probs {
            assert!((p - 1.0 / 27.0).abs() < 1e-14);
        }
    }

    #[test]
    fn detailed_balance_is_machine_exact_on_ising() {
        let inst = arc(bundled::ising_cycle4());
        let chain = build_chain(&inst, 1.3).unwrap();
        let n = chain.size();
        let pi = &chain.stationary.probs;
        let mut max_residual = 0.0f64;
        for x in 0..n {
            for y in 0..n {
                let r = (pi[x] * chain.probs[(x, y)] - pi[y] * chain.probs[(y, x)]).abs();
                max_residual = max_residual.max(r);
            }
        }
        assert!(max_residual < 1e-12, "residual {max_residual:.3e}");
    }

    #[test]
    fn stationarity_under_one_step() {
        for (_, inst) in bundled::all_set() {
            let inst = arc(inst);
            let chain = build_chain(&inst, 0.9).unwrap();
            let next = classical_mix(&chain, &chain.stationary.probs, 1);
            let err: f64 = next
                .iter()
                .zip(&chain.stationary.probs)
                .map(|(a, b)| (a - b).abs())
                .sum();
            assert!(err < 1e-10, "stationarity residual {err:.3e}");
        }
    }

    #[test]
    fn symmetrized_spectrum_in_unit_interval_with_top_eigvec_sqrt_pi() {
        let inst = arc(bundled::k3_coloring());
        let chain = build_chain(&inst, 1.0).unwrap();
        let eig = &chain.eigen;
        assert!((eig.values[0] - 1.0).abs() < 1e-10);
        for &v in &eig.values {
            assert!((-1.0 - 1e-10..=1.0 + 1e-10).contains(&v));
        }
        for (x, &p) in chain.stationary.probs.iter().enumerate() {
            assert!((eig.vectors[(x, 0)] - p.sqrt()).abs() < 1e-8);
        }
    }

    #[test]
    fn k3_beta_zero_gap_regression() {
        // Frozen from the dense symmetric eigensolve of the 27x27
        // discriminant; the lazy uniform-proposal recoloring chain on the
        // triangle relaxes one vertex at a time.
        let inst = arc(bundled::k3_coloring());
        let chain = build_chain(&inst, 0.0).unwrap();
        let expected = 0.25;
        assert!(
            (spectral_gap(&chain) - expected).abs() < 1e-10,
            "gap {} vs frozen {expected}",
            spectral_gap(&chain)
        );
    }

    #[test]
    fn classical_mix_t0_is_identity_and_stationary_is_fixed() {
        let inst = arc(bundled::ising_cycle4());
        let chain = build_chain(&inst, 0.4).unwrap();
        let nu0 = {
            let mut v = vec![0.0; chain.size()];
            v[3] = 1.0;
            v
        };
        assert_eq!(classical_mix(&chain, &nu0, 0), nu0);
        let pi = chain.stationary.probs.clone();
        let after = classical_mix(&chain, &pi, 7);
        for (a, b) in after.iter().zip(&pi) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn warm_start_bound_on_random_starts() {
        let inst = arc(bundled::ising_cycle4());
        let chain = build_chain(&inst, 1.3).unwrap();
        let mut stream = crate::rng::Stream::from_seed(11);
        for t in [1usize, 5, 25] {
            for _ in 0..4 {
                let mut nu0: Vec<f64> = (0..chain.size()).map(|_| stream.uniform()).collect();
                let total: f64 = nu0.iter().sum();
                nu0.iter_mut().for_each(|x| *x /= total);
                let nut = classical_mix(&chain, &nu0, t);
                let lhs = total_variation(&nut, &chain.stationary.probs);
                let rhs = (-(chain.gap) * t as f64 / 2.0).exp()
                    * chi_square_divergence(&nu0, &chain.stationary.probs);
                assert!(lhs <= rhs + 1e-12, "t={t}: {lhs} > {rhs}");
            }
        }
    }
}
