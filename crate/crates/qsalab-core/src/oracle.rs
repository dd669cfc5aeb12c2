//! Brute-force ground truth.
//!
//! Exact partition functions, posterior states, a classical sampling
//! baseline, and the warm-start diagnostic all live here. Every
//! acceptance check routes through this module; nothing here trusts
//! pipeline outputs.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use crate::chain::{chi_square_divergence, classical_mix, total_variation, TransitionMatrix};
use crate::cvec::log_sum_exp;
use crate::error::{Error, Result};
use crate::problem::{Beta, ProblemInstance};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy)]
struct MemoEntry {
    log_z: f64,
    fprime: f64,
}

/// Memoized exact partition values for one instance. Reads are concurrent;
/// first writes are serialized behind the lock and idempotent.
pub struct OracleTable {
    instance: Arc<ProblemInstance>,
    memo: RwLock<BTreeMap<(u8, u64), MemoEntry>>,
}

impl OracleTable {
    pub fn new(instance: Arc<ProblemInstance>) -> Self {
        OracleTable {
            instance,
            memo: RwLock::new(BTreeMap::new()),
        }
    }

    pub fn instance(&self) -> &Arc<ProblemInstance> {
        &self.instance
    }

    fn entry(&self, beta: Beta) -> Result<MemoEntry> {
        let key = beta.key();
        if let Some(e) = self.memo.read().unwrap().get(&key) {
            return Ok(*e);
        }
        let g = self.instance.gibbs(beta)?;
        let fprime = match beta {
            Beta::Finite(b) => self.instance.log_z_derivative(b)?,
            Beta::Infinity => f64::NAN,
        };
        let e = MemoEntry {
            log_z: g.log_z,
            fprime,
        };
        self.memo.write().unwrap().entry(key).or_insert(e);
        Ok(e)
    }

    /// f(beta) = log Z(beta).
    pub fn f(&self, beta: Beta) -> Result<f64> {
        Ok(self.entry(beta)?.log_z)
    }

    /// Exact partition value (Z, log Z), computed by log-sum-exp.
    pub fn exact_partition(&self, beta: Beta) -> Result<(f64, f64)> {
        let log_z = self.f(beta)?;
        Ok((log_z.exp(), log_z))
    }

    /// d/dbeta log Z, computed analytically from the mean energy.
    pub fn fprime(&self, beta: f64) -> Result<f64> {
        Ok(self.entry(Beta::Finite(beta))?.fprime)
    }

    /// Central finite difference of f, kept as a cross-check only.
    pub fn fprime_differenced(&self, beta: f64, step: f64) -> Result<f64> {
        let lo = (beta - step).max(0.0);
        let hi = beta + step;
        Ok((self.f(Beta::Finite(hi))? - self.f(Beta::Finite(lo))?) / (hi - lo))
    }

    /// Squared overlap of the Gibbs qsamples at two temperatures,
    /// Z(mid)^2 / (Z(a) Z(b)), from exact partition values.
    pub fn overlap_sq(&self, a: Beta, b: Beta) -> Result<f64> {
        let mid = match (a, b) {
            (Beta::Finite(x), Beta::Finite(y)) => Beta::Finite(0.5 * (x + y)),
            _ => Beta::Infinity,
        };
        let fm = self.f(mid)?;
        Ok((2.0 * fm - self.f(a)? - self.f(b)?).exp())
    }

    /// Exact Chebyshev ratio Z(2b - a) Z(a) / Z(b)^2 of an ordered pair.
    pub fn chebyshev_ratio(&self, a: Beta, b: Beta) -> Result<f64> {
        match (a, b) {
            (Beta::Finite(x), Beta::Finite(y)) => {
                let far = Beta::Finite(2.0 * y - x);
                Ok((self.f(far)? + self.f(a)? - 2.0 * self.f(b)?).exp())
            }
            // The pair (gamma, inf) degenerates to Z(gamma)/Z(inf).
            (Beta::Finite(_), Beta::Infinity) => {
                Ok((self.f(a)? - self.f(Beta::Infinity)?).exp())
            }
            _ => Err(Error::Domain("chebyshev ratio needs a finite left endpoint".into())),
        }
    }

    /// Exact slow-varying ratio Z(a) Z(b) / Z((a+b)/2)^2.
    pub fn slow_varying_ratio(&self, a: Beta, b: Beta) -> Result<f64> {
        Ok(1.0 / self.overlap_sq(a, b)?)
    }

    /// Exact mean and second moment of W(x) = exp(-s (b - a) H(x)) under
    /// the Gibbs distribution at `a` (s is the instance exponent sign), so
    /// E[W] = Z(b)/Z(a).
    pub fn w_moments(&self, a: f64, b: f64) -> Result<(f64, f64)> {
        let mean = (self.f(Beta::Finite(b))? - self.f(Beta::Finite(a))?).exp();
        let second = (self.f(Beta::Finite(2.0 * b - a))? - self.f(Beta::Finite(a))?).exp();
        Ok((mean, second))
    }

    /// Exact posterior / final Gibbs amplitudes as a probability vector.
    pub fn gibbs_probs(&self, beta: Beta) -> Result<Vec<f64>> {
        Ok(self.instance.gibbs(beta)?.probs)
    }

    /// Locate gamma with f(gamma) = log Z(inf) + 1 by bisection on the
    /// exact profile. Returns None when f(0) is already within one unit
    /// of f(inf), in which case no intermediate annealing is needed.
    pub fn locate_gamma(&self) -> Result<Option<f64>> {
        let f_inf = self.f(Beta::Infinity)?;
        let target = f_inf + 1.0;
        let f0 = self.f(Beta::Finite(0.0))?;
        if f0 <= target + 1e-12 {
            return Ok(None);
        }
        let mut hi = 1.0;
        let mut guard = 0;
        while self.f(Beta::Finite(hi))? > target {
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(Error::GammaLocation(format!(
                    "f does not cross {target} below beta = {hi}"
                )));
            }
        }
        let mut lo = hi / 2.0;
        if hi == 1.0 {
            lo = 0.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.f(Beta::Finite(mid))? > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 * hi.max(1.0) {
                break;
            }
        }
        Ok(Some(0.5 * (lo + hi)))
    }

    /// CSV dump of the memoized profile: beta,logZ,fprime rows sorted by
    /// temperature.
    pub fn dump_csv(&self) -> String {
        let memo = self.memo.read().unwrap();
        let mut out = String::from("beta,log_z,fprime\n");
        for ((tag, bits), e) in memo.iter() {
            let beta = if *tag == 1 {
                "inf".to_string()
            } else {
                format!("{:.16e}", f64::from_bits(*bits))
            };
            let fp = if e.fprime.is_nan() {
                String::new()
            } else {
                format!("{:.16e}", e.fprime)
            };
            out.push_str(&format!("{beta},{:.16e},{fp}\n", e.log_z));
        }
        out
    }
}

/// Partition value by the second, structurally different summation path:
/// group configurations by energy (the coefficient form sum_k a_k e^{-beta k})
/// and add the groups in ascending energy order.
pub fn partition_by_energy_groups(instance: &ProblemInstance, beta: Beta) -> Result<f64> {
    let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for (i, c) in instance.configs().iter().enumerate() {
        let h = instance.energy_recomputed(c);
        groups
            .entry(h.to_bits())
            .or_default()
            .push(instance.log_weight(i));
    }
    let sign = match instance.direction {
        crate::problem::Direction::Forward => 1.0,
        crate::problem::Direction::Reversed { .. } => -1.0,
    };
    let mut terms = Vec::new();
    for (hbits, logws) in groups {
        let h = f64::from_bits(hbits);
        let log_a = log_sum_exp(logws.iter().copied());
        match beta {
            Beta::Finite(b) => terms.push(log_a - sign * b * h),
            Beta::Infinity => {
                if h <= crate::problem::GROUND_TOL {
                    terms.push(log_a);
                }
            }
        }
    }
    if terms.is_empty() {
        return Err(Error::Unsupported("empty ground set".into()));
    }
    Ok(log_sum_exp(terms.iter().copied()))
}

#[derive(Debug, Clone)]
pub struct ClassicalEstimate {
    pub z_hat: f64,
    pub step_means: Vec<f64>,
}

/// Classical baseline: exact Gibbs sampling (inverse CDF on the oracle
/// distribution) of the ratio variable W at each schedule step, telescoped
/// against the known Z at the first temperature.
pub fn classical_svv_estimate(
    oracle: &OracleTable,
    temps: &[Beta],
    samples_per_step: usize,
    stream: &mut Stream,
) -> Result<ClassicalEstimate> {
    if temps.len() < 2 {
        return Err(Error::Domain("schedule needs at least two temperatures".into()));
    }
    let instance = oracle.instance();
    let sign = match instance.direction {
        crate::problem::Direction::Forward => 1.0,
        crate::problem::Direction::Reversed { .. } => -1.0,
    };
    let mut product = oracle.f(temps[0])?.exp();
    let mut step_means = Vec::new();
    for w in temps.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ga = instance.gibbs(a)?;
        let mut cdf = Vec::with_capacity(ga.probs.len());
        let mut acc = 0.0;
        for p in &ga.probs {
            acc += p;
            cdf.push(acc);
        }
        let a_val = a
            .finite()
            .ok_or_else(|| Error::Domain("cannot sample at beta = inf".into()))?;
        let mut total = 0.0;
        for _ in 0..samples_per_step {
            let x = stream.sample_cdf(&cdf);
            let h = instance.energy(x);
            let wv = match b {
                Beta::Finite(bv) => (-sign * (bv - a_val) * h).exp(),
                Beta::Infinity => {
                    if h <= crate::problem::GROUND_TOL {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            total += wv;
        }
        let mean = total / samples_per_step as f64;
        step_means.push(mean);
        product *= mean;
    }
    Ok(ClassicalEstimate {
        z_hat: product,
        step_means,
    })
}

#[derive(Debug, Clone)]
pub struct WarmStartRow {
    pub t: usize,
    pub lhs_tv: f64,
    pub rhs_bound: f64,
    pub holds: bool,
}

/// Evaluate both sides of the warm-start inequality
/// ||nu_t - pi||_TV <= exp(-delta t / 2) ||nu_0/pi - 1||_{2,pi} exactly.
pub fn warm_start_check(
    chain: &TransitionMatrix,
    nu0: &[f64],
    t_list: &[usize],
) -> Vec<WarmStartRow> {
    let pi = &chain.stationary.probs;
    let div = chi_square_divergence(nu0, pi);
    t_list
        .iter()
        .map(|&t| {
            let nut = classical_mix(chain, nu0, t);
            let lhs = total_variation(&nut, pi);
            let rhs = (-chain.gap * t as f64 / 2.0).exp() * div;
            WarmStartRow {
                t,
                lhs_tv: lhs,
                rhs_bound: rhs,
                holds: lhs <= rhs + 1e-12,
            }
        })
        .collect()
}

/// Midpoint convexity defect (f(a)+f(b))/2 - f((a+b)/2), nonnegative for
/// convex f.
pub fn convexity_defect(oracle: &OracleTable, a: f64, b: f64) -> Result<f64> {
    let fm = oracle.f(Beta::Finite(0.5 * (a + b)))?;
    Ok(0.5 * (oracle.f(Beta::Finite(a))? + oracle.f(Beta::Finite(b))?) - fm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::build_chain;
    use crate::problem::bundled;

    fn oracle_for(inst: ProblemInstance) -> OracleTable {
        OracleTable::new(Arc::new(inst))
    }
    use crate::problem::ProblemInstance;

    #[test]
    fn z_at_zero_counts_states() {
        let o = oracle_for(bundled::k3_coloring());
        let (z, _) = o.exact_partition(Beta::Finite(0.0)).unwrap();
        assert!((z - 27.0).abs() < 1e-9);
    }

    #[test]
    fn free_spin_partition_is_two_everywhere() {
        let o = oracle_for(bundled::free_spin());
        for beta in [0.0, 0.5, 3.0] {
            let (z, _) = o.exact_partition(Beta::Finite(beta)).unwrap();
            assert!((z - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn k3_proper_colorings_count_six() {
        let o = oracle_for(bundled::k3_coloring());
        let (z, _) = o.exact_partition(Beta::Infinity).unwrap();
        assert!((z - 6.0).abs() < 1e-9);
    }

    #[test]
    fn p4_proper_colorings_count_24() {
        let o = oracle_for(bundled::p4_coloring());
        let (z, _) = o.exact_partition(Beta::Infinity).unwrap();
        assert!((z - 24.0).abs() < 1e-9);
    }

    #[test]
    fn two_summation_paths_agree() {
        for (_, inst) in bundled::all_set() {
            let inst = Arc::new(inst);
            let o = OracleTable::new(Arc::clone(&inst));
            for beta in [Beta::Finite(0.0), Beta::Finite(0.9), Beta::Finite(2.3)] {
                let a = o.f(beta).unwrap();
                let b = partition_by_energy_groups(&inst, beta).unwrap();
                assert!(
                    (a - b).abs() <= 1e-12 * a.abs().max(1.0),
                    "paths disagree: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn analytic_fprime_matches_finite_difference() {
        for (_, inst) in bundled::all_set() {
            let o = oracle_for(inst);
            for beta in [0.1, 0.8, 1.7] {
                let exact = o.fprime(beta).unwrap();
                let fd = o.fprime_differenced(beta, 1e-5).unwrap();
                assert!(
                    (exact - fd).abs() < 1e-6,
                    "fprime mismatch at {beta}: {exact} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn log_z_profile_is_convex_and_decreasing_for_counting() {
        for (_, inst) in bundled::counting_set() {
            let o = oracle_for(inst);
            let betas: Vec<f64> = (0..20).map(|i| i as f64 * 0.15).collect();
            for w in betas.windows(2) {
                let fa = o.f(Beta::Finite(w[0])).unwrap();
                let fb = o.f(Beta::Finite(w[1])).unwrap();
                assert!(fa >= fb - 1e-12, "log Z increased");
                let defect = convexity_defect(&o, w[0], w[1]).unwrap();
                assert!(defect >= -1e-9, "convexity violated: {defect}");
            }
        }
    }

    #[test]
    fn jensen_bound_for_bayes() {
        let inst = bundled::coin16();
        let expected_l: f64 = (0..inst.size())
            .map(|i| inst.log_weight(i).exp() * inst.energy(i))
            .sum();
        let o = oracle_for(inst);
        let log_inv_z1 = -o.f(Beta::Finite(1.0)).unwrap();
        assert!(log_inv_z1 <= expected_l + 1e-12);
    }

    #[test]
    fn gamma_location_matches_profile() {
        let o = oracle_for(bundled::k3_coloring());
        let gamma = o.locate_gamma().unwrap().expect("nontrivial gamma");
        let target = o.f(Beta::Infinity).unwrap() + 1.0;
        let at_gamma = o.f(Beta::Finite(gamma)).unwrap();
        assert!((at_gamma - target).abs() < 1e-9, "f(gamma) = {at_gamma}");
        // For matchings Z(inf) = 1, so the target reduces to f(gamma) = 1.
        let om = oracle_for(bundled::k3_matching());
        let g0 = om.locate_gamma().unwrap().unwrap();
        assert!((om.f(Beta::Finite(g0)).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn classical_baseline_converges_on_k3() {
        let inst = Arc::new(bundled::k3_coloring());
        let o = OracleTable::new(Arc::clone(&inst));
        let gamma = o.locate_gamma().unwrap().unwrap();
        let temps = vec![
            Beta::Finite(0.0),
            Beta::Finite(gamma / 2.0),
            Beta::Finite(gamma),
            Beta::Infinity,
        ];
        let mut stream = Stream::from_seed(5);
        let est = classical_svv_estimate(&o, &temps, 100_000, &mut stream).unwrap();
        assert!(
            (est.z_hat - 6.0).abs() / 6.0 < 0.02,
            "classical estimate {} off from 6",
            est.z_hat
        );
    }

    #[test]
    fn classical_baseline_single_pair_identical_temps_is_exact() {
        let inst = Arc::new(bundled::k3_coloring());
        let o = OracleTable::new(Arc::clone(&inst));
        let temps = vec![Beta::Finite(0.4), Beta::Finite(0.4)];
        let mut stream = Stream::from_seed(1);
        let est = classical_svv_estimate(&o, &temps, 10, &mut stream).unwrap();
        let (z, _) = o.exact_partition(Beta::Finite(0.4)).unwrap();
        assert!((est.z_hat - z).abs() < 1e-9);
    }

    #[test]
    fn chebyshev_certified_pairs_bound_w_variance() {
        let inst = Arc::new(bundled::k3_coloring());
        let o = OracleTable::new(Arc::clone(&inst));
        let b = std::f64::consts::E.powi(2);
        for (lo, hi) in [(0.0, 0.2), (0.1, 0.35), (0.5, 0.65)] {
            let cheb = o
                .chebyshev_ratio(Beta::Finite(lo), Beta::Finite(hi))
                .unwrap();
            if cheb <= b {
                let (mean, second) = o.w_moments(lo, hi).unwrap();
                let var = second - mean * mean;
                assert!(var <= (b - 1.0) * mean * mean + 1e-12);
            }
        }
    }

    #[test]
    fn warm_start_point_mass_rhs_at_t0() {
        let inst = Arc::new(bundled::ising_cycle4());
        let chain = build_chain(&inst, 0.8).unwrap();
        let mut nu0 = vec![0.0; chain.size()];
        nu0[0] = 1.0;
        let rows = warm_start_check(&chain, &nu0, &[0]);
        // At t = 0 the bound is the chi-square divergence itself,
        // sqrt(1/pi(x0) - 1) for a point mass.
        let pi0 = chain.stationary.probs[0];
        let expected = (1.0 / pi0 - 1.0).sqrt();
        assert!((rows[0].rhs_bound - expected).abs() < 1e-10);
        assert!(rows[0].holds);
    }

    #[test]
    fn warm_start_stationary_start_has_zero_lhs() {
        let inst = Arc::new(bundled::k3_matching());
        let chain = build_chain(&inst, 0.5).unwrap();
        let rows = warm_start_check(&chain, &chain.stationary.probs.clone(), &[1, 5, 25]);
        for r in rows {
            assert!(r.lhs_tv < 1e-12);
            assert!(r.holds);
        }
    }
}
