//! Szegedy walk on the edge space, qsamples, and reflections about them.
//!
//! The walk unitary is W = S (2AA^T - I): reflect about the span of the
//! update isometry A|x> = |x>|p_x>, then swap the two registers. Its
//! nontrivial eigenphases are +/- arccos of the discriminant eigenvalues,
//! the stationary edge state A|sqrt(pi)> is fixed, and the phase gap
//! dominates sqrt(2 delta) for a chain with spectral gap delta.
//!
//! Approximate reflections reproduce the error model of k-bit
//! phase-estimation rounding: each non-stationary eigenvector picks up a
//! phase defect whose magnitude is 2^{1-k} scaled by the probability
//! amplitude that phase estimation with 2^k grid points rounds the
//! eigenphase to zero. The defect never exceeds 2^{1-k}, which is the
//! orthocomplement error bound asserted by the acceptance suite.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::chain::TransitionMatrix;
use crate::cvec;
use crate::error::{Error, Result};
use crate::ledger::{reflection_walk_cost, CostLedger};
use crate::problem::{GibbsDistribution, DEFAULT_ENUM_CAP};

/// Cap on edge-space vector entries, |Omega|^2.
pub const EDGE_ENTRY_CAP: usize = DEFAULT_ENUM_CAP * DEFAULT_ENUM_CAP;

/// Eigenvalues this close to 1 belong to the stationary block.
const STATIONARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateSpace {
    /// Site register over Omega.
    Site { n: usize },
    /// Edge register over Omega x Omega, index x*n + y.
    Edge { n: usize },
    /// Site register with one ancilla qubit, index 2x + a.
    SiteAncilla { n: usize },
    /// Edge register with one ancilla qubit.
    EdgeAncilla { n: usize },
}

impl StateSpace {
    pub fn dim(self) -> usize {
        match self {
            StateSpace::Site { n } => n,
            StateSpace::Edge { n } => n * n,
            StateSpace::SiteAncilla { n } => 2 * n,
            StateSpace::EdgeAncilla { n } => 2 * n * n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuantumState {
    pub amps: Vec<Complex64>,
    pub space: StateSpace,
}

impl QuantumState {
    pub fn new(amps: Vec<Complex64>, space: StateSpace) -> Self {
        debug_assert_eq!(amps.len(), space.dim());
        QuantumState { amps, space }
    }

    pub fn zero(space: StateSpace) -> Self {
        QuantumState {
            amps: vec![Complex64::ZERO; space.dim()],
            space,
        }
    }

    pub fn norm(&self) -> f64 {
        cvec::norm(&self.amps)
    }

    pub fn inner(&self, other: &QuantumState) -> Complex64 {
        debug_assert_eq!(self.space, other.space);
        cvec::dot(&self.amps, &other.amps)
    }

    /// Squared overlap |<self|other>|^2.
    pub fn fidelity(&self, other: &QuantumState) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn normalize(&mut self) -> f64 {
        cvec::normalize(&mut self.amps)
    }
}

/// Coherent encoding of a probability distribution on the site space.
pub fn qsample(dist: &GibbsDistribution) -> QuantumState {
    qsample_from_probs(&dist.probs)
}

pub fn qsample_from_probs(probs: &[f64]) -> QuantumState {
    let amps = probs
        .iter()
        .map(|&p| Complex64::new(p.max(0.0).sqrt(), 0.0))
        .collect();
    QuantumState::new(
        amps,
        StateSpace::Site { n: probs.len() },
    )
}

#[derive(Debug, Clone)]
pub struct WalkOperator {
    pub chain: Arc<TransitionMatrix>,
    /// Entrywise square root of the transition matrix.
    sqrt_p: DMatrix<f64>,
    /// Per eigen-column phase theta_j = arccos(lambda_j); zero on the
    /// stationary block.
    pub thetas: Vec<f64>,
    pub phase_gap: f64,
    pub stationary_edge: QuantumState,
    pub stationary_site: QuantumState,
}

/// Lift a site state through the update isometry of a chain:
/// sum a_x |x>  ->  sum a_x |x>|p_x>.
pub fn lift_to_edge(state: &QuantumState, chain: &TransitionMatrix) -> QuantumState {
    let n = chain.size();
    debug_assert_eq!(state.space, StateSpace::Site { n });
    let mut amps = vec![Complex64::ZERO; n * n];
    for x in 0..n {
        let ax = state.amps[x];
        if ax == Complex64::ZERO {
            continue;
        }
        for y in 0..n {
            let p = chain.probs[(x, y)];
            if p > 0.0 {
                amps[x * n + y] = ax * p.sqrt();
            }
        }
    }
    QuantumState::new(amps, StateSpace::Edge { n })
}

/// Adjoint of the lift followed by renormalization. Returns the site
/// state together with the norm of the component outside the lifted
/// subspace; callers decide whether a residual above tolerance is an
/// error.
pub fn project_to_site(state: &QuantumState, chain: &TransitionMatrix) -> (QuantumState, f64) {
    let n = chain.size();
    debug_assert_eq!(state.space, StateSpace::Edge { n });
    let mut site = vec![Complex64::ZERO; n];
    for x in 0..n {
        let mut acc = Complex64::ZERO;
        for y in 0..n {
            let p = chain.probs[(x, y)];
            if p > 0.0 {
                acc += state.amps[x * n + y] * p.sqrt();
            }
        }
        site[x] = acc;
    }
    let inside: f64 = site.iter().map(|c| c.norm_sqr()).sum();
    let total = state.norm().powi(2);
    let residual = (total - inside).max(0.0).sqrt();
    let mut out = QuantumState::new(site, StateSpace::Site { n });
    out.normalize();
    (out, residual)
}

/// Swap the two edge registers in place.
fn swap_edge(amps: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; n * n];
    for x in 0..n {
        for y in 0..n {
            out[y * n + x] = amps[x * n + y];
        }
    }
    out
}

pub fn build_walk(chain: &Arc<TransitionMatrix>) -> Result<WalkOperator> {
    build_walk_with_cap(chain, EDGE_ENTRY_CAP)
}

pub fn build_walk_with_cap(chain: &Arc<TransitionMatrix>, cap: usize) -> Result<WalkOperator> {
    let n = chain.size();
    if n.saturating_mul(n) > cap {
        return Err(Error::Capacity(format!(
            "edge space has {} entries, cap is {cap}",
            n * n
        )));
    }
    let mut sqrt_p = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            sqrt_p[(x, y)] = chain.probs[(x, y)].max(0.0).sqrt();
        }
    }
    let thetas: Vec<f64> = chain
        .eigen
        .values
        .iter()
        .map(|&l| {
            if l >= 1.0 - STATIONARY_TOL {
                0.0
            } else {
                l.clamp(-1.0, 1.0).acos()
            }
        })
        .collect();
    let mut phase_gap = if n * n > 2 * n { std::f64::consts::PI } else { f64::INFINITY };
    for &t in &thetas {
        if t > 0.0 {
            phase_gap = phase_gap.min(t);
        }
    }
    if !phase_gap.is_finite() {
        phase_gap = std::f64::consts::PI;
    }
    let stationary_site = qsample(&chain.stationary);
    let mut edge_amps = vec![Complex64::ZERO; n * n];
    for x in 0..n {
        for y in 0..n {
            edge_amps[x * n + y] = stationary_site.amps[x] * sqrt_p[(x, y)];
        }
    }
    let stationary_edge = QuantumState::new(edge_amps, StateSpace::Edge { n });
    Ok(WalkOperator {
        chain: Arc::clone(chain),
        sqrt_p,
        thetas,
        phase_gap,
        stationary_edge,
        stationary_site,
    })
}

impl WalkOperator {
    pub fn size(&self) -> usize {
        self.chain.size()
    }

    /// A^T applied to an edge state: (A^T phi)(x) = sum_y sqrt(P(x,y)) phi(x,y).
    fn a_adjoint(&self, amps: &[Complex64]) -> Vec<Complex64> {
        let n = self.size();
        (0..n)
            .map(|x| {
                let mut acc = Complex64::ZERO;
                for y in 0..n {
                    let s = self.sqrt_p[(x, y)];
                    if s > 0.0 {
                        acc += amps[x * n + y] * s;
                    }
                }
                acc
            })
            .collect()
    }

    fn a_apply(&self, site: &[Complex64]) -> Vec<Complex64> {
        let n = self.size();
        let mut out = vec![Complex64::ZERO; n * n];
        for x in 0..n {
            if site[x] == Complex64::ZERO {
                continue;
            }
            for y in 0..n {
                let s = self.sqrt_p[(x, y)];
                if s > 0.0 {
                    out[x * n + y] = site[x] * s;
                }
            }
        }
        out
    }

    /// One walk step W = S (2AA^T - I) applied to an edge state.
    pub fn apply(&self, state: &QuantumState) -> QuantumState {
        let n = self.size();
        debug_assert_eq!(state.space, StateSpace::Edge { n });
        let proj = self.a_adjoint(&state.amps);
        let mut reflected = self.a_apply(&proj);
        for (r, s) in reflected.iter_mut().zip(&state.amps) {
            *r = *r + *r - s;
        }
        QuantumState::new(swap_edge(&reflected, n), StateSpace::Edge { n })
    }

    /// Dense matrix of the walk, for small instances and tests.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.size();
        let dim = n * n;
        if dim > 8192 {
            return Err(Error::Capacity(format!(
                "dense walk matrix would be {dim}x{dim}"
            )));
        }
        // 2AA^T - I, then row-permute by the swap.
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        for x in 0..n {
            for y in 0..n {
                for y2 in 0..n {
                    m[(x * n + y, x * n + y2)] = 2.0 * self.sqrt_p[(x, y)] * self.sqrt_p[(x, y2)];
                }
                m[(x * n + y, x * n + y)] -= 1.0;
            }
        }
        let mut swapped = DMatrix::<f64>::zeros(dim, dim);
        for x in 0..n {
            for y in 0..n {
                swapped.set_row(y * n + x, &m.row(x * n + y));
            }
        }
        Ok(swapped)
    }

    /// Eigenvector of the walk for eigenphase sign * theta_j, valid for
    /// non-stationary columns: (A v_j - e^{+/- i theta} S A v_j) / (sqrt(2) sin theta).
    pub fn eigenvector(&self, j: usize, positive: bool) -> QuantumState {
        let n = self.size();
        let theta = self.thetas[j];
        assert!(theta > 0.0, "stationary block has no rotation pair");
        let v: Vec<f64> = (0..n).map(|x| self.chain.eigen.vectors[(x, j)]).collect();
        let vc: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let av = self.a_apply(&vc);
        let sav = swap_edge(&av, n);
        let phase = Complex64::from_polar(1.0, if positive { theta } else { -theta });
        let scale = 1.0 / (std::f64::consts::SQRT_2 * theta.sin());
        let amps: Vec<Complex64> = av
            .iter()
            .zip(&sav)
            .map(|(a, s)| (a - phase * s) * scale)
            .collect();
        QuantumState::new(amps, StateSpace::Edge { n })
    }

    /// Histogram of eigenphases over the full edge space: the rotation
    /// pairs, the stationary phase, and the two swap sectors of the
    /// orthogonal complement.
    pub fn eigenphase_histogram(&self) -> Vec<(f64, usize)> {
        let n = self.size();
        let mut hist: Vec<(f64, usize)> = Vec::new();
        let mut push = |phase: f64, count: usize| {
            if count == 0 {
                return;
            }
            for item in hist.iter_mut() {
                if (item.0 - phase).abs() < 1e-12 {
                    item.1 += count;
                    return;
                }
            }
            hist.push((phase, count));
        };
        let mut stationary = 0usize;
        let mut paired = 0usize;
        for &t in &self.thetas {
            if t == 0.0 {
                stationary += 1;
            } else {
                paired += 1;
                push(t, 1);
                push(-t, 1);
            }
        }
        push(0.0, stationary);
        // Complement of span{A, SA}: swap-symmetric vectors sit at phase
        // pi, antisymmetric at phase 0.
        let span_dim = stationary + 2 * paired;
        let complement = n * n - span_dim;
        let sym_total = n * (n + 1) / 2;
        // The span contains one symmetric combination Av + SAv per
        // rotation pair plus the stationary vectors (symmetric by
        // detailed balance); everything else symmetric sits at phase pi.
        let sym_in_span = stationary + paired;
        let sym_comp = sym_total - sym_in_span;
        let antisym_comp = complement - sym_comp;
        push(std::f64::consts::PI, sym_comp);
        push(0.0, antisym_comp);
        hist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        hist
    }

    /// CSV rows (phase, multiplicity).
    pub fn eigenphase_csv(&self) -> String {
        let mut out = String::from("phase,multiplicity\n");
        for (phase, count) in self.eigenphase_histogram() {
            out.push_str(&format!("{phase:.16e},{count}\n"));
        }
        out
    }
}

/// Amplitude with which k-bit phase estimation (2^k grid points) rounds
/// eigenphase `theta` to zero; equals 1 at theta = 0 and vanishes on
/// exactly representable phases.
pub fn pe_zero_weight(theta: f64, k: u32) -> f64 {
    let m = (1u64 << k) as f64;
    let half = 0.5 * theta;
    if half.sin().abs() < 1e-300 {
        return 1.0;
    }
    ((m * half).sin() / (m * half.sin())).abs().min(1.0)
}

/// Phase defect applied to a non-stationary eigenvector by the k-bit
/// approximate reflection; the resulting error |1 - e^{i eps}| equals
/// 2^{1-k} * pe_zero_weight(theta, k) <= 2^{1-k}.
pub fn reflection_error_phase(theta: f64, k: u32) -> f64 {
    let w = pe_zero_weight(theta, k);
    2.0 * (w * 0.5f64.powi(k as i32)).min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReflectionMode {
    Exact,
    Approximate { k: u32 },
}

#[derive(Debug, Clone)]
enum ReflectionKind {
    /// 2|t><t| - I about an explicit ray.
    ExactRay { target: QuantumState },
    /// 2P - I for the projector onto ancilla |1> of a SiteAncilla space.
    ExactAncillaOne,
    /// Site-space error model in the discriminant eigenbasis.
    ApproxSite {
        walk: Arc<WalkOperator>,
        err_phases: Vec<f64>,
    },
    /// Edge-space error model over the walk eigenstructure.
    ApproxEdge {
        walk: Arc<WalkOperator>,
        err_phases: Vec<f64>,
        err_phase_zero: f64,
        err_phase_pi: f64,
    },
}

/// Reflection about a qsample (exact or k-bit approximate).
#[derive(Debug, Clone)]
pub struct ReflectionOperator {
    kind: ReflectionKind,
    pub mode: ReflectionMode,
    /// Walk steps charged to the ledger per use.
    pub walk_cost: u128,
}

impl ReflectionOperator {
    /// Exact reflection about an arbitrary state, with unit walk cost.
    pub fn exact_about(target: QuantumState) -> Self {
        ReflectionOperator {
            kind: ReflectionKind::ExactRay { target },
            mode: ReflectionMode::Exact,
            walk_cost: 1,
        }
    }

    pub fn exact_about_with_cost(target: QuantumState, walk_cost: u128) -> Self {
        ReflectionOperator {
            kind: ReflectionKind::ExactRay { target },
            mode: ReflectionMode::Exact,
            walk_cost,
        }
    }

    /// Reflection 2P - I about the ancilla-one subspace; not walk-backed,
    /// accounted as a single oracle query with no walk steps.
    pub fn exact_ancilla_one() -> Self {
        ReflectionOperator {
            kind: ReflectionKind::ExactAncillaOne,
            mode: ReflectionMode::Exact,
            walk_cost: 0,
        }
    }

    pub fn target(&self) -> Option<&QuantumState> {
        match &self.kind {
            ReflectionKind::ExactRay { target } => Some(target),
            ReflectionKind::ApproxSite { walk, .. } => Some(&walk.stationary_site),
            ReflectionKind::ApproxEdge { walk, .. } => Some(&walk.stationary_edge),
            ReflectionKind::ExactAncillaOne => None,
        }
    }

    pub fn apply(&self, state: &QuantumState, ledger: &mut CostLedger) -> QuantumState {
        ledger.charge_reflection(self.walk_cost);
        self.apply_uncharged(state)
    }

    pub fn apply_uncharged(&self, state: &QuantumState) -> QuantumState {
        match &self.kind {
            ReflectionKind::ExactRay { target } => {
                debug_assert_eq!(state.space, target.space);
                let c = target.inner(state) * 2.0;
                let mut out = state.amps.iter().map(|a| -a).collect::<Vec<_>>();
                cvec::axpy(&mut out, c, &target.amps);
                QuantumState::new(out, state.space)
            }
            ReflectionKind::ExactAncillaOne => {
                let mut amps = state.amps.clone();
                for (i, a) in amps.iter_mut().enumerate() {
                    if i % 2 == 0 {
                        *a = -*a;
                    }
                }
                QuantumState::new(amps, state.space)
            }
            ReflectionKind::ApproxSite { walk, err_phases } => {
                let n = walk.size();
                debug_assert_eq!(state.space, StateSpace::Site { n });
                let mut out = vec![Complex64::ZERO; n];
                for j in 0..n {
                    let col: Vec<f64> = (0..n).map(|x| walk.chain.eigen.vectors[(x, j)]).collect();
                    let c = cvec::dot_real_left(&col, &state.amps);
                    let coef = if j == 0 {
                        Complex64::ONE
                    } else {
                        -Complex64::from_polar(1.0, err_phases[j])
                    };
                    cvec::axpy_real(&mut out, coef * c, &col);
                }
                QuantumState::new(out, state.space)
            }
            ReflectionKind::ApproxEdge {
                walk,
                err_phases,
                err_phase_zero,
                err_phase_pi,
            } => apply_approx_edge(walk, err_phases, *err_phase_zero, *err_phase_pi, state),
        }
    }

    /// Upper bound on ||(R + I) Psi|| over unit Psi orthogonal to the
    /// target, from the error model itself.
    pub fn orthocomplement_error_bound(&self) -> f64 {
        match &self.kind {
            ReflectionKind::ExactRay { .. } | ReflectionKind::ExactAncillaOne => 0.0,
            ReflectionKind::ApproxSite { err_phases, .. } => err_phases
                .iter()
                .skip(1)
                .map(|e| 2.0 * (0.5 * e).sin().abs())
                .fold(0.0, f64::max),
            ReflectionKind::ApproxEdge {
                err_phases,
                err_phase_zero,
                err_phase_pi,
                ..
            } => err_phases
                .iter()
                .skip(1)
                .chain([err_phase_zero, err_phase_pi])
                .map(|e| 2.0 * (0.5 * e).sin().abs())
                .fold(0.0, f64::max),
        }
    }
}

fn apply_approx_edge(
    walk: &WalkOperator,
    err_phases: &[f64],
    err_phase_zero: f64,
    err_phase_pi: f64,
    state: &QuantumState,
) -> QuantumState {
    let n = walk.size();
    debug_assert_eq!(state.space, StateSpace::Edge { n });
    let mut out = vec![Complex64::ZERO; n * n];
    let mut remainder = state.amps.clone();
    for j in 0..n {
        let col: Vec<Complex64> = (0..n)
            .map(|x| Complex64::new(walk.chain.eigen.vectors[(x, j)], 0.0))
            .collect();
        let av = walk.a_apply(&col);
        let theta = walk.thetas[j];
        if theta == 0.0 {
            let c = cvec::dot(&av, &state.amps);
            let coef = if j == 0 {
                Complex64::ONE
            } else {
                -Complex64::from_polar(1.0, err_phase_zero)
            };
            cvec::axpy(&mut out, coef * c, &av);
            cvec::axpy(&mut remainder, -c, &av);
        } else {
            let sav = swap_edge(&av, n);
            let scale = 1.0 / (std::f64::consts::SQRT_2 * theta.sin());
            let phase_p = Complex64::from_polar(1.0, theta);
            let phase_m = phase_p.conj();
            // u_+/- = (Av - e^{+/- i theta} S Av) * scale
            let a_amp = cvec::dot(&av, &state.amps);
            let b_amp = cvec::dot(&sav, &state.amps);
            let c_plus = (a_amp - phase_m * b_amp) * scale;
            let c_minus = (a_amp - phase_p * b_amp) * scale;
            let coef_plus = -Complex64::from_polar(1.0, err_phases[j]);
            let coef_minus = -Complex64::from_polar(1.0, -err_phases[j]);
            // Accumulate coef * c * u in one pass over both basis vectors.
            let wp = coef_plus * c_plus * scale;
            let wm = coef_minus * c_minus * scale;
            let rp = c_plus * scale;
            let rm = c_minus * scale;
            for idx in 0..n * n {
                let a = av[idx];
                let s = sav[idx];
                let up = a - phase_p * s;
                let um = a - phase_m * s;
                out[idx] += wp * up + wm * um;
                remainder[idx] -= rp * up + rm * um;
            }
        }
    }
    // Complement of span{A, SA}: the swap-symmetric part sits at phase pi
    // and the antisymmetric part at phase zero, where rounding cannot
    // distinguish it from the stationary state and the defect is maximal.
    let swapped = swap_edge(&remainder, n);
    let coef_pi = -Complex64::from_polar(1.0, err_phase_pi);
    let coef_zero = -Complex64::from_polar(1.0, err_phase_zero);
    for idx in 0..n * n {
        let sym = 0.5 * (remainder[idx] + swapped[idx]);
        let antisym = 0.5 * (remainder[idx] - swapped[idx]);
        out[idx] += coef_pi * sym + coef_zero * antisym;
    }
    QuantumState::new(out, state.space)
}

/// Build the reflection derived from a walk: exact mode reflects about
/// the stationary qsample itself, approximate mode applies the k-bit
/// rounding model. `Site` reflections act on qsamples in the site space,
/// `Edge` reflections on the walk's own space.
pub fn reflection(
    walk: &Arc<WalkOperator>,
    mode: ReflectionMode,
    space: ReflectionSpace,
) -> ReflectionOperator {
    match (mode, space) {
        (ReflectionMode::Exact, ReflectionSpace::Site) => ReflectionOperator {
            kind: ReflectionKind::ExactRay {
                target: walk.stationary_site.clone(),
            },
            mode,
            walk_cost: reflection_walk_cost(walk.phase_gap, None),
        },
        (ReflectionMode::Exact, ReflectionSpace::Edge) => ReflectionOperator {
            kind: ReflectionKind::ExactRay {
                target: walk.stationary_edge.clone(),
            },
            mode,
            walk_cost: reflection_walk_cost(walk.phase_gap, None),
        },
        (ReflectionMode::Approximate { k }, ReflectionSpace::Site) => {
            let err_phases = walk
                .thetas
                .iter()
                .map(|&t| reflection_error_phase(t, k))
                .collect();
            ReflectionOperator {
                kind: ReflectionKind::ApproxSite {
                    walk: Arc::clone(walk),
                    err_phases,
                },
                mode,
                walk_cost: reflection_walk_cost(walk.phase_gap, Some(k)),
            }
        }
        (ReflectionMode::Approximate { k }, ReflectionSpace::Edge) => {
            let err_phases = walk
                .thetas
                .iter()
                .map(|&t| reflection_error_phase(t, k))
                .collect();
            ReflectionOperator {
                kind: ReflectionKind::ApproxEdge {
                    walk: Arc::clone(walk),
                    err_phases,
                    err_phase_zero: reflection_error_phase(0.0, k),
                    err_phase_pi: reflection_error_phase(std::f64::consts::PI, k),
                },
                mode,
                walk_cost: reflection_walk_cost(walk.phase_gap, Some(k)),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReflectionSpace {
    Site,
    Edge,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_chain, TransitionMatrix};
    use crate::problem::{bundled, Beta};

    fn k3_walk(beta: f64) -> Arc<WalkOperator> {
        let inst = Arc::new(bundled::k3_coloring());
        let chain = Arc::new(build_chain(&inst, beta).unwrap());
        Arc::new(build_walk(&chain).unwrap())
    }

    #[test]
    fn qsample_of_uniform_four() {
        let probs = vec![0.25; 4];
        let q = qsample_from_probs(&probs);
        for a in &q.amps {
            assert!((a.re - 0.5).abs() < 1e-15 && a.im == 0.0);
        }
    }

    #[test]
    fn qsample_point_mass_is_basis_state() {
        let q = qsample_from_probs(&[0.0, 1.0, 0.0]);
        assert!((q.amps[1].re - 1.0).abs() < 1e-15);
        assert_eq!(q.amps[0], Complex64::ZERO);
    }

    #[test]
    fn qsample_overlap_matches_partition_identity() {
        let inst = Arc::new(bundled::k3_coloring());
        let o = crate::oracle::OracleTable::new(Arc::clone(&inst));
        for (a, b) in [(0.0, 0.7), (0.3, 1.1)] {
            let qa = qsample(&inst.gibbs(Beta::Finite(a)).unwrap());
            let qb = qsample(&inst.gibbs(Beta::Finite(b)).unwrap());
            let lhs = qa.fidelity(&qb);
            let rhs = o.overlap_sq(Beta::Finite(a), Beta::Finite(b)).unwrap();
            assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
        }
    }

    /// Hand-check oracle: the two-state symmetric chain lifts to a 4x4
    /// walk that cycles the edge basis, with spectrum {1, i, -i, -1}.
    #[test]
    fn two_state_walk_hand_check() {
        let p = nalgebra::DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let chain = Arc::new(TransitionMatrix::from_raw(p, 0.0).unwrap());
        let walk = build_walk(&chain).unwrap();
        // Nontrivial eigenphases +/- pi/2 from the zero eigenvalue of the
        // discriminant.
        assert!((walk.phase_gap - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let dense = walk.to_dense().unwrap();
        // The walk permutes basis states in a 4-cycle: 00->10->11->01->00.
        let expect = nalgebra::DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                1.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        );
        assert!((dense - expect).abs().max() < 1e-12);
        // Stationary edge state is uniform with amplitude 1/2 and fixed.
        for a in &walk.stationary_edge.amps {
            assert!((a.re - 0.5).abs() < 1e-12);
        }
        let moved = walk.apply(&walk.stationary_edge);
        assert!(cvec::max_abs_diff(&moved.amps, &walk.stationary_edge.amps) < 1e-12);
    }

    #[test]
    fn walk_is_unitary_on_k3() {
        let walk = k3_walk(1.0);
        let dense = walk.to_dense().unwrap();
        let gram = dense.transpose() * &dense;
        let eye = nalgebra::DMatrix::<f64>::identity(729, 729);
        assert!((gram - eye).abs().max() < 1e-10);
    }

    #[test]
    fn walk_fixes_stationary_edge_state() {
        for beta in [0.0, 0.5, 1.0] {
            let walk = k3_walk(beta);
            let moved = walk.apply(&walk.stationary_edge);
            assert!(
                cvec::max_abs_diff(&moved.amps, &walk.stationary_edge.amps) < 1e-9,
                "stationary state moved at beta {beta}"
            );
        }
    }

    #[test]
    fn walk_eigenvectors_carry_their_phases() {
        let walk = k3_walk(0.5);
        for j in 1..walk.size() {
            let theta = walk.thetas[j];
            if theta == 0.0 {
                continue;
            }
            for positive in [true, false] {
                let v = walk.eigenvector(j, positive);
                assert!((v.norm() - 1.0).abs() < 1e-9);
                let moved = walk.apply(&v);
                let phase =
                    Complex64::from_polar(1.0, if positive { theta } else { -theta });
                let expect: Vec<Complex64> = v.amps.iter().map(|a| a * phase).collect();
                assert!(
                    cvec::max_abs_diff(&moved.amps, &expect) < 1e-8,
                    "eigenpair {j} mismatch"
                );
            }
        }
    }

    #[test]
    fn phase_gap_dominates_sqrt_two_delta() {
        for (_, inst) in bundled::all_set() {
            let inst = Arc::new(inst);
            for beta in [0.0, 0.5, 1.0] {
                let chain = Arc::new(build_chain(&inst, beta).unwrap());
                let walk = build_walk(&chain).unwrap();
                assert!(
                    walk.phase_gap >= (2.0 * chain.gap).sqrt() - 1e-9,
                    "phase gap {} below sqrt(2 delta) {}",
                    walk.phase_gap,
                    (2.0 * chain.gap).sqrt()
                );
            }
        }
    }

    #[test]
    fn lift_project_roundtrip() {
        let inst = Arc::new(bundled::ising_cycle4());
        let chain = Arc::new(build_chain(&inst, 0.7).unwrap());
        let mut stream = crate::rng::Stream::from_seed(2);
        for _ in 0..8 {
            let mut amps: Vec<Complex64> = (0..chain.size())
                .map(|_| Complex64::new(stream.uniform() - 0.5, stream.uniform() - 0.5))
                .collect();
            cvec::normalize(&mut amps);
            let site = QuantumState::new(amps, StateSpace::Site { n: chain.size() });
            let lifted = lift_to_edge(&site, &chain);
            assert!((lifted.norm() - 1.0).abs() < 1e-12, "lift must preserve norm");
            let (back, residual) = project_to_site(&lifted, &chain);
            assert!(residual < 1e-10);
            assert!(cvec::max_abs_diff(&back.amps, &site.amps) < 1e-10);
        }
    }

    #[test]
    fn lift_of_stationary_qsample_is_stationary_edge_state() {
        let walk = k3_walk(0.8);
        let lifted = lift_to_edge(&walk.stationary_site, &walk.chain);
        assert!(cvec::max_abs_diff(&lifted.amps, &walk.stationary_edge.amps) < 1e-12);
    }

    #[test]
    fn project_reports_out_of_subspace_residual() {
        let inst = Arc::new(bundled::ising_cycle4());
        let chain = Arc::new(build_chain(&inst, 0.3).unwrap());
        let n = chain.size();
        // A swap-antisymmetric vector is orthogonal to every lifted state
        // only if its A-projection vanishes; build one with mass on a
        // zero-probability transition instead.
        let mut amps = vec![Complex64::ZERO; n * n];
        // Transition 0 -> 3 flips two spins at once and has probability 0.
        assert!(chain.probs[(0, 3)] == 0.0);
        amps[3] = Complex64::ONE;
        let state = QuantumState::new(amps, StateSpace::Edge { n });
        let (_, residual) = project_to_site(&state, &chain);
        assert!((residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_reflection_fixes_target_and_flips_orthogonal() {
        let walk = k3_walk(1.0);
        let r = reflection(&walk, ReflectionMode::Exact, ReflectionSpace::Site);
        let mut ledger = CostLedger::new();
        let fixed = r.apply(&walk.stationary_site, &mut ledger);
        assert!(cvec::max_abs_diff(&fixed.amps, &walk.stationary_site.amps) < 1e-12);
        // Orthogonal probe from the second discriminant eigenvector.
        let n = walk.size();
        let v: Vec<Complex64> = (0..n)
            .map(|x| Complex64::new(walk.chain.eigen.vectors[(x, 1)], 0.0))
            .collect();
        let probe = QuantumState::new(v, StateSpace::Site { n });
        let flipped = r.apply(&probe, &mut ledger);
        let expect: Vec<Complex64> = probe.amps.iter().map(|a| -a).collect();
        assert!(cvec::max_abs_diff(&flipped.amps, &expect) < 1e-10);
        assert_eq!(ledger.reflections, 2);
    }

    #[test]
    fn approximate_reflection_error_bound_on_site_space() {
        let walk = k3_walk(1.0);
        for k in [1u32, 4, 8] {
            let r = reflection(
                &walk,
                ReflectionMode::Approximate { k },
                ReflectionSpace::Site,
            );
            let bound = 2f64.powi(1 - k as i32);
            let n = walk.size();
            let mut worst = 0.0f64;
            for j in 1..n {
                let v: Vec<Complex64> = (0..n)
                    .map(|x| Complex64::new(walk.chain.eigen.vectors[(x, j)], 0.0))
                    .collect();
                let probe = QuantumState::new(v, StateSpace::Site { n });
                let out = r.apply_uncharged(&probe);
                let err: f64 = out
                    .amps
                    .iter()
                    .zip(&probe.amps)
                    .map(|(a, b)| (a + b).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(err);
            }
            assert!(
                worst <= bound * (1.0 + 1e-9),
                "k={k}: error {worst} above {bound}"
            );
            assert!(r.orthocomplement_error_bound() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn approximate_reflection_edge_space_unitary_and_bounded() {
        // Small instance so the full edge space stays cheap.
        let inst = Arc::new(bundled::k3_matching());
        let chain = Arc::new(build_chain(&inst, 0.6).unwrap());
        let walk = Arc::new(build_walk(&chain).unwrap());
        let k = 6;
        let r = reflection(
            &walk,
            ReflectionMode::Approximate { k },
            ReflectionSpace::Edge,
        );
        let n = walk.size();
        let dim = n * n;
        let bound = 2f64.powi(1 - k as i32);
        let mut stream = crate::rng::Stream::from_seed(9);
        for _ in 0..12 {
            let mut amps: Vec<Complex64> = (0..dim)
                .map(|_| Complex64::new(stream.uniform() - 0.5, stream.uniform() - 0.5))
                .collect();
            // Remove the stationary component to land in the orthocomplement.
            let c = cvec::dot(&walk.stationary_edge.amps, &amps);
            cvec::axpy(&mut amps, -c, &walk.stationary_edge.amps);
            cvec::normalize(&mut amps);
            let probe = QuantumState::new(amps, StateSpace::Edge { n });
            let out = r.apply_uncharged(&probe);
            assert!((out.norm() - 1.0).abs() < 1e-9, "approximate reflection must stay unitary");
            let err: f64 = out
                .amps
                .iter()
                .zip(&probe.amps)
                .map(|(a, b)| (a + b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err <= bound * (1.0 + 1e-9), "error {err} above {bound}");
        }
        // The stationary state itself is fixed.
        let kept = r.apply_uncharged(&walk.stationary_edge);
        assert!(cvec::max_abs_diff(&kept.amps, &walk.stationary_edge.amps) < 1e-9);
    }

    #[test]
    fn k1_reflection_error_is_loosely_bounded_by_one() {
        let walk = k3_walk(0.5);
        let r = reflection(
            &walk,
            ReflectionMode::Approximate { k: 1 },
            ReflectionSpace::Site,
        );
        assert!(r.orthocomplement_error_bound() <= 1.0 + 1e-12);
    }

    #[test]
    fn eigenphase_histogram_covers_full_edge_space() {
        let walk = k3_walk(0.9);
        let total: usize = walk.eigenphase_histogram().iter().map(|(_, c)| c).sum();
        assert_eq!(total, 729);
    }
}
