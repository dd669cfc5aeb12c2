//! Amplitude estimation, the powering wrapper, and state restoration.
//!
//! The Grover operator Q = -R_psi R rotates the invariant plane spanned by
//! the projected and rejected components of |psi| by 2 theta, where
//! a = sin^2 theta is the amplitude being estimated. Phase estimation on Q
//! with a power-of-two register of size M samples an index y whose exact
//! distribution is known in closed form, giving the estimate
//! sin^2(pi y / M) within 2 pi a(1-a)/M + pi^2/M^2 of a with probability
//! at least 8/pi^2 per shot.
//!
//! Two engines are provided. The invariant-subspace engine tracks the
//! exact two-dimensional decomposition and samples measurement outcomes
//! from their closed-form distributions; it requires exact reflections.
//! The full-register engine materializes the M-point ancilla register
//! explicitly and works with approximate reflections too; it is the audit
//! path.

use num_complex::Complex64;

use crate::cvec;
use crate::error::{Error, Result};
use crate::ledger::CostLedger;
use crate::rng::Stream;
use crate::walk::{QuantumState, ReflectionOperator, StateSpace};

/// Amplitudes below this are treated as the degenerate cases a = 0, 1,
/// where Q has no rotation block and phase estimation is skipped.
const DEGENERATE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AeEngine {
    /// Exact 2D tracking with closed-form outcome distributions.
    InvariantSubspace,
    /// Explicit ancilla register; slower, supports approximate reflections.
    FullRegister,
}

/// Ideal projector P underlying a reflection R = 2P - I.
fn project(r: &ReflectionOperator, state: &QuantumState) -> QuantumState {
    match r.target() {
        Some(t) => {
            let c = t.inner(state);
            let mut amps = vec![Complex64::ZERO; state.amps.len()];
            cvec::axpy(&mut amps, c, &t.amps);
            QuantumState::new(amps, state.space)
        }
        None => {
            // Ancilla-one projector: keep odd indices.
            let amps = state
                .amps
                .iter()
                .enumerate()
                .map(|(i, a)| if i % 2 == 1 { *a } else { Complex64::ZERO })
                .collect();
            QuantumState::new(amps, state.space)
        }
    }
}

#[derive(Debug, Clone)]
struct Block2D {
    /// Normalized projected component of psi.
    psi1: QuantumState,
    /// Normalized rejected component.
    psi0: QuantumState,
}

#[derive(Debug, Clone)]
pub struct GroverOperator {
    pub r_psi: ReflectionOperator,
    pub r_target: ReflectionOperator,
    pub psi: QuantumState,
    /// a = <psi|P|psi>.
    pub a: f64,
    /// theta = arcsin sqrt(a).
    pub theta: f64,
    block: Option<Block2D>,
}

impl GroverOperator {
    pub fn is_degenerate(&self) -> bool {
        self.block.is_none()
    }

    /// Q applied once, without ledger charges.
    pub fn apply_uncharged(&self, state: &QuantumState) -> QuantumState {
        let mid = self.r_target.apply_uncharged(state);
        let mut out = self.r_psi.apply_uncharged(&mid);
        for a in out.amps.iter_mut() {
            *a = -*a;
        }
        out
    }

    /// Eigenvector of Q for eigenvalue e^{+2i theta} (plus) or
    /// e^{-2i theta} (minus), phased so that
    /// psi = (e^{-i theta} psi_plus + e^{i theta} psi_minus) / sqrt(2).
    pub fn eigenstate(&self, plus: bool) -> QuantumState {
        let block = self.block.as_ref().expect("degenerate operator");
        let dim = self.psi.amps.len();
        let mut amps = vec![Complex64::ZERO; dim];
        let i = Complex64::I;
        let inv_sqrt2 = Complex64::new(1.0 / std::f64::consts::SQRT_2, 0.0);
        if plus {
            let phase = -i * Complex64::from_polar(1.0, 2.0 * self.theta);
            cvec::axpy(&mut amps, phase * inv_sqrt2, &block.psi1.amps);
            cvec::axpy(&mut amps, phase * i * inv_sqrt2, &block.psi0.amps);
        } else {
            let phase = i * Complex64::from_polar(1.0, -2.0 * self.theta);
            cvec::axpy(&mut amps, phase * inv_sqrt2, &block.psi1.amps);
            cvec::axpy(&mut amps, -phase * i * inv_sqrt2, &block.psi0.amps);
        }
        QuantumState::new(amps, self.psi.space)
    }

    /// Coefficients of a state in the (psi_plus, psi_minus) eigenbasis.
    pub fn branch_coefficients(&self, state: &QuantumState) -> (Complex64, Complex64) {
        let plus = self.eigenstate(true);
        let minus = self.eigenstate(false);
        (plus.inner(state), minus.inner(state))
    }

    /// Eigenphase fractions omega of the two branches, in [0, 1).
    pub fn branch_omegas(&self) -> (f64, f64) {
        let w = self.theta / std::f64::consts::PI;
        (w, (1.0 - w) % 1.0)
    }
}

/// Assemble the Grover operator -R_psi R and cache its invariant plane.
pub fn grover(
    r_psi: ReflectionOperator,
    r_target: ReflectionOperator,
    psi: &QuantumState,
) -> GroverOperator {
    let p_psi = project(&r_target, psi);
    let a = p_psi.norm().powi(2);
    let theta = a.clamp(0.0, 1.0).sqrt().asin();
    let block = if a < DEGENERATE_TOL || a > 1.0 - DEGENERATE_TOL {
        None
    } else {
        let mut psi1 = p_psi.clone();
        psi1.normalize();
        let mut rest = psi.clone();
        for (r, p) in rest.amps.iter_mut().zip(&p_psi.amps) {
            *r -= p;
        }
        rest.normalize();
        Some(Block2D { psi1, psi0: rest })
    };
    GroverOperator {
        r_psi,
        r_target,
        psi: psi.clone(),
        a,
        theta,
        block,
    }
}

/// Exact phase-estimation outcome distribution for eigenphase fraction
/// omega on an M-point register:
/// p(y) = sin^2(pi M d) / (M^2 sin^2(pi d)) with d = omega - y/M.
pub fn pe_distribution(omega: f64, m: usize) -> Vec<f64> {
    let mf = m as f64;
    let mut probs: Vec<f64> = (0..m)
        .map(|y| {
            let d = omega - y as f64 / mf;
            let denom = (std::f64::consts::PI * d).sin();
            if denom.abs() < 1e-14 {
                1.0
            } else {
                let num = (std::f64::consts::PI * d * mf).sin();
                (num / (mf * denom)).powi(2)
            }
        })
        .collect();
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    probs
}

fn sample_from_probs(probs: &[f64], stream: &mut Stream) -> usize {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cdf.push(acc);
    }
    stream.sample_cdf(&cdf)
}

fn check_power_of_two(m: usize) -> Result<()> {
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::Domain(format!(
            "register size must be a power of two >= 2, got {m}"
        )));
    }
    Ok(())
}

/// Repetition count for the powering wrapper: the median of q
/// independent shots fails only if at least half fail, and a Chernoff
/// bound with per-shot success 8/pi^2 > 1/2 gives failure probability at
/// most exp(-q ln(10/9) / 2). Solving for eta and forcing q odd yields
/// q = 2 ceil(ln(1/eta)/ln(10/9)) + 1.
pub fn powering_repetitions(eta: f64) -> usize {
    let x = (1.0 / eta).ln() / (10.0f64 / 9.0).ln();
    2 * x.ceil().max(0.0) as usize + 1
}

/// Charge one phase-estimation register: M uses of each reflection.
fn charge_pe_register(q: &GroverOperator, m: usize, ledger: &mut CostLedger) {
    let uses = m as u128;
    ledger.reflections += 2 * uses;
    ledger.walk_steps += uses * (q.r_psi.walk_cost + q.r_target.walk_cost);
}

/// One phase-estimation round in the invariant-subspace engine: collapse
/// onto an eigenbranch, then sample y from that branch's closed-form
/// distribution. Returns (y, branch_sign, post_state).
fn pe_round_invariant(
    q: &GroverOperator,
    state: &QuantumState,
    m: usize,
    stream: &mut Stream,
    ledger: &mut CostLedger,
) -> (usize, i8, QuantumState) {
    charge_pe_register(q, m, ledger);
    let (cp, cm) = q.branch_coefficients(state);
    let wp = cp.norm_sqr();
    let wm = cm.norm_sqr();
    let total = wp + wm;
    debug_assert!(total > 1e-9, "state left the invariant plane");
    let go_plus = stream.coin(wp / total);
    let (omega_p, omega_m) = q.branch_omegas();
    let omega = if go_plus { omega_p } else { omega_m };
    let y = sample_from_probs(&pe_distribution(omega, m), stream);
    let post = q.eigenstate(go_plus);
    (y, if go_plus { 1 } else { -1 }, post)
}

/// One phase-estimation round with an explicit M-point register.
fn pe_round_full(
    q: &GroverOperator,
    state: &QuantumState,
    m: usize,
    stream: &mut Stream,
    ledger: &mut CostLedger,
) -> (usize, QuantumState) {
    charge_pe_register(q, m, ledger);
    let dim = state.amps.len();
    let scale = Complex64::new(1.0 / (m as f64).sqrt(), 0.0);
    // Lambda_M(Q) (F_M tensor I) |0>|psi|: register j holds Q^j psi / sqrt(M).
    let mut joint: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    let mut cur = state.clone();
    for j in 0..m {
        let mut row = cur.amps.clone();
        cvec::scale(&mut row, scale);
        joint.push(row);
        if j + 1 < m {
            cur = q.apply_uncharged(&cur);
        }
    }
    // Inverse Fourier transform on the register, then measure it.
    let mut probs = vec![0.0; m];
    let mut outcomes: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    for y in 0..m {
        let mut row = vec![Complex64::ZERO; dim];
        for (j, jr) in joint.iter().enumerate() {
            let phase = Complex64::from_polar(
                1.0 / (m as f64).sqrt(),
                -2.0 * std::f64::consts::PI * (j * y) as f64 / m as f64,
            );
            cvec::axpy(&mut row, phase, jr);
        }
        probs[y] = row.iter().map(|c| c.norm_sqr()).sum();
        outcomes.push(row);
    }
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    let y = sample_from_probs(&probs, stream);
    let mut post = QuantumState::new(outcomes.swap_remove(y), state.space);
    post.normalize();
    (y, post)
}

/// Measurement record of one estimation call.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AeTranscript {
    pub stream: String,
    pub m: usize,
    pub eta: f64,
    pub q_reps: usize,
    pub ys: Vec<usize>,
    pub y_median: usize,
    pub a_hat: f64,
    pub branch: i8,
    pub restore_rounds: u32,
    pub restored: bool,
    pub fidelity: f64,
}

#[derive(Debug, Clone)]
pub struct AmplitudeEstimate {
    pub a_hat: f64,
    pub m: usize,
    pub eta: f64,
    pub y_median: usize,
    pub restored: bool,
    pub cost: CostLedger,
    pub transcript: AeTranscript,
}

impl AmplitudeEstimate {
    /// The single-shot error bound 2 pi a(1-a)/M + pi^2/M^2 evaluated at
    /// a reference amplitude.
    pub fn error_bound(a: f64, m: usize) -> f64 {
        let mf = m as f64;
        2.0 * std::f64::consts::PI * a * (1.0 - a) / mf
            + std::f64::consts::PI.powi(2) / (mf * mf)
    }

    pub fn within_bound(&self, a: f64) -> bool {
        (self.a_hat - a).abs() <= Self::error_bound(a, self.m)
    }
}

pub struct EstimateOutcome {
    pub estimate: AmplitudeEstimate,
    pub post_state: QuantumState,
}

fn estimate_from_y(y: usize, m: usize) -> f64 {
    let s = (std::f64::consts::PI * y as f64 / m as f64).sin();
    s * s
}

/// Fold an index onto [0, M/2]; the estimate sin^2(pi y/M) is invariant
/// under y -> M - y, and medians must be taken on the folded axis because
/// the raw index wraps around at zero phase.
fn fold(y: usize, m: usize) -> usize {
    y.min(m - y.min(m))
}

fn degenerate_outcome(
    q: &GroverOperator,
    psi: &QuantumState,
    m: usize,
    eta: f64,
    stream_name: String,
) -> EstimateOutcome {
    let (a_hat, y) = if q.a < DEGENERATE_TOL {
        (0.0, 0)
    } else {
        (1.0, m / 2)
    };
    let transcript = AeTranscript {
        stream: stream_name,
        m,
        eta,
        q_reps: 0,
        ys: vec![],
        y_median: y,
        a_hat,
        branch: 0,
        restore_rounds: 0,
        restored: true,
        fidelity: 1.0,
    };
    EstimateOutcome {
        estimate: AmplitudeEstimate {
            a_hat,
            m,
            eta,
            y_median: y,
            restored: true,
            cost: CostLedger::new(),
            transcript,
        },
        post_state: psi.clone(),
    }
}

/// Single-shot amplitude estimation.
pub fn estimate(
    q: &GroverOperator,
    m: usize,
    stream: &mut Stream,
    engine: AeEngine,
    ledger: &mut CostLedger,
) -> Result<EstimateOutcome> {
    check_power_of_two(m)?;
    if q.is_degenerate() {
        return Ok(degenerate_outcome(q, &q.psi, m, 1.0, stream.name().to_string()));
    }
    let before = *ledger;
    let (y, branch, post) = match effective_engine(q, engine) {
        AeEngine::InvariantSubspace => pe_round_invariant(q, &q.psi, m, stream, ledger),
        AeEngine::FullRegister => {
            let (y, post) = pe_round_full(q, &q.psi, m, stream, ledger);
            (y, 0, post)
        }
    };
    let a_hat = estimate_from_y(y, m);
    let mut cost = *ledger;
    cost.walk_steps -= before.walk_steps;
    cost.reflections -= before.reflections;
    cost.ae_calls -= before.ae_calls;
    let transcript = AeTranscript {
        stream: stream.name().to_string(),
        m,
        eta: 1.0,
        q_reps: 1,
        ys: vec![y],
        y_median: y,
        a_hat,
        branch,
        restore_rounds: 0,
        restored: false,
        fidelity: f64::NAN,
    };
    Ok(EstimateOutcome {
        estimate: AmplitudeEstimate {
            a_hat,
            m,
            eta: 1.0,
            y_median: y,
            restored: false,
            cost,
            transcript,
        },
        post_state: post,
    })
}

fn effective_engine(q: &GroverOperator, requested: AeEngine) -> AeEngine {
    use crate::walk::ReflectionMode;
    let any_approx = !matches!(q.r_psi.mode, ReflectionMode::Exact)
        || !matches!(q.r_target.mode, ReflectionMode::Exact);
    if any_approx {
        AeEngine::FullRegister
    } else {
        requested
    }
}

/// Amplitude estimation with powering: q_reps parallel registers, median
/// on the folded index, post-state collapsed consistently with the
/// register bank.
pub fn estimate_powered(
    q: &GroverOperator,
    m: usize,
    eta: f64,
    stream: &mut Stream,
    engine: AeEngine,
    ledger: &mut CostLedger,
) -> Result<EstimateOutcome> {
    check_power_of_two(m)?;
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain(format!("eta must be in (0,1), got {eta}")));
    }
    if q.is_degenerate() {
        return Ok(degenerate_outcome(q, &q.psi, m, eta, stream.name().to_string()));
    }
    let q_reps = powering_repetitions(eta);
    let before = *ledger;
    let mut ys = Vec::with_capacity(q_reps);
    let mut branch = 0i8;
    let mut post = q.psi.clone();
    match effective_engine(q, engine) {
        AeEngine::InvariantSubspace => {
            // All registers act on the same eigenbranch: one branch draw,
            // then independent index draws within it.
            let (cp, cm) = q.branch_coefficients(&q.psi);
            let wp = cp.norm_sqr();
            let go_plus = stream.coin(wp / (wp + cm.norm_sqr()));
            branch = if go_plus { 1 } else { -1 };
            let (op, om) = q.branch_omegas();
            let probs = pe_distribution(if go_plus { op } else { om }, m);
            for _ in 0..q_reps {
                charge_pe_register(q, m, ledger);
                ys.push(sample_from_probs(&probs, stream));
            }
            post = q.eigenstate(go_plus);
        }
        AeEngine::FullRegister => {
            for _ in 0..q_reps {
                let (y, next) = pe_round_full(q, &post, m, stream, ledger);
                ys.push(y);
                post = next;
            }
        }
    }
    let mut order: Vec<usize> = (0..q_reps).collect();
    order.sort_by_key(|&i| (fold(ys[i], m), ys[i]));
    let y_median = ys[order[(q_reps - 1) / 2]];
    let a_hat = estimate_from_y(y_median, m);
    let mut cost = *ledger;
    cost.walk_steps -= before.walk_steps;
    cost.reflections -= before.reflections;
    cost.ae_calls -= before.ae_calls;
    let transcript = AeTranscript {
        stream: stream.name().to_string(),
        m,
        eta,
        q_reps,
        ys: ys.clone(),
        y_median,
        a_hat,
        branch,
        restore_rounds: 0,
        restored: false,
        fidelity: f64::NAN,
    };
    Ok(EstimateOutcome {
        estimate: AmplitudeEstimate {
            a_hat,
            m,
            eta,
            y_median,
            restored: false,
            cost,
            transcript,
        },
        post_state: post,
    })
}

/// Restoration loop: project onto |psi| with (R_psi + I)/2; on failure,
/// re-collapse onto an eigenbranch with a powered phase-estimation bank
/// and retry. From an eigenstate the projection succeeds with probability
/// exactly 1/2, so the failure probability after r rounds is 2^-r and the
/// iteration cap ceil(log2(1/eta)) + 1 meets the failure budget.
pub fn restore(
    post_state: &QuantumState,
    q: &GroverOperator,
    m: usize,
    eta: f64,
    stream: &mut Stream,
    engine: AeEngine,
    ledger: &mut CostLedger,
) -> Result<(QuantumState, u32)> {
    if q.is_degenerate() {
        return Ok((post_state.clone(), 0));
    }
    let cap = (1.0 / eta).log2().ceil().max(1.0) as u32 + 1;
    let q_reps = powering_repetitions(eta);
    let mut state = post_state.clone();
    for round in 1..=cap {
        // Generalized measurement with operators (I +/- R_psi)/2; for an
        // exact reflection this is the projective measurement onto psi.
        let reflected = q.r_psi.apply(&state, ledger);
        let mut success_amps = state.amps.clone();
        for (s, r) in success_amps.iter_mut().zip(&reflected.amps) {
            *s = 0.5 * (*s + r);
        }
        let p_success: f64 = success_amps.iter().map(|c| c.norm_sqr()).sum();
        if stream.coin(p_success) {
            let mut out = QuantumState::new(success_amps, state.space);
            out.normalize();
            return Ok((out, round));
        }
        let mut fail_amps = state.amps;
        for (f, s) in fail_amps.iter_mut().zip(&success_amps) {
            *f -= s;
        }
        state = QuantumState::new(fail_amps, post_state.space);
        state.normalize();
        // Re-collapse onto an eigenbranch before the next projection.
        match effective_engine(q, engine) {
            AeEngine::InvariantSubspace => {
                let (cp, cm) = q.branch_coefficients(&state);
                let wp = cp.norm_sqr();
                let go_plus = stream.coin(wp / (wp + cm.norm_sqr()));
                for _ in 0..q_reps {
                    charge_pe_register(q, m, ledger);
                }
                state = q.eigenstate(go_plus);
            }
            AeEngine::FullRegister => {
                for _ in 0..q_reps {
                    let (_, next) = pe_round_full(q, &state, m, stream, ledger);
                    state = next;
                }
            }
        }
    }
    Err(Error::RestorationFailed {
        rounds: cap,
        fidelity: state.fidelity(&q.psi),
    })
}

/// Nondestructive amplitude estimation: powered estimation with failure
/// budget eta/2 followed by restoration with budget eta/2. Returns the
/// estimate and the restored copy of |psi|.
pub fn nondestructive_estimate(
    q: &GroverOperator,
    m: usize,
    eta: f64,
    stream: &mut Stream,
    engine: AeEngine,
    ledger: &mut CostLedger,
) -> Result<(AmplitudeEstimate, QuantumState)> {
    ledger.charge_ae_call();
    let before = *ledger;
    let mut outcome = estimate_powered(q, m, eta / 2.0, stream, engine, ledger)?;
    let (restored_state, rounds) = restore(
        &outcome.post_state,
        q,
        m,
        eta / 2.0,
        stream,
        engine,
        ledger,
    )?;
    let fidelity = restored_state.fidelity(&q.psi);
    outcome.estimate.restored = true;
    outcome.estimate.transcript.restored = true;
    outcome.estimate.transcript.restore_rounds = rounds;
    outcome.estimate.transcript.fidelity = fidelity;
    let mut cost = *ledger;
    cost.walk_steps -= before.walk_steps;
    cost.reflections -= before.reflections;
    cost.ae_calls = ledger.ae_calls - before.ae_calls + 1;
    outcome.estimate.cost = cost;
    Ok((outcome.estimate, restored_state))
}

/// CSV header and row emission for trial transcripts.
pub fn transcript_csv_header() -> &'static str {
    "stream,m,eta,q_reps,y_median,a_hat,branch,restore_rounds,restored,fidelity\n"
}

pub fn transcript_csv_row(t: &AeTranscript) -> String {
    format!(
        "{},{},{:.16e},{},{},{:.16e},{},{},{},{}\n",
        t.stream,
        t.m,
        t.eta,
        t.q_reps,
        t.y_median,
        t.a_hat,
        t.branch,
        t.restore_rounds,
        t.restored,
        if t.fidelity.is_nan() {
            String::new()
        } else {
            format!("{:.16e}", t.fidelity)
        }
    )
}

/// Synthetic two-dimensional estimation problem with amplitude a: the
/// target is the second basis vector and psi = (sqrt(1-a), sqrt(a)).
pub fn synthetic_problem(a: f64) -> (QuantumState, ReflectionOperator, ReflectionOperator) {
    let space = StateSpace::Site { n: 2 };
    let psi = QuantumState::new(
        vec![
            Complex64::new((1.0 - a).max(0.0).sqrt(), 0.0),
            Complex64::new(a.max(0.0).sqrt(), 0.0),
        ],
        space,
    );
    let target = QuantumState::new(vec![Complex64::ZERO, Complex64::ONE], space);
    let r_psi = ReflectionOperator::exact_about(psi.clone());
    let r = ReflectionOperator::exact_about(target);
    (psi, r_psi, r)
}
