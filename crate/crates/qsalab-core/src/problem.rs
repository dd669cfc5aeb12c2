//! Finite annealing problems and their Gibbs distributions.
//!
//! Every instance enumerates its full state space up front (bounded by the
//! enumeration cap) and exposes energies H(x) >= 0 together with log base
//! weights, so that the Gibbs distribution at inverse temperature beta is
//! proportional to `w0(x) * exp(-beta * H(x))`. Counting kinds have unit
//! base weights (fugacity-weighted for independent sets); the Bayesian
//! kind uses the prior as base weight and the negative log-likelihood as
//! energy.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cvec::log_sum_exp;
use crate::error::{Error, Result};

/// Default cap on |Omega|. The edge space is its square.
pub const DEFAULT_ENUM_CAP: usize = 4096;

/// Ground states are configurations with H below this tolerance.
pub const GROUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Coloring,
    Ising,
    Matching,
    IndependentSet,
    Bayes,
}

impl ProblemKind {
    pub fn is_counting(self) -> bool {
        !matches!(self, ProblemKind::Bayes)
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProblemKind::Coloring => "coloring",
            ProblemKind::Ising => "ising",
            ProblemKind::Matching => "matching",
            ProblemKind::IndependentSet => "independent_set",
            ProblemKind::Bayes => "bayes",
        };
        f.write_str(s)
    }
}

/// Inverse temperature, with infinity kept as a distinguished value so the
/// final counting step stays exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Beta {
    Finite(f64),
    #[serde(with = "inf_string")]
    Infinity,
}

mod inf_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str("inf")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "inf" {
            Ok(())
        } else {
            Err(serde::de::Error::custom("expected \"inf\""))
        }
    }
}

impl Beta {
    pub fn finite(self) -> Option<f64> {
        match self {
            Beta::Finite(b) => Some(b),
            Beta::Infinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Beta::Infinity)
    }

    /// Total order: finite values by magnitude, infinity last.
    pub fn key(self) -> (u8, u64) {
        match self {
            Beta::Finite(b) => (0, b.to_bits()),
            Beta::Infinity => (1, 0),
        }
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Finite(b) => write!(f, "{b}"),
            Beta::Infinity => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Graph {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for &(u, v) in &self.edges {
            if u == v {
                return Err(Error::Parse(format!("self-loop at vertex {u}")));
            }
            if u >= self.vertices || v >= self.vertices {
                return Err(Error::Parse(format!("edge ({u},{v}) out of range")));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(Error::Parse(format!("duplicate edge ({u},{v})")));
            }
        }
        Ok(())
    }
}

/// One enumerated configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Config {
    /// Color (or spin bit) per vertex.
    Assignment(Vec<u8>),
    /// Chosen edges of a matching.
    EdgeSubset(Vec<bool>),
    /// Chosen vertices of an independent set.
    VertexSubset(Vec<bool>),
    /// Index into the Bayesian parameter grid.
    GridPoint(usize),
}

/// Annealing direction. A reversed instance reparameterizes
/// `Z(gamma0 - beta')` as a forward anneal on beta' in [0, gamma0] by
/// folding `exp(-gamma0 * H)` into the base weights and flipping the sign
/// of the exponent, so `Z'(beta') = sum w0 exp((beta' - gamma0) H)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Reversed { gamma0: f64 },
}

/// On-disk problem description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub kind: ProblemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Vec<u8>>,
    /// Optional explicit parameter grid for the Bayesian kind; defaults to
    /// theta_i = (i+1)/(m+1) for an m-point prior.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphSpec {
    pub vertices: usize,
    pub edges: Vec<[usize; 2]>,
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub kind: ProblemKind,
    pub graph: Option<Graph>,
    pub k: u32,
    pub lambda: f64,
    /// Parameter grid (bayes only).
    pub thetas: Vec<f64>,
    pub data: Vec<u8>,
    pub direction: Direction,
    configs: Vec<Config>,
    index: HashMap<Config, usize>,
    energies: Vec<f64>,
    log_weights: Vec<f64>,
    /// Offset subtracted from the raw negative log-likelihood so that
    /// min L = 0 (bayes only; zero otherwise).
    pub energy_offset: f64,
    pub n_bound: f64,
    digest: String,
}

/// Gibbs distribution at one inverse temperature, with its log partition
/// value f(beta) = log Z(beta).
#[derive(Debug, Clone)]
pub struct GibbsDistribution {
    pub beta: Beta,
    pub probs: Vec<f64>,
    pub log_z: f64,
}

impl GibbsDistribution {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

impl ProblemInstance {
    /// Parse and enumerate an instance from its JSON description.
    pub fn from_spec(spec: &InstanceSpec, cap: usize) -> Result<Self> {
        let digest = digest_spec(spec);
        match spec.kind {
            ProblemKind::Coloring | ProblemKind::Ising => {
                let graph = graph_from_spec(spec)?;
                let k = match spec.kind {
                    ProblemKind::Coloring => {
                        let k = spec.k.ok_or_else(|| Error::Parse("coloring needs k".into()))?;
                        if k < 1 {
                            return Err(Error::Parse("k must be >= 1".into()));
                        }
                        k
                    }
                    _ => 2,
                };
                build_assignment_instance(spec.kind, graph, k, cap, digest)
            }
            ProblemKind::Matching => {
                let graph = graph_from_spec(spec)?;
                build_matching_instance(graph, cap, digest)
            }
            ProblemKind::IndependentSet => {
                let graph = graph_from_spec(spec)?;
                let lambda = spec.lambda.unwrap_or(1.0);
                if lambda <= 0.0 {
                    return Err(Error::Parse("fugacity lambda must be positive".into()));
                }
                build_independent_set_instance(graph, lambda, cap, digest)
            }
            ProblemKind::Bayes => {
                let prior = spec
                    .prior
                    .clone()
                    .ok_or_else(|| Error::Parse("bayes needs a prior".into()))?;
                let data = spec.data.clone().unwrap_or_default();
                let thetas = match &spec.theta {
                    Some(t) => t.clone(),
                    None => {
                        let m = prior.len();
                        (0..m).map(|i| (i + 1) as f64 / (m + 1) as f64).collect()
                    }
                };
                build_bayes_instance(prior, thetas, data, cap, digest)
            }
        }
    }

    pub fn from_json(json: &str, cap: usize) -> Result<Self> {
        let spec: InstanceSpec =
            serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_spec(&spec, cap)
    }

    pub fn size(&self) -> usize {
        self.configs.len()
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn configs(&self) -> &[Config] {
        &self.configs
    }

    pub fn config(&self, i: usize) -> &Config {
        &self.configs[i]
    }

    pub fn index_of(&self, c: &Config) -> Option<usize> {
        self.index.get(c).copied()
    }

    /// Energy of the i-th enumerated configuration.
    pub fn energy(&self, i: usize) -> f64 {
        self.energies[i]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn log_weight(&self, i: usize) -> f64 {
        self.log_weights[i]
    }

    /// Recompute the energy of a configuration from scratch, independent
    /// of the table filled at enumeration time.
    pub fn energy_recomputed(&self, c: &Config) -> f64 {
        match (self.kind, c) {
            (ProblemKind::Coloring, Config::Assignment(colors)) => {
                let g = self.graph.as_ref().unwrap();
                g.edges
                    .iter()
                    .filter(|&&(u, v)| colors[u] == colors[v])
                    .count() as f64
            }
            (ProblemKind::Ising, Config::Assignment(spins)) => {
                let g = self.graph.as_ref().unwrap();
                g.edges
                    .iter()
                    .filter(|&&(u, v)| spins[u] != spins[v])
                    .count() as f64
            }
            (ProblemKind::Matching, Config::EdgeSubset(sel)) => {
                sel.iter().filter(|&&b| b).count() as f64
            }
            (ProblemKind::IndependentSet, Config::VertexSubset(sel)) => {
                sel.iter().filter(|&&b| b).count() as f64
            }
            (ProblemKind::Bayes, Config::GridPoint(i)) => {
                raw_neg_log_likelihood(self.thetas[*i], &self.data) - self.energy_offset
            }
            _ => panic!("configuration does not match instance kind"),
        }
    }

    /// Sign of the annealing exponent: Gibbs(beta) ∝ w0 * exp(-sign * beta * H).
    fn exponent_sign(&self) -> f64 {
        match self.direction {
            Direction::Forward => 1.0,
            Direction::Reversed { .. } => -1.0,
        }
    }

    /// Log-weights of the Gibbs distribution at finite beta, unnormalized.
    fn log_gibbs_weights(&self, beta: f64) -> Vec<f64> {
        let s = self.exponent_sign();
        self.log_weights
            .iter()
            .zip(&self.energies)
            .map(|(lw, h)| lw - s * beta * h)
            .collect()
    }

    /// Gibbs distribution at inverse temperature beta. All sums are
    /// carried out in log space.
    pub fn gibbs(&self, beta: Beta) -> Result<GibbsDistribution> {
        match beta {
            Beta::Finite(b) => {
                if !b.is_finite() || b < 0.0 {
                    return Err(Error::Domain(format!("beta must be >= 0, got {b}")));
                }
                let logw = self.log_gibbs_weights(b);
                let log_z = log_sum_exp(logw.iter().copied());
                let mut probs: Vec<f64> = logw.iter().map(|lw| (lw - log_z).exp()).collect();
                let total: f64 = probs.iter().sum();
                for p in &mut probs {
                    *p /= total;
                }
                Ok(GibbsDistribution {
                    beta,
                    probs,
                    log_z,
                })
            }
            Beta::Infinity => {
                if self.kind == ProblemKind::Bayes {
                    return Err(Error::Domain(
                        "beta = inf is only defined for counting kinds".into(),
                    ));
                }
                if matches!(self.direction, Direction::Reversed { .. }) {
                    return Err(Error::Domain(
                        "beta = inf is not defined for reverse-annealed instances".into(),
                    ));
                }
                let ground: Vec<usize> = (0..self.size())
                    .filter(|&i| self.energies[i] <= GROUND_TOL)
                    .collect();
                if ground.is_empty() {
                    return Err(Error::Unsupported(
                        "empty ground set: Z(inf) = 0".into(),
                    ));
                }
                let log_z = log_sum_exp(ground.iter().map(|&i| self.log_weights[i]));
                let mut probs = vec![0.0; self.size()];
                for &i in &ground {
                    probs[i] = (self.log_weights[i] - log_z).exp();
                }
                let total: f64 = probs.iter().sum();
                for p in &mut probs {
                    *p /= total;
                }
                Ok(GibbsDistribution {
                    beta,
                    probs,
                    log_z,
                })
            }
        }
    }

    /// Expected energy under the Gibbs distribution at finite beta.
    pub fn mean_energy(&self, beta: f64) -> Result<f64> {
        let g = self.gibbs(Beta::Finite(beta))?;
        Ok(g.probs
            .iter()
            .zip(&self.energies)
            .map(|(p, h)| p * h)
            .sum())
    }

    /// d/dbeta log Z(beta). Negative of the mean energy for forward
    /// instances, positive for reversed ones.
    pub fn log_z_derivative(&self, beta: f64) -> Result<f64> {
        Ok(-self.exponent_sign() * self.mean_energy(beta)?)
    }

    /// Reparameterize for reverse annealing: the returned instance
    /// satisfies Z'(0) = Z(gamma0) and Z'(gamma0) = Z(0), with annealing
    /// forward on beta' in [0, gamma0].
    pub fn reverse_transform(&self, gamma0: f64) -> Result<ProblemInstance> {
        if !matches!(
            self.kind,
            ProblemKind::Matching | ProblemKind::IndependentSet
        ) {
            return Err(Error::Domain(
                "reverse annealing applies to matching and independent_set kinds".into(),
            ));
        }
        if !(gamma0 > 0.0) {
            return Err(Error::Domain(format!("gamma0 must be > 0, got {gamma0}")));
        }
        if !matches!(self.direction, Direction::Forward) {
            return Err(Error::Domain("instance is already reversed".into()));
        }
        let mut out = self.clone();
        out.direction = Direction::Reversed { gamma0 };
        for (lw, h) in out.log_weights.iter_mut().zip(&self.energies) {
            *lw -= gamma0 * h;
        }
        out.digest = format!("{}-rev{:.12e}", self.digest, gamma0);
        Ok(out)
    }

    /// Natural-log m-value used by the counting schedule fill,
    /// ceil(log log |Omega|), floored at 1.
    pub fn fill_depth(&self) -> usize {
        let lnln = (self.size() as f64).ln().ln();
        (lnln.ceil() as isize).max(1) as usize
    }
}

fn graph_from_spec(spec: &InstanceSpec) -> Result<Graph> {
    let gs = spec
        .graph
        .as_ref()
        .ok_or_else(|| Error::Parse("instance needs a graph".into()))?;
    let graph = Graph {
        vertices: gs.vertices,
        edges: gs.edges.iter().map(|e| (e[0], e[1])).collect(),
    };
    graph.validate()?;
    Ok(graph)
}

fn digest_spec(spec: &InstanceSpec) -> String {
    let canon = serde_json::to_string(spec).expect("spec serializes");
    let mut hasher = Sha256::new();
    hasher.update(canon.as_bytes());
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn cap_check(count: usize, cap: usize) -> Result<()> {
    if count > cap {
        Err(Error::Capacity(format!(
            "|Omega| = {count} exceeds enumeration cap {cap}"
        )))
    } else {
        Ok(())
    }
}

fn finish_instance(
    kind: ProblemKind,
    graph: Option<Graph>,
    k: u32,
    lambda: f64,
    thetas: Vec<f64>,
    data: Vec<u8>,
    configs: Vec<Config>,
    energies: Vec<f64>,
    log_weights: Vec<f64>,
    energy_offset: f64,
    digest: String,
) -> ProblemInstance {
    let index = configs
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), i))
        .collect();
    let n_bound = energies.iter().copied().fold(0.0, f64::max);
    ProblemInstance {
        kind,
        graph,
        k,
        lambda,
        thetas,
        data,
        direction: Direction::Forward,
        configs,
        index,
        energies,
        log_weights,
        energy_offset,
        n_bound,
        digest,
    }
}

fn build_assignment_instance(
    kind: ProblemKind,
    graph: Graph,
    k: u32,
    cap: usize,
    digest: String,
) -> Result<ProblemInstance> {
    let v = graph.vertices;
    if v == 0 {
        return Err(Error::Parse("graph needs at least one vertex".into()));
    }
    let total = (k as usize)
        .checked_pow(v as u32)
        .ok_or_else(|| Error::Capacity("k^|V| overflows".into()))?;
    cap_check(total, cap)?;
    let mut configs = Vec::with_capacity(total);
    let mut energies = Vec::with_capacity(total);
    let mut assignment = vec![0u8; v];
    for idx in 0..total {
        let mut rest = idx;
        for slot in assignment.iter_mut() {
            *slot = (rest % k as usize) as u8;
            rest /= k as usize;
        }
        let c = Config::Assignment(assignment.clone());
        let h = match kind {
            ProblemKind::Coloring => graph
                .edges
                .iter()
                .filter(|&&(a, b)| assignment[a] == assignment[b])
                .count() as f64,
            ProblemKind::Ising => graph
                .edges
                .iter()
                .filter(|&&(a, b)| assignment[a] != assignment[b])
                .count() as f64,
            _ => unreachable!(),
        };
        configs.push(c);
        energies.push(h);
    }
    let log_weights = vec![0.0; total];
    Ok(finish_instance(
        kind,
        Some(graph),
        k,
        1.0,
        vec![],
        vec![],
        configs,
        energies,
        log_weights,
        0.0,
        digest,
    ))
}

fn build_matching_instance(graph: Graph, cap: usize, digest: String) -> Result<ProblemInstance> {
    let m = graph.edges.len();
    let mut configs = Vec::new();
    let mut energies = Vec::new();
    // Depth-first over edges with vertex-disjointness pruning; only valid
    // matchings are materialized.
    let mut selected = vec![false; m];
    let mut used = vec![false; graph.vertices];
    fn recurse(
        e: usize,
        graph: &Graph,
        selected: &mut Vec<bool>,
        used: &mut Vec<bool>,
        configs: &mut Vec<Config>,
        energies: &mut Vec<f64>,
        cap: usize,
    ) -> Result<()> {
        if e == graph.edges.len() {
            cap_check(configs.len() + 1, cap)?;
            configs.push(Config::EdgeSubset(selected.clone()));
            energies.push(selected.iter().filter(|&&b| b).count() as f64);
            return Ok(());
        }
        recurse(e + 1, graph, selected, used, configs, energies, cap)?;
        let (u, v) = graph.edges[e];
        if !used[u] && !used[v] {
            used[u] = true;
            used[v] = true;
            selected[e] = true;
            recurse(e + 1, graph, selected, used, configs, energies, cap)?;
            selected[e] = false;
            used[u] = false;
            used[v] = false;
        }
        Ok(())
    }
    recurse(
        0,
        &graph,
        &mut selected,
        &mut used,
        &mut configs,
        &mut energies,
        cap,
    )?;
    let n = configs.len();
    Ok(finish_instance(
        ProblemKind::Matching,
        Some(graph),
        0,
        1.0,
        vec![],
        vec![],
        configs,
        energies,
        vec![0.0; n],
        0.0,
        digest,
    ))
}

fn build_independent_set_instance(
    graph: Graph,
    lambda: f64,
    cap: usize,
    digest: String,
) -> Result<ProblemInstance> {
    let v = graph.vertices;
    let mut adjacency = vec![vec![]; v];
    for &(a, b) in &graph.edges {
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    let mut configs = Vec::new();
    let mut energies = Vec::new();
    let mut selected = vec![false; v];
    fn recurse(
        i: usize,
        v: usize,
        adjacency: &[Vec<usize>],
        selected: &mut Vec<bool>,
        configs: &mut Vec<Config>,
        energies: &mut Vec<f64>,
        cap: usize,
    ) -> Result<()> {
        if i == v {
            cap_check(configs.len() + 1, cap)?;
            configs.push(Config::VertexSubset(selected.clone()));
            energies.push(selected.iter().filter(|&&b| b).count() as f64);
            return Ok(());
        }
        recurse(i + 1, v, adjacency, selected, configs, energies, cap)?;
        if adjacency[i].iter().all(|&nb| !selected[nb]) {
            selected[i] = true;
            recurse(i + 1, v, adjacency, selected, configs, energies, cap)?;
            selected[i] = false;
        }
        Ok(())
    }
    recurse(
        0,
        v,
        &adjacency,
        &mut selected,
        &mut configs,
        &mut energies,
        cap,
    )?;
    let log_lambda = lambda.ln();
    let log_weights: Vec<f64> = energies.iter().map(|h| h * log_lambda).collect();
    Ok(finish_instance(
        ProblemKind::IndependentSet,
        Some(graph),
        0,
        lambda,
        vec![],
        vec![],
        configs,
        energies,
        log_weights,
        0.0,
        digest,
    ))
}

fn raw_neg_log_likelihood(theta: f64, data: &[u8]) -> f64 {
    data.iter()
        .map(|&x| {
            if x == 1 {
                -theta.ln()
            } else {
                -(1.0 - theta).ln()
            }
        })
        .sum()
}

fn build_bayes_instance(
    prior: Vec<f64>,
    thetas: Vec<f64>,
    data: Vec<u8>,
    cap: usize,
    digest: String,
) -> Result<ProblemInstance> {
    if prior.is_empty() {
        return Err(Error::Parse("prior must be nonempty".into()));
    }
    if prior.len() != thetas.len() {
        return Err(Error::Parse("prior and theta grid lengths differ".into()));
    }
    if prior.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::Parse("prior must be strictly positive".into()));
    }
    if thetas.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::Parse("theta grid must lie strictly inside (0,1)".into()));
    }
    if data.iter().any(|&x| x > 1) {
        return Err(Error::Parse("observations must be 0/1".into()));
    }
    cap_check(prior.len(), cap)?;
    let total: f64 = prior.iter().sum();
    let log_weights: Vec<f64> = prior.iter().map(|p| (p / total).ln()).collect();
    let raw: Vec<f64> = thetas
        .iter()
        .map(|&t| raw_neg_log_likelihood(t, &data))
        .collect();
    // Shift L so that min L = 0; the shift rescales Z by a constant that
    // cancels in every overlap and ratio.
    let offset = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let energies: Vec<f64> = raw.iter().map(|l| l - offset).collect();
    let configs: Vec<Config> = (0..prior.len()).map(Config::GridPoint).collect();
    Ok(finish_instance(
        ProblemKind::Bayes,
        None,
        0,
        1.0,
        thetas,
        data,
        configs,
        energies,
        log_weights,
        offset,
        digest,
    ))
}

/// Single-coordinate proposal moves from state `i`: the proposal
/// denominator and the list of distinct target states. Proposals that
/// would leave the state space contribute holding probability instead.
/// All proposal sets are symmetric, so Metropolis acceptance gives
/// detailed balance exactly.
pub fn proposal_moves(instance: &ProblemInstance, i: usize) -> (usize, Vec<usize>) {
    match (&instance.kind, instance.config(i)) {
        (ProblemKind::Coloring, Config::Assignment(colors)) => {
            let v = colors.len();
            let k = instance.k as usize;
            if k <= 1 {
                return (1, vec![]);
            }
            let mut targets = Vec::with_capacity(v * (k - 1));
            for site in 0..v {
                for c in 0..k as u8 {
                    if c != colors[site] {
                        let mut next = colors.clone();
                        next[site] = c;
                        targets.push(instance.index_of(&Config::Assignment(next)).unwrap());
                    }
                }
            }
            (v * (k - 1), targets)
        }
        (ProblemKind::Ising, Config::Assignment(spins)) => {
            let v = spins.len();
            let mut targets = Vec::with_capacity(v);
            for site in 0..v {
                let mut next = spins.clone();
                next[site] ^= 1;
                targets.push(instance.index_of(&Config::Assignment(next)).unwrap());
            }
            (v, targets)
        }
        (ProblemKind::Matching, Config::EdgeSubset(sel)) => {
            let graph = instance.graph.as_ref().unwrap();
            let mut used = vec![false; graph.vertices];
            for (e, &(u, v)) in graph.edges.iter().enumerate() {
                if sel[e] {
                    used[u] = true;
                    used[v] = true;
                }
            }
            let mut targets = Vec::new();
            for (e, &(u, v)) in graph.edges.iter().enumerate() {
                let mut next = sel.clone();
                if sel[e] {
                    next[e] = false;
                    targets.push(instance.index_of(&Config::EdgeSubset(next)).unwrap());
                } else if !used[u] && !used[v] {
                    next[e] = true;
                    targets.push(instance.index_of(&Config::EdgeSubset(next)).unwrap());
                }
            }
            (graph.edges.len().max(1), targets)
        }
        (ProblemKind::IndependentSet, Config::VertexSubset(sel)) => {
            let graph = instance.graph.as_ref().unwrap();
            let mut adjacency = vec![vec![]; graph.vertices];
            for &(a, b) in &graph.edges {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
            let mut targets = Vec::new();
            for v in 0..graph.vertices {
                let mut next = sel.clone();
                if sel[v] {
                    next[v] = false;
                    targets.push(instance.index_of(&Config::VertexSubset(next)).unwrap());
                } else if adjacency[v].iter().all(|&nb| !sel[nb]) {
                    next[v] = true;
                    targets.push(instance.index_of(&Config::VertexSubset(next)).unwrap());
                }
            }
            (graph.vertices, targets)
        }
        (ProblemKind::Bayes, Config::GridPoint(g)) => {
            let mut targets = Vec::new();
            if *g > 0 {
                targets.push(g - 1);
            }
            if *g + 1 < instance.size() {
                targets.push(g + 1);
            }
            (2, targets)
        }
        _ => unreachable!(),
    }
}

/// Builders for the instances bundled with the repository; the test and
/// acceptance suites share these with the shipped JSON files.
pub mod bundled {
    use super::*;

    fn build(json: &str) -> ProblemInstance {
        ProblemInstance::from_json(json, DEFAULT_ENUM_CAP).expect("bundled instance builds")
    }

    /// Triangle, 3 colors: 27 assignments, 6 proper colorings.
    pub fn k3_coloring() -> ProblemInstance {
        build(
            r#"{"kind":"coloring","graph":{"vertices":3,"edges":[[0,1],[1,2],[0,2]]},"k":3}"#,
        )
    }

    /// Path on 4 vertices, 3 colors: 81 assignments, 24 proper colorings.
    pub fn p4_coloring() -> ProblemInstance {
        build(
            r#"{"kind":"coloring","graph":{"vertices":4,"edges":[[0,1],[1,2],[2,3]]},"k":3}"#,
        )
    }

    /// 4-spin Ising cycle: 16 states, 2 ground states.
    pub fn ising_cycle4() -> ProblemInstance {
        build(
            r#"{"kind":"ising","graph":{"vertices":4,"edges":[[0,1],[1,2],[2,3],[3,0]]}}"#,
        )
    }

    /// Triangle matchings: empty set plus 3 single edges.
    pub fn k3_matching() -> ProblemInstance {
        build(
            r#"{"kind":"matching","graph":{"vertices":3,"edges":[[0,1],[1,2],[0,2]]}}"#,
        )
    }

    /// Triangle independent sets at unit fugacity: empty set plus 3 singletons.
    pub fn k3_independent_set() -> ProblemInstance {
        build(
            r#"{"kind":"independent_set","graph":{"vertices":3,"edges":[[0,1],[1,2],[0,2]]},"lambda":1.0}"#,
        )
    }

    /// 16-point coin-bias grid with a uniform prior and ten heads.
    pub fn coin16() -> ProblemInstance {
        let prior = vec![1.0 / 16.0; 16];
        let data = vec![1u8; 10];
        let spec = InstanceSpec {
            kind: ProblemKind::Bayes,
            graph: None,
            k: None,
            lambda: None,
            prior: Some(prior),
            data: Some(data),
            theta: None,
        };
        ProblemInstance::from_spec(&spec, DEFAULT_ENUM_CAP).unwrap()
    }

    /// Same grid with no observations: posterior equals the prior.
    pub fn coin16_nodata() -> ProblemInstance {
        let prior = vec![1.0 / 16.0; 16];
        let spec = InstanceSpec {
            kind: ProblemKind::Bayes,
            graph: None,
            k: None,
            lambda: None,
            prior: Some(prior),
            data: Some(vec![]),
            theta: None,
        };
        ProblemInstance::from_spec(&spec, DEFAULT_ENUM_CAP).unwrap()
    }

    /// 1-spin Ising chain with no edges: H = 0 everywhere, Z(beta) = 2.
    pub fn free_spin() -> ProblemInstance {
        build(r#"{"kind":"ising","graph":{"vertices":1,"edges":[]}}"#)
    }

    /// Every counting instance used by the invariant suites.
    pub fn counting_set() -> Vec<(&'static str, ProblemInstance)> {
        vec![
            ("k3_coloring", k3_coloring()),
            ("p4_coloring", p4_coloring()),
            ("ising_cycle4", ising_cycle4()),
            ("k3_matching", k3_matching()),
            ("k3_independent_set", k3_independent_set()),
        ]
    }

    pub fn all_set() -> Vec<(&'static str, ProblemInstance)> {
        let mut v = counting_set();
        v.push(("coin16", coin16()));
        v
    }
}
