//! Distances between distributions and numeric checkers for the
//! inequalities used by the search lower bound.
//!
//! Total variation is always the halved ℓ1 distance, so it lies in [0, 1].
//! Trace distance of pure states is `√(1 − |⟨a|b⟩|²)`, also in [0, 1].

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::algorithms::grover_iteration;
use crate::circuit::{Circuit, ClassicalFunction, ValidationMode};
use crate::error::{Error, Result};
use crate::hidden_variables::{product_theory_joint, BlockStructure, JointProbabilityMatrix};
use crate::qp_oracle::HistoryDistribution;
use crate::statevector::{GateOp, Oracle, StateVector};

/// Tolerance for "sums to one".
pub const SUM_TOLERANCE: f64 = 1e-10;

/// A probability distribution with finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution<K: Ord> {
    probs: BTreeMap<K, f64>,
}

impl<K: Ord + Clone> FiniteDistribution<K> {
    /// Zero entries are dropped; the rest must be non-negative and sum to 1.
    pub fn new(probs: BTreeMap<K, f64>) -> Result<Self> {
        let mut total = 0.0;
        for p in probs.values() {
            if !(p.is_finite() && *p >= 0.0) {
                return Err(Error::InvalidArgument(format!("invalid probability {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!("probabilities sum to {total}")));
        }
        Ok(FiniteDistribution {
            probs: probs.into_iter().filter(|(_, p)| *p > 0.0).collect(),
        })
    }

    /// Normalizes non-negative weights; repeated keys accumulate.
    pub fn from_weights(weights: impl IntoIterator<Item = (K, f64)>) -> Result<Self> {
        let mut probs = BTreeMap::new();
        for (k, w) in weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidArgument(format!("invalid weight {w}")));
            }
            *probs.entry(k).or_insert(0.0) += w;
        }
        let total: f64 = probs.values().sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("weights sum to zero".into()));
        }
        probs.values_mut().for_each(|p| *p /= total);
        Self::new(probs)
    }

    pub fn empirical(samples: impl IntoIterator<Item = K>) -> Result<Self> {
        Self::from_weights(samples.into_iter().map(|k| (k, 1.0)))
    }

    pub fn point(k: K) -> Self {
        FiniteDistribution {
            probs: BTreeMap::from([(k, 1.0)]),
        }
    }

    pub fn probability(&self, k: &K) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, f64)> {
        self.probs.iter().map(|(k, p)| (k, *p))
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        0.5 * self.abs_differences(other).sum::<f64>()
    }

    pub fn max_abs_difference(&self, other: &Self) -> f64 {
        self.abs_differences(other).fold(0.0, f64::max)
    }

    fn abs_differences<'a>(&'a self, other: &'a Self) -> impl Iterator<Item = f64> + 'a {
        let only_other = other
            .probs
            .iter()
            .filter(|(k, _)| !self.probs.contains_key(*k))
            .map(|(_, q)| *q);
        self.probs
            .iter()
            .map(|(k, p)| (p - other.probability(k)).abs())
            .chain(only_other)
    }

    /// Pushforward under `f`.
    pub fn map<K2: Ord + Clone>(&self, f: impl Fn(&K) -> K2) -> FiniteDistribution<K2> {
        let mut probs = BTreeMap::new();
        for (k, p) in &self.probs {
            *probs.entry(f(k)).or_insert(0.0) += p;
        }
        FiniteDistribution { probs }
    }
}

/// Halved ℓ1 distance over the union of supports.
pub fn total_variation<K: Ord + Clone>(p: &FiniteDistribution<K>, q: &FiniteDistribution<K>) -> f64 {
    p.total_variation(q)
}

/// Distribution of `(v_{i-1}, v_i)` under a history distribution.
pub fn pair_marginal(h: &HistoryDistribution, i: usize) -> Result<FiniteDistribution<(usize, usize)>> {
    h.pair_marginal(i)
}

fn halved_l1(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// A time-inhomogeneous Markov chain `v_0, …, v_T` on finite state spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChainSpec {
    initial: Vec<f64>,
    /// `transitions[i][a][b] = P(v_{i+1} = b | v_i = a)`.
    transitions: Vec<Vec<Vec<f64>>>,
}

/// Largest state space and chain length the TV checker enumerates.
pub const MARKOV_MAX_STATES: usize = 8;
pub const MARKOV_MAX_STEPS: usize = 6;

impl MarkovChainSpec {
    pub fn new(initial: Vec<f64>, transitions: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let stochastic = |row: &[f64]| {
            row.iter().all(|p| p.is_finite() && *p >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE
        };
        if initial.is_empty() || !stochastic(&initial) {
            return Err(Error::InvalidArgument("initial distribution is not stochastic".into()));
        }
        let mut size = initial.len();
        for (i, m) in transitions.iter().enumerate() {
            if m.len() != size {
                return Err(Error::InvalidArgument(format!(
                    "transition {} has {} rows, expected {size}",
                    i + 1,
                    m.len()
                )));
            }
            let next = m.first().map_or(0, Vec::len);
            if next == 0 || m.iter().any(|row| row.len() != next || !stochastic(row)) {
                return Err(Error::InvalidArgument(format!(
                    "transition {} is not row-stochastic",
                    i + 1
                )));
            }
            size = next;
        }
        Ok(MarkovChainSpec { initial, transitions })
    }

    /// A random chain with the given state-space sizes (`sizes.len() = T+1`).
    /// About a third of the entries are zero so supports differ.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, sizes: &[usize]) -> Self {
        let mut row = |len: usize| {
            let mut w: Vec<f64> = (0..len)
                .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen::<f64>() })
                .collect();
            if w.iter().all(|&x| x == 0.0) {
                w[rng.gen_range(0..len)] = 1.0;
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            w
        };
        let initial = row(sizes[0]);
        let transitions = sizes
            .windows(2)
            .map(|p| (0..p[0]).map(|_| row(p[1])).collect())
            .collect();
        MarkovChainSpec::new(initial, transitions).expect("random chain is stochastic")
    }

    /// T, the number of transitions.
    pub fn steps(&self) -> usize {
        self.transitions.len()
    }

    pub fn state_sizes(&self) -> Vec<usize> {
        std::iter::once(self.initial.len())
            .chain(self.transitions.iter().map(|m| m[0].len()))
            .collect()
    }

    /// Distribution of `v_i`.
    pub fn marginal(&self, i: usize) -> Vec<f64> {
        let mut p = self.initial.clone();
        for m in &self.transitions[..i] {
            let mut next = vec![0.0; m[0].len()];
            for (a, row) in m.iter().enumerate() {
                for (b, t) in row.iter().enumerate() {
                    next[b] += p[a] * t;
                }
            }
            p = next;
        }
        p
    }

    /// Distribution of `(v_{i-1}, v_i)`, row-major over `(a, b)`.
    pub fn pair(&self, i: usize) -> Vec<f64> {
        let prev = self.marginal(i - 1);
        self.transitions[i - 1]
            .iter()
            .zip(&prev)
            .flat_map(|(row, pa)| row.iter().map(move |t| pa * t))
            .collect()
    }

    /// Full joint distribution over mixed-radix history indices (v_0 most
    /// significant).
    pub fn joint(&self) -> Vec<f64> {
        let mut joint = self.initial.clone();
        let mut size = self.initial.len();
        for m in &self.transitions {
            let mut out = Vec::with_capacity(joint.len() * m[0].len());
            for (idx, &q) in joint.iter().enumerate() {
                out.extend(m[idx % size].iter().map(|t| q * t));
            }
            joint = out;
            size = m[0].len();
        }
        joint
    }
}

/// Two chains whose single-step marginals agree everywhere but whose
/// histories are perfectly distinguishable: uniform `v_0`, then `v_1 = v_0`
/// in the first chain and `v_1 = 1 − v_0` in the second.
pub fn correlation_flip_pair() -> (MarkovChainSpec, MarkovChainSpec) {
    let keep = MarkovChainSpec::new(vec![0.5, 0.5], vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]]);
    let flip = MarkovChainSpec::new(vec![0.5, 0.5], vec![vec![vec![0.0, 1.0], vec![1.0, 0.0]]]);
    (keep.expect("valid"), flip.expect("valid"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkovCheck {
    /// d_TV(v, w) over full histories.
    pub lhs: f64,
    /// 2 Σ_{i=1}^T d_TV((v_{i-1}, v_i), (w_{i-1}, w_i))
    pub rhs: f64,
    pub holds: bool,
    /// Σ_{i=0}^T d_TV(v_i, w_i), which does not bound `lhs`.
    pub marginal_sum: f64,
}

/// Checks `d_TV(v, w) ≤ 2 Σ_i d_TV((v_{i-1}, v_i), (w_{i-1}, w_i))` exactly.
pub fn check_markov_tv_lemma(v: &MarkovChainSpec, w: &MarkovChainSpec) -> Result<MarkovCheck> {
    let sizes = v.state_sizes();
    if sizes != w.state_sizes() {
        return Err(Error::InvalidArgument("chains have different state spaces".into()));
    }
    let largest = sizes.iter().copied().max().unwrap_or(0);
    if largest > MARKOV_MAX_STATES || v.steps() > MARKOV_MAX_STEPS {
        return Err(Error::BudgetExceeded {
            needed: sizes.iter().map(|&s| s as u128).product(),
            budget: (MARKOV_MAX_STATES as u128).pow(MARKOV_MAX_STEPS as u32 + 1),
        });
    }
    let lhs = halved_l1(&v.joint(), &w.joint());
    let rhs = 2.0 * (1..=v.steps()).map(|i| halved_l1(&v.pair(i), &w.pair(i))).sum::<f64>();
    let marginal_sum = (0..=v.steps()).map(|i| halved_l1(&v.marginal(i), &w.marginal(i))).sum();
    Ok(MarkovCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-10,
        marginal_sum,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceL2Result {
    pub trace: f64,
    pub l2: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceL2Report {
    pub results: Vec<TraceL2Result>,
    pub failures: usize,
}

/// Trace distance never exceeds the 2-norm distance (1e-12 slack).
pub fn check_trace_vs_l2(pairs: &[(StateVector, StateVector)]) -> Result<TraceL2Report> {
    let results = pairs
        .iter()
        .map(|(a, b)| {
            let trace = a.trace_distance(b)?;
            let l2 = a.l2_distance(b)?;
            Ok(TraceL2Result {
                trace,
                l2,
                holds: trace <= l2 + 1e-12,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let failures = results.iter().filter(|r| !r.holds).count();
    Ok(TraceL2Report { results, failures })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HybridStep {
    /// Checkpoint index: 0 is |0⟩, 1 is after the Hadamard layer, then one
    /// checkpoint after each oracle call and after each diffusion.
    pub t: usize,
    pub queries: usize,
    /// Σ_x ‖ψ_t − ψ_t(x)‖₂²
    pub sum: f64,
    /// 4Q²
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HybridReport {
    pub steps: Vec<HybridStep>,
    pub holds: bool,
}

/// Largest `n` the hybrid check simulates (all `2^n` marked variants).
pub const HYBRID_MAX_BITS: usize = 12;

fn grover_checkpoints(n: usize, k: usize, marked: Option<usize>) -> Result<Vec<StateVector>> {
    let f = Oracle::new("f", ClassicalFunction::indicator(n, marked)?);
    let mut state = StateVector::zero(n)?;
    let mut out = vec![state.clone()];
    state.apply_all(&(0..n).map(GateOp::h).collect::<Vec<_>>())?;
    out.push(state.clone());
    let (query, diffusion) = grover_iteration(n, &f)?;
    for _ in 0..k {
        state.apply(&query)?;
        out.push(state.clone());
        state.apply_all(&diffusion)?;
        out.push(state.clone());
    }
    Ok(out)
}

/// Simulates Grover search with no marked item and with each of the `N`
/// possible marked items, and checks `Σ_x ‖ψ_t − ψ_t(x)‖₂² ≤ 4Q²` at every
/// checkpoint. The circuit has no measurements.
pub fn check_hybrid_bound(n: usize, k: usize) -> Result<HybridReport> {
    if n == 0 || n > HYBRID_MAX_BITS {
        return Err(Error::InvalidArgument(format!("n = {n} outside 1..={HYBRID_MAX_BITS}")));
    }
    let base = grover_checkpoints(n, k, None)?;
    let per_x: Vec<Vec<f64>> = (0..1usize << n)
        .into_par_iter()
        .map(|x| {
            let run = grover_checkpoints(n, k, Some(x))?;
            base.iter()
                .zip(&run)
                .map(|(a, b)| a.l2_distance(b).map(|d| d * d))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let steps: Vec<HybridStep> = (0..base.len())
        .map(|t| {
            let sum: f64 = per_x.iter().map(|d| d[t]).sum();
            let queries = if t < 2 { 0 } else { t / 2 };
            let bound = 4.0 * (queries * queries) as f64;
            HybridStep {
                t,
                queries,
                sum,
                bound,
                holds: sum <= bound + 1e-9,
            }
        })
        .collect();
    let holds = steps.iter().all(|s| s.holds);
    Ok(HybridReport { steps, holds })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairwiseCheck {
    /// d_TV((v_{i-1}, v_i), (v_{i-1}(x), v_i(x)))
    pub d: f64,
    /// 5 ‖φ(x) − φ‖₂
    pub bound: f64,
    pub holds: bool,
}

/// The measurement-deferred state `U_{i-1} ⋯ U_1 |0⟩` (no collapses).
pub fn deferred_state(circuit: &Circuit, steps: usize) -> Result<StateVector> {
    let mut phi = StateVector::zero(circuit.num_qubits())?;
    for step in &circuit.steps()[..steps] {
        phi.apply_all(&step.gates)?;
    }
    Ok(phi)
}

/// Exact distribution of `(v_{i-1}, v_i)` with the measurements before `U_i`
/// deferred: the product-theory joint matrix of the deferred state, `U_i`,
/// and the partition by previously measured qubits. Needs a write-once
/// circuit.
pub fn deferred_pair_distribution(circuit: &Circuit, i: usize) -> Result<JointProbabilityMatrix> {
    if i == 0 || i > circuit.len() {
        return Err(Error::InvalidArgument(format!(
            "step {i} outside 1..={}",
            circuit.len()
        )));
    }
    if let Some(v) = circuit.validate(ValidationMode::WriteOnce).into_iter().next() {
        return Err(Error::Hypothesis(format!("circuit is not write-once: {v}")));
    }
    let phi = deferred_state(circuit, i - 1)?;
    let measured: Vec<usize> = circuit.steps()[..i - 1]
        .iter()
        .flat_map(|s| s.measured.iter().copied())
        .fold(Vec::new(), |mut acc, q| {
            if !acc.contains(&q) {
                acc.push(q);
            }
            acc
        });
    let blocks = BlockStructure::from_measured_qubits(circuit.num_qubits(), &measured);
    product_theory_joint(&phi, &circuit.steps()[i - 1].gates, &blocks)
}

/// `variant` must equal `base` except in query steps: steps made only of
/// diagonal (phase) gates, which is how oracle variants differ.
fn check_oracle_variant(base: &Circuit, variant: &Circuit) -> Result<()> {
    if base.num_qubits() != variant.num_qubits() || base.len() != variant.len() {
        return Err(Error::Hypothesis("circuits differ in shape".into()));
    }
    for (t, (a, b)) in base.steps().iter().zip(variant.steps()).enumerate() {
        if a.measured != b.measured || a.gates.len() != b.gates.len() {
            return Err(Error::Hypothesis(format!("step {} differs in structure", t + 1)));
        }
        let diagonal = a.gates.iter().chain(&b.gates).all(GateOp::is_diagonal);
        if a.gates != b.gates && !diagonal {
            return Err(Error::Hypothesis(format!(
                "step {} differs but is not a pure query step",
                t + 1
            )));
        }
    }
    Ok(())
}

/// Checks `d_{x,i} ≤ 5 ‖φ(x) − φ‖₂` for one oracle variant and step `i`.
pub fn check_pairwise_tv_bound(base: &Circuit, variant: &Circuit, i: usize) -> Result<PairwiseCheck> {
    check_oracle_variant(base, variant)?;
    let p = deferred_pair_distribution(base, i)?;
    let px = deferred_pair_distribution(variant, i)?;
    let d = 0.5 * p.l1_distance(&px)?;
    let bound = 5.0 * deferred_state(base, i - 1)?.l2_distance(&deferred_state(variant, i - 1)?)?;
    Ok(PairwiseCheck {
        d,
        bound,
        holds: d <= bound + 1e-9,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProductFidelityCheck {
    /// d_TV between the two history distributions (halved ℓ1).
    pub lhs: f64,
    /// √(1 − Π_t |⟨ψ_t|ψ_t^x⟩|²), the trace distance of ⊗_t ψ_t and ⊗_t ψ_t^x.
    pub rhs: f64,
    pub holds: bool,
}

/// Default cap on the number of joint outcomes the product check enumerates.
pub const PRODUCT_BUDGET: u128 = 1 << 24;

fn step_states(circuit: &Circuit) -> Result<Vec<StateVector>> {
    let mut state = StateVector::zero(circuit.num_qubits())?;
    let mut out = vec![state.clone()];
    for step in circuit.steps() {
        state.apply_all(&step.gates)?;
        out.push(state.clone());
    }
    Ok(out)
}

/// For measurement-free circuits the history is a product of independent
/// Born samples, so its distance is bounded by the trace distance of the
/// product states.
pub fn check_product_fidelity_chain(base: &Circuit, variant: &Circuit, budget: u128) -> Result<ProductFidelityCheck> {
    if base.has_measurements() || variant.has_measurements() {
        return Err(Error::Hypothesis("circuit contains collapsing measurements".into()));
    }
    if base.num_qubits() != variant.num_qubits() || base.len() != variant.len() {
        return Err(Error::InvalidArgument("circuits differ in shape".into()));
    }
    let a = step_states(base)?;
    let b = step_states(variant)?;
    let mut fidelity = 1.0;
    // Identical factors cancel out of the product TVD; keep the others.
    let mut factors: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (s, t) in a.iter().zip(&b) {
        fidelity *= s.inner(t)?.norm_sqr();
        let (p, q) = (s.probabilities(), t.probabilities());
        if p.iter().zip(&q).any(|(x, y)| (x - y).abs() > 1e-15) {
            let keep: Vec<usize> = (0..p.len()).filter(|&k| p[k] > 0.0 || q[k] > 0.0).collect();
            factors.push((
                keep.iter().map(|&k| p[k]).collect(),
                keep.iter().map(|&k| q[k]).collect(),
            ));
        }
    }
    let needed = factors
        .iter()
        .fold(1u128, |acc, (p, _)| acc.saturating_mul(p.len() as u128));
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let lhs = 0.5 * product_l1(&factors, 1.0, 1.0);
    let rhs = (1.0 - fidelity).max(0.0).sqrt();
    Ok(ProductFidelityCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
    })
}

fn product_l1(factors: &[(Vec<f64>, Vec<f64>)], p: f64, q: f64) -> f64 {
    match factors.split_first() {
        None => (p - q).abs(),
        Some(((ps, qs), rest)) => ps
            .iter()
            .zip(qs)
            .map(|(x, y)| {
                let (np, nq) = (p * x, q * y);
                if np == 0.0 && nq == 0.0 {
                    0.0
                } else {
                    product_l1(rest, np, nq)
                }
            })
            .sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Step;
    use crate::qp_oracle::{history_distribution_exact, DEFAULT_BUDGET};

    fn dist(pairs: &[(usize, f64)]) -> FiniteDistribution<usize> {
        FiniteDistribution::new(pairs.iter().copied().collect()).unwrap()
    }

    #[test]
    fn total_variation_examples() {
        let p = dist(&[(0, 0.5), (1, 0.5)]);
        assert_eq!(total_variation(&p, &p), 0.0);
        assert_eq!(total_variation(&dist(&[(0, 1.0)]), &dist(&[(1, 1.0)])), 1.0);
        assert!((total_variation(&p, &dist(&[(0, 0.75), (1, 0.25)])) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(FiniteDistribution::new(BTreeMap::from([(0, 0.5)])).is_err());
        assert!(FiniteDistribution::new(BTreeMap::from([(0, 1.5), (1, -0.5)])).is_err());
    }

    #[test]
    fn flip_pair_numbers() {
        let (v, w) = correlation_flip_pair();
        let r = check_markov_tv_lemma(&v, &w).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-15);
        assert!((r.rhs - 2.0).abs() < 1e-15);
        assert_eq!(r.marginal_sum, 0.0);
        assert!(r.holds);
        let same = check_markov_tv_lemma(&v, &v).unwrap();
        assert_eq!((same.lhs, same.rhs, same.marginal_sum), (0.0, 0.0, 0.0));
    }

    #[test]
    fn chain_joint_matches_marginals() {
        let mut rng = crate::rng::seeded(5);
        let c = MarkovChainSpec::random(&mut rng, &[2, 3, 2]);
        let joint = c.joint();
        assert_eq!(joint.len(), 12);
        assert!((joint.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut last = [0.0; 2];
        for (k, p) in joint.iter().enumerate() {
            last[k % 2] += p;
        }
        for (a, b) in last.iter().zip(c.marginal(2)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_examples() {
        let z = StateVector::zero(1).unwrap();
        let o = StateVector::basis(1, 1).unwrap();
        let r = check_trace_vs_l2(&[(z.clone(), z.clone()), (z, o)]).unwrap();
        assert_eq!(r.failures, 0);
        assert!((r.results[1].l2 - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hybrid_small() {
        let r = check_hybrid_bound(3, 2).unwrap();
        assert!(r.holds);
        assert_eq!(r.steps[0].sum, 0.0);
        assert_eq!(r.steps[1].bound, 0.0);
        assert_eq!(r.steps.len(), 6);
    }

    #[test]
    fn deferred_pair_matches_enumeration() {
        let c = Circuit::new(
            2,
            vec![
                Step::new(vec![GateOp::h(0), GateOp::cnot(0, 1)], vec![0]),
                Step::gates(vec![GateOp::h(1)]),
                Step::empty(),
            ],
        )
        .unwrap();
        let h = history_distribution_exact(&c, DEFAULT_BUDGET).unwrap();
        for i in 1..=3 {
            let m = deferred_pair_distribution(&c, i).unwrap();
            let pm = pair_marginal(&h, i).unwrap();
            for a in 0..4 {
                for b in 0..4 {
                    assert!((m.get(a, b) - pm.probability(&(a, b))).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pairwise_identical_variant() {
        let c = Circuit::new(1, vec![Step::new(vec![GateOp::h(0)], vec![0]), Step::empty()]).unwrap();
        let r = check_pairwise_tv_bound(&c, &c, 2).unwrap();
        assert_eq!((r.d, r.bound), (0.0, 0.0));
    }

    #[test]
    fn pairwise_rejects_non_diagonal_difference() {
        let a = Circuit::new(1, vec![Step::gates(vec![GateOp::h(0)])]).unwrap();
        let b = Circuit::new(1, vec![Step::gates(vec![GateOp::x(0)])]).unwrap();
        assert!(matches!(check_pairwise_tv_bound(&a, &b, 1), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn product_fidelity_single_step_is_data_processing() {
        let a = Circuit::new(1, vec![Step::gates(vec![GateOp::h(0)])]).unwrap();
        let b = Circuit::new(1, vec![Step::gates(vec![GateOp::x(0)])]).unwrap();
        let r = check_product_fidelity_chain(&a, &b, PRODUCT_BUDGET).unwrap();
        assert!((r.lhs - 0.5).abs() < 1e-12);
        assert!((r.rhs - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(r.holds);
        let same = check_product_fidelity_chain(&a, &a, PRODUCT_BUDGET).unwrap();
        assert_eq!(same.lhs, 0.0);
        let m = Circuit::new(1, vec![Step::new(vec![], vec![0])]).unwrap();
        assert!(matches!(
            check_product_fidelity_chain(&m, &m, PRODUCT_BUDGET),
            Err(Error::Hypothesis(_))
        ));
    }
}
