//! The sampling oracle: run a circuit from |0…0⟩, collapsing where the
//! circuit measures, and record one non-collapsing computational-basis
//! sample of the state after every step.
//!
//! Also here: the block-structured form of the oracle, the conversion from
//! one form to the other, and exact enumeration of history distributions.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::analysis::FiniteDistribution;
use crate::circuit::{Circuit, ValidationMode};
use crate::error::{Error, Result};
use crate::hidden_variables::{check_block_chain, BlockStructure, BlockWeights};
use crate::statevector::{gather_bits, BornSampler, GateOp, StateVector};

/// Default enumeration budget for exact history distributions.
pub const DEFAULT_BUDGET: u128 = 1 << 24;
/// Collapse branches below this probability are dropped during enumeration.
pub const BRANCH_CUTOFF: f64 = 1e-14;
/// Born entries below this probability are dropped during enumeration.
const ENTRY_CUTOFF: f64 = 1e-16;

/// One run of the oracle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct History {
    /// `v_0, …, v_T` as basis indices.
    pub samples: Vec<usize>,
    /// Outcome bits of each step's collapsing measurement, in the order the
    /// step lists its qubits (empty for steps without one).
    pub collapse_outcomes: Vec<Vec<u8>>,
}

/// Exact or empirical distribution over histories `(v_0, …, v_T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryDistribution {
    dist: FiniteDistribution<Vec<usize>>,
}

impl HistoryDistribution {
    pub fn new(probabilities: BTreeMap<Vec<usize>, f64>) -> Result<Self> {
        let lengths: Vec<usize> = probabilities.keys().map(Vec::len).collect();
        if lengths.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::InvalidArgument("histories of different lengths".into()));
        }
        Ok(HistoryDistribution {
            dist: FiniteDistribution::new(probabilities)?,
        })
    }

    /// Empirical distribution of sampled histories.
    pub fn empirical<'a>(histories: impl IntoIterator<Item = &'a History>) -> Result<Self> {
        let dist = FiniteDistribution::empirical(histories.into_iter().map(|h| h.samples.clone()))?;
        Ok(HistoryDistribution { dist })
    }

    pub fn distribution(&self) -> &FiniteDistribution<Vec<usize>> {
        &self.dist
    }

    pub fn probability(&self, history: &[usize]) -> f64 {
        self.dist.probability(&history.to_vec())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<usize>, f64)> {
        self.dist.iter()
    }

    pub fn support_size(&self) -> usize {
        self.dist.support_size()
    }

    /// T, the number of steps.
    pub fn steps(&self) -> usize {
        self.dist.iter().next().map_or(0, |(h, _)| h.len() - 1)
    }

    pub fn total_variation(&self, other: &HistoryDistribution) -> f64 {
        self.dist.total_variation(&other.dist)
    }

    /// Largest per-history probability difference.
    pub fn max_abs_difference(&self, other: &HistoryDistribution) -> f64 {
        self.dist.max_abs_difference(&other.dist)
    }

    /// Distribution of `v_i`.
    pub fn marginal(&self, i: usize) -> Result<FiniteDistribution<usize>> {
        if i > self.steps() {
            return Err(Error::InvalidArgument(format!("step {i} beyond T = {}", self.steps())));
        }
        Ok(self.dist.map(|h| h[i]))
    }

    /// Distribution of `(v_{i-1}, v_i)` for `1 ≤ i ≤ T`.
    pub fn pair_marginal(&self, i: usize) -> Result<FiniteDistribution<(usize, usize)>> {
        if i == 0 || i > self.steps() {
            return Err(Error::InvalidArgument(format!(
                "pair index {i} outside 1..={}",
                self.steps()
            )));
        }
        Ok(self.dist.map(|h| (h[i - 1], h[i])))
    }

    /// Largest gap between the distribution and the Markov chain built from
    /// its own pair marginals: `P(v_0) Π_i P(v_{i-1}, v_i) / P(v_{i-1})`.
    /// Zero (up to rounding) iff the history is a Markov process.
    pub fn markov_defect(&self) -> f64 {
        let t = self.steps();
        let singles: Vec<_> = (0..=t).map(|i| self.dist.map(|h| h[i])).collect();
        let pairs: Vec<_> = (1..=t).map(|i| self.dist.map(|h| (h[i - 1], h[i]))).collect();
        let chain = |h: &Vec<usize>| {
            let mut p = singles[0].probability(&h[0]);
            for i in 1..=t {
                p *= pairs[i - 1].probability(&(h[i - 1], h[i])) / singles[i - 1].probability(&h[i - 1]);
            }
            p
        };
        // The chain's support is contained in the product of pair supports;
        // enumerate it by extending histories one step at a time.
        let mut frontier: Vec<Vec<usize>> = singles[0].iter().map(|(v, _)| vec![*v]).collect();
        for pair in &pairs {
            let mut next = Vec::new();
            for h in &frontier {
                let last = *h.last().expect("non-empty");
                for ((a, b), _) in pair.iter() {
                    if *a == last {
                        let mut e = h.clone();
                        e.push(*b);
                        next.push(e);
                    }
                }
            }
            frontier = next;
        }
        let mut defect = 0.0f64;
        for h in &frontier {
            defect = defect.max((chain(h) - self.dist.probability(h)).abs());
        }
        for (h, p) in self.dist.iter() {
            defect = defect.max((chain(h) - p).abs());
        }
        defect
    }
}

/// Reusable sampler for one circuit.
///
/// States up to the first collapsing measurement do not depend on the
/// randomness, so they are computed once; so is the pre-collapse state of
/// the first measuring step.
#[derive(Debug, Clone)]
pub struct QpSampler<'c> {
    circuit: &'c Circuit,
    /// Sampler for each of `v_0 … v_p`, indexing into `prefix_samplers`.
    prefix: Vec<usize>,
    prefix_samplers: Vec<BornSampler>,
    /// State after the gates of step `p + 1` (0-based index `p`), if any.
    pending: Option<StateVector>,
}

impl<'c> QpSampler<'c> {
    pub fn new(circuit: &'c Circuit) -> Result<Self> {
        circuit.ensure_valid()?;
        let mut state = StateVector::zero(circuit.num_qubits())?;
        let mut prefix_samplers = vec![BornSampler::new(&state)?];
        let mut prefix = vec![0];
        let mut pending = None;
        for step in circuit.steps() {
            state.apply_all(&step.gates)?;
            if !step.measured.is_empty() {
                pending = Some(state);
                break;
            }
            if !step.gates.is_empty() {
                prefix_samplers.push(BornSampler::new(&state)?);
            }
            prefix.push(prefix_samplers.len() - 1);
        }
        Ok(QpSampler {
            circuit,
            prefix,
            prefix_samplers,
            pending,
        })
    }

    pub fn circuit(&self) -> &Circuit {
        self.circuit
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<History> {
        let steps = self.circuit.steps();
        let mut samples = Vec::with_capacity(steps.len() + 1);
        let mut collapse_outcomes = Vec::with_capacity(steps.len());
        for &k in &self.prefix {
            samples.push(self.prefix_samplers[k].sample(rng));
        }
        collapse_outcomes.resize(self.prefix.len() - 1, Vec::new());
        let Some(pending) = &self.pending else {
            return Ok(History {
                samples,
                collapse_outcomes,
            });
        };
        let first = self.prefix.len() - 1;
        let mut state = pending.clone();
        let outcome = state.collapse_measure(&steps[first].measured, rng)?;
        collapse_outcomes.push(outcome);
        let mut sampler = BornSampler::new(&state)?;
        samples.push(sampler.sample(rng));
        for step in &steps[first + 1..] {
            if step.gates.is_empty() && step.measured.is_empty() {
                samples.push(sampler.sample(rng));
                collapse_outcomes.push(Vec::new());
                continue;
            }
            state.apply_all(&step.gates)?;
            collapse_outcomes.push(state.collapse_measure(&step.measured, rng)?);
            sampler = BornSampler::new(&state)?;
            samples.push(sampler.sample(rng));
        }
        Ok(History {
            samples,
            collapse_outcomes,
        })
    }
}

/// One oracle call.
pub fn sample_history<R: Rng + ?Sized>(circuit: &Circuit, rng: &mut R) -> Result<History> {
    QpSampler::new(circuit)?.sample(rng)
}

fn born_entries(state: &StateVector) -> Vec<(usize, f64)> {
    state
        .probabilities()
        .into_iter()
        .enumerate()
        .filter(|&(_, p)| p > ENTRY_CUTOFF)
        .collect()
}

/// Worst-case size of the enumeration: `2^(ℓ(T+1))` histories times the
/// number of collapse branches.
pub(crate) fn enumeration_size(circuit: &Circuit) -> u128 {
    let bits =
        circuit.num_qubits() * (circuit.len() + 1) + circuit.steps().iter().map(|s| s.measured.len()).sum::<usize>();
    if bits >= 127 {
        u128::MAX
    } else {
        1u128 << bits
    }
}

/// Exact distribution of the oracle's output, by enumerating every collapse
/// branch and multiplying per-step Born distributions.
pub fn history_distribution_exact(circuit: &Circuit, budget: u128) -> Result<HistoryDistribution> {
    circuit.ensure_valid()?;
    let needed = enumeration_size(circuit);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let state = StateVector::zero(circuit.num_qubits())?;
    let start: Vec<(Vec<usize>, f64)> = born_entries(&state).into_iter().map(|(v, p)| (vec![v], p)).collect();
    let mut out = BTreeMap::new();
    enumerate_branches(circuit, 0, state, start, &mut out)?;
    HistoryDistribution::new(out)
}

fn enumerate_branches(
    circuit: &Circuit,
    t: usize,
    mut state: StateVector,
    partial: Vec<(Vec<usize>, f64)>,
    out: &mut BTreeMap<Vec<usize>, f64>,
) -> Result<()> {
    let Some(step) = circuit.steps().get(t) else {
        for (h, p) in partial {
            *out.entry(h).or_insert(0.0) += p;
        }
        return Ok(());
    };
    state.apply_all(&step.gates)?;
    let k = step.measured.len();
    let mut weights = vec![0.0f64; 1 << k];
    for (i, a) in state.amplitudes().iter().enumerate() {
        weights[gather_bits(i, &step.measured)] += a.norm_sqr();
    }
    for (o, &w) in weights.iter().enumerate() {
        if w < BRANCH_CUTOFF {
            continue;
        }
        let mut branch = state.clone();
        let bits: Vec<u8> = (0..k).map(|b| ((o >> b) & 1) as u8).collect();
        if k > 0 {
            branch.project(&step.measured, &bits)?;
        }
        let born = born_entries(&branch);
        let mut next = Vec::with_capacity(partial.len() * born.len());
        for (h, p) in &partial {
            for &(v, q) in &born {
                let mut e = Vec::with_capacity(h.len() + 1);
                e.extend_from_slice(h);
                e.push(v);
                next.push((e, p * w * q));
            }
        }
        enumerate_branches(circuit, t + 1, branch, next, out)?;
    }
    Ok(())
}

/// A circuit recast for the block-structured oracle: unitaries `U_t` with
/// block structures `B_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockForm {
    pub num_qubits: usize,
    pub unitaries: Vec<Vec<GateOp>>,
    pub blocks: Vec<BlockStructure>,
}

/// Keeps each `U_t` and sets `B_t` to the partition by the values of the
/// qubits measured in `M_1 … M_{t-1}`. Requires a write-once circuit, which
/// is what makes every `U_t` respect `B_t`.
pub fn to_block_form(circuit: &Circuit) -> Result<BlockForm> {
    if let Some(v) = circuit.validate(ValidationMode::WriteOnce).into_iter().next() {
        return Err(Error::InvalidCircuit(v.to_string()));
    }
    let n = circuit.num_qubits();
    let mut measured: Vec<usize> = Vec::new();
    let mut unitaries = Vec::with_capacity(circuit.len());
    let mut blocks = Vec::with_capacity(circuit.len());
    for step in circuit.steps() {
        unitaries.push(step.gates.clone());
        blocks.push(BlockStructure::from_measured_qubits(n, &measured));
        for &q in &step.measured {
            if !measured.contains(&q) {
                measured.push(q);
            }
        }
    }
    Ok(BlockForm {
        num_qubits: n,
        unitaries,
        blocks,
    })
}

/// Reusable sampler for the block-structured oracle. Preconditions are
/// checked once at construction.
#[derive(Debug, Clone)]
pub struct BlockSampler {
    weights: Vec<BlockWeights>,
}

impl BlockSampler {
    pub fn new(form: &BlockForm) -> Result<Self> {
        check_block_chain(form.num_qubits, &form.unitaries, &form.blocks)?;
        let mut phi = StateVector::zero(form.num_qubits)?;
        let mut weights = Vec::with_capacity(form.unitaries.len());
        for (u, b) in form.unitaries.iter().zip(&form.blocks) {
            phi.apply_all(u)?;
            weights.push(BlockWeights::new(b.clone(), phi.probabilities())?);
        }
        Ok(BlockSampler { weights })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> History {
        let mut samples = Vec::with_capacity(self.weights.len() + 1);
        let mut v = 0;
        samples.push(v);
        for w in &self.weights {
            v = w.sample_row(v, rng);
            samples.push(v);
        }
        History {
            samples,
            collapse_outcomes: vec![Vec::new(); self.weights.len()],
        }
    }
}

/// One call of the block-structured oracle: `v_0 = 0`, then `v_t` from row
/// `v_{t-1}` of `S_PT_{B_t}(U_{t-1}⋯U_1|0⟩, U_t)`.
pub fn sample_history_blocks<R: Rng + ?Sized>(
    num_qubits: usize,
    unitaries: &[Vec<GateOp>],
    blocks: &[BlockStructure],
    rng: &mut R,
) -> Result<History> {
    let form = BlockForm {
        num_qubits,
        unitaries: unitaries.to_vec(),
        blocks: blocks.to_vec(),
    };
    Ok(BlockSampler::new(&form)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Step;
    use crate::rng;

    fn circuit(n: usize, steps: Vec<Step>) -> Circuit {
        Circuit::new(n, steps).unwrap()
    }

    fn h_then_empty(t: usize) -> Circuit {
        let mut steps = vec![Step::gates(vec![GateOp::h(0)])];
        steps.resize(t, Step::empty());
        circuit(1, steps)
    }

    fn bell_measure_twice() -> Circuit {
        circuit(
            2,
            vec![
                Step::new(vec![GateOp::h(0), GateOp::cnot(0, 1)], vec![0]),
                Step::empty(),
            ],
        )
    }

    #[test]
    fn empty_step_stays_at_zero() {
        let c = circuit(1, vec![Step::empty()]);
        let mut r = rng::seeded(1);
        for _ in 0..20 {
            assert_eq!(sample_history(&c, &mut r).unwrap().samples, vec![0, 0]);
        }
    }

    #[test]
    fn collapse_fixes_the_sample() {
        let c = circuit(1, vec![Step::new(vec![GateOp::h(0)], vec![0])]);
        let mut r = rng::seeded(2);
        for _ in 0..100 {
            let h = sample_history(&c, &mut r).unwrap();
            assert_eq!(h.samples[1], h.collapse_outcomes[0][0] as usize);
        }
    }

    #[test]
    fn exact_h_three_samples_is_uniform() {
        let d = history_distribution_exact(&h_then_empty(3), DEFAULT_BUDGET).unwrap();
        assert_eq!(d.support_size(), 8);
        for bits in 0..8usize {
            let h = vec![0, bits & 1, (bits >> 1) & 1, (bits >> 2) & 1];
            assert!((d.probability(&h) - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_bell_measure() {
        let d = history_distribution_exact(&bell_measure_twice(), DEFAULT_BUDGET).unwrap();
        assert_eq!(d.support_size(), 2);
        assert!((d.probability(&[0, 0, 0]) - 0.5).abs() < 1e-12);
        assert!((d.probability(&[0, 3, 3]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn budget_enforced() {
        let c = h_then_empty(3);
        assert!(matches!(
            history_distribution_exact(&c, 8),
            Err(Error::BudgetExceeded { needed: 16, budget: 8 })
        ));
    }

    #[test]
    fn block_oracle_examples() {
        let mut r = rng::seeded(3);
        let mut ones = 0;
        for _ in 0..2000 {
            let h = sample_history_blocks(1, &[vec![GateOp::h(0)]], &[BlockStructure::trivial(2)], &mut r).unwrap();
            ones += h.samples[1];
        }
        assert!((ones as f64 / 2000.0 - 0.5).abs() < 0.05);

        let f = crate::circuit::ClassicalFunction::indicator(1, Some(0)).unwrap();
        let z = GateOp::PhaseOracle {
            oracle: crate::statevector::Oracle::new("f", f),
            qubits: vec![0],
        };
        let singles = BlockStructure::singletons(2);
        let h = sample_history_blocks(1, &[vec![z.clone()], vec![z]], &[singles.clone(), singles], &mut r).unwrap();
        assert_eq!(h.samples, vec![0, 0, 0]);
    }

    #[test]
    fn block_oracle_rejects_bad_chains() {
        let mut r = rng::seeded(4);
        let coarse = BlockStructure::trivial(2);
        let fine = BlockStructure::singletons(2);
        assert!(matches!(
            sample_history_blocks(1, &[vec![], vec![]], &[fine.clone(), coarse], &mut r),
            Err(Error::RefinementViolated(2, 1))
        ));
        assert!(matches!(
            sample_history_blocks(1, &[vec![GateOp::h(0)]], &[fine], &mut r),
            Err(Error::BlockViolation { .. })
        ));
    }

    #[test]
    fn block_form_of_bell_circuit() {
        let form = to_block_form(&bell_measure_twice()).unwrap();
        assert_eq!(form.blocks[0], BlockStructure::trivial(4));
        assert_eq!(form.blocks[1], BlockStructure::from_labels(&[0, 1, 0, 1]));
    }

    #[test]
    fn markov_defect_of_exact_distribution() {
        let d = history_distribution_exact(&bell_measure_twice(), DEFAULT_BUDGET).unwrap();
        assert!(d.markov_defect() < 1e-12);
        let mut m = BTreeMap::new();
        // v_2 copies v_0 through a constant v_1.
        m.insert(vec![0, 0, 0], 0.5);
        m.insert(vec![1, 0, 1], 0.5);
        let d = HistoryDistribution::new(m).unwrap();
        assert!((d.markov_defect() - 0.25).abs() < 1e-12);
    }
}
