//! Exact simulation of Hadamard/permutation circuits.
//!
//! Every amplitude of a circuit over {H, X, CNOT, Toffoli} has the form
//! `a / 2^{k/2}` with `a` an integer and `k` the number of Hadamards, so
//! amplitudes, probabilities and conditional probabilities can all be
//! carried in integers. Nothing in this module rounds.

use std::collections::BTreeMap;

use num_integer::Integer;
use rand::Rng;
use serde::Serialize;

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::qp_oracle::{History, HistoryDistribution};
use crate::statevector::{BasisImage, GateOp};

/// Path enumeration budget: at most this many Hadamards (2^26 paths).
pub const MAX_PATH_HADAMARDS: u32 = 26;
/// Largest half-exponent carried by the sparse exact state. Keeps every
/// squared numerator sum inside `u128`.
const MAX_HALF_EXPONENT: u32 = 100;

/// `numerator / 2^{half_exponent / 2}`, kept in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct DyadicAmplitude {
    pub numerator: i128,
    pub half_exponent: u32,
}

impl DyadicAmplitude {
    pub fn new(mut numerator: i128, mut half_exponent: u32) -> Self {
        if numerator == 0 {
            return DyadicAmplitude {
                numerator: 0,
                half_exponent: 0,
            };
        }
        while half_exponent >= 2 && numerator % 2 == 0 {
            numerator /= 2;
            half_exponent -= 2;
        }
        DyadicAmplitude {
            numerator,
            half_exponent,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.numerator as f64 / 2f64.powf(self.half_exponent as f64 / 2.0)
    }

    /// |amplitude|² = numerator² / 2^half_exponent.
    pub fn probability(self) -> ExactProbability {
        let n = self.numerator.unsigned_abs();
        ExactProbability::new(n * n, 1u128 << self.half_exponent).expect("positive denominator")
    }
}

/// A probability `numerator / denominator` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ExactProbability {
    numerator: u128,
    denominator: u128,
}

impl ExactProbability {
    pub fn new(numerator: u128, denominator: u128) -> Result<Self> {
        if denominator == 0 {
            return Err(Error::ZeroProbabilityCondition);
        }
        if numerator > denominator {
            return Err(Error::InvalidArgument(format!("{numerator}/{denominator} exceeds one")));
        }
        let g = numerator.gcd(&denominator);
        Ok(ExactProbability {
            numerator: numerator / g,
            denominator: denominator / g,
        })
    }

    pub fn numerator(self) -> u128 {
        self.numerator
    }

    pub fn denominator(self) -> u128 {
        self.denominator
    }

    pub fn to_f64(self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    /// Bernoulli draw with exactly this bias.
    pub fn flip<R: Rng + ?Sized>(self, rng: &mut R) -> bool {
        rng.gen_range(0..self.denominator) < self.numerator
    }
}

impl PartialOrd for ExactProbability {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactProbability {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Reduced terms stay far below 2^64 for supported circuits, so the
        // cross products fit.
        (self.numerator * other.denominator).cmp(&(other.numerator * self.denominator))
    }
}

fn check_supported(gates: &[GateOp], num_qubits: usize) -> Result<()> {
    for g in gates {
        match g {
            GateOp::Hadamard(_) | GateOp::PauliX(_) | GateOp::CNot { .. } | GateOp::Toffoli { .. } => {
                g.validate(num_qubits)?
            }
            other => return Err(Error::UnsupportedGate(other.to_string())),
        }
    }
    Ok(())
}

/// `⟨output| U |input⟩` by summing over Hadamard branch choices.
pub fn path_sum_amplitude(gates: &[GateOp], num_qubits: usize, input: usize, output: usize) -> Result<DyadicAmplitude> {
    check_supported(gates, num_qubits)?;
    let dim = 1usize << num_qubits;
    if input >= dim || output >= dim {
        return Err(Error::InvalidArgument(format!(
            "basis index out of range for {num_qubits} qubits"
        )));
    }
    let h = gates.iter().filter(|g| matches!(g, GateOp::Hadamard(_))).count() as u32;
    if h > MAX_PATH_HADAMARDS {
        return Err(Error::BudgetExceeded {
            needed: 1u128 << h.min(127),
            budget: 1u128 << MAX_PATH_HADAMARDS,
        });
    }
    let total = paths(gates, input, output);
    Ok(DyadicAmplitude::new(total, h))
}

/// Signed count of paths from `index` through `gates` ending at `output`.
fn paths(gates: &[GateOp], index: usize, output: usize) -> i128 {
    let mut index = index;
    let mut sign = 1i128;
    for (k, g) in gates.iter().enumerate() {
        match g.basis_image(index) {
            BasisImage::Signed { index: next, sign: s } => {
                index = next;
                sign *= s as i128;
            }
            BasisImage::Split { zero, one, sign_one } => {
                let rest = &gates[k + 1..];
                return sign * (paths(rest, zero, output) + sign_one as i128 * paths(rest, one, output));
            }
        }
    }
    if index == output {
        sign
    } else {
        0
    }
}

/// Unnormalized sparse state with amplitudes `a_i / 2^{half_exponent/2}`.
/// Projections drop entries without renormalizing, so ratios of masses are
/// conditional probabilities.
#[derive(Debug, Clone, PartialEq)]
struct ExactState {
    half_exponent: u32,
    amps: BTreeMap<usize, i128>,
}

impl ExactState {
    fn zero() -> Self {
        ExactState {
            half_exponent: 0,
            amps: BTreeMap::from([(0, 1)]),
        }
    }

    fn apply(&mut self, gate: &GateOp) -> Result<()> {
        let mut next: BTreeMap<usize, i128> = BTreeMap::new();
        let mut split = false;
        for (&i, &a) in &self.amps {
            match gate.basis_image(i) {
                BasisImage::Signed { index, sign } => *next.entry(index).or_insert(0) += sign as i128 * a,
                BasisImage::Split { zero, one, sign_one } => {
                    split = true;
                    *next.entry(zero).or_insert(0) += a;
                    *next.entry(one).or_insert(0) += sign_one as i128 * a;
                }
            }
        }
        next.retain(|_, a| *a != 0);
        if split {
            self.half_exponent += 1;
        }
        while self.half_exponent >= 2 && next.values().all(|a| a % 2 == 0) {
            next.values_mut().for_each(|a| *a /= 2);
            self.half_exponent -= 2;
        }
        if self.half_exponent > MAX_HALF_EXPONENT {
            return Err(Error::BudgetExceeded {
                needed: self.half_exponent as u128,
                budget: MAX_HALF_EXPONENT as u128,
            });
        }
        self.amps = next;
        Ok(())
    }

    /// Σ a_i² over entries with `i & mask == value`.
    fn mass(&self, mask: usize, value: usize) -> u128 {
        self.amps
            .iter()
            .filter(|(i, _)| *i & mask == value)
            .map(|(_, a)| a.unsigned_abs() * a.unsigned_abs())
            .sum()
    }

    fn project(&mut self, mask: usize, value: usize) {
        self.amps.retain(|i, _| i & mask == value);
    }

    /// Samples qubits `order` one at a time from exact conditionals, given
    /// the constraint `(mask, value)`; returns the extended constraint.
    fn sample_bits<R: Rng + ?Sized>(
        &self,
        order: &[usize],
        mut mask: usize,
        mut value: usize,
        rng: &mut R,
    ) -> Result<(usize, usize)> {
        let mut den = self.mass(mask, value);
        for &q in order {
            let bit = 1usize << q;
            let num = self.mass(mask | bit, value | bit);
            let one = ExactProbability::new(num, den)?.flip(rng);
            mask |= bit;
            if one {
                value |= bit;
                den = num;
            } else {
                den -= num;
            }
        }
        Ok((mask, value))
    }
}

/// One conditioning fact: `qubit` read `value` at `step` (0 = initial state).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BitRecord {
    pub step: usize,
    pub qubit: usize,
    pub value: u8,
}

/// Exact probability that `qubit` reads 1 after the gates of `step`, given
/// `prior`. Every collapsing measurement before `step` must be recorded;
/// records at `step` itself may name any qubit.
pub fn conditional_bit_probability(
    circuit: &Circuit,
    prior: &[BitRecord],
    target: (usize, usize),
) -> Result<ExactProbability> {
    let (target_step, qubit) = target;
    let n = circuit.num_qubits();
    if target_step > circuit.len() || qubit >= n {
        return Err(Error::InvalidArgument(format!(
            "target ({target_step}, {qubit}) outside the circuit"
        )));
    }
    for r in prior {
        if r.step > target_step || r.qubit >= n || r.value > 1 {
            return Err(Error::InvalidArgument(format!("record {r:?} is not a prior fact")));
        }
    }
    let constraint = |step: usize| {
        prior
            .iter()
            .filter(|r| r.step == step)
            .fold((0usize, 0usize), |(m, v), r| {
                (m | 1 << r.qubit, v | (r.value as usize) << r.qubit)
            })
    };
    let mut state = ExactState::zero();
    for (s, step) in circuit.steps()[..target_step].iter().enumerate() {
        let t = s + 1;
        check_supported(&step.gates, n)?;
        for g in &step.gates {
            state.apply(g)?;
        }
        let (mask, value) = constraint(t);
        if t < target_step {
            for &q in &step.measured {
                if mask & (1 << q) == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "measurement of qubit {q} at step {t} is not recorded"
                    )));
                }
            }
            let measured_mask = step.measured.iter().fold(0usize, |m, q| m | 1 << q);
            if mask & !measured_mask != 0 {
                return Err(Error::InvalidArgument(format!(
                    "step {t} records qubits it does not measure"
                )));
            }
        }
        state.project(mask, value);
    }
    if target_step == 0 {
        let (mask, value) = constraint(0);
        state.project(mask, value);
    }
    let den = state.mass(0, 0);
    if den == 0 {
        return Err(Error::ZeroProbabilityCondition);
    }
    let bit = 1usize << qubit;
    ExactProbability::new(state.mass(bit, bit), den)
}

/// Samples a history with exact arithmetic: each collapse outcome and then
/// each sample `v_t` is drawn one bit at a time from exact conditionals.
pub fn exact_sample_history<R: Rng + ?Sized>(circuit: &Circuit, rng: &mut R) -> Result<History> {
    circuit.ensure_valid()?;
    let n = circuit.num_qubits();
    for step in circuit.steps() {
        check_supported(&step.gates, n)?;
    }
    let all: Vec<usize> = (0..n).collect();
    let mut state = ExactState::zero();
    let mut samples = vec![state.sample_bits(&all, 0, 0, rng)?.1];
    let mut collapse_outcomes = Vec::with_capacity(circuit.len());
    for step in circuit.steps() {
        for g in &step.gates {
            state.apply(g)?;
        }
        let (mask, value) = state.sample_bits(&step.measured, 0, 0, rng)?;
        state.project(mask, value);
        collapse_outcomes.push(step.measured.iter().map(|q| ((value >> q) & 1) as u8).collect());
        samples.push(state.sample_bits(&all, 0, 0, rng)?.1);
    }
    Ok(History {
        samples,
        collapse_outcomes,
    })
}

/// The oracle's history distribution computed from exact per-branch
/// probabilities. Only the final products are taken in floating point.
pub fn exact_history_distribution(circuit: &Circuit, budget: u128) -> Result<HistoryDistribution> {
    circuit.ensure_valid()?;
    let needed = crate::qp_oracle::enumeration_size(circuit);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    for step in circuit.steps() {
        check_supported(&step.gates, circuit.num_qubits())?;
    }
    let state = ExactState::zero();
    let start = vec![(vec![0usize], 1.0)];
    let mut out = BTreeMap::new();
    exact_branches(circuit, 0, state, start, &mut out)?;
    HistoryDistribution::new(out)
}

fn exact_branches(
    circuit: &Circuit,
    t: usize,
    mut state: ExactState,
    partial: Vec<(Vec<usize>, f64)>,
    out: &mut BTreeMap<Vec<usize>, f64>,
) -> Result<()> {
    let Some(step) = circuit.steps().get(t) else {
        for (h, p) in partial {
            *out.entry(h).or_insert(0.0) += p;
        }
        return Ok(());
    };
    for g in &step.gates {
        state.apply(g)?;
    }
    let total = state.mass(0, 0);
    let mask = step.measured.iter().fold(0usize, |m, q| m | 1 << q);
    for o in 0..1usize << step.measured.len() {
        let value = crate::statevector::scatter_bits(o, &step.measured);
        let branch_mass = state.mass(mask, value);
        if branch_mass == 0 {
            continue;
        }
        let w = ExactProbability::new(branch_mass, total)?.to_f64();
        let mut branch = state.clone();
        branch.project(mask, value);
        let born: Vec<(usize, f64)> = branch
            .amps
            .iter()
            .map(|(&i, a)| {
                let sq = a.unsigned_abs() * a.unsigned_abs();
                ExactProbability::new(sq, branch_mass).map(|p| (i, p.to_f64()))
            })
            .collect::<Result<_>>()?;
        let mut next = Vec::with_capacity(partial.len() * born.len());
        for (h, p) in &partial {
            for &(v, q) in &born {
                let mut e = h.clone();
                e.push(v);
                next.push((e, p * w * q));
            }
        }
        exact_branches(circuit, t + 1, branch, next, out)?;
    }
    Ok(())
}
