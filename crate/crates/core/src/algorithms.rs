//! Constructive algorithms: search with non-collapsing samples, the Grover
//! baseline, the statistical-difference decider, and small demos of what
//! non-collapsing samples make possible (signaling, one-query evaluation,
//! one-qubit communication, cloning by tomography).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::circuit::{Circuit, ClassicalFunction, Step};
use crate::error::{Error, Result};
use crate::qp_oracle::{History, QpSampler};
use crate::rng;
use crate::statevector::{BornSampler, GateOp, Oracle, StateVector, MAX_QUBITS};

/// One Grover iteration as `(query, diffusion)`.
///
/// The query is a phase oracle for `f`; the diffusion is `H^n · Z_0 · H^n`
/// where `Z_0` flips the sign of |0…0⟩, implemented as a phase oracle on the
/// public "is zero" function. The diffusion equals `2|s⟩⟨s| − I` up to a
/// global sign.
pub fn grover_iteration(n: usize, f: &Oracle) -> Result<(GateOp, Vec<GateOp>)> {
    for (role, expected, got) in [
        ("input", n, f.function.input_bits()),
        ("output", 1, f.function.output_bits()),
    ] {
        if expected != got {
            return Err(Error::OracleArity {
                name: f.name.clone(),
                role,
                expected,
                got,
            });
        }
    }
    let qubits: Vec<usize> = (0..n).collect();
    let zero = Oracle::new("is_zero", ClassicalFunction::indicator(n, Some(0))?);
    let query = GateOp::PhaseOracle {
        oracle: f.clone(),
        qubits: qubits.clone(),
    };
    let mut diffusion: Vec<GateOp> = qubits.iter().map(|&q| GateOp::h(q)).collect();
    diffusion.push(GateOp::PhaseOracle {
        oracle: zero,
        qubits: qubits.clone(),
    });
    diffusion.extend(qubits.iter().map(|&q| GateOp::h(q)));
    Ok((query, diffusion))
}

fn grover_gates(n: usize, f: &Oracle, k: usize) -> Result<Vec<GateOp>> {
    let (query, diffusion) = grover_iteration(n, f)?;
    let mut gates: Vec<GateOp> = (0..n).map(GateOp::h).collect();
    for _ in 0..k {
        gates.push(query.clone());
        gates.extend(diffusion.iter().cloned());
    }
    Ok(gates)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchInstance {
    pub n: usize,
    pub marked: Option<usize>,
    /// Grover iterations K.
    pub iterations: usize,
    /// Non-collapsing samples R (= T).
    pub samples: usize,
    pub trials: usize,
}

impl SearchInstance {
    pub fn new(n: usize, marked: Option<usize>, iterations: usize, samples: usize, trials: usize) -> Result<Self> {
        let inst = SearchInstance {
            n,
            marked,
            iterations,
            samples,
            trials,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// The default parameters `K = ⌈N^{1/3}⌉`, `R = ⌈N^{1/3} log₂ N⌉`.
    pub fn scaled(n: usize, marked: Option<usize>, trials: usize) -> Result<Self> {
        let (k, r) = default_search_parameters(n, 1.0, 1.0);
        Self::new(n, marked, k, r, trials)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n + 1 > MAX_QUBITS {
            return Err(Error::TooManyQubits(self.n + 1));
        }
        if let Some(x) = self.marked {
            if x >> self.n != 0 {
                return Err(Error::InvalidArgument(format!(
                    "marked item {x} outside [0, 2^{})",
                    self.n
                )));
            }
        }
        if self.iterations == 0 || self.samples == 0 {
            return Err(Error::InvalidArgument("K and R must be at least 1".into()));
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        1 << self.n
    }

    /// Q = K + 1.
    pub fn queries(&self) -> usize {
        self.iterations + 1
    }

    fn oracle(&self) -> Result<Oracle> {
        Ok(Oracle::new("f", ClassicalFunction::indicator(self.n, self.marked)?))
    }
}

/// `(K, R) = (⌈k_mult · N^{1/3}⌉, ⌈r_mult · N^{1/3} log₂ N⌉)`, each at least 1.
pub fn default_search_parameters(n: usize, k_mult: f64, r_mult: f64) -> (usize, usize) {
    let cube_root = (n as f64 / 3.0).exp2();
    // Round away float noise before the ceiling so exact cubes stay exact.
    let ceil = |v: f64| ((v * 1e9).round() / 1e9).ceil().max(1.0) as usize;
    (ceil(k_mult * cube_root), ceil(r_mult * cube_root * n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SearchOutcome {
    Found(usize),
    NotFound,
}

/// The search circuit on `n + 1` qubits (ancilla `n`).
///
/// Step 1 prepares the uniform superposition, runs K Grover iterations and
/// writes `f` onto the ancilla; steps 2..R are empty. Each step yields one
/// non-collapsing sample of the final state, so `v_1 … v_R` are R samples.
pub fn search_circuit(inst: &SearchInstance) -> Result<Circuit> {
    inst.validate()?;
    let n = inst.n;
    let f = inst.oracle()?;
    let mut gates = grover_gates(n, &f, inst.iterations)?;
    gates.push(GateOp::XorOracle {
        oracle: f,
        inputs: (0..n).collect(),
        outputs: vec![n],
    });
    let mut steps = vec![Step::gates(gates)];
    steps.extend((1..inst.samples).map(|_| Step::empty()));
    Circuit::new(n + 1, steps)
}

fn search_outcome(history: &History, n: usize) -> SearchOutcome {
    history.samples[1..]
        .iter()
        .find(|&&v| v >> n & 1 == 1)
        .map_or(SearchOutcome::NotFound, |&v| SearchOutcome::Found(v & ((1 << n) - 1)))
}

/// One run of the search: the first sampled index with the ancilla set.
pub fn pdqp_search<R: Rng + ?Sized>(inst: &SearchInstance, rng: &mut R) -> Result<SearchOutcome> {
    let circuit = search_circuit(inst)?;
    let history = QpSampler::new(&circuit)?.sample(rng)?;
    Ok(search_outcome(&history, inst.n))
}

/// `inst.trials` independent runs, trial `i` drawing from stream `i` of
/// `seed`. Results are in trial order.
pub fn pdqp_search_trials(inst: &SearchInstance, seed: u64) -> Result<Vec<SearchOutcome>> {
    let circuit = search_circuit(inst)?;
    let sampler = QpSampler::new(&circuit)?;
    (0..inst.trials as u64)
        .into_par_iter()
        .map(|t| {
            let h = sampler.sample(&mut rng::stream(seed, t))?;
            Ok(search_outcome(&h, inst.n))
        })
        .collect()
}

/// K Grover iterations on `n` qubits, then a collapsing measurement of all of
/// them.
pub fn grover_circuit(inst: &SearchInstance) -> Result<Circuit> {
    inst.validate()?;
    let gates = grover_gates(inst.n, &inst.oracle()?, inst.iterations)?;
    Circuit::new(inst.n, vec![Step::new(gates, (0..inst.n).collect())])
}

fn grover_outcome(history: &History, marked: Option<usize>) -> SearchOutcome {
    let x = history.collapse_outcomes[0]
        .iter()
        .enumerate()
        .fold(0usize, |acc, (k, &b)| acc | (b as usize) << k);
    if Some(x) == marked {
        SearchOutcome::Found(x)
    } else {
        SearchOutcome::NotFound
    }
}

/// Plain Grover search; `inst.samples` is ignored (one measurement).
pub fn grover_baseline<R: Rng + ?Sized>(inst: &SearchInstance, rng: &mut R) -> Result<SearchOutcome> {
    let circuit = grover_circuit(inst)?;
    let history = QpSampler::new(&circuit)?.sample(rng)?;
    Ok(grover_outcome(&history, inst.marked))
}

pub fn grover_baseline_trials(inst: &SearchInstance, seed: u64) -> Result<Vec<SearchOutcome>> {
    let circuit = grover_circuit(inst)?;
    let sampler = QpSampler::new(&circuit)?;
    (0..inst.trials as u64)
        .into_par_iter()
        .map(|t| {
            let h = sampler.sample(&mut rng::stream(seed, t))?;
            Ok(grover_outcome(&h, inst.marked))
        })
        .collect()
}

/// `p[K]` = probability of measuring `marked` after K Grover iterations,
/// for `K = 0..=max_k`, by state-vector simulation.
pub fn marked_probability_curve(n: usize, marked: usize, max_k: usize) -> Result<Vec<f64>> {
    let f = Oracle::new("f", ClassicalFunction::indicator(n, Some(marked))?);
    let (query, diffusion) = grover_iteration(n, &f)?;
    let mut state = StateVector::zero(n)?;
    state.apply_all(&(0..n).map(GateOp::h).collect::<Vec<_>>())?;
    let mut curve = vec![state.amplitudes()[marked].norm_sqr()];
    for _ in 0..max_k {
        state.apply(&query)?;
        state.apply_all(&diffusion)?;
        curve.push(state.amplitudes()[marked].norm_sqr());
    }
    Ok(curve)
}

/// `α²` from the asymptotic closed form `α = (2^{n/3} + 2^{1−n/3} + 1)^{−1/2}`
/// for the marked amplitude after `N^{1/3}` iterations. Reported next to the
/// simulated value; it is not exact at small n.
pub fn closed_form_marked_probability(n: usize) -> f64 {
    let a = 2f64.powf(n as f64 / 3.0);
    1.0 / (a + 2.0 / a + 1.0)
}

/// Success probability of the search with per-sample hit probability `p`
/// and `r` samples.
pub fn pdqp_success_probability(p: f64, r: usize) -> f64 {
    1.0 - (1.0 - p).powi(r as i32)
}

/// Least total cost meeting a success target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostPoint {
    pub n: usize,
    pub iterations: usize,
    pub samples: usize,
    /// Q + T.
    pub cost: usize,
}

/// Largest K scanned when minimizing cost: a little past the Grover peak.
fn max_iterations(n: usize) -> usize {
    ((PI / 4.0) * (n as f64 / 2.0).exp2()).ceil() as usize + 2
}

/// Minimizes `Q + T = (K + 1) + R` over K, with R the fewest samples reaching
/// `target` at that K.
pub fn pdqp_min_cost(n: usize, target: f64) -> Result<CostPoint> {
    let curve = marked_probability_curve(n, 0, max_iterations(n))?;
    let mut best: Option<CostPoint> = None;
    for (k, &p) in curve.iter().enumerate().skip(1) {
        let r = if p >= target {
            1
        } else if p <= 0.0 {
            continue;
        } else {
            ((1.0 - target).ln() / (1.0 - p).ln()).ceil() as usize
        };
        let cost = k + 1 + r;
        if best.is_none_or(|b| cost < b.cost) {
            best = Some(CostPoint {
                n,
                iterations: k,
                samples: r,
                cost,
            });
        }
    }
    best.ok_or_else(|| Error::InvalidArgument(format!("no K reaches {target} at n = {n}")))
}

/// Fewest Grover iterations whose single measurement succeeds with
/// probability at least `target`; cost is `Q + T = K + 1`.
pub fn grover_min_cost(n: usize, target: f64) -> Result<CostPoint> {
    let curve = marked_probability_curve(n, 0, max_iterations(n))?;
    let k = (1..curve.len())
        .find(|&k| curve[k] >= target)
        .ok_or_else(|| Error::InvalidArgument(format!("no K reaches {target} at n = {n}")))?;
    Ok(CostPoint {
        n,
        iterations: k,
        samples: 1,
        cost: k + 1,
    })
}

/// Least-squares slope of `ln cost` against `ln N`.
pub fn log_log_slope(points: &[CostPoint]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64 * std::f64::consts::LN_2).collect();
    let ys: Vec<f64> = points.iter().map(|p| (p.cost as f64).ln()).collect();
    least_squares_slope(&xs, &ys)
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SdVerdict {
    Close,
    Far,
}

impl std::fmt::Display for SdVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SdVerdict::Close => "close",
            SdVerdict::Far => "far",
        })
    }
}

impl std::str::FromStr for SdVerdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "close" => Ok(SdVerdict::Close),
            "far" => Ok(SdVerdict::Far),
            other => Err(Error::InvalidArgument(format!("unknown promise '{other}'"))),
        }
    }
}

/// Two samplable distributions `P_0(X)`, `P_1(X)` given as truth tables on
/// uniform inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SdInstance {
    pub p0: ClassicalFunction,
    pub p1: ClassicalFunction,
    pub promise: Option<SdVerdict>,
}

impl SdInstance {
    pub fn new(p0: ClassicalFunction, p1: ClassicalFunction, promise: Option<SdVerdict>) -> Result<Self> {
        if p0.input_bits() != p1.input_bits() || p0.output_bits() != p1.output_bits() {
            return Err(Error::Table(format!(
                "p0 is {} -> {} bits but p1 is {} -> {}",
                p0.input_bits(),
                p0.output_bits(),
                p1.input_bits(),
                p1.output_bits()
            )));
        }
        let qubits = 1 + p0.input_bits() + p0.output_bits();
        if qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits(qubits));
        }
        Ok(SdInstance { p0, p1, promise })
    }

    pub fn input_bits(&self) -> usize {
        self.p0.input_bits()
    }

    pub fn output_bits(&self) -> usize {
        self.p0.output_bits()
    }

    /// Exact total variation distance between the two output distributions.
    pub fn total_variation(&self) -> f64 {
        let (a, b) = (self.p0.output_distribution(), self.p1.output_distribution());
        0.5 * a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>()
    }
}

/// Qubit 0 holds b, qubits `1..=n` hold x, qubits `n+1..=n+m` hold y.
/// Step 1 prepares `Σ_{b,x} |b⟩|x⟩|P_b(x)⟩` and collapses y; steps 1–3 each
/// give one non-collapsing sample.
pub fn sd_circuit(inst: &SdInstance) -> Result<Circuit> {
    let (n, m) = (inst.input_bits(), inst.output_bits());
    let joint = ClassicalFunction::from_fn(n + 1, m, |bx| {
        let x = bx >> 1;
        if bx & 1 == 0 {
            inst.p0.eval(x)
        } else {
            inst.p1.eval(x)
        }
    })?;
    let mut gates: Vec<GateOp> = (0..=n).map(GateOp::h).collect();
    gates.push(GateOp::XorOracle {
        oracle: Oracle::new("p", joint),
        inputs: (0..=n).collect(),
        outputs: (n + 1..=n + m).collect(),
    });
    Circuit::new(
        1 + n + m,
        vec![
            Step::new(gates, (n + 1..=n + m).collect()),
            Step::empty(),
            Step::empty(),
        ],
    )
}

fn sd_verdict(history: &History) -> SdVerdict {
    let bits: Vec<usize> = history.samples[1..=3].iter().map(|v| v & 1).collect();
    if bits.iter().all(|&b| b == bits[0]) {
        SdVerdict::Far
    } else {
        SdVerdict::Close
    }
}

/// Far iff the three samples of the b qubit agree.
pub fn solve_statistical_difference<R: Rng + ?Sized>(inst: &SdInstance, rng: &mut R) -> Result<SdVerdict> {
    let circuit = sd_circuit(inst)?;
    Ok(sd_verdict(&QpSampler::new(&circuit)?.sample(rng)?))
}

/// `trials` independent decisions, trial `i` on stream `i` of `seed`.
pub fn sd_decide_trials(inst: &SdInstance, trials: usize, seed: u64) -> Result<Vec<SdVerdict>> {
    let circuit = sd_circuit(inst)?;
    let sampler = QpSampler::new(&circuit)?;
    (0..trials as u64)
        .into_par_iter()
        .map(|t| Ok(sd_verdict(&sampler.sample(&mut rng::stream(seed, t))?)))
        .collect()
}

/// Probability that the three b-samples agree:
/// `Σ_y p(y) (q_y³ + (1 − q_y)³)` with `q_y = P(b = 1 | y)`.
pub fn sd_all_agree_probability(inst: &SdInstance) -> f64 {
    let size = 1usize << inst.output_bits();
    let mut counts = vec![[0u64; 2]; size];
    for x in 0..1usize << inst.input_bits() {
        counts[inst.p0.eval(x)][0] += 1;
        counts[inst.p1.eval(x)][1] += 1;
    }
    let total = (2u64 << inst.input_bits()) as f64;
    counts
        .iter()
        .filter(|c| c[0] + c[1] > 0)
        .map(|c| {
            let n = (c[0] + c[1]) as f64;
            let q = c[1] as f64 / n;
            n / total * (q.powi(3) + (1.0 - q).powi(3))
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Computational,
    Hadamard,
}

impl std::str::FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "computational" => Ok(Basis::Computational),
            "hadamard" => Ok(Basis::Hadamard),
            other => Err(Error::InvalidArgument(format!("unknown basis '{other}'"))),
        }
    }
}

/// Bell pair, party A measures qubit 0 in `basis`, then `k` steps each
/// sampling the pair.
pub fn ftl_circuit(basis: Basis, k: usize) -> Result<Circuit> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k = {k} must be at least 2")));
    }
    let mut gates = vec![GateOp::h(0), GateOp::cnot(0, 1)];
    if basis == Basis::Hadamard {
        gates.push(GateOp::h(0));
    }
    let mut steps = vec![Step::new(gates, vec![0])];
    steps.extend((1..k).map(|_| Step::empty()));
    Circuit::new(2, steps)
}

fn ftl_inference(history: &History) -> Basis {
    let bits: Vec<usize> = history.samples[1..].iter().map(|v| v >> 1 & 1).collect();
    if bits.iter().all(|&b| b == bits[0]) {
        Basis::Computational
    } else {
        Basis::Hadamard
    }
}

/// Party B's guess of A's basis from `k` non-collapsing samples of qubit 1.
pub fn ftl_signal_demo<R: Rng + ?Sized>(basis: Basis, k: usize, rng: &mut R) -> Result<Basis> {
    let circuit = ftl_circuit(basis, k)?;
    Ok(ftl_inference(&QpSampler::new(&circuit)?.sample(rng)?))
}

pub fn ftl_signal_trials(basis: Basis, k: usize, trials: usize, seed: u64) -> Result<Vec<Basis>> {
    let circuit = ftl_circuit(basis, k)?;
    let sampler = QpSampler::new(&circuit)?;
    (0..trials as u64)
        .into_par_iter()
        .map(|t| Ok(ftl_inference(&sampler.sample(&mut rng::stream(seed, t))?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OneQueryResult {
    /// `recovered[i]` is the bit seen for index `i`, if `i` was sampled.
    pub recovered: Vec<Option<u8>>,
    pub unseen: Vec<usize>,
}

impl OneQueryResult {
    pub fn is_complete(&self) -> bool {
        self.unseen.is_empty()
    }
}

/// `Σ_i |i⟩|x_i⟩` with one oracle call, then R steps each sampling it.
pub fn one_query_circuit(x: &[u8], r: usize) -> Result<Circuit> {
    let len = x.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "string length {len} is not a power of two ≥ 2"
        )));
    }
    if r == 0 {
        return Err(Error::InvalidArgument("R must be at least 1".into()));
    }
    let n = len.trailing_zeros() as usize;
    let f = ClassicalFunction::new(n, 1, x.iter().map(|&b| (b & 1) as usize).collect())?;
    let mut gates: Vec<GateOp> = (0..n).map(GateOp::h).collect();
    gates.push(GateOp::XorOracle {
        oracle: Oracle::new("x", f),
        inputs: (0..n).collect(),
        outputs: vec![n],
    });
    let mut steps = vec![Step::gates(gates)];
    steps.extend((1..r).map(|_| Step::empty()));
    Circuit::new(n + 1, steps)
}

fn one_query_decode(history: &History, len: usize) -> OneQueryResult {
    let n = len.trailing_zeros() as usize;
    let mut recovered = vec![None; len];
    for &v in &history.samples[1..] {
        recovered[v & (len - 1)] = Some((v >> n & 1) as u8);
    }
    let unseen = (0..len).filter(|&i| recovered[i].is_none()).collect();
    OneQueryResult { recovered, unseen }
}

/// Recovers the bits of `x` seen among R samples; unseen indices are
/// reported, never guessed.
pub fn one_query_evaluate<R: Rng + ?Sized>(x: &[u8], r: usize, rng: &mut R) -> Result<OneQueryResult> {
    let circuit = one_query_circuit(x, r)?;
    Ok(one_query_decode(&QpSampler::new(&circuit)?.sample(rng)?, x.len()))
}

pub fn one_query_trials(x: &[u8], r: usize, trials: usize, seed: u64) -> Result<Vec<OneQueryResult>> {
    let circuit = one_query_circuit(x, r)?;
    let sampler = QpSampler::new(&circuit)?;
    (0..trials as u64)
        .into_par_iter()
        .map(|t| Ok(one_query_decode(&sampler.sample(&mut rng::stream(seed, t))?, x.len())))
        .collect()
}

/// Largest `n` for one-qubit communication.
pub const COMM_MAX_BITS: usize = 5;

/// `θ_x = (x / 2^n)(π/2)`.
pub fn comm_angle(x: usize, n: usize) -> f64 {
    x as f64 / (1u64 << n) as f64 * PI / 2.0
}

/// Encodes `x` as `cos θ_x|0⟩ + sin θ_x|1⟩`, takes R non-collapsing samples
/// and decodes `round(2^n (2/π) arcsin √(ones/R))`.
pub fn one_qubit_communicate<R: Rng + ?Sized>(x: usize, n: usize, r: usize, rng: &mut R) -> Result<usize> {
    if n == 0 || n > COMM_MAX_BITS {
        return Err(Error::InvalidArgument(format!("n = {n} outside 1..={COMM_MAX_BITS}")));
    }
    if x >> n != 0 {
        return Err(Error::InvalidArgument(format!("x = {x} does not fit in {n} bits")));
    }
    if r == 0 {
        return Err(Error::InvalidArgument("R must be at least 1".into()));
    }
    let theta = comm_angle(x, n);
    let mut state = StateVector::zero(1)?;
    let (c, s) = (Complex64::new(theta.cos(), 0.0), Complex64::new(theta.sin(), 0.0));
    state.apply_single_qubit_unitary(0, [[c, -s], [s, c]])?;
    let sampler = BornSampler::new(&state)?;
    let ones = (0..r).filter(|_| sampler.sample(rng) == 1).count();
    Ok(comm_decode(ones, n, r))
}

fn comm_decode(ones: usize, n: usize, r: usize) -> usize {
    let scale = (1u64 << n) as f64;
    let decoded = (scale * (2.0 / PI) * (ones as f64 / r as f64).sqrt().asin()).round() as usize;
    decoded.min((1 << n) - 1)
}

/// Exact probability that [`one_qubit_communicate`] decodes something other
/// than `x`, summing the binomial distribution of the number of ones.
pub fn one_qubit_comm_error_probability(x: usize, n: usize, r: usize) -> f64 {
    let p = comm_angle(x, n).sin().powi(2);
    let mut ln_fact = vec![0.0f64; r + 1];
    for i in 1..=r {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    (0..=r)
        .filter(|&k| comm_decode(k, n, r) != x)
        .map(|k| {
            if p == 0.0 {
                f64::from(u8::from(k == 0))
            } else if p == 1.0 {
                f64::from(u8::from(k == r))
            } else {
                (ln_fact[r] - ln_fact[k] - ln_fact[r - k] + k as f64 * p.ln() + (r - k) as f64 * (1.0 - p).ln()).exp()
            }
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TomographyResult {
    /// Estimated `(x, y, z)` Bloch components.
    pub bloch: [f64; 3],
    pub std_errors: [f64; 3],
    /// Polar and azimuthal angles of the normalized estimate.
    pub theta: f64,
    pub phi: f64,
    /// `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
    #[serde(skip)]
    pub reconstructed: StateVector,
}

fn sample_z<R: Rng + ?Sized>(state: &StateVector, r: usize, rng: &mut R) -> Result<(f64, f64)> {
    let sampler = BornSampler::new(state)?;
    let zeros = (0..r).filter(|_| sampler.sample(rng) == 0).count();
    let mean = (2 * zeros) as f64 / r as f64 - 1.0;
    Ok((mean, ((1.0 - mean * mean).max(0.0) / r as f64).sqrt()))
}

/// Estimates a one-qubit state from R non-collapsing samples in each of the
/// Z, X and Y bases, restoring the state after each basis change, and
/// returns the pure state pointing along the estimate.
pub fn clone_via_tomography<R: Rng + ?Sized>(state: &StateVector, r: usize, rng: &mut R) -> Result<TomographyResult> {
    if state.num_qubits() != 1 {
        return Err(Error::InvalidArgument(format!(
            "tomography needs one qubit, got {}",
            state.num_qubits()
        )));
    }
    if r == 0 {
        return Err(Error::InvalidArgument("R must be at least 1".into()));
    }
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let s = [[one, zero], [zero, Complex64::new(0.0, 1.0)]];
    let s_dag = [[one, zero], [zero, Complex64::new(0.0, -1.0)]];
    let h = GateOp::h(0);

    let mut work = state.clone();
    let (z, ez) = sample_z(&work, r, rng)?;
    work.apply(&h)?;
    let (x, ex) = sample_z(&work, r, rng)?;
    work.apply(&h)?;
    work.apply_single_qubit_unitary(0, s_dag)?;
    work.apply(&h)?;
    let (y, ey) = sample_z(&work, r, rng)?;
    work.apply(&h)?;
    work.apply_single_qubit_unitary(0, s)?;

    let norm = (x * x + y * y + z * z).sqrt();
    let (theta, phi) = if norm < 1e-12 {
        (0.0, 0.0)
    } else {
        ((z / norm).clamp(-1.0, 1.0).acos(), y.atan2(x))
    };
    let reconstructed = StateVector::from_amplitudes(vec![
        Complex64::new((theta / 2.0).cos(), 0.0),
        Complex64::from_polar((theta / 2.0).sin(), phi),
    ])?;
    Ok(TomographyResult {
        bloch: [x, y, z],
        std_errors: [ex, ey, ez],
        theta,
        phi,
        reconstructed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::ValidationMode;
    use crate::qp_oracle::history_distribution_exact;

    #[test]
    fn default_parameters_use_exact_cube_roots() {
        assert_eq!(default_search_parameters(6, 1.0, 1.0), (4, 24));
        assert_eq!(default_search_parameters(9, 1.0, 1.0), (8, 72));
        // 2^(7/3) = 5.04
        assert_eq!(default_search_parameters(7, 1.0, 1.0).0, 6);
    }

    #[test]
    fn marked_probability_matches_closed_form() {
        let n = 6;
        let curve = marked_probability_curve(n, 13, 8).unwrap();
        let theta = (1.0f64 / 8.0).asin();
        for (k, p) in curve.iter().enumerate() {
            let expect = ((2 * k + 1) as f64 * theta).sin().powi(2);
            assert!((p - expect).abs() < 1e-10, "K={k}: {p} vs {expect}");
        }
        assert!((curve[4] - 0.816).abs() < 0.01);
    }

    #[test]
    fn search_without_marked_item_never_finds() {
        let inst = SearchInstance::new(5, None, 3, 20, 50).unwrap();
        let out = pdqp_search_trials(&inst, 1).unwrap();
        assert!(out.iter().all(|o| *o == SearchOutcome::NotFound));
    }

    #[test]
    fn search_circuit_is_write_once_and_finds_item() {
        let inst = SearchInstance::new(6, Some(41), 4, 12, 100).unwrap();
        let c = search_circuit(&inst).unwrap();
        assert!(c.validate(ValidationMode::WriteOnce).is_empty());
        assert_eq!(c.len(), 12);
        let out = pdqp_search_trials(&inst, 9).unwrap();
        assert!(out.iter().all(|o| *o == SearchOutcome::Found(41)));
    }

    #[test]
    fn grover_baseline_at_optimal_iterations() {
        let k = ((PI / 4.0) * 16.0f64).round() as usize;
        let inst = SearchInstance::new(8, Some(200), k, 1, 200).unwrap();
        let ok = grover_baseline_trials(&inst, 3)
            .unwrap()
            .iter()
            .filter(|o| **o == SearchOutcome::Found(200))
            .count();
        assert!(ok >= 195, "{ok}");
        assert!(grover_circuit(&inst)
            .unwrap()
            .validate(ValidationMode::WriteOnce)
            .is_empty());
    }

    #[test]
    fn min_costs_are_consistent() {
        let p = pdqp_min_cost(8, 2.0 / 3.0).unwrap();
        let curve = marked_probability_curve(8, 0, p.iterations).unwrap();
        assert!(pdqp_success_probability(curve[p.iterations], p.samples) >= 2.0 / 3.0);
        assert!(pdqp_success_probability(curve[p.iterations], p.samples - 1) < 2.0 / 3.0 || p.samples == 1);
        let g = grover_min_cost(8, 2.0 / 3.0).unwrap();
        assert_eq!(g.iterations, 8);
        assert_eq!(
            (
                pdqp_min_cost(14, 2.0 / 3.0).unwrap().cost,
                grover_min_cost(14, 2.0 / 3.0).unwrap().cost
            ),
            (32, 62)
        );
    }

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<CostPoint> = (4..10)
            .map(|n| CostPoint {
                n,
                iterations: 0,
                samples: 0,
                cost: 1 << n,
            })
            .collect();
        assert!((log_log_slope(&pts) - 1.0).abs() < 1e-12);
    }

    fn identical_instance() -> SdInstance {
        let p = ClassicalFunction::from_fn(2, 2, |x| (x * 3) & 3).unwrap();
        SdInstance::new(p.clone(), p, Some(SdVerdict::Close)).unwrap()
    }

    #[test]
    fn sd_identical_tables_agree_with_probability_quarter() {
        let inst = identical_instance();
        assert!((sd_all_agree_probability(&inst) - 0.25).abs() < 1e-12);
        let dist = history_distribution_exact(&sd_circuit(&inst).unwrap(), 1 << 24).unwrap();
        let agree: f64 = dist
            .iter()
            .filter(|(h, _)| h[1] & 1 == h[2] & 1 && h[2] & 1 == h[3] & 1)
            .map(|(_, p)| p)
            .sum();
        assert!((agree - 0.25).abs() < 1e-10);
    }

    #[test]
    fn sd_disjoint_ranges_always_far() {
        let p0 = ClassicalFunction::from_fn(2, 3, |x| x).unwrap();
        let p1 = ClassicalFunction::from_fn(2, 3, |x| x + 4).unwrap();
        let inst = SdInstance::new(p0, p1, Some(SdVerdict::Far)).unwrap();
        assert_eq!(inst.total_variation(), 1.0);
        assert!((sd_all_agree_probability(&inst) - 1.0).abs() < 1e-12);
        let out = sd_decide_trials(&inst, 100, 4).unwrap();
        assert!(out.iter().all(|v| *v == SdVerdict::Far));
        assert!(sd_circuit(&inst)
            .unwrap()
            .validate(ValidationMode::WriteOnce)
            .is_empty());
    }

    #[test]
    fn sd_rejects_mismatched_tables() {
        let p0 = ClassicalFunction::from_fn(2, 2, |x| x).unwrap();
        let p1 = ClassicalFunction::from_fn(3, 2, |x| x & 3).unwrap();
        assert!(SdInstance::new(p0, p1, None).is_err());
    }

    #[test]
    fn ftl_computational_is_always_identified() {
        let out = ftl_signal_trials(Basis::Computational, 5, 200, 2).unwrap();
        assert!(out.iter().all(|b| *b == Basis::Computational));
        assert!(ftl_circuit(Basis::Hadamard, 1).is_err());
    }

    #[test]
    fn ftl_hadamard_error_is_exact() {
        for k in 2..=4 {
            let dist = history_distribution_exact(&ftl_circuit(Basis::Hadamard, k).unwrap(), 1 << 24).unwrap();
            let agree: f64 = dist
                .iter()
                .filter(|(h, _)| h[1..].iter().all(|v| v >> 1 & 1 == h[1] >> 1 & 1))
                .map(|(_, p)| p)
                .sum();
            assert!((agree - 2.0f64.powi(1 - k as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn one_query_single_sample_recovers_one_index() {
        let x = [1, 0, 1, 1, 0, 0, 1, 0];
        let mut rng = rng::seeded(5);
        let res = one_query_evaluate(&x, 1, &mut rng).unwrap();
        assert_eq!(res.unseen.len(), 7);
        for (i, b) in res.recovered.iter().enumerate() {
            if let Some(b) = b {
                assert_eq!(*b, x[i]);
            }
        }
    }

    #[test]
    fn one_qubit_comm_zero_and_half() {
        let mut rng = rng::seeded(8);
        assert_eq!(one_qubit_communicate(0, 3, 100, &mut rng).unwrap(), 0);
        assert!((comm_angle(2, 2).sin().powi(2) - 0.5).abs() < 1e-12);
        assert!(one_qubit_communicate(8, 3, 100, &mut rng).is_err());
    }

    #[test]
    fn tomography_of_basis_and_plus_states() {
        let mut rng = rng::seeded(11);
        let r = 10_000;
        let zero = StateVector::zero(1).unwrap();
        let t = clone_via_tomography(&zero, r, &mut rng).unwrap();
        assert!((t.bloch[2] - 1.0).abs() < 1e-12);
        assert!(t.bloch[0].abs() < 3.0 / (r as f64).sqrt() * 2.0);
        let mut plus = StateVector::zero(1).unwrap();
        plus.apply(&GateOp::h(0)).unwrap();
        let t = clone_via_tomography(&plus, r, &mut rng).unwrap();
        assert!((t.bloch[0] - 1.0).abs() < 1e-12);
        assert!(t.reconstructed.trace_distance(&plus).unwrap() < 0.05);
    }
}
