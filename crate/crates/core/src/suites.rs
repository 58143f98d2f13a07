//! Verification suites: each runs one family of checkers over a seeded
//! corpus and reports one record per check.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    check_hybrid_bound, check_markov_tv_lemma, check_pairwise_tv_bound, check_product_fidelity_chain,
    check_trace_vs_l2, correlation_flip_pair, MarkovChainSpec, PRODUCT_BUDGET,
};
use crate::circuit::ClassicalFunction;
use crate::corpus::{self, NamedCircuit};
use crate::error::{Error, Result};
use crate::exact_sim::{exact_history_distribution, exact_sample_history, path_sum_amplitude};
use crate::hidden_variables::{
    circuit_block_structure, dieks_continuity_check, dieks_joint, history_distribution_pt, product_theory_joint,
    unitary_block_structure, validate_hv_matrix, BlockStructure,
};
use crate::qp_oracle::{history_distribution_exact, to_block_form, HistoryDistribution, QpSampler, DEFAULT_BUDGET};
use crate::rng;
use crate::statevector::{GateOp, Oracle, StateVector};

/// Tolerance for identities that hold exactly in exact arithmetic.
pub const EXACT_TOLERANCE: f64 = 1e-10;
/// Empirical-vs-exact TVD tolerance at the default sample count.
pub const SAMPLING_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suite {
    Markov,
    Trace,
    Hybrid,
    Pairwise,
    ProductFidelity,
    HvValidity,
    QpqbEquiv,
    ExactsimEquiv,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Markov,
        Suite::Trace,
        Suite::Hybrid,
        Suite::Pairwise,
        Suite::ProductFidelity,
        Suite::HvValidity,
        Suite::QpqbEquiv,
        Suite::ExactsimEquiv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Markov => "markov",
            Suite::Trace => "trace",
            Suite::Hybrid => "hybrid",
            Suite::Pairwise => "pairwise",
            Suite::ProductFidelity => "product-fidelity",
            Suite::HvValidity => "hv-validity",
            Suite::QpqbEquiv => "qpqb-equiv",
            Suite::ExactsimEquiv => "exactsim-equiv",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite '{s}'")))
    }
}

/// Parses a comma-separated list of suite names, where `all` selects every
/// suite.
pub fn parse_suites(s: &str) -> Result<Vec<Suite>> {
    if s == "all" {
        return Ok(Suite::ALL.to_vec());
    }
    let mut out: Vec<Suite> = Vec::new();
    for name in s.split(',') {
        let suite = name.trim().parse()?;
        if !out.contains(&suite) {
            out.push(suite);
        }
    }
    Ok(out)
}

/// Corpus sizes. [`SuiteSizes::full`] is what the CLI and the acceptance
/// test run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteSizes {
    pub markov_pairs: usize,
    pub trace_pairs: usize,
    pub hybrid_max_bits: usize,
    pub pairwise_instances: usize,
    pub product_instances: usize,
    pub hv_instances: usize,
    pub continuity_instances: usize,
    pub random_circuits: usize,
    pub samples: usize,
}

impl SuiteSizes {
    pub fn full() -> Self {
        SuiteSizes {
            markov_pairs: 10_000,
            trace_pairs: 10_000,
            hybrid_max_bits: 10,
            pairwise_instances: 1_000,
            product_instances: 200,
            hv_instances: 1_000,
            continuity_instances: 1_000,
            random_circuits: 40,
            samples: 100_000,
        }
    }

    pub fn quick() -> Self {
        SuiteSizes {
            markov_pairs: 200,
            trace_pairs: 200,
            hybrid_max_bits: 5,
            pairwise_instances: 50,
            product_instances: 20,
            hv_instances: 50,
            continuity_instances: 50,
            random_circuits: 5,
            samples: 20_000,
        }
    }
}

/// One check: `holds` is the checker's verdict on `lhs` against `rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub checker: String,
    #[serde(rename = "instance-id")]
    pub instance_id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl CheckRecord {
    fn new(checker: &str, instance_id: impl Into<String>, lhs: f64, rhs: f64, holds: bool) -> Self {
        CheckRecord {
            checker: checker.to_string(),
            instance_id: instance_id.into(),
            lhs,
            rhs,
            holds,
        }
    }

    /// `lhs ≤ rhs`.
    fn bound(checker: &str, instance_id: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self::new(checker, instance_id, lhs, rhs, lhs <= rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub records: Vec<CheckRecord>,
}

impl SuiteReport {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.holds).count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    /// Records of one checker.
    pub fn checker<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a CheckRecord> {
        self.records.iter().filter(move |r| r.checker == name)
    }
}

/// Runs one suite. Each suite derives its corpus from `seed` alone.
pub fn run_suite(suite: Suite, seed: u64, sizes: &SuiteSizes) -> Result<SuiteReport> {
    let records = match suite {
        Suite::Markov => markov(seed, sizes)?,
        Suite::Trace => trace(seed, sizes)?,
        Suite::Hybrid => hybrid(sizes)?,
        Suite::Pairwise => pairwise(seed, sizes)?,
        Suite::ProductFidelity => product_fidelity(seed, sizes)?,
        Suite::HvValidity => hv_validity(seed, sizes)?,
        Suite::QpqbEquiv => qpqb_equiv(seed, sizes)?,
        Suite::ExactsimEquiv => exactsim_equiv(seed, sizes)?,
    };
    Ok(SuiteReport {
        suite: suite.name().to_string(),
        records,
    })
}

fn markov(seed: u64, sizes: &SuiteSizes) -> Result<Vec<CheckRecord>> {
    let mut records: Vec<CheckRecord> = (0..sizes.markov_pairs as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::stream(seed, k);
            let t = rng.gen_range(1..=4);
            let shape: Vec<usize> = (0..=t).map(|_| rng.gen_range(2..=4)).collect();
            let v = MarkovChainSpec::random(&mut rng, &shape);
            let w = MarkovChainSpec::random(&mut rng, &shape);
            let r = check_markov_tv_lemma(&v, &w)?;
            Ok(CheckRecord::new(
                "markov-tv",
                format!("chain-{k:05}"),
                r.lhs,
                r.rhs,
                r.holds,
            ))
        })
        .collect::<Result<_>>()?;
    let (v, w) = correlation_flip_pair();
    let r = check_markov_tv_lemma(&v, &w)?;
    records.push(CheckRecord::new("markov-tv", "correlation-flip", r.lhs, r.rhs, r.holds));
    // The flip pair shows that summing single-step marginal distances does
    // not bound the history distance: this record holds when lhs > rhs.
    records.push(CheckRecord::new(
        "markov-marginal-counterexample",
        "correlation-flip",
        r.lhs,
        r.marginal_sum,
        r.lhs == 1.0 && r.marginal_sum == 0.0,
    ));
    Ok(records)
}

fn trace(seed: u64, sizes: &SuiteSizes) -> Result<Vec<CheckRecord>> {
    let pairs = corpus::random_state_pairs(sizes.trace_pairs, seed)?;
    let report = check_trace_vs_l2(&pairs)?;
    Ok(report
        .results
        .iter()
        .enumerate()
        .map(|(k, r)| CheckRecord::new("trace-vs-l2", format!("pair-{k:05}"), r.trace, r.l2, r.holds))
        .collect())
}

/// Grover circuits for `n = 1..=max` with `⌈(π/4)√N⌉` iterations.
fn hybrid(sizes: &SuiteSizes) -> Result<Vec<CheckRecord>> {
    let mut records = Vec::new();
    for n in 1..=sizes.hybrid_max_bits {
        let k = ((std::f64::consts::PI / 4.0) * ((1usize << n) as f64).sqrt()).ceil() as usize;
        let report = check_hybrid_bound(n, k)?;
        records.extend(
            report
                .steps
                .iter()
                .map(|s| CheckRecord::new("hybrid", format!("grover-n{n:02}-t{:03}", s.t), s.sum, s.bound, s.holds)),
        );
    }
    Ok(records)
}

fn pairwise(seed: u64, sizes: &SuiteSizes) -> Result<Vec<CheckRecord>> {
    let pairs = corpus::measured_oracle_pairs(sizes.pairwise_instances, seed)?;
    let nested: Vec<Vec<CheckRecord>> = pairs
        .par_iter()
        .map(|p| {
            (1..=p.base.len())
                .map(|i| {
                    let r = check_pairwise_tv_bound(&p.base, &p.variant, i)?;
                    Ok(CheckRecord::new(
                        "pairwise-tv",
                        format!("{}-i{i}", p.id),
                        r.d,
                        r.bound,
                        r.holds,
                    ))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

fn product_fidelity(seed: u64, sizes: &SuiteSizes) -> Result<Vec<CheckRecord>> {
    let pairs = corpus::unmeasured_oracle_pairs(sizes.product_instances, seed)?;
    pairs
        .par_iter()
        .map(|p| {
            let r = check_product_fidelity_chain(&p.base, &p.variant, PRODUCT_BUDGET)?;
            Ok(CheckRecord::new(
                "product-fidelity",
                p.id.clone(),
                r.lhs,
                r.rhs,
                r.holds,
            ))
        })
        .collect()
}

fn born_after(state: &StateVector, gates: &[GateOp]) -> Result<StateVector> {
    let mut out = state.clone();
    out.apply_all(gates)?;
    Ok(out)
}

fn hv_validity(seed: u64, sizes: &SuiteSizes) -> Result<Vec<CheckRecord>> {
    let marginals: Vec<Vec<CheckRecord>> = (0..sizes.hv_instances as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::stream(seed, k);
            let inst = corpus::random_hv_instance(&mut rng)?;
            let n = inst.state.num_qubits();
            let beta = born_after(&inst.state, &inst.gates)?;
            let blocks = BlockStructure::from_measured_qubits(n, &inst.fixed_qubits);
            let pt = product_theory_joint(&inst.state, &inst.gates, &blocks)?;
            let pt = validate_hv_matrix(&pt, inst.state.amplitudes(), beta.amplitudes())?;
            let dieks = dieks_joint(&inst.state, &inst.gates)?;
            let dieks = validate_hv_matrix(&dieks, inst.state.amplitudes(), beta.amplitudes())?;
            let id = format!("hv-{k:04}");
            Ok(vec![
                CheckRecord::bound("product-theory-marginals", id.clone(), pt.max_error(), EXACT_TOLERANCE),
                CheckRecord::bound("dieks-marginals", id, dieks.max_error(), EXACT_TOLERANCE),
            ])
        })
        .collect::<Result<_>>()?;
    let continuity: Vec<CheckRecord> = (0..sizes.continuity_instances as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng::stream(seed ^ 0x5eed_c0de, k);
            let n = rng.gen_range(1..=4);
            let psi = corpus::random_state(n, &mut rng)?;
            let delta = 10f64.powf(rng.gen_range(-3.0..-0.5));
            let psi_x = corpus::perturb_state(&psi, delta, &mut rng)?;
            let count = rng.gen_range(1..=4);
            let gates = corpus::random_gates(&mut rng, n, count, &[]);
            let mut gates_x = gates.clone();
            if k % 2 == 1 {
                // A diagonal gate leaves the circuit block structure alone.
                let table: Vec<usize> = (0..1usize << n).map(|_| rng.gen_range(0..2)).collect();
                gates_x.push(GateOp::PhaseOracle {
                    oracle: Oracle::new("g", ClassicalFunction::new(n, 1, table)?),
                    qubits: (0..n).collect(),
                });
            }
            let before = 2.0 * psi.trace_distance(&psi_x)?;
            let after = 2.0 * born_after(&psi, &gates)?.trace_distance(&born_after(&psi_x, &gates_x)?)?;
            let r = dieks_continuity_check(&psi, &psi_x, &gates, &gates_x, before.max(after))?;
            Ok(CheckRecord::new(
                "dieks-continuity",
                format!("perturbed-{k:04}"),
                r.lhs,
                r.bound,
                r.holds,
            ))
        })
        .collect::<Result<_>>()?;
    let hh = [GateOp::h(0), GateOp::h(0)];
    let circuit_blocks = circuit_block_structure(&hh, 1)?.num_blocks();
    let unitary_blocks = unitary_block_structure(&hh, 1)?.num_blocks();
    let mut records: Vec<CheckRecord> = marginals.into_iter().flatten().collect();
    records.extend(continuity);
    records.push(CheckRecord::new(
        "circuit-block-structure",
        "hh-one-qubit",
        circuit_blocks as f64,
        unitary_blocks as f64,
        circuit_blocks == 1 && unitary_blocks == 2,
    ));
    Ok(records)
}

fn qpqb_equiv(seed: u64, sizes: &SuiteSizes) -> Result<Vec<CheckRecord>> {
    let corpus = corpus::equivalence_corpus(sizes.random_circuits, seed)?;
    corpus
        .par_iter()
        .map(|c| {
            let exact = history_distribution_exact(&c.circuit, DEFAULT_BUDGET)?;
            let form = to_block_form(&c.circuit)?;
            let pt = history_distribution_pt(form.num_qubits, &form.unitaries, &form.blocks, 0, DEFAULT_BUDGET)?;
            Ok(CheckRecord::bound(
                "qp-vs-qb",
                c.id.clone(),
                exact.max_abs_difference(&pt),
                EXACT_TOLERANCE,
            ))
        })
        .collect()
}

/// Largest |⟨y|U|x⟩ − path sum| over all basis pairs of the circuit's
/// gates taken as one unitary.
fn path_sum_error(c: &NamedCircuit) -> Result<f64> {
    let n = c.circuit.num_qubits();
    let gates: Vec<GateOp> = c.circuit.gates().cloned().collect();
    let mut worst = 0.0f64;
    for x in 0..1usize << n {
        let mut col = StateVector::basis(n, x)?;
        col.apply_all(&gates)?;
        for (y, a) in col.amplitudes().iter().enumerate() {
            let p = path_sum_amplitude(&gates, n, x, y)?.to_f64();
            worst = worst.max((a.re - p).abs()).max(a.im.abs());
        }
    }
    Ok(worst)
}

fn empirical<F>(samples: usize, seed: u64, draw: F) -> Result<HistoryDistribution>
where
    F: Fn(&mut rng::SimRng) -> Result<crate::qp_oracle::History> + Sync,
{
    let histories: Vec<_> = (0..samples as u64)
        .into_par_iter()
        .map(|s| draw(&mut rng::stream(seed, s)))
        .collect::<Result<_>>()?;
    HistoryDistribution::empirical(&histories)
}

fn exactsim_equiv(seed: u64, sizes: &SuiteSizes) -> Result<Vec<CheckRecord>> {
    let corpus = corpus::equivalence_corpus(sizes.random_circuits, seed)?;
    let mut records = Vec::new();
    for (k, c) in corpus.iter().enumerate() {
        let reference = history_distribution_exact(&c.circuit, DEFAULT_BUDGET)?;
        let exact = exact_history_distribution(&c.circuit, DEFAULT_BUDGET)?;
        records.push(CheckRecord::bound(
            "path-sum-vs-statevector",
            c.id.clone(),
            path_sum_error(c)?,
            EXACT_TOLERANCE,
        ));
        records.push(CheckRecord::bound(
            "exact-enumeration",
            c.id.clone(),
            exact.max_abs_difference(&reference),
            EXACT_TOLERANCE,
        ));
        let sub = seed.wrapping_add((k as u64 + 1) << 32);
        let sampler = QpSampler::new(&c.circuit)?;
        let sampled = empirical(sizes.samples, sub, |r| sampler.sample(r))?;
        records.push(CheckRecord::bound(
            "sample-history-tvd",
            c.id.clone(),
            sampled.total_variation(&reference),
            SAMPLING_TOLERANCE,
        ));
        let exact_sampled = empirical(sizes.samples, sub ^ 1, |r| exact_sample_history(&c.circuit, r))?;
        records.push(CheckRecord::bound(
            "exact-sample-history-tvd",
            c.id.clone(),
            exact_sampled.total_variation(&reference),
            SAMPLING_TOLERANCE,
        ));
    }
    Ok(records)
}
