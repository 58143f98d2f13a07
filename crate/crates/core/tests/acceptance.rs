//! Release gate. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion failed. Every criterion is computed twice under the same seed
//! and the second run must reproduce the first exactly.

use std::f64::consts::PI;
use std::process::Command;

use pdqp::algorithms::{self, Basis, SdInstance, SdVerdict, SearchInstance, SearchOutcome};
use pdqp::circuit::ClassicalFunction;
use pdqp::corpus;
use pdqp::qp_oracle::{history_distribution_exact, DEFAULT_BUDGET};
use pdqp::rng;
use pdqp::suites::{run_suite, Suite, SuiteReport, SuiteSizes};
use rand::Rng;
use rayon::prelude::*;

const SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    detail: String,
    /// Everything the criterion computed, for the reproducibility check.
    digest: String,
}

fn outcome(passed: bool, detail: String, digest: impl serde::Serialize) -> Outcome {
    Outcome {
        passed,
        detail,
        digest: serde_json::to_string(&digest).unwrap(),
    }
}

/// Per-sample hit probability after K Grover iterations, closed form.
fn grover_probability(n: usize, k: usize) -> f64 {
    let theta = (1.0 / ((1usize << n) as f64).sqrt()).asin();
    ((2 * k + 1) as f64 * theta).sin().powi(2)
}

/// Least Q + T reaching 2/3, from the closed form, for both algorithms.
fn closed_form_costs(n: usize) -> (usize, usize) {
    let target = 2.0 / 3.0;
    let kmax = ((PI / 4.0) * ((1usize << n) as f64).sqrt()).ceil() as usize + 2;
    let pdqp = (1..=kmax)
        .filter_map(|k| {
            let p = grover_probability(n, k);
            let r = if p >= target {
                1
            } else if p > 0.0 {
                ((1.0f64 / 3.0).ln() / (1.0 - p).ln()).ceil() as usize
            } else {
                return None;
            };
            Some(k + 1 + r)
        })
        .min()
        .unwrap();
    let grover = (1..=kmax).find(|&k| grover_probability(n, k) >= target).unwrap() + 1;
    (pdqp, grover)
}

fn slope(ns: &[usize], costs: &[usize]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64 * 2f64.ln()).collect();
    let ys: Vec<f64> = costs.iter().map(|&c| (c as f64).ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn search_scaling() -> Outcome {
    let ns: Vec<usize> = (6..=15).collect();
    let trials = 200;
    let mut rates = Vec::new();
    let (mut pdqp_costs, mut grover_costs) = (Vec::new(), Vec::new());
    let mut costs_match = true;
    for &n in &ns {
        let marked = rng::stream(SEED, n as u64).gen_range(0..1usize << n);
        let inst = SearchInstance::scaled(n, Some(marked), trials).unwrap();
        let hits = algorithms::pdqp_search_trials(&inst, rng::derive(SEED, n as u64))
            .unwrap()
            .iter()
            .filter(|o| **o == SearchOutcome::Found(marked))
            .count();
        rates.push(hits as f64 / trials as f64);
        let p = algorithms::pdqp_min_cost(n, 2.0 / 3.0).unwrap().cost;
        let g = algorithms::grover_min_cost(n, 2.0 / 3.0).unwrap().cost;
        costs_match &= closed_form_costs(n) == (p, g);
        pdqp_costs.push(p);
        grover_costs.push(g);
    }
    let (sp, sg) = (slope(&ns, &pdqp_costs), slope(&ns, &grover_costs));
    let min_rate = rates.iter().copied().fold(1.0, f64::min);
    let passed = min_rate >= 2.0 / 3.0 && (sp - 1.0 / 3.0).abs() <= 0.07 && (sg - 0.5).abs() <= 0.07 && costs_match;
    outcome(
        passed,
        format!(
            "min success rate {min_rate:.3} over n=6..15 ({trials} trials each); slopes pdqp {sp:.3}, grover {sg:.3}; costs match closed form: {costs_match}"
        ),
        (rates, pdqp_costs, grover_costs),
    )
}

fn brute_force_tvd(inst: &SdInstance) -> f64 {
    let size = 1usize << inst.output_bits();
    let mut diff = vec![0i64; size];
    for x in 0..1usize << inst.input_bits() {
        diff[inst.p0.eval(x)] += 1;
        diff[inst.p1.eval(x)] -= 1;
    }
    diff.iter().map(|d| d.unsigned_abs()).sum::<u64>() as f64 / 2.0 / (1usize << inst.input_bits()) as f64
}

fn statistical_difference() -> Outcome {
    let corpus = corpus::sd_corpus(200, 8, 8, SEED).unwrap();
    let promises_hold = corpus.iter().all(|(_, inst)| match inst.promise.unwrap() {
        SdVerdict::Close => brute_force_tvd(inst) <= 0.01,
        SdVerdict::Far => brute_force_tvd(inst) >= 0.99,
    });
    let decisions: Vec<SdVerdict> = corpus
        .iter()
        .enumerate()
        .map(|(k, (_, inst))| algorithms::sd_decide_trials(inst, 1, rng::derive(SEED, k as u64)).unwrap()[0])
        .collect();
    let correct = corpus
        .iter()
        .zip(&decisions)
        .filter(|((_, inst), d)| inst.promise == Some(**d))
        .count();
    let accuracy = correct as f64 / corpus.len() as f64;
    // Identical tables on a small instance, by exhaustive enumeration.
    let p = ClassicalFunction::from_fn(2, 2, |x| [3, 1, 1, 0][x]).unwrap();
    let inst = SdInstance::new(p.clone(), p, Some(SdVerdict::Close)).unwrap();
    let dist = history_distribution_exact(&algorithms::sd_circuit(&inst).unwrap(), DEFAULT_BUDGET).unwrap();
    let agree: f64 = dist
        .iter()
        .filter(|(h, _)| h[1] & 1 == h[2] & 1 && h[2] & 1 == h[3] & 1)
        .map(|(_, p)| p)
        .sum();
    let passed = promises_hold && accuracy >= 0.75 && (agree - 0.25).abs() <= 1e-3;
    outcome(
        passed,
        format!("accuracy {accuracy:.3} on 200 instances (n = m = 8, promises hold: {promises_hold}); exact all-agree probability at TVD 0: {agree:.6}"),
        (decisions, agree),
    )
}

fn report_summary(reports: &[SuiteReport], checkers: &[&str]) -> (bool, String) {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in checkers {
        let records: Vec<_> = reports.iter().flat_map(|r| r.checker(name)).collect();
        let holds = records.iter().filter(|r| r.holds).count();
        ok &= !records.is_empty() && holds == records.len();
        parts.push(format!("{name} {holds}/{}", records.len()));
    }
    (ok, parts.join(", "))
}

fn oracle_equivalence(sizes: &SuiteSizes) -> Outcome {
    let reports: Vec<SuiteReport> = [Suite::QpqbEquiv, Suite::ExactsimEquiv]
        .into_iter()
        .map(|s| run_suite(s, SEED, sizes).unwrap())
        .collect();
    let (ok, summary) = report_summary(
        &reports,
        &[
            "qp-vs-qb",
            "exact-enumeration",
            "path-sum-vs-statevector",
            "sample-history-tvd",
            "exact-sample-history-tvd",
        ],
    );
    let worst_tvd = reports
        .iter()
        .flat_map(|r| r.records.iter())
        .filter(|r| r.checker.ends_with("-tvd"))
        .map(|r| r.lhs)
        .fold(0.0, f64::max);
    outcome(
        ok,
        format!(
            "{summary}; worst empirical TVD {worst_tvd:.4} at {} samples",
            sizes.samples
        ),
        &reports,
    )
}

fn lemma_suite(sizes: &SuiteSizes) -> Outcome {
    let reports: Vec<SuiteReport> = [
        Suite::Markov,
        Suite::Trace,
        Suite::Hybrid,
        Suite::Pairwise,
        Suite::ProductFidelity,
        Suite::HvValidity,
    ]
    .into_iter()
    .map(|s| run_suite(s, SEED, sizes).unwrap())
    .collect();
    let (ok, summary) = report_summary(
        &reports,
        &[
            "markov-tv",
            "markov-marginal-counterexample",
            "trace-vs-l2",
            "hybrid",
            "pairwise-tv",
            "product-fidelity",
            "dieks-continuity",
        ],
    );
    let flip = reports[0].checker("markov-marginal-counterexample").next().unwrap();
    let counts_ok = reports[0].checker("markov-tv").count() > 10_000
        && reports[1].records.len() >= 10_000
        && reports[3].records.len() >= 1_000
        && reports[5].checker("dieks-continuity").count() >= 1_000;
    outcome(
        ok && counts_ok && flip.lhs == 1.0 && flip.rhs == 0.0,
        format!("{summary}; counterexample lhs {} marginal sum {}", flip.lhs, flip.rhs),
        &reports,
    )
}

fn hv_validity(sizes: &SuiteSizes) -> Outcome {
    let report = run_suite(Suite::HvValidity, SEED, sizes).unwrap();
    let (ok, summary) = report_summary(
        std::slice::from_ref(&report),
        &["product-theory-marginals", "dieks-marginals", "circuit-block-structure"],
    );
    let worst = report
        .records
        .iter()
        .filter(|r| r.checker.ends_with("-marginals"))
        .map(|r| r.lhs)
        .fold(0.0, f64::max);
    let counts_ok = report.checker("product-theory-marginals").count() >= 1_000;
    outcome(
        ok && counts_ok,
        format!("{summary}; worst marginal error {worst:.2e}"),
        &report,
    )
}

fn phenomena() -> Outcome {
    // Signaling: k = 6 keeps the predicted error large enough to resolve.
    let k = 6;
    let trials = 100_000;
    let wrong_comp = algorithms::ftl_signal_trials(Basis::Computational, k, trials, rng::derive(SEED, 1))
        .unwrap()
        .iter()
        .filter(|b| **b != Basis::Computational)
        .count();
    let wrong_had = algorithms::ftl_signal_trials(Basis::Hadamard, k, trials, rng::derive(SEED, 2))
        .unwrap()
        .iter()
        .filter(|b| **b != Basis::Hadamard)
        .count();
    let p = 2f64.powi(1 - k as i32);
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    let rate = wrong_had as f64 / trials as f64;
    let ftl_ok = wrong_comp == 0 && (rate - p).abs() <= 3.0 * sigma;

    // One query, N = 8, coupon-collector sample count.
    let size = 8usize;
    let r = (size as f64 * (size as f64 / 0.01).ln()).ceil() as usize;
    let full: usize = (0..10_000u64)
        .into_par_iter()
        .map(|t| {
            let mut g = rng::stream(rng::derive(SEED, 3), t);
            let x: Vec<u8> = (0..size).map(|_| g.gen_range(0..2)).collect();
            let res = algorithms::one_query_evaluate(&x, r, &mut g).unwrap();
            let right = res.recovered.iter().zip(&x).all(|(got, want)| *got == Some(*want));
            usize::from(right)
        })
        .sum();
    let recovery = full as f64 / 10_000.0;

    // One-qubit communication, n = 3, R = 2^12.
    let errors: usize = (0..1000u64)
        .into_par_iter()
        .map(|t| {
            let mut g = rng::stream(rng::derive(SEED, 4), t);
            let x = g.gen_range(0..8);
            usize::from(algorithms::one_qubit_communicate(x, 3, 1 << 12, &mut g).unwrap() != x)
        })
        .sum();
    let comm_error = errors as f64 / 1000.0;

    // Cloning by tomography, R = 10^4, 100 random states.
    let distances: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|t| {
            let mut g = rng::stream(rng::derive(SEED, 5), t);
            let state = corpus::random_state(1, &mut g).unwrap();
            let est = algorithms::clone_via_tomography(&state, 10_000, &mut g).unwrap();
            est.reconstructed.trace_distance(&state).unwrap()
        })
        .collect();
    let mean_td = distances.iter().sum::<f64>() / distances.len() as f64;

    let passed = ftl_ok && recovery >= 0.99 && comm_error <= 0.05 && mean_td <= 0.05;
    outcome(
        passed,
        format!(
            "signaling error {rate:.5} vs {p:.5} ± 3·{sigma:.5} (k = {k}); one-query recovery {recovery:.4} at R = {r}; one-qubit decode error {comm_error:.3}; cloning mean trace distance {mean_td:.4}"
        ),
        (wrong_comp, wrong_had, full, errors, distances),
    )
}

fn cli_bytes(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_pdqp")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn run_all(sizes: &SuiteSizes) -> Vec<(&'static str, Outcome)> {
    vec![
        ("search scaling", search_scaling()),
        ("statistical difference", statistical_difference()),
        ("sampler and exact oracle equivalence", oracle_equivalence(sizes)),
        ("inequality checkers", lemma_suite(sizes)),
        ("hidden-variable validity", hv_validity(sizes)),
        ("non-collapsing phenomena", phenomena()),
    ]
}

fn main() {
    let sizes = SuiteSizes::full();
    let first = run_all(&sizes);
    let mut failed = Vec::new();
    for (k, (name, o)) in first.iter().enumerate() {
        println!(
            "criterion {} [{}] {name}: {}",
            k + 1,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.passed {
            failed.push(k + 1);
        }
    }

    let second = run_all(&sizes);
    let same_lib = first.iter().zip(&second).all(|((_, a), (_, b))| a.digest == b.digest);
    let cli_runs = [
        vec!["search", "--n-min", "6", "--n-max", "10", "--seed", "5"],
        vec![
            "verify", "--suite", "markov", "--quick", "true", "--seed", "5", "--format", "json",
        ],
        vec!["phenomena", "--demo", "ftl", "--trials", "2000", "--seed", "5"],
    ];
    let same_cli = cli_runs.iter().all(|args| cli_bytes(args) == cli_bytes(args));
    let deterministic = same_lib && same_cli;
    println!(
        "criterion 7 [{}] determinism: library results identical across runs: {same_lib}; CLI output byte-identical: {same_cli}",
        if deterministic { "PASS" } else { "FAIL" }
    );
    if !deterministic {
        failed.push(7);
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all 7 criteria passed");
}
