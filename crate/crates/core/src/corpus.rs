//! Seeded instance generators shared by the verification suites, the CLI
//! and the tests. Everything here is a pure function of its seed.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::algorithms::{SdInstance, SdVerdict};
use crate::circuit::{load_function_table, Circuit, ClassicalFunction, Step};
use crate::error::{Error, Result};
use crate::qp_oracle::{history_distribution_exact, DEFAULT_BUDGET};
use crate::rng::{self, SimRng};
use crate::statevector::{GateOp, Oracle, StateVector};

/// Haar-random pure state.
pub fn random_state<R: Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> Result<StateVector> {
    let amps = (0..1usize << num_qubits)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    StateVector::normalized(amps)
}

/// `state + δ·g` renormalized, for a Gaussian direction `g`.
pub fn perturb_state<R: Rng + ?Sized>(state: &StateVector, delta: f64, rng: &mut R) -> Result<StateVector> {
    let amps = state
        .amplitudes()
        .iter()
        .map(|a| {
            let g = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            a + g * delta
        })
        .collect();
    StateVector::normalized(amps)
}

/// Random pairs on 1–4 qubits: half independent, half nearby.
pub fn random_state_pairs(count: usize, seed: u64) -> Result<Vec<(StateVector, StateVector)>> {
    let mut rng = rng::seeded(seed);
    (0..count)
        .map(|k| {
            let n = rng.gen_range(1..=4);
            let a = random_state(n, &mut rng)?;
            let b = if k % 2 == 0 {
                random_state(n, &mut rng)?
            } else {
                let delta = 10f64.powf(rng.gen_range(-4.0..0.0));
                perturb_state(&a, delta, &mut rng)?
            };
            Ok((a, b))
        })
        .collect()
}

/// Up to `count` random H/X/CNOT/Toffoli gates that never modify a qubit in
/// `frozen`. Controls may be frozen qubits.
pub fn random_gates<R: Rng + ?Sized>(rng: &mut R, num_qubits: usize, count: usize, frozen: &[usize]) -> Vec<GateOp> {
    let free: Vec<usize> = (0..num_qubits).filter(|q| !frozen.contains(q)).collect();
    if free.is_empty() {
        return Vec::new();
    }
    (0..count)
        .map(|_| {
            let target = *free.choose(rng).expect("non-empty");
            let others: Vec<usize> = (0..num_qubits).filter(|&q| q != target).collect();
            let kinds = 2 + usize::from(!others.is_empty()) + usize::from(others.len() >= 2);
            match rng.gen_range(0..kinds) {
                0 => GateOp::h(target),
                1 => GateOp::x(target),
                2 => GateOp::cnot(*others.choose(rng).expect("non-empty"), target),
                _ => {
                    let c: Vec<usize> = others.choose_multiple(rng, 2).copied().collect();
                    GateOp::toffoli(c[0], c[1], target)
                }
            }
        })
        .collect()
}

/// A random write-once circuit: each step has 1–3 gates that leave already
/// measured qubits alone, then measures a random subset of the rest with
/// probability 1/2.
pub fn random_write_once_circuit<R: Rng + ?Sized>(rng: &mut R, num_qubits: usize, steps: usize) -> Result<Circuit> {
    let mut measured: Vec<usize> = Vec::new();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let count = rng.gen_range(1..=3);
        let gates = random_gates(rng, num_qubits, count, &measured);
        let mut m = Vec::new();
        if rng.gen_bool(0.5) {
            for q in 0..num_qubits {
                if !measured.contains(&q) && rng.gen_bool(0.5) {
                    m.push(q);
                }
            }
        }
        measured.extend(&m);
        out.push(Step::new(gates, m));
    }
    Circuit::new(num_qubits, out)
}

#[derive(Debug, Clone)]
pub struct NamedCircuit {
    pub id: String,
    pub circuit: Circuit,
}

/// Hand-written circuits covering the basic shapes.
pub fn fixed_circuits() -> Result<Vec<NamedCircuit>> {
    let named = |id: &str, n: usize, steps: Vec<Step>| {
        Circuit::new(n, steps).map(|circuit| NamedCircuit {
            id: id.to_string(),
            circuit,
        })
    };
    Ok(vec![
        named("single-h", 1, vec![Step::gates(vec![GateOp::h(0)])])?,
        named(
            "hh",
            1,
            vec![Step::gates(vec![GateOp::h(0)]), Step::gates(vec![GateOp::h(0)])],
        )?,
        named(
            "bell-measure",
            2,
            vec![
                Step::new(vec![GateOp::h(0), GateOp::cnot(0, 1)], vec![0]),
                Step::empty(),
            ],
        )?,
        named(
            "ghz-partial",
            3,
            vec![
                Step::new(vec![GateOp::h(0), GateOp::cnot(0, 1), GateOp::cnot(1, 2)], vec![1]),
                Step::gates(vec![GateOp::h(2)]),
                Step::gates(vec![GateOp::h(0)]),
            ],
        )?,
        named(
            "toffoli",
            3,
            vec![
                Step::new(vec![GateOp::h(0), GateOp::h(1), GateOp::toffoli(0, 1, 2)], vec![2]),
                Step::gates(vec![GateOp::h(0)]),
                Step::gates(vec![GateOp::x(1), GateOp::h(1)]),
            ],
        )?,
    ])
}

/// Largest exact history support accepted into the equivalence corpus, so
/// that 10⁵ samples resolve the distribution to about 0.01 in TVD.
pub const EQUIVALENCE_SUPPORT_CAP: usize = 64;

/// Fixed circuits plus `random` write-once circuits with ℓ ≤ 3 and T ≤ 3
/// whose history support is at most [`EQUIVALENCE_SUPPORT_CAP`].
pub fn equivalence_corpus(random: usize, seed: u64) -> Result<Vec<NamedCircuit>> {
    let mut out = fixed_circuits()?;
    let mut rng = rng::seeded(seed);
    let mut k = 0;
    while k < random {
        let n = rng.gen_range(1..=3);
        let t = rng.gen_range(1..=3);
        let circuit = random_write_once_circuit(&mut rng, n, t)?;
        if history_distribution_exact(&circuit, DEFAULT_BUDGET)?.support_size() <= EQUIVALENCE_SUPPORT_CAP {
            out.push(NamedCircuit {
                id: format!("random-{k:03}"),
                circuit,
            });
            k += 1;
        }
    }
    Ok(out)
}

/// An oracle circuit and one of its marked variants.
#[derive(Debug, Clone)]
pub struct OraclePair {
    pub id: String,
    pub base: Circuit,
    pub variant: Circuit,
}

/// Query register size for [`query_circuit_pair`].
const QUERY_BITS: usize = 2;

/// Qubits `0..2` form the query register and are never measured. Step 1
/// puts the register in uniform superposition; each later step is either a
/// pure query (a phase oracle for `f`) or a work step: Hadamards on a random
/// subset of the register, then random gates that leave measured qubits
/// alone. Each step is followed by an optional measurement of non-register
/// qubits. The base circuit queries the all-zero function, the variant the
/// indicator of `x`.
pub fn query_circuit_pair<R: Rng + ?Sized>(
    rng: &mut R,
    num_qubits: usize,
    steps: usize,
    measurements: bool,
) -> Result<(Circuit, Circuit)> {
    if num_qubits <= QUERY_BITS {
        return Err(Error::InvalidArgument(format!("need more than {QUERY_BITS} qubits")));
    }
    let x = rng.gen_range(0..1usize << QUERY_BITS);
    let query = |marked| -> Result<GateOp> {
        Ok(GateOp::PhaseOracle {
            oracle: Oracle::new("f", ClassicalFunction::indicator(QUERY_BITS, marked)?),
            qubits: (0..QUERY_BITS).collect(),
        })
    };
    let register: Vec<usize> = (0..QUERY_BITS).collect();
    let mut frozen: Vec<usize> = Vec::new();
    let mut base = Vec::with_capacity(steps);
    let mut variant = Vec::with_capacity(steps);
    for t in 0..steps {
        let (g0, g1) = if t == 0 {
            let mut g: Vec<GateOp> = register.iter().map(|&q| GateOp::h(q)).collect();
            g.extend(random_gates(rng, num_qubits, 2, &register));
            (g.clone(), g)
        } else if rng.gen_bool(0.5) {
            (vec![query(None)?], vec![query(Some(x))?])
        } else {
            // Mixing the register turns query phases into amplitude changes.
            let mut g: Vec<GateOp> = register
                .iter()
                .filter(|_| rng.gen_bool(0.5))
                .map(|&q| GateOp::h(q))
                .collect();
            let count = rng.gen_range(1..=3);
            g.extend(random_gates(rng, num_qubits, count, &frozen));
            (g.clone(), g)
        };
        let mut m = Vec::new();
        if measurements && rng.gen_bool(0.5) {
            for q in QUERY_BITS..num_qubits {
                if !frozen.contains(&q) && rng.gen_bool(0.5) {
                    m.push(q);
                }
            }
        }
        frozen.extend(&m);
        base.push(Step::new(g0, m.clone()));
        variant.push(Step::new(g1, m));
    }
    Ok((Circuit::new(num_qubits, base)?, Circuit::new(num_qubits, variant)?))
}

/// Oracle pairs with intermediate measurements, ℓ ∈ 3..=5, T ∈ 2..=4.
pub fn measured_oracle_pairs(count: usize, seed: u64) -> Result<Vec<OraclePair>> {
    let mut rng = rng::seeded(seed);
    (0..count)
        .map(|k| {
            let n = rng.gen_range(3..=5);
            let t = rng.gen_range(2..=4);
            let (base, variant) = query_circuit_pair(&mut rng, n, t, true)?;
            Ok(OraclePair {
                id: format!("measured-{k:04}"),
                base,
                variant,
            })
        })
        .collect()
}

/// Measurement-free oracle pairs: random query circuits and small Grover
/// searches against the empty oracle.
pub fn unmeasured_oracle_pairs(count: usize, seed: u64) -> Result<Vec<OraclePair>> {
    let mut rng = rng::seeded(seed);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let pair = if k % 4 == 3 {
            let n = rng.gen_range(2..=3);
            let marked = rng.gen_range(0..1usize << n);
            let iterations = rng.gen_range(1..=2);
            let (base, variant) = grover_pair(n, marked, iterations)?;
            OraclePair {
                id: format!("grover-{k:04}"),
                base,
                variant,
            }
        } else {
            let n = rng.gen_range(3..=4);
            let t = rng.gen_range(1..=3);
            let (base, variant) = query_circuit_pair(&mut rng, n, t, false)?;
            OraclePair {
                id: format!("unmeasured-{k:04}"),
                base,
                variant,
            }
        };
        out.push(pair);
    }
    Ok(out)
}

/// Grover search as a measurement-free circuit, one step per query and one
/// per diffusion, for the empty oracle and for `marked`.
fn grover_pair(n: usize, marked: usize, iterations: usize) -> Result<(Circuit, Circuit)> {
    let build = |m: Option<usize>| -> Result<Circuit> {
        let f = Oracle::new("f", ClassicalFunction::indicator(n, m)?);
        let (query, diffusion) = crate::algorithms::grover_iteration(n, &f)?;
        let mut steps = vec![Step::gates((0..n).map(GateOp::h).collect())];
        for _ in 0..iterations {
            steps.push(Step::gates(vec![query.clone()]));
            steps.push(Step::gates(diffusion.clone()));
        }
        Circuit::new(n, steps)
    };
    Ok((build(None)?, build(Some(marked))?))
}

/// Random instance for the hidden-variable checks: a state, a unitary, and
/// a block structure the unitary respects (grouping by qubits it leaves
/// alone).
pub struct HvInstance {
    pub state: StateVector,
    pub gates: Vec<GateOp>,
    pub fixed_qubits: Vec<usize>,
}

pub fn random_hv_instance(rng: &mut SimRng) -> Result<HvInstance> {
    let n = rng.gen_range(1..=4);
    let state = random_state(n, rng)?;
    let fixed_qubits: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
    let count = rng.gen_range(0..=4);
    let gates = random_gates(rng, n, count, &fixed_qubits);
    Ok(HvInstance {
        state,
        gates,
        fixed_qubits,
    })
}

fn random_table<R: Rng + ?Sized>(rng: &mut R, n: usize, values: &[usize]) -> Vec<usize> {
    (0..1usize << n)
        .map(|_| *values.choose(rng).expect("non-empty"))
        .collect()
}

/// Changes at most two entries of `table` to values drawn from `values`.
fn perturb_table<R: Rng + ?Sized>(rng: &mut R, table: &mut [usize], values: &[usize]) {
    for _ in 0..rng.gen_range(0..=2) {
        let i = rng.gen_range(0..table.len());
        table[i] = *values.choose(rng).expect("non-empty");
    }
}

/// One statistical-difference instance with `n`-bit inputs and `m`-bit
/// outputs.
///
/// Close: `P_1` is `P_0` with inputs permuted and at most two outputs
/// changed, so the TVD is at most `2/2^n`. Far: the two tables draw from
/// complementary halves of the output space, with at most two entries of
/// `P_1` moved into `P_0`'s half, so the TVD is at least `1 − 2/2^n`.
pub fn random_sd_instance<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, promise: SdVerdict) -> Result<SdInstance> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("n and m must be positive".into()));
    }
    let all: Vec<usize> = (0..1usize << m).collect();
    let (t0, t1) = match promise {
        SdVerdict::Close => {
            let t0 = random_table(rng, n, &all);
            let mut perm: Vec<usize> = (0..t0.len()).collect();
            perm.shuffle(rng);
            let mut t1: Vec<usize> = perm.iter().map(|&i| t0[i]).collect();
            perturb_table(rng, &mut t1, &all);
            (t0, t1)
        }
        SdVerdict::Far => {
            let mut shuffled = all.clone();
            shuffled.shuffle(rng);
            let (a, b) = shuffled.split_at(all.len() / 2);
            let t0 = random_table(rng, n, a);
            let mut t1 = random_table(rng, n, b);
            perturb_table(rng, &mut t1, a);
            (t0, t1)
        }
    };
    SdInstance::new(
        ClassicalFunction::new(n, m, t0)?,
        ClassicalFunction::new(n, m, t1)?,
        Some(promise),
    )
}

/// `count` instances alternating close and far.
pub fn sd_corpus(count: usize, n: usize, m: usize, seed: u64) -> Result<Vec<(String, SdInstance)>> {
    let mut rng = rng::seeded(seed);
    (0..count)
        .map(|k| {
            let promise = if k % 2 == 0 { SdVerdict::Close } else { SdVerdict::Far };
            Ok((
                format!("sd-{k:04}-{promise}"),
                random_sd_instance(&mut rng, n, m, promise)?,
            ))
        })
        .collect()
}

/// Writes an instance as `<dir>/<name>/{p0.tbl, p1.tbl, promise}`.
pub fn write_sd_instance(dir: &Path, name: &str, inst: &SdInstance) -> Result<()> {
    let sub = dir.join(name);
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", sub.display()));
    fs::create_dir_all(&sub).map_err(io)?;
    fs::write(sub.join("p0.tbl"), inst.p0.to_table_text()).map_err(io)?;
    fs::write(sub.join("p1.tbl"), inst.p1.to_table_text()).map_err(io)?;
    if let Some(p) = inst.promise {
        fs::write(sub.join("promise"), format!("{p}\n")).map_err(io)?;
    }
    Ok(())
}

/// Loads every subdirectory of `dir` holding `p0.tbl` and `p1.tbl`, sorted
/// by name. A `promise` file (`close` or `far`) is optional.
pub fn load_sd_dir(dir: &Path) -> Result<Vec<(String, SdInstance)>> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", dir.display()));
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join("p0.tbl").is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Io(format!(
            "{}: no instance directories with p0.tbl",
            dir.display()
        )));
    }
    names
        .into_iter()
        .map(|name| {
            let sub = dir.join(&name);
            let p0 = load_function_table(sub.join("p0.tbl"), None, None)?;
            let p1 = load_function_table(sub.join("p1.tbl"), None, None)?;
            let promise_path = sub.join("promise");
            let promise = if promise_path.is_file() {
                Some(
                    fs::read_to_string(&promise_path)
                        .map_err(|e| Error::Io(format!("{}: {e}", promise_path.display())))?
                        .parse()?,
                )
            } else {
                None
            };
            Ok((name, SdInstance::new(p0, p1, promise)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::ValidationMode;

    #[test]
    fn random_circuits_are_write_once() {
        let mut rng = rng::seeded(3);
        for _ in 0..200 {
            let c = random_write_once_circuit(&mut rng, 3, 3).unwrap();
            assert!(c.validate(ValidationMode::WriteOnce).is_empty());
        }
    }

    #[test]
    fn equivalence_corpus_respects_cap() {
        let corpus = equivalence_corpus(10, 1).unwrap();
        assert_eq!(corpus.len(), fixed_circuits().unwrap().len() + 10);
        for c in &corpus {
            assert!(c.circuit.num_qubits() <= 3 && c.circuit.len() <= 3);
            let d = history_distribution_exact(&c.circuit, DEFAULT_BUDGET).unwrap();
            assert!(d.support_size() <= EQUIVALENCE_SUPPORT_CAP, "{}", c.id);
        }
    }

    #[test]
    fn oracle_pairs_are_write_once() {
        for p in measured_oracle_pairs(50, 2).unwrap() {
            assert!(p.base.validate(ValidationMode::WriteOnce).is_empty());
            assert!(p.variant.validate(ValidationMode::WriteOnce).is_empty());
        }
        for p in unmeasured_oracle_pairs(20, 2).unwrap() {
            assert!(!p.base.has_measurements());
        }
    }

    #[test]
    fn sd_corpus_meets_promises() {
        for (_, inst) in sd_corpus(20, 8, 8, 4).unwrap() {
            let d = inst.total_variation();
            match inst.promise.unwrap() {
                SdVerdict::Close => assert!(d <= 0.01, "{d}"),
                SdVerdict::Far => assert!(d >= 0.99, "{d}"),
            }
        }
    }

    #[test]
    fn sd_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = sd_corpus(4, 3, 2, 5).unwrap();
        for (name, inst) in &corpus {
            write_sd_instance(dir.path(), name, inst).unwrap();
        }
        let loaded = load_sd_dir(dir.path()).unwrap();
        assert_eq!(loaded, corpus);
    }
}
