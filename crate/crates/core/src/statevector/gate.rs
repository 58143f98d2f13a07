use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::circuit::ClassicalFunction;
use crate::error::{Error, Result};

/// A named truth-table function used by the oracle gates.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub name: String,
    pub function: Arc<ClassicalFunction>,
}

impl Oracle {
    pub fn new(name: impl Into<String>, function: ClassicalFunction) -> Self {
        Oracle {
            name: name.into(),
            function: Arc::new(function),
        }
    }

    pub fn shared(name: impl Into<String>, function: Arc<ClassicalFunction>) -> Self {
        Oracle {
            name: name.into(),
            function,
        }
    }
}

impl PartialEq for Oracle {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && (Arc::ptr_eq(&self.function, &other.function) || self.function == other.function)
    }
}

/// One gate of the fixed gate set.
///
/// Oracle gates read the bits of `qubits` / `inputs` as an integer with the
/// first listed qubit as the least-significant bit; `XorOracle` writes bit `k`
/// of the function value onto `outputs[k]`.
#[derive(Debug, Clone, PartialEq)]
pub enum GateOp {
    Hadamard(usize),
    PauliX(usize),
    CNot {
        control: usize,
        target: usize,
    },
    Toffoli {
        c1: usize,
        c2: usize,
        target: usize,
    },
    /// |y⟩ ↦ (−1)^{f(y)} |y⟩ with f a 1-bit function.
    PhaseOracle {
        oracle: Oracle,
        qubits: Vec<usize>,
    },
    /// |x⟩|z⟩ ↦ |x⟩|z ⊕ f(x)⟩.
    XorOracle {
        oracle: Oracle,
        inputs: Vec<usize>,
        outputs: Vec<usize>,
    },
    ControlledPhaseOracle {
        control: usize,
        oracle: Oracle,
        qubits: Vec<usize>,
    },
}

/// Column `i` of a gate: where the basis state |i⟩ is sent.
///
/// Every gate in the set is either a signed permutation or a Hadamard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisImage {
    /// `sign · |index⟩`, sign = ±1.
    Signed { index: usize, sign: i8 },
    /// `(|zero⟩ + sign_one · |one⟩) / √2`.
    Split { zero: usize, one: usize, sign_one: i8 },
}

#[inline]
pub(crate) fn gather_bits(index: usize, qubits: &[usize]) -> usize {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &q)| acc | (((index >> q) & 1) << k))
}

#[inline]
pub(crate) fn scatter_bits(value: usize, qubits: &[usize]) -> usize {
    qubits
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &q)| acc | (((value >> k) & 1) << q))
}

impl GateOp {
    pub fn h(q: usize) -> Self {
        GateOp::Hadamard(q)
    }

    pub fn x(q: usize) -> Self {
        GateOp::PauliX(q)
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        GateOp::CNot { control, target }
    }

    pub fn toffoli(c1: usize, c2: usize, target: usize) -> Self {
        GateOp::Toffoli { c1, c2, target }
    }

    /// All qubits the gate touches, in declaration order.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            GateOp::Hadamard(q) | GateOp::PauliX(q) => vec![*q],
            GateOp::CNot { control, target } => vec![*control, *target],
            GateOp::Toffoli { c1, c2, target } => vec![*c1, *c2, *target],
            GateOp::PhaseOracle { qubits, .. } => qubits.clone(),
            GateOp::XorOracle { inputs, outputs, .. } => inputs.iter().chain(outputs).copied().collect(),
            GateOp::ControlledPhaseOracle { control, qubits, .. } => {
                std::iter::once(*control).chain(qubits.iter().copied()).collect()
            }
        }
    }

    /// Qubits whose computational-basis value the gate can change.
    pub fn modified_qubits(&self) -> Vec<usize> {
        match self {
            GateOp::Hadamard(q) | GateOp::PauliX(q) => vec![*q],
            GateOp::CNot { target, .. } | GateOp::Toffoli { target, .. } => vec![*target],
            GateOp::XorOracle { outputs, .. } => outputs.clone(),
            GateOp::PhaseOracle { .. } | GateOp::ControlledPhaseOracle { .. } => Vec::new(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, GateOp::PhaseOracle { .. } | GateOp::ControlledPhaseOracle { .. })
    }

    pub fn oracle(&self) -> Option<&Oracle> {
        match self {
            GateOp::PhaseOracle { oracle, .. }
            | GateOp::XorOracle { oracle, .. }
            | GateOp::ControlledPhaseOracle { oracle, .. } => Some(oracle),
            _ => None,
        }
    }

    /// Checks index range, distinctness and oracle arity against a register size.
    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        let qubits = self.qubits();
        for (k, &q) in qubits.iter().enumerate() {
            if q >= num_qubits {
                return Err(Error::QubitOutOfRange { index: q, num_qubits });
            }
            if qubits[..k].contains(&q) {
                return Err(Error::DuplicateQubit(q));
            }
        }
        let arity = |oracle: &Oracle, role: &'static str, expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(Error::OracleArity {
                    name: oracle.name.clone(),
                    role,
                    expected,
                    got,
                })
            }
        };
        match self {
            GateOp::PhaseOracle { oracle, qubits } | GateOp::ControlledPhaseOracle { oracle, qubits, .. } => {
                arity(oracle, "input", oracle.function.input_bits(), qubits.len())?;
                arity(oracle, "output", 1, oracle.function.output_bits())
            }
            GateOp::XorOracle {
                oracle,
                inputs,
                outputs,
            } => {
                arity(oracle, "input", oracle.function.input_bits(), inputs.len())?;
                arity(oracle, "output", oracle.function.output_bits(), outputs.len())
            }
            _ => Ok(()),
        }
    }

    /// Where the gate sends the basis state `|index⟩`.
    pub fn basis_image(&self, index: usize) -> BasisImage {
        let bit = |q: usize| (index >> q) & 1;
        let same = BasisImage::Signed { index, sign: 1 };
        match self {
            GateOp::Hadamard(q) => {
                let zero = index & !(1 << q);
                BasisImage::Split {
                    zero,
                    one: zero | (1 << q),
                    sign_one: if bit(*q) == 1 { -1 } else { 1 },
                }
            }
            GateOp::PauliX(q) => BasisImage::Signed {
                index: index ^ (1 << q),
                sign: 1,
            },
            GateOp::CNot { control, target } => {
                if bit(*control) == 1 {
                    BasisImage::Signed {
                        index: index ^ (1 << target),
                        sign: 1,
                    }
                } else {
                    same
                }
            }
            GateOp::Toffoli { c1, c2, target } => {
                if bit(*c1) == 1 && bit(*c2) == 1 {
                    BasisImage::Signed {
                        index: index ^ (1 << target),
                        sign: 1,
                    }
                } else {
                    same
                }
            }
            GateOp::PhaseOracle { oracle, qubits } => {
                let flip = oracle.function.eval(gather_bits(index, qubits)) & 1 == 1;
                BasisImage::Signed {
                    index,
                    sign: if flip { -1 } else { 1 },
                }
            }
            GateOp::ControlledPhaseOracle {
                control,
                oracle,
                qubits,
            } => {
                let flip = bit(*control) == 1 && oracle.function.eval(gather_bits(index, qubits)) & 1 == 1;
                BasisImage::Signed {
                    index,
                    sign: if flip { -1 } else { 1 },
                }
            }
            GateOp::XorOracle {
                oracle,
                inputs,
                outputs,
            } => {
                let value = oracle.function.eval(gather_bits(index, inputs));
                BasisImage::Signed {
                    index: index ^ scatter_bits(value, outputs),
                    sign: 1,
                }
            }
        }
    }

    /// In-place application to a dense amplitude array. Indices must already
    /// be validated against the array's qubit count.
    pub(crate) fn apply_to(&self, amps: &mut [Complex64]) {
        match self {
            GateOp::Hadamard(q) => {
                let stride = 1usize << q;
                let s = std::f64::consts::FRAC_1_SQRT_2;
                for chunk in amps.chunks_mut(2 * stride) {
                    let (lo, hi) = chunk.split_at_mut(stride);
                    for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                        let (x, y) = (*a, *b);
                        *a = (x + y) * s;
                        *b = (x - y) * s;
                    }
                }
            }
            GateOp::PauliX(q) => {
                let stride = 1usize << q;
                for chunk in amps.chunks_mut(2 * stride) {
                    let (lo, hi) = chunk.split_at_mut(stride);
                    lo.swap_with_slice(hi);
                }
            }
            GateOp::CNot { control, target } => {
                let (c, t) = (1usize << control, 1usize << target);
                for i in 0..amps.len() {
                    if i & c != 0 && i & t == 0 {
                        amps.swap(i, i | t);
                    }
                }
            }
            GateOp::Toffoli { c1, c2, target } => {
                let c = (1usize << c1) | (1usize << c2);
                let t = 1usize << target;
                for i in 0..amps.len() {
                    if i & c == c && i & t == 0 {
                        amps.swap(i, i | t);
                    }
                }
            }
            GateOp::PhaseOracle { .. } | GateOp::ControlledPhaseOracle { .. } => {
                for (i, a) in amps.iter_mut().enumerate() {
                    if let BasisImage::Signed { sign: -1, .. } = self.basis_image(i) {
                        *a = -*a;
                    }
                }
            }
            GateOp::XorOracle {
                oracle,
                inputs,
                outputs,
            } => {
                let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
                for (i, a) in amps.iter().enumerate() {
                    let value = oracle.function.eval(gather_bits(i, inputs));
                    out[i ^ scatter_bits(value, outputs)] = *a;
                }
                amps.copy_from_slice(&out);
            }
        }
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |qs: &[usize]| qs.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(" ");
        match self {
            GateOp::Hadamard(q) => write!(f, "h {q}"),
            GateOp::PauliX(q) => write!(f, "x {q}"),
            GateOp::CNot { control, target } => write!(f, "cnot {control} {target}"),
            GateOp::Toffoli { c1, c2, target } => write!(f, "toff {c1} {c2} {target}"),
            GateOp::PhaseOracle { oracle, qubits } => {
                write!(f, "phase-oracle {} {}", oracle.name, join(qubits))
            }
            GateOp::XorOracle {
                oracle,
                inputs,
                outputs,
            } => write!(f, "xor-oracle {} {} -> {}", oracle.name, join(inputs), join(outputs)),
            GateOp::ControlledPhaseOracle {
                control,
                oracle,
                qubits,
            } => write!(f, "cphase-oracle {control} {} {}", oracle.name, join(qubits)),
        }
    }
}
