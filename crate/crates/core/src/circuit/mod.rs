//! Circuit IR: an ordered list of steps, each a gate list followed by an
//! optional collapsing measurement.

mod function;
mod text;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub use function::{load_function_table, read_function_table, ClassicalFunction, MAX_TABLE_INPUT_BITS};
pub use text::{
    parse_circuit, parse_circuit_file, parse_circuit_with, serialize_circuit, FsTables, MemoryTables, TableSource,
};

use crate::error::{Error, Result};
use crate::statevector::GateOp;

/// One (U_t, M_t) pair. The measurement happens after every gate of the step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Step {
    pub gates: Vec<GateOp>,
    pub measured: Vec<usize>,
}

impl Step {
    pub fn new(gates: Vec<GateOp>, measured: Vec<usize>) -> Self {
        Step { gates, measured }
    }

    pub fn gates(gates: Vec<GateOp>) -> Self {
        Step {
            gates,
            measured: Vec::new(),
        }
    }

    pub fn empty() -> Self {
        Step::default()
    }
}

/// Where an oracle's table came from, for serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct TableDecl {
    pub path: String,
    pub function: Arc<ClassicalFunction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    num_qubits: usize,
    steps: Vec<Step>,
    tables: BTreeMap<String, TableDecl>,
}

impl Circuit {
    /// Builds a circuit, registering every oracle referenced by its gates.
    /// Two different functions under one name are rejected.
    pub fn new(num_qubits: usize, steps: Vec<Step>) -> Result<Self> {
        let mut circuit = Circuit {
            num_qubits,
            steps: Vec::new(),
            tables: BTreeMap::new(),
        };
        for step in steps {
            circuit.push_step(step)?;
        }
        Ok(circuit)
    }

    pub(crate) fn with_tables(
        num_qubits: usize,
        steps: Vec<Step>,
        tables: BTreeMap<String, TableDecl>,
    ) -> Result<Self> {
        let mut circuit = Circuit {
            num_qubits,
            steps: Vec::new(),
            tables,
        };
        for step in steps {
            circuit.push_step(step)?;
        }
        Ok(circuit)
    }

    pub fn push_step(&mut self, step: Step) -> Result<()> {
        for gate in &step.gates {
            if let Some(oracle) = gate.oracle() {
                match self.tables.get(&oracle.name) {
                    Some(decl) if *decl.function != *oracle.function => {
                        return Err(Error::InvalidCircuit(format!(
                            "oracle name '{}' bound to two different tables",
                            oracle.name
                        )))
                    }
                    Some(_) => {}
                    None => {
                        self.tables.insert(
                            oracle.name.clone(),
                            TableDecl {
                                path: format!("{}.tbl", oracle.name),
                                function: oracle.function.clone(),
                            },
                        );
                    }
                }
            }
        }
        self.steps.push(step);
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// T, the number of steps.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn tables(&self) -> &BTreeMap<String, TableDecl> {
        &self.tables
    }

    pub fn has_measurements(&self) -> bool {
        self.steps.iter().any(|s| !s.measured.is_empty())
    }

    pub fn gates(&self) -> impl Iterator<Item = &GateOp> {
        self.steps.iter().flat_map(|s| s.gates.iter())
    }

    pub fn validate(&self, mode: ValidationMode) -> Vec<Violation> {
        validate(self, mode)
    }

    /// Errors out with the first basic violation.
    pub fn ensure_valid(&self) -> Result<()> {
        match self.validate(ValidationMode::Basic).into_iter().next() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidCircuit(v.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValidationMode {
    Basic,
    /// Basic checks plus: a measured qubit is never modified by a later gate.
    WriteOnce,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoSteps,
    Gate {
        step: usize,
        gate: usize,
        error: Error,
    },
    Measurement {
        step: usize,
        error: Error,
    },
    /// `gate` in `step` modifies `qubit`, which `measured_in` measured.
    ModifiedAfterMeasure {
        step: usize,
        gate: usize,
        qubit: usize,
        measured_in: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoSteps => write!(f, "circuit has no steps"),
            Violation::Gate { step, gate, error } => write!(f, "step {step} gate {gate}: {error}"),
            Violation::Measurement { step, error } => write!(f, "step {step} measurement: {error}"),
            Violation::ModifiedAfterMeasure {
                step,
                gate,
                qubit,
                measured_in,
            } => write!(
                f,
                "step {step} gate {gate} modifies qubit {qubit} measured in step {measured_in}"
            ),
        }
    }
}

/// Steps are numbered from 1 in violation reports.
pub fn validate(circuit: &Circuit, mode: ValidationMode) -> Vec<Violation> {
    let mut violations = Vec::new();
    if circuit.steps.is_empty() {
        violations.push(Violation::NoSteps);
    }
    let n = circuit.num_qubits;
    let mut measured_at: Vec<Option<usize>> = vec![None; n];
    for (s, step) in circuit.steps.iter().enumerate() {
        let t = s + 1;
        for (g, gate) in step.gates.iter().enumerate() {
            if let Err(error) = gate.validate(n) {
                violations.push(Violation::Gate {
                    step: t,
                    gate: g,
                    error,
                });
                continue;
            }
            if mode == ValidationMode::WriteOnce {
                for q in gate.modified_qubits() {
                    if let Some(m) = measured_at[q] {
                        violations.push(Violation::ModifiedAfterMeasure {
                            step: t,
                            gate: g,
                            qubit: q,
                            measured_in: m,
                        });
                    }
                }
            }
        }
        for (k, &q) in step.measured.iter().enumerate() {
            if q >= n {
                violations.push(Violation::Measurement {
                    step: t,
                    error: Error::QubitOutOfRange {
                        index: q,
                        num_qubits: n,
                    },
                });
            } else if step.measured[..k].contains(&q) {
                violations.push(Violation::Measurement {
                    step: t,
                    error: Error::DuplicateQubit(q),
                });
            } else if measured_at[q].is_none() {
                measured_at[q] = Some(t);
            }
        }
    }
    violations
}
