//! Line-oriented circuit text format.
//!
//! ```text
//! # Bell pair, measure qubit 0
//! qubits 2
//! table f n=1 m=1 file=f.tbl
//! step
//!   h 0
//!   cnot 0 1
//!   measure 0
//! step
//! ```
//!
//! Gate lines: `h q`, `x q`, `cnot c t`, `toff c1 c2 t`,
//! `phase-oracle name q...`, `xor-oracle name in... -> out...`,
//! `cphase-oracle c name q...`. A `measure q...` line, if present, ends its
//! step. Table files are resolved through a [`TableSource`].

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::function::{load_function_table, ClassicalFunction};
use super::{Circuit, Step, TableDecl};
use crate::error::{Error, Result};
use crate::statevector::{GateOp, Oracle};

/// Resolves the `file=` reference of a `table` line.
pub trait TableSource {
    fn load(&self, path: &str, input_bits: usize, output_bits: usize) -> Result<ClassicalFunction>;
}

/// Table files on disk, relative to a base directory.
#[derive(Debug, Clone)]
pub struct FsTables {
    pub base: PathBuf,
}

impl FsTables {
    pub fn new(base: impl Into<PathBuf>) -> Self {
        FsTables { base: base.into() }
    }
}

impl TableSource for FsTables {
    fn load(&self, path: &str, input_bits: usize, output_bits: usize) -> Result<ClassicalFunction> {
        load_function_table(self.base.join(path), Some(input_bits), Some(output_bits))
    }
}

/// In-memory tables keyed by their `file=` path.
#[derive(Debug, Clone, Default)]
pub struct MemoryTables(pub HashMap<String, ClassicalFunction>);

impl TableSource for MemoryTables {
    fn load(&self, path: &str, input_bits: usize, output_bits: usize) -> Result<ClassicalFunction> {
        let f = self
            .0
            .get(path)
            .ok_or_else(|| Error::Table(format!("no table registered for '{path}'")))?;
        if f.input_bits() != input_bits || f.output_bits() != output_bits {
            return Err(Error::Table(format!(
                "table '{path}' has shape n={} m={}, declared n={input_bits} m={output_bits}",
                f.input_bits(),
                f.output_bits()
            )));
        }
        Ok(f.clone())
    }
}

/// Parses with table files resolved against the current directory.
pub fn parse_circuit(text: &str) -> Result<Circuit> {
    parse_circuit_with(text, &FsTables::new("."))
}

/// Parses a circuit file; table paths are relative to the file's directory.
pub fn parse_circuit_file(path: impl AsRef<Path>) -> Result<Circuit> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let base = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    parse_circuit_with(&text, &FsTables::new(base))
}

struct Parser<'a> {
    line: usize,
    num_qubits: usize,
    tables: BTreeMap<String, TableDecl>,
    source: &'a dyn TableSource,
}

impl Parser<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn qubit(&self, tok: &str) -> Result<usize> {
        let q: usize = tok
            .parse()
            .map_err(|_| self.err(format!("expected a qubit index, found '{tok}'")))?;
        if q >= self.num_qubits {
            return Err(self.err(format!("qubit index {q} out of range for {} qubits", self.num_qubits)));
        }
        Ok(q)
    }

    fn qubits(&self, toks: &[&str]) -> Result<Vec<usize>> {
        toks.iter().map(|t| self.qubit(t)).collect()
    }

    fn oracle(&self, name: &str) -> Result<Oracle> {
        let decl = self
            .tables
            .get(name)
            .ok_or_else(|| self.err(format!("unknown oracle table '{name}'")))?;
        Ok(Oracle::shared(name, decl.function.clone()))
    }

    fn arity(&self, toks: &[&str], n: usize) -> Result<()> {
        if toks.len() != n {
            return Err(self.err(format!(
                "'{}' takes {} operand(s), found {}",
                toks[0],
                n - 1,
                toks.len() - 1
            )));
        }
        Ok(())
    }

    fn gate(&self, toks: &[&str]) -> Result<GateOp> {
        let gate = match toks[0] {
            "h" => {
                self.arity(toks, 2)?;
                GateOp::Hadamard(self.qubit(toks[1])?)
            }
            "x" => {
                self.arity(toks, 2)?;
                GateOp::PauliX(self.qubit(toks[1])?)
            }
            "cnot" => {
                self.arity(toks, 3)?;
                GateOp::CNot {
                    control: self.qubit(toks[1])?,
                    target: self.qubit(toks[2])?,
                }
            }
            "toff" => {
                self.arity(toks, 4)?;
                GateOp::Toffoli {
                    c1: self.qubit(toks[1])?,
                    c2: self.qubit(toks[2])?,
                    target: self.qubit(toks[3])?,
                }
            }
            "phase-oracle" => {
                if toks.len() < 3 {
                    return Err(self.err("phase-oracle needs a name and qubits"));
                }
                GateOp::PhaseOracle {
                    oracle: self.oracle(toks[1])?,
                    qubits: self.qubits(&toks[2..])?,
                }
            }
            "cphase-oracle" => {
                if toks.len() < 4 {
                    return Err(self.err("cphase-oracle needs a control, a name and qubits"));
                }
                GateOp::ControlledPhaseOracle {
                    control: self.qubit(toks[1])?,
                    oracle: self.oracle(toks[2])?,
                    qubits: self.qubits(&toks[3..])?,
                }
            }
            "xor-oracle" => {
                let arrow = toks
                    .iter()
                    .position(|t| *t == "->")
                    .ok_or_else(|| self.err("xor-oracle needs '->' between inputs and outputs"))?;
                if toks.len() < 2 || arrow < 2 || arrow + 1 == toks.len() {
                    return Err(self.err("xor-oracle needs a name, inputs and outputs"));
                }
                GateOp::XorOracle {
                    oracle: self.oracle(toks[1])?,
                    inputs: self.qubits(&toks[2..arrow])?,
                    outputs: self.qubits(&toks[arrow + 1..])?,
                }
            }
            other => return Err(self.err(format!("unknown keyword '{other}'"))),
        };
        gate.validate(self.num_qubits).map_err(|e| self.err(e.to_string()))?;
        Ok(gate)
    }

    fn table(&mut self, toks: &[&str]) -> Result<()> {
        if toks.len() != 5 {
            return Err(self.err("expected 'table <name> n=<n> m=<m> file=<path>'"));
        }
        let name = toks[1].to_string();
        let field = |tok: &str, key: &str| -> Result<String> {
            tok.strip_prefix(key)
                .map(str::to_string)
                .ok_or_else(|| self.err(format!("expected '{key}...', found '{tok}'")))
        };
        let n: usize = field(toks[2], "n=")?
            .parse()
            .map_err(|_| self.err("n= must be an integer"))?;
        let m: usize = field(toks[3], "m=")?
            .parse()
            .map_err(|_| self.err("m= must be an integer"))?;
        let path = field(toks[4], "file=")?;
        if self.tables.contains_key(&name) {
            return Err(self.err(format!("table '{name}' declared twice")));
        }
        let function = self.source.load(&path, n, m).map_err(|e| self.err(e.to_string()))?;
        self.tables.insert(
            name,
            TableDecl {
                path,
                function: Arc::new(function),
            },
        );
        Ok(())
    }
}

pub fn parse_circuit_with(text: &str, source: &dyn TableSource) -> Result<Circuit> {
    let mut parser = Parser {
        line: 0,
        num_qubits: 0,
        tables: BTreeMap::new(),
        source,
    };
    let mut have_header = false;
    let mut steps: Vec<Step> = Vec::new();
    let mut step_closed = false;

    for (i, raw) in text.lines().enumerate() {
        parser.line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if !have_header {
            if toks[0] != "qubits" || toks.len() != 2 {
                return Err(parser.err("expected 'qubits <count>' header"));
            }
            let n: usize = toks[1]
                .parse()
                .map_err(|_| parser.err("qubit count must be an integer"))?;
            if n == 0 || n > crate::statevector::MAX_QUBITS {
                return Err(parser.err(format!("qubit count {n} out of range")));
            }
            parser.num_qubits = n;
            have_header = true;
            continue;
        }
        match toks[0] {
            "qubits" => return Err(parser.err("duplicate 'qubits' header")),
            "table" => parser.table(&toks)?,
            "step" => {
                if toks.len() != 1 {
                    return Err(parser.err("'step' takes no operands"));
                }
                steps.push(Step::empty());
                step_closed = false;
            }
            "measure" => {
                let Some(step) = steps.last_mut() else {
                    return Err(parser.err("'measure' outside a step"));
                };
                if step_closed {
                    return Err(parser.err("measure line not last in step"));
                }
                let qubits = parser.qubits(&toks[1..])?;
                for (k, q) in qubits.iter().enumerate() {
                    if qubits[..k].contains(q) {
                        return Err(parser.err(format!("qubit {q} measured twice")));
                    }
                }
                step.measured = qubits;
                step_closed = true;
            }
            _ => {
                let gate = parser.gate(&toks)?;
                let Some(step) = steps.last_mut() else {
                    return Err(parser.err("gate outside a step"));
                };
                if step_closed {
                    return Err(parser.err("measure line not last in step"));
                }
                step.gates.push(gate);
            }
        }
    }
    if !have_header {
        return Err(Error::Parse {
            line: parser.line.max(1),
            message: "missing 'qubits' header".into(),
        });
    }
    Circuit::with_tables(parser.num_qubits, steps, parser.tables)
}

/// Canonical text form.
pub fn serialize_circuit(circuit: &Circuit) -> String {
    let mut out = format!("qubits {}\n", circuit.num_qubits());
    for (name, decl) in circuit.tables() {
        out.push_str(&format!(
            "table {name} n={} m={} file={}\n",
            decl.function.input_bits(),
            decl.function.output_bits(),
            decl.path
        ));
    }
    for step in circuit.steps() {
        out.push_str("step\n");
        for gate in &step.gates {
            out.push_str(&format!("  {gate}\n"));
        }
        if !step.measured.is_empty() {
            let qs: Vec<String> = step.measured.iter().map(|q| q.to_string()).collect();
            out.push_str(&format!("  measure {}\n", qs.join(" ")));
        }
    }
    out
}
