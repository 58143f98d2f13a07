//! Simulation and verification toolkit for quantum computation with
//! non-collapsing measurements.
//!
//! The [`qp_oracle`] module samples histories `(v_0, …, v_T)` of
//! non-collapsing computational-basis reads of a circuit's intermediate
//! states. Around it sit a dense state-vector core, hidden-variable
//! constructions, an exact path-sum simulator, the search and
//! statistical-difference algorithms, and numeric checkers for the
//! inequalities behind the query lower bound.

pub mod algorithms;
pub mod analysis;
pub mod circuit;
pub mod corpus;
pub mod error;
pub mod exact_sim;
pub mod hidden_variables;
pub mod qp_oracle;
pub mod rng;
pub mod statevector;
pub mod suites;

pub use circuit::{Circuit, ClassicalFunction, Step, ValidationMode};
pub use error::{Error, Result};
pub use qp_oracle::{History, HistoryDistribution};
pub use statevector::{GateOp, Oracle, StateVector};

/// Crate version, embedded in CLI output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
