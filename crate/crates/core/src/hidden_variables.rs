//! Block structures and the two hidden-variable theories built on them:
//! the product theory over an arbitrary block structure and the Dieks
//! theory over a circuit's own block structure.
//!
//! Both theories share one formula. For a state with amplitudes α, a
//! unitary U with β = Uα, and a partition of the basis into blocks,
//!
//! ```text
//! S_ij = |β_j|² / Σ_{k∼j} |β_k|²   if i ∼ j,   0 otherwise
//! P_ij = |α_i|² S_ij
//! ```
//!
//! A block whose β-mass is below [`ZERO_BLOCK_MASS`] gets uniform rows.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qp_oracle::HistoryDistribution;
use crate::statevector::{BasisImage, GateOp, StateVector};

/// Entries of a gate or unitary below this magnitude count as zero.
pub const BLOCK_TOLERANCE: f64 = 1e-12;
/// Below this β-mass a block's rows fall back to uniform.
pub const ZERO_BLOCK_MASS: f64 = 1e-14;
/// Largest dimension for which dense matrices are built.
pub const MAX_DENSE_DIMENSION: usize = 1 << 12;

/// A partition of the basis indices `[0, N)`.
///
/// Labels are canonical: blocks are numbered in order of their smallest
/// element, so two equal partitions compare equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockStructure {
    labels: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl BlockStructure {
    /// Builds a partition from arbitrary labels.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut remap = std::collections::HashMap::new();
        let mut labels = Vec::with_capacity(raw.len());
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (i, r) in raw.iter().enumerate() {
            let next = remap.len();
            let l = *remap.entry(*r).or_insert(next);
            if l == members.len() {
                members.push(Vec::new());
            }
            members[l].push(i);
            labels.push(l);
        }
        BlockStructure { labels, members }
    }

    /// One block holding everything.
    pub fn trivial(dimension: usize) -> Self {
        Self::from_labels(&vec![0; dimension])
    }

    pub fn singletons(dimension: usize) -> Self {
        Self::from_labels(&(0..dimension).collect::<Vec<_>>())
    }

    /// Groups basis states by the values of `qubits`.
    pub fn from_measured_qubits(num_qubits: usize, qubits: &[usize]) -> Self {
        let raw: Vec<usize> = (0..1usize << num_qubits)
            .map(|i| crate::statevector::gather_bits(i, qubits))
            .collect();
        Self::from_labels(&raw)
    }

    pub fn dimension(&self) -> usize {
        self.labels.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.members.len()
    }

    #[inline]
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Blocks as sorted index lists, ordered by smallest element.
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn block_of(&self, i: usize) -> &[usize] {
        &self.members[self.labels[i]]
    }

    #[inline]
    pub fn same_block(&self, i: usize, j: usize) -> bool {
        self.labels[i] == self.labels[j]
    }

    /// True if every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &BlockStructure) -> bool {
        self.dimension() == coarser.dimension()
            && self
                .members
                .iter()
                .all(|b| b.iter().all(|&i| coarser.same_block(i, b[0])))
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }

    fn into_partition(mut self) -> BlockStructure {
        let roots: Vec<usize> = (0..self.parent.len()).map(|i| self.find(i)).collect();
        BlockStructure::from_labels(&roots)
    }
}

fn dense_dimension(num_qubits: usize) -> Result<usize> {
    let dim = 1u128 << num_qubits.min(127);
    if num_qubits > 12 {
        return Err(Error::BudgetExceeded {
            needed: dim,
            budget: MAX_DENSE_DIMENSION as u128,
        });
    }
    Ok(1 << num_qubits)
}

/// The coarsest-block partition connecting `i` and `j` whenever some single
/// gate has a nonzero `(i, j)` entry.
pub fn circuit_block_structure(gates: &[GateOp], num_qubits: usize) -> Result<BlockStructure> {
    let dim = dense_dimension(num_qubits)?;
    let mut uf = UnionFind::new(dim);
    for gate in gates {
        gate.validate(num_qubits)?;
        for i in 0..dim {
            match gate.basis_image(i) {
                BasisImage::Signed { index, .. } => uf.union(i, index),
                BasisImage::Split { zero, one, .. } => {
                    uf.union(i, zero);
                    uf.union(i, one);
                }
            }
        }
    }
    Ok(uf.into_partition())
}

/// Column `j` of the composed unitary `U = g_k ⋯ g_1`, i.e. `U|j⟩`.
pub fn unitary_column(gates: &[GateOp], num_qubits: usize, j: usize) -> Result<StateVector> {
    let mut col = StateVector::basis(num_qubits, j)?;
    col.apply_all(gates)?;
    Ok(col)
}

/// The partition induced by the nonzero entries of the composed unitary.
pub fn unitary_block_structure(gates: &[GateOp], num_qubits: usize) -> Result<BlockStructure> {
    let dim = dense_dimension(num_qubits)?;
    let mut uf = UnionFind::new(dim);
    for j in 0..dim {
        let col = unitary_column(gates, num_qubits, j)?;
        for (i, a) in col.amplitudes().iter().enumerate() {
            if a.norm() > BLOCK_TOLERANCE {
                uf.union(i, j);
            }
        }
    }
    Ok(uf.into_partition())
}

/// Errors with the first entry of the composed unitary that crosses blocks.
pub fn check_respects(gates: &[GateOp], num_qubits: usize, blocks: &BlockStructure) -> Result<()> {
    let dim = dense_dimension(num_qubits)?;
    if blocks.dimension() != dim {
        return Err(Error::DimensionMismatch(blocks.dimension(), dim));
    }
    for j in 0..dim {
        let col = unitary_column(gates, num_qubits, j)?;
        for (i, a) in col.amplitudes().iter().enumerate() {
            if !blocks.same_block(i, j) && a.norm() > BLOCK_TOLERANCE {
                return Err(Error::BlockViolation {
                    row: i,
                    col: j,
                    magnitude: a.norm(),
                });
            }
        }
    }
    Ok(())
}

/// Checks the preconditions of the block-structured oracle: `blocks[t+1]`
/// refines `blocks[t]` and unitary `t` respects `blocks[t]`.
pub fn check_block_chain(num_qubits: usize, unitaries: &[Vec<GateOp>], blocks: &[BlockStructure]) -> Result<()> {
    if unitaries.len() != blocks.len() {
        return Err(Error::InvalidArgument(format!(
            "{} unitaries but {} block structures",
            unitaries.len(),
            blocks.len()
        )));
    }
    for t in 1..blocks.len() {
        if !blocks[t].refines(&blocks[t - 1]) {
            return Err(Error::RefinementViolated(t + 1, t));
        }
    }
    for (u, b) in unitaries.iter().zip(blocks) {
        check_respects(u, num_qubits, b)?;
    }
    Ok(())
}

/// β-weights of one block structure: the data behind every row of S.
#[derive(Debug, Clone)]
pub struct BlockWeights {
    blocks: BlockStructure,
    probs: Vec<f64>,
    mass: Vec<f64>,
}

impl BlockWeights {
    /// `probs[j] = |β_j|²`.
    pub fn new(blocks: BlockStructure, probs: Vec<f64>) -> Result<Self> {
        if blocks.dimension() != probs.len() {
            return Err(Error::DimensionMismatch(blocks.dimension(), probs.len()));
        }
        let mut mass = vec![0.0; blocks.num_blocks()];
        for (j, p) in probs.iter().enumerate() {
            mass[blocks.label(j)] += p;
        }
        Ok(BlockWeights { blocks, probs, mass })
    }

    pub fn blocks(&self) -> &BlockStructure {
        &self.blocks
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if !self.blocks.same_block(i, j) {
            return 0.0;
        }
        let l = self.blocks.label(j);
        if self.mass[l] < ZERO_BLOCK_MASS {
            1.0 / self.blocks.members[l].len() as f64
        } else {
            self.probs[j] / self.mass[l]
        }
    }

    /// Nonzero entries of row `i`.
    pub fn row(&self, i: usize) -> Vec<(usize, f64)> {
        self.blocks
            .block_of(i)
            .iter()
            .map(|&j| (j, self.entry(i, j)))
            .filter(|&(_, p)| p > 0.0)
            .collect()
    }

    /// Draws a column from row `i`.
    pub fn sample_row<R: rand::Rng + ?Sized>(&self, i: usize, rng: &mut R) -> usize {
        let block = self.blocks.block_of(i);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = block[0];
        for &j in block {
            let p = self.entry(i, j);
            if p > 0.0 {
                acc += p;
                last = j;
                if acc > u {
                    return j;
                }
            }
        }
        last
    }
}

/// Dense row-stochastic matrix, block-diagonal in `blocks`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    dimension: usize,
    blocks: BlockStructure,
    entries: Vec<f64>,
}

impl StochasticMatrix {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn blocks(&self) -> &BlockStructure {
        &self.blocks
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dimension + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.dimension)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Dense joint probability matrix `P(ψ, U)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointProbabilityMatrix {
    dimension: usize,
    blocks: BlockStructure,
    entries: Vec<f64>,
}

/// JSON dump layout: `{dimension, blocks, entries: [[i, j, p], …]}`.
#[derive(Debug, Serialize)]
pub struct MatrixDump<'a> {
    pub dimension: usize,
    pub blocks: &'a [Vec<usize>],
    pub entries: Vec<(usize, usize, f64)>,
}

impl JointProbabilityMatrix {
    /// Wraps raw row-major entries. No validity is implied; see
    /// [`validate_hv_matrix`].
    pub fn from_entries(blocks: BlockStructure, entries: Vec<f64>) -> Result<Self> {
        let dimension = blocks.dimension();
        if entries.len() != dimension * dimension {
            return Err(Error::DimensionMismatch(entries.len(), dimension * dimension));
        }
        Ok(JointProbabilityMatrix {
            dimension,
            blocks,
            entries,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn blocks(&self) -> &BlockStructure {
        &self.blocks
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dimension + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.chunks(self.dimension).map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.dimension];
        for row in self.entries.chunks(self.dimension) {
            for (s, p) in sums.iter_mut().zip(row) {
                *s += p;
            }
        }
        sums
    }

    /// Entrywise ℓ1 distance Σ_ij |P_ij − Q_ij| (not halved).
    pub fn l1_distance(&self, other: &JointProbabilityMatrix) -> Result<f64> {
        if self.dimension != other.dimension {
            return Err(Error::DimensionMismatch(self.dimension, other.dimension));
        }
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }

    pub fn dump(&self) -> MatrixDump<'_> {
        let entries = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(k, &p)| (k / self.dimension, k % self.dimension, p))
            .collect();
        MatrixDump {
            dimension: self.dimension,
            blocks: self.blocks.blocks(),
            entries,
        }
    }
}

fn born_after(state: &StateVector, gates: &[GateOp]) -> Result<StateVector> {
    let mut beta = state.clone();
    beta.apply_all(gates)?;
    Ok(beta)
}

fn stochastic_from(weights: &BlockWeights) -> StochasticMatrix {
    let dim = weights.blocks.dimension();
    let mut entries = vec![0.0; dim * dim];
    for i in 0..dim {
        for &j in weights.blocks.block_of(i) {
            entries[i * dim + j] = weights.entry(i, j);
        }
    }
    StochasticMatrix {
        dimension: dim,
        blocks: weights.blocks.clone(),
        entries,
    }
}

fn joint_from(alpha: &StateVector, s: StochasticMatrix) -> JointProbabilityMatrix {
    let dim = s.dimension;
    let mut entries = s.entries;
    for (i, a) in alpha.amplitudes().iter().enumerate() {
        let w = a.norm_sqr();
        entries[i * dim..(i + 1) * dim].iter_mut().for_each(|p| *p *= w);
    }
    JointProbabilityMatrix {
        dimension: dim,
        blocks: s.blocks,
        entries,
    }
}

/// `S_PT_B(ψ, U)`. The unitary must respect `blocks`.
pub fn product_theory_stochastic(
    state: &StateVector,
    gates: &[GateOp],
    blocks: &BlockStructure,
) -> Result<StochasticMatrix> {
    dense_dimension(state.num_qubits())?;
    check_respects(gates, state.num_qubits(), blocks)?;
    let beta = born_after(state, gates)?;
    Ok(stochastic_from(&BlockWeights::new(
        blocks.clone(),
        beta.probabilities(),
    )?))
}

/// `P_PT_B(ψ, U)`, with `P_ij = |α_i|² S_ij`.
pub fn product_theory_joint(
    state: &StateVector,
    gates: &[GateOp],
    blocks: &BlockStructure,
) -> Result<JointProbabilityMatrix> {
    let s = product_theory_stochastic(state, gates, blocks)?;
    Ok(joint_from(state, s))
}

/// Dieks theory over the circuit block structure of `gates`.
pub fn dieks_joint(state: &StateVector, gates: &[GateOp]) -> Result<JointProbabilityMatrix> {
    let blocks = circuit_block_structure(gates, state.num_qubits())?;
    let beta = born_after(state, gates)?;
    let s = stochastic_from(&BlockWeights::new(blocks, beta.probabilities())?);
    Ok(joint_from(state, s))
}

/// Marginal-identity report for a joint probability matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HvReport {
    /// max_i |Σ_j P_ij − |α_i|²|
    pub max_row_error: f64,
    /// max_j |Σ_i P_ij − |β_j|²|
    pub max_column_error: f64,
    /// max |P_ij| over pairs in different blocks.
    pub cross_block_leakage: f64,
}

impl HvReport {
    pub fn max_error(&self) -> f64 {
        self.max_row_error
            .max(self.max_column_error)
            .max(self.cross_block_leakage)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_error() <= tolerance
    }
}

pub fn validate_hv_matrix(p: &JointProbabilityMatrix, alpha: &[Complex64], beta: &[Complex64]) -> Result<HvReport> {
    let dim = p.dimension();
    for len in [alpha.len(), beta.len()] {
        if len != dim {
            return Err(Error::DimensionMismatch(len, dim));
        }
    }
    let max_dev = |sums: Vec<f64>, amps: &[Complex64]| {
        sums.iter()
            .zip(amps)
            .map(|(s, a)| (s - a.norm_sqr()).abs())
            .fold(0.0, f64::max)
    };
    let mut leakage = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            if !p.blocks().same_block(i, j) {
                leakage = leakage.max(p.get(i, j).abs());
            }
        }
    }
    Ok(HvReport {
        max_row_error: max_dev(p.row_sums(), alpha),
        max_column_error: max_dev(p.column_sums(), beta),
        cross_block_leakage: leakage,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuityCheck {
    /// Σ_ij |P(ψ, C) − P(ψˣ, Cˣ)|_ij
    pub lhs: f64,
    /// 3ε
    pub bound: f64,
    pub holds: bool,
}

/// Dieks continuity: if `‖ψ − ψˣ‖_tr ≤ ε` and `‖Uψ − Uˣψˣ‖_tr ≤ ε` then the
/// two Dieks matrices are within `3ε` in entrywise ℓ1.
///
/// `‖·‖_tr` is the trace norm of the density-matrix difference, which for
/// pure states is twice [`StateVector::trace_distance`]. The hypotheses are
/// checked, not assumed.
pub fn dieks_continuity_check(
    psi: &StateVector,
    psi_x: &StateVector,
    gates: &[GateOp],
    gates_x: &[GateOp],
    epsilon: f64,
) -> Result<ContinuityCheck> {
    let n = psi.num_qubits();
    if psi_x.num_qubits() != n {
        return Err(Error::DimensionMismatch(psi.dimension(), psi_x.dimension()));
    }
    if circuit_block_structure(gates, n)? != circuit_block_structure(gates_x, n)? {
        return Err(Error::BlockStructureMismatch);
    }
    let before = 2.0 * psi.trace_distance(psi_x)?;
    let after = 2.0 * born_after(psi, gates)?.trace_distance(&born_after(psi_x, gates_x)?)?;
    let slack = 1e-12;
    if before > epsilon + slack || after > epsilon + slack {
        return Err(Error::Hypothesis(format!(
            "trace norms {before:.3e} (input) and {after:.3e} (output) exceed ε = {epsilon:.3e}"
        )));
    }
    let lhs = dieks_joint(psi, gates)?.l1_distance(&dieks_joint(psi_x, gates_x)?)?;
    let bound = 3.0 * epsilon;
    Ok(ContinuityCheck {
        lhs,
        bound,
        holds: lhs <= bound + 1e-9,
    })
}

/// Exact distribution of the block-structured oracle started from basis
/// state `initial`: `Ω(v) = Π_k S_{B_k}(U_{k-1}⋯U_1|initial⟩, U_k)_{v_{k-1} v_k}`.
pub fn history_distribution_pt(
    num_qubits: usize,
    unitaries: &[Vec<GateOp>],
    blocks: &[BlockStructure],
    initial: usize,
    budget: u128,
) -> Result<HistoryDistribution> {
    let bits = num_qubits * unitaries.len();
    let needed = if bits >= 127 { u128::MAX } else { 1u128 << bits };
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    check_block_chain(num_qubits, unitaries, blocks)?;
    let mut phi = StateVector::basis(num_qubits, initial)?;
    let mut partial: Vec<(Vec<usize>, f64)> = vec![(vec![initial], 1.0)];
    for (u, b) in unitaries.iter().zip(blocks) {
        phi.apply_all(u)?;
        let weights = BlockWeights::new(b.clone(), phi.probabilities())?;
        let mut next = Vec::new();
        for (h, p) in &partial {
            for (j, s) in weights.row(*h.last().expect("non-empty")) {
                let mut e = h.clone();
                e.push(j);
                next.push((e, p * s));
            }
        }
        partial = next;
    }
    let mut out = BTreeMap::new();
    for (h, p) in partial {
        *out.entry(h).or_insert(0.0) += p;
    }
    HistoryDistribution::new(out)
}
