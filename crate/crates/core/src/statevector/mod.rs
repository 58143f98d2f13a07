//! Dense state-vector simulation.
//!
//! Basis indices put qubit 0 in the least-significant bit: on two qubits the
//! state |q1 q0⟩ = |1 0⟩ is index 2.

mod gate;

pub(crate) use gate::{gather_bits, scatter_bits};
pub use gate::{BasisImage, GateOp, Oracle};

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Hard cap on register width.
pub const MAX_QUBITS: usize = 24;
/// Above this width a warning is logged.
pub const SOFT_QUBIT_LIMIT: usize = 20;
/// Normalization tolerance for observable states.
pub const NORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// |0…0⟩ on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        Self::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        check_width(num_qubits)?;
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { num_qubits, amplitudes })
    }

    /// Builds a state from raw amplitudes; the array length must be a power of
    /// two and the vector normalized within [`NORM_TOLERANCE`].
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "amplitude array length {dim} is not a power of two >= 2"
            )));
        }
        let num_qubits = dim.trailing_zeros() as usize;
        check_width(num_qubits)?;
        let state = StateVector { num_qubits, amplitudes };
        state.check_normalized()?;
        Ok(state)
    }

    /// Normalizes an arbitrary non-zero vector.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero vector".into()));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Self::from_amplitudes(amplitudes)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let deviation = (self.norm_sqr() - 1.0).abs();
        if deviation > NORM_TOLERANCE {
            Err(Error::NotNormalized { deviation })
        } else {
            Ok(())
        }
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.same_dimension(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    fn same_dimension(&self, other: &StateVector) -> Result<()> {
        if self.dimension() != other.dimension() {
            Err(Error::DimensionMismatch(self.dimension(), other.dimension()))
        } else {
            Ok(())
        }
    }

    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.num_qubits)?;
        gate.apply_to(&mut self.amplitudes);
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a GateOp>) -> Result<()> {
        for gate in gates {
            self.apply(gate)?;
        }
        Ok(())
    }

    /// Applies an arbitrary 2×2 unitary `[[u00, u01], [u10, u11]]` to one
    /// qubit. Outside the fixed gate set; only the phenomena demos use it.
    pub(crate) fn apply_single_qubit_unitary(&mut self, q: usize, u: [[Complex64; 2]; 2]) -> Result<()> {
        if q >= self.num_qubits {
            return Err(Error::QubitOutOfRange {
                index: q,
                num_qubits: self.num_qubits,
            });
        }
        let stride = 1usize << q;
        for chunk in self.amplitudes.chunks_mut(2 * stride) {
            let (lo, hi) = chunk.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = u[0][0] * x + u[0][1] * y;
                *b = u[1][0] * x + u[1][1] * y;
            }
        }
        Ok(())
    }

    /// Probability that `qubits` read `outcome` (bit `k` of the outcome is
    /// the value of `qubits[k]`).
    pub fn marginal_probability(&self, qubits: &[usize], outcome: &[u8]) -> Result<f64> {
        if qubits.len() != outcome.len() {
            return Err(Error::OutcomeLength {
                qubits: qubits.len(),
                outcome: outcome.len(),
            });
        }
        self.check_qubits(qubits)?;
        let (mask, want) = mask_and_value(qubits, outcome);
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == want)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    fn check_qubits(&self, qubits: &[usize]) -> Result<()> {
        for (k, &q) in qubits.iter().enumerate() {
            if q >= self.num_qubits {
                return Err(Error::QubitOutOfRange {
                    index: q,
                    num_qubits: self.num_qubits,
                });
            }
            if qubits[..k].contains(&q) {
                return Err(Error::DuplicateQubit(q));
            }
        }
        Ok(())
    }

    /// Projective computational-basis measurement of `qubits`. Returns the
    /// outcome bits (in the order of `qubits`) and leaves `self` in the
    /// renormalized post-measurement state.
    pub fn collapse_measure<R: Rng + ?Sized>(&mut self, qubits: &[usize], rng: &mut R) -> Result<Vec<u8>> {
        self.check_qubits(qubits)?;
        self.check_normalized()?;
        if qubits.is_empty() {
            return Ok(Vec::new());
        }
        // Marginal over the measured bits, then inverse-CDF on it.
        let mut weights = vec![0.0f64; 1 << qubits.len()];
        for (i, a) in self.amplitudes.iter().enumerate() {
            weights[gather_bits(i, qubits)] += a.norm_sqr();
        }
        let pick = inverse_cdf(&weights, rng.gen::<f64>());
        let outcome: Vec<u8> = (0..qubits.len()).map(|k| ((pick >> k) & 1) as u8).collect();
        self.project(qubits, &outcome)?;
        Ok(outcome)
    }

    /// Projects onto `qubits = outcome` and renormalizes.
    pub fn project(&mut self, qubits: &[usize], outcome: &[u8]) -> Result<f64> {
        let p = self.marginal_probability(qubits, outcome)?;
        if p <= 0.0 {
            return Err(Error::ZeroProbabilityCondition);
        }
        let (mask, want) = mask_and_value(qubits, outcome);
        let scale = 1.0 / p.sqrt();
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if i & mask == want {
                *a *= scale;
            } else {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        Ok(p)
    }

    /// Non-collapsing computational-basis sample; `self` is not modified.
    pub fn born_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        Ok(BornSampler::new(self)?.sample(rng))
    }

    pub fn l2_distance(&self, other: &StateVector) -> Result<f64> {
        self.same_dimension(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Pure-state trace distance √(1 − |⟨a|b⟩|²).
    pub fn trace_distance(&self, other: &StateVector) -> Result<f64> {
        let overlap = self.inner(other)?.norm_sqr();
        Ok((1.0 - overlap).max(0.0).sqrt())
    }
}

fn check_width(num_qubits: usize) -> Result<()> {
    if num_qubits == 0 || num_qubits > MAX_QUBITS {
        return Err(Error::TooManyQubits(num_qubits));
    }
    if num_qubits > SOFT_QUBIT_LIMIT {
        log::warn!("allocating a {num_qubits}-qubit state vector");
    }
    Ok(())
}

fn mask_and_value(qubits: &[usize], outcome: &[u8]) -> (usize, usize) {
    qubits
        .iter()
        .zip(outcome)
        .fold((0, 0), |(m, v), (&q, &b)| (m | 1 << q, v | ((b as usize & 1) << q)))
}

/// Smallest index whose cumulative weight exceeds `u · total`; zero-weight
/// entries are never returned.
fn inverse_cdf(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_nonzero = i;
            if acc > target {
                return i;
            }
        }
    }
    last_nonzero
}

/// Cached cumulative distribution for repeated non-collapsing samples of one
/// state.
#[derive(Debug, Clone)]
pub struct BornSampler {
    cdf: Vec<f64>,
}

impl BornSampler {
    pub fn new(state: &StateVector) -> Result<Self> {
        state.check_normalized()?;
        let mut acc = 0.0;
        let cdf = state
            .amplitudes
            .iter()
            .map(|a| {
                acc += a.norm_sqr();
                acc
            })
            .collect();
        Ok(BornSampler { cdf })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("non-empty cdf");
        let target = rng.gen::<f64>() * total;
        let idx = self.cdf.partition_point(|&c| c <= target);
        if idx < self.cdf.len() {
            idx
        } else {
            // Rounding at the top end: fall back to the last index with mass.
            let mut i = self.cdf.len() - 1;
            while i > 0 && self.cdf[i] == self.cdf[i - 1] {
                i -= 1;
            }
            i
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn bell() -> StateVector {
        let mut s = StateVector::zero(2).unwrap();
        s.apply(&GateOp::h(0)).unwrap();
        s.apply(&GateOp::cnot(0, 1)).unwrap();
        s
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = StateVector::zero(1).unwrap();
        s.apply(&GateOp::h(0)).unwrap();
        for a in s.amplitudes() {
            assert!((a - c(FRAC_1_SQRT_2)).norm() < 1e-15);
        }
    }

    #[test]
    fn cnot_with_zero_control_is_identity() {
        let mut s = StateVector::zero(2).unwrap();
        s.apply(&GateOp::cnot(0, 1)).unwrap();
        assert_eq!(s, StateVector::zero(2).unwrap());
    }

    #[test]
    fn bell_construction() {
        // (|00⟩ + |01⟩)/√2 in q1q0 order is indices 0 and 1.
        let s = StateVector::from_amplitudes(vec![c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2), c(0.0), c(0.0)]).unwrap();
        let mut t = s.clone();
        t.apply(&GateOp::cnot(0, 1)).unwrap();
        let want = [FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2];
        for (a, w) in t.amplitudes().iter().zip(want) {
            assert!((a - c(w)).norm() < 1e-15);
        }
    }

    #[test]
    fn gate_errors() {
        let mut s = StateVector::zero(2).unwrap();
        assert_eq!(
            s.apply(&GateOp::h(2)),
            Err(Error::QubitOutOfRange {
                index: 2,
                num_qubits: 2
            })
        );
        assert_eq!(s.apply(&GateOp::cnot(1, 1)), Err(Error::DuplicateQubit(1)));
    }

    #[test]
    fn bit_convention() {
        // |q1 q0⟩ = |1 0⟩ is index 2.
        let mut s = StateVector::zero(2).unwrap();
        s.apply(&GateOp::x(1)).unwrap();
        let mut rng = seeded(3);
        for _ in 0..20 {
            assert_eq!(s.born_sample(&mut rng).unwrap(), 2);
        }
    }

    #[test]
    fn collapse_on_basis_state() {
        let mut s = StateVector::zero(1).unwrap();
        let out = s.collapse_measure(&[0], &mut seeded(1)).unwrap();
        assert_eq!(out, vec![0]);
        assert_eq!(s, StateVector::zero(1).unwrap());
    }

    #[test]
    fn collapse_empty_set_is_identity() {
        let mut s = bell();
        let before = s.clone();
        assert!(s.collapse_measure(&[], &mut seeded(1)).unwrap().is_empty());
        assert_eq!(s, before);
    }

    #[test]
    fn collapse_bell_gives_matching_pair() {
        let mut rng = seeded(11);
        let mut ones = 0;
        for _ in 0..2000 {
            let mut s = bell();
            let out = s.collapse_measure(&[0], &mut rng).unwrap();
            let b = out[0] as usize;
            ones += b;
            let idx = if b == 1 { 3 } else { 0 };
            assert!((s.amplitudes()[idx].norm_sqr() - 1.0).abs() < 1e-12);
        }
        assert!((ones as f64 / 2000.0 - 0.5).abs() < 5.0 * (0.25f64 / 2000.0).sqrt());
    }

    #[test]
    fn collapse_rejects_unnormalized() {
        let mut s = StateVector {
            num_qubits: 1,
            amplitudes: vec![c(1.0), c(0.1)],
        };
        assert!(matches!(
            s.collapse_measure(&[0], &mut seeded(0)),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn marginals() {
        let b = bell();
        assert!((b.marginal_probability(&[0], &[1]).unwrap() - 0.5).abs() < 1e-15);
        let z = StateVector::zero(3).unwrap();
        assert_eq!(z.marginal_probability(&[0, 1, 2], &[0, 0, 0]).unwrap(), 1.0);
        let mut u = StateVector::zero(2).unwrap();
        u.apply_all(&[GateOp::h(0), GateOp::h(1)]).unwrap();
        assert!((u.marginal_probability(&[1], &[0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(
            u.marginal_probability(&[1], &[0, 1]),
            Err(Error::OutcomeLength { qubits: 1, outcome: 2 })
        );
    }

    #[test]
    fn distances() {
        let zero = StateVector::zero(1).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        let mut plus = zero.clone();
        plus.apply(&GateOp::h(0)).unwrap();
        assert_eq!(zero.l2_distance(&zero).unwrap(), 0.0);
        assert!((zero.l2_distance(&one).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((zero.l2_distance(&plus).unwrap() - (2.0 - 2f64.sqrt()).sqrt()).abs() < 1e-12);
        assert!((zero.l2_distance(&plus).unwrap() - 0.7654).abs() < 1e-4);
        assert_eq!(zero.trace_distance(&zero).unwrap(), 0.0);
        assert!((zero.trace_distance(&one).unwrap() - 1.0).abs() < 1e-15);
        assert!((zero.trace_distance(&plus).unwrap() - FRAC_1_SQRT_2).abs() < 1e-12);
        let two = StateVector::zero(2).unwrap();
        assert_eq!(zero.l2_distance(&two), Err(Error::DimensionMismatch(2, 4)));
    }

    #[test]
    fn born_sample_does_not_touch_state() {
        let mut s = StateVector::zero(3).unwrap();
        s.apply_all(&[GateOp::h(0), GateOp::h(2), GateOp::toffoli(0, 2, 1)])
            .unwrap();
        let before: Vec<(u64, u64)> = s
            .amplitudes()
            .iter()
            .map(|a| (a.re.to_bits(), a.im.to_bits()))
            .collect();
        let mut rng = seeded(5);
        for _ in 0..100 {
            s.born_sample(&mut rng).unwrap();
        }
        let after: Vec<(u64, u64)> = s
            .amplitudes()
            .iter()
            .map(|a| (a.re.to_bits(), a.im.to_bits()))
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn width_cap() {
        assert_eq!(StateVector::zero(25).unwrap_err(), Error::TooManyQubits(25));
        assert_eq!(StateVector::zero(0).unwrap_err(), Error::TooManyQubits(0));
    }
}
