use std::fmt;

use num_complex::Complex64;
use rand::Rng;

use super::{fmt_complex, RngStream, UnitaryMatrix, PREPARE_NORM_TOL};
use crate::{Error, Result};

/// Hard cap on register width; a state holds `2^n` amplitudes.
pub const MAX_QUBITS: usize = 24;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Stack-buffer size for small operators and outcome tables.
const SMALL: usize = 16;

#[inline]
fn dot(coeffs: &[Complex64], v: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (c, x) in coeffs.iter().zip(v) {
        re += c.re * x.re - c.im * x.im;
        im += c.re * x.im + c.im * x.re;
    }
    Complex64::new(re, im)
}

/// Pure state of `n` qubits as a dense amplitude vector.
///
/// Basis index bit `q` is the value of qubit `q` (qubit 0 is the
/// least-significant bit). Every mutating operation keeps the vector at unit
/// norm.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

/// `|0…0⟩` on `n_qubits` qubits.
pub fn zero_state(n_qubits: usize) -> Result<StateVector> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::Capacity(format!(
            "state must have 1..={MAX_QUBITS} qubits, got {n_qubits}"
        )));
    }
    let mut amps = vec![ZERO; 1 << n_qubits];
    amps[0] = Complex64::new(1.0, 0.0);
    Ok(StateVector { n_qubits, amps })
}

impl StateVector {
    /// Wraps raw amplitudes; they must already be normalized within `1e-10`.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n = amps.len().trailing_zeros() as usize;
        if amps.len() < 2 || !amps.len().is_power_of_two() || n > MAX_QUBITS {
            return Err(Error::Capacity(format!(
                "amplitude count {} is not 2^n with 1 <= n <= {MAX_QUBITS}",
                amps.len()
            )));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Validation(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self { n_qubits: n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubits(&self, qubits: &[usize]) -> Result<()> {
        let mut seen = 0u64;
        for &q in qubits {
            if q >= self.n_qubits {
                return Err(Error::Index(format!(
                    "qubit {q} out of range for {} qubits",
                    self.n_qubits
                )));
            }
            if seen & (1 << q) != 0 {
                return Err(Error::Index(format!("qubit {q} listed twice")));
            }
            seen |= 1 << q;
        }
        Ok(())
    }

    /// Basis-index offset for every local pattern over `qubits`.
    fn offsets(qubits: &[usize]) -> Vec<usize> {
        let mut out = vec![0; 1 << qubits.len()];
        Self::fill_offsets(qubits, &mut out);
        out
    }

    #[inline]
    fn local_index(index: usize, qubits: &[usize]) -> usize {
        let mut local = 0;
        for (j, &q) in qubits.iter().enumerate() {
            local |= (index >> q & 1) << j;
        }
        local
    }

    /// `Some(mask)` when `qubits` is `0, 1, …, m-1`, so the local index is
    /// `index & mask`.
    #[inline]
    fn contiguous_mask(qubits: &[usize]) -> Option<usize> {
        qubits
            .iter()
            .enumerate()
            .all(|(j, &q)| j == q)
            .then(|| (1 << qubits.len()) - 1)
    }

    /// Applies `u` to `targets`; target `j` maps to bit `j` of `u`'s local
    /// basis index.
    pub fn apply_unitary(&mut self, u: &UnitaryMatrix, targets: &[usize]) -> Result<()> {
        self.check_qubits(targets)?;
        if targets.len() != u.k_qubits() {
            return Err(Error::Index(format!(
                "{}-qubit unitary given {} targets",
                u.k_qubits(),
                targets.len()
            )));
        }
        self.apply_unitary_unchecked(u, targets);
        Ok(())
    }

    pub(crate) fn apply_unitary_unchecked(&mut self, u: &UnitaryMatrix, targets: &[usize]) {
        let dim = u.dim();
        let m = u.entries();
        if dim == self.amps.len() && Self::contiguous_mask(targets).is_some() {
            // full-width operator in natural order: plain mat-vec
            let mut small = [ZERO; SMALL];
            let input: Vec<Complex64>;
            let input: &[Complex64] = if dim <= SMALL {
                small[..dim].copy_from_slice(&self.amps);
                &small[..dim]
            } else {
                input = self.amps.clone();
                &input
            };
            let nonzero: Vec<usize> = (0..dim).filter(|&c| input[c] != ZERO).collect();
            if nonzero.len() * 2 < dim {
                // zero columns add nothing; the summation order is unchanged
                for (out, coeffs) in self.amps.iter_mut().zip(m.chunks_exact(dim)) {
                    let (mut re, mut im) = (0.0, 0.0);
                    for &c in &nonzero {
                        let (u, x) = (coeffs[c], input[c]);
                        re += u.re * x.re - u.im * x.im;
                        im += u.re * x.im + u.im * x.re;
                    }
                    *out = Complex64::new(re, im);
                }
            } else {
                for (out, coeffs) in self.amps.iter_mut().zip(m.chunks_exact(dim)) {
                    *out = dot(coeffs, input);
                }
            }
            return;
        }
        if dim > SMALL {
            let offsets = Self::offsets(targets);
            let mut gathered = vec![ZERO; dim];
            self.apply_blocks(m, &offsets, &mut gathered);
        } else {
            let mut offsets = [0usize; SMALL];
            Self::fill_offsets(targets, &mut offsets[..dim]);
            let mut gathered = [ZERO; SMALL];
            self.apply_blocks(m, &offsets[..dim], &mut gathered[..dim]);
        }
    }

    fn apply_blocks(&mut self, m: &[Complex64], offsets: &[usize], gathered: &mut [Complex64]) {
        let dim = offsets.len();
        let mask = offsets[dim - 1];
        for base in 0..self.amps.len() {
            if base & mask != 0 {
                continue;
            }
            let mut any = false;
            for (g, off) in gathered.iter_mut().zip(offsets) {
                *g = self.amps[base | off];
                any |= *g != ZERO;
            }
            if !any {
                continue;
            }
            for (coeffs, off) in m.chunks_exact(dim).zip(offsets) {
                self.amps[base | off] = dot(coeffs, gathered);
            }
        }
    }

    fn fill_offsets(qubits: &[usize], out: &mut [usize]) {
        for (local, o) in out.iter_mut().enumerate() {
            *o = 0;
            for (j, &q) in qubits.iter().enumerate() {
                *o |= (local >> j & 1) << q;
            }
        }
    }

    /// Marginal outcome distribution over `qubits`; entry `l` has bit `j`
    /// equal to the value of `qubits[j]`.
    pub fn born_probabilities(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        self.check_qubits(qubits)?;
        Ok(self.born_unchecked(qubits))
    }

    fn born_unchecked(&self, qubits: &[usize]) -> Vec<f64> {
        let mut probs = vec![0.0; 1 << qubits.len()];
        self.born_into(qubits, &mut probs);
        probs
    }

    fn born_into(&self, qubits: &[usize], probs: &mut [f64]) {
        if let Some(mask) = Self::contiguous_mask(qubits) {
            for (i, a) in self.amps.iter().enumerate() {
                probs[i & mask] += a.norm_sqr();
            }
        } else {
            for (i, a) in self.amps.iter().enumerate() {
                probs[Self::local_index(i, qubits)] += a.norm_sqr();
            }
        }
    }

    /// Projective measurement of `qubits`. Returns one bit per listed qubit
    /// and leaves the state collapsed onto the sampled outcome.
    pub fn measure(&mut self, qubits: &[usize], rng: &mut RngStream) -> Result<Vec<u8>> {
        self.check_qubits(qubits)?;
        Ok(self.measure_unchecked(qubits, rng))
    }

    pub(crate) fn measure_unchecked(&mut self, qubits: &[usize], rng: &mut RngStream) -> Vec<u8> {
        let outcome = self.measure_outcome(qubits, rng);
        (0..qubits.len()).map(|j| (outcome >> j & 1) as u8).collect()
    }

    /// Samples and collapses; returns the outcome as a local index (bit `j`
    /// is `qubits[j]`).
    pub(crate) fn measure_outcome(&mut self, qubits: &[usize], rng: &mut RngStream) -> usize {
        let n_out = 1 << qubits.len();
        let mut small = [0.0f64; SMALL];
        let mut large = Vec::new();
        let probs: &mut [f64] = if n_out <= SMALL {
            &mut small[..n_out]
        } else {
            large.resize(n_out, 0.0);
            &mut large
        };
        self.born_into(qubits, probs);
        let total: f64 = probs.iter().sum();
        let draw = rng.uniform() * total;
        let mut outcome = None;
        let mut acc = 0.0;
        for (l, &p) in probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            outcome = Some(l);
            acc += p;
            if draw < acc {
                break;
            }
        }
        // only outcomes with nonzero weight are ever selected
        let outcome = outcome.expect("state has zero norm");
        let scale = 1.0 / probs[outcome].sqrt();
        let contiguous = Self::contiguous_mask(qubits);
        for (i, a) in self.amps.iter_mut().enumerate() {
            let local = match contiguous {
                Some(mask) => i & mask,
                None => Self::local_index(i, qubits),
            };
            if local == outcome {
                *a *= scale;
            } else {
                *a = ZERO;
            }
        }
        outcome
    }

    fn flip(&mut self, qubit: usize) {
        let bit = 1 << qubit;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                self.amps.swap(i, i | bit);
            }
        }
    }

    /// Measures `qubit` and flips it back to `|0⟩` if the outcome was 1.
    pub fn reset(&mut self, qubit: usize, rng: &mut RngStream) -> Result<()> {
        self.check_qubits(&[qubit])?;
        self.reset_unchecked(qubit, rng);
        Ok(())
    }

    fn reset_unchecked(&mut self, qubit: usize, rng: &mut RngStream) {
        if self.measure_outcome(&[qubit], rng) == 1 {
            self.flip(qubit);
        }
    }

    /// Resets every listed qubit, then prepares the subset in `target`
    /// (local bit `j` of the index = `qubits[j]`).
    pub fn prepare(&mut self, qubits: &[usize], target: &[Complex64], rng: &mut RngStream) -> Result<()> {
        self.check_qubits(qubits)?;
        check_prepare_target(qubits.len(), target)?;
        self.prepare_unchecked(qubits, target, rng);
        Ok(())
    }

    pub(crate) fn prepare_unchecked(&mut self, qubits: &[usize], target: &[Complex64], rng: &mut RngStream) {
        for &q in qubits {
            self.reset_unchecked(q, rng);
        }
        // After the resets the subset is |0…0⟩ in product with the rest, so
        // the preparation unitary reduces to spreading each base amplitude
        // over the target.
        let norm = target.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let dim = target.len();
        let mut small = [0usize; SMALL];
        let mut large = Vec::new();
        let offsets: &mut [usize] = if dim <= SMALL {
            &mut small[..dim]
        } else {
            large.resize(dim, 0);
            &mut large
        };
        Self::fill_offsets(qubits, offsets);
        let mask = offsets[dim - 1];
        for base in 0..self.amps.len() {
            if base & mask != 0 {
                continue;
            }
            let a = self.amps[base];
            for (t, off) in target.iter().zip(offsets.iter()) {
                self.amps[base | off] = a * (t / norm);
            }
        }
    }

    /// Stochastic depolarizing channel: with probability `p` one of X, Y, Z
    /// (uniformly) hits `qubit`.
    pub fn apply_depolarizing(&mut self, qubit: usize, p: f64, rng: &mut RngStream) -> Result<()> {
        self.check_qubits(&[qubit])?;
        check_probability(p)?;
        self.depolarize_unchecked(qubit, p, rng);
        Ok(())
    }

    pub(crate) fn depolarize_unchecked(&mut self, qubit: usize, p: f64, rng: &mut RngStream) {
        if rng.uniform() >= p {
            return;
        }
        let bit = 1 << qubit;
        match rng.random_range(0..3u8) {
            0 => self.flip(qubit),
            1 => {
                // Y = i·X·Z
                for i in 0..self.amps.len() {
                    if i & bit == 0 {
                        let (a0, a1) = (self.amps[i], self.amps[i | bit]);
                        self.amps[i] = Complex64::new(0.0, -1.0) * a1;
                        self.amps[i | bit] = Complex64::new(0.0, 1.0) * a0;
                    }
                }
            }
            _ => {
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & bit != 0 {
                        *a = -*a;
                    }
                }
            }
        }
    }

    /// One amplitude per line in basis-index order.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for a in &self.amps {
            fmt_complex(&mut out, *a);
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_text())
    }
}

pub(crate) fn check_prepare_target(n_targets: usize, target: &[Complex64]) -> Result<()> {
    if target.len() != 1 << n_targets {
        return Err(Error::Validation(format!(
            "preparing {n_targets} qubits needs {} amplitudes, got {}",
            1usize << n_targets,
            target.len()
        )));
    }
    if target.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::Validation("preparation amplitudes are not finite".into()));
    }
    let norm: f64 = target.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > PREPARE_NORM_TOL {
        return Err(Error::Validation(format!(
            "preparation amplitudes have norm {norm}, expected 1"
        )));
    }
    Ok(())
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Validation(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}
