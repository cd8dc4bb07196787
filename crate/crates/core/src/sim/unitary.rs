use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use super::{fmt_complex, RngStream, UNITARY_TOL};
use crate::{Error, Result};

pub const MAX_HAAR_QUBITS: usize = 10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A `2^k × 2^k` unitary acting on `k` ordered target qubits.
///
/// Entries are stored row-major. Local basis index bit `j` corresponds to
/// the `j`-th target passed to [`StateVector::apply_unitary`](super::StateVector::apply_unitary).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    k_qubits: usize,
    entries: Vec<Complex64>,
}

impl UnitaryMatrix {
    /// Builds a matrix from row-major entries, rejecting anything that is
    /// not unitary within `1e-10` elementwise.
    pub fn new(k_qubits: usize, entries: Vec<Complex64>) -> Result<Self> {
        let m = Self::new_unchecked(k_qubits, entries)?;
        m.validate()?;
        Ok(m)
    }

    /// Shape check only; unitarity is checked later by [`Self::validate`].
    pub fn new_unchecked(k_qubits: usize, entries: Vec<Complex64>) -> Result<Self> {
        if k_qubits == 0 || k_qubits > super::MAX_QUBITS {
            return Err(Error::Capacity(format!(
                "unitary must act on 1..={} qubits, got {k_qubits}",
                super::MAX_QUBITS
            )));
        }
        let dim = 1usize << k_qubits;
        if entries.len() != dim * dim {
            return Err(Error::Validation(format!(
                "{k_qubits}-qubit unitary needs {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Ok(Self { k_qubits, entries })
    }

    pub fn from_real(k_qubits: usize, entries: &[f64]) -> Result<Self> {
        Self::new(
            k_qubits,
            entries.iter().map(|&re| Complex64::new(re, 0.0)).collect(),
        )
    }

    pub fn k_qubits(&self) -> usize {
        self.k_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.k_qubits
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim() + col]
    }

    /// Largest elementwise deviation of `U†U` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let mut acc = ZERO;
                for r in 0..d {
                    acc += self.get(r, i).conj() * self.get(r, j);
                }
                if i == j {
                    acc -= ONE;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("unitary has non-finite entries".into()));
        }
        let err = self.unitarity_error();
        if err > UNITARY_TOL {
            return Err(Error::Validation(format!(
                "matrix is not unitary (max |U†U - I| = {err:.3e})"
            )));
        }
        Ok(())
    }

    pub fn identity(k_qubits: usize) -> Result<Self> {
        let d = 1usize << k_qubits.min(super::MAX_QUBITS);
        let mut entries = vec![ZERO; d * d];
        for i in 0..d {
            entries[i * d + i] = ONE;
        }
        Self::new_unchecked(k_qubits, entries)
    }

    pub fn h() -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Self::fixed(1, vec![s, s, s, -s])
    }

    pub fn x() -> Self {
        Self::fixed(1, vec![ZERO, ONE, ONE, ZERO])
    }

    pub fn y() -> Self {
        Self::fixed(1, vec![ZERO, -I, I, ZERO])
    }

    pub fn z() -> Self {
        Self::fixed(1, vec![ONE, ZERO, ZERO, -ONE])
    }

    pub fn rx(theta: f64) -> Self {
        let c = Complex64::new((theta / 2.0).cos(), 0.0);
        let s = Complex64::new(0.0, -(theta / 2.0).sin());
        Self::fixed(1, vec![c, s, s, c])
    }

    pub fn ry(theta: f64) -> Self {
        let c = Complex64::new((theta / 2.0).cos(), 0.0);
        let s = Complex64::new((theta / 2.0).sin(), 0.0);
        Self::fixed(1, vec![c, -s, s, c])
    }

    pub fn rz(theta: f64) -> Self {
        let e = Complex64::from_polar(1.0, theta / 2.0);
        Self::fixed(1, vec![e.conj(), ZERO, ZERO, e])
    }

    /// CX with the control on local bit 0 and the target on local bit 1.
    pub fn cx() -> Self {
        #[rustfmt::skip]
        let entries = vec![
            ONE,  ZERO, ZERO, ZERO,
            ZERO, ZERO, ZERO, ONE,
            ZERO, ZERO, ONE,  ZERO,
            ZERO, ONE,  ZERO, ZERO,
        ];
        Self::fixed(2, entries)
    }

    fn fixed(k_qubits: usize, entries: Vec<Complex64>) -> Self {
        Self { k_qubits, entries }
    }

    /// Row-major debug rendering, one matrix row per line.
    pub fn render_text(&self) -> String {
        let d = self.dim();
        let mut out = String::new();
        for r in 0..d {
            for c in 0..d {
                if c > 0 {
                    out.push(' ');
                }
                fmt_complex(&mut out, self.get(r, c));
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for UnitaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_text())
    }
}

/// Haar-distributed unitary on `k_qubits` qubits.
///
/// QR of a complex Ginibre matrix, with the columns of `Q` rephased so that
/// `R` has a positive real diagonal. Entries are drawn row-major from `rng`.
pub fn haar_random_unitary(k_qubits: usize, rng: &mut RngStream) -> Result<UnitaryMatrix> {
    if k_qubits == 0 || k_qubits > MAX_HAAR_QUBITS {
        return Err(Error::Capacity(format!(
            "haar unitary supports 1..={MAX_HAAR_QUBITS} qubits, got {k_qubits}"
        )));
    }
    let d = 1usize << k_qubits;
    let mut ginibre = DMatrix::<Complex64>::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            ginibre[(r, c)] = Complex64::new(re, im) * FRAC_1_SQRT_2;
        }
    }
    let (q, r) = ginibre.qr().unpack();
    let mut entries = Vec::with_capacity(d * d);
    for row in 0..d {
        for col in 0..d {
            let diag = r[(col, col)];
            let phase = if diag.norm() > 0.0 { diag / diag.norm() } else { ONE };
            entries.push(q[(row, col)] * phase);
        }
    }
    UnitaryMatrix::new(k_qubits, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_gates_are_unitary() {
        for u in [
            UnitaryMatrix::h(),
            UnitaryMatrix::x(),
            UnitaryMatrix::y(),
            UnitaryMatrix::z(),
            UnitaryMatrix::rx(0.3),
            UnitaryMatrix::ry(1.1),
            UnitaryMatrix::rz(-2.0),
            UnitaryMatrix::cx(),
        ] {
            assert!(u.unitarity_error() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_unitary() {
        let err = UnitaryMatrix::from_real(1, &[1.0, 1.0, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(UnitaryMatrix::from_real(1, &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn haar_is_deterministic_per_stream() {
        let a = haar_random_unitary(2, &mut RngStream::new(5, 0)).unwrap();
        let b = haar_random_unitary(2, &mut RngStream::new(5, 0)).unwrap();
        let c = haar_random_unitary(2, &mut RngStream::new(5, 1)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn haar_three_qubits_unitary() {
        let u = haar_random_unitary(3, &mut RngStream::new(11, 0)).unwrap();
        // direct U†U product, independent of unitarity_error
        let d = u.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let s: Complex64 = (0..d).map(|r| u.get(r, i).conj() * u.get(r, j)).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - expected).norm());
            }
        }
        assert!(worst < 1e-10, "{worst}");
        for c in 0..d {
            let norm: f64 = (0..d).map(|r| u.get(r, c).norm_sqr()).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn haar_seven_qubits_unitary() {
        let u = haar_random_unitary(7, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(u.dim(), 128);
        assert!(u.unitarity_error() < 1e-10);
    }

    #[test]
    fn haar_rejects_too_many_qubits() {
        assert!(matches!(
            haar_random_unitary(11, &mut RngStream::new(0, 0)),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn haar_first_entry_mean() {
        // |U00|^2 is uniform on [0,1] for k = 1
        let n = 10_000;
        let mean = (0..n)
            .map(|i| {
                let u = haar_random_unitary(1, &mut RngStream::new(99, i)).unwrap();
                u.get(0, 0).norm_sqr()
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
    }

    #[test]
    fn render_golden() {
        assert_eq!(
            UnitaryMatrix::y().render_text(),
            "0.000000+0.000000i 0.000000-1.000000i\n0.000000+1.000000i 0.000000+0.000000i\n"
        );
    }
}
