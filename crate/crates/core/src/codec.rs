//! Encoders from series values to preparation amplitudes and decoders from
//! readout outputs back to series values.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::{Error, Result};

/// Ordered, duplicate-free symbol set. Symbol `i` is encoded as basis
/// state `|i⟩` on `k_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet<S> {
    symbols: Vec<S>,
    k_qubits: usize,
}

impl<S: PartialEq + Clone> Alphabet<S> {
    pub fn new(symbols: Vec<S>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Validation("alphabet is empty".into()));
        }
        for (i, s) in symbols.iter().enumerate() {
            if symbols[..i].contains(s) {
                return Err(Error::Validation(format!("alphabet symbol {i} is a duplicate")));
            }
        }
        let k_qubits = (usize::BITS - (symbols.len() - 1).leading_zeros()).max(1) as usize;
        Ok(Self { symbols, k_qubits })
    }

    pub fn symbols(&self) -> &[S] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn k_qubits(&self) -> usize {
        self.k_qubits
    }

    pub fn index_of(&self, symbol: &S) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    /// Binary alphabets train on the scalar symbol index, larger ones on a
    /// one-hot vector.
    pub fn one_hot_targets(&self) -> bool {
        self.symbols.len() > 2
    }

    /// Training target for `symbol`.
    pub fn target(&self, symbol: &S) -> Result<Vec<f64>> {
        let idx = self.require(symbol)?;
        if self.one_hot_targets() {
            let mut v = vec![0.0; self.symbols.len()];
            v[idx] = 1.0;
            Ok(v)
        } else {
            Ok(vec![idx as f64])
        }
    }

    fn require(&self, symbol: &S) -> Result<usize> {
        self.index_of(symbol)
            .ok_or_else(|| Error::Validation("symbol not in alphabet".into()))
    }
}

/// Basis-state amplitudes for `symbol` (length `2^k_qubits`).
pub fn encode_basis<S: PartialEq + Clone>(symbol: &S, alphabet: &Alphabet<S>) -> Result<Vec<Complex64>> {
    let idx = alphabet.require(symbol)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << alphabet.k_qubits()];
    amps[idx] = Complex64::new(1.0, 0.0);
    Ok(amps)
}

/// Single-qubit angle encoding `[cos(πx/2), sin(πx/2)]` of `x ∈ [0, 1]`.
///
/// Values outside the interval are clamped; a warning is logged when they
/// exceed it by more than `1e-9`.
pub fn encode_angle(x: f64) -> Result<Vec<Complex64>> {
    if !x.is_finite() {
        return Err(Error::Validation(format!("cannot angle-encode {x}")));
    }
    if !(-1e-9..=1.0 + 1e-9).contains(&x) {
        log::warn!("angle encoding clamps {x} into [0, 1]");
    }
    let theta = x.clamp(0.0, 1.0) * FRAC_PI_2;
    Ok(vec![
        Complex64::new(theta.cos(), 0.0),
        Complex64::new(theta.sin(), 0.0),
    ])
}

/// Maps a readout output back to a symbol.
///
/// A one-element prediction is read as a symbol index and rounded to the
/// nearest one; longer predictions are read as one-hot scores and the
/// argmax wins. Ties go to the lower index in both cases.
pub fn decode_symbol<S: PartialEq + Clone>(prediction: &[f64], alphabet: &Alphabet<S>) -> Result<S> {
    if prediction.is_empty() || prediction.iter().any(|p| !p.is_finite()) {
        return Err(Error::Decode(format!("cannot decode prediction {prediction:?}")));
    }
    let idx = if prediction.len() == 1 {
        let v = prediction[0];
        let mut best = 0;
        for i in 1..alphabet.len() {
            if (v - i as f64).abs() < (v - best as f64).abs() {
                best = i;
            }
        }
        best
    } else {
        if prediction.len() != alphabet.len() {
            return Err(Error::Decode(format!(
                "one-hot prediction of length {} for {} symbols",
                prediction.len(),
                alphabet.len()
            )));
        }
        let mut best = 0;
        for (i, &p) in prediction.iter().enumerate() {
            if p > prediction[best] {
                best = i;
            }
        }
        best
    };
    Ok(alphabet.symbols[idx].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn re(v: &[Complex64]) -> Vec<f64> {
        v.iter().map(|z| z.re).collect()
    }

    #[test]
    fn basis_binary() {
        let a = Alphabet::new(vec![0, 1]).unwrap();
        assert_eq!(a.k_qubits(), 1);
        assert_eq!(re(&encode_basis(&0, &a).unwrap()), vec![1.0, 0.0]);
        assert_eq!(re(&encode_basis(&1, &a).unwrap()), vec![0.0, 1.0]);
        assert!(encode_basis(&2, &a).is_err());
    }

    #[test]
    fn basis_four_letters() {
        let a = Alphabet::new(vec!['a', 'b', 'c', 'd']).unwrap();
        assert_eq!(a.k_qubits(), 2);
        assert_eq!(re(&encode_basis(&'c', &a).unwrap()), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(Alphabet::new(vec![1, 2, 3, 4, 5]).unwrap().k_qubits(), 3);
        assert_eq!(Alphabet::new(vec![7]).unwrap().k_qubits(), 1);
        assert!(Alphabet::new(vec![1, 1]).is_err());
    }

    #[test]
    fn angle_examples() {
        assert_eq!(re(&encode_angle(0.0).unwrap()), vec![1.0, 0.0]);
        let one = re(&encode_angle(1.0).unwrap());
        assert!(one[0].abs() < 1e-12 && (one[1] - 1.0).abs() < 1e-12);
        let half = re(&encode_angle(0.5).unwrap());
        let h = 2f64.sqrt() / 2.0;
        assert!((half[0] - h).abs() < 1e-12 && (half[1] - h).abs() < 1e-12);
        assert_eq!(re(&encode_angle(1.5).unwrap()), re(&encode_angle(1.0).unwrap()));
        assert!(encode_angle(f64::NAN).is_err());
    }

    #[test]
    fn decode_examples() {
        let bin = Alphabet::new(vec![0, 1]).unwrap();
        assert_eq!(decode_symbol(&[0.83], &bin).unwrap(), 1);
        assert_eq!(decode_symbol(&[0.5], &bin).unwrap(), 0);
        assert_eq!(decode_symbol(&[-3.0], &bin).unwrap(), 0);
        let abc = Alphabet::new(vec!['a', 'b', 'c']).unwrap();
        assert_eq!(decode_symbol(&[0.1, 0.7, 0.2], &abc).unwrap(), 'b');
        assert_eq!(decode_symbol(&[0.4, 0.4, 0.2], &abc).unwrap(), 'a');
        assert!(matches!(decode_symbol(&[f64::NAN], &bin), Err(Error::Decode(_))));
    }

    proptest! {
        #[test]
        fn target_round_trip(n in 1usize..9, pick in 0usize..9) {
            let a = Alphabet::new((0..n as i64).collect()).unwrap();
            let s = (pick % n) as i64;
            let t = a.target(&s).unwrap();
            prop_assert_eq!(decode_symbol(&t, &a).unwrap(), s);
            let amps = encode_basis(&s, &a).unwrap();
            let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            prop_assert_eq!(amps.iter().position(|z| z.re == 1.0), Some(s as usize));
        }

        #[test]
        fn angle_unit_norm(x in -2.0f64..3.0) {
            let amps = encode_angle(x).unwrap();
            let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }
    }
}
