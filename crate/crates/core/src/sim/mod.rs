//! Dense statevector engine with trajectory semantics for measurement,
//! reset, subset preparation and depolarizing noise.

mod rng;
mod state;
mod unitary;

pub use rng::RngStream;
pub(crate) use rng::mix_seed;
pub use state::{zero_state, StateVector, MAX_QUBITS};
pub use unitary::{haar_random_unitary, UnitaryMatrix, MAX_HAAR_QUBITS};

use num_complex::Complex64;
use std::fmt::Write;

pub(crate) const UNITARY_TOL: f64 = 1e-10;
pub(crate) const PREPARE_NORM_TOL: f64 = 1e-8;

/// Fixed 6-decimal rendering used by the text goldens.
pub(crate) fn fmt_complex(out: &mut String, z: Complex64) {
    let clean = |v: f64| if v.abs() < 5e-7 { 0.0 } else { v };
    let _ = write!(out, "{:.6}{:+.6}i", clean(z.re), clean(z.im));
}

pub(crate) mod state_checks {
    pub(crate) use super::state::{
        check_prepare_target as prepare_target, check_probability as probability,
    };
}
