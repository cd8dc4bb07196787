//! Quantum reservoir computing framework.
//!
//! A reservoir is described by three construction hooks (`before`, `during`,
//! `after`) that write instructions into a [`circuit::CircuitBuilder`]. The
//! prepackaged [`reservoir::Static`] and [`reservoir::Incremental`] schemes
//! turn a time series into a [`reservoir::FeatureMatrix`] by executing the
//! resulting circuits on the in-tree trajectory simulator ([`sim`]), and
//! [`reservoir::predict`] closes the loop with a trained [`readout`] model.
//!
//! Qubit 0 is the least-significant bit of every basis-state index.

pub mod circuit;
pub mod codec;
mod error;
pub mod experiment;
pub mod readout;
pub mod reservoir;
pub mod sim;

pub use error::{Error, Result};
