//! Reservoir construction hooks, the prepackaged Static and Incremental
//! processing schemes, and closed-loop prediction.
//!
//! A reservoir describes its circuit through [`ReservoirHooks`]: `before`
//! runs once on `|0…0⟩`, `during` once per series element, `after` once at
//! the end. Hooks only see a [`CircuitBuilder`]; execution belongs to the
//! scheme.

mod features;
mod schemes;

pub use features::{FeatureMatrix, PredictionRun, Provenance};
pub use schemes::{
    build_incremental_circuits, build_static_circuit, run_incremental, run_static, run_static_with_mode,
    FeatureMode,
    Incremental, Static,
};

use nalgebra::DMatrix;

use crate::circuit::CircuitBuilder;
use crate::readout::Estimator;
use crate::{Error, Result};

/// User-defined circuit construction. `X` is the series element type.
pub trait ReservoirHooks<X> {
    fn n_qubits(&self) -> usize;

    fn before(&self, _circuit: &mut CircuitBuilder) -> Result<()> {
        Ok(())
    }

    fn during(&self, circuit: &mut CircuitBuilder, timestep: &X) -> Result<()>;

    fn after(&self, _circuit: &mut CircuitBuilder) -> Result<()> {
        Ok(())
    }
}

impl<X, H: ReservoirHooks<X> + ?Sized> ReservoirHooks<X> for &H {
    fn n_qubits(&self) -> usize {
        (**self).n_qubits()
    }
    fn before(&self, circuit: &mut CircuitBuilder) -> Result<()> {
        (**self).before(circuit)
    }
    fn during(&self, circuit: &mut CircuitBuilder, timestep: &X) -> Result<()> {
        (**self).during(circuit, timestep)
    }
    fn after(&self, circuit: &mut CircuitBuilder) -> Result<()> {
        (**self).after(circuit)
    }
}

/// Execution parameters shared by `run` and `predict`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub shots: usize,
    pub seed: u64,
    pub noise: Option<f64>,
}

impl RunOptions {
    pub fn new(shots: usize, seed: u64) -> Self {
        Self {
            shots,
            seed,
            noise: None,
        }
    }

    pub fn with_noise(mut self, noise: Option<f64>) -> Self {
        self.noise = noise;
        self
    }
}

/// A processing scheme: turns a series into features. Custom schemes
/// implement [`Reservoir::run`] and inherit [`Reservoir::predict`].
pub trait Reservoir<X: Clone> {
    fn run(&self, series: &[X], opts: &RunOptions) -> Result<FeatureMatrix>;

    /// Closed-loop forecast of `num_pred` steps.
    ///
    /// Each step re-runs the scheme on the working series, feeds its last
    /// feature row to `model`, decodes the output with `decode` and appends
    /// the result to the series.
    fn predict<E, D>(
        &self,
        model: &E,
        decode: D,
        from_series: &[X],
        num_pred: usize,
        opts: &RunOptions,
    ) -> Result<PredictionRun<X>>
    where
        E: Estimator + ?Sized,
        D: Fn(&[f64]) -> Result<X>,
    {
        predict(|s: &[X]| self.run(s, opts), model, decode, from_series, num_pred)
    }
}

/// The closed-loop protocol behind [`Reservoir::predict`], with the scheme
/// supplied as a function from series to features.
pub fn predict<X, R, E, D>(
    run: R,
    model: &E,
    decode: D,
    from_series: &[X],
    num_pred: usize,
) -> Result<PredictionRun<X>>
where
    X: Clone,
    R: Fn(&[X]) -> Result<FeatureMatrix>,
    E: Estimator + ?Sized,
    D: Fn(&[f64]) -> Result<X>,
{
    check_predict_args(from_series, num_pred)?;
    let mut series = from_series.to_vec();
    predict_with(
        |next: Option<&X>| {
            if let Some(x) = next {
                series.push(x.clone());
            }
            let features = run(&series)?;
            features
                .last_row()
                .map(<[f64]>::to_vec)
                .ok_or_else(|| Error::Scheme("scheme produced no features".into()))
        },
        model,
        decode,
        num_pred,
    )
}

pub(crate) fn check_predict_args<X>(from_series: &[X], num_pred: usize) -> Result<()> {
    if from_series.is_empty() {
        return Err(Error::Scheme("prediction needs a non-empty seed series".into()));
    }
    if num_pred == 0 {
        return Err(Error::Validation("num_pred must be at least 1".into()));
    }
    Ok(())
}

/// Closed loop over a feature source: `next_row(None)` yields the row for
/// the seed series, `next_row(Some(x))` the row after appending `x`.
pub(crate) fn predict_with<X, N, E, D>(mut next_row: N, model: &E, decode: D, num_pred: usize) -> Result<PredictionRun<X>>
where
    X: Clone,
    N: FnMut(Option<&X>) -> Result<Vec<f64>>,
    E: Estimator + ?Sized,
    D: Fn(&[f64]) -> Result<X>,
{
    let mut out = PredictionRun {
        predictions: Vec::with_capacity(num_pred),
        features: Vec::with_capacity(num_pred),
        outputs: Vec::with_capacity(num_pred),
    };
    for _ in 0..num_pred {
        let last = next_row(out.predictions.last())?;
        let y = model.predict(&DMatrix::from_row_slice(1, last.len(), &last))?;
        let y: Vec<f64> = y.row(0).iter().copied().collect();
        let next = decode(&y)?;
        out.predictions.push(next);
        out.features.push(last);
        out.outputs.push(y);
    }
    Ok(out)
}
