use std::cell::RefCell;

use nalgebra::DMatrix;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qreservoir::circuit::CircuitBuilder;
use qreservoir::readout::{Estimator, ReadoutModel};
use qreservoir::reservoir::{FeatureMatrix, FeatureMode, Incremental, PredictionRun, Reservoir, ReservoirHooks, RunOptions, Static};
use qreservoir::{Error, Result};

use crate::circuit::PyCircuitBuilder;
use crate::readout::PyReadoutModel;
use crate::to_py;

/// A Python object with `n_qubits` and a `during(circuit, x)` method;
/// `before(circuit)` and `after(circuit)` are optional.
struct PyHooks<'py, 'r> {
    obj: Bound<'py, PyAny>,
    n_qubits: usize,
    raised: &'r RefCell<Option<PyErr>>,
}

impl<'py, 'r> PyHooks<'py, 'r> {
    fn new(obj: Bound<'py, PyAny>, raised: &'r RefCell<Option<PyErr>>) -> PyResult<Self> {
        let n_qubits = obj.getattr("n_qubits")?.extract()?;
        Ok(Self { obj, n_qubits, raised })
    }

    /// Lends `circuit` to a Python method and takes it back.
    fn call(&self, name: &str, circuit: &mut CircuitBuilder, x: Option<&Bound<'py, PyAny>>) -> Result<()> {
        let py = self.obj.py();
        if x.is_none() && !self.obj.hasattr(name).unwrap_or(false) {
            return Ok(());
        }
        let n = circuit.n_qubits();
        let lent = std::mem::replace(circuit, CircuitBuilder::new(n)?);
        let cell = Bound::new(py, PyCircuitBuilder { inner: Some(lent) }).map_err(|e| self.stash(e))?;
        let res = match x {
            Some(x) => self.obj.call_method1(name, (cell.clone(), x)),
            None => self.obj.call_method1(name, (cell.clone(),)),
        };
        *circuit = cell
            .borrow_mut()
            .inner
            .take()
            .ok_or_else(|| Error::Scheme(format!("`{name}` consumed the circuit builder")))?;
        res.map(|_| ()).map_err(|e| self.stash(e))
    }

    fn stash(&self, e: PyErr) -> Error {
        let msg = e.to_string();
        self.raised.borrow_mut().get_or_insert(e);
        Error::Scheme(format!("hook raised: {msg}"))
    }
}

impl<'py> ReservoirHooks<Bound<'py, PyAny>> for PyHooks<'py, '_> {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }
    fn before(&self, circuit: &mut CircuitBuilder) -> Result<()> {
        self.call("before", circuit, None)
    }
    fn during(&self, circuit: &mut CircuitBuilder, x: &Bound<'py, PyAny>) -> Result<()> {
        self.call("during", circuit, Some(x))
    }
    fn after(&self, circuit: &mut CircuitBuilder) -> Result<()> {
        self.call("after", circuit, None)
    }
}

/// `ReadoutModel`, or any object with `predict(rows) -> rows`.
enum PyEstimator<'py, 'r> {
    Native(ReadoutModel),
    Foreign(Bound<'py, PyAny>, &'r RefCell<Option<PyErr>>),
}

impl<'py, 'r> PyEstimator<'py, 'r> {
    fn new(obj: Bound<'py, PyAny>, raised: &'r RefCell<Option<PyErr>>) -> Self {
        match obj.cast::<PyReadoutModel>() {
            Ok(m) => Self::Native(m.get().inner.clone()),
            Err(_) => Self::Foreign(obj, raised),
        }
    }
}

impl Estimator for PyEstimator<'_, '_> {
    fn fit(&mut self, _x: &DMatrix<f64>, _y: &DMatrix<f64>) -> Result<()> {
        Err(Error::Validation("fit the model in Python before predicting".into()))
    }

    fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            Self::Native(m) => m.predict(x),
            Self::Foreign(obj, raised) => {
                let rows: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
                let stash = |e: PyErr| {
                    let msg = e.to_string();
                    raised.borrow_mut().get_or_insert(e);
                    Error::Scheme(format!("model raised: {msg}"))
                };
                let out = obj.call_method1("predict", (rows,)).map_err(stash)?;
                // 2-D output, or 1-D with one value per row
                let rows: Vec<Vec<f64>> = match out.extract::<Vec<Vec<f64>>>() {
                    Ok(r) => r,
                    Err(_) => out.extract::<Vec<f64>>().map_err(stash)?.into_iter().map(|v| vec![v]).collect(),
                };
                let d = rows.first().map_or(0, Vec::len);
                if rows.len() != x.nrows() || d == 0 || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::Dimension("model returned a ragged or empty prediction".into()));
                }
                Ok(DMatrix::from_fn(rows.len(), d, |r, c| rows[r][c]))
            }
        }
    }
}

fn parse_mode(mode: &str) -> PyResult<FeatureMode> {
    match mode {
        "marginal" => Ok(FeatureMode::Marginal),
        "distribution" => Ok(FeatureMode::Distribution),
        other => Err(pyo3::exceptions::PyValueError::new_err(format!(
            "feature_mode must be marginal or distribution, got `{other}`"
        ))),
    }
}

fn rows(f: FeatureMatrix) -> Vec<Vec<f64>> {
    f.rows().map(<[f64]>::to_vec).collect()
}

/// Python exception raised inside a hook wins over the wrapped error.
fn finish<T>(res: Result<T>, raised: &RefCell<Option<PyErr>>) -> PyResult<T> {
    res.map_err(|e| raised.borrow_mut().take().unwrap_or_else(|| to_py(e)))
}

fn prediction_dict<'py>(py: Python<'py>, run: PredictionRun<Bound<'py, PyAny>>) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("predictions", run.predictions)?;
    d.set_item("features", run.features)?;
    d.set_item("outputs", run.outputs)?;
    Ok(d)
}

fn decode_with<'py, 'r>(
    decode: &Bound<'py, PyAny>,
    raised: &'r RefCell<Option<PyErr>>,
) -> impl Fn(&[f64]) -> Result<Bound<'py, PyAny>> + 'r
where
    'py: 'r,
{
    let decode = decode.clone();
    move |y: &[f64]| {
        decode.call1((y.to_vec(),)).map_err(|e| {
            let msg = e.to_string();
            raised.borrow_mut().get_or_insert(e);
            Error::Scheme(format!("decode raised: {msg}"))
        })
    }
}

/// Repeated-measurement scheme over a hooks object.
#[pyclass(name = "Static", module = "qreservoir_py")]
pub struct PyStatic {
    hooks: Py<PyAny>,
    mode: FeatureMode,
}

#[pymethods]
impl PyStatic {
    #[new]
    #[pyo3(signature = (hooks, feature_mode="marginal"))]
    fn new(hooks: Py<PyAny>, feature_mode: &str) -> PyResult<Self> {
        Ok(Self {
            hooks,
            mode: parse_mode(feature_mode)?,
        })
    }

    #[pyo3(signature = (series, shots, seed=0, noise=None))]
    fn run<'py>(
        &self,
        py: Python<'py>,
        series: Vec<Bound<'py, PyAny>>,
        shots: usize,
        seed: u64,
        noise: Option<f64>,
    ) -> PyResult<Vec<Vec<f64>>> {
        let raised = RefCell::new(None);
        let hooks = PyHooks::new(self.hooks.bind(py).clone(), &raised)?;
        let opts = RunOptions::new(shots, seed).with_noise(noise);
        finish(Static::new(&hooks).with_mode(self.mode).run(&series, &opts), &raised).map(rows)
    }

    /// Closed-loop forecast. Returns a dict with `predictions`, `features`
    /// and `outputs`.
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (model, decode, from_series, num_pred, shots, seed=0, noise=None))]
    fn predict<'py>(
        &self,
        py: Python<'py>,
        model: Bound<'py, PyAny>,
        decode: Bound<'py, PyAny>,
        from_series: Vec<Bound<'py, PyAny>>,
        num_pred: usize,
        shots: usize,
        seed: u64,
        noise: Option<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let raised = RefCell::new(None);
        let hooks = PyHooks::new(self.hooks.bind(py).clone(), &raised)?;
        let model = PyEstimator::new(model, &raised);
        let opts = RunOptions::new(shots, seed).with_noise(noise);
        let res = Static::new(&hooks).with_mode(self.mode).predict(
            &model,
            decode_with(&decode, &raised),
            &from_series,
            num_pred,
            &opts,
        );
        let run = finish(res, &raised)?;
        prediction_dict(py, run)
    }
}

/// Moving-window scheme over a hooks object.
#[pyclass(name = "Incremental", module = "qreservoir_py")]
pub struct PyIncremental {
    hooks: Py<PyAny>,
    memory: usize,
    mode: FeatureMode,
}

#[pymethods]
impl PyIncremental {
    #[new]
    #[pyo3(signature = (hooks, memory=3, feature_mode="marginal"))]
    fn new(hooks: Py<PyAny>, memory: usize, feature_mode: &str) -> PyResult<Self> {
        Ok(Self {
            hooks,
            memory,
            mode: parse_mode(feature_mode)?,
        })
    }

    #[pyo3(signature = (series, shots, seed=0, noise=None))]
    fn run<'py>(
        &self,
        py: Python<'py>,
        series: Vec<Bound<'py, PyAny>>,
        shots: usize,
        seed: u64,
        noise: Option<f64>,
    ) -> PyResult<Vec<Vec<f64>>> {
        let raised = RefCell::new(None);
        let hooks = PyHooks::new(self.hooks.bind(py).clone(), &raised)?;
        let opts = RunOptions::new(shots, seed).with_noise(noise);
        let scheme = Incremental::new(&hooks, self.memory).with_mode(self.mode);
        finish(scheme.run(&series, &opts), &raised).map(rows)
    }

    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (model, decode, from_series, num_pred, shots, seed=0, noise=None))]
    fn predict<'py>(
        &self,
        py: Python<'py>,
        model: Bound<'py, PyAny>,
        decode: Bound<'py, PyAny>,
        from_series: Vec<Bound<'py, PyAny>>,
        num_pred: usize,
        shots: usize,
        seed: u64,
        noise: Option<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let raised = RefCell::new(None);
        let hooks = PyHooks::new(self.hooks.bind(py).clone(), &raised)?;
        let model = PyEstimator::new(model, &raised);
        let opts = RunOptions::new(shots, seed).with_noise(noise);
        let scheme = Incremental::new(&hooks, self.memory).with_mode(self.mode);
        let res = scheme.predict(&model, decode_with(&decode, &raised), &from_series, num_pred, &opts);
        let run = finish(res, &raised)?;
        prediction_dict(py, run)
    }
}
