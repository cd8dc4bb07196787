use std::path::PathBuf;

use nalgebra::DMatrix;
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qreservoir::codec::{decode_symbol, encode_basis, Alphabet};
use qreservoir::experiment::{load_config, write_artifacts};
use qreservoir::readout::{ReadoutModel, RidgeConfig};

use crate::to_py;

fn matrix(rows: &[Vec<f64>], what: &str) -> PyResult<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!("{what} must be a non-empty rectangular list of rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[pyclass(name = "ReadoutModel", module = "qreservoir_py", frozen)]
pub struct PyReadoutModel {
    pub(crate) inner: ReadoutModel,
}

#[pymethods]
impl PyReadoutModel {
    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(&self.inner.predict(&matrix(&x, "x")?).map_err(to_py)?))
    }

    /// `F × D` weights as rows.
    #[getter]
    fn weights(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.weights())
    }

    #[getter]
    fn intercept(&self) -> Vec<f64> {
        self.inner.intercept().iter().copied().collect()
    }

    fn dump(&self) -> String {
        self.inner.dump()
    }

    #[staticmethod]
    fn load(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ReadoutModel::load(text).map_err(to_py)?,
        })
    }
}

/// Ridge regression `y ≈ x·W + b`; `x` and `y` are lists of rows.
#[pyfunction]
#[pyo3(signature = (x, y, lam=1e-6, fit_intercept=true))]
pub fn fit_ridge(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, lam: f64, fit_intercept: bool) -> PyResult<PyReadoutModel> {
    let config = RidgeConfig {
        lambda: lam,
        fit_intercept,
    };
    let inner = qreservoir::readout::fit_ridge(&matrix(&x, "x")?, &matrix(&y, "y")?, config).map_err(to_py)?;
    Ok(PyReadoutModel { inner })
}

/// Finite alphabet of string symbols.
#[pyclass(name = "Alphabet", module = "qreservoir_py", frozen)]
pub struct PyAlphabet {
    inner: Alphabet<String>,
}

#[pymethods]
impl PyAlphabet {
    #[new]
    fn new(symbols: Vec<String>) -> PyResult<Self> {
        Ok(Self {
            inner: Alphabet::new(symbols).map_err(to_py)?,
        })
    }

    #[getter]
    fn k_qubits(&self) -> usize {
        self.inner.k_qubits()
    }

    fn encode(&self, symbol: String) -> PyResult<Vec<Complex64>> {
        encode_basis(&symbol, &self.inner).map_err(to_py)
    }

    /// Training target: symbol index, or one-hot past two symbols.
    fn target(&self, symbol: String) -> PyResult<Vec<f64>> {
        self.inner.target(&symbol).map_err(to_py)
    }

    fn decode(&self, prediction: Vec<f64>) -> PyResult<String> {
        decode_symbol(&prediction, &self.inner).map_err(to_py)
    }
}

/// Single-qubit angle encoding of `x` in `[0, 1]`.
#[pyfunction]
pub fn encode_angle(x: f64) -> PyResult<Vec<Complex64>> {
    qreservoir::codec::encode_angle(x).map_err(to_py)
}

/// Runs the experiment described by a config file and returns its
/// metrics; artifacts are written when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (config, out_dir=None))]
pub fn run_experiment<'py>(py: Python<'py>, config: PathBuf, out_dir: Option<PathBuf>) -> PyResult<Bound<'py, PyDict>> {
    let (config, _warnings) = load_config(&config).map_err(to_py)?;
    let output = py.detach(|| qreservoir::experiment::run_experiment(&config)).map_err(to_py)?;
    if let Some(dir) = out_dir {
        write_artifacts(&output, &dir).map_err(to_py)?;
    }
    let m = &output.metrics;
    let d = PyDict::new(py);
    d.set_item("train_length", m.train_length)?;
    d.set_item("n_features", m.n_features)?;
    d.set_item("num_pred", m.num_pred)?;
    d.set_item("train_mse", m.train_mse)?;
    d.set_item("mse", m.mse)?;
    d.set_item("accuracy", m.accuracy)?;
    d.set_item("predictions", output.predictions.predictions.clone())?;
    d.set_item("truth", output.truth.clone())?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (config, steps=3))]
pub fn dump_circuit(config: PathBuf, steps: usize) -> PyResult<String> {
    let (config, _) = load_config(&config).map_err(to_py)?;
    qreservoir::experiment::dump_circuit(&config, steps).map_err(to_py)
}
