use std::sync::Arc;

use num_complex::Complex64;
use pyo3::prelude::*;

use qreservoir::sim::{zero_state, RngStream, StateVector, UnitaryMatrix};

use crate::to_py;

/// Counter-based random stream `(seed, stream)`.
#[pyclass(name = "RngStream", module = "qreservoir_py")]
pub struct PyRngStream {
    pub(crate) inner: RngStream,
}

#[pymethods]
impl PyRngStream {
    #[new]
    #[pyo3(signature = (seed, stream=0))]
    fn new(seed: u64, stream: u64) -> Self {
        Self {
            inner: RngStream::new(seed, stream),
        }
    }

    fn uniform(&mut self) -> f64 {
        self.inner.uniform()
    }
}

#[pyclass(name = "UnitaryMatrix", module = "qreservoir_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyUnitaryMatrix {
    pub(crate) inner: Arc<UnitaryMatrix>,
}

impl From<UnitaryMatrix> for PyUnitaryMatrix {
    fn from(u: UnitaryMatrix) -> Self {
        Self { inner: Arc::new(u) }
    }
}

#[pymethods]
impl PyUnitaryMatrix {
    /// Square matrix given as a list of rows of complex numbers.
    #[new]
    fn new(rows: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let d = rows.len();
        if d < 2 || !d.is_power_of_two() || rows.iter().any(|r| r.len() != d) {
            return Err(pyo3::exceptions::PyValueError::new_err(format!(
                "matrix must be square with 2^k rows, got {d} rows"
            )));
        }
        let entries = rows.into_iter().flatten().collect();
        Ok(UnitaryMatrix::new(d.trailing_zeros() as usize, entries).map_err(to_py)?.into())
    }

    #[staticmethod]
    fn h() -> Self {
        UnitaryMatrix::h().into()
    }
    #[staticmethod]
    fn x() -> Self {
        UnitaryMatrix::x().into()
    }
    #[staticmethod]
    fn y() -> Self {
        UnitaryMatrix::y().into()
    }
    #[staticmethod]
    fn z() -> Self {
        UnitaryMatrix::z().into()
    }
    #[staticmethod]
    fn rx(theta: f64) -> Self {
        UnitaryMatrix::rx(theta).into()
    }
    #[staticmethod]
    fn ry(theta: f64) -> Self {
        UnitaryMatrix::ry(theta).into()
    }
    #[staticmethod]
    fn rz(theta: f64) -> Self {
        UnitaryMatrix::rz(theta).into()
    }
    /// CX with the control on the first target.
    #[staticmethod]
    fn cx() -> Self {
        UnitaryMatrix::cx().into()
    }
    #[staticmethod]
    fn identity(k_qubits: usize) -> PyResult<Self> {
        Ok(UnitaryMatrix::identity(k_qubits).map_err(to_py)?.into())
    }

    #[getter]
    fn k_qubits(&self) -> usize {
        self.inner.k_qubits()
    }

    fn rows(&self) -> Vec<Vec<Complex64>> {
        self.inner.entries().chunks(self.inner.dim()).map(<[_]>::to_vec).collect()
    }

    fn unitarity_error(&self) -> f64 {
        self.inner.unitarity_error()
    }

    fn __str__(&self) -> String {
        self.inner.render_text()
    }
}

/// Haar-random unitary on `k_qubits` drawn from stream `(seed, stream)`.
#[pyfunction]
#[pyo3(signature = (k_qubits, seed, stream=0))]
pub fn haar_random_unitary(k_qubits: usize, seed: u64, stream: u64) -> PyResult<PyUnitaryMatrix> {
    let u = qreservoir::sim::haar_random_unitary(k_qubits, &mut RngStream::new(seed, stream)).map_err(to_py)?;
    Ok(u.into())
}

#[pyclass(name = "StateVector", module = "qreservoir_py")]
pub struct PyStateVector {
    inner: StateVector,
}

#[pymethods]
impl PyStateVector {
    /// `|0…0⟩` on `n_qubits`.
    #[new]
    fn new(n_qubits: usize) -> PyResult<Self> {
        Ok(Self {
            inner: zero_state(n_qubits).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_amplitudes(amps: Vec<Complex64>) -> PyResult<Self> {
        Ok(Self {
            inner: StateVector::from_amplitudes(amps).map_err(to_py)?,
        })
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits()
    }

    fn amplitudes(&self) -> Vec<Complex64> {
        self.inner.amplitudes().to_vec()
    }

    fn apply_unitary(&mut self, u: &PyUnitaryMatrix, targets: Vec<usize>) -> PyResult<()> {
        self.inner.apply_unitary(&u.inner, &targets).map_err(to_py)
    }

    fn born_probabilities(&self, qubits: Vec<usize>) -> PyResult<Vec<f64>> {
        self.inner.born_probabilities(&qubits).map_err(to_py)
    }

    fn measure(&mut self, qubits: Vec<usize>, rng: &mut PyRngStream) -> PyResult<Vec<u8>> {
        self.inner.measure(&qubits, &mut rng.inner).map_err(to_py)
    }

    fn reset(&mut self, qubit: usize, rng: &mut PyRngStream) -> PyResult<()> {
        self.inner.reset(qubit, &mut rng.inner).map_err(to_py)
    }

    fn prepare(&mut self, qubits: Vec<usize>, target: Vec<Complex64>, rng: &mut PyRngStream) -> PyResult<()> {
        self.inner.prepare(&qubits, &target, &mut rng.inner).map_err(to_py)
    }

    fn apply_depolarizing(&mut self, qubit: usize, p: f64, rng: &mut PyRngStream) -> PyResult<()> {
        self.inner.apply_depolarizing(qubit, p, &mut rng.inner).map_err(to_py)
    }

    fn norm_sqr(&self) -> f64 {
        self.inner.norm_sqr()
    }

    fn __str__(&self) -> String {
        self.inner.render_text()
    }
}
