use num_complex::Complex64;
use pyo3::exceptions::PyRuntimeError;
use pyo3::prelude::*;

use qreservoir::circuit::{render_text, Circuit, CircuitBuilder, ExecOptions, ShotTable};

use crate::sim::PyUnitaryMatrix;
use crate::to_py;

/// Instruction builder handed to reservoir hooks. Methods return the
/// builder, so calls chain.
#[pyclass(name = "CircuitBuilder", module = "qreservoir_py")]
pub struct PyCircuitBuilder {
    pub(crate) inner: Option<CircuitBuilder>,
}

impl PyCircuitBuilder {
    fn get(&mut self) -> PyResult<&mut CircuitBuilder> {
        self.inner
            .as_mut()
            .ok_or_else(|| PyRuntimeError::new_err("builder is no longer usable"))
    }
}

macro_rules! chain {
    ($slf:ident, $call:expr) => {{
        let b = $slf.get()?;
        #[allow(clippy::redundant_closure_call)]
        ($call)(b).map_err(to_py)?;
        Ok($slf)
    }};
}

#[pymethods]
impl PyCircuitBuilder {
    #[new]
    fn new(n_qubits: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Some(CircuitBuilder::new(n_qubits).map_err(to_py)?),
        })
    }

    #[getter]
    fn n_qubits(&mut self) -> PyResult<usize> {
        Ok(self.get()?.n_qubits())
    }

    #[getter]
    fn n_clbits(&mut self) -> PyResult<usize> {
        Ok(self.get()?.n_clbits())
    }

    fn qubits(&mut self) -> PyResult<Vec<usize>> {
        Ok(self.get()?.qubits())
    }

    #[pyo3(signature = (u, targets, label="U"))]
    fn add_unitary<'py>(
        mut slf: PyRefMut<'py, Self>,
        u: &PyUnitaryMatrix,
        targets: Vec<usize>,
        label: &str,
    ) -> PyResult<PyRefMut<'py, Self>> {
        chain!(slf, |b: &mut CircuitBuilder| b.add_shared_unitary(label, u.inner.clone(), &targets).map(|_| ()))
    }

    fn add_h(mut slf: PyRefMut<'_, Self>, target: usize) -> PyResult<PyRefMut<'_, Self>> {
        chain!(slf, |b: &mut CircuitBuilder| b.add_h(target).map(|_| ()))
    }

    fn add_x(mut slf: PyRefMut<'_, Self>, target: usize) -> PyResult<PyRefMut<'_, Self>> {
        chain!(slf, |b: &mut CircuitBuilder| b.add_x(target).map(|_| ()))
    }

    fn add_ry(mut slf: PyRefMut<'_, Self>, theta: f64, target: usize) -> PyResult<PyRefMut<'_, Self>> {
        chain!(slf, |b: &mut CircuitBuilder| b.add_ry(theta, target).map(|_| ()))
    }

    fn add_rz(mut slf: PyRefMut<'_, Self>, theta: f64, target: usize) -> PyResult<PyRefMut<'_, Self>> {
        chain!(slf, |b: &mut CircuitBuilder| b.add_rz(theta, target).map(|_| ()))
    }

    fn add_cx(mut slf: PyRefMut<'_, Self>, control: usize, target: usize) -> PyResult<PyRefMut<'_, Self>> {
        chain!(slf, |b: &mut CircuitBuilder| b.add_cx(control, target).map(|_| ()))
    }

    /// Reset `targets`, then prepare `amps` on them.
    fn add_prepare(mut slf: PyRefMut<'_, Self>, amps: Vec<Complex64>, targets: Vec<usize>) -> PyResult<PyRefMut<'_, Self>> {
        chain!(slf, |b: &mut CircuitBuilder| b.add_prepare(&amps, &targets).map(|_| ()))
    }

    /// Measure `qubits` into fresh clbits.
    fn measure(mut slf: PyRefMut<'_, Self>, qubits: Vec<usize>) -> PyResult<PyRefMut<'_, Self>> {
        chain!(slf, |b: &mut CircuitBuilder| b.measure(&qubits).map(|_| ()))
    }

    fn measure_all(mut slf: PyRefMut<'_, Self>) -> PyResult<PyRefMut<'_, Self>> {
        chain!(slf, |b: &mut CircuitBuilder| b.measure_all().map(|_| ()))
    }

    fn add_noise(mut slf: PyRefMut<'_, Self>, p: f64, targets: Vec<usize>) -> PyResult<PyRefMut<'_, Self>> {
        chain!(slf, |b: &mut CircuitBuilder| b.add_noise(p, &targets).map(|_| ()))
    }

    /// Finishes and validates the circuit; the builder is consumed.
    fn build(&mut self) -> PyResult<PyCircuit> {
        let b = self
            .inner
            .take()
            .ok_or_else(|| PyRuntimeError::new_err("builder is no longer usable"))?;
        let mut circuit = b.build();
        circuit.validate().map_err(to_py)?;
        Ok(PyCircuit { inner: circuit })
    }
}

#[pyclass(name = "Circuit", module = "qreservoir_py", frozen)]
pub struct PyCircuit {
    inner: Circuit,
}

#[pymethods]
impl PyCircuit {
    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits()
    }

    #[getter]
    fn n_clbits(&self) -> usize {
        self.inner.n_clbits()
    }

    fn __len__(&self) -> usize {
        self.inner.instructions().len()
    }

    fn __str__(&self) -> String {
        render_text(&self.inner)
    }
}

#[pyclass(name = "ShotTable", module = "qreservoir_py", frozen)]
pub struct PyShotTable {
    inner: ShotTable,
}

#[pymethods]
impl PyShotTable {
    #[getter]
    fn shots(&self) -> usize {
        self.inner.shots()
    }

    #[getter]
    fn counts(&self) -> Vec<u64> {
        self.inner.counts().to_vec()
    }

    fn mean(&self, clbit: usize) -> PyResult<f64> {
        if clbit >= self.inner.n_clbits() {
            return Err(pyo3::exceptions::PyIndexError::new_err(format!("no clbit {clbit}")));
        }
        Ok(self.inner.mean(clbit))
    }

    /// Per-shot bits, when recorded.
    fn raw(&self) -> Option<Vec<Vec<u8>>> {
        self.inner.raw().map(<[_]>::to_vec)
    }

    fn joint_counts(&self, clbits: Vec<usize>) -> PyResult<Vec<u64>> {
        self.inner.joint_counts(&clbits).map_err(to_py)
    }
}

/// Runs `shots` trajectories of `circuit`.
#[pyfunction]
#[pyo3(signature = (circuit, shots, seed=0, noise=None, keep_raw=false))]
pub fn execute(
    py: Python<'_>,
    circuit: &PyCircuit,
    shots: usize,
    seed: u64,
    noise: Option<f64>,
    keep_raw: bool,
) -> PyResult<PyShotTable> {
    let opts = ExecOptions::new(shots, seed).with_noise(noise).with_raw(keep_raw);
    let table = py.detach(|| qreservoir::circuit::execute(&circuit.inner, &opts)).map_err(to_py)?;
    Ok(PyShotTable { inner: table })
}
