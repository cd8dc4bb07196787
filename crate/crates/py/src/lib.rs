//! Python bindings: statevector, circuits, reservoirs with Python hooks,
//! ridge readout, codecs and the experiment runner.

mod circuit;
mod reservoir;
mod sim;
mod readout;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

pub(crate) fn to_py(e: qreservoir::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pymodule]
fn qreservoir_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<sim::PyRngStream>()?;
    m.add_class::<sim::PyStateVector>()?;
    m.add_class::<sim::PyUnitaryMatrix>()?;
    m.add_function(wrap_pyfunction!(sim::haar_random_unitary, m)?)?;
    m.add_class::<circuit::PyCircuitBuilder>()?;
    m.add_class::<circuit::PyCircuit>()?;
    m.add_class::<circuit::PyShotTable>()?;
    m.add_function(wrap_pyfunction!(circuit::execute, m)?)?;
    m.add_class::<reservoir::PyStatic>()?;
    m.add_class::<reservoir::PyIncremental>()?;
    m.add_class::<readout::PyReadoutModel>()?;
    m.add_class::<readout::PyAlphabet>()?;
    m.add_function(wrap_pyfunction!(readout::fit_ridge, m)?)?;
    m.add_function(wrap_pyfunction!(readout::encode_angle, m)?)?;
    m.add_function(wrap_pyfunction!(readout::run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(readout::dump_circuit, m)?)?;
    Ok(())
}
