use pyo3::prelude::*;

#[pymodule]
fn nlgm_py(_m: &Bound<PyModule>) -> PyResult<()> { Ok(()) }
