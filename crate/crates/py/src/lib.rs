use pyo3::prelude::*;

#[pymodule]
fn hfb_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
