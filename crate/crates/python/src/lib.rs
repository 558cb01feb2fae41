//! Python bindings: grid fields, stencil filters, the convolution kernels, the
//! cross-section loader and the config-driven solver.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nconv::config::RunConfig;
use nconv::discretisation::{build_convfem_filter, build_fv_filter};
use nconv::field::{conv_apply as conv_apply_rs, hadamard_product, norms, upsample2x as upsample2x_rs};
use nconv::run::{run_solve, with_output_dir};
use nconv::{GridField, StencilFilter};

create_exception!(pynconv, NconvError, PyException);

fn to_py(e: nconv::Error) -> PyErr {
    NconvError::new_err(e.to_string())
}

/// Halo-padded 2-D grid field. Interior values are given row by row (`j`, then `i`).
#[pyclass(name = "Field", module = "pynconv", from_py_object)]
#[derive(Clone)]
struct PyField {
    inner: GridField,
}

#[pymethods]
impl PyField {
    #[new]
    #[pyo3(signature = (nx, ny, halo=1, values=None))]
    fn new(nx: usize, ny: usize, halo: usize, values: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        let inner = match values {
            None => GridField::zeros(nx, ny, halo),
            Some(rows) => {
                if rows.len() != ny || rows.iter().any(|r| r.len() != nx) {
                    return Err(NconvError::new_err(format!("values must be {ny} rows of {nx}")));
                }
                GridField::from_interior(nx, ny, halo, &rows.concat()).map_err(to_py)?
            }
        };
        Ok(Self { inner })
    }

    #[getter]
    fn nx(&self) -> usize {
        self.inner.nx()
    }

    #[getter]
    fn ny(&self) -> usize {
        self.inner.ny()
    }

    #[getter]
    fn halo(&self) -> usize {
        self.inner.halo()
    }

    /// Value at padded indices `(i, j)`.
    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        self.check(i, j)?;
        Ok(self.inner.get(i, j))
    }

    fn set(&mut self, i: usize, j: usize, value: f64) -> PyResult<()> {
        self.check(i, j)?;
        self.inner.set(i, j, value);
        Ok(())
    }

    /// Interior values as a list of rows.
    fn interior(&self) -> Vec<Vec<f64>> {
        self.inner.interior_values().chunks(self.inner.nx()).map(<[f64]>::to_vec).collect()
    }

    /// `(linf, l2, sum)` over the interior.
    fn norms(&self) -> (f64, f64, f64) {
        let n = norms(&self.inner);
        (n.linf, n.l2, n.sum)
    }

    fn __repr__(&self) -> String {
        format!("Field(nx={}, ny={}, halo={})", self.inner.nx(), self.inner.ny(), self.inner.halo())
    }
}

impl PyField {
    fn check(&self, i: usize, j: usize) -> PyResult<()> {
        if i < self.inner.nx_total() && j < self.inner.ny_total() {
            Ok(())
        } else {
            Err(pyo3::exceptions::PyIndexError::new_err(format!("({i}, {j}) is outside the padded grid")))
        }
    }
}

/// Square stencil filter.
#[pyclass(name = "Filter", module = "pynconv", from_py_object)]
#[derive(Clone)]
struct PyFilter {
    inner: StencilFilter,
}

#[pymethods]
impl PyFilter {
    /// 3x3 finite-volume Laplacian filter.
    #[staticmethod]
    fn fv(dx: f64, dy: f64) -> PyResult<Self> {
        Ok(Self {
            inner: build_fv_filter(dx, dy).map_err(to_py)?,
        })
    }

    /// 5x5 ConvFEM filter on a square grid.
    #[staticmethod]
    fn convfem(dx: f64) -> PyResult<Self> {
        Ok(Self {
            inner: build_convfem_filter(dx).map_err(to_py)?,
        })
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    #[getter]
    fn center(&self) -> f64 {
        self.inner.center()
    }

    /// Weights as rows, `v = -r..=r` top to bottom.
    fn weights(&self) -> Vec<Vec<f64>> {
        self.inner.weights().chunks(self.inner.size()).map(<[f64]>::to_vec).collect()
    }
}

#[pyfunction]
fn conv_apply(py: Python<'_>, field: &PyField, filter: &PyFilter) -> PyResult<PyField> {
    let inner = py.detach(|| conv_apply_rs(&field.inner, &filter.inner)).map_err(to_py)?;
    Ok(PyField { inner })
}

/// Variable-coefficient diffusion operator `-div(D grad phi)` in convolution form.
#[pyfunction]
fn diffusion_apply(py: Python<'_>, phi: &PyField, d: &PyField, filter: &PyFilter) -> PyResult<PyField> {
    let inner = py
        .detach(|| nconv::discretisation::diffusion_apply(&phi.inner, &d.inner, &filter.inner))
        .map_err(to_py)?;
    Ok(PyField { inner })
}

#[pyfunction]
fn hadamard(a: &PyField, b: &PyField) -> PyResult<PyField> {
    Ok(PyField {
        inner: hadamard_product(&a.inner, &b.inner).map_err(to_py)?,
    })
}

/// 2x2 block average onto the coarse grid.
#[pyfunction]
fn restrict(fine: &PyField) -> PyResult<PyField> {
    Ok(PyField {
        inner: nconv::multigrid::restrict(&fine.inner).map_err(to_py)?,
    })
}

/// Piecewise-constant injection onto the fine grid.
#[pyfunction]
fn upsample2x(coarse: &PyField) -> PyField {
    PyField {
        inner: upsample2x_rs(&coarse.inner),
    }
}

/// Cross-section library as `{material: {quantity: values}}`.
#[pyfunction]
fn load_cross_sections<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let lib = nconv::geometry::load_cross_sections(path).map_err(to_py)?;
    let out = PyDict::new(py);
    for m in lib.materials() {
        let entry = PyDict::new(py);
        entry.set_item("sigma_a", &m.sigma_a)?;
        entry.set_item("sigma_s", &m.sigma_s)?;
        entry.set_item("nu", &m.nu)?;
        entry.set_item("sigma_f", &m.sigma_f)?;
        entry.set_item("chi", &m.chi)?;
        entry.set_item("d", &m.d)?;
        entry.set_item("fissile", m.is_fissile())?;
        out.set_item(&m.name, entry)?;
    }
    Ok(out)
}

/// Runs the multigrid pipeline for a config file and writes its outputs.
#[pyfunction]
#[pyo3(signature = (config, output_dir=None))]
fn solve<'py>(py: Python<'py>, config: PathBuf, output_dir: Option<PathBuf>) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = RunConfig::load(config).map_err(to_py)?;
    if let Some(dir) = output_dir {
        cfg = with_output_dir(&cfg, dir);
    }
    let (status, run) = py.detach(|| run_solve(&cfg)).map_err(to_py)?;
    let s = &run.state;
    let out = PyDict::new(py);
    out.set_item("k_eff", s.k_eff)?;
    out.set_item("converged", s.converged)?;
    out.set_item("exit_code", status.code())?;
    out.set_item("power_iterations", s.counters.power)?;
    out.set_item("keff_history", s.keff_history.iter().map(|(_, k)| *k).collect::<Vec<_>>())?;
    out.set_item("flux", s.phi.iter().map(|f| PyField { inner: f.clone() }).collect::<Vec<_>>())?;
    out.set_item("output_dir", cfg.output_dir)?;
    out.set_item("seconds", run.seconds)?;
    Ok(out)
}

#[pymodule]
fn pynconv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NconvError", m.py().get_type::<NconvError>())?;
    m.add_class::<PyField>()?;
    m.add_class::<PyFilter>()?;
    m.add_function(wrap_pyfunction!(conv_apply, m)?)?;
    m.add_function(wrap_pyfunction!(diffusion_apply, m)?)?;
    m.add_function(wrap_pyfunction!(hadamard, m)?)?;
    m.add_function(wrap_pyfunction!(restrict, m)?)?;
    m.add_function(wrap_pyfunction!(upsample2x, m)?)?;
    m.add_function(wrap_pyfunction!(load_cross_sections, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    Ok(())
}
