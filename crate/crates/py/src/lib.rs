//! Python bindings. Structured results come back as plain dicts and lists
//! decoded from the same JSON the CLI writes.

use mars_core::config::{parse_str, AssemblyDoc, Params};
use mars_core::model::DEFAULT_PITCH;
use mars_core::planner::{plan_reconfiguration, PlanMode};
use mars_core::sim::run_scenario;
use mars_core::sweep::{sweep as run_sweep, FaultFamily};
use mars_core::{controllability_margin, Fault, Scenario, SimSettings, UnitGeometry};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Assembly of quadrotor units on a square grid.
#[pyclass(name = "Assembly", module = "mars_py", frozen)]
struct PyAssembly {
    inner: mars_core::Assembly,
}

#[pymethods]
impl PyAssembly {
    /// `cols x rows` rectangle of healthy units, ids row-major from 1.
    #[staticmethod]
    #[pyo3(signature = (cols, rows, pitch = DEFAULT_PITCH))]
    fn grid(cols: i32, rows: i32, pitch: f64) -> PyResult<Self> {
        let inner = mars_core::Assembly::grid(cols, rows, pitch, UnitGeometry::default()).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Parses an assembly document (the CLI input format).
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let doc: AssemblyDoc = parse_str(text).map_err(value_err)?;
        let inner = doc.build(&Params::bundled()).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&AssemblyDoc::from_assembly(&self.inner)).map_err(value_err)
    }

    /// Copy with the rotor efficiencies of `unit` replaced; `None` fails
    /// the whole unit.
    #[pyo3(signature = (unit, efficiencies = None))]
    fn with_fault(&self, unit: u32, efficiencies: Option<[f64; 4]>) -> PyResult<Self> {
        let fault = match efficiencies {
            Some(e) => Fault { unit, efficiencies: e },
            None => Fault::complete(unit),
        };
        let inner = mars_core::apply_fault(&self.inner, &fault).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn ids(&self) -> Vec<u32> {
        self.inner.ids()
    }

    #[getter]
    fn cells(&self) -> Vec<(i32, i32)> {
        self.inner.units().iter().map(|u| (u.cell.col, u.cell.row)).collect()
    }

    #[getter]
    fn faulty(&self) -> Vec<u32> {
        self.inner.faulty_units().iter().map(|u| u.id).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Assembly(units={}, faulty={:?})", self.inner.len(), self.faulty())
    }
}

/// `{"cm", "controllable", "rank_ok", "degenerate"}`.
#[pyfunction]
#[pyo3(name = "controllability_margin")]
fn controllability_margin_of<'py>(py: Python<'py>, assembly: &PyAssembly) -> PyResult<Bound<'py, PyAny>> {
    let report = controllability_margin(&assembly.inner).map_err(value_err)?;
    to_py(py, &report.summary())
}

/// Reconfiguration plan for an assembly with one faulty unit; `mode` is
/// `"full"` or `"partial"`.
#[pyfunction]
#[pyo3(signature = (assembly, mode = "partial"))]
fn plan<'py>(py: Python<'py>, assembly: &PyAssembly, mode: &str) -> PyResult<Bound<'py, PyAny>> {
    let mode = match mode {
        "full" => PlanMode::Full,
        "partial" => PlanMode::Partial,
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let out = plan_reconfiguration(&assembly.inner, mode).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let dict = to_py(py, &out.plan)?;
    dict.set_item("target", to_py(py, &AssemblyDoc::from_assembly(&out.target.assembly))?)?;
    dict.set_item("target_cm", out.target.cm)?;
    dict.set_item("carrier", out.carrier.map(|c| c.assembly.ids()))?;
    dict.set_item("cm_evaluations", out.cm_evaluations)?;
    Ok(dict)
}

/// Margin table over a fault family given as JSON, e.g. `"single_unit"`
/// or `{"single_rotor": {"unit": 4}}`.
#[pyfunction]
fn sweep<'py>(py: Python<'py>, assembly: &PyAssembly, family: &str) -> PyResult<Bound<'py, PyAny>> {
    let family: FaultFamily = serde_json::from_str(family).map_err(value_err)?;
    let rows = run_sweep(&assembly.inner, &family).map_err(value_err)?;
    to_py(py, &rows)
}

/// Closed-loop run of one scenario. `settings` is a JSON object overriding
/// the bundled simulation settings field by field.
#[pyfunction]
#[pyo3(signature = (assembly, scenario, settings = None))]
fn simulate<'py>(
    py: Python<'py>,
    assembly: &PyAssembly,
    scenario: &str,
    settings: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let scenario: Scenario = serde_json::from_value(serde_json::Value::String(scenario.into())).map_err(value_err)?;
    let settings: SimSettings = match settings {
        Some(text) => serde_json::from_str(text).map_err(value_err)?,
        None => Params::bundled().simulation,
    };
    let result = py
        .detach(|| run_scenario(&assembly.inner, scenario, &settings))
        .map_err(value_err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("rmse", result.rmse.to_vec())?;
    dict.set_item("rmse_total", result.rmse_total)?;
    dict.set_item("crashed", result.crashed)?;
    dict.set_item("crash_time", result.crash_time)?;
    dict.set_item("saturation_fraction", result.saturation_fraction)?;
    dict.set_item("steps", result.steps)?;
    dict.set_item("trace_t", result.trace.iter().map(|p| p.t).collect::<Vec<_>>())?;
    dict.set_item("trace_x", result.trace.iter().map(|p| p.x.to_vec()).collect::<Vec<_>>())?;
    Ok(dict.into_any())
}

#[pymodule]
fn mars_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAssembly>()?;
    m.add_function(wrap_pyfunction!(controllability_margin_of, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
