//! Python bindings: a Szegő-kernel solver on JSON-described domains and the
//! JSON experiment runner.

use num_complex::Complex64;
use planar_invariants::config::ExperimentConfig;
use planar_invariants::geometry::{DomainSpec, PlanarDomain};
use planar_invariants::szego::SzegoSystem;
use planar_invariants::Error;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(planar_invariants_py, InvariantViolation, PyRuntimeError);
create_exception!(planar_invariants_py, DegradedAccuracy, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvariantViolation(_) => InvariantViolation::new_err(e.to_string()),
        Error::Degraded { .. } => DegradedAccuracy::new_err(e.to_string()),
        Error::Resolution { .. } | Error::NoConvergence { .. } | Error::Io(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_domain(spec_json: &str) -> PyResult<PlanarDomain> {
    let spec: DomainSpec = serde_json::from_str(spec_json)
        .map_err(|e| PyValueError::new_err(format!("domain spec: {e}")))?;
    PlanarDomain::from_spec(&spec).map_err(to_py)
}

/// Kerzman–Stein solver on a fixed domain and trapezoid resolution.
#[pyclass(frozen)]
struct Solver {
    sys: SzegoSystem,
}

#[pymethods]
impl Solver {
    /// `domain` is a JSON domain spec, e.g. `{"kind": "ellipse", "a": 1.3, "b": 1.0}`.
    #[new]
    #[pyo3(signature = (domain, nodes_per_curve = 256))]
    fn new(py: Python<'_>, domain: &str, nodes_per_curve: usize) -> PyResult<Self> {
        let d = parse_domain(domain)?;
        let sys = py
            .detach(|| SzegoSystem::build(&d, nodes_per_curve))
            .map_err(to_py)?;
        Ok(Self { sys })
    }

    #[getter]
    fn nodes(&self) -> usize {
        self.sys.nodes().len()
    }

    fn contains(&self, z: Complex64) -> bool {
        self.sys.domain().contains(z)
    }

    fn szego(&self, z: Complex64, a: Complex64) -> PyResult<Complex64> {
        self.sys.szego(z, a).map(|v| v.value).map_err(to_py)
    }

    fn garabedian(&self, z: Complex64, a: Complex64) -> PyResult<Complex64> {
        self.sys.garabedian(z, a).map(|v| v.value).map_err(to_py)
    }

    fn ahlfors(&self, z: Complex64, a: Complex64) -> PyResult<Complex64> {
        self.sys.ahlfors(z, a).map(|v| v.value).map_err(to_py)
    }

    /// Carathéodory density `2π S(z, z)`.
    fn caratheodory(&self, z: Complex64) -> PyResult<f64> {
        self.sys.caratheodory(z).map(|v| v.value).map_err(to_py)
    }

    /// Whether `z` lies in the near-boundary band where derivatives lose accuracy.
    fn is_degraded(&self, z: Complex64) -> bool {
        self.sys.accuracy_at(z).is_degraded()
    }
}

/// Runs a JSON experiment configuration; returns a dict with `columns`,
/// `rows`, `extrapolated` (or None) and `metadata`.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::from_json(config).map_err(to_py)?;
    let table = py
        .detach(|| planar_invariants::config::run(&cfg))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("columns", &table.columns)?;
    out.set_item("rows", &table.rows)?;
    out.set_item("extrapolated", &table.extrapolated)?;
    let meta = serde_json::to_string(&table.metadata)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    out.set_item(
        "metadata",
        py.import("json")?.call_method1("loads", (meta,))?,
    )?;
    Ok(out)
}

#[pymodule]
fn planar_invariants_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Solver>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add(
        "InvariantViolation",
        m.py().get_type::<InvariantViolation>(),
    )?;
    m.add("DegradedAccuracy", m.py().get_type::<DegradedAccuracy>())?;
    Ok(())
}
