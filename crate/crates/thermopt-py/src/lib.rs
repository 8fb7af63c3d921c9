//! Python bindings for the main thermopt types and operations.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use thermopt::angles::{self, Branch, InvariantLevels};
use thermopt::control::{self, ControlBudget, PhasePoint};
use thermopt::dynamics::{self, ReducedHamiltonian, ShootingProblem};
use thermopt::gas::{self, GasSpec as CoreGasSpec, StatePoint};
use thermopt::maxent::{self, DiscreteMeasurement};
use thermopt::scenario;
use thermopt::virial;
use thermopt::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Validation(_) | Error::Infeasible(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn budget(delta: f64) -> PyResult<ControlBudget> {
    ControlBudget::new(delta).map_err(to_py_err)
}

fn levels(h1: f64, h2: f64) -> PyResult<InvariantLevels> {
    InvariantLevels::new(h1, h2).map_err(to_py_err)
}

fn phase(q: [f64; 4]) -> PhasePoint {
    PhasePoint::from_coords(q)
}

/// Gas model parameters.
#[pyclass(name = "GasSpec", frozen, from_py_object)]
#[derive(Clone)]
struct PyGasSpec {
    inner: CoreGasSpec,
}

#[pymethods]
impl PyGasSpec {
    #[staticmethod]
    fn ideal(n: f64, r: f64) -> PyResult<Self> {
        Ok(PyGasSpec {
            inner: CoreGasSpec::ideal(n, r).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn van_der_waals(n: f64, r: f64, a: f64, b: f64) -> PyResult<Self> {
        Ok(PyGasSpec {
            inner: CoreGasSpec::van_der_waals(n, r, a, b).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn virial_first_order(n: f64, r: f64, a: f64, b: f64) -> PyResult<Self> {
        Ok(PyGasSpec {
            inner: CoreGasSpec::virial_first_order(n, r, a, b).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner.kind {
            gas::GasKind::Ideal => "ideal",
            gas::GasKind::VanDerWaals => "vdw",
            gas::GasKind::VirialFirstOrder => "virial1",
        }
    }

    #[getter]
    fn n(&self) -> f64 {
        self.inner.n
    }

    #[getter]
    fn r(&self) -> f64 {
        self.inner.r
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }

    fn __repr__(&self) -> String {
        format!(
            "GasSpec(kind='{}', n={}, R={}, a={}, b={})",
            self.kind(),
            self.inner.n,
            self.inner.r,
            self.inner.a,
            self.inner.b
        )
    }
}

fn state_dict<'py>(py: Python<'py>, st: &StatePoint) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("e", st.e)?;
    d.set_item("v", st.v)?;
    d.set_item("p", st.p)?;
    d.set_item("T", st.t)?;
    d.set_item("s", st.s)?;
    d.set_item("gamma", st.gamma)?;
    Ok(d)
}

/// Ideal-gas state from specific energy and volume.
#[pyfunction]
fn state_ideal<'py>(
    py: Python<'py>,
    spec: &PyGasSpec,
    e: f64,
    v: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let st = gas::state_ideal(&spec.inner, e, v).map_err(to_py_err)?;
    state_dict(py, &st)
}

/// Van der Waals state from temperature and specific volume.
#[pyfunction]
fn state_vdw<'py>(
    py: Python<'py>,
    spec: &PyGasSpec,
    t: f64,
    v: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let st = gas::state_vdw(&spec.inner, t, v).map_err(to_py_err)?;
    state_dict(py, &st)
}

/// First-order virial state from temperature and specific volume.
#[pyfunction]
fn state_virial<'py>(
    py: Python<'py>,
    spec: &PyGasSpec,
    t: f64,
    v: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let st = gas::state_virial(&spec.inner, t, v).map_err(to_py_err)?;
    state_dict(py, &st)
}

/// True where the stability form kappa is negative definite. The point is
/// (e, v) for the ideal gas and (T, v) for the real-gas models.
#[pyfunction]
fn applicability(spec: &PyGasSpec, x: f64, y: f64) -> PyResult<bool> {
    let st = match spec.inner.kind {
        gas::GasKind::Ideal => gas::state_ideal(&spec.inner, x, y),
        gas::GasKind::VanDerWaals => gas::state_vdw(&spec.inner, x, y),
        gas::GasKind::VirialFirstOrder => gas::state_virial(&spec.inner, x, y),
    }
    .map_err(to_py_err)?;
    gas::applicability(&spec.inner, &st).map_err(to_py_err)
}

/// Process fields Y1, Y2 at (e, v), as ((e-comp, v-comp), (e-comp, v-comp)).
#[pyfunction]
fn process_fields(spec: &PyGasSpec, e: f64, v: f64) -> PyResult<((f64, f64), (f64, f64))> {
    let (y1, y2) = gas::process_fields(&spec.inner, e, v).map_err(to_py_err)?;
    Ok(((y1.coeff_e, y1.coeff_v), (y2.coeff_e, y2.coeff_v)))
}

/// Solves the minimal-information-gain problem; returns lambda, density,
/// the dual Hamiltonian and the info gain.
#[pyfunction]
#[pyo3(signature = (base_probs, random_vector, target, tol=1e-10))]
fn solve_maxent<'py>(
    py: Python<'py>,
    base_probs: Vec<f64>,
    random_vector: Vec<Vec<f64>>,
    target: Vec<f64>,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let m = DiscreteMeasurement::new(base_probs, random_vector, target).map_err(to_py_err)?;
    let sol = maxent::solve_lambda(&m, tol).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("lambda", sol.lambda.clone())?;
    d.set_item("density", sol.density.clone())?;
    d.set_item("hamiltonian", sol.hamiltonian)?;
    d.set_item("info_gain", sol.info_gain)?;
    Ok(d)
}

/// Chart change (e, v) -> (q1, q2).
#[pyfunction]
fn to_q(spec: &PyGasSpec, e: f64, v: f64) -> PyResult<(f64, f64)> {
    control::to_q(&spec.inner, e, v).map_err(to_py_err)
}

/// Inverse chart change (q1, q2) -> (e, v).
#[pyfunction]
fn from_q(spec: &PyGasSpec, q1: f64, q2: f64) -> PyResult<(f64, f64)> {
    control::from_q(&spec.inner, q1, q2).map_err(to_py_err)
}

/// The reduced Hamiltonian H(q, lambda) at phase point [q1, q2, l1, l2].
#[pyfunction]
fn reduced_hamiltonian(spec: &PyGasSpec, delta: f64, q: [f64; 4]) -> PyResult<f64> {
    control::reduced_hamiltonian(&spec.inner, &budget(delta)?, &phase(q)).map_err(to_py_err)
}

/// Maximizing boundary parameter and its degeneracy flag.
#[pyfunction]
fn tau_star(spec: &PyGasSpec, delta: f64, q: [f64; 4]) -> PyResult<(f64, bool)> {
    let ts = control::tau_star(&spec.inner, &budget(delta)?, &phase(q)).map_err(to_py_err)?;
    Ok((ts.tau, ts.degenerate))
}

/// Integrates the reduced canonical flow; returns sample times, states,
/// conserved-quantity drifts and the accumulated work.
#[pyfunction]
#[pyo3(signature = (spec, delta, start, t0, tol=1e-10))]
fn flow<'py>(
    py: Python<'py>,
    spec: &PyGasSpec,
    delta: f64,
    start: [f64; 4],
    t0: f64,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let h = ReducedHamiltonian {
        spec: spec.inner,
        budget: budget(delta)?,
    };
    let mut traj = dynamics::flow(&h, phase(start), t0, tol).map_err(to_py_err)?;
    let work = traj.attach_work(&spec.inner).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("t", traj.times.clone())?;
    let states: Vec<[f64; 4]> = traj.states.iter().map(|s| s.coords()).collect();
    d.set_item("states", states)?;
    d.set_item("h_drift", traj.h_drift)?;
    d.set_item("g_drift", traj.g_drift)?;
    d.set_item("work", work)?;
    d.set_item("truncated", traj.truncated)?;
    Ok(d)
}

/// Shooting solve of the two-endpoint problem in (e, v).
#[pyfunction]
#[pyo3(signature = (spec, delta, start, end, t0, tol=1e-8))]
fn shoot<'py>(
    py: Python<'py>,
    spec: &PyGasSpec,
    delta: f64,
    start: (f64, f64),
    end: (f64, f64),
    t0: f64,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let problem = ShootingProblem {
        x_start: start,
        x_end: end,
        t0,
        spec: spec.inner,
        budget: budget(delta)?,
    };
    let result = dynamics::shoot(&problem, tol).map_err(to_py_err)?;
    let mut traj = result.trajectory;
    let work = traj.attach_work(&spec.inner).map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("lambda0", vec![result.lambda0.0, result.lambda0.1])?;
    d.set_item("residual", result.residual)?;
    d.set_item("work", work)?;
    d.set_item("converged_count", result.converged_count)?;
    Ok(d)
}

/// Connected components of the invariant manifold at levels (h1, h2).
#[pyfunction]
fn component_count(spec: &PyGasSpec, delta: f64, h1: f64, h2: f64) -> PyResult<u8> {
    angles::component_count(&spec.inner, &budget(delta)?, &levels(h1, h2)?).map_err(to_py_err)
}

/// Positive roots of the discriminant D(q1).
#[pyfunction]
fn singular_set(spec: &PyGasSpec, delta: f64, h1: f64, h2: f64) -> PyResult<Vec<f64>> {
    angles::singular_set(&spec.inner, &budget(delta)?, &levels(h1, h2)?).map_err(to_py_err)
}

/// Angle variable Omega1 between q1_ref and q1 (branch +-1).
#[pyfunction]
fn omega1(
    spec: &PyGasSpec,
    delta: f64,
    h1: f64,
    h2: f64,
    q1_ref: f64,
    q1: f64,
    branch: i8,
) -> PyResult<f64> {
    let br = if branch >= 0 {
        Branch::Plus
    } else {
        Branch::Minus
    };
    angles::omega1(
        &spec.inner,
        &budget(delta)?,
        &levels(h1, h2)?,
        q1_ref,
        q1,
        br,
    )
    .map_err(to_py_err)
}

/// Closed-form flow solution through angle variables.
#[pyfunction]
fn solve_by_angles(
    spec: &PyGasSpec,
    delta: f64,
    h1: f64,
    h2: f64,
    start: [f64; 4],
    t: f64,
) -> PyResult<[f64; 4]> {
    let p = angles::solve_by_angles(
        &spec.inner,
        &budget(delta)?,
        &levels(h1, h2)?,
        &phase(start),
        t,
    )
    .map_err(to_py_err)?;
    Ok(p.coords())
}

/// Log-log slope of |[H_vdW, G_vdW]| against epsilon (corrected) or
/// |[H_vdW, G]| (uncorrected).
#[pyfunction]
#[pyo3(signature = (spec, delta, h1, h2, eps, corrected=true))]
fn commutation_slope<'py>(
    py: Python<'py>,
    spec: &PyGasSpec,
    delta: f64,
    h1: f64,
    h2: f64,
    eps: Vec<f64>,
    corrected: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let check = virial::commutation_order_check(
        &spec.inner,
        &budget(delta)?,
        &levels(h1, h2)?,
        &eps,
        [1.0, 1.0],
        corrected,
    )
    .map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("direction", check.direction.to_vec())?;
    d.set_item("eps", check.eps.clone())?;
    d.set_item("bracket_norms", check.bracket_norms.clone())?;
    d.set_item("slope", check.slope)?;
    d.set_item("floor_limited", check.floor_limited)?;
    Ok(d)
}

/// Runs a scenario JSON file exactly like the CLI (quiet).
#[pyfunction]
fn run_scenario_file(path: &str) -> PyResult<()> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PyValueError::new_err(format!("cannot read {path}: {e}")))?;
    let s = scenario::parse_scenario(&text).map_err(to_py_err)?;
    scenario::run(&s, &scenario::Progress { quiet: true }).map_err(to_py_err)
}

#[pymodule]
fn _thermopt(_py: Python, m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGasSpec>()?;
    m.add_function(wrap_pyfunction!(state_ideal, m)?)?;
    m.add_function(wrap_pyfunction!(state_vdw, m)?)?;
    m.add_function(wrap_pyfunction!(state_virial, m)?)?;
    m.add_function(wrap_pyfunction!(applicability, m)?)?;
    m.add_function(wrap_pyfunction!(process_fields, m)?)?;
    m.add_function(wrap_pyfunction!(solve_maxent, m)?)?;
    m.add_function(wrap_pyfunction!(to_q, m)?)?;
    m.add_function(wrap_pyfunction!(from_q, m)?)?;
    m.add_function(wrap_pyfunction!(reduced_hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(tau_star, m)?)?;
    m.add_function(wrap_pyfunction!(flow, m)?)?;
    m.add_function(wrap_pyfunction!(shoot, m)?)?;
    m.add_function(wrap_pyfunction!(component_count, m)?)?;
    m.add_function(wrap_pyfunction!(singular_set, m)?)?;
    m.add_function(wrap_pyfunction!(omega1, m)?)?;
    m.add_function(wrap_pyfunction!(solve_by_angles, m)?)?;
    m.add_function(wrap_pyfunction!(commutation_slope, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario_file, m)?)?;
    Ok(())
}
