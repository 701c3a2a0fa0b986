//! Python bindings: the designers, exact propagation, fidelity profiles,
//! PMP utilities and the GRAPE optimizer.
//!
//! Targets are x-rotations throughout; an ensemble is a list of
//! `(offset, target_phi)` pairs with `target_phi = 0` meaning the
//! identity.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use spinctrl::design;
use spinctrl::grape::{self, GrapeConfig};
use spinctrl::pmp;
use spinctrl::propagation::{self, SpinEnsemble};
use spinctrl::so3::{fidelity, rot_exp, Rotation};

fn err(e: spinctrl::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn x_rotation(phi: f64) -> Rotation {
    rot_exp([1.0, 0.0, 0.0], phi)
}

/// A piecewise-constant control with a global amplitude bound.
#[pyclass(name = "ControlField", from_py_object)]
#[derive(Clone)]
struct PyControlField {
    inner: propagation::ControlField,
}

#[pymethods]
impl PyControlField {
    /// `segments` is a list of `(amplitude, duration)` pairs.
    #[new]
    fn new(omega0: f64, segments: Vec<(f64, f64)>) -> PyResult<Self> {
        let segments = segments
            .into_iter()
            .map(|(amplitude, duration)| propagation::Segment { amplitude, duration })
            .collect();
        Ok(PyControlField {
            inner: propagation::ControlField::new(omega0, segments).map_err(err)?,
        })
    }

    #[getter]
    fn omega0(&self) -> f64 {
        self.inner.bound
    }

    #[getter]
    fn segments(&self) -> Vec<(f64, f64)> {
        self.inner
            .segments
            .iter()
            .map(|s| (s.amplitude, s.duration))
            .collect()
    }

    fn total_duration(&self) -> f64 {
        self.inner.total_duration()
    }

    /// Exact propagator at the given offset, as a row-major 3x3 matrix.
    fn propagate(&self, offset: f64) -> [[f64; 3]; 3] {
        *propagation::propagate(&self.inner, offset).matrix()
    }

    /// `F(offset) = || U(offset) - X_target_phi ||^2`.
    fn fidelity(&self, offset: f64, target_phi: f64) -> f64 {
        fidelity(
            &propagation::propagate(&self.inner, offset),
            &x_rotation(target_phi),
        )
    }

    /// Samples `F` over the offsets; returns `(offset, F)` pairs.
    fn profile(&self, target_phi: f64, offsets: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
        let p = propagation::fidelity_profile(&self.inner, &x_rotation(target_phi), &offsets)
            .map_err(err)?;
        Ok(p.samples)
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("field serializes")
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: propagation::ControlField =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(err)?;
        Ok(PyControlField { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "ControlField(omega0={}, {} segments, T={:.6})",
            self.inner.bound,
            self.inner.segments.len(),
            self.inner.total_duration()
        )
    }
}

/// Designer output: field, total time, identity offsets, resonance
/// curvature, optional note.
#[pyclass(name = "DesignReport")]
struct PyDesignReport {
    inner: design::DesignReport,
}

#[pymethods]
impl PyDesignReport {
    #[getter]
    fn field(&self) -> PyControlField {
        PyControlField { inner: self.inner.field.clone() }
    }

    #[getter]
    fn total_time(&self) -> f64 {
        self.inner.total_time
    }

    #[getter]
    fn identity_offsets(&self) -> Vec<f64> {
        self.inner.identity_offsets.clone()
    }

    #[getter]
    fn curvature_at_zero(&self) -> f64 {
        self.inner.curvature_at_zero
    }

    #[getter]
    fn note(&self) -> Option<String> {
        self.inner.note.clone()
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("report serializes")
    }

    fn __repr__(&self) -> String {
        format!(
            "DesignReport(T={:.6}, curvature_at_zero={:.3e})",
            self.inner.total_time, self.inner.curvature_at_zero
        )
    }
}

/// Offset boundary between the selective and robust regimes.
#[pyfunction]
fn delta0(phi: f64, omega0: f64) -> PyResult<f64> {
    design::delta0(phi, omega0).map_err(err)
}

/// Time-optimal selective singular pulse; returns `(omega_s, t_s, field)`.
#[pyfunction]
fn design_selective(phi: f64, delta1: f64, omega0: f64) -> PyResult<(f64, f64, PyControlField)> {
    let d = design::design_selective(phi, delta1, omega0).map_err(err)?;
    let field = d.field(omega0).map_err(err)?;
    Ok((d.omega_s, d.t_s, PyControlField { inner: field }))
}

fn family_params(
    n: u32,
    k: u32,
    alpha: f64,
    phi: f64,
    omega0: f64,
    first_sign: Option<f64>,
) -> design::RobustFamilyParams {
    design::RobustFamilyParams { n, k, alpha, phi, omega0, first_sign }
}

/// Robust one-switch `(n, k)` family.
#[pyfunction]
#[pyo3(signature = (n, k, phi, omega0=1.0, first_sign=None))]
fn design_robust_one_switch(
    n: u32,
    k: u32,
    phi: f64,
    omega0: f64,
    first_sign: Option<f64>,
) -> PyResult<PyDesignReport> {
    design::design_robust_one_switch(&family_params(n, k, 1.0, phi, omega0, first_sign))
        .map(|inner| PyDesignReport { inner })
        .map_err(err)
}

/// Robust two-switch `(n, k, alpha)` family.
#[pyfunction]
#[pyo3(signature = (n, k, phi, alpha=1.0, omega0=1.0, first_sign=None))]
fn design_robust_two_switch(
    n: u32,
    k: u32,
    phi: f64,
    alpha: f64,
    omega0: f64,
    first_sign: Option<f64>,
) -> PyResult<PyDesignReport> {
    design::design_robust_two_switch(&family_params(n, k, alpha, phi, omega0, first_sign))
        .map(|inner| PyDesignReport { inner })
        .map_err(err)
}

/// Locally robust two-bang pair; returns `(report, delta2)`.
#[pyfunction]
#[pyo3(signature = (phi, delta1, omega0=1.0))]
fn design_locally_robust_pair(
    phi: f64,
    delta1: f64,
    omega0: f64,
) -> PyResult<(PyDesignReport, f64)> {
    let (inner, delta2) =
        design::design_locally_robust_pair(phi, omega0, delta1).map_err(err)?;
    Ok((PyDesignReport { inner }, delta2))
}

/// Heuristic duration bound for the five-offset locally robust problem.
#[pyfunction]
fn heuristic_time_bound(phi: f64, delta1: f64, delta2: f64) -> PyResult<f64> {
    design::heuristic_time_bound(phi, delta1, delta2).map_err(err)
}

/// Regular bang duration from the switching-function parameters.
#[pyfunction]
fn next_bang_duration(a: f64, omega: f64) -> PyResult<f64> {
    let p = pmp::SwitchParam::new(a, omega).map_err(err)?;
    pmp::next_bang_duration(&p).map_err(err)
}

/// First `k_max` singular-crossing times of the switching function.
#[pyfunction]
#[pyo3(signature = (a, omega, k_max=4))]
fn singular_crossing_times(a: f64, omega: f64, k_max: u32) -> PyResult<Vec<f64>> {
    let p = pmp::SwitchParam::new(a, omega).map_err(err)?;
    pmp::singular_crossing_times(&p, k_max).map_err(err)
}

fn build_ensemble(targets: Vec<(f64, f64)>) -> PyResult<SpinEnsemble> {
    SpinEnsemble::new(
        targets
            .into_iter()
            .map(|(offset, phi)| (offset, x_rotation(phi)))
            .collect(),
    )
    .map_err(err)
}

/// Ensemble cost `C = (1/3N) sum || U(offset) - X_phi ||^2` of a field
/// against `(offset, target_phi)` pairs.
#[pyfunction]
fn ensemble_cost(field: &PyControlField, targets: Vec<(f64, f64)>) -> PyResult<f64> {
    Ok(propagation::ensemble_cost(&field.inner, &build_ensemble(targets)?))
}

/// GRAPE minimization of the ensemble cost over bounded piecewise-constant
/// fields; returns `(field, cost, iterations)`.
#[pyfunction]
#[pyo3(signature = (targets, duration, omega0=1.0, segments=64, restarts=5,
                    max_iters=500, seed=0, init_amplitudes=None))]
#[allow(clippy::too_many_arguments)]
fn grape_optimize(
    targets: Vec<(f64, f64)>,
    duration: f64,
    omega0: f64,
    segments: usize,
    restarts: u32,
    max_iters: u32,
    seed: u64,
    init_amplitudes: Option<Vec<f64>>,
) -> PyResult<(PyControlField, f64, u32)> {
    let ensemble = build_ensemble(targets)?;
    let mut config = GrapeConfig::new(omega0);
    config.steps = segments;
    config.max_iters = max_iters;
    config.seed = seed;
    config.init_amplitudes = init_amplitudes;
    let mut best: Option<grape::GrapeResult> = None;
    for r in 0..restarts.max(1) {
        let mut c = config.clone();
        c.seed = seed.wrapping_add(r as u64);
        let res = grape::grape_optimize(&ensemble, duration, &c).map_err(err)?;
        if best.as_ref().map_or(true, |b| res.cost < b.cost) {
            best = Some(res);
        }
    }
    let best = best.expect("at least one restart");
    Ok((PyControlField { inner: best.field }, best.cost, best.iterations))
}

#[pymodule]
fn spinctrl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyControlField>()?;
    m.add_class::<PyDesignReport>()?;
    m.add_function(wrap_pyfunction!(delta0, m)?)?;
    m.add_function(wrap_pyfunction!(design_selective, m)?)?;
    m.add_function(wrap_pyfunction!(design_robust_one_switch, m)?)?;
    m.add_function(wrap_pyfunction!(design_robust_two_switch, m)?)?;
    m.add_function(wrap_pyfunction!(design_locally_robust_pair, m)?)?;
    m.add_function(wrap_pyfunction!(heuristic_time_bound, m)?)?;
    m.add_function(wrap_pyfunction!(next_bang_duration, m)?)?;
    m.add_function(wrap_pyfunction!(singular_crossing_times, m)?)?;
    m.add_function(wrap_pyfunction!(ensemble_cost, m)?)?;
    m.add_function(wrap_pyfunction!(grape_optimize, m)?)?;
    Ok(())
}
