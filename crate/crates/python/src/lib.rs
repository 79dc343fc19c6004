//! Python module `mapless`: scenario runs, the lane tracker and the
//! planning and control primitives.

use std::path::Path;

use nalgebra::Matrix3;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mapless_core::acceptance::{run_acceptance as run_criteria, Tolerances};
use mapless_core::cli::{load_with, Overrides};
use mapless_core::control::{self, BicycleParams, ControllerGains};
use mapless_core::geometry::{QuadraticCenterline, TrackingError};
use mapless_core::perception;
use mapless_core::planning::{self, BoundaryConditions};
use mapless_core::scenarios;
use mapless_core::sim::{self, Scenario};
use mapless_core::tracker::{self, LaneKalmanState, LaneMeasurement, NoiseModel, Source};

fn err(e: mapless_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Quadratic lane centerline `y = a x^2 + b x + c` in the vehicle frame.
#[pyclass(name = "Centerline", frozen, from_py_object)]
#[derive(Clone)]
struct PyCenterline(QuadraticCenterline);

#[pymethods]
impl PyCenterline {
    #[new]
    fn new(a: f64, b: f64, c: f64) -> PyResult<Self> {
        QuadraticCenterline::new(a, b, c).map(Self).map_err(err)
    }

    #[getter]
    fn coefficients(&self) -> (f64, f64, f64) {
        (self.0.a, self.0.b, self.0.c)
    }

    fn eval(&self, x: f64) -> f64 {
        self.0.eval(x)
    }

    fn slope(&self, x: f64) -> f64 {
        self.0.slope(x)
    }

    fn curvature(&self, x: f64) -> f64 {
        self.0.curvature(x)
    }

    fn __repr__(&self) -> String {
        format!("Centerline(a={}, b={}, c={})", self.0.a, self.0.b, self.0.c)
    }
}

/// Quintic lateral offset curve of a lane change.
#[pyclass(name = "Quintic", frozen)]
struct PyQuintic(planning::QuinticSpline);

#[pymethods]
impl PyQuintic {
    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.0.coefficients.to_vec()
    }

    #[getter]
    fn domain(&self) -> (f64, f64) {
        (self.0.s0, self.0.s_f)
    }

    fn eval(&self, s: f64) -> f64 {
        self.0.eval(s)
    }

    fn max_lateral_accel(&self, v: f64) -> PyResult<f64> {
        if v.is_nan() || v < 0.0 {
            return Err(PyValueError::new_err("speed must be non-negative"));
        }
        Ok(planning::max_lateral_accel(&self.0, v))
    }
}

#[pyfunction]
#[pyo3(signature = (s0, s_f, y0, y_f, dy0 = 0.0, ddy0 = 0.0))]
fn solve_lane_change(s0: f64, s_f: f64, y0: f64, y_f: f64, dy0: f64, ddy0: f64) -> PyResult<PyQuintic> {
    let bc = BoundaryConditions {
        s0,
        s_f,
        y0,
        dy0,
        ddy0,
        y_f,
    };
    planning::solve_lane_change(&bc).map(PyQuintic).map_err(err)
}

/// Steering angle in rad for the given tracking errors.
#[pyfunction]
#[pyo3(signature = (e_lateral, e_heading, v, gamma1 = 0.5, gamma2 = 1.5, wheelbase = 1.5, max_steer = 0.55))]
fn fbl_steering(e_lateral: f64, e_heading: f64, v: f64, gamma1: f64, gamma2: f64, wheelbase: f64, max_steer: f64) -> PyResult<f64> {
    let gains = ControllerGains::new(gamma1, gamma2, 0.0).map_err(err)?;
    let params = BicycleParams::new(wheelbase, tracker::TICK, max_steer).map_err(err)?;
    let e = TrackingError { e_lateral, e_heading };
    Ok(control::fbl_steering(&e, v, &gains, &params))
}

/// `(matrix, spectral_radius)` of the discrete closed loop.
#[pyfunction]
fn closed_loop_matrix(gamma1: f64, gamma2: f64, ts: f64) -> PyResult<([[f64; 2]; 2], f64)> {
    if ts.is_nan() || ts <= 0.0 {
        return Err(PyValueError::new_err("timestep must be positive"));
    }
    let (m, rho) = control::closed_loop_matrix(gamma1, gamma2, ts);
    Ok(([[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]], rho))
}

/// Seeded RANSAC quadratic fit. Returns `(Centerline, inlier_count)`.
#[pyfunction]
#[pyo3(signature = (points, ransac_iters = 100, inlier_tol = 0.05, seed = 0))]
fn fit_quadratic(points: Vec<(f64, f64)>, ransac_iters: usize, inlier_tol: f64, seed: u64) -> PyResult<(PyCenterline, usize)> {
    let fit = perception::fit_quadratic(&points, ransac_iters, inlier_tol, seed).map_err(err)?;
    Ok((PyCenterline(fit.centerline), fit.inliers))
}

fn source(name: &str) -> PyResult<Source> {
    name.parse().map_err(err)
}

/// Kalman tracker of the centerline coefficients.
#[pyclass(name = "LaneTracker")]
struct PyLaneTracker {
    state: LaneKalmanState,
    noise: NoiseModel,
}

#[pymethods]
impl PyLaneTracker {
    /// Defaults to the simulator's noise model and a centered prior.
    #[new]
    #[pyo3(signature = (system_noise = None, sources = None))]
    fn new(system_noise: Option<[f64; 3]>, sources: Option<Vec<(String, [f64; 3])>>) -> PyResult<Self> {
        let mut noise = match system_noise {
            None => NoiseModel::default(),
            Some(r) => NoiseModel::new(nalgebra_diag(r)).map_err(err)?,
        };
        for (name, var) in sources.unwrap_or_default() {
            noise = noise.with_source(source(&name)?, var).map_err(err)?;
        }
        Ok(Self {
            state: LaneKalmanState::centered(),
            noise,
        })
    }

    /// Applies one measurement from `source` ("steerable", "lidar", "cnn").
    fn ingest(&mut self, source_name: &str, y: [f64; 3], timestamp: f64) -> PyResult<()> {
        let m = LaneMeasurement::new(source(source_name)?, y, timestamp).map_err(err)?;
        self.state = tracker::ingest_one(&self.state, &m, &self.noise).map_err(err)?;
        Ok(())
    }

    /// Predicts forward to `timestamp` without a measurement.
    fn advance(&mut self, timestamp: f64) {
        self.state = tracker::advance_to(&self.state, timestamp, &self.noise);
    }

    #[getter]
    fn estimate(&self) -> (f64, f64, f64) {
        let e = self.state.estimate;
        (e[0], e[1], e[2])
    }

    #[getter]
    fn covariance(&self) -> [[f64; 3]; 3] {
        let p = self.state.covariance;
        std::array::from_fn(|i| std::array::from_fn(|j| p[(i, j)]))
    }

    #[getter]
    fn centerline(&self) -> PyCenterline {
        PyCenterline(self.state.centerline())
    }
}

fn nalgebra_diag(d: [f64; 3]) -> Matrix3<f64> {
    Matrix3::from_diagonal(&d.into())
}

#[pyfunction]
fn builtin_scenarios() -> Vec<&'static str> {
    scenarios::builtin_names()
}

fn resolve(scenario: &str, seed: Option<u64>, mode: Option<String>) -> PyResult<Scenario> {
    if let Ok(mut sc) = scenarios::builtin(scenario) {
        if let Some(s) = seed {
            sc.seed = s;
        }
        if let Some(m) = mode {
            sc.mode = m.parse().map_err(err)?;
        }
        return Ok(sc);
    }
    load_with(Path::new(scenario), &Overrides { seed, mode }, &[]).map_err(err)
}

/// Runs a built-in scenario by name, or a scenario file by path. Returns a
/// dict of metrics plus per-step columns under `"log"`.
#[pyfunction]
#[pyo3(signature = (scenario, seed = None, mode = None, duration = None))]
fn run_scenario<'py>(
    py: Python<'py>,
    scenario: &str,
    seed: Option<u64>,
    mode: Option<String>,
    duration: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut sc = resolve(scenario, seed, mode)?;
    if let Some(d) = duration {
        sc.duration = d;
    }
    let (m, log) = sim::run_scenario(&sc).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("name", &sc.name)?;
    out.set_item("seed", sc.seed)?;
    out.set_item("rms_lateral", m.lateral.rms)?;
    out.set_item("max_lateral", m.lateral.max)?;
    out.set_item("rms_straight", m.lateral.rms_straight)?;
    out.set_item("max_turn", m.lateral.max_turn)?;
    out.set_item("stop_errors", m.stop_errors.clone())?;
    out.set_item("max_lateral_accel", m.max_lateral_accel)?;
    out.set_item("obstacle_detection_range", m.obstacle_detection_range)?;
    out.set_item("lane_change_completed", m.lane_change_completed)?;
    out.set_item("post_change_rms", m.post_change_rms)?;
    out.set_item("completed", m.completed)?;
    out.set_item("failed", m.failed)?;
    out.set_item("steps", m.steps)?;

    let cols = PyDict::new(py);
    let col = |f: fn(&sim::StepRecord) -> f64| log.steps.iter().map(f).collect::<Vec<f64>>();
    cols.set_item("t", col(|r| r.t))?;
    cols.set_item("x", col(|r| r.x))?;
    cols.set_item("y", col(|r| r.y))?;
    cols.set_item("heading", col(|r| r.heading))?;
    cols.set_item("v", col(|r| r.v))?;
    cols.set_item("steer", col(|r| r.steer_cmd))?;
    cols.set_item("lateral_error", col(|r| r.error()))?;
    cols.set_item("fsm", log.steps.iter().map(|r| r.fsm.label()).collect::<Vec<_>>())?;
    out.set_item("log", cols)?;
    Ok(out)
}

/// Runs the acceptance criteria. Returns `(id, passed, measured)` tuples.
#[pyfunction]
#[pyo3(signature = (only = None))]
fn run_acceptance(only: Option<Vec<String>>) -> Vec<(String, bool, String)> {
    run_criteria(&Tolerances::default(), &only.unwrap_or_default())
        .into_iter()
        .map(|r| (r.id.to_string(), r.passed, r.measured))
        .collect()
}

#[pymodule]
fn mapless(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TICK", tracker::TICK)?;
    m.add_class::<PyCenterline>()?;
    m.add_class::<PyQuintic>()?;
    m.add_class::<PyLaneTracker>()?;
    m.add_function(wrap_pyfunction!(solve_lane_change, m)?)?;
    m.add_function(wrap_pyfunction!(fbl_steering, m)?)?;
    m.add_function(wrap_pyfunction!(closed_loop_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(fit_quadratic, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_acceptance, m)?)?;
    Ok(())
}
