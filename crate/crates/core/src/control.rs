//! Lateral control by feedback linearization of the kinematic bicycle error
//! dynamics, plus a PI speed loop.
//!
//! With `p1 = e_L` and `p2 = v sin(e_H)` the error dynamics are
//! `p1' = p2`, `p2' = v cos(e_H) (v / L) tan(δ)`. Choosing `δ` so that
//! `p2' = -γ1 p1 - γ2 p2` makes the sampled system linear.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::geometry::{closest_point, errors_to, tracking_point, Pose2D, TrackingError, Waypoint};

/// Lowest speed used inside the steering law, m/s.
pub const V_MIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    pub gamma1: f64,
    pub gamma2: f64,
    pub lookahead: f64,
}

impl ControllerGains {
    pub fn new(gamma1: f64, gamma2: f64, lookahead: f64) -> Result<Self> {
        if !(gamma1 > 0.0) || !(gamma2 > 0.0) {
            return Err(Error::Invalid(format!(
                "gains must be positive (gamma1={gamma1}, gamma2={gamma2})"
            )));
        }
        if !(lookahead >= 0.0) {
            return Err(Error::Invalid(format!("lookahead must be >= 0, got {lookahead}")));
        }
        Ok(Self {
            gamma1,
            gamma2,
            lookahead,
        })
    }
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            gamma1: 0.5,
            gamma2: 1.5,
            lookahead: 3.0,
        }
    }
}

/// Named gain sets shipped with the scenarios.
pub fn gain_presets() -> Vec<(&'static str, ControllerGains)> {
    vec![
        ("default", ControllerGains::default()),
        ("track", ControllerGains { gamma1: 1.0, gamma2: 2.0, lookahead: 1.5 }),
        ("soft", ControllerGains { gamma1: 0.3, gamma2: 1.2, lookahead: 3.0 }),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicycleParams {
    pub wheelbase: f64,
    pub timestep: f64,
    pub max_steer: f64,
}

impl BicycleParams {
    pub fn new(wheelbase: f64, timestep: f64, max_steer: f64) -> Result<Self> {
        if !(wheelbase > 0.0) || !(timestep > 0.0) {
            return Err(Error::Invalid(format!(
                "wheelbase and timestep must be positive (L={wheelbase}, ts={timestep})"
            )));
        }
        if !(max_steer > 0.0 && max_steer < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Invalid(format!("max_steer must lie in (0, pi/2), got {max_steer}")));
        }
        Ok(Self {
            wheelbase,
            timestep,
            max_steer,
        })
    }
}

impl Default for BicycleParams {
    fn default() -> Self {
        Self {
            wheelbase: 1.5,
            timestep: 1.0 / 26.0,
            max_steer: 0.55,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedState {
    pub p1: f64,
    pub p2: f64,
}

impl LinearizedState {
    pub fn from_errors(err: &TrackingError, v: f64) -> Self {
        Self {
            p1: err.e_lateral,
            p2: v * err.e_heading.sin(),
        }
    }
}

/// Unsaturated `tan δ` of the linearizing law.
pub fn fbl_tan_steer(err: &TrackingError, v: f64, gains: &ControllerGains, wheelbase: f64) -> f64 {
    let v = v.max(V_MIN);
    let (s, c) = err.e_heading.sin_cos();
    wheelbase * (-gains.gamma1 * err.e_lateral - gains.gamma2 * v * s) / (v * v * c)
}

/// Steering angle, saturated at `±max_steer`. Beyond a right angle of
/// heading error the law is singular and the wheel turns fully toward the
/// path instead.
pub fn fbl_steering(err: &TrackingError, v: f64, gains: &ControllerGains, params: &BicycleParams) -> f64 {
    if err.e_heading.abs() >= std::f64::consts::FRAC_PI_2 {
        let side = if err.e_lateral != 0.0 { err.e_lateral } else { err.e_heading };
        return -side.signum() * params.max_steer;
    }
    fbl_tan_steer(err, v, gains, params.wheelbase)
        .atan()
        .clamp(-params.max_steer, params.max_steer)
}

/// One forward-Euler step of the linearized coordinates under steering `δ`.
pub fn linearized_step(p: &LinearizedState, e_heading: f64, v: f64, steer: f64, params: &BicycleParams) -> LinearizedState {
    let ts = params.timestep;
    let p2_rate = v * e_heading.cos() * (v / params.wheelbase) * steer.tan();
    LinearizedState {
        p1: p.p1 + ts * p.p2,
        p2: p.p2 + ts * p2_rate,
    }
}

/// Closed-loop transition matrix on `(p1, p2)` and its spectral radius.
pub fn closed_loop_matrix(gamma1: f64, gamma2: f64, ts: f64) -> (Matrix2<f64>, f64) {
    assert!(ts > 0.0, "timestep must be positive");
    let m = Matrix2::new(1.0, ts, -ts * gamma1, 1.0 - ts * gamma2);
    (m, spectral_radius(&m))
}

fn spectral_radius(m: &Matrix2<f64>) -> f64 {
    let tr = m.trace();
    let det = m.determinant();
    let disc = tr * tr - 4.0 * det;
    if disc.abs() <= 1e-12 * tr * tr.max(1.0) {
        (0.5 * tr).abs()
    } else if disc < 0.0 {
        det.sqrt()
    } else {
        let r = disc.sqrt();
        (0.5 * (tr + r)).abs().max((0.5 * (tr - r)).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiController {
    pub kp: f64,
    pub ki: f64,
    pub integral: f64,
    pub min_output: f64,
    pub max_output: f64,
}

impl PiController {
    pub fn new(kp: f64, ki: f64, min_output: f64, max_output: f64) -> Result<Self> {
        if !(kp >= 0.0 && ki >= 0.0) || !(min_output < max_output) {
            return Err(Error::Invalid(format!(
                "PI needs kp, ki >= 0 and min < max (kp={kp}, ki={ki}, limits=[{min_output}, {max_output}])"
            )));
        }
        Ok(Self {
            kp,
            ki,
            integral: 0.0,
            min_output,
            max_output,
        })
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
    }
}

impl Default for PiController {
    fn default() -> Self {
        Self::new(2.0, 1.0, -3.0, 1.5).expect("valid defaults")
    }
}

/// Acceleration command from the speed error. The integral is clamped so
/// that `ki * integral` alone stays within the output limits.
pub fn pi_longitudinal(v_ref: f64, v: f64, ctrl: &mut PiController, dt: f64) -> f64 {
    assert!(dt > 0.0, "dt must be positive");
    let e = v_ref - v;
    ctrl.integral += e * dt;
    if ctrl.ki > 0.0 {
        ctrl.integral = ctrl
            .integral
            .clamp(ctrl.min_output / ctrl.ki, ctrl.max_output / ctrl.ki);
    }
    (ctrl.kp * e + ctrl.ki * ctrl.integral).clamp(ctrl.min_output, ctrl.max_output)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub steer: f64,
    pub accel: f64,
    pub errors: TrackingError,
    pub v_ref: f64,
}

/// Steering against the look-ahead tracking point and speed control against
/// the reference speed at the closest path point.
pub fn control_step(
    pose: &Pose2D,
    path: &[Waypoint],
    v: f64,
    gains: &ControllerGains,
    params: &BicycleParams,
    pi: &mut PiController,
) -> Result<ControlOutput> {
    let target = tracking_point(pose, path, gains.lookahead)?;
    let errors = errors_to(pose, &target.pose);
    let steer = fbl_steering(&errors, v, gains, params);
    let v_ref = closest_point(pose, path)?.speed;
    let accel = pi_longitudinal(v_ref, v, pi, params.timestep);
    Ok(ControlOutput {
        steer,
        accel,
        errors,
        v_ref,
    })
}
