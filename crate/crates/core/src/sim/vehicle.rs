//! Kinematic bicycle plant, rear-axle reference, forward Euler.

use crate::control::BicycleParams;
use crate::geometry::Pose2D;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub pose: Pose2D,
    pub v: f64,
    pub steer: f64,
}

impl VehicleState {
    pub fn new(pose: Pose2D, v: f64) -> Self {
        Self {
            pose,
            v: v.max(0.0),
            steer: 0.0,
        }
    }
}

/// Moves the steering toward the command by at most `steer_rate * ts`, then
/// integrates the pose with the new angle.
pub fn bicycle_step(state: &VehicleState, steer_cmd: f64, accel_cmd: f64, params: &BicycleParams, steer_rate: f64) -> VehicleState {
    let ts = params.timestep;
    let target = steer_cmd.clamp(-params.max_steer, params.max_steer);
    let max_delta = steer_rate * ts;
    let steer = state.steer + (target - state.steer).clamp(-max_delta, max_delta);
    let theta = state.pose.heading();
    let v = state.v;
    let pose = Pose2D::new(
        state.pose.x + ts * v * theta.cos(),
        state.pose.y + ts * v * theta.sin(),
        theta + ts * (v / params.wheelbase) * steer.tan(),
    );
    VehicleState {
        pose,
        v: (v + ts * accel_cmd).max(0.0),
        steer,
    }
}
