//! Behaviour selection, speed profiles and lane-change path synthesis.

pub mod fsm;
pub mod plan;
pub mod quintic;
pub mod velocity;

pub use fsm::{fsm_step, Directive, FsmConfig, FsmInputs, FsmState};
pub use plan::{lane_change_curve, plan, PlanConfig};
pub use quintic::{max_lateral_accel, solve_lane_change, BoundaryConditions, QuinticSpline};
pub use velocity::{braking_distance, decel_profile, ProfileMode, VelocityProfile};
