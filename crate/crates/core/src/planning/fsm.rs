//! Behaviour state machine: lane keeping, stopping, lane changing.

use std::fmt;

use super::quintic::{max_lateral_accel, solve_lane_change, BoundaryConditions};
use super::velocity::braking_distance;
use crate::error::{Error, Result};

/// Speed below which the vehicle counts as stopped, m/s.
pub const STOPPED_SPEED: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FsmState {
    LaneKeeping,
    /// Braking toward a stop target; `stopped_for` counts dwell time once
    /// the vehicle is at rest.
    Stopping { stopped_for: f64 },
    /// Progress along the maneuver, m of arc length.
    LaneChanging { progress: f64 },
}

impl FsmState {
    pub fn label(&self) -> &'static str {
        match self {
            FsmState::LaneKeeping => "lane_keeping",
            FsmState::Stopping { .. } => "stopping",
            FsmState::LaneChanging { .. } => "lane_changing",
        }
    }
}

impl fmt::Display for FsmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Directive {
    Cruise,
    /// Brake to rest `stop_in` meters ahead.
    Decelerate { stop_in: f64 },
    Hold,
    ChangeLane { progress: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsmConfig {
    pub v_cruise: f64,
    pub a_decel: f64,
    /// Added to the braking distance to form the stop trigger range, m.
    pub stop_margin: f64,
    pub lane_change_trigger: f64,
    pub dwell: f64,
    /// Maneuver length at the reference speed, m.
    pub lane_change_length: f64,
    pub reference_speed: f64,
    pub lateral_accel_limit: f64,
    /// Gap kept to an obstacle when no lane is free, m.
    pub obstacle_standoff: f64,
}

impl Default for FsmConfig {
    fn default() -> Self {
        Self {
            v_cruise: 2.5,
            a_decel: 1.0,
            stop_margin: 0.5,
            lane_change_trigger: 25.0,
            dwell: 3.0,
            lane_change_length: 15.0,
            reference_speed: 2.5,
            lateral_accel_limit: 2.0,
            obstacle_standoff: 3.0,
        }
    }
}

impl FsmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("a_decel", self.a_decel),
            ("lane_change_trigger", self.lane_change_trigger),
            ("lane_change_length", self.lane_change_length),
            ("reference_speed", self.reference_speed),
            ("lateral_accel_limit", self.lateral_accel_limit),
        ];
        for (k, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Invalid(format!("fsm.{k} must be positive, got {v}")));
            }
        }
        for (k, v) in [
            ("v_cruise", self.v_cruise),
            ("stop_margin", self.stop_margin),
            ("dwell", self.dwell),
            ("obstacle_standoff", self.obstacle_standoff),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Invalid(format!("fsm.{k} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Range at which a stop target switches the machine into Stopping.
    pub fn stop_trigger(&self) -> f64 {
        braking_distance(self.v_cruise, self.a_decel) + self.stop_margin
    }

    /// Maneuver length for a lateral shift of `offset` at speed `v`: scaled
    /// with speed, then stretched until the peak lateral acceleration is
    /// within the limit.
    pub fn lane_change_span(&self, v: f64, offset: f64) -> f64 {
        let mut span = self.lane_change_length * (v / self.reference_speed).max(0.2);
        let spline = solve_lane_change(&BoundaryConditions::lane_change(0.0, span, 0.0, offset))
            .expect("positive span");
        let peak = max_lateral_accel(&spline, v);
        if peak > self.lateral_accel_limit {
            // peak concavity scales with 1/span²
            span *= (peak / self.lateral_accel_limit).sqrt() * (1.0 + 1e-9);
        }
        span
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FsmInputs {
    /// Range to an in-lane obstacle, m.
    pub obstacle: Option<f64>,
    /// Range to the next stop target, m.
    pub stop_line: Option<f64>,
    pub lane_change_done: bool,
    pub adjacent_lane_free: bool,
    /// Current speed, m/s.
    pub speed: f64,
    /// Arc length traveled since the previous step, m.
    pub traveled: f64,
    pub dt: f64,
    /// Length of an active lane change, m.
    pub lane_change_span: f64,
}

pub fn fsm_step(state: FsmState, inputs: &FsmInputs, cfg: &FsmConfig) -> (FsmState, Directive) {
    match state {
        FsmState::LaneKeeping => {
            let stop = inputs
                .stop_line
                .filter(|d| *d <= cfg.stop_trigger());
            let blocked = inputs.obstacle.filter(|r| *r <= cfg.lane_change_trigger);
            if let Some(d) = stop {
                (FsmState::Stopping { stopped_for: 0.0 }, Directive::Decelerate { stop_in: d })
            } else if let Some(r) = blocked {
                if inputs.adjacent_lane_free {
                    (FsmState::LaneChanging { progress: 0.0 }, Directive::ChangeLane { progress: 0.0 })
                } else {
                    let d = (r - cfg.obstacle_standoff).max(0.0);
                    (FsmState::Stopping { stopped_for: 0.0 }, Directive::Decelerate { stop_in: d })
                }
            } else {
                (FsmState::LaneKeeping, Directive::Cruise)
            }
        }
        FsmState::Stopping { stopped_for } => {
            if inputs.speed < STOPPED_SPEED {
                let t = stopped_for + inputs.dt;
                if t >= cfg.dwell {
                    (FsmState::LaneKeeping, Directive::Cruise)
                } else {
                    (FsmState::Stopping { stopped_for: t }, Directive::Hold)
                }
            } else {
                let target = inputs
                    .stop_line
                    .or(inputs.obstacle.map(|r| (r - cfg.obstacle_standoff).max(0.0)))
                    .unwrap_or(0.0);
                (FsmState::Stopping { stopped_for: 0.0 }, Directive::Decelerate { stop_in: target })
            }
        }
        FsmState::LaneChanging { progress } => {
            let span = inputs.lane_change_span;
            let p = (progress + inputs.traveled).clamp(0.0, span.max(0.0));
            if inputs.lane_change_done || p >= span {
                (FsmState::LaneKeeping, Directive::Cruise)
            } else {
                (FsmState::LaneChanging { progress: p }, Directive::ChangeLane { progress: p })
            }
        }
    }
}
