//! Waypoint generation in the vehicle frame for the current behaviour.

use super::fsm::FsmState;
use super::quintic::{solve_lane_change, BoundaryConditions, QuinticSpline};
use super::velocity::VelocityProfile;
use crate::error::Result;
use crate::geometry::{normalize_angle, sample_waypoints, Pose2D, QuadraticCenterline, Waypoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanConfig {
    pub spacing: f64,
    pub horizon: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            spacing: 0.2,
            horizon: 10.0,
        }
    }
}

/// Lateral offset curve of a lane change of `offset` meters over `span`.
pub fn lane_change_curve(span: f64, offset: f64) -> Result<QuinticSpline> {
    solve_lane_change(&BoundaryConditions::lane_change(0.0, span, 0.0, offset))
}

/// Plans along the tracked centerline. While changing lanes the path is
/// pushed along the centerline normal by the quintic offset, evaluated at
/// `progress + x`; past the end of the maneuver it follows the adjacent
/// centerline.
pub fn plan(
    state: &FsmState,
    tracked: &QuadraticCenterline,
    lane_change: Option<&QuinticSpline>,
    profile: &VelocityProfile,
    cfg: &PlanConfig,
) -> Vec<Waypoint> {
    let mut base = sample_waypoints(tracked, cfg.spacing, cfg.horizon);
    if let (FsmState::LaneChanging { progress }, Some(curve)) = (state, lane_change) {
        let shifted: Vec<(f64, f64)> = base
            .iter()
            .map(|w| {
                let x = w.pose.x;
                let (q, _, _) = curve.eval_clamped(progress + x);
                let (sn, cs) = w.pose.heading().sin_cos();
                (x - q * sn, w.pose.y + q * cs)
            })
            .collect();
        let n = shifted.len();
        let headings: Vec<f64> = (0..n)
            .map(|i| {
                let (a, b) = if i + 1 < n { (i, i + 1) } else { (i.saturating_sub(1), i) };
                if a == b {
                    base[i].pose.heading()
                } else {
                    (shifted[b].1 - shifted[a].1).atan2(shifted[b].0 - shifted[a].0)
                }
            })
            .collect();
        for i in 0..n {
            let curvature = if i + 1 < n {
                let ds = (shifted[i + 1].0 - shifted[i].0).hypot(shifted[i + 1].1 - shifted[i].1);
                normalize_angle(headings[i + 1] - headings[i]) / ds.max(1e-9)
            } else {
                base[i].curvature
            };
            base[i] = Waypoint::new(Pose2D::new(shifted[i].0, shifted[i].1, headings[i]), curvature, 0.0);
        }
    }
    let mut arc = 0.0;
    let mut prev: Option<Pose2D> = None;
    for w in &mut base {
        if let Some(p) = prev {
            arc += (w.pose.x - p.x).hypot(w.pose.y - p.y);
        }
        prev = Some(w.pose);
        w.speed = profile.speed_at(arc);
    }
    base
}
