use crate::track::{SegmentKind, TrackDefinition};

use super::run::StepRecord;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LateralStats {
    pub rms: f64,
    pub max: f64,
    pub rms_straight: f64,
    pub max_straight: f64,
    pub rms_turn: f64,
    pub max_turn: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMetrics {
    pub lateral: LateralStats,
    /// Signed overshoot past each stop line, m.
    pub stop_errors: Vec<f64>,
    pub max_lateral_accel: f64,
    pub max_lateral_accel_lane_change: f64,
    /// Range at the first in-lane obstacle detection, m.
    pub obstacle_detection_range: Option<f64>,
    pub lane_change_completed: bool,
    /// RMS over the 20 m following a completed lane change, m.
    pub post_change_rms: Option<f64>,
    pub completed: bool,
    pub failed: bool,
    pub steps: usize,
    pub distance: f64,
}

impl RunMetrics {
    pub fn mean_abs_stop_error(&self) -> Option<f64> {
        (!self.stop_errors.is_empty())
            .then(|| self.stop_errors.iter().map(|e| e.abs()).sum::<f64>() / self.stop_errors.len() as f64)
    }

    /// Flat `key = value` listing.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x:.6}"));
        let l = &self.lateral;
        let stops: Vec<String> = self.stop_errors.iter().map(|e| format!("{e:.6}")).collect();
        [
            format!("rms_lateral = {:.6}", l.rms),
            format!("max_lateral = {:.6}", l.max),
            format!("rms_straight = {:.6}", l.rms_straight),
            format!("max_straight = {:.6}", l.max_straight),
            format!("rms_turn = {:.6}", l.rms_turn),
            format!("max_turn = {:.6}", l.max_turn),
            format!("stop_errors = [{}]", stops.join(", ")),
            format!("max_lateral_accel = {:.6}", self.max_lateral_accel),
            format!("max_lateral_accel_lane_change = {:.6}", self.max_lateral_accel_lane_change),
            format!("obstacle_detection_range = {}", opt(self.obstacle_detection_range)),
            format!("lane_change_completed = {}", self.lane_change_completed),
            format!("post_change_rms = {}", opt(self.post_change_rms)),
            format!("completed = {}", self.completed),
            format!("failed = {}", self.failed),
            format!("steps = {}", self.steps),
            format!("distance = {:.6}", self.distance),
        ]
        .join("\n")
            + "\n"
    }
}

fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        (v.iter().map(|e| e * e).sum::<f64>() / v.len() as f64).sqrt()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, e| m.max(e.abs()))
}

/// Aggregates signed errors overall and per segment kind.
pub fn lateral_stats(samples: &[(f64, SegmentKind)]) -> LateralStats {
    let all: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let pick = |k| samples.iter().filter(|s| s.1 == k).map(|s| s.0).collect::<Vec<_>>();
    let (st, tu) = (pick(SegmentKind::Straight), pick(SegmentKind::Turn));
    LateralStats {
        rms: rms(&all),
        max: max_abs(&all),
        rms_straight: rms(&st),
        max_straight: max_abs(&st),
        rms_turn: rms(&tu),
        max_turn: max_abs(&tu),
    }
}

/// Signed distance of each logged rear-axle position from the nearest
/// centerline point, less the step's reference offset.
pub fn rms_lateral_error(log: &[StepRecord], track: &TrackDefinition) -> LateralStats {
    let samples: Vec<(f64, SegmentKind)> = log
        .iter()
        .map(|r| {
            let p = track.project(r.x, r.y);
            (p.lateral - r.ref_offset, p.kind)
        })
        .collect();
    lateral_stats(&samples)
}
