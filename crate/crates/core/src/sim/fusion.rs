//! Open-loop tracker comparison: a vehicle weaves along a track while each
//! lane source reports at its own rate, and the tracked lane is scored
//! against the exact vehicle-frame lane every tick.

use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geometry::Pose2D;
use crate::perception::least_squares_quadratic;
use crate::track::TrackDefinition;
use crate::tracker::{advance_to, ingest_one, LaneKalmanState, LaneMeasurement, NoiseModel, Source, TICK};

use super::scenario::SensorConfig;
use super::sensors::{lane_points_local, synth_lane_measurement};
use super::vehicle::VehicleState;

/// Periodic outage of one source, as from glare washing out a camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutBurst {
    pub source: Source,
    /// Time between burst starts, s.
    pub period: f64,
    /// Burst length, s.
    pub length: f64,
}

impl DropoutBurst {
    fn active(&self, t: f64) -> bool {
        t.rem_euclid(self.period) < self.length
    }
}

#[derive(Debug, Clone)]
pub struct FusionTrial {
    pub track: TrackDefinition,
    pub sensors: SensorConfig,
    pub noise: NoiseModel,
    pub a_max: f64,
    pub frames: usize,
    pub speed: f64,
    /// Amplitude and period of the lateral weave, m and s.
    pub weave: (f64, f64),
    pub burst: Option<DropoutBurst>,
    pub seed: u64,
}

impl FusionTrial {
    pub fn new(track: TrackDefinition, frames: usize, seed: u64) -> Self {
        Self {
            track,
            sensors: SensorConfig::default(),
            noise: NoiseModel::default(),
            a_max: 0.3,
            frames,
            speed: 2.5,
            weave: (0.3, 7.0),
            burst: None,
            seed,
        }
    }
}

/// RMS error of the tracked lateral offset `c` when only `sources` report.
pub fn fusion_rms(trial: &FusionTrial, sources: &[Source]) -> Result<f64> {
    let track = &trial.track;
    let (amp, period) = trial.weave;
    let init = Matrix3::from_diagonal(&nalgebra::Vector3::new(1e-4, 1e-2, 0.25));
    let mut kf = LaneKalmanState::new([0.0, 0.0, 0.0], init);
    // one stream per source so enabling a source never perturbs another
    let mut rngs: Vec<ChaCha8Rng> = Source::ALL
        .iter()
        .map(|s| {
            let mut r = ChaCha8Rng::seed_from_u64(trial.seed);
            r.set_stream(1 + s.priority() as u64);
            r
        })
        .collect();
    let mut sum_sq = 0.0;
    let mut n = 0usize;
    for k in 0..trial.frames {
        let t = k as f64 * TICK;
        let s = trial.speed * t;
        let omega = std::f64::consts::TAU / period;
        let lateral = amp * (omega * t).sin();
        let slope = amp * omega * (omega * t).cos() / trial.speed;
        let base = track.pose_at(s);
        let (x, y) = track.offset_point(s, lateral);
        let pose = Pose2D::new(x, y, base.heading() + slope.atan());
        let state = VehicleState::new(pose, trial.speed);

        kf = advance_to(&kf, t, &trial.noise);
        let due = |rate: f64| k == 0 || (k as f64 * TICK * rate + 1e-9).floor() > ((k - 1) as f64 * TICK * rate + 1e-9).floor();
        for &src in sources {
            let Some(cfg) = trial.sensors.source(src) else { continue };
            if !cfg.enabled || !due(cfg.rate_hz) {
                continue;
            }
            let rng = &mut rngs[src.priority()];
            let meas = synth_lane_measurement(&state, track, s, lateral, 0.0, &trial.sensors.window, cfg, rng);
            if trial.burst.is_some_and(|b| b.source == src && b.active(t)) {
                continue;
            }
            if let Some(y) = meas.filter(|y| y[0].abs() <= trial.a_max) {
                kf = ingest_one(&kf, &LaneMeasurement::new(src, y, t)?, &trial.noise)?;
            }
        }

        let pts = lane_points_local(&pose, track, s, 0.0, &trial.sensors.window);
        if let Ok(truth) = least_squares_quadratic(&pts) {
            let e = kf.estimate[2] - truth.c;
            sum_sq += e * e;
            n += 1;
        }
    }
    Ok(if n == 0 { f64::NAN } else { (sum_sq / n as f64).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial() -> FusionTrial {
        FusionTrial::new(TrackDefinition::loop_track(200.0, 3.0, 3.0, 0.05).unwrap(), 600, 7)
    }

    #[test]
    fn fused_is_no_worse_than_either_source() {
        let t = trial();
        let steer = fusion_rms(&t, &[Source::Steerable]).unwrap();
        let lidar = fusion_rms(&t, &[Source::Lidar]).unwrap();
        let fused = fusion_rms(&t, &[Source::Steerable, Source::Lidar]).unwrap();
        assert!(fused <= 1.05 * steer.min(lidar), "{fused} {steer} {lidar}");
    }

    #[test]
    fn deterministic() {
        let t = trial();
        let a = fusion_rms(&t, &[Source::Steerable, Source::Lidar]).unwrap();
        let b = fusion_rms(&t, &[Source::Steerable, Source::Lidar]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
