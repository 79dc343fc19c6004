//! Linear Kalman filter over the centerline coefficients `[a, b, c]` with
//! asynchronous per-source updates on a fixed prediction tick.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::QuadraticCenterline;

/// Prediction period, s.
pub const TICK: f64 = 1.0 / 26.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Steerable,
    Lidar,
    Cnn,
}

impl Source {
    pub const ALL: [Source; 3] = [Source::Steerable, Source::Lidar, Source::Cnn];

    /// Application order for measurements sharing a timestamp.
    pub fn priority(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Source::Steerable => "steerable",
            Source::Lidar => "lidar",
            Source::Cnn => "cnn",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Source::ALL
            .into_iter()
            .find(|src| src.name() == s)
            .ok_or_else(|| Error::UnknownSource(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneMeasurement {
    pub source: Source,
    pub y: [f64; 3],
    pub timestamp: f64,
}

impl LaneMeasurement {
    pub fn new(source: Source, y: [f64; 3], timestamp: f64) -> Result<Self> {
        if !timestamp.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "{source} measurement must be finite (t={timestamp}, y={y:?})"
            )));
        }
        Ok(Self { source, y, timestamp })
    }
}

/// System noise `R` per tick and a diagonal measurement noise per source.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    system: Matrix3<f64>,
    omega: [Option<Vector3<f64>>; 3],
}

impl Default for NoiseModel {
    fn default() -> Self {
        let steer = [1e-6, 1e-4, 1e-2];
        Self::new(Matrix3::from_diagonal(&Vector3::new(1e-8, 1e-6, 1e-4)))
            .expect("default R is PSD")
            .with_source(Source::Steerable, steer)
            .expect("positive")
            .with_source(Source::Lidar, steer.map(|v| 2.0 * v))
            .expect("positive")
    }
}

impl NoiseModel {
    /// Model with no sources configured.
    pub fn new(system: Matrix3<f64>) -> Result<Self> {
        if (system - system.transpose()).abs().max() > 1e-12 {
            return Err(Error::Invalid("system noise R must be symmetric".into()));
        }
        let min_eig = system.symmetric_eigenvalues().min();
        if min_eig < -1e-12 {
            return Err(Error::Invalid(format!(
                "system noise R must be positive semi-definite (eigenvalue {min_eig})"
            )));
        }
        Ok(Self {
            system,
            omega: [None; 3],
        })
    }

    pub fn with_source(mut self, source: Source, variances: [f64; 3]) -> Result<Self> {
        if variances.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Invalid(format!(
                "{source} measurement variances must be positive, got {variances:?}"
            )));
        }
        self.omega[source.priority()] = Some(Vector3::from(variances));
        Ok(self)
    }

    pub fn system(&self) -> &Matrix3<f64> {
        &self.system
    }

    pub fn omega(&self, source: Source) -> Result<Matrix3<f64>> {
        self.omega[source.priority()]
            .map(|d| Matrix3::from_diagonal(&d))
            .ok_or_else(|| Error::UnknownSource(source.name().into()))
    }

    pub fn has_source(&self, source: Source) -> bool {
        self.omega[source.priority()].is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneKalmanState {
    pub estimate: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    /// Timestamp of the newest applied measurement, s.
    pub last_update_time: f64,
    /// Number of predict ticks applied since t = 0.
    pub tick: u64,
}

impl LaneKalmanState {
    pub fn new(estimate: [f64; 3], covariance: Matrix3<f64>) -> Self {
        Self {
            estimate: Vector3::from(estimate),
            covariance,
            last_update_time: f64::NEG_INFINITY,
            tick: 0,
        }
    }

    /// Loosely informed prior around a straight, centered lane.
    pub fn centered() -> Self {
        Self::new([0.0; 3], Matrix3::from_diagonal(&Vector3::new(1e-4, 1e-2, 0.25)))
    }

    /// Current estimate as a centerline. Coefficients are finite by
    /// construction of the filter inputs.
    pub fn centerline(&self) -> QuadraticCenterline {
        QuadraticCenterline::from_array(self.estimate.into())
            .expect("filter estimate stays finite")
    }
}

/// `P <- P + R`. The estimate is unchanged.
pub fn predict(state: &LaneKalmanState, noise: &NoiseModel) -> LaneKalmanState {
    LaneKalmanState {
        covariance: state.covariance + noise.system,
        tick: state.tick + 1,
        ..*state
    }
}

/// Standard update with identity observation.
pub fn update(state: &LaneKalmanState, meas: &LaneMeasurement, noise: &NoiseModel) -> Result<LaneKalmanState> {
    let omega = noise.omega(meas.source)?;
    let p = state.covariance;
    let s_inv = (p + omega)
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("innovation covariance is singular".into()))?;
    let k = p * s_inv;
    let innovation = Vector3::from(meas.y) - state.estimate;
    let cov = (Matrix3::identity() - k) * p;
    Ok(LaneKalmanState {
        estimate: state.estimate + k * innovation,
        covariance: 0.5 * (cov + cov.transpose()),
        last_update_time: meas.timestamp.max(state.last_update_time),
        tick: state.tick,
    })
}

/// Tick index a timestamp is applied at.
pub fn nearest_tick(t: f64) -> u64 {
    (t / TICK).round().max(0.0) as u64
}

/// Predicts forward until `state.tick` reaches the tick nearest `t`.
pub fn advance_to(state: &LaneKalmanState, t: f64, noise: &NoiseModel) -> LaneKalmanState {
    let target = nearest_tick(t);
    let mut s = *state;
    while s.tick < target {
        s = predict(&s, noise);
    }
    s
}

/// Applies one measurement: the predicts for elapsed ticks, then the update.
pub fn ingest_one(state: &LaneKalmanState, meas: &LaneMeasurement, noise: &NoiseModel) -> Result<LaneKalmanState> {
    if meas.timestamp < state.last_update_time {
        return Err(Error::OutOfOrder {
            last: state.last_update_time,
            got: meas.timestamp,
        });
    }
    update(&advance_to(state, meas.timestamp, noise), meas, noise)
}

/// Runs a stream through the filter and returns the initial state followed
/// by the state after each measurement. Measurements sharing a timestamp
/// are applied in source-priority order.
pub fn ingest(state: &LaneKalmanState, measurements: &[LaneMeasurement], noise: &NoiseModel) -> Result<Vec<LaneKalmanState>> {
    for w in measurements.windows(2) {
        if w[1].timestamp < w[0].timestamp {
            return Err(Error::OutOfOrder {
                last: w[0].timestamp,
                got: w[1].timestamp,
            });
        }
    }
    let mut ordered = measurements.to_vec();
    // stable, and timestamps are already sorted
    ordered.sort_by(|x, y| {
        x.timestamp
            .total_cmp(&y.timestamp)
            .then(x.source.priority().cmp(&y.source.priority()))
    });
    let mut out = Vec::with_capacity(ordered.len() + 1);
    out.push(*state);
    let mut s = *state;
    for m in &ordered {
        s = ingest_one(&s, m, noise)?;
        out.push(s);
    }
    Ok(out)
}

/// Writes a state trajectory as CSV.
pub fn write_trajectory_csv<W: Write>(mut w: W, states: &[LaneKalmanState]) -> Result<()> {
    writeln!(w, "tick,a,b,c,p_aa,p_bb,p_cc")?;
    for s in states {
        let e = s.estimate;
        let p = s.covariance;
        writeln!(
            w,
            "{},{:.9e},{:.9e},{:.9e},{:.6e},{:.6e},{:.6e}",
            s.tick, e[0], e[1], e[2], p[(0, 0)], p[(1, 1)], p[(2, 2)]
        )?;
    }
    Ok(())
}
