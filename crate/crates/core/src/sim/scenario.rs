use crate::control::{BicycleParams, ControllerGains, PiController};
use crate::error::{Error, Result};
use crate::obstacle::{ElevationConfig, TraversabilityParams};
use crate::perception::FitParams;
use crate::planning::{FsmConfig, PlanConfig};
use crate::tracker::{NoiseModel, Source};
use crate::track::TrackDefinition;

use super::sensors::{MeasurementWindow, RasterConfig, ScanConfig, SourceNoise};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerceptionMode {
    /// Fitted lane measurements go straight to the tracker.
    Fast,
    /// Lane measurements come from synthetic rasters and scans.
    Full,
}

impl std::str::FromStr for PerceptionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Self::Fast),
            "full" => Ok(Self::Full),
            other => Err(Error::Invalid(format!("mode must be `fast` or `full`, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorConfig {
    pub steerable: SourceNoise,
    pub lidar: SourceNoise,
    /// Plan on ground-truth waypoints instead of the tracked lane.
    pub perfect: bool,
    pub window: MeasurementWindow,
    pub raster: RasterConfig,
    pub scan: ScanConfig,
    /// Gaussian scale of the ridge filter, cells.
    pub filter_sigma: f64,
    pub mask_threshold: f64,
    pub edge_threshold: f64,
    /// Number of scans merged for lane edges.
    pub edge_window: usize,
    pub fit: FitParams,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            steerable: SourceNoise {
                enabled: true,
                rate_hz: 26.0,
                sigma: [1e-3, 1e-2, 0.1],
                dropout: 0.05,
            },
            lidar: SourceNoise {
                enabled: true,
                rate_hz: 10.0,
                sigma: [2f64.sqrt() * 1e-3, 2f64.sqrt() * 1e-2, 2f64.sqrt() * 0.1],
                dropout: 0.05,
            },
            perfect: false,
            window: MeasurementWindow::default(),
            raster: RasterConfig::default(),
            scan: ScanConfig::default(),
            filter_sigma: 2.0,
            mask_threshold: 0.5,
            edge_threshold: 0.3,
            edge_window: 5,
            fit: FitParams::default(),
        }
    }
}

impl SensorConfig {
    pub fn source(&self, s: Source) -> Option<&SourceNoise> {
        match s {
            Source::Steerable => Some(&self.steerable),
            Source::Lidar => Some(&self.lidar),
            Source::Cnn => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub noise: NoiseModel,
    /// Measurements with `|a|` above this are discarded, 1/m.
    pub a_max: f64,
    pub initial_variance: [f64; 3],
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            noise: NoiseModel::default(),
            a_max: crate::geometry::DEFAULT_A_MAX,
            initial_variance: [1e-4, 1e-2, 0.25],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleConfig {
    pub bicycle: BicycleParams,
    /// Steering slew limit, rad/s.
    pub steer_rate: f64,
    pub width: f64,
}

impl Default for VehicleConfig {
    fn default() -> Self {
        Self {
            bicycle: BicycleParams::default(),
            steer_rate: 0.6,
            width: 1.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleConfig {
    pub elevation: ElevationConfig,
    pub traversability: TraversabilityParams,
    pub threshold: f64,
    pub min_cluster_size: usize,
    /// Scans merged into the elevation map.
    pub window: usize,
    /// Minimum panel returns for a plane-fit range.
    pub min_sign_hits: usize,
}

impl Default for ObstacleConfig {
    fn default() -> Self {
        Self {
            elevation: ElevationConfig::default(),
            traversability: TraversabilityParams::default(),
            threshold: 0.5,
            min_cluster_size: 3,
            window: 20,
            min_sign_hits: 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub track: TrackDefinition,
    /// Start arc length on the lane-0 centerline, m.
    pub start_s: f64,
    /// Start offset left of the lane-0 centerline, m.
    pub start_lateral: f64,
    pub sensors: SensorConfig,
    pub tracker: TrackerConfig,
    pub vehicle: VehicleConfig,
    pub gains: ControllerGains,
    pub pi: PiController,
    pub fsm: FsmConfig,
    pub plan: PlanConfig,
    pub obstacle: ObstacleConfig,
    pub seed: u64,
    /// Simulated time, s.
    pub duration: f64,
    pub mode: PerceptionMode,
}

impl Scenario {
    /// Defaults for every subsystem on the given track.
    pub fn new(name: &str, track: TrackDefinition) -> Self {
        Self {
            name: name.to_string(),
            track,
            start_s: 0.0,
            start_lateral: 0.0,
            sensors: SensorConfig::default(),
            tracker: TrackerConfig::default(),
            vehicle: VehicleConfig::default(),
            gains: ControllerGains::default(),
            pi: PiController::default(),
            fsm: FsmConfig::default(),
            plan: PlanConfig::default(),
            obstacle: ObstacleConfig::default(),
            seed: 0,
            duration: 60.0,
            mode: PerceptionMode::Fast,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.track.validate(self.vehicle.width)?;
        ControllerGains::new(self.gains.gamma1, self.gains.gamma2, self.gains.lookahead)?;
        let b = &self.vehicle.bicycle;
        BicycleParams::new(b.wheelbase, b.timestep, b.max_steer)?;
        PiController::new(self.pi.kp, self.pi.ki, self.pi.min_output, self.pi.max_output)?;
        self.fsm.validate()?;
        for (name, s) in [("steerable", &self.sensors.steerable), ("lidar", &self.sensors.lidar)] {
            if !(s.rate_hz > 0.0) {
                return Err(Error::Invalid(format!("sensors.{name}.rate_hz must be positive, got {}", s.rate_hz)));
            }
            if !(0.0..=1.0).contains(&s.dropout) {
                return Err(Error::Invalid(format!("sensors.{name}.dropout must lie in [0, 1], got {}", s.dropout)));
            }
            if s.sigma.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::Invalid(format!("sensors.{name}.sigma must be >= 0")));
            }
        }
        if !(self.vehicle.steer_rate > 0.0) {
            return Err(Error::Invalid("vehicle.steer_rate must be positive".into()));
        }
        if !(self.duration > 0.0) {
            return Err(Error::Invalid(format!("run.duration must be positive, got {}", self.duration)));
        }
        if !(self.tracker.a_max > 0.0) {
            return Err(Error::Invalid("tracker.a_max must be positive".into()));
        }
        if !(self.obstacle.threshold > 0.0 && self.obstacle.threshold < 1.0) {
            return Err(Error::Invalid("obstacle.threshold must lie in (0, 1)".into()));
        }
        if !(self.plan.spacing > 0.0 && self.plan.horizon >= self.plan.spacing) {
            return Err(Error::Invalid("plan needs spacing > 0 and horizon >= spacing".into()));
        }
        Ok(())
    }
}
