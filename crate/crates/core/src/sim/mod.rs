//! Closed-loop simulation: vehicle dynamics, synthetic sensors, scenarios,
//! and metrics.

pub mod fusion;
pub mod metrics;
pub mod run;
pub mod scenario;
pub mod sensors;
pub mod vehicle;

pub use fusion::{fusion_rms, DropoutBurst, FusionTrial};
pub use metrics::{lateral_stats, rms_lateral_error, LateralStats, RunMetrics};
pub use run::{run_scenario, write_step_log, RunLog, StepRecord, LOG_HEADER};
pub use scenario::{ObstacleConfig, PerceptionMode, Scenario, SensorConfig, TrackerConfig, VehicleConfig};
pub use sensors::{
    lane_points_local, scan_to_world, synth_bev_raster, synth_lane_measurement, synth_scan, MeasurementWindow, RasterConfig,
    ScanConfig, ScanResult, Scene, SourceNoise,
};
pub use vehicle::{bicycle_step, VehicleState};
