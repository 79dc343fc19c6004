//! TOML scenario files.
//!
//! Every key is optional; omitted keys keep the subsystem defaults. Unknown
//! keys are rejected with the offending key and line in the message.

use std::path::Path;

use nalgebra::Matrix3;
use serde::Deserialize;

use crate::control::{gain_presets, BicycleParams, ControllerGains, PiController};
use crate::error::{Error, Result};
use crate::sim::{Scenario, SourceNoise};
use crate::track::{Obstacle, TrackDefinition};
use crate::tracker::{NoiseModel, Source};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub track: TrackSection,
    #[serde(default)]
    pub sensors: SensorSection,
    #[serde(default)]
    pub tracker: TrackerSection,
    #[serde(default)]
    pub vehicle: VehicleSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub fsm: FsmSection,
    #[serde(default)]
    pub obstacle: ObstacleSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackKind {
    /// 200 m loop with four 3 m turns.
    #[default]
    Course,
    Loop,
    Straight,
    Waypoints,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSection {
    #[serde(default)]
    pub kind: TrackKind,
    pub length: Option<f64>,
    pub turn_radius: Option<f64>,
    pub lane_width: Option<f64>,
    pub spacing: Option<f64>,
    pub waypoints: Option<Vec<[f64; 2]>>,
    pub closed: Option<bool>,
    pub adjacent_lanes: Option<usize>,
    pub stop_lines: Option<Vec<f64>>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleEntry>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleEntry {
    pub s: f64,
    #[serde(default)]
    pub lateral: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub enabled: Option<bool>,
    pub rate_hz: Option<f64>,
    pub sigma: Option<[f64; 3]>,
    pub dropout: Option<f64>,
}

impl SourceSection {
    fn apply(&self, s: &mut SourceNoise) {
        set(&mut s.enabled, self.enabled);
        set(&mut s.rate_hz, self.rate_hz);
        set(&mut s.sigma, self.sigma);
        set(&mut s.dropout, self.dropout);
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    pub perfect: Option<bool>,
    #[serde(default)]
    pub steerable: SourceSection,
    #[serde(default)]
    pub lidar: SourceSection,
    pub window_x_min: Option<f64>,
    pub window_x_max: Option<f64>,
    pub window_max_tangent_deg: Option<f64>,
    pub raster_speckle: Option<f64>,
    pub scan_range_noise: Option<f64>,
    pub filter_sigma: Option<f64>,
    pub mask_threshold: Option<f64>,
    pub edge_threshold: Option<f64>,
    pub edge_window: Option<usize>,
    pub ransac_iters: Option<usize>,
    pub inlier_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerSection {
    pub system_noise: Option<[f64; 3]>,
    pub steerable_variance: Option<[f64; 3]>,
    pub lidar_variance: Option<[f64; 3]>,
    pub a_max: Option<f64>,
    pub initial_variance: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSection {
    pub wheelbase: Option<f64>,
    pub max_steer: Option<f64>,
    pub steer_rate: Option<f64>,
    pub width: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub preset: Option<String>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub lookahead: Option<f64>,
    pub kp: Option<f64>,
    pub ki: Option<f64>,
    pub min_accel: Option<f64>,
    pub max_accel: Option<f64>,
    pub plan_spacing: Option<f64>,
    pub plan_horizon: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FsmSection {
    pub v_cruise: Option<f64>,
    pub a_decel: Option<f64>,
    pub stop_margin: Option<f64>,
    pub lane_change_trigger: Option<f64>,
    pub dwell: Option<f64>,
    pub lane_change_length: Option<f64>,
    pub lateral_accel_limit: Option<f64>,
    pub obstacle_standoff: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSection {
    pub threshold: Option<f64>,
    pub min_cluster_size: Option<usize>,
    pub window: Option<usize>,
    pub smooth: Option<bool>,
    pub min_sign_hits: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub duration: Option<f64>,
    pub mode: Option<String>,
    pub start_s: Option<f64>,
    pub start_lateral: Option<f64>,
}

fn set<T>(dst: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *dst = v;
    }
}

fn config_err(file: &str, message: impl Into<String>) -> Error {
    Error::Config {
        file: file.to_string(),
        message: message.into(),
    }
}

impl TrackSection {
    fn build(&self, file: &str) -> Result<TrackDefinition> {
        let w = self.lane_width.unwrap_or(3.0);
        let spacing = self.spacing.unwrap_or(0.05);
        let track = match self.kind {
            TrackKind::Course => TrackDefinition::loop_track(
                self.length.unwrap_or(200.0),
                self.turn_radius.unwrap_or(3.0),
                w,
                spacing,
            ),
            TrackKind::Loop => {
                let length = self.length.ok_or_else(|| config_err(file, "track.length is required for kind = \"loop\""))?;
                let radius = self
                    .turn_radius
                    .ok_or_else(|| config_err(file, "track.turn_radius is required for kind = \"loop\""))?;
                TrackDefinition::loop_track(length, radius, w, spacing)
            }
            TrackKind::Straight => {
                let length = self.length.ok_or_else(|| config_err(file, "track.length is required for kind = \"straight\""))?;
                TrackDefinition::straight(length, w, spacing)
            }
            TrackKind::Waypoints => {
                let pts = self
                    .waypoints
                    .as_ref()
                    .ok_or_else(|| config_err(file, "track.waypoints is required for kind = \"waypoints\""))?;
                let v: Vec<(f64, f64)> = pts.iter().map(|p| (p[0], p[1])).collect();
                TrackDefinition::from_polyline(&v, w, self.closed.unwrap_or(false))
            }
        }
        .map_err(|e| config_err(file, format!("[track]: {e}")))?;
        let obstacles = self
            .obstacles
            .iter()
            .map(|o| Obstacle {
                s: o.s,
                lateral: o.lateral,
                length: o.length,
                width: o.width,
                height: o.height,
            })
            .collect();
        Ok(track
            .with_adjacent_lanes(self.adjacent_lanes.unwrap_or(0))
            .with_stop_lines(self.stop_lines.clone().unwrap_or_default())
            .with_obstacles(obstacles))
    }
}

impl ScenarioFile {
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(file, e.to_string()))
    }

    pub fn from_table(table: toml::Table, file: &str) -> Result<Self> {
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(file, e.to_string()))
    }

    /// Builds and validates the scenario. Errors name the file and key.
    pub fn to_scenario(&self, file: &str) -> Result<Scenario> {
        let track = self.track.build(file)?;
        let name = self.run.name.clone().unwrap_or_else(|| {
            Path::new(file)
                .file_stem()
                .map_or_else(|| "scenario".to_string(), |s| s.to_string_lossy().into_owned())
        });
        let mut sc = Scenario::new(&name, track);

        let s = &self.sensors;
        set(&mut sc.sensors.perfect, s.perfect);
        s.steerable.apply(&mut sc.sensors.steerable);
        s.lidar.apply(&mut sc.sensors.lidar);
        set(&mut sc.sensors.window.x_min, s.window_x_min);
        set(&mut sc.sensors.window.x_max, s.window_x_max);
        set(&mut sc.sensors.window.max_tangent, s.window_max_tangent_deg.map(f64::to_radians));
        set(&mut sc.sensors.raster.speckle, s.raster_speckle);
        set(&mut sc.sensors.scan.range_noise, s.scan_range_noise);
        set(&mut sc.sensors.filter_sigma, s.filter_sigma);
        set(&mut sc.sensors.mask_threshold, s.mask_threshold);
        set(&mut sc.sensors.edge_threshold, s.edge_threshold);
        set(&mut sc.sensors.edge_window, s.edge_window);
        set(&mut sc.sensors.fit.ransac_iters, s.ransac_iters);
        set(&mut sc.sensors.fit.inlier_tol, s.inlier_tol);

        let t = &self.tracker;
        if t.system_noise.is_some() || t.steerable_variance.is_some() || t.lidar_variance.is_some() {
            let current = &sc.tracker.noise;
            let diag = |m: Matrix3<f64>| [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
            let system = t.system_noise.unwrap_or(diag(*current.system()));
            let steer = t.steerable_variance.unwrap_or(diag(current.omega(Source::Steerable)?));
            let lidar = t.lidar_variance.unwrap_or(diag(current.omega(Source::Lidar)?));
            sc.tracker.noise = NoiseModel::new(Matrix3::from_diagonal(&system.into()))
                .and_then(|n| n.with_source(Source::Steerable, steer))
                .and_then(|n| n.with_source(Source::Lidar, lidar))
                .map_err(|e| config_err(file, format!("[tracker]: {e}")))?;
        }
        set(&mut sc.tracker.a_max, t.a_max);
        set(&mut sc.tracker.initial_variance, t.initial_variance);

        let v = &self.vehicle;
        let b = sc.vehicle.bicycle;
        sc.vehicle.bicycle = BicycleParams::new(v.wheelbase.unwrap_or(b.wheelbase), b.timestep, v.max_steer.unwrap_or(b.max_steer))
            .map_err(|e| config_err(file, format!("[vehicle]: {e}")))?;
        set(&mut sc.vehicle.steer_rate, v.steer_rate);
        set(&mut sc.vehicle.width, v.width);

        let c = &self.controller;
        let mut gains = match &c.preset {
            None => ControllerGains::default(),
            Some(p) => gain_presets()
                .into_iter()
                .find(|(n, _)| n == p)
                .map(|(_, g)| g)
                .ok_or_else(|| config_err(file, format!("controller.preset: unknown preset `{p}`")))?,
        };
        set(&mut gains.gamma1, c.gamma1);
        set(&mut gains.gamma2, c.gamma2);
        set(&mut gains.lookahead, c.lookahead);
        sc.gains = ControllerGains::new(gains.gamma1, gains.gamma2, gains.lookahead).map_err(|e| config_err(file, format!("[controller]: {e}")))?;
        let pi = sc.pi;
        sc.pi = PiController::new(
            c.kp.unwrap_or(pi.kp),
            c.ki.unwrap_or(pi.ki),
            c.min_accel.unwrap_or(pi.min_output),
            c.max_accel.unwrap_or(pi.max_output),
        )
        .map_err(|e| config_err(file, format!("[controller]: {e}")))?;
        set(&mut sc.plan.spacing, c.plan_spacing);
        set(&mut sc.plan.horizon, c.plan_horizon);

        let f = &self.fsm;
        set(&mut sc.fsm.v_cruise, f.v_cruise);
        set(&mut sc.fsm.reference_speed, f.v_cruise);
        set(&mut sc.fsm.a_decel, f.a_decel);
        set(&mut sc.fsm.stop_margin, f.stop_margin);
        set(&mut sc.fsm.lane_change_trigger, f.lane_change_trigger);
        set(&mut sc.fsm.dwell, f.dwell);
        set(&mut sc.fsm.lane_change_length, f.lane_change_length);
        set(&mut sc.fsm.lateral_accel_limit, f.lateral_accel_limit);
        set(&mut sc.fsm.obstacle_standoff, f.obstacle_standoff);

        let o = &self.obstacle;
        set(&mut sc.obstacle.threshold, o.threshold);
        set(&mut sc.obstacle.min_cluster_size, o.min_cluster_size);
        set(&mut sc.obstacle.window, o.window);
        set(&mut sc.obstacle.traversability.smooth, o.smooth);
        set(&mut sc.obstacle.min_sign_hits, o.min_sign_hits);

        let r = &self.run;
        set(&mut sc.seed, r.seed);
        set(&mut sc.duration, r.duration);
        set(&mut sc.start_s, r.start_s);
        set(&mut sc.start_lateral, r.start_lateral);
        if let Some(m) = &r.mode {
            sc.mode = m.parse().map_err(|e| config_err(file, format!("run.mode: {e}")))?;
        }
        sc.validate().map_err(|e| match e {
            Error::Config { .. } => e,
            other => config_err(file, other.to_string()),
        })?;
        Ok(sc)
    }
}

/// Reads and builds a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| config_err(&file, e.to_string()))?;
    ScenarioFile::parse(&text, &file)?.to_scenario(&file)
}

/// Parses a scenario file into a raw table for key overrides.
pub fn load_table(path: &Path) -> Result<toml::Table> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| config_err(&file, e.to_string()))?;
    text.parse::<toml::Table>().map_err(|e| config_err(&file, e.to_string()))
}

/// Sets a dotted key such as `controller.lookahead`, creating tables as
/// needed. The value is parsed as a TOML literal, falling back to a string.
pub fn set_key(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Invalid(format!("malformed key `{key}`")));
    }
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let mut node = table;
    for p in &parts[..parts.len() - 1] {
        node = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Invalid(format!("`{p}` in `{key}` is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::PerceptionMode;

    #[test]
    fn minimal_file_uses_defaults() {
        let sc = ScenarioFile::parse("[track]\nkind = \"straight\"\nlength = 50.0\n", "t.toml")
            .unwrap()
            .to_scenario("t.toml")
            .unwrap();
        assert_eq!(sc.name, "t");
        assert_eq!(sc.gains, ControllerGains::default());
        assert!((sc.track.length() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn unknown_key_is_named_with_line() {
        let err = ScenarioFile::parse("[track]\nkind = \"straight\"\nlength = 50.0\n\n[fsm]\nv_crooze = 2.0\n", "bad.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.toml"), "{msg}");
        assert!(msg.contains("v_crooze"), "{msg}");
        assert!(msg.contains("line 6"), "{msg}");
    }

    #[test]
    fn invalid_gain_names_section() {
        let err = ScenarioFile::parse("[track]\nkind = \"straight\"\nlength = 50.0\n[controller]\ngamma1 = 0.0\n", "g.toml")
            .unwrap()
            .to_scenario("g.toml")
            .unwrap_err()
            .to_string();
        assert!(err.contains("[controller]") && err.contains("gamma1"), "{err}");
    }

    #[test]
    fn set_key_overrides_nested_values() {
        let mut t: toml::Table = "[track]\nkind = \"straight\"\nlength = 50.0\n".parse().unwrap();
        set_key(&mut t, "controller.lookahead", "2").unwrap();
        set_key(&mut t, "run.mode", "full").unwrap();
        let sc = ScenarioFile::from_table(t, "s.toml").unwrap().to_scenario("s.toml").unwrap();
        assert_eq!(sc.gains.lookahead, 2.0);
        assert_eq!(sc.mode, PerceptionMode::Full);
    }
}
