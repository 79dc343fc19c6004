//! Closed-loop scenario execution: sense, track, decide, plan, control,
//! integrate, log.

use std::collections::VecDeque;
use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::control_step;
use crate::error::Result;
use crate::geometry::{normalize_angle, Pose2D, QuadraticCenterline, Waypoint};
use crate::obstacle::{build_elevation, detect_obstacles, fit_plane_distance, traversability, LanePolygon};
use crate::perception::{accumulate_scans, centerline_from_edges, centerline_from_raster, lidar_intensity_edges, least_squares_quadratic, SteerableBank, Polarity};
use crate::planning::{fsm_step, lane_change_curve, plan, Directive, FsmInputs, FsmState, QuinticSpline, VelocityProfile};
use crate::planning::fsm::STOPPED_SPEED;
use crate::tracker::{advance_to, ingest_one, LaneKalmanState, LaneMeasurement, Source};
use crate::track::{SegmentKind, TrackDefinition};

use super::metrics::{lateral_stats, RunMetrics};
use super::scenario::{PerceptionMode, Scenario};
use super::sensors::{lane_points_local, scan_to_world, synth_bev_raster, synth_lane_measurement, synth_scan, MeasurementWindow, Scene};
use super::vehicle::{bicycle_step, VehicleState};

/// Lane-edge points farther ahead than this are not used, m.
const EDGE_RANGE: f64 = 15.0;
/// Scan returns kept for the elevation map, m.
const ELEVATION_RANGE: f64 = 36.0;
/// Column size for thinning scans before mapping, m.
const ELEVATION_THIN: f64 = 0.125;
/// Distance from the end of an open track at which a run ends, m.
const END_MARGIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    pub steer_cmd: f64,
    pub accel_cmd: f64,
    /// Controller errors against the look-ahead point.
    pub e_lateral: f64,
    pub e_heading: f64,
    pub fsm: FsmState,
    pub tracked: [f64; 3],
    /// Unwrapped arc length along the track, m.
    pub s: f64,
    /// Signed offset from the lane-0 centerline, m.
    pub lateral: f64,
    /// Intended offset from the lane-0 centerline, m.
    pub ref_offset: f64,
    pub kind: SegmentKind,
    pub v_ref: f64,
    pub lateral_accel: f64,
}

impl StepRecord {
    pub fn error(&self) -> f64 {
        self.lateral - self.ref_offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub steps: Vec<StepRecord>,
    /// Arc length where each lane change began and ended.
    pub lane_changes: Vec<(f64, Option<f64>)>,
}

pub const LOG_HEADER: &str = "t,x,y,heading,v,steer_cmd,accel_cmd,e_lateral,e_heading,fsm_state,tracked_a,tracked_b,tracked_c";

pub fn write_step_log<W: Write>(mut w: W, steps: &[StepRecord]) -> Result<()> {
    writeln!(w, "{LOG_HEADER}")?;
    for r in steps {
        writeln!(
            w,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{:.6e},{:.6e},{:.6e}",
            r.t, r.x, r.y, r.heading, r.v, r.steer_cmd, r.accel_cmd, r.e_lateral, r.e_heading, r.fsm.label(), r.tracked[0], r.tracked[1], r.tracked[2]
        )?;
    }
    Ok(())
}

fn due(k: usize, dt: f64, rate: f64) -> bool {
    let tick = |i: usize| (i as f64 * dt * rate + 1e-9).floor();
    k == 0 || tick(k) > tick(k - 1)
}

/// Ground-truth waypoints of the lane at `lane_offset`, shifted by an active
/// lane change, in the vehicle frame.
#[allow(clippy::too_many_arguments)]
fn ground_truth_path(
    pose: &Pose2D,
    track: &TrackDefinition,
    s: f64,
    lane_offset: f64,
    change: Option<(&QuinticSpline, f64)>,
    profile: &VelocityProfile,
    spacing: f64,
    horizon: f64,
) -> Vec<Waypoint> {
    let start = -0.5;
    let n = ((horizon - start) / spacing).ceil() as usize;
    let mut pts = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let u = start + i as f64 * spacing;
        let (q, dq) = match change {
            Some((c, progress)) => {
                let (q, dq, _) = c.eval_clamped(progress + u);
                (q, dq)
            }
            None => (0.0, 0.0),
        };
        let p = track.pose_at(s + u);
        let (wx, wy) = p.to_parent(0.0, lane_offset + q);
        let (x, y) = pose.to_local(wx, wy);
        let heading = normalize_angle(p.heading() + dq.atan() - pose.heading());
        pts.push((u, x, y, heading));
    }
    let mut out: Vec<Waypoint> = Vec::with_capacity(pts.len());
    for (i, &(u, x, y, h)) in pts.iter().enumerate() {
        let curvature = if i + 1 < pts.len() {
            let (_, nx, ny, nh) = pts[i + 1];
            normalize_angle(nh - h) / (nx - x).hypot(ny - y).max(1e-9)
        } else {
            0.0
        };
        out.push(Waypoint::new(Pose2D::new(x, y, h), curvature, profile.speed_at(u.max(0.0))));
    }
    out
}

struct Rngs {
    steerable: ChaCha8Rng,
    lidar: ChaCha8Rng,
    raster: ChaCha8Rng,
    scan: ChaCha8Rng,
    fit: ChaCha8Rng,
}

impl Rngs {
    fn new(seed: u64) -> Self {
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(k);
            r
        };
        Self {
            steerable: stream(1),
            lidar: stream(2),
            raster: stream(3),
            scan: stream(4),
            fit: stream(5),
        }
    }
}

/// Runs the scenario to its duration, the end of an open track, or until the
/// vehicle leaves the road by more than a lane width.
pub fn run_scenario(sc: &Scenario) -> Result<(RunMetrics, RunLog)> {
    sc.validate()?;
    let track = &sc.track;
    let w = track.lane_width;
    let params = sc.vehicle.bicycle;
    let dt = params.timestep;
    let steps_total = (sc.duration / dt).round() as usize;
    let scene = Scene::from_track(track);
    let bank = SteerableBank::new(sc.sensors.filter_sigma, Polarity::Bright)?;
    let mut rngs = Rngs::new(sc.seed);

    let (sx, sy) = track.offset_point(sc.start_s, sc.start_lateral);
    let mut state = VehicleState::new(Pose2D::new(sx, sy, track.pose_at(sc.start_s).heading()), sc.fsm.v_cruise);
    let mut pi = sc.pi;
    pi.reset();
    let init_var = Vector3::from(sc.tracker.initial_variance);
    let mut kf = LaneKalmanState::new([0.0, 0.0, -sc.start_lateral], Matrix3::from_diagonal(&init_var));
    let noise = &sc.tracker.noise;

    let mut fsm = FsmState::LaneKeeping;
    let mut ego_lane = 0usize;
    let mut curve: Option<QuinticSpline> = None;
    let mut change_start = 0.0;
    let mut lane_changes: Vec<(f64, Option<f64>)> = Vec::new();

    let stop_lines = track.stop_lines.clone();
    let mut next_stop = 0usize;
    let mut stop_est: Option<f64> = None;
    let mut stop_recorded = false;
    let mut obstacle_est: Option<f64> = None;

    let mut edge_sets: VecDeque<(Pose2D, Vec<(f64, f64)>)> = VecDeque::new();
    let mut world_points: VecDeque<Vec<[f64; 3]>> = VecDeque::new();

    let mut metrics = RunMetrics::default();
    let mut steps = Vec::with_capacity(steps_total);
    let mut s_hint = sc.start_s;
    let mut s_unwrapped = sc.start_s;
    let mut traveled = 0.0;
    let lidar_scan_needed = !scene.is_empty() || (sc.mode == PerceptionMode::Full && sc.sensors.lidar.enabled && !sc.sensors.perfect);

    for k in 0..steps_total {
        let t = k as f64 * dt;
        let pose = state.pose;
        let proj = track.project_near(pose.x, pose.y, s_hint, 10.0);
        let mut ds = proj.s - s_hint;
        if track.closed {
            let len = track.length();
            ds -= len * (ds / len).round();
        }
        if k > 0 {
            s_unwrapped += ds;
        }
        s_hint = proj.s;
        let lane_offset = ego_lane as f64 * w;

        for e in [&mut stop_est, &mut obstacle_est] {
            if let Some(d) = e.as_mut() {
                *d -= traveled;
            }
        }

        // lane measurements
        if !sc.sensors.perfect {
            kf = advance_to(&kf, t, noise);
            let prior = kf.centerline();
            let mut measurements = Vec::new();
            for src in [Source::Steerable, Source::Lidar] {
                let cfg = sc.sensors.source(src).expect("configured source");
                if !cfg.enabled || !due(k, dt, cfg.rate_hz) {
                    continue;
                }
                let y = match (sc.mode, src) {
                    (PerceptionMode::Fast, _) => {
                        let rng = if src == Source::Steerable { &mut rngs.steerable } else { &mut rngs.lidar };
                        synth_lane_measurement(&state, track, proj.s, proj.lateral, lane_offset, &sc.sensors.window, cfg, rng)
                    }
                    (PerceptionMode::Full, Source::Steerable) => {
                        let raster = synth_bev_raster(&state, track, proj.s, &sc.sensors.raster, &mut rngs.raster);
                        let seed = rngs.fit.next_u64();
                        centerline_from_raster(&raster, &bank, &prior, w, sc.sensors.mask_threshold, sc.sensors.fit, seed)
                            .ok()
                            .map(|f| f.centerline.to_array())
                    }
                    (PerceptionMode::Full, _) => None,
                };
                if let Some(y) = y {
                    if y[0].abs() <= sc.tracker.a_max {
                        measurements.push(LaneMeasurement::new(src, y, t)?);
                    }
                }
            }
            // the lidar path in full mode is produced with the scan below
            if sc.mode == PerceptionMode::Fast || !sc.sensors.lidar.enabled {
                for m in &measurements {
                    kf = ingest_one(&kf, m, noise)?;
                }
                measurements.clear();
            }
            if lidar_scan_needed && due(k, dt, sc.sensors.lidar.rate_hz) {
                let out = synth_scan(&state, track, proj.s, &scene, &sc.sensors.scan, t, &mut rngs.scan);
                if sc.mode == PerceptionMode::Full && sc.sensors.lidar.enabled {
                    let edges: Vec<(f64, f64)> = lidar_intensity_edges(&out.scan, sc.sensors.edge_threshold)
                        .into_iter()
                        .filter(|(x, y)| *x > 0.5 && *x < EDGE_RANGE && y.abs() < 2.0 * w)
                        .collect();
                    edge_sets.push_back((pose, edges));
                    while edge_sets.len() > sc.sensors.edge_window {
                        edge_sets.pop_front();
                    }
                    let merged = accumulate_scans(edge_sets.make_contiguous(), sc.sensors.edge_window);
                    let seed = rngs.fit.next_u64();
                    if let Ok(f) = centerline_from_edges(&merged, &prior, w, sc.sensors.fit, seed) {
                        let y = f.centerline.to_array();
                        if y[0].abs() <= sc.tracker.a_max && rngs.lidar.next_u64() as f64 / u64::MAX as f64 >= sc.sensors.lidar.dropout {
                            measurements.push(LaneMeasurement::new(Source::Lidar, y, t)?);
                        }
                    }
                }
                scene_update(sc, &scene, &out, &pose, &kf, ego_lane, &mut world_points, &mut obstacle_est, &mut stop_est, &mut metrics, next_stop, &stop_lines)?;
            }
            measurements.sort_by_key(|m| m.source.priority());
            for m in &measurements {
                kf = ingest_one(&kf, m, noise)?;
            }
        } else if lidar_scan_needed && due(k, dt, sc.sensors.lidar.rate_hz) {
            let out = synth_scan(&state, track, proj.s, &scene, &sc.sensors.scan, t, &mut rngs.scan);
            let truth = ground_truth_centerline(&pose, track, proj.s, lane_offset);
            let fake = LaneKalmanState::new(truth.to_array(), Matrix3::zeros());
            scene_update(sc, &scene, &out, &pose, &fake, ego_lane, &mut world_points, &mut obstacle_est, &mut stop_est, &mut metrics, next_stop, &stop_lines)?;
        }

        // detections made while the tracker still follows the old lane are stale
        if matches!(fsm, FsmState::LaneChanging { .. }) {
            obstacle_est = None;
        }

        // behaviour
        let change_span = curve.map_or(0.0, |c| c.span());
        let inputs = FsmInputs {
            obstacle: obstacle_est.filter(|r| *r > 0.0),
            stop_line: if next_stop < stop_lines.len() { stop_est } else { None },
            lane_change_done: false,
            adjacent_lane_free: ego_lane < track.adjacent_lanes,
            speed: state.v,
            traveled,
            dt,
            lane_change_span: change_span,
        };
        let (next, directive) = fsm_step(fsm, &inputs, &sc.fsm);
        match (fsm, next) {
            (FsmState::LaneKeeping, FsmState::LaneChanging { .. }) => {
                let span = sc.fsm.lane_change_span(state.v.max(0.5), w);
                curve = Some(lane_change_curve(span, w)?);
                change_start = s_unwrapped;
                lane_changes.push((s_unwrapped, None));
                obstacle_est = None;
            }
            (FsmState::LaneChanging { .. }, FsmState::LaneKeeping) => {
                curve = None;
                ego_lane += 1;
                kf.estimate[2] += w;
                obstacle_est = None;
                if let Some(last) = lane_changes.last_mut() {
                    last.1 = Some(s_unwrapped);
                }
                world_points.clear();
            }
            (FsmState::Stopping { .. }, FsmState::LaneKeeping) => {
                if stop_recorded {
                    next_stop += 1;
                }
                stop_recorded = false;
                stop_est = None;
                obstacle_est = None;
                pi.reset();
            }
            _ => {}
        }
        if let FsmState::Stopping { .. } = next {
            if state.v < STOPPED_SPEED && !stop_recorded && next_stop < stop_lines.len() && stop_est.is_some() {
                let mut err = proj.s - stop_lines[next_stop];
                if track.closed {
                    let len = track.length();
                    err -= len * (err / len).round();
                }
                metrics.stop_errors.push(err);
                stop_recorded = true;
            }
        }
        fsm = next;

        let profile = match directive {
            Directive::Decelerate { stop_in } => VelocityProfile::stopping(sc.fsm.v_cruise, sc.fsm.a_decel, stop_in)?,
            Directive::Hold => VelocityProfile::constant(0.0)?,
            _ => VelocityProfile::constant(sc.fsm.v_cruise)?,
        };
        let progress = match fsm {
            FsmState::LaneChanging { progress } => Some(progress),
            _ => None,
        };
        let change = curve.as_ref().zip(progress);
        let path = if sc.sensors.perfect {
            ground_truth_path(&pose, track, proj.s, lane_offset, change, &profile, sc.plan.spacing, sc.plan.horizon)
        } else {
            plan(&fsm, &kf.centerline(), curve.as_ref(), &profile, &sc.plan)
        };
        let out = control_step(&Pose2D::identity(), &path, state.v, &sc.gains, &params, &mut pi)?;
        let next_state = bicycle_step(&state, out.steer, out.accel, &params, sc.vehicle.steer_rate);

        let ref_offset = ego_lane as f64 * w + change.map_or(0.0, |(c, _)| c.eval_clamped(s_unwrapped - change_start).0);
        let lateral_accel = next_state.v * next_state.v * next_state.steer.tan() / params.wheelbase;
        metrics.max_lateral_accel = metrics.max_lateral_accel.max(lateral_accel.abs());
        if change.is_some() {
            metrics.max_lateral_accel_lane_change = metrics.max_lateral_accel_lane_change.max(lateral_accel.abs());
        }
        let record = StepRecord {
            t,
            x: pose.x,
            y: pose.y,
            heading: pose.heading(),
            v: state.v,
            steer_cmd: out.steer,
            accel_cmd: out.accel,
            e_lateral: out.errors.e_lateral,
            e_heading: out.errors.e_heading,
            fsm,
            tracked: kf.estimate.into(),
            s: s_unwrapped,
            lateral: proj.lateral,
            ref_offset,
            kind: proj.kind,
            v_ref: out.v_ref,
            lateral_accel,
        };
        steps.push(record);
        if record.error().abs() > w {
            metrics.failed = true;
            break;
        }
        traveled = state.v * dt;
        state = next_state;
        if !track.closed && proj.s >= track.length() - END_MARGIN {
            break;
        }
    }

    metrics.completed = !metrics.failed;
    metrics.steps = steps.len();
    metrics.distance = steps.last().map_or(0.0, |r| r.s) - sc.start_s;
    let samples: Vec<(f64, SegmentKind)> = steps.iter().map(|r| (r.error(), r.kind)).collect();
    metrics.lateral = lateral_stats(&samples);
    if let Some((_, Some(end))) = lane_changes.first() {
        metrics.lane_change_completed = true;
        let window: Vec<f64> = steps
            .iter()
            .filter(|r| r.s >= *end && r.s <= end + 20.0)
            .map(|r| r.error())
            .collect();
        if !window.is_empty() {
            metrics.post_change_rms = Some((window.iter().map(|e| e * e).sum::<f64>() / window.len() as f64).sqrt());
        }
    }
    Ok((metrics, RunLog { steps, lane_changes }))
}

/// Noise-free quadratic of the lane ahead, used when planning on ground truth.
fn ground_truth_centerline(pose: &Pose2D, track: &TrackDefinition, s: f64, lane_offset: f64) -> QuadraticCenterline {
    let pts = lane_points_local(pose, track, s, lane_offset, &MeasurementWindow::default());
    least_squares_quadratic(&pts).unwrap_or(QuadraticCenterline { a: 0.0, b: 0.0, c: 0.0 })
}

/// Obstacle mapping and stop-sign ranging on a fresh scan.
#[allow(clippy::too_many_arguments)]
fn scene_update(
    sc: &Scenario,
    scene: &Scene,
    out: &super::sensors::ScanResult,
    pose: &Pose2D,
    kf: &LaneKalmanState,
    ego_lane: usize,
    world_points: &mut VecDeque<Vec<[f64; 3]>>,
    obstacle_est: &mut Option<f64>,
    stop_est: &mut Option<f64>,
    metrics: &mut RunMetrics,
    next_stop: usize,
    stop_lines: &[f64],
) -> Result<()> {
    let cfg = &sc.obstacle;
    if !sc.track.obstacles.is_empty() {
        world_points.push_back(scan_to_world(&out.scan, pose, ELEVATION_RANGE, ELEVATION_THIN));
        while world_points.len() > cfg.window {
            world_points.pop_front();
        }
        let all: Vec<[f64; 3]> = world_points.iter().flatten().copied().collect();
        let grid = build_elevation(&all, pose, &cfg.elevation)?;
        let trav = traversability(&grid, &cfg.traversability);
        let corridor = LanePolygon::from_centerline(&kf.centerline(), sc.track.lane_width, 0.5, cfg.elevation.length, 0.5);
        let clusters = detect_obstacles(&trav, &corridor, cfg.threshold, cfg.min_cluster_size);
        if let Some(c) = clusters.first() {
            *obstacle_est = Some(c.range);
            if metrics.obstacle_detection_range.is_none() && ego_lane == 0 {
                metrics.obstacle_detection_range = Some(c.range);
            }
        }
    }
    if next_stop < stop_lines.len() && !scene.signs.is_empty() && out.sign_hits.len() >= cfg.min_sign_hits {
        if let Ok((_, d)) = fit_plane_distance(&out.sign_hits) {
            *stop_est = Some(d);
        }
    }
    Ok(())
}
