//! Worked examples checked against independent computations: hand
//! arithmetic, brute-force search, closed forms and constructed scenes.

use approx::assert_abs_diff_eq;
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use mapless_core::control::{
    closed_loop_matrix, control_step, fbl_steering, pi_longitudinal, BicycleParams, ControllerGains, PiController,
};
use mapless_core::geometry::{sample_waypoints, Pose2D, QuadraticCenterline, RasterGeometry, TrackingError, Waypoint};
use mapless_core::obstacle::{
    build_elevation, detect_obstacles, fit_plane_distance, traversability, ElevationConfig, ElevationGrid, LanePolygon,
    TraversabilityParams,
};
use mapless_core::perception::{
    accumulate_scans, extract_mask, fit_quadratic, lidar_intensity_edges, steer_response, BevRaster, Grid, LaserPoint,
    LaserScanSim, Polarity, SteerableBank,
};
use mapless_core::planning::{
    braking_distance, fsm_step, lane_change_curve, max_lateral_accel, plan, solve_lane_change, BoundaryConditions,
    Directive, FsmConfig, FsmInputs, FsmState, PlanConfig, VelocityProfile,
};
use mapless_core::sim::{bicycle_step, lateral_stats, VehicleState};
use mapless_core::track::SegmentKind;
use mapless_core::tracker::{advance_to, ingest, update, LaneKalmanState, LaneMeasurement, NoiseModel, Source, TICK};

// ---------------------------------------------------------------- perception

fn vertical_line(n: usize, col: usize, fg: f64, bg: f64) -> BevRaster {
    let g = RasterGeometry::new(n, n, 0.1, (0.0, 0.0)).unwrap();
    let data = (0..n * n).map(|i| if i % n == col { fg } else { bg }).collect();
    BevRaster::new(g, data).unwrap()
}

#[test]
fn steered_response_peaks_along_the_line() {
    let raster = vertical_line(41, 20, 1.0, 0.0);
    let bank = SteerableBank::new(1.5, Polarity::Bright).unwrap();
    // brute force over a discretized orientation grid
    let thetas: Vec<f64> = (0..36).map(|k| k as f64 * std::f64::consts::PI / 36.0).collect();
    let at = |theta: f64| steer_response(&raster, &bank, theta).unwrap().get(20, 20);
    let best = thetas.iter().copied().max_by(|a, b| at(*a).total_cmp(&at(*b))).unwrap();
    assert_abs_diff_eq!(best, 0.0);
    assert!(at(0.0) > at(std::f64::consts::FRAC_PI_2));
    assert!(at(0.0) > 0.0);
}

#[test]
fn dark_line_gives_no_bright_peak() {
    let raster = vertical_line(41, 20, 0.0, 1.0);
    let bank = SteerableBank::new(1.5, Polarity::Bright).unwrap();
    let r = steer_response(&raster, &bank, 0.0).unwrap();
    // interior only, away from the zero-padded border
    let peak = (8..33).flat_map(|row| (8..33).map(move |col| (row, col))).map(|(row, col)| r.get(row, col)).fold(f64::MIN, f64::max);
    let bright = steer_response(&vertical_line(41, 20, 1.0, 0.0), &bank, 0.0).unwrap().get(20, 20);
    assert!(peak < 0.5 * bright, "peak {peak} vs bright line {bright}");
    assert!(r.get(20, 20) < 0.0);
}

#[test]
fn threshold_between_two_peaks_keeps_the_higher() {
    let g = RasterGeometry::new(10, 10, 0.1, (0.0, 0.0)).unwrap();
    let mut resp = Grid::zeros(g);
    resp.set(2, 3, 1.0);
    resp.set(7, 6, 0.6);
    let mask = extract_mask(&resp, 0.8);
    assert_eq!(mask.count(), 1);
    assert!(mask.get(2, 3));
    assert!(!mask.get(7, 6));
}

#[test]
fn intensity_step_is_located_exactly() {
    let ring: Vec<LaserPoint> = (0..40)
        .map(|i| {
            let az = -1.0 + i as f64 * 0.05;
            LaserPoint {
                x: 6.0 * az.cos(),
                y: 6.0 * az.sin(),
                z: 0.0,
                intensity: if i < 17 { 0.2 } else { 0.8 },
            }
        })
        .collect();
    let (p, q) = (ring[16], ring[17]);
    let scan = LaserScanSim {
        rings: vec![ring],
        timestamp: 0.0,
    };
    let edges = lidar_intensity_edges(&scan, 0.5);
    assert_eq!(edges, vec![(0.5 * (p.x + q.x), 0.5 * (p.y + q.y))]);
}

#[test]
fn line_seen_from_two_poses_stays_collinear() {
    // world line y = 2 + 0.1 x
    let world: Vec<(f64, f64)> = (0..20).map(|i| (5.0 + i as f64, 2.0 + 0.1 * (5.0 + i as f64))).collect();
    let poses = [Pose2D::new(0.0, 0.0, 0.05), Pose2D::new(1.7, 0.3, 0.12)];
    let sets: Vec<(Pose2D, Vec<(f64, f64)>)> = poses
        .iter()
        .map(|p| (*p, world.iter().map(|&(x, y)| p.to_local(x, y)).collect()))
        .collect();
    let merged = accumulate_scans(&sets, 2);
    assert_eq!(merged.len(), 40);
    let latest = poses[1];
    for &(x, y) in &merged {
        let (wx, wy) = latest.to_parent(x, y);
        assert_abs_diff_eq!(wy, 2.0 + 0.1 * wx, epsilon = 1e-9);
    }
}

#[test]
fn ransac_rejects_thirty_percent_outliers() {
    let truth = [0.01, -0.05, 1.2];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pts: Vec<(f64, f64)> = (0..70)
        .map(|i| {
            let x = 1.0 + i as f64 * 0.15;
            (x, truth[0] * x * x + truth[1] * x + truth[2])
        })
        .collect();
    pts.extend((0..30).map(|_| (rng.random_range(1.0..11.5), rng.random_range(-5.0..5.0))));
    let fit = fit_quadratic(&pts, 200, 0.05, 3).unwrap();
    let got = fit.centerline.to_array();
    for k in 0..3 {
        assert_abs_diff_eq!(got[k], truth[k], epsilon = 0.01);
    }
    assert!(fit.inliers >= 20);
}

// ---------------------------------------------------------------- tracker

#[test]
fn scalar_update_halves_the_variance() {
    let noise = NoiseModel::new(Matrix3::zeros())
        .unwrap()
        .with_source(Source::Steerable, [1.0; 3])
        .unwrap();
    let prior = LaneKalmanState::new([0.0; 3], Matrix3::identity());
    let post = update(&prior, &LaneMeasurement::new(Source::Steerable, [2.0; 3], 0.0).unwrap(), &noise).unwrap();
    assert_abs_diff_eq!(post.estimate, Vector3::repeat(1.0), epsilon = 1e-15);
    assert_abs_diff_eq!(post.covariance, Matrix3::identity() * 0.5, epsilon = 1e-15);
}

#[test]
fn interleaved_sources_match_batch_least_squares() {
    let var = [0.04, 0.09, 0.25];
    let noise = NoiseModel::new(Matrix3::zeros())
        .unwrap()
        .with_source(Source::Steerable, var)
        .unwrap()
        .with_source(Source::Lidar, var)
        .unwrap();
    let p0 = [1.0, 2.0, 4.0];
    let prior = LaneKalmanState::new([0.0; 3], Matrix3::from_diagonal(&Vector3::from(p0)));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut forward = Vec::new();
    let mut reversed = Vec::new();
    for k in 0..40 {
        let t = k as f64 * TICK;
        let a = LaneMeasurement::new(Source::Steerable, [rng.random(), rng.random(), rng.random()], t).unwrap();
        let b = LaneMeasurement::new(Source::Lidar, [rng.random(), rng.random(), rng.random()], t).unwrap();
        forward.extend([a, b]);
        reversed.extend([b, a]);
    }
    let f = *ingest(&prior, &forward, &noise).unwrap().last().unwrap();
    let r = *ingest(&prior, &reversed, &noise).unwrap().last().unwrap();
    assert_eq!(f.estimate, r.estimate);

    // information-form batch estimate per coordinate
    for k in 0..3 {
        let info = 1.0 / p0[k] + forward.len() as f64 / var[k];
        let sum: f64 = forward.iter().map(|m| m.y[k] / var[k]).sum();
        assert_abs_diff_eq!(f.estimate[k], sum / info, epsilon = 1e-9);
        assert_abs_diff_eq!(f.covariance[(k, k)], 1.0 / info, epsilon = 1e-9);
    }
}

#[test]
fn steady_state_covariance_solves_the_riccati_fixed_point() {
    let r = [1e-6, 1e-4, 1e-2];
    let w = [1e-4, 1e-2, 0.5];
    let noise = NoiseModel::new(Matrix3::from_diagonal(&Vector3::from(r)))
        .unwrap()
        .with_source(Source::Steerable, w)
        .unwrap();
    let y = [0.02, -0.1, 0.7];
    let mut s = LaneKalmanState::centered();
    for k in 1..=3000 {
        let m = LaneMeasurement::new(Source::Steerable, y, k as f64 * TICK).unwrap();
        s = update(&advance_to(&s, m.timestamp, &noise), &m, &noise).unwrap();
    }
    for k in 0..3 {
        assert_abs_diff_eq!(s.estimate[k], y[k], epsilon = 1e-6);
        let mut p = 0.0;
        for _ in 0..100_000 {
            p = (p + r[k]) * w[k] / ((p + r[k]) + w[k]);
        }
        assert_abs_diff_eq!(s.covariance[(k, k)], p, epsilon = 1e-9 * p.max(1e-12) + 1e-15);
    }
}

// ---------------------------------------------------------------- planning

fn min_jerk(u: f64) -> f64 {
    10.0 * u.powi(3) - 15.0 * u.powi(4) + 6.0 * u.powi(5)
}

#[test]
fn unit_lane_change_is_the_minimum_jerk_polynomial() {
    let s = solve_lane_change(&BoundaryConditions::lane_change(0.0, 1.0, 0.0, 1.0)).unwrap();
    let expected = [0.0, 0.0, 0.0, 10.0, -15.0, 6.0];
    for (m, e) in s.coefficients.iter().zip(expected) {
        assert_abs_diff_eq!(*m, e, epsilon = 1e-9);
    }
}

#[test]
fn doubling_the_span_rescales_the_domain() {
    let s = solve_lane_change(&BoundaryConditions::lane_change(0.0, 2.0, 0.0, 1.0)).unwrap();
    for i in 0..=40 {
        let x = 2.0 * i as f64 / 40.0;
        assert_abs_diff_eq!(s.eval(x), min_jerk(x / 2.0), epsilon = 1e-12);
    }
}

#[test]
fn braking_begins_at_v_squared_over_two_a() {
    assert_abs_diff_eq!(braking_distance(2.5, 1.0), 3.125, epsilon = 1e-15);
}

#[test]
fn peak_lateral_accel_matches_dense_sampling() {
    let s = solve_lane_change(&BoundaryConditions::lane_change(0.0, 1.0, 0.0, 1.0)).unwrap();
    let brute = (0..=10_000)
        .map(|i| {
            let u = i as f64 * 1e-4;
            (60.0 * u - 180.0 * u * u + 120.0 * u.powi(3)).abs()
        })
        .fold(0.0, f64::max)
        * 6.25;
    let got = max_lateral_accel(&s, 2.5);
    assert!(got >= brute - 1e-12);
    assert_abs_diff_eq!(got, brute, epsilon = 1e-6);
}

#[test]
fn obstacle_at_24m_triggers_a_lane_change() {
    let cfg = FsmConfig::default();
    let inputs = FsmInputs {
        obstacle: Some(24.0),
        adjacent_lane_free: true,
        speed: 2.5,
        dt: TICK,
        ..Default::default()
    };
    let (state, directive) = fsm_step(FsmState::LaneKeeping, &inputs, &cfg);
    assert!(matches!(state, FsmState::LaneChanging { .. }));
    assert!(matches!(directive, Directive::ChangeLane { .. }));
}

#[test]
fn stop_line_seen_at_30m_waits_for_the_braking_trigger() {
    let cfg = FsmConfig::default();
    let trigger = braking_distance(cfg.v_cruise, cfg.a_decel) + cfg.stop_margin;
    let step = 2.5 * TICK;
    let mut d = 30.0;
    let mut switched_at = None;
    while d > 0.0 {
        let inputs = FsmInputs {
            stop_line: Some(d),
            speed: 2.5,
            dt: TICK,
            ..Default::default()
        };
        if let (FsmState::Stopping { .. }, Directive::Decelerate { stop_in }) = fsm_step(FsmState::LaneKeeping, &inputs, &cfg) {
            assert_eq!(stop_in, d);
            switched_at = Some(d);
            break;
        }
        d -= step;
    }
    let at = switched_at.expect("stopping never began");
    assert!(at <= trigger && at > trigger - step, "switched at {at}, trigger {trigger}");
}

#[test]
fn lane_change_ends_one_lane_over() {
    let curve = lane_change_curve(12.0, 3.0).unwrap();
    let profile = VelocityProfile::constant(2.5).unwrap();
    let zero = QuadraticCenterline::new(0.0, 0.0, 0.0).unwrap();
    let path = plan(
        &FsmState::LaneChanging { progress: 4.0 },
        &zero,
        Some(&curve),
        &profile,
        &PlanConfig { spacing: 0.2, horizon: 10.0 },
    );
    let last = path.last().unwrap();
    assert_abs_diff_eq!(last.pose.y, 3.0, epsilon = 1e-6);
    assert_abs_diff_eq!(path[0].pose.y, curve.eval(4.0), epsilon = 1e-12);
}

#[test]
fn stopping_profile_follows_the_square_root() {
    let profile = VelocityProfile::stopping(2.5, 1.0, 3.125).unwrap();
    let zero = QuadraticCenterline::new(0.0, 0.0, 0.0).unwrap();
    let path = plan(
        &FsmState::Stopping { stopped_for: 0.0 },
        &zero,
        None,
        &profile,
        &PlanConfig { spacing: 0.125, horizon: 3.125 },
    );
    for w in &path {
        let expected = (2.0 * (3.125 - w.pose.x).max(0.0)).sqrt();
        assert_abs_diff_eq!(w.speed, expected, epsilon = 1e-9);
    }
    assert_abs_diff_eq!(path.last().unwrap().speed, 0.0);
    assert_abs_diff_eq!(path[0].speed, 2.5, epsilon = 1e-12);
}

// ---------------------------------------------------------------- control

fn unit_wheelbase() -> BicycleParams {
    BicycleParams::new(1.0, 0.05, 0.55).unwrap()
}

#[test]
fn unit_lateral_error_steering_angle() {
    let gains = ControllerGains::new(1.0, 1.0, 0.0).unwrap();
    let err = TrackingError {
        e_lateral: 1.0,
        e_heading: 0.0,
    };
    let d = fbl_steering(&err, 2.5, &gains, &unit_wheelbase());
    assert_abs_diff_eq!(d, (-1.0f64 / 6.25).atan(), epsilon = 1e-12);
    assert_abs_diff_eq!(d, -0.158655, epsilon = 5e-7);
}

#[test]
fn half_meter_left_of_a_straight_path() {
    let gains = ControllerGains::new(1.0, 1.0, 0.0).unwrap();
    let path: Vec<Waypoint> = sample_waypoints(&QuadraticCenterline::new(0.0, 0.0, 0.0).unwrap(), 0.5, 10.0)
        .into_iter()
        .map(|mut w| {
            w.speed = 2.5;
            w
        })
        .collect();
    let mut pi = PiController::default();
    let out = control_step(&Pose2D::new(0.0, 0.5, 0.0), &path, 2.5, &gains, &unit_wheelbase(), &mut pi).unwrap();
    assert_abs_diff_eq!(out.steer, -0.079830, epsilon = 5e-7);
    assert_abs_diff_eq!(out.accel, 0.0);
}

#[test]
fn critically_damped_gains_have_a_double_root() {
    let (m, rho) = closed_loop_matrix(1.0, 2.0, 0.05);
    assert_abs_diff_eq!(m.trace(), 1.9, epsilon = 1e-15);
    assert_abs_diff_eq!(m.determinant(), 0.9025, epsilon = 1e-12);
    assert_abs_diff_eq!(rho, 0.95, epsilon = 1e-9);
}

#[test]
fn integral_action_ramps_linearly() {
    let mut pi = PiController::new(0.0, 0.1, -3.0, 1.5).unwrap();
    let mut out = 0.0;
    for k in 1..=100 {
        out = pi_longitudinal(1.0, 0.0, &mut pi, 0.1);
        assert_abs_diff_eq!(out, 0.01 * k as f64, epsilon = 1e-12);
    }
    assert_abs_diff_eq!(out, 1.0, epsilon = 1e-12);
}

// ---------------------------------------------------------------- obstacles

/// Ground samples plus the surface of an axis-aligned box.
fn ground_with_box(x0: f64, x1: f64, half_width: f64, height: f64) -> Vec<[f64; 3]> {
    let mut pts = Vec::new();
    for i in 0..340 {
        for j in 0..101 {
            let (x, y) = (0.55 + i as f64 * 0.1, -5.0 + j as f64 * 0.1);
            if !(x >= x0 && x <= x1 && y.abs() <= half_width) {
                pts.push([x, y, 0.0]);
            }
        }
    }
    let n = 40;
    for i in 0..=n {
        for j in 0..=n {
            let x = x0 + (x1 - x0) * i as f64 / n as f64;
            let y = -half_width + 2.0 * half_width * j as f64 / n as f64;
            pts.push([x, y, height]);
        }
    }
    pts
}

#[test]
fn box_ahead_shows_its_height() {
    let pts = ground_with_box(10.0, 10.75, 0.375, 1.0);
    let grid = build_elevation(&pts, &Pose2D::identity(), &ElevationConfig::default()).unwrap();
    let g = grid.geometry;
    let mut tall = Vec::new();
    for row in 0..g.rows {
        for col in 0..g.cols {
            if grid.get(row, col).is_some_and(|h| h > 0.5) {
                tall.push(g.center(row, col));
            }
        }
    }
    // 3 rows x 3 columns from the 0.75 m footprint at 0.25 m cells, plus a
    // row and column where the far and side faces land on a boundary
    assert!((9..=16).contains(&tall.len()), "{} cells", tall.len());
    for &(x, y) in &tall {
        assert!((9.9..=10.9).contains(&x) && y.abs() <= 0.5, "({x}, {y})");
    }
    let (r, c) = g.cell_of(10.375, 0.1).unwrap();
    assert_eq!(grid.get(r, c), Some(1.0));
}

#[test]
fn half_critical_ramp_scores_one_half() {
    let params = TraversabilityParams {
        w_slope: 1.0,
        w_rough: 0.0,
        slope_crit: 0.4,
        rough_crit: 0.1,
        smooth: false,
    };
    let g = RasterGeometry::new(20, 20, 0.25, (0.0, -2.5)).unwrap();
    let mut grid = ElevationGrid::empty(g);
    for row in 0..g.rows {
        for col in 0..g.cols {
            let (x, _) = g.center(row, col);
            grid.height[g.index(row, col)] = Some(0.2 * x);
        }
    }
    let t = traversability(&grid, &params);
    for row in 1..19 {
        for col in 1..19 {
            assert_abs_diff_eq!(t.get(row, col).unwrap(), 0.5, epsilon = 1e-9);
        }
    }
}

fn straight_corridor() -> LanePolygon {
    LanePolygon::from_centerline(&QuadraticCenterline::new(0.0, 0.0, 0.0).unwrap(), 3.0, 0.5, 35.0, 0.5)
}

#[test]
fn lone_cell_is_not_an_obstacle() {
    let g = RasterGeometry::new(140, 140, 0.25, (0.0, -17.5)).unwrap();
    let mut score = vec![Some(1.0); g.len()];
    score[g.index(40, 70)] = Some(0.0);
    let trav = mapless_core::obstacle::TraversabilityGrid { geometry: g, score };
    assert!(detect_obstacles(&trav, &straight_corridor(), 0.5, 3).is_empty());
    assert_eq!(detect_obstacles(&trav, &straight_corridor(), 0.5, 1).len(), 1);
}

#[test]
fn pylon_at_24m_is_ranged() {
    let pts = ground_with_box(23.625, 24.375, 0.375, 1.0);
    let grid = build_elevation(&pts, &Pose2D::identity(), &ElevationConfig::default()).unwrap();
    let trav = traversability(&grid, &TraversabilityParams::default());
    let found = detect_obstacles(&trav, &straight_corridor(), 0.5, 3);
    assert_eq!(found.len(), 1, "{found:?}");
    assert_abs_diff_eq!(found[0].range, 24.0, epsilon = 0.5);
}

#[test]
fn noisy_sign_plane_is_ranged_within_5cm() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let noise = Normal::new(0.0, 0.02).unwrap();
    for _ in 0..100 {
        let pts: Vec<[f64; 3]> = (0..100)
            .map(|i| {
                let (y, z) = (-0.5 + (i % 10) as f64 / 9.0, -0.5 + (i / 10) as f64 / 9.0);
                [10.0 + noise.sample(&mut rng), y + noise.sample(&mut rng), z + noise.sample(&mut rng)]
            })
            .collect();
        let (_, d) = fit_plane_distance(&pts).unwrap();
        assert_abs_diff_eq!(d, 10.0, epsilon = 0.05);
    }
}

// ---------------------------------------------------------------- simulation

#[test]
fn constant_steer_traces_the_turning_circle() {
    let params = BicycleParams::new(1.5, 1e-3, 0.55).unwrap();
    let delta = 0.3f64;
    let radius = 1.5 / delta.tan();
    let mut s = VehicleState::new(Pose2D::identity(), 2.0);
    s.steer = delta;
    let (cx, cy) = (0.0, radius);
    let mut worst: f64 = 0.0;
    for _ in 0..20_000 {
        s = bicycle_step(&s, delta, 0.0, &params, 0.6);
        worst = worst.max(((s.pose.x - cx).hypot(s.pose.y - cy) - radius).abs() / radius);
    }
    assert!(worst < 1e-3, "relative radius error {worst}");
}

#[test]
fn rms_of_alternating_offsets() {
    let samples: Vec<(f64, SegmentKind)> = (0..10)
        .map(|i| (if i < 5 { 0.1 } else { -0.3 }, SegmentKind::Straight))
        .collect();
    assert_abs_diff_eq!(lateral_stats(&samples).rms, 0.05f64.sqrt(), epsilon = 1e-15);
    assert_abs_diff_eq!(lateral_stats(&samples).rms, 0.2236, epsilon = 5e-5);
}

// ---------------------------------------------------------------- reported figures

#[test]
fn acceptance_thresholds_match_the_reported_figures() {
    let tol = mapless_core::acceptance::Tolerances::default();
    assert_eq!(tol.lane_keeping_rms, 0.23);
    assert_eq!(tol.lane_keeping_straight_rms, 0.20);
    assert_eq!(tol.lane_keeping_turn_max, 1.0);
    assert_eq!(tol.reference_rms, 0.10);
    assert_eq!(tol.stop_runs, 10);
    assert_eq!(tol.stop_mean, 0.14);
    assert_eq!(tol.stop_max, 0.29);
    assert_eq!(tol.detection_range, 24.0);
    let fsm = FsmConfig::default();
    assert_eq!(fsm.v_cruise, 2.5);
    assert_abs_diff_eq!(1.0 / TICK, 26.0, epsilon = 1e-12);
}
