//! Synthetic sensing against the ground-truth track: fitted lane
//! measurements, bird's-eye rasters and multi-ring laser scans.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{normalize_angle, Pose2D, RasterGeometry};
use crate::perception::{least_squares_quadratic, BevRaster, LaserPoint, LaserScanSim};
use crate::track::TrackDefinition;

use super::vehicle::VehicleState;

/// True noise and timing of one lane-measurement source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceNoise {
    pub enabled: bool,
    pub rate_hz: f64,
    /// Standard deviations of `a`, `b`, `c`.
    pub sigma: [f64; 3],
    pub dropout: f64,
}

/// Portion of the true lane sampled for a fitted measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementWindow {
    pub x_min: f64,
    pub x_max: f64,
    /// Sampling stops once the lane turns this far from the vehicle axis, rad.
    pub max_tangent: f64,
    pub spacing: f64,
}

impl Default for MeasurementWindow {
    fn default() -> Self {
        Self {
            x_min: 1.0,
            x_max: 12.0,
            max_tangent: 45f64.to_radians(),
            spacing: 0.25,
        }
    }
}

fn gaussian(rng: &mut impl Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
    } else {
        0.0
    }
}

/// Vehicle-frame samples of the lane centerline `lane_offset` meters left of
/// the reference line, starting at the vehicle and stopping where the lane
/// bends past `window.max_tangent`.
pub fn lane_points_local(pose: &Pose2D, track: &TrackDefinition, s_vehicle: f64, lane_offset: f64, window: &MeasurementWindow) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let end = if track.closed {
        f64::INFINITY
    } else {
        track.length()
    };
    let reach = window.x_max * 2.0;
    let mut k = 0;
    loop {
        let s = s_vehicle + k as f64 * window.spacing;
        k += 1;
        if s > end || s > s_vehicle + reach {
            break;
        }
        let p = track.pose_at(s);
        if normalize_angle(p.heading() - pose.heading()).abs() > window.max_tangent {
            break;
        }
        let (wx, wy) = p.to_parent(0.0, lane_offset);
        let (x, y) = pose.to_local(wx, wy);
        if x > window.x_max {
            break;
        }
        if x >= window.x_min {
            out.push((x, y));
        }
    }
    out
}

/// Least-squares quadratic of the true lane in the vehicle frame, plus the
/// source's Gaussian noise. `None` on dropout, when the vehicle is outside
/// the lane corridor, or when too little lane is visible.
#[allow(clippy::too_many_arguments)]
pub fn synth_lane_measurement(
    state: &VehicleState,
    track: &TrackDefinition,
    s_vehicle: f64,
    vehicle_lateral: f64,
    lane_offset: f64,
    window: &MeasurementWindow,
    noise: &SourceNoise,
    rng: &mut impl Rng,
) -> Option<[f64; 3]> {
    if rng.random::<f64>() < noise.dropout {
        return None;
    }
    if (vehicle_lateral - lane_offset).abs() > track.lane_width {
        return None;
    }
    let pts = lane_points_local(&state.pose, track, s_vehicle, lane_offset, window);
    if pts.len() < 3 {
        return None;
    }
    let fit = least_squares_quadratic(&pts).ok()?;
    let mut y = fit.to_array();
    for (v, s) in y.iter_mut().zip(noise.sigma) {
        *v += gaussian(rng, s);
    }
    Some(y)
}

/// Lane-0 centerline near the vehicle as a vehicle-frame polyline, used to
/// look up signed lateral positions of many points at once.
struct LocalCenterline {
    pts: Vec<(f64, f64)>,
    /// Segments whose `reach` neighbourhood touches each unit cell.
    cells: HashMap<(i64, i64), Vec<usize>>,
    reach: f64,
}

impl LocalCenterline {
    fn new(pose: &Pose2D, track: &TrackDefinition, s_vehicle: f64, behind: f64, ahead: f64, spacing: f64, reach: f64) -> Self {
        let n = ((behind + ahead) / spacing).ceil() as usize;
        let pts: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let s = s_vehicle - behind + i as f64 * spacing;
                let p = track.pose_at(s);
                pose.to_local(p.x, p.y)
            })
            .collect();
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, w) in pts.windows(2).enumerate() {
            let ((ax, ay), (bx, by)) = (w[0], w[1]);
            let (x0, x1) = ((ax.min(bx) - reach).floor() as i64, (ax.max(bx) + reach).floor() as i64);
            let (y0, y1) = ((ay.min(by) - reach).floor() as i64, (ay.max(by) + reach).floor() as i64);
            for cx in x0..=x1 {
                for cy in y0..=y1 {
                    cells.entry((cx, cy)).or_default().push(i);
                }
            }
        }
        Self { pts, cells, reach }
    }

    /// Signed distance, left positive, or `None` beyond the reach.
    fn lateral(&self, x: f64, y: f64) -> Option<f64> {
        let segs = self.cells.get(&(x.floor() as i64, y.floor() as i64))?;
        let mut best = (f64::INFINITY, 0.0);
        for &i in segs {
            let ((ax, ay), (bx, by)) = (self.pts[i], self.pts[i + 1]);
            let (dx, dy) = (bx - ax, by - ay);
            let len2 = dx * dx + dy * dy;
            if len2 == 0.0 {
                continue;
            }
            let t = (((x - ax) * dx + (y - ay) * dy) / len2).clamp(0.0, 1.0);
            let (px, py) = (ax + t * dx, ay + t * dy);
            let d2 = (x - px).powi(2) + (y - py).powi(2);
            if d2 < best.0 {
                let cross = dx * (y - ay) - dy * (x - ax);
                best = (d2, d2.sqrt().copysign(cross));
            }
        }
        (best.0 <= self.reach * self.reach).then_some(best.1)
    }
}

fn paint_reach(lines: &[f64], margin: f64) -> f64 {
    lines.iter().fold(0.0, |m: f64, o| m.max(o.abs())) + margin
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterConfig {
    pub x_min: f64,
    pub length: f64,
    pub half_width: f64,
    pub resolution: f64,
    pub paint_width: f64,
    pub background: f64,
    pub paint: f64,
    /// Standard deviation of per-cell intensity noise.
    pub speckle: f64,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            x_min: 1.0,
            length: 12.0,
            half_width: 4.0,
            resolution: 0.1,
            paint_width: 0.15,
            background: 0.2,
            paint: 0.9,
            speckle: 0.05,
        }
    }
}

impl RasterConfig {
    pub fn geometry(&self) -> RasterGeometry {
        let rows = (self.length / self.resolution).round() as usize;
        let cols = (2.0 * self.half_width / self.resolution).round() as usize;
        RasterGeometry::new(rows, cols, self.resolution, (self.x_min, -self.half_width))
            .expect("positive raster extent")
    }
}

/// Top-down intensity image with painted lane lines. Cell intensity blends
/// background and paint by the fraction of the cell width covered.
pub fn synth_bev_raster(state: &VehicleState, track: &TrackDefinition, s_vehicle: f64, cfg: &RasterConfig, rng: &mut impl Rng) -> BevRaster {
    let g = cfg.geometry();
    let lines = track.lane_line_offsets();
    let reach = paint_reach(&lines, cfg.paint_width + cfg.resolution);
    let local = LocalCenterline::new(&state.pose, track, s_vehicle, 3.0, cfg.x_min + cfg.length + 6.0, 0.2, reach);
    let half_paint = 0.5 * cfg.paint_width;
    let mut data = Vec::with_capacity(g.len());
    for row in 0..g.rows {
        for col in 0..g.cols {
            let (x, y) = g.center(row, col);
            let half_cell = 0.5 * cfg.resolution;
            let cover = local.lateral(x, y).map_or(0.0, |d| {
                lines
                .iter()
                .map(|o| {
                    let overlap = (o + half_paint).min(d + half_cell) - (o - half_paint).max(d - half_cell);
                    (overlap / cfg.resolution).clamp(0.0, 1.0)
                })
                .fold(0.0, f64::max)
            });
            let v = cfg.background + (cfg.paint - cfg.background) * cover;
            data.push((v + gaussian(rng, cfg.speckle)).clamp(0.0, 1.0));
        }
    }
    BevRaster::new(g, data).expect("intensities clamped to [0, 1]")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanConfig {
    pub rings: usize,
    pub elevation_top: f64,
    pub elevation_bottom: f64,
    pub azimuth_step: f64,
    pub half_fov: f64,
    /// Sensor height above ground, m.
    pub height: f64,
    pub max_range: f64,
    pub range_noise: f64,
    pub intensity_noise: f64,
    pub ground_intensity: f64,
    pub paint_intensity: f64,
    pub obstacle_intensity: f64,
    pub sign_intensity: f64,
    pub paint_width: f64,
    /// Paint is only resolved for ground returns closer than this, m.
    pub paint_range: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            rings: 64,
            elevation_top: 2f64.to_radians(),
            elevation_bottom: (-24.8f64).to_radians(),
            azimuth_step: 0.2f64.to_radians(),
            half_fov: 60f64.to_radians(),
            height: 1.9,
            max_range: 60.0,
            range_noise: 0.01,
            intensity_noise: 0.03,
            ground_intensity: 0.15,
            paint_intensity: 0.8,
            obstacle_intensity: 0.5,
            sign_intensity: 0.9,
            paint_width: 0.15,
            paint_range: 18.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct BoxObstacle {
    center: (f64, f64),
    yaw: f64,
    half: (f64, f64),
    height: f64,
}

/// Rectangular vertical panel facing oncoming traffic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignPanel {
    pub center: [f64; 3],
    /// Horizontal unit normal, world frame.
    pub normal: (f64, f64),
    pub half_width: f64,
    pub half_height: f64,
    /// Arc length of the associated stop line.
    pub stop_s: f64,
}

/// Static scene content hit by the laser.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    boxes: Vec<BoxObstacle>,
    pub signs: Vec<SignPanel>,
}

impl Scene {
    /// Obstacles from the track and a stop-sign panel beside every stop
    /// line, right of the lane, facing the direction of travel.
    pub fn from_track(track: &TrackDefinition) -> Self {
        let boxes = track
            .obstacles
            .iter()
            .map(|o| {
                let p = track.pose_at(o.s);
                BoxObstacle {
                    center: p.to_parent(0.0, o.lateral),
                    yaw: p.heading(),
                    half: (0.5 * o.length, 0.5 * o.width),
                    height: o.height,
                }
            })
            .collect();
        let signs = track
            .stop_lines
            .iter()
            .map(|&s| {
                let p = track.pose_at(s);
                let (x, y) = p.to_parent(0.0, -(0.5 * track.lane_width + 0.75));
                let (sn, cs) = p.heading().sin_cos();
                SignPanel {
                    center: [x, y, 1.875],
                    normal: (-cs, -sn),
                    half_width: 0.375,
                    half_height: 0.375,
                    stop_s: s,
                }
            })
            .collect();
        Self { boxes, signs }
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty() && self.signs.is_empty()
    }
}

/// Ray-box distance by the slab method in the box frame.
fn ray_box(origin: [f64; 3], dir: [f64; 3], b: &BoxObstacle) -> Option<f64> {
    let (s, c) = b.yaw.sin_cos();
    let (ox, oy) = (origin[0] - b.center.0, origin[1] - b.center.1);
    let o = [c * ox + s * oy, -s * ox + c * oy, origin[2]];
    let d = [c * dir[0] + s * dir[1], -s * dir[0] + c * dir[1], dir[2]];
    let lo = [-b.half.0, -b.half.1, 0.0];
    let hi = [b.half.0, b.half.1, b.height];
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for k in 0..3 {
        if d[k].abs() < 1e-12 {
            if o[k] < lo[k] || o[k] > hi[k] {
                return None;
            }
            continue;
        }
        let (a, b) = ((lo[k] - o[k]) / d[k], (hi[k] - o[k]) / d[k]);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
        if t0 > t1 {
            return None;
        }
    }
    (t0 > 0.0).then_some(t0)
}

fn ray_panel(origin: [f64; 3], dir: [f64; 3], p: &SignPanel) -> Option<f64> {
    let (nx, ny) = p.normal;
    let denom = nx * dir[0] + ny * dir[1];
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = (nx * (p.center[0] - origin[0]) + ny * (p.center[1] - origin[1])) / denom;
    if t <= 0.0 {
        return None;
    }
    let hit = [origin[0] + t * dir[0], origin[1] + t * dir[1], origin[2] + t * dir[2]];
    // in-plane horizontal axis is perpendicular to the normal
    let along = -ny * (hit[0] - p.center[0]) + nx * (hit[1] - p.center[1]);
    let up = hit[2] - p.center[2];
    (along.abs() <= p.half_width && up.abs() <= p.half_height).then_some(t)
}

/// Output of one laser sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub scan: LaserScanSim,
    /// Vehicle-frame returns from stop-sign panels, as a detector's
    /// bounding-box selection would provide.
    pub sign_hits: Vec<[f64; 3]>,
}

/// Casts every ring and azimuth from the sensor against ground, obstacle
/// boxes and sign panels. Returned points are in the vehicle frame with
/// `z` measured from the ground.
pub fn synth_scan(state: &VehicleState, track: &TrackDefinition, s_vehicle: f64, scene: &Scene, cfg: &ScanConfig, timestamp: f64, rng: &mut impl Rng) -> ScanResult {
    let pose = &state.pose;
    let (ps, pc) = pose.heading().sin_cos();
    let origin = [pose.x, pose.y, cfg.height];
    let lines = track.lane_line_offsets();
    let local = LocalCenterline::new(pose, track, s_vehicle, 3.0, cfg.paint_range + 6.0, 0.25, paint_reach(&lines, cfg.paint_width));
    let half_paint = 0.5 * cfg.paint_width;
    let n_az = (2.0 * cfg.half_fov / cfg.azimuth_step).round() as usize + 1;
    let mut rings = Vec::with_capacity(cfg.rings);
    let mut sign_hits = Vec::new();
    for r in 0..cfg.rings {
        let frac = if cfg.rings > 1 {
            r as f64 / (cfg.rings - 1) as f64
        } else {
            0.0
        };
        let elev = cfg.elevation_top + (cfg.elevation_bottom - cfg.elevation_top) * frac;
        let (se, ce) = elev.sin_cos();
        let mut ring = Vec::with_capacity(n_az);
        for a in 0..n_az {
            let az = -cfg.half_fov + a as f64 * cfg.azimuth_step;
            let (sa, ca) = az.sin_cos();
            let local_dir = (ce * ca, ce * sa);
            let dir = [
                pc * local_dir.0 - ps * local_dir.1,
                ps * local_dir.0 + pc * local_dir.1,
                se,
            ];
            let mut best = (f64::INFINITY, 0u8);
            if se < 0.0 {
                best = (cfg.height / -se, 0);
            }
            for b in &scene.boxes {
                if let Some(t) = ray_box(origin, dir, b) {
                    if t < best.0 {
                        best = (t, 1);
                    }
                }
            }
            for p in &scene.signs {
                if let Some(t) = ray_panel(origin, dir, p) {
                    if t < best.0 {
                        best = (t, 2);
                    }
                }
            }
            if best.0 > cfg.max_range {
                continue;
            }
            let t = best.0 + gaussian(rng, cfg.range_noise);
            let x = t * local_dir.0;
            let y = t * local_dir.1;
            let z = cfg.height + t * se;
            let base = match best.1 {
                0 => {
                    if x < cfg.paint_range {
                        let on_paint = local.lateral(x, y).is_some_and(|d| lines.iter().any(|o| (d - o).abs() <= half_paint));
                        if on_paint {
                            cfg.paint_intensity
                        } else {
                            cfg.ground_intensity
                        }
                    } else {
                        cfg.ground_intensity
                    }
                }
                1 => cfg.obstacle_intensity,
                _ => cfg.sign_intensity,
            };
            let intensity = (base + gaussian(rng, cfg.intensity_noise)).clamp(0.0, 1.0);
            if best.1 == 2 {
                sign_hits.push([x, y, z]);
            }
            ring.push(LaserPoint { x, y, z, intensity });
        }
        rings.push(ring);
    }
    ScanResult {
        scan: LaserScanSim { rings, timestamp },
        sign_hits,
    }
}

/// World-frame points of a scan within `max_range`, thinned to the highest
/// return per `cell` x `cell` column.
pub fn scan_to_world(scan: &LaserScanSim, pose: &Pose2D, max_range: f64, cell: f64) -> Vec<[f64; 3]> {
    let mut columns: BTreeMap<(i64, i64), [f64; 3]> = BTreeMap::new();
    for p in scan.rings.iter().flatten() {
        if p.x.hypot(p.y) > max_range {
            continue;
        }
        let (wx, wy) = pose.to_parent(p.x, p.y);
        let key = ((wx / cell).floor() as i64, (wy / cell).floor() as i64);
        columns
            .entry(key)
            .and_modify(|q| {
                if p.z > q[2] {
                    *q = [wx, wy, p.z];
                }
            })
            .or_insert([wx, wy, p.z]);
    }
    columns.into_values().collect()
}
