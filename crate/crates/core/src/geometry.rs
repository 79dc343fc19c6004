//! Frames, poses and the quadratic ego-lane model.
//!
//! Vehicle frame: x forward, y to the left, origin at the rear axle.
//! World frame: fixed planar metric frame, headings counter-clockwise from +x.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Default sanity bound on the quadratic coefficient, 1/m.
pub const DEFAULT_A_MAX: f64 = 0.1;

/// Wraps an angle into (−π, π].
pub fn normalize_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Planar pose of the rear axle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn set_heading(&mut self, heading: f64) {
        self.heading = normalize_angle(heading);
    }

    /// Maps a point expressed in this pose's frame into the parent frame.
    pub fn to_parent(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        (self.x + c * x - s * y, self.y + s * x + c * y)
    }

    /// Maps a parent-frame point into this pose's frame.
    pub fn to_local(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        let dx = x - self.x;
        let dy = y - self.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// `self ∘ other`: `other` is expressed in this pose's frame.
    pub fn compose(&self, other: &Pose2D) -> Pose2D {
        let (x, y) = self.to_parent(other.x, other.y);
        Pose2D::new(x, y, self.heading + other.heading)
    }

    /// Expresses `other` (parent frame) in this pose's frame.
    pub fn relative(&self, other: &Pose2D) -> Pose2D {
        let (x, y) = self.to_local(other.x, other.y);
        Pose2D::new(x, y, other.heading - self.heading)
    }
}

/// Ego-lane centerline `y = a·x² + b·x + c` in the vehicle frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadraticCenterline {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl QuadraticCenterline {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::Invalid(format!(
                "centerline coefficients must be finite, got ({a}, {b}, {c})"
            )));
        }
        Ok(Self { a, b, c })
    }

    /// Like [`QuadraticCenterline::new`] but also enforces `|a| <= a_max`.
    pub fn bounded(a: f64, b: f64, c: f64, a_max: f64) -> Result<Self> {
        let q = Self::new(a, b, c)?;
        if a.abs() > a_max {
            return Err(Error::Invalid(format!(
                "|a| = {} exceeds the sanity bound {a_max}",
                a.abs()
            )));
        }
        Ok(q)
    }

    pub fn from_array(v: [f64; 3]) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }

    pub fn slope(&self, x: f64) -> f64 {
        2.0 * self.a * x + self.b
    }

    pub fn concavity(&self) -> f64 {
        2.0 * self.a
    }

    /// Exact signed curvature `f'' / (1 + f'²)^{3/2}`.
    pub fn curvature(&self, x: f64) -> f64 {
        let d = self.slope(x);
        self.concavity() / (1.0 + d * d).powf(1.5)
    }

    /// Same curve with `c` shifted left by `offset`.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            c: self.c + offset,
            ..*self
        }
    }
}

pub fn eval_centerline(c: &QuadraticCenterline, x: f64) -> f64 {
    c.eval(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub pose: Pose2D,
    pub curvature: f64,
    pub speed: f64,
}

impl Waypoint {
    pub fn new(pose: Pose2D, curvature: f64, speed: f64) -> Self {
        Self {
            pose,
            curvature,
            speed: speed.max(0.0),
        }
    }
}

/// Discretizes the centerline at longitudinal steps of `spacing` out to
/// `horizon`. Speeds are left at zero for the planner to fill in.
pub fn sample_waypoints(c: &QuadraticCenterline, spacing: f64, horizon: f64) -> Vec<Waypoint> {
    assert!(spacing > 0.0, "spacing must be positive");
    let n = if horizon < spacing {
        0
    } else {
        (horizon / spacing + 1e-9).floor() as usize
    };
    (0..=n)
        .map(|i| {
            let x = i as f64 * spacing;
            let pose = Pose2D::new(x, c.eval(x), c.slope(x).atan());
            Waypoint::new(pose, c.curvature(x), 0.0)
        })
        .collect()
}

/// Lateral and heading deviation from a tracking point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackingError {
    /// Signed lateral offset of the vehicle, left of the path positive.
    pub e_lateral: f64,
    /// Vehicle heading minus path heading, in (−π, π].
    pub e_heading: f64,
}

/// Interpolated point on a waypoint path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub pose: Pose2D,
    pub speed: f64,
    pub curvature: f64,
    /// Arc length from the first waypoint.
    pub arc: f64,
}

fn cumulative_arc(path: &[Waypoint]) -> Vec<f64> {
    let mut s = Vec::with_capacity(path.len());
    let mut acc = 0.0;
    s.push(0.0);
    for w in path.windows(2) {
        acc += (w[1].pose.x - w[0].pose.x).hypot(w[1].pose.y - w[0].pose.y);
        s.push(acc);
    }
    s
}

fn interpolate(path: &[Waypoint], arc: &[f64], target: f64) -> PathPoint {
    let last = path.len() - 1;
    if target >= arc[last] {
        let w = &path[last];
        return PathPoint {
            pose: w.pose,
            speed: w.speed,
            curvature: w.curvature,
            arc: arc[last],
        };
    }
    let target = target.max(0.0);
    // first segment whose end lies beyond the target
    let i = arc.partition_point(|&s| s <= target).saturating_sub(1).min(last - 1);
    let len = arc[i + 1] - arc[i];
    let t = if len > 0.0 { (target - arc[i]) / len } else { 0.0 };
    let (p, q) = (&path[i], &path[i + 1]);
    let dh = normalize_angle(q.pose.heading() - p.pose.heading());
    PathPoint {
        pose: Pose2D::new(
            p.pose.x + t * (q.pose.x - p.pose.x),
            p.pose.y + t * (q.pose.y - p.pose.y),
            p.pose.heading() + t * dh,
        ),
        speed: p.speed + t * (q.speed - p.speed),
        curvature: p.curvature + t * (q.curvature - p.curvature),
        arc: target,
    }
}

/// Arc length of the orthogonal projection of `(x, y)` onto the polyline.
fn closest_arc(path: &[Waypoint], arc: &[f64], x: f64, y: f64) -> f64 {
    if path.len() == 1 {
        return 0.0;
    }
    let mut best = (f64::INFINITY, 0.0);
    for (i, w) in path.windows(2).enumerate() {
        let (ax, ay) = (w[0].pose.x, w[0].pose.y);
        let (dx, dy) = (w[1].pose.x - ax, w[1].pose.y - ay);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((x - ax) * dx + (y - ay) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (px, py) = (ax + t * dx, ay + t * dy);
        let d2 = (x - px).powi(2) + (y - py).powi(2);
        if d2 < best.0 {
            best = (d2, arc[i] + t * (arc[i + 1] - arc[i]));
        }
    }
    best.1
}

/// Closest point on the path to the pose.
pub fn closest_point(pose: &Pose2D, path: &[Waypoint]) -> Result<PathPoint> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    let arc = cumulative_arc(path);
    let s = closest_arc(path, &arc, pose.x, pose.y);
    Ok(interpolate(path, &arc, s))
}

/// Tracking point `lookahead` meters of arc length beyond the closest
/// point. Saturates at the last waypoint.
pub fn tracking_point(pose: &Pose2D, path: &[Waypoint], lookahead: f64) -> Result<PathPoint> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    let arc = cumulative_arc(path);
    let s = closest_arc(path, &arc, pose.x, pose.y);
    Ok(interpolate(path, &arc, s + lookahead.max(0.0)))
}

/// Errors of `pose` relative to a given path point.
pub fn errors_to(pose: &Pose2D, target: &Pose2D) -> TrackingError {
    let (s, c) = target.heading().sin_cos();
    let dx = pose.x - target.x;
    let dy = pose.y - target.y;
    TrackingError {
        e_lateral: -s * dx + c * dy,
        e_heading: normalize_angle(pose.heading() - target.heading()),
    }
}

pub fn tracking_errors(pose: &Pose2D, path: &[Waypoint], lookahead: f64) -> Result<TrackingError> {
    let tp = tracking_point(pose, path, lookahead)?;
    Ok(errors_to(pose, &tp.pose))
}

/// Metric placement of a BEV raster: row index runs along +x, column index
/// along +y, `origin` is the outer corner of cell (0, 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterGeometry {
    pub rows: usize,
    pub cols: usize,
    pub resolution: f64,
    pub origin: (f64, f64),
}

impl RasterGeometry {
    pub fn new(rows: usize, cols: usize, resolution: f64, origin: (f64, f64)) -> Result<Self> {
        if !(resolution > 0.0) || rows == 0 || cols == 0 {
            return Err(Error::Invalid(format!(
                "raster needs positive size and resolution, got {rows}x{cols} @ {resolution}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            resolution,
            origin,
        })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Cell center, unchecked.
    pub fn center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin.0 + (row as f64 + 0.5) * self.resolution,
            self.origin.1 + (col as f64 + 0.5) * self.resolution,
        )
    }

    /// Cell containing a metric point, if any.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let r = ((x - self.origin.0) / self.resolution).floor();
        let c = ((y - self.origin.1) / self.resolution).floor();
        if r < 0.0 || c < 0.0 || r >= self.rows as f64 || c >= self.cols as f64 {
            return None;
        }
        Some((r as usize, c as usize))
    }
}

pub fn bev_project(pixel: (usize, usize), geometry: &RasterGeometry) -> Result<(f64, f64)> {
    let (row, col) = pixel;
    if row >= geometry.rows || col >= geometry.cols {
        return Err(Error::OutOfBounds {
            row,
            col,
            rows: geometry.rows,
            cols: geometry.cols,
        });
    }
    Ok(geometry.center(row, col))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn straight_east(n: usize, spacing: f64) -> Vec<Waypoint> {
        (0..n)
            .map(|i| Waypoint::new(Pose2D::new(i as f64 * spacing, 0.0, 0.0), 0.0, 1.0))
            .collect()
    }

    #[test]
    fn angle_wraps_into_half_open_interval() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert_abs_diff_eq!(normalize_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(Pose2D::new(0.0, 0.0, 7.0).heading(), 7.0 - 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn eval_examples() {
        let zero = QuadraticCenterline::default();
        assert_eq!(eval_centerline(&zero, 5.0), 0.0);
        let off = QuadraticCenterline::new(0.0, 0.0, 1.5).unwrap();
        assert_eq!(eval_centerline(&off, 10.0), 1.5);
        let q = QuadraticCenterline::new(0.01, 0.1, 0.5).unwrap();
        assert_abs_diff_eq!(eval_centerline(&q, 10.0), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn centerline_rejects_non_finite_and_unbounded() {
        assert!(QuadraticCenterline::new(f64::NAN, 0.0, 0.0).is_err());
        assert!(QuadraticCenterline::bounded(0.2, 0.0, 0.0, DEFAULT_A_MAX).is_err());
        assert!(QuadraticCenterline::bounded(0.05, 0.0, 0.0, DEFAULT_A_MAX).is_ok());
    }

    #[test]
    fn sample_zero_centerline() {
        let w = sample_waypoints(&QuadraticCenterline::default(), 1.0, 3.0);
        assert_eq!(w.len(), 4);
        for (i, p) in w.iter().enumerate() {
            assert_eq!(p.pose.x, i as f64);
            assert_eq!(p.pose.y, 0.0);
            assert_eq!(p.curvature, 0.0);
        }
    }

    #[test]
    fn sample_curvature_at_origin() {
        let q = QuadraticCenterline::new(0.01, 0.3, 0.0).unwrap();
        let w = sample_waypoints(&q, 0.5, 2.0);
        let expected = 2.0 * 0.01 / (1.0f64 + 0.09).powf(1.5);
        assert_abs_diff_eq!(w[0].curvature, expected, epsilon = 1e-15);
    }

    #[test]
    fn sample_short_horizon() {
        let w = sample_waypoints(&QuadraticCenterline::default(), 1.0, 0.5);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].pose.x, 0.0);
    }

    #[test]
    fn sampled_curvature_matches_finite_differences() {
        let q = QuadraticCenterline::new(0.03, -0.2, 0.4).unwrap();
        let h = 1e-3;
        for w in sample_waypoints(&q, 0.01, 5.0) {
            let x = w.pose.x;
            let d1 = (q.eval(x + h) - q.eval(x - h)) / (2.0 * h);
            let d2 = (q.eval(x + h) - 2.0 * q.eval(x) + q.eval(x - h)) / (h * h);
            let fd = d2 / (1.0 + d1 * d1).powf(1.5);
            assert!((fd - w.curvature).abs() < 1e-6, "x={x}: {fd} vs {}", w.curvature);
        }
    }

    #[test]
    fn tracking_error_examples() {
        let path = straight_east(20, 1.0);
        let e = tracking_errors(&Pose2D::new(3.0, 0.0, 0.0), &path, 2.0).unwrap();
        assert_abs_diff_eq!(e.e_lateral, 0.0);
        assert_abs_diff_eq!(e.e_heading, 0.0);

        let e = tracking_errors(&Pose2D::new(3.0, 1.0, 0.0), &path, 2.0).unwrap();
        assert_abs_diff_eq!(e.e_lateral, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.e_heading, 0.0);

        let e = tracking_errors(&Pose2D::new(3.0, 0.0, 0.1), &path, 2.0).unwrap();
        assert_abs_diff_eq!(e.e_lateral, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.e_heading, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn tracking_errors_reject_empty_path() {
        assert!(matches!(
            tracking_errors(&Pose2D::identity(), &[], 1.0),
            Err(Error::EmptyPath)
        ));
    }

    #[test]
    fn lookahead_saturates_at_last_waypoint() {
        let path = straight_east(5, 1.0);
        let tp = tracking_point(&Pose2D::identity(), &path, 100.0).unwrap();
        assert_eq!(tp.pose, path[4].pose);
    }

    #[test]
    fn bev_examples() {
        let g = RasterGeometry::new(10, 10, 0.1, (0.0, 0.0)).unwrap();
        let (x, y) = bev_project((0, 0), &g).unwrap();
        assert_abs_diff_eq!(x, 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(y, 0.05, epsilon = 1e-15);

        let g = RasterGeometry::new(10, 10, 0.25, (0.0, 0.0)).unwrap();
        let (x, _) = bev_project((4, 0), &g).unwrap();
        assert_abs_diff_eq!(x - g.origin.0, 1.125, epsilon = 1e-15);

        assert!(matches!(bev_project((10, 0), &g), Err(Error::OutOfBounds { .. })));
    }

    proptest! {
        #[test]
        fn even_when_no_linear_term(a in -0.1f64..0.1, c in -5.0f64..5.0, x in -50.0f64..50.0) {
            let q = QuadraticCenterline::new(a, 0.0, c).unwrap();
            prop_assert_eq!(q.eval(x), q.eval(-x));
        }

        #[test]
        fn tracking_errors_rigid_invariant(
            px in -3.0f64..3.0, py in -2.0f64..2.0, ph in -1.0f64..1.0,
            tx in -100.0f64..100.0, ty in -100.0f64..100.0, th in -3.1f64..3.1,
            a in -0.05f64..0.05, look in 0.0f64..5.0,
        ) {
            let q = QuadraticCenterline::new(a, 0.1, 0.2).unwrap();
            let path = sample_waypoints(&q, 0.5, 15.0);
            let pose = Pose2D::new(px + 2.0, py, ph);
            let e0 = tracking_errors(&pose, &path, look).unwrap();

            let g = Pose2D::new(tx, ty, th);
            let moved: Vec<Waypoint> = path
                .iter()
                .map(|w| Waypoint::new(g.compose(&w.pose), w.curvature, w.speed))
                .collect();
            let e1 = tracking_errors(&g.compose(&pose), &moved, look).unwrap();
            prop_assert!((e0.e_lateral - e1.e_lateral).abs() < 1e-9);
            prop_assert!(normalize_angle(e0.e_heading - e1.e_heading).abs() < 1e-9);
        }
    }
}
