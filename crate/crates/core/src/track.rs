//! Ground-truth track geometry and nearest-centerline queries.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Pose2D};

/// Curvature above which a centerline point counts as part of a turn, 1/m.
const TURN_CURVATURE: f64 = 0.05;
const GRID_CELL: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    Straight,
    Turn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub s: f64,
    pub curvature: f64,
    pub kind: SegmentKind,
}

/// Static box obstacle placed relative to the lane-0 centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    /// Arc length of the footprint center, m.
    pub s: f64,
    /// Left offset of the footprint center from the lane-0 centerline, m.
    pub lateral: f64,
    /// Extent along the track, m.
    pub length: f64,
    /// Extent across the track, m.
    pub width: f64,
    pub height: f64,
}

/// Result of projecting a point onto the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub s: f64,
    /// Signed distance, left of the centerline positive.
    pub lateral: f64,
    pub heading: f64,
    pub kind: SegmentKind,
    pub index: usize,
}

#[derive(Debug, Clone)]
pub struct TrackDefinition {
    points: Vec<TrackPoint>,
    pub lane_width: f64,
    /// Number of parallel lanes to the left of lane 0.
    pub adjacent_lanes: usize,
    pub closed: bool,
    pub stop_lines: Vec<f64>,
    pub obstacles: Vec<Obstacle>,
    grid: HashMap<(i64, i64), Vec<u32>>,
}

impl TrackDefinition {
    fn build(points: Vec<TrackPoint>, lane_width: f64, closed: bool) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Invalid("a track needs at least two points".into()));
        }
        if !(lane_width > 0.0) {
            return Err(Error::Invalid(format!("lane width must be positive, got {lane_width}")));
        }
        for w in points.windows(2) {
            if !(w[1].s > w[0].s) {
                return Err(Error::Invalid(format!(
                    "track arc length must increase strictly (s={} then {})",
                    w[0].s, w[1].s
                )));
            }
        }
        let mut grid: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, w) in points.windows(2).enumerate() {
            let (x0, x1) = (w[0].x.min(w[1].x), w[0].x.max(w[1].x));
            let (y0, y1) = (w[0].y.min(w[1].y), w[0].y.max(w[1].y));
            for cx in cell(x0)..=cell(x1) {
                for cy in cell(y0)..=cell(y1) {
                    grid.entry((cx, cy)).or_default().push(i as u32);
                }
            }
        }
        Ok(Self {
            points,
            lane_width,
            adjacent_lanes: 0,
            closed,
            stop_lines: Vec::new(),
            obstacles: Vec::new(),
            grid,
        })
    }

    /// Track through the given world-frame vertices. Headings and
    /// curvature come from the polyline itself.
    pub fn from_polyline(vertices: &[(f64, f64)], lane_width: f64, closed: bool) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Invalid("a track needs at least two points".into()));
        }
        let n = vertices.len();
        let mut s = vec![0.0; n];
        for i in 1..n {
            let (a, b) = (vertices[i - 1], vertices[i]);
            s[i] = s[i - 1] + (b.0 - a.0).hypot(b.1 - a.1);
        }
        let seg_heading = |i: usize| {
            let (a, b) = (vertices[i], vertices[i + 1]);
            (b.1 - a.1).atan2(b.0 - a.0)
        };
        let mut points = Vec::with_capacity(n);
        for i in 0..n {
            let (heading, curvature) = if i == 0 {
                (seg_heading(0), 0.0)
            } else if i == n - 1 {
                (seg_heading(n - 2), 0.0)
            } else {
                let h0 = seg_heading(i - 1);
                let turn = normalize_angle(seg_heading(i) - h0);
                let span = 0.5 * (s[i + 1] - s[i - 1]);
                let k = if span > 0.0 { turn / span } else { 0.0 };
                (normalize_angle(h0 + 0.5 * turn), k)
            };
            points.push(TrackPoint {
                x: vertices[i].0,
                y: vertices[i].1,
                heading,
                s: s[i],
                curvature,
                kind: if curvature.abs() > TURN_CURVATURE {
                    SegmentKind::Turn
                } else {
                    SegmentKind::Straight
                },
            });
        }
        Self::build(points, lane_width, closed)
    }

    /// Straight eastbound track starting at the origin.
    pub fn straight(length: f64, lane_width: f64, spacing: f64) -> Result<Self> {
        let n = (length / spacing).ceil().max(1.0) as usize;
        let points = (0..=n)
            .map(|i| {
                let s = (i as f64 * spacing).min(length);
                TrackPoint {
                    x: s,
                    y: 0.0,
                    heading: 0.0,
                    s,
                    curvature: 0.0,
                    kind: SegmentKind::Straight,
                }
            })
            .collect();
        Self::build(points, lane_width, false)
    }

    /// Closed counter-clockwise loop of `length` meters: two long and two
    /// short straights joined by four quarter turns of `turn_radius`.
    pub fn loop_track(length: f64, turn_radius: f64, lane_width: f64, spacing: f64) -> Result<Self> {
        let arcs = 2.0 * PI * turn_radius;
        let straights = 0.5 * (length - arcs);
        if !(straights > 0.0) || !(turn_radius > 0.0) {
            return Err(Error::Invalid(format!(
                "loop of length {length} cannot hold four turns of radius {turn_radius}"
            )));
        }
        let long = 0.6 * straights;
        let short = straights - long;
        let quarter = FRAC_PI_2 * turn_radius;
        // (length, curvature) pieces, starting on a long straight heading east
        let pieces = [
            (long, 0.0),
            (quarter, 1.0 / turn_radius),
            (short, 0.0),
            (quarter, 1.0 / turn_radius),
            (long, 0.0),
            (quarter, 1.0 / turn_radius),
            (short, 0.0),
            (quarter, 1.0 / turn_radius),
        ];
        let total: f64 = pieces.iter().map(|p| p.0).sum();
        let n = (total / spacing).round() as usize;
        let ds = total / n as f64;
        let mut points = Vec::with_capacity(n);
        let (mut x, mut y, mut h) = (0.0, 0.0, 0.0);
        let mut piece = 0;
        let mut piece_start = 0.0;
        // closed loop: the point at s = total coincides with s = 0 and is omitted
        for i in 0..n {
            let s = i as f64 * ds;
            while piece + 1 < pieces.len() && s >= piece_start + pieces[piece].0 - 1e-12 {
                piece_start += pieces[piece].0;
                piece += 1;
            }
            let k = pieces[piece].1;
            points.push(TrackPoint {
                x,
                y,
                heading: normalize_angle(h),
                s,
                curvature: k,
                kind: if k.abs() > TURN_CURVATURE {
                    SegmentKind::Turn
                } else {
                    SegmentKind::Straight
                },
            });
            // exact integration across piece boundaries within one step
            let mut remaining = ds;
            let mut at = s;
            let mut p = piece;
            let mut p_start = piece_start;
            while remaining > 1e-15 {
                let p_end = p_start + pieces[p].0;
                let step = if p + 1 < pieces.len() {
                    remaining.min(p_end - at).max(0.0)
                } else {
                    remaining
                };
                let k = pieces[p].1;
                if k == 0.0 {
                    x += step * h.cos();
                    y += step * h.sin();
                } else {
                    let h1 = h + k * step;
                    x += (h1.sin() - h.sin()) / k;
                    y += (h.cos() - h1.cos()) / k;
                    h = h1;
                }
                remaining -= step;
                at += step;
                if remaining > 1e-15 && p + 1 < pieces.len() {
                    p_start = p_end;
                    p += 1;
                }
            }
        }
        Self::build(points, lane_width, true)
    }

    pub fn with_adjacent_lanes(mut self, n: usize) -> Self {
        self.adjacent_lanes = n;
        self
    }

    pub fn with_stop_lines(mut self, mut stop_lines: Vec<f64>) -> Self {
        stop_lines.sort_by(f64::total_cmp);
        self.stop_lines = stop_lines;
        self
    }

    pub fn with_obstacles(mut self, obstacles: Vec<Obstacle>) -> Self {
        self.obstacles = obstacles;
        self
    }

    pub fn points(&self) -> &[TrackPoint] {
        &self.points
    }

    /// Total centerline length, including the closing segment of a loop.
    pub fn length(&self) -> f64 {
        let last = self.points.last().unwrap();
        if self.closed {
            let first = &self.points[0];
            last.s + (first.x - last.x).hypot(first.y - last.y)
        } else {
            last.s
        }
    }

    /// Checks the invariants that depend on the vehicle.
    pub fn validate(&self, vehicle_width: f64) -> Result<()> {
        if !(self.lane_width > vehicle_width) {
            return Err(Error::Invalid(format!(
                "lane width {} must exceed vehicle width {vehicle_width}",
                self.lane_width
            )));
        }
        Ok(())
    }

    /// Left offsets of the painted lane lines from the lane-0 centerline.
    pub fn lane_line_offsets(&self) -> Vec<f64> {
        (0..=self.adjacent_lanes + 1)
            .map(|k| (k as f64 - 0.5) * self.lane_width)
            .collect()
    }

    fn wrap(&self, s: f64) -> f64 {
        if self.closed {
            s.rem_euclid(self.length())
        } else {
            s.clamp(0.0, self.points.last().unwrap().s)
        }
    }

    fn segment(&self, i: usize) -> (&TrackPoint, &TrackPoint, f64) {
        let n = self.points.len();
        if i + 1 < n {
            (&self.points[i], &self.points[i + 1], self.points[i + 1].s)
        } else {
            (&self.points[n - 1], &self.points[0], self.length())
        }
    }

    fn segment_count(&self) -> usize {
        if self.closed {
            self.points.len()
        } else {
            self.points.len() - 1
        }
    }

    /// Pose on the centerline at arc length `s` (wrapped for loops, clamped
    /// otherwise).
    pub fn pose_at(&self, s: f64) -> Pose2D {
        let s = self.wrap(s);
        let i = self
            .points
            .partition_point(|p| p.s <= s)
            .saturating_sub(1)
            .min(self.segment_count() - 1);
        let (p, q, q_s) = self.segment(i);
        let len = q_s - p.s;
        let t = if len > 0.0 { ((s - p.s) / len).clamp(0.0, 1.0) } else { 0.0 };
        let dh = normalize_angle(q.heading - p.heading);
        Pose2D::new(
            p.x + t * (q.x - p.x),
            p.y + t * (q.y - p.y),
            p.heading + t * dh,
        )
    }

    /// World point `lateral` meters left of the centerline at `s`.
    pub fn offset_point(&self, s: f64, lateral: f64) -> (f64, f64) {
        self.pose_at(s).to_parent(0.0, lateral)
    }

    fn project_segment(&self, i: usize, x: f64, y: f64) -> (f64, Projection) {
        let (p, q, q_s) = self.segment(i);
        let (dx, dy) = (q.x - p.x, q.y - p.y);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((x - p.x) * dx + (y - p.y) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (px, py) = (p.x + t * dx, p.y + t * dy);
        let d2 = (x - px).powi(2) + (y - py).powi(2);
        let cross = dx * (y - p.y) - dy * (x - p.x);
        let lateral = d2.sqrt().copysign(cross);
        let kind = if t < 0.5 { p.kind } else { q.kind };
        let proj = Projection {
            s: p.s + t * (q_s - p.s),
            lateral,
            heading: normalize_angle(p.heading + t * normalize_angle(q.heading - p.heading)),
            kind,
            index: i,
        };
        (d2, proj)
    }

    /// Nearest centerline point over the whole track.
    pub fn project(&self, x: f64, y: f64) -> Projection {
        let (cx, cy) = (cell(x), cell(y));
        let mut best: Option<(f64, Projection)> = None;
        for r in 0..=48i64 {
            for gx in cx - r..=cx + r {
                for gy in cy - r..=cy + r {
                    if (gx - cx).abs() != r && (gy - cy).abs() != r {
                        continue;
                    }
                    if let Some(segs) = self.grid.get(&(gx, gy)) {
                        for &i in segs {
                            let cand = self.project_segment(i as usize, x, y);
                            if best.as_ref().is_none_or(|b| cand.0 < b.0) {
                                best = Some(cand);
                            }
                        }
                    }
                }
            }
            if let Some((d2, p)) = best {
                if d2.sqrt() <= r as f64 * GRID_CELL {
                    return p;
                }
            }
        }
        // far from the track: exhaustive search
        (0..self.segment_count())
            .map(|i| self.project_segment(i, x, y))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|b| b.1)
            .unwrap()
    }

    /// Nearest centerline point restricted to `[s_hint - window, s_hint + window]`.
    pub fn project_near(&self, x: f64, y: f64, s_hint: f64, window: f64) -> Projection {
        let n = self.points.len();
        let lo = s_hint - window;
        let hi = s_hint + window;
        let mut best: Option<(f64, Projection)> = None;
        let mut consider = |i: usize| {
            let cand = self.project_segment(i, x, y);
            if best.as_ref().is_none_or(|b| cand.0 < b.0) {
                best = Some(cand);
            }
        };
        if self.closed && window * 2.0 < self.length() {
            let start = self.index_at(lo.rem_euclid(self.length()));
            let count = (0..n)
                .take_while(|k| {
                    let i = (start + k) % n;
                    let rel = (self.points[i].s - lo).rem_euclid(self.length());
                    *k == 0 || rel <= hi - lo
                })
                .count();
            for k in 0..count {
                consider((start + k) % n);
            }
        } else {
            let a = self.index_at(lo.max(0.0));
            let b = self.index_at(hi.max(0.0)).min(self.segment_count() - 1);
            for i in a..=b.max(a) {
                consider(i.min(self.segment_count() - 1));
            }
        }
        best.unwrap().1
    }

    fn index_at(&self, s: f64) -> usize {
        self.points.partition_point(|p| p.s <= s).saturating_sub(1)
    }
}

fn cell(v: f64) -> i64 {
    (v / GRID_CELL).floor() as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn loop_track_closes_on_itself() {
        let t = TrackDefinition::loop_track(200.0, 3.0, 3.0, 0.05).unwrap();
        assert_abs_diff_eq!(t.length(), 200.0, epsilon = 1e-6);
        let last = t.points().last().unwrap();
        let first = t.points()[0];
        assert!((last.x - first.x).hypot(last.y - first.y) < 0.06);
        let turns = t.points().iter().filter(|p| p.kind == SegmentKind::Turn).count();
        let expected = (2.0 * PI * 3.0 / 0.05) as usize;
        assert!((turns as i64 - expected as i64).abs() <= 8, "{turns} vs {expected}");
    }

    #[test]
    fn projection_is_signed_left_positive() {
        let t = TrackDefinition::straight(50.0, 3.0, 0.5).unwrap();
        let p = t.project(10.2, 0.7);
        assert_abs_diff_eq!(p.s, 10.2, epsilon = 1e-12);
        assert_abs_diff_eq!(p.lateral, 0.7, epsilon = 1e-12);
        let p = t.project(10.2, -0.7);
        assert_abs_diff_eq!(p.lateral, -0.7, epsilon = 1e-12);
    }

    #[test]
    fn grid_projection_matches_exhaustive_search() {
        let t = TrackDefinition::loop_track(200.0, 3.0, 3.0, 0.1).unwrap();
        for k in 0..400 {
            let s = k as f64 * 0.5;
            let (x, y) = t.offset_point(s, ((k % 7) as f64 - 3.0) * 0.6);
            let fast = t.project(x, y);
            let slow = (0..t.segment_count())
                .map(|i| t.project_segment(i, x, y))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap()
                .1;
            assert_abs_diff_eq!(fast.lateral.abs(), slow.lateral.abs(), epsilon = 1e-12);
        }
    }

    #[test]
    fn windowed_projection_wraps_on_loops() {
        let t = TrackDefinition::loop_track(200.0, 3.0, 3.0, 0.1).unwrap();
        let (x, y) = t.offset_point(199.5, 0.2);
        let p = t.project_near(x, y, 0.2, 5.0);
        // heading interpolation on curved segments moves the offset point slightly
        assert_abs_diff_eq!(p.s, 199.5, epsilon = 1e-2);
        assert_abs_diff_eq!(p.lateral, 0.2, epsilon = 1e-2);
    }

    #[test]
    fn polyline_rejects_repeated_points() {
        assert!(TrackDefinition::from_polyline(&[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0)], 3.0, false).is_err());
    }

    #[test]
    fn lane_lines_cover_adjacent_lanes() {
        let t = TrackDefinition::straight(10.0, 3.0, 1.0).unwrap().with_adjacent_lanes(1);
        assert_eq!(t.lane_line_offsets(), vec![-1.5, 1.5, 4.5]);
    }
}
