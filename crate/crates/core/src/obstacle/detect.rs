use crate::geometry::QuadraticCenterline;

use super::traversability::TraversabilityGrid;

/// Closed polygon in the vehicle frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LanePolygon {
    pub vertices: Vec<(f64, f64)>,
}

impl LanePolygon {
    /// Region between the lane lines of `centerline` for `x` in `[x0, x1]`.
    pub fn from_centerline(centerline: &QuadraticCenterline, lane_width: f64, x0: f64, x1: f64, step: f64) -> Self {
        let n = (((x1 - x0) / step).ceil() as usize).max(1);
        let xs: Vec<f64> = (0..=n).map(|i| x0 + (x1 - x0) * i as f64 / n as f64).collect();
        let half = 0.5 * lane_width;
        let mut vertices: Vec<(f64, f64)> = xs.iter().map(|&x| (x, centerline.eval(x) + half)).collect();
        vertices.extend(xs.iter().rev().map(|&x| (x, centerline.eval(x) - half)));
        Self { vertices }
    }

    /// Even-odd rule.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let v = &self.vertices;
        let mut inside = false;
        let mut j = v.len().wrapping_sub(1);
        for i in 0..v.len() {
            let (xi, yi) = v[i];
            let (xj, yj) = v[j];
            if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleCluster {
    pub cells: Vec<(usize, usize)>,
    pub centroid: (f64, f64),
    pub range: f64,
    /// Size along x and y, m.
    pub extent: (f64, f64),
}

/// Connected groups (8-neighbourhood) of in-corridor cells scoring below
/// `threshold`. Groups smaller than `min_cluster_size` are dropped. Output is
/// sorted by range.
pub fn detect_obstacles(
    trav: &TraversabilityGrid,
    corridor: &LanePolygon,
    threshold: f64,
    min_cluster_size: usize,
) -> Vec<ObstacleCluster> {
    assert!(threshold > 0.0 && threshold < 1.0, "threshold must lie in (0, 1)");
    let g = trav.geometry;
    let occupied: Vec<bool> = (0..g.len())
        .map(|i| {
            let (row, col) = (i / g.cols, i % g.cols);
            trav.score[i].is_some_and(|s| s < threshold) && {
                let (x, y) = g.center(row, col);
                corridor.contains(x, y)
            }
        })
        .collect();
    let mut seen = vec![false; g.len()];
    let mut clusters = Vec::new();
    for start in 0..g.len() {
        if !occupied[start] || seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut cells = Vec::new();
        while let Some(i) = stack.pop() {
            let (row, col) = (i / g.cols, i % g.cols);
            cells.push((row, col));
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (r, c) = (row as i64 + dr, col as i64 + dc);
                    if r < 0 || c < 0 || r as usize >= g.rows || c as usize >= g.cols {
                        continue;
                    }
                    let j = g.index(r as usize, c as usize);
                    if occupied[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if cells.len() < min_cluster_size.max(1) {
            continue;
        }
        cells.sort_unstable();
        let centers: Vec<(f64, f64)> = cells.iter().map(|&(r, c)| g.center(r, c)).collect();
        let n = centers.len() as f64;
        let cx = centers.iter().map(|p| p.0).sum::<f64>() / n;
        let cy = centers.iter().map(|p| p.1).sum::<f64>() / n;
        let span = |f: fn(&(f64, f64)) -> f64| {
            let lo = centers.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = centers.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            hi - lo + g.resolution
        };
        clusters.push(ObstacleCluster {
            extent: (span(|p| p.0), span(|p| p.1)),
            cells,
            centroid: (cx, cy),
            range: cx.hypot(cy),
        });
    }
    clusters.sort_by(|a, b| a.range.total_cmp(&b.range));
    clusters
}
