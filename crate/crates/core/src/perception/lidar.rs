//! Lane-paint extraction from laser intensity returns.

use crate::geometry::Pose2D;

/// Points higher than this above the ground plane are not road surface.
const GROUND_BAND: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
}

/// One sweep, vehicle frame. Each ring is ordered by azimuth.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LaserScanSim {
    pub rings: Vec<Vec<LaserPoint>>,
    pub timestamp: f64,
}

impl LaserScanSim {
    pub fn point_count(&self) -> usize {
        self.rings.iter().map(Vec::len).sum()
    }
}

/// Ground points where the intensity jumps by at least `threshold` between
/// neighbours in a ring. The reported location is the midpoint of the pair.
pub fn lidar_intensity_edges(scan: &LaserScanSim, threshold: f64) -> Vec<(f64, f64)> {
    assert!(threshold > 0.0, "gradient threshold must be positive");
    let mut out = Vec::new();
    for ring in &scan.rings {
        for w in ring.windows(2) {
            let (p, q) = (&w[0], &w[1]);
            if p.z.abs() > GROUND_BAND || q.z.abs() > GROUND_BAND {
                continue;
            }
            if (q.intensity - p.intensity).abs() >= threshold {
                out.push((0.5 * (p.x + q.x), 0.5 * (p.y + q.y)));
            }
        }
    }
    out
}

/// Merges the last `window` edge sets into the frame of the most recent pose.
pub fn accumulate_scans(edge_sets: &[(Pose2D, Vec<(f64, f64)>)], window: usize) -> Vec<(f64, f64)> {
    assert!(window >= 1, "window must be at least 1");
    let Some((latest, _)) = edge_sets.last() else {
        return Vec::new();
    };
    let start = edge_sets.len().saturating_sub(window);
    let mut out = Vec::new();
    for (pose, points) in &edge_sets[start..] {
        if pose == latest {
            out.extend_from_slice(points);
            continue;
        }
        out.extend(points.iter().map(|&(x, y)| {
            let (wx, wy) = pose.to_parent(x, y);
            latest.to_local(wx, wy)
        }));
    }
    out
}
