//! Lane-marking evidence from rasters and laser scans, reduced to a single
//! ego-lane centerline per source.

pub mod fit;
pub mod lidar;
pub mod raster;
pub mod steerable;

pub use fit::{fit_quadratic, least_squares_quadratic, QuadraticFit};
pub use lidar::{accumulate_scans, lidar_intensity_edges, LaserPoint, LaserScanSim};
pub use raster::{extract_mask, mask_to_points, BevRaster, Grid, PixelMask};
pub use steerable::{basis_responses, steer_response, BasisResponses, Polarity, SteerableBank};

use crate::error::Result;
use crate::geometry::QuadraticCenterline;

/// RANSAC settings shared by both perception paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParams {
    pub ransac_iters: usize,
    pub inlier_tol: f64,
}

impl Default for FitParams {
    fn default() -> Self {
        Self {
            ransac_iters: 60,
            inlier_tol: 0.15,
        }
    }
}

/// Converts lane-line points into centerline evidence. Points left of the
/// prior centerline are shifted right by half a lane and vice versa; points
/// farther than a lane width from the prior are dropped.
pub fn centerline_points(points: &[(f64, f64)], prior: &QuadraticCenterline, lane_width: f64) -> Vec<(f64, f64)> {
    let half = 0.5 * lane_width;
    points
        .iter()
        .filter_map(|&(x, y)| {
            let d = y - prior.eval(x);
            if d.abs() > lane_width || d.abs() < 0.25 * lane_width {
                None
            } else if d > 0.0 {
                Some((x, y - half))
            } else {
                Some((x, y + half))
            }
        })
        .collect()
}

/// Full raster path: steered ridge response following the prior's local
/// direction, binarization, and a robust fit of the resulting centerline.
pub fn centerline_from_raster(
    raster: &BevRaster,
    bank: &SteerableBank,
    prior: &QuadraticCenterline,
    lane_width: f64,
    mask_threshold: f64,
    params: FitParams,
    seed: u64,
) -> Result<QuadraticFit> {
    let g = *raster.geometry();
    let basis = basis_responses(raster, bank)?;
    let response = basis.steer_rows(|row| prior.slope(g.center(row, 0).0).atan());
    let mask = extract_mask(&response, mask_threshold);
    let points = centerline_points(&mask_to_points(&mask), prior, lane_width);
    fit_quadratic(&points, params.ransac_iters, params.inlier_tol, seed)
}

/// Laser path: accumulated intensity edges to a robust centerline fit.
pub fn centerline_from_edges(
    edges: &[(f64, f64)],
    prior: &QuadraticCenterline,
    lane_width: f64,
    params: FitParams,
    seed: u64,
) -> Result<QuadraticFit> {
    let points = centerline_points(edges, prior, lane_width);
    fit_quadratic(&points, params.ransac_iters, params.inlier_tol, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lane_lines_collapse_onto_center() {
        let prior = QuadraticCenterline::new(0.0, 0.0, 0.2).unwrap();
        let pts = [(1.0, 1.7), (2.0, -1.3), (3.0, 5.0), (4.0, 0.25)];
        let c = centerline_points(&pts, &prior, 3.0);
        assert_eq!(c.len(), 2);
        assert!((c[0].1 - 0.2).abs() < 1e-12 && (c[1].1 - 0.2).abs() < 1e-12);
    }
}
