//! Outlier-robust quadratic fitting: RANSAC over exact three-point
//! quadratics, then linear least squares on the consensus set.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::QuadraticCenterline;

/// Minimum spacing in x for a usable minimal sample.
const MIN_DX: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFit {
    pub centerline: QuadraticCenterline,
    pub inliers: usize,
}

/// Quadratic through three points with distinct x (Lagrange form).
fn interpolate3(p: [(f64, f64); 3]) -> Option<[f64; 3]> {
    let [(x0, y0), (x1, y1), (x2, y2)] = p;
    let (d01, d02, d12) = (x0 - x1, x0 - x2, x1 - x2);
    if d01.abs() < MIN_DX || d02.abs() < MIN_DX || d12.abs() < MIN_DX {
        return None;
    }
    let w0 = y0 / (d01 * d02);
    let w1 = -y1 / (d01 * d12);
    let w2 = y2 / (d02 * d12);
    let a = w0 + w1 + w2;
    let b = -(w0 * (x1 + x2) + w1 * (x0 + x2) + w2 * (x0 + x1));
    let c = w0 * x1 * x2 + w1 * x0 * x2 + w2 * x0 * x1;
    Some([a, b, c])
}

/// Ordinary least squares for `y = a x² + b x + c`.
pub fn least_squares_quadratic(points: &[(f64, f64)]) -> Result<QuadraticCenterline> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!(
            "least squares needs 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len();
    let design = DMatrix::from_fn(n, 3, |i, j| {
        let x = points[i].0;
        match j {
            0 => x * x,
            1 => x,
            _ => 1.0,
        }
    });
    let rhs = DVector::from_iterator(n, points.iter().map(|p| p.1));
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= smax * 1e-12 {
        return Err(Error::Degenerate("points do not determine a quadratic".into()));
    }
    let sol = svd
        .solve(&rhs, smax * 1e-14)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    QuadraticCenterline::new(sol[0], sol[1], sol[2])
}

/// Seeded RANSAC + least-squares refit. Identical inputs give identical
/// output.
pub fn fit_quadratic(points: &[(f64, f64)], ransac_iters: usize, inlier_tol: f64, seed: u64) -> Result<QuadraticFit> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!(
            "quadratic fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if !(inlier_tol > 0.0) {
        return Err(Error::Invalid(format!("inlier tolerance must be positive, got {inlier_tol}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = points.len();
    let mut best: Option<(usize, [f64; 3])> = None;
    let mut valid = 0;
    let max_draws = 10 * ransac_iters.max(1);
    let mut draws = 0;
    while valid < ransac_iters.max(1) && draws < max_draws {
        draws += 1;
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let k = rng.random_range(0..n);
        if i == j || j == k || i == k {
            continue;
        }
        let Some(m) = interpolate3([points[i], points[j], points[k]]) else {
            continue;
        };
        valid += 1;
        let count = points
            .iter()
            .filter(|(x, y)| (y - ((m[0] * x + m[1]) * x + m[2])).abs() <= inlier_tol)
            .count();
        if best.is_none_or(|(c, _)| count > c) {
            best = Some((count, m));
        }
    }
    let Some((_, m)) = best else {
        return Err(Error::Degenerate(
            "no minimal sample with three distinct x values".into(),
        ));
    };
    let inliers: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(x, y)| (y - ((m[0] * x + m[1]) * x + m[2])).abs() <= inlier_tol)
        .collect();
    let centerline = least_squares_quadratic(&inliers)?;
    Ok(QuadraticFit {
        centerline,
        inliers: inliers.len(),
    })
}
