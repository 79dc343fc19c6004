use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Plane `normal · p = offset` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFit {
    pub normal: [f64; 3],
    pub offset: f64,
    pub rms_residual: f64,
}

/// Total least-squares plane through the points and its distance from the
/// vehicle origin.
pub fn fit_plane_distance(points: &[[f64; 3]]) -> Result<(PlaneFit, f64)> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!("plane fit needs 3 points, got {}", points.len())));
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vector3::zeros(), |acc, p| acc + Vector3::from(*p)) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = Vector3::from(*p) - centroid;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (lo, mid, hi) = (
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    if !(hi > 0.0) || mid <= 1e-12 * hi {
        return Err(Error::Degenerate("points do not span a plane".into()));
    }
    let mut normal: Vector3<f64> = eig.eigenvectors.column(order[0]).normalize();
    let mut offset = normal.dot(&centroid);
    if offset < 0.0 {
        normal = -normal;
        offset = -offset;
    }
    let rms = (lo.max(0.0)).sqrt();
    Ok((
        PlaneFit {
            normal: normal.into(),
            offset,
            rms_residual: rms,
        },
        offset.abs(),
    ))
}
