use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{Pose2D, RasterGeometry};

/// Extent and sensor sector of the elevation map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElevationConfig {
    /// Forward extent, m.
    pub length: f64,
    /// Lateral extent, centered on the vehicle, m.
    pub width: f64,
    pub resolution: f64,
    /// Full horizontal field of view, rad.
    pub fov: f64,
}

impl Default for ElevationConfig {
    fn default() -> Self {
        Self {
            length: 35.0,
            width: 35.0,
            resolution: 0.25,
            fov: 120f64.to_radians(),
        }
    }
}

impl ElevationConfig {
    pub fn geometry(&self) -> Result<RasterGeometry> {
        if !(self.length > 0.0 && self.width > 0.0) {
            return Err(Error::Invalid("elevation extent must be positive".into()));
        }
        let rows = (self.length / self.resolution).round() as usize;
        let cols = (self.width / self.resolution).round() as usize;
        RasterGeometry::new(rows, cols, self.resolution, (0.0, -0.5 * cols as f64 * self.resolution))
    }
}

/// 2.5D height map in the vehicle frame. Cells without returns hold `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationGrid {
    pub geometry: RasterGeometry,
    pub height: Vec<Option<f64>>,
    pub count: Vec<u32>,
}

impl ElevationGrid {
    pub fn empty(geometry: RasterGeometry) -> Self {
        Self {
            geometry,
            height: vec![None; geometry.len()],
            count: vec![0; geometry.len()],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.height[self.geometry.index(row, col)]
    }

    pub fn known_cells(&self) -> usize {
        self.height.iter().filter(|h| h.is_some()).count()
    }

    /// Heights as CSV rows; unknown cells are left blank.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.geometry;
        for row in 0..g.rows {
            let line: Vec<String> = (0..g.cols)
                .map(|col| self.get(row, col).map(|h| format!("{h:.4}")).unwrap_or_default())
                .collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Bins world-frame points into a height map around `pose`, keeping the
/// maximum height per cell. Points outside the forward sector or the grid
/// are dropped.
pub fn build_elevation(points: &[[f64; 3]], pose: &Pose2D, cfg: &ElevationConfig) -> Result<ElevationGrid> {
    let geometry = cfg.geometry()?;
    let mut grid = ElevationGrid::empty(geometry);
    let half_fov = 0.5 * cfg.fov;
    for p in points {
        if !p.iter().all(|v| v.is_finite()) {
            continue;
        }
        let (x, y) = pose.to_local(p[0], p[1]);
        if x <= 0.0 || y.atan2(x).abs() > half_fov {
            continue;
        }
        let Some((row, col)) = geometry.cell_of(x, y) else {
            continue;
        };
        let i = geometry.index(row, col);
        grid.height[i] = Some(grid.height[i].map_or(p[2], |h| h.max(p[2])));
        grid.count[i] += 1;
    }
    Ok(grid)
}
