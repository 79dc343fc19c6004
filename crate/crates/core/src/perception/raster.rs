use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{bev_project, RasterGeometry};

/// Dense row-major grid of `f64` values over a [`RasterGeometry`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub geometry: RasterGeometry,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn zeros(geometry: RasterGeometry) -> Self {
        Self {
            geometry,
            data: vec![0.0; geometry.len()],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[self.geometry.index(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        let i = self.geometry.index(row, col);
        self.data[i] = v;
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Bird's-eye-view intensity raster, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct BevRaster(Grid);

impl BevRaster {
    pub fn new(geometry: RasterGeometry, data: Vec<f64>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::Invalid(format!(
                "raster data has {} cells, geometry needs {}",
                data.len(),
                geometry.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Invalid(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self(Grid { geometry, data }))
    }

    pub fn filled(geometry: RasterGeometry, value: f64) -> Result<Self> {
        Self::new(geometry, vec![value; geometry.len()])
    }

    pub fn geometry(&self) -> &RasterGeometry {
        &self.0.geometry
    }

    pub fn grid(&self) -> &Grid {
        &self.0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0.get(row, col)
    }
}

/// Boolean lane-marking mask sharing its source raster's geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMask {
    pub geometry: RasterGeometry,
    pub data: Vec<bool>,
}

impl PixelMask {
    pub fn empty(geometry: RasterGeometry) -> Self {
        Self {
            geometry,
            data: vec![false; geometry.len()],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[self.geometry.index(row, col)]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Cells with `response >= threshold * max(response)`. An all non-positive
/// response gives an empty mask, so dark (negative) responses never pass.
pub fn extract_mask(response: &Grid, threshold: f64) -> PixelMask {
    assert!(threshold > 0.0 && threshold <= 1.0, "threshold must be in (0, 1]");
    let mut mask = PixelMask::empty(response.geometry);
    let max = response.max();
    if !(max > 0.0) {
        return mask;
    }
    let cut = threshold * max;
    for (m, &v) in mask.data.iter_mut().zip(&response.data) {
        *m = v >= cut;
    }
    mask
}

/// Metric centers of all set cells, row-major.
pub fn mask_to_points(mask: &PixelMask) -> Vec<(f64, f64)> {
    let g = &mask.geometry;
    let mut out = Vec::new();
    for row in 0..g.rows {
        for col in 0..g.cols {
            if mask.get(row, col) {
                out.push(bev_project((row, col), g).expect("cell in bounds"));
            }
        }
    }
    out
}

/// Binary 8-bit PGM. Values are scaled linearly from `[lo, hi]` to 0..=255.
pub fn write_pgm<W: Write>(mut w: W, rows: usize, cols: usize, values: &[f64], lo: f64, hi: f64) -> Result<()> {
    write!(w, "P5\n{cols} {rows}\n255\n")?;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let bytes: Vec<u8> = values
        .iter()
        .map(|v| (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}

pub fn write_raster_pgm<W: Write>(w: W, raster: &BevRaster) -> Result<()> {
    let g = raster.geometry();
    write_pgm(w, g.rows, g.cols, &raster.grid().data, 0.0, 1.0)
}

pub fn write_mask_pgm<W: Write>(w: W, mask: &PixelMask) -> Result<()> {
    let v: Vec<f64> = mask.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    write_pgm(w, mask.geometry.rows, mask.geometry.cols, &v, 0.0, 1.0)
}

pub fn write_points_csv<W: Write>(mut w: W, points: &[(f64, f64)]) -> Result<()> {
    writeln!(w, "x,y")?;
    for (x, y) in points {
        writeln!(w, "{x:.6},{y:.6}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> RasterGeometry {
        RasterGeometry::new(4, 5, 0.1, (1.0, -0.25)).unwrap()
    }

    #[test]
    fn zero_response_gives_empty_mask() {
        assert_eq!(extract_mask(&Grid::zeros(geom()), 0.5).count(), 0);
    }

    #[test]
    fn single_peak_at_full_threshold() {
        let mut g = Grid::zeros(geom());
        g.set(2, 3, 0.7);
        g.set(1, 1, 0.2);
        let m = extract_mask(&g, 1.0);
        assert_eq!(m.count(), 1);
        assert!(m.get(2, 3));
    }

    #[test]
    fn threshold_between_peaks_keeps_higher() {
        let mut g = Grid::zeros(geom());
        g.set(0, 0, 1.0);
        g.set(3, 4, 0.6);
        let m = extract_mask(&g, 0.8);
        assert_eq!(m.count(), 1);
        assert!(m.get(0, 0));
        assert_eq!(extract_mask(&g, 0.5).count(), 2);
    }

    #[test]
    fn mask_points() {
        let g = geom();
        assert!(mask_to_points(&PixelMask::empty(g)).is_empty());

        let mut m = PixelMask::empty(g);
        m.data[g.index(2, 1)] = true;
        let p = mask_to_points(&m);
        assert_eq!(p, vec![g.center(2, 1)]);

        let mut m = PixelMask::empty(g);
        for r in 0..g.rows {
            m.data[g.index(r, 3)] = true;
        }
        let p = mask_to_points(&m);
        assert_eq!(p.len(), g.rows);
        assert!(p.iter().all(|q| q.1 == p[0].1));
    }

    #[test]
    fn raster_rejects_out_of_range_intensity() {
        assert!(BevRaster::new(geom(), vec![1.5; 20]).is_err());
        assert!(BevRaster::filled(geom(), 0.3).is_ok());
    }

    #[test]
    fn pgm_header_and_payload() {
        let r = BevRaster::filled(geom(), 1.0).unwrap();
        let mut buf = Vec::new();
        write_raster_pgm(&mut buf, &r).unwrap();
        assert!(buf.starts_with(b"P5\n5 4\n255\n"));
        assert_eq!(buf.len(), 11 + 20);
        assert!(buf[11..].iter().all(|&b| b == 255));
    }
}
