use crate::geometry::RasterGeometry;

use super::elevation::ElevationGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraversabilityParams {
    pub w_slope: f64,
    pub w_rough: f64,
    /// Rise over run at which slope alone saturates.
    pub slope_crit: f64,
    /// Height standard deviation at which roughness saturates, m.
    pub rough_crit: f64,
    /// Apply a 3x3 mean to the scores.
    pub smooth: bool,
}

impl Default for TraversabilityParams {
    fn default() -> Self {
        Self {
            w_slope: 0.7,
            w_rough: 0.3,
            slope_crit: 0.4,
            rough_crit: 0.1,
            smooth: true,
        }
    }
}

/// Scores in [0, 1], 1 fully traversable; `None` where no height is known.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversabilityGrid {
    pub geometry: RasterGeometry,
    pub score: Vec<Option<f64>>,
}

impl TraversabilityGrid {
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.score[self.geometry.index(row, col)]
    }
}

fn neighbours(g: &RasterGeometry, row: usize, col: usize, radius: i64) -> impl Iterator<Item = (usize, usize)> + '_ {
    (-radius..=radius).flat_map(move |dr| {
        (-radius..=radius).filter_map(move |dc| {
            let (r, c) = (row as i64 + dr, col as i64 + dc);
            (r >= 0 && c >= 0 && (r as usize) < g.rows && (c as usize) < g.cols).then_some((r as usize, c as usize))
        })
    })
}

pub fn traversability(grid: &ElevationGrid, params: &TraversabilityParams) -> TraversabilityGrid {
    let g = grid.geometry;
    let mut raw = vec![None; g.len()];
    for row in 0..g.rows {
        for col in 0..g.cols {
            let Some(h) = grid.get(row, col) else { continue };
            let mut step: f64 = 0.0;
            for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (r, c) = (row as i64 + dr, col as i64 + dc);
                if r < 0 || c < 0 || r as usize >= g.rows || c as usize >= g.cols {
                    continue;
                }
                if let Some(hn) = grid.get(r as usize, c as usize) {
                    step = step.max((h - hn).abs());
                }
            }
            let slope = step / g.resolution;
            let window: Vec<f64> = neighbours(&g, row, col, 1).filter_map(|(r, c)| grid.get(r, c)).collect();
            let mean = window.iter().sum::<f64>() / window.len() as f64;
            let rough = (window.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / window.len() as f64).sqrt();
            let cost = params.w_slope * (slope / params.slope_crit).min(1.0)
                + params.w_rough * (rough / params.rough_crit).min(1.0);
            raw[g.index(row, col)] = Some(1.0 - cost.clamp(0.0, 1.0));
        }
    }
    if !params.smooth {
        return TraversabilityGrid { geometry: g, score: raw };
    }
    let mut score = vec![None; g.len()];
    for row in 0..g.rows {
        for col in 0..g.cols {
            if raw[g.index(row, col)].is_none() {
                continue;
            }
            let vals: Vec<f64> = neighbours(&g, row, col, 1).filter_map(|(r, c)| raw[g.index(r, c)]).collect();
            score[g.index(row, col)] = Some(vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }
    TraversabilityGrid { geometry: g, score }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_from(f: impl Fn(usize, usize) -> f64) -> ElevationGrid {
        let g = RasterGeometry::new(12, 12, 0.25, (0.0, -1.5)).unwrap();
        let mut e = ElevationGrid::empty(g);
        for r in 0..12 {
            for c in 0..12 {
                e.height[g.index(r, c)] = Some(f(r, c));
                e.count[g.index(r, c)] = 1;
            }
        }
        e
    }

    #[test]
    fn flat_is_fully_traversable() {
        let t = traversability(&grid_from(|_, _| 0.3), &TraversabilityParams::default());
        assert!(t.score.iter().all(|s| *s == Some(1.0)));
    }

    #[test]
    fn step_saturates_slope() {
        let p = TraversabilityParams {
            w_slope: 1.0,
            w_rough: 0.0,
            smooth: false,
            ..Default::default()
        };
        let step = p.slope_crit * 0.25;
        let t = traversability(&grid_from(|r, _| if r >= 6 { step } else { 0.0 }), &p);
        for c in 0..12 {
            assert!(t.get(5, c).unwrap().abs() < 1e-12);
            assert!(t.get(6, c).unwrap().abs() < 1e-12);
            assert_eq!(t.get(2, c), Some(1.0));
        }
    }

    #[test]
    fn half_critical_ramp_scores_one_half() {
        let p = TraversabilityParams {
            w_slope: 1.0,
            w_rough: 0.0,
            ..Default::default()
        };
        let rise = 0.5 * p.slope_crit * 0.25;
        let t = traversability(&grid_from(|r, _| r as f64 * rise), &p);
        for r in 2..10 {
            for c in 2..10 {
                assert!((t.get(r, c).unwrap() - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unknown_stays_unknown() {
        let mut e = grid_from(|_, _| 0.0);
        e.height[e.geometry.index(4, 4)] = None;
        let t = traversability(&e, &TraversabilityParams::default());
        assert_eq!(t.get(4, 4), None);
        assert_eq!(t.get(4, 5), Some(1.0));
    }
}
