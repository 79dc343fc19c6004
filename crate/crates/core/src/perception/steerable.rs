//! Second-derivative-of-Gaussian steerable filters for bright ridge detection.
//!
//! Three separable basis kernels are convolved with the raster once; the
//! response at any orientation is an exact trigonometric blend of the three
//! basis responses. Orientation `theta` is the direction of the line being
//! sought, measured from the raster's row (+x) axis toward the column (+y)
//! axis. With [`Polarity::Bright`] a bright line yields a positive response.

use rayon::prelude::*;

use super::raster::{BevRaster, Grid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Bright,
    Dark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// Lines along x: `-g(x) g''(y)`.
    A,
    /// Cross term: `g'(x) g'(y)`.
    B,
    /// Lines along y: `-g''(x) g(y)`.
    C,
}

#[derive(Debug, Clone)]
pub struct SteerableBank {
    pub sigma: f64,
    pub polarity: Polarity,
    radius: usize,
    smooth: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl SteerableBank {
    pub fn new(sigma: f64, polarity: Polarity) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Invalid(format!("sigma must be positive, got {sigma}")));
        }
        let radius = (3.0 * sigma).ceil() as usize;
        let s2 = sigma * sigma;
        let taps: Vec<f64> = (-(radius as i64)..=radius as i64).map(|t| t as f64).collect();
        let raw: Vec<f64> = taps.iter().map(|t| (-t * t / (2.0 * s2)).exp()).collect();
        let z: f64 = raw.iter().sum();
        let smooth: Vec<f64> = raw.iter().map(|g| g / z).collect();
        let first: Vec<f64> = taps.iter().zip(&smooth).map(|(t, g)| -t / s2 * g).collect();
        let mut second: Vec<f64> = taps
            .iter()
            .zip(&smooth)
            .map(|(t, g)| (t * t / (s2 * s2) - 1.0 / s2) * g)
            .collect();
        // truncation leaves a small DC term; remove it so flat regions give 0
        let dc = second.iter().sum::<f64>() / second.len() as f64;
        second.iter_mut().for_each(|v| *v -= dc);
        Ok(Self {
            sigma,
            polarity,
            radius,
            smooth,
            first,
            second,
        })
    }

    /// Side length of the square kernels.
    pub fn size(&self) -> usize {
        2 * self.radius + 1
    }

    fn separable(&self, basis: Basis) -> (Vec<f64>, Vec<f64>) {
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        match basis {
            Basis::A => (self.smooth.clone(), neg(&self.second)),
            Basis::B => (self.first.clone(), self.first.clone()),
            Basis::C => (neg(&self.second), self.smooth.clone()),
        }
    }

    /// Full 2-D kernel, row-major, `size() x size()`.
    pub fn kernel(&self, basis: Basis) -> Vec<f64> {
        let (kr, kc) = self.separable(basis);
        kr.iter()
            .flat_map(|r| kc.iter().map(move |c| r * c))
            .collect()
    }
}

/// Convolution with a separable kernel, zero padding. `kr` runs along rows
/// (x), `kc` along columns (y). Each output cell sums taps in a fixed order.
fn convolve_separable(input: &Grid, kr: &[f64], kc: &[f64]) -> Grid {
    let g = input.geometry;
    let (rows, cols) = (g.rows, g.cols);
    let r = (kc.len() / 2) as i64;
    let mut tmp = vec![0.0; rows * cols];
    tmp.par_chunks_mut(cols).enumerate().for_each(|(row, out)| {
        let src = &input.data[row * cols..(row + 1) * cols];
        for (col, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, w) in kc.iter().enumerate() {
                let j = col as i64 - (k as i64 - r);
                if j >= 0 && (j as usize) < cols {
                    acc += w * src[j as usize];
                }
            }
            *o = acc;
        }
    });
    let r = (kr.len() / 2) as i64;
    let mut out = vec![0.0; rows * cols];
    out.par_chunks_mut(cols).enumerate().for_each(|(row, o)| {
        for (col, cell) in o.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, w) in kr.iter().enumerate() {
                let i = row as i64 - (k as i64 - r);
                if i >= 0 && (i as usize) < rows {
                    acc += w * tmp[i as usize * cols + col];
                }
            }
            *cell = acc;
        }
    });
    Grid { geometry: g, data: out }
}

/// The three basis responses of a raster.
#[derive(Debug, Clone)]
pub struct BasisResponses {
    pub a: Grid,
    pub b: Grid,
    pub c: Grid,
}

impl BasisResponses {
    /// Response steered to a single orientation.
    pub fn steer(&self, theta: f64) -> Grid {
        self.steer_rows(|_| theta)
    }

    /// Response with a per-row orientation, e.g. following a lane model.
    pub fn steer_rows(&self, theta_of_row: impl Fn(usize) -> f64) -> Grid {
        let g = self.a.geometry;
        let mut out = Grid::zeros(g);
        for row in 0..g.rows {
            let (s, c) = theta_of_row(row).sin_cos();
            let (wa, wb, wc) = (c * c, 2.0 * c * s, s * s);
            for col in 0..g.cols {
                let i = g.index(row, col);
                out.data[i] = wa * self.a.data[i] + wb * self.b.data[i] + wc * self.c.data[i];
            }
        }
        out
    }
}

pub fn basis_responses(raster: &BevRaster, bank: &SteerableBank) -> Result<BasisResponses> {
    let g = raster.geometry();
    if bank.size() > g.rows || bank.size() > g.cols {
        return Err(Error::KernelTooLarge {
            kernel: bank.size(),
            rows: g.rows,
            cols: g.cols,
        });
    }
    let sign = match bank.polarity {
        Polarity::Bright => 1.0,
        Polarity::Dark => -1.0,
    };
    let run = |basis| {
        let (kr, kc) = bank.separable(basis);
        let kc: Vec<f64> = kc.iter().map(|v| v * sign).collect();
        convolve_separable(raster.grid(), &kr, &kc)
    };
    Ok(BasisResponses {
        a: run(Basis::A),
        b: run(Basis::B),
        c: run(Basis::C),
    })
}

pub fn steer_response(raster: &BevRaster, bank: &SteerableBank, theta: f64) -> Result<Grid> {
    Ok(basis_responses(raster, bank)?.steer(theta))
}
