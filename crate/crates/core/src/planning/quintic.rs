//! Quintic lateral-offset curves between two lanes.
//!
//! Six boundary constraints fix all six coefficients, so the solve is a
//! linear system rather than an optimization.

use nalgebra::{Matrix6, Vector6};

use crate::error::{Error, Result};

/// Shortest domain accepted before the system is considered ill-conditioned.
pub const MIN_SPAN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryConditions {
    pub s0: f64,
    pub s_f: f64,
    pub y0: f64,
    /// dy/ds at `s0`.
    pub dy0: f64,
    /// d²y/ds² at `s0`.
    pub ddy0: f64,
    pub y_f: f64,
}

impl BoundaryConditions {
    /// Rest-to-rest offset change from `y0` to `y_f` over `[s0, s_f]`.
    pub fn lane_change(s0: f64, s_f: f64, y0: f64, y_f: f64) -> Self {
        Self {
            s0,
            s_f,
            y0,
            dy0: 0.0,
            ddy0: 0.0,
            y_f,
        }
    }
}

/// `f(s) = Σ m_i (s - s0)^i` on `[s0, s_f]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticSpline {
    pub coefficients: [f64; 6],
    pub s0: f64,
    pub s_f: f64,
}

impl QuinticSpline {
    pub fn zero(s0: f64, s_f: f64) -> Self {
        Self {
            coefficients: [0.0; 6],
            s0,
            s_f,
        }
    }

    pub fn span(&self) -> f64 {
        self.s_f - self.s0
    }

    fn horner(&self, c: &[f64], s: f64) -> f64 {
        let u = s - self.s0;
        c.iter().rev().fold(0.0, |acc, m| acc * u + m)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.horner(&self.coefficients, s)
    }

    pub fn d1(&self, s: f64) -> f64 {
        let m = &self.coefficients;
        let d: Vec<f64> = (1..6).map(|i| i as f64 * m[i]).collect();
        self.horner(&d, s)
    }

    pub fn d2(&self, s: f64) -> f64 {
        let m = &self.coefficients;
        let d: Vec<f64> = (2..6).map(|i| (i * (i - 1)) as f64 * m[i]).collect();
        self.horner(&d, s)
    }

    pub fn d3(&self, s: f64) -> f64 {
        let m = &self.coefficients;
        let d: Vec<f64> = (3..6).map(|i| (i * (i - 1) * (i - 2)) as f64 * m[i]).collect();
        self.horner(&d, s)
    }

    /// Value with the domain clamped, so the curve holds its end state.
    pub fn eval_clamped(&self, s: f64) -> (f64, f64, f64) {
        if s <= self.s0 {
            (self.eval(self.s0), self.d1(self.s0), self.d2(self.s0))
        } else if s >= self.s_f {
            (self.eval(self.s_f), 0.0, 0.0)
        } else {
            (self.eval(s), self.d1(s), self.d2(s))
        }
    }

    /// Largest residual over the six boundary constraints.
    pub fn constraint_residual(&self, bc: &BoundaryConditions) -> f64 {
        [
            self.eval(bc.s0) - bc.y0,
            self.d1(bc.s0) - bc.dy0,
            self.d2(bc.s0) - bc.ddy0,
            self.eval(bc.s_f) - bc.y_f,
            self.d1(bc.s_f),
            self.d2(bc.s_f),
        ]
        .iter()
        .fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Solves for the unique quintic meeting the boundary conditions. The system
/// is assembled on the normalized variable `(s - s0) / (s_f - s0)` and the
/// coefficients rescaled afterwards.
pub fn solve_lane_change(bc: &BoundaryConditions) -> Result<QuinticSpline> {
    let values = [bc.s0, bc.s_f, bc.y0, bc.dy0, bc.ddy0, bc.y_f];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidBoundary(format!("non-finite value in {bc:?}")));
    }
    let h = bc.s_f - bc.s0;
    if !(h > 0.0) {
        return Err(Error::InvalidBoundary(format!(
            "end s_f={} must exceed start s0={}",
            bc.s_f, bc.s0
        )));
    }
    if h < MIN_SPAN {
        return Err(Error::InvalidBoundary(format!(
            "span {h} m is too short for a well-conditioned solve"
        )));
    }
    // rows: g(0), g'(0), g''(0), g(1), g'(1), g''(1)
    #[rustfmt::skip]
    let a = Matrix6::from_row_slice(&[
        1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 1.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 2.0, 0.0, 0.0, 0.0,
        1.0, 1.0, 1.0, 1.0, 1.0, 1.0,
        0.0, 1.0, 2.0, 3.0, 4.0, 5.0,
        0.0, 0.0, 2.0, 6.0, 12.0, 20.0,
    ]);
    let rhs = Vector6::new(bc.y0, bc.dy0 * h, bc.ddy0 * h * h, bc.y_f, 0.0, 0.0);
    let mu = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidBoundary("boundary system is singular".into()))?;
    let mut coefficients = [0.0; 6];
    let mut scale = 1.0;
    for (i, m) in coefficients.iter_mut().enumerate() {
        *m = mu[i] / scale;
        scale *= h;
    }
    Ok(QuinticSpline {
        coefficients,
        s0: bc.s0,
        s_f: bc.s_f,
    })
}

/// Peak `v² |f''|` over the domain. Dense sampling at 0.01 m or finer plus
/// the stationary points of `f''`, which are roots of the quadratic `f'''`.
pub fn max_lateral_accel(spline: &QuinticSpline, v: f64) -> f64 {
    assert!(v >= 0.0, "speed must be non-negative");
    let h = spline.span();
    let n = ((h / 0.01).ceil() as usize).max(1);
    let mut peak = (0..=n)
        .map(|i| spline.d2(spline.s0 + h * i as f64 / n as f64).abs())
        .fold(0.0, f64::max);
    // f'''(u) = 6 m3 + 24 m4 u + 60 m5 u²
    let m = &spline.coefficients;
    let (qa, qb, qc) = (60.0 * m[5], 24.0 * m[4], 6.0 * m[3]);
    let mut roots = Vec::new();
    if qa.abs() > 1e-300 {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let r = disc.sqrt();
            roots.push((-qb + r) / (2.0 * qa));
            roots.push((-qb - r) / (2.0 * qa));
        }
    } else if qb.abs() > 1e-300 {
        roots.push(-qc / qb);
    }
    for u in roots {
        if (0.0..=h).contains(&u) {
            peak = peak.max(spline.d2(spline.s0 + u).abs());
        }
    }
    v * v * peak
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_constraints_give_zero() {
        let s = solve_lane_change(&BoundaryConditions::lane_change(2.0, 9.0, 0.0, 0.0)).unwrap();
        assert!(s.coefficients.iter().all(|m| m.abs() < 1e-15));
    }

    #[test]
    fn canonical_min_jerk() {
        let s = solve_lane_change(&BoundaryConditions::lane_change(0.0, 1.0, 0.0, 1.0)).unwrap();
        let expected = [0.0, 0.0, 0.0, 10.0, -15.0, 6.0];
        for (m, e) in s.coefficients.iter().zip(expected) {
            assert!((m - e).abs() < 1e-9, "{:?}", s.coefficients);
        }
    }

    #[test]
    fn domain_scaling() {
        let s = solve_lane_change(&BoundaryConditions::lane_change(0.0, 2.0, 0.0, 1.0)).unwrap();
        for k in 0..=40 {
            let x = k as f64 * 0.05;
            let t = x / 2.0;
            let expect = 10.0 * t.powi(3) - 15.0 * t.powi(4) + 6.0 * t.powi(5);
            assert!((s.eval(x) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_domains_are_rejected() {
        for (s0, sf) in [(1.0, 1.0), (2.0, 1.0), (0.0, 1e-8)] {
            assert!(matches!(
                solve_lane_change(&BoundaryConditions::lane_change(s0, sf, 0.0, 1.0)),
                Err(Error::InvalidBoundary(_))
            ));
        }
    }

    #[test]
    fn degenerate_accel_cases() {
        let z = QuinticSpline::zero(0.0, 5.0);
        assert_eq!(max_lateral_accel(&z, 3.0), 0.0);
        let s = solve_lane_change(&BoundaryConditions::lane_change(0.0, 1.0, 0.0, 1.0)).unwrap();
        assert_eq!(max_lateral_accel(&s, 0.0), 0.0);
    }

    #[test]
    fn accel_matches_fine_sampling() {
        let s = solve_lane_change(&BoundaryConditions::lane_change(0.0, 1.0, 0.0, 1.0)).unwrap();
        // independent brute force at 1e-4 on the closed-form polynomial
        let brute = (0..=10_000)
            .map(|i| {
                let t = i as f64 * 1e-4;
                (60.0 * t - 180.0 * t * t + 120.0 * t.powi(3)).abs()
            })
            .fold(0.0, f64::max);
        let got = max_lateral_accel(&s, 2.5);
        assert!((got - 6.25 * brute).abs() < 1e-6, "{got} vs {}", 6.25 * brute);
        // |f''| peaks at t = 1/2 ± √3/6 with value 10/√3 · 1
        assert!((got - 6.25 * 10.0 / 3f64.sqrt()).abs() < 1e-9);
    }
}
