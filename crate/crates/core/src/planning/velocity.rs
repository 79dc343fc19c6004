//! Longitudinal speed profiles.

use crate::error::{Error, Result};

/// Speed that still allows stopping within `d_remaining` at deceleration
/// `a_max`, capped at `v0`.
pub fn decel_profile(v0: f64, d_remaining: f64, a_max: f64) -> f64 {
    assert!(v0 >= 0.0 && a_max > 0.0, "need v0 >= 0 and a_max > 0");
    let d = d_remaining.max(0.0);
    if d >= braking_distance(v0, a_max) {
        v0
    } else {
        (2.0 * a_max * d).max(0.0).sqrt()
    }
}

/// Distance needed to stop from `v0` at constant deceleration.
pub fn braking_distance(v0: f64, a_max: f64) -> f64 {
    v0 * v0 / (2.0 * a_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileMode {
    Constant,
    LinearDecel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityProfile {
    pub mode: ProfileMode,
    pub v_cruise: f64,
    pub a_decel: f64,
    /// Arc length of the stop point, measured along the planned path.
    pub stop_point: f64,
}

impl VelocityProfile {
    pub fn constant(v_cruise: f64) -> Result<Self> {
        if !(v_cruise >= 0.0) {
            return Err(Error::Invalid(format!("cruise speed must be >= 0, got {v_cruise}")));
        }
        Ok(Self {
            mode: ProfileMode::Constant,
            v_cruise,
            a_decel: 1.0,
            stop_point: f64::INFINITY,
        })
    }

    pub fn stopping(v_cruise: f64, a_decel: f64, stop_point: f64) -> Result<Self> {
        if !(v_cruise >= 0.0) || !(a_decel > 0.0) {
            return Err(Error::Invalid(format!(
                "stopping profile needs v >= 0 and a > 0 (v={v_cruise}, a={a_decel})"
            )));
        }
        Ok(Self {
            mode: ProfileMode::LinearDecel,
            v_cruise,
            a_decel,
            stop_point,
        })
    }

    pub fn speed_at(&self, s: f64) -> f64 {
        match self.mode {
            ProfileMode::Constant => self.v_cruise,
            ProfileMode::LinearDecel => decel_profile(self.v_cruise, self.stop_point - s, self.a_decel),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn braking_starts_at_v_squared_over_2a() {
        assert!((braking_distance(2.5, 1.0) - 3.125).abs() < 1e-15);
        assert_eq!(decel_profile(2.5, 3.125, 1.0), 2.5);
        assert!(decel_profile(2.5, 3.0, 1.0) < 2.5);
        assert!((decel_profile(2.5, 2.0, 1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn edge_distances() {
        assert_eq!(decel_profile(2.5, 0.0, 1.0), 0.0);
        assert_eq!(decel_profile(2.5, -4.0, 1.0), 0.0);
        assert_eq!(decel_profile(2.5, 1e9, 1.0), 2.5);
    }
}
