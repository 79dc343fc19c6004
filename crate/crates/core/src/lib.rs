//! Map-less lane keeping: multi-source lane estimation, a Kalman lane
//! tracker, behaviour planning with quintic lane changes, feedback-linearized
//! steering, elevation-map obstacle detection and a deterministic
//! closed-loop bicycle-model simulator.

// validation uses `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod geometry;
pub mod obstacle;
pub mod perception;
pub mod planning;
pub mod scenarios;
pub mod sim;
pub mod track;
pub mod tracker;

pub use error::{Error, Result};
