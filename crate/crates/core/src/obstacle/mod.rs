//! Elevation mapping, traversability scoring, in-lane obstacle clustering
//! and plane-fit ranging.

pub mod detect;
pub mod elevation;
pub mod plane;
pub mod traversability;

pub use detect::{detect_obstacles, LanePolygon, ObstacleCluster};
pub use elevation::{build_elevation, ElevationConfig, ElevationGrid};
pub use plane::{fit_plane_distance, PlaneFit};
pub use traversability::{traversability, TraversabilityGrid, TraversabilityParams};
