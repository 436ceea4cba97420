//! Obstacle avoidance for multicopters with a Lyapunov-like barrier function.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod guidance;
pub mod mathcore;
pub mod multiobs;
pub mod scenario_io;
pub mod sim;
pub mod verify;

pub use dynamics::{MulticopterState, Obstacle, ObstacleBehavior, VehicleParams};
pub use error::{Error, Result};
pub use guidance::GuidanceParams;
pub use mathcore::{Disc, Vec2};
pub use multiobs::AssumptionReport;
pub use sim::{ScenarioConfig, SimMetrics, SimOptions, TraceRecord, VehicleConfig};
