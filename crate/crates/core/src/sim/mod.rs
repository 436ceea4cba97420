//! Fixed-step scenario execution, monitoring and trace output.

mod config;
mod engine;
mod monitor;
mod output;

pub use config::{ScenarioConfig, SelectionPolicy, SimOptions, VehicleConfig};
pub use engine::{
    run, run_with, ConflictEvent, ObstacleTrace, PeerConflictEvent, SimMetrics, Simulation,
    TraceRecord, VehicleTrace,
};
pub use monitor::{arrival_check, arrival_step, deadlock_check, ArrivalMonitor, WindowSample};
pub use output::{format_g9, metrics_json, trace_header, write_trace_csv, TraceWriter};
