//! Host-side tooling around `proxfly-core`: configuration files, parallel
//! training, checkpoints, flight-log CSVs, comparison reports and the
//! `proxfly` command line.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod flightlog;
pub mod manifest;
pub mod report;
pub mod trainer;

use proxfly_core::scenario::ScenarioFailure;

/// Short human-readable description of a scenario failure.
pub fn failure_label(f: &ScenarioFailure) -> String {
    match *f {
        ScenarioFailure::Crash { vehicle, t } => format!("crash(vehicle {vehicle} at {t:.2} s)"),
        ScenarioFailure::SimFault { vehicle, t } => format!("sim_fault(vehicle {vehicle} at {t:.2} s)"),
        ScenarioFailure::FailedDock { t } => format!("failed_dock(at {t:.2} s)"),
    }
}
