//! Deterministic quadcopter simulation and residual flight control.
//!
//! This crate is `no_std` (it needs `alloc`) and holds every numerical piece
//! of the stack: rigid-body dynamics, disturbance and downwash models, the
//! cascaded "basic" controller, the residual MLP policy, PPO math and the
//! scripted evaluation scenarios. File formats, the CLI and parallel training
//! orchestration live in the `proxfly` crate.
#![no_std]

extern crate alloc;

pub mod compare;
pub mod controller;
pub mod disturbance;
pub mod episode;
pub mod math;
pub mod metrics;
pub mod nn;
pub mod policy;
pub mod ppo;
pub mod rng;
pub mod scenario;
pub mod sim;

pub use controller::{ControllerGains, DesiredState, HighLevelCommand};
pub use disturbance::{DisturbanceProfile, DownwashParams, VehicleClass};
pub use policy::{Observation, PolicyParams, ResidualAction};
pub use sim::{ExternalWrench, VehicleParams, VehicleState};

/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;
/// Physics integration step (500 Hz).
pub const SIM_DT: f64 = 0.002;
/// High-level control period (50 Hz).
pub const CONTROL_DT: f64 = 0.02;
/// Simulation steps per control step.
pub const SIM_STEPS_PER_CONTROL: usize = 10;
