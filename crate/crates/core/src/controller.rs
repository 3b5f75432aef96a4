//! The cascaded "basic" controller.
//!
//! Position error → desired acceleration (second-order loop, no integrator) →
//! thrust direction and collective thrust → body-rate command from the
//! rotation-vector attitude error. A 500 Hz rate loop and mixer turn the
//! high-level command into motor speeds. The controller only ever sees its
//! nominal vehicle parameters.

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::math::{self, Quat, Vec3};
use crate::rng::SimRng;
use crate::sim::{VehicleParams, VehicleState, ROTOR_POSITION_SIGN, ROTOR_YAW_SIGN};
use crate::GRAVITY;

/// Per-axis limit on the position loop's acceleration demand, m/s².
pub const MAX_DESIRED_ACCEL: f64 = 12.0;
/// Below this norm of `a_des + g·e_z` the thrust direction is undefined.
pub const DEGENERATE_THRUST_NORM: f64 = 0.1;

/// Mass-normalized collective thrust plus desired body rates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HighLevelCommand {
    /// m/s².
    pub thrust: f64,
    /// rad/s, body frame.
    pub body_rates: Vec3,
}

impl HighLevelCommand {
    pub fn new(thrust: f64, body_rates: Vec3) -> Self {
        Self { thrust, body_rates }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.thrust, self.body_rates.x, self.body_rates.y, self.body_rates.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { thrust: a[0], body_rates: Vec3::new(a[1], a[2], a[3]) }
    }

    pub fn is_finite(&self) -> bool {
        self.thrust.is_finite() && self.body_rates.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub yaw: f64,
}

impl DesiredState {
    pub fn hover(position: Vec3) -> Self {
        Self { position, velocity: Vec3::zeros(), yaw: 0.0 }
    }

    /// Level attitude at the desired heading.
    pub fn attitude(&self) -> Quat {
        math::yaw_attitude(self.yaw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    /// rad/s.
    pub natural_frequency: f64,
    pub damping_ratio: f64,
    /// s.
    pub attitude_time_constant_rp: f64,
    /// s.
    pub attitude_time_constant_yaw: f64,
    /// 1/s.
    pub body_rate_gain: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            natural_frequency: 2.0,
            damping_ratio: 0.7,
            attitude_time_constant_rp: 0.2,
            attitude_time_constant_yaw: 0.5,
            body_rate_gain: 20.0,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.natural_frequency > 0.0) {
            return Err("natural_frequency");
        }
        if !(self.damping_ratio > 0.0 && self.damping_ratio < 2.0) {
            return Err("damping_ratio");
        }
        if !(self.attitude_time_constant_rp > 0.0) {
            return Err("attitude_time_constant_rp");
        }
        if !(self.attitude_time_constant_yaw > 0.0) {
            return Err("attitude_time_constant_yaw");
        }
        if !(self.body_rate_gain > 0.0) {
            return Err("body_rate_gain");
        }
        Ok(())
    }
}

/// Optional additive measurement noise of the state estimator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimatorNoise {
    /// m.
    pub position_sigma: f64,
    /// rad, applied as a random small rotation.
    pub attitude_sigma: f64,
}

/// 200 Hz sample-and-hold estimator fed from the 500 Hz simulation.
///
/// Sample instants are `n · 5 ms`; each instant latches the most recent sim
/// tick at or before it. Time is tracked in integer microseconds so the
/// schedule does not drift.
#[derive(Debug, Clone)]
pub struct StateEstimator {
    period_us: u64,
    next_sample: u64,
    latched: Option<VehicleState>,
    /// Truth fed at the previous call.
    previous: Option<VehicleState>,
    latch_count: u64,
    noise: EstimatorNoise,
    rng: Option<SimRng>,
}

impl StateEstimator {
    pub const PERIOD_US: u64 = 5_000;

    pub fn new() -> Self {
        Self { period_us: Self::PERIOD_US, next_sample: 0, latched: None, previous: None, latch_count: 0, noise: EstimatorNoise::default(), rng: None }
    }

    pub fn with_noise(noise: EstimatorNoise, rng: SimRng) -> Self {
        Self { noise, rng: Some(rng), ..Self::new() }
    }

    pub fn latch_count(&self) -> u64 {
        self.latch_count
    }

    /// Feed the truth at sim time `t` (seconds) and read the held estimate.
    /// Call once per simulation tick.
    pub fn estimate_state(&mut self, truth: &VehicleState, t: f64) -> VehicleState {
        let now = (t * 1e6).round() as u64;
        if now >= self.next_sample || self.latched.is_none() {
            // A tick past the instant means the previous tick was the last
            // one at or before it.
            let mut sample = match self.previous {
                Some(prev) if now > self.next_sample => prev,
                _ => *truth,
            };
            if let Some(rng) = self.rng.as_mut() {
                apply_noise(&mut sample, &self.noise, rng);
            }
            self.latched = Some(sample);
            self.latch_count += 1;
            while self.next_sample <= now {
                self.next_sample += self.period_us;
            }
        }
        self.previous = Some(*truth);
        self.latched.expect("latched above")
    }
}

impl Default for StateEstimator {
    fn default() -> Self {
        Self::new()
    }
}

fn apply_noise<R: Rng>(state: &mut VehicleState, noise: &EstimatorNoise, rng: &mut R) {
    if noise.position_sigma > 0.0 {
        let n = Normal::new(0.0, noise.position_sigma).expect("finite sigma");
        state.position += Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng));
    }
    if noise.attitude_sigma > 0.0 {
        let n = Normal::new(0.0, noise.attitude_sigma).expect("finite sigma");
        let d = Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng));
        state.attitude = state.attitude * Quat::from_scaled_axis(d);
    }
}

/// Second-order position loop with per-axis clamp.
pub fn position_control(est: &VehicleState, des: &DesiredState, gains: &ControllerGains) -> Vec3 {
    let wn = gains.natural_frequency;
    let a = (des.position - est.position) * (wn * wn) + (des.velocity - est.velocity) * (2.0 * gains.damping_ratio * wn);
    a.map(|v| v.clamp(-MAX_DESIRED_ACCEL, MAX_DESIRED_ACCEL))
}

/// Thrust-vector attitude extraction and body-rate command.
pub fn attitude_thrust_from_accel(a_des: &Vec3, est: &VehicleState, desired_yaw: f64, gains: &ControllerGains) -> HighLevelCommand {
    let thrust_vec = a_des + Vec3::new(0.0, 0.0, GRAVITY);
    let norm = thrust_vec.norm();
    if norm < DEGENERATE_THRUST_NORM {
        return HighLevelCommand::new(0.0, Vec3::zeros());
    }
    let z_des = thrust_vec / norm;
    let body_z = est.attitude * Vec3::z();
    let thrust = thrust_vec.dot(&body_z).max(0.0);
    let att_des = math::attitude_from_z_and_yaw(&z_des, desired_yaw);
    let err = math::rotation_error(&est.attitude, &att_des);
    let rates = Vec3::new(
        err.x / gains.attitude_time_constant_rp,
        err.y / gains.attitude_time_constant_rp,
        err.z / gains.attitude_time_constant_yaw,
    );
    HighLevelCommand::new(thrust, rates)
}

/// Attitude the cascade is steering toward: thrust axis along the position
/// loop's demand, heading at the desired yaw.
pub fn attitude_target(est: &VehicleState, des: &DesiredState, gains: &ControllerGains) -> Quat {
    let thrust_vec = position_control(est, des, gains) + Vec3::new(0.0, 0.0, GRAVITY);
    let norm = thrust_vec.norm();
    if norm < DEGENERATE_THRUST_NORM {
        return des.attitude();
    }
    math::attitude_from_z_and_yaw(&(thrust_vec / norm), des.yaw)
}

/// `u_cas`: the cascaded controller's high-level command.
pub fn basic_command(est: &VehicleState, des: &DesiredState, gains: &ControllerGains, _params: &VehicleParams) -> HighLevelCommand {
    let a = position_control(est, des, gains);
    attitude_thrust_from_accel(&a, est, des.yaw, gains)
}

/// Rotor thrusts realizing collective thrust `thrust` and body `torque` with
/// nominal propellers; negative entries are clamped to zero.
pub fn allocate(thrust: f64, torque: &Vec3, params: &VehicleParams) -> [f64; 4] {
    let d = params.rotor_offset();
    let k = params.torque_to_thrust;
    let mut out = [0.0; 4];
    for i in 0..4 {
        let (sx, sy) = ROTOR_POSITION_SIGN[i];
        out[i] = 0.25 * (thrust + sy * torque.x / d - sx * torque.y / d + ROTOR_YAW_SIGN[i] * torque.z / k);
    }
    out
}

/// 500 Hz body-rate loop and mixer, producing motor speed commands.
pub fn low_level_control(est: &VehicleState, cmd: &HighLevelCommand, params: &VehicleParams, gains: &ControllerGains) -> [f64; 4] {
    let torque = params.inertia_diag.component_mul(&((cmd.body_rates - est.body_rates) * gains.body_rate_gain));
    let thrusts = allocate(params.mass * cmd.thrust.max(0.0), &torque, params);
    let mut speeds = [0.0; 4];
    for i in 0..4 {
        speeds[i] = (thrusts[i].max(0.0) / params.thrust_coeff).sqrt().min(params.max_motor_speed);
    }
    speeds
}
