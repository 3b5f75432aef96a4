//! Six-degree-of-freedom quadcopter dynamics.
//!
//! Frames: world is z-up, body is x-forward / y-left / z-up. The airframe is an
//! X configuration with motor order front-left (CCW), front-right (CW),
//! rear-right (CCW), rear-left (CW) seen from above. Integration is
//! semi-implicit Euler: velocities are advanced first and the new velocities
//! move the pose.

use nalgebra::{UnitQuaternion, Vector3};
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::math::{Quat, Vec3};
use crate::GRAVITY;

/// Rotor spin direction sign for the yaw reaction torque (`+1` = the rotor
/// pushes the body counter-clockwise about +z).
pub const ROTOR_YAW_SIGN: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];
/// Rotor position signs `(x, y)` scaled by `arm_length / √2`.
pub const ROTOR_POSITION_SIGN: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SimFault {
    #[error("vehicle state became non-finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    /// World frame, m.
    pub position: Vec3,
    /// World frame, m/s.
    pub velocity: Vec3,
    /// Rotation taking body vectors to world.
    pub attitude: Quat,
    /// Body frame, rad/s.
    pub body_rates: Vec3,
    /// rad/s, never negative.
    pub motor_speeds: [f64; 4],
}

impl VehicleState {
    pub fn at_rest(position: Vec3) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            attitude: Quat::identity(),
            body_rates: Vec3::zeros(),
            motor_speeds: [0.0; 4],
        }
    }

    /// Level hover at `position` with motors spinning at the nominal hover
    /// speed of `params`.
    pub fn hovering(position: Vec3, params: &VehicleParams) -> Self {
        let w = params.hover_motor_speed();
        Self { motor_speeds: [w; 4], ..Self::at_rest(position) }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.attitude.coords.iter().all(|v| v.is_finite())
            && self.body_rates.iter().all(|v| v.is_finite())
            && self.motor_speeds.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    /// kg.
    pub mass: f64,
    /// kg·m², principal axes.
    pub inertia_diag: Vec3,
    /// Center to rotor distance, m.
    pub arm_length: f64,
    /// N/(rad/s)² per propeller.
    pub thrust_coeff: f64,
    /// Yaw moment per unit thrust, m.
    pub torque_to_thrust: f64,
    /// s.
    pub motor_time_constant: f64,
    pub per_propeller_thrust_factors: [f64; 4],
    /// Motor speed saturation, rad/s.
    pub max_motor_speed: f64,
}

impl VehicleParams {
    /// The small quadcopter (SQ).
    pub fn small_quad() -> Self {
        Self {
            mass: 0.280,
            inertia_diag: Vec3::new(2.36e-4, 2.36e-4, 3.03e-4),
            arm_length: 0.058,
            thrust_coeff: 1.145e-7,
            torque_to_thrust: 0.014,
            motor_time_constant: 0.02,
            per_propeller_thrust_factors: [1.0; 4],
            max_motor_speed: 4000.0,
        }
    }

    /// The large quadcopter (LQ).
    pub fn large_quad() -> Self {
        Self {
            mass: 0.850,
            inertia_diag: Vec3::new(5.51e-3, 5.51e-3, 9.88e-3),
            arm_length: 0.165,
            thrust_coeff: 7.640e-6,
            torque_to_thrust: 0.022,
            motor_time_constant: 0.02,
            per_propeller_thrust_factors: [1.0; 4],
            max_motor_speed: 1100.0,
        }
    }

    pub fn weight(&self) -> f64 {
        self.mass * GRAVITY
    }

    /// Motor speed at which four nominal propellers carry the vehicle weight.
    pub fn hover_motor_speed(&self) -> f64 {
        (self.weight() / (4.0 * self.thrust_coeff)).sqrt()
    }

    /// Rotor offset from the center along x and y, m.
    pub fn rotor_offset(&self) -> f64 {
        self.arm_length / core::f64::consts::SQRT_2
    }

    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.mass > 0.0) {
            return Err("mass");
        }
        if !self.inertia_diag.iter().all(|&v| v > 0.0) {
            return Err("inertia_diag");
        }
        if !(self.arm_length > 0.0) {
            return Err("arm_length");
        }
        if !(self.thrust_coeff > 0.0) {
            return Err("thrust_coeff");
        }
        if !(self.torque_to_thrust > 0.0) {
            return Err("torque_to_thrust");
        }
        if !(self.motor_time_constant > 0.0) {
            return Err("motor_time_constant");
        }
        if !self.per_propeller_thrust_factors.iter().all(|&v| v > 0.0 && v.is_finite()) {
            return Err("per_propeller_thrust_factors");
        }
        if !(self.max_motor_speed > 0.0) {
            return Err("max_motor_speed");
        }
        Ok(())
    }
}

/// Force in the world frame, torque in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExternalWrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl ExternalWrench {
    pub fn zero() -> Self {
        Self::default()
    }
}

impl core::ops::Add for ExternalWrench {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { force: self.force + rhs.force, torque: self.torque + rhs.torque }
    }
}

/// First-order motor response, clamped at zero.
pub fn motor_dynamics(current: [f64; 4], commanded: [f64; 4], dt: f64, tau: f64) -> [f64; 4] {
    let alpha = 1.0 - (-dt / tau).exp();
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = (current[i] + (commanded[i] - current[i]) * alpha).max(0.0);
    }
    out
}

/// Individual rotor thrusts, N.
pub fn rotor_thrusts(motor_speeds: &[f64; 4], params: &VehicleParams) -> [f64; 4] {
    let mut t = [0.0; 4];
    for i in 0..4 {
        t[i] = params.per_propeller_thrust_factors[i] * params.thrust_coeff * motor_speeds[i] * motor_speeds[i];
    }
    t
}

/// Collective thrust and body torque produced by the given rotor thrusts.
pub fn thrusts_to_wrench(thrusts: &[f64; 4], params: &VehicleParams) -> (f64, Vec3) {
    let d = params.rotor_offset();
    let mut total = 0.0;
    let mut torque = Vec3::zeros();
    for i in 0..4 {
        let (sx, sy) = ROTOR_POSITION_SIGN[i];
        total += thrusts[i];
        torque.x += sy * d * thrusts[i];
        torque.y -= sx * d * thrusts[i];
        torque.z += ROTOR_YAW_SIGN[i] * params.torque_to_thrust * thrusts[i];
    }
    (total, torque)
}

/// Advance one vehicle by `dt`.
pub fn step(
    state: &VehicleState,
    motor_cmds: &[f64; 4],
    wrench: &ExternalWrench,
    params: &VehicleParams,
    dt: f64,
) -> Result<VehicleState, SimFault> {
    let motor_speeds = motor_dynamics(state.motor_speeds, *motor_cmds, dt, params.motor_time_constant);
    let thrusts = rotor_thrusts(&motor_speeds, params);
    let (thrust, rotor_torque) = thrusts_to_wrench(&thrusts, params);

    let body_z = state.attitude * Vec3::z();
    let accel = (body_z * thrust + wrench.force) / params.mass - Vec3::new(0.0, 0.0, GRAVITY);
    let velocity = state.velocity + accel * dt;
    let position = state.position + velocity * dt;

    // Body angular momentum: transported by the rotating frame, then kicked by
    // the applied torque. The transport is an exact rotation, so |L| is kept.
    let inertia = params.inertia_diag;
    let torque = rotor_torque + wrench.torque;
    let momentum = inertia.component_mul(&state.body_rates) + torque * dt;
    let transport = UnitQuaternion::from_scaled_axis(-state.body_rates * dt);
    let momentum = transport * momentum;
    let body_rates = momentum.component_div(&inertia);

    let mut attitude = state.attitude * UnitQuaternion::from_scaled_axis(body_rates * dt);
    attitude.renormalize();

    let next = VehicleState { position, velocity, attitude, body_rates, motor_speeds };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(SimFault::NonFinite)
    }
}

/// Ground plane at z = 0: a vehicle that reaches it while moving down is held
/// level and at rest (no bounce). Returns whether the vehicle is in contact.
pub fn apply_ground_contact(state: &mut VehicleState) -> bool {
    if state.position.z > 0.0 || state.velocity.z > 0.0 {
        return false;
    }
    state.position.z = 0.0;
    state.velocity = Vec3::zeros();
    state.body_rates = Vec3::zeros();
    let (_, _, yaw) = state.attitude.euler_angles();
    state.attitude = crate::math::yaw_attitude(yaw);
    true
}

/// Dock an upper vehicle of mass `upper_mass` onto `lower`, arriving with
/// downward relative speed `impact_velocity`. The merge is perfectly
/// inelastic; the upper vehicle becomes a point mass `mount_height` above the
/// lower center of mass.
pub fn apply_dock_event(
    lower: &VehicleState,
    lower_params: &VehicleParams,
    upper_mass: f64,
    impact_velocity: f64,
    mount_height: f64,
) -> (VehicleState, VehicleParams) {
    let total = lower_params.mass + upper_mass;
    let mut state = *lower;
    state.velocity.z -= upper_mass * impact_velocity / total;
    let mut params = *lower_params;
    params.mass = total;
    let extra = upper_mass * mount_height * mount_height;
    params.inertia_diag = lower_params.inertia_diag + Vector3::new(extra, extra, 0.0);
    (state, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn motor_dynamics_fixed_point_and_step() {
        let c = [500.0, 600.0, 700.0, 800.0];
        assert_eq!(motor_dynamics(c, c, 0.002, 0.02), c);
        let out = motor_dynamics([0.0; 4], [1000.0; 4], 0.02, 0.02);
        assert!((out[0] - 632.120_558_828_557_7).abs() < 1e-9);
        let out = motor_dynamics([10.0; 4], [1000.0; 4], 1e6, 0.02);
        assert_eq!(out, [1000.0; 4]);
    }

    #[test]
    fn motor_dynamics_clamps_negative() {
        let out = motor_dynamics([0.0; 4], [-50.0; 4], 0.01, 0.02);
        assert_eq!(out, [0.0; 4]);
    }

    #[test]
    fn hover_equilibrium_has_zero_vertical_acceleration() {
        let p = VehicleParams::large_quad();
        let s = VehicleState::hovering(Vec3::new(0.0, 0.0, 1.0), &p);
        let cmds = s.motor_speeds;
        let total: f64 = rotor_thrusts(&s.motor_speeds, &p).iter().sum();
        assert!((total - 0.85 * 9.81).abs() < 1e-12);
        let n = step(&s, &cmds, &ExternalWrench::zero(), &p, 0.002).unwrap();
        assert!(n.velocity.z.abs() < 1e-12);
    }

    #[test]
    fn dock_event_identity_and_sum() {
        let p = VehicleParams::large_quad();
        let s = VehicleState::hovering(Vec3::new(0.0, 0.0, 1.2), &p);
        let (s2, p2) = apply_dock_event(&s, &p, 0.0, 1.0, 0.05);
        assert_eq!(s2, s);
        assert_eq!(p2, p);
        let v = (2.0 * 9.81 * 0.05f64).sqrt();
        let (s3, p3) = apply_dock_event(&s, &p, 0.280, v, 0.05);
        assert!((p3.mass - 1.130).abs() < 1e-12);
        assert!((v - 0.990_454).abs() < 1e-6);
        // Momentum handed to the merged body equals the SQ impulse.
        assert!((-s3.velocity.z * p3.mass - 0.280 * v).abs() < 1e-12);
        assert!((0.280 * v - 0.277_327).abs() < 1e-6);
        assert!((p3.inertia_diag.x - (5.51e-3 + 0.280 * 0.0025)).abs() < 1e-15);
        assert_eq!(p3.inertia_diag.z, p.inertia_diag.z);
        assert_eq!(p3.per_propeller_thrust_factors, p.per_propeller_thrust_factors);
    }

    #[test]
    fn non_finite_state_is_a_fault() {
        let p = VehicleParams::large_quad();
        let s = VehicleState::at_rest(Vec3::zeros());
        let w = ExternalWrench { force: Vec3::new(f64::NAN, 0.0, 0.0), torque: Vec3::zeros() };
        assert_eq!(step(&s, &[0.0; 4], &w, &p, 0.002), Err(SimFault::NonFinite));
    }

    #[test]
    fn ground_contact_holds_vehicle() {
        let p = VehicleParams::large_quad();
        let mut s = VehicleState::at_rest(Vec3::zeros());
        for _ in 0..10 {
            s = step(&s, &[0.0; 4], &ExternalWrench::zero(), &p, 0.002).unwrap();
            assert!(apply_ground_contact(&mut s));
        }
        assert_eq!(s.position, Vec3::zeros());
    }

    #[test]
    fn roll_torque_sign() {
        // Left rotors stronger → positive roll torque (right side down).
        let p = VehicleParams::large_quad();
        let (_, tau) = thrusts_to_wrench(&[2.0, 1.0, 1.0, 2.0], &p);
        assert!(tau.x > 0.0);
        assert!(tau.y.abs() < 1e-15);
        // Rear rotors stronger → positive pitch torque (nose down).
        let (_, tau) = thrusts_to_wrench(&[1.0, 1.0, 2.0, 2.0], &p);
        assert!(tau.y > 0.0);
    }
}
