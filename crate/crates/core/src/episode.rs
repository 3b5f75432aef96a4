//! Closed-loop vehicle runtime and domain-randomized training rollouts.

use alloc::vec::Vec;
use rand::Rng;

use crate::controller::{attitude_target, basic_command, low_level_control, ControllerGains, DesiredState, HighLevelCommand, StateEstimator};
use crate::disturbance::{gaussian_torque, sample_training_profile, triangular_force, DisturbanceProfile, VehicleClass};
use crate::math::{self, Quat, Vec3};
use crate::policy::{
    build_observation, clamp_action, gaussian_log_prob, policy_mean, sample_action, scale_action, superpose, value_forward,
    Observation, PolicyParams, ResidualAction,
};
use crate::ppo::{compute_reward, RewardBreakdown, Trajectory, Transition};
use crate::rng::{stream_rng, SimRng, Stream};
use crate::sim::{self, ExternalWrench, SimFault, VehicleParams, VehicleState};
use crate::{CONTROL_DT, SIM_DT, SIM_STEPS_PER_CONTROL};

/// Training episode length in control steps (20 s at 50 Hz).
pub const EPISODE_CONTROL_STEPS: usize = 1000;
/// Hover phase length, s.
pub const HOVER_PHASE: f64 = 15.0;
/// Landing descent speed, m/s.
pub const DESCENT_SPEED: f64 = 0.2;
pub const HOVER_SETPOINT: [f64; 3] = [0.0, 0.0, 1.2];
/// Half-width of the square takeoff area, m.
pub const START_AREA_HALF: f64 = 1.0;

pub const CRASH_POSITION_ERROR: f64 = 3.0;
pub const CRASH_TILT: f64 = core::f64::consts::FRAC_PI_2;
pub const CRASH_ALTITUDE: f64 = -0.05;
/// Altitude above which a vehicle counts as having left the ground.
pub const LIFTOFF_ALTITUDE: f64 = 0.01;

/// Which high-level controller flies a vehicle.
#[derive(Debug, Clone, Copy)]
pub enum Pilot<'a> {
    BasicOnly,
    /// Basic controller plus the residual policy's mean action.
    ProxFly(&'a PolicyParams),
}

/// One simulated vehicle with its estimator and basic controller.
///
/// `params` is the true plant, `nominal` what the controller believes. The
/// on-board rate loop reads body rates straight from the gyro (truth) while
/// everything else uses the 200 Hz estimate.
#[derive(Debug, Clone)]
pub struct Vehicle {
    pub truth: VehicleState,
    pub params: VehicleParams,
    pub nominal: VehicleParams,
    pub gains: ControllerGains,
    pub estimator: StateEstimator,
    pub estimate: VehicleState,
    pub u_cas: HighLevelCommand,
    /// Attitude the cascade was steering toward at the last control step.
    pub attitude_target: Quat,
    pub residual: ResidualAction,
    pub command: HighLevelCommand,
    pub motors_enabled: bool,
    /// Ground contact is modeled while this is set.
    pub ground_contact: bool,
    pub airborne: bool,
}

impl Vehicle {
    pub fn new(truth: VehicleState, params: VehicleParams, nominal: VehicleParams, gains: ControllerGains) -> Self {
        let airborne = truth.position.z > LIFTOFF_ALTITUDE;
        Self {
            truth,
            params,
            nominal,
            gains,
            estimator: StateEstimator::new(),
            estimate: truth,
            u_cas: HighLevelCommand::default(),
            attitude_target: truth.attitude,
            residual: ResidualAction::zero(),
            command: HighLevelCommand::default(),
            motors_enabled: true,
            ground_contact: true,
            airborne,
        }
    }

    /// Latch the estimator for sim time `t`.
    pub fn sense(&mut self, t: f64) -> VehicleState {
        self.estimate = self.estimator.estimate_state(&self.truth, t);
        self.estimate
    }

    /// Recompute `u_cas` from the current estimate.
    pub fn basic(&mut self, des: &DesiredState) -> HighLevelCommand {
        self.attitude_target = attitude_target(&self.estimate, des, &self.gains);
        self.u_cas = basic_command(&self.estimate, des, &self.gains, &self.nominal);
        self.u_cas
    }

    pub fn observation(&self, des: &DesiredState) -> Observation {
        build_observation(&self.estimate, des, &self.u_cas, &self.residual)
    }

    /// Apply a residual on top of the latest `u_cas`.
    pub fn apply_residual(&mut self, residual: ResidualAction) {
        self.residual = residual;
        self.command = superpose(&self.u_cas, &residual);
    }

    /// Full 50 Hz high-level update for an evaluation pilot.
    pub fn control(&mut self, des: &DesiredState, pilot: Pilot<'_>) {
        self.basic(des);
        let residual = match pilot {
            Pilot::BasicOnly => ResidualAction::zero(),
            Pilot::ProxFly(p) => {
                let obs = self.observation(des);
                scale_action(&clamp_action(&policy_mean(&obs, p)))
            }
        };
        self.apply_residual(residual);
    }

    /// One 500 Hz physics step. `efficiency` scales every propeller.
    pub fn step(&mut self, wrench: &ExternalWrench, efficiency: f64) -> Result<(), SimFault> {
        let motor_cmds = if self.motors_enabled {
            let mut onboard = self.estimate;
            onboard.body_rates = self.truth.body_rates;
            low_level_control(&onboard, &self.command, &self.nominal, &self.gains)
        } else {
            [0.0; 4]
        };
        let mut plant = self.params;
        for f in plant.per_propeller_thrust_factors.iter_mut() {
            *f *= efficiency;
        }
        self.truth = sim::step(&self.truth, &motor_cmds, wrench, &plant, SIM_DT)?;
        if !self.motors_enabled {
            self.truth.motor_speeds = [0.0; 4];
        }
        if self.truth.position.z > LIFTOFF_ALTITUDE {
            self.airborne = true;
        }
        if self.ground_contact {
            sim::apply_ground_contact(&mut self.truth);
        }
        Ok(())
    }

    /// Crash test against the desired state.
    pub fn crashed(&self, des: &DesiredState) -> bool {
        (self.truth.position - des.position).norm() > CRASH_POSITION_ERROR
            || math::tilt_angle(&self.truth.attitude) > CRASH_TILT
            || (self.airborne && self.truth.position.z < CRASH_ALTITUDE)
    }
}

/// Hover at the setpoint for 15 s, then descend at 0.2 m/s.
pub fn training_reference(t: f64) -> DesiredState {
    let [x, y, z] = HOVER_SETPOINT;
    if t < HOVER_PHASE {
        DesiredState::hover(Vec3::new(x, y, z))
    } else {
        DesiredState {
            position: Vec3::new(x, y, z - DESCENT_SPEED * (t - HOVER_PHASE)),
            velocity: Vec3::new(0.0, 0.0, -DESCENT_SPEED),
            yaw: 0.0,
        }
    }
}

/// Randomized plant for one training episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSetup {
    pub params: VehicleParams,
    pub mass_factor: f64,
    pub inertia_factor: f64,
    pub disturbance: DisturbanceProfile,
    pub start: Vec3,
}

/// Sample masses, inertias, thrust factors, force waves and start position.
pub fn sample_episode_setup<R: Rng + ?Sized>(rng: &mut R, nominal: &VehicleParams, class: VehicleClass) -> EpisodeSetup {
    let ranges = class.ranges();
    let mass_factor = rng.random_range(ranges.mass_factor.0..ranges.mass_factor.1);
    let inertia_factor = mass_factor * rng.random_range(ranges.inertia_extra_factor.0..ranges.inertia_extra_factor.1);
    let disturbance = sample_training_profile(rng, class);
    let start = Vec3::new(
        rng.random_range(-START_AREA_HALF..START_AREA_HALF),
        rng.random_range(-START_AREA_HALF..START_AREA_HALF),
        0.0,
    );
    let mut params = *nominal;
    params.mass *= mass_factor;
    params.inertia_diag *= inertia_factor;
    params.per_propeller_thrust_factors = disturbance.per_propeller_thrust_factors;
    EpisodeSetup { params, mass_factor, inertia_factor, disturbance, start }
}

/// Options for a training rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutOptions {
    pub randomize: bool,
    pub control_steps: usize,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        Self { randomize: true, control_steps: EPISODE_CONTROL_STEPS }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub episode_return: f64,
    pub length: usize,
    pub crashed: bool,
    pub mean_abs_residual_thrust: f64,
    pub reward_terms: [f64; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub trajectory: Trajectory,
    pub stats: EpisodeStats,
    pub setup: EpisodeSetup,
    pub rewards: Vec<RewardBreakdown>,
}

/// Simulate one stochastic training episode with the given policy.
pub fn rollout(policy: &PolicyParams, nominal: &VehicleParams, gains: &ControllerGains, class: VehicleClass, rng: &mut SimRng, options: &RolloutOptions) -> Rollout {
    let setup = if options.randomize {
        sample_episode_setup(rng, nominal, class)
    } else {
        EpisodeSetup {
            params: *nominal,
            mass_factor: 1.0,
            inertia_factor: 1.0,
            disturbance: DisturbanceProfile::none(),
            start: Vec3::zeros(),
        }
    };
    let mut vehicle = Vehicle::new(VehicleState::at_rest(setup.start), setup.params, *nominal, *gains);
    let mut transitions = Vec::with_capacity(options.control_steps);
    let mut rewards = Vec::with_capacity(options.control_steps);
    let mut prev_cmd: Option<HighLevelCommand> = None;
    let mut crashed = false;
    let mut abs_res = 0.0;
    let mut terms = [0.0; 5];
    let mut ret = 0.0;

    for k in 0..options.control_steps {
        let t = k as f64 * CONTROL_DT;
        let des = training_reference(t);
        vehicle.sense(t);
        vehicle.basic(&des);
        let obs = vehicle.observation(&des);
        let mean = policy_mean(&obs, policy);
        let value = value_forward(&obs, policy);
        let raw = sample_action(rng, &mean, &policy.log_std);
        let log_prob = gaussian_log_prob(&raw, &mean, &policy.log_std);
        vehicle.apply_residual(scale_action(&clamp_action(&raw)));
        abs_res += vehicle.residual.thrust.abs();

        let torque = gaussian_torque(rng, setup.disturbance.torque_sigma);
        let mut fault = false;
        for s in 0..SIM_STEPS_PER_CONTROL {
            let ts = t + s as f64 * SIM_DT;
            if s > 0 {
                vehicle.sense(ts);
            }
            let wrench = ExternalWrench { force: triangular_force(ts, &setup.disturbance), torque };
            if vehicle.step(&wrench, 1.0).is_err() {
                fault = true;
                break;
            }
        }

        let t_next = t + CONTROL_DT;
        let des_next = training_reference(t_next);
        let est_next = if fault { vehicle.estimate } else { vehicle.sense(t_next) };
        let mut reward = compute_reward(prev_cmd.as_ref().unwrap_or(&vehicle.command), &vehicle.command, &est_next, &des_next);
        prev_cmd = Some(vehicle.command);
        let done = fault || vehicle.crashed(&des_next);
        if done {
            reward = reward.without_survival();
            crashed = true;
        }
        for (acc, v) in terms.iter_mut().zip(reward.terms()) {
            *acc += v;
        }
        ret += reward.total;
        rewards.push(reward);
        transitions.push(Transition { observation: obs.0, action: raw, log_prob, value, reward: reward.total, done });
        if done {
            break;
        }
    }

    let bootstrap_value = if crashed {
        0.0
    } else {
        let t_end = transitions.len() as f64 * CONTROL_DT;
        let des = training_reference(t_end);
        vehicle.basic(&des);
        value_forward(&vehicle.observation(&des), policy)
    };
    let length = transitions.len();
    Rollout {
        trajectory: Trajectory { transitions, bootstrap_value },
        stats: EpisodeStats {
            episode_return: ret,
            length,
            crashed,
            mean_abs_residual_thrust: abs_res / length.max(1) as f64,
            reward_terms: terms,
        },
        setup,
        rewards,
    }
}

/// Rollout with the `(seed, epoch, episode)` random stream.
pub fn seeded_rollout(
    policy: &PolicyParams,
    nominal: &VehicleParams,
    gains: &ControllerGains,
    class: VehicleClass,
    seed: u64,
    epoch: u64,
    episode: u64,
    options: &RolloutOptions,
) -> Rollout {
    let mut rng = stream_rng(seed, Stream::Rollout, epoch, episode);
    rollout(policy, nominal, gains, class, &mut rng, options)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descent_reference() {
        let d = training_reference(17.5);
        assert!((d.position.z - 0.7).abs() < 1e-12);
        assert_eq!(training_reference(3.0).position, Vec3::new(0.0, 0.0, 1.2));
    }

    #[test]
    fn full_episode_has_1000_transitions() {
        let p = PolicyParams::init(&mut stream_rng(1, Stream::Init, 0, 0));
        let r = seeded_rollout(&p, &VehicleParams::large_quad(), &ControllerGains::default(), VehicleClass::Large, 3, 0, 0, &RolloutOptions { randomize: false, ..Default::default() });
        assert!(!r.stats.crashed);
        assert_eq!(r.trajectory.transitions.len(), 1000);
    }

    #[test]
    fn large_mass_factor_in_range() {
        let mut rng = stream_rng(9, Stream::Rollout, 0, 0);
        let lq = VehicleParams::large_quad();
        for _ in 0..1000 {
            let s = sample_episode_setup(&mut rng, &lq, VehicleClass::Large);
            assert!((0.5..=1.5).contains(&s.mass_factor));
            assert!(s.inertia_factor >= 0.5 * 0.8 && s.inertia_factor <= 1.5 * 1.2);
            assert!(s.start.x.abs() <= 1.0 && s.start.y.abs() <= 1.0 && s.start.z == 0.0);
        }
    }
}
