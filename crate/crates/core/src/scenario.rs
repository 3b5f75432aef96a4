//! Scripted two-vehicle evaluation scenarios.
//!
//! All vehicles advance on one lockstep 500 Hz clock; high-level control and
//! logging happen every 10th tick. Whichever vehicle is higher acts on the one
//! below through [`downwash_wrench`]. Docking is a small state machine on top
//! of the common loop.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::controller::{ControllerGains, DesiredState, EstimatorNoise, HighLevelCommand, StateEstimator};
use crate::disturbance::{downwash_wrench, DownwashParams};
use crate::episode::{Pilot, Vehicle};
use crate::math::{Quat, Vec3};
use crate::policy::{PolicyParams, ResidualAction};
use crate::ppo::{compute_reward, RewardBreakdown};
use crate::rng::{stream_rng, Stream};
use crate::sim::{apply_dock_event, ExternalWrench, VehicleParams, VehicleState};
use crate::{CONTROL_DT, SIM_DT, SIM_STEPS_PER_CONTROL};

pub const LQ_HOVER: [f64; 3] = [0.0, 0.0, 1.2];
pub const FLYOVER_SPEED: f64 = 0.2;
pub const FLYOVER_HEIGHTS: [f64; 3] = [0.25, 0.5, 0.75];
pub const PROXIMITY_SEPARATION: f64 = 0.5;
pub const CIRCLE_DIAMETER: f64 = 1.5;
pub const CIRCLE_PERIOD: f64 = 7.5;
pub const DOCK_APPROACH_START: [f64; 3] = [0.0, -1.0, 1.7];
pub const DOCK_DESCENT_SPEED: f64 = 0.1;
/// SQ center height above the LQ center when the motors are cut, m.
pub const DOCK_RELEASE_HEIGHT: f64 = 0.10;
/// Horizontal alignment needed to release, m.
pub const DOCK_ALIGNMENT: f64 = 0.05;
/// How long the release may wait for alignment, s.
pub const DOCK_TRIGGER_WINDOW: f64 = 3.0;
/// Docked SQ mounting height above the LQ center of mass, m.
pub const DOCK_MOUNT_HEIGHT: f64 = 0.05;
pub const DEFAULT_UNDOCK_DELAY: f64 = 5.0;
/// Vertical climb speed after undocking, m/s.
pub const UNDOCK_CLIMB_SPEED: f64 = 0.1;

/// Motion-capture-like estimator noise used by evaluation scenarios.
pub const EVAL_ESTIMATOR_NOISE: EstimatorNoise = EstimatorNoise { position_sigma: 0.0005, attitude_sigma: 0.001 };

/// Position on a horizontal circle with tangential velocity.
/// `direction` is `+1` for counter-clockwise (seen from above), `-1` otherwise.
pub fn circle_reference(t: f64, center: &Vec3, diameter: f64, period: f64, direction: f64, phase: f64) -> DesiredState {
    let r = 0.5 * diameter;
    let w = 2.0 * PI / period;
    let ang = direction * w * t + phase;
    let (s, c) = ang.sin_cos();
    DesiredState {
        position: center + Vec3::new(r * c, r * s, 0.0),
        velocity: Vec3::new(-r * w * direction * s, r * w * direction * c, 0.0),
        yaw: 0.0,
    }
}

/// A reference generator for one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Hover(Vec3),
    /// Piecewise-linear path through `(time, position)` knots, held after the
    /// last one; velocity is the segment slope.
    Waypoints(Vec<(f64, Vec3)>),
    Circle { center: Vec3, diameter: f64, period: f64, direction: f64, phase: f64 },
}

impl Reference {
    pub fn at(&self, t: f64) -> DesiredState {
        match self {
            Reference::Hover(p) => DesiredState::hover(*p),
            Reference::Waypoints(knots) => {
                let first = knots.first().expect("at least one knot");
                if t <= first.0 {
                    return DesiredState::hover(first.1);
                }
                for w in knots.windows(2) {
                    let ((t0, p0), (t1, p1)) = (w[0], w[1]);
                    if t < t1 {
                        let v = (p1 - p0) / (t1 - t0);
                        return DesiredState { position: p0 + v * (t - t0), velocity: v, yaw: 0.0 };
                    }
                }
                DesiredState::hover(knots.last().expect("non-empty").1)
            }
            Reference::Circle { center, diameter, period, direction, phase } => circle_reference(t, center, *diameter, *period, *direction, *phase),
        }
    }
}

/// Waypoint builder: moves at constant speeds between points.
#[derive(Debug, Clone)]
pub struct PathBuilder {
    knots: Vec<(f64, Vec3)>,
}

impl PathBuilder {
    pub fn start(p: Vec3) -> Self {
        Self { knots: vec![(0.0, p)] }
    }

    fn last(&self) -> (f64, Vec3) {
        *self.knots.last().expect("non-empty")
    }

    pub fn hold(mut self, dt: f64) -> Self {
        let (t, p) = self.last();
        self.knots.push((t + dt, p));
        self
    }

    pub fn move_to(mut self, p: Vec3, speed: f64) -> Self {
        let (t, q) = self.last();
        let d = (p - q).norm();
        self.knots.push((t + d / speed, p));
        self
    }

    pub fn end_time(&self) -> f64 {
        self.last().0
    }

    pub fn build(self) -> Reference {
        Reference::Waypoints(self.knots)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerChoice {
    BasicOnly,
    ProxFly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioVehicle {
    pub name: String,
    pub initial: VehicleState,
    pub params: VehicleParams,
    pub nominal: VehicleParams,
    pub gains: ControllerGains,
    pub reference: Reference,
    pub controller: ControllerChoice,
}

/// Downwash from `source` acting on `target` whenever the source is above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub params: DownwashParams,
    pub source: usize,
    pub target: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DockingPlan {
    pub upper: usize,
    pub lower: usize,
    /// From this time until release the upper reference follows the lower
    /// vehicle's estimated deviation from its own reference.
    pub track_from: f64,
    /// When the SQ reaches its release point above the LQ.
    pub release_time: f64,
    pub trigger_window: f64,
    pub alignment: f64,
    pub mount_height: f64,
    pub undock_delay: f64,
    pub climb_speed: f64,
    pub climb_height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    MotorCutoff,
    Dock,
    Undock,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::MotorCutoff => "motor_cutoff",
            EventKind::Dock => "dock",
            EventKind::Undock => "undock",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub t: f64,
    pub kind: EventKind,
    pub vehicle: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScenarioFailure {
    Crash { vehicle: usize, t: f64 },
    SimFault { vehicle: usize, t: f64 },
    FailedDock { t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub duration: f64,
    pub vehicles: Vec<ScenarioVehicle>,
    pub downwash: Option<Coupling>,
    pub docking: Option<DockingPlan>,
    /// Vehicle the metrics are reported for.
    pub subject: usize,
    /// `[t0, t1)` span over which metrics are computed.
    pub metric_window: (f64, f64),
    pub estimator_noise: EstimatorNoise,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.duration > 0.0) {
            return Err("duration");
        }
        if self.vehicles.is_empty() || self.subject >= self.vehicles.len() {
            return Err("vehicles");
        }
        if let Some(c) = self.downwash {
            if c.source == c.target || c.source >= self.vehicles.len() || c.target >= self.vehicles.len() {
                return Err("downwash");
            }
        }
        if !(self.metric_window.0 < self.metric_window.1) {
            return Err("metric_window");
        }
        Ok(())
    }
}

/// One control-step record of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub truth: VehicleState,
    pub estimate: VehicleState,
    pub desired: DesiredState,
    /// Attitude target produced by the cascade.
    pub desired_attitude: Quat,
    pub u_cas: HighLevelCommand,
    pub residual: ResidualAction,
    pub overall: HighLevelCommand,
    pub wrench: ExternalWrench,
    pub efficiency: f64,
    pub reward: RewardBreakdown,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlightLog {
    pub vehicle: String,
    pub records: Vec<LogRecord>,
}

impl FlightLog {
    pub fn window(&self, t0: f64, t1: f64) -> FlightLog {
        FlightLog {
            vehicle: self.vehicle.clone(),
            records: self.records.iter().filter(|r| r.t >= t0 - 1e-9 && r.t < t1 - 1e-9).copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub name: String,
    pub logs: Vec<FlightLog>,
    pub events: Vec<EventRecord>,
    pub failure: Option<ScenarioFailure>,
    pub subject: usize,
    pub metric_window: (f64, f64),
}

impl ScenarioOutcome {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    pub fn subject_log(&self) -> &FlightLog {
        &self.logs[self.subject]
    }

    /// The subject's log restricted to the metric window.
    pub fn metric_log(&self) -> FlightLog {
        self.subject_log().window(self.metric_window.0, self.metric_window.1)
    }

    pub fn event_time(&self, kind: EventKind) -> Option<f64> {
        self.events.iter().find(|e| e.kind == kind).map(|e| e.t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum DockPhase {
    Approach,
    Armed,
    FreeFall,
    Docked { since: f64 },
    Undocked,
    Failed,
}

/// Run a scenario. `policies[i]` is required when vehicle `i` flies ProxFly.
pub fn run_scenario(spec: &ScenarioSpec, policies: &[Option<&PolicyParams>]) -> Result<ScenarioOutcome, &'static str> {
    spec.validate()?;
    let n = spec.vehicles.len();
    let mut pilots = Vec::with_capacity(n);
    for (i, v) in spec.vehicles.iter().enumerate() {
        pilots.push(match v.controller {
            ControllerChoice::BasicOnly => Pilot::BasicOnly,
            ControllerChoice::ProxFly => Pilot::ProxFly(policies.get(i).copied().flatten().ok_or("missing policy for a ProxFly vehicle")?),
        });
    }
    let mut vehicles: Vec<Vehicle> = spec
        .vehicles
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut veh = Vehicle::new(v.initial, v.params, v.nominal, v.gains);
            if spec.estimator_noise != EstimatorNoise::default() {
                veh.estimator = StateEstimator::with_noise(spec.estimator_noise, stream_rng(spec.seed, Stream::Estimator, i as u64, 0));
            }
            veh
        })
        .collect();
    let mut references: Vec<Reference> = spec.vehicles.iter().map(|v| v.reference.clone()).collect();
    let mut logs: Vec<FlightLog> = spec.vehicles.iter().map(|v| FlightLog { vehicle: v.name.clone(), records: Vec::new() }).collect();
    let mut prev_overall: Vec<Option<HighLevelCommand>> = vec![None; n];
    let mut events = Vec::new();
    let mut failure = None;
    let mut dock_phase = DockPhase::Approach;
    let mut lower_original = spec.docking.map(|d| spec.vehicles[d.lower].params);

    let control_steps = (spec.duration / CONTROL_DT).round() as usize;
    'outer: for k in 0..control_steps {
        let t = k as f64 * CONTROL_DT;
        for v in vehicles.iter_mut() {
            v.sense(t);
        }

        if let Some(plan) = spec.docking {
            match dock_phase {
                DockPhase::Approach if t >= plan.release_time => dock_phase = DockPhase::Armed,
                DockPhase::Docked { since } if t >= since + plan.undock_delay => {
                    let lower = vehicles[plan.lower].truth;
                    let mut upper = lower;
                    upper.position += lower.attitude * Vec3::new(0.0, 0.0, plan.mount_height);
                    upper.motor_speeds = [vehicles[plan.upper].params.hover_motor_speed(); 4];
                    let up = &mut vehicles[plan.upper];
                    up.truth = upper;
                    up.motors_enabled = true;
                    up.estimator = StateEstimator::new();
                    up.sense(t);
                    if let Some(orig) = lower_original.take() {
                        vehicles[plan.lower].params = orig;
                    }
                    let start = upper.position;
                    let climb = (plan.climb_height - start.z).max(0.0);
                    references[plan.upper] = PathBuilder::start(start).move_to(start + Vec3::new(0.0, 0.0, climb), plan.climb_speed).build();
                    events.push(EventRecord { t, kind: EventKind::Undock, vehicle: plan.upper });
                    dock_phase = DockPhase::Undocked;
                }
                _ => {}
            }
            if dock_phase == DockPhase::Armed {
                let d = vehicles[plan.upper].truth.position - vehicles[plan.lower].truth.position;
                if (d.x * d.x + d.y * d.y).sqrt() < plan.alignment {
                    vehicles[plan.upper].motors_enabled = false;
                    vehicles[plan.upper].truth.motor_speeds = [0.0; 4];
                    events.push(EventRecord { t, kind: EventKind::MotorCutoff, vehicle: plan.upper });
                    dock_phase = DockPhase::FreeFall;
                } else if t >= plan.release_time + plan.trigger_window {
                    failure = Some(ScenarioFailure::FailedDock { t });
                    dock_phase = DockPhase::Failed;
                    break 'outer;
                }
            }
        }

        let mut desired: Vec<DesiredState> = references.iter().map(|r| r.at(t)).collect();
        if let Some(plan) = spec.docking {
            if t >= plan.track_from && matches!(dock_phase, DockPhase::Approach | DockPhase::Armed) {
                let offset = vehicles[plan.lower].estimate.position - desired[plan.lower].position;
                desired[plan.upper].position += offset;
            }
        }
        for (i, v) in vehicles.iter_mut().enumerate() {
            v.control(&desired[i], pilots[i]);
        }
        let coupling = couplings(&vehicles, spec, dock_phase);
        for i in 0..n {
            if is_passive(spec, dock_phase, i) {
                continue;
            }
            let v = &vehicles[i];
            let prev = prev_overall[i].unwrap_or(v.command);
            let reward = compute_reward(&prev, &v.command, &v.estimate, &desired[i]);
            prev_overall[i] = Some(v.command);
            logs[i].records.push(LogRecord {
                t,
                truth: v.truth,
                estimate: v.estimate,
                desired: desired[i],
                desired_attitude: v.attitude_target,
                u_cas: v.u_cas,
                residual: v.residual,
                overall: v.command,
                wrench: coupling[i].0,
                efficiency: coupling[i].1,
                reward,
            });
        }

        for s in 0..SIM_STEPS_PER_CONTROL {
            let ts = t + s as f64 * SIM_DT;
            if s > 0 {
                for v in vehicles.iter_mut() {
                    v.sense(ts);
                }
            }
            let coupling = couplings(&vehicles, spec, dock_phase);
            for i in 0..n {
                if matches!(dock_phase, DockPhase::Docked { .. }) && spec.docking.map(|d| d.upper) == Some(i) {
                    continue;
                }
                if vehicles[i].step(&coupling[i].0, coupling[i].1).is_err() {
                    failure = Some(ScenarioFailure::SimFault { vehicle: i, t: ts });
                    break 'outer;
                }
            }
            if let (Some(plan), DockPhase::FreeFall) = (spec.docking, dock_phase) {
                let lower = vehicles[plan.lower].truth;
                let upper = vehicles[plan.upper].truth;
                if upper.position.z - lower.position.z <= plan.mount_height {
                    let impact = (lower.velocity.z - upper.velocity.z).max(0.0);
                    let upper_mass = vehicles[plan.upper].params.mass;
                    let lp = vehicles[plan.lower].params;
                    let (state, params) = apply_dock_event(&lower, &lp, upper_mass, impact, plan.mount_height);
                    vehicles[plan.lower].truth = state;
                    vehicles[plan.lower].params = params;
                    events.push(EventRecord { t: ts + SIM_DT, kind: EventKind::Dock, vehicle: plan.upper });
                    dock_phase = DockPhase::Docked { since: ts + SIM_DT };
                }
            }
            if let (Some(plan), DockPhase::Docked { .. }) = (spec.docking, dock_phase) {
                let lower = vehicles[plan.lower].truth;
                let up = &mut vehicles[plan.upper];
                up.truth = lower;
                up.truth.position += lower.attitude * Vec3::new(0.0, 0.0, plan.mount_height);
                up.truth.motor_speeds = [0.0; 4];
            }
        }

        let t_next = t + CONTROL_DT;
        for i in 0..n {
            if is_passive(spec, dock_phase, i) || dock_phase == DockPhase::FreeFall && spec.docking.map(|d| d.upper) == Some(i) {
                continue;
            }
            let des = references[i].at(t_next);
            if vehicles[i].crashed(&des) {
                failure = Some(ScenarioFailure::Crash { vehicle: i, t: t_next });
                break 'outer;
            }
        }
    }
    if dock_phase == DockPhase::Failed && failure.is_none() {
        failure = Some(ScenarioFailure::FailedDock { t: spec.duration });
    }
    Ok(ScenarioOutcome { name: spec.name.clone(), logs, events, failure, subject: spec.subject, metric_window: spec.metric_window })
}

fn is_passive(spec: &ScenarioSpec, phase: DockPhase, i: usize) -> bool {
    matches!(phase, DockPhase::Docked { .. }) && spec.docking.map(|d| d.upper) == Some(i)
}

/// Downwash wrench (torque in body frame) and efficiency for every vehicle.
fn couplings(vehicles: &[Vehicle], spec: &ScenarioSpec, phase: DockPhase) -> Vec<(ExternalWrench, f64)> {
    let mut out = vec![(ExternalWrench::zero(), 1.0); vehicles.len()];
    let Some(c) = spec.downwash else {
        return out;
    };
    let (upper, lower) = (&vehicles[c.source], &vehicles[c.target]);
    if !upper.motors_enabled || is_passive(spec, phase, c.source) {
        return out;
    }
    let (w, eff) = downwash_wrench(&upper.truth.position, &lower.truth.position, upper.params.weight(), &c.params);
    out[c.target] = (ExternalWrench { force: w.force, torque: lower.truth.attitude.inverse() * w.torque }, eff);
    out
}

fn lq_vehicle(name: &str, initial: VehicleState, reference: Reference, controller: ControllerChoice) -> ScenarioVehicle {
    let p = VehicleParams::large_quad();
    ScenarioVehicle { name: name.into(), initial, params: p, nominal: p, gains: ControllerGains::default(), reference, controller }
}

fn sq_vehicle(initial: VehicleState, reference: Reference) -> ScenarioVehicle {
    let p = VehicleParams::small_quad();
    ScenarioVehicle { name: "sq".into(), initial, params: p, nominal: p, gains: ControllerGains::default(), reference, controller: ControllerChoice::BasicOnly }
}

fn sq_on_lq() -> Coupling {
    Coupling { params: DownwashParams::default(), source: 1, target: 0 }
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// SQ takes off at (−1, 0, 0), crosses over the hovering LQ at
/// `1.2 + height_offset`, hovers 5 s overhead and lands at (1, 0, 0).
pub fn flyover_scenario(height_offset: f64, lq: ControllerChoice, downwash: bool, seed: u64) -> ScenarioSpec {
    let lq_pos = v3(LQ_HOVER);
    let z = LQ_HOVER[2] + height_offset;
    let path = PathBuilder::start(Vec3::new(-1.0, 0.0, 0.0))
        .hold(1.0)
        .move_to(Vec3::new(-1.0, 0.0, z), 0.5)
        .hold(2.0)
        .move_to(Vec3::new(0.0, 0.0, z), FLYOVER_SPEED)
        .hold(5.0)
        .move_to(Vec3::new(1.0, 0.0, z), FLYOVER_SPEED)
        .hold(1.0)
        .move_to(Vec3::new(1.0, 0.0, 0.0), 0.5)
        .hold(2.0);
    let duration = path.end_time();
    ScenarioSpec {
        name: "flyover".into(),
        duration,
        vehicles: vec![
            lq_vehicle("lq", VehicleState::hovering(lq_pos, &VehicleParams::large_quad()), Reference::Hover(lq_pos), lq),
            sq_vehicle(VehicleState::at_rest(Vec3::new(-1.0, 0.0, 0.0)), path.build()),
        ],
        downwash: downwash.then(sq_on_lq),
        docking: None,
        subject: 0,
        metric_window: (0.0, duration),
        estimator_noise: EVAL_ESTIMATOR_NOISE,
        seed,
    }
}

/// SQ slides in over the LQ and hovers 0.5 m above it for 10 s.
pub fn hover_prox_scenario(lq: ControllerChoice, seed: u64) -> ScenarioSpec {
    let lq_pos = v3(LQ_HOVER);
    let z = LQ_HOVER[2] + PROXIMITY_SEPARATION;
    let path = PathBuilder::start(Vec3::new(-1.0, 0.0, z)).move_to(Vec3::new(0.0, 0.0, z), FLYOVER_SPEED);
    let arrive = path.end_time();
    let path = path.hold(10.0);
    let duration = path.end_time();
    ScenarioSpec {
        name: "hover_prox".into(),
        duration,
        vehicles: vec![
            lq_vehicle("lq", VehicleState::hovering(lq_pos, &VehicleParams::large_quad()), Reference::Hover(lq_pos), lq),
            sq_vehicle(VehicleState::hovering(Vec3::new(-1.0, 0.0, z), &VehicleParams::small_quad()), path.build()),
        ],
        downwash: Some(sq_on_lq()),
        docking: None,
        subject: 0,
        metric_window: (arrive, duration),
        estimator_noise: EVAL_ESTIMATOR_NOISE,
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircleMode {
    Same,
    Reversed,
}

/// Both vehicles circle (1.5 m diameter, 7.5 s period) with the SQ 0.5 m
/// higher; in reversed mode the LQ flies clockwise starting opposite the SQ.
pub fn circling_scenario(mode: CircleMode, lq: ControllerChoice, seed: u64) -> ScenarioSpec {
    let periods = 4.0;
    let duration = periods * CIRCLE_PERIOD;
    let lq_center = v3(LQ_HOVER);
    let sq_center = lq_center + Vec3::new(0.0, 0.0, PROXIMITY_SEPARATION);
    let (lq_dir, lq_phase) = match mode {
        CircleMode::Same => (1.0, 0.0),
        CircleMode::Reversed => (-1.0, PI),
    };
    let lq_ref = Reference::Circle { center: lq_center, diameter: CIRCLE_DIAMETER, period: CIRCLE_PERIOD, direction: lq_dir, phase: lq_phase };
    let sq_ref = Reference::Circle { center: sq_center, diameter: CIRCLE_DIAMETER, period: CIRCLE_PERIOD, direction: 1.0, phase: 0.0 };
    let lq_start = VehicleState::hovering(lq_ref.at(0.0).position, &VehicleParams::large_quad());
    let sq_start = VehicleState::hovering(sq_ref.at(0.0).position, &VehicleParams::small_quad());
    ScenarioSpec {
        name: match mode {
            CircleMode::Same => "circle_same".into(),
            CircleMode::Reversed => "circle_reversed".into(),
        },
        duration,
        vehicles: vec![lq_vehicle("lq", lq_start, lq_ref, lq), sq_vehicle(sq_start, sq_ref)],
        downwash: Some(sq_on_lq()),
        docking: None,
        subject: 0,
        metric_window: (CIRCLE_PERIOD, duration),
        estimator_noise: EVAL_ESTIMATOR_NOISE,
        seed,
    }
}

/// SQ approaches from (0, −1, 1.7), descends at 0.1 m/s to 10 cm above the
/// LQ, cuts its motors once aligned, docks, and climbs away after
/// `undock_delay` seconds.
pub fn docking_scenario(lq: ControllerChoice, undock_delay: f64, seed: u64) -> ScenarioSpec {
    let lq_pos = v3(LQ_HOVER);
    let above = lq_pos + Vec3::new(0.0, 0.0, PROXIMITY_SEPARATION);
    let release = lq_pos + Vec3::new(0.0, 0.0, DOCK_RELEASE_HEIGHT);
    let path = PathBuilder::start(v3(DOCK_APPROACH_START))
        .hold(3.0)
        .move_to(above, FLYOVER_SPEED)
        .hold(2.0);
    let track_from = path.end_time() - 1.0;
    let path = path.move_to(release, DOCK_DESCENT_SPEED);
    let release_time = path.end_time();
    let climb_time = (PROXIMITY_SEPARATION - DOCK_MOUNT_HEIGHT) / UNDOCK_CLIMB_SPEED;
    let duration = release_time + 1.0 + undock_delay + climb_time + 5.0;
    ScenarioSpec {
        name: "docking".into(),
        duration,
        vehicles: vec![
            lq_vehicle("lq", VehicleState::hovering(lq_pos, &VehicleParams::large_quad()), Reference::Hover(lq_pos), lq),
            sq_vehicle(VehicleState::hovering(v3(DOCK_APPROACH_START), &VehicleParams::small_quad()), path.build()),
        ],
        downwash: Some(sq_on_lq()),
        docking: Some(DockingPlan {
            upper: 1,
            lower: 0,
            track_from,
            release_time,
            trigger_window: DOCK_TRIGGER_WINDOW,
            alignment: DOCK_ALIGNMENT,
            mount_height: DOCK_MOUNT_HEIGHT,
            undock_delay,
            climb_speed: UNDOCK_CLIMB_SPEED,
            climb_height: above.z,
        }),
        subject: 0,
        metric_window: (0.0, duration),
        estimator_noise: EVAL_ESTIMATOR_NOISE,
        seed,
    }
}

/// LQ alone holding (0, 0, 1.2) for 10 s with a nominal plant.
pub fn undisturbed_hover_scenario(lq: ControllerChoice, seed: u64) -> ScenarioSpec {
    let lq_pos = v3(LQ_HOVER);
    ScenarioSpec {
        name: "hover".into(),
        duration: 10.0,
        vehicles: vec![lq_vehicle("lq", VehicleState::hovering(lq_pos, &VehicleParams::large_quad()), Reference::Hover(lq_pos), lq)],
        downwash: None,
        docking: None,
        subject: 0,
        metric_window: (0.0, 10.0),
        estimator_noise: EVAL_ESTIMATOR_NOISE,
        seed,
    }
}

/// Evaluation task names accepted by [`task_scenario`].
pub const TASKS: [&str; 6] = ["flyover", "hover_prox", "circle_same", "circle_reversed", "docking", "hover"];

/// Build a named task. `height` only affects the flyover.
pub fn task_scenario(name: &str, lq: ControllerChoice, height: f64, seed: u64) -> Option<ScenarioSpec> {
    Some(match name {
        "flyover" => flyover_scenario(height, lq, true, seed),
        "hover_prox" => hover_prox_scenario(lq, seed),
        "circle_same" => circling_scenario(CircleMode::Same, lq, seed),
        "circle_reversed" => circling_scenario(CircleMode::Reversed, lq, seed),
        "docking" => docking_scenario(lq, DEFAULT_UNDOCK_DELAY, seed),
        "hover" => undisturbed_hover_scenario(lq, seed),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_start_and_speed() {
        let c = Vec3::new(0.0, 0.0, 1.2);
        let d = circle_reference(0.0, &c, 1.5, 7.5, 1.0, 0.0);
        assert!((d.position - Vec3::new(0.75, 0.0, 1.2)).norm() < 1e-15);
        assert!((d.velocity.norm() - PI * 1.5 / 7.5).abs() < 1e-12);
        assert!((d.velocity.norm() - 0.628_318_530_7).abs() < 1e-9);
    }

    #[test]
    fn circle_is_periodic_and_mirrors() {
        let c = Vec3::new(0.3, -0.2, 1.0);
        let a = circle_reference(0.0, &c, 1.5, 7.5, 1.0, 0.4);
        let b = circle_reference(7.5, &c, 1.5, 7.5, 1.0, 0.4);
        assert!((a.position - b.position).norm() < 1e-12);
        assert!((a.velocity - b.velocity).norm() < 1e-12);
        let f = circle_reference(0.0, &Vec3::zeros(), 1.5, 7.5, 1.0, 0.0);
        let r = circle_reference(0.0, &Vec3::zeros(), 1.5, 7.5, -1.0, 0.0);
        assert_eq!(r.velocity, -f.velocity);
        for k in 0..20 {
            let t = k as f64 * 0.41;
            let f = circle_reference(t, &Vec3::zeros(), 1.5, 7.5, 1.0, 0.0);
            let r = circle_reference(t, &Vec3::zeros(), 1.5, 7.5, -1.0, 0.0);
            assert!((r.position - Vec3::new(f.position.x, -f.position.y, f.position.z)).norm() < 1e-12);
            assert!((r.velocity - Vec3::new(f.velocity.x, -f.velocity.y, f.velocity.z)).norm() < 1e-12);
        }
    }

    #[test]
    fn waypoints_interpolate() {
        let r = PathBuilder::start(Vec3::zeros()).move_to(Vec3::new(1.0, 0.0, 0.0), 0.2).build();
        let d = r.at(2.5);
        assert!((d.position.x - 0.5).abs() < 1e-12);
        assert!((d.velocity.x - 0.2).abs() < 1e-12);
        assert_eq!(r.at(100.0).position, Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn proxfly_without_policy_is_rejected() {
        let spec = hover_prox_scenario(ControllerChoice::ProxFly, 0);
        assert!(run_scenario(&spec, &[None, None]).is_err());
    }
}
