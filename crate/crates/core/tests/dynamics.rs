use proptest::prelude::*;
use proxfly_core::math::{Quat, Vec3};
use proxfly_core::sim::{apply_dock_event, motor_dynamics, rotor_thrusts, step, thrusts_to_wrench};
use proxfly_core::{ExternalWrench, VehicleParams, VehicleState, GRAVITY, SIM_DT};

fn hover_state(params: &VehicleParams) -> VehicleState {
    VehicleState::hovering(Vec3::new(0.3, -0.2, 1.2), params)
}

#[test]
fn hover_is_a_fixed_point() {
    let p = VehicleParams::large_quad();
    let s0 = hover_state(&p);
    let thrust: f64 = rotor_thrusts(&s0.motor_speeds, &p).iter().sum();
    assert!((thrust - p.mass * GRAVITY).abs() < 1e-12);
    let mut s = s0;
    for _ in 0..5000 {
        let next = step(&s, &s.motor_speeds, &ExternalWrench::zero(), &p, SIM_DT).unwrap();
        assert!((next.position - s.position).norm() < 1e-9);
        s = next;
    }
    assert!((s.position - s0.position).norm() < 1e-9);
}

#[test]
fn free_fall_matches_the_discrete_solution() {
    let p = VehicleParams::small_quad();
    let z0 = 100.0;
    let mut s = VehicleState::at_rest(Vec3::new(0.0, 0.0, z0));
    let n = 500;
    for _ in 0..n {
        s = step(&s, &[0.0; 4], &ExternalWrench::zero(), &p, SIM_DT).unwrap();
    }
    let t = n as f64 * SIM_DT;
    assert!((s.velocity.z + GRAVITY * t).abs() < 1e-9, "vz {}", s.velocity.z);
    // Velocity first, then position: z_n = z0 - g dt^2 n (n + 1) / 2.
    let nf = n as f64;
    let z_expected = z0 - GRAVITY * SIM_DT * SIM_DT * nf * (nf + 1.0) / 2.0;
    assert!((s.position.z - z_expected).abs() < 1e-9);
    // Analytic continuous value differs by the first-order step error g t dt / 2.
    let analytic = z0 - 0.5 * GRAVITY * t * t;
    assert!((s.position.z - analytic + 0.5 * GRAVITY * t * SIM_DT).abs() < 1e-9);
}

#[test]
fn quaternion_norm_survives_a_million_steps() {
    let p = VehicleParams::small_quad();
    let mut s = VehicleState::at_rest(Vec3::zeros());
    s.body_rates = Vec3::new(3.0, -2.0, 1.5);
    let w = ExternalWrench { force: Vec3::new(0.0, 0.0, p.mass * GRAVITY), torque: Vec3::zeros() };
    for _ in 0..1_000_000 {
        s = step(&s, &[0.0; 4], &w, &p, SIM_DT).unwrap();
    }
    assert!((s.attitude.quaternion().norm() - 1.0).abs() < 1e-9);
}

#[test]
fn torque_free_tumbling_keeps_angular_momentum() {
    let p = VehicleParams::large_quad();
    let mut s = VehicleState::at_rest(Vec3::zeros());
    s.body_rates = Vec3::new(1.0, 0.5, 2.0);
    let weightless = ExternalWrench { force: Vec3::new(0.0, 0.0, p.mass * GRAVITY), torque: Vec3::zeros() };
    let body0 = p.inertia_diag.component_mul(&s.body_rates).norm();
    for _ in 0..500 {
        s = step(&s, &[0.0; 4], &weightless, &p, SIM_DT).unwrap();
    }
    let body1 = p.inertia_diag.component_mul(&s.body_rates).norm();
    assert!((body1 - body0).abs() / body0 < 1e-6);
}

#[test]
fn identical_inputs_give_identical_trajectories() {
    let p = VehicleParams::large_quad();
    let run = || {
        let mut s = hover_state(&p);
        let mut out = Vec::new();
        for k in 0..2000 {
            let x = k as f64 * 0.01;
            let cmd = [700.0 + 50.0 * x.sin(), 710.0, 690.0 + 20.0 * x.cos(), 705.0];
            let w = ExternalWrench { force: Vec3::new(0.1 * x.sin(), 0.0, -0.3), torque: Vec3::new(0.001, -0.002, 0.0) };
            s = step(&s, &cmd, &w, &p, SIM_DT).unwrap();
            out.push(s);
        }
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn docking_a_falling_small_quad() {
    let lq = VehicleParams::large_quad();
    let sq = VehicleParams::small_quad();
    let impact = (2.0 * GRAVITY * 0.05_f64).sqrt();
    assert!((impact - 0.990).abs() < 5e-4);
    assert!((sq.mass * impact - 0.277).abs() < 5e-4);

    let lower = hover_state(&lq);
    let (state, params) = apply_dock_event(&lower, &lq, sq.mass, impact, 0.05);
    assert!((params.mass - 1.130).abs() < 1e-12);
    let momentum_before = lq.mass * lower.velocity.z - sq.mass * impact;
    assert!((params.mass * state.velocity.z - momentum_before).abs() < 1e-12);
    assert_eq!(params.per_propeller_thrust_factors, lq.per_propeller_thrust_factors);
    assert!((params.inertia_diag.x - lq.inertia_diag.x - sq.mass * 0.05 * 0.05).abs() < 1e-15);
    assert_eq!(params.inertia_diag.z, lq.inertia_diag.z);

    let (same_state, same_params) = apply_dock_event(&lower, &lq, 0.0, impact, 0.05);
    assert_eq!(same_state, lower);
    assert_eq!(same_params, lq);
}

#[test]
fn preset_values() {
    let lq = VehicleParams::large_quad();
    assert_eq!(lq.mass, 0.850);
    assert_eq!(lq.inertia_diag, Vec3::new(5.51e-3, 5.51e-3, 9.88e-3));
    assert_eq!(lq.arm_length, 0.165);
    assert_eq!(lq.thrust_coeff, 7.640e-6);
    assert_eq!(VehicleParams::small_quad().mass, 0.280);
}

proptest! {
    #[test]
    fn motor_response_stays_between_current_and_command(
        cur in prop::array::uniform4(0.0f64..2000.0),
        cmd in prop::array::uniform4(0.0f64..2000.0),
        dt in 1e-4f64..1.0,
        tau in 1e-3f64..1.0,
    ) {
        let out = motor_dynamics(cur, cmd, dt, tau);
        for i in 0..4 {
            let (lo, hi) = if cur[i] < cmd[i] { (cur[i], cmd[i]) } else { (cmd[i], cur[i]) };
            prop_assert!(out[i] >= lo - 1e-9 && out[i] <= hi + 1e-9);
            prop_assert!(out[i] >= 0.0);
        }
    }

    #[test]
    fn step_keeps_unit_quaternion_and_nonnegative_motors(
        rates in prop::array::uniform3(-10.0f64..10.0),
        axis in prop::array::uniform3(-1.0f64..1.0),
        cmd in prop::array::uniform4(0.0f64..1500.0),
    ) {
        let p = VehicleParams::large_quad();
        let mut s = hover_state(&p);
        s.attitude = Quat::from_scaled_axis(Vec3::from(axis));
        s.body_rates = Vec3::from(rates);
        for _ in 0..50 {
            s = step(&s, &cmd, &ExternalWrench::zero(), &p, SIM_DT).unwrap();
            prop_assert!((s.attitude.quaternion().norm() - 1.0).abs() < 1e-12);
            prop_assert!(s.motor_speeds.iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn equal_thrusts_give_no_roll_or_pitch_torque(t in 0.0f64..10.0) {
        let p = VehicleParams::large_quad();
        let (total, torque) = thrusts_to_wrench(&[t; 4], &p);
        prop_assert!((total - 4.0 * t).abs() < 1e-12);
        prop_assert!(torque.norm() < 1e-12);
    }
}
