use proptest::prelude::*;
use proxfly_core::math::{Quat, Vec3};
use proxfly_core::metrics::{count_pulses, downwash_series, e_att, e_pos, max_altitude_error};
use proxfly_core::scenario::*;
use proxfly_core::{DesiredState, VehicleParams};
use std::f64::consts::PI;
use std::sync::OnceLock;

fn template() -> LogRecord {
    static RECORD: OnceLock<LogRecord> = OnceLock::new();
    *RECORD.get_or_init(|| {
        let mut spec = undisturbed_hover_scenario(ControllerChoice::BasicOnly, 0);
        spec.duration = 0.1;
        spec.metric_window = (0.0, 0.1);
        run_scenario(&spec, &[None]).unwrap().logs[0].records[0]
    })
}

fn record(t: f64, desired: Vec3, actual: Vec3, yaw: f64, r: Quat) -> LogRecord {
    let mut rec = template();
    rec.t = t;
    rec.desired = DesiredState { yaw, ..DesiredState::hover(desired) };
    rec.estimate.position = actual;
    rec.estimate.attitude = r;
    rec
}

fn log(records: Vec<LogRecord>) -> FlightLog {
    FlightLog { vehicle: "lq".into(), records }
}

#[test]
fn e_pos_examples() {
    let id = Quat::identity();
    let offset = log((0..50).map(|k| record(k as f64 * 0.02, Vec3::new(0.0, 0.0, 1.2), Vec3::new(0.1, 0.0, 1.2), 0.0, id)).collect());
    assert!((e_pos(&offset).unwrap() - 0.1).abs() < 1e-15);
    let perfect = log(vec![record(0.0, Vec3::new(1.0, 2.0, 3.0), Vec3::new(1.0, 2.0, 3.0), 0.0, id)]);
    assert_eq!(e_pos(&perfect).unwrap(), 0.0);
    let two = log(vec![
        record(0.0, Vec3::zeros(), Vec3::new(0.3, 0.0, 0.0), 0.0, id),
        record(0.02, Vec3::zeros(), Vec3::new(0.0, 0.4, 0.0), 0.0, id),
    ]);
    assert!((e_pos(&two).unwrap() - 0.125_f64.sqrt()).abs() < 1e-15);
    assert!((e_pos(&two).unwrap() - 0.3536).abs() < 1e-4);
}

#[test]
fn e_att_examples() {
    let id = Quat::identity();
    assert_eq!(e_att(&log(vec![record(0.0, Vec3::zeros(), Vec3::zeros(), 0.0, id)])).unwrap(), 0.0);
    let quarter = Quat::from_scaled_axis(Vec3::new(0.0, 0.0, PI / 2.0));
    let l = log((0..10).map(|k| record(k as f64 * 0.02, Vec3::zeros(), Vec3::zeros(), 0.0, quarter)).collect());
    assert!((e_att(&l).unwrap() - PI / 2.0).abs() < 1e-12);
    // The reference is level at the desired yaw.
    let l = log(vec![record(0.0, Vec3::zeros(), Vec3::zeros(), PI / 2.0, quarter)]);
    assert!(e_att(&l).unwrap() < 1e-12);
    let tilted = Quat::from_scaled_axis(Vec3::new(0.2, 0.0, 0.0));
    let l = log(vec![record(0.0, Vec3::zeros(), Vec3::zeros(), 0.0, tilted)]);
    assert!((e_att(&l).unwrap() - 0.2).abs() < 1e-12);
}

fn rotation(v: [f64; 3]) -> Quat {
    Quat::from_scaled_axis(Vec3::from(v))
}

proptest! {
    #[test]
    fn metrics_ignore_time_order_and_translation(
        samples in prop::collection::vec((prop::array::uniform3(-2.0f64..2.0), prop::array::uniform3(-2.0f64..2.0), -3.0f64..3.0, prop::array::uniform3(-1.5f64..1.5)), 1..40),
        shift in prop::array::uniform3(-10.0f64..10.0),
    ) {
        let forward: Vec<LogRecord> = samples.iter().enumerate()
            .map(|(k, (d, a, yaw, r))| record(k as f64 * 0.02, Vec3::from(*d), Vec3::from(*a), *yaw, rotation(*r)))
            .collect();
        let base = log(forward.clone());
        let reversed = log(forward.iter().rev().copied().collect());
        let shifted = log(forward.iter().map(|r| {
            let mut r = *r;
            r.desired.position += Vec3::from(shift);
            r.estimate.position += Vec3::from(shift);
            r
        }).collect());
        let (p, a) = (e_pos(&base).unwrap(), e_att(&base).unwrap());
        prop_assert!((e_pos(&reversed).unwrap() - p).abs() <= 1e-12 * p.max(1.0));
        prop_assert!((e_att(&reversed).unwrap() - a).abs() <= 1e-12 * a.max(1.0));
        prop_assert!((e_pos(&shifted).unwrap() - p).abs() <= 1e-9);
        prop_assert_eq!(e_att(&shifted).unwrap(), a);
        prop_assert!((0.0..=PI).contains(&a));
    }
}

#[test]
fn reversed_circling_gives_two_pulses_per_period() {
    let spec = circling_scenario(CircleMode::Reversed, ControllerChoice::BasicOnly, 0);
    let out = run_scenario(&spec, &[None, None]).unwrap();
    let series = downwash_series(&out.logs[0]);
    let peak = series.iter().cloned().fold(0.0, f64::max);
    assert!(peak > 0.0);
    let periods = (spec.duration / CIRCLE_PERIOD).round() as usize;
    assert_eq!(periods, 4);
    assert_eq!(count_pulses(&series, 0.5 * peak), 2 * periods);
}

#[test]
fn same_direction_circling_keeps_a_steady_downwash() {
    let out = run_scenario(&circling_scenario(CircleMode::Same, ControllerChoice::BasicOnly, 0), &[None, None]).unwrap();
    let series = downwash_series(&out.metric_log());
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    assert!(mean > 0.0);
    assert!(series.iter().all(|f| (f - mean).abs() < 0.5 * mean));
}

#[test]
fn flyover_without_downwash_holds_altitude() {
    let out = run_scenario(&flyover_scenario(0.25, ControllerChoice::BasicOnly, false, 0), &[None, None]).unwrap();
    assert!(out.succeeded());
    assert!(max_altitude_error(&out.subject_log()).unwrap() < 0.02);
}

#[test]
fn flyover_with_downwash_sags_most_when_overhead() {
    let out = run_scenario(&flyover_scenario(0.25, ControllerChoice::BasicOnly, true, 0), &[None, None]).unwrap();
    let lq = &out.logs[0].records;
    let sq = &out.logs[1].records;
    let (k, worst) = lq.iter().enumerate().map(|(k, r)| (k, r.estimate.position.z - r.desired.position.z)).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert!(worst < -0.05);
    let sq_at = sq.iter().find(|r| (r.t - lq[k].t).abs() < 1e-9).unwrap();
    assert!((sq_at.truth.position.x - lq[k].truth.position.x).abs() < 0.1);
}

#[test]
fn docking_adds_the_small_quad_mass() {
    let out = run_scenario(&docking_scenario(ControllerChoice::BasicOnly, DEFAULT_UNDOCK_DELAY, 0), &[None, None]).unwrap();
    assert!(out.succeeded(), "{:?}", out.failure);
    let cut = out.event_time(EventKind::MotorCutoff).unwrap();
    let dock = out.event_time(EventKind::Dock).unwrap();
    let undock = out.event_time(EventKind::Undock).unwrap();
    assert!(cut < dock && dock < undock);
    assert!((undock - dock - DEFAULT_UNDOCK_DELAY).abs() < 0.03);
    assert!((VehicleParams::large_quad().mass + VehicleParams::small_quad().mass - 1.130).abs() < 1e-12);
    // Without an integrator the basic controller settles low by Δm·g / (m·ω_n²).
    let lq = &out.logs[0].records;
    let settled: Vec<f64> = lq.iter().filter(|r| r.t > dock + 3.0 && r.t < undock).map(|r| r.desired.position.z - r.estimate.position.z).collect();
    let mean = settled.iter().sum::<f64>() / settled.len() as f64;
    assert!(mean > 0.2, "docked sag {mean}");
}

#[test]
fn scenarios_are_deterministic() {
    let spec = hover_prox_scenario(ControllerChoice::BasicOnly, 3);
    let a = run_scenario(&spec, &[None, None]).unwrap();
    let b = run_scenario(&spec, &[None, None]).unwrap();
    assert_eq!(a, b);
    let c = run_scenario(&hover_prox_scenario(ControllerChoice::BasicOnly, 4), &[None, None]).unwrap();
    assert_ne!(a.logs[0], c.logs[0]);
}

#[test]
fn logs_tick_at_fifty_hertz() {
    let out = run_scenario(&hover_prox_scenario(ControllerChoice::BasicOnly, 0), &[None, None]).unwrap();
    for l in &out.logs {
        for w in l.records.windows(2) {
            assert!((w[1].t - w[0].t - 0.02).abs() < 1e-9);
        }
    }
}
