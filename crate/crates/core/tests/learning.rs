use proptest::prelude::*;
use proxfly_core::episode::{rollout, seeded_rollout, training_reference, RolloutOptions};
use proxfly_core::math::{geodesic_angle, trace_attitude_error, Quat, Vec3};
use proxfly_core::policy::{build_observation, policy_forward, scale_action, superpose, ResidualAction, OBS_DIM};
use proxfly_core::ppo::{compute_reward, gae_advantages, normalize_advantages, ppo_loss_and_grad, Batch, TrainConfig, Trajectory, Transition};
use proxfly_core::rng::{stream_rng, SimRng, Stream};
use proxfly_core::{ControllerGains, DesiredState, HighLevelCommand, PolicyParams, VehicleClass, VehicleParams, VehicleState};
use rand::Rng;

fn random_rotation(rng: &mut SimRng) -> Quat {
    let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let angle = rng.random_range(0.0..std::f64::consts::PI);
    Quat::from_scaled_axis(axis.normalize() * angle)
}

#[test]
fn trace_error_identities_over_random_rotations() {
    let mut rng = stream_rng(21, Stream::Init, 0, 0);
    for _ in 0..10_000 {
        let r = random_rotation(&mut rng);
        let r_des = random_rotation(&mut rng);
        let omega = (r.inverse() * r_des).angle();
        let e = trace_attitude_error(&r, &r_des);
        assert!((e - (2.0 - 2.0 * omega.cos())).abs() < 1e-9);
        assert!((0.0..=4.0 + 1e-12).contains(&e));
        let via_arccos = geodesic_angle(&r, &r_des);
        let recovered = (1.0 - e / 2.0).clamp(-1.0, 1.0).acos();
        assert!((via_arccos - recovered).abs() < 1e-6 || (via_arccos - omega).abs() < 1e-9);
        assert!((via_arccos - omega).abs() < 1e-6);
    }
    let flip = Quat::from_scaled_axis(Vec3::new(0.0, 0.0, std::f64::consts::PI));
    assert!((trace_attitude_error(&flip, &Quat::identity()) - 4.0).abs() < 1e-12);
}

#[test]
fn reward_hand_cases() {
    let p = Vec3::new(0.0, 0.0, 1.2);
    let est = VehicleState::at_rest(p);
    let des = DesiredState::hover(p);
    let zero = HighLevelCommand::default();
    assert_eq!(compute_reward(&zero, &zero, &est, &des).total, 0.1);
    let hover = HighLevelCommand::new(9.81, Vec3::zeros());
    let r = compute_reward(&hover, &hover, &est, &des);
    assert_eq!(r.total, -0.01 * 9.81 + 0.1);
    assert!((r.total - 0.0019).abs() < 1e-15);
}

#[test]
fn gae_hand_cases() {
    let (adv, ret) = gae_advantages(&[1.0, 1.0, 1.0], &[0.0; 3], &[false; 3], 0.0, 0.5, 1.0);
    assert_eq!(ret, vec![1.75, 1.5, 1.0]);
    assert_eq!(adv, ret);
    let rewards = [0.3, -0.2, 0.7, 0.1];
    let values = [0.5, 0.1, -0.4, 0.2];
    let (td, _) = gae_advantages(&rewards, &values, &[false; 4], 0.9, 0.9, 0.0);
    for t in 0..4 {
        let next = if t == 3 { 0.9 } else { values[t + 1] };
        assert!((td[t] - (rewards[t] + 0.9 * next - values[t])).abs() < 1e-15);
    }
}

#[test]
fn undiscounted_return_is_the_plain_sum() {
    let policy = PolicyParams::init(&mut stream_rng(2, Stream::Init, 0, 0));
    let r = seeded_rollout(&policy, &VehicleParams::large_quad(), &ControllerGains::default(), VehicleClass::Large, 5, 0, 0, &RolloutOptions { randomize: true, control_steps: 200 });
    let rewards: Vec<f64> = r.trajectory.transitions.iter().map(|t| t.reward).collect();
    let values = vec![0.0; rewards.len()];
    let dones: Vec<bool> = r.trajectory.transitions.iter().map(|t| t.done).collect();
    let (_, ret) = gae_advantages(&rewards, &values, &dones, 0.0, 1.0, 1.0);
    let sum: f64 = rewards.iter().sum();
    assert!((ret[0] - sum).abs() < 1e-9 * sum.abs().max(1.0));
    assert!((r.stats.episode_return - sum).abs() < 1e-9 * sum.abs().max(1.0));
}

#[test]
fn rollouts_with_equal_seeds_are_identical() {
    let policy = PolicyParams::init(&mut stream_rng(3, Stream::Init, 0, 0));
    let opts = RolloutOptions { randomize: true, control_steps: 300 };
    let go = |ep| seeded_rollout(&policy, &VehicleParams::large_quad(), &ControllerGains::default(), VehicleClass::Large, 9, 4, ep, &opts);
    assert_eq!(go(2), go(2));
    assert_ne!(go(2).trajectory, go(3).trajectory);
}

#[test]
fn crashed_episode_forfeits_survival_from_the_crash_step() {
    // Negative damping makes the cascade diverge until a crash condition trips.
    let unstable = ControllerGains { damping_ratio: -0.5, ..ControllerGains::default() };
    let policy = PolicyParams::zeros();
    let mut rng = stream_rng(4, Stream::Rollout, 0, 0);
    let r = rollout(&policy, &VehicleParams::large_quad(), &unstable, VehicleClass::Large, &mut rng, &RolloutOptions::default());
    assert!(r.stats.crashed, "{:?}", r.stats);
    let k = r.stats.length - 1;
    assert!(k < 999);
    assert!((r.stats.reward_terms[4] - 0.1 * k as f64).abs() < 1e-9);
    assert!(r.trajectory.transitions.last().unwrap().done);
    assert_eq!(r.trajectory.bootstrap_value, 0.0);
}

#[test]
fn full_episode_length_and_descent() {
    let policy = PolicyParams::init(&mut stream_rng(6, Stream::Init, 0, 0));
    let r = seeded_rollout(&policy, &VehicleParams::large_quad(), &ControllerGains::default(), VehicleClass::Large, 6, 0, 0, &RolloutOptions { randomize: false, control_steps: 1000 });
    assert_eq!(r.trajectory.transitions.len(), 1000);
    assert!((training_reference(17.5).position.z - 0.7).abs() < 1e-12);
    assert_eq!(TrainConfig::default().epochs * TrainConfig::default().episodes_per_epoch, 5000);
}

fn small_batch() -> (Batch, PolicyParams) {
    let mut rng = stream_rng(7, Stream::Init, 0, 0);
    let mut params = PolicyParams::init(&mut rng);
    for w in params.policy.params_mut().iter_mut() {
        *w += rng.random_range(-0.05..0.05);
    }
    params.log_std = [-0.5, -0.8, -1.0, -1.2];
    let transitions: Vec<Transition> = (0..5)
        .map(|_| Transition {
            observation: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
            action: std::array::from_fn(|_| rng.random_range(-0.5..0.5)),
            log_prob: rng.random_range(-3.0..1.0),
            value: rng.random_range(-1.0..1.0),
            reward: rng.random_range(-1.0..1.0),
            done: false,
        })
        .collect();
    (Batch::from_trajectories(&[Trajectory { transitions, bootstrap_value: 0.3 }], 0.99, 0.95), params)
}

#[test]
fn ppo_loss_gradient_matches_finite_differences() {
    let (batch, params) = small_batch();
    let cfg = TrainConfig { clip_ratio: 10.0, ..TrainConfig::default() };
    let (_, grads) = ppo_loss_and_grad(&batch, &params, &cfg);
    let g = grads.flatten();
    let flat = params.flatten();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for k in (0..flat.len()).step_by(37).chain(flat.len() - 4..flat.len()) {
        let eval = |delta: f64| {
            let mut p = params.clone();
            let mut f = flat.clone();
            f[k] += delta;
            p.load_flat(&f);
            ppo_loss_and_grad(&batch, &p, &cfg).0.total
        };
        let fd = (eval(eps) - eval(-eps)) / (2.0 * eps);
        let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-6);
        worst = worst.max(rel);
    }
    assert!(worst <= 1e-4, "worst relative error {worst}");
}

#[test]
fn clipped_samples_contribute_no_policy_gradient() {
    let (mut batch, params) = small_batch();
    let cfg = TrainConfig { entropy_coef: 0.0, value_coef: 0.0, ..TrainConfig::default() };
    // Ratio far above 1 + ε with positive advantage: the clipped branch is active.
    for (lp, a) in batch.old_log_probs.iter_mut().zip(batch.advantages.iter_mut()) {
        *lp -= 5.0;
        *a = a.abs() + 0.1;
    }
    let (_, grads) = ppo_loss_and_grad(&batch, &params, &cfg);
    assert!(grads.policy.iter().chain(&grads.log_std).all(|&g| g == 0.0));
    // Zero advantages leave only the entropy term acting on the log-std.
    let (mut batch, params) = small_batch();
    batch.advantages.iter_mut().for_each(|a| *a = 0.0);
    let (_, grads) = ppo_loss_and_grad(&batch, &params, &TrainConfig { value_coef: 0.0, ..TrainConfig::default() });
    assert!(grads.policy.iter().all(|&g| g == 0.0));
    assert!(grads.log_std.iter().all(|&g| g != 0.0));
}

#[test]
fn action_scaling_examples() {
    assert_eq!(scale_action(&[1.0, 0.0, 0.0, 0.0]).to_array(), [10.0, 0.0, 0.0, 0.0]);
    assert_eq!(scale_action(&[-1.0; 4]).to_array(), [-10.0, -1.0, -1.0, -1.0]);
    assert_eq!(scale_action(&[0.0; 4]), ResidualAction::zero());
    let u = HighLevelCommand::new(9.81, Vec3::zeros());
    let a = ResidualAction { thrust: 2.0, body_rates: Vec3::new(0.1, -0.1, 0.0) };
    assert_eq!(superpose(&u, &a).to_array(), [11.81, 0.1, -0.1, 0.0]);
    let low = HighLevelCommand::new(1.0, Vec3::zeros());
    assert_eq!(superpose(&low, &ResidualAction { thrust: -10.0, body_rates: Vec3::zeros() }).thrust, 0.0);
}

proptest! {
    #[test]
    fn normalized_advantages_are_standard(xs in prop::collection::vec(-100.0f64..100.0, 2..400)) {
        let mut a = xs.clone();
        prop_assume!(xs.iter().any(|&x| (x - xs[0]).abs() > 1e-3));
        normalize_advantages(&mut a);
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((std - 1.0).abs() < 1e-6);
    }

    #[test]
    fn policy_mean_is_inside_the_open_box(seed in 0u64..1000, obs in prop::array::uniform20(-5.0f64..5.0)) {
        let mut params = PolicyParams::init(&mut stream_rng(seed, Stream::Init, 0, 0));
        for w in params.policy.params_mut().iter_mut() {
            *w *= 30.0;
        }
        let (mean, _) = policy_forward(&proxfly_core::Observation(obs), &params);
        prop_assert!(mean.iter().all(|m| m.abs() <= 1.0));
        let (again, _) = policy_forward(&proxfly_core::Observation(obs), &params);
        prop_assert_eq!(mean, again);
    }

    #[test]
    fn observation_has_twenty_finite_entries(p in prop::array::uniform3(-3.0f64..3.0), v in prop::array::uniform3(-3.0f64..3.0), yaw in -3.0f64..3.0) {
        let est = VehicleState { velocity: Vec3::from(v), ..VehicleState::at_rest(Vec3::from(p)) };
        let des = DesiredState { yaw, ..DesiredState::hover(Vec3::zeros()) };
        let o = build_observation(&est, &des, &HighLevelCommand::new(9.81, Vec3::zeros()), &ResidualAction::zero());
        prop_assert_eq!(o.0.len(), OBS_DIM);
        prop_assert!(o.0.iter().all(|x| x.is_finite()));
    }
}
