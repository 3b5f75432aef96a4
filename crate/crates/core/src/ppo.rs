//! Reward shaping, advantage estimation and the clipped-surrogate PPO update.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::controller::{DesiredState, HighLevelCommand};
use crate::math;
use crate::policy::{gaussian_entropy, PolicyParams, ACTION_DIM, OBS_DIM};
use crate::sim::VehicleState;

/// Reward weights for `[e_pos, e_att, P_c, P_ω, r_survive]`.
pub const REWARD_WEIGHTS: [f64; 5] = [-1.0, -1.0, -0.01, -0.1, 1.0];
/// Survival reward per control step.
pub const SURVIVAL_REWARD: f64 = 0.1;
/// Weight of the command-oscillation term relative to magnitude.
pub const OSCILLATION_WEIGHT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardBreakdown {
    pub e_pos: f64,
    pub e_att: f64,
    pub p_thrust: f64,
    pub p_rates: f64,
    pub survive: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn terms(&self) -> [f64; 5] {
        [self.e_pos, self.e_att, self.p_thrust, self.p_rates, self.survive]
    }

    fn weighted(e_pos: f64, e_att: f64, p_thrust: f64, p_rates: f64, survive: f64) -> Self {
        let terms = [e_pos, e_att, p_thrust, p_rates, survive];
        let total = terms.iter().zip(REWARD_WEIGHTS).map(|(t, w)| t * w).sum();
        Self { e_pos, e_att, p_thrust, p_rates, survive, total }
    }

    /// Same terms with the survival reward withheld.
    pub fn without_survival(&self) -> Self {
        Self::weighted(self.e_pos, self.e_att, self.p_thrust, self.p_rates, 0.0)
    }
}

/// Per-step reward from the overall commands at two consecutive control steps.
pub fn compute_reward(prev_cmd: &HighLevelCommand, cmd: &HighLevelCommand, est: &VehicleState, des: &DesiredState) -> RewardBreakdown {
    let e_pos = (des.position - est.position).norm();
    let e_att = math::trace_attitude_error(&est.attitude, &des.attitude());
    let p_thrust = cmd.thrust.abs() + OSCILLATION_WEIGHT * (cmd.thrust - prev_cmd.thrust).abs();
    let p_rates = cmd.body_rates.norm() + OSCILLATION_WEIGHT * (cmd.body_rates - prev_cmd.body_rates).norm();
    RewardBreakdown::weighted(e_pos, e_att, p_thrust, p_rates, SURVIVAL_REWARD)
}

/// One 50 Hz control step of experience.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub observation: [f64; OBS_DIM],
    /// Gaussian sample before clamping.
    pub action: [f64; ACTION_DIM],
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    /// Episode ended by a crash after this step.
    pub done: bool,
}

/// A finished episode's transitions plus the value used to bootstrap past
/// its last step (zero after a crash, `V(s_T)` after truncation).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub bootstrap_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_ratio: f64,
    pub learning_rate: f64,
    pub update_passes: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            episodes_per_epoch: 10,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_ratio: 0.2,
            learning_rate: 3e-4,
            update_passes: 4,
            minibatch_size: 250,
            entropy_coef: 1e-3,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.epochs == 0 {
            return Err("epochs");
        }
        if self.episodes_per_epoch == 0 {
            return Err("episodes_per_epoch");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err("gamma");
        }
        if !(self.gae_lambda > 0.0 && self.gae_lambda <= 1.0) {
            return Err("gae_lambda");
        }
        if !(self.clip_ratio > 0.0) {
            return Err("clip_ratio");
        }
        if !(self.learning_rate > 0.0) {
            return Err("learning_rate");
        }
        if self.update_passes == 0 {
            return Err("update_passes");
        }
        if self.minibatch_size == 0 {
            return Err("minibatch_size");
        }
        if !(self.entropy_coef >= 0.0) {
            return Err("entropy_coef");
        }
        if !(self.value_coef >= 0.0) {
            return Err("value_coef");
        }
        if !(self.max_grad_norm > 0.0) {
            return Err("max_grad_norm");
        }
        Ok(())
    }
}

/// Generalized advantage estimation over one trajectory.
///
/// `values[t]` is `V(s_t)`; `dones[t]` marks a terminal step whose successor
/// value is zero. `bootstrap` is the value after the final step when it is
/// not terminal. Returns `(advantages, returns)` with `returns = adv + V`.
pub fn gae_advantages(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n);
    assert_eq!(dones.len(), n);
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let (next_value, carry) = if dones[t] {
            (0.0, 0.0)
        } else if t + 1 == n {
            (bootstrap, 0.0)
        } else {
            (values[t + 1], 1.0)
        };
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * carry * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shift and scale to zero mean and unit (population) variance in place.
pub fn normalize_advantages(adv: &mut [f64]) {
    let n = adv.len() as f64;
    if adv.is_empty() {
        return;
    }
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for a in adv.iter_mut() {
        *a = (*a - mean) / std;
    }
}

/// Flattened training batch.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub observations: Vec<f64>,
    pub actions: Vec<[f64; ACTION_DIM]>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Run GAE per trajectory, then normalize advantages over the whole batch.
    pub fn from_trajectories(trajs: &[Trajectory], gamma: f64, lambda: f64) -> Self {
        let mut b = Batch::default();
        for traj in trajs {
            let rewards: Vec<f64> = traj.transitions.iter().map(|t| t.reward).collect();
            let values: Vec<f64> = traj.transitions.iter().map(|t| t.value).collect();
            let dones: Vec<bool> = traj.transitions.iter().map(|t| t.done).collect();
            let (adv, ret) = gae_advantages(&rewards, &values, &dones, traj.bootstrap_value, gamma, lambda);
            for t in &traj.transitions {
                b.observations.extend_from_slice(&t.observation);
                b.actions.push(t.action);
                b.old_log_probs.push(t.log_prob);
            }
            b.advantages.extend(adv);
            b.returns.extend(ret);
        }
        normalize_advantages(&mut b.advantages);
        b
    }

    pub fn select(&self, idx: &[usize]) -> Batch {
        let mut out = Batch::default();
        for &i in idx {
            out.observations.extend_from_slice(&self.observations[i * OBS_DIM..(i + 1) * OBS_DIM]);
            out.actions.push(self.actions[i]);
            out.old_log_probs.push(self.old_log_probs[i]);
            out.advantages.push(self.advantages[i]);
            out.returns.push(self.returns[i]);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub total: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Gradients laid out like [`PolicyParams::flatten`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub policy: Vec<f64>,
    pub value: Vec<f64>,
    pub log_std: [f64; ACTION_DIM],
}

impl Gradients {
    pub fn zeros_like(p: &PolicyParams) -> Self {
        Self { policy: vec![0.0; p.policy.param_count()], value: vec![0.0; p.value.param_count()], log_std: [0.0; ACTION_DIM] }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.policy.len() + self.value.len() + ACTION_DIM);
        v.extend_from_slice(&self.policy);
        v.extend_from_slice(&self.value);
        v.extend_from_slice(&self.log_std);
        v
    }

    pub fn norm(&self) -> f64 {
        let s: f64 = self.policy.iter().chain(&self.value).chain(&self.log_std).map(|g| g * g).sum();
        s.sqrt()
    }
}

/// PPO loss over a minibatch and its gradient.
///
/// `L = mean(−min(ρA, clip(ρ)A)) + c_v·mean((V − R)²) − c_e·H`.
pub fn ppo_loss_and_grad(batch: &Batch, params: &PolicyParams, config: &TrainConfig) -> (LossStats, Gradients) {
    let n = batch.len();
    assert!(n > 0, "empty minibatch");
    let inv_n = 1.0 / n as f64;
    let eps = config.clip_ratio;
    let pcache = params.policy.forward_batch(&batch.observations, n);
    let vcache = params.value.forward_batch(&batch.observations, n);
    let means = pcache.output();
    let values = vcache.output();
    let inv_var: [f64; ACTION_DIM] = core::array::from_fn(|k| (-2.0 * params.log_std[k]).exp());

    let mut grads = Gradients::zeros_like(params);
    let mut d_mean = vec![0.0; n * ACTION_DIM];
    let mut d_value = vec![0.0; n];
    let mut stats = LossStats::default();
    let mut clipped = 0usize;

    for i in 0..n {
        let m = &means[i * ACTION_DIM..(i + 1) * ACTION_DIM];
        let a = &batch.actions[i];
        let logp = crate::policy::gaussian_log_prob(a, m, &params.log_std);
        let log_ratio = logp - batch.old_log_probs[i];
        let ratio = log_ratio.exp();
        let adv = batch.advantages[i];
        let unclipped = ratio * adv;
        let clipped_obj = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
        stats.policy_loss -= unclipped.min(clipped_obj) * inv_n;
        stats.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;
        let clip_active = (adv >= 0.0 && ratio > 1.0 + eps) || (adv < 0.0 && ratio < 1.0 - eps);
        if clip_active {
            clipped += 1;
        } else {
            // ∂L/∂logp for this sample.
            let g = -ratio * adv * inv_n;
            for k in 0..ACTION_DIM {
                let diff = a[k] - m[k];
                d_mean[i * ACTION_DIM + k] = g * diff * inv_var[k];
                grads.log_std[k] += g * (diff * diff * inv_var[k] - 1.0);
            }
        }
        let err = values[i] - batch.returns[i];
        stats.value_loss += err * err * inv_n;
        d_value[i] = 2.0 * config.value_coef * err * inv_n;
    }

    stats.entropy = gaussian_entropy(&params.log_std);
    for g in grads.log_std.iter_mut() {
        *g -= config.entropy_coef;
    }
    stats.total = stats.policy_loss + config.value_coef * stats.value_loss - config.entropy_coef * stats.entropy;
    stats.clip_fraction = clipped as f64 * inv_n;

    params.policy.backward_batch(&pcache, &d_mean, &mut grads.policy);
    params.value.backward_batch(&vcache, &d_value, &mut grads.value);
    (stats, grads)
}

/// Adam with bias correction over the flattened parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, step: 0, m: vec![0.0; len], v: vec![0.0; len] }
    }

    /// One descent step on `params` along `grad`.
    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TrainError {
    #[error("non-finite PPO loss at update pass {pass}, minibatch {minibatch}")]
    NonFiniteLoss { pass: usize, minibatch: usize },
    #[error("empty training batch")]
    EmptyBatch,
}

/// Multi-pass minibatch PPO update. Minibatch order comes from `rng`;
/// statistics are averaged over all minibatches.
pub fn ppo_update<R: Rng + ?Sized>(
    batch: &Batch,
    params: &mut PolicyParams,
    adam: &mut Adam,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<LossStats, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut acc = LossStats::default();
    let mut count = 0.0;
    for pass in 0..config.update_passes {
        order.shuffle(rng);
        for (mb, chunk) in order.chunks(config.minibatch_size).enumerate() {
            let sub = batch.select(chunk);
            let (stats, mut grads) = ppo_loss_and_grad(&sub, params, config);
            if !stats.total.is_finite() {
                return Err(TrainError::NonFiniteLoss { pass, minibatch: mb });
            }
            let norm = grads.norm();
            if norm > config.max_grad_norm {
                let s = config.max_grad_norm / norm;
                grads.policy.iter_mut().chain(grads.value.iter_mut()).chain(grads.log_std.iter_mut()).for_each(|g| *g *= s);
            }
            let mut flat = params.flatten();
            adam.update(&mut flat, &grads.flatten());
            params.load_flat(&flat);
            params.clamp_log_std();
            acc.policy_loss += stats.policy_loss;
            acc.value_loss += stats.value_loss;
            acc.entropy += stats.entropy;
            acc.total += stats.total;
            acc.approx_kl += stats.approx_kl;
            acc.clip_fraction += stats.clip_fraction;
            count += 1.0;
        }
    }
    acc.policy_loss /= count;
    acc.value_loss /= count;
    acc.entropy /= count;
    acc.total /= count;
    acc.approx_kl /= count;
    acc.clip_fraction /= count;
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use nalgebra::UnitQuaternion;

    #[test]
    fn reward_examples() {
        let est = VehicleState::at_rest(Vec3::new(0.0, 0.0, 1.2));
        let des = DesiredState::hover(est.position);
        let zero = HighLevelCommand::default();
        let r = compute_reward(&zero, &zero, &est, &des);
        assert_eq!(r.total, 0.1);
        let c = HighLevelCommand::new(9.81, Vec3::zeros());
        let r = compute_reward(&c, &c, &est, &des);
        assert!((r.total - 0.0019).abs() < 1e-15);
        let mut tilted = est;
        tilted.attitude = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), core::f64::consts::PI);
        let r = compute_reward(&zero, &zero, &tilted, &des);
        assert!((r.e_att - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gae_degenerate_cases() {
        let r = [1.0, 1.0, 1.0];
        let v = [0.0; 3];
        let d = [false; 3];
        let (adv, ret) = gae_advantages(&r, &v, &d, 0.0, 0.5, 1.0);
        assert_eq!(ret, vec![1.75, 1.5, 1.0]);
        assert_eq!(adv, ret);
        let v = [0.2, -0.4, 0.7];
        let (adv, _) = gae_advantages(&r, &v, &d, 0.3, 0.9, 0.0);
        assert!((adv[0] - (1.0 + 0.9 * -0.4 - 0.2)).abs() < 1e-15);
        assert!((adv[1] - (1.0 + 0.9 * 0.7 + 0.4)).abs() < 1e-15);
        assert!((adv[2] - (1.0 + 0.9 * 0.3 - 0.7)).abs() < 1e-15);
    }

    #[test]
    fn gae_terminal_cuts_bootstrap() {
        let (adv, _) = gae_advantages(&[1.0, 1.0], &[0.0, 0.0], &[false, true], 100.0, 0.9, 1.0);
        assert!((adv[0] - 1.9).abs() < 1e-15);
        assert_eq!(adv[1], 1.0);
    }

    #[test]
    fn adam_first_step_is_learning_rate_sized() {
        let mut adam = Adam::new(2, 0.1);
        let mut p = [1.0, -1.0];
        adam.update(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-6);
    }
}
