//! The residual module: observation, policy/value networks, action scaling and
//! superposition with the basic command.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::controller::{DesiredState, HighLevelCommand};
use crate::math::{self, Vec3};
use crate::nn::{Activation, Mlp};
use crate::sim::VehicleState;

pub const OBS_DIM: usize = 20;
pub const ACTION_DIM: usize = 4;
pub const HIDDEN: usize = 128;

/// Residual thrust range, m/s².
pub const MAX_RESIDUAL_THRUST: f64 = 10.0;
/// Residual body-rate range, rad/s.
pub const MAX_RESIDUAL_RATE: f64 = 1.0;
pub const ACTION_SCALE: [f64; ACTION_DIM] = [MAX_RESIDUAL_THRUST, MAX_RESIDUAL_RATE, MAX_RESIDUAL_RATE, MAX_RESIDUAL_RATE];

/// Fixed divisors applied to each observation entry before the networks see it.
pub const OBS_SCALE: [f64; OBS_DIM] = [
    1.0, 1.0, 1.0, // position error, m
    2.0, 2.0, 2.0, // velocity error, m/s
    1.0, 1.0, 1.0, // attitude error, rad
    2.0, 2.0, 2.0, // body-rate error, rad/s
    20.0, 2.0, 2.0, 2.0, // u_cas
    MAX_RESIDUAL_THRUST, MAX_RESIDUAL_RATE, MAX_RESIDUAL_RATE, MAX_RESIDUAL_RATE, // previous residual
];

pub const INIT_LOG_STD: f64 = -1.203_972_804_325_935_9; // ln 0.3
pub const MIN_LOG_STD: f64 = -4.605_170_185_988_091; // ln 0.01
pub const MAX_LOG_STD: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("policy network shape {found:?} does not match the expected {expected:?}")]
    Shape { expected: [usize; 4], found: [usize; 4] },
    #[error("value network shape {found:?} does not match the expected {expected:?}")]
    ValueShape { expected: [usize; 4], found: [usize; 4] },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualAction {
    /// m/s².
    pub thrust: f64,
    /// rad/s.
    pub body_rates: Vec3,
}

impl ResidualAction {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.thrust, self.body_rates.x, self.body_rates.y, self.body_rates.z]
    }
}

/// Normalized 20-entry network input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// The entry values before normalization.
    pub fn raw(&self) -> [f64; OBS_DIM] {
        core::array::from_fn(|i| self.0[i] * OBS_SCALE[i])
    }
}

/// Observation `{Δs, u_cas, a_res}`; desired body rates are zero.
pub fn build_observation(est: &VehicleState, des: &DesiredState, u_cas: &HighLevelCommand, prev: &ResidualAction) -> Observation {
    let dp = des.position - est.position;
    let dv = des.velocity - est.velocity;
    let da = math::rotation_error(&est.attitude, &des.attitude());
    let dw = -est.body_rates;
    let raw = [
        dp.x, dp.y, dp.z, dv.x, dv.y, dv.z, da.x, da.y, da.z, dw.x, dw.y, dw.z,
        u_cas.thrust, u_cas.body_rates.x, u_cas.body_rates.y, u_cas.body_rates.z,
        prev.thrust, prev.body_rates.x, prev.body_rates.y, prev.body_rates.z,
    ];
    Observation(core::array::from_fn(|i| raw[i] / OBS_SCALE[i]))
}

/// Map a network action in `[-1, 1]⁴` onto the residual command ranges.
pub fn scale_action(raw: &[f64; ACTION_DIM]) -> ResidualAction {
    ResidualAction {
        thrust: MAX_RESIDUAL_THRUST * raw[0],
        body_rates: Vec3::new(raw[1], raw[2], raw[3]) * MAX_RESIDUAL_RATE,
    }
}

pub fn clamp_action(raw: &[f64; ACTION_DIM]) -> [f64; ACTION_DIM] {
    core::array::from_fn(|i| raw[i].clamp(-1.0, 1.0))
}

/// Overall command `u_cas + a_res`, thrust floored at zero.
pub fn superpose(u_cas: &HighLevelCommand, a_res: &ResidualAction) -> HighLevelCommand {
    HighLevelCommand { thrust: (u_cas.thrust + a_res.thrust).max(0.0), body_rates: u_cas.body_rates + a_res.body_rates }
}

/// Policy network `20→128→128→4` (tanh head), value network `20→128→128→1`
/// and a state-independent Gaussian log-std.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub policy: Mlp,
    pub value: Mlp,
    pub log_std: [f64; ACTION_DIM],
}

pub const POLICY_SIZES: [usize; 4] = [OBS_DIM, HIDDEN, HIDDEN, ACTION_DIM];
pub const VALUE_SIZES: [usize; 4] = [OBS_DIM, HIDDEN, HIDDEN, 1];

impl PolicyParams {
    pub fn zeros() -> Self {
        Self {
            policy: Mlp::zeros(&POLICY_SIZES, Activation::LeakyRelu, Activation::Tanh),
            value: Mlp::zeros(&VALUE_SIZES, Activation::LeakyRelu, Activation::Identity),
            log_std: [INIT_LOG_STD; ACTION_DIM],
        }
    }

    /// Orthogonal init with a 0.01-scaled policy head so the first residuals
    /// are close to zero.
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut p = Self::zeros();
        let g = core::f64::consts::SQRT_2;
        p.policy.init_orthogonal(rng, &[g, g, 0.01]);
        p.value.init_orthogonal(rng, &[g, g, 1.0]);
        p
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let shape = |m: &Mlp| -> [usize; 4] {
            let s = m.sizes();
            core::array::from_fn(|i| s.get(i).copied().unwrap_or(0))
        };
        let expected_acts = [Activation::LeakyRelu, Activation::LeakyRelu];
        if self.policy.sizes() != POLICY_SIZES || self.policy.activations()[..2] != expected_acts || self.policy.activations()[2] != Activation::Tanh {
            return Err(PolicyError::Shape { expected: POLICY_SIZES, found: shape(&self.policy) });
        }
        if self.value.sizes() != VALUE_SIZES || self.value.activations()[..2] != expected_acts || self.value.activations()[2] != Activation::Identity {
            return Err(PolicyError::ValueShape { expected: VALUE_SIZES, found: shape(&self.value) });
        }
        Ok(())
    }

    pub fn std(&self) -> [f64; ACTION_DIM] {
        core::array::from_fn(|i| self.log_std[i].exp())
    }

    pub fn clamp_log_std(&mut self) {
        for s in self.log_std.iter_mut() {
            *s = s.clamp(MIN_LOG_STD, MAX_LOG_STD);
        }
    }

    pub fn total_params(&self) -> usize {
        self.policy.param_count() + self.value.param_count() + ACTION_DIM
    }

    /// Concatenation `[policy, value, log_std]`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.total_params());
        v.extend_from_slice(self.policy.params());
        v.extend_from_slice(self.value.params());
        v.extend_from_slice(&self.log_std);
        v
    }

    pub fn load_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.total_params());
        let (a, rest) = flat.split_at(self.policy.param_count());
        let (b, c) = rest.split_at(self.value.param_count());
        self.policy.params_mut().copy_from_slice(a);
        self.value.params_mut().copy_from_slice(b);
        self.log_std.copy_from_slice(c);
    }
}

/// Deterministic forward pass: action mean in `(-1, 1)⁴` and state value.
pub fn policy_forward(obs: &Observation, params: &PolicyParams) -> ([f64; ACTION_DIM], f64) {
    let mean = params.policy.forward(obs.as_slice());
    let value = params.value.forward(obs.as_slice());
    (core::array::from_fn(|i| mean[i]), value[0])
}

/// Action mean only (evaluation mode).
pub fn policy_mean(obs: &Observation, params: &PolicyParams) -> [f64; ACTION_DIM] {
    let mean = params.policy.forward(obs.as_slice());
    core::array::from_fn(|i| mean[i])
}

pub fn value_forward(obs: &Observation, params: &PolicyParams) -> f64 {
    params.value.forward(obs.as_slice())[0]
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Diagonal Gaussian log-density of `action`.
pub fn gaussian_log_prob(action: &[f64; ACTION_DIM], mean: &[f64], log_std: &[f64; ACTION_DIM]) -> f64 {
    let mut lp = 0.0;
    for i in 0..ACTION_DIM {
        let z = (action[i] - mean[i]) / log_std[i].exp();
        lp += -0.5 * z * z - log_std[i] - HALF_LN_2PI;
    }
    lp
}

/// Entropy of the diagonal Gaussian.
pub fn gaussian_entropy(log_std: &[f64; ACTION_DIM]) -> f64 {
    log_std.iter().map(|s| s + 0.5 + HALF_LN_2PI).sum()
}

/// Draw an exploration action (before clamping) around `mean`.
pub fn sample_action<R: Rng + ?Sized>(rng: &mut R, mean: &[f64; ACTION_DIM], log_std: &[f64; ACTION_DIM]) -> [f64; ACTION_DIM] {
    core::array::from_fn(|i| {
        let n: f64 = StandardNormal.sample(rng);
        mean[i] + log_std[i].exp() * n
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn zero_network_outputs_zero() {
        let p = PolicyParams::zeros();
        let obs = Observation([0.3; OBS_DIM]);
        let (m, v) = policy_forward(&obs, &p);
        assert_eq!(m, [0.0; 4]);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn observation_at_setpoint_only_has_thrust() {
        let est = VehicleState::at_rest(Vec3::new(0.0, 0.0, 1.2));
        let des = DesiredState::hover(est.position);
        let obs = build_observation(&est, &des, &HighLevelCommand::new(9.81, Vec3::zeros()), &ResidualAction::zero());
        assert_eq!(obs.0.len(), 20);
        for (i, v) in obs.0.iter().enumerate() {
            if i == 12 {
                assert!((v - 9.81 / 20.0).abs() < 1e-15);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn scale_action_examples() {
        assert_eq!(scale_action(&[1.0, 0.0, 0.0, 0.0]), ResidualAction { thrust: 10.0, body_rates: Vec3::zeros() });
        assert_eq!(scale_action(&[0.0; 4]), ResidualAction::zero());
        assert_eq!(scale_action(&[-1.0; 4]).to_array(), [-10.0, -1.0, -1.0, -1.0]);
    }

    #[test]
    fn superpose_examples() {
        let u = HighLevelCommand::new(9.81, Vec3::zeros());
        assert_eq!(superpose(&u, &ResidualAction::zero()), u);
        let a = ResidualAction { thrust: 2.0, body_rates: Vec3::new(0.1, -0.1, 0.0) };
        let o = superpose(&u, &a);
        assert!((o.thrust - 11.81).abs() < 1e-12);
        assert_eq!(o.body_rates, Vec3::new(0.1, -0.1, 0.0));
        let low = HighLevelCommand::new(1.0, Vec3::zeros());
        assert_eq!(superpose(&low, &ResidualAction { thrust: -10.0, body_rates: Vec3::zeros() }).thrust, 0.0);
    }

    #[test]
    fn initial_policy_is_near_zero_and_bounded() {
        let mut rng = stream_rng(1, Stream::Init, 0, 0);
        let p = PolicyParams::init(&mut rng);
        p.validate().unwrap();
        for k in 0..50 {
            let obs = Observation(core::array::from_fn(|i| ((i * 7 + k) as f64).sin() * 3.0));
            let (m, _) = policy_forward(&obs, &p);
            assert!(m.iter().all(|v| v.abs() < 0.2 && v.abs() < 1.0));
        }
    }

    #[test]
    fn flatten_round_trip() {
        let mut rng = stream_rng(2, Stream::Init, 0, 0);
        let p = PolicyParams::init(&mut rng);
        let mut q = PolicyParams::zeros();
        q.load_flat(&p.flatten());
        assert_eq!(p, q);
    }

    #[test]
    fn log_prob_of_mean_is_normalizer() {
        let ls = [INIT_LOG_STD; 4];
        let lp = gaussian_log_prob(&[0.1, 0.2, 0.3, 0.4], &[0.1, 0.2, 0.3, 0.4], &ls);
        assert!((lp - 4.0 * (-INIT_LOG_STD - HALF_LN_2PI)).abs() < 1e-12);
        assert!((INIT_LOG_STD - 0.3f64.ln()).abs() < 1e-15);
        assert!((MIN_LOG_STD - 0.01f64.ln()).abs() < 1e-15);
    }
}
