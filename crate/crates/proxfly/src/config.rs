//! `proxfly.conf` parsing.
//!
//! The file is TOML with four optional tables:
//!
//! * `[vehicle]`: every `VehicleParams` field, all required when the table
//!   is present. Without it the preset picked by `--vehicle` is used.
//! * `[controller]`: `ControllerGains` fields; missing keys keep defaults.
//! * `[downwash]`: `DownwashParams` fields; missing keys keep defaults.
//! * `[train]`: `TrainConfig` fields plus `checkpoint_every`.
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use proxfly_core::math::Vec3;
use proxfly_core::ppo::TrainConfig;
use proxfly_core::{ControllerGains, DownwashParams, VehicleClass, VehicleParams};
use serde::{Deserialize, Serialize};

/// Looked up in the working directory when `--config` is absent.
pub const DEFAULT_CONFIG_FILE: &str = "proxfly.conf";
pub const DEFAULT_CHECKPOINT_EVERY: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for config key `{0}`")]
    Value(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSection {
    pub mass: f64,
    pub inertia_diag: [f64; 3],
    pub arm_length: f64,
    pub thrust_coeff: f64,
    pub torque_to_thrust: f64,
    pub motor_time_constant: f64,
    pub per_propeller_thrust_factors: [f64; 4],
    pub max_motor_speed: f64,
}

impl From<VehicleParams> for VehicleSection {
    fn from(p: VehicleParams) -> Self {
        Self {
            mass: p.mass,
            inertia_diag: [p.inertia_diag.x, p.inertia_diag.y, p.inertia_diag.z],
            arm_length: p.arm_length,
            thrust_coeff: p.thrust_coeff,
            torque_to_thrust: p.torque_to_thrust,
            motor_time_constant: p.motor_time_constant,
            per_propeller_thrust_factors: p.per_propeller_thrust_factors,
            max_motor_speed: p.max_motor_speed,
        }
    }
}

impl From<VehicleSection> for VehicleParams {
    fn from(s: VehicleSection) -> Self {
        let i = s.inertia_diag;
        VehicleParams {
            mass: s.mass,
            inertia_diag: Vec3::new(i[0], i[1], i[2]),
            arm_length: s.arm_length,
            thrust_coeff: s.thrust_coeff,
            torque_to_thrust: s.torque_to_thrust,
            motor_time_constant: s.motor_time_constant,
            per_propeller_thrust_factors: s.per_propeller_thrust_factors,
            max_motor_speed: s.max_motor_speed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub natural_frequency: f64,
    pub damping_ratio: f64,
    pub attitude_time_constant_rp: f64,
    pub attitude_time_constant_yaw: f64,
    pub body_rate_gain: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        ControllerGains::default().into()
    }
}

impl From<ControllerGains> for ControllerSection {
    fn from(g: ControllerGains) -> Self {
        Self {
            natural_frequency: g.natural_frequency,
            damping_ratio: g.damping_ratio,
            attitude_time_constant_rp: g.attitude_time_constant_rp,
            attitude_time_constant_yaw: g.attitude_time_constant_yaw,
            body_rate_gain: g.body_rate_gain,
        }
    }
}

impl From<ControllerSection> for ControllerGains {
    fn from(s: ControllerSection) -> Self {
        ControllerGains {
            natural_frequency: s.natural_frequency,
            damping_ratio: s.damping_ratio,
            attitude_time_constant_rp: s.attitude_time_constant_rp,
            attitude_time_constant_yaw: s.attitude_time_constant_yaw,
            body_rate_gain: s.body_rate_gain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DownwashSection {
    pub peak_force_scale: f64,
    pub vertical_decay_length: f64,
    pub horizontal_sigma_base: f64,
    pub horizontal_sigma_growth: f64,
    pub torque_arm_scale: f64,
    pub efficiency_loss_scale: f64,
}

impl Default for DownwashSection {
    fn default() -> Self {
        DownwashParams::default().into()
    }
}

impl From<DownwashParams> for DownwashSection {
    fn from(d: DownwashParams) -> Self {
        Self {
            peak_force_scale: d.peak_force_scale,
            vertical_decay_length: d.vertical_decay_length,
            horizontal_sigma_base: d.horizontal_sigma_base,
            horizontal_sigma_growth: d.horizontal_sigma_growth,
            torque_arm_scale: d.torque_arm_scale,
            efficiency_loss_scale: d.efficiency_loss_scale,
        }
    }
}

impl From<DownwashSection> for DownwashParams {
    fn from(s: DownwashSection) -> Self {
        DownwashParams {
            peak_force_scale: s.peak_force_scale,
            vertical_decay_length: s.vertical_decay_length,
            horizontal_sigma_base: s.horizontal_sigma_base,
            horizontal_sigma_growth: s.horizontal_sigma_growth,
            torque_arm_scale: s.torque_arm_scale,
            efficiency_loss_scale: s.efficiency_loss_scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
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
    pub checkpoint_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            episodes_per_epoch: t.episodes_per_epoch,
            gamma: t.gamma,
            gae_lambda: t.gae_lambda,
            clip_ratio: t.clip_ratio,
            learning_rate: t.learning_rate,
            update_passes: t.update_passes,
            minibatch_size: t.minibatch_size,
            entropy_coef: t.entropy_coef,
            value_coef: t.value_coef,
            max_grad_norm: t.max_grad_norm,
            seed: t.seed,
            checkpoint_every: DEFAULT_CHECKPOINT_EVERY,
        }
    }
}

impl TrainSection {
    pub fn to_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            episodes_per_epoch: self.episodes_per_epoch,
            gamma: self.gamma,
            gae_lambda: self.gae_lambda,
            clip_ratio: self.clip_ratio,
            learning_rate: self.learning_rate,
            update_passes: self.update_passes,
            minibatch_size: self.minibatch_size,
            entropy_coef: self.entropy_coef,
            value_coef: self.value_coef,
            max_grad_norm: self.max_grad_norm,
            seed: self.seed,
        }
    }
}

/// Raw file contents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub vehicle: Option<VehicleSection>,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub downwash: DownwashSection,
    #[serde(default)]
    pub train: TrainSection,
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub file: ConfigFile,
    /// File the configuration came from, if any.
    pub source: Option<PathBuf>,
}

impl Config {
    pub fn defaults() -> Self {
        Self { file: ConfigFile::default(), source: None }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        let cfg = Self { file, source: Some(path.to_path_buf()) };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `explicit` if given, else `./proxfly.conf` if present, else defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        let path = match explicit {
            Some(p) => p.to_path_buf(),
            None => {
                let p = PathBuf::from(DEFAULT_CONFIG_FILE);
                if !p.exists() {
                    return Ok(Self::defaults());
                }
                p
            }
        };
        let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Read { path: path.clone(), source })?;
        Self::parse(&text, &path)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let key = |section: &str, k: &str| ConfigError::Value(format!("{section}.{k}"));
        if let Some(v) = self.file.vehicle {
            VehicleParams::from(v).validate().map_err(|k| key("vehicle", k))?;
        }
        self.gains().validate().map_err(|k| key("controller", k))?;
        self.downwash().validate().map_err(|k| key("downwash", k))?;
        self.train_config().validate().map_err(|k| key("train", k))?;
        if self.file.train.checkpoint_every == 0 {
            return Err(key("train", "checkpoint_every"));
        }
        Ok(())
    }

    /// Vehicle parameters: the `[vehicle]` table or the class preset.
    pub fn vehicle(&self, class: VehicleClass) -> VehicleParams {
        match self.file.vehicle {
            Some(v) => v.into(),
            None => preset(class),
        }
    }

    pub fn gains(&self) -> ControllerGains {
        self.file.controller.into()
    }

    pub fn downwash(&self) -> DownwashParams {
        self.file.downwash.into()
    }

    pub fn train_config(&self) -> TrainConfig {
        self.file.train.to_config()
    }

    pub fn checkpoint_every(&self) -> usize {
        self.file.train.checkpoint_every
    }

    /// Fully resolved configuration as TOML, vehicle table included.
    pub fn resolved_toml(&self, class: VehicleClass, seed: u64) -> String {
        let mut file = self.file.clone();
        file.vehicle = Some(self.vehicle(class).into());
        file.train.seed = seed;
        toml::to_string(&file).expect("config serializes")
    }
}

pub fn preset(class: VehicleClass) -> VehicleParams {
    match class {
        VehicleClass::Small => VehicleParams::small_quad(),
        VehicleClass::Large => VehicleParams::large_quad(),
    }
}
