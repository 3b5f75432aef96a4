//! Plain-text policy checkpoints.
//!
//! Layout, one item per line:
//!
//! ```text
//! proxfly-checkpoint 1
//! vehicle large
//! policy_layers 20 128 128 4
//! policy_activations leaky_relu leaky_relu tanh
//! value_layers 20 128 128 1
//! value_activations leaky_relu leaky_relu identity
//! obs_scale <20 divisors>
//! action_scale 10 1 1 1
//! log_std_bounds <min> <max>
//! epoch <n>
//! params <count>
//! <count lines: policy weights, value weights, 4 log-std values>
//! ```
//!
//! Numbers use the shortest decimal form that parses back to the same `f64`,
//! so a save/load round trip is exact.

use std::fmt::Write as _;
use std::path::Path;

use proxfly_core::nn::Activation;
use proxfly_core::policy::{ACTION_SCALE, MAX_LOG_STD, MIN_LOG_STD, OBS_SCALE, POLICY_SIZES, VALUE_SIZES};
use proxfly_core::{PolicyParams, VehicleClass};

pub const MAGIC: &str = "proxfly-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub vehicle: VehicleClass,
    pub epoch: usize,
    pub params: PolicyParams,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("cannot read checkpoint {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("checkpoint line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("checkpoint header `{field}` does not match this build: expected {expected}, found {found}")]
    Mismatch { field: &'static str, expected: String, found: String },
}

fn act_name(a: Activation) -> &'static str {
    match a {
        Activation::LeakyRelu => "leaky_relu",
        Activation::Tanh => "tanh",
        Activation::Identity => "identity",
    }
}

fn join<T: std::fmt::Display>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn class_name(c: VehicleClass) -> &'static str {
    match c {
        VehicleClass::Small => "small",
        VehicleClass::Large => "large",
    }
}

pub fn parse_class(s: &str) -> Option<VehicleClass> {
    match s {
        "small" => Some(VehicleClass::Small),
        "large" => Some(VehicleClass::Large),
        _ => None,
    }
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {FORMAT_VERSION}");
        let _ = writeln!(s, "vehicle {}", class_name(self.vehicle));
        let _ = writeln!(s, "policy_layers {}", join(p.policy.sizes()));
        let _ = writeln!(s, "policy_activations {}", join(p.policy.activations().into_iter().map(act_name)));
        let _ = writeln!(s, "value_layers {}", join(p.value.sizes()));
        let _ = writeln!(s, "value_activations {}", join(p.value.activations().into_iter().map(act_name)));
        let _ = writeln!(s, "obs_scale {}", join(OBS_SCALE));
        let _ = writeln!(s, "action_scale {}", join(ACTION_SCALE));
        let _ = writeln!(s, "log_std_bounds {MIN_LOG_STD} {MAX_LOG_STD}");
        let _ = writeln!(s, "epoch {}", self.epoch);
        let flat = p.flatten();
        let _ = writeln!(s, "params {}", flat.len());
        for v in flat {
            let _ = writeln!(s, "{v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, CheckpointError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let mut header = |key: &str| -> Result<(usize, String), CheckpointError> {
            let (n, line) = lines.next().ok_or(CheckpointError::Format { line: 0, message: format!("missing `{key}` line") })?;
            let rest = line
                .strip_prefix(key)
                .filter(|r| r.is_empty() || r.starts_with(' '))
                .ok_or_else(|| CheckpointError::Format { line: n, message: format!("expected `{key}`") })?;
            Ok((n, rest.trim().to_string()))
        };
        let expect = |field: &'static str, expected: String, found: String| {
            if expected == found {
                Ok(())
            } else {
                Err(CheckpointError::Mismatch { field, expected, found })
            }
        };

        let (_, version) = header(MAGIC)?;
        expect("format", FORMAT_VERSION.to_string(), version)?;
        let (n, vehicle) = header("vehicle")?;
        let vehicle = parse_class(&vehicle).ok_or(CheckpointError::Format { line: n, message: format!("unknown vehicle `{vehicle}`") })?;
        let reference = PolicyParams::zeros();
        expect("policy_layers", join(POLICY_SIZES), header("policy_layers")?.1)?;
        expect("policy_activations", join(reference.policy.activations().into_iter().map(act_name)), header("policy_activations")?.1)?;
        expect("value_layers", join(VALUE_SIZES), header("value_layers")?.1)?;
        expect("value_activations", join(reference.value.activations().into_iter().map(act_name)), header("value_activations")?.1)?;
        expect("obs_scale", join(OBS_SCALE), header("obs_scale")?.1)?;
        expect("action_scale", join(ACTION_SCALE), header("action_scale")?.1)?;
        expect("log_std_bounds", format!("{MIN_LOG_STD} {MAX_LOG_STD}"), header("log_std_bounds")?.1)?;
        let (n, epoch) = header("epoch")?;
        let epoch = epoch.parse().map_err(|_| CheckpointError::Format { line: n, message: "bad epoch".into() })?;
        let (n, count) = header("params")?;
        let count: usize = count.parse().map_err(|_| CheckpointError::Format { line: n, message: "bad parameter count".into() })?;
        expect("params", reference.total_params().to_string(), count.to_string())?;

        let mut flat = Vec::with_capacity(count);
        for (n, line) in lines.by_ref().take(count) {
            let v: f64 = line.parse().map_err(|_| CheckpointError::Format { line: n, message: format!("bad number `{line}`") })?;
            if !v.is_finite() {
                return Err(CheckpointError::Format { line: n, message: "non-finite parameter".into() });
            }
            flat.push(v);
        }
        if flat.len() != count {
            return Err(CheckpointError::Format { line: 0, message: format!("expected {count} parameters, found {}", flat.len()) });
        }
        if let Some((n, _)) = lines.find(|(_, l)| !l.is_empty()) {
            return Err(CheckpointError::Format { line: n, message: "trailing data".into() });
        }
        let mut params = reference;
        params.load_flat(&flat);
        Ok(Self { vehicle, epoch, params })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }
}
