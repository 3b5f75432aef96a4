//! Training disturbances and the evaluation downwash model.
//!
//! Training episodes draw a [`DisturbanceProfile`]: per-axis triangular force
//! waves, truncated per axis, Gaussian body torques and per-propeller thrust
//! factors. Evaluation scenarios instead couple two vehicles through
//! [`downwash_wrench`], a smooth parametric stand-in for measured downwash.

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::math::Vec3;
use crate::sim::ExternalWrench;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VehicleClass {
    Small,
    Large,
}

/// Sampling ranges for one vehicle class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizationRanges {
    pub mass_factor: (f64, f64),
    pub inertia_extra_factor: (f64, f64),
    pub thrust_factor: (f64, f64),
    pub period: (f64, f64),
    pub amplitude_xy: (f64, f64),
    pub amplitude_z: (f64, f64),
    pub truncation_xy: f64,
    pub truncation_z: f64,
    pub torque_sigma: f64,
}

impl VehicleClass {
    pub fn ranges(self) -> RandomizationRanges {
        match self {
            VehicleClass::Small => RandomizationRanges {
                mass_factor: (0.8, 1.2),
                inertia_extra_factor: (0.8, 1.2),
                thrust_factor: (0.6, 1.2),
                period: (2.0, 8.0),
                amplitude_xy: (0.0, 0.5),
                amplitude_z: (0.0, 2.0),
                truncation_xy: 0.25,
                truncation_z: 1.0,
                torque_sigma: 0.005,
            },
            VehicleClass::Large => RandomizationRanges {
                mass_factor: (0.5, 1.5),
                inertia_extra_factor: (0.8, 1.2),
                thrust_factor: (0.6, 1.2),
                period: (2.0, 8.0),
                amplitude_xy: (0.0, 2.0),
                amplitude_z: (0.0, 8.0),
                truncation_xy: 1.0,
                truncation_z: 4.0,
                torque_sigma: 0.02,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VehicleClass::Small => "small",
            VehicleClass::Large => "large",
        }
    }
}

/// Symmetric zero-mean triangle wave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleWave {
    /// s.
    pub period: f64,
    /// N.
    pub amplitude: f64,
    /// Time shift, s.
    pub phase: f64,
}

impl TriangleWave {
    pub fn zero() -> Self {
        Self { period: 1.0, amplitude: 0.0, phase: 0.0 }
    }

    /// Rises 0→A over P/4, falls A→−A over P/2, rises −A→0 over P/4.
    pub fn eval(&self, t: f64) -> f64 {
        let x = (t - self.phase) / self.period;
        let u = x - x.floor();
        let shape = if u < 0.25 {
            4.0 * u
        } else if u < 0.75 {
            2.0 - 4.0 * u
        } else {
            4.0 * u - 4.0
        };
        self.amplitude * shape
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceProfile {
    /// x, y, z force waves.
    pub waves: [TriangleWave; 3],
    /// Per-axis force limit, N.
    pub truncation: Vec3,
    /// Standard deviation of each torque axis, N·m.
    pub torque_sigma: f64,
    pub per_propeller_thrust_factors: [f64; 4],
}

impl DisturbanceProfile {
    /// No forces, no torque noise, nominal propellers.
    pub fn none() -> Self {
        Self {
            waves: [TriangleWave::zero(); 3],
            truncation: Vec3::zeros(),
            torque_sigma: 0.0,
            per_propeller_thrust_factors: [1.0; 4],
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Draw one episode's disturbance profile.
pub fn sample_training_profile<R: Rng + ?Sized>(rng: &mut R, class: VehicleClass) -> DisturbanceProfile {
    let r = class.ranges();
    let mut waves = [TriangleWave::zero(); 3];
    for (axis, wave) in waves.iter_mut().enumerate() {
        let period = uniform(rng, r.period);
        let amplitude = uniform(rng, if axis == 2 { r.amplitude_z } else { r.amplitude_xy });
        let phase = uniform(rng, (0.0, period));
        *wave = TriangleWave { period, amplitude, phase };
    }
    let mut factors = [1.0; 4];
    for f in factors.iter_mut() {
        *f = uniform(rng, r.thrust_factor);
    }
    DisturbanceProfile {
        waves,
        truncation: Vec3::new(r.truncation_xy, r.truncation_xy, r.truncation_z),
        torque_sigma: r.torque_sigma,
        per_propeller_thrust_factors: factors,
    }
}

/// World-frame training force at time `t`, clamped per axis.
pub fn triangular_force(t: f64, profile: &DisturbanceProfile) -> Vec3 {
    let mut f = Vec3::zeros();
    for axis in 0..3 {
        let lim = profile.truncation[axis];
        f[axis] = profile.waves[axis].eval(t).clamp(-lim, lim);
    }
    f
}

/// Three i.i.d. `N(0, sigma²)` torque samples, N·m.
pub fn gaussian_torque<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Vec3 {
    if sigma <= 0.0 {
        return Vec3::zeros();
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng))
}

/// Parametric downwash of an upper vehicle acting on a lower one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DownwashParams {
    /// Peak vertical force as a fraction of the upper vehicle's weight.
    pub peak_force_scale: f64,
    /// m.
    pub vertical_decay_length: f64,
    /// m.
    pub horizontal_sigma_base: f64,
    pub horizontal_sigma_growth: f64,
    /// m.
    pub torque_arm_scale: f64,
    pub efficiency_loss_scale: f64,
}

impl Default for DownwashParams {
    fn default() -> Self {
        Self {
            peak_force_scale: 0.8,
            vertical_decay_length: 0.5,
            horizontal_sigma_base: 0.15,
            horizontal_sigma_growth: 0.3,
            torque_arm_scale: 0.05,
            efficiency_loss_scale: 0.4,
        }
    }
}

impl DownwashParams {
    pub fn validate(&self) -> Result<(), &'static str> {
        let fields = [
            (self.peak_force_scale, "peak_force_scale"),
            (self.vertical_decay_length, "vertical_decay_length"),
            (self.horizontal_sigma_base, "horizontal_sigma_base"),
            (self.horizontal_sigma_growth, "horizontal_sigma_growth"),
            (self.torque_arm_scale, "torque_arm_scale"),
            (self.efficiency_loss_scale, "efficiency_loss_scale"),
        ];
        for (v, name) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(name);
            }
        }
        Ok(())
    }
}

pub const MIN_EFFICIENCY: f64 = 0.5;

/// Downwash wrench on the lower vehicle and the thrust-efficiency factor to
/// multiply into its propellers.
///
/// The vertical force is Gaussian in horizontal offset (width growing with
/// separation) times exponential in vertical separation. The torque is
/// horizontal, world-aligned, pushes down the side facing the upper vehicle,
/// and is proportional to `d_h · |F_z| / σ`, so it vanishes overhead and peaks
/// at `d_h = σ`. The caller rotates it into the body frame.
pub fn downwash_wrench(
    upper_pos: &Vec3,
    lower_pos: &Vec3,
    upper_weight: f64,
    params: &DownwashParams,
) -> (ExternalWrench, f64) {
    let d_v = upper_pos.z - lower_pos.z;
    if !(d_v > 0.0) || upper_weight <= 0.0 {
        return (ExternalWrench::zero(), 1.0);
    }
    let dx = upper_pos.x - lower_pos.x;
    let dy = upper_pos.y - lower_pos.y;
    let d_h2 = dx * dx + dy * dy;
    let sigma = params.horizontal_sigma_base + params.horizontal_sigma_growth * d_v;
    let magnitude = upper_weight
        * params.peak_force_scale
        * (-d_v / params.vertical_decay_length).exp()
        * (-d_h2 / (2.0 * sigma * sigma)).exp();
    let torque_gain = params.torque_arm_scale * magnitude / sigma;
    let wrench = ExternalWrench {
        force: Vec3::new(0.0, 0.0, -magnitude),
        torque: Vec3::new(-torque_gain * dy, torque_gain * dx, 0.0),
    };
    let efficiency = (1.0 - params.efficiency_loss_scale * magnitude / upper_weight).clamp(MIN_EFFICIENCY, 1.0);
    (wrench, efficiency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn wave_profile(amplitude: f64, period: f64, phase: f64, trunc_z: f64) -> DisturbanceProfile {
        DisturbanceProfile {
            waves: [TriangleWave::zero(), TriangleWave::zero(), TriangleWave { period, amplitude, phase }],
            truncation: Vec3::new(1.0, 1.0, trunc_z),
            torque_sigma: 0.0,
            per_propeller_thrust_factors: [1.0; 4],
        }
    }

    #[test]
    fn triangle_peak_is_truncated() {
        let p = wave_profile(8.0, 4.0, 0.0, 4.0);
        assert_eq!(p.waves[2].eval(1.0), 8.0);
        assert_eq!(triangular_force(1.0, &p).z, 4.0);
        assert_eq!(triangular_force(3.0, &p).z, -4.0);
    }

    #[test]
    fn triangle_zero_at_phase() {
        let p = wave_profile(3.0, 5.0, 1.7, 4.0);
        assert_eq!(triangular_force(1.7, &p).z, 0.0);
        let z = wave_profile(0.0, 5.0, 1.7, 4.0);
        for i in 0..50 {
            assert_eq!(triangular_force(i as f64 * 0.37, &z), Vec3::zeros());
        }
    }

    #[test]
    fn small_class_truncates_x_at_quarter_newton() {
        let mut rng = stream_rng(1, Stream::Rollout, 0, 0);
        for _ in 0..200 {
            let p = sample_training_profile(&mut rng, VehicleClass::Small);
            assert_eq!(p.truncation.x, 0.25);
            for k in 0..100 {
                assert!(triangular_force(k as f64 * 0.1, &p).x.abs() <= 0.25);
            }
        }
    }

    #[test]
    fn zero_sigma_torque_is_zero() {
        let mut rng = stream_rng(1, Stream::Rollout, 0, 0);
        assert_eq!(gaussian_torque(&mut rng, 0.0), Vec3::zeros());
    }

    #[test]
    fn downwash_far_field_and_overhead() {
        let p = DownwashParams::default();
        let lower = Vec3::new(0.0, 0.0, 1.2);
        let (w, eff) = downwash_wrench(&Vec3::new(50.0, 0.0, 1.45), &lower, 2.7468, &p);
        assert_eq!(w.force.z.abs(), 0.0);
        assert_eq!(eff, 1.0);
        let (w0, _) = downwash_wrench(&Vec3::new(0.0, 0.0, 1.45), &lower, 2.7468, &p);
        assert_eq!(w0.torque, Vec3::zeros());
        for k in 1..100 {
            let (w, _) = downwash_wrench(&Vec3::new(k as f64 * 0.01, 0.0, 1.45), &lower, 2.7468, &p);
            assert!(w.force.z.abs() < w0.force.z.abs());
        }
    }

    #[test]
    fn downwash_below_is_zero() {
        let p = DownwashParams::default();
        let (w, eff) = downwash_wrench(&Vec3::new(0.0, 0.0, 1.0), &Vec3::new(0.0, 0.0, 1.2), 2.7, &p);
        assert_eq!(w, ExternalWrench::zero());
        assert_eq!(eff, 1.0);
    }

    #[test]
    fn approach_torque_rises_then_falls() {
        let p = DownwashParams::default();
        let lower = Vec3::new(0.0, 0.0, 1.2);
        let sigma = p.horizontal_sigma_base + p.horizontal_sigma_growth * 0.25;
        let torque_at = |dh: f64| downwash_wrench(&Vec3::new(-dh, 0.0, 1.45), &lower, 2.7468, &p).0.torque.norm();
        // Approaching from far away: magnitude increases until d_h = σ...
        let mut prev = torque_at(1.5);
        let mut dh = 1.5;
        while dh > sigma + 1e-3 {
            dh -= 0.01;
            let cur = torque_at(dh.max(sigma));
            assert!(cur >= prev);
            prev = cur;
        }
        // ...then decreases to zero overhead.
        let mut dh = sigma;
        while dh > 0.0 {
            dh -= 0.01;
            let cur = torque_at(dh.max(0.0));
            assert!(cur <= prev);
            prev = cur;
        }
        assert_eq!(prev, 0.0);
    }
}
