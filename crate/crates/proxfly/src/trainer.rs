//! Epoch loop: parallel rollouts, fixed-order batching, PPO update.

use proxfly_core::episode::{seeded_rollout, RolloutOptions};
use proxfly_core::ppo::{ppo_update, Adam, Batch, LossStats, TrainConfig, TrainError};
use proxfly_core::rng::{stream_rng, Stream};
use proxfly_core::{ControllerGains, PolicyParams, VehicleClass, VehicleParams};
use rayon::prelude::*;

/// Environment variable capping rollout threads.
pub const THREADS_ENV: &str = "PROXFLY_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSetup {
    pub config: TrainConfig,
    pub class: VehicleClass,
    pub nominal: VehicleParams,
    pub gains: ControllerGains,
    pub rollout: RolloutOptions,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_return: f64,
    pub mean_length: f64,
    pub crash_fraction: f64,
    pub mean_abs_residual_thrust: f64,
    pub loss: LossStats,
}

/// Thread count from [`THREADS_ENV`], else the machine's parallelism.
pub fn rollout_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Fresh policy drawn from the `Init` stream of `seed`.
pub fn initial_policy(seed: u64) -> PolicyParams {
    PolicyParams::init(&mut stream_rng(seed, Stream::Init, 0, 0))
}

/// Run every epoch, calling `on_epoch` after each update. Results do not
/// depend on the thread count: episodes are collected by index and batched
/// in episode order.
pub fn train(
    setup: &TrainSetup,
    threads: usize,
    mut on_epoch: impl FnMut(&EpochRecord, &PolicyParams) -> std::io::Result<()>,
) -> Result<PolicyParams, TrainFailure> {
    let cfg = &setup.config;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().map_err(|e| TrainFailure::Pool(e.to_string()))?;
    let mut params = initial_policy(cfg.seed);
    let mut adam = Adam::new(params.total_params(), cfg.learning_rate);
    for epoch in 0..cfg.epochs {
        let rollouts: Vec<_> = pool.install(|| {
            (0..cfg.episodes_per_epoch)
                .into_par_iter()
                .map(|ep| seeded_rollout(&params, &setup.nominal, &setup.gains, setup.class, cfg.seed, epoch as u64, ep as u64, &setup.rollout))
                .collect()
        });
        let n = rollouts.len() as f64;
        let mean_return = rollouts.iter().map(|r| r.stats.episode_return).sum::<f64>() / n;
        let mean_length = rollouts.iter().map(|r| r.stats.length as f64).sum::<f64>() / n;
        let crash_fraction = rollouts.iter().filter(|r| r.stats.crashed).count() as f64 / n;
        let mean_abs_residual_thrust = rollouts.iter().map(|r| r.stats.mean_abs_residual_thrust).sum::<f64>() / n;
        let trajectories: Vec<_> = rollouts.into_iter().map(|r| r.trajectory).collect();
        let batch = Batch::from_trajectories(&trajectories, cfg.gamma, cfg.gae_lambda);
        let mut rng = stream_rng(cfg.seed, Stream::Update, epoch as u64, 0);
        let loss = ppo_update(&batch, &mut params, &mut adam, cfg, &mut rng).map_err(|source| TrainFailure::Update { epoch, source })?;
        let record = EpochRecord { epoch, mean_return, mean_length, crash_fraction, mean_abs_residual_thrust, loss };
        on_epoch(&record, &params).map_err(TrainFailure::Io)?;
    }
    Ok(params)
}

#[derive(Debug, thiserror::Error)]
pub enum TrainFailure {
    #[error("training diverged at epoch {epoch}: {source}")]
    Update { epoch: usize, source: TrainError },
    #[error("could not start rollout threads: {0}")]
    Pool(String),
    #[error(transparent)]
    Io(std::io::Error),
}
