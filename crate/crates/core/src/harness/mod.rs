//! Experiment orchestration: configuration, the epoch schedule, seeded
//! multi-run aggregation and artifact output.
//!
//! An epoch is two episodes, one per task direction. Training epochs explore
//! with AR-p noise and train after every episode; every `test_every` epochs a
//! noise-free test epoch runs without storing transitions or training.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{
    finalize_episode, post_episode_training, ArpNoise, DdpgAgent, ReplayBuffer, TrainingStats,
};
use crate::error::{Error, Result};
use crate::reward::{calibrate_velocity_threshold, RewardParams};
use crate::simworld::{generate_demos, load_demos, DemoDataset, EpisodeRecord, Simulator};
use crate::vecmath::TaskDirection;

mod config;
mod metrics;
mod plot;

pub use config::{DemoSource, ExperimentConfig};
pub use metrics::{
    aggregate_runs, decode_metrics, encode_aggregate, encode_metrics, read_metrics, write_metrics,
    AggregateRow, Band, EpochMetrics, Phase, METRICS_HEADER,
};
pub use plot::{emit_plot, render_svg};

/// Independent seeds for every random stream of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub agent: u64,
    pub exploration: u64,
    pub training_episodes: u64,
    pub test_episodes: u64,
    pub calibration_noise: u64,
    pub calibration_episodes: u64,
}

impl RunSeeds {
    pub fn derive(seed: u64) -> Self {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        RunSeeds {
            agent: r.next_u64(),
            exploration: r.next_u64(),
            training_episodes: r.next_u64(),
            test_episodes: r.next_u64(),
            calibration_noise: r.next_u64(),
            calibration_episodes: r.next_u64(),
        }
    }
}

pub fn load_dataset(config: &ExperimentConfig) -> Result<DemoDataset> {
    match &config.demos {
        DemoSource::File(path) => load_demos(path),
        DemoSource::Generated { .. } => {
            let (params, seed) = config.demo_params().expect("generated source");
            generate_demos(&params, seed)
        }
    }
}

pub fn build_simulator(config: &ExperimentConfig) -> Result<Simulator> {
    config.validate()?;
    Simulator::new(load_dataset(config)?, config.sim_settings()?)
}

pub fn exploration_noise(config: &ExperimentConfig, seed: u64) -> Result<ArpNoise> {
    ArpNoise::new(config.ar_order, config.ar_alpha, config.noise_sigma, seed)
}

/// The configured threshold, or a seeded calibration run when none is set.
pub fn velocity_threshold(config: &ExperimentConfig, sim: &Simulator, seed: u64) -> Result<f64> {
    if let Some(x) = config.velocity_threshold {
        return Ok(x);
    }
    let seeds = RunSeeds::derive(seed);
    let mut noise = exploration_noise(config, seeds.calibration_noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.calibration_episodes);
    calibrate_velocity_threshold(sim, &mut noise, config.calibration_episodes, &mut rng)
}

/// A finished training run.
#[derive(Debug)]
pub struct TrainedRun {
    pub metrics: Vec<EpochMetrics>,
    pub agent: DdpgAgent,
    pub velocity_threshold: f64,
    /// Episodes run with exploration, in order.
    pub training_episodes: usize,
    pub test_episodes: usize,
}

fn in_epoch(epoch: usize, phase: Phase, e: Error) -> Error {
    let tag = format!("{phase} epoch {epoch}");
    match e {
        Error::Contract(m) => Error::Contract(format!("{tag}: {m}")),
        Error::Config(m) => Error::Config(format!("{tag}: {m}")),
        other => other,
    }
}

fn summarize(
    epoch: usize,
    phase: Phase,
    episodes: &[EpisodeRecord],
    updates: usize,
) -> EpochMetrics {
    let n = episodes.len() as f64;
    let total_time: f64 = episodes.iter().map(|e| e.duration).sum();
    EpochMetrics {
        epoch,
        phase,
        mean_reward: episodes.iter().map(|e| e.total_reward).sum::<f64>() / n,
        mean_time_per_episode: total_time / n,
        mean_time_per_epoch: total_time,
        successes: episodes.iter().filter(|e| e.outcome.is_success()).count(),
        updates,
    }
}

const DIRECTIONS: [TaskDirection; 2] = [TaskDirection::Forward, TaskDirection::Backward];

/// One noise-free epoch without storing transitions or training.
pub fn test_epoch(
    sim: &Simulator,
    agent: &DdpgAgent,
    rng: &mut ChaCha8Rng,
    reward: &RewardParams,
    epoch: usize,
) -> Result<EpochMetrics> {
    let mut episodes = Vec::with_capacity(2);
    for dir in DIRECTIONS {
        let rec = sim
            .run_episode(agent, None, rng, dir, reward)
            .map_err(|e| in_epoch(epoch, Phase::Test, e))?;
        episodes.push(rec);
    }
    Ok(summarize(epoch, Phase::Test, &episodes, 0))
}

fn train_episode(
    sim: &Simulator,
    agent: &mut DdpgAgent,
    noise: &mut ArpNoise,
    rng: &mut ChaCha8Rng,
    buffer: &mut ReplayBuffer,
    dir: TaskDirection,
    reward: &RewardParams,
) -> Result<(EpisodeRecord, TrainingStats)> {
    let rec = sim.run_episode(agent, Some(noise), rng, dir, reward)?;
    let stored = finalize_episode(buffer, rec.transitions.clone(), rec.outcome)?;
    let stats = post_episode_training(agent, buffer, stored)?;
    Ok((rec, stats))
}

/// Trains one seeded run, reporting each metrics row as it is produced.
pub fn run_training(
    config: &ExperimentConfig,
    seed: u64,
    on_row: &mut dyn FnMut(&EpochMetrics),
) -> Result<TrainedRun> {
    config.validate()?;
    let seeds = RunSeeds::derive(seed);
    let mut agent = DdpgAgent::new(config.agent.clone(), seeds.agent)?;
    if config.epochs == 0 {
        return Ok(TrainedRun {
            metrics: Vec::new(),
            agent,
            velocity_threshold: config.velocity_threshold.unwrap_or(f64::NAN),
            training_episodes: 0,
            test_episodes: 0,
        });
    }
    let sim = build_simulator(config)?;
    let x = velocity_threshold(config, &sim, seed)?;
    let reward = RewardParams::from_limits(x, sim.force_limits())?;
    let mut noise = exploration_noise(config, seeds.exploration)?;
    let mut train_rng = ChaCha8Rng::seed_from_u64(seeds.training_episodes);
    let mut test_rng = ChaCha8Rng::seed_from_u64(seeds.test_episodes);
    let mut buffer = ReplayBuffer::new(config.replay_capacity);

    let mut metrics = Vec::new();
    let (mut n_train, mut n_test) = (0, 0);
    for epoch in 1..=config.epochs {
        let mut episodes = Vec::with_capacity(2);
        let mut updates = 0;
        for dir in DIRECTIONS {
            let (rec, stats) = train_episode(
                &sim,
                &mut agent,
                &mut noise,
                &mut train_rng,
                &mut buffer,
                dir,
                &reward,
            )
            .map_err(|e| in_epoch(epoch, Phase::Train, e))?;
            updates += stats.updates;
            episodes.push(rec);
            n_train += 1;
        }
        let row = summarize(epoch, Phase::Train, &episodes, updates);
        on_row(&row);
        metrics.push(row);

        if epoch % config.test_every == 0 {
            let row = test_epoch(&sim, &agent, &mut test_rng, &reward, epoch)?;
            n_test += 2;
            on_row(&row);
            metrics.push(row);
        }
    }
    Ok(TrainedRun {
        metrics,
        agent,
        velocity_threshold: x,
        training_episodes: n_train,
        test_episodes: n_test,
    })
}

/// Learning-curve rows of one seeded run.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<Vec<EpochMetrics>> {
    Ok(run_training(config, seed, &mut |_| {})?.metrics)
}

/// Runs `epochs` noise-free test epochs with a trained agent.
pub fn evaluate(
    config: &ExperimentConfig,
    seed: u64,
    agent: &DdpgAgent,
    epochs: usize,
) -> Result<Vec<EpochMetrics>> {
    let sim = build_simulator(config)?;
    let x = velocity_threshold(config, &sim, seed)?;
    let reward = RewardParams::from_limits(x, sim.force_limits())?;
    let mut rng = ChaCha8Rng::seed_from_u64(RunSeeds::derive(seed).test_episodes);
    (1..=epochs)
        .map(|e| test_epoch(&sim, agent, &mut rng, &reward, e))
        .collect()
}
