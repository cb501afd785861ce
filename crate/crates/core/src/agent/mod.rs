//! Deterministic-policy-gradient agent producing assistive forces.
//!
//! The actor maps a [`StateVector`] to a normalised action in `[-1, 1]³`
//! which is scaled by the force limits into newtons. The critic receives the
//! action concatenated onto its second hidden layer. Both have slowly
//! tracking target copies used to form the regression targets.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::neural::{
    adam_step, read_tensor_file, write_tensor_file, Activation, AdamState, Gradients, Init,
    Injection, LayerSpec, Mlp, TensorSection,
};
use crate::reward::{terminal_adjustment, EpisodeOutcome};
use crate::vecmath::{clip_force, ForceLimits, StateVector, Vec3, ACTION_DIM, STATE_DIM};

mod noise;
mod replay;

pub use noise::{arp_coefficients, unit_innovation_variance, ArpNoise};
pub use replay::{ReplayBuffer, Transition};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub hidden: [usize; 2],
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub force_limits: ForceLimits,
    /// Half-width of the uniform initialisation of both output layers.
    pub final_init: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            hidden: [400, 300],
            gamma: 0.99,
            tau: 0.01,
            batch_size: 64,
            actor_lr: 1e-3,
            critic_lr: 1e-4,
            force_limits: ForceLimits::default(),
            final_init: 3e-3,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::config(format!(
                "tau must lie in (0, 1], got {}",
                self.tau
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if !(self.actor_lr > 0.0 && self.actor_lr.is_finite()) {
            return Err(Error::config(format!(
                "actor_lr must be > 0, got {}",
                self.actor_lr
            )));
        }
        if !(self.critic_lr > 0.0 && self.critic_lr.is_finite()) {
            return Err(Error::config(format!(
                "critic_lr must be > 0, got {}",
                self.critic_lr
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden layer sizes must be >= 1"));
        }
        if !(self.final_init >= 0.0 && self.final_init.is_finite()) {
            return Err(Error::config("final_init must be >= 0"));
        }
        Ok(())
    }

    pub fn actor_specs(&self) -> Vec<LayerSpec> {
        let [h1, h2] = self.hidden;
        vec![
            LayerSpec {
                in_dim: STATE_DIM,
                out_dim: h1,
                activation: Activation::Relu,
            },
            LayerSpec {
                in_dim: h1,
                out_dim: h2,
                activation: Activation::Relu,
            },
            LayerSpec {
                in_dim: h2,
                out_dim: ACTION_DIM,
                activation: Activation::Tanh,
            },
        ]
    }

    pub fn critic_specs(&self) -> (Vec<LayerSpec>, Injection) {
        let [h1, h2] = self.hidden;
        (
            vec![
                LayerSpec {
                    in_dim: STATE_DIM,
                    out_dim: h1,
                    activation: Activation::Relu,
                },
                LayerSpec {
                    in_dim: h1 + ACTION_DIM,
                    out_dim: h2,
                    activation: Activation::Relu,
                },
                LayerSpec {
                    in_dim: h2,
                    out_dim: 1,
                    activation: Activation::Linear,
                },
            ],
            Injection {
                layer: 1,
                width: ACTION_DIM,
            },
        )
    }
}

/// An action as stored for learning and as felt by the operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action {
    pub normalized: [f64; ACTION_DIM],
    pub force: Vec3,
}

/// Normalised action → newtons, then clipped into the safe range.
pub fn scale_action(normalized: [f64; ACTION_DIM], limits: &ForceLimits) -> Vec3 {
    clip_force(Vec3::from_array(normalized).mul_elem(limits.max()), limits)
}

pub fn unscale_force(force: Vec3, limits: &ForceLimits) -> [f64; ACTION_DIM] {
    let m = limits.max();
    [force.x / m.x, force.y / m.y, force.z / m.z]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainStep {
    Updated {
        critic_loss: f64,
    },
    /// The buffer held fewer transitions than one minibatch.
    Skipped,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrainingStats {
    pub updates: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone)]
pub struct DdpgAgent {
    config: AgentConfig,
    actor: Mlp,
    critic: Mlp,
    target_actor: Mlp,
    target_critic: Mlp,
    actor_opt: AdamState,
    critic_opt: AdamState,
    rng: ChaCha8Rng,
}

/// A minibatch laid out as matrices.
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub absorbing: Vec<bool>,
}

impl Batch {
    pub fn from_transitions(ts: &[&Transition]) -> Self {
        let n = ts.len();
        let mut states = Array2::zeros((n, STATE_DIM));
        let mut next_states = Array2::zeros((n, STATE_DIM));
        let mut actions = Array2::zeros((n, ACTION_DIM));
        for (i, t) in ts.iter().enumerate() {
            states
                .row_mut(i)
                .assign(&ndarray::ArrayView1::from(&t.state.0));
            next_states
                .row_mut(i)
                .assign(&ndarray::ArrayView1::from(&t.next_state.0));
            actions
                .row_mut(i)
                .assign(&ndarray::ArrayView1::from(&t.action));
        }
        Batch {
            states,
            actions,
            rewards: ts.iter().map(|t| t.reward).collect(),
            next_states,
            absorbing: ts.iter().map(|t| t.absorbing).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Regression target for one transition. Absorbing transitions never read
/// `next_q`.
pub fn td_target(reward: f64, absorbing: bool, gamma: f64, next_q: impl FnOnce() -> f64) -> f64 {
    if absorbing {
        reward
    } else {
        reward + gamma * next_q()
    }
}

impl DdpgAgent {
    pub fn new(config: AgentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        let init = Init::Ddpg {
            final_range: config.final_init,
        };
        let actor = Mlp::new(config.actor_specs(), None, init, &mut init_rng)?;
        let (cspecs, inj) = config.critic_specs();
        let critic = Mlp::new(cspecs, Some(inj), init, &mut init_rng)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        Ok(DdpgAgent {
            actor_opt: AdamState::new(&actor),
            critic_opt: AdamState::new(&critic),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            config,
            rng,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn target_actor(&self) -> &Mlp {
        &self.target_actor
    }

    pub fn target_critic(&self) -> &Mlp {
        &self.target_critic
    }

    pub fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor
    }

    pub fn critic_mut(&mut self) -> &mut Mlp {
        &mut self.critic
    }

    pub fn target_critic_mut(&mut self) -> &mut Mlp {
        &mut self.target_critic
    }

    /// Deterministic policy output in `[-1, 1]³`.
    pub fn policy(&self, state: &StateVector) -> Result<[f64; ACTION_DIM]> {
        let out = self.actor.forward_one(&state.0, None)?;
        Ok([out[0], out[1], out[2]])
    }

    pub fn q_value(&self, state: &StateVector, action: &[f64; ACTION_DIM]) -> Result<f64> {
        Ok(self.critic.forward_one(&state.0, Some(action))?[0])
    }

    /// Policy output plus optional exploration noise, clamped and scaled to newtons.
    pub fn select_action(
        &self,
        noise: Option<&mut ArpNoise>,
        state: &StateVector,
    ) -> Result<Action> {
        let mut a = self.policy(state)?;
        if let Some(noise) = noise {
            let n = noise.sample().to_array();
            for (ai, ni) in a.iter_mut().zip(n) {
                *ai += ni;
            }
        }
        for ai in &mut a {
            *ai = ai.clamp(-1.0, 1.0);
        }
        Ok(Action {
            normalized: a,
            force: scale_action(a, &self.config.force_limits),
        })
    }

    fn targets(&self, batch: &Batch) -> Result<Array1<f64>> {
        let next_a = self.target_actor.forward(batch.next_states.view(), None)?;
        let next_q = self
            .target_critic
            .forward(batch.next_states.view(), Some(next_a.output().view()))?;
        let next_q = next_q.output().column(0).to_owned();
        Ok((0..batch.len())
            .map(|i| {
                td_target(
                    batch.rewards[i],
                    batch.absorbing[i],
                    self.config.gamma,
                    || next_q[i],
                )
            })
            .collect())
    }

    /// Mean squared TD error and its gradient with respect to the critic.
    pub fn critic_loss_gradients(
        &self,
        batch: &Batch,
        targets: &Array1<f64>,
    ) -> Result<(f64, Gradients)> {
        let cache = self
            .critic
            .forward(batch.states.view(), Some(batch.actions.view()))?;
        let q = cache.output().column(0);
        let n = batch.len() as f64;
        let diff = &q - targets;
        let loss = diff.mapv(|d| d * d).sum() / n;
        let upstream = diff.mapv(|d| 2.0 * d / n).insert_axis(Axis(1));
        let grads = self
            .critic
            .backward(&cache, upstream.view())?
            .grads
            .expect("requested");
        Ok((loss, grads))
    }

    /// Gradient, with respect to the actor, of `-mean_i Q(s_i, μ(s_i))`.
    pub fn actor_objective_gradients(&self, states: &Array2<f64>) -> Result<Gradients> {
        let a_cache = self.actor.forward(states.view(), None)?;
        let q_cache = self
            .critic
            .forward(states.view(), Some(a_cache.output().view()))?;
        let n = states.nrows() as f64;
        let upstream = Array2::from_elem((states.nrows(), 1), -1.0 / n);
        let dq = self.critic.input_gradients(&q_cache, upstream.view())?;
        let da = dq.aux_grad.expect("critic takes the action");
        Ok(self
            .actor
            .backward(&a_cache, da.view())?
            .grads
            .expect("requested"))
    }

    /// One critic step, one actor step, then both soft target updates.
    pub fn train_minibatch(&mut self, buffer: &ReplayBuffer) -> Result<TrainStep> {
        let Some(sample) = buffer.sample(self.config.batch_size, &mut self.rng) else {
            return Ok(TrainStep::Skipped);
        };
        let batch = Batch::from_transitions(&sample);
        let y = self.targets(&batch)?;
        let (critic_loss, cg) = self.critic_loss_gradients(&batch, &y)?;
        adam_step(
            &mut self.critic,
            &cg,
            &mut self.critic_opt,
            self.config.critic_lr,
        )?;
        let ag = self.actor_objective_gradients(&batch.states)?;
        adam_step(
            &mut self.actor,
            &ag,
            &mut self.actor_opt,
            self.config.actor_lr,
        )?;
        soft_update(&mut self.target_actor, &self.actor, self.config.tau)?;
        soft_update(&mut self.target_critic, &self.critic, self.config.tau)?;
        Ok(TrainStep::Updated { critic_loss })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mlp = |name: &str, net: &Mlp| TensorSection::Mlp {
            name: name.into(),
            net: net.clone(),
        };
        let adam = |name: &str, state: &AdamState| TensorSection::Adam {
            name: name.into(),
            state: state.clone(),
        };
        write_tensor_file(
            path,
            &[
                mlp("actor", &self.actor),
                mlp("critic", &self.critic),
                mlp("target_actor", &self.target_actor),
                mlp("target_critic", &self.target_critic),
                adam("actor", &self.actor_opt),
                adam("critic", &self.critic_opt),
            ],
        )
    }

    /// Restores networks and optimizer state saved by [`DdpgAgent::save`].
    pub fn load(config: AgentConfig, seed: u64, path: &Path) -> Result<Self> {
        let mut agent = DdpgAgent::new(config, seed)?;
        let sections = read_tensor_file(path)?;
        let mut seen = 0;
        for s in sections {
            match s {
                TensorSection::Mlp { name, net } => {
                    let slot = match name.as_str() {
                        "actor" => &mut agent.actor,
                        "critic" => &mut agent.critic,
                        "target_actor" => &mut agent.target_actor,
                        "target_critic" => &mut agent.target_critic,
                        _ => continue,
                    };
                    if slot.specs() != net.specs() || slot.injection() != net.injection() {
                        return Err(Error::Format {
                            path: path.into(),
                            msg: format!(
                                "network `{name}` does not match the configured architecture"
                            ),
                        });
                    }
                    *slot = net;
                    seen += 1;
                }
                TensorSection::Adam { name, state } => match name.as_str() {
                    "actor" => agent.actor_opt = state,
                    "critic" => agent.critic_opt = state,
                    _ => {}
                },
            }
        }
        if seen != 4 {
            return Err(Error::Format {
                path: path.into(),
                msg: "checkpoint must hold actor, critic and both targets".into(),
            });
        }
        Ok(agent)
    }
}

pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    target.blend_from(online, tau)
}

/// Applies the episode outcome and moves the trajectory into the buffer.
///
/// Returns how many transitions were stored; a failed episode stores none.
pub fn finalize_episode(
    buffer: &mut ReplayBuffer,
    mut trajectory: Vec<Transition>,
    outcome: EpisodeOutcome,
) -> Result<usize> {
    if trajectory.is_empty() {
        return Err(Error::contract("cannot finalize an empty trajectory"));
    }
    if outcome == EpisodeOutcome::Fail {
        return Ok(0);
    }
    let last = trajectory.last_mut().expect("nonempty");
    last.reward += terminal_adjustment(outcome)?;
    last.absorbing = true;
    let n = trajectory.len();
    buffer.extend(trajectory);
    Ok(n)
}

/// Runs one minibatch update per stored step of the episode just finished.
pub fn post_episode_training(
    agent: &mut DdpgAgent,
    buffer: &ReplayBuffer,
    episode_len: usize,
) -> Result<TrainingStats> {
    let mut stats = TrainingStats::default();
    for _ in 0..episode_len {
        match agent.train_minibatch(buffer)? {
            TrainStep::Updated { .. } => stats.updates += 1,
            TrainStep::Skipped => stats.skipped += 1,
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> AgentConfig {
        AgentConfig {
            hidden: [16, 8],
            batch_size: 4,
            ..AgentConfig::default()
        }
    }

    fn tr(reward: f64) -> Transition {
        let s = StateVector([0.1, 0.0, 0.0, 0.1, 0.0, 0.0, 1.0]);
        Transition {
            state: s,
            action: [0.0; 3],
            reward,
            next_state: s,
            absorbing: false,
        }
    }

    #[test]
    fn success_adds_bonus_and_marks_absorbing() {
        let mut buf = ReplayBuffer::new(100);
        let n = finalize_episode(
            &mut buf,
            vec![tr(-1.0), tr(-1.0), tr(-1.0)],
            EpisodeOutcome::Success,
        )
        .unwrap();
        assert_eq!(n, 3);
        let stored: Vec<_> = buf.iter().collect();
        assert_eq!(stored[2].reward, 9.0);
        assert!(stored[2].absorbing);
        assert!(!stored[0].absorbing && !stored[1].absorbing);
    }

    #[test]
    fn unsuccess_subtracts_penalty() {
        let mut buf = ReplayBuffer::new(100);
        finalize_episode(&mut buf, vec![tr(-2.0)], EpisodeOutcome::Unsuccess).unwrap();
        let t = buf.iter().next().unwrap();
        assert_eq!((t.reward, t.absorbing), (-12.0, true));
    }

    #[test]
    fn fail_discards() {
        let mut buf = ReplayBuffer::new(100);
        finalize_episode(&mut buf, vec![tr(-2.0)], EpisodeOutcome::Success).unwrap();
        let n = finalize_episode(&mut buf, vec![tr(-1.0); 5], EpisodeOutcome::Fail).unwrap();
        assert_eq!((n, buf.len()), (0, 1));
        assert!(finalize_episode(&mut buf, vec![], EpisodeOutcome::Success).is_err());
    }

    #[test]
    fn target_formula() {
        assert_eq!(td_target(-1.0, false, 0.99, || -50.0), -50.5);
        assert_eq!(
            td_target(-12.0, true, 0.99, || panic!("target net consulted")),
            -12.0
        );
    }

    #[test]
    fn scaling_round_trip() {
        let lim = ForceLimits::symmetric(Vec3::new(2.0, 1.5, 3.0)).unwrap();
        for a in [
            [1.0, 1.0, 1.0],
            [-0.3, 0.77, -1.0],
            [0.0, 1e-9, 0.123456789],
        ] {
            let f = scale_action(a, &lim);
            let back = unscale_force(f, &lim);
            for (x, y) in a.iter().zip(back) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        assert_eq!(
            scale_action([1.0; 3], &ForceLimits::default()),
            Vec3::splat(2.0)
        );
    }

    #[test]
    fn fresh_actor_is_nearly_silent() {
        let agent = DdpgAgent::new(AgentConfig::default(), 4).unwrap();
        let s = StateVector([0.2, -0.1, 0.3, 0.2, -0.1, 0.3, 1.0]);
        let a = agent.select_action(None, &s).unwrap();
        assert!(a.force.norm() < 0.05, "{:?}", a.force);
    }

    #[test]
    fn exploration_is_reproducible() {
        let s = StateVector([0.2, -0.1, 0.3, 0.2, -0.1, 0.3, -1.0]);
        let run = || {
            let agent = DdpgAgent::new(small(), 8).unwrap();
            let mut noise = ArpNoise::new(3, 0.8, 0.3, 8).unwrap();
            (0..2)
                .map(|_| agent.select_action(Some(&mut noise), &s).unwrap())
                .collect::<Vec<_>>()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a
            .iter()
            .all(|x| x.normalized.iter().all(|v| v.abs() <= 1.0)));
    }

    #[test]
    fn training_skips_until_batch_available() {
        let mut agent = DdpgAgent::new(small(), 1).unwrap();
        let mut buf = ReplayBuffer::new(100);
        finalize_episode(&mut buf, vec![tr(-1.0); 3], EpisodeOutcome::Success).unwrap();
        let stats = post_episode_training(&mut agent, &buf, 3).unwrap();
        assert_eq!(
            stats,
            TrainingStats {
                updates: 0,
                skipped: 3
            }
        );
        finalize_episode(&mut buf, vec![tr(-1.0); 120], EpisodeOutcome::Success).unwrap();
        let stats = post_episode_training(&mut agent, &buf, 120).unwrap();
        assert_eq!(
            stats,
            TrainingStats {
                updates: 120,
                skipped: 0
            }
        );
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut agent = DdpgAgent::new(small(), 2).unwrap();
        let mut buf = ReplayBuffer::new(100);
        finalize_episode(&mut buf, vec![tr(-1.0); 10], EpisodeOutcome::Success).unwrap();
        post_episode_training(&mut agent, &buf, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.tensors");
        agent.save(&path).unwrap();
        let back = DdpgAgent::load(small(), 2, &path).unwrap();
        assert_eq!(back.actor(), agent.actor());
        assert_eq!(back.target_critic(), agent.target_critic());
        assert_eq!(back.actor_opt, agent.actor_opt);
        let wrong = AgentConfig {
            hidden: [8, 8],
            ..small()
        };
        assert!(DdpgAgent::load(wrong, 2, &path).is_err());
    }
}
