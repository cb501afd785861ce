//! Teleoperation simulator.
//!
//! The master side replays a simulated operator: at each step it finds the
//! nearest point on a sampled demonstration, aims `step` samples ahead, and
//! turns the gap into a user force. Operator velocity is proportional to the
//! user force plus the assistive force (a viscous hand model), integrated
//! with explicit Euler. The slave side tracks the master through the
//! proportional teleoperation law.

use rand::Rng;

use crate::agent::{Action, ArpNoise, DdpgAgent, Transition};
use crate::error::{Error, Result};
use crate::reward::{step_reward, terminal_adjustment, EpisodeOutcome, RewardParams};
use crate::teleop::{desired_slave_position, tracking_velocity, TeleopGains};
use crate::vecmath::{build_state, ForceLimits, StateVector, TaskDirection, Vec3};

mod demos;

pub use demos::{
    arc_point, decode_demos, encode_demos, generate_demos, load_demos, nearest_index, save_demos,
    DemoDataset, DemoGenParams, DemoTrajectory,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MasterSimParams {
    /// Look-ahead along the demonstration, in samples.
    pub step: usize,
    /// User force gain k_u (N/m).
    pub k_u: f64,
    /// Force-to-velocity gain k_s (m/(N·s)).
    pub k_s: f64,
    /// Integration step (s).
    pub dt: f64,
}

impl Default for MasterSimParams {
    fn default() -> Self {
        MasterSimParams {
            step: 12,
            k_u: 5.0,
            k_s: 5.0,
            dt: 0.01,
        }
    }
}

impl MasterSimParams {
    pub fn validate(&self) -> Result<()> {
        if self.step == 0 {
            return Err(Error::config("step must be >= 1"));
        }
        for (name, v) in [("k_u", self.k_u), ("k_s", self.k_s), ("dt", self.dt)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Simulated operator force towards the look-ahead point.
pub fn user_force(
    traj: &DemoTrajectory,
    index: usize,
    params: &MasterSimParams,
    p_master: Vec3,
) -> Vec3 {
    let target = (index + params.step).min(traj.len() - 1);
    (traj.points()[target] - p_master) * params.k_u
}

/// Returns the next master position and the velocity that produced it.
pub fn master_step(
    p_master: Vec3,
    user: Vec3,
    assist: Vec3,
    params: &MasterSimParams,
) -> (Vec3, Vec3) {
    let v = (user + assist) * params.k_s;
    (p_master + v * params.dt, v)
}

pub fn slave_step(p_slave: Vec3, v_slave: Vec3, dt: f64) -> Vec3 {
    p_slave + v_slave * dt
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub master: MasterSimParams,
    pub teleop: TeleopGains,
    /// State scale factor ω.
    pub omega: f64,
    pub force_limits: ForceLimits,
    /// Distance from the goal (m) that counts as arrival.
    pub goal_tolerance: f64,
    pub max_steps: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            master: MasterSimParams::default(),
            teleop: TeleopGains::default(),
            omega: 0.2,
            force_limits: ForceLimits::default(),
            goal_tolerance: 0.01,
            max_steps: 1000,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<()> {
        self.master.validate()?;
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::config("scale factor must be > 0"));
        }
        if !(self.goal_tolerance > 0.0 && self.goal_tolerance.is_finite()) {
            return Err(Error::config("goal_tolerance must be > 0"));
        }
        if self.max_steps == 0 {
            return Err(Error::config("max_steps must be >= 1"));
        }
        Ok(())
    }
}

/// Raw kinematics of one simulated episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub direction: TaskDirection,
    pub trajectory_index: usize,
    pub goal: Vec3,
    /// One more entry than there are steps.
    pub states: Vec<StateVector>,
    pub actions: Vec<Action>,
    pub master_positions: Vec<Vec3>,
    pub master_velocities: Vec<Vec3>,
    pub slave_positions: Vec<Vec3>,
    pub outcome: EpisodeOutcome,
}

impl Rollout {
    pub fn steps(&self) -> usize {
        self.actions.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub transitions: Vec<Transition>,
    pub outcome: EpisodeOutcome,
    /// Simulated time, `steps × dt`.
    pub duration: f64,
    pub direction: TaskDirection,
    /// Sum of per-step rewards plus the terminal adjustment.
    pub total_reward: f64,
    pub rollout: Rollout,
}

impl EpisodeRecord {
    pub fn steps(&self) -> usize {
        self.transitions.len()
    }
}

#[derive(Debug, Clone)]
pub struct Simulator {
    dataset: DemoDataset,
    settings: SimSettings,
}

impl Simulator {
    pub fn new(dataset: DemoDataset, settings: SimSettings) -> Result<Self> {
        settings.validate()?;
        if dataset.is_empty() {
            return Err(Error::contract("no trajectories"));
        }
        Ok(Simulator { dataset, settings })
    }

    pub fn dataset(&self) -> &DemoDataset {
        &self.dataset
    }

    pub fn settings(&self) -> &SimSettings {
        &self.settings
    }

    pub fn force_limits(&self) -> &ForceLimits {
        &self.settings.force_limits
    }

    /// Start and goal of an episode in the given direction.
    pub fn endpoints(&self, direction: TaskDirection) -> (Vec3, Vec3) {
        match direction {
            TaskDirection::Forward => (self.dataset.start_mean(), self.dataset.goal_mean()),
            TaskDirection::Backward => (self.dataset.goal_mean(), self.dataset.start_mean()),
        }
    }

    /// Simulates one episode with forces chosen by `policy`.
    ///
    /// A demonstration is drawn uniformly with `rng`. The episode ends with
    /// `Success` as soon as the master is within the goal tolerance, or with
    /// `Unsuccess` after `max_steps` steps.
    pub fn rollout<R, P>(
        &self,
        rng: &mut R,
        direction: TaskDirection,
        mut policy: P,
    ) -> Result<Rollout>
    where
        R: Rng + ?Sized,
        P: FnMut(&StateVector) -> Result<Action>,
    {
        let s = &self.settings;
        let trajectory_index = rng.random_range(0..self.dataset.len());
        let base = &self.dataset.trajectories()[trajectory_index];
        let traj = match direction {
            TaskDirection::Forward => base.clone(),
            TaskDirection::Backward => base.reversed(),
        };
        let (start, goal) = self.endpoints(direction);

        let mut p_h = start;
        let mut p_m = desired_slave_position(p_h, &s.teleop);
        let mut state = build_state(p_m, p_h, direction, s.omega)?;

        let cap = s.max_steps.min(4096);
        let mut out = Rollout {
            direction,
            trajectory_index,
            goal,
            states: Vec::with_capacity(cap + 1),
            actions: Vec::with_capacity(cap),
            master_positions: Vec::with_capacity(cap + 1),
            master_velocities: Vec::with_capacity(cap),
            slave_positions: Vec::with_capacity(cap + 1),
            outcome: EpisodeOutcome::Unsuccess,
        };
        out.states.push(state);
        out.master_positions.push(p_h);
        out.slave_positions.push(p_m);

        for _ in 0..s.max_steps {
            let action = policy(&state)?;
            action.force.ensure_finite("assistive force")?;
            let idx = nearest_index(&traj, p_h);
            let f_u = user_force(&traj, idx, &s.master, p_h);
            let (next_h, v_h) = master_step(p_h, f_u, action.force, &s.master);
            let v_m = tracking_velocity(desired_slave_position(next_h, &s.teleop), p_m, &s.teleop);
            p_m = slave_step(p_m, v_m, s.master.dt);
            p_h = next_h;
            state = build_state(p_m, p_h, direction, s.omega)?;

            out.actions.push(action);
            out.master_velocities.push(v_h);
            out.states.push(state);
            out.master_positions.push(p_h);
            out.slave_positions.push(p_m);

            if p_h.distance(goal) <= s.goal_tolerance {
                out.outcome = EpisodeOutcome::Success;
                break;
            }
        }
        Ok(out)
    }

    /// Runs the agent for one episode and scores it.
    ///
    /// With `noise` present the exploration history is reset first and the
    /// policy output is perturbed at every step.
    pub fn run_episode<R: Rng + ?Sized>(
        &self,
        agent: &DdpgAgent,
        mut noise: Option<&mut ArpNoise>,
        rng: &mut R,
        direction: TaskDirection,
        reward: &RewardParams,
    ) -> Result<EpisodeRecord> {
        if let Some(n) = noise.as_deref_mut() {
            n.reset();
        }
        let rollout = self.rollout(rng, direction, |s| {
            agent.select_action(noise.as_deref_mut(), s)
        })?;
        self.score(rollout, reward)
    }

    /// Turns a rollout into transitions with per-step rewards.
    pub fn score(&self, rollout: Rollout, reward: &RewardParams) -> Result<EpisodeRecord> {
        let n = rollout.steps();
        let mut transitions = Vec::with_capacity(n);
        let mut total = 0.0;
        for t in 0..n {
            let r = step_reward(
                rollout.actions[t].force,
                rollout.master_velocities[t],
                reward,
            )?;
            total += r;
            transitions.push(Transition {
                state: rollout.states[t],
                action: rollout.actions[t].normalized,
                reward: r,
                next_state: rollout.states[t + 1],
                absorbing: false,
            });
        }
        if n > 0 {
            total += terminal_adjustment(rollout.outcome)?;
        }
        Ok(EpisodeRecord {
            transitions,
            outcome: rollout.outcome,
            duration: n as f64 * self.settings.master.dt,
            direction: rollout.direction,
            total_reward: total,
            rollout,
        })
    }
}

/// Policy that never assists.
pub fn zero_assist(_: &StateVector) -> Result<Action> {
    Ok(Action {
        normalized: [0.0; 3],
        force: Vec3::ZERO,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::AgentConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sim() -> Simulator {
        let demos = generate_demos(&DemoGenParams::default(), 0).unwrap();
        Simulator::new(demos, SimSettings::default()).unwrap()
    }

    #[test]
    fn user_force_examples() {
        let pts: Vec<Vec3> = (0..30)
            .map(|i| Vec3::new(i as f64 * 0.01, 0.0, 0.0))
            .collect();
        let traj = DemoTrajectory::new(pts, 0.01).unwrap();
        let p = MasterSimParams::default();
        // index 8 + step 12 → point 20 at x = 0.2
        let f = user_force(&traj, 8, &p, Vec3::new(0.1, 0.0, 0.0));
        assert!((f - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-12);
        let f = user_force(&traj, 8, &p, Vec3::new(0.2, 0.0, 0.0));
        assert_eq!(f, Vec3::ZERO);
        let f = user_force(&traj, 25, &p, Vec3::new(0.28, 0.0, 0.0));
        assert!((f - Vec3::new(0.05, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn master_step_examples() {
        let p = MasterSimParams::default();
        let (next, v) = master_step(
            Vec3::ZERO,
            Vec3::new(0.5, 0.0, 0.0),
            Vec3::new(0.1, 0.0, 0.0),
            &p,
        );
        assert!((v - Vec3::new(3.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((next - Vec3::new(0.03, 0.0, 0.0)).norm() < 1e-12);

        let start = Vec3::new(0.1, 0.2, 0.3);
        let fu = Vec3::new(0.4, -0.2, 0.1);
        assert_eq!(master_step(start, fu, -fu, &p), (start, Vec3::ZERO));
        assert_eq!(master_step(start, Vec3::ZERO, Vec3::ZERO, &p).0, start);
    }

    #[test]
    fn slave_step_examples() {
        let v = Vec3::new(0.25, 0.0, 0.0);
        assert!((slave_step(Vec3::ZERO, v, 0.01) - Vec3::new(0.0025, 0.0, 0.0)).norm() < 1e-15);
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(slave_step(p, Vec3::ZERO, 0.01), p);
        let mut q = Vec3::ZERO;
        for _ in 0..40 {
            q = slave_step(q, v, 0.01);
        }
        assert!((q - v * 0.4).norm() < 1e-12);
    }

    #[test]
    fn unassisted_episode_succeeds() {
        let sim = sim();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dir in [TaskDirection::Forward, TaskDirection::Backward] {
            let r = sim.rollout(&mut rng, dir, zero_assist).unwrap();
            assert_eq!(r.outcome, EpisodeOutcome::Success);
            assert!(r.master_positions.last().unwrap().distance(r.goal) <= 0.01);
        }
    }

    #[test]
    fn step_cap_gives_unsuccess() {
        let demos = generate_demos(&DemoGenParams::default(), 0).unwrap();
        let sim = Simulator::new(
            demos,
            SimSettings {
                max_steps: 1,
                ..SimSettings::default()
            },
        )
        .unwrap();
        let agent = DdpgAgent::new(
            AgentConfig {
                hidden: [8, 8],
                ..AgentConfig::default()
            },
            0,
        )
        .unwrap();
        let reward = RewardParams::from_limits(1.0, sim.force_limits()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rec = sim
            .run_episode(&agent, None, &mut rng, TaskDirection::Forward, &reward)
            .unwrap();
        assert_eq!(rec.outcome, EpisodeOutcome::Unsuccess);
        assert_eq!(rec.steps(), 1);
        assert_eq!(rec.duration, 0.01);
    }

    #[test]
    fn episodes_are_reproducible() {
        let sim = sim();
        let agent = DdpgAgent::new(
            AgentConfig {
                hidden: [16, 8],
                ..AgentConfig::default()
            },
            3,
        )
        .unwrap();
        let reward = RewardParams::from_limits(2.0, sim.force_limits()).unwrap();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut noise = ArpNoise::new(3, 0.8, 0.3, 12).unwrap();
            sim.run_episode(
                &agent,
                Some(&mut noise),
                &mut rng,
                TaskDirection::Backward,
                &reward,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert!((a.duration - a.steps() as f64 * 0.01).abs() < 1e-12);
    }

    #[test]
    fn backward_episode_starts_at_goal_mean() {
        let sim = sim();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = sim
            .rollout(&mut rng, TaskDirection::Backward, zero_assist)
            .unwrap();
        assert_eq!(r.master_positions[0], sim.dataset().goal_mean());
        assert_eq!(r.goal, sim.dataset().start_mean());
        assert!(r.states.iter().all(|s| s.task() == -1.0));
    }

    #[test]
    fn slave_error_shrinks_while_master_rests() {
        let sim = sim();
        let teleop = sim.settings().teleop;
        let p_h = Vec3::new(0.05, 0.01, 0.02);
        let mut p_m = Vec3::new(-0.05, 0.0, 0.0);
        let target = desired_slave_position(p_h, &teleop);
        let mut err = p_m.distance(target);
        for _ in 0..100 {
            let v = tracking_velocity(target, p_m, &teleop);
            p_m = slave_step(p_m, v, 0.01);
            let next = p_m.distance(target);
            assert!(next <= err);
            err = next;
        }
    }
}
