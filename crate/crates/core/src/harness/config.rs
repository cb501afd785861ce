use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::agent::AgentConfig;
use crate::error::{Error, Result};
use crate::simworld::{DemoGenParams, MasterSimParams, SimSettings};
use crate::teleop::TeleopGains;
use crate::vecmath::{scale_factor, ForceLimits, Vec3, Workspace};

/// Where demonstrations come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DemoSource {
    File(PathBuf),
    Generated { params: DemoGenParams, seed: u64 },
}

/// Every tunable of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub master: MasterSimParams,
    pub agent: AgentConfig,
    pub replay_capacity: usize,
    pub epochs: usize,
    pub ar_order: usize,
    pub ar_alpha: f64,
    pub noise_sigma: f64,
    pub teleop_k_m: f64,
    pub teleop_scale: f64,
    pub master_workspace: Workspace,
    pub slave_workspace: Workspace,
    pub goal_tolerance: f64,
    pub max_steps: usize,
    pub test_every: usize,
    pub n_seeds: usize,
    pub eval_epochs: usize,
    pub calibration_episodes: usize,
    /// Fixed velocity threshold; `None` calibrates per run.
    pub velocity_threshold: Option<f64>,
    pub demos: DemoSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ws = Workspace::symmetric(0.2).expect("valid default workspace");
        ExperimentConfig {
            master: MasterSimParams::default(),
            agent: AgentConfig::default(),
            replay_capacity: 1_000_000,
            epochs: 25,
            ar_order: 3,
            ar_alpha: 0.8,
            noise_sigma: 0.3,
            teleop_k_m: 5.0,
            teleop_scale: 1.0,
            master_workspace: ws,
            slave_workspace: ws,
            goal_tolerance: 0.01,
            max_steps: 1000,
            test_every: 5,
            n_seeds: 5,
            eval_epochs: 10,
            calibration_episodes: 10,
            velocity_threshold: None,
            demos: DemoSource::Generated {
                params: DemoGenParams::default(),
                seed: 0,
            },
        }
    }
}

impl ExperimentConfig {
    /// Checks every field; the message names the first offending key.
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be > 0, got {v}")))
            }
        }
        fn at_least_one(name: &str, v: usize) -> Result<()> {
            if v >= 1 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be >= 1, got {v}")))
            }
        }

        at_least_one("step", self.master.step)?;
        positive("k_u", self.master.k_u)?;
        positive("k_s", self.master.k_s)?;
        positive("dt", self.master.dt)?;

        let a = &self.agent;
        at_least_one("batch_size", a.batch_size)?;
        if !(a.gamma > 0.0 && a.gamma < 1.0) {
            return Err(Error::config(format!(
                "gamma must lie in (0, 1), got {}",
                a.gamma
            )));
        }
        if !(a.tau > 0.0 && a.tau <= 1.0) {
            return Err(Error::config(format!(
                "tau must lie in (0, 1], got {}",
                a.tau
            )));
        }
        positive("actor_lr", a.actor_lr)?;
        positive("critic_lr", a.critic_lr)?;
        at_least_one("hidden1", a.hidden[0])?;
        at_least_one("hidden2", a.hidden[1])?;
        positive("final_init", a.final_init)?;
        if self.replay_capacity < a.batch_size {
            return Err(Error::config(format!(
                "replay_capacity must be >= batch_size ({}), got {}",
                a.batch_size, self.replay_capacity
            )));
        }

        at_least_one("ar_order", self.ar_order)?;
        if !(self.ar_alpha >= 0.0 && self.ar_alpha < 1.0) {
            return Err(Error::config(format!(
                "ar_alpha must lie in [0, 1), got {}",
                self.ar_alpha
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        positive("teleop_k_m", self.teleop_k_m)?;
        positive("teleop_scale", self.teleop_scale)?;
        positive("goal_tolerance", self.goal_tolerance)?;
        at_least_one("max_steps", self.max_steps)?;
        at_least_one("test_every", self.test_every)?;
        at_least_one("n_seeds", self.n_seeds)?;
        at_least_one("calibration_episodes", self.calibration_episodes)?;
        if let Some(x) = self.velocity_threshold {
            positive("velocity_threshold", x)?;
        }
        if let DemoSource::Generated { params, .. } = &self.demos {
            at_least_one("demo_count", params.count)?;
            if params.points_per_traj < 2 {
                return Err(Error::config(format!(
                    "demo_points must be >= 2, got {}",
                    params.points_per_traj
                )));
            }
            if !(params.jitter_std >= 0.0 && params.jitter_std.is_finite()) {
                return Err(Error::config(format!(
                    "demo_jitter must be >= 0, got {}",
                    params.jitter_std
                )));
            }
            if !params.apex_height.is_finite() {
                return Err(Error::config("demo_apex must be finite"));
            }
            if params.start == params.goal {
                return Err(Error::config("demo_start and demo_goal coincide"));
            }
        }
        Ok(())
    }

    pub fn teleop_gains(&self) -> Result<TeleopGains> {
        let offset = TeleopGains::centering_offset(
            &self.master_workspace,
            &self.slave_workspace,
            self.teleop_scale,
        );
        TeleopGains::new(self.teleop_k_m, self.teleop_scale, offset)
    }

    pub fn sim_settings(&self) -> Result<SimSettings> {
        Ok(SimSettings {
            master: self.master,
            teleop: self.teleop_gains()?,
            omega: scale_factor(&self.master_workspace, &self.slave_workspace)?,
            force_limits: self.agent.force_limits,
            goal_tolerance: self.goal_tolerance,
            max_steps: self.max_steps,
        })
    }

    /// Generator parameters with the sample period tied to `dt`.
    pub fn demo_params(&self) -> Option<(DemoGenParams, u64)> {
        match &self.demos {
            DemoSource::Generated { params, seed } => Some((
                DemoGenParams {
                    period: self.master.dt,
                    ..params.clone()
                },
                *seed,
            )),
            DemoSource::File(_) => None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, path)?;
        if let DemoSource::File(p) = &mut cfg.demos {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = HashSet::new();
        let mut demo_file = None;
        for (i, raw) in text.lines().enumerate() {
            let at = |msg: String| Error::config(format!("{}:{}: {msg}", origin.display(), i + 1));
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(at(format!("duplicate key `{key}`")));
            }
            if key == "demo_file" {
                if value.is_empty() {
                    return Err(at("demo_file is empty".into()));
                }
                demo_file = Some(PathBuf::from(value));
                continue;
            }
            cfg.set(key, value).map_err(at)?;
        }
        if let Some(p) = demo_file {
            cfg.demos = DemoSource::File(p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let float = || {
            value
                .parse::<f64>()
                .map_err(|_| format!("{key}: `{value}` is not a number"))
        };
        let int = || {
            value
                .parse::<usize>()
                .map_err(|_| format!("{key}: `{value}` is not a non-negative integer"))
        };
        let vec3 = || -> std::result::Result<Vec3, String> {
            let parts: Vec<&str> = value.split(',').map(str::trim).collect();
            let bad = || format!("{key}: `{value}` is not three comma-separated numbers");
            if parts.len() != 3 {
                return Err(bad());
            }
            let mut c = [0.0; 3];
            for (slot, p) in c.iter_mut().zip(&parts) {
                *slot = p.parse().map_err(|_| bad())?;
            }
            Ok(Vec3::from_array(c))
        };
        let ws_err = |e: Error| format!("{key}: {e}");

        let gen = match &mut self.demos {
            DemoSource::Generated { params, seed } => Some((params, seed)),
            DemoSource::File(_) => None,
        };
        let (params, demo_seed) = gen.expect("demo source stays generated while parsing");

        match key {
            "step" => self.master.step = int()?,
            "k_u" => self.master.k_u = float()?,
            "k_s" => self.master.k_s = float()?,
            "dt" => self.master.dt = float()?,
            "batch_size" => self.agent.batch_size = int()?,
            "gamma" => self.agent.gamma = float()?,
            "tau" => self.agent.tau = float()?,
            "actor_lr" => self.agent.actor_lr = float()?,
            "critic_lr" => self.agent.critic_lr = float()?,
            "hidden1" => self.agent.hidden[0] = int()?,
            "hidden2" => self.agent.hidden[1] = int()?,
            "final_init" => self.agent.final_init = float()?,
            "replay_capacity" => self.replay_capacity = int()?,
            "epochs" => self.epochs = int()?,
            "ar_order" => self.ar_order = int()?,
            "ar_alpha" => self.ar_alpha = float()?,
            "noise_sigma" => self.noise_sigma = float()?,
            "teleop_k_m" => self.teleop_k_m = float()?,
            "teleop_scale" => self.teleop_scale = float()?,
            "master_ws_min" => {
                self.master_workspace =
                    Workspace::new(vec3()?, self.master_workspace.upper()).map_err(ws_err)?
            }
            "master_ws_max" => {
                self.master_workspace =
                    Workspace::new(self.master_workspace.lower(), vec3()?).map_err(ws_err)?
            }
            "slave_ws_min" => {
                self.slave_workspace =
                    Workspace::new(vec3()?, self.slave_workspace.upper()).map_err(ws_err)?
            }
            "slave_ws_max" => {
                self.slave_workspace =
                    Workspace::new(self.slave_workspace.lower(), vec3()?).map_err(ws_err)?
            }
            "force_min" => {
                self.agent.force_limits =
                    ForceLimits::new(vec3()?, self.agent.force_limits.max()).map_err(ws_err)?
            }
            "force_max" => {
                self.agent.force_limits =
                    ForceLimits::new(self.agent.force_limits.min(), vec3()?).map_err(ws_err)?
            }
            "goal_tolerance" => self.goal_tolerance = float()?,
            "max_steps" => self.max_steps = int()?,
            "test_every" => self.test_every = int()?,
            "n_seeds" => self.n_seeds = int()?,
            "eval_epochs" => self.eval_epochs = int()?,
            "calibration_episodes" => self.calibration_episodes = int()?,
            "velocity_threshold" => {
                self.velocity_threshold = if value == "auto" {
                    None
                } else {
                    Some(float()?)
                }
            }
            "demo_count" => params.count = int()?,
            "demo_start" => params.start = vec3()?,
            "demo_goal" => params.goal = vec3()?,
            "demo_apex" => params.apex_height = float()?,
            "demo_points" => params.points_per_traj = int()?,
            "demo_jitter" => params.jitter_std = float()?,
            "demo_seed" => {
                *demo_seed = value
                    .parse()
                    .map_err(|_| format!("{key}: `{value}` is not a non-negative integer"))?
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Renders the configuration in the format [`ExperimentConfig::parse`] reads.
    pub fn to_text(&self) -> String {
        let v = |p: Vec3| format!("{}, {}, {}", p.x, p.y, p.z);
        let mut s = String::new();
        let m = &self.master;
        let a = &self.agent;
        let _ = writeln!(s, "# master-side simulator");
        let _ = writeln!(s, "step = {}", m.step);
        let _ = writeln!(s, "k_u = {}", m.k_u);
        let _ = writeln!(s, "k_s = {}", m.k_s);
        let _ = writeln!(s, "dt = {}", m.dt);
        let _ = writeln!(s, "\n# learning");
        let _ = writeln!(s, "batch_size = {}", a.batch_size);
        let _ = writeln!(s, "gamma = {}", a.gamma);
        let _ = writeln!(s, "tau = {}", a.tau);
        let _ = writeln!(s, "actor_lr = {}", a.actor_lr);
        let _ = writeln!(s, "critic_lr = {}", a.critic_lr);
        let _ = writeln!(s, "hidden1 = {}", a.hidden[0]);
        let _ = writeln!(s, "hidden2 = {}", a.hidden[1]);
        let _ = writeln!(s, "final_init = {}", a.final_init);
        let _ = writeln!(s, "replay_capacity = {}", self.replay_capacity);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "\n# exploration");
        let _ = writeln!(s, "ar_order = {}", self.ar_order);
        let _ = writeln!(s, "ar_alpha = {}", self.ar_alpha);
        let _ = writeln!(s, "noise_sigma = {}", self.noise_sigma);
        let _ = writeln!(s, "\n# teleoperation and geometry");
        let _ = writeln!(s, "teleop_k_m = {}", self.teleop_k_m);
        let _ = writeln!(s, "teleop_scale = {}", self.teleop_scale);
        let _ = writeln!(s, "master_ws_min = {}", v(self.master_workspace.lower()));
        let _ = writeln!(s, "master_ws_max = {}", v(self.master_workspace.upper()));
        let _ = writeln!(s, "slave_ws_min = {}", v(self.slave_workspace.lower()));
        let _ = writeln!(s, "slave_ws_max = {}", v(self.slave_workspace.upper()));
        let _ = writeln!(s, "force_min = {}", v(a.force_limits.min()));
        let _ = writeln!(s, "force_max = {}", v(a.force_limits.max()));
        let _ = writeln!(s, "\n# episodes and schedule");
        let _ = writeln!(s, "goal_tolerance = {}", self.goal_tolerance);
        let _ = writeln!(s, "max_steps = {}", self.max_steps);
        let _ = writeln!(s, "test_every = {}", self.test_every);
        let _ = writeln!(s, "n_seeds = {}", self.n_seeds);
        let _ = writeln!(s, "eval_epochs = {}", self.eval_epochs);
        let _ = writeln!(s, "calibration_episodes = {}", self.calibration_episodes);
        match self.velocity_threshold {
            Some(x) => {
                let _ = writeln!(s, "velocity_threshold = {x}");
            }
            None => {
                let _ = writeln!(s, "velocity_threshold = auto");
            }
        }
        let _ = writeln!(s, "\n# demonstrations");
        match &self.demos {
            DemoSource::File(p) => {
                let _ = writeln!(s, "demo_file = {}", p.display());
            }
            DemoSource::Generated { params, seed } => {
                let _ = writeln!(s, "demo_count = {}", params.count);
                let _ = writeln!(s, "demo_start = {}", v(params.start));
                let _ = writeln!(s, "demo_goal = {}", v(params.goal));
                let _ = writeln!(s, "demo_apex = {}", params.apex_height);
                let _ = writeln!(s, "demo_points = {}", params.points_per_traj);
                let _ = writeln!(s, "demo_jitter = {}", params.jitter_std);
                let _ = writeln!(s, "demo_seed = {seed}");
            }
        }
        s
    }
}
