//! Demonstration trajectories: synthesis, file I/O and nearest-point lookup.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::vecmath::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct DemoTrajectory {
    points: Vec<Vec3>,
    period: f64,
}

impl DemoTrajectory {
    pub fn new(points: Vec<Vec3>, period: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::contract("a demonstration needs at least two points"));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::contract(format!(
                "sample period must be > 0, got {period}"
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::contract("demonstration points must be finite"));
        }
        Ok(DemoTrajectory { points, period })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Vec3 {
        self.points[0]
    }

    pub fn last(&self) -> Vec3 {
        self.points[self.points.len() - 1]
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        DemoTrajectory {
            points,
            period: self.period,
        }
    }
}

/// Index of the demonstration point closest to `p`; ties go to the lower index.
pub fn nearest_index(traj: &DemoTrajectory, p: Vec3) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, q) in traj.points.iter().enumerate() {
        let d = (*q - p).norm_squared();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoDataset {
    trajectories: Vec<DemoTrajectory>,
    start_mean: Vec3,
    goal_mean: Vec3,
}

impl DemoDataset {
    pub fn new(trajectories: Vec<DemoTrajectory>) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::contract("no trajectories"));
        }
        let n = trajectories.len() as f64;
        let start_mean = trajectories.iter().fold(Vec3::ZERO, |a, t| a + t.first()) / n;
        let goal_mean = trajectories.iter().fold(Vec3::ZERO, |a, t| a + t.last()) / n;
        Ok(DemoDataset {
            trajectories,
            start_mean,
            goal_mean,
        })
    }

    pub fn trajectories(&self) -> &[DemoTrajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn start_mean(&self) -> Vec3 {
        self.start_mean
    }

    pub fn goal_mean(&self) -> Vec3 {
        self.goal_mean
    }
}

/// Shape of the synthetic arc demonstrations.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoGenParams {
    pub count: usize,
    pub start: Vec3,
    pub goal: Vec3,
    /// Peak height of the arc above the straight start–goal segment (m, +z).
    pub apex_height: f64,
    pub points_per_traj: usize,
    pub jitter_std: f64,
    pub period: f64,
}

impl Default for DemoGenParams {
    fn default() -> Self {
        DemoGenParams {
            count: 10,
            start: Vec3::new(-0.08, 0.0, 0.0),
            goal: Vec3::new(0.08, 0.0, 0.0),
            apex_height: 0.08,
            points_per_traj: 300,
            jitter_std: 0.002,
            period: 0.01,
        }
    }
}

/// Noise-free arc position at parameter `u ∈ [0, 1]`.
pub fn arc_point(params: &DemoGenParams, u: f64) -> Vec3 {
    params.start
        + (params.goal - params.start) * u
        + Vec3::new(0.0, 0.0, params.apex_height * (PI * u).sin())
}

/// Number of sine modes in the per-trajectory deviation.
const JITTER_MODES: usize = 3;

/// Arcs from `start` to `goal` that rise over an obstacle.
///
/// Each trajectory deviates from the arc by a smooth random curve
/// `Σ_k g_k sin(kπu) / √K` with `g_k ~ N(0, jitter_std²)` per axis, so every
/// point is perturbed by zero-mean Gaussian noise of std at most `jitter_std`
/// and the endpoints stay exact. Independent per-sample noise would make the
/// path zig-zag at scales below the sample spacing.
pub fn generate_demos(params: &DemoGenParams, seed: u64) -> Result<DemoDataset> {
    if params.count == 0 {
        return Err(Error::config("demo_count must be >= 1"));
    }
    if params.points_per_traj < 2 {
        return Err(Error::config("demo_points must be >= 2"));
    }
    if !params.start.is_finite() || !params.goal.is_finite() {
        return Err(Error::config("demo endpoints must be finite"));
    }
    if params.start == params.goal {
        return Err(Error::config("demo start and goal coincide"));
    }
    if !(params.jitter_std >= 0.0 && params.jitter_std.is_finite()) {
        return Err(Error::config("demo_jitter must be >= 0"));
    }
    if !params.apex_height.is_finite() {
        return Err(Error::config("demo_apex must be finite"));
    }
    let jitter = Normal::new(0.0, params.jitter_std)
        .map_err(|e| Error::config(format!("demo_jitter: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = params.points_per_traj - 1;
    let mut trajectories = Vec::with_capacity(params.count);
    for _ in 0..params.count {
        let modes: Vec<Vec3> = (0..JITTER_MODES)
            .map(|_| {
                if params.jitter_std > 0.0 {
                    Vec3::new(
                        jitter.sample(&mut rng),
                        jitter.sample(&mut rng),
                        jitter.sample(&mut rng),
                    )
                } else {
                    Vec3::ZERO
                }
            })
            .collect();
        let norm = (JITTER_MODES as f64).sqrt();
        let mut points = Vec::with_capacity(params.points_per_traj);
        for i in 0..=last {
            let mut p = if i == 0 {
                params.start
            } else if i == last {
                params.goal
            } else {
                arc_point(params, i as f64 / last as f64)
            };
            if i != 0 && i != last {
                let u = i as f64 / last as f64;
                for (k, g) in modes.iter().enumerate() {
                    p += *g * (((k + 1) as f64 * PI * u).sin() / norm);
                }
            }
            points.push(p);
        }
        trajectories.push(DemoTrajectory::new(points, params.period)?);
    }
    DemoDataset::new(trajectories)
}

/// Serialises as `traj_id,t,x,y,z` lines; floats in shortest round-trip form.
pub fn encode_demos(dataset: &DemoDataset) -> String {
    let mut out = String::new();
    for (id, traj) in dataset.trajectories.iter().enumerate() {
        for (i, p) in traj.points.iter().enumerate() {
            let t = i as f64 * traj.period;
            writeln!(out, "{id},{t:?},{:?},{:?},{:?}", p.x, p.y, p.z).unwrap();
        }
    }
    out
}

pub fn save_demos(dataset: &DemoDataset, path: &Path) -> Result<()> {
    fs::write(path, encode_demos(dataset)).map_err(|e| Error::io(path, e))
}

pub fn load_demos(path: &Path) -> Result<DemoDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_demos(&text, path)
}

struct PendingTraj {
    id: i64,
    times: Vec<f64>,
    points: Vec<Vec3>,
    first_line: usize,
}

pub fn decode_demos(text: &str, path: &Path) -> Result<DemoDataset> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut done: Vec<PendingTraj> = Vec::new();
    let mut current: Option<PendingTraj> = None;
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("traj_id") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(parse_err(
                line_no,
                format!(
                    "expected 5 fields `traj_id,t,x,y,z`, found {}",
                    fields.len()
                ),
            ));
        }
        let id: i64 = fields[0]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad trajectory id `{}`", fields[0])))?;
        let mut nums = [0.0; 4];
        for (k, f) in fields[1..].iter().enumerate() {
            nums[k] = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line_no, format!("bad number `{f}`")))?;
        }
        let [t, x, y, z] = nums;
        let start_new = current.as_ref().is_none_or(|c| c.id != id);
        if start_new {
            if !seen.insert(id) {
                return Err(parse_err(
                    line_no,
                    format!("trajectory {id} is not contiguous"),
                ));
            }
            if let Some(c) = current.take() {
                done.push(c);
            }
            current = Some(PendingTraj {
                id,
                times: Vec::new(),
                points: Vec::new(),
                first_line: line_no,
            });
        }
        let c = current.as_mut().expect("set above");
        if let Some(&prev) = c.times.last() {
            if t <= prev {
                return Err(parse_err(line_no, "time stamps must be ascending".into()));
            }
        }
        c.times.push(t);
        c.points.push(Vec3::new(x, y, z));
    }
    if let Some(c) = current.take() {
        done.push(c);
    }
    if done.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: "no trajectories".into(),
        });
    }
    let mut trajectories = Vec::with_capacity(done.len());
    for c in done {
        if c.points.len() < 2 {
            return Err(parse_err(
                c.first_line,
                format!("trajectory {} has fewer than two points", c.id),
            ));
        }
        let period = c.times[1] - c.times[0];
        for w in c.times.windows(2) {
            if ((w[1] - w[0]) - period).abs() > 1e-6 * period {
                return Err(parse_err(
                    c.first_line,
                    format!("trajectory {} is not uniformly sampled", c.id),
                ));
            }
        }
        trajectories.push(
            DemoTrajectory::new(c.points, period)
                .map_err(|e| parse_err(c.first_line, e.to_string()))?,
        );
    }
    DemoDataset::new(trajectories)
}
