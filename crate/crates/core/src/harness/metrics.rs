use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str =
    "epoch,phase,mean_reward,mean_time_s_per_episode,mean_time_s_per_epoch,successes,updates";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Train,
    Test,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Test => "test",
        }
    }

    pub fn from_name(s: &str) -> Option<Phase> {
        match s {
            "train" => Some(Phase::Train),
            "test" => Some(Phase::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of a learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    /// 1-based epoch index.
    pub epoch: usize,
    pub phase: Phase,
    /// Mean episode return over the epoch.
    pub mean_reward: f64,
    /// Mean simulated episode duration (s).
    pub mean_time_per_episode: f64,
    /// Simulated duration of the whole epoch (s).
    pub mean_time_per_epoch: f64,
    pub successes: usize,
    /// Minibatch updates performed during the epoch.
    pub updates: usize,
}

pub fn encode_metrics(series: &[EpochMetrics]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for m in series {
        s.push_str(&format!(
            "{},{},{:?},{:?},{:?},{},{}\n",
            m.epoch,
            m.phase,
            m.mean_reward,
            m.mean_time_per_episode,
            m.mean_time_per_epoch,
            m.successes,
            m.updates
        ));
    }
    s
}

/// Writes the series as CSV. An empty series is rejected before the file is touched.
pub fn write_metrics(series: &[EpochMetrics], path: &Path) -> Result<()> {
    if series.is_empty() {
        return Err(Error::contract("refusing to write an empty metrics series"));
    }
    std::fs::write(path, encode_metrics(series)).map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<EpochMetrics>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_metrics(&text, path)
}

pub fn decode_metrics(text: &str, path: &Path) -> Result<Vec<EpochMetrics>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == METRICS_HEADER => {}
        _ => {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                msg: format!("expected header `{METRICS_HEADER}`"),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.into(),
            line: i + 1,
            msg,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(err(format!("expected 7 fields, found {}", f.len())));
        }
        let int = |k: usize| {
            f[k].parse::<usize>()
                .map_err(|_| err(format!("bad integer `{}`", f[k])))
        };
        let float = |k: usize| {
            f[k].parse::<f64>()
                .map_err(|_| err(format!("bad number `{}`", f[k])))
        };
        out.push(EpochMetrics {
            epoch: int(0)?,
            phase: Phase::from_name(f[1]).ok_or_else(|| err(format!("bad phase `{}`", f[1])))?,
            mean_reward: float(2)?,
            mean_time_per_episode: float(3)?,
            mean_time_per_epoch: float(4)?,
            successes: int(5)?,
            updates: int(6)?,
        });
    }
    Ok(out)
}

/// Mean and 95% half-width of one quantity across seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub mean: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub epoch: usize,
    pub phase: Phase,
    pub runs: usize,
    pub reward: Band,
    pub time_per_episode: Band,
    pub time_per_epoch: Band,
    pub successes: Band,
}

const Z_95: f64 = 1.959963984540054;

/// Summation in sorted order makes the result independent of seed order.
fn band(values: &mut [f64]) -> Band {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Band {
            mean,
            half_width: 0.0,
        };
    }
    let mut dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    dev.sort_by(f64::total_cmp);
    let var = dev.iter().sum::<f64>() / (n - 1.0);
    Band {
        mean,
        half_width: Z_95 * (var / n).sqrt(),
    }
}

/// Per-row mean and normal-approximation 95% confidence half-width.
pub fn aggregate_runs(runs: &[Vec<EpochMetrics>]) -> Result<Vec<AggregateRow>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::contract("aggregation needs at least one series"))?;
    for (k, r) in runs.iter().enumerate() {
        if r.len() != first.len() {
            return Err(Error::contract(format!(
                "series {k} has {} rows, series 0 has {}",
                r.len(),
                first.len()
            )));
        }
        for (a, b) in r.iter().zip(first) {
            if (a.epoch, a.phase) != (b.epoch, b.phase) {
                return Err(Error::contract(format!(
                    "series {k} row ({}, {}) does not line up with ({}, {})",
                    a.epoch, a.phase, b.epoch, b.phase
                )));
            }
        }
    }
    let column = |i: usize, f: fn(&EpochMetrics) -> f64| -> Band {
        let mut v: Vec<f64> = runs.iter().map(|r| f(&r[i])).collect();
        band(&mut v)
    };
    Ok((0..first.len())
        .map(|i| AggregateRow {
            epoch: first[i].epoch,
            phase: first[i].phase,
            runs: runs.len(),
            reward: column(i, |m| m.mean_reward),
            time_per_episode: column(i, |m| m.mean_time_per_episode),
            time_per_epoch: column(i, |m| m.mean_time_per_epoch),
            successes: column(i, |m| m.successes as f64),
        })
        .collect())
}

pub fn encode_aggregate(rows: &[AggregateRow]) -> String {
    let mut s = String::from(
        "epoch,phase,runs,mean_reward,reward_ci95,mean_time_s_per_episode,time_per_episode_ci95,\
         mean_time_s_per_epoch,time_per_epoch_ci95,mean_successes\n",
    );
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?}\n",
            r.epoch,
            r.phase,
            r.runs,
            r.reward.mean,
            r.reward.half_width,
            r.time_per_episode.mean,
            r.time_per_episode.half_width,
            r.time_per_epoch.mean,
            r.time_per_epoch.half_width,
            r.successes.mean
        ));
    }
    s
}
