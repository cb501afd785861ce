//! Fuzzy assistive-force reward.
//!
//! The per-step reward blends a pure force penalty `r0 = -|f|` (used when the
//! operator is still) with an alignment term `r1 = f_par - f_perp - c` (used when
//! the operator moves fast). The blend weight is the operator speed relative to
//! the calibrated threshold `x`. Both terms are non-positive as long as the
//! force stays within the clip range whose norm is `c`.

use rand::Rng;

use crate::agent::{scale_action, Action, ArpNoise};
use crate::error::{Error, Result};
use crate::simworld::Simulator;
use crate::vecmath::{ForceLimits, TaskDirection, Vec3};

/// Bonus (or penalty) added to the final transition of a finished episode.
pub const TERMINAL_BONUS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    /// Operator speed (m/s) above which the alignment term fully applies.
    pub velocity_threshold: f64,
    /// Largest assistive force magnitude (N).
    pub c: f64,
}

impl RewardParams {
    pub fn new(velocity_threshold: f64, c: f64) -> Result<Self> {
        if !(velocity_threshold > 0.0 && velocity_threshold.is_finite()) {
            return Err(Error::config(format!(
                "velocity threshold x must be > 0, got {velocity_threshold}"
            )));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::config(format!("force bound c must be > 0, got {c}")));
        }
        Ok(RewardParams {
            velocity_threshold,
            c,
        })
    }

    /// Uses the clip range norm as `c`.
    pub fn from_limits(velocity_threshold: f64, limits: &ForceLimits) -> Result<Self> {
        RewardParams::new(velocity_threshold, limits.max_norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EpisodeOutcome {
    Success,
    Unsuccess,
    /// Dropped object or other aborted run; the trajectory is thrown away.
    Fail,
}

impl EpisodeOutcome {
    pub fn is_success(self) -> bool {
        self == EpisodeOutcome::Success
    }
}

/// Decomposition of a force relative to the operator velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceComponents {
    pub parallel: f64,
    pub perpendicular: f64,
    /// Angle between force and velocity, in `[0, π]`.
    pub angle: f64,
}

pub fn force_components(force: Vec3, velocity: Vec3) -> ForceComponents {
    let f_norm = force.norm();
    let v_norm = velocity.norm();
    if f_norm == 0.0 || v_norm == 0.0 {
        return ForceComponents {
            parallel: 0.0,
            perpendicular: 0.0,
            angle: 0.0,
        };
    }
    let unit = velocity / v_norm;
    let parallel = force.dot(unit);
    let perpendicular = (force - unit * parallel).norm();
    ForceComponents {
        parallel,
        perpendicular,
        angle: perpendicular.atan2(parallel),
    }
}

pub fn velocity_weight(velocity: Vec3, threshold: f64) -> f64 {
    let speed = velocity.norm();
    if speed == 0.0 {
        0.0
    } else if speed > threshold {
        1.0
    } else {
        speed / threshold
    }
}

pub fn step_reward(force: Vec3, velocity: Vec3, params: &RewardParams) -> Result<f64> {
    let f_norm = force.norm();
    if !f_norm.is_finite() || !velocity.is_finite() {
        return Err(Error::contract("reward inputs must be finite"));
    }
    // allow for rounding in the clip/norm round trip
    if f_norm > params.c * (1.0 + 1e-12) {
        return Err(Error::contract(format!(
            "assistive force norm {f_norm} exceeds c = {}",
            params.c
        )));
    }
    let comps = force_components(force, velocity);
    let phi = velocity_weight(velocity, params.velocity_threshold);
    let r0 = -f_norm;
    let r1 = comps.parallel - comps.perpendicular - params.c;
    Ok(phi * r1 + (1.0 - phi) * r0)
}

pub fn terminal_adjustment(outcome: EpisodeOutcome) -> Result<f64> {
    match outcome {
        EpisodeOutcome::Success => Ok(TERMINAL_BONUS),
        EpisodeOutcome::Unsuccess => Ok(-TERMINAL_BONUS),
        EpisodeOutcome::Fail => Err(Error::contract(
            "failed episodes are discarded and carry no terminal reward",
        )),
    }
}

/// Estimates the velocity threshold `x` as the largest operator speed seen
/// while the assistive force comes from exploration noise alone.
///
/// Episodes alternate direction, starting forward. Each episode resets the
/// noise history.
pub fn calibrate_velocity_threshold<R: Rng>(
    sim: &Simulator,
    noise: &mut ArpNoise,
    n_episodes: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_episodes == 0 {
        return Err(Error::contract("calibration needs at least one episode"));
    }
    let limits = *sim.force_limits();
    let mut x = 0.0f64;
    let mut direction = TaskDirection::Forward;
    for _ in 0..n_episodes {
        noise.reset();
        let trace = sim.rollout(rng, direction, |_state| {
            let a = noise.sample().map(|c| c.clamp(-1.0, 1.0)).to_array();
            Ok(Action {
                normalized: a,
                force: scale_action(a, &limits),
            })
        })?;
        for v in &trace.master_velocities {
            x = x.max(v.norm());
        }
        direction = direction.reversed();
    }
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::config(format!(
            "calibrated velocity threshold must be > 0, got {x}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    #[test]
    fn components_at_45_degrees() {
        let c = force_components(Vec3::new(1.0, 1.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        assert!((c.angle - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(c.parallel, 1.0);
        assert_eq!(c.perpendicular, 1.0);
    }

    #[test]
    fn components_antiparallel() {
        let c = force_components(Vec3::new(-2.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(c.angle, PI);
        assert_eq!(c.parallel, -2.0);
        assert_eq!(c.perpendicular, 0.0);
    }

    #[test]
    fn components_degenerate() {
        let zero = ForceComponents {
            parallel: 0.0,
            perpendicular: 0.0,
            angle: 0.0,
        };
        assert_eq!(force_components(Vec3::ZERO, Vec3::new(0.3, 1.0, 2.0)), zero);
        assert_eq!(force_components(Vec3::new(1.0, 2.0, 3.0), Vec3::ZERO), zero);
    }

    #[test]
    fn velocity_weight_branches() {
        let x = 0.4;
        assert_eq!(velocity_weight(Vec3::ZERO, x), 0.0);
        assert_eq!(velocity_weight(Vec3::new(0.0, 2.0 * x, 0.0), x), 1.0);
        assert_eq!(velocity_weight(Vec3::new(0.0, 0.0, x / 2.0), x), 0.5);
        assert_eq!(velocity_weight(Vec3::new(x, 0.0, 0.0), x), 1.0);
    }

    #[test]
    fn step_reward_examples() {
        let p = RewardParams::new(0.2, 2.0).unwrap();
        let r = step_reward(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.5, 0.0, 0.0), &p).unwrap();
        assert_eq!(r, -1.0);

        let p = RewardParams::new(0.2, 4.0).unwrap();
        let r = step_reward(Vec3::new(1.0, 2.0, 2.0), Vec3::ZERO, &p).unwrap();
        assert_eq!(r, -3.0);

        let p = RewardParams::new(0.2, 2.0).unwrap();
        let r = step_reward(Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.1, 0.0, 0.0), &p).unwrap();
        assert_eq!(r, -2.0);
    }

    #[test]
    fn step_reward_rejects_oversized_force() {
        let p = RewardParams::new(0.2, 1.0).unwrap();
        assert!(step_reward(Vec3::new(2.0, 0.0, 0.0), Vec3::ZERO, &p).is_err());
    }

    #[test]
    fn terminal_adjustment_values() {
        assert_eq!(terminal_adjustment(EpisodeOutcome::Success).unwrap(), 10.0);
        assert_eq!(
            terminal_adjustment(EpisodeOutcome::Unsuccess).unwrap(),
            -10.0
        );
        assert!(terminal_adjustment(EpisodeOutcome::Fail).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(RewardParams::new(0.0, 1.0).is_err());
        assert!(RewardParams::new(1.0, -1.0).is_err());
        let lim = ForceLimits::default();
        let p = RewardParams::from_limits(1.0, &lim).unwrap();
        assert!((p.c - (12.0f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn aligned_fast_reward_peaks_at_c() {
        let c = 2.0;
        let p = RewardParams::new(0.1, c).unwrap();
        let v = Vec3::new(0.0, 0.6, 0.8);
        let mut best = f64::NEG_INFINITY;
        let mut best_mag = 0.0;
        for i in 0..=200 {
            let mag = c * i as f64 / 200.0;
            let r = step_reward(v * (mag / v.norm()), v, &p).unwrap();
            assert!((r - (mag - c)).abs() < 1e-12);
            if r > best {
                best = r;
                best_mag = mag;
            }
        }
        assert_eq!(best_mag, c);
    }

    fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-r..r).prop_map(Vec3::from_array)
    }

    proptest! {
        #[test]
        fn components_pythagoras(f in vec3(5.0), v in vec3(5.0)) {
            let c = force_components(f, v);
            let lhs = c.parallel * c.parallel + c.perpendicular * c.perpendicular;
            let rhs = if v.norm() == 0.0 { 0.0 } else { f.norm_squared() };
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1e-300));
        }

        #[test]
        fn components_scale_invariance(f in vec3(5.0), v in vec3(5.0), k in 0.01..100.0f64) {
            prop_assume!(f.norm() > 1e-6 && v.norm() > 1e-6);
            let base = force_components(f, v);
            let sv = force_components(f, v * k);
            let sf = force_components(f * k, v);
            prop_assert!((base.angle - sv.angle).abs() < 1e-9);
            prop_assert!((base.angle - sf.angle).abs() < 1e-9);
            prop_assert!((base.parallel - sv.parallel).abs() < 1e-9 * (1.0 + f.norm()));
            prop_assert!((base.perpendicular - sv.perpendicular).abs() < 1e-7 * (1.0 + f.norm()));
        }

        #[test]
        fn weight_is_monotone_and_bounded(a in 0.0..3.0f64, b in 0.0..3.0f64, x in 0.01..2.0f64) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let wl = velocity_weight(Vec3::new(lo, 0.0, 0.0), x);
            let wh = velocity_weight(Vec3::new(hi, 0.0, 0.0), x);
            prop_assert!(wl <= wh);
            prop_assert!((0.0..=1.0).contains(&wl) && (0.0..=1.0).contains(&wh));
        }

        #[test]
        fn reward_is_non_positive(dir in vec3(1.0), scale in 0.0..=1.0f64, v in vec3(3.0), x in 0.01..2.0f64) {
            prop_assume!(dir.norm() > 1e-9);
            let c = 3.0;
            let f = dir * (scale * c / dir.norm());
            let p = RewardParams::new(x, c).unwrap();
            prop_assert!(step_reward(f, v, &p).unwrap() <= 0.0);
        }
    }
}
