//! Cartesian vectors, device workspaces, state scaling and force clipping.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Three-component Cartesian quantity. The unit depends on what it holds:
/// metres for positions, metres per second for velocities, newtons for forces.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    /// Checked constructor; rejects NaN and infinities.
    pub fn try_new(x: f64, y: f64, z: f64) -> Result<Self> {
        let v = Vec3 { x, y, z };
        v.ensure_finite("vector")?;
        Ok(v)
    }

    pub fn splat(v: f64) -> Self {
        Vec3 { x: v, y: v, z: v }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    /// Componentwise product.
    pub fn mul_elem(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x * other.x, self.y * other.y, self.z * other.z)
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x), f(self.y), f(self.z))
    }

    pub fn abs(self) -> Vec3 {
        self.map(f64::abs)
    }

    pub fn max_component(self) -> f64 {
        self.x.max(self.y).max(self.z)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub(crate) fn ensure_finite(self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::contract(format!("{what} is not finite: {self}")))
        }
    }

    fn all_lt(self, other: Vec3) -> bool {
        self.x < other.x && self.y < other.y && self.z < other.z
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, k: f64) -> Vec3 {
        Vec3::new(self.x / k, self.y / k, self.z / k)
    }
}

/// Axis-aligned reachable box of a device, in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Workspace {
    lower: Vec3,
    upper: Vec3,
}

impl Workspace {
    pub fn new(lower: Vec3, upper: Vec3) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() {
            return Err(Error::config("workspace bounds must be finite"));
        }
        if !lower.all_lt(upper) {
            return Err(Error::config(format!(
                "workspace lower bound {lower} must be strictly below upper bound {upper}"
            )));
        }
        Ok(Workspace { lower, upper })
    }

    /// Box spanning `±half_extent` on every axis.
    pub fn symmetric(half_extent: f64) -> Result<Self> {
        Workspace::new(Vec3::splat(-half_extent), Vec3::splat(half_extent))
    }

    pub fn lower(&self) -> Vec3 {
        self.lower
    }

    pub fn upper(&self) -> Vec3 {
        self.upper
    }

    pub fn center(&self) -> Vec3 {
        (self.lower + self.upper) * 0.5
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.lower.x
            && p.x <= self.upper.x
            && p.y >= self.lower.y
            && p.y <= self.upper.y
            && p.z >= self.lower.z
            && p.z <= self.upper.z
    }

    /// Largest absolute coordinate over the eight corners.
    pub fn max_abs_coordinate(&self) -> f64 {
        self.lower
            .abs()
            .max_component()
            .max(self.upper.abs().max_component())
    }
}

/// Per-axis safe range for the assistive force, in newtons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceLimits {
    min: Vec3,
    max: Vec3,
}

impl ForceLimits {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if !min.is_finite() || !max.is_finite() || !min.all_lt(max) {
            return Err(Error::config(format!(
                "force limits must satisfy f_min < f_max componentwise, got {min} and {max}"
            )));
        }
        Ok(ForceLimits { min, max })
    }

    /// Symmetric clip `[-f_max, f_max]` on each axis.
    pub fn symmetric(f_max: Vec3) -> Result<Self> {
        ForceLimits::new(-f_max, f_max)
    }

    pub fn min(&self) -> Vec3 {
        self.min
    }

    pub fn max(&self) -> Vec3 {
        self.max
    }

    /// Largest magnitude each axis can take after clipping.
    pub fn axis_magnitudes(&self) -> Vec3 {
        Vec3::new(
            self.min.x.abs().max(self.max.x.abs()),
            self.min.y.abs().max(self.max.y.abs()),
            self.min.z.abs().max(self.max.z.abs()),
        )
    }

    /// Norm of the largest clipped force; the reward's `c` constant.
    pub fn max_norm(&self) -> f64 {
        self.axis_magnitudes().norm()
    }
}

impl Default for ForceLimits {
    fn default() -> Self {
        ForceLimits {
            min: Vec3::splat(-2.0),
            max: Vec3::splat(2.0),
        }
    }
}

/// Which way the pick-and-place task runs in the current episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskDirection {
    /// start → goal, encoded as +1
    Forward,
    /// goal → start, encoded as −1
    Backward,
}

impl TaskDirection {
    pub fn flag(self) -> f64 {
        match self {
            TaskDirection::Forward => 1.0,
            TaskDirection::Backward => -1.0,
        }
    }

    pub fn from_flag(flag: f64) -> Result<Self> {
        if flag == 1.0 {
            Ok(TaskDirection::Forward)
        } else if flag == -1.0 {
            Ok(TaskDirection::Backward)
        } else {
            Err(Error::contract(format!(
                "task flag must be +1 or -1, got {flag}"
            )))
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            TaskDirection::Forward => TaskDirection::Backward,
            TaskDirection::Backward => TaskDirection::Forward,
        }
    }
}

pub const STATE_DIM: usize = 7;
pub const ACTION_DIM: usize = 3;

/// Agent observation: scaled slave position, scaled master position, task flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(pub [f64; STATE_DIM]);

impl StateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn slave(&self) -> Vec3 {
        Vec3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn master(&self) -> Vec3 {
        Vec3::new(self.0[3], self.0[4], self.0[5])
    }

    pub fn task(&self) -> f64 {
        self.0[6]
    }
}

/// Common scale ω that maps both workspaces into the unit box.
pub fn scale_factor(ws_master: &Workspace, ws_slave: &Workspace) -> Result<f64> {
    let omega = ws_master
        .max_abs_coordinate()
        .max(ws_slave.max_abs_coordinate());
    if omega > 0.0 && omega.is_finite() {
        Ok(omega)
    } else {
        Err(Error::config(format!("degenerate scale factor {omega}")))
    }
}

pub fn build_state(
    p_slave: Vec3,
    p_master: Vec3,
    task: TaskDirection,
    omega: f64,
) -> Result<StateVector> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::contract(format!(
            "scale factor must be positive, got {omega}"
        )));
    }
    p_slave.ensure_finite("slave position")?;
    p_master.ensure_finite("master position")?;
    let m = p_slave / omega;
    let h = p_master / omega;
    Ok(StateVector([m.x, m.y, m.z, h.x, h.y, h.z, task.flag()]))
}

pub fn clip_force(f: Vec3, limits: &ForceLimits) -> Vec3 {
    Vec3::new(
        f.x.clamp(limits.min.x, limits.max.x),
        f.y.clamp(limits.min.y, limits.max.y),
        f.z.clamp(limits.min.z, limits.max.z),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ws(lo: [f64; 3], hi: [f64; 3]) -> Workspace {
        Workspace::new(Vec3::from_array(lo), Vec3::from_array(hi)).unwrap()
    }

    #[test]
    fn scale_factor_examples() {
        let m = Workspace::symmetric(0.2).unwrap();
        let s = Workspace::symmetric(0.3).unwrap();
        assert_eq!(scale_factor(&m, &s).unwrap(), 0.3);

        let unit = Workspace::symmetric(1.0).unwrap();
        assert_eq!(scale_factor(&unit, &unit).unwrap(), 1.0);

        let m = Workspace::symmetric(0.15).unwrap();
        let s = ws([-0.1, -0.1, -0.1], [0.25, 0.1, 0.1]);
        assert_eq!(scale_factor(&m, &s).unwrap(), 0.25);
    }

    #[test]
    fn degenerate_workspace_rejected() {
        assert!(Workspace::symmetric(0.0).is_err());
        assert!(Workspace::new(Vec3::splat(1.0), Vec3::splat(0.5)).is_err());
    }

    #[test]
    fn build_state_examples() {
        let s = build_state(
            Vec3::new(0.3, 0.0, 0.0),
            Vec3::new(0.15, 0.0, 0.0),
            TaskDirection::Forward,
            0.3,
        )
        .unwrap();
        assert_eq!(s.0, [1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 1.0]);

        let s = build_state(Vec3::ZERO, Vec3::ZERO, TaskDirection::Backward, 0.3).unwrap();
        assert_eq!(s.0, [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0]);

        let s = build_state(
            Vec3::new(-0.3, 0.0, 0.3),
            Vec3::ZERO,
            TaskDirection::Forward,
            0.3,
        )
        .unwrap();
        assert_eq!(s.0, [-1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn build_state_rejects_bad_input() {
        let nan = Vec3::new(f64::NAN, 0.0, 0.0);
        assert!(build_state(nan, Vec3::ZERO, TaskDirection::Forward, 1.0).is_err());
        assert!(build_state(Vec3::ZERO, Vec3::ZERO, TaskDirection::Forward, 0.0).is_err());
    }

    #[test]
    fn clip_force_examples() {
        let lim = ForceLimits::symmetric(Vec3::splat(2.0)).unwrap();
        assert_eq!(
            clip_force(Vec3::new(5.0, 0.0, -5.0), &lim),
            Vec3::new(2.0, 0.0, -2.0)
        );
        let inside = Vec3::new(1.0, -1.0, 0.5);
        assert_eq!(clip_force(inside, &lim), inside);
        let edge = Vec3::splat(2.0);
        assert_eq!(clip_force(edge, &lim), edge);
    }

    #[test]
    fn task_flag_round_trip() {
        for d in [TaskDirection::Forward, TaskDirection::Backward] {
            assert_eq!(TaskDirection::from_flag(d.flag()).unwrap(), d);
            assert_eq!(d.reversed().reversed(), d);
        }
        assert!(TaskDirection::from_flag(0.5).is_err());
    }

    fn vec3() -> impl Strategy<Value = Vec3> {
        (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn identical_positions_give_identical_halves(p in vec3(), omega in 0.01..5.0f64) {
            let s = build_state(p, p, TaskDirection::Forward, omega).unwrap();
            prop_assert_eq!(&s.0[0..3], &s.0[3..6]);
        }

        #[test]
        fn positions_inside_workspaces_scale_into_unit_box(
            half_m in 0.05..1.0f64, half_s in 0.05..1.0f64,
            u in prop::array::uniform6(-1.0..=1.0f64),
        ) {
            let wm = Workspace::symmetric(half_m).unwrap();
            let wsl = Workspace::symmetric(half_s).unwrap();
            let omega = scale_factor(&wm, &wsl).unwrap();
            let pm = Vec3::new(u[0], u[1], u[2]) * half_s;
            let ph = Vec3::new(u[3], u[4], u[5]) * half_m;
            let s = build_state(pm, ph, TaskDirection::Backward, omega).unwrap();
            for c in &s.0[..6] {
                prop_assert!((-1.0..=1.0).contains(c));
            }
        }

        #[test]
        fn clip_is_idempotent(f in vec3(), lim in 0.1..5.0f64) {
            let limits = ForceLimits::symmetric(Vec3::splat(lim)).unwrap();
            let once = clip_force(f, &limits);
            prop_assert_eq!(clip_force(once, &limits), once);
            prop_assert!(once.abs().max_component() <= lim);
            // each axis clips independently
            let fx = clip_force(Vec3::new(f.x, 0.0, 0.0), &limits);
            prop_assert_eq!(fx.x, once.x);
        }

        #[test]
        fn scale_factor_is_symmetric(a in 0.01..2.0f64, b in 0.01..2.0f64, off in -0.5..0.5f64) {
            let wa = Workspace::new(Vec3::splat(-a + off), Vec3::splat(a + off)).unwrap();
            let wb = Workspace::symmetric(b).unwrap();
            prop_assert_eq!(scale_factor(&wa, &wb).unwrap(), scale_factor(&wb, &wa).unwrap());
        }
    }
}
