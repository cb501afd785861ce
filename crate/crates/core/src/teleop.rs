//! Direct position teleoperation: the slave tracks a scaled, offset copy of
//! the master tip with a proportional velocity command.

use crate::error::{Error, Result};
use crate::vecmath::{Vec3, Workspace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeleopGains {
    /// Proportional tracking gain k_M (1/s).
    pub k_m: f64,
    /// Master-to-slave position scale ξ.
    pub scale: f64,
    pub offset: Vec3,
}

impl TeleopGains {
    pub fn new(k_m: f64, scale: f64, offset: Vec3) -> Result<Self> {
        if !(k_m > 0.0 && k_m.is_finite()) {
            return Err(Error::config(format!("teleop_k_m must be > 0, got {k_m}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::config(format!(
                "teleop_scale must be > 0, got {scale}"
            )));
        }
        if !offset.is_finite() {
            return Err(Error::config("teleop offset must be finite"));
        }
        Ok(TeleopGains { k_m, scale, offset })
    }

    /// Offset that maps the master workspace centre onto the slave workspace centre.
    pub fn centering_offset(master: &Workspace, slave: &Workspace, scale: f64) -> Vec3 {
        slave.center() - master.center() * scale
    }
}

impl Default for TeleopGains {
    fn default() -> Self {
        TeleopGains {
            k_m: 5.0,
            scale: 1.0,
            offset: Vec3::ZERO,
        }
    }
}

pub fn desired_slave_position(p_master: Vec3, gains: &TeleopGains) -> Vec3 {
    p_master * gains.scale + gains.offset
}

pub fn tracking_velocity(p_desired: Vec3, p_slave: Vec3, gains: &TeleopGains) -> Vec3 {
    (p_desired - p_slave) * gains.k_m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Vec3, b: Vec3) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn desired_position_examples() {
        let g = TeleopGains::new(5.0, 1.0, Vec3::new(0.1, 0.0, 0.0)).unwrap();
        assert!(close(
            desired_slave_position(Vec3::new(0.05, 0.0, 0.0), &g),
            Vec3::new(0.15, 0.0, 0.0)
        ));

        let g = TeleopGains::new(5.0, 2.0, Vec3::ZERO).unwrap();
        assert!(close(
            desired_slave_position(Vec3::new(0.05, -0.05, 0.0), &g),
            Vec3::new(0.1, -0.1, 0.0)
        ));

        let o = Vec3::new(0.3, -0.2, 0.7);
        let g = TeleopGains::new(5.0, 3.0, o).unwrap();
        assert_eq!(desired_slave_position(Vec3::ZERO, &g), o);
    }

    #[test]
    fn tracking_velocity_examples() {
        let g = TeleopGains::new(5.0, 1.0, Vec3::ZERO).unwrap();
        assert!(close(
            tracking_velocity(Vec3::new(0.15, 0.0, 0.0), Vec3::new(0.1, 0.0, 0.0), &g),
            Vec3::new(0.25, 0.0, 0.0)
        ));
        let p = Vec3::new(0.4, 0.1, -0.2);
        assert_eq!(tracking_velocity(p, p, &g), Vec3::ZERO);

        let g = TeleopGains::new(1.0, 1.0, Vec3::ZERO).unwrap();
        assert_eq!(
            tracking_velocity(Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0), &g),
            Vec3::new(0.0, 1.0, -1.0)
        );
    }

    #[test]
    fn invalid_gains_rejected() {
        assert!(TeleopGains::new(0.0, 1.0, Vec3::ZERO).is_err());
        assert!(TeleopGains::new(1.0, -1.0, Vec3::ZERO).is_err());
    }

    #[test]
    fn centering_offset_aligns_centres() {
        let m = Workspace::new(Vec3::splat(-0.1), Vec3::splat(0.3)).unwrap();
        let s = Workspace::symmetric(0.3).unwrap();
        let off = TeleopGains::centering_offset(&m, &s, 1.5);
        let g = TeleopGains::new(5.0, 1.5, off).unwrap();
        assert!(close(desired_slave_position(m.center(), &g), s.center()));
    }

    proptest! {
        #[test]
        fn velocity_is_linear_in_error(
            e in prop::array::uniform3(-1.0..1.0f64),
            lambda in -5.0..5.0f64,
            k in 0.1..20.0f64,
        ) {
            let g = TeleopGains::new(k, 1.0, Vec3::ZERO).unwrap();
            let e = Vec3::from_array(e);
            let v1 = tracking_velocity(e, Vec3::ZERO, &g);
            let v2 = tracking_velocity(e * lambda, Vec3::ZERO, &g);
            prop_assert!((v2 - v1 * lambda).norm() <= 1e-12 * (1.0 + v1.norm() * lambda.abs()));
        }

        #[test]
        fn euler_tracking_contracts_error(
            e0 in prop::array::uniform3(-0.5..0.5f64),
            k in 0.5..50.0f64,
        ) {
            let dt = 0.01;
            prop_assume!(k * dt < 1.0);
            let g = TeleopGains::new(k, 1.0, Vec3::ZERO).unwrap();
            let target = Vec3::new(0.05, -0.02, 0.01);
            let mut p = target - Vec3::from_array(e0);
            let mut err = (target - p).norm();
            prop_assume!(err > 1e-6);
            for _ in 0..50 {
                p += tracking_velocity(target, p, &g) * dt;
                let next = (target - p).norm();
                prop_assert!((next - err * (1.0 - k * dt)).abs() <= 1e-12);
                prop_assert!(next < err);
                err = next;
            }
        }
    }
}
