//! Simulated haptic shared-control teleoperation.
//!
//! A simulated operator drives a master device along demonstrated paths, a
//! simulated manipulator tracks it, and a deterministic-policy-gradient agent
//! learns assistive forces on the master from a fuzzy force/velocity reward.

pub mod agent;
pub mod error;
pub mod harness;
pub mod neural;
pub mod reward;
pub mod simworld;
pub mod teleop;
pub mod vecmath;

pub use error::{Error, Result};
