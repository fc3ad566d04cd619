//! Quadruped locomotion control: single-rigid-body force MPC, closed-form
//! leg kinematics, trot/bound gait scheduling with stall-triggered
//! transition, and a deterministic closed-loop simulation harness.
//!
//! The main entry points are [`sim::run_scenario`] for closed-loop runs and
//! the per-subsystem modules for library use. See the `examples/` directory
//! for one runnable example per capability.

pub mod config;
pub mod dynamics;
pub mod gait;
pub mod kinematics;
pub mod mpc;
pub mod qp;
pub mod sim;
