//! End-to-end harness for the dual-arm experiments.
//!
//! A [`Scenario`] names a robot, a scene, start configuration and either a
//! lift goal or observed object clouds with a shape space. The runners in
//! [`experiments`] turn it into a [`BenchmarkReport`]: per-trial records with
//! stage timings plus aggregates that are recomputed from those records.

pub mod data;
pub mod error;
pub mod experiments;
pub mod ik;
pub mod report;
pub mod scenario;

pub use error::{Error, Result};
pub use experiments::{run, run_bar_lift, run_lift_comparison, run_optimize, run_pick};
pub use ik::{resolve_goal_configuration, resolve_with, IkParams, Resolved};
pub use report::{BenchmarkReport, TrialRecord};
pub use scenario::{Mode, Scenario, ScenarioFile};
