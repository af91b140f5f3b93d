//! Benchmark reports: per-trial records, aggregates recomputed from them,
//! and the plain-text tables printed by the command line.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use dualarm_core::{Trajectory, TransitionCost};
use serde::{Deserialize, Serialize};

use crate::scenario::Mode;

pub const STAGE_POSE: &str = "pose_estimation";
pub const STAGE_REGISTRATION: &str = "shape_registration";
pub const STAGE_GOALS: &str = "goal_resolution";
pub const STAGE_TRAJECTORY: &str = "trajectory_optimization";

/// Pick stages in execution order.
pub const PICK_STAGES: [&str; 4] = [STAGE_POSE, STAGE_REGISTRATION, STAGE_GOALS, STAGE_TRAJECTORY];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub success: bool,
    /// Wall time, seconds.
    pub time: f64,
    /// Tries this stage needed, e.g. inverse kinematics seeds or optimizer runs.
    pub attempts: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSummary {
    pub success: bool,
    pub first_attempt_success: bool,
    pub iterations: usize,
    pub restarts: usize,
    pub final_cost: TransitionCost,
    pub max_t_dev: f64,
    pub max_o_dev: f64,
    pub max_eef_orientation_dev: f64,
    pub min_clearance: f64,
    /// Closure deviation at every dense validity sample.
    pub t_dev_trace: Vec<f64>,
    pub o_dev_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistrationSummary {
    pub residual: f64,
    pub converged: bool,
    pub coordinates: Vec<f64>,
    /// Final-grasp position error per arm against the annotated truth, meters.
    pub position_error: Option<[f64; 2]>,
    pub angle_error: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    /// Aggregation group, e.g. the constraint mode or the object yaw.
    pub group: String,
    pub object: Option<String>,
    pub yaw: Option<f64>,
    pub success: bool,
    pub wall_time: f64,
    pub stages: Vec<StageRecord>,
    pub registration: Option<RegistrationSummary>,
    pub optimizer: Option<OptimizerSummary>,
    pub trajectory: Option<Trajectory>,
}

impl TrialRecord {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Trials whose optimizer succeeded without restarting.
    pub first_attempt_successes: usize,
    pub runtime_mean: f64,
    pub runtime_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub name: String,
    /// Trials that reached the stage.
    pub attempted: usize,
    pub succeeded: usize,
    pub success_rate: f64,
    pub time_mean: f64,
    pub time_std: f64,
    pub attempts_total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub overall: GroupStats,
    pub groups: BTreeMap<String, GroupStats>,
    pub stages: Vec<StageStats>,
    /// Mean runtime increase of the closure-enabled group over the disabled one, percent.
    pub runtime_growth_percent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub scenario: String,
    pub mode: Mode,
    pub trials: Vec<TrialRecord>,
    pub aggregates: Aggregates,
}

pub const GROUP_CLOSURE_OFF: &str = "closure-off";
pub const GROUP_CLOSURE_ON: &str = "closure-on";

/// Mean and sample standard deviation; zero for empty input.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn group_stats<'a>(trials: impl Iterator<Item = &'a TrialRecord>) -> GroupStats {
    let trials: Vec<&TrialRecord> = trials.collect();
    let times: Vec<f64> = trials.iter().map(|t| t.wall_time).collect();
    let (runtime_mean, runtime_std) = mean_std(&times);
    let successes = trials.iter().filter(|t| t.success).count();
    GroupStats {
        trials: trials.len(),
        successes,
        success_rate: if trials.is_empty() { 0.0 } else { successes as f64 / trials.len() as f64 },
        first_attempt_successes: trials
            .iter()
            .filter(|t| t.success && t.optimizer.as_ref().is_some_and(|o| o.first_attempt_success))
            .count(),
        runtime_mean,
        runtime_std,
    }
}

impl Aggregates {
    /// Everything here is a pure function of the trial records.
    pub fn compute(trials: &[TrialRecord]) -> Self {
        let mut groups = BTreeMap::new();
        let names: Vec<&str> = {
            let mut v: Vec<&str> = trials.iter().map(|t| t.group.as_str()).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        for name in names {
            groups.insert(name.to_owned(), group_stats(trials.iter().filter(|t| t.group == name)));
        }
        let mut stage_names: Vec<&str> = Vec::new();
        for t in trials {
            for s in &t.stages {
                if !stage_names.contains(&s.name.as_str()) {
                    stage_names.push(&s.name);
                }
            }
        }
        let stages = stage_names
            .into_iter()
            .map(|name| {
                let records: Vec<&StageRecord> = trials.iter().filter_map(|t| t.stage(name)).collect();
                let times: Vec<f64> = records.iter().map(|s| s.time).collect();
                let (time_mean, time_std) = mean_std(&times);
                let succeeded = records.iter().filter(|s| s.success).count();
                StageStats {
                    name: name.to_owned(),
                    attempted: records.len(),
                    succeeded,
                    success_rate: if records.is_empty() { 0.0 } else { succeeded as f64 / records.len() as f64 },
                    time_mean,
                    time_std,
                    attempts_total: records.iter().map(|s| s.attempts).sum(),
                }
            })
            .collect();
        let runtime_growth_percent = match (groups.get(GROUP_CLOSURE_OFF), groups.get(GROUP_CLOSURE_ON)) {
            (Some(off), Some(on)) if off.runtime_mean > 0.0 => {
                Some((on.runtime_mean - off.runtime_mean) / off.runtime_mean * 100.0)
            }
            _ => None,
        };
        Self {
            overall: group_stats(trials.iter()),
            groups,
            stages,
            runtime_growth_percent,
        }
    }
}

impl BenchmarkReport {
    pub fn new(scenario: &str, mode: Mode, trials: Vec<TrialRecord>) -> Self {
        let aggregates = Aggregates::compute(&trials);
        Self {
            scenario: scenario.to_owned(),
            mode,
            trials,
            aggregates,
        }
    }

    /// The same report with every wall-clock measurement set to zero and
    /// aggregates recomputed; reruns with equal seeds serialize identically.
    pub fn without_timing(&self) -> Self {
        let mut trials = self.trials.clone();
        for t in &mut trials {
            t.wall_time = 0.0;
            for s in &mut t.stages {
                s.time = 0.0;
            }
        }
        Self::new(&self.scenario, self.mode, trials)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Human-readable summary in the layout matching the experiment.
    pub fn table(&self) -> String {
        match self.mode {
            Mode::Pick => self.stage_table(),
            Mode::LiftComparison | Mode::BarLift => self.mode_table(),
        }
    }

    fn mode_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} ({} trials)", self.scenario, self.trials.len());
        let _ = writeln!(
            out,
            "{:<14} {:>8} {:>20} {:>13} {:>14}",
            "Mode", "Trials", "Runtime [s]", "Success rate", "First attempt"
        );
        for (name, g) in &self.aggregates.groups {
            let _ = writeln!(
                out,
                "{:<14} {:>8} {:>20} {:>12.0}% {:>13.0}%",
                name,
                g.trials,
                format!("{:.3} ± {:.3}", g.runtime_mean, g.runtime_std),
                100.0 * g.success_rate,
                100.0 * g.first_attempt_successes as f64 / g.trials.max(1) as f64
            );
        }
        if let Some(growth) = self.aggregates.runtime_growth_percent {
            let _ = writeln!(out, "Runtime growth with closure: {growth:.0}%");
        }
        out
    }

    fn stage_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} ({} trials)", self.scenario, self.trials.len());
        let _ = writeln!(
            out,
            "{:<26} {:>20} {:>13} {:>10}",
            "Component", "Runtime [s]", "Success rate", "Attempts"
        );
        for s in &self.aggregates.stages {
            let _ = writeln!(
                out,
                "{:<26} {:>20} {:>12.0}% {:>10}",
                s.name,
                format!("{:.3} ± {:.3}", s.time_mean, s.time_std),
                100.0 * s.success_rate,
                s.attempts_total
            );
        }
        let o = &self.aggregates.overall;
        let _ = writeln!(
            out,
            "{:<26} {:>20} {:>12.0}% {:>10}",
            "Complete pipeline",
            format!("{:.3} ± {:.3}", o.runtime_mean, o.runtime_std),
            100.0 * o.success_rate,
            o.trials
        );
        if self.aggregates.groups.len() > 1 {
            for (name, g) in &self.aggregates.groups {
                let _ = writeln!(out, "  {name}: {}/{} succeeded", g.successes, g.trials);
            }
        }
        out
    }
}
