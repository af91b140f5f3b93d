//! Pick, lift-comparison and bar-lift benchmarks.

use std::time::Instant;

use dualarm_core::{is_valid, optimize, Arm, CostParams, OptimizationResult, OptimizerConfig, RigidTransform, Trajectory};
use dualarm_shape::{estimate_upright_pose, infer_latent, warp_grasp_poses, GraspPoses, PointCloud};
use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ik::{resolve_with, IkParams};
use crate::report::{
    BenchmarkReport, OptimizerSummary, RegistrationSummary, StageRecord, TrialRecord, GROUP_CLOSURE_OFF,
    GROUP_CLOSURE_ON, STAGE_GOALS, STAGE_POSE, STAGE_REGISTRATION, STAGE_TRAJECTORY,
};
use crate::scenario::{Mode, PickSetup, Scenario};

/// Angle of the relative rotation, accurate near zero.
fn rotation_angle(a: &Rotation3<f64>, b: &Rotation3<f64>) -> f64 {
    let chord = (a.matrix() - b.matrix()).norm();
    2.0 * (chord / (2.0 * 2f64.sqrt())).min(1.0).asin()
}

pub fn optimizer_summary(result: &OptimizationResult) -> OptimizerSummary {
    OptimizerSummary {
        success: result.success,
        first_attempt_success: result.first_attempt_success,
        iterations: result.iterations,
        restarts: result.restarts,
        final_cost: result.final_cost,
        max_t_dev: result.validity.max_t_dev,
        max_o_dev: result.validity.max_o_dev,
        max_eef_orientation_dev: result.validity.max_eef_orientation_dev,
        min_clearance: result.validity.min_clearance,
        t_dev_trace: result.validity.t_dev_trace.clone(),
        o_dev_trace: result.validity.o_dev_trace.clone(),
    }
}

fn seeded_config(base: &OptimizerConfig, seed: u64) -> OptimizerConfig {
    OptimizerConfig {
        seed,
        ..base.clone()
    }
}

/// One optimizer run of a lift scenario with closure switched as requested.
pub fn run_optimize(scenario: &Scenario, closure: bool, seed: u64) -> Result<OptimizationResult> {
    let costs = CostParams {
        closure,
        ..scenario.costs.clone()
    };
    let goal = scenario.goal()?;
    Ok(optimize(
        &scenario.model,
        &scenario.scene,
        &scenario.start,
        goal,
        &costs,
        &seeded_config(&scenario.optimizer, seed),
    )?)
}

fn lift_trial(scenario: &Scenario, index: usize, group: &str, costs: &CostParams) -> TrialRecord {
    let seed = scenario.trial_seed(index);
    let clock = Instant::now();
    let outcome = scenario.goal().and_then(|goal| {
        Ok(optimize(
            &scenario.model,
            &scenario.scene,
            &scenario.start,
            goal,
            costs,
            &seeded_config(&scenario.optimizer, seed),
        )?)
    });
    let time = clock.elapsed().as_secs_f64();
    let (stage, optimizer, trajectory) = match outcome {
        Ok(result) => (
            StageRecord {
                name: STAGE_TRAJECTORY.into(),
                success: result.success,
                time,
                attempts: 1 + result.restarts,
                error: None,
            },
            Some(optimizer_summary(&result)),
            Some(result.trajectory),
        ),
        Err(e) => (
            StageRecord {
                name: STAGE_TRAJECTORY.into(),
                success: false,
                time,
                attempts: 1,
                error: Some(e.to_string()),
            },
            None,
            None,
        ),
    };
    TrialRecord {
        index,
        seed,
        group: group.to_owned(),
        object: None,
        yaw: None,
        success: stage.success,
        wall_time: clock.elapsed().as_secs_f64(),
        stages: vec![stage],
        registration: None,
        optimizer,
        trajectory,
    }
}

fn expect_mode(scenario: &Scenario, mode: Mode) -> Result<()> {
    if scenario.mode != mode {
        return Err(Error::Scenario(format!(
            "scenario '{}' is a {} scenario, not {mode}",
            scenario.name, scenario.mode
        )));
    }
    Ok(())
}

/// The same seeded trials with closure disabled, then enabled.
pub fn run_lift_comparison(scenario: &Scenario) -> Result<BenchmarkReport> {
    expect_mode(scenario, Mode::LiftComparison)?;
    scenario.goal()?;
    let mut trials = Vec::with_capacity(2 * scenario.trials);
    for (group, closure) in [(GROUP_CLOSURE_OFF, false), (GROUP_CLOSURE_ON, true)] {
        let costs = CostParams {
            closure,
            ..scenario.costs.clone()
        };
        for k in 0..scenario.trials {
            trials.push(lift_trial(scenario, k, group, &costs));
        }
    }
    for (i, t) in trials.iter_mut().enumerate() {
        t.index = i;
    }
    Ok(BenchmarkReport::new(&scenario.name, scenario.mode, trials))
}

/// Lift with both end-effector orientations fixed, closure as configured.
pub fn run_bar_lift(scenario: &Scenario) -> Result<BenchmarkReport> {
    expect_mode(scenario, Mode::BarLift)?;
    scenario.goal()?;
    let constraints = &scenario.costs.orientation_constraints;
    if Arm::BOTH.iter().any(|a| constraints.get(*a).is_none()) {
        return Err(Error::Scenario(
            "bar-lift needs orientation targets for both end-effectors".into(),
        ));
    }
    let group = if scenario.costs.closure { "bar-lift" } else { "bar-lift-open" };
    let trials = (0..scenario.trials)
        .map(|k| lift_trial(scenario, k, group, &scenario.costs))
        .collect();
    Ok(BenchmarkReport::new(&scenario.name, scenario.mode, trials))
}

/// Yaw of pick trial `k`: the listed offsets in turn, else uniform noise.
pub fn trial_yaw(scenario: &Scenario, k: usize) -> f64 {
    let objects = scenario.pick.as_ref().map_or(1, |p| p.objects.len());
    if scenario.yaw_offsets.is_empty() {
        if scenario.yaw_noise == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.trial_seed(k));
        rng.random_range(-scenario.yaw_noise..=scenario.yaw_noise)
    } else {
        scenario.yaw_offsets[(k / objects) % scenario.yaw_offsets.len()]
    }
}

/// Rotation by `yaw` about the vertical line through `pivot`.
fn turn_about(pivot: &Vector3<f64>, up: &[f64; 3], yaw: f64) -> RigidTransform {
    let axis = Unit::new_normalize(Vector3::from(*up));
    RigidTransform::from_translation(*pivot)
        * RigidTransform::about_axis(&axis, yaw)
        * RigidTransform::from_translation(-pivot)
}

struct Stages {
    records: Vec<StageRecord>,
}

impl Stages {
    /// Times `f`; records success, attempts and the error message.
    fn run<T>(&mut self, name: &str, f: impl FnOnce() -> Result<(T, usize)>) -> Option<T> {
        let clock = Instant::now();
        let outcome = f();
        let time = clock.elapsed().as_secs_f64();
        let (value, attempts, error) = match outcome {
            Ok((v, attempts)) => (Some(v), attempts, None),
            Err(e) => (None, 1, Some(e.to_string())),
        };
        self.records.push(StageRecord {
            name: name.to_owned(),
            success: value.is_some(),
            time,
            attempts,
            error,
        });
        value
    }

    fn fail_last(&mut self, message: String) {
        if let Some(last) = self.records.last_mut() {
            last.success = false;
            last.error = Some(message);
        }
    }
}

/// Final-grasp position and angle errors per arm.
fn grasp_errors(estimate: &GraspPoses, truth: &GraspPoses) -> Option<([f64; 2], [f64; 2])> {
    let mut pos = [0.0; 2];
    let mut ang = [0.0; 2];
    for (i, arm) in Arm::BOTH.into_iter().enumerate() {
        let (e, t) = (estimate.get(arm).last()?, truth.get(arm).last()?);
        pos[i] = (e.translation - t.translation).norm();
        ang[i] = rotation_angle(&e.rotation, &t.rotation);
    }
    Some((pos, ang))
}

fn pick_trial(scenario: &Scenario, setup: &PickSetup, k: usize) -> TrialRecord {
    let seed = scenario.trial_seed(k);
    let object = &setup.objects[k % setup.objects.len()];
    let yaw = trial_yaw(scenario, k);
    let group = if scenario.yaw_offsets.is_empty() {
        "all".to_owned()
    } else {
        format!("yaw {yaw:+.2}")
    };
    let clock = Instant::now();
    let turn = turn_about(&object.observation.centroid(), &setup.up, yaw);
    let observed: PointCloud = object.observation.transformed(&turn);
    let truth = object.truth.as_ref().map(|t| t.transformed(&turn));
    let mut stages = Stages { records: Vec::new() };
    let mut registration = None;
    let mut optimizer = None;
    let mut trajectory = None;
    let mut success = false;

    let up = Vector3::from(setup.up);
    let pose = stages.run(STAGE_POSE, || Ok((estimate_upright_pose(&observed, &setup.space, &up)?, 1)));
    let grasps = pose.and_then(|pose| {
        stages.run(STAGE_REGISTRATION, || {
            let latent = infer_latent(&setup.space, &observed, &pose, &setup.inference)?;
            let field = setup.space.field(latent.coordinates.as_slice())?;
            let grasps = warp_grasp_poses(&field, setup.space.grasps()).transformed(&latent.alignment);
            Ok(((latent, grasps), 1))
        })
    });
    let grasps = grasps.and_then(|(latent, grasps)| {
        let errors = truth.as_ref().and_then(|t| grasp_errors(&grasps, t));
        registration = Some(RegistrationSummary {
            residual: latent.residual,
            converged: latent.converged,
            coordinates: latent.coordinates.iter().copied().collect(),
            position_error: errors.map(|e| e.0),
            angle_error: errors.map(|e| e.1),
        });
        match errors {
            Some((pos, ang))
                if pos.iter().any(|p| *p > setup.position_tolerance) || ang.iter().any(|a| *a > setup.angle_tolerance) =>
            {
                stages.fail_last(format!(
                    "grasp error {:.4}/{:.4} m, {:.3}/{:.3} rad exceeds tolerance",
                    pos[0], pos[1], ang[0], ang[1]
                ));
                None
            }
            _ => Some(grasps),
        }
    });
    let goal = grasps.and_then(|grasps| {
        stages.run(STAGE_GOALS, || {
            let params = IkParams {
                seed,
                ..scenario.ik.clone()
            };
            let r = resolve_with(
                &scenario.model,
                &scenario.scene,
                &grasps.left[0],
                &grasps.right[0],
                &scenario.start,
                &params,
            )?;
            Ok((r.configuration, r.attempts))
        })
    });
    if let Some(goal) = goal {
        // Hands are empty while reaching, so closure stays off.
        let costs = CostParams {
            closure: false,
            ..scenario.costs.clone()
        };
        let result = stages.run(STAGE_TRAJECTORY, || {
            let result = optimize(
                &scenario.model,
                &scenario.scene,
                &scenario.start,
                &goal,
                &costs,
                &seeded_config(&scenario.optimizer, seed),
            )?;
            let attempts = 1 + result.restarts;
            Ok((result, attempts))
        });
        if let Some(result) = result {
            let rechecked = recheck(&result.trajectory, scenario, &costs);
            success = result.success && rechecked;
            if !success {
                stages.fail_last(if result.success {
                    "serialized trajectory failed the validity re-check".into()
                } else {
                    "no valid trajectory within budget".into()
                });
            }
            optimizer = Some(optimizer_summary(&result));
            trajectory = Some(result.trajectory);
        }
    }
    TrialRecord {
        index: k,
        seed,
        group,
        object: Some(object.name.clone()),
        yaw: Some(yaw),
        success,
        wall_time: clock.elapsed().as_secs_f64(),
        stages: stages.records,
        registration,
        optimizer,
        trajectory,
    }
}

/// Validity of a trajectory after a round trip through its serialized form.
pub fn recheck(trajectory: &Trajectory, scenario: &Scenario, costs: &CostParams) -> bool {
    let Ok(text) = serde_json::to_string(trajectory) else { return false };
    let Ok(parsed) = serde_json::from_str::<Trajectory>(&text) else { return false };
    is_valid(
        &parsed,
        &scenario.model,
        &scenario.scene,
        costs,
        scenario.optimizer.validity_samples,
    )
    .is_ok_and(|r| r.valid)
}

/// Pose estimation, registration, goal resolution and reaching per trial.
pub fn run_pick(scenario: &Scenario) -> Result<BenchmarkReport> {
    expect_mode(scenario, Mode::Pick)?;
    let setup = scenario
        .pick
        .as_ref()
        .ok_or_else(|| Error::Scenario("pick scenario has no [pick] section".into()))?;
    let trials = (0..scenario.trials).map(|k| pick_trial(scenario, setup, k)).collect();
    Ok(BenchmarkReport::new(&scenario.name, scenario.mode, trials))
}

/// Dispatches on the scenario's mode.
pub fn run(scenario: &Scenario) -> Result<BenchmarkReport> {
    match scenario.mode {
        Mode::Pick => run_pick(scenario),
        Mode::LiftComparison => run_lift_comparison(scenario),
        Mode::BarLift => run_bar_lift(scenario),
    }
}
