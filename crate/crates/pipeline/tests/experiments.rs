mod common;

use common::{load_edited, shipped, shipped_file};
use dualarm_pipeline::experiments::{recheck, trial_yaw};
use dualarm_pipeline::report::{GROUP_CLOSURE_OFF, GROUP_CLOSURE_ON, PICK_STAGES, STAGE_TRAJECTORY};
use dualarm_pipeline::{run, run_bar_lift, run_lift_comparison, run_optimize, run_pick, BenchmarkReport, Error};

/// Stage times are nested inside the trial clock.
fn assert_timing_consistent(report: &BenchmarkReport) {
    for t in &report.trials {
        let stages: f64 = t.stages.iter().map(|s| s.time).sum();
        assert!(stages <= t.wall_time * 1.05 + 1e-4, "trial {}: {stages} > {}", t.index, t.wall_time);
        assert!(t.stages.iter().all(|s| s.time >= 0.0 && s.attempts >= 1));
    }
}

#[test]
fn lift_comparison_runs_both_modes_on_the_same_seeds() {
    let mut s = shipped("lift.toml");
    s.trials = 3;
    s.seed = 11;
    let report = run_lift_comparison(&s).unwrap();
    assert_eq!(report.trials.len(), 6);
    for (i, t) in report.trials.iter().enumerate() {
        assert_eq!(t.index, i);
        assert_eq!(t.group, if i < 3 { GROUP_CLOSURE_OFF } else { GROUP_CLOSURE_ON });
        assert_eq!(t.seed, 11 + (i % 3) as u64);
        assert_eq!(t.stages.len(), 1);
        assert_eq!(t.stages[0].name, STAGE_TRAJECTORY);
        let opt = t.optimizer.as_ref().unwrap();
        assert_eq!(t.stages[0].attempts, 1 + opt.restarts);
        assert_eq!(t.success, opt.success);
    }
    assert!(report.aggregates.groups[GROUP_CLOSURE_OFF].successes == 3);
    assert_timing_consistent(&report);
}

#[test]
fn closure_trajectories_keep_the_closure_within_thresholds() {
    let mut s = shipped("lift.toml");
    s.trials = 2;
    let report = run_lift_comparison(&s).unwrap();
    for t in report.trials.iter().filter(|t| t.group == GROUP_CLOSURE_ON && t.success) {
        let opt = t.optimizer.as_ref().unwrap();
        assert!(opt.max_t_dev < s.costs.t_max && opt.max_o_dev < s.costs.o_max);
        assert!(opt.t_dev_trace.iter().all(|d| *d < s.costs.t_max));
        let closure = dualarm_core::CostParams { closure: true, ..s.costs.clone() };
        assert!(recheck(t.trajectory.as_ref().unwrap(), &s, &closure));
    }
}

#[test]
fn reruns_are_identical_apart_from_timing() {
    let mut s = shipped("lift.toml");
    s.trials = 2;
    let a = run(&s).unwrap().without_timing().to_json();
    let b = run(&s).unwrap().without_timing().to_json();
    assert_eq!(a, b);
}

#[test]
fn bar_lift_with_and_without_closure() {
    let mut s = shipped("bar_lift.toml");
    s.trials = 2;
    let report = run_bar_lift(&s).unwrap();
    assert!(report.trials.iter().all(|t| t.group == "bar-lift"));
    assert!(report.aggregates.overall.successes >= 1);
    for t in report.trials.iter().filter(|t| t.success) {
        assert!(t.optimizer.as_ref().unwrap().max_eef_orientation_dev < 0.1);
    }
    s.costs.closure = false;
    let open = run_bar_lift(&s).unwrap();
    assert!(open.trials.iter().all(|t| t.group == "bar-lift-open"));
    assert_eq!(open.aggregates.overall.successes, 2);
    assert_timing_consistent(&open);
}

#[test]
fn zero_orientation_tolerance_fails_without_crashing() {
    let mut file = shipped_file("bar_lift.toml");
    file.trials = 1;
    file.optimizer.max_iterations = 40;
    for target in [&mut file.costs.orientation_constraints.left, &mut file.costs.orientation_constraints.right] {
        target.as_mut().unwrap().tolerance = 0.0;
    }
    let s = load_edited(file).unwrap();
    let report = run_bar_lift(&s).unwrap();
    let t = &report.trials[0];
    assert!(!t.success);
    assert!(t.trajectory.is_some());
    let opt = t.optimizer.as_ref().unwrap();
    assert!(!opt.success && opt.max_eef_orientation_dev > 0.0);
    assert_eq!(report.aggregates.overall.success_rate, 0.0);
    assert!(report.table().contains("0%"));
}

#[test]
fn bar_lift_needs_both_orientation_targets() {
    let mut s = shipped("bar_lift.toml");
    s.costs.orientation_constraints.right = None;
    assert!(matches!(run_bar_lift(&s), Err(Error::Scenario(_))));
}

#[test]
fn modes_are_not_interchangeable() {
    let lift = shipped("lift.toml");
    assert!(run_pick(&lift).is_err());
    assert!(run_bar_lift(&lift).is_err());
    assert!(run_lift_comparison(&shipped("pick.toml")).is_err());
    assert!(run_optimize(&shipped("pick.toml"), false, 0).is_err());
}

#[test]
fn optimize_is_seeded() {
    let s = shipped("lift.toml");
    let a = run_optimize(&s, false, 5).unwrap();
    let b = run_optimize(&s, false, 5).unwrap();
    assert!(a.success);
    assert_eq!(a.trajectory, b.trajectory);
}

#[test]
fn pick_on_the_shipped_cans() {
    let mut s = shipped("pick.toml");
    s.trials = 6;
    let report = run_pick(&s).unwrap();
    assert_eq!(report.trials.len(), 6);
    assert_timing_consistent(&report);
    for t in &report.trials {
        let names: Vec<&str> = t.stages.iter().map(|st| st.name.as_str()).collect();
        assert_eq!(names, &PICK_STAGES[..names.len()]);
        // A failed stage ends the trial.
        assert!(t.stages[..t.stages.len() - 1].iter().all(|st| st.success));
        assert_eq!(t.success, t.stages.len() == 4 && t.stages[3].success);
        let reg = t.registration.as_ref().unwrap();
        if t.stages[1].success {
            let setup = s.pick.as_ref().unwrap();
            assert!(reg.position_error.unwrap().iter().all(|e| *e <= setup.position_tolerance));
            assert!(reg.angle_error.unwrap().iter().all(|e| *e <= setup.angle_tolerance));
        }
        if t.success {
            let free = dualarm_core::CostParams { closure: false, ..s.costs.clone() };
            assert!(recheck(t.trajectory.as_ref().unwrap(), &s, &free));
            let tr = t.trajectory.as_ref().unwrap();
            assert_eq!(tr.keyframes().first(), Some(&s.start));
        }
    }
    let reached = report.aggregates.stages.iter().find(|st| st.name == STAGE_TRAJECTORY).unwrap();
    assert_eq!(reached.succeeded, reached.attempted);
    assert!(report.aggregates.overall.successes >= 4, "{}", report.table());
}

#[test]
fn yaw_offsets_cycle_per_round_of_objects() {
    let s = shipped("pick.toml");
    let yaws: Vec<f64> = (0..15).map(|k| trial_yaw(&s, k)).collect();
    assert_eq!(&yaws[..5], &[-0.25; 5]);
    assert_eq!(&yaws[5..10], &[0.0; 5]);
    assert_eq!(&yaws[10..], &[0.25; 5]);
}

#[test]
fn yaw_noise_is_seeded_and_bounded() {
    let mut s = shipped("pick.toml");
    s.yaw_offsets.clear();
    s.yaw_noise = 0.2;
    let yaws: Vec<f64> = (0..40).map(|k| trial_yaw(&s, k)).collect();
    assert!(yaws.iter().all(|y| y.abs() <= 0.2));
    assert!(yaws.iter().any(|y| *y > 0.05) && yaws.iter().any(|y| *y < -0.05));
    assert_eq!(yaws, (0..40).map(|k| trial_yaw(&s, k)).collect::<Vec<_>>());
    s.yaw_noise = 0.0;
    assert_eq!(trial_yaw(&s, 3), 0.0);
}

#[test]
fn yaw_sweep_pick_still_reaches() {
    let mut s = shipped("pick.toml");
    s.yaw_offsets = vec![-0.2, 0.2];
    s.trials = 4;
    s.pick.as_mut().unwrap().objects.truncate(2);
    let report = run_pick(&s).unwrap();
    let groups: Vec<&str> = report.aggregates.groups.keys().map(String::as_str).collect();
    assert_eq!(groups, ["yaw +0.20", "yaw -0.20"]);
    for t in &report.trials {
        assert_eq!(t.yaw, Some(if t.index < 2 { -0.2 } else { 0.2 }));
    }
    assert!(report.aggregates.overall.successes >= 3, "{}", report.table());
}
