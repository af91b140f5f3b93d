use dualarm_pipeline::report::{
    mean_std, Aggregates, OptimizerSummary, StageRecord, GROUP_CLOSURE_OFF, GROUP_CLOSURE_ON, PICK_STAGES,
};
use dualarm_pipeline::{BenchmarkReport, Mode, TrialRecord};
use dualarm_core::TransitionCost;
use proptest::prelude::*;

fn stage(name: &str, success: bool, time: f64, attempts: usize) -> StageRecord {
    StageRecord {
        name: name.into(),
        success,
        time,
        attempts,
        error: (!success).then(|| "failed".into()),
    }
}

fn summary(first_attempt: bool) -> OptimizerSummary {
    OptimizerSummary {
        success: true,
        first_attempt_success: first_attempt,
        iterations: 10,
        restarts: usize::from(!first_attempt),
        final_cost: TransitionCost::default(),
        max_t_dev: 0.0,
        max_o_dev: 0.0,
        max_eef_orientation_dev: 0.0,
        min_clearance: 0.1,
        t_dev_trace: vec![],
        o_dev_trace: vec![],
    }
}

fn trial(index: usize, group: &str, success: bool, wall_time: f64, stages: Vec<StageRecord>) -> TrialRecord {
    TrialRecord {
        index,
        seed: index as u64,
        group: group.into(),
        object: None,
        yaw: None,
        success,
        wall_time,
        stages,
        registration: None,
        optimizer: Some(summary(index.is_multiple_of(2))),
        trajectory: None,
    }
}

#[test]
fn lift_aggregates_by_hand() {
    let trials = vec![
        trial(0, GROUP_CLOSURE_OFF, true, 1.0, vec![stage(PICK_STAGES[3], true, 1.0, 1)]),
        trial(1, GROUP_CLOSURE_OFF, true, 3.0, vec![stage(PICK_STAGES[3], true, 3.0, 2)]),
        trial(2, GROUP_CLOSURE_ON, true, 4.0, vec![stage(PICK_STAGES[3], true, 4.0, 1)]),
        trial(3, GROUP_CLOSURE_ON, false, 8.0, vec![stage(PICK_STAGES[3], false, 8.0, 3)]),
    ];
    let a = Aggregates::compute(&trials);
    let off = &a.groups[GROUP_CLOSURE_OFF];
    assert_eq!((off.trials, off.successes, off.first_attempt_successes), (2, 2, 1));
    assert_eq!(off.runtime_mean, 2.0);
    assert!((off.runtime_std - 2f64.sqrt()).abs() < 1e-15);
    let on = &a.groups[GROUP_CLOSURE_ON];
    assert_eq!((on.successes, on.success_rate, on.runtime_mean), (1, 0.5, 6.0));
    assert_eq!(a.runtime_growth_percent, Some(200.0));
    assert_eq!(a.overall.trials, 4);
    assert_eq!(a.overall.success_rate, 0.75);
    assert_eq!(a.stages.len(), 1);
    assert_eq!(a.stages[0].attempts_total, 7);
    assert_eq!(a.stages[0].succeeded, 3);
}

#[test]
fn pick_stages_keep_execution_order_and_count_reached_trials() {
    let full = |ok: bool| {
        PICK_STAGES
            .iter()
            .enumerate()
            .map(|(i, n)| stage(n, ok || i < 3, 0.1 * (i + 1) as f64, 1))
            .collect::<Vec<_>>()
    };
    let trials = vec![
        trial(0, "all", true, 1.0, full(true)),
        trial(1, "all", false, 1.0, full(false)),
        trial(2, "all", false, 0.2, vec![stage(PICK_STAGES[0], true, 0.1, 1), stage(PICK_STAGES[1], false, 0.1, 1)]),
    ];
    let report = BenchmarkReport::new("picks", Mode::Pick, trials);
    let names: Vec<&str> = report.aggregates.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, PICK_STAGES);
    let attempted: Vec<usize> = report.aggregates.stages.iter().map(|s| s.attempted).collect();
    assert_eq!(attempted, [3, 3, 2, 2]);
    assert_eq!(report.aggregates.stages[1].succeeded, 2);
    assert_eq!(report.aggregates.stages[3].success_rate, 0.5);
    let table = report.table();
    for row in PICK_STAGES.iter().copied().chain(["Complete pipeline", "Runtime [s]"]) {
        assert!(table.contains(row), "missing {row} in\n{table}");
    }
    assert!(table.contains("33%"), "{table}");
}

#[test]
fn mode_table_lists_each_group() {
    let trials = vec![
        trial(0, GROUP_CLOSURE_OFF, true, 0.5, vec![]),
        trial(1, GROUP_CLOSURE_ON, true, 1.5, vec![]),
    ];
    let table = BenchmarkReport::new("lift", Mode::LiftComparison, trials).table();
    assert!(table.contains(GROUP_CLOSURE_OFF) && table.contains(GROUP_CLOSURE_ON));
    assert!(table.contains("Runtime growth with closure: 200%"), "{table}");
}

#[test]
fn empty_and_single_samples() {
    assert_eq!(mean_std(&[]), (0.0, 0.0));
    assert_eq!(mean_std(&[2.5]), (2.5, 0.0));
    let a = Aggregates::compute(&[]);
    assert_eq!(a.overall.trials, 0);
    assert!(a.groups.is_empty() && a.stages.is_empty());
    assert_eq!(a.runtime_growth_percent, None);
}

fn arb_trial() -> impl Strategy<Value = TrialRecord> {
    (
        prop::sample::select(vec![GROUP_CLOSURE_OFF, GROUP_CLOSURE_ON, "yaw +0.25"]),
        any::<bool>(),
        0.0f64..10.0,
        prop::collection::vec((any::<bool>(), 0.0f64..1.0, 1usize..5), 0..4),
        any::<u64>(),
    )
        .prop_map(|(group, success, wall, stages, seed)| {
            let stages = stages
                .into_iter()
                .enumerate()
                .map(|(i, (ok, t, n))| stage(PICK_STAGES[i], ok, t, n))
                .collect();
            let mut t = trial(0, group, success, wall, stages);
            t.seed = seed;
            t
        })
}

proptest! {
    #[test]
    fn aggregates_are_a_function_of_the_records(trials in prop::collection::vec(arb_trial(), 0..20)) {
        let report = BenchmarkReport::new("any", Mode::LiftComparison, trials.clone());
        prop_assert_eq!(&report.aggregates, &Aggregates::compute(&trials));
        let sizes: usize = report.aggregates.groups.values().map(|g| g.trials).sum();
        prop_assert_eq!(sizes, trials.len());
        let wins: usize = report.aggregates.groups.values().map(|g| g.successes).sum();
        prop_assert_eq!(wins, trials.iter().filter(|t| t.success).count());
        for s in &report.aggregates.stages {
            prop_assert!(s.succeeded <= s.attempted && s.attempted <= trials.len());
        }
        let (mean, std) = mean_std(&trials.iter().map(|t| t.wall_time).collect::<Vec<_>>());
        prop_assert_eq!(report.aggregates.overall.runtime_mean, mean);
        prop_assert_eq!(report.aggregates.overall.runtime_std, std);
    }

    #[test]
    fn json_round_trip_is_lossless(trials in prop::collection::vec(arb_trial(), 0..8)) {
        let report = BenchmarkReport::new("any", Mode::Pick, trials);
        let back = BenchmarkReport::from_json(&report.to_json()).unwrap();
        prop_assert_eq!(&back, &report);
    }

    #[test]
    fn removing_timing_touches_nothing_else(trials in prop::collection::vec(arb_trial(), 1..8)) {
        let report = BenchmarkReport::new("any", Mode::Pick, trials);
        let bare = report.without_timing();
        prop_assert_eq!(bare.without_timing(), bare.clone());
        for (a, b) in bare.trials.iter().zip(&report.trials) {
            prop_assert_eq!(a.wall_time, 0.0);
            prop_assert!(a.stages.iter().all(|s| s.time == 0.0));
            prop_assert_eq!((a.success, a.seed, &a.group), (b.success, b.seed, &b.group));
        }
        prop_assert_eq!(bare.aggregates.overall.successes, report.aggregates.overall.successes);
    }
}
