mod common;

use common::{canonical, instance};
use dualarm_shape::cloud::mean_nearest_distance;
use dualarm_shape::synthetic::{add_noise, occlude, to_cloud, CanParams};
use dualarm_shape::{cpd_register, CpdParams, PointCloud};
use nalgebra::Vector3;
use proptest::prelude::*;

#[test]
fn self_registration_is_a_fixed_point() {
    let c = canonical();
    let f = cpd_register(&c, &c, &CpdParams::default()).unwrap();
    let max = f.displacements().iter().map(|d| d.norm()).fold(0.0, f64::max);
    assert!(max < 1e-6, "max displacement {max}");
}

#[test]
fn translated_target_gives_a_uniform_field() {
    let c = canonical();
    let t = Vector3::new(0.03, -0.02, 0.01);
    let f = cpd_register(&c, &c.translated(&t), &CpdParams::default()).unwrap();
    for d in f.displacements() {
        assert!((d - t).norm() < 1e-6);
    }
    assert!((f.displacement_at(&Vector3::new(0.5, 0.5, -0.2)) - t).norm() < 1e-6);
}

#[test]
fn scaled_target_scales_the_whole_space() {
    let c = canonical();
    let scaled = PointCloud::new(c.points().iter().map(|p| p * 1.2).collect()).unwrap();
    let f = cpd_register(&c, &scaled, &CpdParams::default()).unwrap();
    for q in [Vector3::new(0.0, 0.105, 0.1), Vector3::new(0.2, -0.1, 0.3)] {
        assert!((f.warp_point(&q) - q * 1.2).norm() < 1e-6);
    }
}

#[test]
fn occluded_noisy_target_is_still_recovered() {
    let c = canonical();
    let params = CanParams::random(21);
    let dense = to_cloud(&params.sample(4000, 1)).unwrap();
    let clean = to_cloud(&params.sample(common::POINTS, 2)).unwrap();
    let full = cpd_register(&c, &clean, &CpdParams::default()).unwrap();
    let target = add_noise(&occlude(&clean, 0.2, 3).unwrap(), 0.001, 4).unwrap();
    let partial = cpd_register(&c, &target, &CpdParams::default()).unwrap();
    let err_full = mean_nearest_distance(&full.warped_canonical(), dense.points());
    let err_partial = mean_nearest_distance(&partial.warped_canonical(), dense.points());
    let baseline = mean_nearest_distance(c.points(), dense.points());
    // Exact surface points still sit some way from the nearest dense sample.
    let floor = mean_nearest_distance(to_cloud(&params.sample(common::POINTS, 9)).unwrap().points(), dense.points());
    assert!(err_full < floor + 0.0015, "full-view surface error {err_full}, floor {floor}");
    assert!(err_partial < floor + 0.003, "occluded surface error {err_partial}, floor {floor}");
    assert!(err_partial - floor < 0.75 * (baseline - floor), "barely better than the undeformed canonical ({baseline})");
}

#[test]
fn invalid_parameters_are_rejected() {
    let c = canonical();
    for p in [
        CpdParams { beta: 0.0, ..CpdParams::default() },
        CpdParams { lambda: -1.0, ..CpdParams::default() },
        CpdParams { omega: 1.0, ..CpdParams::default() },
        CpdParams { max_iterations: 0, ..CpdParams::default() },
    ] {
        assert!(cpd_register(&c, &c, &p).is_err());
    }
    let line = PointCloud::new((0..10).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect()).unwrap();
    assert!(cpd_register(&line, &c, &CpdParams::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn kernel_extension_reproduces_stored_displacements(seed in 1u64..1000) {
        let c = canonical();
        let f = cpd_register(&c, &instance(seed), &CpdParams::default()).unwrap();
        for (p, d) in c.points().iter().zip(f.displacements()) {
            prop_assert!((f.displacement_at(p) - d).norm() < 1e-9);
        }
    }
}
