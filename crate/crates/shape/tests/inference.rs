mod common;

use common::{relative_error, rotation_angle, space, space_with_canonical};
use dualarm_core::RigidTransform;
use dualarm_shape::cloud::mean_nearest_distance;
use dualarm_shape::synthetic::{add_noise, occlude};
use dualarm_shape::{
    estimate_initial_pose, estimate_upright_pose, infer_latent, DeformationField, InferenceParams, LatentDescriptor, PointCloud, ShapeSpace,
    Weighting,
};
use nalgebra::{DVector, Unit, Vector3};
use proptest::prelude::*;

fn z_axis() -> Unit<Vector3<f64>> {
    Unit::new_normalize(Vector3::z())
}

/// A latent point about one standard deviation out along alternating directions.
fn target_coordinates(space: &ShapeSpace) -> DVector<f64> {
    DVector::from_iterator(
        space.dim(),
        space
            .variances()
            .iter()
            .enumerate()
            .map(|(l, v)| if l % 2 == 0 { 0.8 } else { -0.6 } * v.sqrt()),
    )
}

fn synthesize(space: &ShapeSpace, z: &DVector<f64>, pose: RigidTransform) -> PointCloud {
    space.reconstruct(&LatentDescriptor::new(z.clone(), pose)).unwrap().0
}

#[test]
fn canonical_observation_keeps_identity_alignment() {
    // The canonical model's own field is zero, which lies in the space only
    // when the canonical is a training instance. Its coordinates are the
    // projection of the zero field, shrunk slightly by the regularizer.
    let space = space_with_canonical();
    let params = InferenceParams::default();
    let latent = infer_latent(space, space.canonical(), &RigidTransform::identity(), &params).unwrap();
    let exact = space.project(&DeformationField::zero(space.kernel().clone())).unwrap();
    assert!(latent.coordinates.norm() <= exact.norm() * (1.0 + 1e-9));
    assert!(relative_error(&latent.coordinates, &exact) < 0.05);
    assert!(latent.alignment.translation.norm() < 1e-3);
    assert!(latent.alignment.rotation.angle() < 1e-3);
}

#[test]
fn noise_free_synthesis_is_inverted() {
    let space = space();
    let z = target_coordinates(space);
    let observed = synthesize(space, &z, RigidTransform::identity());
    let latent = infer_latent(space, &observed, &RigidTransform::identity(), &InferenceParams::default()).unwrap();
    let err = relative_error(&latent.coordinates, &z);
    assert!(err < 0.05, "coordinate error {err}");
    assert!(latent.converged);
}

#[test]
fn occluded_noisy_synthesis_is_reconstructed_within_5mm() {
    let space = space();
    let z = target_coordinates(space);
    let clean = synthesize(space, &z, RigidTransform::identity());
    let observed = add_noise(&occlude(&clean, 0.2, 5).unwrap(), 0.001, 6).unwrap();
    let latent = infer_latent(space, &observed, &RigidTransform::identity(), &InferenceParams::default()).unwrap();
    let (model, _) = space.reconstruct(&latent).unwrap();
    let dist = mean_nearest_distance(model.points(), clean.points());
    assert!(dist < 0.005, "mean distance {dist}");
}

#[test]
fn yaw_misaligned_starts_reach_the_aligned_residual() {
    let space = space();
    let z = target_coordinates(space);
    let truth = RigidTransform::from_xyz_rpy([0.4, 0.05, -0.4], [0.0, 0.0, 0.3]);
    let observed = add_noise(&occlude(&synthesize(space, &z, truth), 0.2, 7).unwrap(), 0.001, 8).unwrap();
    let params = InferenceParams::default();
    let aligned = infer_latent(space, &observed, &truth, &params).unwrap().residual;
    let mut ok = 0;
    for k in 0..20 {
        let yaw = -0.2 + 0.4 * k as f64 / 19.0;
        let init = truth * RigidTransform::about_axis(&z_axis(), yaw);
        if infer_latent(space, &observed, &init, &params).unwrap().residual < 2.0 * aligned {
            ok += 1;
        }
    }
    assert!(ok >= 16, "{ok}/20 yaw starts succeeded");
}

#[test]
fn iteration_cap_returns_a_flagged_descriptor() {
    let space = space();
    let observed = synthesize(space, &target_coordinates(space), RigidTransform::from_xyz_rpy([0.02, 0.0, 0.0], [0.0, 0.0, 0.1]));
    let params = InferenceParams {
        max_outer_iterations: 1,
        inner_steps: 1,
        yaw_restarts: vec![0.0],
        ..InferenceParams::default()
    };
    let latent = infer_latent(space, &observed, &RigidTransform::identity(), &params).unwrap();
    assert!(!latent.converged);
    assert_eq!(latent.iterations, 1);
    assert!(latent.residual.is_finite());
}

#[test]
fn uniform_and_explicit_weights_are_accepted() {
    let space = space();
    let observed = synthesize(space, &target_coordinates(space), RigidTransform::identity());
    let n = observed.len();
    let weighted = observed.clone().with_weights(vec![1.0; n]).unwrap();
    let params = InferenceParams { weighting: Weighting::Uniform, ..InferenceParams::default() };
    let a = infer_latent(space, &observed, &RigidTransform::identity(), &params).unwrap();
    let b = infer_latent(space, &weighted, &RigidTransform::identity(), &InferenceParams::default()).unwrap();
    assert_eq!(a.coordinates, b.coordinates);
}

#[test]
fn invalid_inputs_are_rejected() {
    let space = space();
    let c = space.canonical();
    let bad = [
        InferenceParams { regularization: -1.0, ..InferenceParams::default() },
        InferenceParams { yaw_restarts: vec![], ..InferenceParams::default() },
        InferenceParams { max_outer_iterations: 0, ..InferenceParams::default() },
    ];
    for p in bad {
        assert!(infer_latent(space, c, &RigidTransform::identity(), &p).is_err());
    }
    let mut skewed = RigidTransform::identity();
    skewed.translation.x = f64::NAN;
    assert!(infer_latent(space, c, &skewed, &InferenceParams::default()).is_err());
}

#[test]
fn pose_of_a_translated_canonical_is_the_translation() {
    let space = space();
    let t = Vector3::new(0.4, -0.1, 0.25);
    let pose = estimate_initial_pose(&space.canonical().translated(&t), space).unwrap();
    assert!((pose.translation - t).norm() < 1e-9);
    assert!(pose.rotation.angle() < 1e-3);
}

#[test]
fn pose_recovers_a_yaw_rotation() {
    let space = space();
    let r = RigidTransform::about_axis(&z_axis(), 0.3);
    let pose = estimate_initial_pose(&space.canonical().transformed(&r), space).unwrap();
    assert!((pose.rpy().yaw - 0.3).abs() < 0.02, "yaw {}", pose.rpy().yaw);
    assert!(pose.translation.norm() < 1e-3);
}

#[test]
fn degenerate_clouds_have_no_pose() {
    let space = space();
    let line = PointCloud::new((0..20).map(|i| Vector3::new(0.01 * i as f64, 0.0, 0.0)).collect()).unwrap();
    assert!(estimate_initial_pose(&line, space).is_err());
    // Octahedron vertices: isotropic second moments.
    let mut octa = Vec::new();
    for k in 0..3 {
        for s in [-1.0, 1.0] {
            let mut v = Vector3::zeros();
            v[k] = s;
            octa.push(v);
        }
    }
    assert!(estimate_initial_pose(&PointCloud::new(octa).unwrap(), space).is_err());
}

#[test]
fn upright_pose_finds_the_turn_about_the_vertical() {
    let space = space();
    for yaw in [-2.5, -0.3, 0.0, 0.45, 1.9] {
        let truth = RigidTransform::from_xyz_rpy([0.6, -0.1, -0.45], [0.0, 0.0, yaw]);
        let full = space.canonical().transformed(&truth);
        let pose = estimate_upright_pose(&full, space, &Vector3::z()).unwrap();
        // Candidates are ten degrees apart, so the nearest is within five.
        assert!(rotation_angle(&pose.rotation, &truth.rotation) <= 5f64.to_radians() + 1e-9, "yaw {yaw}");
        // Only the turn is searched: the canonical vertical stays vertical.
        assert!((pose.rotation * Vector3::z() - Vector3::z()).norm() < 1e-12);
        assert!((pose.translation - truth.translation).norm() < 0.01);
        // An occluded view shifts the centroid; the estimate stays a usable start.
        let partial = occlude(&full, 0.2, 3).unwrap();
        let pose = estimate_upright_pose(&partial, space, &Vector3::z()).unwrap();
        assert!(rotation_angle(&pose.rotation, &truth.rotation) < 0.3, "occluded yaw {yaw}");
        assert!((pose.translation - truth.translation).norm() < 0.05);
    }
}

#[test]
fn upright_pose_follows_a_tilted_up_direction() {
    let space = space();
    let up = Vector3::new(1.0, 1.0, 0.0).normalize();
    let pose = estimate_upright_pose(&space.canonical().translated(&Vector3::new(0.2, 0.0, 0.0)), space, &up).unwrap();
    assert!((pose.rotation * Vector3::z() - up).norm() < 1e-12);
    assert!(estimate_upright_pose(space.canonical(), space, &Vector3::zeros()).is_err());
    assert!(estimate_upright_pose(space.canonical(), space, &Vector3::new(f64::NAN, 0.0, 1.0)).is_err());
}

#[test]
fn axis_restricted_inference_only_turns_about_the_axis() {
    let space = space();
    let z = target_coordinates(space);
    let truth = RigidTransform::from_xyz_rpy([0.5, 0.0, -0.4], [0.0, 0.0, 0.35]);
    let observed = add_noise(&synthesize(space, &z, truth), 0.001, 4).unwrap();
    let init = truth * RigidTransform::about_axis(&z_axis(), -0.1);
    let params = InferenceParams {
        rotation_axis: Some([0.0, 0.0, 1.0]),
        ..InferenceParams::default()
    };
    let latent = infer_latent(space, &observed, &init, &params).unwrap();
    // The change from the initial rotation is a pure turn about z.
    let turn = latent.alignment.rotation * init.rotation.inverse();
    assert!((turn * Vector3::z() - Vector3::z()).norm() < 1e-9);
    assert!(rotation_angle(&latent.alignment.rotation, &truth.rotation) < 0.03);
    assert!((latent.alignment.translation - truth.translation).norm() < 0.01);
    assert!(relative_error(&latent.coordinates, &z) < 0.2);
}

#[test]
fn rotation_axis_must_be_usable() {
    for axis in [[0.0; 3], [f64::NAN, 0.0, 1.0]] {
        let params = InferenceParams {
            rotation_axis: Some(axis),
            ..InferenceParams::default()
        };
        assert!(params.validate().is_err());
        let space = space();
        assert!(infer_latent(space, space.canonical(), &RigidTransform::identity(), &params).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn objective_never_increases(
        scale in prop::collection::vec(-1.0f64..1.0, 8),
        yaw in -0.2f64..0.2,
        dx in -0.02f64..0.02,
        seed in 0u64..1000,
    ) {
        let space = space();
        let z = DVector::from_iterator(8, space.variances().iter().zip(&scale).map(|(v, s)| v.sqrt() * s));
        let clean = synthesize(space, &z, RigidTransform::identity());
        let observed = add_noise(&occlude(&clean, 0.2, seed).unwrap(), 0.001, seed).unwrap();
        let init = RigidTransform::from_xyz_rpy([dx, 0.0, 0.0], [0.0, 0.0, yaw]);
        let latent = infer_latent(space, &observed, &init, &InferenceParams::default()).unwrap();
        prop_assert!(!latent.objective_trace.is_empty());
        for w in latent.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0], "objective rose from {} to {}", w[0], w[1]);
        }
    }

    #[test]
    fn inference_is_equivariant_under_rigid_motion(
        xyz in prop::array::uniform3(-0.5f64..0.5),
        rpy in prop::array::uniform3(-3.0f64..3.0),
    ) {
        let space = space();
        let z = target_coordinates(space);
        let observed = add_noise(&synthesize(space, &z, RigidTransform::identity()), 0.001, 3).unwrap();
        let params = InferenceParams::default();
        let base = infer_latent(space, &observed, &RigidTransform::identity(), &params).unwrap();
        let g = RigidTransform::from_xyz_rpy(xyz, rpy);
        let moved = infer_latent(space, &observed.transformed(&g), &g, &params).unwrap();
        prop_assert!((&moved.coordinates - &base.coordinates).norm() < 1e-3);
        let expected = g * base.alignment;
        prop_assert!((moved.alignment.translation - expected.translation).norm() < 1e-3);
        prop_assert!(rotation_angle(&moved.alignment.rotation, &expected.rotation) < 1e-3);
    }
}
