mod common;

use common::shipped;
use dualarm_core::{
    Arm, Attachment, CollisionBody, JointConfiguration, PrimitiveShape, RigidTransform, RobotModel, Scene,
};
use dualarm_pipeline::ik::pose_error;
use dualarm_pipeline::{resolve_goal_configuration, resolve_with, Error, IkParams};
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;

fn hands(model: &RobotModel, q: &JointConfiguration) -> (RigidTransform, RigidTransform) {
    (
        model.eef_pose(q, Arm::Left).unwrap(),
        model.eef_pose(q, Arm::Right).unwrap(),
    )
}

/// Rotation angle from the chordal distance.
fn angle_between(a: &Rotation3<f64>, b: &Rotation3<f64>) -> f64 {
    2.0 * ((a.matrix() - b.matrix()).norm() / (2.0 * 2f64.sqrt())).min(1.0).asin()
}

/// Position and angle residual of the worse hand.
fn residual(model: &RobotModel, q: &JointConfiguration, l: &RigidTransform, r: &RigidTransform) -> (f64, f64) {
    let (ql, qr) = hands(model, q);
    (
        (l.translation - ql.translation).norm().max((r.translation - qr.translation).norm()),
        angle_between(&l.rotation, &ql.rotation).max(angle_between(&r.rotation, &qr.rotation)),
    )
}

#[test]
fn current_hand_poses_are_a_fixed_point() {
    let s = shipped("lift.toml");
    let (l, r) = hands(&s.model, &s.start);
    let out = resolve_with(&s.model, &s.scene, &l, &r, &s.start, &IkParams::default()).unwrap();
    assert_eq!(out.attempts, 1);
    assert!(out.configuration.distance(&s.start) < 1e-6);
}

#[test]
fn five_centimeters_forward_is_reached() {
    let s = shipped("lift.toml");
    let (mut l, mut r) = hands(&s.model, &s.start);
    let shift = Vector3::new(0.05, 0.0, 0.0);
    l.translation += shift;
    r.translation += shift;
    let q = resolve_goal_configuration(&s.model, &s.scene, &l, &r, &s.start).unwrap();
    let (p, a) = residual(&s.model, &q, &l, &r);
    let params = IkParams::default();
    assert!(p <= params.position_tolerance && a <= params.angle_tolerance, "{p} m, {a} rad");
    s.model.check_configuration(&q).unwrap();
    for (v, lim) in q.iter().zip(s.model.limits()) {
        assert!(lim.violation(*v) == 0.0);
    }
}

#[test]
fn unreachable_target_is_a_resolution_error() {
    let s = shipped("lift.toml");
    let (l, mut r) = hands(&s.model, &s.start);
    r.translation = Vector3::new(10.0, 0.0, 0.0);
    let params = IkParams {
        restarts: 2,
        ..IkParams::default()
    };
    match resolve_with(&s.model, &s.scene, &l, &r, &s.start, &params) {
        Err(Error::Resolution(msg)) => assert!(msg.contains("3 attempts"), "{msg}"),
        other => panic!("expected a resolution error, got {other:?}"),
    }
}

#[test]
fn solutions_inside_obstacles_are_refused() {
    let s = shipped("lift.toml");
    let (l, r) = hands(&s.model, &s.start);
    let ball = CollisionBody::new(
        "ball",
        PrimitiveShape::Sphere { radius: 0.03 },
        Attachment::World,
        RigidTransform::from_translation(l.translation),
    );
    let scene = Scene::new(vec![ball], []).unwrap();
    let params = IkParams {
        restarts: 3,
        ..IkParams::default()
    };
    match resolve_with(&s.model, &scene, &l, &r, &s.start, &params) {
        Err(Error::Resolution(msg)) => assert!(msg.contains("collision"), "{msg}"),
        other => panic!("expected a resolution error, got {other:?}"),
    }
}

#[test]
fn invalid_seed_is_rejected() {
    let s = shipped("lift.toml");
    let (l, r) = hands(&s.model, &s.start);
    let short = JointConfiguration::zeros(3);
    assert!(resolve_goal_configuration(&s.model, &s.scene, &l, &r, &short).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn accepted_solutions_meet_the_tolerances(
        delta in prop::collection::vec(-0.3f64..0.3, 14),
        seed in 0u64..1000,
    ) {
        let s = shipped("lift.toml");
        let limits = s.model.limits();
        let target_q = JointConfiguration(
            s.start.iter().zip(&delta).zip(&limits).map(|((v, d), l)| l.clamp(v + d)).collect(),
        );
        let (l, r) = hands(&s.model, &target_q);
        let params = IkParams { seed, ..IkParams::default() };
        let a = resolve_with(&s.model, &Scene::empty(), &l, &r, &s.start, &params);
        let b = resolve_with(&s.model, &Scene::empty(), &l, &r, &s.start, &params);
        prop_assert_eq!(a.is_ok(), b.is_ok());
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert_eq!(&a, &b);
            let (p, ang) = residual(&s.model, &a.configuration, &l, &r);
            prop_assert!(p <= params.position_tolerance && ang <= params.angle_tolerance, "{} m {} rad after {} attempts", p, ang, a.attempts);
            prop_assert!(a.attempts >= 1 && a.attempts <= params.restarts + 1);
        }
    }

    #[test]
    fn pose_error_inverts_a_known_rotation(
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in 0.0f64..3.1,
        xyz in prop::array::uniform3(-1.0f64..1.0),
        rpy in prop::array::uniform3(-3.0f64..3.0),
    ) {
        let axis = Vector3::from(axis);
        prop_assume!(axis.norm() > 1e-3);
        let w = axis.normalize() * angle;
        let current = RigidTransform::from_xyz_rpy(xyz, rpy);
        let mut target = current;
        target.rotation = Rotation3::from_scaled_axis(w) * current.rotation;
        target.translation += Vector3::new(0.1, -0.2, 0.3);
        let (dp, dr) = pose_error(&target, &current);
        prop_assert!((dp - Vector3::new(0.1, -0.2, 0.3)).norm() < 1e-12);
        prop_assert!((dr - w).norm() < 1e-9, "{:?} vs {:?}", dr, w);
        let (_, zero) = pose_error(&current, &current);
        prop_assert!(zero.iter().all(|v| v.is_finite()) && zero.norm() < 1e-7);
    }
}
