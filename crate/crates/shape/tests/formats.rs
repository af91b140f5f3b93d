use dualarm_core::RigidTransform;
use dualarm_shape::{GraspPoses, PointCloud};
use nalgebra::Vector3;
use proptest::prelude::*;

fn points() -> impl Strategy<Value = Vec<Vector3<f64>>> {
    prop::collection::vec(prop::array::uniform3(-1e3f64..1e3).prop_map(Vector3::from), 4..40)
}

proptest! {
    #[test]
    fn ascii_round_trip_is_exact(pts in points()) {
        let cloud = PointCloud::new(pts).unwrap();
        prop_assert_eq!(PointCloud::parse_xyz(&cloud.to_xyz()).unwrap(), cloud);
    }

    #[test]
    fn binary_round_trip_matches_f32_rounding(pts in points()) {
        let cloud = PointCloud::new(pts).unwrap();
        let back = PointCloud::parse_f32_le(&cloud.to_f32_le()).unwrap();
        for (a, b) in cloud.points().iter().zip(back.points()) {
            for k in 0..3 {
                prop_assert_eq!(b[k], a[k] as f32 as f64);
            }
        }
    }

    #[test]
    fn arbitrary_text_never_panics(text in "\\PC{0,200}") {
        let _ = PointCloud::parse_xyz(&text);
        let _ = GraspPoses::parse(&text);
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        if let Ok(c) = PointCloud::parse_f32_le(&bytes) {
            prop_assert!(c.points().iter().all(|p| p.iter().all(|v| v.is_finite())));
        }
    }

    #[test]
    fn grasp_annotation_round_trip(
        poses in prop::collection::vec((prop::array::uniform3(-1.0f64..1.0), prop::array::uniform3(-1.5f64..1.5)), 0..5),
    ) {
        let list: Vec<RigidTransform> = poses.iter().map(|(x, r)| RigidTransform::from_xyz_rpy(*x, *r)).collect();
        let g = GraspPoses { left: list.clone(), right: list.into_iter().rev().collect() };
        let back = GraspPoses::parse(&g.to_toml()).unwrap();
        prop_assert_eq!(back.left.len(), g.left.len());
        for (a, b) in g.left.iter().chain(&g.right).zip(back.left.iter().chain(&back.right)) {
            prop_assert!((a.translation - b.translation).norm() < 1e-15);
            prop_assert!((a.rotation.matrix() - b.rotation.matrix()).amax() < 1e-12);
        }
    }
}

#[test]
fn short_or_non_numeric_lines_are_rejected() {
    assert!(PointCloud::parse_xyz("0 0 0\n1 1\n0 1 0\n1 0 0\n").is_err());
    assert!(PointCloud::parse_xyz("0 0 0\n1 1 x\n0 1 0\n1 0 0\n").is_err());
    assert!(PointCloud::parse_xyz("0 0 0\n").is_err());
    assert!(PointCloud::parse_f32_le(&[0u8; 13]).is_err());
    let ok = "# header\n0,0,0\n1 0 0\n\n0 1 0\n0 0 1\n";
    assert_eq!(PointCloud::parse_xyz(ok).unwrap().len(), 4);
}
