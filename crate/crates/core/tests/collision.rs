use std::f64::consts::PI;

use dualarm_core::{
    min_clearance, pair_distance, Attachment, CollisionBody, JointConfiguration, PrimitiveShape,
    RigidTransform, RobotModel, Scene,
};
use nalgebra::Vector3;
use proptest::prelude::*;

type V3 = Vector3<f64>;

/// Signed distance from a world point to a posed primitive.
fn point_distance(shape: &PrimitiveShape, pose: &RigidTransform, p: &V3) -> f64 {
    let q = pose.inverse().transform_point(p);
    match shape {
        PrimitiveShape::Sphere { radius } => q.norm() - radius,
        PrimitiveShape::Capsule { radius, a, b } => {
            let ab = b - a;
            let t = if ab.norm_squared() > 0.0 {
                ((q - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (q - (a + ab * t)).norm() - radius
        }
        PrimitiveShape::Box { half_extents } => {
            let d = q.abs() - half_extents;
            let outside = d.map(|v| v.max(0.0)).norm();
            let inside = d.max().min(0.0);
            outside + inside
        }
    }
}

fn orthonormal(u: &V3) -> (V3, V3) {
    let seed = if u.x.abs() < 0.9 { V3::x() } else { V3::y() };
    let a = u.cross(&seed).normalize();
    (a, u.cross(&a))
}

/// Roughly `n` points on the surface of a posed primitive, including every
/// box edge and corner.
fn surface_samples(shape: &PrimitiveShape, pose: &RigidTransform, n: usize) -> Vec<V3> {
    let mut local = Vec::with_capacity(n);
    let sphere = |c: V3, r: f64, count: usize, out: &mut Vec<V3>| {
        let golden = PI * (3.0 - 5f64.sqrt());
        for i in 0..count {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            out.push(c + V3::new(rho * phi.cos(), rho * phi.sin(), z) * r);
        }
    };
    match shape {
        PrimitiveShape::Sphere { radius } => sphere(V3::zeros(), *radius, n, &mut local),
        PrimitiveShape::Capsule { radius, a, b } => {
            let len = (b - a).norm();
            let cap_area = 4.0 * PI * radius * radius;
            let side_area = 2.0 * PI * radius * len;
            let caps = ((n as f64) * cap_area / (cap_area + side_area)) as usize;
            sphere(*a, *radius, caps / 2, &mut local);
            sphere(*b, *radius, caps / 2, &mut local);
            let side = n - caps;
            if len > 0.0 {
                let u = (b - a) / len;
                let (e1, e2) = orthonormal(&u);
                let rings = ((side as f64 * len / (2.0 * PI * radius)).sqrt())
                    .ceil()
                    .max(2.0) as usize;
                let around = (side / rings).max(3);
                for i in 0..rings {
                    let t = i as f64 / (rings - 1) as f64;
                    for j in 0..around {
                        let psi = 2.0 * PI * j as f64 / around as f64;
                        local.push(a + (b - a) * t + (e1 * psi.cos() + e2 * psi.sin()) * *radius);
                    }
                }
            }
        }
        PrimitiveShape::Box { half_extents: h } => {
            let per_face = ((n as f64 / 6.0).sqrt().ceil() as usize).max(2);
            for axis in 0..3 {
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                for sign in [-1.0, 1.0] {
                    for i in 0..per_face {
                        for j in 0..per_face {
                            let mut p = V3::zeros();
                            p[axis] = sign * h[axis];
                            p[u] = -h[u] + 2.0 * h[u] * i as f64 / (per_face - 1) as f64;
                            p[v] = -h[v] + 2.0 * h[v] * j as f64 / (per_face - 1) as f64;
                            local.push(p);
                        }
                    }
                }
            }
        }
    }
    local.iter().map(|p| pose.transform_point(p)).collect()
}

/// Dense sampling oracle: every sample of one surface against the exact
/// signed distance of the other, in both directions.
fn oracle(
    a: &PrimitiveShape,
    pa: &RigidTransform,
    b: &PrimitiveShape,
    pb: &RigidTransform,
    n: usize,
) -> f64 {
    let ab = surface_samples(a, pa, n)
        .iter()
        .map(|p| point_distance(b, pb, p))
        .fold(f64::INFINITY, f64::min);
    let ba = surface_samples(b, pb, n)
        .iter()
        .map(|p| point_distance(a, pa, p))
        .fold(f64::INFINITY, f64::min);
    ab.min(ba)
}

fn pose() -> impl Strategy<Value = RigidTransform> {
    (
        prop::array::uniform3(-0.4f64..0.4),
        prop::array::uniform3(-PI..PI),
    )
        .prop_map(|(xyz, rpy)| RigidTransform::from_xyz_rpy(xyz, rpy))
}

fn sphere() -> impl Strategy<Value = PrimitiveShape> {
    (0.02f64..0.2).prop_map(|radius| PrimitiveShape::Sphere { radius })
}

fn capsule() -> impl Strategy<Value = PrimitiveShape> {
    (
        0.02f64..0.1,
        prop::array::uniform3(-0.15f64..0.15),
        prop::array::uniform3(-0.15f64..0.15),
    )
        .prop_map(|(radius, a, b)| PrimitiveShape::Capsule {
            radius,
            a: V3::from(a),
            b: V3::from(b),
        })
}

fn cuboid() -> impl Strategy<Value = PrimitiveShape> {
    prop::array::uniform3(0.03f64..0.2).prop_map(|h| PrimitiveShape::Box {
        half_extents: V3::from(h),
    })
}

fn any_shape() -> impl Strategy<Value = PrimitiveShape> {
    prop_oneof![sphere(), capsule(), cuboid()]
}

#[test]
fn unit_spheres() {
    let s = PrimitiveShape::Sphere { radius: 1.0 };
    let far = RigidTransform::from_translation(V3::new(3.0, 0.0, 0.0));
    assert_eq!(
        pair_distance(&s, &RigidTransform::identity(), &s, &far).unwrap(),
        1.0
    );
    assert_eq!(
        pair_distance(
            &s,
            &RigidTransform::identity(),
            &s,
            &RigidTransform::identity()
        )
        .unwrap(),
        -2.0
    );
}

fn world(name: &str, shape: PrimitiveShape, at: V3) -> CollisionBody {
    CollisionBody::new(
        name,
        shape,
        Attachment::World,
        RigidTransform::from_translation(at),
    )
}

#[test]
fn arms_spread_wide_clear_each_other() {
    let model = RobotModel::desk_scale();
    let mut q = vec![0.0; 14];
    q[1] = 1.0;
    q[8] = 1.0;
    let c = min_clearance(&model, &Scene::empty(), &JointConfiguration(q)).unwrap();
    assert!(c.distance > 0.0);
    let (a, b) = c.pair.unwrap();
    let robot: Vec<&str> = model.bodies().iter().map(|b| b.name.as_str()).collect();
    assert!(robot.contains(&a.as_str()) && robot.contains(&b.as_str()));
}

#[test]
fn table_through_the_forearm_is_reported_with_its_depth() {
    // At home the left forearm axis runs along x = 0, y = 0.25 from z = -0.39
    // to -0.61 with radius 0.045; the slab's near face sits at x = 0.01.
    let model = RobotModel::desk_scale();
    let slab = world(
        "table",
        PrimitiveShape::Box {
            half_extents: V3::new(0.04, 0.1, 0.05),
        },
        V3::new(0.05, 0.25, -0.5),
    );
    let scene = Scene::new(vec![slab], []).unwrap();
    let c = min_clearance(&model, &scene, &JointConfiguration::zeros(14)).unwrap();
    assert!(
        (c.distance - (0.01 - 0.045)).abs() < 1e-12,
        "{}",
        c.distance
    );
    assert_eq!(c.pair, Some(("l_forearm".to_owned(), "table".to_owned())));
}

#[test]
fn sphere_below_the_hand_matches_the_analytic_gap() {
    // Left hand capsule ends at (0, 0.25, -0.77) with radius 0.04 at home.
    let model = RobotModel::desk_scale();
    let ball = world(
        "ball",
        PrimitiveShape::Sphere { radius: 0.05 },
        V3::new(0.0, 0.25, -0.9),
    );
    let scene = Scene::new(vec![ball], []).unwrap();
    let c = min_clearance(&model, &scene, &JointConfiguration::zeros(14)).unwrap();
    assert!((c.distance - 0.04).abs() < 1e-9, "{}", c.distance);
    assert_eq!(c.pair, Some(("l_hand".to_owned(), "ball".to_owned())));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn capsule_box_matches_sampling_oracle(a in capsule(), pa in pose(), b in cuboid(), pb in pose()) {
        let d = pair_distance(&a, &pa, &b, &pb).unwrap();
        let o = oracle(&a, &pa, &b, &pb, 10_000);
        if o > 1e-3 {
            prop_assert!((d - o).abs() <= 1e-3, "distance {} oracle {}", d, o);
        } else if o < -1e-3 {
            prop_assert!(d < 0.0, "oracle sees overlap {} but distance is {}", o, d);
        }
        prop_assert!(d <= o.max(0.0) + 1e-6, "distance {} exceeds oracle {}", d, o);
    }

    #[test]
    fn clearance_is_symmetric(a in any_shape(), pa in pose(), b in any_shape(), pb in pose()) {
        let ab = pair_distance(&a, &pa, &b, &pb).unwrap();
        let ba = pair_distance(&b, &pb, &a, &pa).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12);
    }

    #[test]
    fn clearance_is_rigidly_invariant(a in any_shape(), pa in pose(), b in any_shape(), pb in pose(), g in pose()) {
        let d = pair_distance(&a, &pa, &b, &pb).unwrap();
        let moved = pair_distance(&a, &(g * pa), &b, &(g * pb)).unwrap();
        prop_assert!((d - moved).abs() <= 1e-9, "{} vs {}", d, moved);
    }

    #[test]
    fn clearance_never_exceeds_the_oracle(a in any_shape(), pa in pose(), b in any_shape(), pb in pose()) {
        let d = pair_distance(&a, &pa, &b, &pb).unwrap();
        let o = oracle(&a, &pa, &b, &pb, 4_000);
        // Sampled separations only overestimate; overlap shows up as a negative oracle.
        prop_assert!(d <= o.max(0.0) + 1e-6, "distance {} exceeds oracle {}", d, o);
        if o < -1e-3 {
            prop_assert!(d < 0.0);
        }
    }
}
