#![allow(dead_code)]

use dualarm_shape::synthetic::{to_cloud, CanParams};
use dualarm_shape::{build_shape_space, CpdParams, PointCloud, ShapeSpace};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Rotation3};

pub const POINTS: usize = 250;

pub fn canonical() -> PointCloud {
    to_cloud(&CanParams::default().sample(POINTS, 0)).unwrap()
}

pub fn instance(i: u64) -> PointCloud {
    to_cloud(&CanParams::random(i).sample(POINTS, 100 + i)).unwrap()
}

pub fn training(n: u64) -> Vec<PointCloud> {
    (1..=n).map(instance).collect()
}

/// Eight deformed cans, eight components; built once per test binary.
pub fn space() -> &'static ShapeSpace {
    static SPACE: OnceLock<ShapeSpace> = OnceLock::new();
    SPACE.get_or_init(|| {
        build_shape_space(&canonical(), &training(8), 8, &CpdParams::default(), CanParams::default().grasps()).unwrap()
    })
}

/// Largest principal angle between the column spans of two orthonormal bases.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    // sin of the largest angle is the spectral norm of b's residual off span(a).
    let residual = b - a * (a.transpose() * b);
    residual.svd(false, false).singular_values.max().min(1.0).asin()
}

/// Space whose training set includes the canonical model, so the zero
/// field is representable.
pub fn space_with_canonical() -> &'static ShapeSpace {
    static SPACE: OnceLock<ShapeSpace> = OnceLock::new();
    SPACE.get_or_init(|| {
        let mut clouds = vec![canonical()];
        clouds.extend(training(7));
        build_shape_space(&canonical(), &clouds, 8, &CpdParams::default(), CanParams::default().grasps()).unwrap()
    })
}

/// Angle between two rotations from the chordal distance; stays accurate
/// near zero where `acos` of the trace does not.
pub fn rotation_angle(a: &Rotation3<f64>, b: &Rotation3<f64>) -> f64 {
    let chord = (a.matrix() - b.matrix()).norm();
    2.0 * (chord / (2.0 * 2f64.sqrt())).min(1.0).asin()
}

pub fn relative_error(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
