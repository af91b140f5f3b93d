//! Rigid transforms and roll/pitch/yaw helpers shared by every module.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

/// Below this `|cos(pitch)|` the roll and yaw angles are no longer separable.
pub const GIMBAL_EPS: f64 = 1e-6;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Absolute wrapped difference between two angles, in `[0, pi]`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Roll/pitch/yaw angles of a rotation `Rz(yaw) * Ry(pitch) * Rx(roll)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rpy {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    /// Set when pitch is within [`GIMBAL_EPS`] of +-pi/2; roll is then pinned to 0.
    pub gimbal_degenerate: bool,
}

impl Rpy {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self {
            roll,
            pitch,
            yaw,
            gimbal_degenerate: false,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.roll, self.pitch, self.yaw]
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.roll, self.pitch, self.yaw)
    }

    pub fn from_rotation(r: &Rotation3<f64>) -> Self {
        let m = r.matrix();
        let sp = (-m[(2, 0)]).clamp(-1.0, 1.0);
        let pitch = sp.asin();
        let cp = (m[(2, 1)].powi(2) + m[(2, 2)].powi(2)).sqrt();
        if cp < GIMBAL_EPS {
            let yaw = (-m[(0, 1)]).atan2(m[(1, 1)]);
            return Self {
                roll: 0.0,
                pitch: wrap_angle(pitch),
                yaw: wrap_angle(yaw),
                gimbal_degenerate: true,
            };
        }
        Self {
            roll: wrap_angle(m[(2, 1)].atan2(m[(2, 2)])),
            pitch: wrap_angle(pitch),
            yaw: wrap_angle(m[(1, 0)].atan2(m[(0, 0)])),
            gimbal_degenerate: false,
        }
    }

    pub fn to_rotation(self) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.roll, self.pitch, self.yaw)
    }

    /// Componentwise wrapped absolute difference.
    pub fn abs_diff(self, other: Rpy) -> Vector3<f64> {
        Vector3::new(
            angle_distance(self.roll, other.roll),
            angle_distance(self.pitch, other.pitch),
            angle_distance(self.yaw, other.yaw),
        )
    }
}

/// A proper rigid motion: rotation followed by translation, in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(Rotation3::identity(), translation)
    }

    pub fn from_rotation(rotation: Rotation3<f64>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        Self::new(
            Rotation3::from_euler_angles(rpy[0], rpy[1], rpy[2]),
            Vector3::from(xyz),
        )
    }

    pub fn about_axis(axis: &Unit<Vector3<f64>>, angle: f64) -> Self {
        Self::from_rotation(Rotation3::from_axis_angle(axis, angle))
    }

    pub fn rpy(&self) -> Rpy {
        Rpy::from_rotation(&self.rotation)
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        Self::new(inv, -(inv * self.translation))
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self^-1 * other`: the pose of `other` expressed in this frame.
    pub fn relative_to(&self, other: &RigidTransform) -> RigidTransform {
        self.inverse() * *other
    }

    /// True when the rotation is orthonormal with determinant +1 within `tol`.
    pub fn is_proper(&self, tol: f64) -> bool {
        let m = self.rotation.matrix();
        let err = (m.transpose() * m - Matrix3::identity()).abs().max();
        err <= tol && (m.determinant() - 1.0).abs() <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.matrix().iter().all(|v| v.is_finite())
            && self.translation.iter().all(|v| v.is_finite())
    }
}

impl Mul for RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * rhs.rotation,
            self.rotation * rhs.translation + self.translation,
        )
    }
}

impl Mul<&RigidTransform> for &RigidTransform {
    type Output = RigidTransform;

    fn mul(self, rhs: &RigidTransform) -> RigidTransform {
        *self * *rhs
    }
}

/// Nearest rotation to `m` in the Frobenius sense (polar decomposition).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Option<Rotation3<f64>> {
    let svd = m.svd(true, true);
    let u = svd.u?;
    let v_t = svd.v_t?;
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = u * d * v_t;
    r.iter()
        .all(|v| v.is_finite())
        .then(|| Rotation3::from_matrix_unchecked(r))
}
