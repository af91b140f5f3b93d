//! Grasp control poses attached to the canonical model.
//!
//! File format (TOML), poses in the canonical frame, in execution order:
//!
//! ```toml
//! [[left]]
//! xyz = [-0.1, 0.11, 0.1]
//! rpy = [1.5707963267948966, 0.0, -1.5707963267948966]
//! ```

use std::path::Path;

use dualarm_core::formats::PoseEntry;
use dualarm_core::math::nearest_rotation;
use dualarm_core::{Arm, RigidTransform};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::cpd::DeformationField;
use crate::error::{Error, Result};

/// Per-arm pose sequences, pre-grasp first.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraspPoses {
    pub left: Vec<RigidTransform>,
    pub right: Vec<RigidTransform>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraspFile {
    #[serde(default)]
    left: Vec<PoseEntry>,
    #[serde(default)]
    right: Vec<PoseEntry>,
}

impl GraspPoses {
    pub fn get(&self, arm: Arm) -> &[RigidTransform] {
        match arm {
            Arm::Left => &self.left,
            Arm::Right => &self.right,
        }
    }

    pub fn map(&self, mut f: impl FnMut(&RigidTransform) -> RigidTransform) -> Self {
        Self {
            left: self.left.iter().map(&mut f).collect(),
            right: self.right.iter().map(&mut f).collect(),
        }
    }

    /// Every pose expressed through `t`, e.g. from the canonical frame to the world.
    pub fn transformed(&self, t: &RigidTransform) -> Self {
        self.map(|p| t * p)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: GraspFile = toml::from_str(text).map_err(|e| Error::parse("grasp annotation", e))?;
        let convert = |entries: Vec<PoseEntry>| -> Result<Vec<RigidTransform>> {
            entries
                .iter()
                .map(|e| {
                    if e.xyz.iter().chain(&e.rpy).all(|v| v.is_finite()) {
                        Ok(e.to_transform())
                    } else {
                        Err(Error::parse("grasp annotation", "pose values must be finite"))
                    }
                })
                .collect()
        };
        Ok(Self {
            left: convert(file.left)?,
            right: convert(file.right)?,
        })
    }

    pub fn to_toml(&self) -> String {
        let file = GraspFile {
            left: self.left.iter().map(PoseEntry::from_transform).collect(),
            right: self.right.iter().map(PoseEntry::from_transform).collect(),
        };
        toml::to_string(&file).expect("grasp poses serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Offset of the frame points used to re-derive orientation, meters.
pub const FRAME_OFFSET: f64 = 0.01;

/// Warps one pose: the position moves through the field; the orientation
/// follows three frame-offset points and is re-orthonormalized.
pub fn warp_pose(field: &DeformationField, pose: &RigidTransform) -> RigidTransform {
    let p = pose.translation;
    let dp = field.displacement_at(&p);
    let r = pose.rotation.matrix();
    let mut frame = Matrix3::zeros();
    for i in 0..3 {
        let axis: Vector3<f64> = r.column(i).into_owned();
        let moved = field.displacement_at(&(p + axis * FRAME_OFFSET)) - dp;
        frame.set_column(i, &(axis + moved / FRAME_OFFSET));
    }
    let rotation = if (frame.transpose() * frame - Matrix3::identity()).amax() <= 1e-15 && frame.determinant() > 0.0 {
        nalgebra::Rotation3::from_matrix_unchecked(frame)
    } else {
        nearest_rotation(&frame).unwrap_or(pose.rotation)
    };
    RigidTransform::new(rotation, p + dp)
}

/// Warps every canonical control pose, keeping per-arm order.
pub fn warp_grasp_poses(field: &DeformationField, grasps: &GraspPoses) -> GraspPoses {
    grasps.map(|p| warp_pose(field, p))
}
