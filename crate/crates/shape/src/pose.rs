//! Coarse object pose from principal axes.

use dualarm_core::RigidTransform;
use nalgebra::{Matrix3, Rotation3, SymmetricEigen, Unit, Vector3};

use crate::cloud::{mean_nearest_distance, PointCloud};
use crate::error::{Error, Result};
use crate::space::ShapeSpace;

/// Spread ratio below which the second principal axis counts as absent.
const COLLINEAR_RATIO: f64 = 1e-9;
/// Relative spread between the largest and smallest eigenvalue below which
/// no axis is distinguishable.
const ISOTROPIC_RATIO: f64 = 0.05;

struct Frame {
    centroid: Vector3<f64>,
    axes: Matrix3<f64>,
}

fn principal_frame(cloud: &PointCloud, what: &str) -> Result<Frame> {
    if cloud.len() < 3 {
        return Err(Error::Pose(format!("{what} cloud has fewer than 3 points")));
    }
    let centroid = cloud.centroid();
    let eig = SymmetricEigen::new(cloud.covariance());
    let mut order = [0usize, 1, 2];
    order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]));
    let values = order.map(|i| eig.eigenvalues[i].max(0.0));
    if !(values[0] > 0.0) || values[1] <= COLLINEAR_RATIO * values[0] {
        return Err(Error::Pose(format!("{what} cloud is collinear or coincident")));
    }
    if values[0] - values[2] <= ISOTROPIC_RATIO * values[0] {
        return Err(Error::Pose(format!("{what} cloud has no distinguishable principal axis")));
    }
    let axes = Matrix3::from_columns(&order.map(|i| eig.eigenvectors.column(i).into_owned()));
    Ok(Frame { centroid, axes })
}

/// Canonical-to-observation transform from principal axes and centroids.
///
/// Each principal axis has a sign ambiguity, and axes of a partial view can
/// be far from those of the full model. Candidates are the four proper
/// sign assignments plus the canonical attitude itself (objects are expected
/// roughly as the canonical model was authored); the one whose transformed
/// canonical model lies closest to the observation wins.
pub fn estimate_initial_pose(observed: &PointCloud, prior: &ShapeSpace) -> Result<RigidTransform> {
    estimate_pose_against(observed, prior.canonical())
}

/// Yaw candidates spaced this far apart for objects resting upright.
const UPRIGHT_STEP: f64 = std::f64::consts::PI / 18.0;

/// Pose of an object known to rest upright: the canonical vertical axis is
/// mapped onto `up` and only the turn about `up` is searched. Centroids fix
/// the translation; the best-fitting turn wins.
pub fn estimate_upright_pose(observed: &PointCloud, prior: &ShapeSpace, up: &Vector3<f64>) -> Result<RigidTransform> {
    let canonical = prior.canonical();
    principal_frame(observed, "observed")?;
    let up = Unit::try_new(*up, 1e-12).ok_or_else(|| Error::Pose("up direction is zero".into()))?;
    if !up.iter().all(|v| v.is_finite()) {
        return Err(Error::Pose("up direction is not finite".into()));
    }
    let tilt = Rotation3::rotation_between(&Vector3::z(), &up)
        .unwrap_or_else(|| Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI));
    let (c_obs, c_can) = (observed.centroid(), canonical.centroid());
    let steps = (2.0 * std::f64::consts::PI / UPRIGHT_STEP).round() as usize;
    let candidates = (0..steps).map(|k| Rotation3::from_axis_angle(&up, k as f64 * UPRIGHT_STEP) * tilt);
    Ok(best_fit(observed, canonical, candidates.map(|r| RigidTransform::new(r, c_obs - r * c_can))))
}

fn best_fit(observed: &PointCloud, canonical: &PointCloud, poses: impl Iterator<Item = RigidTransform>) -> RigidTransform {
    let mut best: Option<(f64, RigidTransform)> = None;
    for pose in poses {
        let model: Vec<_> = canonical.points().iter().map(|p| pose.transform_point(p)).collect();
        let score = mean_nearest_distance(observed.points(), &model);
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, pose));
        }
    }
    best.expect("at least one candidate").1
}

/// As [`estimate_initial_pose`] with an explicit reference cloud.
pub fn estimate_pose_against(observed: &PointCloud, canonical: &PointCloud) -> Result<RigidTransform> {
    let obs = principal_frame(observed, "observed")?;
    let can = principal_frame(canonical, "canonical")?;
    let mut candidates = vec![Matrix3::identity()];
    for signs in [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]] {
        let flip = Matrix3::from_diagonal(&Vector3::from(signs));
        let mut r = obs.axes * flip * can.axes.transpose();
        if r.determinant() < 0.0 {
            // Eigenvector handedness differs between the two frames.
            r = obs.axes * flip * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0)) * can.axes.transpose();
        }
        candidates.push(r);
    }
    let poses = candidates.into_iter().map(|r| {
        let rotation = Rotation3::from_matrix_unchecked(r);
        RigidTransform::new(rotation, obs.centroid - rotation * can.centroid)
    });
    Ok(best_fit(observed, canonical, poses))
}
