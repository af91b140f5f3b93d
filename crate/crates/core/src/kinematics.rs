//! Two serial chains rooted at a shared torso frame.
//!
//! Frames are addressed by [`FrameId`]. The layout is fixed per model:
//! the torso, then one frame per left joint (the child link of that joint),
//! the left end-effector, then the same for the right chain. Joint values
//! in a [`JointConfiguration`] are ordered left chain first.

use std::collections::HashSet;
use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::collision::{Attachment, CollisionBody, PrimitiveShape};
use crate::error::{Error, Result};
use crate::math::{RigidTransform, Rpy};

pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Left,
    Right,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Left, Arm::Right];
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub lower: f64,
    pub upper: f64,
}

impl JointLimits {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    /// Distance outside `[lower, upper]`, zero inside or on the boundary.
    pub fn violation(&self, value: f64) -> f64 {
        if value < self.lower {
            self.lower - value
        } else if value > self.upper {
            value - self.upper
        } else {
            0.0
        }
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(self.lower, self.upper)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec {
    pub name: String,
    /// Rotation axis in the joint frame.
    pub axis: Unit<Vector3<f64>>,
    /// Joint frame relative to the parent link frame at zero angle.
    pub origin: RigidTransform,
    pub limits: JointLimits,
    pub torque_limit: Option<f64>,
    /// Mass of the child link, kg.
    pub mass: f64,
    /// Child link center of mass in the joint frame.
    pub com: Vector3<f64>,
}

impl JointSpec {
    pub fn new(
        name: &str,
        axis: Vector3<f64>,
        origin: RigidTransform,
        limits: JointLimits,
    ) -> Self {
        Self {
            name: name.to_owned(),
            axis: Unit::new_normalize(axis),
            origin,
            limits,
            torque_limit: None,
            mass: 0.0,
            com: Vector3::zeros(),
        }
    }

    pub fn with_mass(mut self, mass: f64, com: Vector3<f64>) -> Self {
        self.mass = mass;
        self.com = com;
        self
    }

    pub fn with_torque_limit(mut self, limit: f64) -> Self {
        self.torque_limit = Some(limit);
        self
    }
}

/// An ordered joint list ending in an end-effector frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub joints: Vec<JointSpec>,
    pub eef_name: String,
    /// End-effector frame relative to the last joint frame.
    pub tool: RigidTransform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrameId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct RobotModel {
    torso: RigidTransform,
    left: Chain,
    right: Chain,
    bodies: Vec<CollisionBody>,
    adjacent: Vec<(String, String)>,
    frame_names: Vec<String>,
    gravity: f64,
}

/// Joint values in radians, left chain first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfiguration(pub Vec<f64>);

impl JointConfiguration {
    pub fn zeros(dof: usize) -> Self {
        Self(vec![0.0; dof])
    }

    pub fn from_slice(values: &[f64]) -> Self {
        Self(values.to_vec())
    }

    /// `a + s * (b - a)` componentwise.
    pub fn lerp(a: &JointConfiguration, b: &JointConfiguration, s: f64) -> JointConfiguration {
        JointConfiguration(
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x + s * (y - x))
                .collect(),
        )
    }

    pub fn distance(&self, other: &JointConfiguration) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Deref for JointConfiguration {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for JointConfiguration {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for JointConfiguration {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// World poses of every frame of a model for one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct FramePoses {
    poses: Vec<RigidTransform>,
}

impl FramePoses {
    pub fn get(&self, id: FrameId) -> &RigidTransform {
        &self.poses[id.0]
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (FrameId, &RigidTransform)> {
        self.poses.iter().enumerate().map(|(i, p)| (FrameId(i), p))
    }
}

/// Pose of eef2 expressed in the eef1 frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndEffectorRelativePose {
    pub translation: Vector3<f64>,
    pub orientation: Rpy,
}

impl RobotModel {
    pub fn new(
        torso: RigidTransform,
        left: Chain,
        right: Chain,
        bodies: Vec<CollisionBody>,
        adjacent: Vec<(String, String)>,
    ) -> Result<Self> {
        let mut frame_names = vec!["torso".to_owned()];
        for chain in [&left, &right] {
            frame_names.extend(chain.joints.iter().map(|j| j.name.clone()));
            frame_names.push(chain.eef_name.clone());
        }
        let mut seen = HashSet::new();
        for name in &frame_names {
            if name == "world" || !seen.insert(name.as_str()) {
                return Err(Error::Model(format!(
                    "duplicate or reserved frame name `{name}`"
                )));
            }
        }
        for joint in left.joints.iter().chain(right.joints.iter()) {
            let l = joint.limits;
            if !(l.lower.is_finite() && l.upper.is_finite() && l.lower < l.upper) {
                return Err(Error::Model(format!(
                    "joint `{}` has invalid limits [{}, {}]",
                    joint.name, l.lower, l.upper
                )));
            }
            if (joint.axis.norm() - 1.0).abs() > 1e-9 || !joint.axis.iter().all(|v| v.is_finite()) {
                return Err(Error::Model(format!(
                    "joint `{}` axis is not a unit vector",
                    joint.name
                )));
            }
            if !(joint.mass.is_finite() && joint.mass >= 0.0) {
                return Err(Error::Model(format!(
                    "joint `{}` has invalid mass",
                    joint.name
                )));
            }
            if let Some(t) = joint.torque_limit {
                if !(t.is_finite() && t > 0.0) {
                    return Err(Error::Model(format!(
                        "joint `{}` has invalid torque limit",
                        joint.name
                    )));
                }
            }
            if !joint.origin.is_proper(1e-9) {
                return Err(Error::Model(format!(
                    "joint `{}` origin is not a rigid transform",
                    joint.name
                )));
            }
        }
        if left.joints.is_empty() || right.joints.is_empty() {
            return Err(Error::Model("each chain needs at least one joint".into()));
        }
        let model = Self {
            torso,
            left,
            right,
            bodies,
            adjacent,
            frame_names,
            gravity: STANDARD_GRAVITY,
        };
        for body in &model.bodies {
            body.shape
                .validate()
                .map_err(|e| Error::Model(format!("body `{}`: {e}", body.name)))?;
            if let Attachment::Frame(name) = &body.attachment {
                if model.frame_index(name).is_none() {
                    return Err(Error::Model(format!(
                        "body `{}` is attached to unknown frame `{name}`",
                        body.name
                    )));
                }
            }
        }
        for (a, b) in &model.adjacent {
            if model.frame_index(a).is_none() || model.frame_index(b).is_none() {
                return Err(Error::Model(format!(
                    "adjacent pair ({a}, {b}) names an unknown frame"
                )));
            }
        }
        Ok(model)
    }

    /// The shipped 14-DOF anthropomorphic two-arm model.
    ///
    /// Shoulders sit 0.25 m to either side of the torso origin, the upper arm
    /// is 0.35 m, the forearm 0.30 m and the tool frame 0.08 m past the wrist.
    /// At the all-zero configuration both arms hang straight down, so the
    /// end-effectors are at `(0, +-0.25, -0.73)` with identity orientation.
    /// The right arm mirrors the left through the torso's x-z plane: equal
    /// joint values on both arms give mirror-image poses.
    pub fn desk_scale() -> Self {
        let arm = |prefix: &str, side: f64| -> Chain {
            // Mirroring through the x-z plane flips x and z rotation axes.
            let x = Vector3::new(side, 0.0, 0.0);
            let y = Vector3::y();
            let z = Vector3::new(0.0, 0.0, side);
            let o = |xyz: [f64; 3]| RigidTransform::from_xyz_rpy(xyz, [0.0; 3]);
            let n = |s: &str| format!("{prefix}_{s}");
            Chain {
                joints: vec![
                    JointSpec::new(
                        &n("shoulder_pitch"),
                        y,
                        o([0.0, 0.25 * side, 0.0]),
                        JointLimits::new(-3.1, 1.2),
                    )
                    .with_torque_limit(40.0),
                    JointSpec::new(
                        &n("shoulder_roll"),
                        x,
                        o([0.0; 3]),
                        JointLimits::new(-0.4, 2.6),
                    )
                    .with_torque_limit(40.0),
                    JointSpec::new(
                        &n("shoulder_yaw"),
                        z,
                        o([0.0; 3]),
                        JointLimits::new(-2.5, 2.5),
                    )
                    .with_torque_limit(40.0)
                    .with_mass(2.0, Vector3::new(0.0, 0.0, -0.175)),
                    JointSpec::new(
                        &n("elbow"),
                        y,
                        o([0.0, 0.0, -0.35]),
                        JointLimits::new(-2.6, 0.1),
                    )
                    .with_torque_limit(30.0),
                    JointSpec::new(&n("wrist_yaw"), z, o([0.0; 3]), JointLimits::new(-2.8, 2.8))
                        .with_torque_limit(10.0)
                        .with_mass(1.2, Vector3::new(0.0, 0.0, -0.15)),
                    JointSpec::new(
                        &n("wrist_pitch"),
                        y,
                        o([0.0, 0.0, -0.30]),
                        JointLimits::new(-1.6, 1.6),
                    )
                    .with_torque_limit(8.0),
                    JointSpec::new(
                        &n("wrist_roll"),
                        x,
                        o([0.0; 3]),
                        JointLimits::new(-1.6, 1.6),
                    )
                    .with_torque_limit(8.0)
                    .with_mass(0.6, Vector3::new(0.0, 0.0, -0.07)),
                ],
                eef_name: n("eef"),
                tool: o([0.0, 0.0, -0.08]),
            }
        };
        let mut bodies = vec![CollisionBody::new(
            "torso",
            PrimitiveShape::Box {
                half_extents: Vector3::new(0.10, 0.15, 0.25),
            },
            Attachment::Frame("torso".into()),
            RigidTransform::from_translation(Vector3::new(0.0, 0.0, -0.25)),
        )];
        let mut adjacent = Vec::new();
        for p in ["l", "r"] {
            let capsule = |r: f64, a: f64, b: f64| PrimitiveShape::Capsule {
                radius: r,
                a: Vector3::new(0.0, 0.0, a),
                b: Vector3::new(0.0, 0.0, b),
            };
            let at = |f: &str| Attachment::Frame(format!("{p}_{f}"));
            bodies.push(CollisionBody::new(
                &format!("{p}_upper_arm"),
                capsule(0.055, -0.05, -0.30),
                at("shoulder_yaw"),
                RigidTransform::identity(),
            ));
            bodies.push(CollisionBody::new(
                &format!("{p}_forearm"),
                capsule(0.045, -0.04, -0.26),
                at("wrist_yaw"),
                RigidTransform::identity(),
            ));
            bodies.push(CollisionBody::new(
                &format!("{p}_hand"),
                capsule(0.04, -0.02, -0.12),
                at("wrist_roll"),
                RigidTransform::identity(),
            ));
            adjacent.push(("torso".to_owned(), format!("{p}_shoulder_yaw")));
            adjacent.push((format!("{p}_shoulder_yaw"), format!("{p}_wrist_yaw")));
            adjacent.push((format!("{p}_wrist_yaw"), format!("{p}_wrist_roll")));
        }
        Self::new(
            RigidTransform::identity(),
            arm("l", 1.0),
            arm("r", -1.0),
            bodies,
            adjacent,
        )
        .expect("shipped model is valid")
    }

    pub fn torso(&self) -> &RigidTransform {
        &self.torso
    }

    pub fn chain(&self, arm: Arm) -> &Chain {
        match arm {
            Arm::Left => &self.left,
            Arm::Right => &self.right,
        }
    }

    pub fn bodies(&self) -> &[CollisionBody] {
        &self.bodies
    }

    pub fn adjacent_pairs(&self) -> &[(String, String)] {
        &self.adjacent
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn set_gravity(&mut self, g: f64) {
        self.gravity = g;
    }

    /// Total joint count J.
    pub fn dof(&self) -> usize {
        self.left.joints.len() + self.right.joints.len()
    }

    pub fn arm_dof(&self, arm: Arm) -> usize {
        self.chain(arm).joints.len()
    }

    /// Index of the first joint of `arm` inside a configuration vector.
    pub fn joint_offset(&self, arm: Arm) -> usize {
        match arm {
            Arm::Left => 0,
            Arm::Right => self.left.joints.len(),
        }
    }

    pub fn joints(&self) -> impl Iterator<Item = &JointSpec> {
        self.left.joints.iter().chain(self.right.joints.iter())
    }

    pub fn limits(&self) -> Vec<JointLimits> {
        self.joints().map(|j| j.limits).collect()
    }

    pub fn frame_names(&self) -> &[String] {
        &self.frame_names
    }

    pub fn frame_index(&self, name: &str) -> Option<FrameId> {
        self.frame_names.iter().position(|n| n == name).map(FrameId)
    }

    pub fn frame_name(&self, id: FrameId) -> &str {
        &self.frame_names[id.0]
    }

    /// Frame of the child link of joint `k` of `arm`.
    pub fn joint_frame(&self, arm: Arm, k: usize) -> FrameId {
        match arm {
            Arm::Left => FrameId(1 + k),
            Arm::Right => FrameId(2 + self.left.joints.len() + k),
        }
    }

    pub fn eef_frame(&self, arm: Arm) -> FrameId {
        self.joint_frame(arm, self.chain(arm).joints.len())
    }

    pub fn check_configuration(&self, config: &JointConfiguration) -> Result<()> {
        if config.len() != self.dof() {
            return Err(Error::Configuration(format!(
                "expected {} joint values, got {}",
                self.dof(),
                config.len()
            )));
        }
        if let Some(i) = config.iter().position(|v| !v.is_finite()) {
            return Err(Error::Configuration(format!(
                "joint value {i} is not finite"
            )));
        }
        Ok(())
    }

    /// World poses of every link frame and both end-effector frames.
    pub fn forward_kinematics(&self, config: &JointConfiguration) -> Result<FramePoses> {
        self.check_configuration(config)?;
        let mut poses = Vec::with_capacity(self.frame_names.len());
        poses.push(self.torso);
        for arm in Arm::BOTH {
            let chain = self.chain(arm);
            let offset = self.joint_offset(arm);
            let mut pose = self.torso;
            for (k, joint) in chain.joints.iter().enumerate() {
                pose = pose
                    * joint.origin
                    * RigidTransform::about_axis(&joint.axis, config[offset + k]);
                poses.push(pose);
            }
            poses.push(pose * chain.tool);
        }
        Ok(FramePoses { poses })
    }

    pub fn eef_pose(&self, config: &JointConfiguration, arm: Arm) -> Result<RigidTransform> {
        let frames = self.forward_kinematics(config)?;
        Ok(*frames.get(self.eef_frame(arm)))
    }

    /// Relative pose of the right end-effector in the left end-effector frame.
    pub fn relative_eef_pose(
        &self,
        config: &JointConfiguration,
    ) -> Result<EndEffectorRelativePose> {
        let frames = self.forward_kinematics(config)?;
        Ok(self.relative_eef_pose_from(&frames))
    }

    pub fn relative_eef_pose_from(&self, frames: &FramePoses) -> EndEffectorRelativePose {
        let rel = self.relative_eef_transform_from(frames);
        EndEffectorRelativePose {
            translation: rel.translation,
            orientation: rel.rpy(),
        }
    }

    pub fn relative_eef_transform_from(&self, frames: &FramePoses) -> RigidTransform {
        let e1 = frames.get(self.eef_frame(Arm::Left));
        let e2 = frames.get(self.eef_frame(Arm::Right));
        e1.relative_to(e2)
    }

    /// Joint torques needed to hold the configuration against gravity.
    ///
    /// Entry `k` is `dV/dtheta_k` for the potential `V = sum m_i g z_i`; its
    /// absolute value is the static load on joint `k`.
    pub fn static_gravity_torques(&self, config: &JointConfiguration) -> Result<Vec<f64>> {
        let frames = self.forward_kinematics(config)?;
        Ok(self.static_gravity_torques_from(&frames))
    }

    pub fn static_gravity_torques_from(&self, frames: &FramePoses) -> Vec<f64> {
        let mut torques = vec![0.0; self.dof()];
        for arm in Arm::BOTH {
            let chain = self.chain(arm);
            let offset = self.joint_offset(arm);
            let coms: Vec<(f64, Vector3<f64>)> = chain
                .joints
                .iter()
                .enumerate()
                .map(|(k, j)| {
                    (
                        j.mass,
                        frames.get(self.joint_frame(arm, k)).transform_point(&j.com),
                    )
                })
                .collect();
            for k in 0..chain.joints.len() {
                let frame = frames.get(self.joint_frame(arm, k));
                let axis = frame.rotation * chain.joints[k].axis.into_inner();
                let origin = frame.translation;
                let mut tau = 0.0;
                for (mass, com) in &coms[k..] {
                    if *mass > 0.0 {
                        tau += mass * self.gravity * axis.cross(&(com - origin)).z;
                    }
                }
                torques[offset + k] = tau;
            }
        }
        torques
    }

    /// Gravitational potential energy `sum m_i g z_i`, joules.
    pub fn potential_energy(&self, config: &JointConfiguration) -> Result<f64> {
        let frames = self.forward_kinematics(config)?;
        let mut v = 0.0;
        for arm in Arm::BOTH {
            for (k, j) in self.chain(arm).joints.iter().enumerate() {
                let com = frames.get(self.joint_frame(arm, k)).transform_point(&j.com);
                v += j.mass * self.gravity * com.z;
            }
        }
        Ok(v)
    }

    /// Geometric Jacobian of one arm's end-effector: rows 0..3 linear,
    /// rows 3..6 angular, one column per joint of that arm.
    pub fn eef_jacobian(&self, frames: &FramePoses, arm: Arm) -> DMatrix<f64> {
        let chain = self.chain(arm);
        let eef = frames.get(self.eef_frame(arm)).translation;
        let mut jac = DMatrix::zeros(6, chain.joints.len());
        for (k, joint) in chain.joints.iter().enumerate() {
            let frame = frames.get(self.joint_frame(arm, k));
            let axis = frame.rotation * joint.axis.into_inner();
            let lin = axis.cross(&(eef - frame.translation));
            for r in 0..3 {
                jac[(r, k)] = lin[r];
                jac[(r + 3, k)] = axis[r];
            }
        }
        jac
    }
}

/// N keyframes over J joints whose first and last keyframes never change.
///
/// Only interior keyframes are reachable mutably.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<JointConfiguration>", into = "Vec<JointConfiguration>")]
pub struct Trajectory {
    keyframes: Vec<JointConfiguration>,
}

impl TryFrom<Vec<JointConfiguration>> for Trajectory {
    type Error = Error;
    fn try_from(keyframes: Vec<JointConfiguration>) -> Result<Self> {
        Trajectory::new(keyframes)
    }
}

impl From<Trajectory> for Vec<JointConfiguration> {
    fn from(t: Trajectory) -> Self {
        t.keyframes
    }
}

impl Trajectory {
    pub fn new(keyframes: Vec<JointConfiguration>) -> Result<Self> {
        if keyframes.len() < 2 {
            return Err(Error::Parameter(
                "a trajectory needs at least 2 keyframes".into(),
            ));
        }
        let j = keyframes[0].len();
        if keyframes.iter().any(|k| k.len() != j) {
            return Err(Error::Configuration("keyframes differ in length".into()));
        }
        Ok(Self { keyframes })
    }

    pub fn len(&self) -> usize {
        self.keyframes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keyframes.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.keyframes[0].len()
    }

    pub fn keyframes(&self) -> &[JointConfiguration] {
        &self.keyframes
    }

    pub fn start(&self) -> &JointConfiguration {
        &self.keyframes[0]
    }

    pub fn goal(&self) -> &JointConfiguration {
        &self.keyframes[self.keyframes.len() - 1]
    }

    pub fn interior_mut(&mut self) -> &mut [JointConfiguration] {
        let n = self.keyframes.len();
        &mut self.keyframes[1..n - 1]
    }

    /// Configuration at parameter `s` in `[0, 1]` along transition `i -> i+1`.
    pub fn sample(&self, i: usize, s: f64) -> JointConfiguration {
        JointConfiguration::lerp(&self.keyframes[i], &self.keyframes[i + 1], s)
    }
}

/// Straight joint-space interpolation from `start` to `goal` with `n` keyframes.
pub fn linear_seed(
    start: &JointConfiguration,
    goal: &JointConfiguration,
    n: usize,
) -> Result<Trajectory> {
    if n < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 keyframes, got {n}"
        )));
    }
    if start.len() != goal.len() {
        return Err(Error::Configuration(
            "start and goal differ in length".into(),
        ));
    }
    let mut keyframes = Vec::with_capacity(n);
    keyframes.push(start.clone());
    for i in 1..n - 1 {
        keyframes.push(JointConfiguration::lerp(
            start,
            goal,
            i as f64 / (n - 1) as f64,
        ));
    }
    keyframes.push(goal.clone());
    Trajectory::new(keyframes)
}
