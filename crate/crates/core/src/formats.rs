//! TOML file formats for robot chains, scenes and cost parameters.
//!
//! Robot chain file:
//!
//! ```toml
//! adjacent = [["torso", "l_shoulder_yaw"]]
//!
//! [torso]
//! xyz = [0.0, 0.0, 0.0]
//! rpy = [0.0, 0.0, 0.0]
//!
//! [left]
//! eef = "l_eef"
//! tool = { xyz = [0.0, 0.0, -0.08], rpy = [0.0, 0.0, 0.0] }
//!
//! [[left.joints]]
//! name = "l_shoulder_pitch"
//! axis = [0.0, 1.0, 0.0]
//! xyz = [0.0, 0.25, 0.0]
//! rpy = [0.0, 0.0, 0.0]
//! limits = [-3.1, 1.2]
//! torque_limit = 40.0
//! mass = 0.0
//! com = [0.0, 0.0, 0.0]
//!
//! [[bodies]]
//! name = "torso"
//! frame = "torso"
//! xyz = [0.0, 0.0, -0.25]
//! rpy = [0.0, 0.0, 0.0]
//! shape = { type = "box", half_extents = [0.1, 0.15, 0.25] }
//! ```
//!
//! The `[right]` chain has the same layout. Scene files list `[[obstacles]]`
//! with the body fields minus `frame`, and an `exempt` array of name pairs.

use std::path::Path;

use nalgebra::{Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::collision::{Attachment, CollisionBody, PrimitiveShape, Scene};
use crate::costs::CostParams;
use crate::error::{Error, Result};
use crate::kinematics::{Arm, Chain, JointLimits, JointSpec, RobotModel};
use crate::math::RigidTransform;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseEntry {
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl PoseEntry {
    pub fn to_transform(&self) -> RigidTransform {
        RigidTransform::from_xyz_rpy(self.xyz, self.rpy)
    }

    pub fn from_transform(t: &RigidTransform) -> Self {
        Self {
            xyz: t.translation.into(),
            rpy: t.rpy().to_array(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointEntry {
    name: String,
    axis: [f64; 3],
    #[serde(default)]
    xyz: [f64; 3],
    #[serde(default)]
    rpy: [f64; 3],
    limits: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    torque_limit: Option<f64>,
    #[serde(default)]
    mass: f64,
    #[serde(default)]
    com: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainEntry {
    eef: String,
    #[serde(default)]
    tool: PoseEntry,
    joints: Vec<JointEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BodyEntry {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frame: Option<String>,
    #[serde(default)]
    xyz: [f64; 3],
    #[serde(default)]
    rpy: [f64; 3],
    shape: PrimitiveShape,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotFile {
    #[serde(default)]
    adjacent: Vec<[String; 2]>,
    #[serde(default)]
    torso: PoseEntry,
    left: ChainEntry,
    right: ChainEntry,
    #[serde(default)]
    bodies: Vec<BodyEntry>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    #[serde(default)]
    exempt: Vec<[String; 2]>,
    #[serde(default)]
    obstacles: Vec<BodyEntry>,
}

fn finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::parse(
            "robot",
            format!("{what} contains a non-finite value"),
        ))
    }
}

fn chain_from(entry: ChainEntry) -> Result<Chain> {
    let mut joints = Vec::with_capacity(entry.joints.len());
    for j in entry.joints {
        finite(&j.axis, &j.name)?;
        finite(&j.xyz, &j.name)?;
        finite(&j.rpy, &j.name)?;
        finite(&j.com, &j.name)?;
        let axis = Vector3::from(j.axis);
        if (axis.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::parse(
                "robot",
                format!("joint `{}` axis must have unit norm", j.name),
            ));
        }
        joints.push(JointSpec {
            name: j.name,
            axis: Unit::new_unchecked(axis),
            origin: RigidTransform::from_xyz_rpy(j.xyz, j.rpy),
            limits: JointLimits::new(j.limits[0], j.limits[1]),
            torque_limit: j.torque_limit,
            mass: j.mass,
            com: Vector3::from(j.com),
        });
    }
    finite(&entry.tool.xyz, "tool")?;
    finite(&entry.tool.rpy, "tool")?;
    Ok(Chain {
        joints,
        eef_name: entry.eef,
        tool: entry.tool.to_transform(),
    })
}

fn body_from(entry: BodyEntry, default_attachment: Attachment) -> Result<CollisionBody> {
    finite(&entry.xyz, &entry.name)?;
    finite(&entry.rpy, &entry.name)?;
    let attachment = match entry.frame {
        None => default_attachment,
        Some(f) if f == "world" => Attachment::World,
        Some(f) => Attachment::Frame(f),
    };
    Ok(CollisionBody::new(
        &entry.name,
        entry.shape,
        attachment,
        RigidTransform::from_xyz_rpy(entry.xyz, entry.rpy),
    ))
}

fn body_entry(body: &CollisionBody, with_frame: bool) -> BodyEntry {
    let pose = PoseEntry::from_transform(&body.local);
    BodyEntry {
        name: body.name.clone(),
        frame: with_frame.then(|| match &body.attachment {
            Attachment::World => "world".to_owned(),
            Attachment::Frame(f) => f.clone(),
        }),
        xyz: pose.xyz,
        rpy: pose.rpy,
        shape: body.shape.clone(),
    }
}

pub fn parse_robot(text: &str) -> Result<RobotModel> {
    let file: RobotFile = toml::from_str(text).map_err(|e| Error::parse("robot", e))?;
    finite(&file.torso.xyz, "torso")?;
    finite(&file.torso.rpy, "torso")?;
    let bodies = file
        .bodies
        .into_iter()
        .map(|b| body_from(b, Attachment::World))
        .collect::<Result<Vec<_>>>()?;
    RobotModel::new(
        file.torso.to_transform(),
        chain_from(file.left)?,
        chain_from(file.right)?,
        bodies,
        file.adjacent.into_iter().map(|[a, b]| (a, b)).collect(),
    )
}

pub fn robot_to_toml(model: &RobotModel) -> String {
    let chain = |arm: Arm| {
        let c = model.chain(arm);
        ChainEntry {
            eef: c.eef_name.clone(),
            tool: PoseEntry::from_transform(&c.tool),
            joints: c
                .joints
                .iter()
                .map(|j| {
                    let o = PoseEntry::from_transform(&j.origin);
                    JointEntry {
                        name: j.name.clone(),
                        axis: j.axis.into_inner().into(),
                        xyz: o.xyz,
                        rpy: o.rpy,
                        limits: [j.limits.lower, j.limits.upper],
                        torque_limit: j.torque_limit,
                        mass: j.mass,
                        com: j.com.into(),
                    }
                })
                .collect(),
        }
    };
    let file = RobotFile {
        adjacent: model
            .adjacent_pairs()
            .iter()
            .map(|(a, b)| [a.clone(), b.clone()])
            .collect(),
        torso: PoseEntry::from_transform(model.torso()),
        left: chain(Arm::Left),
        right: chain(Arm::Right),
        bodies: model.bodies().iter().map(|b| body_entry(b, true)).collect(),
    };
    toml::to_string(&file).expect("robot file serializes")
}

pub fn parse_scene(text: &str) -> Result<Scene> {
    let file: SceneFile = toml::from_str(text).map_err(|e| Error::parse("scene", e))?;
    let obstacles = file
        .obstacles
        .into_iter()
        .map(|b| body_from(b, Attachment::World))
        .collect::<Result<Vec<_>>>()?;
    Scene::new(obstacles, file.exempt.into_iter().map(|[a, b]| (a, b)))
}

pub fn scene_to_toml(scene: &Scene) -> String {
    let file = SceneFile {
        exempt: scene
            .exempt_pairs()
            .map(|(a, b)| [a.clone(), b.clone()])
            .collect(),
        obstacles: scene
            .obstacles()
            .iter()
            .map(|b| body_entry(b, false))
            .collect(),
    };
    toml::to_string(&file).expect("scene file serializes")
}

/// Cost parameters; every field is optional and defaults as documented on
/// [`CostParams`].
pub fn parse_cost_params(text: &str) -> Result<CostParams> {
    let params: CostParams =
        toml::from_str(text).map_err(|e| Error::parse("cost parameters", e))?;
    params.validate()?;
    Ok(params)
}

pub fn cost_params_to_toml(params: &CostParams) -> String {
    toml::to_string(params).expect("cost parameters serialize")
}

pub fn load_robot(path: impl AsRef<Path>) -> Result<RobotModel> {
    parse_robot(&std::fs::read_to_string(path)?)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    parse_scene(&std::fs::read_to_string(path)?)
}

pub fn load_cost_params(path: impl AsRef<Path>) -> Result<CostParams> {
    parse_cost_params(&std::fs::read_to_string(path)?)
}
