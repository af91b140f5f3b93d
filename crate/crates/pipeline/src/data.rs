//! Generates the shipped synthetic data set: robot, scenes, watering-can
//! clouds with annotated grasps, a shape space and the experiment scenarios.

use std::path::Path;

use dualarm_core::formats::{robot_to_toml, scene_to_toml};
use dualarm_core::{
    Attachment, CollisionBody, JointConfiguration, PrimitiveShape, RigidTransform, RobotModel, Scene,
};
use dualarm_shape::synthetic::{add_noise, to_cloud, visible_from, CanParams, GRASP_RPY};
use dualarm_shape::{build_shape_space, CpdParams, PointCloud};
use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::ik::resolve_goal_configuration;

/// Points per training cloud.
pub const TRAINING_POINTS: usize = 250;
/// Surface samples per observed can before the visibility cut.
pub const OBSERVATION_SAMPLES: usize = 600;
pub const TRAINING_INSTANCES: u64 = 7;
pub const OBSERVED_INSTANCES: u64 = 5;
/// Height of the table top, meters.
pub const TABLE_TOP: f64 = -0.45;
/// Distance of observed cans in front of the torso, meters.
pub const OBJECT_X: f64 = 0.6;
/// Camera position for the simulated partial views.
pub const VIEWPOINT: [f64; 3] = [0.0, 0.0, 0.3];
pub const OBSERVATION_NOISE: f64 = 0.001;

pub fn table_scene() -> Scene {
    let table = CollisionBody::new(
        "table",
        PrimitiveShape::Box {
            half_extents: Vector3::new(0.3, 0.6, 0.02),
        },
        Attachment::World,
        RigidTransform::from_translation(Vector3::new(OBJECT_X + 0.05, 0.0, TABLE_TOP - 0.02)),
    );
    Scene::new(vec![table], []).expect("table scene is valid")
}

/// Both hands in the grasp orientation, 0.4 m apart, centered at `center`.
fn hand_pair(center: [f64; 3]) -> (RigidTransform, RigidTransform) {
    let at = |dy: f64| RigidTransform::from_xyz_rpy([center[0], center[1] + dy, center[2]], GRASP_RPY);
    (at(0.2), at(-0.2))
}

/// Start and goal of the arms-up lift: hands 0.35 m in front of the torso,
/// raised from 0.35 m below the shoulders to 0.05 m above them.
pub fn lift_configurations(model: &RobotModel) -> Result<(JointConfiguration, JointConfiguration)> {
    let mut bent = JointConfiguration::zeros(model.dof());
    for arm in [0, model.arm_dof(dualarm_core::Arm::Left)] {
        bent[arm] = -0.6;
        bent[arm + 3] = -0.8;
    }
    let scene = Scene::empty();
    let (l, r) = hand_pair([0.35, 0.0, -0.35]);
    let start = resolve_goal_configuration(model, &scene, &l, &r, &bent)?;
    let (l, r) = hand_pair([0.35, 0.0, 0.05]);
    let goal = resolve_goal_configuration(model, &scene, &l, &r, &start)?;
    Ok((start, goal))
}

pub fn canonical_can() -> Result<PointCloud> {
    Ok(to_cloud(&CanParams::default().sample(TRAINING_POINTS, 0))?)
}

pub fn training_can(i: u64) -> Result<PointCloud> {
    Ok(to_cloud(&CanParams::random(i).sample(TRAINING_POINTS, 100 + i))?)
}

/// Parameters of observed can `k`; disjoint from the training seeds.
pub fn observed_can(k: u64) -> CanParams {
    CanParams::random(1000 + k)
}

/// World placement of observed cans: standing on the table, unrotated.
pub fn object_pose() -> RigidTransform {
    RigidTransform::from_xyz_rpy([OBJECT_X, 0.0, TABLE_TOP], [0.0; 3])
}

/// Noisy world-frame view of can `k` from the viewpoint.
pub fn observation(k: u64) -> Result<PointCloud> {
    let world = object_pose();
    let samples = observed_can(k).sample(OBSERVATION_SAMPLES, 2000 + k);
    let view = world.inverse().transform_point(&Vector3::from(VIEWPOINT));
    let visible = to_cloud(&visible_from(&samples, &view))?.transformed(&world);
    Ok(add_noise(&visible, OBSERVATION_NOISE, k)?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn floats(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    format!("[{}]", items.join(", "))
}

/// Writes the full data set below `dir`.
pub fn generate(dir: &Path) -> Result<()> {
    let model = RobotModel::desk_scale();
    write(&dir.join("robot.toml"), &robot_to_toml(&model))?;
    write(&dir.join("scenes/empty.toml"), &scene_to_toml(&Scene::empty()))?;
    write(&dir.join("scenes/table.toml"), &scene_to_toml(&table_scene()))?;

    let canonical = canonical_can()?;
    let grasps = CanParams::default().grasps();
    save_cloud(&canonical, &dir.join("clouds/can_canonical.xyz"))?;
    write(&dir.join("grasps/can_canonical.toml"), &grasps.to_toml())?;
    // The canonical shape is part of the training set so the zero field is representable.
    let mut training = vec![canonical.clone()];
    for i in 1..=TRAINING_INSTANCES {
        let cloud = training_can(i)?;
        save_cloud(&cloud, &dir.join(format!("clouds/train/can_{i:02}.xyz")))?;
        training.push(cloud);
    }
    let space = build_shape_space(&canonical, &training, 8, &CpdParams::default(), grasps)?;
    std::fs::create_dir_all(dir.join("shapespace"))?;
    space.save(dir.join("shapespace/can.json"))?;

    let mut objects = String::new();
    for k in 0..OBSERVED_INSTANCES {
        save_cloud(&observation(k)?, &dir.join(format!("clouds/can_obs_{k}.xyz")))?;
        let truth = observed_can(k).grasps().transformed(&object_pose());
        write(&dir.join(format!("grasps/can_obs_{k}_truth.toml")), &truth.to_toml())?;
        objects.push_str(&format!(
            "\n[[pick.objects]]\nobservation = \"../clouds/can_obs_{k}.xyz\"\ntruth_grasps = \"../grasps/can_obs_{k}_truth.toml\"\n"
        ));
    }

    let (start, goal) = lift_configurations(&model)?;
    let start = floats(&start);
    let goal = floats(&goal);
    write(
        &dir.join("scenarios/pick.toml"),
        &format!(
            "name = \"pick-watering-cans\"\nmode = \"pick\"\nrobot = \"../robot.toml\"\nscene = \"../scenes/table.toml\"\n\
             start = {start}\ntrials = 15\nseed = 0\nyaw_offsets = [-0.25, 0.0, 0.25]\n\n\
             [pick]\nshape_space = \"../shapespace/can.json\"\nup = [0.0, 0.0, 1.0]\n\
             position_tolerance = 0.03\nangle_tolerance = 0.35\n{objects}"
        ),
    )?;
    write(
        &dir.join("scenarios/lift.toml"),
        &format!(
            "name = \"arms-up-lift\"\nmode = \"lift-comparison\"\nrobot = \"../robot.toml\"\nscene = \"../scenes/empty.toml\"\n\
             start = {start}\ntrials = 50\nseed = 0\n\n[lift]\ngoal = {goal}\n"
        ),
    )?;
    let rpy = floats(&GRASP_RPY);
    write(
        &dir.join("scenarios/bar_lift.toml"),
        &format!(
            "name = \"bar-lift\"\nmode = \"bar-lift\"\nrobot = \"../robot.toml\"\nscene = \"../scenes/empty.toml\"\n\
             start = {start}\ntrials = 10\nseed = 0\n\n[costs]\nclosure = true\n\n\
             [costs.orientation_constraints.left]\nrpy = {rpy}\ntolerance = 0.1\n\n\
             [costs.orientation_constraints.right]\nrpy = {rpy}\ntolerance = 0.1\n\n[lift]\ngoal = {goal}\n"
        ),
    )?;
    Ok(())
}

fn save_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    cloud.save(path).map_err(Error::from)
}
