//! Experiment scenario files.
//!
//! A scenario is a TOML file; relative paths resolve against its directory.
//!
//! ```toml
//! name = "pick-cans"
//! mode = "pick"                # "pick", "lift-comparison" or "bar-lift"
//! robot = "../robot.toml"
//! scene = "../scenes/table.toml"
//! start = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
//! trials = 15
//! seed = 0                     # trial k uses seed + k unless `seeds` lists them
//! yaw_noise = 0.2              # uniform object yaw range when no offsets are listed
//! yaw_offsets = [-0.25, 0.0, 0.25]
//!
//! [costs]                      # CostParams overrides
//! [optimizer]                  # OptimizerConfig overrides
//!
//! [pick]
//! shape_space = "../shapespace/can.json"
//! up = [0.0, 0.0, 1.0]
//! position_tolerance = 0.03
//! angle_tolerance = 0.35
//!
//! [[pick.objects]]
//! observation = "../clouds/can_0.xyz"
//! truth_grasps = "../grasps/can_0_truth.toml"
//!
//! [lift]
//! goal = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
//! ```

use std::path::{Path, PathBuf};

use dualarm_core::formats::{load_robot, load_scene};
use dualarm_core::{CostParams, JointConfiguration, OptimizerConfig, RobotModel, Scene};
use dualarm_shape::{GraspPoses, InferenceParams, PointCloud, ShapeSpace};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ik::IkParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Pick,
    LiftComparison,
    BarLift,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Pick => "pick",
            Mode::LiftComparison => "lift-comparison",
            Mode::BarLift => "bar-lift",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectFile {
    pub observation: PathBuf,
    /// World-frame grasp poses of the observed instance, for scoring registration.
    #[serde(default)]
    pub truth_grasps: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PickFile {
    pub shape_space: PathBuf,
    pub objects: Vec<ObjectFile>,
    #[serde(default = "default_up")]
    pub up: [f64; 3],
    /// Largest accepted distance between warped and true grasp positions.
    #[serde(default = "default_position_tolerance")]
    pub position_tolerance: f64,
    #[serde(default = "default_angle_tolerance")]
    pub angle_tolerance: f64,
    #[serde(default)]
    pub inference: Option<InferenceParams>,
}

fn default_up() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn default_position_tolerance() -> f64 {
    0.03
}

fn default_angle_tolerance() -> f64 {
    0.35
}

fn default_yaw_noise() -> f64 {
    0.2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftFile {
    pub goal: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub mode: Mode,
    pub robot: PathBuf,
    pub scene: PathBuf,
    pub start: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_yaw_noise")]
    pub yaw_noise: f64,
    #[serde(default)]
    pub yaw_offsets: Vec<f64>,
    #[serde(default)]
    pub costs: CostParams,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub pick: Option<PickFile>,
    #[serde(default)]
    pub lift: Option<LiftFile>,
}

/// One object instance of a pick scenario.
#[derive(Clone, Debug)]
pub struct PickObject {
    pub name: String,
    pub observation: PointCloud,
    pub truth: Option<GraspPoses>,
}

#[derive(Clone, Debug)]
pub struct PickSetup {
    pub space: ShapeSpace,
    pub objects: Vec<PickObject>,
    pub up: [f64; 3],
    pub position_tolerance: f64,
    pub angle_tolerance: f64,
    pub inference: InferenceParams,
}

/// A loaded scenario with every referenced file parsed.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    pub model: RobotModel,
    pub scene: Scene,
    pub start: JointConfiguration,
    pub goal: Option<JointConfiguration>,
    pub trials: usize,
    pub seed: u64,
    pub seeds: Option<Vec<u64>>,
    pub yaw_noise: f64,
    pub yaw_offsets: Vec<f64>,
    pub costs: CostParams,
    pub optimizer: OptimizerConfig,
    pub ik: IkParams,
    pub pick: Option<PickSetup>,
}

fn scenario_error(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_owned()
    } else {
        base.join(path)
    }
}

fn configuration(values: &[f64], model: &RobotModel, what: &str) -> Result<JointConfiguration> {
    let q = JointConfiguration::from_slice(values);
    model
        .check_configuration(&q)
        .map_err(|e| scenario_error(format!("{what}: {e}")))?;
    Ok(q)
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| scenario_error(format!("malformed scenario: {e}")))
    }
}

impl Scenario {
    /// Reads and validates a scenario and everything it references.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| scenario_error(format!("cannot read {}: {e}", path.display())))?;
        let file = ScenarioFile::parse(&text)?;
        Self::from_file(file, path.parent().unwrap_or(Path::new(".")))
    }

    /// Builds a scenario from its parsed form, resolving paths against `base`.
    pub fn from_file(file: ScenarioFile, base: &Path) -> Result<Self> {
        let load = |p: &Path, what: &str| -> Result<PathBuf> {
            let full = resolve(base, p);
            if !full.is_file() {
                return Err(scenario_error(format!("{what} file {} does not exist", full.display())));
            }
            Ok(full)
        };
        if file.trials == 0 {
            return Err(scenario_error("trial count must be at least 1"));
        }
        if let Some(seeds) = &file.seeds {
            if seeds.len() < file.trials {
                return Err(scenario_error(format!(
                    "{} seeds listed for {} trials",
                    seeds.len(),
                    file.trials
                )));
            }
        }
        if !(file.yaw_noise.is_finite() && file.yaw_noise >= 0.0) || file.yaw_offsets.iter().any(|y| !y.is_finite()) {
            return Err(scenario_error("yaw noise and offsets must be finite, noise nonnegative"));
        }
        file.costs.validate()?;
        file.optimizer.validate()?;
        let model = load_robot(load(&file.robot, "robot")?)?;
        let scene = load_scene(load(&file.scene, "scene")?)?;
        let start = configuration(&file.start, &model, "start configuration")?;
        let goal = match (&file.lift, file.mode) {
            (Some(lift), _) => Some(configuration(&lift.goal, &model, "goal configuration")?),
            (None, Mode::LiftComparison | Mode::BarLift) => {
                return Err(scenario_error(format!("{} scenario needs a [lift] goal", file.mode)))
            }
            (None, Mode::Pick) => None,
        };
        let pick = match (&file.pick, file.mode) {
            (Some(p), _) => Some(Self::pick_setup(p, &load)?),
            (None, Mode::Pick) => return Err(scenario_error("pick scenario needs a [pick] section")),
            (None, _) => None,
        };
        Ok(Self {
            name: file.name,
            mode: file.mode,
            model,
            scene,
            start,
            goal,
            trials: file.trials,
            seed: file.seed,
            seeds: file.seeds,
            yaw_noise: file.yaw_noise,
            yaw_offsets: file.yaw_offsets,
            costs: file.costs,
            optimizer: file.optimizer,
            ik: IkParams::default(),
            pick,
        })
    }

    fn pick_setup(p: &PickFile, load: &dyn Fn(&Path, &str) -> Result<PathBuf>) -> Result<PickSetup> {
        if p.objects.is_empty() {
            return Err(scenario_error("pick scenario lists no objects"));
        }
        let up = nalgebra::Vector3::from(p.up);
        if !(up.iter().all(|v| v.is_finite()) && up.norm() > 1e-9) {
            return Err(scenario_error("up direction must be finite and nonzero"));
        }
        if !(p.position_tolerance > 0.0 && p.angle_tolerance > 0.0) {
            return Err(scenario_error("grasp tolerances must be positive"));
        }
        let space = ShapeSpace::load(load(&p.shape_space, "shape space")?)?;
        if space.grasps().left.is_empty() || space.grasps().right.is_empty() {
            return Err(scenario_error("shape space carries no grasp poses for both arms"));
        }
        let objects = p
            .objects
            .iter()
            .map(|o| -> Result<PickObject> {
                let path = load(&o.observation, "observation")?;
                let truth = match &o.truth_grasps {
                    Some(t) => Some(GraspPoses::load(load(t, "truth grasp")?)?),
                    None => None,
                };
                Ok(PickObject {
                    name: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                    observation: PointCloud::load(&path)?,
                    truth,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let inference = p.inference.clone().unwrap_or_else(|| InferenceParams {
            rotation_axis: Some(p.up),
            ..InferenceParams::default()
        });
        inference.validate()?;
        Ok(PickSetup {
            space,
            objects,
            up: p.up,
            position_tolerance: p.position_tolerance,
            angle_tolerance: p.angle_tolerance,
            inference,
        })
    }

    /// Seed of trial `k`.
    pub fn trial_seed(&self, k: usize) -> u64 {
        match &self.seeds {
            Some(s) => s[k],
            None => self.seed.wrapping_add(k as u64),
        }
    }

    pub fn goal(&self) -> Result<&JointConfiguration> {
        self.goal
            .as_ref()
            .ok_or_else(|| scenario_error("scenario has no goal configuration"))
    }
}
