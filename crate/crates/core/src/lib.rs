//! Dual-arm manipulation planning core.
//!
//! * [`kinematics`]: two serial chains on a shared torso, forward kinematics,
//!   relative end-effector pose, static gravity torques.
//! * [`collision`]: signed clearance between spheres, capsules and boxes.
//! * [`costs`]: six-term transition cost including the closure penalty that
//!   keeps the relative pose of both hands fixed while they hold an object.
//! * [`optimizer`]: stochastic rollout-based trajectory optimization with
//!   fixed endpoints and a dense validity check.
//! * [`formats`]: robot chain, scene and cost parameter files.

pub mod collision;
pub mod costs;
pub mod error;
pub mod formats;
pub mod kinematics;
pub mod math;
pub mod optimizer;

pub use collision::{
    min_clearance, pair_distance, Attachment, Clearance, CollisionBody, PrimitiveShape, Scene,
};
pub use costs::{ClosureDeviation, ClosureReference, CostEvaluator, CostParams, TransitionCost};
pub use error::{Error, Result};
pub use kinematics::{
    linear_seed, Arm, Chain, EndEffectorRelativePose, FrameId, FramePoses, JointConfiguration,
    JointLimits, JointSpec, RobotModel, Trajectory,
};
pub use math::{RigidTransform, Rpy};
pub use optimizer::{is_valid, optimize, OptimizationResult, OptimizerConfig, ValidityReport};
