//! Goal configurations from end-effector poses.

use dualarm_core::collision::CollisionPairs;
use dualarm_core::{Arm, JointConfiguration, RigidTransform, RobotModel, Scene};
use nalgebra::{DMatrix, DVector, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct IkParams {
    pub max_iterations: usize,
    /// Damping factor of the least-squares step.
    pub damping: f64,
    /// Largest joint change per iteration, radians.
    pub max_step: f64,
    /// Accepted position residual, meters.
    pub position_tolerance: f64,
    /// Accepted orientation residual, radians.
    pub angle_tolerance: f64,
    /// Residual at which iteration stops early.
    pub convergence: f64,
    /// Extra attempts from perturbed seeds.
    pub restarts: usize,
    /// Half-width of the uniform seed perturbation, radians.
    pub restart_spread: f64,
    pub seed: u64,
}

impl Default for IkParams {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            damping: 0.02,
            max_step: 0.2,
            position_tolerance: 0.005,
            angle_tolerance: 0.02,
            convergence: 1e-10,
            restarts: 12,
            restart_spread: 0.6,
            seed: 0,
        }
    }
}

/// Position and rotation-vector error of `current` relative to `target`, world frame.
pub fn pose_error(target: &RigidTransform, current: &RigidTransform) -> (Vector3<f64>, Vector3<f64>) {
    let dp = target.translation - current.translation;
    // Via a quaternion and atan2: the matrix log goes NaN when rounding pushes the trace past 3.
    let q = UnitQuaternion::from_rotation_matrix(&(target.rotation * current.rotation.inverse()));
    let (w, v) = (q.scalar(), q.imag());
    let s = v.norm();
    let dr = if s < f64::EPSILON {
        v * (2.0 * w.signum())
    } else {
        // Shortest rotation: flip to w >= 0.
        let sign = if w < 0.0 { -1.0 } else { 1.0 };
        v * (sign * 2.0 * s.atan2(w.abs()) / s)
    };
    (dp, dr)
}

/// Joint configuration placing both end-effectors at the given poses.
///
/// Runs damped least squares per arm from `seed_config`, then from
/// perturbed copies of it. A solution must sit within the joint limits, be
/// collision-free and match both poses within the tolerances.
pub fn resolve_goal_configuration(
    model: &RobotModel,
    scene: &Scene,
    eef_pose_left: &RigidTransform,
    eef_pose_right: &RigidTransform,
    seed_config: &JointConfiguration,
) -> Result<JointConfiguration> {
    resolve_with(model, scene, eef_pose_left, eef_pose_right, seed_config, &IkParams::default())
        .map(|r| r.configuration)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Resolved {
    pub configuration: JointConfiguration,
    /// Seeds tried, the unperturbed one included.
    pub attempts: usize,
}

pub fn resolve_with(
    model: &RobotModel,
    scene: &Scene,
    eef_pose_left: &RigidTransform,
    eef_pose_right: &RigidTransform,
    seed_config: &JointConfiguration,
    params: &IkParams,
) -> Result<Resolved> {
    model.check_configuration(seed_config)?;
    let pairs = CollisionPairs::new(model, scene)?;
    let limits = model.limits();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut last = String::from("no attempt");
    for attempt in 0..=params.restarts {
        let mut q = seed_config.clone();
        if attempt > 0 {
            for (v, l) in q.iter_mut().zip(&limits) {
                *v = l.clamp(*v + rng.random_range(-params.restart_spread..=params.restart_spread));
            }
        } else {
            for (v, l) in q.iter_mut().zip(&limits) {
                *v = l.clamp(*v);
            }
        }
        let mut worst = (0.0f64, 0.0f64);
        for (arm, target) in [(Arm::Left, eef_pose_left), (Arm::Right, eef_pose_right)] {
            let (p, r) = solve_arm(model, &mut q, arm, target, params)?;
            // f64::max would drop a NaN residual.
            worst = if p.is_nan() || r.is_nan() {
                (f64::INFINITY, f64::INFINITY)
            } else {
                (worst.0.max(p), worst.1.max(r))
            };
        }
        if !(worst.0 <= params.position_tolerance && worst.1 <= params.angle_tolerance) {
            last = format!("residual {:.4} m / {:.4} rad", worst.0, worst.1);
            continue;
        }
        let clearance = pairs.min_clearance(&model.forward_kinematics(&q)?);
        if clearance.distance < 0.0 {
            last = format!("solution in collision ({:?})", clearance.pair);
            continue;
        }
        return Ok(Resolved {
            configuration: q,
            attempts: attempt + 1,
        });
    }
    Err(Error::Resolution(format!(
        "no solution after {} attempts, last: {last}",
        params.restarts + 1
    )))
}

/// Iterates one arm's joints in place; returns the final position and angle residuals.
fn solve_arm(
    model: &RobotModel,
    q: &mut JointConfiguration,
    arm: Arm,
    target: &RigidTransform,
    params: &IkParams,
) -> Result<(f64, f64)> {
    let offset = model.joint_offset(arm);
    let n = model.arm_dof(arm);
    let limits = model.limits();
    let lambda2 = params.damping * params.damping;
    for _ in 0..params.max_iterations {
        let frames = model.forward_kinematics(q)?;
        let (dp, dr) = pose_error(target, frames.get(model.eef_frame(arm)));
        if dp.norm() < params.convergence && dr.norm() < params.convergence {
            break;
        }
        let jac = model.eef_jacobian(&frames, arm);
        let err = DVector::from_iterator(6, dp.iter().chain(dr.iter()).copied());
        let jjt = &jac * jac.transpose() + DMatrix::identity(6, 6) * lambda2;
        let Some(chol) = jjt.cholesky() else { break };
        let mut step = jac.transpose() * chol.solve(&err);
        if !step.iter().all(|v| v.is_finite()) {
            break;
        }
        let largest = step.amax();
        if largest > params.max_step {
            step *= params.max_step / largest;
        }
        for k in 0..n {
            let i = offset + k;
            q[i] = limits[i].clamp(q[i] + step[k]);
        }
    }
    let frames = model.forward_kinematics(q)?;
    let (dp, dr) = pose_error(target, frames.get(model.eef_frame(arm)));
    Ok((dp.norm(), dr.norm()))
}
