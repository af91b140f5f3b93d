//! Six-term transition cost with the kinematic-chain closure penalty.
//!
//! A transition `theta_i -> theta_i+1` is evaluated at its two keyframes
//! plus `interior_samples` evenly spaced interpolated configurations. The
//! closure term takes the maximum translation and orientation penalties over
//! those samples; the collision, limit, orientation and torque terms average
//! their per-sample values; the duration term depends on the keyframes only.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::collision::{CollisionPairs, Scene};
use crate::error::{Error, Result};
use crate::kinematics::{
    Arm, EndEffectorRelativePose, FramePoses, JointConfiguration, JointLimits, RobotModel,
    Trajectory,
};
use crate::math::Rpy;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TermWeights {
    pub obstacle: f64,
    pub limits: f64,
    pub orientation: f64,
    pub duration: f64,
    pub torque: f64,
}

impl Default for TermWeights {
    fn default() -> Self {
        Self {
            obstacle: 1.0,
            limits: 1.0,
            orientation: 1.0,
            duration: 1.0,
            torque: 1.0,
        }
    }
}

/// Fixed world orientation an end-effector has to keep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrientationTarget {
    pub rpy: [f64; 3],
    /// Largest allowed wrapped per-component deviation, radians.
    pub tolerance: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrientationConstraints {
    pub left: Option<OrientationTarget>,
    pub right: Option<OrientationTarget>,
}

impl OrientationConstraints {
    pub fn get(&self, arm: Arm) -> Option<&OrientationTarget> {
        match arm {
            Arm::Left => self.left.as_ref(),
            Arm::Right => self.right.as_ref(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_none() && self.right.is_none()
    }
}

/// Where the closure penalty is evaluated along a transition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClosureSampling {
    Keyframes,
    #[default]
    Interior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    /// Largest allowed translation deviation, meters.
    pub t_max: f64,
    /// Largest allowed orientation deviation, radians.
    pub o_max: f64,
    pub c_ct: f64,
    pub c_co: f64,
    /// Clearance below which the obstacle term becomes positive, meters.
    pub clearance_margin: f64,
    /// Penetration beyond this depth is not penalized further, meters.
    pub penetration_clamp: f64,
    /// Extra cost of every pair in contact, on top of the margin hinge.
    pub contact_penalty: f64,
    pub weights: TermWeights,
    pub orientation_constraints: OrientationConstraints,
    /// Slope of the orientation hinge, per radian.
    pub orientation_gain: f64,
    /// Joint-limit violation that costs 1, radians.
    pub limit_scale: f64,
    /// Constant part of the duration proxy of every transition.
    pub duration_floor: f64,
    pub closure: bool,
    pub closure_sampling: ClosureSampling,
    pub interior_samples: usize,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            t_max: 0.01,
            o_max: 0.05,
            c_ct: 1000.0,
            c_co: 1000.0,
            clearance_margin: 0.02,
            penetration_clamp: 0.05,
            contact_penalty: 100.0,
            weights: TermWeights::default(),
            orientation_constraints: OrientationConstraints::default(),
            orientation_gain: 100.0,
            limit_scale: 0.1,
            duration_floor: 0.01,
            closure: false,
            closure_sampling: ClosureSampling::Interior,
            interior_samples: 4,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Parameter(msg.into()))
            }
        };
        check(
            self.t_max.is_finite() && self.t_max > 0.0,
            "t_max must be positive",
        )?;
        check(
            self.o_max.is_finite() && self.o_max > 0.0,
            "o_max must be positive",
        )?;
        check(
            self.c_ct.is_finite() && self.c_ct > 1.0,
            "c_ct must exceed 1",
        )?;
        check(
            self.c_co.is_finite() && self.c_co > 1.0,
            "c_co must exceed 1",
        )?;
        check(
            self.clearance_margin.is_finite() && self.clearance_margin >= 0.0,
            "clearance_margin must be nonnegative",
        )?;
        check(
            self.penetration_clamp.is_finite() && self.penetration_clamp > 0.0,
            "penetration_clamp must be positive",
        )?;
        check(
            self.contact_penalty.is_finite() && self.contact_penalty >= 0.0,
            "contact_penalty must be nonnegative",
        )?;
        check(
            self.limit_scale.is_finite() && self.limit_scale > 0.0,
            "limit_scale must be positive",
        )?;
        check(
            self.orientation_gain.is_finite() && self.orientation_gain >= 0.0,
            "orientation_gain must be nonnegative",
        )?;
        check(
            self.duration_floor.is_finite() && self.duration_floor >= 0.0,
            "duration_floor must be nonnegative",
        )?;
        let w = self.weights;
        check(
            [w.obstacle, w.limits, w.orientation, w.duration, w.torque]
                .iter()
                .all(|v| v.is_finite() && *v >= 0.0),
            "term weights must be nonnegative",
        )?;
        for arm in Arm::BOTH {
            if let Some(t) = self.orientation_constraints.get(arm) {
                check(
                    t.tolerance.is_finite()
                        && t.tolerance >= 0.0
                        && t.rpy.iter().all(|v| v.is_finite()),
                    "orientation target must be finite with nonnegative tolerance",
                )?;
            }
        }
        Ok(())
    }
}

/// Relative end-effector pose measured at the first keyframe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureReference {
    pub t_desired: Vector3<f64>,
    pub o_desired: Rpy,
}

impl ClosureReference {
    pub fn capture(model: &RobotModel, first: &JointConfiguration) -> Result<Self> {
        Ok(Self::from_pose(&model.relative_eef_pose(first)?))
    }

    pub fn from_pose(pose: &EndEffectorRelativePose) -> Self {
        Self {
            t_desired: pose.translation,
            o_desired: pose.orientation,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureDeviation {
    pub delta_t: Vector3<f64>,
    pub t_dev: f64,
    pub delta_o: Vector3<f64>,
    pub o_dev: f64,
}

impl ClosureDeviation {
    pub fn measure(reference: &ClosureReference, observed: &EndEffectorRelativePose) -> Self {
        let delta_t = (reference.t_desired - observed.translation).abs();
        let delta_o = reference.o_desired.abs_diff(observed.orientation);
        Self {
            delta_t,
            t_dev: delta_t.max(),
            delta_o,
            o_dev: delta_o.max(),
        }
    }
}

/// `t_dev / t_max` below the threshold, `C_ct + C_ct * t_dev` at or above it.
pub fn translation_cost_of(t_dev: f64, params: &CostParams) -> f64 {
    if t_dev >= params.t_max {
        params.c_ct + params.c_ct * t_dev
    } else {
        t_dev / params.t_max
    }
}

/// `o_dev / o_max` below the threshold, `C_co + C_co * o_dev` at or above it.
pub fn orientation_cost_of(o_dev: f64, params: &CostParams) -> f64 {
    if o_dev >= params.o_max {
        params.c_co + params.c_co * o_dev
    } else {
        o_dev / params.o_max
    }
}

pub fn translation_cost(
    model: &RobotModel,
    config: &JointConfiguration,
    reference: &ClosureReference,
    params: &CostParams,
) -> Result<f64> {
    let dev = ClosureDeviation::measure(reference, &model.relative_eef_pose(config)?);
    Ok(translation_cost_of(dev.t_dev, params))
}

pub fn orientation_cost(
    model: &RobotModel,
    config: &JointConfiguration,
    reference: &ClosureReference,
    params: &CostParams,
) -> Result<f64> {
    let dev = ClosureDeviation::measure(reference, &model.relative_eef_pose(config)?);
    Ok(orientation_cost_of(dev.o_dev, params))
}

/// Equal-weight average of the worst translation and orientation penalties.
pub fn closure_cost_of(
    q_ct: impl IntoIterator<Item = f64>,
    q_co: impl IntoIterator<Item = f64>,
) -> f64 {
    let max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0_f64, f64::max);
    0.5 * max(&mut q_ct.into_iter()) + 0.5 * max(&mut q_co.into_iter())
}

/// Obstacle term of one configuration from its pair clearances.
///
/// A hinge on clearance below the margin, plus a jump of `contact_penalty`
/// that grows with depth once a pair touches.
pub fn obstacle_cost(clearances: &[f64], params: &CostParams) -> f64 {
    if params.weights.obstacle == 0.0 {
        return 0.0;
    }
    let margin = params.clearance_margin;
    let scale = if margin > 0.0 {
        margin
    } else {
        params.penetration_clamp
    };
    let sum: f64 = clearances
        .iter()
        .map(|&d| {
            let d = d.max(-params.penetration_clamp);
            let hinge = (margin - d).max(0.0) / scale;
            let contact = if d < 0.0 {
                params.contact_penalty * (1.0 - d / params.penetration_clamp)
            } else {
                0.0
            };
            hinge + contact
        })
        .sum();
    params.weights.obstacle * sum
}

/// Quadratic hinge on joint-limit violations.
pub fn limit_cost(config: &[f64], limits: &[JointLimits], params: &CostParams) -> f64 {
    let sum: f64 = config
        .iter()
        .zip(limits)
        .map(|(&v, l)| (l.violation(v) / params.limit_scale).powi(2))
        .sum();
    params.weights.limits * sum
}

/// Largest wrapped RPY deviation of one end-effector from its fixed target.
pub fn orientation_deviation(
    model: &RobotModel,
    frames: &FramePoses,
    arm: Arm,
    target: &OrientationTarget,
) -> f64 {
    let rpy = frames.get(model.eef_frame(arm)).rpy();
    let t = target.rpy;
    rpy.abs_diff(Rpy::new(t[0], t[1], t[2])).max()
}

/// Hinge on end-effector orientation deviation beyond each target's tolerance.
pub fn orientation_constraint_cost(
    model: &RobotModel,
    frames: &FramePoses,
    params: &CostParams,
) -> f64 {
    let mut sum = 0.0;
    for arm in Arm::BOTH {
        if let Some(target) = params.orientation_constraints.get(arm) {
            let dev = orientation_deviation(model, frames, arm, target);
            sum += (dev - target.tolerance).max(0.0);
        }
    }
    params.weights.orientation * params.orientation_gain * sum
}

/// Duration proxy: a constant floor plus the joint-space length of the transition.
pub fn duration_cost(a: &[f64], b: &[f64], params: &CostParams) -> f64 {
    let len = a
        .iter()
        .zip(b)
        .map(|(x, y)| (y - x) * (y - x))
        .sum::<f64>()
        .sqrt();
    params.weights.duration * (params.duration_floor + len)
}

/// Hinge on static joint torque above each joint's limit.
pub fn torque_cost(torques: &[f64], torque_limits: &[Option<f64>], params: &CostParams) -> f64 {
    let sum: f64 = torques
        .iter()
        .zip(torque_limits)
        .filter_map(|(t, l)| l.map(|l| (t.abs() / l - 1.0).max(0.0)))
        .sum();
    params.weights.torque * sum
}

/// Per-configuration quantities that transitions aggregate.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTerms {
    pub q_c: f64,
    pub q_l: f64,
    pub q_o: f64,
    pub q_t: f64,
    pub q_ct: f64,
    pub q_co: f64,
    pub deviation: Option<ClosureDeviation>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransitionCost {
    pub q_o: f64,
    pub q_l: f64,
    pub q_c: f64,
    pub q_d: f64,
    pub q_t: f64,
    pub q_cc: f64,
    pub total: f64,
}

impl TransitionCost {
    fn new(q_o: f64, q_l: f64, q_c: f64, q_d: f64, q_t: f64, q_cc: f64) -> Self {
        Self {
            q_o,
            q_l,
            q_c,
            q_d,
            q_t,
            q_cc,
            total: q_o + q_l + q_c + q_d + q_t + q_cc,
        }
    }

    pub fn accumulate(&mut self, other: &TransitionCost) {
        self.q_o += other.q_o;
        self.q_l += other.q_l;
        self.q_c += other.q_c;
        self.q_d += other.q_d;
        self.q_t += other.q_t;
        self.q_cc += other.q_cc;
        self.total += other.total;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryCost {
    pub transitions: Vec<TransitionCost>,
    /// Termwise sums over transitions.
    pub breakdown: TransitionCost,
    pub total: f64,
}

/// Evaluates transition costs for one model, scene and parameter set.
#[derive(Clone, Debug)]
pub struct CostEvaluator<'a> {
    model: &'a RobotModel,
    pairs: CollisionPairs,
    params: CostParams,
    reference: Option<ClosureReference>,
    limits: Vec<JointLimits>,
    torque_limits: Vec<Option<f64>>,
}

impl<'a> CostEvaluator<'a> {
    /// `reference` is required when closure is enabled.
    pub fn new(
        model: &'a RobotModel,
        scene: &Scene,
        params: &CostParams,
        reference: Option<ClosureReference>,
    ) -> Result<Self> {
        params.validate()?;
        if params.closure && reference.is_none() {
            return Err(Error::Precondition(
                "closure enabled but no closure reference captured".into(),
            ));
        }
        Ok(Self {
            model,
            pairs: CollisionPairs::new(model, scene)?,
            params: params.clone(),
            reference,
            limits: model.limits(),
            torque_limits: model.joints().map(|j| j.torque_limit).collect(),
        })
    }

    /// Captures the closure reference from the trajectory's first keyframe.
    pub fn for_trajectory(
        model: &'a RobotModel,
        scene: &Scene,
        params: &CostParams,
        trajectory: &Trajectory,
    ) -> Result<Self> {
        let reference = if params.closure {
            Some(ClosureReference::capture(model, trajectory.start())?)
        } else {
            None
        };
        Self::new(model, scene, params, reference)
    }

    pub fn model(&self) -> &RobotModel {
        self.model
    }

    pub fn params(&self) -> &CostParams {
        &self.params
    }

    pub fn reference(&self) -> Option<&ClosureReference> {
        self.reference.as_ref()
    }

    pub fn pairs(&self) -> &CollisionPairs {
        &self.pairs
    }

    pub fn sample(&self, config: &JointConfiguration) -> Result<SampleTerms> {
        let frames = self.model.forward_kinematics(config)?;
        Ok(self.sample_frames(config, &frames))
    }

    fn sample_frames(&self, config: &JointConfiguration, frames: &FramePoses) -> SampleTerms {
        let p = &self.params;
        let q_c = obstacle_cost(&self.pairs.clearances_within(frames, p.clearance_margin), p);
        let q_l = limit_cost(config, &self.limits, p);
        let q_o = orientation_constraint_cost(self.model, frames, p);
        let q_t = if p.weights.torque > 0.0 {
            torque_cost(
                &self.model.static_gravity_torques_from(frames),
                &self.torque_limits,
                p,
            )
        } else {
            0.0
        };
        let (q_ct, q_co, deviation) = match (&self.reference, p.closure) {
            (Some(r), true) => {
                let dev = ClosureDeviation::measure(r, &self.model.relative_eef_pose_from(frames));
                (
                    translation_cost_of(dev.t_dev, p),
                    orientation_cost_of(dev.o_dev, p),
                    Some(dev),
                )
            }
            _ => (0.0, 0.0, None),
        };
        SampleTerms {
            q_c,
            q_l,
            q_o,
            q_t,
            q_ct,
            q_co,
            deviation,
        }
    }

    fn interior(&self, a: &JointConfiguration, b: &JointConfiguration) -> Result<Vec<SampleTerms>> {
        let m = self.params.interior_samples;
        (1..=m)
            .map(|k| self.sample(&JointConfiguration::lerp(a, b, k as f64 / (m + 1) as f64)))
            .collect()
    }

    fn combine(
        &self,
        a: &JointConfiguration,
        b: &JointConfiguration,
        start: &SampleTerms,
        end: &SampleTerms,
        interior: &[SampleTerms],
    ) -> TransitionCost {
        let all = || {
            std::iter::once(start)
                .chain(interior.iter())
                .chain(std::iter::once(end))
        };
        let count = (interior.len() + 2) as f64;
        let mean = |f: fn(&SampleTerms) -> f64| all().map(f).sum::<f64>() / count;
        let q_cc = if self.params.closure {
            match self.params.closure_sampling {
                ClosureSampling::Interior => {
                    closure_cost_of(all().map(|s| s.q_ct), all().map(|s| s.q_co))
                }
                ClosureSampling::Keyframes => {
                    closure_cost_of([start.q_ct, end.q_ct], [start.q_co, end.q_co])
                }
            }
        } else {
            0.0
        };
        TransitionCost::new(
            mean(|s| s.q_o),
            mean(|s| s.q_l),
            mean(|s| s.q_c),
            duration_cost(a, b, &self.params),
            mean(|s| s.q_t),
            q_cc,
        )
    }

    /// Cost of moving from `a` to `b`.
    pub fn transition(
        &self,
        a: &JointConfiguration,
        b: &JointConfiguration,
    ) -> Result<TransitionCost> {
        let start = self.sample(a)?;
        let end = self.sample(b)?;
        let interior = self.interior(a, b)?;
        Ok(self.combine(a, b, &start, &end, &interior))
    }

    /// Per-transition costs and their sum; keyframe samples are shared
    /// between neighbouring transitions.
    pub fn trajectory(&self, trajectory: &Trajectory) -> Result<TrajectoryCost> {
        let frames = trajectory.keyframes();
        let samples: Vec<SampleTerms> = frames
            .iter()
            .map(|k| self.sample(k))
            .collect::<Result<_>>()?;
        let mut transitions = Vec::with_capacity(frames.len() - 1);
        let mut breakdown = TransitionCost::default();
        for i in 0..frames.len() - 1 {
            let interior = self.interior(&frames[i], &frames[i + 1])?;
            let t = self.combine(
                &frames[i],
                &frames[i + 1],
                &samples[i],
                &samples[i + 1],
                &interior,
            );
            breakdown.accumulate(&t);
            transitions.push(t);
        }
        let total = transitions.iter().map(|t| t.total).sum();
        Ok(TrajectoryCost {
            transitions,
            breakdown,
            total,
        })
    }
}

/// All six terms of one transition.
pub fn transition_cost(
    theta_i: &JointConfiguration,
    theta_i1: &JointConfiguration,
    model: &RobotModel,
    scene: &Scene,
    reference: Option<&ClosureReference>,
    params: &CostParams,
) -> Result<TransitionCost> {
    CostEvaluator::new(model, scene, params, reference.copied())?.transition(theta_i, theta_i1)
}

/// Closure term of one transition under the configured sampling.
pub fn closure_cost(
    model: &RobotModel,
    theta_i: &JointConfiguration,
    theta_i1: &JointConfiguration,
    reference: &ClosureReference,
    params: &CostParams,
) -> Result<f64> {
    let mut configs = vec![theta_i.clone(), theta_i1.clone()];
    if params.closure_sampling == ClosureSampling::Interior {
        let m = params.interior_samples;
        configs.extend(
            (1..=m).map(|k| JointConfiguration::lerp(theta_i, theta_i1, k as f64 / (m + 1) as f64)),
        );
    }
    let mut q_ct = Vec::with_capacity(configs.len());
    let mut q_co = Vec::with_capacity(configs.len());
    for c in &configs {
        let dev = ClosureDeviation::measure(reference, &model.relative_eef_pose(c)?);
        q_ct.push(translation_cost_of(dev.t_dev, params));
        q_co.push(orientation_cost_of(dev.o_dev, params));
    }
    Ok(closure_cost_of(q_ct, q_co))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn translation_branches() {
        let p = CostParams::default();
        assert_eq!(translation_cost_of(0.0, &p), 0.0);
        assert!((translation_cost_of(0.005, &p) - 0.5).abs() <= 1e-12);
        assert!((translation_cost_of(0.02, &p) - 1020.0).abs() <= 1e-12);
        // The threshold itself belongs to the penalty branch.
        assert!((translation_cost_of(0.01, &p) - 1010.0).abs() <= 1e-12);
    }

    #[test]
    fn orientation_branches() {
        let p = CostParams::default();
        assert_eq!(orientation_cost_of(0.0, &p), 0.0);
        assert!((orientation_cost_of(0.025, &p) - 0.5).abs() <= 1e-12);
        assert!((orientation_cost_of(0.1, &p) - 1100.0).abs() <= 1e-12);
    }

    #[test]
    fn closure_average() {
        assert!((closure_cost_of([0.1, 0.4, 0.2], [0.2, 0.05]) - 0.3).abs() <= 1e-12);
        assert!((closure_cost_of([1020.0, 0.3], [0.0, 0.0]) - 510.0).abs() <= 1e-12);
        assert_eq!(closure_cost_of([0.0, 0.0], [0.0, 0.0]), 0.0);
    }

    #[test]
    fn limit_boundary() {
        let p = CostParams::default();
        let l = [JointLimits::new(-1.0, 1.0)];
        assert_eq!(limit_cost(&[1.0], &l, &p), 0.0);
        assert!(limit_cost(&[1.0 + 1e-6], &l, &p) > 0.0);
        let a = limit_cost(&[1.05], &l, &p);
        let b = limit_cost(&[1.1], &l, &p);
        assert!(b > a && a > 0.0);
    }

    #[test]
    fn obstacle_zero_beyond_margin_and_clamped() {
        let p = CostParams::default();
        assert_eq!(obstacle_cost(&[0.02, 0.5], &p), 0.0);
        let deep = obstacle_cost(&[-1.0], &p);
        let clamp = obstacle_cost(&[-p.penetration_clamp], &p);
        assert_eq!(deep, clamp);
        assert!(obstacle_cost(&[0.0], &p) > 0.0);
        assert!(obstacle_cost(&[-1e-6], &p) > p.contact_penalty);
    }

    #[test]
    fn torque_hinge() {
        let p = CostParams::default();
        assert_eq!(
            torque_cost(&[5.0, -9.0], &[Some(10.0), Some(10.0)], &p),
            0.0
        );
        assert!((torque_cost(&[-15.0, 1.0], &[Some(10.0), None], &p) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = CostParams {
            c_ct: 1.0,
            ..CostParams::default()
        };
        assert!(p.validate().is_err());
        let p = CostParams {
            t_max: 0.0,
            ..CostParams::default()
        };
        assert!(p.validate().is_err());
    }
}
