//! Stochastic trajectory optimization in dual-arm joint space.
//!
//! Each iteration draws `rollouts` smoothed noise perturbations of the
//! interior keyframes, scores every rollout with the transition cost, and
//! moves each interior keyframe to a soft-min weighted average of the
//! rollouts at that keyframe. The first and last keyframes never change.
//! The lowest-cost trajectory seen so far is kept; the search restarts from
//! the linear seed after a stagnation window. The run stops as soon as the
//! best trajectory passes the dense validity check.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::collision::{CollisionPairs, Scene};
use crate::costs::{
    orientation_deviation, ClosureDeviation, ClosureReference, CostEvaluator, CostParams,
    TransitionCost,
};
use crate::error::{Error, Result};
use crate::kinematics::{linear_seed, Arm, JointConfiguration, RobotModel, Trajectory};

/// How per-joint white noise is correlated along the keyframe axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseSmoothing {
    /// Covariance proportional to the inverse of the finite-difference
    /// acceleration metric with the endpoints held fixed.
    Acceleration,
    /// Gaussian kernel over keyframe index with the given width.
    Gaussian {
        width: f64,
    },
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub keyframes: usize,
    pub rollouts: usize,
    /// Largest per-keyframe perturbation standard deviation, radians.
    pub noise_std: f64,
    pub smoothing: NoiseSmoothing,
    /// Noise scale multiplier applied after every iteration without improvement.
    pub noise_decay: f64,
    /// Lower bound on the noise scale multiplier.
    pub noise_floor: f64,
    pub max_iterations: usize,
    /// Wall-clock budget, seconds.
    pub budget: f64,
    /// Iterations without sufficient best-cost improvement before a restart.
    pub convergence_window: usize,
    /// Relative best-cost improvement that counts as progress over the window.
    pub convergence_threshold: f64,
    /// Soft-min temperature on min-max normalized costs.
    pub temperature: f64,
    /// Samples per transition used by the validity check.
    pub validity_samples: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            keyframes: 20,
            rollouts: 16,
            noise_std: 0.02,
            smoothing: NoiseSmoothing::Acceleration,
            noise_decay: 0.97,
            noise_floor: 0.2,
            max_iterations: 500,
            budget: 10.0,
            convergence_window: 50,
            convergence_threshold: 1e-4,
            temperature: 1.0 / 100f64.ln(),
            validity_samples: 20,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Parameter(msg.into()))
            }
        };
        check(self.rollouts >= 2, "need at least 2 rollouts")?;
        check(self.keyframes >= 3, "need at least 3 keyframes")?;
        check(
            self.budget.is_finite() && self.budget > 0.0,
            "budget must be positive",
        )?;
        check(
            self.noise_std.is_finite() && self.noise_std >= 0.0,
            "noise_std must be nonnegative",
        )?;
        check(
            self.temperature.is_finite() && self.temperature > 0.0,
            "temperature must be positive",
        )?;
        check(
            self.noise_decay > 0.0 && self.noise_decay <= 1.0,
            "noise_decay must lie in (0, 1]",
        )?;
        check(
            self.noise_floor > 0.0 && self.noise_floor <= 1.0,
            "noise_floor must lie in (0, 1]",
        )?;
        check(
            self.validity_samples >= 2,
            "validity check needs at least 2 samples per transition",
        )?;
        if let NoiseSmoothing::Gaussian { width } = self.smoothing {
            check(
                width.is_finite() && width > 0.0,
                "gaussian smoothing width must be positive",
            )?;
        }
        Ok(())
    }
}

/// Kind of constraint a dense sample violated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    Collision {
        clearance: f64,
        pair: (String, String),
    },
    JointLimit {
        joint: String,
        excess: f64,
    },
    ClosureTranslation {
        t_dev: f64,
    },
    ClosureOrientation {
        o_dev: f64,
    },
    EefOrientation {
        arm: Arm,
        deviation: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub transition: usize,
    pub sample: usize,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
    pub min_clearance: f64,
    pub max_t_dev: f64,
    pub max_o_dev: f64,
    pub max_eef_orientation_dev: f64,
    /// Closure deviation per dense sample (transition-major), for plotting.
    pub t_dev_trace: Vec<f64>,
    pub o_dev_trace: Vec<f64>,
}

/// Dense check of a trajectory: clearance, limits, closure and fixed
/// end-effector orientations at `samples_per_transition` points of every
/// transition. The closure reference is taken from the first keyframe.
pub fn is_valid(
    trajectory: &Trajectory,
    model: &RobotModel,
    scene: &Scene,
    params: &CostParams,
    samples_per_transition: usize,
) -> Result<ValidityReport> {
    let pairs = CollisionPairs::new(model, scene)?;
    let reference = if params.closure {
        Some(ClosureReference::capture(model, trajectory.start())?)
    } else {
        None
    };
    check_validity(
        trajectory,
        model,
        &pairs,
        params,
        reference.as_ref(),
        samples_per_transition,
    )
}

fn check_validity(
    trajectory: &Trajectory,
    model: &RobotModel,
    pairs: &CollisionPairs,
    params: &CostParams,
    reference: Option<&ClosureReference>,
    samples_per_transition: usize,
) -> Result<ValidityReport> {
    let samples = samples_per_transition.max(2);
    let limits = model.limits();
    let names: Vec<&str> = model.joints().map(|j| j.name.as_str()).collect();
    let mut report = ValidityReport {
        valid: true,
        violations: Vec::new(),
        min_clearance: f64::INFINITY,
        max_t_dev: 0.0,
        max_o_dev: 0.0,
        max_eef_orientation_dev: 0.0,
        t_dev_trace: Vec::new(),
        o_dev_trace: Vec::new(),
    };
    for i in 0..trajectory.len() - 1 {
        // The last sample of a transition coincides with the first of the next.
        let last = if i + 2 == trajectory.len() {
            samples
        } else {
            samples - 1
        };
        for s in 0..last {
            let config = trajectory.sample(i, s as f64 / (samples - 1) as f64);
            let frames = model.forward_kinematics(&config)?;
            let mut push = |kind| {
                report.violations.push(Violation {
                    transition: i,
                    sample: s,
                    kind,
                })
            };
            let clearance = pairs.min_clearance(&frames);
            report.min_clearance = report.min_clearance.min(clearance.distance);
            if clearance.distance < 0.0 {
                push(ViolationKind::Collision {
                    clearance: clearance.distance,
                    pair: clearance.pair.unwrap_or_default(),
                });
            }
            for (k, (v, l)) in config.iter().zip(&limits).enumerate() {
                let excess = l.violation(*v);
                if excess > 0.0 {
                    push(ViolationKind::JointLimit {
                        joint: names[k].to_owned(),
                        excess,
                    });
                }
            }
            for arm in Arm::BOTH {
                if let Some(target) = params.orientation_constraints.get(arm) {
                    let deviation = orientation_deviation(model, &frames, arm, target);
                    report.max_eef_orientation_dev = report.max_eef_orientation_dev.max(deviation);
                    if deviation >= target.tolerance {
                        push(ViolationKind::EefOrientation { arm, deviation });
                    }
                }
            }
            if let (true, Some(r)) = (params.closure, reference) {
                let dev = ClosureDeviation::measure(r, &model.relative_eef_pose_from(&frames));
                report.max_t_dev = report.max_t_dev.max(dev.t_dev);
                report.max_o_dev = report.max_o_dev.max(dev.o_dev);
                report.t_dev_trace.push(dev.t_dev);
                report.o_dev_trace.push(dev.o_dev);
                if dev.t_dev >= params.t_max {
                    push(ViolationKind::ClosureTranslation { t_dev: dev.t_dev });
                }
                if dev.o_dev >= params.o_max {
                    push(ViolationKind::ClosureOrientation { o_dev: dev.o_dev });
                }
            }
        }
    }
    report.valid = report.violations.is_empty();
    Ok(report)
}

/// Draws correlated noise for the interior keyframes of every joint.
#[derive(Clone, Debug)]
pub struct NoiseSampler {
    /// Lower-triangular factor of the per-joint keyframe covariance,
    /// scaled so its largest marginal standard deviation is 1.
    factor: DMatrix<f64>,
    dof: usize,
}

impl NoiseSampler {
    pub fn new(keyframes: usize, dof: usize, smoothing: NoiseSmoothing) -> Result<Self> {
        if keyframes < 3 {
            return Err(Error::Parameter(
                "need at least 3 keyframes for interior noise".into(),
            ));
        }
        let n = keyframes - 2;
        let cov = match smoothing {
            NoiseSmoothing::None => DMatrix::identity(n, n),
            NoiseSmoothing::Gaussian { width } => DMatrix::from_fn(n, n, |i, j| {
                let d = i as f64 - j as f64;
                (-0.5 * d * d / (width * width)).exp() + if i == j { 1e-9 } else { 0.0 }
            }),
            NoiseSmoothing::Acceleration => {
                // Second differences over all keyframes; endpoint columns dropped
                // because endpoint perturbations are zero.
                let mut a = DMatrix::zeros(keyframes, n);
                for row in 0..keyframes {
                    for (offset, coeff) in [(-1i64, 1.0), (0, -2.0), (1, 1.0)] {
                        let k = row as i64 + offset;
                        if k >= 1 && (k as usize) < keyframes - 1 {
                            a[(row, k as usize - 1)] = coeff;
                        }
                    }
                }
                let r = a.transpose() * a;
                r.try_inverse()
                    .ok_or_else(|| Error::Parameter("acceleration metric is singular".into()))?
            }
        };
        let max_var = cov.diagonal().max();
        let cov = cov / max_var;
        let factor = cov
            .cholesky()
            .ok_or_else(|| Error::Parameter("noise covariance is not positive definite".into()))?
            .l();
        Ok(Self { factor, dof })
    }

    pub fn interior_len(&self) -> usize {
        self.factor.nrows()
    }

    /// One rollout's perturbation: `interior_len` rows of `dof` values.
    // Column-major on purpose: one joint's whole noise sequence per draw.
    #[allow(clippy::needless_range_loop)]
    pub fn draw(&self, std: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let n = self.interior_len();
        let mut out = vec![vec![0.0; self.dof]; n];
        for j in 0..self.dof {
            let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
            let e = &self.factor * z;
            for i in 0..n {
                out[i][j] = std * e[i];
            }
        }
        out
    }
}

/// `config.rollouts` perturbed copies of `base`; only interior keyframes move.
pub fn sample_rollouts(
    base: &Trajectory,
    config: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Trajectory>> {
    let sampler = NoiseSampler::new(base.len(), base.dof(), config.smoothing)?;
    Ok((0..config.rollouts)
        .map(|_| perturb(base, &sampler.draw(config.noise_std, rng)))
        .collect())
}

fn perturb(base: &Trajectory, noise: &[Vec<f64>]) -> Trajectory {
    let mut t = base.clone();
    for (frame, eps) in t.interior_mut().iter_mut().zip(noise) {
        for (v, e) in frame.iter_mut().zip(eps) {
            *v += e;
        }
    }
    t
}

/// Soft-min weights of `costs` (one per rollout) at one keyframe.
///
/// Non-finite costs get zero weight; the best rollout's weight is
/// `exp(1 / temperature)` times the worst finite one's.
pub fn softmin_weights(costs: &[f64], temperature: f64) -> Result<Vec<f64>> {
    let finite: Vec<f64> = costs.iter().copied().filter(|c| c.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::Update("all rollout costs are non-finite".into()));
    }
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let raw: Vec<f64> = costs
        .iter()
        .map(|&c| {
            if !c.is_finite() {
                0.0
            } else if range > 0.0 {
                (-(c - min) / (range * temperature)).exp()
            } else {
                1.0
            }
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / sum).collect())
}

/// Cost-weighted combination of rollouts.
///
/// `rollout_costs[k][i]` is rollout `k`'s local cost at keyframe `i`. Each
/// interior keyframe of the result is a convex combination of the rollouts'
/// keyframes with soft-min weights; endpoints are copied from `base`.
pub fn update(
    base: &Trajectory,
    rollouts: &[Trajectory],
    rollout_costs: &[Vec<f64>],
    config: &OptimizerConfig,
) -> Result<Trajectory> {
    if rollouts.is_empty() || rollouts.len() != rollout_costs.len() {
        return Err(Error::Update("rollout and cost counts differ".into()));
    }
    let n = base.len();
    if rollouts
        .iter()
        .any(|r| r.len() != n || r.dof() != base.dof())
        || rollout_costs.iter().any(|c| c.len() != n)
    {
        return Err(Error::Update(
            "rollout shapes do not match the base trajectory".into(),
        ));
    }
    let mut next = base.clone();
    let mut column = vec![0.0; rollouts.len()];
    for (offset, frame) in next.interior_mut().iter_mut().enumerate() {
        let i = offset + 1;
        for (k, c) in rollout_costs.iter().enumerate() {
            column[k] = c[i];
        }
        let weights = softmin_weights(&column, config.temperature)?;
        for (j, v) in frame.iter_mut().enumerate() {
            *v = rollouts
                .iter()
                .zip(&weights)
                .map(|(r, w)| w * r.keyframes()[i][j])
                .sum();
        }
    }
    Ok(next)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub trajectory: Trajectory,
    pub success: bool,
    /// Success reached before the first restart.
    pub first_attempt_success: bool,
    pub wall_time: f64,
    pub iterations: usize,
    pub restarts: usize,
    /// Total cost of the current trajectory after every iteration.
    pub cost_history: Vec<f64>,
    /// Best total cost so far after every iteration; nonincreasing.
    pub best_cost_history: Vec<f64>,
    pub final_cost: TransitionCost,
    pub validity: ValidityReport,
}

impl OptimizationResult {
    pub fn max_t_dev(&self) -> f64 {
        self.validity.max_t_dev
    }

    pub fn max_o_dev(&self) -> f64 {
        self.validity.max_o_dev
    }
}

fn local_costs(costs: &[TransitionCost], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let before = if i > 0 { costs[i - 1].total } else { 0.0 };
            let after = if i + 1 < n { costs[i].total } else { 0.0 };
            before + after
        })
        .collect()
}

/// Plans a trajectory from `start` to `goal`; endpoints stay bit-identical.
pub fn optimize(
    model: &RobotModel,
    scene: &Scene,
    start: &JointConfiguration,
    goal: &JointConfiguration,
    cost_params: &CostParams,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    let clock = Instant::now();
    config.validate()?;
    cost_params.validate()?;
    let pairs = CollisionPairs::new(model, scene)?;
    for (label, q) in [("start", start), ("goal", goal)] {
        let frames = model
            .forward_kinematics(q)
            .map_err(|e| Error::Precondition(format!("{label}: {e}")))?;
        if let Some((k, _)) = q
            .iter()
            .zip(model.limits())
            .enumerate()
            .find(|(_, (v, l))| l.violation(**v) > 0.0)
        {
            return Err(Error::Precondition(format!(
                "{label} violates the limit of joint {k}"
            )));
        }
        let c = pairs.min_clearance(&frames);
        if c.distance < 0.0 {
            return Err(Error::Precondition(format!(
                "{label} is in collision ({:?}, clearance {:.4})",
                c.pair, c.distance
            )));
        }
    }

    let seed = linear_seed(start, goal, config.keyframes)?;
    let evaluator = CostEvaluator::for_trajectory(model, scene, cost_params, &seed)?;
    let reference = evaluator.reference().copied();
    let validate = |t: &Trajectory| {
        check_validity(
            t,
            model,
            &pairs,
            cost_params,
            reference.as_ref(),
            config.validity_samples,
        )
    };
    let sampler = NoiseSampler::new(config.keyframes, model.dof(), config.smoothing)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut current = seed.clone();
    let mut current_cost = evaluator.trajectory(&current)?;
    let mut best = current.clone();
    let mut best_cost = current_cost.clone();
    let mut report = validate(&best)?;
    let mut success = report.valid;
    let mut cost_history = Vec::new();
    let mut best_history = Vec::new();
    let mut iterations = 0;
    let mut restarts = 0;
    let mut run_best = current_cost.total;
    let mut window_start = run_best;
    let mut since_window = 0;
    let mut noise_scale = 1.0;

    while !success
        && iterations < config.max_iterations
        && clock.elapsed().as_secs_f64() < config.budget
    {
        iterations += 1;
        let std = config.noise_std * noise_scale;
        // Noise is drawn up front so rollout scoring order cannot affect the result.
        let rollouts: Vec<Trajectory> = (0..config.rollouts)
            .map(|_| perturb(&current, &sampler.draw(std, &mut rng)))
            .collect();
        let scored: Vec<(Trajectory, f64, Vec<f64>)> = rollouts
            .into_iter()
            .map(|r| {
                let c = evaluator.trajectory(&r)?;
                let local = local_costs(&c.transitions, r.len());
                Ok((r, c.total, local))
            })
            .collect::<Result<_>>()?;
        let (rollouts, rest): (Vec<Trajectory>, Vec<(f64, Vec<f64>)>) =
            scored.into_iter().map(|(r, t, l)| (r, (t, l))).unzip();
        let (totals, locals): (Vec<f64>, Vec<Vec<f64>>) = rest.into_iter().unzip();

        current = update(&current, &rollouts, &locals, config)?;
        current_cost = evaluator.trajectory(&current)?;

        let (best_rollout, best_rollout_total) = totals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, t)| (k, *t))
            .expect("at least two rollouts");
        let mut candidate: Option<(Trajectory, f64)> = None;
        if current_cost.total < best_cost.total {
            candidate = Some((current.clone(), current_cost.total));
        }
        if best_rollout_total < candidate.as_ref().map_or(best_cost.total, |c| c.1) {
            candidate = Some((rollouts[best_rollout].clone(), best_rollout_total));
        }
        let improved_run = current_cost.total.min(best_rollout_total) < run_best;
        if best_rollout_total < current_cost.total {
            current = rollouts[best_rollout].clone();
            current_cost = evaluator.trajectory(&current)?;
        }
        if let Some((traj, _)) = candidate {
            best_cost = evaluator.trajectory(&traj)?;
            best = traj;
            if plausibly_valid(&best_cost, cost_params) {
                report = validate(&best)?;
                success = report.valid;
            }
        }
        if improved_run {
            run_best = current_cost.total.min(run_best);
        } else {
            noise_scale = (noise_scale * config.noise_decay).max(config.noise_floor);
        }
        cost_history.push(current_cost.total);
        best_history.push(best_cost.total);

        since_window += 1;
        if since_window >= config.convergence_window {
            let progress = (window_start - run_best) / window_start.abs().max(1e-12);
            if progress < config.convergence_threshold && !success {
                restarts += 1;
                current = seed.clone();
                current_cost = evaluator.trajectory(&current)?;
                run_best = current_cost.total;
                noise_scale = 1.0;
            }
            window_start = run_best;
            since_window = 0;
        }
    }
    if !success {
        report = validate(&best)?;
        success = report.valid;
    }
    let wall_time = clock.elapsed().as_secs_f64();
    Ok(OptimizationResult {
        first_attempt_success: success && restarts == 0,
        trajectory: best,
        success,
        wall_time,
        iterations,
        restarts,
        cost_history,
        best_cost_history: best_history,
        final_cost: best_cost.breakdown,
        validity: report,
    })
}

/// Cheap filter before the dense check: no sampled configuration sits in a
/// closure penalty branch, beyond a joint limit, or outside an orientation
/// tolerance.
fn plausibly_valid(cost: &crate::costs::TrajectoryCost, params: &CostParams) -> bool {
    cost.transitions
        .iter()
        .all(|t| (!params.closure || t.q_cc < 1.0) && t.q_l == 0.0 && t.q_o == 0.0)
}
