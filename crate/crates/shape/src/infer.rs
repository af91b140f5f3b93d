//! Latent shape and rigid pose from a partial observation.
//!
//! Minimizes `sum_i w_i |R (y_c(i) + D_c(i)(z)) + t - x_i|^2 + lambda |z|^2`
//! where `c(i)` is the model point nearest to observed point `x_i`, refreshed
//! once per outer iteration. Each inner step is a block-preconditioned
//! gradient step on translation, rotation (about the matched centroid) and
//! latent coordinates, shortened by halving until the objective does not
//! increase.

use dualarm_core::RigidTransform;
use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloud::{nearest_indices, PointCloud};
use crate::error::{Error, Result};
use crate::space::ShapeSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Weight proportional to the squared distance to the k-th nearest
    /// neighbour, so sparsely sampled regions count as much as dense ones.
    InverseDensity,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceParams {
    /// Weight of the squared latent norm.
    pub regularization: f64,
    pub weighting: Weighting,
    pub density_neighbors: usize,
    pub max_outer_iterations: usize,
    pub inner_steps: usize,
    pub max_halvings: usize,
    /// Relative objective decrease per outer iteration that counts as converged.
    pub tolerance: f64,
    /// Yaw offsets about the canonical vertical axis tried from the initial pose, radians.
    pub yaw_restarts: Vec<f64>,
    /// Observation-frame axis the rotation may turn about; `None` leaves it free.
    /// Objects resting on a surface use the surface normal.
    pub rotation_axis: Option<[f64; 3]>,
}

impl Default for InferenceParams {
    fn default() -> Self {
        Self {
            regularization: 0.01,
            weighting: Weighting::InverseDensity,
            density_neighbors: 8,
            max_outer_iterations: 80,
            inner_steps: 10,
            max_halvings: 40,
            tolerance: 1e-9,
            yaw_restarts: vec![0.0, 0.25, -0.25],
            rotation_axis: None,
        }
    }
}

impl InferenceParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::Parameter(msg.into())) };
        check(
            self.regularization.is_finite() && self.regularization >= 0.0,
            "regularization must be nonnegative",
        )?;
        check(self.density_neighbors >= 1, "density_neighbors must be at least 1")?;
        check(self.max_outer_iterations >= 1, "max_outer_iterations must be at least 1")?;
        check(self.inner_steps >= 1, "inner_steps must be at least 1")?;
        check(self.tolerance.is_finite() && self.tolerance >= 0.0, "tolerance must be nonnegative")?;
        check(
            !self.yaw_restarts.is_empty() && self.yaw_restarts.iter().all(|y| y.is_finite()),
            "need at least one finite yaw start",
        )?;
        check(
            self.rotation_axis
                .is_none_or(|a| a.iter().all(|v| v.is_finite()) && Vector3::from(a).norm() > 1e-9),
            "rotation axis must be finite and nonzero",
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentDescriptor {
    pub coordinates: DVector<f64>,
    /// Canonical frame to observation frame.
    pub alignment: RigidTransform,
    /// Weighted mean distance from observed points to the model, meters.
    pub residual: f64,
    pub converged: bool,
    /// Objective after every correspondence refresh and accepted step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

impl LatentDescriptor {
    pub fn new(coordinates: DVector<f64>, alignment: RigidTransform) -> Self {
        Self {
            coordinates,
            alignment,
            residual: 0.0,
            converged: true,
            objective_trace: Vec::new(),
            iterations: 0,
        }
    }
}

/// Per-point weights with mean 1.
pub fn point_weights(cloud: &PointCloud, weighting: Weighting, neighbors: usize) -> Vec<f64> {
    let n = cloud.len();
    let raw: Vec<f64> = match (cloud.weights(), weighting) {
        (Some(w), _) => w.to_vec(),
        (None, Weighting::Uniform) => vec![1.0; n],
        (None, Weighting::InverseDensity) => {
            let k = neighbors.min(n - 1);
            let pts = cloud.points();
            let mut w = Vec::with_capacity(n);
            let mut d = Vec::with_capacity(n);
            for p in pts {
                d.clear();
                d.extend(pts.iter().map(|q| (p - q).norm_squared()));
                d.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
                w.push(d[k]);
            }
            w
        }
    };
    let sum: f64 = raw.iter().sum();
    if !(sum > 0.0) || raw.iter().any(|w| !w.is_finite()) {
        return vec![1.0; n];
    }
    raw.iter().map(|w| w * n as f64 / sum).collect()
}

struct Problem<'a> {
    observed: &'a [Vector3<f64>],
    weights: Vec<f64>,
    weight_sum: f64,
    /// Canonical point plus mean displacement.
    base: Vec<Vector3<f64>>,
    /// Active basis rows per canonical point, `3 x a`.
    rows: Vec<DMatrix<f64>>,
    active: usize,
    lambda: f64,
    axis: Option<Vector3<f64>>,
}

#[derive(Clone, Debug)]
struct State {
    rotation: Rotation3<f64>,
    translation: Vector3<f64>,
    z: DVector<f64>,
}

impl Problem<'_> {
    fn model_point(&self, s: &State, m: usize) -> Vector3<f64> {
        let local = self.base[m] + &self.rows[m] * &s.z;
        s.rotation * local + s.translation
    }

    fn model_points(&self, s: &State) -> Vec<Vector3<f64>> {
        (0..self.base.len()).map(|m| self.model_point(s, m)).collect()
    }

    fn objective(&self, s: &State, corr: &[usize]) -> f64 {
        let data: f64 = self
            .observed
            .iter()
            .zip(corr)
            .zip(&self.weights)
            .map(|((x, &c), w)| w * (self.model_point(s, c) - x).norm_squared())
            .sum();
        data + self.lambda * s.z.norm_squared()
    }

    fn residual(&self, s: &State) -> f64 {
        let model = self.model_points(s);
        let corr = nearest_indices(self.observed, &model);
        self.observed
            .iter()
            .zip(&corr)
            .zip(&self.weights)
            .map(|((x, &c), w)| w * (model[c] - x).norm())
            .sum::<f64>()
            / self.weight_sum
    }

    /// Preconditioned descent direction and the rotation pivot.
    fn direction(&self, s: &State, corr: &[usize]) -> (Vector3<f64>, Vector3<f64>, DVector<f64>, Vector3<f64>) {
        let a = self.active;
        let q: Vec<Vector3<f64>> = corr.iter().map(|&c| self.model_point(s, c)).collect();
        let pivot = q.iter().zip(&self.weights).map(|(p, w)| p * *w).sum::<Vector3<f64>>() / self.weight_sum;
        let mut g_t = Vector3::zeros();
        let mut g_w = Vector3::zeros();
        let mut g_z = DVector::zeros(a);
        let mut h_w = Matrix3::zeros();
        let mut h_z = DMatrix::zeros(a, a);
        for ((x, &c), (qi, w)) in self.observed.iter().zip(corr).zip(q.iter().zip(&self.weights)) {
            let r = qi - x;
            let arm = qi - pivot;
            g_t += r * (2.0 * w);
            g_w += arm.cross(&r) * (2.0 * w);
            h_w += (Matrix3::identity() * arm.norm_squared() - arm * arm.transpose()) * (2.0 * w);
            if a > 0 {
                let rb = s.rotation.matrix() * &self.rows[c];
                g_z += rb.tr_mul(&r) * (2.0 * w);
                h_z += self.rows[c].tr_mul(&self.rows[c]) * (2.0 * w);
            }
        }
        g_z += &s.z * (2.0 * self.lambda);
        for l in 0..a {
            h_z[(l, l)] += 2.0 * self.lambda;
        }
        let d_t = -g_t / (2.0 * self.weight_sum);
        h_w += Matrix3::identity() * (1e-12 * h_w.trace()).max(1e-300);
        let d_w = match &self.axis {
            Some(u) => {
                let curvature = u.dot(&(h_w * u));
                -u * (u.dot(&g_w) / curvature)
            }
            None => -(h_w.try_inverse().unwrap_or_else(Matrix3::zeros) * g_w),
        };
        let d_z = if a > 0 {
            h_z += DMatrix::identity(a, a) * (1e-12 * h_z.trace()).max(1e-300);
            match h_z.clone().cholesky() {
                Some(ch) => -ch.solve(&g_z),
                None => -g_z,
            }
        } else {
            DVector::zeros(0)
        };
        (d_t, d_w, d_z, pivot)
    }
}

fn apply(s: &State, d_t: &Vector3<f64>, d_w: &Vector3<f64>, d_z: &DVector<f64>, pivot: &Vector3<f64>, alpha: f64) -> State {
    let turn = Rotation3::new(d_w * alpha);
    State {
        rotation: turn * s.rotation,
        translation: turn * (s.translation - pivot) + pivot + d_t * alpha,
        z: &s.z + d_z * alpha,
    }
}

struct Run {
    state: State,
    residual: f64,
    converged: bool,
    trace: Vec<f64>,
    iterations: usize,
}

fn run(problem: &Problem, init: State, params: &InferenceParams) -> Run {
    let mut s = init;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut previous_corr: Option<Vec<usize>> = None;
    let mut outer_start = f64::INFINITY;
    for _ in 0..params.max_outer_iterations {
        iterations += 1;
        let corr = nearest_indices(problem.observed, &problem.model_points(&s));
        let mut e = problem.objective(&s, &corr);
        trace.push(e);
        let same = previous_corr.as_ref() == Some(&corr);
        for _ in 0..params.inner_steps {
            let (d_t, d_w, d_z, pivot) = problem.direction(&s, &corr);
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..=params.max_halvings {
                let candidate = apply(&s, &d_t, &d_w, &d_z, &pivot, alpha);
                let ec = problem.objective(&candidate, &corr);
                if ec <= e {
                    accepted = Some((candidate, ec));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((next, ec)) = accepted else { break };
            let decrease = e - ec;
            s = next;
            e = ec;
            trace.push(e);
            if decrease <= params.tolerance * e.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        let outer_decrease = outer_start - e;
        if same && outer_decrease <= params.tolerance * e.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        outer_start = e;
        previous_corr = Some(corr);
    }
    let residual = problem.residual(&s);
    Run {
        state: s,
        residual,
        converged,
        trace,
        iterations,
    }
}

/// Fits latent coordinates and a rigid alignment to `observed`, starting
/// from `init_pose` and from each configured yaw offset of it; the run
/// with the smallest residual wins.
pub fn infer_latent(
    space: &ShapeSpace,
    observed: &PointCloud,
    init_pose: &RigidTransform,
    params: &InferenceParams,
) -> Result<LatentDescriptor> {
    params.validate()?;
    if !init_pose.is_finite() || !init_pose.is_proper(1e-6) {
        return Err(Error::Parameter("initial pose must be a finite proper rigid transform".into()));
    }
    let d = space.dim();
    let a = space.active();
    let canonical = space.canonical().points();
    let mean = space.mean();
    let basis = space.basis();
    let base = canonical
        .iter()
        .enumerate()
        .map(|(m, p)| p + Vector3::new(mean[3 * m], mean[3 * m + 1], mean[3 * m + 2]))
        .collect();
    let rows = (0..canonical.len())
        .map(|m| basis.view((3 * m, 0), (3, a)).into_owned())
        .collect();
    let weights = point_weights(observed, params.weighting, params.density_neighbors);
    let weight_sum = weights.iter().sum();
    let problem = Problem {
        observed: observed.points(),
        weights,
        weight_sum,
        base,
        rows,
        active: a,
        lambda: params.regularization,
        axis: params.rotation_axis.map(|a| Vector3::from(a).normalize()),
    };

    let pivot = space.canonical().centroid();
    let mut best: Option<Run> = None;
    for yaw in &params.yaw_restarts {
        let spin = RigidTransform::from_translation(pivot)
            * RigidTransform::about_axis(&Unit::new_unchecked(Vector3::z()), *yaw)
            * RigidTransform::from_translation(-pivot);
        let start = init_pose * &spin;
        let state = State {
            rotation: start.rotation,
            translation: start.translation,
            z: DVector::zeros(a),
        };
        let r = run(&problem, state, params);
        if best.as_ref().is_none_or(|b| r.residual < b.residual) {
            best = Some(r);
        }
    }
    let best = best.expect("at least one yaw start");
    let mut coordinates = DVector::zeros(d);
    coordinates.rows_mut(0, a).copy_from(&best.state.z);
    let rotation = Rotation3::from_matrix(best.state.rotation.matrix());
    Ok(LatentDescriptor {
        coordinates,
        alignment: RigidTransform::new(rotation, best.state.translation),
        residual: best.residual,
        converged: best.converged,
        objective_trace: best.trace,
        iterations: best.iterations,
    })
}
