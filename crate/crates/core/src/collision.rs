//! Signed clearance between spheres, capsules and boxes.
//!
//! Spheres and capsules are handled as a point or segment core inflated by a
//! radius, so every query reduces to a distance between cores (point,
//! segment, box) minus the two radii. Point and segment pairs use closed
//! forms. Pairs involving a box use a separating-axis pass: if some candidate
//! axis separates the cores, GJK computes the distance and reports its lower
//! bound; otherwise the minimum overlap over the complete axis set is the
//! exact penetration depth of the two polytopes.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{FrameId, FramePoses, JointConfiguration, RobotModel};
use crate::math::RigidTransform;

type V3 = Vector3<f64>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PrimitiveShape {
    Sphere {
        radius: f64,
    },
    /// Segment `a`-`b` in the local frame swept by `radius`.
    Capsule {
        radius: f64,
        a: V3,
        b: V3,
    },
    Box {
        half_extents: V3,
    },
}

impl PrimitiveShape {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match self {
            PrimitiveShape::Sphere { radius } if !positive(*radius) => {
                Err(format!("sphere radius must be positive, got {radius}"))
            }
            PrimitiveShape::Capsule { radius, a, b } => {
                if !positive(*radius) {
                    Err(format!("capsule radius must be positive, got {radius}"))
                } else if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
                    Err("capsule endpoints must be finite".into())
                } else {
                    Ok(())
                }
            }
            PrimitiveShape::Box { half_extents } if !half_extents.iter().all(|v| positive(*v)) => {
                Err(format!(
                    "box half extents must be positive, got {half_extents:?}"
                ))
            }
            _ => Ok(()),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            PrimitiveShape::Sphere { .. } => 0,
            PrimitiveShape::Capsule { .. } => 1,
            PrimitiveShape::Box { .. } => 2,
        }
    }

    fn params(&self) -> Vec<f64> {
        match self {
            PrimitiveShape::Sphere { radius } => vec![*radius],
            PrimitiveShape::Capsule { radius, a, b } => {
                let mut v = vec![*radius];
                v.extend(a.iter().chain(b.iter()));
                v
            }
            PrimitiveShape::Box { half_extents } => half_extents.iter().copied().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Attachment {
    World,
    Frame(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollisionBody {
    pub name: String,
    pub shape: PrimitiveShape,
    pub attachment: Attachment,
    /// Shape pose in the attachment frame.
    pub local: RigidTransform,
}

impl CollisionBody {
    pub fn new(
        name: &str,
        shape: PrimitiveShape,
        attachment: Attachment,
        local: RigidTransform,
    ) -> Self {
        Self {
            name: name.to_owned(),
            shape,
            attachment,
            local,
        }
    }
}

/// Static obstacles plus link pairs that are never checked against each other.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scene {
    obstacles: Vec<CollisionBody>,
    exempt: BTreeSet<(String, String)>,
}

impl Scene {
    pub fn new(
        obstacles: Vec<CollisionBody>,
        exempt: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        for o in &obstacles {
            if o.attachment != Attachment::World {
                return Err(Error::Model(format!(
                    "obstacle `{}` must be attached to world",
                    o.name
                )));
            }
            o.shape
                .validate()
                .map_err(|e| Error::Parameter(format!("obstacle `{}`: {e}", o.name)))?;
        }
        let mut scene = Scene {
            obstacles,
            exempt: BTreeSet::new(),
        };
        for (a, b) in exempt {
            scene.add_exempt(&a, &b);
        }
        Ok(scene)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn obstacles(&self) -> &[CollisionBody] {
        &self.obstacles
    }

    pub fn exempt_pairs(&self) -> impl Iterator<Item = &(String, String)> {
        self.exempt.iter().filter(|(a, b)| a <= b)
    }

    pub fn add_obstacle(&mut self, body: CollisionBody) -> Result<()> {
        body.shape
            .validate()
            .map_err(|e| Error::Parameter(format!("obstacle `{}`: {e}", body.name)))?;
        self.obstacles.push(body);
        Ok(())
    }

    /// Exemptions are stored in both orders.
    pub fn add_exempt(&mut self, a: &str, b: &str) {
        self.exempt.insert((a.to_owned(), b.to_owned()));
        self.exempt.insert((b.to_owned(), a.to_owned()));
    }

    pub fn is_exempt(&self, a: &str, b: &str) -> bool {
        self.exempt.contains(&(a.to_owned(), b.to_owned()))
    }
}

/// Signed clearance between two posed primitives: positive separation,
/// negative penetration.
pub fn pair_distance(
    a: &PrimitiveShape,
    pose_a: &RigidTransform,
    b: &PrimitiveShape,
    pose_b: &RigidTransform,
) -> Result<f64> {
    a.validate().map_err(Error::Parameter)?;
    b.validate().map_err(Error::Parameter)?;
    if !pose_a.is_finite() || !pose_b.is_finite() {
        return Err(Error::Parameter("shape pose is not finite".into()));
    }
    Ok(pair_distance_unchecked(a, pose_a, b, pose_b))
}

fn ordering_key(shape: &PrimitiveShape, pose: &RigidTransform) -> (u8, Vec<u64>) {
    let mut bits: Vec<u64> = shape.params().iter().map(|v| v.to_bits()).collect();
    bits.extend(pose.translation.iter().map(|v| v.to_bits()));
    bits.extend(pose.rotation.matrix().iter().map(|v| v.to_bits()));
    (shape.rank(), bits)
}

pub(crate) fn pair_distance_unchecked(
    a: &PrimitiveShape,
    pose_a: &RigidTransform,
    b: &PrimitiveShape,
    pose_b: &RigidTransform,
) -> f64 {
    // Evaluate in a canonical argument order so the result is exactly symmetric.
    if ordering_key(a, pose_a).cmp(&ordering_key(b, pose_b)) == Ordering::Greater {
        return pair_distance_unchecked(b, pose_b, a, pose_a);
    }
    let (ca, ra) = Core::of(a, pose_a);
    let (cb, rb) = Core::of(b, pose_b);
    core_distance(&ca, &cb) - ra - rb
}

#[derive(Clone, Debug)]
enum Core {
    Point(V3),
    Segment(V3, V3),
    Box { pose: RigidTransform, half: V3 },
}

impl Core {
    fn of(shape: &PrimitiveShape, pose: &RigidTransform) -> (Core, f64) {
        match shape {
            PrimitiveShape::Sphere { radius } => (Core::Point(pose.translation), *radius),
            PrimitiveShape::Capsule { radius, a, b } => (
                Core::Segment(pose.transform_point(a), pose.transform_point(b)),
                *radius,
            ),
            PrimitiveShape::Box { half_extents } => (
                Core::Box {
                    pose: *pose,
                    half: *half_extents,
                },
                0.0,
            ),
        }
    }

    fn support(&self, d: &V3) -> V3 {
        match self {
            Core::Point(p) => *p,
            Core::Segment(a, b) => {
                if b.dot(d) > a.dot(d) {
                    *b
                } else {
                    *a
                }
            }
            Core::Box { pose, half } => {
                let local = pose.rotation.inverse() * d;
                let corner = V3::new(
                    if local.x >= 0.0 { half.x } else { -half.x },
                    if local.y >= 0.0 { half.y } else { -half.y },
                    if local.z >= 0.0 { half.z } else { -half.z },
                );
                pose.transform_point(&corner)
            }
        }
    }

    fn project(&self, n: &V3) -> (f64, f64) {
        match self {
            Core::Point(p) => {
                let v = p.dot(n);
                (v, v)
            }
            Core::Segment(a, b) => {
                let (x, y) = (a.dot(n), b.dot(n));
                (x.min(y), x.max(y))
            }
            Core::Box { pose, half } => {
                let c = pose.translation.dot(n);
                let m = pose.rotation.matrix();
                let r: f64 = (0..3).map(|i| half[i] * m.column(i).dot(n).abs()).sum();
                (c - r, c + r)
            }
        }
    }

    /// Face normals and edge directions relevant to separating-axis tests.
    fn sat_features(&self) -> (Vec<V3>, Vec<V3>) {
        match self {
            Core::Point(_) => (vec![], vec![]),
            Core::Segment(a, b) => (vec![], vec![b - a]),
            Core::Box { pose, .. } => {
                let m = pose.rotation.matrix();
                let axes: Vec<V3> = (0..3).map(|i| m.column(i).into_owned()).collect();
                (axes.clone(), axes)
            }
        }
    }
}

fn point_segment_distance(p: &V3, a: &V3, b: &V3) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + d * t - p).norm()
}

fn segment_segment_distance(p1: &V3, q1: &V3, p2: &V3, q2: &V3) -> f64 {
    const EPS: f64 = 1e-18;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    let (s, t);
    if a <= EPS && e <= EPS {
        return r.norm();
    }
    if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let s0 = if denom > EPS * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            } else {
                t = t0;
                s = s0;
            }
        }
    }
    (p1 + d1 * s - (p2 + d2 * t)).norm()
}

/// Signed distance from a point to a box; exact inside and outside.
fn point_box_distance(p: &V3, pose: &RigidTransform, half: &V3) -> f64 {
    let local = pose.rotation.inverse() * (p - pose.translation);
    let inside = (0..3).all(|i| local[i].abs() <= half[i]);
    if inside {
        -(0..3)
            .map(|i| half[i] - local[i].abs())
            .fold(f64::INFINITY, f64::min)
    } else {
        let q = V3::new(
            local.x.clamp(-half.x, half.x),
            local.y.clamp(-half.y, half.y),
            local.z.clamp(-half.z, half.z),
        );
        (local - q).norm()
    }
}

fn core_distance(a: &Core, b: &Core) -> f64 {
    match (a, b) {
        (Core::Point(p), Core::Point(q)) => (p - q).norm(),
        (Core::Point(p), Core::Segment(s, e)) | (Core::Segment(s, e), Core::Point(p)) => {
            point_segment_distance(p, s, e)
        }
        (Core::Segment(p1, q1), Core::Segment(p2, q2)) => segment_segment_distance(p1, q1, p2, q2),
        (Core::Point(p), Core::Box { pose, half }) | (Core::Box { pose, half }, Core::Point(p)) => {
            point_box_distance(p, pose, half)
        }
        _ => polytope_distance(a, b),
    }
}

fn polytope_distance(a: &Core, b: &Core) -> f64 {
    let (fa, ea) = a.sat_features();
    let (fb, eb) = b.sat_features();
    let mut axes: Vec<V3> = fa.into_iter().chain(fb).collect();
    for u in &ea {
        for v in &eb {
            axes.push(u.cross(v));
        }
    }
    let mut min_overlap = f64::INFINITY;
    let mut separation: f64 = 0.0;
    for axis in axes {
        let norm = axis.norm();
        if norm < 1e-9 {
            continue;
        }
        let n = axis / norm;
        let (amin, amax) = a.project(&n);
        let (bmin, bmax) = b.project(&n);
        let overlap = (amax - bmin).min(bmax - amin);
        if overlap < 0.0 {
            separation = separation.max(-overlap);
        }
        min_overlap = min_overlap.min(overlap);
    }
    if min_overlap < 0.0 {
        gjk_distance(a, b).max(separation)
    } else {
        -min_overlap
    }
}

/// Lower bound on the distance between two convex cores, converged to
/// within 1e-12 m for separated shapes.
fn gjk_distance(a: &Core, b: &Core) -> f64 {
    let support = |d: &V3| a.support(d) - b.support(&-d);
    let mut v = support(&V3::x());
    let mut simplex: Vec<V3> = vec![v];
    let mut lower: f64 = 0.0;
    for _ in 0..128 {
        let vn = v.norm();
        if vn < 1e-14 {
            return 0.0;
        }
        let w = support(&-v);
        lower = lower.max(v.dot(&w) / vn);
        if vn - lower <= 1e-12 {
            break;
        }
        if simplex.iter().any(|s| (s - w).norm_squared() < 1e-28) {
            break;
        }
        simplex.push(w);
        let (closest, reduced) = closest_on_simplex(&simplex);
        if reduced.len() == 4 {
            return 0.0;
        }
        v = closest;
        simplex = reduced;
    }
    lower.max(0.0)
}

fn closest_on_simplex(s: &[V3]) -> (V3, Vec<V3>) {
    match s.len() {
        1 => (s[0], vec![s[0]]),
        2 => closest_on_segment(s[0], s[1]),
        3 => closest_on_triangle(s[0], s[1], s[2]),
        _ => closest_on_tetrahedron(s[0], s[1], s[2], s[3]),
    }
}

fn closest_on_segment(a: V3, b: V3) -> (V3, Vec<V3>) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= 0.0 {
        return (a, vec![a]);
    }
    let t = -a.dot(&ab) / len2;
    if t <= 0.0 {
        (a, vec![a])
    } else if t >= 1.0 {
        (b, vec![b])
    } else {
        (a + ab * t, vec![a, b])
    }
}

fn closest_on_triangle(a: V3, b: V3, c: V3) -> (V3, Vec<V3>) {
    let ab = b - a;
    let ac = c - a;
    let ap = -a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, vec![a]);
    }
    let bp = -b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, vec![b]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, vec![a, b]);
    }
    let cp = -c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, vec![c]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, vec![a, c]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, vec![b, c]);
    }
    let denom = va + vb + vc;
    if denom.abs() < 1e-300 {
        // Degenerate triangle: fall back to its edges.
        return [
            closest_on_segment(a, b),
            closest_on_segment(b, c),
            closest_on_segment(a, c),
        ]
        .into_iter()
        .min_by(|x, y| x.0.norm_squared().total_cmp(&y.0.norm_squared()))
        .expect("three candidates");
    }
    let v = vb / denom;
    let w = vc / denom;
    (a + ab * v + ac * w, vec![a, b, c])
}

fn closest_on_tetrahedron(a: V3, b: V3, c: V3, d: V3) -> (V3, Vec<V3>) {
    let faces = [(a, b, c, d), (a, c, d, b), (a, d, b, c), (b, d, c, a)];
    let mut best: Option<(V3, Vec<V3>)> = None;
    for (p, q, r, opposite) in faces {
        let n = (q - p).cross(&(r - p));
        let sign_origin = (-p).dot(&n);
        let sign_opposite = (opposite - p).dot(&n);
        let degenerate = sign_opposite.abs() <= 1e-18 * n.norm().max(1e-300);
        if degenerate || sign_origin * sign_opposite < 0.0 {
            let candidate = closest_on_triangle(p, q, r);
            if best
                .as_ref()
                .is_none_or(|b| candidate.0.norm_squared() < b.0.norm_squared())
            {
                best = Some(candidate);
            }
        }
    }
    best.unwrap_or_else(|| (V3::zeros(), vec![a, b, c, d]))
}

/// A collision body with its attachment resolved to a frame index.
#[derive(Clone, Debug)]
struct ResolvedBody {
    name: String,
    frame_name: String,
    frame: Option<FrameId>,
    shape: PrimitiveShape,
    local: RigidTransform,
    /// Bounding sphere in the body frame: center and radius.
    bound: (Vector3<f64>, f64),
}

fn bounding_sphere(shape: &PrimitiveShape) -> (Vector3<f64>, f64) {
    match shape {
        PrimitiveShape::Sphere { radius } => (Vector3::zeros(), *radius),
        PrimitiveShape::Capsule { radius, a, b } => ((a + b) * 0.5, (a - b).norm() * 0.5 + radius),
        PrimitiveShape::Box { half_extents } => (Vector3::zeros(), half_extents.norm()),
    }
}

/// Every non-exempt body pair of a model in a scene, resolved once.
#[derive(Clone, Debug)]
pub struct CollisionPairs {
    bodies: Vec<ResolvedBody>,
    pairs: Vec<(usize, usize)>,
}

/// Minimum clearance and the body pair that attains it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clearance {
    pub distance: f64,
    pub pair: Option<(String, String)>,
}

impl CollisionPairs {
    pub fn new(model: &RobotModel, scene: &Scene) -> Result<Self> {
        let mut bodies = Vec::new();
        for body in model.bodies() {
            let (frame, frame_name) = match &body.attachment {
                Attachment::World => (None, "world".to_owned()),
                Attachment::Frame(name) => (
                    Some(model.frame_index(name).ok_or_else(|| {
                        Error::Model(format!(
                            "body `{}` attached to unknown frame `{name}`",
                            body.name
                        ))
                    })?),
                    name.clone(),
                ),
            };
            bodies.push(ResolvedBody {
                name: body.name.clone(),
                frame_name,
                frame,
                bound: bounding_sphere(&body.shape),
                shape: body.shape.clone(),
                local: body.local,
            });
        }
        let robot_count = bodies.len();
        for o in scene.obstacles() {
            bodies.push(ResolvedBody {
                name: o.name.clone(),
                frame_name: o.name.clone(),
                frame: None,
                bound: bounding_sphere(&o.shape),
                shape: o.shape.clone(),
                local: o.local,
            });
        }
        let mut adjacent = scene.clone();
        for (a, b) in model.adjacent_pairs() {
            adjacent.add_exempt(a, b);
        }
        let exempt = |x: &ResolvedBody, y: &ResolvedBody| {
            adjacent.is_exempt(&x.frame_name, &y.frame_name) || adjacent.is_exempt(&x.name, &y.name)
        };
        let mut pairs = Vec::new();
        for i in 0..robot_count {
            for j in i + 1..bodies.len() {
                let (x, y) = (&bodies[i], &bodies[j]);
                let same_link = j < robot_count && x.frame == y.frame;
                if !same_link && !exempt(x, y) {
                    pairs.push((i, j));
                }
            }
        }
        Ok(Self { bodies, pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pair_names(&self, index: usize) -> (String, String) {
        let (i, j) = self.pairs[index];
        (self.bodies[i].name.clone(), self.bodies[j].name.clone())
    }

    fn body_pose(&self, body: &ResolvedBody, frames: &FramePoses) -> RigidTransform {
        match body.frame {
            Some(f) => *frames.get(f) * body.local,
            None => body.local,
        }
    }

    fn poses(&self, frames: &FramePoses) -> Vec<RigidTransform> {
        self.bodies
            .iter()
            .map(|b| self.body_pose(b, frames))
            .collect()
    }

    /// Distance between the bounding spheres of pair `(i, j)`, a lower bound
    /// on its clearance.
    fn lower_bound(&self, poses: &[RigidTransform], i: usize, j: usize) -> f64 {
        let (ci, ri) = &self.bodies[i].bound;
        let (cj, rj) = &self.bodies[j].bound;
        (poses[i].transform_point(ci) - poses[j].transform_point(cj)).norm() - ri - rj
    }

    fn exact(&self, poses: &[RigidTransform], i: usize, j: usize) -> f64 {
        pair_distance_unchecked(
            &self.bodies[i].shape,
            &poses[i],
            &self.bodies[j].shape,
            &poses[j],
        )
    }

    /// Signed clearance of every checked pair, in pair order.
    pub fn clearances(&self, frames: &FramePoses) -> Vec<f64> {
        let poses = self.poses(frames);
        self.pairs
            .iter()
            .map(|&(i, j)| self.exact(&poses, i, j))
            .collect()
    }

    /// Like [`clearances`](Self::clearances), except that pairs whose
    /// bounding spheres are at least `cutoff` apart report that bounding
    /// distance instead of the exact clearance.
    pub fn clearances_within(&self, frames: &FramePoses, cutoff: f64) -> Vec<f64> {
        let poses = self.poses(frames);
        self.pairs
            .iter()
            .map(|&(i, j)| {
                let lb = self.lower_bound(&poses, i, j);
                if lb >= cutoff {
                    lb
                } else {
                    self.exact(&poses, i, j)
                }
            })
            .collect()
    }

    pub fn min_clearance(&self, frames: &FramePoses) -> Clearance {
        let poses = self.poses(frames);
        let mut best: Option<(usize, f64)> = None;
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            let current = best.map_or(f64::INFINITY, |b| b.1);
            if best.is_some() && self.lower_bound(&poses, i, j) >= current {
                continue;
            }
            let d = self.exact(&poses, i, j);
            if d < current || best.is_none() {
                best = Some((k, d));
            }
        }
        match best {
            Some((k, distance)) => Clearance {
                distance,
                pair: Some(self.pair_names(k)),
            },
            None => Clearance {
                distance: f64::INFINITY,
                pair: None,
            },
        }
    }
}

/// Minimum signed clearance over all non-exempt link/link and link/obstacle pairs.
pub fn min_clearance(
    model: &RobotModel,
    scene: &Scene,
    config: &JointConfiguration,
) -> Result<Clearance> {
    let frames = model.forward_kinematics(config)?;
    Ok(CollisionPairs::new(model, scene)?.min_clearance(&frames))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sphere(r: f64) -> PrimitiveShape {
        PrimitiveShape::Sphere { radius: r }
    }

    fn at(x: f64, y: f64, z: f64) -> RigidTransform {
        RigidTransform::from_translation(V3::new(x, y, z))
    }

    #[test]
    fn sphere_pairs() {
        let d = pair_distance(
            &sphere(1.0),
            &at(0.0, 0.0, 0.0),
            &sphere(1.0),
            &at(3.0, 0.0, 0.0),
        )
        .unwrap();
        assert_relative_eq!(d, 1.0, epsilon = 1e-15);
        let d = pair_distance(
            &sphere(1.0),
            &at(0.0, 0.0, 0.0),
            &sphere(1.0),
            &at(0.0, 0.0, 0.0),
        )
        .unwrap();
        assert_relative_eq!(d, -2.0, epsilon = 1e-15);
    }

    #[test]
    fn degenerate_dimensions_rejected() {
        let r = pair_distance(
            &sphere(0.0),
            &at(0.0, 0.0, 0.0),
            &sphere(1.0),
            &at(1.0, 0.0, 0.0),
        );
        assert!(matches!(r, Err(Error::Parameter(_))));
        let bad_box = PrimitiveShape::Box {
            half_extents: V3::new(1.0, -1.0, 1.0),
        };
        assert!(pair_distance(
            &bad_box,
            &at(0.0, 0.0, 0.0),
            &sphere(1.0),
            &at(3.0, 0.0, 0.0)
        )
        .is_err());
    }

    #[test]
    fn capsule_capsule_crossing() {
        let c = |a: V3, b: V3| PrimitiveShape::Capsule { radius: 0.1, a, b };
        let a = c(V3::new(-1.0, 0.0, 0.0), V3::new(1.0, 0.0, 0.0));
        let b = c(V3::new(0.0, -1.0, 0.5), V3::new(0.0, 1.0, 0.5));
        let id = RigidTransform::identity();
        assert_relative_eq!(
            pair_distance(&a, &id, &b, &id).unwrap(),
            0.3,
            epsilon = 1e-15
        );
    }

    #[test]
    fn box_box_face_gap_and_overlap() {
        let b = PrimitiveShape::Box {
            half_extents: V3::new(0.5, 0.5, 0.5),
        };
        let d = pair_distance(&b, &at(0.0, 0.0, 0.0), &b, &at(1.5, 0.2, -0.1)).unwrap();
        assert_relative_eq!(d, 0.5, epsilon = 1e-10);
        let d = pair_distance(&b, &at(0.0, 0.0, 0.0), &b, &at(0.8, 0.0, 0.0)).unwrap();
        assert_relative_eq!(d, -0.2, epsilon = 1e-12);
    }

    #[test]
    fn box_box_edge_gap() {
        let b = PrimitiveShape::Box {
            half_extents: V3::new(0.5, 0.5, 0.5),
        };
        let rot =
            RigidTransform::from_xyz_rpy([2.0, 0.0, 0.0], [0.0, 0.0, std::f64::consts::FRAC_PI_4]);
        let d = pair_distance(&b, &at(0.0, 0.0, 0.0), &b, &rot).unwrap();
        assert_relative_eq!(d, 2.0 - 0.5 - 0.5 * 2f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn sphere_inside_box_reports_depth() {
        let b = PrimitiveShape::Box {
            half_extents: V3::new(1.0, 1.0, 1.0),
        };
        let d = pair_distance(&b, &at(0.0, 0.0, 0.0), &sphere(0.1), &at(0.7, 0.0, 0.0)).unwrap();
        assert_relative_eq!(d, -0.4, epsilon = 1e-12);
    }

    #[test]
    fn exemptions_are_symmetric() {
        let mut scene = Scene::empty();
        scene.add_exempt("a", "b");
        assert!(scene.is_exempt("b", "a"));
        assert!(scene.is_exempt("a", "b"));
        assert!(!scene.is_exempt("a", "c"));
    }

    #[test]
    fn obstacle_must_be_world_attached() {
        let body = CollisionBody::new(
            "x",
            sphere(0.1),
            Attachment::Frame("torso".into()),
            RigidTransform::identity(),
        );
        assert!(Scene::new(vec![body], []).is_err());
    }
}
