//! Procedural object families standing in for scanned models.
//!
//! Frames: origin at the bottom center, z up. Watering cans carry the handle
//! on +y and the spout on -y. Drills point their chuck along +x.
//! Ground-truth grasps use a tool axis along +x, approached from -x.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use dualarm_core::RigidTransform;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::grasp::GraspPoses;

/// Hand orientation with the tool axis along +x.
pub const GRASP_RPY: [f64; 3] = [FRAC_PI_2, 0.0, -FRAC_PI_2];
/// Pre-grasp standoff along the approach axis, meters.
pub const PRE_GRASP_OFFSET: f64 = 0.10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
}

#[derive(Clone, Copy, Debug)]
enum Part {
    /// Open tube around `axis` from `origin`.
    Tube {
        origin: Vector3<f64>,
        axis: Vector3<f64>,
        radius: f64,
        length: f64,
    },
    Disk {
        center: Vector3<f64>,
        normal: Vector3<f64>,
        radius: f64,
    },
    /// Torus section in the y-z plane; `arc` is the center-line radius.
    Arc {
        center: Vector3<f64>,
        arc: f64,
        radius: f64,
        from: f64,
        to: f64,
    },
    Box {
        center: Vector3<f64>,
        half: Vector3<f64>,
    },
}

fn perpendiculars(u: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let seed = if u.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let a = u.cross(&seed).normalize();
    (a, u.cross(&a))
}

impl Part {
    fn area(&self) -> f64 {
        match *self {
            Part::Tube { radius, length, .. } => TAU * radius * length,
            Part::Disk { radius, .. } => PI * radius * radius,
            Part::Arc { arc, radius, from, to, .. } => (to - from) * arc * TAU * radius,
            Part::Box { half, .. } => 8.0 * (half.x * half.y + half.y * half.z + half.x * half.z),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> SurfacePoint {
        match *self {
            Part::Tube { origin, axis, radius, length } => {
                let (a, b) = perpendiculars(&axis);
                let psi = rng.random_range(0.0..TAU);
                let n = a * psi.cos() + b * psi.sin();
                SurfacePoint {
                    position: origin + axis * rng.random_range(0.0..length) + n * radius,
                    normal: n,
                }
            }
            Part::Disk { center, normal, radius } => {
                let (a, b) = perpendiculars(&normal);
                let psi = rng.random_range(0.0..TAU);
                let r = radius * rng.random_range(0.0f64..1.0).sqrt();
                SurfacePoint {
                    position: center + (a * psi.cos() + b * psi.sin()) * r,
                    normal,
                }
            }
            Part::Arc { center, arc, radius, from, to } => {
                let phi = rng.random_range(from..to);
                let psi = rng.random_range(0.0..TAU);
                let radial = Vector3::new(0.0, phi.cos(), phi.sin());
                let n = radial * psi.cos() + Vector3::x() * psi.sin();
                SurfacePoint {
                    position: center + radial * arc + n * radius,
                    normal: n,
                }
            }
            Part::Box { center, half } => {
                let faces = [half.y * half.z, half.x * half.z, half.x * half.y];
                let total: f64 = faces.iter().sum();
                let mut pick = rng.random_range(0.0..total);
                let mut axis = 2;
                for (k, f) in faces.iter().enumerate() {
                    if pick < *f {
                        axis = k;
                        break;
                    }
                    pick -= f;
                }
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let mut local = Vector3::zeros();
                let mut normal = Vector3::zeros();
                for k in 0..3 {
                    local[k] = if k == axis { sign * half[k] } else { rng.random_range(-half[k]..half[k]) };
                }
                normal[axis] = sign;
                SurfacePoint {
                    position: center + local,
                    normal,
                }
            }
        }
    }
}

fn sample_parts(parts: &[Part], count: usize, seed: u64) -> Vec<SurfacePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let areas: Vec<f64> = parts.iter().map(Part::area).collect();
    let total: f64 = areas.iter().sum();
    (0..count)
        .map(|_| {
            let mut pick = rng.random_range(0.0..total);
            let mut part = parts.len() - 1;
            for (k, a) in areas.iter().enumerate() {
                if pick < *a {
                    part = k;
                    break;
                }
                pick -= a;
            }
            parts[part].sample(&mut rng)
        })
        .collect()
}

fn scaled(rng: &mut ChaCha8Rng, nominal: f64, spread: f64) -> f64 {
    nominal * rng.random_range(1.0 - spread..1.0 + spread)
}

fn grasp_pair(point: Vector3<f64>) -> Vec<RigidTransform> {
    let grasp = RigidTransform::from_xyz_rpy(point.into(), GRASP_RPY);
    let pre = RigidTransform::from_xyz_rpy((point - Vector3::x() * PRE_GRASP_OFFSET).into(), GRASP_RPY);
    vec![pre, grasp]
}

/// Watering can dimensions, meters and radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanParams {
    pub body_radius: f64,
    pub body_height: f64,
    /// Radius of the handle's center-line arc.
    pub handle_arc: f64,
    pub handle_height: f64,
    pub handle_thickness: f64,
    pub spout_length: f64,
    pub spout_radius: f64,
    /// Spout elevation above horizontal.
    pub spout_angle: f64,
    pub spout_height: f64,
}

impl Default for CanParams {
    fn default() -> Self {
        Self {
            body_radius: 0.06,
            body_height: 0.16,
            handle_arc: 0.045,
            handle_height: 0.1,
            handle_thickness: 0.01,
            spout_length: 0.12,
            spout_radius: 0.009,
            spout_angle: 0.6,
            spout_height: 0.04,
        }
    }
}

impl CanParams {
    /// A random family member around the nominal can.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Self::default();
        let body_height = scaled(&mut rng, n.body_height, 0.2);
        let handle_arc = scaled(&mut rng, n.handle_arc, 0.15);
        Self {
            body_radius: scaled(&mut rng, n.body_radius, 0.2),
            body_height,
            handle_arc,
            handle_height: (scaled(&mut rng, n.handle_height, 0.1)).clamp(handle_arc, body_height - handle_arc * 0.5),
            handle_thickness: scaled(&mut rng, n.handle_thickness, 0.15),
            spout_length: scaled(&mut rng, n.spout_length, 0.2),
            spout_radius: scaled(&mut rng, n.spout_radius, 0.15),
            spout_angle: n.spout_angle + rng.random_range(-0.15..0.15),
            spout_height: scaled(&mut rng, n.spout_height, 0.2),
        }
    }

    fn spout_axis(&self) -> Vector3<f64> {
        Vector3::new(0.0, -self.spout_angle.cos(), self.spout_angle.sin())
    }

    fn spout_base(&self) -> Vector3<f64> {
        Vector3::new(0.0, -self.body_radius, self.spout_height)
    }

    fn parts(&self) -> Vec<Part> {
        let z = Vector3::z();
        vec![
            Part::Tube {
                origin: Vector3::zeros(),
                axis: z,
                radius: self.body_radius,
                length: self.body_height,
            },
            Part::Disk {
                center: z * self.body_height,
                normal: z,
                radius: self.body_radius,
            },
            Part::Disk {
                center: Vector3::zeros(),
                normal: -z,
                radius: self.body_radius,
            },
            Part::Arc {
                center: Vector3::new(0.0, self.body_radius, self.handle_height),
                arc: self.handle_arc,
                radius: self.handle_thickness,
                from: -FRAC_PI_2,
                to: FRAC_PI_2,
            },
            Part::Tube {
                origin: self.spout_base(),
                axis: self.spout_axis(),
                radius: self.spout_radius,
                length: self.spout_length,
            },
        ]
    }

    pub fn sample(&self, count: usize, seed: u64) -> Vec<SurfacePoint> {
        sample_parts(&self.parts(), count, seed)
    }

    /// Left hand on the handle apex, right hand around the spout base.
    pub fn grasps(&self) -> GraspPoses {
        let handle = Vector3::new(0.0, self.body_radius + self.handle_arc, self.handle_height);
        let spout = self.spout_base() + self.spout_axis() * (0.3 * self.spout_length);
        GraspPoses {
            left: grasp_pair(handle),
            right: grasp_pair(spout),
        }
    }
}

/// Cordless drill dimensions, meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrillParams {
    pub housing_length: f64,
    pub housing_radius: f64,
    pub chuck_length: f64,
    pub chuck_radius: f64,
    pub handle_length: f64,
    pub handle_radius: f64,
    pub battery: [f64; 3],
}

impl Default for DrillParams {
    fn default() -> Self {
        Self {
            housing_length: 0.18,
            housing_radius: 0.032,
            chuck_length: 0.04,
            chuck_radius: 0.012,
            handle_length: 0.11,
            handle_radius: 0.018,
            battery: [0.1, 0.07, 0.035],
        }
    }
}

impl DrillParams {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Self::default();
        Self {
            housing_length: scaled(&mut rng, n.housing_length, 0.2),
            housing_radius: scaled(&mut rng, n.housing_radius, 0.15),
            chuck_length: scaled(&mut rng, n.chuck_length, 0.2),
            chuck_radius: scaled(&mut rng, n.chuck_radius, 0.15),
            handle_length: scaled(&mut rng, n.handle_length, 0.2),
            handle_radius: scaled(&mut rng, n.handle_radius, 0.15),
            battery: n.battery.map(|b| scaled(&mut rng, b, 0.15)),
        }
    }

    fn housing_height(&self) -> f64 {
        self.battery[2] + self.handle_length + self.housing_radius
    }

    fn parts(&self) -> Vec<Part> {
        let x = Vector3::x();
        let zh = self.housing_height();
        let back = -0.4 * self.housing_length;
        let front = 0.6 * self.housing_length;
        let [bl, bw, bh] = self.battery;
        vec![
            Part::Box {
                center: Vector3::new(0.0, 0.0, bh / 2.0),
                half: Vector3::new(bl / 2.0, bw / 2.0, bh / 2.0),
            },
            Part::Tube {
                origin: Vector3::new(0.0, 0.0, bh),
                axis: Vector3::z(),
                radius: self.handle_radius,
                length: self.handle_length,
            },
            Part::Tube {
                origin: Vector3::new(back, 0.0, zh),
                axis: x,
                radius: self.housing_radius,
                length: self.housing_length,
            },
            Part::Disk {
                center: Vector3::new(back, 0.0, zh),
                normal: -x,
                radius: self.housing_radius,
            },
            Part::Disk {
                center: Vector3::new(front, 0.0, zh),
                normal: x,
                radius: self.housing_radius,
            },
            Part::Tube {
                origin: Vector3::new(front, 0.0, zh),
                axis: x,
                radius: self.chuck_radius,
                length: self.chuck_length,
            },
        ]
    }

    pub fn sample(&self, count: usize, seed: u64) -> Vec<SurfacePoint> {
        sample_parts(&self.parts(), count, seed)
    }

    /// Right hand on the handle, left hand on the back of the housing.
    pub fn grasps(&self) -> GraspPoses {
        let handle = Vector3::new(0.0, 0.0, self.battery[2] + 0.5 * self.handle_length);
        let back = Vector3::new(-0.4 * self.housing_length, 0.0, self.housing_height());
        GraspPoses {
            left: grasp_pair(back),
            right: grasp_pair(handle),
        }
    }
}

pub fn to_cloud(samples: &[SurfacePoint]) -> Result<PointCloud> {
    PointCloud::new(samples.iter().map(|s| s.position).collect())
}

/// Points whose outward normal faces `viewpoint`, all in one frame.
pub fn visible_from(samples: &[SurfacePoint], viewpoint: &Vector3<f64>) -> Vec<SurfacePoint> {
    samples
        .iter()
        .filter(|s| s.normal.dot(&(viewpoint - s.position)) > 0.0)
        .copied()
        .collect()
}

/// Drops the fraction of points nearest to a random direction's extreme,
/// a contiguous occluded patch.
pub fn occlude(cloud: &PointCloud, fraction: f64, seed: u64) -> Result<PointCloud> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Parameter("occlusion fraction must be in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir = loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            break v / n;
        }
    };
    let c = cloud.centroid();
    let mut scores: Vec<f64> = cloud.points().iter().map(|p| (p - c).dot(&dir)).collect();
    let drop = (fraction * cloud.len() as f64).round() as usize;
    if drop == 0 {
        return Ok(cloud.clone());
    }
    scores.sort_by(|a, b| b.total_cmp(a));
    let cut = scores[drop - 1];
    let mut removed = 0;
    cloud.filter(|_, p| {
        if removed < drop && (p - c).dot(&dir) >= cut {
            removed += 1;
            false
        } else {
            true
        }
    })
}

/// Adds isotropic Gaussian noise with standard deviation `sigma`.
pub fn add_noise(cloud: &PointCloud, sigma: f64, seed: u64) -> Result<PointCloud> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter("noise sigma must be nonnegative".into()));
    }
    if sigma == 0.0 {
        return Ok(cloud.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Parameter(e.to_string()))?;
    PointCloud::new(
        cloud
            .points()
            .iter()
            .map(|p| p + Vector3::from_fn(|_, _| normal.sample(&mut rng)))
            .collect(),
    )
}
