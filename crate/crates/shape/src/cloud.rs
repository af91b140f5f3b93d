//! Point clouds and their two on-disk encodings.
//!
//! ASCII: one `x y z` triple per line in meters; blank lines and lines
//! starting with `#` are ignored. Binary: consecutive little-endian `f32`
//! triples with no header.

use std::path::Path;

use dualarm_core::RigidTransform;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CloudData", into = "CloudData")]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
    weights: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct CloudData {
    points: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
}

impl TryFrom<CloudData> for PointCloud {
    type Error = Error;

    fn try_from(data: CloudData) -> Result<Self> {
        let cloud = PointCloud::new(data.points.iter().map(|p| Vector3::from(*p)).collect())?;
        match data.weights {
            Some(w) => cloud.with_weights(w),
            None => Ok(cloud),
        }
    }
}

impl From<PointCloud> for CloudData {
    fn from(cloud: PointCloud) -> Self {
        CloudData {
            points: cloud.points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            weights: cloud.weights,
        }
    }
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        if points.len() < MIN_POINTS {
            return Err(Error::Cloud(format!(
                "need at least {MIN_POINTS} points, got {}",
                points.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::Cloud(format!("point {i} is not finite")));
        }
        Ok(Self { points, weights: None })
    }

    /// Attaches per-point weights; they must be finite, nonnegative and not all zero.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.points.len() {
            return Err(Error::Cloud(format!(
                "{} weights for {} points",
                weights.len(),
                self.points.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().all(|w| *w == 0.0) {
            return Err(Error::Cloud("weights must be finite, nonnegative and not all zero".into()));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.points.iter().sum::<Vector3<f64>>() / self.points.len() as f64
    }

    /// Covariance of the points about their centroid.
    pub fn covariance(&self) -> Matrix3<f64> {
        let c = self.centroid();
        let mut m = Matrix3::zeros();
        for p in &self.points {
            let d = p - c;
            m += d * d.transpose();
        }
        m / self.points.len() as f64
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            points: self.points.iter().map(|p| t.transform_point(p)).collect(),
            weights: self.weights.clone(),
        }
    }

    pub fn translated(&self, v: &Vector3<f64>) -> Self {
        Self {
            points: self.points.iter().map(|p| p + v).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Keeps the points whose index satisfies `keep`; fails below the minimum size.
    pub fn filter(&self, mut keep: impl FnMut(usize, &Vector3<f64>) -> bool) -> Result<Self> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (i, p) in self.points.iter().enumerate() {
            if keep(i, p) {
                points.push(*p);
                if let Some(w) = &self.weights {
                    weights.push(w[i]);
                }
            }
        }
        let cloud = Self::new(points)?;
        match self.weights {
            Some(_) => cloud.with_weights(weights),
            None => Ok(cloud),
        }
    }

    pub fn parse_xyz(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    "xyz cloud",
                    format!("line {}: expected 3 values, got {}", n + 1, fields.len()),
                ));
            }
            let mut p = [0.0; 3];
            for (k, f) in fields.iter().enumerate() {
                p[k] = f
                    .parse::<f64>()
                    .map_err(|e| Error::parse("xyz cloud", format!("line {}: {e}", n + 1)))?;
            }
            points.push(Vector3::from(p));
        }
        Self::new(points)
    }

    pub fn to_xyz(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 40);
        for p in &self.points {
            out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
        }
        out
    }

    pub fn parse_f32_le(bytes: &[u8]) -> Result<Self> {
        if !bytes.len().is_multiple_of(12) {
            return Err(Error::parse(
                "binary cloud",
                format!("length {} is not a multiple of 12", bytes.len()),
            ));
        }
        let value = |c: &[u8]| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
        let points = bytes
            .chunks_exact(12)
            .map(|c| Vector3::new(value(&c[0..4]), value(&c[4..8]), value(&c[8..12])))
            .collect();
        Self::new(points)
    }

    /// Binary encoding; coordinates are rounded to `f32`.
    pub fn to_f32_le(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.points.len() * 12);
        for p in &self.points {
            for v in p.iter() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        out
    }

    /// Reads `.bin` and `.f32` files as binary, anything else as ASCII.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if is_binary(path) {
            Self::parse_f32_le(&std::fs::read(path)?)
        } else {
            Self::parse_xyz(&std::fs::read_to_string(path)?)
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if is_binary(path) {
            std::fs::write(path, self.to_f32_le())?;
        } else {
            std::fs::write(path, self.to_xyz())?;
        }
        Ok(())
    }
}

fn is_binary(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("bin" | "f32"))
}

/// Index of the nearest point in `targets` for every query point, brute force.
pub fn nearest_indices(queries: &[Vector3<f64>], targets: &[Vector3<f64>]) -> Vec<usize> {
    queries
        .iter()
        .map(|q| {
            let mut best = (0, f64::INFINITY);
            for (j, t) in targets.iter().enumerate() {
                let d = (q - t).norm_squared();
                if d < best.1 {
                    best = (j, d);
                }
            }
            best.0
        })
        .collect()
}

/// Mean distance from every point of `from` to its nearest point in `to`.
pub fn mean_nearest_distance(from: &[Vector3<f64>], to: &[Vector3<f64>]) -> f64 {
    let idx = nearest_indices(from, to);
    from.iter().zip(idx).map(|(p, j)| (p - to[j]).norm()).sum::<f64>() / from.len() as f64
}
