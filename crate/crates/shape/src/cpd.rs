//! Non-rigid Coherent Point Drift registration.
//!
//! Both clouds are normalized to zero mean and unit RMS radius. The
//! canonical points then move as `Y + G W` with `G` the Gaussian kernel
//! matrix of width `beta`, and EM alternates soft correspondences with a
//! regularized linear solve for `W`. The result is expressed in world units
//! as coefficients over the features `[1, z~, k(z~, y~_m)]`, where `z~` is
//! a query point in the canonical normalization, so any point can be warped.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpdParams {
    /// Kernel width in normalized units.
    pub beta: f64,
    /// Smoothness regularization.
    pub lambda: f64,
    /// Outlier weight of the uniform mixture component, in [0, 1).
    pub omega: f64,
    pub max_iterations: usize,
    /// Relative change of the variance below which EM stops.
    pub tolerance: f64,
}

impl Default for CpdParams {
    fn default() -> Self {
        Self {
            beta: 2.0,
            lambda: 3.0,
            omega: 0.1,
            max_iterations: 150,
            tolerance: 1e-6,
        }
    }
}

impl CpdParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::Parameter(msg.into())) };
        check(self.beta.is_finite() && self.beta > 0.0, "beta must be positive")?;
        check(self.lambda.is_finite() && self.lambda > 0.0, "lambda must be positive")?;
        check((0.0..1.0).contains(&self.omega), "omega must lie in [0, 1)")?;
        check(self.max_iterations >= 1, "max_iterations must be at least 1")?;
        check(self.tolerance.is_finite() && self.tolerance > 0.0, "tolerance must be positive")
    }
}

/// Smallest variance EM is allowed to reach, normalized units.
const SIGMA2_FLOOR: f64 = 1e-10;

/// Mean and RMS radius of a cloud; fails on coincident or collinear points.
pub fn normalization(points: &[Vector3<f64>]) -> Result<(Vector3<f64>, f64)> {
    let n = points.len() as f64;
    let mean = points.iter().sum::<Vector3<f64>>() / n;
    let mut cov = nalgebra::Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let scale = cov.trace().sqrt();
    let mut eig: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    if !(scale > 0.0) || eig[1] <= 1e-12 * eig[0] {
        return Err(Error::Registration("cloud is degenerate (coincident or collinear points)".into()));
    }
    Ok((mean, scale))
}

/// Gaussian kernel expansion around the normalized canonical points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelBasis {
    center: Vector3<f64>,
    scale: f64,
    beta: f64,
    canonical: Vec<Vector3<f64>>,
    normalized: Vec<Vector3<f64>>,
}

impl KernelBasis {
    pub fn new(canonical: &PointCloud, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Parameter("beta must be positive".into()));
        }
        let (center, scale) = normalization(canonical.points())?;
        let canonical = canonical.points().to_vec();
        let normalized = canonical.iter().map(|p| (p - center) / scale).collect();
        Ok(Self {
            center,
            scale,
            beta,
            canonical,
            normalized,
        })
    }

    /// Number of canonical points.
    pub fn len(&self) -> usize {
        self.canonical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.canonical.is_empty()
    }

    /// Number of features per query point.
    pub fn feature_len(&self) -> usize {
        4 + self.len()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn center(&self) -> Vector3<f64> {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn canonical(&self) -> &[Vector3<f64>] {
        &self.canonical
    }

    pub fn normalized(&self) -> &[Vector3<f64>] {
        &self.normalized
    }

    fn kernel(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        (-(a - b).norm_squared() / (2.0 * self.beta * self.beta)).exp()
    }

    pub fn features(&self, p: &Vector3<f64>) -> DVector<f64> {
        let z = (p - self.center) / self.scale;
        self.features_normalized(&z)
    }

    fn features_normalized(&self, z: &Vector3<f64>) -> DVector<f64> {
        let mut f = DVector::zeros(self.feature_len());
        f[0] = 1.0;
        f[1] = z.x;
        f[2] = z.y;
        f[3] = z.z;
        for (m, y) in self.normalized.iter().enumerate() {
            f[4 + m] = self.kernel(z, y);
        }
        f
    }

    /// Kernel matrix among the normalized canonical points.
    pub fn gram(&self) -> DMatrix<f64> {
        let m = self.len();
        DMatrix::from_fn(m, m, |i, j| self.kernel(&self.normalized[i], &self.normalized[j]))
    }

    /// Features of every canonical point, one row per point.
    pub fn design(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.len(), self.feature_len());
        for (i, z) in self.normalized.iter().enumerate() {
            d.row_mut(i).copy_from(&self.features_normalized(z).transpose());
        }
        d
    }
}

/// Displacement of every canonical point plus the coefficients that extend
/// it to arbitrary points.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformationField {
    kernel: Arc<KernelBasis>,
    coefficients: DMatrix<f64>,
    displacements: Vec<Vector3<f64>>,
}

impl DeformationField {
    /// Field with the given `(4 + M) x 3` coefficients; canonical
    /// displacements are evaluated from them.
    pub fn from_coefficients(kernel: Arc<KernelBasis>, coefficients: DMatrix<f64>) -> Result<Self> {
        let design = kernel.design();
        Self::with_design(kernel, &design, coefficients)
    }

    pub(crate) fn with_design(kernel: Arc<KernelBasis>, design: &DMatrix<f64>, coefficients: DMatrix<f64>) -> Result<Self> {
        if coefficients.shape() != (kernel.feature_len(), 3) {
            return Err(Error::Dimension {
                expected: kernel.feature_len() * 3,
                actual: coefficients.len(),
            });
        }
        let d = design * &coefficients;
        let displacements = (0..d.nrows()).map(|i| Vector3::new(d[(i, 0)], d[(i, 1)], d[(i, 2)])).collect();
        Ok(Self {
            kernel,
            coefficients,
            displacements,
        })
    }

    /// Field whose displacements were computed elsewhere from the same coefficients.
    pub(crate) fn from_parts(kernel: Arc<KernelBasis>, coefficients: DMatrix<f64>, displacements: Vec<Vector3<f64>>) -> Self {
        Self {
            kernel,
            coefficients,
            displacements,
        }
    }

    pub fn zero(kernel: Arc<KernelBasis>) -> Self {
        let n = kernel.len();
        let coefficients = DMatrix::zeros(kernel.feature_len(), 3);
        Self {
            kernel,
            coefficients,
            displacements: vec![Vector3::zeros(); n],
        }
    }

    pub fn kernel(&self) -> &Arc<KernelBasis> {
        &self.kernel
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn displacements(&self) -> &[Vector3<f64>] {
        &self.displacements
    }

    /// Displacements as one vector `[x0, y0, z0, x1, ...]` of length `3 M`.
    pub fn flattened(&self) -> DVector<f64> {
        DVector::from_iterator(
            3 * self.displacements.len(),
            self.displacements.iter().flat_map(|d| d.iter().copied()),
        )
    }

    /// Displacement at an arbitrary point through the kernel extension.
    pub fn displacement_at(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let f = self.kernel.features(p);
        let d = self.coefficients.tr_mul(&f);
        Vector3::new(d[0], d[1], d[2])
    }

    pub fn warp_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        p + self.displacement_at(p)
    }

    /// Canonical points moved by their stored displacements.
    pub fn warped_canonical(&self) -> Vec<Vector3<f64>> {
        self.kernel
            .canonical()
            .iter()
            .zip(&self.displacements)
            .map(|(p, d)| p + d)
            .collect()
    }
}

/// Registers `canonical` onto `target`.
pub fn cpd_register(canonical: &PointCloud, target: &PointCloud, params: &CpdParams) -> Result<DeformationField> {
    params.validate()?;
    let kernel = Arc::new(KernelBasis::new(canonical, params.beta)?);
    register_with(&kernel, target, params)
}

/// Registers a prepared canonical kernel onto `target`.
pub fn register_with(kernel: &Arc<KernelBasis>, target: &PointCloud, params: &CpdParams) -> Result<DeformationField> {
    params.validate()?;
    if params.beta != kernel.beta() {
        return Err(Error::Parameter("kernel width differs from the prepared basis".into()));
    }
    let (mx, sx) = normalization(target.points())?;
    let x: Vec<Vector3<f64>> = target.points().iter().map(|p| (p - mx) / sx).collect();
    let y = kernel.normalized();
    let (m, n) = (y.len(), x.len());
    let g = kernel.gram();

    let mut w = DMatrix::<f64>::zeros(m, 3);
    let mut t: Vec<Vector3<f64>> = y.to_vec();
    let sum_x: Vector3<f64> = x.iter().sum();
    let sum_y: Vector3<f64> = y.iter().sum();
    let sq_x: f64 = x.iter().map(|p| p.norm_squared()).sum();
    let sq_y: f64 = y.iter().map(|p| p.norm_squared()).sum();
    let mut sigma2 = (n as f64 * sq_y + m as f64 * sq_x - 2.0 * sum_x.dot(&sum_y)) / (3.0 * (m * n) as f64);

    let mut k = vec![0.0; m];
    for _ in 0..params.max_iterations {
        let c = (2.0 * std::f64::consts::PI * sigma2).powf(1.5) * params.omega / (1.0 - params.omega) * m as f64
            / n as f64;
        let mut p1 = vec![0.0; m];
        let mut px = vec![Vector3::zeros(); m];
        let mut pt1_sq = 0.0;
        let mut np = 0.0;
        for xn in &x {
            let mut den = c;
            for (km, tm) in k.iter_mut().zip(&t) {
                *km = (-(xn - tm).norm_squared() / (2.0 * sigma2)).exp();
                den += *km;
            }
            if !(den > 0.0) {
                continue;
            }
            let mut row = 0.0;
            for (j, km) in k.iter().enumerate() {
                let p = km / den;
                p1[j] += p;
                px[j] += xn * p;
                row += p;
            }
            pt1_sq += row * xn.norm_squared();
            np += row;
        }
        if np <= 1e-12 {
            return Err(Error::Registration("no point correspondences left".into()));
        }

        let mut a = g.clone();
        for i in 0..m {
            a.row_mut(i).scale_mut(p1[i]);
            a[(i, i)] += params.lambda * sigma2;
        }
        let rhs = DMatrix::from_fn(m, 3, |i, j| px[i][j] - p1[i] * y[i][j]);
        w = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Registration("singular M-step system".into()))?;
        let gw = &g * &w;
        for (i, ti) in t.iter_mut().enumerate() {
            *ti = y[i] + Vector3::new(gw[(i, 0)], gw[(i, 1)], gw[(i, 2)]);
        }

        let cross: f64 = px.iter().zip(&t).map(|(a, b)| a.dot(b)).sum();
        let sq_t: f64 = p1.iter().zip(&t).map(|(p, ti)| p * ti.norm_squared()).sum();
        let next = ((pt1_sq - 2.0 * cross + sq_t) / (3.0 * np)).max(0.0);
        let change = (sigma2 - next).abs() / sigma2;
        sigma2 = next.max(SIGMA2_FLOOR);
        if change < params.tolerance || next <= SIGMA2_FLOOR {
            break;
        }
    }

    let my = kernel.center();
    let sy = kernel.scale();
    let mut coefficients = DMatrix::zeros(kernel.feature_len(), 3);
    for j in 0..3 {
        coefficients[(0, j)] = mx[j] - my[j];
        coefficients[(1 + j, j)] = sx - sy;
    }
    coefficients.view_mut((4, 0), (m, 3)).copy_from(&(w * sx));
    DeformationField::from_coefficients(kernel.clone(), coefficients)
}
