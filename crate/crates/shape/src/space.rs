//! Linear latent space of deformation fields around a canonical model.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::cpd::{register_with, CpdParams, DeformationField, KernelBasis};
use crate::error::{Error, Result};
use crate::grasp::GraspPoses;
use crate::infer::LatentDescriptor;
use crate::pca::{pca_em, PcaParams};

pub const DEFAULT_COMPONENTS: usize = 8;

const BUNDLE_FORMAT: &str = "dualarm-shape-space/1";

#[derive(Clone, Debug)]
pub struct ShapeSpace {
    canonical: PointCloud,
    kernel: Arc<KernelBasis>,
    design: DMatrix<f64>,
    cpd: CpdParams,
    mean: DVector<f64>,
    mean_coefficients: DMatrix<f64>,
    basis: DMatrix<f64>,
    basis_coefficients: Vec<DMatrix<f64>>,
    variances: Vec<f64>,
    active: usize,
    grasps: GraspPoses,
}

fn flatten_coefficients(c: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(c.len(), c.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()))
}

fn unflatten_coefficients(v: &[f64], rows: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, 3, v)
}

/// Fields with exact kernel coefficients used to complete the basis beyond
/// the data span: constant, linear, then single-atom kernel fields.
fn completion_candidates(kernel: &KernelBasis, design: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let rows = kernel.feature_len();
    let count = 3 * rows;
    let mut disp = DMatrix::zeros(3 * kernel.len(), count);
    let mut coef = DMatrix::zeros(3 * rows, count);
    for r in 0..rows {
        for j in 0..3 {
            let col = 3 * r + j;
            coef[(col, col)] = 1.0;
            for p in 0..kernel.len() {
                disp[(3 * p + j, col)] = design[(p, r)];
            }
        }
    }
    (disp, coef)
}

impl ShapeSpace {
    pub fn canonical(&self) -> &PointCloud {
        &self.canonical
    }

    pub fn kernel(&self) -> &Arc<KernelBasis> {
        &self.kernel
    }

    pub fn cpd_params(&self) -> &CpdParams {
        &self.cpd
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Orthonormal principal directions of flattened fields, one per column.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Number of latent dimensions.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Leading components spanned by the training fields; the remaining
    /// components have zero variance and stay at zero during inference.
    pub fn active(&self) -> usize {
        self.active
    }

    pub fn grasps(&self) -> &GraspPoses {
        &self.grasps
    }

    pub fn with_grasps(mut self, grasps: GraspPoses) -> Self {
        self.grasps = grasps;
        self
    }

    fn check_dim(&self, coords: &[f64]) -> Result<()> {
        if coords.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: coords.len(),
            });
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("latent coordinates must be finite".into()));
        }
        Ok(())
    }

    /// Field `mean + basis * coords` with matching kernel coefficients.
    pub fn field(&self, coords: &[f64]) -> Result<DeformationField> {
        self.check_dim(coords)?;
        let z = DVector::from_column_slice(coords);
        let flat = &self.mean + &self.basis * &z;
        let mut coefficients = self.mean_coefficients.clone();
        for (c, zl) in self.basis_coefficients.iter().zip(coords) {
            coefficients += c * *zl;
        }
        let displacements = flat
            .as_slice()
            .chunks_exact(3)
            .map(|c| Vector3::new(c[0], c[1], c[2]))
            .collect();
        Ok(DeformationField::from_parts(self.kernel.clone(), coefficients, displacements))
    }

    /// Latent coordinates of a field: `basis^T (field - mean)`.
    pub fn project(&self, field: &DeformationField) -> Result<DVector<f64>> {
        let flat = field.flattened();
        if flat.len() != self.mean.len() {
            return Err(Error::Dimension {
                expected: self.mean.len(),
                actual: flat.len(),
            });
        }
        Ok(self.basis.tr_mul(&(flat - &self.mean)))
    }

    /// Warped canonical in the descriptor's frame, plus its field.
    pub fn reconstruct(&self, latent: &LatentDescriptor) -> Result<(PointCloud, DeformationField)> {
        let field = self.field(latent.coordinates.as_slice())?;
        let points = field
            .warped_canonical()
            .iter()
            .map(|p| latent.alignment.transform_point(p))
            .collect();
        Ok((PointCloud::new(points)?, field))
    }

    /// Kernel features of every canonical point, one row per point.
    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn to_json(&self) -> String {
        let bundle = Bundle {
            format: BUNDLE_FORMAT.into(),
            cpd: self.cpd,
            canonical: self.canonical.clone(),
            mean: self.mean.as_slice().to_vec(),
            mean_coefficients: flatten_coefficients(&self.mean_coefficients).as_slice().to_vec(),
            basis: self.basis.column_iter().map(|c| c.iter().copied().collect()).collect(),
            basis_coefficients: self
                .basis_coefficients
                .iter()
                .map(|c| flatten_coefficients(c).as_slice().to_vec())
                .collect(),
            variances: self.variances.clone(),
            active: self.active,
            grasps: self.grasps.clone(),
        };
        serde_json::to_string(&bundle).expect("shape space serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: Bundle = serde_json::from_str(text).map_err(|e| Error::parse("shape-space bundle", e))?;
        if b.format != BUNDLE_FORMAT {
            return Err(Error::parse("shape-space bundle", format!("unknown format `{}`", b.format)));
        }
        b.cpd.validate()?;
        let kernel = Arc::new(KernelBasis::new(&b.canonical, b.cpd.beta)?);
        let m = kernel.len();
        let rows = kernel.feature_len();
        let d = b.basis.len();
        let bad = |msg: &str| Err(Error::parse("shape-space bundle", msg));
        if d == 0 || b.basis_coefficients.len() != d || b.variances.len() != d || b.active > d {
            return bad("component counts disagree");
        }
        if b.mean.len() != 3 * m
            || b.mean_coefficients.len() != 3 * rows
            || b.basis.iter().any(|c| c.len() != 3 * m)
            || b.basis_coefficients.iter().any(|c| c.len() != 3 * rows)
        {
            return bad("vector lengths do not match the canonical model");
        }
        let all = b
            .mean
            .iter()
            .chain(&b.mean_coefficients)
            .chain(b.basis.iter().flatten())
            .chain(b.basis_coefficients.iter().flatten())
            .chain(&b.variances);
        if all.clone().any(|v| !v.is_finite()) {
            return bad("non-finite values");
        }
        if b.variances.iter().any(|v| *v < 0.0) || b.variances.windows(2).any(|w| w[1] > w[0]) {
            return bad("variances must be nonnegative and nonincreasing");
        }
        let basis = DMatrix::from_fn(3 * m, d, |i, j| b.basis[j][i]);
        if (basis.transpose() * &basis - DMatrix::identity(d, d)).amax() > 1e-9 {
            return bad("basis is not orthonormal");
        }
        let design = kernel.design();
        Ok(Self {
            canonical: b.canonical,
            design,
            kernel,
            cpd: b.cpd,
            mean: DVector::from_vec(b.mean),
            mean_coefficients: unflatten_coefficients(&b.mean_coefficients, rows),
            basis,
            basis_coefficients: b.basis_coefficients.iter().map(|c| unflatten_coefficients(c, rows)).collect(),
            variances: b.variances,
            active: b.active,
            grasps: b.grasps,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Bundle {
    format: String,
    cpd: CpdParams,
    canonical: PointCloud,
    mean: Vec<f64>,
    /// Row-major `(4 + M) x 3`.
    mean_coefficients: Vec<f64>,
    basis: Vec<Vec<f64>>,
    basis_coefficients: Vec<Vec<f64>>,
    variances: Vec<f64>,
    active: usize,
    grasps: GraspPoses,
}

/// Registers the canonical model to every training cloud and extracts `d`
/// principal directions of the resulting fields.
pub fn build_shape_space(
    canonical: &PointCloud,
    training: &[PointCloud],
    d: usize,
    cpd: &CpdParams,
    grasps: GraspPoses,
) -> Result<ShapeSpace> {
    if training.len() < 2 {
        return Err(Error::Parameter("need at least 2 training clouds".into()));
    }
    if d == 0 || d > training.len() {
        return Err(Error::Parameter(format!(
            "{d} components requested from {} training clouds",
            training.len()
        )));
    }
    cpd.validate()?;
    let kernel = Arc::new(KernelBasis::new(canonical, cpd.beta)?);
    let fields = training
        .iter()
        .map(|t| register_with(&kernel, t, cpd))
        .collect::<Result<Vec<_>>>()?;
    build_from_fields(canonical, kernel, &fields, d, cpd, grasps)
}

/// Principal directions of already registered fields.
pub fn build_from_fields(
    canonical: &PointCloud,
    kernel: Arc<KernelBasis>,
    fields: &[DeformationField],
    d: usize,
    cpd: &CpdParams,
    grasps: GraspPoses,
) -> Result<ShapeSpace> {
    if fields.iter().any(|f| !Arc::ptr_eq(f.kernel(), &kernel) && **f.kernel() != *kernel) {
        return Err(Error::Parameter("fields use different canonical models".into()));
    }
    let data = DMatrix::from_columns(&fields.iter().map(|f| f.flattened()).collect::<Vec<_>>());
    let coef = DMatrix::from_columns(
        &fields
            .iter()
            .map(|f| flatten_coefficients(f.coefficients()))
            .collect::<Vec<_>>(),
    );
    let pca = pca_em(&data, d, &PcaParams::default())?;
    let mean_coef = coef.column_mean();
    let mut centered_coef = coef.clone();
    for mut c in centered_coef.column_iter_mut() {
        c -= &mean_coef;
    }
    let rank = pca.rank;
    let design = kernel.design();
    let rows = kernel.feature_len();

    let mut disp_cols: Vec<DVector<f64>> = (0..rank).map(|l| pca.basis.column(l).into_owned()).collect();
    let mut coef_cols: Vec<DVector<f64>> = (0..rank)
        .map(|l| &centered_coef * pca.combination.column(l))
        .collect();
    if rank < d {
        let (cand_disp, cand_coef) = completion_candidates(&kernel, &design);
        for k in 0..cand_disp.ncols() {
            if disp_cols.len() == d {
                break;
            }
            let mut v = cand_disp.column(k).into_owned();
            let mut c = cand_coef.column(k).into_owned();
            let norm0 = v.norm();
            if norm0 == 0.0 {
                continue;
            }
            for _ in 0..2 {
                for (bv, bc) in disp_cols.iter().zip(&coef_cols) {
                    let proj = bv.dot(&v);
                    v -= bv * proj;
                    c -= bc * proj;
                }
            }
            let norm = v.norm();
            if norm > 0.5 * norm0 {
                disp_cols.push(v / norm);
                coef_cols.push(c / norm);
            }
        }
        if disp_cols.len() < d {
            return Err(Error::Parameter("could not complete the basis".into()));
        }
    }
    Ok(ShapeSpace {
        canonical: canonical.clone(),
        kernel,
        cpd: *cpd,
        mean: pca.mean.clone(),
        mean_coefficients: unflatten_coefficients(mean_coef.as_slice(), rows),
        basis: DMatrix::from_columns(&disp_cols),
        basis_coefficients: coef_cols.iter().map(|c| unflatten_coefficients(c.as_slice(), rows)).collect(),
        variances: pca.variances.clone(),
        active: rank,
        grasps,
        design,
    })
}
