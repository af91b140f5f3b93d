//! Principal components by expectation maximization.
//!
//! The iteration alternates `E = (W^T W)^-1 W^T Xc` and
//! `W = Xc E^T (E E^T)^-1` on the centered data `Xc` and converges to the
//! leading subspace without forming the covariance. Directions are then
//! rotated within that subspace to diagonalize the projected covariance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcaParams {
    pub max_iterations: usize,
    /// Largest subspace change between iterations that counts as converged.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for PcaParams {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1e-12,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    pub mean: DVector<f64>,
    /// Orthonormal directions, one per column, by nonincreasing variance.
    pub basis: DMatrix<f64>,
    pub variances: Vec<f64>,
    /// Leading columns spanned by the data; the rest complete the basis
    /// and carry zero variance.
    pub rank: usize,
    /// `basis[:, l] = centered * combination[:, l]` for `l < rank`.
    pub combination: DMatrix<f64>,
    pub iterations: usize,
}

/// Numerical rank of the centered data.
fn data_rank(centered: &DMatrix<f64>, scale: f64) -> usize {
    if centered.ncols() == 0 {
        return 0;
    }
    let qr = centered.clone().col_piv_qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].abs()).collect();
    let lead = diag.first().copied().unwrap_or(0.0);
    let tol = (1e-10 * lead).max(1e-12 * scale);
    diag.iter().filter(|d| **d > tol).count()
}

/// Thin QR orthonormalization; returns `Q` and the inverse of `R`.
fn orthonormalize(w: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let qr = w.clone().qr();
    let r = qr.r();
    let r_inv = r
        .try_inverse()
        .ok_or_else(|| Error::Parameter("principal directions collapsed".into()))?;
    Ok((qr.q(), r_inv))
}

/// Columns `e_k` of `D x D` identity completed against `basis`; used only
/// when there are fewer data directions than requested components.
pub(crate) fn complete_orthonormal(basis: &DMatrix<f64>, count: usize, candidates: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut cols: Vec<DVector<f64>> = basis.column_iter().map(|c| c.into_owned()).collect();
    let mut picked = Vec::new();
    for k in 0..candidates.ncols() {
        if picked.len() == count {
            break;
        }
        let mut v = candidates.column(k).into_owned();
        let norm0 = v.norm();
        if norm0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&v);
                v -= c * proj;
            }
        }
        let norm = v.norm();
        if norm > 0.5 * norm0 {
            v /= norm;
            cols.push(v.clone());
            picked.push(k);
        }
    }
    (picked.len() == count).then(|| DMatrix::from_columns(&cols[basis.ncols()..]))
}

/// Top-`d` principal directions of `data`, one sample per column.
pub fn pca_em(data: &DMatrix<f64>, d: usize, params: &PcaParams) -> Result<Pca> {
    let (dim, k) = data.shape();
    if k < 2 {
        return Err(Error::Parameter("need at least 2 samples".into()));
    }
    if d == 0 || d > k || d > dim {
        return Err(Error::Parameter(format!(
            "cannot extract {d} components from {k} samples of dimension {dim}"
        )));
    }
    let mean = data.column_mean();
    let mut centered = data.clone();
    for mut c in centered.column_iter_mut() {
        c -= &mean;
    }
    let scale = data.amax() * (dim as f64).sqrt();
    let rank = data_rank(&centered, scale).min(d);

    let mut basis = DMatrix::zeros(dim, 0);
    let mut combination = DMatrix::zeros(k, 0);
    let mut iterations = 0;
    let mut variances = Vec::new();
    if rank > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut a = DMatrix::from_fn(k, rank, |_, _| rng.random_range(-1.0..1.0));
        let mut w = &centered * &a;
        let (mut q, _) = orthonormalize(&w)?;
        w = q.clone();
        loop {
            iterations += 1;
            let wtw = w.transpose() * &w;
            let e = wtw
                .cholesky()
                .ok_or_else(|| Error::Parameter("singular E-step".into()))?
                .solve(&(w.transpose() * &centered));
            let eet = &e * e.transpose();
            let solve = eet
                .cholesky()
                .ok_or_else(|| Error::Parameter("singular M-step".into()))?;
            // W = Xc E^T (E E^T)^-1, tracked as W = Xc A.
            let a_next = solve.solve(&e).transpose();
            let w_next = &centered * &a_next;
            let (q_next, r_inv) = orthonormalize(&w_next)?;
            let change = (&q_next - &q * (q.transpose() * &q_next)).norm();
            a = a_next * r_inv;
            w = q_next.clone();
            q = q_next;
            if change < params.tolerance || iterations >= params.max_iterations {
                break;
            }
        }
        let projected = q.transpose() * &centered;
        let cov = &projected * projected.transpose() / (k - 1) as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..rank).collect();
        order.sort_by(|x, y| eig.eigenvalues[*y].total_cmp(&eig.eigenvalues[*x]));
        let u = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
        basis = &q * &u;
        combination = &a * &u;
        variances = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    }
    if rank < d {
        let extra = complete_orthonormal(&basis, d - rank, &DMatrix::identity(dim, dim))
            .ok_or_else(|| Error::Parameter("could not complete the basis".into()))?;
        basis = DMatrix::from_columns(&basis.column_iter().chain(extra.column_iter()).map(|c| c.into_owned()).collect::<Vec<_>>());
        let mut comb = DMatrix::zeros(k, d);
        comb.view_mut((0, 0), (k, rank)).copy_from(&combination);
        combination = comb;
        variances.resize(d, 0.0);
    }
    Ok(Pca {
        mean,
        basis,
        variances,
        rank,
        combination,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_samples_give_their_difference() {
        let a = DVector::from_vec(vec![1.0, 2.0, 0.0, -1.0]);
        let b = DVector::from_vec(vec![0.0, 2.5, 1.0, -1.0]);
        let data = DMatrix::from_columns(&[a.clone(), b.clone()]);
        let pca = pca_em(&data, 1, &PcaParams::default()).unwrap();
        let diff = (&b - &a).normalize();
        let cos = pca.basis.column(0).dot(&diff).abs();
        assert!((1.0 - cos) < 1e-12);
        assert_eq!(pca.rank, 1);
        assert!((pca.variances[0] - (&b - &a).norm_squared() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_have_zero_variance_and_orthonormal_basis() {
        let a = DVector::from_vec(vec![0.3, -0.7, 0.1, 2.0, 1.0]);
        let data = DMatrix::from_columns(&[a.clone(), a.clone(), a.clone()]);
        let pca = pca_em(&data, 3, &PcaParams::default()).unwrap();
        assert_eq!(pca.rank, 0);
        assert!(pca.variances.iter().all(|v| *v == 0.0));
        let gram = pca.basis.transpose() * &pca.basis;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn too_many_components_is_a_parameter_error() {
        let data = DMatrix::from_fn(4, 2, |i, j| (i + 2 * j) as f64);
        assert!(pca_em(&data, 3, &PcaParams::default()).is_err());
        assert!(pca_em(&data, 0, &PcaParams::default()).is_err());
    }
}
