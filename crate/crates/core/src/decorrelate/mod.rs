//! Removing the linear footprint of the sensitive attributes from the predictors.

mod bias;

pub use bias::{bias_ratio_curve, BiasCell, BiasCurve, BiasOptions, CrossTerm};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::ThinSvd;

/// Default relative eigenvalue cutoff for [`pca_reduce`].
pub const PCA_TOL: f64 = 1e-6;

/// OLS residuals of `X` on `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecorrelatedDesign {
    /// `q x p` auxiliary coefficients.
    pub bhat: DMatrix<f64>,
    /// `U = X - S B`, orthogonal to every column of `S`.
    pub uhat: DMatrix<f64>,
    pub s_rank: usize,
}

impl DecorrelatedDesign {
    /// Residuals for new rows using the stored coefficients.
    pub fn apply(&self, s: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
        x - s * &self.bhat
    }
}

pub fn ols_decorrelate(s: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DecorrelatedDesign> {
    if s.nrows() != x.nrows() {
        return Err(Error::invalid("S", "row count differs from X"));
    }
    if s.nrows() <= s.ncols() {
        return Err(Error::TooFewRows {
            rows: s.nrows(),
            columns: s.ncols(),
            block: "sensitive",
        });
    }
    let svd = ThinSvd::new(s);
    if !svd.full_rank() {
        return Err(Error::RankDeficient {
            rank: svd.rank,
            columns: s.ncols(),
        });
    }
    let bhat = svd.solve(x);
    let uhat = x - s * &bhat;
    Ok(DecorrelatedDesign {
        bhat,
        uhat,
        s_rank: svd.rank,
    })
}

/// Principal components of `S` kept by [`pca_reduce`].
#[derive(Debug, Clone, PartialEq)]
pub struct PcaReduction {
    /// `n x q'` scores `S A`; columns are mutually orthogonal.
    pub scores: DMatrix<f64>,
    /// `q x q'` orthonormal loadings `A`.
    pub loadings: DMatrix<f64>,
    /// Retained eigenvalues of `S'S / n`, descending.
    pub eigenvalues: Vec<f64>,
}

/// Keeps components whose eigenvalue exceeds `tol` times the largest one.
pub fn pca_reduce(s: &DMatrix<f64>, tol: f64) -> Result<PcaReduction> {
    if s.ncols() == 0 {
        return Err(Error::invalid("S", "needs at least one column"));
    }
    if !(tol >= 0.0) {
        return Err(Error::invalid("tol", "must be non-negative"));
    }
    let n = s.nrows().max(1) as f64;
    let gram = (s.transpose() * s) / n;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    if !(top > 0.0) {
        return Err(Error::DegenerateSensitive);
    }
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&k| eig.eigenvalues[k] > tol * top)
        .collect();
    let loadings = DMatrix::from_fn(s.ncols(), keep.len(), |i, j| eig.eigenvectors[(i, keep[j])]);
    Ok(PcaReduction {
        scores: s * &loadings,
        eigenvalues: keep.iter().map(|&k| eig.eigenvalues[k]).collect(),
        loadings,
    })
}

/// `S (S'S + lambda I)^{-1} S' X` for every column, through a thin SVD of `S`.
pub(crate) fn ridge_fit_from_svd(svd: &ThinSvd, x: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let mut utx = svd.u.transpose() * x;
    for (j, mut row) in utx.row_iter_mut().enumerate() {
        let s2 = svd.sigma[j] * svd.sigma[j];
        let f = if lambda == 0.0 {
            if svd.sigma[j] > 0.0 && j < svd.rank { 1.0 } else { 0.0 }
        } else if lambda.is_infinite() {
            0.0
        } else {
            s2 / (s2 + lambda)
        };
        row *= f;
    }
    &svd.u * utx
}

/// Predictors minus their ridge fit on `S`.
pub fn ridge_decorrelate(s: &DMatrix<f64>, x: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("lambda", format!("{lambda} is not a positive finite number")));
    }
    if s.nrows() != x.nrows() {
        return Err(Error::invalid("S", "row count differs from X"));
    }
    let svd = ThinSvd::new(s);
    Ok(x - ridge_fit_from_svd(&svd, x, lambda))
}

/// Shrinkage left in direction `j` of `S'S` by a ridge fit: `lambda / (l_j + lambda)`.
pub fn leakage_factor(l: f64, lambda: f64) -> f64 {
    if lambda.is_infinite() {
        1.0
    } else if lambda == 0.0 {
        0.0
    } else {
        lambda / (l + lambda)
    }
}

/// `S' U(lambda)` through the eigendecomposition `S'S = A diag(l) A'`.
pub fn residual_cross_covariance(s: &DMatrix<f64>, x: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda", format!("{lambda} is negative")));
    }
    if s.nrows() != x.nrows() {
        return Err(Error::invalid("S", "row count differs from X"));
    }
    let eig = SymmetricEigen::new(s.transpose() * s);
    let a = &eig.eigenvectors;
    let mut proj = a.transpose() * (s.transpose() * x);
    for (j, mut row) in proj.row_iter_mut().enumerate() {
        row *= leakage_factor(eig.eigenvalues[j].max(0.0), lambda);
    }
    Ok(a * proj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn column_norms(m: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.norm()))
    }

    fn random(n: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, k, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn orthogonal_inputs_are_untouched() {
        let s = DMatrix::from_column_slice(4, 1, &[1.0, -1.0, 1.0, -1.0]);
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 1.0, -1.0, -1.0]);
        let d = ols_decorrelate(&s, &x).unwrap();
        assert!((d.uhat - x).abs().max() < 1e-15);
    }

    #[test]
    fn exact_fit_leaves_zero_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random(20, 3, &mut rng);
        let c = random(3, 2, &mut rng);
        let d = ols_decorrelate(&s, &(&s * &c)).unwrap();
        assert!(d.uhat.abs().max() < 1e-12);
        assert!((d.bhat - c).abs().max() < 1e-12);
    }

    #[test]
    fn rank_deficient_s_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = random(20, 3, &mut rng);
        let c0 = s.column(0).into_owned();
        s.set_column(2, &c0);
        let x = random(20, 2, &mut rng);
        assert!(matches!(
            ols_decorrelate(&s, &x),
            Err(Error::RankDeficient { rank: 2, columns: 3 })
        ));
        let pca = pca_reduce(&s, PCA_TOL).unwrap();
        assert_eq!(pca.scores.ncols(), 2);
        let g = pca.scores.transpose() * &pca.scores;
        assert!(g[(0, 1)].abs() < 1e-12 * g[(0, 0)]);
    }

    #[test]
    fn pca_drops_tiny_component() {
        // Orthonormal directions with a constructed spectrum 1, 0.5, 1e-9.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random(200, 3, &mut rng).qr().q();
        let scale = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5f64.sqrt(), 1e-9f64.sqrt()]));
        let s = q * scale * (200.0f64).sqrt();
        let pca = pca_reduce(&s, 1e-6).unwrap();
        assert_eq!(pca.scores.ncols(), 2);
        let full = pca_reduce(&s, 1e-12).unwrap();
        assert_eq!(full.scores.ncols(), 3);
        assert!(pca_reduce(&DMatrix::zeros(10, 2), 1e-6).is_err());
    }

    #[test]
    fn ridge_matches_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random(15, 3, &mut rng);
        let x = random(15, 2, &mut rng);
        let lambda = 5.0;
        let g = s.transpose() * &s + DMatrix::identity(3, 3) * lambda;
        let direct = &x - &s * g.lu().solve(&(s.transpose() * &x)).unwrap();
        let got = ridge_decorrelate(&s, &x, lambda).unwrap();
        assert!((got - direct).abs().max() < 1e-12);
        assert!(ridge_decorrelate(&s, &x, 0.0).is_err());
    }

    #[test]
    fn spectral_identity_and_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random(40, 3, &mut rng);
        let x = random(40, 2, &mut rng);
        assert!(residual_cross_covariance(&s, &x, 0.0).unwrap().abs().max() < 1e-12);
        let spectral = residual_cross_covariance(&s, &x, 7.0).unwrap();
        let direct = s.transpose() * ridge_decorrelate(&s, &x, 7.0).unwrap();
        assert!((&spectral - &direct).abs().max() <= 1e-10 * direct.abs().max());
        let far = residual_cross_covariance(&s, &x, 1e14).unwrap();
        let stx = s.transpose() * &x;
        assert!((far - &stx).abs().max() < 1e-9 * stx.abs().max());
    }

    #[test]
    fn leakage_grows_with_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = random(50, 3, &mut rng);
        let x = random(50, 2, &mut rng);
        let mut prev = DVector::zeros(2);
        for lambda in [0.0, 0.1, 1.0, 10.0, 100.0, 1e4] {
            let norms = column_norms(&residual_cross_covariance(&s, &x, lambda).unwrap());
            for j in 0..2 {
                assert!(norms[j] >= prev[j] - 1e-12);
            }
            prev = norms;
        }
    }
}
