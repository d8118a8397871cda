//! Dense linear algebra shared by the solvers.
//!
//! Least squares goes through a thin SVD with a relative singular-value
//! cutoff; normal equations are never formed outside test oracles.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below `RANK_TOL * sigma_max` are treated as zero.
pub const RANK_TOL: f64 = 1e-8;

pub fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows().max(1) as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

pub fn mean(v: &DVector<f64>) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.sum() / v.len() as f64
    }
}

/// Empirical covariance matrix with denominator `n`.
pub fn covariance(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows().max(1) as f64;
    let means = column_means(m);
    let mut centered = m.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    (centered.transpose() * &centered) / n
}

/// Empirical variance with denominator `n`.
pub fn variance(v: &DVector<f64>) -> f64 {
    covariance_of(v, v)
}

pub fn covariance_of(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len().max(1) as f64;
    let (ma, mb) = (mean(a), mean(b));
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / n
}

pub fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (v.transpose() * m * v)[(0, 0)]
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Thin SVD of a tall matrix with its numerical rank.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
    pub rank: usize,
    cutoff: f64,
}

impl ThinSvd {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let svd = a.clone().svd(true, true);
        let u = svd.u.expect("thin SVD always computes U when asked");
        let v = svd
            .v_t
            .expect("thin SVD always computes V^T when asked")
            .transpose();
        let sigma = svd.singular_values;
        let sigma_max = sigma.iter().cloned().fold(0.0_f64, f64::max);
        let cutoff = RANK_TOL * sigma_max;
        let rank = if sigma_max > 0.0 {
            sigma.iter().filter(|&&s| s > cutoff).count()
        } else {
            0
        };
        ThinSvd {
            u,
            sigma,
            v,
            rank,
            cutoff,
        }
    }

    pub fn full_rank(&self) -> bool {
        self.rank == self.sigma.len()
    }

    /// Minimum-norm least-squares solution, dropping singular values below the cutoff.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let utb = self.u.transpose() * b;
        let mut scaled = utb;
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            let s = self.sigma[i];
            let f = if s > self.cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
            row *= f;
        }
        &self.v * scaled
    }

    /// Ridge solution `(A^T A + lambda I)^{-1} A^T b` for one right-hand side.
    ///
    /// `utb` must be `U^T b`.
    pub fn ridge_from_projection(&self, utb: &DVector<f64>, lambda: f64) -> DVector<f64> {
        let mut coef = DVector::zeros(self.sigma.len());
        for i in 0..self.sigma.len() {
            let s = self.sigma[i];
            let denom = s * s + lambda;
            if denom > 0.0 && (lambda > 0.0 || s > self.cutoff) {
                coef[i] = s * utb[i] / denom;
            }
        }
        &self.v * coef
    }
}

/// Least squares `min ||A B - Y||` column by column; errors when `A` lacks full column rank.
pub fn lstsq_full_rank(a: &DMatrix<f64>, y: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    let svd = ThinSvd::new(a);
    if !svd.full_rank() {
        return Err(Error::Singular(what));
    }
    Ok(svd.solve(y))
}

pub fn vector_to_matrix(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

/// Rows of `m` picked by `idx`, in that order.
pub fn select_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

pub fn select_entries(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_matches_hand_computation() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 9.0]);
        let c = covariance(&m);
        assert!((c[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((c[(0, 1)] - 7.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn svd_solve_matches_exact_system() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x = DVector::from_vec(vec![2.0, -1.0]);
        let y = vector_to_matrix(&(&a * &x));
        let sol = lstsq_full_rank(&a, &y, "test").unwrap();
        assert!((sol[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((sol[(1, 0)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_is_detected() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert_eq!(ThinSvd::new(&a).rank, 1);
        assert!(lstsq_full_rank(&a, &DMatrix::zeros(3, 1), "test").is_err());
    }
}
