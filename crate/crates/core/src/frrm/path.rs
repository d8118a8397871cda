use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::ThinSvd;

/// Ridge solutions `(A'A + lambda I)^{-1} A'b` for many penalties from one SVD.
#[derive(Debug, Clone)]
pub struct RidgePath {
    svd: ThinSvd,
    utb: DVector<f64>,
    what: &'static str,
}

impl RidgePath {
    pub fn new(a: &DMatrix<f64>, b: &DVector<f64>, what: &'static str) -> Self {
        let svd = ThinSvd::new(a);
        let utb = svd.u.transpose() * b;
        RidgePath { svd, utb, what }
    }

    pub fn full_rank(&self) -> bool {
        self.svd.full_rank()
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.svd.sigma
    }

    /// `U' b` in the left singular basis.
    pub fn projection(&self) -> &DVector<f64> {
        &self.utb
    }

    pub fn at(&self, lambda: f64) -> Result<DVector<f64>> {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(Error::invalid("lambda", format!("{lambda} is not a non-negative number")));
        }
        if lambda.is_infinite() {
            return Ok(DVector::zeros(self.svd.v.nrows()));
        }
        if lambda == 0.0 && !self.full_rank() {
            return Err(Error::Singular(self.what));
        }
        Ok(self.svd.ridge_from_projection(&self.utb, lambda))
    }
}

/// Predictor coefficients on the decorrelated block; they do not depend on `r`.
pub fn beta_closed_form(u: &DMatrix<f64>, y: &DVector<f64>, lambda2: f64) -> Result<DVector<f64>> {
    RidgePath::new(u, y, "U'U is singular; use lambda2 > 0 or drop predictors").at(lambda2)
}

pub fn alpha_ridge(s: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    RidgePath::new(s, y, "S'S is singular").at(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_augmented_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = DMatrix::from_fn(40, 3, |_, _| rng.random::<f64>() - 0.5);
        let y = DVector::from_fn(40, |_, _| rng.random::<f64>());
        let lambda: f64 = 2.5;
        let mut aug = DMatrix::zeros(43, 3);
        aug.view_mut((0, 0), (40, 3)).copy_from(&s);
        for j in 0..3 {
            aug[(40 + j, j)] = lambda.sqrt();
        }
        let mut rhs = DVector::zeros(43);
        rhs.rows_mut(0, 40).copy_from(&y);
        let qr = aug.qr();
        let want = qr.r().solve_upper_triangular(&(qr.q().transpose() * rhs)).unwrap();
        let got = alpha_ridge(&s, &y, lambda).unwrap();
        assert!((got - want).abs().max() < 1e-12);
    }

    #[test]
    fn limits() {
        let s = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, -1.0]);
        let y = DVector::from_vec(vec![2.0, 0.0, -2.0]);
        assert!((alpha_ridge(&s, &y, 0.0).unwrap()[0] - 2.0).abs() < 1e-14);
        assert_eq!(alpha_ridge(&s, &y, f64::INFINITY).unwrap()[0], 0.0);
        assert!(alpha_ridge(&s, &y, 1e12).unwrap()[0].abs() < 1e-10);
        let flat = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.0, 0.0, -1.0, -1.0]);
        assert!(matches!(beta_closed_form(&flat, &y, 0.0), Err(Error::Singular(_))));
        assert!(beta_closed_form(&flat, &y, 1.0).is_ok());
    }
}
