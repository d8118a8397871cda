use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance on `S'S / n = I` for the closed form.
const ORTHO_TOL: f64 = 1e-8;

/// Rescales a centered `S` so that `S'S = n I`, spanning the same column space.
pub fn orthonormalize(s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = s.nrows() as f64;
    s.clone().qr().q() * n.sqrt()
}

/// Penalty and coefficients when the sensitive columns satisfy `S'S = n I`.
///
/// `c` is `sqrt(beta' VAR(U) beta)`. The constraint reduces to
/// `||S'y||^2 / (n + lambda)^2 = c^2 r / (1 - r)`.
pub fn closed_form_independent(
    s: &DMatrix<f64>,
    y: &DVector<f64>,
    c: f64,
    r: f64,
) -> Result<(f64, DVector<f64>)> {
    let n = s.nrows() as f64;
    let gram = s.transpose() * s / n;
    let dev = (gram - DMatrix::identity(s.ncols(), s.ncols())).abs().max();
    if dev > ORTHO_TOL {
        return Err(Error::invalid("S", format!("S'S/n differs from the identity by {dev:e}")));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::invalid("r", format!("{r} is outside (0, 1)")));
    }
    if !(c > 0.0) {
        return Err(Error::invalid("c", "must be positive"));
    }
    let sty = s.transpose() * y;
    let scale = sty.norm() / (c * (r / (1.0 - r)).sqrt());
    let lambda = scale - n;
    if lambda < -1e-12 * n {
        return Err(Error::Inactive("the parity constraint is not binding at lambda = 0"));
    }
    let lambda = lambda.max(0.0);
    Ok((lambda, sty / (n + lambda)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn meets_the_constraint_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let s = orthonormalize(&DMatrix::from_fn(100, 3, |_, _| rng.random::<f64>() - 0.5));
        let y = DVector::from_fn(100, |_, _| rng.random::<f64>() - 0.5) + &s * DVector::from_vec(vec![2.0, 1.0, 3.0]);
        let (c, r) = (0.8, 0.1);
        let (lambda, alpha) = closed_form_independent(&s, &y, c, r).unwrap();
        assert!(lambda > 0.0);
        let form = alpha.norm_squared();
        assert!((form - c * c * r / (1.0 - r)).abs() < 1e-12 * form);
        let dir = s.transpose() * &y;
        assert!((alpha.normalize() - dir.normalize()).abs().max() < 1e-12);
    }

    #[test]
    fn boundary_returns_ols() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let s = orthonormalize(&DMatrix::from_fn(80, 2, |_, _| rng.random::<f64>() - 0.5));
        let y = DVector::from_fn(80, |_, _| rng.random::<f64>() - 0.5) + &s * DVector::from_vec(vec![1.0, -1.0]);
        let c = 0.5;
        let norm = (s.transpose() * &y).norm();
        // Choose r so that norm / (c sqrt(r/(1-r))) = n.
        let k = (norm / (c * 80.0)).powi(2);
        let r = k / (1.0 + k);
        let (lambda, alpha) = closed_form_independent(&s, &y, c, r).unwrap();
        assert!(lambda.abs() < 1e-9);
        let ols = s.transpose() * &y / 80.0;
        assert!((alpha - ols).abs().max() < 1e-12);
        assert!(closed_form_independent(&s, &y, c, r * 1.5).is_err());
    }
}
