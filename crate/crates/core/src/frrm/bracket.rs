use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interval known to contain the statistical-parity penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    /// Extreme eigenvalues of `S'S`.
    pub l_min: f64,
    pub l_max: f64,
    /// `||S'y||^2`.
    pub d: f64,
    /// Target for `alpha' (S'S / n) alpha`.
    pub c: f64,
    /// `sum_j l_j z_j^2` with `z = A'S'y`.
    pub w: f64,
}

impl Bracket {
    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.lo && lambda <= self.hi
    }
}

/// `alpha(lambda)' (S'S/n) alpha(lambda) = (1/n) sum_j l_j z_j^2 / (l_j + lambda)^2`
/// lies between the same sum with every `l_j` replaced by `l_max` and by `l_min`;
/// each bound equals `c` at one closed-form `lambda`.
pub fn lambda_bracket(s: &DMatrix<f64>, y: &DVector<f64>, c: f64) -> Result<Bracket> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid("c", format!("{c} is not a positive finite number")));
    }
    let n = s.nrows() as f64;
    let eig = SymmetricEigen::new(s.transpose() * s);
    let z = eig.eigenvectors.transpose() * (s.transpose() * y);
    let l = &eig.eigenvalues;
    let l_min = l.min().max(0.0);
    let l_max = l.max();
    if !(l_min > 0.0) {
        return Err(Error::Singular("S'S is singular"));
    }
    let w: f64 = (0..l.len()).map(|j| l[j] * z[j] * z[j]).sum();
    let at_zero: f64 = (0..l.len()).map(|j| z[j] * z[j] / l[j]).sum::<f64>() / n;
    if at_zero < c * (1.0 - 1e-12) {
        return Err(Error::Inactive("the parity constraint is not binding at lambda = 0"));
    }
    let root = (w / (n * c)).sqrt();
    // A relative pad absorbs rounding in the eigenvalues.
    let pad = 1e-9 * (root + l_max);
    Ok(Bracket {
        lo: (root - l_max - pad).max(0.0),
        hi: (root - l_min + pad).max(0.0),
        l_min,
        l_max,
        d: z.norm_squared(),
        c,
        w,
    })
}
