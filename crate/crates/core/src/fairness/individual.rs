//! Pairwise individual-fairness penalty reduced to a `q x q` quadratic form.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::{map_blocks, par_map, Execution};
use crate::fairness::Distance;
use crate::linalg::quad_form;

const ROW_BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IfOptions {
    /// Largest `n` for which all `n^2` pairs are summed.
    pub exact_limit: usize,
    /// Estimate from random pairs above `exact_limit` instead of failing.
    pub subsample: bool,
    pub pairs: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for IfOptions {
    fn default() -> Self {
        IfOptions {
            exact_limit: 5000,
            subsample: true,
            pairs: 1_000_000,
            seed: 0x5eed_1f,
            execution: Execution::Auto,
        }
    }
}

/// `f(alpha) = alpha' M alpha = sum_{i,j} d(y_i, y_j) ((s_i - s_j) alpha)^2` over ordered pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct IfCache {
    pub m: DMatrix<f64>,
    /// False when `m` is a subsampled estimate.
    pub exact: bool,
}

impl IfCache {
    pub fn f(&self, alpha: &DVector<f64>) -> f64 {
        quad_form(&self.m, alpha)
    }
}

pub fn laplacian_form(
    y: &DVector<f64>,
    s: &DMatrix<f64>,
    distance: Distance,
    opts: &IfOptions,
) -> Result<IfCache> {
    let n = y.len();
    if n < 2 {
        return Err(Error::invalid("n", "individual fairness needs at least two rows"));
    }
    if s.nrows() != n {
        return Err(Error::invalid("S", "row count differs from y"));
    }
    let q = s.ncols();
    if n <= opts.exact_limit {
        // 2 S'(D - W)S, accumulated one row block at a time.
        let parts = map_blocks(opts.execution, n, ROW_BLOCK, |rows| {
            let mut acc = DMatrix::<f64>::zeros(q, q);
            let mut t = vec![0.0; q];
            for i in rows {
                let mut d = 0.0;
                t.iter_mut().for_each(|v| *v = 0.0);
                for j in 0..n {
                    let w = distance.eval(y[i], y[j]);
                    if w != 0.0 {
                        d += w;
                        for k in 0..q {
                            t[k] += w * s[(j, k)];
                        }
                    }
                }
                for a in 0..q {
                    let sa = s[(i, a)];
                    for b in 0..q {
                        acc[(a, b)] += d * sa * s[(i, b)] - sa * t[b];
                    }
                }
            }
            acc
        });
        let m = parts.into_iter().fold(DMatrix::zeros(q, q), |a, b| a + b) * 2.0;
        return Ok(IfCache {
            m: symmetrize(m),
            exact: true,
        });
    }
    if !opts.subsample {
        return Err(Error::TooManyPairs {
            n,
            limit: opts.exact_limit,
        });
    }
    if opts.pairs == 0 {
        return Err(Error::invalid("pairs", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let pairs: Vec<(usize, usize)> = (0..opts.pairs)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .collect();
    let chunks: Vec<&[(usize, usize)]> = pairs.chunks(4096).collect();
    let parts = par_map(opts.execution, &chunks, |chunk| {
        let mut acc = DMatrix::<f64>::zeros(q, q);
        let mut diff = vec![0.0; q];
        for &(i, j) in chunk.iter() {
            let w = distance.eval(y[i], y[j]);
            if w == 0.0 {
                continue;
            }
            for k in 0..q {
                diff[k] = s[(i, k)] - s[(j, k)];
            }
            for a in 0..q {
                for b in 0..q {
                    acc[(a, b)] += w * diff[a] * diff[b];
                }
            }
        }
        acc
    });
    let scale = (n as f64) * (n as f64) / opts.pairs as f64;
    let m = parts.into_iter().fold(DMatrix::zeros(q, q), |a, b| a + b) * scale;
    Ok(IfCache {
        m: symmetrize(m),
        exact: false,
    })
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `f(alpha) / f(alpha_ols)`: zero for a fair model, one at the unconstrained fit.
pub fn d_if(alpha: &DVector<f64>, alpha_ols: &DVector<f64>, cache: &IfCache) -> Result<f64> {
    let f_ols = cache.f(alpha_ols);
    if !(f_ols > 0.0) {
        return Err(Error::IndividualFairnessUndefined);
    }
    Ok(cache.f(alpha) / f_ols)
}
