//! Synthetic generators for the two worked examples.
//!
//! Both draw `(x1, x2, x3, s1, s2, s3)` from a zero-mean multivariate normal
//! with unit variances and all pairwise correlations equal to 0.3.
//! Example 1 adds a linear response with N(0, 100) noise; example 2 draws a
//! binary response from a logistic model.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model_matrix::raw::{Column, RawDataset};
use crate::model_matrix::schema::Schema;

pub const EXAMPLE_CORRELATION: f64 = 0.3;
/// Coefficients of x1..x3 then s1..s3 in the linear example.
pub const LINEAR_COEFFICIENTS: [f64; 6] = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
pub const LINEAR_NOISE_SD: f64 = 10.0;
pub const LOGISTIC_INTERCEPT: f64 = 1.0;
/// Coefficients of x1..x3 then s1..s3 in the logistic example.
pub const LOGISTIC_COEFFICIENTS: [f64; 6] = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

const NAMES: [&str; 7] = ["y", "x1", "x2", "x3", "s1", "s2", "s3"];

/// Schema matching the generated columns.
pub fn example_schema() -> Schema {
    Schema::new("y", &["s1", "s2", "s3"], Some(&["x1", "x2", "x3"]))
}

fn design_factor() -> DMatrix<f64> {
    let cov = DMatrix::from_fn(6, 6, |i, j| if i == j { 1.0 } else { EXAMPLE_CORRELATION });
    cov.cholesky()
        .expect("equicorrelation matrix with rho = 0.3 is positive definite")
        .l()
}

pub fn synth_example(id: u32, n: usize, seed: u64) -> Result<RawDataset> {
    if !(1..=2).contains(&id) {
        return Err(Error::UnknownExample(id));
    }
    if n < 10 {
        return Err(Error::invalid("n", format!("need at least 10 rows, got {n}")));
    }
    let l = design_factor();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); 7];
    for _ in 0..n {
        let z = DVector::from_iterator(6, (0..6).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let v = &l * z;
        let y = match id {
            1 => {
                let eps: f64 = rng.sample(StandardNormal);
                linear_part(&v, &LINEAR_COEFFICIENTS) + LINEAR_NOISE_SD * eps
            }
            _ => {
                let eta = LOGISTIC_INTERCEPT + linear_part(&v, &LOGISTIC_COEFFICIENTS);
                let p = 1.0 / (1.0 + (-eta).exp());
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
        };
        cols[0].push(y);
        for k in 0..6 {
            cols[k + 1].push(v[k]);
        }
    }
    RawDataset::from_columns(
        NAMES.iter().map(|s| s.to_string()).collect(),
        cols.into_iter().map(Column::Numeric).collect(),
    )
}

fn linear_part(v: &DVector<f64>, coef: &[f64; 6]) -> f64 {
    v.iter().zip(coef).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_gives_identical_bytes() {
        let a = synth_example(1, 50, 7).unwrap();
        let b = synth_example(1, 50, 7).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ba).unwrap();
        b.write_csv(&mut bb).unwrap();
        assert_eq!(ba, bb);
        assert_ne!(a, synth_example(1, 50, 8).unwrap());
    }

    #[test]
    fn bad_arguments_are_rejected() {
        assert!(matches!(synth_example(3, 100, 1), Err(Error::UnknownExample(3))));
        assert!(synth_example(1, 9, 1).is_err());
    }

    #[test]
    fn logistic_example_is_binary() {
        let raw = synth_example(2, 200, 3).unwrap();
        let Column::Numeric(y) = raw.column("y").unwrap() else {
            panic!()
        };
        assert!(y.iter().all(|v| *v == 0.0 || *v == 1.0));
        let ones = y.iter().filter(|v| **v == 1.0).count();
        assert!(ones > 100 && ones < 190, "{ones}");
    }
}
