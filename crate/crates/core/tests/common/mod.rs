//! Reference computations written independently of the library internals.
#![allow(dead_code)]

use fairfit::{encode, example_schema, synth_example, ModelMatrices, RawDataset};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn example(id: u32, n: usize, seed: u64) -> (RawDataset, ModelMatrices) {
    let raw = synth_example(id, n, seed).unwrap();
    let mm = encode(&raw, &example_schema()).unwrap();
    (raw, mm)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population covariance (denominator n).
pub fn cov(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64
}

pub fn var(a: &[f64]) -> f64 {
    cov(a, a)
}

pub fn corr(a: &[f64], b: &[f64]) -> f64 {
    cov(a, b) / (var(a) * var(b)).sqrt()
}

pub fn col(m: &DMatrix<f64>, j: usize) -> Vec<f64> {
    m.column(j).iter().copied().collect()
}

/// `X - S (S'S)^{-1} S'X` through a Cholesky solve of the normal equations.
pub fn residualize(s: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let gram = s.transpose() * s;
    let b = gram.cholesky().expect("S has full column rank").solve(&(s.transpose() * x));
    x - s * b
}

/// Share of the explained variance carried by `S alpha`.
pub fn parity_share(alpha: &DVector<f64>, beta: &DVector<f64>, s: &DMatrix<f64>, u: &DMatrix<f64>) -> f64 {
    let a = var((s * alpha).as_slice());
    let b = var((u * beta).as_slice());
    a / (a + b)
}

/// `(S'S + lambda I)^{-1} S'y`.
pub fn ridge(s: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let q = s.ncols();
    let gram = s.transpose() * s + DMatrix::identity(q, q) * lambda;
    gram.cholesky().unwrap().solve(&(s.transpose() * y))
}

pub fn logistic(e: f64) -> f64 {
    1.0 / (1.0 + (-e).exp())
}

/// Binomial deviance written directly from the log-likelihood.
pub fn binomial_deviance(y: &DVector<f64>, eta: &DVector<f64>) -> f64 {
    -2.0 * y
        .iter()
        .zip(eta.iter())
        .map(|(&yi, &e)| {
            let p = logistic(e);
            yi * p.ln() + (1.0 - yi) * (1.0 - p).ln()
        })
        .sum::<f64>()
}

pub fn poisson_deviance(y: &DVector<f64>, mu: &DVector<f64>) -> f64 {
    2.0 * y
        .iter()
        .zip(mu.iter())
        .map(|(&yi, &m)| {
            let t = if yi > 0.0 { yi * (yi / m).ln() } else { 0.0 };
            t - (yi - m)
        })
        .sum::<f64>()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn center(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut c in out.column_iter_mut() {
        let mu = c.mean();
        c.add_scalar_mut(-mu);
    }
    out
}

/// Random centered `(S, X, y)` with `X` correlated with `S`.
pub fn random_design(seed: u64, n: usize, q: usize, p: usize) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = gaussian_matrix(&mut rng, n, q);
    let mix = gaussian_matrix(&mut rng, q, p) * 0.5;
    let x = gaussian_matrix(&mut rng, n, p) + &s * mix;
    let coef_s = gaussian_matrix(&mut rng, q, 1);
    let coef_x = gaussian_matrix(&mut rng, p, 1);
    let noise = gaussian_matrix(&mut rng, n, 1);
    let y = &s * coef_s + &x * coef_x + noise;
    let y = center(&y).column(0).into_owned();
    (center(&s), center(&x), y)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
