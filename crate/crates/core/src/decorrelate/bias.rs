//! How much ridge-based decorrelation distorts the parity share.
//!
//! With ridge residuals `U(lambda)` the cross term `COV(S alpha, U beta)` no
//! longer vanishes, so the share computed without it drifts from the share
//! computed with it. This module traces that drift over a penalty grid.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::decorrelate::ridge_fit_from_svd;
use crate::error::{Error, Result};
use crate::evaluation::{fold_partition, training_rows};
use crate::exec::{par_map, Execution};
use crate::fairness::FairnessSpec;
use crate::frrm::{fit_decorrelated, FitOptions};
use crate::linalg::{covariance_of, select_entries, select_rows, variance, ThinSvd};
use crate::model_matrix::ModelMatrices;

/// Sign of the cross-covariance term in the explained variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CrossTerm {
    /// `VAR(S a) + VAR(U b) - 2 COV(S a, U b)`.
    #[default]
    Subtract,
    /// `VAR(S a + U b)`, the exact variance of the fitted values.
    Add,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasOptions {
    pub folds: usize,
    pub seed: u64,
    pub cross_term: CrossTerm,
    /// Penalties searched by the per-column cross-validation; defaults to the
    /// positive values of the curve's grid.
    pub cv_grid: Option<Vec<f64>>,
    pub execution: Execution,
}

impl Default for BiasOptions {
    fn default() -> Self {
        BiasOptions {
            folds: 10,
            seed: 1,
            cross_term: CrossTerm::Subtract,
            cv_grid: None,
            execution: Execution::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasCell {
    pub lambda: f64,
    pub r: f64,
    /// Share without the cross term divided by the share with it.
    pub ratio: f64,
    pub r2_plain: f64,
    pub r2_cross: f64,
    pub in_cv_band: bool,
}

impl BiasCell {
    pub fn relative_difference(&self) -> f64 {
        (1.0 - self.ratio).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasCurve {
    pub lambda_grid: Vec<f64>,
    pub r_list: Vec<f64>,
    /// Ordered by penalty, then bound.
    pub cells: Vec<BiasCell>,
    /// Smallest and largest one-standard-error penalty over the predictor columns.
    pub cv_lambda_range: (f64, f64),
    pub column_lambdas: Vec<f64>,
}

impl BiasCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "r", "ratio", "in_cv_band"])?;
        for c in &self.cells {
            w.write_record([
                c.lambda.to_string(),
                c.r.to_string(),
                c.ratio.to_string(),
                c.in_cv_band.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// One-standard-error choice of the ridge penalty for regressing `x` on `s`.
pub fn one_se_lambda(s: &DMatrix<f64>, x: &DVector<f64>, grid: &[f64], folds: &[Vec<usize>]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::invalid("cv_grid", "is empty"));
    }
    let n = s.nrows();
    let mut errors = vec![Vec::with_capacity(folds.len()); grid.len()];
    for valid in folds {
        let train = training_rows(n, valid);
        let (st, xt) = (select_rows(s, &train), select_entries(x, &train));
        let (sv, xv) = (select_rows(s, valid), select_entries(x, valid));
        let svd = ThinSvd::new(&st);
        let utx = svd.u.transpose() * &xt;
        for (k, &lambda) in grid.iter().enumerate() {
            let coef = svd.ridge_from_projection(&utx, lambda);
            let resid = &xv - &sv * coef;
            errors[k].push(resid.norm_squared() / valid.len().max(1) as f64);
        }
    }
    let k = folds.len() as f64;
    let stats: Vec<(f64, f64)> = errors
        .iter()
        .map(|e| {
            let m = e.iter().sum::<f64>() / k;
            let sd = (e.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (k - 1.0).max(1.0)).sqrt();
            (m, sd / k.sqrt())
        })
        .collect();
    let best = (0..grid.len())
        .min_by(|&a, &b| stats[a].0.total_cmp(&stats[b].0))
        .expect("grid is non-empty");
    let limit = stats[best].0 + stats[best].1;
    Ok((0..grid.len())
        .filter(|&j| stats[j].0 <= limit)
        .map(|j| grid[j])
        .fold(grid[best], f64::max))
}

/// Parity shares with and without the cross term over a penalty grid.
///
/// A zero penalty uses the OLS residuals, for which the two shares agree.
pub fn bias_ratio_curve(
    mm: &ModelMatrices,
    r_list: &[f64],
    lambda_grid: &[f64],
    opts: &BiasOptions,
) -> Result<BiasCurve> {
    if let Some(r) = r_list.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(Error::invalid("r_list", format!("{r} is outside (0, 1)")));
    }
    if let Some(l) = lambda_grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::invalid("lambda_grid", format!("{l} is not a non-negative finite number")));
    }
    if opts.folds < 2 || opts.folds > mm.n() {
        return Err(Error::invalid("folds", format!("{} is not between 2 and n", opts.folds)));
    }
    let svd = ThinSvd::new(&mm.s);
    let fit_opts = FitOptions::default();
    let rows = par_map(opts.execution, lambda_grid, |&lambda| -> Result<Vec<BiasCell>> {
        let u = &mm.x - ridge_fit_from_svd(&svd, &mm.x, lambda);
        r_list
            .iter()
            .map(|&r| {
                let fit = fit_decorrelated(&mm.s, &u, &mm.y, &FairnessSpec::statistical_parity(r), &fit_opts)?;
                let sa = &mm.s * &fit.alpha;
                let ub = &u * &fit.beta;
                let (a, b) = (variance(&sa), variance(&ub));
                let cov = covariance_of(&sa, &ub);
                let plain = a / (a + b);
                let explained = match opts.cross_term {
                    CrossTerm::Subtract => a + b - 2.0 * cov,
                    CrossTerm::Add => a + b + 2.0 * cov,
                };
                let cross = a / explained;
                Ok(BiasCell {
                    lambda,
                    r,
                    ratio: plain / cross,
                    r2_plain: plain,
                    r2_cross: cross,
                    in_cv_band: false,
                })
            })
            .collect()
    });
    let mut cells = Vec::with_capacity(lambda_grid.len() * r_list.len());
    for row in rows {
        cells.extend(row?);
    }

    let cv_grid: Vec<f64> = match &opts.cv_grid {
        Some(g) => g.clone(),
        None => lambda_grid.iter().copied().filter(|l| *l > 0.0).collect(),
    };
    let folds = fold_partition(mm.n(), opts.folds, opts.seed);
    let columns: Vec<usize> = (0..mm.x.ncols()).collect();
    let column_lambdas = par_map(opts.execution, &columns, |&j| {
        one_se_lambda(&mm.s, &mm.x.column(j).into_owned(), &cv_grid, &folds)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let lo = column_lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = column_lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for c in &mut cells {
        c.in_cv_band = c.lambda >= lo && c.lambda <= hi;
    }
    Ok(BiasCurve {
        lambda_grid: lambda_grid.to_vec(),
        r_list: r_list.to_vec(),
        cells,
        cv_lambda_range: (lo, hi),
        column_lambdas,
    })
}
