use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::metrics::{f1, quantile, rmse};
use crate::exec::{par_map, Execution};
use crate::fairness::{max_abs_covariance, FairnessSpec};
use crate::frrm::FitOptions;
use crate::glm::{fit_fgrrm_with, Family};
use crate::model_matrix::{encode, RawDataset, Schema};

/// Bounds used by default in sweeps and cross-validation.
pub const DEFAULT_R_GRID: [f64; 7] = [0.0, 0.01, 0.02, 0.05, 0.10, 0.20, 0.50];

/// Offset applied to a run's seed when its first partition had to be redrawn.
const RESAMPLE_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    pub runs: usize,
    pub seed: u64,
    pub r_grid: Vec<f64>,
    pub family: Family,
    /// Definition and distance; `r` is taken from the grid.
    pub spec: FairnessSpec,
    pub fit: FitOptions,
    pub execution: Execution,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 10,
            runs: 50,
            seed: 1,
            r_grid: DEFAULT_R_GRID.to_vec(),
            family: Family::Gaussian,
            spec: FairnessSpec::statistical_parity(0.0),
            fit: FitOptions::default(),
            execution: Execution::Auto,
        }
    }
}

impl CvConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::invalid("folds", "need at least 2"));
        }
        if self.folds > n {
            return Err(Error::invalid("folds", format!("{} folds exceed {n} rows", self.folds)));
        }
        if self.runs < 1 {
            return Err(Error::invalid("runs", "need at least 1"));
        }
        if self.r_grid.is_empty() {
            return Err(Error::invalid("r_grid", "is empty"));
        }
        if let Some(r) = self.r_grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::invalid("r_grid", format!("{r} is outside [0, 1]")));
        }
        self.spec.validate()
    }

    /// RMSE for continuous and count responses, F1 for binary ones.
    pub fn metric_name(&self) -> &'static str {
        match self.family {
            Family::Binomial => "f1",
            _ => "rmse",
        }
    }
}

/// Validation row indices for each fold: a seeded shuffle cut into contiguous blocks.
pub fn fold_partition(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for k in 0..folds {
        let len = base + usize::from(k < extra);
        let mut fold = perm[start..start + len].to_vec();
        fold.sort_unstable();
        out.push(fold);
        start += len;
    }
    out
}

/// Rows not in `valid`, ascending.
pub fn training_rows(n: usize, valid: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in valid {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}

fn unseen_level(raw: &RawDataset, columns: &[String], folds: &[Vec<usize>]) -> Option<(String, String)> {
    for name in columns {
        let Some(col) = raw.column(name) else { continue };
        if !matches!(col, crate::model_matrix::Column::Categorical(_)) {
            continue;
        }
        for valid in folds {
            let train = training_rows(raw.n, valid);
            let seen = col.pick(&train).levels();
            if let Some(l) = col.pick(valid).levels().into_iter().find(|l| !seen.contains(l)) {
                return Some((name.clone(), l));
            }
        }
    }
    None
}

/// One `(run, fold, r)` evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvCell {
    pub run: usize,
    pub fold: usize,
    pub r: f64,
    /// `None` for an infinite penalty or a failed fit.
    pub lambda_r: Option<f64>,
    pub train_metric: Option<f64>,
    pub valid_metric: Option<f64>,
    pub train_fairness: Option<f64>,
    pub valid_fairness: Option<f64>,
    /// Largest `|COV(yhat, S_j)|` on each split.
    pub train_max_abs_cov: Option<f64>,
    pub valid_max_abs_cov: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub p05: f64,
    pub p95: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        Some(Summary {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            p05: quantile(values, 0.05)?,
            p95: quantile(values, 0.95)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvAggregate {
    pub r: f64,
    pub cells: usize,
    pub failures: usize,
    pub train_metric: Option<Summary>,
    pub valid_metric: Option<Summary>,
    pub train_fairness: Option<Summary>,
    pub valid_fairness: Option<Summary>,
    pub valid_max_abs_cov: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub metric: &'static str,
    pub family: Family,
    pub definition: &'static str,
    pub folds: usize,
    pub runs: usize,
    pub seed: u64,
    /// Row order: run, then fold, then position in the grid.
    pub cells: Vec<CvCell>,
    pub aggregates: Vec<CvAggregate>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl CvReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "run",
            "fold",
            "r",
            "lambda_r",
            &format!("train_{}", self.metric),
            &format!("valid_{}", self.metric),
            "train_fairness",
            "valid_fairness",
            "train_max_abs_cov",
            "valid_max_abs_cov",
            "error",
        ])?;
        for c in &self.cells {
            w.write_record([
                c.run.to_string(),
                c.fold.to_string(),
                c.r.to_string(),
                opt(c.lambda_r),
                opt(c.train_metric),
                opt(c.valid_metric),
                opt(c.train_fairness),
                opt(c.valid_fairness),
                opt(c.train_max_abs_cov),
                opt(c.valid_max_abs_cov),
                c.error.clone().unwrap_or_default(),
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

    /// Aggregates plus run metadata.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            metric: &'a str,
            family: Family,
            definition: &'a str,
            folds: usize,
            runs: usize,
            seed: u64,
            aggregates: &'a [CvAggregate],
        }
        Ok(serde_json::to_string_pretty(&Doc {
            metric: self.metric,
            family: self.family,
            definition: self.definition,
            folds: self.folds,
            runs: self.runs,
            seed: self.seed,
            aggregates: &self.aggregates,
        })?)
    }
}

struct CellResult {
    lambda_r: Option<f64>,
    metrics: (f64, f64),
    fairness: (f64, Option<f64>),
    cov: (f64, f64),
}

fn evaluate_cell(
    raw: &RawDataset,
    schema: &Schema,
    config: &CvConfig,
    valid: &[usize],
    r: f64,
) -> Result<CellResult> {
    let train = raw.subset(&training_rows(raw.n, valid));
    let holdout = raw.subset(valid);
    let mm = encode(&train, schema)?;
    let spec = config.spec.with_r(r);
    let model = fit_fgrrm_with(&mm, &spec, config.family, &config.fit)?;
    let vm = model.encoder.transform(&holdout)?;
    let pred = model.predict_matrices(&vm.x, &vm.s);
    let metric = |y: &DVector<f64>, p: &DVector<f64>| match config.family {
        Family::Binomial => f1(y, p, 0.5),
        _ => rmse(y, p),
    };
    Ok(CellResult {
        lambda_r: model.lambda_r.is_finite().then_some(model.lambda_r),
        metrics: (metric(&mm.y_raw, &model.fitted), metric(&vm.y_raw, &pred)),
        fairness: (
            model.achieved,
            model.fairness(&vm, None).for_definition(spec.definition),
        ),
        cov: (
            max_abs_covariance(&model.fitted, &mm.s),
            max_abs_covariance(&pred, &vm.s),
        ),
    })
}

/// Repeated k-fold cross-validation over the bound grid.
///
/// All bounds in a run share one partition. Encoding is learned on each
/// training split only. Failed fits are recorded in their cell.
pub fn kfold_cv(raw: &RawDataset, schema: &Schema, config: &CvConfig) -> Result<CvReport> {
    config.validate(raw.n)?;
    let resolved = schema.resolve(&raw.header)?;
    let columns: Vec<String> = resolved.referenced().cloned().collect();
    let mut partitions = Vec::with_capacity(config.runs);
    for run in 0..config.runs {
        let seed = config.seed.wrapping_add(run as u64);
        let mut folds = fold_partition(raw.n, config.folds, seed);
        if unseen_level(raw, &columns, &folds).is_some() {
            folds = fold_partition(raw.n, config.folds, seed ^ RESAMPLE_OFFSET);
            if let Some((column, level)) = unseen_level(raw, &columns, &folds) {
                return Err(Error::UnseenLevel { column, level });
            }
        }
        partitions.push(folds);
    }
    let mut jobs = Vec::new();
    for run in 0..config.runs {
        for fold in 0..config.folds {
            for &r in &config.r_grid {
                jobs.push((run, fold, r));
            }
        }
    }
    let cells = par_map(config.execution, &jobs, |&(run, fold, r)| {
        let mut cell = CvCell {
            run,
            fold,
            r,
            lambda_r: None,
            train_metric: None,
            valid_metric: None,
            train_fairness: None,
            valid_fairness: None,
            train_max_abs_cov: None,
            valid_max_abs_cov: None,
            error: None,
        };
        match evaluate_cell(raw, schema, config, &partitions[run][fold], r) {
            Ok(res) => {
                cell.lambda_r = res.lambda_r;
                cell.train_metric = Some(res.metrics.0);
                cell.valid_metric = Some(res.metrics.1);
                cell.train_fairness = Some(res.fairness.0);
                cell.valid_fairness = res.fairness.1;
                cell.train_max_abs_cov = Some(res.cov.0);
                cell.valid_max_abs_cov = Some(res.cov.1);
            }
            Err(e) => cell.error = Some(e.to_string()),
        }
        cell
    });
    let aggregates = config
        .r_grid
        .iter()
        .map(|&r| {
            let here: Vec<&CvCell> = cells.iter().filter(|c| c.r == r).collect();
            let pick = |f: fn(&CvCell) -> Option<f64>| -> Option<Summary> {
                Summary::of(&here.iter().filter_map(|c| f(c)).collect::<Vec<_>>())
            };
            CvAggregate {
                r,
                cells: here.len(),
                failures: here.iter().filter(|c| c.error.is_some()).count(),
                train_metric: pick(|c| c.train_metric),
                valid_metric: pick(|c| c.valid_metric),
                train_fairness: pick(|c| c.train_fairness),
                valid_fairness: pick(|c| c.valid_fairness),
                valid_max_abs_cov: pick(|c| c.valid_max_abs_cov),
            }
        })
        .collect();
    Ok(CvReport {
        metric: config.metric_name(),
        family: config.family,
        definition: config.spec.definition.label(),
        folds: config.folds,
        runs: config.runs,
        seed: config.seed,
        cells,
        aggregates,
    })
}
