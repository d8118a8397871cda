use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{par_map, Execution};
use crate::fairness::{laplacian_form, FairnessSpec};
use crate::frrm::FitOptions;
use crate::glm::{fit_fgrrm_with, Family};
use crate::linalg::{covariance, quad_form};
use crate::model_matrix::{encode, RawDataset, Schema};

/// One fit of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub r: f64,
    /// `None` for an infinite penalty.
    pub lambda_r: Option<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub achieved: f64,
    pub sp: Option<f64>,
    pub eo: Option<f64>,
    #[serde(rename = "if")]
    pub if_: Option<f64>,
    /// `alpha' VAR(S) alpha`.
    pub alpha_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileSweep {
    pub family: Family,
    pub definition: &'static str,
    /// Ascending.
    pub r_grid: Vec<f64>,
    pub sensitive_names: Vec<String>,
    pub predictor_names: Vec<String>,
    /// One entry per grid value; failures carry the error message.
    pub points: Vec<std::result::Result<ProfilePoint, String>>,
}

impl ProfileSweep {
    pub fn ok_points(&self) -> impl Iterator<Item = &ProfilePoint> {
        self.points.iter().filter_map(|p| p.as_ref().ok())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["r", "lambda_r", "achieved", "sp", "eo", "if", "alpha_var", "intercept"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(self.sensitive_names.iter().map(|n| format!("alpha_{n}")));
        header.extend(self.predictor_names.iter().map(|n| format!("beta_{n}")));
        header.push("error".into());
        w.write_record(&header)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let width = header.len();
        for (r, point) in self.r_grid.iter().zip(&self.points) {
            let mut row = vec![r.to_string()];
            match point {
                Ok(p) => {
                    row.extend([
                        opt(p.lambda_r),
                        p.achieved.to_string(),
                        opt(p.sp),
                        opt(p.eo),
                        opt(p.if_),
                        p.alpha_var.to_string(),
                        p.intercept.to_string(),
                    ]);
                    row.extend(p.alpha.iter().chain(&p.beta).map(f64::to_string));
                    row.push(String::new());
                }
                Err(e) => {
                    row.resize(width - 1, String::new());
                    row.push(e.clone());
                }
            }
            w.write_record(&row)?;
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

/// One fit per bound on the full data, with all three fairness values at each fit.
pub fn profile_sweep(
    raw: &RawDataset,
    schema: &Schema,
    r_grid: &[f64],
    spec: &FairnessSpec,
    family: Family,
    opts: &FitOptions,
    execution: Execution,
) -> Result<ProfileSweep> {
    if r_grid.is_empty() {
        return Err(Error::invalid("r_grid", "is empty"));
    }
    let mut grid = r_grid.to_vec();
    if let Some(r) = grid.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::invalid("r_grid", format!("{r} is outside [0, 1]")));
    }
    grid.sort_by(f64::total_cmp);
    let mm = encode(raw, schema)?;
    let cache = laplacian_form(&mm.y_raw, &mm.s, spec.distance, &opts.individual).ok();
    let cov_s = covariance(&mm.s);
    let points = par_map(execution, &grid, |&r| {
        let model = fit_fgrrm_with(&mm, &spec.with_r(r), family, opts).map_err(|e| e.to_string())?;
        let values = model.fairness(&mm, cache.as_ref());
        Ok(ProfilePoint {
            r,
            lambda_r: model.lambda_r.is_finite().then_some(model.lambda_r),
            alpha: model.alpha.as_slice().to_vec(),
            beta: model.beta.as_slice().to_vec(),
            intercept: model.intercept,
            achieved: model.achieved,
            sp: values.sp,
            eo: values.eo,
            if_: values.if_,
            alpha_var: quad_form(&cov_s, &model.alpha),
        })
    });
    Ok(ProfileSweep {
        family,
        definition: spec.definition.label(),
        r_grid: grid,
        sensitive_names: mm.sensitive_names(),
        predictor_names: mm.predictor_names(),
        points,
    })
}
