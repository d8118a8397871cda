use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{
    composite, d_if, laplacian_form, r2_eo, r2_sp, ComponentValues, Definition, Distance, FairnessSpec,
    IfCache, IfOptions,
};
use crate::glm::{deviance, Family};
use crate::model_matrix::{Encoder, ModelMatrices, RawDataset};

/// A fitted fair model plus everything needed to score new rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub family: Family,
    pub spec: FairnessSpec,
    /// Coefficients on the encoded sensitive columns.
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    /// `alpha` of the unconstrained fit (normalizes the individual-fairness ratio).
    pub alpha_ols: DVector<f64>,
    /// Response mean for linear models; fitted intercept for GLMs.
    pub intercept: f64,
    /// Penalty on `alpha`; infinite when `alpha` is forced to zero.
    pub lambda_r: f64,
    pub lambda2: f64,
    /// Value of the constraint functional at the fit.
    pub achieved: f64,
    /// `q x p` coefficients of the predictors on the sensitive columns.
    pub bhat: DMatrix<f64>,
    pub encoder: Encoder,
    /// Number of principal components used when `S` was rank deficient.
    pub pca_components: Option<usize>,
    /// In-sample predictions on the response scale.
    pub fitted: DVector<f64>,
    pub residuals: DVector<f64>,
    /// `1 - deviance / null_deviance`.
    pub r_squared: f64,
    pub deviance: f64,
    pub null_deviance: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Fairness functionals of a fitted model on some data set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FairnessValues {
    /// Explained-variance share for linear models, deviance share for GLMs.
    pub sp: Option<f64>,
    pub eo: Option<f64>,
    #[serde(rename = "if")]
    pub if_: Option<f64>,
}

impl FairnessValues {
    pub fn for_definition(&self, definition: Definition) -> Option<f64> {
        match definition {
            Definition::Sp => self.sp,
            Definition::Eo => self.eo,
            Definition::If => self.if_,
            Definition::Composite(c) => composite(c, ComponentValues { sp: self.sp, eo: self.eo }).ok(),
        }
    }
}

impl FittedModel {
    pub fn definition(&self) -> Definition {
        self.spec.definition
    }

    pub fn r(&self) -> f64 {
        self.spec.r
    }

    /// `S alpha + (X - S B) beta`, without the intercept.
    pub fn linear_predictor(&self, x: &DMatrix<f64>, s: &DMatrix<f64>) -> DVector<f64> {
        let u = x - s * &self.bhat;
        s * &self.alpha + u * &self.beta
    }

    pub fn response(&self, eta: &DVector<f64>) -> DVector<f64> {
        eta.map(|e| self.family.linkinv(self.intercept + e))
    }

    pub fn predict_matrices(&self, x: &DMatrix<f64>, s: &DMatrix<f64>) -> DVector<f64> {
        self.response(&self.linear_predictor(x, s))
    }

    pub(crate) fn attach_training_diagnostics(&mut self, mm: &ModelMatrices) -> Result<()> {
        let mu = self.predict_matrices(&mm.x, &mm.s);
        self.residuals = &mm.y_raw - &mu;
        self.deviance = deviance(self.family, &mm.y_raw, &mu)?.value;
        let null_mu = DVector::from_element(mm.n(), mm.encoder.response.center());
        self.null_deviance = deviance(self.family, &mm.y_raw, &null_mu)?.value;
        self.r_squared = if self.null_deviance > 0.0 {
            1.0 - self.deviance / self.null_deviance
        } else {
            0.0
        };
        self.fitted = mu;
        Ok(())
    }

    /// Parity, opportunity and individual-fairness values on `mm`.
    ///
    /// Components that are undefined on this data (for example a degenerate
    /// auxiliary regression on a tiny fold) are `None`.
    pub fn fairness(&self, mm: &ModelMatrices, cache: Option<&IfCache>) -> FairnessValues {
        let u = &mm.x - &mm.s * &self.bhat;
        let eta = &mm.s * &self.alpha + &u * &self.beta;
        let sp = match self.family {
            Family::Gaussian => r2_sp(&self.alpha, &self.beta, &mm.s, &u).ok(),
            family => {
                let full = eta.add_scalar(self.intercept);
                let no_s = (&u * &self.beta).add_scalar(self.intercept);
                let null = DVector::from_element(mm.n(), family.link(mm.encoder.response.center()));
                crate::glm::ratio_from_predictors(family, &mm.y_raw, &full, &no_s, &null).ok()
            }
        };
        let eo = r2_eo(&eta, &mm.y_raw, &mm.s).ok();
        let owned;
        let cache = match cache {
            Some(c) => Some(c),
            None => {
                owned = laplacian_form(&mm.y_raw, &mm.s, self.spec.distance, &IfOptions::default()).ok();
                owned.as_ref()
            }
        };
        let if_ = cache.and_then(|c| d_if(&self.alpha, &self.alpha_ols, c).ok());
        FairnessValues { sp, eo, if_ }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<ModelDocument>(text)?.into_model()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Applies the stored encoding and returns predictions on the response scale.
pub fn predict(model: &FittedModel, raw: &RawDataset) -> Result<DVector<f64>> {
    let (x, s) = model.encoder.transform_features(raw)?;
    Ok(model.predict_matrices(&x, &s))
}

#[derive(Serialize, Deserialize)]
struct Centers {
    response: f64,
    predictors: Vec<f64>,
    sensitive: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Scales {
    predictors: Vec<f64>,
    sensitive: Vec<f64>,
}

/// On-disk layout; matrices are flattened row-major.
#[derive(Serialize, Deserialize)]
struct ModelDocument {
    family: Family,
    definition: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    w: Option<f64>,
    distance: Distance,
    r: f64,
    sensitive: Vec<String>,
    predictors: Vec<String>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    alpha_ols: Vec<f64>,
    intercept: f64,
    /// `null` stands for an infinite penalty.
    lambda_r: Option<f64>,
    lambda2: f64,
    achieved: f64,
    centers: Centers,
    scales: Scales,
    bhat: Vec<f64>,
    bhat_shape: [usize; 2],
    pca_components: Option<usize>,
    r_squared: f64,
    deviance: f64,
    null_deviance: f64,
    iterations: usize,
    converged: bool,
    fitted: Vec<f64>,
    residuals: Vec<f64>,
    encoder: Encoder,
}

impl From<&FittedModel> for ModelDocument {
    fn from(m: &FittedModel) -> Self {
        let w = match m.spec.definition {
            Definition::Composite(crate::fairness::Combine::Convex { w }) => Some(w),
            _ => None,
        };
        let (q, p) = m.bhat.shape();
        ModelDocument {
            family: m.family,
            definition: m.spec.definition.label().to_string(),
            w,
            distance: m.spec.distance,
            r: m.spec.r,
            sensitive: m.encoder.sensitive.names(),
            predictors: m.encoder.predictors.names(),
            alpha: m.alpha.as_slice().to_vec(),
            beta: m.beta.as_slice().to_vec(),
            alpha_ols: m.alpha_ols.as_slice().to_vec(),
            intercept: m.intercept,
            lambda_r: m.lambda_r.is_finite().then_some(m.lambda_r),
            lambda2: m.lambda2,
            achieved: m.achieved,
            centers: Centers {
                response: m.encoder.response.center(),
                predictors: m.encoder.predictors.centers(),
                sensitive: m.encoder.sensitive.centers(),
            },
            scales: Scales {
                predictors: m.encoder.predictors.scales(),
                sensitive: m.encoder.sensitive.scales(),
            },
            bhat: (0..q).flat_map(|i| (0..p).map(move |j| (i, j))).map(|ij| m.bhat[ij]).collect(),
            bhat_shape: [q, p],
            pca_components: m.pca_components,
            r_squared: m.r_squared,
            deviance: m.deviance,
            null_deviance: m.null_deviance,
            iterations: m.iterations,
            converged: m.converged,
            fitted: m.fitted.as_slice().to_vec(),
            residuals: m.residuals.as_slice().to_vec(),
            encoder: m.encoder.clone(),
        }
    }
}

impl ModelDocument {
    fn into_model(self) -> Result<FittedModel> {
        let definition = parse_definition(&self.definition, self.w)?;
        let [q, p] = self.bhat_shape;
        let bad = |what: &str| Error::Schema(format!("model document: {what}"));
        if self.bhat.len() != q * p || self.alpha.len() != q || self.alpha_ols.len() != q || self.beta.len() != p {
            return Err(bad("coefficient lengths disagree with bhat_shape"));
        }
        if self.encoder.sensitive.width() != q || self.encoder.predictors.width() != p {
            return Err(bad("encoder widths disagree with bhat_shape"));
        }
        let spec = FairnessSpec {
            definition,
            r: self.r,
            distance: self.distance,
        };
        spec.validate()?;
        Ok(FittedModel {
            family: self.family,
            spec,
            alpha: DVector::from_vec(self.alpha),
            beta: DVector::from_vec(self.beta),
            alpha_ols: DVector::from_vec(self.alpha_ols),
            intercept: self.intercept,
            lambda_r: self.lambda_r.unwrap_or(f64::INFINITY),
            lambda2: self.lambda2,
            achieved: self.achieved,
            bhat: DMatrix::from_row_slice(q, p, &self.bhat),
            encoder: self.encoder,
            pca_components: self.pca_components,
            fitted: DVector::from_vec(self.fitted),
            residuals: DVector::from_vec(self.residuals),
            r_squared: self.r_squared,
            deviance: self.deviance,
            null_deviance: self.null_deviance,
            iterations: self.iterations,
            converged: self.converged,
        })
    }
}

/// Parses `sp`, `eo`, `if`, `max` or `convex` (which needs `w`).
pub fn parse_definition(label: &str, w: Option<f64>) -> Result<Definition> {
    use crate::fairness::Combine;
    let def = match label {
        "sp" => Definition::Sp,
        "eo" => Definition::Eo,
        "if" => Definition::If,
        "max" => Definition::Composite(Combine::Max),
        "convex" => Definition::Composite(Combine::Convex {
            w: w.ok_or_else(|| Error::invalid("w", "required by the convex definition"))?,
        }),
        other => {
            return Err(Error::invalid(
                "definition",
                format!("`{other}` is not one of sp, eo, if, max, convex"),
            ))
        }
    };
    if w.is_some() && !matches!(def, Definition::Composite(Combine::Convex { .. })) {
        return Err(Error::invalid("w", "only the convex definition takes a weight"));
    }
    Ok(def)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frrm::fit_frrm;
    use crate::model_matrix::{encode, example_schema, synth_example};

    #[test]
    fn json_round_trip_is_exact() {
        let raw = synth_example(1, 200, 9).unwrap();
        let mm = encode(&raw, &example_schema()).unwrap();
        for r in [0.0, 0.05, 1.0] {
            let m = fit_frrm(&mm, &FairnessSpec::statistical_parity(r), 0.5).unwrap();
            let back = FittedModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn predict_reproduces_fitted_values() {
        let raw = synth_example(1, 150, 10).unwrap();
        let mm = encode(&raw, &example_schema()).unwrap();
        let m = fit_frrm(&mm, &FairnessSpec::statistical_parity(0.02), 0.0).unwrap();
        assert_eq!(predict(&m, &raw).unwrap(), m.fitted);
        let sp = m.fairness(&mm, None).sp.unwrap();
        assert!((sp - m.achieved).abs() < 1e-12);
    }

    #[test]
    fn definition_labels() {
        assert!(parse_definition("convex", None).is_err());
        assert!(parse_definition("max", Some(0.2)).is_err());
        assert!(parse_definition("nope", None).is_err());
        assert_eq!(parse_definition("if", None).unwrap(), Definition::If);
    }
}
