//! Fair ridge regression: unpenalized predictors, ridge-penalized sensitive block.
//!
//! `beta` comes from the decorrelated predictors alone and never changes with
//! `r`; only the penalty on `alpha` is searched for.

mod bracket;
mod closed_form;
mod model;
mod path;
mod root;

pub use bracket::{lambda_bracket, Bracket};
pub use closed_form::{closed_form_independent, orthonormalize};
pub use model::{parse_definition, predict, FairnessValues, FittedModel};
pub use path::{alpha_ridge, beta_closed_form, RidgePath};
pub use root::{doubling_bracket, solve_lambda, LAMBDA_CAP, MAX_ITERATIONS};

use nalgebra::{DMatrix, DVector};

use crate::decorrelate::{ols_decorrelate, pca_reduce, DecorrelatedDesign, PCA_TOL};
use crate::error::{Error, Result};
use crate::fairness::{
    composite, d_if, laplacian_form, r2_eo, sp_from_parts, ComponentValues, Definition, FairnessSpec,
    IfCache, IfOptions,
};
use crate::glm::{DevianceBaseline, Family, IrlsOptions};
use crate::linalg::{covariance, quad_form};
use crate::model_matrix::ModelMatrices;

/// Relative tolerance on the constraint value at the selected penalty.
pub const ROOT_TOL: f64 = 1e-10;

/// Knobs shared by the linear and GLM fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Ridge penalty on `beta`.
    pub lambda2: f64,
    pub root_tol: f64,
    /// Relative eigenvalue cutoff when `S` must be reduced to principal components.
    pub pca_tol: f64,
    pub individual: IfOptions,
    pub irls: IrlsOptions,
    pub baseline: DevianceBaseline,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            lambda2: 0.0,
            root_tol: ROOT_TOL,
            pca_tol: PCA_TOL,
            individual: IfOptions::default(),
            irls: IrlsOptions::default(),
            baseline: DevianceBaseline::PlugIn,
        }
    }
}

impl FitOptions {
    pub fn with_lambda2(lambda2: f64) -> Self {
        FitOptions {
            lambda2,
            ..FitOptions::default()
        }
    }
}

/// `S` (or its principal components) together with the decorrelated predictors.
#[derive(Debug, Clone)]
pub(crate) struct WorkingDesign {
    pub s: DMatrix<f64>,
    /// Present when `S` was replaced by `S A`.
    pub loadings: Option<DMatrix<f64>>,
    pub design: DecorrelatedDesign,
}

impl WorkingDesign {
    pub fn new(s: &DMatrix<f64>, x: &DMatrix<f64>, pca_tol: f64) -> Result<Self> {
        match ols_decorrelate(s, x) {
            Ok(design) => Ok(WorkingDesign {
                s: s.clone(),
                loadings: None,
                design,
            }),
            Err(Error::RankDeficient { .. }) => {
                let pca = pca_reduce(s, pca_tol)?;
                let design = ols_decorrelate(&pca.scores, x)?;
                Ok(WorkingDesign {
                    s: pca.scores,
                    loadings: Some(pca.loadings),
                    design,
                })
            }
            Err(e) => Err(e),
        }
    }

    /// Coefficients on the original sensitive columns.
    pub fn to_original(&self, alpha: &DVector<f64>) -> DVector<f64> {
        match &self.loadings {
            Some(a) => a * alpha,
            None => alpha.clone(),
        }
    }

    pub fn bhat_original(&self) -> DMatrix<f64> {
        match &self.loadings {
            Some(a) => a * &self.design.bhat,
            None => self.design.bhat.clone(),
        }
    }
}

/// Evaluates the chosen fairness functional for a candidate `alpha`.
pub(crate) struct LinearConstraint<'a> {
    definition: Definition,
    s: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    cov_s: DMatrix<f64>,
    /// `beta' VAR(U) beta`.
    b: f64,
    u_beta: DVector<f64>,
    alpha_ols: DVector<f64>,
    cache: Option<IfCache>,
}

impl<'a> LinearConstraint<'a> {
    pub fn value(&self, alpha: &DVector<f64>) -> Result<f64> {
        let sp = || sp_from_parts(quad_form(&self.cov_s, alpha), self.b);
        let eo = || r2_eo(&(self.s * alpha + &self.u_beta), self.y, self.s);
        match self.definition {
            Definition::Sp => sp(),
            Definition::Eo => eo(),
            Definition::If => d_if(
                alpha,
                &self.alpha_ols,
                self.cache.as_ref().expect("cache is built for IF constraints"),
            ),
            Definition::Composite(c) => composite(
                c,
                ComponentValues {
                    sp: Some(sp()?),
                    eo: Some(eo()?),
                },
            ),
        }
    }
}

/// Solution on an already decorrelated design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignFit {
    pub alpha: DVector<f64>,
    pub alpha_ols: DVector<f64>,
    pub beta: DVector<f64>,
    /// `f64::INFINITY` when `alpha` is forced to zero.
    pub lambda: f64,
    pub achieved: f64,
    /// Eigenvalue bracket, for active parity constraints.
    pub bracket: Option<Bracket>,
}

/// Fits the fair model on `(S, U)`; `U` is used as given, orthogonal to `S` or not.
pub fn fit_decorrelated(
    s: &DMatrix<f64>,
    u: &DMatrix<f64>,
    y: &DVector<f64>,
    spec: &FairnessSpec,
    opts: &FitOptions,
) -> Result<DesignFit> {
    spec.validate()?;
    if !(opts.lambda2 >= 0.0) {
        return Err(Error::invalid("lambda2", format!("{} is negative", opts.lambda2)));
    }
    let beta = beta_closed_form(u, y, opts.lambda2)?;
    let path = RidgePath::new(s, y, "S'S is singular");
    let alpha_ols = path.at(0.0)?;
    let cache = if spec.definition.needs_if() {
        Some(laplacian_form(y, s, spec.distance, &opts.individual)?)
    } else {
        None
    };
    let cons = LinearConstraint {
        definition: spec.definition,
        s,
        y,
        cov_s: covariance(s),
        b: quad_form(&covariance(u), &beta),
        u_beta: u * &beta,
        alpha_ols: alpha_ols.clone(),
        cache,
    };
    let r = spec.r;
    let tol = opts.root_tol;
    let done = |alpha: DVector<f64>, lambda: f64, achieved: f64, bracket| DesignFit {
        alpha,
        alpha_ols: alpha_ols.clone(),
        beta: beta.clone(),
        lambda,
        achieved,
        bracket,
    };

    let at_ols = cons.value(&alpha_ols)?;
    if r >= 1.0 || at_ols <= r {
        return Ok(done(alpha_ols.clone(), 0.0, at_ols, None));
    }
    let zero = DVector::zeros(s.ncols());
    let floor = cons.value(&zero)?;
    if r == 0.0 && floor <= tol {
        return Ok(done(zero, f64::INFINITY, floor, None));
    }

    let eval = |lambda: f64| cons.value(&path.at(lambda)?);
    let (bracket, interval) = match spec.definition {
        Definition::Sp => {
            let c = r / (1.0 - r) * cons.b;
            let b = lambda_bracket(s, y, c)?;
            (Some(b), (b.lo, b.hi))
        }
        // Only parity is monotone by construction; the other functionals are
        // searched along the path and may dip below the bound before alpha = 0.
        _ => match doubling_bracket(eval, s.nrows() as f64, r) {
            Ok((interval, _)) => (None, interval),
            Err(Error::NoSignChange { f_hi, .. }) => {
                if floor <= r + tol * r.max(1.0) {
                    return Ok(done(zero, f64::INFINITY, floor, None));
                }
                return Err(Error::Infeasible { r, floor: floor.min(f_hi) });
            }
            Err(e) => return Err(e),
        },
    };
    let lambda = match solve_lambda(eval, interval, r, tol) {
        Ok(l) => l,
        Err(Error::NoSignChange { .. }) if bracket.is_some() => {
            // Rounding pushed the root just outside the analytic interval.
            let wide = doubling_bracket(eval, s.nrows() as f64, r)?.0;
            solve_lambda(eval, wide, r, tol)?
        }
        Err(e) => return Err(e),
    };
    let alpha = path.at(lambda)?;
    let achieved = cons.value(&alpha)?;
    Ok(done(alpha, lambda, achieved, bracket))
}

/// Mean-centered linear fit with statistical-parity-style fairness bound.
pub fn fit_frrm(mm: &ModelMatrices, spec: &FairnessSpec, lambda2: f64) -> Result<FittedModel> {
    fit_frrm_with(mm, spec, &FitOptions::with_lambda2(lambda2))
}

pub fn fit_frrm_with(mm: &ModelMatrices, spec: &FairnessSpec, opts: &FitOptions) -> Result<FittedModel> {
    let work = WorkingDesign::new(&mm.s, &mm.x, opts.pca_tol)?;
    let fit = fit_decorrelated(&work.s, &work.design.uhat, &mm.y, spec, opts)?;
    let alpha = work.to_original(&fit.alpha);
    let alpha_ols = work.to_original(&fit.alpha_ols);
    let mut model = FittedModel {
        family: Family::Gaussian,
        spec: *spec,
        alpha,
        beta: fit.beta,
        alpha_ols,
        intercept: mm.encoder.response.center(),
        lambda_r: fit.lambda,
        lambda2: opts.lambda2,
        achieved: fit.achieved,
        bhat: work.bhat_original(),
        encoder: mm.encoder.clone(),
        pca_components: work.loadings.as_ref().map(|a| a.ncols()),
        fitted: DVector::zeros(0),
        residuals: DVector::zeros(0),
        r_squared: 0.0,
        deviance: 0.0,
        null_deviance: 0.0,
        iterations: 0,
        converged: true,
    };
    model.attach_training_diagnostics(mm)?;
    Ok(model)
}
