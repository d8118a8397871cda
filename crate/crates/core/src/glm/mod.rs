//! Fairness-bounded generalized linear models.
//!
//! The sensitive block carries a ridge penalty chosen so that it accounts for
//! at most a share `r` of the explained deviance,
//! `(D(alpha, beta) - D(0, beta)) / (D(alpha, beta) - D(0, 0))`.

mod family;
mod irls;

pub use family::{deviance, Deviance, Family, BINOMIAL_EPS, MAX_LOG_ETA, POISSON_EPS};
pub use irls::{irls_penalized, penalized_gradient, GlmFit, IrlsOptions};

use std::cell::RefCell;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{composite, d_if, laplacian_form, r2_eo, ComponentValues, Definition, FairnessSpec};
use crate::frrm::{doubling_bracket, fit_frrm_with, solve_lambda, FitOptions, FittedModel, WorkingDesign};
use crate::model_matrix::ModelMatrices;

/// How `D(0, beta)` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DevianceBaseline {
    /// Drop `S alpha` from the fitted linear predictor.
    #[default]
    PlugIn,
    /// Refit the model without the sensitive block.
    Refit,
}

/// Share of explained deviance due to the sensitive block; 0 when nothing is explained.
pub fn deviance_ratio(fit: &GlmFit) -> f64 {
    ratio_of(fit.deviance, fit.alpha_zero_deviance, fit.null_deviance)
}

fn ratio_of(full: f64, no_s: f64, null: f64) -> f64 {
    let den = full - null;
    if den.abs() <= 1e-14 * null.abs().max(1.0) {
        return 0.0;
    }
    (full - no_s) / den
}

/// Deviance ratio from three linear predictors (intercepts included).
pub fn ratio_from_predictors(
    family: Family,
    y: &DVector<f64>,
    full: &DVector<f64>,
    no_s: &DVector<f64>,
    null: &DVector<f64>,
) -> Result<f64> {
    let d = |eta: &DVector<f64>| -> Result<f64> {
        Ok(deviance(family, y, &eta.map(|e| family.linkinv(e)))?.value)
    };
    Ok(ratio_of(d(full)?, d(no_s)?, d(null)?))
}

pub fn fit_fgrrm(mm: &ModelMatrices, spec: &FairnessSpec, family: Family) -> Result<FittedModel> {
    fit_fgrrm_with(mm, spec, family, &FitOptions::default())
}

/// Gaussian requests are delegated to the closed-form linear solver.
pub fn fit_fgrrm_with(
    mm: &ModelMatrices,
    spec: &FairnessSpec,
    family: Family,
    opts: &FitOptions,
) -> Result<FittedModel> {
    spec.validate()?;
    if family == Family::Gaussian {
        return fit_frrm_with(mm, spec, opts);
    }
    family.validate_response(&mm.y_raw)?;
    let work = WorkingDesign::new(&mm.s, &mm.x, opts.pca_tol)?;
    let (s, u, y) = (&work.s, &work.design.uhat, &mm.y_raw);
    let run = |lambda: f64, warm: Option<&[f64]>| -> Result<GlmFit> {
        let fit = irls::irls_core(s, u, y, family, lambda, opts.lambda2, &opts.irls, warm)?;
        if !fit.converged {
            return Err(Error::Irls {
                lambda,
                reason: format!("no convergence after {} iterations", fit.iterations),
            });
        }
        Ok(fit)
    };

    let unpenalized = run(0.0, None)?;
    let refit_baseline = match opts.baseline {
        DevianceBaseline::PlugIn => None,
        DevianceBaseline::Refit => Some(run(f64::INFINITY, None)?.deviance),
    };
    let cache = if spec.definition.needs_if() {
        Some(laplacian_form(y, s, spec.distance, &opts.individual)?)
    } else {
        None
    };
    let eval = |fit: &GlmFit| -> Result<f64> {
        let sp = || {
            let no_s = refit_baseline.unwrap_or(fit.alpha_zero_deviance);
            ratio_of(fit.deviance, no_s, fit.null_deviance)
        };
        let eo = || r2_eo(&(s * &fit.alpha + u * &fit.beta), y, s);
        match spec.definition {
            Definition::Sp => Ok(sp()),
            Definition::Eo => eo(),
            Definition::If => d_if(&fit.alpha, &unpenalized.alpha, cache.as_ref().expect("built above")),
            Definition::Composite(c) => composite(
                c,
                ComponentValues {
                    sp: Some(sp()),
                    eo: Some(eo()?),
                },
            ),
        }
    };
    let assemble = |fit: &GlmFit, lambda: f64, achieved: f64| -> Result<FittedModel> {
        let mut model = FittedModel {
            family,
            spec: *spec,
            alpha: work.to_original(&fit.alpha),
            beta: fit.beta.clone(),
            alpha_ols: work.to_original(&unpenalized.alpha),
            intercept: fit.intercept,
            lambda_r: lambda,
            lambda2: opts.lambda2,
            achieved,
            bhat: work.bhat_original(),
            encoder: mm.encoder.clone(),
            pca_components: work.loadings.as_ref().map(|a| a.ncols()),
            fitted: DVector::zeros(0),
            residuals: DVector::zeros(0),
            r_squared: 0.0,
            deviance: 0.0,
            null_deviance: 0.0,
            iterations: fit.iterations,
            converged: fit.converged,
        };
        model.attach_training_diagnostics(mm)?;
        Ok(model)
    };

    let r = spec.r;
    let tol = opts.root_tol;
    let at_zero = eval(&unpenalized)?;
    if r >= 1.0 || at_zero <= r {
        return assemble(&unpenalized, 0.0, at_zero);
    }
    let without = run(f64::INFINITY, None)?;
    let floor = eval(&without)?;
    if r == 0.0 && floor <= tol {
        return assemble(&without, f64::INFINITY, floor);
    }

    // The root finder probes sequentially; each probe starts from the previous solution.
    let last: RefCell<Option<(f64, GlmFit)>> = RefCell::new(None);
    let warm: RefCell<Vec<f64>> = RefCell::new(unpenalized.theta());
    let mut probe = |lambda: f64| -> Result<f64> {
        let w = warm.borrow().clone();
        let fit = run(lambda, Some(&w))?;
        let v = eval(&fit)?;
        *warm.borrow_mut() = fit.theta();
        *last.borrow_mut() = Some((lambda, fit));
        Ok(v)
    };
    let (interval, probes) = match doubling_bracket(&mut probe, mm.n() as f64, r) {
        Ok(found) => found,
        Err(Error::NoSignChange { f_hi, .. }) => {
            if floor <= r + tol * r.max(1.0) {
                return assemble(&without, f64::INFINITY, floor);
            }
            return Err(Error::Infeasible { r, floor: floor.min(f_hi) });
        }
        Err(e) => return Err(e),
    };
    let mut prev = (0.0, at_zero);
    for &(lambda, v) in &probes {
        if v > prev.1 + 1e-9 {
            return Err(Error::NonMonotone { lo: prev.0, hi: lambda });
        }
        prev = (lambda, v);
    }
    let lambda = solve_lambda(&mut probe, interval, r, tol)?;
    let fit = match last.into_inner() {
        Some((l, fit)) if l == lambda => fit,
        _ => run(lambda, Some(&warm.into_inner()))?,
    };
    let achieved = eval(&fit)?;
    assemble(&fit, lambda, achieved)
}
