use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::family::{deviance, Family, MAX_LOG_ETA};
use crate::linalg::{mean, ThinSvd};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrlsOptions {
    pub max_iter: usize,
    /// Relative change in the penalized objective that counts as converged.
    pub tol: f64,
    pub max_halvings: usize,
    /// Binomial fits with `max |eta|` above this are flagged as separated.
    pub separation_eta: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        IrlsOptions {
            max_iter: 100,
            tol: 1e-8,
            max_halvings: 30,
            separation_eta: 30.0,
        }
    }
}

/// Penalized GLM fit on `(1, S, U)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub intercept: f64,
    /// `D(alpha, beta)`.
    pub deviance: f64,
    /// `D(0, 0)`: intercept-only deviance.
    pub null_deviance: f64,
    /// `D(0, beta)` with the fitted intercept and `beta`.
    pub alpha_zero_deviance: f64,
    pub iterations: usize,
    pub converged: bool,
    pub separated: bool,
    pub clamped: bool,
}

impl GlmFit {
    pub(crate) fn theta(&self) -> Vec<f64> {
        let mut t = vec![self.intercept];
        t.extend(self.alpha.iter());
        t.extend(self.beta.iter());
        t
    }
}

/// Ridge-penalized IRLS minimizing `D + lambda ||alpha||^2`.
///
/// `lambda = inf` fixes `alpha = 0`. `y` is on its original scale.
pub fn irls_penalized(
    s: &DMatrix<f64>,
    u: &DMatrix<f64>,
    y: &DVector<f64>,
    family: Family,
    lambda: f64,
    opts: &IrlsOptions,
) -> Result<GlmFit> {
    irls_core(s, u, y, family, lambda, 0.0, opts, None)
}

struct Problem<'a> {
    z: DMatrix<f64>,
    y: &'a DVector<f64>,
    family: Family,
    /// Penalty weight per coefficient.
    pen: Vec<f64>,
}

impl Problem<'_> {
    fn objective(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>, bool)> {
        let eta = &self.z * theta;
        let mu = eta.map(|e| self.family.linkinv(e));
        let d = deviance(self.family, self.y, &mu)?;
        let pen: f64 = self.pen.iter().zip(theta.iter()).map(|(p, t)| p * t * t).sum();
        Ok((d.value + pen, eta, d.clamped))
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn irls_core(
    s: &DMatrix<f64>,
    u: &DMatrix<f64>,
    y: &DVector<f64>,
    family: Family,
    lambda: f64,
    lambda2: f64,
    opts: &IrlsOptions,
    warm: Option<&[f64]>,
) -> Result<GlmFit> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::invalid("lambda", format!("{lambda} is not a non-negative number")));
    }
    let n = y.len();
    if s.nrows() != n || u.nrows() != n {
        return Err(Error::invalid("y", "row counts of S, U and y differ"));
    }
    let (q, p) = (s.ncols(), u.ncols());
    let with_alpha = lambda.is_finite();
    let qa = if with_alpha { q } else { 0 };
    let k = 1 + qa + p;
    let mut z = DMatrix::zeros(n, k);
    z.column_mut(0).fill(1.0);
    if with_alpha {
        z.view_mut((0, 1), (n, q)).copy_from(s);
    }
    z.view_mut((0, 1 + qa), (n, p)).copy_from(u);
    let mut pen = vec![0.0; k];
    for j in 0..qa {
        pen[1 + j] = lambda;
    }
    for j in 0..p {
        pen[1 + qa + j] = lambda2;
    }
    let prob = Problem {
        z,
        y,
        family,
        pen,
    };
    let pen_rows: Vec<usize> = (0..k).filter(|&j| prob.pen[j] > 0.0).collect();

    let mut theta: Option<DVector<f64>> = warm.and_then(|w| {
        // Warm starts from a fit with a different alpha block are remapped.
        if w.len() == 1 + q + p {
            let mut t = Vec::with_capacity(k);
            t.push(w[0]);
            if with_alpha {
                t.extend_from_slice(&w[1..1 + q]);
            }
            t.extend_from_slice(&w[1 + q..]);
            Some(DVector::from_vec(t))
        } else {
            None
        }
    });
    let mut eta = match &theta {
        Some(t) => &prob.z * t,
        None => y.map(|v| {
            let mu0 = match family {
                Family::Gaussian => v,
                Family::Binomial => (v + 0.5) / 2.0,
                Family::Poisson => v + 0.1,
            };
            family.link(mu0)
        }),
    };
    let mut obj = match &theta {
        Some(t) => prob.objective(t)?.0,
        None => f64::INFINITY,
    };
    let mut converged = false;
    let mut quiet = 0;
    let mut iterations = 0;
    let mut clamped = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let rows = n + pen_rows.len();
        let mut a = DMatrix::zeros(rows, k);
        let mut b = DMatrix::zeros(rows, 1);
        for i in 0..n {
            if family == Family::Poisson && eta[i] > MAX_LOG_ETA {
                return Err(Error::Irls {
                    lambda,
                    reason: "linear predictor overflow".into(),
                });
            }
            let (mu, _) = family.clamp_mu(family.linkinv(eta[i]));
            let w = family.variance(mu).max(1e-300);
            let zi = eta[i] + (y[i] - mu) / w;
            let sw = w.sqrt();
            for j in 0..k {
                a[(i, j)] = sw * prob.z[(i, j)];
            }
            b[(i, 0)] = sw * zi;
        }
        for (r, &j) in pen_rows.iter().enumerate() {
            a[(n + r, j)] = prob.pen[j].sqrt();
        }
        let svd = ThinSvd::new(&a);
        let cand = svd.solve(&b).column(0).into_owned();
        if cand.iter().any(|v| !v.is_finite()) {
            return Err(Error::Irls {
                lambda,
                reason: "non-finite coefficients".into(),
            });
        }
        let (mut new_obj, mut new_eta, mut new_clamped) = prob.objective(&cand)?;
        let mut step = cand;
        if let Some(old) = &theta {
            let mut halvings = 0;
            while !(new_obj <= obj * (1.0 + 1e-14) + 1e-300) {
                if halvings == opts.max_halvings {
                    break;
                }
                step = (old + &step) * 0.5;
                let o = prob.objective(&step)?;
                new_obj = o.0;
                new_eta = o.1;
                new_clamped = o.2;
                halvings += 1;
            }
            if !(new_obj <= obj * (1.0 + 1e-14) + 1e-300) {
                // No descent along the Newton direction: stop at the previous iterate.
                break;
            }
        }
        let rel = (obj - new_obj).abs() / (new_obj.abs() + 0.1);
        theta = Some(step);
        obj = new_obj;
        eta = new_eta;
        clamped = new_clamped;
        if rel < opts.tol {
            // One extra Newton step polishes the gradient well below the tolerance.
            quiet += 1;
            if quiet >= 2 {
                converged = true;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    let theta = theta.ok_or_else(|| Error::Irls {
        lambda,
        reason: "no iteration completed".into(),
    })?;
    let intercept = theta[0];
    let alpha = if with_alpha {
        theta.rows(1, q).into_owned()
    } else {
        DVector::zeros(q)
    };
    let beta = theta.rows(1 + qa, p).into_owned();
    let mu = eta.map(|e| family.linkinv(e));
    let dev = deviance(family, y, &mu)?;
    let no_s = (u * &beta).add_scalar(intercept).map(|e| family.linkinv(e));
    let null = DVector::from_element(n, mean(y));
    let separated = family == Family::Binomial && eta.amax() > opts.separation_eta;
    Ok(GlmFit {
        alpha,
        beta,
        intercept,
        deviance: dev.value,
        null_deviance: deviance(family, y, &null)?.value,
        alpha_zero_deviance: deviance(family, y, &no_s)?.value,
        iterations,
        converged,
        separated,
        clamped: clamped || dev.clamped,
    })
}

/// Gradient of `D + lambda ||alpha||^2` with respect to `(intercept, alpha, beta)`.
pub fn penalized_gradient(
    s: &DMatrix<f64>,
    u: &DMatrix<f64>,
    y: &DVector<f64>,
    family: Family,
    lambda: f64,
    fit: &GlmFit,
) -> DVector<f64> {
    let eta = (s * &fit.alpha + u * &fit.beta).add_scalar(fit.intercept);
    let resid = y - eta.map(|e| family.linkinv(e));
    let (q, p) = (s.ncols(), u.ncols());
    let mut g = DVector::zeros(1 + q + p);
    g[0] = -2.0 * resid.sum();
    let gs = s.transpose() * &resid * -2.0 + &fit.alpha * (2.0 * lambda);
    let gu = u.transpose() * &resid * -2.0;
    g.rows_mut(1, q).copy_from(&gs);
    g.rows_mut(1 + q, p).copy_from(&gu);
    g
}
