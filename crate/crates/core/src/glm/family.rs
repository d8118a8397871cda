use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean clamp for the binomial family.
pub const BINOMIAL_EPS: f64 = 1e-10;
/// Lower mean clamp for the Poisson family.
pub const POISSON_EPS: f64 = 1e-10;
/// Log-link linear predictors above this overflow `exp`.
pub const MAX_LOG_ETA: f64 = 700.0;

/// Exponential family with its canonical link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Gaussian,
    Binomial,
    Poisson,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
            Family::Poisson => "poisson",
        }
    }

    pub fn linkinv(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => eta,
            Family::Binomial => {
                if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                }
            }
            Family::Poisson => eta.min(MAX_LOG_ETA).exp(),
        }
    }

    pub fn link(self, mu: f64) -> f64 {
        match self {
            Family::Gaussian => mu,
            Family::Binomial => {
                let m = mu.clamp(BINOMIAL_EPS, 1.0 - BINOMIAL_EPS);
                (m / (1.0 - m)).ln()
            }
            Family::Poisson => mu.max(POISSON_EPS).ln(),
        }
    }

    /// Variance function; for canonical links it also equals `d mu / d eta`.
    pub fn variance(self, mu: f64) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            Family::Binomial => mu * (1.0 - mu),
            Family::Poisson => mu,
        }
    }

    /// Clamps a mean into the open support; the flag reports whether it moved.
    pub fn clamp_mu(self, mu: f64) -> (f64, bool) {
        let c = match self {
            Family::Gaussian => mu,
            Family::Binomial => mu.clamp(BINOMIAL_EPS, 1.0 - BINOMIAL_EPS),
            Family::Poisson => mu.max(POISSON_EPS),
        };
        (c, c != mu)
    }

    pub fn unit_deviance(self, y: f64, mu: f64) -> f64 {
        // y ln(y / mu) with the convention 0 ln 0 = 0.
        let ylog = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
        match self {
            Family::Gaussian => (y - mu) * (y - mu),
            Family::Binomial => 2.0 * (ylog(y, mu) + ylog(1.0 - y, 1.0 - mu)),
            Family::Poisson => 2.0 * (ylog(y, mu) - (y - mu)),
        }
    }

    /// Checks that every response value is in the family's support.
    pub fn validate_response(self, y: &DVector<f64>) -> Result<()> {
        let ok = |v: f64| match self {
            Family::Gaussian => v.is_finite(),
            Family::Binomial => v == 0.0 || v == 1.0,
            Family::Poisson => v >= 0.0 && v.fract() == 0.0 && v.is_finite(),
        };
        if let Some(i) = y.iter().position(|&v| !ok(v)) {
            let need = match self {
                Family::Gaussian => "finite values",
                Family::Binomial => "values in {0, 1}",
                Family::Poisson => "non-negative integer counts",
            };
            return Err(Error::BadColumn {
                column: "response".into(),
                reason: format!("{} family needs {need}; row {i} has {}", self.name(), y[i]),
            });
        }
        if self != Family::Gaussian && crate::linalg::variance(y) <= 0.0 {
            return Err(Error::BadColumn {
                column: "response".into(),
                reason: "response is constant".into(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Family::Gaussian),
            "binomial" => Ok(Family::Binomial),
            "poisson" => Ok(Family::Poisson),
            other => Err(Error::invalid(
                "family",
                format!("`{other}` is not one of gaussian, binomial, poisson"),
            )),
        }
    }
}

/// Total deviance and whether any mean had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviance {
    pub value: f64,
    pub clamped: bool,
}

/// `-2 (loglik(mu) - loglik(saturated))`; the residual sum of squares for the Gaussian family.
pub fn deviance(family: Family, y: &DVector<f64>, mu: &DVector<f64>) -> Result<Deviance> {
    if y.len() != mu.len() {
        return Err(Error::invalid("mu", "length differs from y"));
    }
    let mut clamped = false;
    let mut value = 0.0;
    for (yi, mi) in y.iter().zip(mu.iter()) {
        let (m, c) = family.clamp_mu(*mi);
        clamped |= c;
        value += family.unit_deviance(*yi, m);
    }
    Ok(Deviance { value, clamped })
}
