//! Fairness functionals used to select the ridge penalty.
//!
//! All of them live in `[0, 1]`: `0` means the sensitive attributes play no
//! role in the predictions, `1` is the unconstrained fit.

mod individual;

pub use individual::{d_if, laplacian_form, IfCache, IfOptions};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{covariance, covariance_of, lstsq_full_rank, quad_form, variance};

/// Outcome distance `d(y_i, y_j)` in the individual-fairness penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    Absolute,
    Squared,
}

impl Distance {
    pub fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            Distance::Absolute => (a - b).abs(),
            Distance::Squared => (a - b) * (a - b),
        }
    }
}

/// How statistical parity and equality of opportunity are merged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    Max,
    /// `w * SP + (1 - w) * EO`.
    Convex { w: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Definition {
    /// Statistical parity: share of explained variance due to `S`.
    Sp,
    /// Equality of opportunity: share of `S` in the regression of the fit on `(y, S)`.
    Eo,
    /// Normalized individual-fairness penalty.
    If,
    Composite(Combine),
}

impl Definition {
    pub fn needs_eo(self) -> bool {
        matches!(self, Definition::Eo | Definition::Composite(_))
    }

    pub fn needs_if(self) -> bool {
        matches!(self, Definition::If)
    }

    pub fn label(self) -> &'static str {
        match self {
            Definition::Sp => "sp",
            Definition::Eo => "eo",
            Definition::If => "if",
            Definition::Composite(Combine::Max) => "max",
            Definition::Composite(Combine::Convex { .. }) => "convex",
        }
    }
}

/// Fairness definition plus the bound `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessSpec {
    pub definition: Definition,
    pub r: f64,
    #[serde(default)]
    pub distance: Distance,
}

impl FairnessSpec {
    pub fn new(definition: Definition, r: f64) -> Result<Self> {
        let spec = FairnessSpec {
            definition,
            r,
            distance: Distance::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn statistical_parity(r: f64) -> Self {
        FairnessSpec {
            definition: Definition::Sp,
            r,
            distance: Distance::default(),
        }
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.r) {
            return Err(Error::invalid("r", format!("{} is outside [0, 1]", self.r)));
        }
        if let Definition::Composite(Combine::Convex { w }) = self.definition {
            if !(w > 0.0 && w < 1.0) {
                return Err(Error::invalid("w", format!("{w} is outside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Coefficients of the auxiliary regression `yhat = y psi + S phi + e`.
#[derive(Debug, Clone, PartialEq)]
pub struct EoFit {
    pub psi: f64,
    pub phi: DVector<f64>,
}

/// Share of explained variance attributable to the sensitive attributes.
pub fn r2_sp(
    alpha: &DVector<f64>,
    beta: &DVector<f64>,
    s: &DMatrix<f64>,
    u: &DMatrix<f64>,
) -> Result<f64> {
    sp_from_parts(quad_form(&covariance(s), alpha), quad_form(&covariance(u), beta))
}

/// `a / (a + b)` with `a = alpha' VAR(S) alpha` and `b = beta' VAR(U) beta`.
pub(crate) fn sp_from_parts(a: f64, b: f64) -> Result<f64> {
    let den = a + b;
    if den <= 0.0 {
        return Err(Error::ZeroDenominator("r2_sp"));
    }
    Ok(a / den)
}

pub fn eo_fit(yhat: &DVector<f64>, y: &DVector<f64>, s: &DMatrix<f64>) -> Result<EoFit> {
    if variance(y) <= 0.0 {
        return Err(Error::DegenerateRegression("the response has zero variance"));
    }
    let n = y.len();
    let q = s.ncols();
    // Centering makes the no-intercept fit well defined on rows that were
    // centered with someone else's means (validation folds).
    let mut z = DMatrix::zeros(n, q + 1);
    let ym = crate::linalg::mean(y);
    for i in 0..n {
        z[(i, 0)] = y[i] - ym;
    }
    let sm = crate::linalg::column_means(s);
    for j in 0..q {
        for i in 0..n {
            z[(i, j + 1)] = s[(i, j)] - sm[j];
        }
    }
    let hm = crate::linalg::mean(yhat);
    let target = DMatrix::from_fn(n, 1, |i, _| yhat[i] - hm);
    let coef = lstsq_full_rank(&z, &target, "auxiliary regression on (y, S)")
        .map_err(|_| Error::DegenerateRegression("(y, S) are collinear"))?;
    Ok(EoFit {
        psi: coef[(0, 0)],
        phi: DVector::from_iterator(q, (0..q).map(|j| coef[(j + 1, 0)])),
    })
}

/// `VAR(S phi) / VAR(y psi + S phi)` from the auxiliary regression of `yhat` on `(y, S)`.
pub fn r2_eo(yhat: &DVector<f64>, y: &DVector<f64>, s: &DMatrix<f64>) -> Result<f64> {
    let fit = eo_fit(yhat, y, s)?;
    let s_phi = s * &fit.phi;
    let y_psi = y * fit.psi;
    let num = variance(&s_phi);
    let den = num + variance(&y_psi) + 2.0 * covariance_of(&s_phi, &y_psi);
    if den <= 0.0 {
        return Err(Error::ZeroDenominator("r2_eo"));
    }
    Ok(num / den)
}

/// Per-definition values feeding a composite constraint.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ComponentValues {
    pub sp: Option<f64>,
    pub eo: Option<f64>,
}

pub fn composite(combine: Combine, values: ComponentValues) -> Result<f64> {
    let sp = values
        .sp
        .ok_or_else(|| Error::invalid("composite", "missing statistical-parity value"))?;
    let eo = values
        .eo
        .ok_or_else(|| Error::invalid("composite", "missing equality-of-opportunity value"))?;
    Ok(match combine {
        Combine::Max => sp.max(eo),
        Combine::Convex { w } => w * sp + (1.0 - w) * eo,
    })
}

/// Largest `|COV(yhat, S_j)|` over the sensitive columns.
pub fn max_abs_covariance(yhat: &DVector<f64>, s: &DMatrix<f64>) -> f64 {
    s.column_iter()
        .map(|c| covariance_of(yhat, &c.into_owned()).abs())
        .fold(0.0, f64::max)
}

/// Largest `|COR(yhat, S_j)|`; zero when `yhat` is constant.
pub fn max_abs_correlation(yhat: &DVector<f64>, s: &DMatrix<f64>) -> f64 {
    let vy = variance(yhat);
    if vy <= 0.0 {
        return 0.0;
    }
    s.column_iter()
        .map(|c| {
            let c = c.into_owned();
            covariance_of(yhat, &c).abs() / (vy * variance(&c)).sqrt()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, k, |_, _| rng.random::<f64>() - 0.5)
    }

    fn centered(m: DMatrix<f64>) -> DMatrix<f64> {
        let means = crate::linalg::column_means(&m);
        let mut m = m;
        for (j, mut c) in m.column_iter_mut().enumerate() {
            c.add_scalar_mut(-means[j]);
        }
        m
    }

    #[test]
    fn sp_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = centered(random(30, 2, &mut rng));
        let u = centered(random(30, 3, &mut rng));
        let a = DVector::from_vec(vec![1.0, -2.0]);
        let b = DVector::from_vec(vec![0.5, 0.1, 3.0]);
        assert_eq!(r2_sp(&DVector::zeros(2), &b, &s, &u).unwrap(), 0.0);
        assert_eq!(r2_sp(&a, &DVector::zeros(3), &s, &u).unwrap(), 1.0);
        assert!(matches!(
            r2_sp(&DVector::zeros(2), &DVector::zeros(3), &s, &u),
            Err(Error::ZeroDenominator(_))
        ));
    }

    #[test]
    fn sp_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = centered(random(40, 2, &mut rng));
        let u = centered(random(40, 2, &mut rng));
        let a = DVector::from_vec(vec![0.3, 0.7]);
        let b = DVector::from_vec(vec![1.1, -0.4]);
        let base = r2_sp(&a, &b, &s, &u).unwrap();
        let k = 17.5;
        assert!((r2_sp(&(&a * k), &(&b * k), &s, &u).unwrap() - base).abs() < 1e-14);
    }

    #[test]
    fn eo_is_zero_when_fit_and_response_are_orthogonal_to_s() {
        // Columns of a Hadamard-like design: y, yhat and S mutually orthogonal.
        let s = DMatrix::from_column_slice(4, 1, &[1.0, 1.0, -1.0, -1.0]);
        let y = DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0]);
        let yhat = DVector::from_vec(vec![1.0, -1.0, -1.0, 1.0]) + &y * 0.5;
        assert!(r2_eo(&yhat, &y, &s).unwrap().abs() < 1e-15);
    }

    #[test]
    fn eo_is_one_when_fit_is_pure_s_and_y_orthogonal_to_s() {
        let s = DMatrix::from_column_slice(4, 1, &[1.0, 1.0, -1.0, -1.0]);
        let y = DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0]);
        let yhat = &s * DVector::from_vec(vec![2.5]);
        assert!((r2_eo(&yhat, &y, &s).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eo_degenerate_inputs() {
        let s = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, -1.0]);
        let flat = DVector::from_vec(vec![2.0, 2.0, 2.0]);
        assert!(r2_eo(&flat, &flat, &s).is_err());
        let y = DVector::from_vec(vec![1.0, 0.0, -1.0]);
        assert!(matches!(
            r2_eo(&y, &y, &s),
            Err(Error::DegenerateRegression(_))
        ));
    }

    #[test]
    fn composite_rules() {
        let v = ComponentValues {
            sp: Some(0.3),
            eo: Some(0.1),
        };
        assert_eq!(composite(Combine::Max, v).unwrap(), 0.3);
        let v = ComponentValues {
            sp: Some(0.2),
            eo: Some(0.4),
        };
        assert!((composite(Combine::Convex { w: 0.5 }, v).unwrap() - 0.3).abs() < 1e-15);
        let w = 1.0 - 1e-12;
        assert!((composite(Combine::Convex { w }, v).unwrap() - 0.2).abs() < 1e-11);
        assert!(composite(Combine::Max, ComponentValues { sp: Some(0.1), eo: None }).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(FairnessSpec::new(Definition::Sp, 1.5).is_err());
        assert!(FairnessSpec::new(Definition::Composite(Combine::Convex { w: 1.0 }), 0.1).is_err());
        assert!(FairnessSpec::new(Definition::Composite(Combine::Convex { w: 0.3 }), 0.1).is_ok());
    }
}
