use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959964;

/// Coefficient magnitude beyond which the fit is treated as separated.
pub const SEPARATION_BOUND: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Some coefficient diverged past [`SEPARATION_BOUND`].
    pub separation: bool,
}

impl LogisticFit {
    pub fn z(&self, k: usize) -> f64 {
        self.coefficients[k] / self.std_errors[k]
    }

    /// Two-sided Wald p-value for coefficient `k`.
    pub fn p_value(&self, k: usize) -> f64 {
        wald_p(self.coefficients[k], self.std_errors[k])
    }
}

pub fn wald_p(coef: f64, se: f64) -> f64 {
    let z = coef / se;
    if z.is_nan() {
        return 1.0;
    }
    let n = Normal::standard();
    (2.0 * n.sf(z.abs())).min(1.0)
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Gradient of the log-likelihood at `beta`.
pub fn score(y: &[f64], x: &DMatrix<f64>, beta: &[f64]) -> Vec<f64> {
    let b = DVector::from_column_slice(beta);
    let eta = x * &b;
    let resid = DVector::from_iterator(
        y.len(),
        y.iter().zip(eta.iter()).map(|(&yi, &e)| yi - sigmoid(e)),
    );
    (x.transpose() * resid).iter().copied().collect()
}

/// Fisher information `X' W X` at `beta`.
pub fn information(x: &DMatrix<f64>, beta: &[f64]) -> DMatrix<f64> {
    let b = DVector::from_column_slice(beta);
    let eta = x * &b;
    let mut xw = x.clone();
    for (i, e) in eta.iter().enumerate() {
        let p = sigmoid(*e);
        let w = p * (1.0 - p);
        for v in xw.row_mut(i).iter_mut() {
            *v *= w;
        }
    }
    x.transpose() * xw
}

/// Maximum-likelihood logistic regression by iteratively reweighted least
/// squares. `x` must include the intercept column.
pub fn logistic_fit(y: &[f64], x: &DMatrix<f64>, opts: &LogisticOptions) -> Result<LogisticFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::invalid(format!(
            "{} outcomes for {} design rows",
            y.len(),
            n
        )));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("outcome must be 0 or 1"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("design matrix must be finite"));
    }
    let cases = y.iter().filter(|&&v| v == 1.0).count();
    if cases == 0 || cases == n {
        return Err(Error::SingleClass);
    }
    if n < k {
        return Err(Error::SingularDesign);
    }
    // rank check on the unweighted design
    if (x.transpose() * x).cholesky().is_none() {
        return Err(Error::SingularDesign);
    }

    let mut beta = vec![0.0; k];
    let mut converged = false;
    let mut separation = false;
    let mut iterations = 0;
    for it in 1..=opts.max_iterations {
        iterations = it;
        let info = information(x, &beta);
        let g = DVector::from_vec(score(y, x, &beta));
        let Some(chol) = info.cholesky() else {
            separation = true;
            break;
        };
        let step = chol.solve(&g);
        for (b, s) in beta.iter_mut().zip(step.iter()) {
            *b += s;
        }
        if beta
            .iter()
            .any(|b| !b.is_finite() || b.abs() > SEPARATION_BOUND)
        {
            separation = true;
            break;
        }
        if step.amax() < opts.tolerance {
            converged = true;
            break;
        }
    }

    let std_errors = match information(x, &beta).cholesky() {
        Some(chol) => chol.inverse().diagonal().iter().map(|v| v.sqrt()).collect(),
        None => vec![f64::INFINITY; k],
    };
    Ok(LogisticFit {
        coefficients: beta,
        std_errors,
        iterations,
        converged: converged && !separation,
        separation,
    })
}

/// Odds ratio with its 95% Wald interval.
pub fn odds_ratio(coef: f64, se: f64) -> (f64, f64, f64) {
    (
        coef.exp(),
        (coef - Z_95 * se).exp(),
        (coef + Z_95 * se).exp(),
    )
}
