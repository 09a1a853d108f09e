use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::weighted_fit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingModel {
    /// `y = c log(x) / x`.
    PowerLog,
    /// `y = a + b / x`.
    InverseL,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: ScalingModel,
    pub coef: Vec<f64>,
    pub coef_stderr: Vec<f64>,
    pub residual: f64,
    /// Indices whose studentized residual exceeds 3.
    pub outliers: Vec<usize>,
    /// `max / min` of `y / (log x / x)`; power-log only, infinite if some ratio is not positive.
    pub ratio_factor: Option<f64>,
    pub verdict: bool,
}

/// Weighted least squares of `y` against one of the two scaling forms.
///
/// The verdict requires no outliers and, for the power-log form, `ratio_factor <= factor`.
pub fn fit_scaling(x: &[f64], y: &[f64], sigma: Option<&[f64]>, model: ScalingModel, factor: f64) -> Result<ScalingFit> {
    if x.len() != y.len() || sigma.is_some_and(|s| s.len() != y.len()) {
        return Err(Error::IllConditionedFit("series lengths differ".into()));
    }
    if x.len() < 4 {
        return Err(Error::IllConditionedFit(format!("{} points, need at least 4", x.len())));
    }
    if x.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::IllConditionedFit("abscissae must be positive".into()));
    }
    let basis = match model {
        ScalingModel::PowerLog => vec![x.iter().map(|v| v.ln() / v).collect()],
        ScalingModel::InverseL => vec![vec![1.0; x.len()], x.iter().map(|v| 1.0 / v).collect()],
    };
    let fit = weighted_fit(&basis, y, sigma)?;
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // round-off residuals on exact data are not outliers
    let exact = sigma.is_none() && fit.residual <= 1e-12 * scale;
    let outliers: Vec<usize> = if exact { vec![] } else { fit.standardized.iter().enumerate().filter(|(_, r)| r.abs() > 3.0).map(|(i, _)| i).collect() };
    let ratio_factor = match model {
        ScalingModel::PowerLog => {
            let r: Vec<f64> = x.iter().zip(y).map(|(x, y)| y / (x.ln() / x)).collect();
            let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Some(if lo > 0.0 { hi / lo } else { f64::INFINITY })
        }
        ScalingModel::InverseL => None,
    };
    let verdict = outliers.is_empty() && ratio_factor.is_none_or(|f| f <= factor);
    Ok(ScalingFit { model, coef: fit.coef, coef_stderr: fit.coef_stderr, residual: fit.residual, outliers, ratio_factor, verdict })
}
