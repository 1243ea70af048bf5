//! Variance of the correlation-to-coefficient map under a scaled-Beta prior
//! on the correlation, via a truncated Taylor expansion.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::Family;
use crate::pcorr::{beta_series, QuarticProfile};
use crate::series::Series;

pub const MAX_ORDER: usize = 5;
pub const DEFAULT_EVAL_POINT: f64 = 0.001;

/// Named widths for the correlation-scale prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleLabel {
    Narrow,
    Medium,
    Wide,
    Superwide,
}

impl ScaleLabel {
    pub fn sigma_rho(self) -> f64 {
        match self {
            ScaleLabel::Narrow => 0.2,
            ScaleLabel::Medium => 0.4,
            ScaleLabel::Wide => (1.0f64 / 3.0).sqrt(),
            ScaleLabel::Superwide => 0.8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScaleLabel::Narrow => "narrow",
            ScaleLabel::Medium => "medium",
            ScaleLabel::Wide => "wide",
            ScaleLabel::Superwide => "superwide",
        }
    }
}

impl fmt::Display for ScaleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScaleLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "narrow" => Ok(ScaleLabel::Narrow),
            "medium" => Ok(ScaleLabel::Medium),
            "wide" => Ok(ScaleLabel::Wide),
            "superwide" => Ok(ScaleLabel::Superwide),
            other => Err(Error::InvalidScale(format!("unknown scale label `{other}`"))),
        }
    }
}

/// Standard deviation of the correlation-scale prior and the symmetric
/// Beta(p, p) shape on (-1, 1) that has exactly that standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoScale {
    pub sigma_rho: f64,
    pub shape_p: f64,
    pub label: Option<ScaleLabel>,
}

impl RhoScale {
    pub fn new(sigma_rho: f64) -> Result<Self> {
        if !(sigma_rho > 0.0 && sigma_rho < 1.0) {
            return Err(Error::InvalidScale(format!(
                "sigma_rho = {sigma_rho} must lie in (0, 1)"
            )));
        }
        Ok(Self {
            sigma_rho,
            shape_p: (1.0 / (sigma_rho * sigma_rho) - 1.0) / 2.0,
            label: None,
        })
    }

    pub fn from_label(label: ScaleLabel) -> Self {
        let mut s = Self::new(label.sigma_rho()).expect("labels are in range");
        s.label = Some(label);
        s
    }

    /// Central moments `mu_0 ..= mu_upto` of the scaled Beta.
    pub fn central_moments(&self, upto: usize) -> Vec<f64> {
        (0..=upto)
            .map(|m| beta_central_moment(self.shape_p, self.shape_p, m))
            .collect()
    }
}

impl Default for RhoScale {
    fn default() -> Self {
        Self::from_label(ScaleLabel::Wide)
    }
}

impl FromStr for RhoScale {
    type Err = Error;

    /// Accepts a label or a numeric `sigma_rho`.
    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<f64>() {
            Ok(v) => Self::new(v),
            Err(_) => Ok(Self::from_label(s.parse()?)),
        }
    }
}

/// Taylor expansion order and the point at which derivatives are taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorConfig {
    pub order: usize,
    pub eval_point: f64,
}

impl TaylorConfig {
    pub fn new(order: usize, eval_point: f64) -> Result<Self> {
        if !matches!(order, 1 | 3 | 5) {
            return Err(Error::InvalidTaylor(format!(
                "order {order} must be 1, 3 or 5"
            )));
        }
        if !(eval_point > 0.0 && eval_point < 0.01) {
            return Err(Error::InvalidTaylor(format!(
                "eval point {eval_point} must lie in (0, 0.01)"
            )));
        }
        Ok(Self { order, eval_point })
    }

    pub fn with_order(order: usize) -> Result<Self> {
        Self::new(order, DEFAULT_EVAL_POINT)
    }

    /// Fifth order for Normal responses, first order otherwise.
    pub fn for_family(family: Family) -> Self {
        let order = if family == Family::Gaussian { 5 } else { 1 };
        Self {
            order,
            eval_point: DEFAULT_EVAL_POINT,
        }
    }
}

/// Pochhammer-style accumulation of the terminating 2F1 series.
///
/// `m`-th central moment of Beta(p, q) rescaled to (-1, 1):
/// `2F1(p, -m; p + q; (p + q) / p) * (-2p / (p + q))^m`.
pub fn beta_central_moment(p: f64, q: f64, m: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if p == q && m % 2 == 1 {
        return 0.0;
    }
    let z = (p + q) / p;
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 0..m {
        let i = i as f64;
        term *= (p + i) * (i - m as f64) / ((p + q + i) * (i + 1.0)) * z;
        sum += term;
    }
    sum * (-2.0 * p / (p + q)).powi(m as i32)
}

/// Derivatives 1..=`order` of the coefficient-from-correlation map at `point`.
pub fn derivatives_of_g(q: &QuarticProfile, point: f64, order: usize) -> Result<Vec<f64>> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::InvalidTaylor(format!(
            "derivative order {order} must be in 1..={MAX_ORDER}"
        )));
    }
    let s: Series<{ MAX_ORDER + 1 }> = beta_series(point, q)?;
    let mut d = s.derivatives();
    d.truncate(order);
    Ok(d)
}

/// Variance of the `k`-th order Taylor polynomial of g about the prior mean 0:
/// `sum_{i,j<=k} g_i g_j (mu_{i+j} - mu_i mu_j) / (i! j!)`.
pub fn taylor_variance(derivs: &[f64], scale: &RhoScale, config: &TaylorConfig) -> Result<f64> {
    let k = config.order;
    if derivs.len() < k {
        return Err(Error::InvalidTaylor(format!(
            "{} derivatives supplied for order {k}",
            derivs.len()
        )));
    }
    let mu = scale.central_moments(2 * k);
    let mut fact = vec![1.0; k + 1];
    for i in 1..=k {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut var = 0.0;
    for i in 1..=k {
        for j in 1..=k {
            var += derivs[i - 1] * derivs[j - 1] * (mu[i + j] - mu[i] * mu[j])
                / (fact[i] * fact[j]);
        }
    }
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::NonPositiveVariance(var));
    }
    Ok(var)
}

/// Prior SD of a coefficient implied by a correlation-scale prior.
pub fn implied_sd(q: &QuarticProfile, scale: &RhoScale, config: &TaylorConfig) -> Result<f64> {
    let d = derivatives_of_g(q, config.eval_point, config.order)?;
    Ok(taylor_variance(&d, scale, config)?.sqrt())
}
