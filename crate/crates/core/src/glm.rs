//! Maximum-likelihood fitting of canonical-link GLMs.
//!
//! Log-likelihoods include every normalizing constant, so differences between
//! nested fits are exact likelihood ratios. The Gaussian dispersion is always
//! profiled at its ML value `RSS / n`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const REL_TOL: f64 = 1e-10;
/// Linear predictor magnitude beyond which a logistic fit is treated as separated.
const SEPARATION_ETA: f64 = 50.0;
const MAX_LOG_ETA: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Normal response, identity link.
    Gaussian,
    /// Bernoulli response, logit link.
    Binomial,
    /// Count response, log link.
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

    pub fn has_dispersion(self) -> bool {
        self == Family::Gaussian
    }

    fn mean(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => eta,
            Family::Binomial => logistic(eta),
            Family::Poisson => eta.exp(),
        }
    }

    /// IRLS weight, equal to the variance function for canonical links.
    fn weight(self, mu: f64) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            Family::Binomial => (mu * (1.0 - mu)).max(1e-300),
            Family::Poisson => mu.max(1e-300),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "binomial" | "bernoulli" => Ok(Family::Binomial),
            "poisson" => Ok(Family::Poisson),
            other => Err(format!("unknown family `{other}`")),
        }
    }
}

fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln(k!)` for a nonnegative integer-valued `k`.
pub(crate) fn ln_factorial(k: f64) -> f64 {
    if k < 2.0 {
        return 0.0;
    }
    if k < 32.0 {
        return (2..=k as u64).map(|i| (i as f64).ln()).sum();
    }
    let x = k + 1.0;
    let x2 = x * x;
    (x - 0.5) * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x
}

/// Exact log-likelihood of `y` under linear predictor `eta`.
///
/// `dispersion` is the Gaussian variance and is ignored for other families.
pub fn log_likelihood(
    family: Family,
    y: &DVector<f64>,
    eta: &DVector<f64>,
    dispersion: Option<f64>,
) -> Result<f64> {
    if eta.iter().any(|e| !e.is_finite()) {
        return Err(Error::Domain("non-finite linear predictor".into()));
    }
    match family {
        Family::Gaussian => {
            let s2 = dispersion
                .filter(|s| *s > 0.0 && s.is_finite())
                .ok_or_else(|| Error::Domain("gaussian dispersion must be positive".into()))?;
            let rss: f64 = y.iter().zip(eta.iter()).map(|(y, e)| (y - e).powi(2)).sum();
            let n = y.len() as f64;
            Ok(-0.5 * n * (2.0 * std::f64::consts::PI * s2).ln() - rss / (2.0 * s2))
        }
        Family::Binomial => Ok(y
            .iter()
            .zip(eta.iter())
            .map(|(y, e)| y * e - softplus(*e))
            .sum()),
        Family::Poisson => {
            let mut ll = 0.0;
            for (y, e) in y.iter().zip(eta.iter()) {
                if *e > MAX_LOG_ETA {
                    return Err(Error::Domain(format!("poisson mean exp({e}) overflows")));
                }
                ll += y * e - e.exp() - ln_factorial(*y);
            }
            Ok(ll)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub coefficients: DVector<f64>,
    /// Maximized log-likelihood (Gaussian variance at `RSS / n`).
    pub max_loglik: f64,
    /// Standard errors from the observed information at the optimum.
    pub se: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// ML Gaussian variance; `None` for families without dispersion.
    pub dispersion: Option<f64>,
}

struct Wls {
    beta: DVector<f64>,
    /// Inverse of the triangular QR factor, so `(X'WX)^-1 = R^-1 R^-T`.
    r_inv: DMatrix<f64>,
}

fn weighted_ls(x: &DMatrix<f64>, w: &DVector<f64>, z: &DVector<f64>) -> Result<Wls> {
    let k = x.ncols();
    let sw = w.map(f64::sqrt);
    let mut xw = x.clone();
    for mut col in xw.column_iter_mut() {
        col.component_mul_assign(&sw);
    }
    let norms: Vec<f64> = xw.column_iter().map(|c| c.norm()).collect();
    let mut zw = z.component_mul(&sw);
    let qr = xw.qr();
    let r = qr.r();
    for (j, &norm) in norms.iter().enumerate() {
        if norm == 0.0 || r[(j, j)].abs() <= 1e-10 * norm {
            return Err(Error::RankDeficient { column: j });
        }
    }
    qr.q_tr_mul(&mut zw);
    let qtz = zw.rows(0, k).into_owned();
    let beta = r
        .solve_upper_triangular(&qtz)
        .ok_or(Error::RankDeficient { column: 0 })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::RankDeficient { column: 0 })?;
    Ok(Wls { beta, r_inv })
}

fn se_from(r_inv: &DMatrix<f64>, scale: f64) -> DVector<f64> {
    DVector::from_iterator(
        r_inv.nrows(),
        r_inv.row_iter().map(|row| (scale * row.norm_squared()).sqrt()),
    )
}

/// Fits `family` to `y` on design `x` with an optional fixed offset.
pub fn fit_glm(
    family: Family,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    offset: Option<&DVector<f64>>,
) -> Result<FitResult> {
    let n = y.len();
    let k = x.ncols();
    let zeros;
    let offset = match offset {
        Some(o) => o,
        None => {
            zeros = DVector::zeros(n);
            &zeros
        }
    };

    if k == 0 {
        let dispersion = gaussian_dispersion(family, y, offset)?;
        return Ok(FitResult {
            coefficients: DVector::zeros(0),
            max_loglik: log_likelihood(family, y, offset, dispersion)?,
            se: DVector::zeros(0),
            converged: true,
            iterations: 0,
            dispersion,
        });
    }
    if n <= k {
        return Err(Error::TooFewRows {
            rows: n,
            columns: k,
        });
    }

    if family == Family::Gaussian {
        let wls = weighted_ls(x, &DVector::from_element(n, 1.0), &(y - offset))?;
        let eta = x * &wls.beta + offset;
        let dispersion = gaussian_dispersion(family, y, &eta)?;
        let s2 = dispersion.expect("gaussian");
        return Ok(FitResult {
            max_loglik: log_likelihood(family, y, &eta, dispersion)?,
            se: se_from(&wls.r_inv, s2),
            coefficients: wls.beta,
            converged: true,
            iterations: 1,
            dispersion,
        });
    }

    let mu0 = y.map(|v| match family {
        Family::Binomial => (v + 0.5) / 2.0,
        _ => v + 0.1,
    });
    let eta0 = mu0.map(|m| match family {
        Family::Binomial => (m / (1.0 - m)).ln(),
        _ => m.ln(),
    });
    let mut beta = irls_step(family, x, y, offset, &eta0)?.beta;
    let mut ll = log_likelihood(family, y, &(x * &beta + offset), None)?;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITER {
        iterations += 1;
        let eta = x * &beta + offset;
        let mut next = irls_step(family, x, y, offset, &eta)?.beta;
        let mut ll_next = loglik_or_neg_inf(family, y, &(x * &next + offset));
        let mut halvings = 0;
        while !(ll_next >= ll - 1e-12 * ll.abs()) && halvings < 30 {
            next = (&beta + &next) * 0.5;
            ll_next = loglik_or_neg_inf(family, y, &(x * &next + offset));
            halvings += 1;
        }
        if !ll_next.is_finite() {
            return Err(Error::NotConverged {
                iterations,
                reason: "log-likelihood is not finite".into(),
            });
        }
        let change = (ll_next - ll).abs();
        beta = next;
        ll = ll_next;

        let eta = x * &beta + offset;
        let max_eta = eta.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        if family == Family::Binomial && max_eta > SEPARATION_ETA {
            return Err(Error::NotConverged {
                iterations,
                reason: "fitted probabilities are numerically 0 or 1 (separation)".into(),
            });
        }
        if change <= REL_TOL * ll.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged {
            iterations,
            reason: "log-likelihood still changing".into(),
        });
    }

    let eta = x * &beta + offset;
    let w = eta.map(|e| family.weight(family.mean(e)));
    let wls = weighted_ls(x, &w, &DVector::zeros(n))?;
    Ok(FitResult {
        coefficients: beta,
        max_loglik: ll,
        se: se_from(&wls.r_inv, 1.0),
        converged,
        iterations,
        dispersion: None,
    })
}

fn loglik_or_neg_inf(family: Family, y: &DVector<f64>, eta: &DVector<f64>) -> f64 {
    log_likelihood(family, y, eta, None).unwrap_or(f64::NEG_INFINITY)
}

fn irls_step(
    family: Family,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    offset: &DVector<f64>,
    eta: &DVector<f64>,
) -> Result<Wls> {
    let mu = eta.map(|e| family.mean(e));
    let w = mu.map(|m| family.weight(m));
    let z = DVector::from_fn(y.len(), |i, _| {
        eta[i] - offset[i] + (y[i] - mu[i]) / w[i]
    });
    weighted_ls(x, &w, &z)
}

fn gaussian_dispersion(
    family: Family,
    y: &DVector<f64>,
    eta: &DVector<f64>,
) -> Result<Option<f64>> {
    if family != Family::Gaussian {
        return Ok(None);
    }
    let rss: f64 = y.iter().zip(eta.iter()).map(|(y, e)| (y - e).powi(2)).sum();
    let s2 = rss / y.len() as f64;
    if s2 <= 0.0 || !s2.is_finite() {
        return Err(Error::Domain("gaussian fit has zero residual variance".into()));
    }
    Ok(Some(s2))
}

/// Design matrix without column `j`.
pub fn drop_column(x: &DMatrix<f64>, j: usize) -> DMatrix<f64> {
    x.clone().remove_column(j)
}

/// Profile log-likelihood of coefficient `j` at `beta_j`: the maximized
/// log-likelihood with column `j` moved into the offset.
pub fn profile_loglik(
    family: Family,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    j: usize,
    beta_j: f64,
) -> Result<f64> {
    let offset = x.column(j) * beta_j;
    let rest = drop_column(x, j);
    Ok(fit_glm(family, y, &rest, Some(&offset))?.max_loglik)
}
