//! Generalized partial correlation and its inversion to the coefficient scale.
//!
//! The profile log-likelihood of slope `j` is approximated by a quartic that
//! is symmetric about the ML estimate,
//!
//! ```text
//! L(beta) ~ a (beta - hat)^4 + b (beta - hat)^2 + L(hat)
//! ```
//!
//! fitted by least squares to four profile evaluations between 0 and `hat`.
//! Holding `(a, b)` fixed, the log-likelihood ratio `-a hat^4 - b hat^2` maps
//! to a correlation through the Cox-Snell R², and [`beta_from_rho`] inverts
//! that map on the root branch closest to zero.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{profile_loglik, Family, FitResult};
use crate::series::Series;

/// Fractions of `hat` at which the profile is evaluated.
pub const PROFILE_FRACTIONS: [f64; 4] = [0.0, 0.25, 0.5, 0.75];

/// `|hat| / se` below which a slope is treated as zero and the profile is
/// probed at `hat + {-2, -1, 1, 2} * se` instead.
pub const DEGENERATE_RATIO: f64 = 1e-3;

/// Fitted quartic shape of one coefficient's profile log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarticProfile {
    pub a: f64,
    /// Quadratic coefficient, always negative.
    pub b: f64,
    pub beta_hat: f64,
    pub loglik_max: f64,
    pub n: usize,
    /// Largest absolute least-squares residual over the evaluation points.
    pub fit_residual: f64,
}

impl QuarticProfile {
    /// Builds a profile directly from its coefficients.
    pub fn new(a: f64, b: f64, beta_hat: f64, loglik_max: f64, n: usize) -> Result<Self> {
        if !(b < 0.0) || !a.is_finite() {
            return Err(Error::NotConcave { b });
        }
        Ok(Self {
            a,
            b,
            beta_hat,
            loglik_max,
            n,
            fit_residual: 0.0,
        })
    }

    /// Quartic prediction of the profile at `beta`.
    pub fn predict(&self, beta: f64) -> f64 {
        let d2 = (beta - self.beta_hat).powi(2);
        self.a * d2 * d2 + self.b * d2 + self.loglik_max
    }

    /// Largest `|rho|` for which [`beta_from_rho`] has a real solution.
    pub fn rho_max(&self) -> f64 {
        if self.a > 0.0 {
            let t = self.b * self.b / (2.0 * self.a * self.n as f64);
            (-(-t).exp_m1()).sqrt()
        } else {
            1.0
        }
    }
}

/// Signed square root of the Cox-Snell R² for a log-likelihood ratio
/// `loglambda = L(full) - L(without j)`.
pub fn generalized_partial_corr(loglambda: f64, n: usize, sign_beta: f64) -> Result<f64> {
    if loglambda < -1e-8 || loglambda.is_nan() {
        return Err(Error::NegativeLogLambda(loglambda));
    }
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    if sign_beta == 0.0 || loglambda <= 0.0 {
        return Ok(0.0);
    }
    let r2 = -(-2.0 * loglambda / n as f64).exp_m1();
    Ok(sign_beta.signum() * r2.sqrt())
}

/// Slope prior SD for a Normal response with a prior of SD `sigma_rho` on the
/// classical partial correlation.
pub fn classical_slope_sd(
    sigma_rho: f64,
    r2_xj_on_rest: f64,
    r2_y_on_rest: f64,
    var_xj: f64,
    var_y: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&r2_xj_on_rest) {
        return Err(Error::Collinear(r2_xj_on_rest));
    }
    if !(0.0..1.0).contains(&r2_y_on_rest) {
        return Err(Error::Collinear(r2_y_on_rest));
    }
    if !(var_xj > 0.0 && var_y > 0.0) {
        return Err(Error::Domain("variances must be positive".into()));
    }
    Ok(sigma_rho * ((1.0 - r2_y_on_rest) * var_y / ((1.0 - r2_xj_on_rest) * var_xj)).sqrt())
}

/// Least-squares fit of `L(beta) - L(hat)` on `{(beta - hat)^4, (beta - hat)^2}`.
pub fn fit_quartic(
    points: &[f64; 4],
    logliks: &[f64; 4],
    beta_hat: f64,
    loglik_max: f64,
    n: usize,
) -> Result<QuarticProfile> {
    for i in 0..4 {
        for j in 0..i {
            if points[i] == points[j] {
                return Err(Error::DegenerateBasis);
            }
        }
    }
    let h = points
        .iter()
        .map(|p| (p - beta_hat).abs())
        .fold(0.0, f64::max);
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::DegenerateBasis);
    }
    let basis = DMatrix::from_fn(4, 2, |i, j| {
        let d = ((points[i] - beta_hat) / h).powi(2);
        if j == 0 {
            d * d
        } else {
            d
        }
    });
    let target = DVector::from_fn(4, |i, _| logliks[i] - loglik_max);
    let svd = basis.clone().svd(true, true);
    let sv = &svd.singular_values;
    if sv.min() <= 1e-10 * sv.max() {
        return Err(Error::DegenerateBasis);
    }
    let coef = svd
        .solve(&target, 0.0)
        .map_err(|_| Error::DegenerateBasis)?;
    let fit_residual = (&basis * &coef - &target).amax();
    let a = coef[0] / h.powi(4);
    let b = coef[1] / (h * h);
    if !(b < 0.0) {
        return Err(Error::NotConcave { b });
    }
    Ok(QuarticProfile {
        a,
        b,
        beta_hat,
        loglik_max,
        n,
        fit_residual,
    })
}

/// Log-likelihood ratio implied by the quartic for its own `hat`.
pub fn loglambda_from_quartic(q: &QuarticProfile) -> f64 {
    let h2 = q.beta_hat * q.beta_hat;
    -q.a * h2 * h2 - q.b * h2
}

/// Coefficient whose quartic log-likelihood ratio corresponds to partial
/// correlation `rho`, on the root pair nearest zero.
///
/// Evaluated as `rho * sqrt(n w / (sqrt(b^2 - 2 a n u) + |b|))` with
/// `u = -ln(1 - rho^2)` and `w = u / rho^2`. This is the rationalized form of
/// `sign(rho) sqrt((b + sqrt(b^2 + 2 a n ln(1 - rho^2))) / (-2a))`: it is stable
/// near `rho = 0` and reduces to `sqrt(n u / (2|b|))` as `a -> 0`.
pub fn beta_from_rho(rho: f64, q: &QuarticProfile) -> Result<f64> {
    if !(q.b < 0.0) {
        return Err(Error::NotConcave { b: q.b });
    }
    if rho == 0.0 {
        return Ok(0.0);
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!("|rho| = {} is not below 1", rho.abs())));
    }
    let n = q.n as f64;
    let u = -(-rho * rho).ln_1p();
    let disc = q.b * q.b - 2.0 * q.a * n * u;
    if disc < 0.0 {
        return Err(Error::Discriminant {
            rho: rho.abs(),
            rho_max: q.rho_max(),
        });
    }
    let w = u / (rho * rho);
    Ok(rho * (n * w / (disc.sqrt() + q.b.abs())).sqrt())
}

/// `-ln(1 - x^2) / x^2` as a truncated series about `x0`.
fn neg_log1m_sq_over_sq<const N: usize>(x0: f64) -> Series<N> {
    let x = Series::<N>::variable(x0);
    if x0.abs() >= 0.5 {
        let one = Series::constant(1.0);
        let u = (one - x * x).ln().scale(-1.0);
        return u / (x * x);
    }
    // w(x) = sum_k x^(2k) / (k + 1); coefficient m about x0 collects
    // C(2k, m) x0^(2k - m) / (k + 1).
    let mut c = [0.0; N];
    for (m, cm) in c.iter_mut().enumerate() {
        let mut k = m.div_ceil(2);
        loop {
            let p = 2 * k;
            let mut binom = 1.0;
            for i in 0..m {
                binom *= (p - i) as f64 / (i + 1) as f64;
            }
            let term = binom * x0.powi((p - m) as i32) / (k + 1) as f64;
            *cm += term;
            if k > m && term.abs() <= 1e-18 * cm.abs().max(1e-300) {
                break;
            }
            k += 1;
            if k > 2000 {
                break;
            }
        }
    }
    Series(c)
}

/// `beta_from_rho` as a truncated series about `rho0`.
pub(crate) fn beta_series<const N: usize>(rho0: f64, q: &QuarticProfile) -> Result<Series<N>> {
    if !(q.b < 0.0) {
        return Err(Error::NotConcave { b: q.b });
    }
    if !(rho0.abs() < 1.0) {
        return Err(Error::Domain(format!("|rho| = {} is not below 1", rho0.abs())));
    }
    let n = q.n as f64;
    let x = Series::<N>::variable(rho0);
    let w = neg_log1m_sq_over_sq::<N>(rho0);
    let u = x * x * w;
    let disc = Series::constant(q.b * q.b) - u.scale(2.0 * q.a * n);
    if !(disc.value() > 0.0) {
        return Err(Error::Discriminant {
            rho: rho0.abs(),
            rho_max: q.rho_max(),
        });
    }
    let denom = disc.sqrt() + Series::constant(q.b.abs());
    Ok(x * (w.scale(n) / denom).sqrt())
}

/// Evaluations of the profile log-likelihood used to fit the quartic.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileFit {
    pub quartic: QuarticProfile,
    pub points: [f64; 4],
    pub logliks: [f64; 4],
    /// Exact `L(hat) - L(0)` from the fits, when 0 was among the points.
    pub loglambda_exact: Option<f64>,
}

/// Evaluation points for the quartic fit of a coefficient.
pub fn profile_points(beta_hat: f64, se: f64) -> [f64; 4] {
    if beta_hat.abs() < DEGENERATE_RATIO * se {
        [-2.0, -1.0, 1.0, 2.0].map(|k| beta_hat + k * se)
    } else {
        PROFILE_FRACTIONS.map(|f| f * beta_hat)
    }
}

/// Profiles coefficient `j` of a fitted model and fits the quartic shape.
pub fn profile_quartic(
    family: Family,
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    j: usize,
    full: &FitResult,
) -> Result<ProfileFit> {
    let beta_hat = full.coefficients[j];
    let points = profile_points(beta_hat, full.se[j]);
    let mut logliks = [0.0; 4];
    for (ll, &p) in logliks.iter_mut().zip(&points) {
        *ll = profile_loglik(family, y, x, j, p)?;
    }
    let quartic = fit_quartic(&points, &logliks, beta_hat, full.max_loglik, y.len())?;
    let loglambda_exact = (points[0] == 0.0).then(|| full.max_loglik - logliks[0]);
    Ok(ProfileFit {
        quartic,
        points,
        logliks,
        loglambda_exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn partial_corr_examples() {
        assert_eq!(generalized_partial_corr(0.0, 50, 1.0).unwrap(), 0.0);
        let ll = 100.0 * -(0.75f64.ln()) / 2.0;
        assert_relative_eq!(
            generalized_partial_corr(ll, 100, 1.0).unwrap(),
            0.5,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            generalized_partial_corr(ll, 100, -1.0).unwrap(),
            -0.5,
            max_relative = 1e-14
        );
        assert_eq!(generalized_partial_corr(ll, 100, 0.0).unwrap(), 0.0);
        assert_eq!(generalized_partial_corr(-1e-10, 100, 1.0).unwrap(), 0.0);
        assert!(matches!(
            generalized_partial_corr(-1e-3, 100, 1.0),
            Err(Error::NegativeLogLambda(_))
        ));
    }

    #[test]
    fn classical_sd_examples() {
        assert_relative_eq!(classical_slope_sd(0.4, 0.0, 0.0, 1.0, 1.0).unwrap(), 0.4);
        assert_relative_eq!(classical_slope_sd(0.5, 0.0, 0.0, 1.0, 4.0).unwrap(), 1.0);
        assert!(matches!(
            classical_slope_sd(0.5, 1.0, 0.0, 1.0, 1.0),
            Err(Error::Collinear(_))
        ));
    }

    #[test]
    fn loglambda_examples() {
        let q = |a, b, h| QuarticProfile::new(a, b, h, 0.0, 10).unwrap();
        assert_eq!(loglambda_from_quartic(&q(1.0, -3.0, 0.0)), 0.0);
        assert_eq!(loglambda_from_quartic(&q(0.0, -2.0, 1.0)), 2.0);
        assert_eq!(loglambda_from_quartic(&q(1.0, -3.0, 1.0)), 2.0);
    }

    #[test]
    fn fit_recovers_exact_quartic() {
        let q = QuarticProfile::new(0.37, -2.9, 1.3, -41.0, 60).unwrap();
        let points = PROFILE_FRACTIONS.map(|f| f * q.beta_hat);
        let logliks = points.map(|p| q.predict(p));
        let fit = fit_quartic(&points, &logliks, q.beta_hat, q.loglik_max, 60).unwrap();
        assert_relative_eq!(fit.a, q.a, max_relative = 1e-10);
        assert_relative_eq!(fit.b, q.b, max_relative = 1e-10);
        assert!(fit.fit_residual < 1e-12);
    }

    #[test]
    fn flat_profile_is_rejected() {
        let points = [0.0, 0.25, 0.5, 0.75];
        assert!(matches!(
            fit_quartic(&points, &[-3.0; 4], 1.0, -3.0, 10),
            Err(Error::NotConcave { .. })
        ));
        assert!(matches!(
            fit_quartic(&[0.0, 0.0, 0.5, 0.75], &[-4.0, -4.0, -3.5, -3.1], 1.0, -3.0, 10),
            Err(Error::DegenerateBasis)
        ));
    }

    #[test]
    fn symmetric_points_for_degenerate_slope() {
        let q = QuarticProfile::new(0.2, -1.5, 0.0, -10.0, 30).unwrap();
        let points = profile_points(0.0, 0.4);
        assert_eq!(points, [-0.8, -0.4, 0.4, 0.8]);
        let logliks = points.map(|p| q.predict(p));
        let fit = fit_quartic(&points, &logliks, 0.0, -10.0, 30).unwrap();
        assert_relative_eq!(fit.a, 0.2, max_relative = 1e-10);
        assert_relative_eq!(fit.b, -1.5, max_relative = 1e-10);
    }

    #[test]
    fn beta_from_rho_basics() {
        let q = QuarticProfile::new(0.3, -4.0, 0.8, -50.0, 100).unwrap();
        assert_eq!(beta_from_rho(0.0, &q).unwrap(), 0.0);
        for r in [0.01, 0.1, 0.3, 0.45] {
            let p = beta_from_rho(r, &q).unwrap();
            let m = beta_from_rho(-r, &q).unwrap();
            assert_eq!(p, -m);
            // direct form of the near-zero root
            let n = 100.0;
            let disc = q.b * q.b + 2.0 * q.a * n * (1.0 - r * r).ln();
            let direct = ((q.b + disc.sqrt()) / (-2.0 * q.a)).sqrt();
            assert_relative_eq!(p, direct, max_relative = 1e-8);
        }
        match beta_from_rho(0.9, &q) {
            Err(Error::Discriminant { rho_max, .. }) => {
                assert_relative_eq!(rho_max, (1.0 - (-16.0f64 / 60.0).exp()).sqrt());
                assert!(beta_from_rho(rho_max * 0.999_999, &q).is_ok());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quadratic_limit() {
        let q = QuarticProfile::new(0.0, -50.0, 1.0, 0.0, 100).unwrap();
        for r in [0.05f64, 0.5, 0.95] {
            let want = (100.0 * (1.0 - r * r).ln() / (2.0 * q.b)).sqrt();
            assert_relative_eq!(beta_from_rho(r, &q).unwrap(), want, max_relative = 1e-13);
        }
    }

    #[test]
    fn series_value_matches_function() {
        let q = QuarticProfile::new(0.3, -4.0, 0.8, -50.0, 100).unwrap();
        for r in [0.001, 0.2, -0.3, 0.47] {
            let s = beta_series::<6>(r, &q).unwrap();
            assert_relative_eq!(s.value(), beta_from_rho(r, &q).unwrap(), max_relative = 1e-13);
        }
        let q = QuarticProfile::new(-0.1, -4.0, 0.8, -50.0, 100).unwrap();
        for r in [0.49, 0.51, 0.9] {
            let s = beta_series::<6>(r, &q).unwrap();
            assert_relative_eq!(s.value(), beta_from_rho(r, &q).unwrap(), max_relative = 1e-13);
        }
    }
}
