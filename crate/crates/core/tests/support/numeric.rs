//! Numerical oracles shared by test targets.

use prior_forge::pcorr::QuarticProfile;

/// Composite Simpson rule on [lo, hi] with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

/// Central moment of Beta(p, q) on (-1, 1) by quadrature. Substituting
/// u = sin^2(t) removes the endpoint singularities of the density.
pub fn quadrature_moment(p: f64, q: f64, m: usize) -> f64 {
    let dens = |t: f64| 2.0 * t.sin().powf(2.0 * p - 1.0) * t.cos().powf(2.0 * q - 1.0);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let n = 20_000;
    let norm = simpson(dens, 0.0, half_pi, n);
    let mean = simpson(|t| (2.0 * t.sin().powi(2) - 1.0) * dens(t), 0.0, half_pi, n) / norm;
    simpson(
        |t| (2.0 * t.sin().powi(2) - 1.0 - mean).powi(m as i32) * dens(t),
        0.0,
        half_pi,
        n,
    ) / norm
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// n-th derivative by central differences, extrapolated in h^2.
pub fn richardson_derivative(f: &impl Fn(f64) -> f64, x0: f64, order: usize, h0: f64, levels: usize) -> f64 {
    let stencil = |h: f64| {
        let mut s = 0.0;
        for k in 0..=order {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * binomial(order, k) * f(x0 + (order as f64 / 2.0 - k as f64) * h);
        }
        s / h.powi(order as i32)
    };
    let mut table: Vec<Vec<f64>> = Vec::new();
    for i in 0..levels {
        let mut row = vec![stencil(h0 / 2f64.powi(i as i32))];
        for j in 1..=i {
            let factor = 4f64.powi(j as i32);
            let prev = &table[i - 1];
            row.push(row[j - 1] + (row[j - 1] - prev[j - 1]) / (factor - 1.0));
        }
        table.push(row);
    }
    *table.last().unwrap().last().unwrap()
}

/// Quartic shapes on which derivatives are compared.
pub fn profile_grid() -> Vec<QuarticProfile> {
    let mut out = Vec::new();
    for &n in &[50usize, 400] {
        for &b in &[-0.4 * n as f64, -2.0 * n as f64] {
            // a n / b^2 = -1 is avoided: the cubic coefficient of g vanishes
            // there, so even derivatives near 0 are pure cancellation.
            for &ratio in &[-0.6, -0.3, 0.0, 0.3, 0.8] {
                let a = ratio * b * b / n as f64;
                out.push(QuarticProfile::new(a, b, 0.7, -10.0, n).unwrap());
            }
        }
    }
    out
}

/// Profile with `beta_hat` on the inner root of the quartic.
///
/// `log_c` sets `-b beta_hat^2 = 10^log_c n` and `t` sets `a beta_hat^2 = t |b|`.
pub fn inner_root_profile(n: usize, beta_hat: f64, log_c: f64, t: f64) -> QuarticProfile {
    let big_b = 10f64.powf(log_c) * n as f64 / (beta_hat * beta_hat);
    let a = t * big_b / (beta_hat * beta_hat);
    QuarticProfile::new(a, -big_b, beta_hat, -5.0, n).unwrap()
}
