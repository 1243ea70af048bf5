//! Truncated Taylor series arithmetic.
//!
//! A `Series<N>` holds the first `N` Taylor coefficients `f^(k)(x0) / k!` of a
//! function about a fixed point. Composing series through `+ - * /`, `sqrt`
//! and `ln` propagates exact derivatives up to order `N - 1`.

use std::ops::{Add, Div, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Series<const N: usize>(pub [f64; N]);

impl<const N: usize> Series<N> {
    pub fn constant(c: f64) -> Self {
        let mut s = [0.0; N];
        s[0] = c;
        Series(s)
    }

    /// The identity function expanded about `x0`.
    pub fn variable(x0: f64) -> Self {
        let mut s = [0.0; N];
        s[0] = x0;
        if N > 1 {
            s[1] = 1.0;
        }
        Series(s)
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    pub fn scale(mut self, c: f64) -> Self {
        for v in &mut self.0 {
            *v *= c;
        }
        self
    }

    pub fn sqrt(&self) -> Self {
        let f = &self.0;
        let mut s = [0.0; N];
        s[0] = f[0].sqrt();
        for k in 1..N {
            let cross: f64 = (1..k).map(|j| s[j] * s[k - j]).sum();
            s[k] = (f[k] - cross) / (2.0 * s[0]);
        }
        Series(s)
    }

    pub fn ln(&self) -> Self {
        let f = &self.0;
        let mut s = [0.0; N];
        s[0] = f[0].ln();
        // f * s' = f'  =>  k f0 s_k = k f_k - sum_{j=1}^{k-1} j s_j f_{k-j}
        for k in 1..N {
            let acc: f64 = (1..k).map(|j| j as f64 * s[j] * f[k - j]).sum();
            s[k] = (k as f64 * f[k] - acc) / (k as f64 * f[0]);
        }
        Series(s)
    }

    /// Derivatives `f^(1) .. f^(N-1)`.
    pub fn derivatives(&self) -> Vec<f64> {
        let mut fact = 1.0;
        (1..N)
            .map(|k| {
                fact *= k as f64;
                self.0[k] * fact
            })
            .collect()
    }
}

impl<const N: usize> Add for Series<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
        self
    }
}

impl<const N: usize> Sub for Series<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
        self
    }
}

impl<const N: usize> Mul for Series<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut s = [0.0; N];
        for (k, out) in s.iter_mut().enumerate() {
            *out = (0..=k).map(|j| self.0[j] * rhs.0[k - j]).sum();
        }
        Series(s)
    }
}

impl<const N: usize> Div for Series<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let (f, g) = (&self.0, &rhs.0);
        let mut q = [0.0; N];
        for k in 0..N {
            let acc: f64 = (0..k).map(|j| q[j] * g[k - j]).sum();
            q[k] = (f[k] - acc) / g[0];
        }
        Series(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exp_log_identities() {
        // ln(1 + x) about x0 = 0.3: derivatives (-1)^(k+1) (k-1)! / 1.3^k
        let x = Series::<6>::variable(0.3);
        let l = (Series::constant(1.0) + x).ln();
        for (k, d) in l.derivatives().iter().enumerate() {
            let k = k + 1;
            let fact: f64 = (1..k).map(|i| i as f64).product();
            let want = if k % 2 == 1 { 1.0 } else { -1.0 } * fact / 1.3f64.powi(k as i32);
            assert_relative_eq!(*d, want, max_relative = 1e-13);
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let x = Series::<6>::variable(0.7);
        let f = Series::constant(2.0) + x * x * x;
        let r = f.sqrt();
        let back = r * r;
        for (a, b) in back.0.iter().zip(f.0) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn division_inverts_multiplication() {
        let x = Series::<6>::variable(-0.4);
        let f = Series::constant(1.5) + x * x;
        let g = Series::constant(3.0) - x;
        let q = (f * g) / g;
        for (a, b) in q.0.iter().zip(f.0) {
            assert_relative_eq!(*a, b, epsilon = 1e-14);
        }
    }
}
