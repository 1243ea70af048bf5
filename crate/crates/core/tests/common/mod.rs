#![allow(dead_code)]

use prior_forge::{Family, Table};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn standardize(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / n).sqrt();
    v.iter().map(|a| (a - m) / s).collect()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// ML (divide-by-n) variance.
pub fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64
}

/// Response from linear predictor `eta` under `family`.
pub fn respond(rng: &mut ChaCha8Rng, family: Family, eta: &[f64]) -> Vec<f64> {
    eta.iter()
        .map(|&e| match family {
            Family::Gaussian => e + rng.sample::<f64, _>(StandardNormal),
            Family::Binomial => f64::from(u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-e).exp()))),
            Family::Poisson => Poisson::new(e.exp()).unwrap().sample(rng),
        })
        .collect()
}

/// Two correlated predictors and a response with modest effects.
pub fn two_predictor_table(seed: u64, family: Family, n: usize) -> Table {
    let mut r = rng(seed);
    let x1 = normals(&mut r, n);
    let e = normals(&mut r, n);
    let x2: Vec<f64> = x1.iter().zip(&e).map(|(a, b)| 0.5 * a + b).collect();
    let base = if family == Family::Poisson { 0.5 } else { 0.2 };
    let eta: Vec<f64> = x1
        .iter()
        .zip(&x2)
        .map(|(a, b)| base + 0.4 * a - 0.3 * b)
        .collect();
    let y = respond(&mut r, family, &eta);
    Table::new()
        .with_numeric("y", &y)
        .with_numeric("x1", &x1)
        .with_numeric("x2", &x2)
}

/// Single standardized predictor and standardized Gaussian response.
pub fn standardized_pair(seed: u64, n: usize, slope: f64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let x = normals(&mut r, n);
    let y = respond(&mut r, Family::Gaussian, &x.iter().map(|v| slope * v).collect::<Vec<_>>());
    (standardize(&x), standardize(&y))
}
