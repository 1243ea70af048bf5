//! Seeded simulation harness: coefficient round trip over a grid of data
//! regimes, and Taylor-approximate versus Monte Carlo prior SDs.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Beta, Distribution as _, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::glm::{fit_glm, Family};
use crate::pcorr::{beta_from_rho, generalized_partial_corr, profile_quartic, QuarticProfile};
use crate::taylor::{implied_sd, RhoScale, ScaleLabel, TaylorConfig};

pub const ROUNDTRIP_THRESHOLD: f64 = 0.005;
pub const TAYLOR_RATIO_RANGE: (f64, f64) = (0.85, 1.02);
pub const MC_DRAWS: usize = 1_000_000;
const MAX_REDRAWS_PER_REP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EffectSize {
    Small,
    Medium,
    Large,
}

impl EffectSize {
    /// True slope on standardized predictors.
    pub fn coefficient(self) -> f64 {
        match self {
            EffectSize::Small => 0.1,
            EffectSize::Medium => 0.3,
            EffectSize::Large => 0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EffectSize::Small => "small",
            EffectSize::Medium => "medium",
            EffectSize::Large => "large",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimGrid {
    pub sample_sizes: Vec<usize>,
    pub n_predictors: Vec<usize>,
    pub collinearity: Vec<f64>,
    pub effect_sizes: Vec<EffectSize>,
    pub families: Vec<Family>,
    pub reps: usize,
    pub seed: u64,
}

impl SimGrid {
    pub fn new(seed: u64, reps: usize) -> Self {
        Self {
            sample_sizes: vec![20, 100, 400],
            n_predictors: vec![1, 2, 3],
            collinearity: vec![0.0, 0.5, 0.9],
            effect_sizes: vec![EffectSize::Small, EffectSize::Medium, EffectSize::Large],
            families: vec![Family::Gaussian, Family::Binomial, Family::Poisson],
            reps,
            seed,
        }
    }

    /// The full cross, family slowest and effect size fastest.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &family in &self.families {
            for &n in &self.sample_sizes {
                for &k in &self.n_predictors {
                    for &r in &self.collinearity {
                        for &effect in &self.effect_sizes {
                            out.push(Cell {
                                index: out.len(),
                                family,
                                n,
                                predictors: k,
                                collinearity: r,
                                effect,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub family: Family,
    pub n: usize,
    pub predictors: usize,
    pub collinearity: f64,
    pub effect: EffectSize,
}

impl Cell {
    /// Independent stream per cell so results do not depend on scheduling.
    pub fn rng(&self, seed: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self.index as u64);
        rng
    }

    /// Design with intercept and equicorrelated standard normal predictors,
    /// and a response drawn from the cell's family.
    pub fn simulate<R: Rng>(&self, rng: &mut R) -> (DVector<f64>, DMatrix<f64>) {
        let (n, k, r) = (self.n, self.predictors, self.collinearity);
        let mut x = DMatrix::from_element(n, k + 1, 1.0);
        for i in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            for j in 1..=k {
                let e: f64 = rng.sample(StandardNormal);
                x[(i, j)] = r.sqrt() * z + (1.0 - r).sqrt() * e;
            }
        }
        let beta = self.effect.coefficient();
        let intercept = if self.family == Family::Poisson { 0.5 } else { 0.0 };
        let y = DVector::from_fn(n, |i, _| {
            let eta = intercept + beta * (1..=k).map(|j| x[(i, j)]).sum::<f64>();
            match self.family {
                Family::Gaussian => eta + rng.sample::<f64, _>(StandardNormal),
                Family::Binomial => {
                    let p = 1.0 / (1.0 + (-eta).exp());
                    let b = Bernoulli::new(p).expect("p in [0, 1]");
                    f64::from(u8::from(b.sample(rng)))
                }
                Family::Poisson => Poisson::new(eta.exp()).expect("positive mean").sample(rng),
            }
        });
        (y, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripCell {
    pub cell: Cell,
    pub reps: usize,
    /// Datasets discarded because a fit failed or did not converge.
    pub redraws: usize,
    /// Datasets discarded because a profile had no concave quartic fit,
    /// which happens under near-separation.
    pub nonconcave: usize,
    /// Coefficients whose correlation could not be mapped back.
    pub failures: usize,
    pub mean_rel_error: f64,
    pub max_rel_error: f64,
}

impl RoundtripCell {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.mean_rel_error <= ROUNDTRIP_THRESHOLD
    }
}

enum RepOutcome {
    Redraw,
    NonConcave,
    Errors(Vec<Option<f64>>),
}

fn roundtrip_rep(cell: &Cell, y: &DVector<f64>, x: &DMatrix<f64>) -> RepOutcome {
    let Ok(full) = fit_glm(cell.family, y, x, None) else {
        return RepOutcome::Redraw;
    };
    let mut errs = Vec::with_capacity(cell.predictors);
    for j in 1..=cell.predictors {
        let profile = match profile_quartic(cell.family, y, x, j, &full) {
            Ok(p) => p,
            Err(Error::NotConverged { .. } | Error::RankDeficient { .. }) => {
                return RepOutcome::Redraw
            }
            Err(Error::NotConcave { .. }) => return RepOutcome::NonConcave,
            Err(_) => {
                errs.push(None);
                continue;
            }
        };
        let q = profile.quartic;
        let ll = profile
            .loglambda_exact
            .unwrap_or_else(|| crate::pcorr::loglambda_from_quartic(&q));
        let back = generalized_partial_corr(ll.max(0.0), cell.n, q.beta_hat.signum())
            .and_then(|rho| beta_from_rho(rho, &q));
        errs.push(back.ok().map(|b| ((b - q.beta_hat) / q.beta_hat).abs()));
    }
    RepOutcome::Errors(errs)
}

/// Round trip for one cell: mean relative error of the coefficient recovered
/// from the estimated correlation.
pub fn roundtrip_cell(cell: &Cell, reps: usize, seed: u64) -> Result<RoundtripCell> {
    let mut rng = cell.rng(seed);
    let (mut redraws, mut nonconcave, mut failures, mut count) = (0, 0, 0, 0usize);
    let (mut sum, mut max) = (0.0, 0.0f64);
    for _ in 0..reps {
        let mut tries = 0;
        let errs = loop {
            let (y, x) = cell.simulate(&mut rng);
            match roundtrip_rep(cell, &y, &x) {
                RepOutcome::Errors(e) => break e,
                outcome => {
                    if matches!(outcome, RepOutcome::NonConcave) {
                        nonconcave += 1;
                    } else {
                        redraws += 1;
                    }
                    tries += 1;
                    if tries >= MAX_REDRAWS_PER_REP {
                        return Err(Error::NotConverged {
                            iterations: tries,
                            reason: format!("cell {} produced no usable dataset", cell.index),
                        });
                    }
                }
            }
        };
        for e in errs {
            match e {
                Some(e) if e.is_finite() => {
                    sum += e;
                    max = max.max(e);
                    count += 1;
                }
                _ => failures += 1,
            }
        }
    }
    Ok(RoundtripCell {
        cell: *cell,
        reps,
        redraws,
        nonconcave,
        failures,
        mean_rel_error: if count > 0 { sum / count as f64 } else { f64::NAN },
        max_rel_error: max,
    })
}

fn run_cells<T: Send>(
    cells: &[Cell],
    threads: Option<usize>,
    f: impl Fn(&Cell) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = threads {
            builder = builder.num_threads(t.max(1));
        }
        let pool = builder
            .build()
            .map_err(|e| Error::Unsupported(e.to_string()))?;
        pool.install(|| cells.par_iter().map(&f).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        cells.iter().map(f).collect()
    }
}

pub fn roundtrip(grid: &SimGrid, threads: Option<usize>) -> Result<Vec<RoundtripCell>> {
    run_cells(&grid.cells(), threads, |c| roundtrip_cell(c, grid.reps, grid.seed))
}

pub fn roundtrip_tsv(rows: &[RoundtripCell]) -> String {
    let mut out = String::from(
        "family\tn\tpredictors\tcollinearity\teffect\treps\tredraws\tnonconcave\tfailures\tmean_rel_error\tmax_rel_error\tstatus\n",
    );
    for r in rows {
        let c = &r.cell;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6e}\t{:.6e}\t{}",
            c.family,
            c.n,
            c.predictors,
            c.collinearity,
            c.effect.name(),
            r.reps,
            r.redraws,
            r.nonconcave,
            r.failures,
            r.mean_rel_error,
            r.max_rel_error,
            if r.passed() { "PASS" } else { "FAIL" }
        );
    }
    out
}

/// Profile of a Gaussian model with an exactly quadratic log-likelihood,
/// for which the coefficient is `sqrt(-ln(1 - rho^2))` up to sign.
pub fn representative_profile() -> QuarticProfile {
    QuarticProfile::new(0.0, -50.0, 1.0, 0.0, 100).expect("valid profile")
}

pub fn taylor_sd_grid() -> Vec<f64> {
    let wide = ScaleLabel::Wide.sigma_rho();
    vec![0.1, 0.2, 0.3, 0.4, 0.5, wide, 0.7, 0.8]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorSdRow {
    pub sigma_rho: f64,
    /// Monte Carlo SD of the coefficient under the correlation prior.
    pub mc_sd: f64,
    /// Taylor-approximate SDs for orders 1, 3 and 5.
    pub taylor_sd: [f64; 3],
    /// Draws whose correlation had no coefficient under the profile.
    pub skipped: usize,
}

impl TaylorSdRow {
    pub fn ratio(&self, order: usize) -> f64 {
        self.taylor_sd[order / 2] / self.mc_sd
    }

    /// Order-5 approximation expressed as an SD on the correlation scale.
    pub fn rho_scale_sd(&self) -> f64 {
        self.ratio(5) * self.sigma_rho
    }

    /// Only scales up to the flat-prior default are held to the range.
    pub fn checked(&self) -> bool {
        self.sigma_rho <= ScaleLabel::Wide.sigma_rho() + 1e-12
    }

    pub fn passed(&self) -> bool {
        let r = self.ratio(5);
        !self.checked() || (TAYLOR_RATIO_RANGE.0..=TAYLOR_RATIO_RANGE.1).contains(&r)
    }
}

/// Compares Taylor-approximate and Monte Carlo coefficient SDs at `sigma_rho`.
pub fn taylor_sd_point(
    q: &QuarticProfile,
    sigma_rho: f64,
    draws: usize,
    rng: &mut impl Rng,
) -> Result<TaylorSdRow> {
    let scale = RhoScale::new(sigma_rho)?;
    let mut taylor_sd = [0.0; 3];
    for (slot, order) in taylor_sd.iter_mut().zip([1, 3, 5]) {
        *slot = implied_sd(q, &scale, &TaylorConfig::with_order(order)?)?;
    }
    let beta = Beta::new(scale.shape_p, scale.shape_p).map_err(|e| Error::Domain(e.to_string()))?;
    let (mut count, mut mean, mut m2, mut skipped) = (0usize, 0.0, 0.0, 0usize);
    for _ in 0..draws {
        let rho: f64 = 2.0 * beta.sample(rng) - 1.0;
        match beta_from_rho(rho, q) {
            Ok(b) if b.is_finite() => {
                count += 1;
                let d = b - mean;
                mean += d / count as f64;
                m2 += d * (b - mean);
            }
            _ => skipped += 1,
        }
    }
    if count < 2 {
        return Err(Error::Domain("too few valid Monte Carlo draws".into()));
    }
    Ok(TaylorSdRow {
        sigma_rho,
        mc_sd: (m2 / count as f64).sqrt(),
        taylor_sd,
        skipped,
    })
}

pub fn taylor_sd(seed: u64, draws: usize, threads: Option<usize>) -> Result<Vec<TaylorSdRow>> {
    let q = representative_profile();
    let cells: Vec<Cell> = taylor_sd_grid()
        .iter()
        .enumerate()
        .map(|(index, _)| Cell {
            index,
            family: Family::Gaussian,
            n: q.n,
            predictors: 1,
            collinearity: 0.0,
            effect: EffectSize::Small,
        })
        .collect();
    let grid = taylor_sd_grid();
    run_cells(&cells, threads, |c| {
        let mut rng = c.rng(seed);
        taylor_sd_point(&q, grid[c.index], draws, &mut rng)
    })
}

pub fn taylor_sd_tsv(rows: &[TaylorSdRow]) -> String {
    let mut out = String::from(
        "sigma_rho\tmc_sd\ttaylor_sd_k1\ttaylor_sd_k3\ttaylor_sd_k5\tratio_k5\trho_scale_sd_k5\tskipped\tstatus\n",
    );
    for r in rows {
        let status = match (r.checked(), r.passed()) {
            (false, _) => "INFO",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        let _ = writeln!(
            out,
            "{:.6}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.6}\t{:.6}\t{}\t{}",
            r.sigma_rho,
            r.mc_sd,
            r.taylor_sd[0],
            r.taylor_sd[1],
            r.taylor_sd[2],
            r.ratio(5),
            r.rho_scale_sd(),
            r.skipped,
            status
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_full_cross() {
        let g = SimGrid::new(1, 10);
        let cells = g.cells();
        assert_eq!(cells.len(), 243);
        assert!(cells.iter().enumerate().all(|(i, c)| c.index == i));
    }

    #[test]
    fn simulation_is_seeded() {
        let c = SimGrid::new(7, 1).cells()[100];
        let a = c.simulate(&mut c.rng(7));
        let b = c.simulate(&mut c.rng(7));
        assert_eq!(a, b);
        let other = c.simulate(&mut c.rng(8));
        assert_ne!(a.0, other.0);
    }

    #[test]
    fn equicorrelation_is_close_to_target() {
        let c = Cell {
            index: 0,
            family: Family::Gaussian,
            n: 20000,
            predictors: 2,
            collinearity: 0.5,
            effect: EffectSize::Small,
        };
        let (_, x) = c.simulate(&mut c.rng(3));
        let (a, b) = (x.column(1), x.column(2));
        let r = a.dot(&b) / (a.norm() * b.norm());
        assert!((r - 0.5).abs() < 0.03, "{r}");
    }

    #[test]
    fn gaussian_cell_roundtrip_is_small() {
        let c = SimGrid::new(11, 1).cells()[40];
        assert_eq!(c.family, Family::Gaussian);
        let r = roundtrip_cell(&c, 20, 11).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn responses_match_family_support() {
        for family in [Family::Binomial, Family::Poisson] {
            let c = Cell {
                index: 5,
                family,
                n: 200,
                predictors: 2,
                collinearity: 0.0,
                effect: EffectSize::Large,
            };
            let (y, _) = c.simulate(&mut c.rng(1));
            assert!(y.iter().all(|v| *v >= 0.0 && v.fract() == 0.0));
            if family == Family::Binomial {
                assert!(y.iter().all(|v| *v <= 1.0));
            }
        }
    }
}
