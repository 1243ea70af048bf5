//! Assembly of the full default prior set for a model.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::{
    build_design, DesignData, ModelSpec, RandomExpr, RandomTerm, Table, INTERCEPT,
};
use crate::glm::{fit_glm, Family, FitResult};
use crate::pcorr::{generalized_partial_corr, loglambda_from_quartic, profile_quartic};
use crate::taylor::{implied_sd, RhoScale, ScaleLabel, TaylorConfig};

/// A prior distribution, serialized as `{"dist": .., "params": {..}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", content = "params")]
pub enum Distribution {
    Normal { mu: f64, sigma: f64 },
    HalfNormal { sigma: f64 },
    Uniform { lower: f64, upper: f64 },
}

impl Distribution {
    /// Scale parameter: `sigma` for Normal and HalfNormal, the upper bound for Uniform.
    pub fn scale(&self) -> f64 {
        match *self {
            Distribution::Normal { sigma, .. } | Distribution::HalfNormal { sigma } => sigma,
            Distribution::Uniform { upper, .. } => upper,
        }
    }
}

/// How a prior's parameters were obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Provenance {
    Slope {
        sigma_rho: f64,
        scale: Option<ScaleLabel>,
        taylor_order: usize,
        eval_point: f64,
        a: f64,
        b: f64,
        beta_hat: f64,
        loglik_max: f64,
        rho_hat: f64,
        quartic_fit_residual: f64,
    },
    /// Intercept or cell mean; `baseline_*` are on the link scale.
    Intercept {
        baseline_mean: f64,
        baseline_var: f64,
        from_intercept_only_fit: bool,
    },
    ResidualSd {
        var_y: f64,
    },
    RandomEffect {
        group: String,
        fixed_term: String,
        augmented: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub term: String,
    #[serde(flatten)]
    pub distribution: Distribution,
    pub provenance: Provenance,
}

impl PriorSpec {
    pub fn sd(&self) -> f64 {
        self.distribution.scale()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSet {
    pub slopes: Vec<PriorSpec>,
    pub intercept_or_cellmeans: Vec<PriorSpec>,
    /// Present iff the family is Gaussian.
    pub residual_sd: Option<PriorSpec>,
    pub random_effects: Vec<PriorSpec>,
    pub model: ModelSpec,
    pub n_used: usize,
    pub rows_dropped: usize,
}

/// Per-term correlation scales and Taylor settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriorOptions {
    pub default_scale: RhoScale,
    pub term_scales: BTreeMap<String, RhoScale>,
    /// Overrides the family default (order 5 for Gaussian, 1 otherwise).
    pub taylor: Option<TaylorConfig>,
}

impl PriorOptions {
    pub fn scale_for(&self, term: &str) -> RhoScale {
        self.term_scales
            .get(term)
            .copied()
            .unwrap_or(self.default_scale)
    }

    pub fn taylor_for(&self, family: Family) -> TaylorConfig {
        self.taylor
            .unwrap_or_else(|| TaylorConfig::for_family(family))
    }
}

/// Fits the fixed part of `design` by maximum likelihood.
pub fn fit_design(design: &DesignData) -> Result<FitResult> {
    fit_glm(design.family, &design.y, &design.x, None)
}

/// Normal prior for slope column `j` whose SD is the Taylor-approximate SD of
/// the coefficient implied by a correlation-scale prior.
pub fn slope_prior(
    design: &DesignData,
    fit: &FitResult,
    j: usize,
    scale: &RhoScale,
    config: &TaylorConfig,
) -> Result<PriorSpec> {
    let name = &design.columns[j].name;
    let inner = || -> Result<PriorSpec> {
        let profile = profile_quartic(design.family, &design.y, &design.x, j, fit)?;
        let q = profile.quartic;
        let loglambda = profile
            .loglambda_exact
            .unwrap_or_else(|| loglambda_from_quartic(&q));
        let rho_hat = generalized_partial_corr(loglambda.max(0.0), design.n, q.beta_hat.signum())?;
        let sigma = implied_sd(&q, scale, config)?;
        Ok(PriorSpec {
            term: name.clone(),
            distribution: Distribution::Normal { mu: 0.0, sigma },
            provenance: Provenance::Slope {
                sigma_rho: scale.sigma_rho,
                scale: scale.label,
                taylor_order: config.order,
                eval_point: config.eval_point,
                a: q.a,
                b: q.b,
                beta_hat: q.beta_hat,
                loglik_max: q.loglik_max,
                rho_hat,
                quartic_fit_residual: q.fit_residual,
            },
        })
    };
    inner().map_err(|e| e.in_term(name))
}

fn collect_results(results: Vec<Result<PriorSpec>>) -> Result<Vec<PriorSpec>> {
    let mut ok = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(p) => ok.push(p),
            Err(e) => errors.push(e),
        }
    }
    match errors.len() {
        0 => Ok(ok),
        1 => Err(errors.pop().expect("one error")),
        _ => Err(Error::Aggregate(errors)),
    }
}

/// Slope priors for every slope column of `design`, in column order.
pub fn slope_priors(
    design: &DesignData,
    fit: &FitResult,
    options: &PriorOptions,
) -> Result<Vec<PriorSpec>> {
    let config = options.taylor_for(design.family);
    let columns = design.slope_columns();
    let one = |j: usize| {
        let scale = options.scale_for(&design.columns[j].term);
        slope_prior(design, fit, j, &scale, &config)
    };
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        columns.par_iter().map(|&j| one(j)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = columns.iter().map(|&j| one(j)).collect();
    collect_results(results)
}

/// Mean and variance of the response on the link scale: sample moments for
/// Gaussian, otherwise the estimate and `n * var` of an intercept-only fit.
fn baseline(design: &DesignData) -> Result<(f64, f64, bool)> {
    match design.family {
        Family::Gaussian => {
            if !(design.var_y > 0.0) {
                return Err(Error::DegenerateResponse);
            }
            Ok((design.mean_y, design.var_y, false))
        }
        family => {
            let ones = DMatrix::from_element(design.n, 1, 1.0);
            let fit = fit_glm(family, &design.y, &ones, None).map_err(|e| e.in_term(INTERCEPT))?;
            let se = fit.se[0];
            Ok((fit.coefficients[0], design.n as f64 * se * se, true))
        }
    }
}

/// Normal intercept prior: mean `Ybar - sum E[b_j] Xbar_j`, variance
/// `var(Y) + sum Xbar_j^2 var(b_j)`.
pub fn intercept_prior(design: &DesignData, slopes: &[PriorSpec]) -> Result<PriorSpec> {
    let (mean0, var0, from_fit) = baseline(design)?;
    let mut mean = mean0;
    let mut var = var0;
    for (j, col) in design.columns.iter().enumerate() {
        if let Some(p) = slopes.iter().find(|p| p.term == col.name) {
            if let Distribution::Normal { mu, sigma } = p.distribution {
                let xbar = design.means_x[j];
                mean -= mu * xbar;
                var += xbar * xbar * sigma * sigma;
            }
        }
    }
    Ok(PriorSpec {
        term: INTERCEPT.into(),
        distribution: Distribution::Normal {
            mu: mean,
            sigma: var.sqrt(),
        },
        provenance: Provenance::Intercept {
            baseline_mean: mean0,
            baseline_var: var0,
            from_intercept_only_fit: from_fit,
        },
    })
}

/// Cell-mean coefficients share the intercept scheme with no slope terms.
pub fn cellmeans_priors(design: &DesignData) -> Result<Vec<PriorSpec>> {
    if !design.cell_means {
        return Err(Error::Unsupported("model is not a cell-means model".into()));
    }
    for (j, col) in design.columns.iter().enumerate() {
        if design.x.column(j).sum() == 0.0 {
            return Err(Error::EmptyCell(col.name.clone()));
        }
    }
    let (mean, var, from_fit) = baseline(design)?;
    Ok(design
        .columns
        .iter()
        .map(|c| PriorSpec {
            term: c.name.clone(),
            distribution: Distribution::Normal {
                mu: mean,
                sigma: var.sqrt(),
            },
            provenance: Provenance::Intercept {
                baseline_mean: mean,
                baseline_var: var,
                from_intercept_only_fit: from_fit,
            },
        })
        .collect())
}

/// `Uniform(0, sd(Y))` for the Gaussian residual SD.
pub fn residual_sd_prior(design: &DesignData) -> Result<PriorSpec> {
    if !(design.var_y > 0.0) {
        return Err(Error::DegenerateResponse);
    }
    Ok(PriorSpec {
        term: "sigma".into(),
        distribution: Distribution::Uniform {
            lower: 0.0,
            upper: design.var_y.sqrt(),
        },
        provenance: Provenance::ResidualSd {
            var_y: design.var_y,
        },
    })
}

/// Already-computed fixed-effect priors of a model.
#[derive(Debug, Clone, Copy)]
pub struct FixedPriors<'a> {
    pub slopes: &'a [PriorSpec],
    pub intercept: Option<&'a PriorSpec>,
}

/// Half-Normal prior for a random-effect SD, scaled by the prior SD of the
/// matching fixed effect. When the model lacks that fixed effect, the SD is
/// taken from the model with the effect added and everything else kept.
pub fn random_effect_prior(
    term: &RandomTerm,
    design: &DesignData,
    fixed: FixedPriors<'_>,
    options: &PriorOptions,
) -> Result<PriorSpec> {
    let label = term.to_string();
    let inner = || -> Result<PriorSpec> {
        let levels = design
            .group_indices
            .get(&term.group)
            .map_or(0, |g| g.levels.len());
        if levels < 2 {
            return Err(Error::TooFewGroups {
                group: term.group.clone(),
                levels,
            });
        }
        let counterpart = term.fixed_counterpart();
        let present = design.spec().has_fixed(counterpart) && !design.cell_means;
        let sigma = if present {
            fixed_sd(design, counterpart, fixed)?
        } else {
            let mut spec = design.spec().clone();
            match &term.expr {
                RandomExpr::Intercept => spec.has_intercept = true,
                RandomExpr::Column(c) => spec.fixed_terms.push(c.clone()),
            }
            let aug = design.with_spec(&spec)?;
            let fit = fit_design(&aug)?;
            let slopes = slope_priors(&aug, &fit, options)?;
            let intercept = match term.expr {
                RandomExpr::Intercept => Some(intercept_prior(&aug, &slopes)?),
                RandomExpr::Column(_) => None,
            };
            fixed_sd(
                &aug,
                counterpart,
                FixedPriors {
                    slopes: &slopes,
                    intercept: intercept.as_ref(),
                },
            )?
        };
        Ok(PriorSpec {
            term: label.clone(),
            distribution: Distribution::HalfNormal { sigma },
            provenance: Provenance::RandomEffect {
                group: term.group.clone(),
                fixed_term: counterpart.to_string(),
                augmented: !present,
            },
        })
    };
    inner().map_err(|e| e.in_term(&label))
}

fn fixed_sd(design: &DesignData, name: &str, fixed: FixedPriors<'_>) -> Result<f64> {
    if name == INTERCEPT {
        return fixed
            .intercept
            .map(PriorSpec::sd)
            .ok_or_else(|| Error::Unsupported("model has no intercept prior".into()));
    }
    let cols = design
        .columns_of(name)
        .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
    if cols.len() != 1 {
        return Err(Error::Unsupported(format!(
            "random slope on `{name}` needs a single numeric column"
        )));
    }
    let col = &design.columns[cols[0]].name;
    fixed
        .slopes
        .iter()
        .find(|p| &p.term == col)
        .map(PriorSpec::sd)
        .ok_or_else(|| Error::UnknownColumn(col.clone()))
}

/// Builds every default prior for `spec` on `table`.
pub fn build_all_priors(spec: &ModelSpec, table: &Table, options: &PriorOptions) -> Result<PriorSet> {
    let design = build_design(spec, table)?;
    priors_for_design(&design, options)
}

/// As [`build_all_priors`] for an already assembled design.
pub fn priors_for_design(design: &DesignData, options: &PriorOptions) -> Result<PriorSet> {
    let fit = fit_design(design)?;
    let slopes = slope_priors(design, &fit, options)?;

    let intercept_or_cellmeans = if design.cell_means {
        cellmeans_priors(design)?
    } else if design.spec().has_intercept {
        vec![intercept_prior(design, &slopes)?]
    } else {
        Vec::new()
    };
    let intercept = (!design.cell_means && design.spec().has_intercept)
        .then(|| &intercept_or_cellmeans[0]);

    let residual_sd = if design.family == Family::Gaussian {
        Some(residual_sd_prior(design)?)
    } else {
        None
    };

    let fixed = FixedPriors {
        slopes: &slopes,
        intercept,
    };
    let random_effects = collect_results(
        design
            .spec()
            .random_terms
            .iter()
            .map(|t| random_effect_prior(t, design, fixed, options))
            .collect(),
    )?;

    Ok(PriorSet {
        slopes,
        intercept_or_cellmeans,
        residual_sd,
        random_effects,
        model: design.spec().clone(),
        n_used: design.n,
        rows_dropped: design.rows_dropped,
    })
}
