//! Serializable summary of a prior set and a plain-text table rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::Family;
use crate::priors::{Distribution, PriorSet, PriorSpec, Provenance};

/// Quartic fit summary for one slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub term: String,
    pub a: f64,
    pub b: f64,
    pub beta_hat: f64,
    pub quartic_fit_residual: f64,
    pub taylor_order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorReport {
    pub formula: String,
    pub family: Family,
    pub n_used: usize,
    pub rows_dropped: usize,
    /// Intercept or cell means first, then slopes, residual SD, random effects.
    pub priors: Vec<PriorSpec>,
    pub diagnostics: Vec<Diagnostic>,
}

impl From<&PriorSet> for PriorReport {
    fn from(set: &PriorSet) -> Self {
        let priors = set
            .intercept_or_cellmeans
            .iter()
            .chain(&set.slopes)
            .chain(&set.residual_sd)
            .chain(&set.random_effects)
            .cloned()
            .collect();
        let diagnostics = set
            .slopes
            .iter()
            .filter_map(|p| match p.provenance {
                Provenance::Slope {
                    a,
                    b,
                    beta_hat,
                    quartic_fit_residual,
                    taylor_order,
                    ..
                } => Some(Diagnostic {
                    term: p.term.clone(),
                    a,
                    b,
                    beta_hat,
                    quartic_fit_residual,
                    taylor_order,
                }),
                _ => None,
            })
            .collect();
        Self {
            formula: set.model.to_string(),
            family: set.model.family,
            n_used: set.n_used,
            rows_dropped: set.rows_dropped,
            priors,
            diagnostics,
        }
    }
}

impl PriorReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Unsupported(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Unsupported(e.to_string()))
    }

    pub fn get(&self, term: &str) -> Option<&PriorSpec> {
        self.priors.iter().find(|p| p.term == term)
    }

    /// Aligned plain-text table, one prior per row.
    pub fn to_table(&self) -> String {
        let rows: Vec<[String; 3]> = self
            .priors
            .iter()
            .map(|p| {
                let (dist, params) = describe(&p.distribution);
                [p.term.clone(), dist.to_string(), params]
            })
            .collect();
        let header = ["term", "dist", "params"];
        let mut width = header.map(str::len);
        for r in &rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {} ({}, n = {}, dropped = {})",
            self.formula, self.family, self.n_used, self.rows_dropped
        );
        let line = |out: &mut String, cells: [&str; 3]| {
            let _ = writeln!(
                out,
                "{:<w0$}  {:<w1$}  {}",
                cells[0],
                cells[1],
                cells[2],
                w0 = width[0],
                w1 = width[1]
            );
        };
        line(&mut out, header);
        for r in &rows {
            line(&mut out, [&r[0], &r[1], &r[2]]);
        }
        out
    }
}

fn describe(d: &Distribution) -> (&'static str, String) {
    match *d {
        Distribution::Normal { mu, sigma } => ("Normal", format!("mu={mu:.6}, sigma={sigma:.6}")),
        Distribution::HalfNormal { sigma } => ("HalfNormal", format!("sigma={sigma:.6}")),
        Distribution::Uniform { lower, upper } => {
            ("Uniform", format!("lower={lower:.6}, upper={upper:.6}"))
        }
    }
}
