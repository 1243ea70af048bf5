//! Default priors for generalized linear (mixed) model coefficients.
//!
//! Slope priors are Normal with a variance chosen so that, had the prior been
//! placed on the generalized partial correlation of each predictor instead,
//! it would have standard deviation `sigma_rho`. The pipeline is:
//!
//! 1. fit the model by maximum likelihood ([`glm`]),
//! 2. fit a symmetric quartic to the profile log-likelihood of each slope and
//!    invert the correlation/coefficient relation ([`pcorr`]),
//! 3. propagate a scaled-Beta distribution on the correlation through that
//!    inversion with a truncated Taylor expansion ([`taylor`]),
//! 4. assemble slope, intercept, residual and random-effect priors ([`priors`]).

pub mod error;
pub mod formula;
pub mod glm;
pub mod pcorr;
pub mod priors;
pub mod report;
mod series;
pub mod sim;
pub mod taylor;

pub use error::{Error, Result};
pub use formula::{build_design, parse_formula, DesignData, ModelSpec, Table};
pub use glm::{fit_glm, Family, FitResult};
pub use pcorr::QuarticProfile;
pub use priors::{build_all_priors, Distribution, PriorOptions, PriorSet, PriorSpec, Provenance};
pub use report::PriorReport;
pub use taylor::{RhoScale, ScaleLabel, TaylorConfig};
