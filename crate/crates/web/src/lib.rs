//! WebAssembly bindings for the static demo page in `www/`.

use prior_forge::pcorr::beta_from_rho;
use prior_forge::{
    build_all_priors, parse_formula, sim, Family, PriorOptions, PriorReport, QuarticProfile,
    RhoScale, Table,
};
use wasm_bindgen::prelude::*;

fn js(e: prior_forge::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Samples the coefficient implied by each correlation for the quartic
/// `a d^4 + b d^2`, returned flat as `[rho_0, beta_0, rho_1, beta_1, ...]`.
///
/// The correlations span the open interval the profile can reach.
#[wasm_bindgen]
pub fn inversion_curve(
    a: f64,
    b: f64,
    beta_hat: f64,
    n: usize,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    let q = QuarticProfile::new(a, b, beta_hat, 0.0, n).map_err(js)?;
    let edge = q.rho_max() * 0.999;
    let points = points.max(2);
    let mut out = Vec::with_capacity(2 * points);
    for i in 0..points {
        let rho = -edge + 2.0 * edge * i as f64 / (points - 1) as f64;
        out.push(rho);
        out.push(beta_from_rho(rho, &q).map_err(js)?);
    }
    Ok(out)
}

/// Taylor versus Monte Carlo SDs on the representative profile, as TSV.
#[wasm_bindgen]
pub fn taylor_sd_table(draws: usize, seed: u64) -> Result<String, JsError> {
    let rows = sim::taylor_sd(seed, draws, None).map_err(js)?;
    Ok(sim::taylor_sd_tsv(&rows))
}

/// Prior report for a CSV document, as pretty JSON.
#[wasm_bindgen]
pub fn priors_json(
    csv: &str,
    formula: &str,
    family: &str,
    sigma_rho: f64,
) -> Result<String, JsError> {
    let family: Family = family.parse().map_err(|e: String| JsError::new(&e))?;
    let spec = parse_formula(formula).map_err(js)?.with_family(family);
    let table = Table::from_csv_reader(csv.as_bytes()).map_err(js)?;
    let options = PriorOptions {
        default_scale: RhoScale::new(sigma_rho).map_err(js)?,
        ..Default::default()
    };
    let set = build_all_priors(&spec, &table, &options).map_err(js)?;
    PriorReport::from(&set).to_json().map_err(js)
}
