use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("formula syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("duplicate term `{0}` in formula")]
    DuplicateTerm(String),
    #[error("response `{0}` cannot also be used as a predictor")]
    ResponseAsPredictor(String),

    #[error("failed to read table: {0}")]
    Table(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{column}` must be numeric but row {row} holds `{value}`")]
    NonNumeric {
        column: String,
        row: usize,
        value: String,
    },
    #[error("response `{column}` is not valid for the {family} family: {reason}")]
    ResponseType {
        column: String,
        family: &'static str,
        reason: String,
    },
    #[error("no complete rows remain after dropping {dropped} rows with missing values")]
    NoRows { dropped: usize },
    #[error("{rows} rows is not enough for {columns} design columns")]
    TooFewRows { rows: usize, columns: usize },

    #[error("design matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },
    #[error("model fit did not converge after {iterations} iterations: {reason}")]
    NotConverged { iterations: usize, reason: String },
    #[error("numeric domain error: {0}")]
    Domain(String),

    #[error("log-likelihood ratio {0} is negative; the full model fits worse than the reduced one")]
    NegativeLogLambda(f64),
    #[error("auxiliary R² {0} is not in [0, 1)")]
    Collinear(f64),
    #[error("profile is not concave: fitted quadratic coefficient b = {b}")]
    NotConcave { b: f64 },
    #[error("profile evaluation points do not span a quartic basis")]
    DegenerateBasis,
    #[error("|rho| = {rho} exceeds the largest value {rho_max} representable by this profile")]
    Discriminant { rho: f64, rho_max: f64 },

    #[error("invalid prior scale: {0}")]
    InvalidScale(String),
    #[error("invalid Taylor configuration: {0}")]
    InvalidTaylor(String),
    #[error("Taylor variance {0} is not positive")]
    NonPositiveVariance(f64),

    #[error("cell `{0}` has no observations")]
    EmptyCell(String),
    #[error("response has zero variance")]
    DegenerateResponse,
    #[error("grouping factor `{group}` has {levels} level(s); at least 2 are required")]
    TooFewGroups { group: String, levels: usize },
    #[error("{0}")]
    Unsupported(String),

    #[error("{} terms failed: {}", .0.len(), join(.0))]
    Aggregate(Vec<Error>),
    #[error("term `{term}`: {source}")]
    Term {
        term: String,
        #[source]
        source: Box<Error>,
    },
}

fn join(errors: &[Error]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn in_term(self, term: &str) -> Error {
        match self {
            e @ Error::Term { .. } => e,
            e => Error::Term {
                term: term.to_string(),
                source: Box::new(e),
            },
        }
    }

    /// True for errors caused by a malformed formula rather than by the data.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. } | Error::DuplicateTerm(_) | Error::ResponseAsPredictor(_)
        )
    }
}
