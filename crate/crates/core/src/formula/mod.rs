//! Model formulas and design-matrix assembly.

mod design;
mod parse;
mod table;

pub use design::{build_design, ColumnKind, DesignColumn, DesignData, GroupCodes, ModelFrame};
pub use parse::{parse_formula, ModelSpec, RandomExpr, RandomTerm};
pub use table::{Column, Table};

/// Name used for the constant column and its term.
pub const INTERCEPT: &str = "Intercept";
