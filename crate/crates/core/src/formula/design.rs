use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::parse::{ModelSpec, RandomExpr};
use super::table::{Column, Table};
use super::INTERCEPT;
use crate::error::{Error, Result};
use crate::glm::Family;

#[derive(Debug, Clone, PartialEq)]
enum FrameVar {
    Numeric(Vec<f64>),
    Factor { levels: Vec<String>, codes: Vec<usize> },
}

/// The complete-case rows of every column a model uses.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFrame {
    n: usize,
    rows_dropped: usize,
    y: Vec<f64>,
    vars: BTreeMap<String, FrameVar>,
    groups: BTreeMap<String, FrameVar>,
}

fn first_bad_cell(column: &Column) -> (usize, String) {
    match column {
        Column::Categorical(v) => v
            .iter()
            .enumerate()
            .find_map(|(i, c)| c.as_ref().map(|s| (i, s.clone())))
            .unwrap_or((0, String::new())),
        Column::Numeric(_) => (0, String::new()),
    }
}

fn factor_from(column: &Column, keep: &[usize]) -> FrameVar {
    match column {
        Column::Categorical(cells) => {
            let mut levels: Vec<String> = cells.iter().flatten().cloned().collect();
            levels.sort();
            levels.dedup();
            let codes = keep
                .iter()
                .map(|&r| {
                    let s = cells[r].as_ref().expect("complete case");
                    levels.binary_search(s).expect("level present")
                })
                .collect();
            FrameVar::Factor { levels, codes }
        }
        Column::Numeric(cells) => {
            let mut values: Vec<f64> = cells.iter().flatten().copied().collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            let codes = keep
                .iter()
                .map(|&r| {
                    let v = cells[r].expect("complete case");
                    values
                        .binary_search_by(|p| p.total_cmp(&v))
                        .expect("level present")
                })
                .collect();
            FrameVar::Factor {
                levels: values.iter().map(|v| v.to_string()).collect(),
                codes,
            }
        }
    }
}

impl ModelFrame {
    /// Selects the model's columns, drops incomplete rows and checks types.
    pub fn from_table(spec: &ModelSpec, table: &Table) -> Result<Self> {
        let used = spec.used_columns();
        let mut cols: Vec<(&str, &Column)> = Vec::with_capacity(used.len());
        for name in &used {
            let c = table
                .column(name)
                .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
            cols.push((name, c));
        }

        let mut must_be_numeric: Vec<&str> = vec![spec.response.as_str()];
        for r in &spec.random_terms {
            if let RandomExpr::Column(c) = &r.expr {
                must_be_numeric.push(c);
            }
        }
        for name in must_be_numeric {
            let col = table.column(name).expect("checked above");
            if let Column::Categorical(_) = col {
                let (row, value) = first_bad_cell(col);
                return Err(Error::NonNumeric {
                    column: name.to_string(),
                    row,
                    value,
                });
            }
        }

        let keep: Vec<usize> = (0..table.n_rows())
            .filter(|&r| cols.iter().all(|(_, c)| !c.is_missing(r)))
            .collect();
        let rows_dropped = table.n_rows() - keep.len();
        if keep.is_empty() {
            return Err(Error::NoRows {
                dropped: rows_dropped,
            });
        }

        let Column::Numeric(ycol) = table.column(&spec.response).expect("checked") else {
            unreachable!("response type checked above")
        };
        let y: Vec<f64> = keep.iter().map(|&r| ycol[r].expect("complete")).collect();
        check_response(&spec.response, spec.family, &y)?;

        let groups: Vec<&str> = spec.random_terms.iter().map(|r| r.group.as_str()).collect();
        let mut vars = BTreeMap::new();
        let mut group_vars = BTreeMap::new();
        for (name, col) in cols.iter().skip(1) {
            if groups.contains(name) {
                group_vars.insert(name.to_string(), factor_from(col, &keep));
            }
            let as_predictor = spec.fixed_terms.iter().any(|t| t == name)
                || spec
                    .random_terms
                    .iter()
                    .any(|r| r.expr == RandomExpr::Column(name.to_string()));
            if as_predictor {
                let var = match col {
                    Column::Numeric(cells) => FrameVar::Numeric(
                        keep.iter().map(|&r| cells[r].expect("complete")).collect(),
                    ),
                    Column::Categorical(_) => factor_from(col, &keep),
                };
                vars.insert(name.to_string(), var);
            }
        }

        Ok(Self {
            n: keep.len(),
            rows_dropped,
            y,
            vars,
            groups: group_vars,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows_dropped(&self) -> usize {
        self.rows_dropped
    }
}

fn check_response(name: &str, family: Family, y: &[f64]) -> Result<()> {
    let bad = |reason: String| Error::ResponseType {
        column: name.to_string(),
        family: family.name(),
        reason,
    };
    match family {
        Family::Gaussian => Ok(()),
        Family::Binomial => match y.iter().find(|&&v| v != 0.0 && v != 1.0) {
            Some(v) => Err(bad(format!("value {v} is not coded 0/1"))),
            None => Ok(()),
        },
        Family::Poisson => match y.iter().find(|&&v| v < 0.0 || v.fract() != 0.0) {
            Some(v) => Err(bad(format!("value {v} is not a nonnegative integer"))),
            None => Ok(()),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnKind {
    Intercept,
    Numeric,
    Dummy { level: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignColumn {
    /// Column label, e.g. `x`, `g[b]` or `Intercept`.
    pub name: String,
    /// The formula term the column came from.
    pub term: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupCodes {
    pub levels: Vec<String>,
    pub codes: Vec<usize>,
}

/// Response vector, fixed-effect design matrix and the summary statistics
/// the prior construction needs.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignData {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub columns: Vec<DesignColumn>,
    /// Term name to the design columns it expands into, in formula order.
    pub term_columns: Vec<(String, Vec<usize>)>,
    pub group_indices: BTreeMap<String, GroupCodes>,
    pub n: usize,
    pub means_x: Vec<f64>,
    pub mean_y: f64,
    /// Sample variance of y with denominator n.
    pub var_y: f64,
    pub rows_dropped: usize,
    pub cell_means: bool,
    pub family: Family,
    spec: ModelSpec,
    frame: ModelFrame,
}

/// Assembles the design for `spec` from `table` (listwise deletion of rows
/// with missing values in any used column).
pub fn build_design(spec: &ModelSpec, table: &Table) -> Result<DesignData> {
    let frame = ModelFrame::from_table(spec, table)?;
    DesignData::from_frame(spec, frame)
}

impl DesignData {
    pub fn from_frame(spec: &ModelSpec, frame: ModelFrame) -> Result<Self> {
        let n = frame.n;
        let mut data: Vec<Vec<f64>> = Vec::new();
        let mut columns = Vec::new();
        let mut term_columns = Vec::new();

        if spec.has_intercept {
            term_columns.push((INTERCEPT.to_string(), vec![0]));
            data.push(vec![1.0; n]);
            columns.push(DesignColumn {
                name: INTERCEPT.into(),
                term: INTERCEPT.into(),
                kind: ColumnKind::Intercept,
            });
        }

        let mut full_coding_used = spec.has_intercept;
        for term in &spec.fixed_terms {
            let var = frame
                .vars
                .get(term)
                .ok_or_else(|| Error::UnknownColumn(term.clone()))?;
            let mut idx = Vec::new();
            match var {
                FrameVar::Numeric(v) => {
                    idx.push(data.len());
                    data.push(v.clone());
                    columns.push(DesignColumn {
                        name: term.clone(),
                        term: term.clone(),
                        kind: ColumnKind::Numeric,
                    });
                }
                FrameVar::Factor { levels, codes } => {
                    // Without an intercept the first factor keeps every level.
                    let skip = usize::from(full_coding_used);
                    full_coding_used = true;
                    for (li, level) in levels.iter().enumerate().skip(skip) {
                        idx.push(data.len());
                        data.push(codes.iter().map(|&c| f64::from(c == li)).collect());
                        columns.push(DesignColumn {
                            name: format!("{term}[{level}]"),
                            term: term.clone(),
                            kind: ColumnKind::Dummy {
                                level: level.clone(),
                            },
                        });
                    }
                }
            }
            term_columns.push((term.clone(), idx));
        }

        let cell_means = !spec.has_intercept
            && spec.fixed_terms.len() == 1
            && matches!(
                frame.vars.get(&spec.fixed_terms[0]),
                Some(FrameVar::Factor { .. })
            );

        let k = data.len();
        if n <= k {
            return Err(Error::TooFewRows {
                rows: n,
                columns: k,
            });
        }

        let mut group_indices = BTreeMap::new();
        for r in &spec.random_terms {
            match frame.groups.get(&r.group) {
                Some(FrameVar::Factor { levels, codes }) => {
                    group_indices.insert(
                        r.group.clone(),
                        GroupCodes {
                            levels: levels.clone(),
                            codes: codes.clone(),
                        },
                    );
                }
                _ => return Err(Error::UnknownColumn(r.group.clone())),
            }
        }

        let x = DMatrix::from_fn(n, k, |i, j| data[j][i]);
        let y = DVector::from_vec(frame.y.clone());
        let nf = n as f64;
        let means_x = data.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
        let mean_y = y.sum() / nf;
        let var_y = y.iter().map(|v| (v - mean_y).powi(2)).sum::<f64>() / nf;

        Ok(Self {
            y,
            x,
            columns,
            term_columns,
            group_indices,
            n,
            means_x,
            mean_y,
            var_y,
            rows_dropped: frame.rows_dropped,
            cell_means,
            family: spec.family,
            spec: spec.clone(),
            frame,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn frame(&self) -> &ModelFrame {
        &self.frame
    }

    /// Rebuilds the design for a different formula over the same rows.
    pub fn with_spec(&self, spec: &ModelSpec) -> Result<DesignData> {
        for t in &spec.fixed_terms {
            if !self.frame.vars.contains_key(t) {
                return Err(Error::UnknownColumn(t.clone()));
            }
        }
        DesignData::from_frame(spec, self.frame.clone())
    }

    pub fn intercept_column(&self) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.kind == ColumnKind::Intercept)
    }

    /// Design columns that receive the slope prior.
    pub fn slope_columns(&self) -> Vec<usize> {
        if self.cell_means {
            return Vec::new();
        }
        (0..self.columns.len())
            .filter(|&j| self.columns[j].kind != ColumnKind::Intercept)
            .collect()
    }

    /// Column indices for a formula term (or `Intercept`).
    pub fn columns_of(&self, term: &str) -> Option<&[usize]> {
        self.term_columns
            .iter()
            .find(|(t, _)| t == term)
            .map(|(_, c)| c.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;

    fn table() -> Table {
        Table::new()
            .with_numeric("y", &[1.0, 2.0, 3.0, 4.0, 6.0, 5.0])
            .with_numeric("x", &[0.5, 1.0, 1.5, 2.0, 2.5, 3.0])
            .with_categorical("g", &["b", "a", "c", "a", "b", "c"])
    }

    #[test]
    fn reference_coding_drops_first_sorted_level() {
        let d = build_design(&parse_formula("y ~ g").unwrap(), &table()).unwrap();
        assert_eq!(d.x.ncols(), 3);
        let names: Vec<_> = d.columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["Intercept", "g[b]", "g[c]"]);
        assert!(!d.cell_means);
        // dummy means are level proportions
        assert_eq!(d.means_x[1], 2.0 / 6.0);
    }

    #[test]
    fn cell_means_coding() {
        let d = build_design(&parse_formula("y ~ 0 + g").unwrap(), &table()).unwrap();
        assert!(d.cell_means);
        assert_eq!(d.x.ncols(), 3);
        assert!(d.intercept_column().is_none());
        assert!(d.slope_columns().is_empty());
    }

    #[test]
    fn ml_variance() {
        let t = Table::new()
            .with_numeric("y", &[1.0, 2.0, 3.0])
            .with_numeric("x", &[0.0, 1.0, 0.0]);
        let d = build_design(&parse_formula("y ~ x").unwrap(), &t).unwrap();
        assert!((d.var_y - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn listwise_deletion_counts_rows() {
        let t = Table::new()
            .with_column(
                "y",
                Column::Numeric(vec![Some(1.0), None, Some(2.0), Some(4.0), Some(3.0)]),
            )
            .with_column(
                "x",
                Column::Numeric(vec![Some(1.0), Some(2.0), None, Some(0.0), Some(1.0)]),
            )
            .with_column("unused", Column::Numeric(vec![None; 5]));
        let d = build_design(&parse_formula("y ~ x").unwrap(), &t).unwrap();
        assert_eq!(d.n, 3);
        assert_eq!(d.rows_dropped, 2);
    }

    #[test]
    fn errors() {
        let t = table();
        assert!(matches!(
            build_design(&parse_formula("y ~ z").unwrap(), &t),
            Err(Error::UnknownColumn(c)) if c == "z"
        ));
        assert!(matches!(
            build_design(&parse_formula("g ~ x").unwrap(), &t),
            Err(Error::NonNumeric { row: 0, .. })
        ));
        let bin = parse_formula("y ~ x").unwrap().with_family(Family::Binomial);
        assert!(matches!(
            build_design(&bin, &t),
            Err(Error::ResponseType { .. })
        ));
        let t2 = Table::new()
            .with_numeric("y", &[0.5, 1.0, 2.0])
            .with_numeric("x", &[1.0, 2.0, 3.0]);
        let pois = parse_formula("y ~ x").unwrap().with_family(Family::Poisson);
        assert!(matches!(
            build_design(&pois, &t2),
            Err(Error::ResponseType { .. })
        ));
        let t3 = Table::new()
            .with_column("y", Column::Numeric(vec![None, Some(1.0)]))
            .with_column("x", Column::Numeric(vec![Some(1.0), None]));
        assert!(matches!(
            build_design(&parse_formula("y ~ x").unwrap(), &t3),
            Err(Error::NoRows { dropped: 2 })
        ));
        let t4 = Table::new()
            .with_numeric("y", &[1.0, 2.0])
            .with_numeric("x", &[1.0, 2.0]);
        assert!(matches!(
            build_design(&parse_formula("y ~ x").unwrap(), &t4),
            Err(Error::TooFewRows { .. })
        ));
    }

    #[test]
    fn grouping_codes() {
        let t = table().with_numeric("site", &[2.0, 1.0, 2.0, 1.0, 3.0, 3.0]);
        let d = build_design(&parse_formula("y ~ x + (1|site)").unwrap(), &t).unwrap();
        let g = &d.group_indices["site"];
        assert_eq!(g.levels, ["1", "2", "3"]);
        assert_eq!(g.codes, [1, 0, 1, 0, 2, 2]);
    }
}
