use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// One column of a dataset. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Numeric(v) => v[row].is_none(),
            Column::Categorical(v) => v[row].is_none(),
        }
    }
}

/// A columnar dataset with named columns of equal length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    names: Vec<String>,
    columns: Vec<Column>,
    rows: usize,
}

fn is_missing_token(s: &str) -> bool {
    matches!(s, "" | "NA" | "NaN" | "nan" | "null")
}

impl Table {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a column. Panics if its length disagrees with existing columns.
    pub fn with_column(mut self, name: impl Into<String>, column: Column) -> Self {
        if !self.columns.is_empty() {
            assert_eq!(column.len(), self.rows, "column length mismatch");
        }
        self.rows = column.len();
        self.names.push(name.into());
        self.columns.push(column);
        self
    }

    pub fn with_numeric(self, name: impl Into<String>, values: &[f64]) -> Self {
        self.with_column(name, Column::Numeric(values.iter().map(|&v| Some(v)).collect()))
    }

    pub fn with_categorical<S: AsRef<str>>(self, name: impl Into<String>, values: &[S]) -> Self {
        self.with_column(
            name,
            Column::Categorical(values.iter().map(|v| Some(v.as_ref().to_string())).collect()),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::Table(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_csv_reader(file)
    }

    /// Reads a header-first CSV. A column whose non-missing cells all parse as
    /// finite numbers is numeric; anything else is categorical.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Table(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        for (i, h) in headers.iter().enumerate() {
            if headers[..i].contains(h) {
                return Err(Error::Table(format!("duplicate column name `{h}`")));
            }
        }
        let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); headers.len()];
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Table(e.to_string()))?;
            for (col, field) in raw.iter_mut().zip(record.iter()) {
                col.push((!is_missing_token(field)).then(|| field.to_string()));
            }
        }

        let mut table = Table::new();
        for (name, cells) in headers.into_iter().zip(raw) {
            let parsed: Option<Vec<Option<f64>>> = cells
                .iter()
                .map(|c| match c {
                    None => Some(None),
                    Some(s) => s.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some),
                })
                .collect();
            let column = match parsed {
                Some(nums) => Column::Numeric(nums),
                None => Column::Categorical(cells),
            };
            table = table.with_column(name, column);
        }
        Ok(table)
    }
}
