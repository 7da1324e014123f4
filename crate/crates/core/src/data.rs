//! Numeric datasets with a designated response in (0, 1).

use std::io::Read;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed CSV at row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    Parse { row: usize, column: String, value: String },
    #[error("row {row}, column '{column}': missing value")]
    Missing { row: usize, column: String },
    #[error("no data rows")]
    NoRows,
    #[error("at least 2 rows are required, found {0}")]
    TooFewRows(usize),
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("duplicate column '{0}'")]
    DuplicateColumn(String),
    #[error("response '{column}' must lie strictly inside (0, 1); offending rows: {rows:?}")]
    ResponseOutOfRange { column: String, rows: Vec<usize> },
}

/// Column-major numeric table. Row numbers in errors are 1-based data rows
/// (the header is not counted).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    response: usize,
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, response: &str) -> Result<Self, DataError> {
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(DataError::DuplicateColumn(n.clone()));
            }
        }
        let response_idx =
            names.iter().position(|n| n == response).ok_or_else(|| DataError::UnknownColumn(response.into()))?;
        let n = columns.first().map_or(0, Vec::len);
        assert_eq!(names.len(), columns.len(), "one name per column");
        assert!(columns.iter().all(|c| c.len() == n), "columns have equal length");
        if n == 0 {
            return Err(DataError::NoRows);
        }
        if n < 2 {
            return Err(DataError::TooFewRows(n));
        }
        for (name, col) in names.iter().zip(&columns) {
            if let Some(r) = col.iter().position(|v| v.is_nan()) {
                return Err(DataError::Missing { row: r + 1, column: name.clone() });
            }
        }
        let bad: Vec<usize> = columns[response_idx]
            .iter()
            .enumerate()
            .filter(|(_, &y)| !(y > 0.0 && y < 1.0))
            .map(|(r, _)| r + 1)
            .collect();
        if !bad.is_empty() {
            return Err(DataError::ResponseOutOfRange { column: response.into(), rows: bad });
        }
        Ok(Self { names, columns, response: response_idx })
    }

    pub fn from_path(path: impl AsRef<Path>, response: &str) -> Result<Self, DataError> {
        let path = path.as_ref();
        let file =
            std::fs::File::open(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
        Self::from_reader(file, response)
    }

    pub fn from_reader<R: Read>(reader: R, response: &str) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| DataError::Csv { row: 0, message: e.to_string() })?
            .iter()
            .map(str::to_string)
            .collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (r, record) in rdr.records().enumerate() {
            let row = r + 1;
            let record = record.map_err(|e| DataError::Csv { row, message: e.to_string() })?;
            for (j, name) in names.iter().enumerate() {
                let field = record.get(j).unwrap_or("");
                if field.is_empty() || field.eq_ignore_ascii_case("na") || field.eq_ignore_ascii_case("nan") {
                    return Err(DataError::Missing { row, column: name.clone() });
                }
                let v: f64 = field.parse().map_err(|_| DataError::Parse {
                    row,
                    column: name.clone(),
                    value: field.to_string(),
                })?;
                columns[j].push(v);
            }
        }
        Self::new(names, columns, response)
    }

    pub fn n(&self) -> usize {
        self.columns[0].len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn response_name(&self) -> &str {
        &self.names[self.response]
    }

    pub fn response(&self) -> &[f64] {
        &self.columns[self.response]
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|j| self.columns[j].as_slice())
    }

    /// Values of `names` at row `t`, in the order given.
    pub fn row_values(&self, t: usize, names: &[usize]) -> Vec<f64> {
        names.iter().map(|&j| self.columns[j][t]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Copy without the given 0-based rows.
    pub fn without_rows(&self, drop: &[usize]) -> Result<Self, DataError> {
        let keep: Vec<usize> = (0..self.n()).filter(|t| !drop.contains(t)).collect();
        self.select_rows(&keep)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self, DataError> {
        let columns = self.columns.iter().map(|c| rows.iter().map(|&t| c[t]).collect()).collect();
        Self::new(self.names.clone(), columns, self.response_name())
    }

    /// Same covariates with a replaced response vector.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Self, DataError> {
        assert_eq!(y.len(), self.n());
        let mut columns = self.columns.clone();
        columns[self.response] = y;
        Self::new(self.names.clone(), columns, self.response_name())
    }
}
