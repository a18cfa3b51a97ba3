//! CSV tables with censored cells.
//!
//! A target cell is a plain decimal number (observed), `<v` (at most `v`),
//! `>v` (at least `v`) or `[a,b]` (between `a` and `b`). Whitespace inside a
//! cell is rejected and a header row is required. Non-target columns must be
//! plain numbers.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use mttm_core::{CensoringBound, Dataset, TargetEntry};
use thiserror::Error;

/// Name of the constant feature appended unless disabled.
pub const INTERCEPT: &str = "(intercept)";

#[derive(Debug, Error)]
pub enum TableError {
    #[error("line {line}, column '{column}': {reason}")]
    Cell { line: u64, column: String, reason: String },

    #[error("missing header row")]
    NoHeader,

    #[error("duplicate column name '{0}'")]
    DuplicateColumn(String),

    #[error("unknown column '{0}'")]
    UnknownColumn(String),

    #[error("no target columns given")]
    NoTargets,

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl TableError {
    /// Problems with the request rather than with the file's syntax.
    pub fn is_validation(&self) -> bool {
        matches!(self, TableError::UnknownColumn(_) | TableError::NoTargets)
    }
}

/// Parses one target cell.
pub fn parse_cell(text: &str) -> Result<TargetEntry, String> {
    if text.is_empty() {
        return Err("empty cell".into());
    }
    if text.chars().any(char::is_whitespace) {
        return Err(format!("whitespace inside cell '{text}'"));
    }
    if let Some(rest) = text.strip_prefix('<') {
        return Ok(TargetEntry::Censored(CensoringBound::below(parse_number(rest)?)));
    }
    if let Some(rest) = text.strip_prefix('>') {
        return Ok(TargetEntry::Censored(CensoringBound::above(parse_number(rest)?)));
    }
    if let Some(inner) = text.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
        let (a, b) = inner
            .split_once(',')
            .ok_or_else(|| format!("interval '{text}' needs two bounds"))?;
        let (a, b) = (parse_number(a)?, parse_number(b)?);
        if a >= b {
            return Err(format!("interval '{text}' must have lower < upper"));
        }
        return Ok(TargetEntry::Censored(CensoringBound { lower: a, upper: b }));
    }
    parse_number(text).map(TargetEntry::Observed)
}

/// Finite decimal with `.` separator; scientific notation allowed.
pub fn parse_number(text: &str) -> Result<f64, String> {
    let ok_chars = text
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'));
    match text.parse::<f64>() {
        Ok(v) if ok_chars && v.is_finite() => Ok(v),
        _ => Err(format!("'{text}' is not a finite number")),
    }
}

/// Inverse of [`parse_cell`]; numbers use the shortest round-trip form.
pub fn format_cell(entry: &TargetEntry) -> String {
    match *entry {
        TargetEntry::Observed(v) => format!("{v}"),
        TargetEntry::Censored(b) if b.lower == f64::NEG_INFINITY => format!("<{}", b.upper),
        TargetEntry::Censored(b) if b.upper == f64::INFINITY => format!(">{}", b.lower),
        TargetEntry::Censored(b) => format!("[{},{}]", b.lower, b.upper),
    }
}

/// A CSV table kept as raw strings, so untouched cells are written back
/// exactly as read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Which table columns feed which part of the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub targets: Vec<usize>,
    /// Table column per model feature; `None` for the intercept.
    pub features: Vec<Option<usize>>,
}

impl Table {
    pub fn read<R: Read>(reader: R) -> Result<Self, TableError> {
        let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = csv.headers()?.iter().map(String::from).collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(TableError::NoHeader);
        }
        for (j, h) in headers.iter().enumerate() {
            if headers[..j].contains(h) {
                return Err(TableError::DuplicateColumn(h.clone()));
            }
        }
        let mut rows = Vec::new();
        for record in csv.records() {
            rows.push(record?.iter().map(String::from).collect());
        }
        Ok(Table { headers, rows })
    }

    pub fn from_path(path: &Path) -> Result<Self, TableError> {
        let file = File::open(path).map_err(|source| TableError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read(file)
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<(), TableError> {
        let mut csv = csv::WriterBuilder::new().from_writer(writer);
        csv.write_record(&self.headers)?;
        for row in &self.rows {
            csv.write_record(row)?;
        }
        csv.flush().map_err(|source| TableError::Io {
            path: "<output>".into(),
            source,
        })?;
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<usize, TableError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TableError::UnknownColumn(name.into()))
    }

    /// Layout with the named targets and every other column as a feature,
    /// plus the intercept when asked.
    pub fn layout(&self, targets: &[String], intercept: bool) -> Result<Layout, TableError> {
        if targets.is_empty() {
            return Err(TableError::NoTargets);
        }
        let targets = targets.iter().map(|t| self.column(t)).collect::<Result<Vec<_>, _>>()?;
        let mut features: Vec<Option<usize>> = (0..self.headers.len())
            .filter(|j| !targets.contains(j))
            .map(Some)
            .collect();
        if intercept {
            features.push(None);
        }
        Ok(Layout { targets, features })
    }

    /// Layout reusing a fitted model's target and feature names.
    pub fn layout_for(&self, targets: &[String], features: &[String]) -> Result<Layout, TableError> {
        let targets = targets.iter().map(|t| self.column(t)).collect::<Result<Vec<_>, _>>()?;
        let features = features
            .iter()
            .map(|f| {
                if f == INTERCEPT {
                    Ok(None)
                } else {
                    self.column(f).map(Some)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Layout { targets, features })
    }

    pub fn dataset(&self, layout: &Layout) -> Result<Dataset, TableError> {
        let n = self.rows.len();
        let d = layout.features.len();
        let m = layout.targets.len();
        let mut x = Vec::with_capacity(n * d);
        let mut y = vec![TargetEntry::Observed(0.0); m * n];
        for (i, row) in self.rows.iter().enumerate() {
            let line = i as u64 + 2;
            let cell_error = |col: usize, reason: String| TableError::Cell {
                line,
                column: self.headers[col].clone(),
                reason,
            };
            for feature in &layout.features {
                x.push(match feature {
                    None => 1.0,
                    Some(col) => {
                        let text = &row[*col];
                        if text.starts_with(['<', '>', '[']) {
                            return Err(cell_error(*col, "censored value in a non-target column".into()));
                        }
                        parse_number(text).map_err(|r| cell_error(*col, r))?
                    }
                });
            }
            for (k, &col) in layout.targets.iter().enumerate() {
                y[k * n + i] = parse_cell(&row[col]).map_err(|r| cell_error(col, r))?;
            }
        }
        let target_names = layout.targets.iter().map(|&c| self.headers[c].clone()).collect();
        let feature_names = layout
            .features
            .iter()
            .map(|f| f.map_or_else(|| INTERCEPT.to_string(), |c| self.headers[c].clone()))
            .collect();
        Ok(Dataset::from_flat(n, d, x, m, y)
            .and_then(|data| data.with_names(target_names, feature_names))
            .expect("shapes follow from the layout"))
    }

    /// Copy with censored target cells replaced by `completed` (target-major,
    /// m x n) and, if `mark`, one `<target>_imputed` column per target.
    pub fn completed(&self, layout: &Layout, data: &Dataset, completed: &[f64], mark: bool) -> Table {
        let n = self.rows.len();
        let mut out = self.clone();
        if mark {
            out.headers
                .extend(layout.targets.iter().map(|&c| format!("{}_imputed", self.headers[c])));
        }
        for (i, row) in out.rows.iter_mut().enumerate() {
            let mut flags = Vec::with_capacity(layout.targets.len());
            for (k, &col) in layout.targets.iter().enumerate() {
                let censored = data.entry(k, i).is_censored();
                if censored {
                    row[col] = format!("{}", completed[k * n + i]);
                }
                flags.push(censored.to_string());
            }
            if mark {
                row.extend(flags);
            }
        }
        out
    }
}
