//! Fitted-model document: JSON with every float written to 17 significant
//! digits, so a save/load cycle is lossless.

use std::io::{self, Write};
use std::path::Path;

use mttm_core::{FitReport, ModelParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },

    #[error("malformed model document: {0}")]
    Json(#[from] serde_json::Error),

    #[error("inconsistent model document: {0}")]
    Shape(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub objective_trace: Vec<f64>,
    pub sweeps_run: usize,
    pub converged: bool,
    pub elapsed_seconds: f64,
    pub beta_clamped: bool,
}

/// On-disk form of a fitted model. `a` is m x (m-1) and `w` is m x d, both
/// flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub m: usize,
    pub d: usize,
    pub target_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub a: Vec<f64>,
    pub w: Vec<f64>,
    pub beta: f64,
    pub lambda_reg: f64,
    pub fit_report: ReportDocument,
}

impl ModelDocument {
    pub fn new(
        params: &ModelParams,
        target_names: Vec<String>,
        feature_names: Vec<String>,
        lambda_reg: f64,
        report: &FitReport,
    ) -> Self {
        ModelDocument {
            m: params.m(),
            d: params.d(),
            target_names,
            feature_names,
            a: params.a.concat(),
            w: params.w.concat(),
            beta: params.beta,
            lambda_reg,
            fit_report: ReportDocument {
                objective_trace: report.objective_trace.clone(),
                sweeps_run: report.sweeps_run,
                converged: report.converged,
                elapsed_seconds: report.elapsed_seconds,
                beta_clamped: report.beta_clamped,
            },
        }
    }

    pub fn check(&self) -> Result<(), ModelFileError> {
        let (m, d) = (self.m, self.d);
        if m == 0 {
            return Err(ModelFileError::Shape("m must be positive"));
        }
        if self.target_names.len() != m || self.feature_names.len() != d {
            return Err(ModelFileError::Shape("name lists do not match m and d"));
        }
        if self.a.len() != m * (m - 1) || self.w.len() != m * d {
            return Err(ModelFileError::Shape("coefficient arrays do not match m and d"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(ModelFileError::Shape("beta must be positive and finite"));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams, ModelFileError> {
        self.check()?;
        let (m, d) = (self.m, self.d);
        Ok(ModelParams {
            a: (0..m)
                .map(|k| self.a[k * (m - 1)..(k + 1) * (m - 1)].to_vec())
                .collect(),
            w: (0..m).map(|k| self.w[k * d..(k + 1) * d].to_vec()).collect(),
            beta: self.beta,
        })
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<(), ModelFileError> {
        let mut ser = serde_json::Serializer::with_formatter(writer, FullPrecision::default());
        self.serialize(&mut ser)?;
        let mut out = ser.into_inner();
        out.write_all(b"\n").map_err(|source| ModelFileError::Io {
            path: "<output>".into(),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        let mut buf = Vec::new();
        self.to_writer(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelFileError> {
        let io_err = |source| ModelFileError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io_err)?;
        let mut writer = io::BufWriter::new(file);
        self.to_writer(&mut writer)?;
        writer.flush().map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Self, ModelFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ModelFileError> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        doc.check()?;
        Ok(doc)
    }
}

/// Pretty JSON with floats as `d.dddddddddddddddde±x`.
struct FullPrecision(serde_json::ser::PrettyFormatter<'static>);

impl Default for FullPrecision {
    fn default() -> Self {
        FullPrecision(serde_json::ser::PrettyFormatter::with_indent(b"  "))
    }
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(writer $(, $arg)*)
            }
        )*
    };
}

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}
