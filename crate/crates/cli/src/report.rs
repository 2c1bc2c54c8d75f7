//! Report rows and their CSV / JSON encodings.
//!
//! CSV files start with a `# schema=...` comment line, followed by the header
//! and one record per row; trailing `# ` lines carry notes. JSON output is a
//! single object holding the same rows plus the notes.

use std::fmt;
use std::io::Write;
use std::path::Path;

use ota_core::privacy::InfoValue;
use ota_core::ModelSpec;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::config::Format;
use crate::error::CliError;

pub const SCHEMA_V1: &str = "v1";
pub const VERIFY_SCHEMA_V1: &str = "verify-v1";

/// An information quantity in nats, or the explicit `unbounded` marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfoCell(pub InfoValue);

impl Serialize for InfoCell {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            InfoValue::Finite(v) => serializer.serialize_f64(v),
            InfoValue::Unbounded => serializer.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for InfoCell {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct CellVisitor;

        impl Visitor<'_> for CellVisitor {
            type Value = InfoCell;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or \"unbounded\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<InfoCell, E> {
                Ok(InfoCell(InfoValue::Finite(v)))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<InfoCell, E> {
                Ok(InfoCell(InfoValue::Finite(v as f64)))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<InfoCell, E> {
                Ok(InfoCell(InfoValue::Finite(v as f64)))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<InfoCell, E> {
                if v == "unbounded" {
                    Ok(InfoCell(InfoValue::Unbounded))
                } else {
                    v.parse::<f64>()
                        .map(|x| InfoCell(InfoValue::Finite(x)))
                        .map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }

        deserializer.deserialize_any(CellVisitor)
    }
}

/// One experiment row (CSV schema v1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    /// Family name; Gaussian rows also carry `sigma_sq` and `B`.
    pub model: String,
    pub n: usize,
    pub d: usize,
    pub m: Option<usize>,
    #[serde(rename = "P")]
    pub power: f64,
    pub sigma0_sq: f64,
    pub epsilon: Option<f64>,
    pub sigma_pri_sq: f64,
    pub branch: String,
    pub risk_closed: f64,
    pub risk_mc: Option<f64>,
    pub risk_mc_stderr: Option<f64>,
    pub mi_bound: InfoCell,
    pub mi_exact: Option<InfoCell>,
    pub cmi_bound: Option<InfoCell>,
    pub trials: Option<usize>,
    pub seed: u64,
}

/// Model column text. Gaussian hyper-parameters are embedded so that every
/// row is self-describing.
pub fn model_label(model: &ModelSpec) -> String {
    match *model {
        ModelSpec::GaussianLocation { sigma_sq, bound } => format!("gaussian(sigma_sq={sigma_sq};B={bound})"),
        _ => model.name().to_string(),
    }
}

/// Inverse of [`model_label`], with `m` taken from its own column.
pub fn parse_model_label(label: &str, m: Option<usize>) -> Result<ModelSpec, CliError> {
    let bad = || CliError::Config(format!("unrecognised model column `{label}`"));
    match label {
        "bernoulli" => Ok(ModelSpec::ProductBernoulli),
        "sparse" => Ok(ModelSpec::SparseBernoulli { m: m.ok_or_else(bad)? }),
        _ => {
            let inner = label
                .strip_prefix("gaussian(")
                .and_then(|s| s.strip_suffix(')'))
                .ok_or_else(bad)?;
            let (mut sigma_sq, mut bound) = (None, None);
            for part in inner.split(';') {
                let (key, value) = part.split_once('=').ok_or_else(bad)?;
                let value: f64 = value.parse().map_err(|_| bad())?;
                match key {
                    "sigma_sq" => sigma_sq = Some(value),
                    "B" => bound = Some(value),
                    _ => return Err(bad()),
                }
            }
            Ok(ModelSpec::GaussianLocation {
                sigma_sq: sigma_sq.ok_or_else(bad)?,
                bound: bound.ok_or_else(bad)?,
            })
        }
    }
}

/// Oracle verdict flattened for tabular output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub name: String,
    pub analytic: String,
    pub oracle: String,
    pub gap: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub note: String,
}

impl From<&ota_core::oracle::OracleVerdict> for VerdictRow {
    fn from(v: &ota_core::oracle::OracleVerdict) -> Self {
        let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        Self {
            name: v.name.clone(),
            analytic: join(&v.analytic_value),
            oracle: join(&v.oracle_value),
            gap: v.gap,
            tolerance: v.tolerance,
            pass: v.pass,
            note: v.note.clone().unwrap_or_default(),
        }
    }
}

/// Reference scaling constants printed in report footers. These are not
/// computed by any scheme in this crate.
pub fn reference_notes() -> Vec<String> {
    vec![
        "reference scaling under CMI <= eps, digital vs robust over-the-air:".into(),
        "  gaussian: digital d^2*sigma^2/(n*eps); over-the-air d^2*sigma^2/(n^2*eps)".into(),
        "  bernoulli: digital d^2/(n*eps); over-the-air tabulated as d^2/(n^2*eps^2)".into(),
        "  sparse (m/d <= 1/2): digital m^2*log(d)/(n*eps) when n*eps >= d*log(d); over-the-air m*d/(n^2*eps)".into(),
        "note: the bernoulli robust closed form behaves as d^2/(n^2*eps) in its low-noise branch, \
         not d^2/(n^2*eps^2) as tabulated; scaling fits compare against the closed form"
            .into(),
        "units: all information quantities in nats".into(),
    ]
}

/// Serializes a report to bytes in the requested format.
pub fn render<T: Serialize>(
    schema: &str,
    rows: &[T],
    notes: &[String],
    extras: Option<Value>,
    format: Format,
) -> Result<Vec<u8>, CliError> {
    let out_err = |e: &dyn fmt::Display| CliError::Output(e.to_string());
    match format {
        Format::Csv => {
            let mut buf = format!("# schema={schema}\n").into_bytes();
            {
                let mut writer = csv::Writer::from_writer(&mut buf);
                for row in rows {
                    writer.serialize(row).map_err(|e| out_err(&e))?;
                }
                writer.flush().map_err(|e| out_err(&e))?;
            }
            for note in notes {
                for line in note.lines() {
                    writeln!(buf, "# {line}").map_err(|e| out_err(&e))?;
                }
            }
            Ok(buf)
        }
        Format::Json => {
            let mut doc = serde_json::Map::new();
            doc.insert("schema".into(), Value::from(schema));
            doc.insert("rows".into(), serde_json::to_value(rows).map_err(|e| out_err(&e))?);
            if let Some(Value::Object(extra)) = extras {
                doc.extend(extra);
            }
            doc.insert("notes".into(), Value::from(notes.to_vec()));
            let mut buf = serde_json::to_vec_pretty(&Value::Object(doc)).map_err(|e| out_err(&e))?;
            buf.push(b'\n');
            Ok(buf)
        }
    }
}

/// Writes rendered bytes to `path`, or to stdout when no path is given.
pub fn emit(bytes: &[u8], path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

/// Parses schema-v1 CSV text back into rows, skipping comment lines.
pub fn read_csv_rows(text: &str) -> Result<Vec<Row>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    reader
        .deserialize()
        .collect::<Result<Vec<Row>, _>>()
        .map_err(|e| CliError::Config(format!("malformed report: {e}")))
}
