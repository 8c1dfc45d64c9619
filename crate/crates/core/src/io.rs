//! CSV ingestion and output, plus the JSON run report.
//!
//! Input CSVs are one column per channel, one row per time step, with an
//! optional header row naming the channels. Tables are written with 17
//! significant digits so every `f64` survives a write/read roundtrip.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TimeSeries;
use crate::numerics::DenseMatrix;

pub const SCHEMA_VERSION: u32 = 1;

/// Reads a numeric CSV into an `N × p` series, rows in file order.
///
/// Row numbers in errors are 1-based file lines; columns are 1-based.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<TimeSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv(file, has_header)
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R, has_header: bool) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let names = if has_header {
        Some(
            rdr.headers()
                .map_err(csv_error)?
                .iter()
                .map(str::to_owned)
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };

    let mut width = names.as_ref().map(Vec::len);
    let mut rows = 0;
    let mut data = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRows {
                row: line,
                expected,
                found: record.len(),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row: line,
                column: j + 1,
                message: format!("not a number: {field:?}"),
            })?;
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            message: "no data rows".into(),
        });
    }
    let series = TimeSeries::new(DenseMatrix::new(rows, width.unwrap_or(0), data)?)?;
    match names {
        Some(n) => series.with_channel_names(n),
        None => Ok(series),
    }
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io.to_string()),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => Error::RaggedRows {
            row,
            expected: expected_len as usize,
            found: len as usize,
        },
        other => Error::Parse {
            row,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Formats a float with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Cell of an output table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell<'a> {
    Int(u64),
    Float(f64),
    Text(&'a str),
}

impl std::fmt::Display for Cell<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(i) => write!(f, "{i}"),
            Cell::Float(v) => f.write_str(&format_f64(*v)),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

/// Writes a header row and data rows.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<Cell<'_>>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::DimensionMismatch(format!(
                "table row has {} cells for {} columns",
                row.len(),
                header.len()
            )));
        }
        w.write_record(row.iter().map(|c| c.to_string()))
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a series with a header of channel names (`y1, y2, …` if unnamed).
pub fn write_series<W: Write>(out: W, y: &TimeSeries) -> Result<()> {
    let names: Vec<String> = match &y.channel_names {
        Some(n) => n.clone(),
        None => (1..=y.channels()).map(|j| format!("y{j}")).collect(),
    };
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    let rows: Vec<Vec<Cell>> = (0..y.len())
        .map(|t| y.row(t).iter().map(|&v| Cell::Float(v)).collect())
        .collect();
    write_table(out, &header, &rows)
}

pub fn write_series_file(path: impl AsRef<Path>, y: &TimeSeries) -> Result<()> {
    write_series(create(path.as_ref())?, y)
}

pub fn write_table_file(
    path: impl AsRef<Path>,
    header: &[&str],
    rows: &[Vec<Cell<'_>>],
) -> Result<()> {
    write_table(create(path.as_ref())?, header, rows)
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Fitted parameters as stored in a report; `predict` reads them back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FittedModel {
    Ar { theta: Vec<f64> },
    Var1 { a: DenseMatrix },
    Nar(crate::nar::NarModel),
}

/// Machine-readable summary of one run.
///
/// Everything except `timings` is a pure function of the echoed config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub config: crate::experiment::ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<FittedModel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_history: Vec<crate::linear::LossBreakdown>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations_run: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    /// Scalar results by name, e.g. `e_norm_theta`, `test_mse_final`.
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    /// Companion eigenvalues as `[re, im]` pairs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eigenvalues: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_scan: Option<crate::selection::OrderScanReport>,
    /// Files written next to the report.
    #[serde(default)]
    pub outputs: Vec<String>,
    /// Wall-clock seconds by phase.
    #[serde(default)]
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new(command: &str, config: crate::experiment::ExperimentConfig) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            command: command.to_owned(),
            config,
            model: None,
            loss_history: Vec::new(),
            iterations_run: None,
            converged: None,
            metrics: BTreeMap::new(),
            eigenvalues: Vec::new(),
            order_scan: None,
            outputs: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: RunReport = serde_json::from_str(text).map_err(|e| Error::Parse {
            row: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "report schema version {} is not supported (expected {SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        Ok(report)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = create(path.as_ref())?;
        f.write_all(self.to_json()?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, header: bool) -> Result<TimeSeries> {
        read_csv(s.as_bytes(), header)
    }

    #[test]
    fn single_column() {
        let y = parse("1\n2\n3\n", false).unwrap();
        assert_eq!((y.len(), y.channels()), (3, 1));
        assert_eq!(y.scalar_values().unwrap(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_columns() {
        let y = parse("1,2\n3,4\n", false).unwrap();
        assert_eq!((y.len(), y.channels()), (2, 2));
        assert_eq!(y.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn header_names_channels() {
        let y = parse("fp1, fp2\n1,2\n3,4\n", true).unwrap();
        assert_eq!(
            y.channel_names.as_deref(),
            Some(&["fp1".to_string(), "fp2".to_string()][..])
        );
        assert_eq!(y.len(), 2);
    }

    #[test]
    fn bad_cell_located() {
        match parse("1,2\n3,x\n", false) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_rows() {
        match parse("1,2\n3\n", false) {
            Err(Error::RaggedRows {
                row,
                expected,
                found,
            }) => {
                assert_eq!((row, expected, found), (2, 2, 1))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_only_is_an_error() {
        assert!(matches!(parse("a,b\n", true), Err(Error::Parse { .. })));
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(format_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(format_f64(-2.0), "-2.0000000000000000e0");
    }

    #[test]
    fn table_width_checked() {
        let mut buf = Vec::new();
        assert!(write_table(&mut buf, &["a", "b"], &[vec![Cell::Int(1)]]).is_err());
    }
}
