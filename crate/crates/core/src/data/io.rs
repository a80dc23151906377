use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{DataError, SurvivalDataset};

/// Which CSV columns hold time, status and covariates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSchema {
    pub time_col: String,
    pub status_col: String,
    /// `None` means every column other than time and status, in file order.
    pub covariates: Option<Vec<String>>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            time_col: "time".into(),
            status_col: "status".into(),
            covariates: None,
        }
    }
}

pub fn read_csv(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<SurvivalDataset, DataError> {
    read_csv_from_reader(File::open(path)?, schema)
}

/// Parses a dataset. Error rows are reported as 1-based file line numbers.
pub fn read_csv_from_reader<R: Read>(reader: R, schema: &ColumnSchema) -> Result<SurvivalDataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_owned()))
    };
    let time_at = find(&schema.time_col)?;
    let status_at = find(&schema.status_col)?;
    let cov_at: Vec<usize> = match &schema.covariates {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_, _>>()?,
        None => (0..header.len())
            .filter(|&k| k != time_at && k != status_at)
            .collect(),
    };

    let mut time = Vec::new();
    let mut event = Vec::new();
    let mut columns = vec![Vec::new(); cov_at.len()];
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let line = r + 2;
        if record.len() != header.len() {
            return Err(DataError::RaggedRow {
                row: line,
                expected: header.len(),
                found: record.len(),
            });
        }
        let number = |k: usize| -> Result<f64, DataError> {
            let raw = &record[k];
            let v: f64 = raw.parse().map_err(|_| DataError::MalformedCell {
                row: line,
                column: header[k].clone(),
                value: raw.to_owned(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    row: line,
                    column: header[k].clone(),
                });
            }
            Ok(v)
        };
        time.push(number(time_at)?);
        let status = number(status_at).map_err(|_| DataError::InvalidStatus {
            row: line,
            value: record[status_at].to_owned(),
        })?;
        event.push(match status {
            0.0 => false,
            1.0 => true,
            _ => {
                return Err(DataError::InvalidStatus {
                    row: line,
                    value: record[status_at].to_owned(),
                })
            }
        });
        for (col, &k) in columns.iter_mut().zip(&cov_at) {
            col.push(number(k)?);
        }
    }
    let names = cov_at.iter().map(|&k| header[k].clone()).collect();
    SurvivalDataset::new(time, event, columns, names)
}

pub fn write_csv(path: impl AsRef<Path>, data: &SurvivalDataset) -> Result<(), DataError> {
    let file = std::io::BufWriter::new(File::create(path)?);
    write_csv_to_writer(file, data)
}

/// Writes `time,status,<covariates...>`. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_csv_to_writer<W: Write>(writer: W, data: &SurvivalDataset) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["time".to_owned(), "status".to_owned()];
    header.extend(data.covariate_names().iter().cloned());
    wtr.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..data.n() {
        row.clear();
        row.push(format!("{:?}", data.times()[i]));
        row.push(if data.events()[i] { "1" } else { "0" }.to_owned());
        for col in data.columns() {
            row.push(format!("{:?}", col[i]));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
