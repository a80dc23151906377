//! Right-censored survival data.
//!
//! A [`SurvivalDataset`] holds the observed follow-up time `X_i = min(T_i, C_i)`,
//! the event indicator and `p` time-constant covariates per subject. Covariates
//! are stored column-major because every consumer in this crate (marginal and
//! conditional fits, rank statistics) walks one or a few columns at a time.

mod io;

pub use io::{read_csv, read_csv_from_reader, write_csv, write_csv_to_writer, ColumnSchema};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("need at least one covariate")]
    NoCovariates,
    #[error("{what}: expected length {expected}, got {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: negative time {time}")]
    NegativeTime { row: usize, time: f64 },
    #[error("row {row}, column '{column}': non-finite value")]
    NonFinite { row: usize, column: String },
    #[error("no events: every observation is censored")]
    NoEvents,
    #[error("column '{0}' is constant")]
    ConstantColumn(String),
    #[error("missing required column '{0}'")]
    MissingColumn(String),
    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    MalformedCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: status must be 0 or 1, got '{value}'")]
    InvalidStatus { row: usize, value: String },
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("covariate index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("covariate index {0} listed twice in conditioning set")]
    DuplicateIndex(usize),
    #[error("conditioning set of size {q} is too large for n = {n}")]
    ConditioningTooLarge { q: usize, n: usize },
    #[error("unknown covariate '{0}'")]
    UnknownCovariate(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One subject: follow-up time, event indicator and covariate vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub event: bool,
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    time: Vec<f64>,
    event: Vec<bool>,
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
    sorted_index: Vec<usize>,
}

impl SurvivalDataset {
    /// Builds a dataset from column-major covariates.
    ///
    /// Enforces the structural invariants (`n >= 2`, `p >= 1`, equal lengths,
    /// finite non-negative times, finite covariates). Having at least one event
    /// is checked by [`SurvivalDataset::validate`], not here.
    pub fn new(
        time: Vec<f64>,
        event: Vec<bool>,
        columns: Vec<Vec<f64>>,
        names: Vec<String>,
    ) -> Result<Self, DataError> {
        let n = time.len();
        if n < 2 {
            return Err(DataError::TooFewObservations(n));
        }
        if columns.is_empty() {
            return Err(DataError::NoCovariates);
        }
        check_len("event indicators", n, event.len())?;
        check_len("covariate names", columns.len(), names.len())?;
        for (i, &t) in time.iter().enumerate() {
            if !t.is_finite() {
                return Err(DataError::NonFinite {
                    row: i,
                    column: "time".into(),
                });
            }
            if t < 0.0 {
                return Err(DataError::NegativeTime { row: i, time: t });
            }
        }
        for (col, name) in columns.iter().zip(&names) {
            check_len("covariate column", n, col.len())?;
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFinite {
                    row,
                    column: name.clone(),
                });
            }
        }
        let sorted_index = time_order(&time, &event);
        Ok(Self {
            time,
            event,
            columns,
            names,
            sorted_index,
        })
    }

    /// Same as [`SurvivalDataset::new`] with names `z1..zp`.
    pub fn from_columns(
        time: Vec<f64>,
        event: Vec<bool>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self, DataError> {
        let names = default_names(columns.len());
        Self::new(time, event, columns, names)
    }

    pub fn from_observations(
        observations: &[Observation],
        names: Vec<String>,
    ) -> Result<Self, DataError> {
        let p = names.len();
        let mut columns = vec![Vec::with_capacity(observations.len()); p];
        for (i, obs) in observations.iter().enumerate() {
            if obs.covariates.len() != p {
                return Err(DataError::RaggedRow {
                    row: i,
                    expected: p,
                    found: obs.covariates.len(),
                });
            }
            for (col, &v) in columns.iter_mut().zip(&obs.covariates) {
                col.push(v);
            }
        }
        Self::new(
            observations.iter().map(|o| o.time).collect(),
            observations.iter().map(|o| o.event).collect(),
            columns,
            names,
        )
    }

    pub fn n(&self) -> usize {
        self.time.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.time
    }

    pub fn events(&self) -> &[bool] {
        &self.event
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, j: usize) -> &str {
        &self.names[j]
    }

    /// Subject indices by ascending time; at tied times events come first.
    pub fn sorted_index(&self) -> &[usize] {
        &self.sorted_index
    }

    pub fn observation(&self, i: usize) -> Observation {
        Observation {
            time: self.time[i],
            event: self.event[i],
            covariates: self.columns.iter().map(|c| c[i]).collect(),
        }
    }

    pub fn event_count(&self) -> usize {
        self.event.iter().filter(|&&e| e).count()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Returns a copy with one more covariate column appended.
    pub fn with_column(&self, name: impl Into<String>, values: Vec<f64>) -> Result<Self, DataError> {
        let mut columns = self.columns.clone();
        let mut names = self.names.clone();
        columns.push(values);
        names.push(name.into());
        Self::new(self.time.clone(), self.event.clone(), columns, names)
    }

    /// Returns a copy with column `j` replaced.
    pub fn with_column_replaced(&self, j: usize, values: Vec<f64>) -> Result<Self, DataError> {
        if j >= self.p() {
            return Err(DataError::IndexOutOfRange { index: j, p: self.p() });
        }
        let mut columns = self.columns.clone();
        columns[j] = values;
        Self::new(self.time.clone(), self.event.clone(), columns, self.names.clone())
    }

    /// Checks the data is usable for screening and summarizes it.
    pub fn validate(&self) -> Result<ValidationReport, DataError> {
        let events = self.event_count();
        if events == 0 {
            return Err(DataError::NoEvents);
        }
        let constant_columns = self
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.iter().all(|&v| v == c[0]))
            .map(|(j, _)| j)
            .collect();
        let mut tied_times = 0;
        let sorted = &self.sorted_index;
        let mut k = 0;
        while k < sorted.len() {
            let t = self.time[sorted[k]];
            let mut end = k + 1;
            while end < sorted.len() && self.time[sorted[end]] == t {
                end += 1;
            }
            if end - k > 1 {
                tied_times += 1;
            }
            k = end;
        }
        Ok(ValidationReport {
            n: self.n(),
            p: self.p(),
            events,
            censored: self.n() - events,
            constant_columns,
            tied_times,
        })
    }

    pub fn risk_sets(&self) -> RiskSetView {
        RiskSetView::new(self)
    }

    /// Centers every covariate and scales it to unit sample variance
    /// (denominator `n - 1`).
    pub fn standardize(&self) -> Result<(SurvivalDataset, ScalingInfo), DataError> {
        let n = self.n() as f64;
        let mut means = Vec::with_capacity(self.p());
        let mut scales = Vec::with_capacity(self.p());
        let mut columns = Vec::with_capacity(self.p());
        for (col, name) in self.columns.iter().zip(&self.names) {
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let sd = var.sqrt();
            if !(sd > 0.0) || col.iter().all(|&v| v == col[0]) {
                return Err(DataError::ConstantColumn(name.clone()));
            }
            columns.push(col.iter().map(|v| (v - mean) / sd).collect());
            means.push(mean);
            scales.push(sd);
        }
        let data = Self {
            time: self.time.clone(),
            event: self.event.clone(),
            columns,
            names: self.names.clone(),
            sorted_index: self.sorted_index.clone(),
        };
        Ok((data, ScalingInfo { means, scales }))
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), DataError> {
    if expected != found {
        return Err(DataError::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

pub(crate) fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("z{j}")).collect()
}

fn time_order(time: &[f64], event: &[bool]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..time.len()).collect();
    idx.sort_by(|&a, &b| {
        time[a]
            .total_cmp(&time[b])
            .then(event[b].cmp(&event[a]))
            .then(a.cmp(&b))
    });
    idx
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub n: usize,
    pub p: usize,
    pub events: usize,
    pub censored: usize,
    /// Indices of columns whose values are all identical.
    pub constant_columns: Vec<usize>,
    /// Number of distinct time values shared by more than one observation.
    pub tied_times: usize,
}

/// Per-column location and scale removed by [`SurvivalDataset::standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingInfo {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl ScalingInfo {
    /// Maps a standardized value of column `j` back to the original scale.
    pub fn unscale(&self, j: usize, value: f64) -> f64 {
        value * self.scales[j] + self.means[j]
    }

    /// Maps a coefficient fitted on standardized column `j` to the original scale.
    pub fn coefficient_to_original(&self, j: usize, beta: f64) -> f64 {
        beta / self.scales[j]
    }
}

/// The set `C` of covariates known a priori to matter (0-based, ascending).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConditioningSet {
    indices: Vec<usize>,
}

impl ConditioningSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates `indices` against a dataset with `p` covariates and `n` rows.
    pub fn new(mut indices: Vec<usize>, p: usize, n: usize) -> Result<Self, DataError> {
        indices.sort_unstable();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(DataError::DuplicateIndex(w[0]));
            }
        }
        if let Some(&bad) = indices.iter().find(|&&j| j >= p) {
            return Err(DataError::IndexOutOfRange { index: bad, p });
        }
        if indices.len() >= n {
            return Err(DataError::ConditioningTooLarge {
                q: indices.len(),
                n,
            });
        }
        Ok(Self { indices })
    }

    pub fn for_dataset(indices: Vec<usize>, data: &SurvivalDataset) -> Result<Self, DataError> {
        Self::new(indices, data.p(), data.n())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }
}

/// Distinct event times with tie multiplicities and their risk sets.
///
/// Risk sets are nested, so each is stored as a suffix of the time-sorted
/// subject order.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSetView {
    pub event_times: Vec<f64>,
    pub event_counts: Vec<usize>,
    risk_start: Vec<usize>,
    order: Vec<usize>,
}

impl RiskSetView {
    fn new(data: &SurvivalDataset) -> Self {
        let order = data.sorted_index().to_vec();
        let time = data.times();
        let mut event_times = Vec::new();
        let mut event_counts = Vec::new();
        let mut risk_start = Vec::new();
        let mut k = 0;
        while k < order.len() {
            let t = time[order[k]];
            let mut end = k;
            let mut deaths = 0;
            while end < order.len() && time[order[end]] == t {
                if data.events()[order[end]] {
                    deaths += 1;
                }
                end += 1;
            }
            if deaths > 0 {
                event_times.push(t);
                event_counts.push(deaths);
                risk_start.push(k);
            }
            k = end;
        }
        Self {
            event_times,
            event_counts,
            risk_start,
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.event_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.event_times.is_empty()
    }

    /// Subjects with `X_i >= event_times[k]`.
    pub fn risk_set(&self, k: usize) -> &[usize] {
        &self.order[self.risk_start[k]..]
    }

    pub fn risk_set_size(&self, k: usize) -> usize {
        self.order.len() - self.risk_start[k]
    }
}
