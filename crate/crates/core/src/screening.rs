//! Conditional screening: one `(q+1)`-dimensional Cox fit per candidate
//! covariate, each containing the conditioning set `C` plus the candidate.
//!
//! The per-candidate fits are independent and run on the current rayon pool.
//! Records are stored by covariate index, so the result does not depend on
//! scheduling or the number of workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cox::{self, CoxFit, FitControl, FitError};
use crate::data::{ConditioningSet, DataError, SurvivalDataset};

#[derive(Debug, Error)]
pub enum ScreenError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("conditioning-only fit failed: {0}")]
    NullFit(FitError),
    #[error("conditioning-only fit did not converge in {0} iterations")]
    NullNotConverged(usize),
    #[error("{events} events are too few for {params}-parameter marginal fits")]
    TooFewEvents { events: usize, params: usize },
    #[error("no covariate outside the conditioning set")]
    NoCandidates,
    #[error("statistic {0} was not computed")]
    StatisticNotComputed(Statistic),
    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("k = {k} outside 1..={max}")]
    TopKOutOfRange { k: usize, max: usize },
    #[error("every candidate fit failed")]
    NoUsableFit,
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Screening statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    /// `|beta_j|`, the maximum partial likelihood estimate.
    Mple,
    /// `|beta_j| / sigma_j`.
    Wald,
    /// Partial likelihood increase over the conditioning-only model.
    Plik,
}

impl Statistic {
    pub const ALL: [Statistic; 3] = [Statistic::Mple, Statistic::Wald, Statistic::Plik];

    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Mple => "mple",
            Statistic::Wald => "wald",
            Statistic::Plik => "plik",
        }
    }
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Statistic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mple" | "cs-mple" => Ok(Statistic::Mple),
            "wald" | "cs-wald" => Ok(Statistic::Wald),
            "plik" | "cs-plik" => Ok(Statistic::Plik),
            other => Err(format!("unknown statistic '{other}' (expected mple, wald or plik)")),
        }
    }
}

/// Which statistics to compute. MPLE is always available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatisticSet {
    pub wald: bool,
    pub plik: bool,
}

impl Default for StatisticSet {
    fn default() -> Self {
        Self::mple_only()
    }
}

impl StatisticSet {
    pub fn mple_only() -> Self {
        Self {
            wald: false,
            plik: false,
        }
    }

    pub fn all() -> Self {
        Self {
            wald: true,
            plik: true,
        }
    }

    pub fn from_list(stats: &[Statistic]) -> Self {
        Self {
            wald: stats.contains(&Statistic::Wald),
            plik: stats.contains(&Statistic::Plik),
        }
    }

    pub fn contains(&self, stat: Statistic) -> bool {
        match stat {
            Statistic::Mple => true,
            Statistic::Wald => self.wald,
            Statistic::Plik => self.plik,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Statistic> + '_ {
        Statistic::ALL.into_iter().filter(|s| self.contains(*s))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScreenOptions {
    pub control: FitControl,
    pub statistics: StatisticSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    Separation,
    Singular,
    /// Iteration budget exhausted without a classified failure.
    NotConverged,
    NonFinite,
}

impl FitStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FitStatus::Converged => "converged",
            FitStatus::Separation => "separation",
            FitStatus::Singular => "singular",
            FitStatus::NotConverged => "not_converged",
            FitStatus::NonFinite => "non_finite",
        }
    }

    fn from_error(err: &FitError) -> Self {
        match err {
            FitError::Separation { .. } => FitStatus::Separation,
            FitError::NonFinite { .. } => FitStatus::NonFinite,
            _ => FitStatus::Singular,
        }
    }
}

/// Screening outcome for one candidate covariate. Numeric fields are `None`
/// when the fit failed or the statistic was not requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateScreenRecord {
    pub index: usize,
    pub beta_hat: Option<f64>,
    pub sigma_hat: Option<f64>,
    pub wald: Option<f64>,
    pub plik: Option<f64>,
    /// Coefficients of the conditioning covariates in this candidate's fit.
    pub conditioning_coefficients: Vec<f64>,
    pub fit_status: FitStatus,
    pub iterations: usize,
}

impl CovariateScreenRecord {
    pub fn statistic(&self, stat: Statistic) -> Option<f64> {
        match stat {
            Statistic::Mple => self.beta_hat.map(f64::abs),
            Statistic::Wald => self.wald,
            Statistic::Plik => self.plik,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Rankings {
    pub mple: Option<Vec<usize>>,
    pub wald: Option<Vec<usize>>,
    pub plik: Option<Vec<usize>>,
}

impl Rankings {
    pub fn get(&self, stat: Statistic) -> Option<&[usize]> {
        match stat {
            Statistic::Mple => self.mple.as_deref(),
            Statistic::Wald => self.wald.as_deref(),
            Statistic::Plik => self.plik.as_deref(),
        }
    }

    fn set(&mut self, stat: Statistic, ranking: Vec<usize>) {
        match stat {
            Statistic::Mple => self.mple = Some(ranking),
            Statistic::Wald => self.wald = Some(ranking),
            Statistic::Plik => self.plik = Some(ranking),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningResult {
    pub conditioning: ConditioningSet,
    pub statistics: StatisticSet,
    /// Fit of the conditioning covariates alone.
    pub null_fit: CoxFit,
    /// One record per covariate outside `C`, ascending by index.
    pub records: Vec<CovariateScreenRecord>,
    /// Covariate indices ordered by decreasing statistic.
    pub rankings: Rankings,
}

impl ScreeningResult {
    pub fn ranking(&self, stat: Statistic) -> Result<&[usize], ScreenError> {
        self.rankings
            .get(stat)
            .ok_or(ScreenError::StatisticNotComputed(stat))
    }

    pub fn record(&self, index: usize) -> Option<&CovariateScreenRecord> {
        self.records
            .binary_search_by_key(&index, |r| r.index)
            .ok()
            .map(|k| &self.records[k])
    }

    pub fn failure_count(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.fit_status != FitStatus::Converged)
            .count()
    }
}

/// Fits the conditioning model once, then every candidate `j` outside `C`
/// warm-started from `(beta_C, 0)`.
pub fn screen(
    data: &SurvivalDataset,
    conditioning: &ConditioningSet,
    options: &ScreenOptions,
) -> Result<ScreeningResult, ScreenError> {
    options.control.check()?;
    let report = data.validate()?;
    let q = conditioning.len();
    if let Some(&bad) = conditioning.indices().iter().find(|&&j| j >= data.p()) {
        return Err(DataError::IndexOutOfRange { index: bad, p: data.p() }.into());
    }
    if q + 1 >= report.events {
        return Err(ScreenError::TooFewEvents {
            events: report.events,
            params: q + 1,
        });
    }
    let candidates: Vec<usize> = (0..data.p()).filter(|&j| !conditioning.contains(j)).collect();
    if candidates.is_empty() {
        return Err(ScreenError::NoCandidates);
    }

    let null_fit = cox::fit(data, conditioning.indices(), &options.control, None)
        .map_err(ScreenError::NullFit)?;
    if !null_fit.converged {
        return Err(ScreenError::NullNotConverged(null_fit.iterations));
    }

    let mut init = null_fit.coefficients.clone();
    init.push(0.0);
    let records: Vec<CovariateScreenRecord> = candidates
        .par_iter()
        .map(|&j| screen_one(data, conditioning, j, &init, &null_fit, options))
        .collect();

    let mut rankings = Rankings::default();
    for stat in options.statistics.iter() {
        let values: Vec<Option<f64>> = records.iter().map(|r| r.statistic(stat)).collect();
        let order = rank_descending(&values);
        rankings.set(stat, order.into_iter().map(|k| records[k].index).collect());
    }
    Ok(ScreeningResult {
        conditioning: conditioning.clone(),
        statistics: options.statistics,
        null_fit,
        records,
        rankings,
    })
}

fn screen_one(
    data: &SurvivalDataset,
    conditioning: &ConditioningSet,
    j: usize,
    init: &[f64],
    null_fit: &CoxFit,
    options: &ScreenOptions,
) -> CovariateScreenRecord {
    let mut columns = conditioning.indices().to_vec();
    columns.push(j);
    let failed = |status, iterations| CovariateScreenRecord {
        index: j,
        beta_hat: None,
        sigma_hat: None,
        wald: None,
        plik: None,
        conditioning_coefficients: Vec::new(),
        fit_status: status,
        iterations,
    };
    let fit = match cox::fit(data, &columns, &options.control, Some(init)) {
        Ok(fit) if fit.converged => fit,
        Ok(fit) => return failed(FitStatus::NotConverged, fit.iterations),
        Err(err) => return failed(FitStatus::from_error(&err), 0),
    };
    let q = conditioning.len();
    let beta = fit.coefficients[q];
    let variance = fit.variances[q];
    if !(variance > 0.0) {
        return failed(FitStatus::Singular, fit.iterations);
    }
    let sigma = variance.sqrt();
    let stats = options.statistics;
    CovariateScreenRecord {
        index: j,
        beta_hat: Some(beta),
        sigma_hat: Some(sigma),
        wald: stats.wald.then_some(beta.abs() / sigma),
        plik: stats.plik.then_some(fit.loglik - null_fit.loglik),
        conditioning_coefficients: fit.coefficients[..q].to_vec(),
        fit_status: FitStatus::Converged,
        iterations: fit.iterations,
    }
}

/// Positions ordered by decreasing value; missing values go last. Ties, and
/// the missing block, are ordered by ascending position.
pub fn rank_descending(values: &[Option<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| match (values[a], values[b]) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.cmp(&b)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.cmp(&b),
    });
    order
}

/// Covariates whose statistic is at least `gamma`, ascending by index.
pub fn select_by_threshold(
    result: &ScreeningResult,
    stat: Statistic,
    gamma: f64,
) -> Result<Vec<usize>, ScreenError> {
    if !(gamma > 0.0) {
        return Err(ScreenError::InvalidThreshold(gamma));
    }
    if !result.statistics.contains(stat) {
        return Err(ScreenError::StatisticNotComputed(stat));
    }
    Ok(result
        .records
        .iter()
        .filter(|r| r.statistic(stat).is_some_and(|v| v >= gamma))
        .map(|r| r.index)
        .collect())
}

/// The first `k` covariates of the ranking by `stat`.
pub fn select_top_k(
    result: &ScreeningResult,
    stat: Statistic,
    k: usize,
) -> Result<Vec<usize>, ScreenError> {
    let ranking = result.ranking(stat)?;
    if k == 0 || k > ranking.len() {
        return Err(ScreenError::TopKOutOfRange {
            k,
            max: ranking.len(),
        });
    }
    Ok(ranking[..k].to_vec())
}

/// `floor(n / ln n)`, the customary screening budget; at least 1.
pub fn default_top_k(n: usize) -> usize {
    if n < 3 {
        return 1;
    }
    let n = n as f64;
    ((n / n.ln()).floor() as usize).max(1)
}

/// The single covariate with the largest marginal Wald statistic.
pub fn default_conditioning(
    data: &SurvivalDataset,
    control: &FitControl,
) -> Result<ConditioningSet, ScreenError> {
    let options = ScreenOptions {
        control: *control,
        statistics: StatisticSet {
            wald: true,
            plik: false,
        },
    };
    let result = screen(data, &ConditioningSet::empty(), &options)?;
    let top = result.ranking(Statistic::Wald)?[0];
    if result.record(top).is_none_or(|r| r.wald.is_none()) {
        return Err(ScreenError::NoUsableFit);
    }
    Ok(ConditioningSet::for_dataset(vec![top], data)?)
}
