//! C interface to the `coxscreen` library.
//!
//! Datasets and screening results are opaque handles created and released
//! through this API. Every fallible function returns a [`CoxStatus`]; on
//! failure the message is available from [`cox_last_error`] on the same
//! thread. Covariate indices are 0-based, as in the Rust API.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use coxscreen::baselines::{self, BaselineMethod, BaselineOptions};
use coxscreen::cox::FitControl;
use coxscreen::data::{self, ColumnSchema, ConditioningSet, DataError, SurvivalDataset};
use coxscreen::screening::{self, FitStatus, ScreenError, ScreenOptions, ScreeningResult, Statistic, StatisticSet};
use coxscreen::simgen::{self, Example, SimConfig, SimError};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Validation = 4,
    Fit = 5,
    Config = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoxStatistic {
    Mple = 0,
    Wald = 1,
    Plik = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoxBaseline {
    PsisWald = 0,
    PsisPlik = 1,
    Cors = 2,
    Cris = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoxFitStatus {
    Converged = 0,
    Separation = 1,
    Singular = 2,
    NotConverged = 3,
    NonFinite = 4,
}

/// Request the Wald statistic in [`cox_screen`].
pub const COX_STAT_WALD: u32 = 1;
/// Request the partial-likelihood-ratio statistic in [`cox_screen`].
pub const COX_STAT_PLIK: u32 = 2;

/// One screened covariate. Statistics that were not computed, or whose fit
/// failed, are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CoxScreenRecord {
    pub index: usize,
    pub beta_hat: f64,
    pub sigma_hat: f64,
    pub wald: f64,
    pub plik: f64,
    pub fit_status: CoxFitStatus,
    pub iterations: usize,
}

/// Opaque survival dataset.
pub struct CoxDataset {
    inner: SurvivalDataset,
}

/// Opaque screening result.
pub struct CoxScreenResult {
    inner: ScreeningResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    let c = CString::new(text).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(CoxStatus, String);

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        let status = match e {
            DataError::Io(_) => CoxStatus::Io,
            DataError::Csv(ref c) if c.is_io_error() => CoxStatus::Io,
            _ => CoxStatus::Validation,
        };
        Failure(status, e.to_string())
    }
}

impl From<ScreenError> for Failure {
    fn from(e: ScreenError) -> Self {
        let status = match e {
            ScreenError::Data(d) => return d.into(),
            ScreenError::NullFit(_) | ScreenError::NullNotConverged(_) | ScreenError::NoUsableFit | ScreenError::Fit(_) => {
                CoxStatus::Fit
            }
            ScreenError::TooFewEvents { .. } | ScreenError::NoCandidates => CoxStatus::Validation,
            _ => CoxStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Data(d) => d.into(),
            other => Failure(CoxStatus::Config, other.to_string()),
        }
    }
}

impl From<baselines::BaselineError> for Failure {
    fn from(e: baselines::BaselineError) -> Self {
        match e {
            baselines::BaselineError::Data(d) => d.into(),
            baselines::BaselineError::Screen(s) => s.into(),
            other => Failure(CoxStatus::Validation, other.to_string()),
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(CoxStatus::InvalidArgument, message.into())
}

fn null(name: &str) -> Failure {
    Failure(CoxStatus::NullPointer, format!("{name} is null"))
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CoxStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CoxStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".into());
            set_error(message);
            CoxStatus::Panic
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{name} is not valid UTF-8")))
}

unsafe fn dataset_ref<'a>(p: *const CoxDataset) -> Result<&'a SurvivalDataset, Failure> {
    p.as_ref().map(|d| &d.inner).ok_or_else(|| null("dataset"))
}

unsafe fn result_ref<'a>(p: *const CoxScreenResult) -> Result<&'a ScreeningResult, Failure> {
    p.as_ref().map(|r| &r.inner).ok_or_else(|| null("result"))
}

fn statistic(s: CoxStatistic) -> Statistic {
    match s {
        CoxStatistic::Mple => Statistic::Mple,
        CoxStatistic::Wald => Statistic::Wald,
        CoxStatistic::Plik => Statistic::Plik,
    }
}

fn publish<T>(out: *mut *mut T, value: T) {
    // SAFETY: callers check `out` for null before computing `value`.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cox_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cox_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `floor(n / ln n)`, at least 1.
#[no_mangle]
pub extern "C" fn cox_default_top_k(n: usize) -> usize {
    screening::default_top_k(n)
}

/// Builds a dataset from `n` times, `n` statuses (0 censored, 1 event) and an
/// `n * p` covariate block stored column by column.
///
/// # Safety
/// `time` and `status` must point to `n` readable values, `covariates` to
/// `n * p`, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cox_dataset_from_arrays(
    n: usize,
    p: usize,
    time: *const f64,
    status: *const i32,
    covariates: *const f64,
    out: *mut *mut CoxDataset,
) -> CoxStatus {
    guard(|| {
        if time.is_null() || status.is_null() || covariates.is_null() {
            return Err(null("input array"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let total = n.checked_mul(p).ok_or_else(|| invalid("n * p overflows"))?;
        let times = std::slice::from_raw_parts(time, n).to_vec();
        let events = std::slice::from_raw_parts(status, n)
            .iter()
            .enumerate()
            .map(|(i, &s)| match s {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Failure(CoxStatus::Validation, format!("status[{i}] = {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let block = std::slice::from_raw_parts(covariates, total);
        let columns = block.chunks(n.max(1)).take(p).map(<[f64]>::to_vec).collect();
        let inner = SurvivalDataset::from_columns(times, events, columns)?;
        publish(out, CoxDataset { inner });
        Ok(())
    })
}

/// Reads a CSV file. `time_col` and `status_col` may be NULL for the
/// defaults "time" and "status"; all other columns become covariates.
///
/// # Safety
/// String arguments must be NUL-terminated or NULL where allowed; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn cox_dataset_read_csv(
    path: *const c_char,
    time_col: *const c_char,
    status_col: *const c_char,
    out: *mut *mut CoxDataset,
) -> CoxStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut schema = ColumnSchema::default();
        if !time_col.is_null() {
            schema.time_col = c_str(time_col, "time_col")?.to_owned();
        }
        if !status_col.is_null() {
            schema.status_col = c_str(status_col, "status_col")?.to_owned();
        }
        let inner = data::read_csv(path, &schema)?;
        publish(out, CoxDataset { inner });
        Ok(())
    })
}

/// Simulates one replicate of a built-in design (1, 2 or 3), calibrating
/// uniform censoring to `censor_target` first.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cox_simulate_example(
    example: u32,
    n: usize,
    p: usize,
    censor_target: f64,
    seed: u64,
    replicate_id: u64,
    out: *mut *mut CoxDataset,
) -> CoxStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let example = Example::from_id(example).ok_or_else(|| invalid(format!("unknown example {example}")))?;
        let mut cfg = SimConfig::example(example, n, p, seed);
        cfg.censor_target = censor_target;
        let cal = simgen::calibrate_censoring(&cfg, censor_target, simgen::CALIBRATION_REPLICATES)?;
        cfg.censor_upper = Some(cal.censor_upper);
        let rep = simgen::gen_replicate(&cfg, replicate_id)?;
        publish(out, CoxDataset { inner: rep.dataset });
        Ok(())
    })
}

/// # Safety
/// `dataset` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn cox_dataset_n(dataset: *const CoxDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.n())
}

/// # Safety
/// `dataset` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn cox_dataset_p(dataset: *const CoxDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.p())
}

/// Writes the dataset as CSV with columns time, status, covariates.
///
/// # Safety
/// `dataset` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cox_dataset_write_csv(dataset: *const CoxDataset, path: *const c_char) -> CoxStatus {
    guard(|| {
        let d = dataset_ref(dataset)?;
        let path = c_str(path, "path")?;
        data::write_csv(path, d)?;
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cox_dataset_free(dataset: *mut CoxDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Conditional screening with the `q` 0-based covariates in `conditioning`
/// (may be NULL when `q` is 0). MPLE is always computed; `statistics` is a
/// bit mask of `COX_STAT_WALD` and `COX_STAT_PLIK`.
///
/// # Safety
/// `dataset` must be a live handle, `conditioning` must point to `q` values
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cox_screen(
    dataset: *const CoxDataset,
    conditioning: *const usize,
    q: usize,
    statistics: u32,
    out: *mut *mut CoxScreenResult,
) -> CoxStatus {
    guard(|| {
        let d = dataset_ref(dataset)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let indices = match (conditioning.is_null(), q) {
            (_, 0) => Vec::new(),
            (true, _) => return Err(null("conditioning")),
            (false, _) => std::slice::from_raw_parts(conditioning, q).to_vec(),
        };
        if statistics & !(COX_STAT_WALD | COX_STAT_PLIK) != 0 {
            return Err(invalid(format!("unknown statistic bits {statistics:#x}")));
        }
        let c = ConditioningSet::for_dataset(indices, d)?;
        let options = ScreenOptions {
            control: FitControl::default(),
            statistics: StatisticSet {
                wald: statistics & COX_STAT_WALD != 0,
                plik: statistics & COX_STAT_PLIK != 0,
            },
        };
        let inner = screening::screen(d, &c, &options)?;
        publish(out, CoxScreenResult { inner });
        Ok(())
    })
}

/// Number of screened covariates (`p - q`).
///
/// # Safety
/// `result` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn cox_screen_result_len(result: *const CoxScreenResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.records.len())
}

/// Log partial likelihood of the conditioning-only model; NaN for NULL.
///
/// # Safety
/// `result` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn cox_screen_result_null_loglik(result: *const CoxScreenResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.null_fit.loglik)
}

/// Copies record `k` (in ascending covariate order) into `out`.
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cox_screen_result_record(
    result: *const CoxScreenResult,
    k: usize,
    out: *mut CoxScreenRecord,
) -> CoxStatus {
    guard(|| {
        let r = result_ref(result)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let rec = r
            .records
            .get(k)
            .ok_or_else(|| invalid(format!("record {k} out of range ({})", r.records.len())))?;
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        *out = CoxScreenRecord {
            index: rec.index,
            beta_hat: nan(rec.beta_hat),
            sigma_hat: nan(rec.sigma_hat),
            wald: nan(rec.wald),
            plik: nan(rec.plik),
            fit_status: match rec.fit_status {
                FitStatus::Converged => CoxFitStatus::Converged,
                FitStatus::Separation => CoxFitStatus::Separation,
                FitStatus::Singular => CoxFitStatus::Singular,
                FitStatus::NotConverged => CoxFitStatus::NotConverged,
                FitStatus::NonFinite => CoxFitStatus::NonFinite,
            },
            iterations: rec.iterations,
        };
        Ok(())
    })
}

/// Copies the ranking by `stat` into `buffer` (capacity `capacity`) and
/// stores its full length in `len`. A NULL buffer with capacity 0 only
/// queries the length.
///
/// # Safety
/// `result` must be a live handle, `buffer` writable for `capacity` values
/// and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn cox_screen_result_ranking(
    result: *const CoxScreenResult,
    stat: CoxStatistic,
    buffer: *mut usize,
    capacity: usize,
    len: *mut usize,
) -> CoxStatus {
    guard(|| {
        let r = result_ref(result)?;
        if len.is_null() {
            return Err(null("len"));
        }
        let ranking = r.ranking(statistic(stat))?;
        *len = ranking.len();
        if capacity > 0 {
            if buffer.is_null() {
                return Err(null("buffer"));
            }
            let n = capacity.min(ranking.len());
            ptr::copy_nonoverlapping(ranking.as_ptr(), buffer, n);
        }
        Ok(())
    })
}

/// # Safety
/// `result` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cox_screen_result_free(result: *mut CoxScreenResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Runs a marginal baseline. `statistics` and `ranking` must each hold `p`
/// values; failed fits give NaN statistics and rank last.
///
/// # Safety
/// `dataset` must be a live handle; both buffers must be writable for `p`
/// values.
#[no_mangle]
pub unsafe extern "C" fn cox_baseline(
    dataset: *const CoxDataset,
    method: CoxBaseline,
    statistics: *mut f64,
    ranking: *mut usize,
) -> CoxStatus {
    guard(|| {
        let d = dataset_ref(dataset)?;
        if statistics.is_null() || ranking.is_null() {
            return Err(null("output buffer"));
        }
        let method = match method {
            CoxBaseline::PsisWald => BaselineMethod::PsisWald,
            CoxBaseline::PsisPlik => BaselineMethod::PsisPlik,
            CoxBaseline::Cors => BaselineMethod::Cors,
            CoxBaseline::Cris => BaselineMethod::Cris,
        };
        let res = baselines::run_baseline(d, method, &BaselineOptions::default())?;
        for (k, s) in res.statistics.iter().enumerate() {
            *statistics.add(k) = s.unwrap_or(f64::NAN);
        }
        ptr::copy_nonoverlapping(res.ranking.as_ptr(), ranking, res.ranking.len());
        Ok(())
    })
}
