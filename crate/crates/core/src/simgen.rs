//! Seeded simulation of Cox-model survival data with uniform censoring.
//!
//! Event times follow `lambda(t | Z) = exp(intercept + beta'Z)`, i.e. a unit
//! baseline hazard, and censoring times are `U[0, c]`. Every replicate draws
//! from its own ChaCha stream selected by the replicate id, so any replicate
//! can be regenerated alone and the set of replicates does not depend on the
//! order in which they are produced.

use std::fmt::Write as _;

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::data::{default_names, DataError, SurvivalDataset};

/// Linear predictors are clipped to this magnitude before exponentiation.
pub const PREDICTOR_CLIP: f64 = 700.0;

/// Stream reserved for censoring calibration; replicate ids never reach it.
const CALIBRATION_STREAM: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("censoring upper bound is not set; calibrate first")]
    MissingCensorUpper,
    #[error("censoring target {target} unreachable: rates span [{low}, {high}] over the search bracket")]
    Unreachable { target: f64, low: f64, high: f64 },
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correlation {
    Independent,
    /// All covariates pairwise correlated at `rho`.
    Equicorrelated(f64),
    /// The first `len` covariates pairwise correlated at `rho`, the rest
    /// independent of them and of each other.
    Block { rho: f64, len: usize },
}

impl Correlation {
    /// `(rho, number of leading correlated columns)`.
    fn block(&self, p: usize) -> (f64, usize) {
        match *self {
            Correlation::Independent => (0.0, 0),
            Correlation::Equicorrelated(rho) => (rho, p),
            Correlation::Block { rho, len } => (rho, len.min(p)),
        }
    }

    /// Population covariance between columns `a` and `b`.
    pub fn covariance(&self, p: usize, a: usize, b: usize) -> f64 {
        if a == b {
            return 1.0;
        }
        let (rho, len) = self.block(p);
        if a < len && b < len {
            rho
        } else {
            0.0
        }
    }
}

/// The three built-in designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Example {
    /// Equicorrelated (0.5) covariates, `beta = (1,1,1,1,1,-2.5,0,...)`.
    /// Covariate 6 is jointly active but marginally uncorrelated with the
    /// linear predictor.
    One,
    /// Independent covariates, `beta_1 = 10`, `beta_p = 1`, intercept -1.
    Two,
    /// As `Two`, but the first `p-1` covariates are equicorrelated at 0.9.
    Three,
}

impl Example {
    pub fn from_id(id: u32) -> Option<Self> {
        match id {
            1 => Some(Example::One),
            2 => Some(Example::Two),
            3 => Some(Example::Three),
            _ => None,
        }
    }

    pub fn id(self) -> u32 {
        match self {
            Example::One => 1,
            Example::Two => 2,
            Example::Three => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    /// Nonzero coefficients as `(0-based index, value)`, ascending by index.
    pub beta: Vec<(usize, f64)>,
    pub intercept: f64,
    pub correlation: Correlation,
    pub censor_target: f64,
    /// `c` in `C ~ U[0, c]`; `None` until calibrated.
    pub censor_upper: Option<f64>,
    pub seed: u64,
}

impl SimConfig {
    /// One of the built-in designs at 20% target censoring (uncalibrated).
    pub fn example(example: Example, n: usize, p: usize, seed: u64) -> Self {
        let (beta, intercept, correlation) = match example {
            Example::One => {
                let mut beta: Vec<(usize, f64)> = (0..5).map(|j| (j, 1.0)).collect();
                beta.push((5, -2.5));
                (beta, 0.0, Correlation::Equicorrelated(0.5))
            }
            Example::Two => (vec![(0, 10.0), (p.saturating_sub(1), 1.0)], -1.0, Correlation::Independent),
            Example::Three => (
                vec![(0, 10.0), (p.saturating_sub(1), 1.0)],
                -1.0,
                Correlation::Block { rho: 0.9, len: p.saturating_sub(1) },
            ),
        };
        Self {
            n,
            p,
            beta,
            intercept,
            correlation,
            censor_target: 0.2,
            censor_upper: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.p == 0 {
            return bad("p must be positive".into());
        }
        let (rho, _) = self.correlation.block(self.p);
        if !(0.0..1.0).contains(&rho) {
            return bad(format!("correlation {rho} outside [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.censor_target) {
            return bad(format!("censoring target {} outside [0, 1)", self.censor_target));
        }
        if let Some(c) = self.censor_upper {
            if !(c > 0.0) {
                return bad(format!("censoring upper bound must be positive, got {c}"));
            }
        }
        for w in self.beta.windows(2) {
            if w[0].0 >= w[1].0 {
                return bad("beta indices must be strictly ascending".into());
            }
        }
        if let Some(&(j, _)) = self.beta.iter().find(|(j, _)| *j >= self.p) {
            return bad(format!("beta index {} exceeds p = {}", j + 1, self.p));
        }
        if self.beta.iter().any(|(_, b)| !b.is_finite()) || !self.intercept.is_finite() {
            return bad("coefficients must be finite".into());
        }
        Ok(())
    }

    /// Indices with nonzero true coefficient.
    pub fn true_active(&self) -> Vec<usize> {
        self.beta.iter().filter(|(_, b)| *b != 0.0).map(|(j, _)| *j).collect()
    }

    /// Population `Cov(Z_j, beta'Z)`.
    pub fn covariance_with_predictor(&self, j: usize) -> f64 {
        self.beta
            .iter()
            .map(|&(k, b)| b * self.correlation.covariance(self.p, j, k))
            .sum()
    }

    pub fn generate(&self, replicate_id: u64) -> SimReplicate {
        gen_replicate(self, replicate_id).expect("config must be valid and calibrated")
    }

    /// Plain `key=value` text, one key per line. Coefficient indices are 1-based.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n={}", self.n);
        let _ = writeln!(out, "p={}", self.p);
        let beta: Vec<String> = self.beta.iter().map(|(j, b)| format!("{}:{:?}", j + 1, b)).collect();
        let _ = writeln!(out, "beta={}", beta.join(","));
        let _ = writeln!(out, "intercept={:?}", self.intercept);
        let corr = match self.correlation {
            Correlation::Independent => "independent".to_owned(),
            Correlation::Equicorrelated(rho) => format!("equicorrelated:{rho:?}"),
            Correlation::Block { rho, len } => format!("block:{rho:?}:{len}"),
        };
        let _ = writeln!(out, "correlation={corr}");
        let _ = writeln!(out, "censor_target={:?}", self.censor_target);
        if let Some(c) = self.censor_upper {
            let _ = writeln!(out, "censor_upper={c:?}");
        }
        let _ = writeln!(out, "seed={}", self.seed);
        out
    }

    pub fn from_kv(text: &str) -> Result<Self, SimError> {
        let mut cfg = SimConfig {
            n: 0,
            p: 0,
            beta: Vec::new(),
            intercept: 0.0,
            correlation: Correlation::Independent,
            censor_target: 0.2,
            censor_upper: None,
            seed: 0,
        };
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let err = |message: String| SimError::Parse { line, message };
            let raw = raw.split('#').next().unwrap_or("").trim();
            if raw.is_empty() {
                continue;
            }
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got '{raw}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| v.parse::<f64>().map_err(|_| err(format!("bad number '{v}'")));
            let int = |v: &str| v.parse::<usize>().map_err(|_| err(format!("bad integer '{v}'")));
            match key {
                "n" => cfg.n = int(value)?,
                "p" => cfg.p = int(value)?,
                "intercept" => cfg.intercept = num(value)?,
                "censor_target" => cfg.censor_target = num(value)?,
                "censor_upper" => cfg.censor_upper = Some(num(value)?),
                "seed" => cfg.seed = value.parse().map_err(|_| err(format!("bad seed '{value}'")))?,
                "beta" => {
                    cfg.beta.clear();
                    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        let (j, b) = item
                            .split_once(':')
                            .ok_or_else(|| err(format!("beta entry '{item}' is not index:value")))?;
                        let j = int(j.trim())?;
                        if j == 0 {
                            return Err(err("beta indices are 1-based".into()));
                        }
                        cfg.beta.push((j - 1, num(b.trim())?));
                    }
                    cfg.beta.sort_by_key(|(j, _)| *j);
                }
                "correlation" => {
                    let parts: Vec<&str> = value.split(':').collect();
                    cfg.correlation = match parts.as_slice() {
                        ["independent"] => Correlation::Independent,
                        ["equicorrelated", rho] => Correlation::Equicorrelated(num(rho)?),
                        ["block", rho, len] => Correlation::Block {
                            rho: num(rho)?,
                            len: int(len)?,
                        },
                        _ => return Err(err(format!("bad correlation '{value}'"))),
                    };
                }
                other => return Err(err(format!("unknown key '{other}'"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One simulated dataset with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReplicate {
    pub dataset: SurvivalDataset,
    pub true_active: Vec<usize>,
    pub realized_censoring: f64,
    pub seed_used: u64,
    pub replicate_id: u64,
    /// Linear predictors that had to be clipped to +-700.
    pub clipped: usize,
}

/// Uniform and standard normal draws from a ChaCha stream.
///
/// Normals use the inverse CDF of a single uniform so the stream consumption
/// is one 64-bit word per variate.
pub struct SimRng {
    inner: ChaCha8Rng,
    normal: Normal,
}

impl SimRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            inner,
            normal: Normal::standard(),
        }
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u = self.uniform();
        self.normal.inverse_cdf(u)
    }
}

/// Draws `n` rows of covariates, returned column-major.
///
/// Correlated columns are `sqrt(1-rho) * e_j + sqrt(rho) * s` with a shared
/// per-row factor `s`.
pub fn gen_covariates(config: &SimConfig, rng: &mut SimRng) -> Vec<Vec<f64>> {
    let (rho, len) = config.correlation.block(config.p);
    let (a, b) = ((1.0 - rho).sqrt(), rho.sqrt());
    let mut columns = vec![vec![0.0; config.n]; config.p];
    for i in 0..config.n {
        let shared = if len > 0 { rng.normal() } else { 0.0 };
        for (j, col) in columns.iter_mut().enumerate() {
            let e = rng.normal();
            col[i] = if j < len { a * e + b * shared } else { e };
        }
    }
    columns
}

/// Exponential event times given the linear predictor. Returns the times and
/// the number of clipped predictors.
pub fn gen_survival_times(
    columns: &[Vec<f64>],
    beta: &[(usize, f64)],
    intercept: f64,
    rng: &mut SimRng,
) -> (Vec<f64>, usize) {
    let n = columns.first().map_or(0, Vec::len);
    let mut clipped = 0;
    let times = (0..n)
        .map(|i| {
            let lp = intercept + beta.iter().map(|&(j, b)| b * columns[j][i]).sum::<f64>();
            let lp = if lp.abs() > PREDICTOR_CLIP {
                clipped += 1;
                lp.signum() * PREDICTOR_CLIP
            } else {
                lp
            };
            -rng.uniform().ln() / lp.exp()
        })
        .collect();
    (times, clipped)
}

pub fn gen_replicate(config: &SimConfig, replicate_id: u64) -> Result<SimReplicate, SimError> {
    config.validate()?;
    let c = config.censor_upper.ok_or(SimError::MissingCensorUpper)?;
    if replicate_id == CALIBRATION_STREAM {
        return Err(SimError::InvalidConfig("replicate id reserved".into()));
    }
    let mut rng = SimRng::new(config.seed, replicate_id);
    let columns = gen_covariates(config, &mut rng);
    let (event_times, clipped) = gen_survival_times(&columns, &config.beta, config.intercept, &mut rng);
    let mut time = Vec::with_capacity(config.n);
    let mut event = Vec::with_capacity(config.n);
    for t in event_times {
        let censor = c * rng.uniform();
        time.push(t.min(censor));
        event.push(t <= censor);
    }
    let censored = event.iter().filter(|e| !**e).count();
    let dataset = SurvivalDataset::new(time, event, columns, default_names(config.p))?;
    Ok(SimReplicate {
        dataset,
        true_active: config.true_active(),
        realized_censoring: censored as f64 / config.n as f64,
        seed_used: config.seed,
        replicate_id,
        clipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub censor_upper: f64,
    pub achieved: f64,
    pub draws: usize,
}

/// Default number of dataset-sized batches per calibration.
pub const CALIBRATION_REPLICATES: usize = 200;

/// Finds `c` so that `U[0, c]` censoring hits `target` on a Monte-Carlo
/// batch of `replicates * n` event times.
///
/// The batch is drawn once, so the estimated rate is a monotone step function
/// of `c` and bisection on `log c` over `[1e-6, 1e6]` is exact.
pub fn calibrate_censoring(config: &SimConfig, target: f64, replicates: usize) -> Result<Calibration, SimError> {
    config.validate()?;
    if !(target > 0.0 && target < 1.0) {
        return Err(SimError::InvalidConfig(format!("censoring target {target} outside (0, 1)")));
    }
    let draws = replicates.max(1) * config.n;
    let mut rng = SimRng::new(config.seed, CALIBRATION_STREAM);
    let mut pairs: Vec<(f64, f64)> = (0..draws)
        .map(|_| {
            let t = draw_event_time(config, &mut rng);
            (t, rng.uniform())
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rate = |c: f64| pairs.iter().filter(|(t, v)| c * v < *t).count() as f64 / draws as f64;

    let (mut lo, mut hi) = (1e-6f64.ln(), 1e6f64.ln());
    let (high, low) = (rate(lo.exp()), rate(hi.exp()));
    if !(low <= target && target <= high) {
        return Err(SimError::Unreachable { target, low, high });
    }
    let mut best = (hi.exp(), low);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r = rate(mid.exp());
        if (r - target).abs() < (best.1 - target).abs() {
            best = (mid.exp(), r);
        }
        if (r - target).abs() <= 1e-3 || hi - lo < 1e-12 {
            break;
        }
        if r > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Calibration {
        censor_upper: best.0,
        achieved: best.1,
        draws,
    })
}

/// One event time drawn from the design, generating only the covariates
/// that enter the linear predictor.
fn draw_event_time(config: &SimConfig, rng: &mut SimRng) -> f64 {
    let (rho, len) = config.correlation.block(config.p);
    let (a, b) = ((1.0 - rho).sqrt(), rho.sqrt());
    let shared = rng.normal();
    let lp = config.intercept
        + config
            .beta
            .iter()
            .map(|&(j, beta)| {
                let e = rng.normal();
                beta * if j < len { a * e + b * shared } else { e }
            })
            .sum::<f64>();
    -rng.uniform().ln() / lp.clamp(-PREDICTOR_CLIP, PREDICTOR_CLIP).exp()
}
