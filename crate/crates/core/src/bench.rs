//! Paired Monte-Carlo benchmark: every method sees the same replicates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{run_baseline, BaselineMethod, BaselineOptions};
use crate::cox::FitControl;
use crate::data::{ConditioningSet, DataError};
use crate::metrics::{self, BenchmarkSummary, MetricsError, ReplicateScore};
use crate::screening::{self, default_top_k, ScreenOptions, Statistic, StatisticSet};
use crate::simgen::{SimConfig, SimError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("unknown method '{0}'")]
    UnknownMethod(String),
    #[error("no methods requested")]
    NoMethods,
    #[error("replicate count must be positive")]
    NoReplicates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Conditional(Statistic),
    Marginal(BaselineMethod),
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Conditional(Statistic::Mple),
        Method::Conditional(Statistic::Wald),
        Method::Conditional(Statistic::Plik),
        Method::Marginal(BaselineMethod::PsisWald),
        Method::Marginal(BaselineMethod::PsisPlik),
        Method::Marginal(BaselineMethod::Cors),
        Method::Marginal(BaselineMethod::Cris),
    ];
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Conditional(Statistic::Mple) => f.write_str("CS-MPLE"),
            Method::Conditional(Statistic::Wald) => f.write_str("CS-Wald"),
            Method::Conditional(Statistic::Plik) => f.write_str("CS-PLIK"),
            Method::Marginal(b) => write!(f, "{b}"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase().replace('_', "-");
        if lower.starts_with("cs-") {
            return lower
                .parse::<Statistic>()
                .map(Method::Conditional)
                .map_err(|_| BenchError::UnknownMethod(s.to_owned()));
        }
        lower
            .parse::<BaselineMethod>()
            .map(Method::Marginal)
            .map_err(|_| BenchError::UnknownMethod(s.to_owned()))
    }
}

/// How conditional methods pick `C` on each replicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditioningSpec {
    /// 0-based covariate indices.
    Fixed(Vec<usize>),
    /// The top marginal Wald covariate of each replicate.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    /// Must have `censor_upper` set.
    pub sim: SimConfig,
    pub config_id: String,
    pub replicates: usize,
    /// Replicate ids run from `first_replicate` upward.
    pub first_replicate: u64,
    pub methods: Vec<Method>,
    pub conditioning: ConditioningSpec,
    pub control: FitControl,
    pub cors_log_time: bool,
    /// TPR budget; defaults to `n`.
    pub tpr_budget: Option<usize>,
    /// Sure-screening retention size; defaults to `floor(n / ln n)`.
    pub sure_k: Option<usize>,
}

impl BenchmarkConfig {
    pub fn new(sim: SimConfig, config_id: impl Into<String>, replicates: usize, methods: Vec<Method>) -> Self {
        Self {
            sim,
            config_id: config_id.into(),
            replicates,
            first_replicate: 1,
            methods,
            conditioning: ConditioningSpec::Fixed(vec![0]),
            control: FitControl::default(),
            cors_log_time: false,
            tpr_budget: None,
            sure_k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub method: String,
    pub replicate_id: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOutput {
    pub config_id: String,
    /// Method-major, then by replicate id.
    pub scores: Vec<ReplicateScore>,
    pub failures: Vec<ReplicateFailure>,
    /// One per method with at least one scored replicate, in request order.
    pub summaries: Vec<BenchmarkSummary>,
}

struct Scored {
    method: Method,
    outcome: Result<ReplicateScore, String>,
}

pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkOutput, BenchError> {
    config.sim.validate()?;
    if config.sim.censor_upper.is_none() {
        return Err(SimError::MissingCensorUpper.into());
    }
    if config.methods.is_empty() {
        return Err(BenchError::NoMethods);
    }
    if config.replicates == 0 {
        return Err(BenchError::NoReplicates);
    }
    if let ConditioningSpec::Fixed(c) = &config.conditioning {
        ConditioningSet::new(c.clone(), config.sim.p, config.sim.n)?;
    }
    let ids: Vec<u64> = (0..config.replicates as u64).map(|k| config.first_replicate + k).collect();
    let per_replicate: Vec<Vec<Scored>> = ids.par_iter().map(|&id| run_replicate(config, id)).collect();

    let mut scores = Vec::new();
    let mut failures = Vec::new();
    let mut summaries = Vec::new();
    for method in &config.methods {
        let name = method.to_string();
        let mut mine = Vec::new();
        let mut failed = 0;
        for (id, rep) in ids.iter().zip(&per_replicate) {
            for s in rep.iter().filter(|s| s.method == *method) {
                match &s.outcome {
                    Ok(score) => mine.push(score.clone()),
                    Err(error) => {
                        failed += 1;
                        failures.push(ReplicateFailure {
                            method: name.clone(),
                            replicate_id: *id,
                            error: error.clone(),
                        });
                    }
                }
            }
        }
        if !mine.is_empty() {
            let mut summary = metrics::summarize(&config.config_id, &mine)?;
            summary.failures = failed;
            summaries.push(summary);
        }
        scores.extend(mine);
    }
    Ok(BenchmarkOutput {
        config_id: config.config_id.clone(),
        scores,
        failures,
        summaries,
    })
}

fn run_replicate(config: &BenchmarkConfig, id: u64) -> Vec<Scored> {
    let rep = match crate::simgen::gen_replicate(&config.sim, id) {
        Ok(rep) => rep,
        Err(e) => {
            return config
                .methods
                .iter()
                .map(|&method| Scored {
                    method,
                    outcome: Err(e.to_string()),
                })
                .collect()
        }
    };
    let data = &rep.dataset;
    let n = data.n();
    let budget = config.tpr_budget.unwrap_or(n);
    let sure_k = config.sure_k.unwrap_or_else(|| default_top_k(n));
    let active = &rep.true_active;

    let score = |method: Method, ranking: &[usize], conditioning: &[usize], fit_failures: usize| {
        let mms = metrics::mms(ranking, active, conditioning).map_err(|e| e.to_string())?;
        let tpr = metrics::tpr(ranking, active, budget, conditioning).map_err(|e| e.to_string())?;
        Ok(ReplicateScore {
            method: method.to_string(),
            replicate_id: id,
            mms,
            tpr,
            sure_screened: metrics::sure_screened(ranking, active, sure_k, conditioning),
            fit_failures,
        })
    };

    let conditional: Vec<Statistic> = config
        .methods
        .iter()
        .filter_map(|m| match m {
            Method::Conditional(s) => Some(*s),
            Method::Marginal(_) => None,
        })
        .collect();
    let cs_result = (!conditional.is_empty()).then(|| {
        let conditioning = match &config.conditioning {
            ConditioningSpec::Fixed(c) => ConditioningSet::for_dataset(c.clone(), data).map_err(|e| e.to_string())?,
            ConditioningSpec::Auto => screening::default_conditioning(data, &config.control).map_err(|e| e.to_string())?,
        };
        let options = ScreenOptions {
            control: config.control,
            statistics: StatisticSet::from_list(&conditional),
        };
        screening::screen(data, &conditioning, &options).map_err(|e| e.to_string())
    });

    let baseline_options = BaselineOptions {
        control: config.control,
        cors_log_time: config.cors_log_time,
    };
    config
        .methods
        .iter()
        .map(|&method| {
            let outcome = match method {
                Method::Conditional(stat) => match cs_result.as_ref().expect("computed above") {
                    Ok(result) => {
                        let ranking = result.ranking(stat).map_err(|e| e.to_string());
                        ranking.and_then(|r| score(method, r, result.conditioning.indices(), result.failure_count()))
                    }
                    Err(e) => Err(e.clone()),
                },
                Method::Marginal(b) => match run_baseline(data, b, &baseline_options) {
                    Ok(res) => {
                        let failures = res.statistics.iter().filter(|s| s.is_none()).count();
                        score(method, &res.ranking, &[], failures)
                    }
                    Err(e) => Err(e.to_string()),
                },
            };
            Scored { method, outcome }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{calibrate_censoring, Example};

    fn small_config(replicates: usize) -> BenchmarkConfig {
        let mut sim = SimConfig::example(Example::Two, 60, 30, 5);
        sim.censor_upper = Some(calibrate_censoring(&sim, 0.2, 20).unwrap().censor_upper);
        BenchmarkConfig::new(sim, "ex2-small", replicates, Method::ALL.to_vec())
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("cs-bogus".parse::<Method>().is_err());
    }

    #[test]
    fn single_replicate_has_zero_iqr() {
        let out = run_benchmark(&small_config(1)).unwrap();
        assert_eq!(out.summaries.len(), Method::ALL.len());
        for s in &out.summaries {
            assert_eq!((s.iqr_mms, s.iqr_tpr), (0.0, 0.0));
            assert_eq!(s.replicates + s.failures, 1);
        }
    }

    #[test]
    fn conditional_methods_find_the_weak_covariate() {
        let out = run_benchmark(&small_config(6)).unwrap();
        let cs = out.summaries.iter().find(|s| s.method == "CS-MPLE").unwrap();
        assert!(cs.median_mms <= 3.0, "{cs:?}");
        for score in &out.scores {
            assert!(score.mms >= 1 && (0.0..=1.0).contains(&score.tpr));
        }
    }

    #[test]
    fn results_do_not_depend_on_pool_size() {
        let cfg = small_config(4);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_benchmark(&cfg).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = small_config(1);
        cfg.methods.clear();
        assert!(matches!(run_benchmark(&cfg), Err(BenchError::NoMethods)));
        let mut cfg = small_config(0);
        cfg.replicates = 0;
        assert!(run_benchmark(&cfg).is_err());
        let mut cfg = small_config(1);
        cfg.sim.censor_upper = None;
        assert!(run_benchmark(&cfg).is_err());
        let mut cfg = small_config(1);
        cfg.conditioning = ConditioningSpec::Fixed(vec![99]);
        assert!(run_benchmark(&cfg).is_err());
    }
}
