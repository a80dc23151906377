//! Marginal screening baselines: partial-likelihood screening without
//! conditioning (PSIS), IPW-weighted correlation (CORS) and an IPW-weighted
//! rank concordance statistic (CRIS).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cox::FitControl;
use crate::data::{ConditioningSet, DataError, SurvivalDataset};
use crate::screening::{self, rank_descending, ScreenError, ScreenOptions, Statistic, StatisticSet};

/// Lower bound applied to the censoring survival estimate before inverting.
pub const KM_FLOOR: f64 = 0.05;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Screen(#[from] ScreenError),
    #[error("log time requested but observation {row} has time {time}")]
    NonPositiveTime { row: usize, time: f64 },
    #[error("unknown baseline method '{0}'")]
    UnknownMethod(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineMethod {
    PsisWald,
    PsisPlik,
    Cors,
    Cris,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 4] = [
        BaselineMethod::PsisWald,
        BaselineMethod::PsisPlik,
        BaselineMethod::Cors,
        BaselineMethod::Cris,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMethod::PsisWald => "PSIS-Wald",
            BaselineMethod::PsisPlik => "PSIS-PLIK",
            BaselineMethod::Cors => "CORS",
            BaselineMethod::Cris => "CRIS",
        }
    }
}

impl std::fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BaselineMethod {
    type Err = BaselineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "psis-wald" => Ok(BaselineMethod::PsisWald),
            "psis-plik" => Ok(BaselineMethod::PsisPlik),
            "cors" => Ok(BaselineMethod::Cors),
            "cris" => Ok(BaselineMethod::Cris),
            _ => Err(BaselineError::UnknownMethod(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BaselineOptions {
    pub control: FitControl,
    /// Correlate covariates with `log X` instead of `X` in CORS.
    pub cors_log_time: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub method: BaselineMethod,
    /// One entry per covariate; `None` where a PSIS fit failed.
    pub statistics: Vec<Option<f64>>,
    /// All covariates by decreasing statistic, ties by ascending index.
    pub ranking: Vec<usize>,
    /// Covariates whose statistic was degenerate (zero weighted variance)
    /// and was set to 0.
    pub degenerate: Vec<usize>,
}

impl BaselineResult {
    fn from_statistics(method: BaselineMethod, statistics: Vec<Option<f64>>, degenerate: Vec<usize>) -> Self {
        let ranking = rank_descending(&statistics);
        Self {
            method,
            statistics,
            ranking,
            degenerate,
        }
    }
}

pub fn run_baseline(
    data: &SurvivalDataset,
    method: BaselineMethod,
    options: &BaselineOptions,
) -> Result<BaselineResult, BaselineError> {
    match method {
        BaselineMethod::PsisWald => psis(data, Statistic::Wald, &options.control),
        BaselineMethod::PsisPlik => psis(data, Statistic::Plik, &options.control),
        BaselineMethod::Cors => cors(data, options.cors_log_time),
        BaselineMethod::Cris => cris(data),
    }
}

/// Marginal screening: conditional screening with an empty conditioning set.
pub fn psis(data: &SurvivalDataset, flavor: Statistic, control: &FitControl) -> Result<BaselineResult, BaselineError> {
    let method = match flavor {
        Statistic::Wald => BaselineMethod::PsisWald,
        Statistic::Plik => BaselineMethod::PsisPlik,
        Statistic::Mple => return Err(ScreenError::StatisticNotComputed(flavor).into()),
    };
    let options = ScreenOptions {
        control: *control,
        statistics: StatisticSet::from_list(&[flavor]),
    };
    let result = screening::screen(data, &ConditioningSet::empty(), &options)?;
    let statistics = result.records.iter().map(|r| r.statistic(flavor)).collect();
    Ok(BaselineResult {
        method,
        statistics,
        ranking: result.ranking(flavor)?.to_vec(),
        degenerate: Vec::new(),
    })
}

/// Inverse-probability-of-censoring weights `delta_i / S_C(X_i-)`.
///
/// `S_C` is the Kaplan-Meier estimate of the censoring distribution, with
/// the roles of events and censorings swapped. At tied times events are
/// taken to precede censorings, so a censoring at `t` does not reduce the
/// weight of an event at `t`.
pub fn ipw_weights(data: &SurvivalDataset) -> Result<Vec<f64>, BaselineError> {
    data.validate()?;
    let order = data.sorted_index();
    let times = data.times();
    let events = data.events();
    let n = data.n();
    let mut weights = vec![0.0; n];
    let mut surv = 1.0f64;
    let mut start = 0;
    while start < n {
        let t = times[order[start]];
        let mut end = start;
        let mut censored = 0usize;
        while end < n && times[order[end]] == t {
            if !events[order[end]] {
                censored += 1;
            }
            end += 1;
        }
        for &i in &order[start..end] {
            if events[i] {
                weights[i] = 1.0 / surv.max(KM_FLOOR);
            }
        }
        let at_risk = (n - start) as f64;
        surv *= 1.0 - censored as f64 / at_risk;
        start = end;
    }
    Ok(weights)
}

/// `|weighted Pearson correlation(X, Z_j)|` with IPW weights.
pub fn cors(data: &SurvivalDataset, log_time: bool) -> Result<BaselineResult, BaselineError> {
    let weights = ipw_weights(data)?;
    let mut y = data.times().to_vec();
    if log_time {
        for (row, (t, w)) in y.iter_mut().zip(&weights).enumerate() {
            if *w > 0.0 {
                if !(*t > 0.0) {
                    return Err(BaselineError::NonPositiveTime { row, time: *t });
                }
                *t = t.ln();
            }
        }
    }
    let total: f64 = weights.iter().sum();
    let wmean = |v: &[f64]| v.iter().zip(&weights).map(|(a, w)| w * a).sum::<f64>() / total;
    let my = wmean(&y);
    let yc: Vec<f64> = y.iter().map(|v| v - my).collect();
    let syy: f64 = yc.iter().zip(&weights).map(|(a, w)| w * a * a).sum();

    let stats: Vec<(f64, bool)> = (0..data.p())
        .into_par_iter()
        .map(|j| {
            let z = data.column(j);
            let mz = wmean(z);
            let (mut szz, mut szy) = (0.0, 0.0);
            for i in 0..z.len() {
                let zc = z[i] - mz;
                szz += weights[i] * zc * zc;
                szy += weights[i] * zc * yc[i];
            }
            let denom = (szz * syy).sqrt();
            if !(denom > 0.0) || !denom.is_finite() {
                (0.0, true)
            } else {
                ((szy / denom).abs().min(1.0), false)
            }
        })
        .collect();
    let degenerate = stats.iter().enumerate().filter(|(_, s)| s.1).map(|(j, _)| j).collect();
    let statistics = stats.into_iter().map(|s| Some(s.0)).collect();
    Ok(BaselineResult::from_statistics(BaselineMethod::Cors, statistics, degenerate))
}

/// IPW rank concordance between survival and each covariate:
///
/// `|sum_{i event} sum_{k: X_k > X_i} w_i sign(Z_kj - Z_ij)| / sum_{i event} sum_{k: X_k > X_i} w_i`.
///
/// Only the ordering of each covariate enters, so the statistic is
/// invariant to strictly increasing transforms, and it lies in `[0, 1]`.
pub fn cris(data: &SurvivalDataset) -> Result<BaselineResult, BaselineError> {
    let weights = ipw_weights(data)?;
    let order = data.sorted_index();
    let times = data.times();
    let n = data.n();
    // For the subject at sorted position s, later subjects strictly after its
    // time start at `later[s]`.
    let mut later = vec![n; n];
    for s in (0..n).rev() {
        later[s] = if s + 1 < n && times[order[s + 1]] > times[order[s]] {
            s + 1
        } else if s + 1 < n {
            later[s + 1]
        } else {
            n
        };
    }
    let anchors: Vec<(usize, usize)> = (0..n)
        .filter(|&s| weights[order[s]] > 0.0 && later[s] < n)
        .map(|s| (order[s], later[s]))
        .collect();
    let denom: f64 = anchors.iter().map(|&(i, from)| weights[i] * (n - from) as f64).sum();

    let statistics: Vec<Option<f64>> = (0..data.p())
        .into_par_iter()
        .map(|j| {
            if !(denom > 0.0) {
                return Some(0.0);
            }
            let z = data.column(j);
            let num: f64 = anchors
                .iter()
                .map(|&(i, from)| {
                    let zi = z[i];
                    let s: f64 = order[from..]
                        .iter()
                        .map(|&k| match z[k].partial_cmp(&zi) {
                            Some(std::cmp::Ordering::Greater) => 1.0,
                            Some(std::cmp::Ordering::Less) => -1.0,
                            _ => 0.0,
                        })
                        .sum();
                    weights[i] * s
                })
                .sum();
            Some((num / denom).abs().min(1.0))
        })
        .collect();
    let degenerate = if denom > 0.0 { Vec::new() } else { (0..data.p()).collect() };
    Ok(BaselineResult::from_statistics(BaselineMethod::Cris, statistics, degenerate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{calibrate_censoring, Example, SimConfig};
    use proptest::prelude::*;

    fn dataset(times: &[f64], events: &[bool], cols: Vec<Vec<f64>>) -> SurvivalDataset {
        SurvivalDataset::from_columns(times.to_vec(), events.to_vec(), cols).unwrap()
    }

    fn sim(example: Example, n: usize, p: usize, seed: u64, target: f64) -> SimConfig {
        let mut cfg = SimConfig::example(example, n, p, seed);
        cfg.censor_target = target;
        cfg.censor_upper = Some(calibrate_censoring(&cfg, target, 50).unwrap().censor_upper);
        cfg
    }

    /// Product-limit estimate evaluated directly at each time.
    fn km_oracle(times: &[f64], events: &[bool]) -> Vec<f64> {
        let n = times.len();
        (0..n)
            .map(|i| {
                if !events[i] {
                    return 0.0;
                }
                let mut cens_times: Vec<f64> = (0..n).filter(|&k| !events[k] && times[k] < times[i]).map(|k| times[k]).collect();
                cens_times.sort_by(f64::total_cmp);
                cens_times.dedup();
                let s: f64 = cens_times
                    .iter()
                    .map(|&t| {
                        let d = (0..n).filter(|&k| !events[k] && times[k] == t).count() as f64;
                        let y = (0..n).filter(|&k| times[k] >= t).count() as f64;
                        1.0 - d / y
                    })
                    .product();
                1.0 / s.max(KM_FLOOR)
            })
            .collect()
    }

    fn cris_oracle(times: &[f64], events: &[bool], z: &[f64], w: &[f64]) -> f64 {
        let n = times.len();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            if !events[i] {
                continue;
            }
            for k in 0..n {
                if times[i] < times[k] {
                    let lt = if z[i] < z[k] { 1.0 } else { 0.0 };
                    let gt = if z[i] > z[k] { 1.0 } else { 0.0 };
                    num += w[i] * (lt - gt);
                    den += w[i];
                }
            }
        }
        (num / den).abs()
    }

    #[test]
    fn no_censoring_gives_unit_weights() {
        let d = dataset(&[1.0, 2.0, 3.0], &[true, true, true], vec![vec![0.0, 1.0, 0.5]]);
        assert_eq!(ipw_weights(&d).unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn two_subject_weights() {
        let d = dataset(&[1.0, 2.0], &[true, false], vec![vec![0.0, 1.0]]);
        assert_eq!(ipw_weights(&d).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn all_censored_is_an_error() {
        let d = dataset(&[1.0, 2.0], &[false, false], vec![vec![0.0, 1.0]]);
        assert!(ipw_weights(&d).is_err());
    }

    #[test]
    fn psis_is_marginal_screening() {
        let cfg = sim(Example::Two, 80, 15, 3, 0.2);
        let d = cfg.generate(0).dataset;
        let control = FitControl::default();
        let full = screening::screen(
            &d,
            &ConditioningSet::empty(),
            &ScreenOptions {
                control,
                statistics: StatisticSet::all(),
            },
        )
        .unwrap();
        for stat in [Statistic::Wald, Statistic::Plik] {
            let b = psis(&d, stat, &control).unwrap();
            let expected: Vec<Option<f64>> = full.records.iter().map(|r| r.statistic(stat)).collect();
            assert_eq!(b.statistics, expected);
            assert_eq!(b.ranking, full.ranking(stat).unwrap());
        }
        assert!(psis(&d, Statistic::Mple, &control).is_err());
    }

    #[test]
    fn single_covariate_ranking() {
        let d = dataset(&[1.0, 2.0, 3.0, 4.0], &[true, true, false, true], vec![vec![0.3, -1.0, 0.2, 0.9]]);
        for m in BaselineMethod::ALL {
            assert_eq!(run_baseline(&d, m, &BaselineOptions::default()).unwrap().ranking, vec![0]);
        }
    }

    #[test]
    fn cors_perfect_correlation() {
        let t = [1.0, 2.5, 3.0, 4.2, 7.0];
        let d = dataset(&t, &[true; 5], vec![t.to_vec(), vec![5.0, 3.0, 1.0, 2.0, 4.0]]);
        let r = cors(&d, false).unwrap();
        assert!((r.statistics[0].unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.ranking[0], 0);
    }

    #[test]
    fn cors_equal_weights_is_pearson_on_events() {
        let t = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let z = vec![0.5, -0.2, 1.1, 0.3, 2.0, -1.0];
        let d = dataset(&t, &[true; 6], vec![z.clone()]);
        let mx = 3.5;
        let mz = z.iter().sum::<f64>() / 6.0;
        let sxy: f64 = t.iter().zip(&z).map(|(a, b)| (a - mx) * (b - mz)).sum();
        let sxx: f64 = t.iter().map(|a| (a - mx).powi(2)).sum();
        let szz: f64 = z.iter().map(|b| (b - mz).powi(2)).sum();
        let expected = (sxy / (sxx * szz).sqrt()).abs();
        assert!((cors(&d, false).unwrap().statistics[0].unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn cors_flags_constant_weighted_column() {
        // Only the event rows carry weight; the covariate is constant there.
        let d = dataset(&[1.0, 2.0, 3.0], &[true, true, false], vec![vec![1.0, 1.0, 5.0]]);
        let r = cors(&d, false).unwrap();
        assert_eq!(r.statistics[0], Some(0.0));
        assert_eq!(r.degenerate, vec![0]);
    }

    #[test]
    fn cors_noise_is_small() {
        let cfg = sim(Example::Two, 200, 5, 8, 0.2);
        let mut total = 0.0;
        for rep in 0..20 {
            total += cors(&cfg.generate(rep).dataset, false).unwrap().statistics[2].unwrap();
        }
        assert!(total / 20.0 < 0.1);
    }

    #[test]
    fn cris_perfect_concordance_is_maximal() {
        let t = [1.0, 2.0, 3.0, 4.0, 5.0];
        let d = dataset(&t, &[true; 5], vec![vec![0.3, 0.1, 0.5, 0.2, 0.4], t.to_vec()]);
        let r = cris(&d).unwrap();
        assert!((r.statistics[1].unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.ranking[0], 1);
    }

    #[test]
    fn cris_matches_pair_enumeration() {
        let t = [2.0, 1.0, 5.0, 3.0, 3.0, 4.0];
        let e = [true, false, true, true, false, true];
        let z = vec![0.4, 1.2, -0.3, 0.4, 2.2, 0.0];
        let d = dataset(&t, &e, vec![z.clone()]);
        let w = km_oracle(&t, &e);
        let got = cris(&d).unwrap().statistics[0].unwrap();
        assert!((got - cris_oracle(&t, &e, &z, &w)).abs() < 1e-12);
    }

    #[test]
    fn cris_is_rank_invariant() {
        let cfg = sim(Example::One, 60, 8, 2, 0.3);
        let d = cfg.generate(0).dataset;
        let base = cris(&d).unwrap();
        let transforms: [fn(f64) -> f64; 3] = [f64::exp, |v| v * v * v, |v| 3.0 * v - 7.0];
        for f in transforms {
            for j in 0..d.p() {
                let moved = d.with_column_replaced(j, d.column(j).iter().map(|&v| f(v)).collect()).unwrap();
                assert_eq!(cris(&moved).unwrap().statistics[j], base.statistics[j]);
            }
        }
    }

    #[test]
    fn example3_hides_last_covariate_from_marginal_methods() {
        let cfg = sim(Example::Three, 100, 200, 11, 0.2);
        let d = cfg.generate(0).dataset;
        for m in BaselineMethod::ALL {
            let r = run_baseline(&d, m, &BaselineOptions::default()).unwrap();
            let pos = r.ranking.iter().position(|&j| j == 199).unwrap();
            assert!(pos >= 20, "{m}: last covariate ranked {pos}");
        }
    }

    #[test]
    fn log_time_rejects_zero_event_time() {
        let d = dataset(&[0.0, 1.0, 2.0], &[true, true, true], vec![vec![1.0, 2.0, 0.5]]);
        assert!(cors(&d, true).is_err());
        assert!(cors(&d, false).is_ok());
    }

    #[test]
    fn method_names_round_trip() {
        for m in BaselineMethod::ALL {
            assert_eq!(m.as_str().parse::<BaselineMethod>().unwrap(), m);
        }
        assert!("lasso".parse::<BaselineMethod>().is_err());
    }

    proptest! {
        #[test]
        fn weights_match_product_limit(
            rows in prop::collection::vec((1u8..12, any::<bool>()), 3..30)
        ) {
            let mut times: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
            let mut events: Vec<bool> = rows.iter().map(|r| r.1).collect();
            times.push(0.5);
            events.push(true);
            let d = dataset(&times, &events, vec![(0..times.len()).map(|i| i as f64).collect()]);
            let got = ipw_weights(&d).unwrap();
            let want = km_oracle(&times, &events);
            for (a, b) in got.iter().zip(&want) {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!(a.is_finite() && *a >= 0.0);
            }
        }

        #[test]
        fn statistics_are_in_unit_interval(
            rows in prop::collection::vec((0.1f64..10.0, any::<bool>(), -3.0f64..3.0, -3.0f64..3.0), 4..25)
        ) {
            let mut events: Vec<bool> = rows.iter().map(|r| r.1).collect();
            events[0] = true;
            let times: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let d = dataset(&times, &events, vec![
                rows.iter().map(|r| r.2).collect(),
                rows.iter().map(|r| r.3).collect(),
            ]);
            for r in [cors(&d, false).unwrap(), cris(&d).unwrap()] {
                for s in r.statistics {
                    let s = s.unwrap();
                    prop_assert!((-1e-12..=1.0 + 1e-12).contains(&s));
                }
            }
            let w = ipw_weights(&d).unwrap();
            let z: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let oracle = cris_oracle(&times, &events, &z, &w);
            if oracle.is_finite() {
                prop_assert!((cris(&d).unwrap().statistics[0].unwrap() - oracle).abs() < 1e-12);
            }
        }
    }
}
