//! Screening-quality metrics and replicate aggregation.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("active covariate {0} does not appear in the ranking")]
    MissingActive(usize),
    #[error("selection budget must be at least 1")]
    ZeroBudget,
    #[error("no scores to summarize")]
    Empty,
    #[error("scores mix methods '{0}' and '{1}'")]
    MixedMethods(String, String),
    #[error("group '{0}' has fewer than 2 values")]
    TooFewValues(String),
    #[error("density grid needs at least 2 increasing points")]
    BadGrid,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Minimum model size: the shortest ranking prefix containing every active
/// covariate outside the conditioning set, plus the size of that set.
pub fn mms(ranking: &[usize], true_active: &[usize], conditioning: &[usize]) -> Result<usize, MetricsError> {
    let mut worst = 0;
    for &a in true_active.iter().filter(|a| !conditioning.contains(a)) {
        let pos = ranking
            .iter()
            .position(|&j| j == a)
            .ok_or(MetricsError::MissingActive(a))?;
        worst = worst.max(pos + 1);
    }
    Ok(worst + conditioning.len())
}

/// Share of active covariates found in the conditioning set or the first
/// `budget` ranked covariates. An empty active set counts as fully found.
pub fn tpr(ranking: &[usize], true_active: &[usize], budget: usize, conditioning: &[usize]) -> Result<f64, MetricsError> {
    if budget == 0 {
        return Err(MetricsError::ZeroBudget);
    }
    if true_active.is_empty() {
        return Ok(1.0);
    }
    let head = &ranking[..budget.min(ranking.len())];
    let found = true_active
        .iter()
        .filter(|a| conditioning.contains(a) || head.contains(a))
        .count();
    Ok(found as f64 / true_active.len() as f64)
}

/// Whether every active covariate outside `C` is within the first `k`.
pub fn sure_screened(ranking: &[usize], true_active: &[usize], k: usize, conditioning: &[usize]) -> bool {
    let head = &ranking[..k.min(ranking.len())];
    true_active
        .iter()
        .all(|a| conditioning.contains(a) || head.contains(a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateScore {
    pub method: String,
    pub replicate_id: u64,
    pub mms: usize,
    pub tpr: f64,
    pub sure_screened: bool,
    /// Per-covariate fits that failed and were ranked last.
    pub fit_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub method: String,
    pub config_id: String,
    pub median_mms: f64,
    pub iqr_mms: f64,
    pub median_tpr: f64,
    pub iqr_tpr: f64,
    pub sure_rate: f64,
    pub replicates: usize,
    /// Replicates where the method failed outright and produced no score.
    pub failures: usize,
}

/// Linearly interpolated quantile of sorted data (the "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn median_iqr(mut values: Vec<f64>) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&values, 0.25);
    let q3 = quantile_sorted(&values, 0.75);
    (quantile_sorted(&values, 0.5), q3 - q1)
}

pub fn summarize(config_id: &str, scores: &[ReplicateScore]) -> Result<BenchmarkSummary, MetricsError> {
    let first = scores.first().ok_or(MetricsError::Empty)?;
    if let Some(other) = scores.iter().find(|s| s.method != first.method) {
        return Err(MetricsError::MixedMethods(first.method.clone(), other.method.clone()));
    }
    let (median_mms, iqr_mms) = median_iqr(scores.iter().map(|s| s.mms as f64).collect());
    let (median_tpr, iqr_tpr) = median_iqr(scores.iter().map(|s| s.tpr).collect());
    let sure = scores.iter().filter(|s| s.sure_screened).count();
    Ok(BenchmarkSummary {
        method: first.method.clone(),
        config_id: config_id.to_owned(),
        median_mms,
        iqr_mms,
        median_tpr,
        iqr_tpr,
        sure_rate: sure as f64 / scores.len() as f64,
        replicates: scores.len(),
        failures: 0,
    })
}

pub fn write_summary_csv<W: Write>(writer: W, summaries: &[BenchmarkSummary]) -> Result<(), MetricsError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for s in summaries {
        wtr.serialize(s)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_scores_csv<W: Write>(writer: W, config_id: &str, scores: &[ReplicateScore]) -> Result<(), MetricsError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["method", "config_id", "replicate", "mms", "tpr", "sure_screened", "fit_failures"])?;
    for s in scores {
        wtr.write_record([
            s.method.clone(),
            config_id.to_owned(),
            s.replicate_id.to_string(),
            s.mms.to_string(),
            format!("{:?}", s.tpr),
            s.sure_screened.to_string(),
            s.fit_failures.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Gaussian kernel bandwidth `0.9 min(sd, IQR/1.34) n^(-1/5)`; falls back to
/// `sd` when the IQR is zero. `None` for zero spread.
pub fn silverman_bandwidth(values: &[f64]) -> Option<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 0.0) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Some(0.9 * spread * n.powf(-0.2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub group: String,
    pub bandwidth: f64,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTable {
    pub grid: Vec<f64>,
    pub curves: Vec<DensityCurve>,
    /// Groups with zero spread, reported as `(group, value)` instead of a curve.
    pub point_masses: Vec<(String, f64)>,
}

impl DensityTable {
    /// Tidy `group,x,density` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), MetricsError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["group", "x", "density"])?;
        for c in &self.curves {
            for (x, d) in self.grid.iter().zip(&c.density) {
                wtr.write_record([c.group.clone(), format!("{x:?}"), format!("{d:?}")])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Trapezoid-rule integral of each curve over the grid.
    pub fn integrals(&self) -> Vec<f64> {
        self.curves
            .iter()
            .map(|c| {
                self.grid
                    .windows(2)
                    .zip(c.density.windows(2))
                    .map(|(x, d)| 0.5 * (x[1] - x[0]) * (d[0] + d[1]))
                    .sum()
            })
            .collect()
    }
}

/// An evenly spaced grid spanning every group's values padded by four of
/// its bandwidths.
pub fn shared_grid(groups: &[(String, Vec<f64>)], points: usize) -> Vec<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, values) in groups {
        let pad = if values.len() >= 2 {
            4.0 * silverman_bandwidth(values).unwrap_or(0.0)
        } else {
            0.0
        };
        for &v in values {
            lo = lo.min(v - pad);
            hi = hi.max(v + pad);
        }
    }
    if !(hi > lo) {
        let c = if lo.is_finite() { lo } else { 0.0 };
        lo = c - 1.0;
        hi = c + 1.0;
    }
    let points = points.max(2);
    (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect()
}

pub fn export_density_data(groups: &[(String, Vec<f64>)], grid: &[f64]) -> Result<DensityTable, MetricsError> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(MetricsError::BadGrid);
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut curves = Vec::new();
    let mut point_masses = Vec::new();
    for (group, values) in groups {
        if values.len() < 2 {
            return Err(MetricsError::TooFewValues(group.clone()));
        }
        let Some(h) = silverman_bandwidth(values) else {
            point_masses.push((group.clone(), values[0]));
            continue;
        };
        let scale = norm / (values.len() as f64 * h);
        let density = grid
            .iter()
            .map(|&x| scale * values.iter().map(|v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum::<f64>())
            .collect();
        curves.push(DensityCurve {
            group: group.clone(),
            bandwidth: h,
            density,
        });
    }
    Ok(DensityTable {
        grid: grid.to_vec(),
        curves,
        point_masses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::SimRng;
    use proptest::prelude::*;

    fn score(method: &str, mms: usize, tpr: f64) -> ReplicateScore {
        ReplicateScore {
            method: method.into(),
            replicate_id: 0,
            mms,
            tpr,
            sure_screened: mms <= 3,
            fit_failures: 0,
        }
    }

    #[test]
    fn mms_examples() {
        assert_eq!(mms(&[0, 1, 2, 3, 4, 5, 6], &[0, 1, 2, 3, 4], &[]).unwrap(), 5);
        let ranking: Vec<usize> = (1..1000).collect();
        assert_eq!(mms(&ranking, &[0, 999], &[0]).unwrap(), 1000);
        assert!(matches!(mms(&[1, 2], &[7], &[]), Err(MetricsError::MissingActive(7))));
    }

    #[test]
    fn tpr_examples() {
        assert_eq!(tpr(&[0, 1, 2], &[0, 1], 2, &[]).unwrap(), 1.0);
        assert_eq!(tpr(&[2, 3, 0, 1], &[0, 1], 2, &[]).unwrap(), 0.0);
        let ranking: Vec<usize> = std::iter::once(999).chain(1..999).collect();
        assert_eq!(tpr(&ranking, &[0, 999], 100, &[0]).unwrap(), 1.0);
        assert!(tpr(&[0], &[0], 0, &[]).is_err());
    }

    #[test]
    fn summarize_examples() {
        let s = summarize("x", &[score("a", 1, 0.5), score("a", 3, 1.0), score("a", 2, 0.0)]).unwrap();
        assert_eq!((s.median_mms, s.iqr_mms), (2.0, 1.0));
        assert_eq!((s.median_tpr, s.iqr_tpr), (0.5, 0.5));
        assert_eq!(s.replicates, 3);
        let one = summarize("x", &[score("a", 7, 0.2)]).unwrap();
        assert_eq!((one.iqr_mms, one.iqr_tpr), (0.0, 0.0));
        assert!(summarize("x", &[score("a", 1, 0.0), score("b", 1, 0.0)]).is_err());
        assert!(summarize("x", &[]).is_err());
    }

    #[test]
    fn standard_normal_density_at_zero() {
        let mut rng = SimRng::new(17, 0);
        let values: Vec<f64> = (0..10000).map(|_| rng.normal()).collect();
        let grid: Vec<f64> = (-400..=400).map(|k| k as f64 / 100.0).collect();
        let table = export_density_data(&[("z".into(), values)], &grid).unwrap();
        assert!((table.curves[0].density[400] - 0.3989).abs() < 0.03);
        assert!((table.integrals()[0] - 1.0).abs() < 0.01);
    }

    #[test]
    fn identical_groups_give_identical_curves() {
        let values = vec![0.1, 0.5, 0.2, 0.9, 0.4];
        let groups = vec![("a".to_owned(), values.clone()), ("b".to_owned(), values)];
        let grid = shared_grid(&groups, 400);
        let table = export_density_data(&groups, &grid).unwrap();
        assert_eq!(table.curves[0].density, table.curves[1].density);
        for i in table.integrals() {
            assert!((i - 1.0).abs() < 0.01, "{i}");
        }
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 2 * 400);
    }

    #[test]
    fn constant_group_is_a_point_mass() {
        let groups = vec![("c".to_owned(), vec![2.0; 5]), ("v".to_owned(), vec![1.0, 2.0, 3.0])];
        let grid = shared_grid(&groups, 100);
        let table = export_density_data(&groups, &grid).unwrap();
        assert_eq!(table.point_masses, vec![("c".to_owned(), 2.0)]);
        assert_eq!(table.curves.len(), 1);
        assert!(export_density_data(&[("s".into(), vec![1.0])], &grid).is_err());
    }

    fn order_stat_oracle(values: &[f64], q: f64) -> f64 {
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let pos = q * (s.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        s[lo] * (1.0 - (pos - lo as f64)) + s[hi] * (pos - lo as f64)
    }

    proptest! {
        #[test]
        fn mms_matches_scan(perm in Just((0..20usize).collect::<Vec<_>>()).prop_shuffle(), k in 1usize..5) {
            let active: Vec<usize> = (0..k).collect();
            let mut expected = 0;
            for size in 0..=perm.len() {
                if active.iter().all(|a| perm[..size].contains(a)) {
                    expected = size;
                    break;
                }
            }
            prop_assert_eq!(mms(&perm, &active, &[]).unwrap(), expected);
            // Moving an active covariate to the front never increases mms.
            let mut better = perm.clone();
            let at = better.iter().position(|&j| j == 0).unwrap();
            let v = better.remove(at);
            better.insert(0, v);
            prop_assert!(mms(&better, &active, &[]).unwrap() <= expected);
        }

        #[test]
        fn tpr_monotone_in_budget(perm in Just((0..30usize).collect::<Vec<_>>()).prop_shuffle()) {
            let active = [3, 7, 11];
            let mut last = 0.0;
            for b in 1..=30 {
                let v = tpr(&perm, &active, b, &[]).unwrap();
                prop_assert!(v >= last && (0.0..=1.0).contains(&v));
                last = v;
            }
            prop_assert!(sure_screened(&perm, &active, 30, &[]));
        }

        #[test]
        fn summarize_matches_order_statistics(values in prop::collection::vec(0usize..500, 1..40)) {
            let scores: Vec<ReplicateScore> = values.iter().map(|&m| score("a", m, m as f64 / 500.0)).collect();
            let s = summarize("c", &scores).unwrap();
            let f: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            prop_assert!((s.median_mms - order_stat_oracle(&f, 0.5)).abs() < 1e-9);
            prop_assert!((s.iqr_mms - (order_stat_oracle(&f, 0.75) - order_stat_oracle(&f, 0.25))).abs() < 1e-9);
            let mut rev = scores.clone();
            rev.reverse();
            prop_assert_eq!(summarize("c", &rev).unwrap(), s);
        }
    }
}
