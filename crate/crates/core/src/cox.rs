//! Newton solver for low-dimensional Cox partial likelihood.
//!
//! Ties use the Breslow convention: every event at a tied time shares the
//! full risk-set denominator. All sums run over the time-sorted order in a
//! single backwards sweep, so one evaluation costs `O(n d^2)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::SurvivalDataset;

/// Largest acceptable condition number of the observed information.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("information matrix is singular or ill-conditioned (condition number {condition:e}); model is nonidentifiable")]
    NonIdentifiable { condition: f64 },
    #[error("separation: coefficient of covariate {column} diverges (reached {value})")]
    Separation { column: usize, value: f64 },
    #[error("non-finite partial likelihood term at event time {time}")]
    NonFinite { time: f64 },
    #[error("{d} parameters cannot be fitted with {n} observations")]
    TooManyParameters { d: usize, n: usize },
    #[error("expected {expected} coefficients, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("covariate index {index} out of range for p = {p}")]
    ColumnOutOfRange { index: usize, p: usize },
    #[error("invalid fit control: {0}")]
    InvalidControl(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitControl {
    pub max_iterations: usize,
    pub score_tolerance: f64,
    pub step_halving_limit: usize,
    pub coefficient_bound: f64,
}

impl Default for FitControl {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            score_tolerance: 1e-8,
            step_halving_limit: 20,
            coefficient_bound: 50.0,
        }
    }
}

impl FitControl {
    pub fn check(&self) -> Result<(), FitError> {
        if self.max_iterations == 0 {
            return Err(FitError::InvalidControl("max_iterations must be positive"));
        }
        if !(self.score_tolerance > 0.0) {
            return Err(FitError::InvalidControl("score_tolerance must be positive"));
        }
        if self.step_halving_limit == 0 {
            return Err(FitError::InvalidControl("step_halving_limit must be positive"));
        }
        if !(self.coefficient_bound > 0.0) {
            return Err(FitError::InvalidControl("coefficient_bound must be positive"));
        }
        Ok(())
    }
}

/// Result of a maximum partial likelihood fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    /// Covariate indices, in coefficient order.
    pub columns: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub loglik: f64,
    pub score_norm: f64,
    /// Observed information `-dV/dbeta` at the solution, row-major.
    pub information: Vec<Vec<f64>>,
    /// Diagonal of the inverse information.
    pub variances: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl CoxFit {
    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn information_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |r, c| self.information[r][c])
    }

    pub fn standard_errors(&self) -> Vec<f64> {
        self.variances.iter().map(|v| v.sqrt()).collect()
    }
}

/// `[I^{-1}]_{d,d}`: the variance estimate of the last coefficient.
pub fn variance_of_last_coordinate(fit: &CoxFit) -> Result<f64, FitError> {
    if !fit.converged || fit.dim() == 0 {
        return Err(FitError::NonIdentifiable {
            condition: f64::INFINITY,
        });
    }
    let inv = guarded_inverse(&fit.information_matrix())?;
    let d = fit.dim();
    let v = inv[(d - 1, d - 1)];
    if v > 0.0 {
        Ok(v)
    } else {
        Err(FitError::NonIdentifiable {
            condition: f64::INFINITY,
        })
    }
}

/// Log partial likelihood with Breslow ties.
pub fn log_partial_likelihood(
    data: &SurvivalDataset,
    columns: &[usize],
    beta: &[f64],
) -> Result<f64, FitError> {
    let design = Design::new(data, columns)?;
    design.check_beta(beta)?;
    Ok(design.evaluate(beta, false)?.loglik)
}

/// Score vector `V(beta)` and observed information `I(beta) = -dV/dbeta`.
pub fn score_and_information(
    data: &SurvivalDataset,
    columns: &[usize],
    beta: &[f64],
) -> Result<(Vec<f64>, DMatrix<f64>), FitError> {
    let design = Design::new(data, columns)?;
    design.check_beta(beta)?;
    let ev = design.evaluate(beta, true)?;
    let d = columns.len();
    Ok((ev.score, DMatrix::from_row_slice(d, d, &ev.information)))
}

/// Maximizes the partial likelihood over the coefficients of `columns`.
///
/// Starts at `init` (or zero) and takes Newton steps, halving a step until
/// the likelihood does not decrease. Returns `Ok` with `converged = false`
/// when the iteration budget runs out without a classified failure.
pub fn fit(
    data: &SurvivalDataset,
    columns: &[usize],
    control: &FitControl,
    init: Option<&[f64]>,
) -> Result<CoxFit, FitError> {
    control.check()?;
    let design = Design::new(data, columns)?;
    let d = columns.len();
    if d + 1 > data.n() {
        return Err(FitError::TooManyParameters { d, n: data.n() });
    }
    let mut beta = match init {
        Some(b) => {
            design.check_beta(b)?;
            b.to_vec()
        }
        None => vec![0.0; d],
    };
    let mut current = design.evaluate(&beta, true)?;
    if d == 0 {
        return Ok(CoxFit {
            columns: Vec::new(),
            coefficients: Vec::new(),
            loglik: current.loglik,
            score_norm: 0.0,
            information: Vec::new(),
            variances: Vec::new(),
            iterations: 0,
            converged: true,
        });
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut inverse;
    loop {
        inverse = guarded_inverse(&current.information_matrix(d))?;
        let score = DVector::from_column_slice(&current.score);
        let score_norm = score.norm();
        let step = &inverse * &score;
        if score_norm <= control.score_tolerance {
            // A vanishing score with a non-vanishing Newton step means the
            // likelihood is still rising along a direction of recession.
            let (k, runaway) = step
                .iter()
                .enumerate()
                .map(|(k, s)| (k, s.abs() / (1.0 + beta[k].abs())))
                .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if runaway > RECESSION_STEP {
                return Err(FitError::Separation {
                    column: columns[k],
                    value: beta[k],
                });
            }
            converged = true;
            break;
        }
        if iterations >= control.max_iterations {
            break;
        }
        iterations += 1;

        let slack = 1e-12 * (1.0 + current.loglik.abs());
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=control.step_halving_limit {
            let candidate: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            match design.evaluate(&candidate, true) {
                Ok(ev) if ev.loglik >= current.loglik - slack => {
                    accepted = Some((candidate, ev));
                    break;
                }
                Ok(_) | Err(FitError::NonFinite { .. }) => scale *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((next_beta, next)) = accepted else {
            break;
        };
        beta = next_beta;
        current = next;
        if let Some((k, &v)) = beta
            .iter()
            .enumerate()
            .find(|(_, v)| v.abs() > control.coefficient_bound)
        {
            return Err(FitError::Separation {
                column: columns[k],
                value: v,
            });
        }
    }

    let score_norm = current.score.iter().map(|s| s * s).sum::<f64>().sqrt();
    let information = current.information_matrix(d);
    Ok(CoxFit {
        columns: columns.to_vec(),
        coefficients: beta,
        loglik: current.loglik,
        score_norm,
        information: (0..d).map(|r| information.row(r).iter().copied().collect()).collect(),
        variances: (0..d).map(|k| inverse[(k, k)]).collect(),
        iterations,
        converged,
    })
}

/// Relative Newton step that still counts as movement once the score has
/// vanished.
const RECESSION_STEP: f64 = 1e-4;

/// Inverse of a symmetric information matrix, refusing near-singular input.
pub(crate) fn guarded_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>, FitError> {
    let d = m.nrows();
    if d == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let condition = if d == 1 {
        if m[(0, 0)] > 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        let eig = m.clone().symmetric_eigen().eigenvalues;
        let max = eig.max();
        let min = eig.min();
        if max > 0.0 && min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    };
    if !(condition <= CONDITION_LIMIT) {
        return Err(FitError::NonIdentifiable { condition });
    }
    if let Some(chol) = m.clone().cholesky() {
        return Ok(chol.inverse());
    }
    m.clone()
        .lu()
        .try_inverse()
        .ok_or(FitError::NonIdentifiable { condition })
}

struct Evaluation {
    loglik: f64,
    score: Vec<f64>,
    information: Vec<f64>,
}

impl Evaluation {
    fn information_matrix(&self, d: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(d, d, &self.information)
    }
}

/// Selected covariate columns, centered. Centering leaves the partial
/// likelihood unchanged and keeps the second-moment sums well conditioned.
struct Design<'a> {
    data: &'a SurvivalDataset,
    columns: Vec<Vec<f64>>,
}

impl<'a> Design<'a> {
    fn new(data: &'a SurvivalDataset, columns: &[usize]) -> Result<Self, FitError> {
        let n = data.n() as f64;
        let columns = columns
            .iter()
            .map(|&j| {
                if j >= data.p() {
                    return Err(FitError::ColumnOutOfRange { index: j, p: data.p() });
                }
                let col = data.column(j);
                let mean = col.iter().sum::<f64>() / n;
                Ok(col.iter().map(|v| v - mean).collect())
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { data, columns })
    }

    fn check_beta(&self, beta: &[f64]) -> Result<(), FitError> {
        if beta.len() != self.columns.len() {
            return Err(FitError::DimensionMismatch {
                expected: self.columns.len(),
                found: beta.len(),
            });
        }
        Ok(())
    }

    fn evaluate(&self, beta: &[f64], derivatives: bool) -> Result<Evaluation, FitError> {
        let d = self.columns.len();
        let n = self.data.n();
        let time = self.data.times();
        let event = self.data.events();
        let order = self.data.sorted_index();

        let eta: Vec<f64> = (0..n)
            .map(|i| self.columns.iter().zip(beta).map(|(c, b)| c[i] * b).sum())
            .collect();

        // Risk-set sums, all scaled by exp(-shift) where shift is the running
        // maximum of the linear predictor over the risk set.
        let mut shift = f64::NEG_INFINITY;
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; d];
        let mut s2 = vec![0.0; d * d];

        let mut loglik = 0.0;
        let mut score = vec![0.0; d];
        let mut information = vec![0.0; d * d];
        let mut mean = vec![0.0; d];
        let mut z = vec![0.0; d];

        let mut end = n;
        while end > 0 {
            let t = time[order[end - 1]];
            let mut start = end - 1;
            while start > 0 && time[order[start - 1]] == t {
                start -= 1;
            }
            for &i in &order[start..end] {
                if eta[i] > shift {
                    let rescale = (shift - eta[i]).exp();
                    s0 *= rescale;
                    if derivatives {
                        s1.iter_mut().for_each(|v| *v *= rescale);
                        s2.iter_mut().for_each(|v| *v *= rescale);
                    }
                    shift = eta[i];
                }
                let w = (eta[i] - shift).exp();
                s0 += w;
                if derivatives {
                    for (k, zk) in z.iter_mut().enumerate() {
                        *zk = self.columns[k][i];
                        s1[k] += w * *zk;
                    }
                    for a in 0..d {
                        for b in 0..=a {
                            s2[a * d + b] += w * z[a] * z[b];
                        }
                    }
                }
            }
            let mut deaths = 0usize;
            for &i in &order[start..end] {
                if event[i] {
                    deaths += 1;
                    loglik += eta[i];
                    if derivatives {
                        for (k, s) in score.iter_mut().enumerate() {
                            *s += self.columns[k][i];
                        }
                    }
                }
            }
            if deaths > 0 {
                let dd = deaths as f64;
                loglik -= dd * (shift + s0.ln());
                if !loglik.is_finite() {
                    return Err(FitError::NonFinite { time: t });
                }
                if derivatives {
                    for k in 0..d {
                        mean[k] = s1[k] / s0;
                        score[k] -= dd * mean[k];
                    }
                    for a in 0..d {
                        for b in 0..=a {
                            information[a * d + b] += dd * (s2[a * d + b] / s0 - mean[a] * mean[b]);
                        }
                    }
                }
            }
            end = start;
        }
        for a in 0..d {
            for b in 0..a {
                information[b * d + a] = information[a * d + b];
            }
        }
        if derivatives
            && score
                .iter()
                .chain(information.iter())
                .any(|v| !v.is_finite())
        {
            return Err(FitError::NonFinite { time: f64::NAN });
        }
        Ok(Evaluation {
            loglik,
            score,
            information,
        })
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;

    fn dataset(time: &[f64], status: &[u8], cols: Vec<Vec<f64>>) -> SurvivalDataset {
        SurvivalDataset::from_columns(
            time.to_vec(),
            status.iter().map(|&s| s == 1).collect(),
            cols,
        )
        .unwrap()
    }

    /// Direct evaluation from the definition: for each event, enumerate the
    /// subjects with time >= the event time.
    fn brute_loglik(data: &SurvivalDataset, columns: &[usize], beta: &[f64]) -> f64 {
        let eta = |i: usize| -> f64 { columns.iter().zip(beta).map(|(&j, b)| data.column(j)[i] * b).sum() };
        let mut total = 0.0;
        for i in 0..data.n() {
            if !data.events()[i] {
                continue;
            }
            let denom: f64 = (0..data.n())
                .filter(|&k| data.times()[k] >= data.times()[i])
                .map(|k| eta(k).exp())
                .sum();
            total += eta(i) - denom.ln();
        }
        total
    }

    struct Lcg(u64);
    impl Lcg {
        fn uniform(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((self.0 >> 11) as f64 + 0.5) / (1u64 << 53) as f64
        }
        fn normal(&mut self) -> f64 {
            let (u, v) = (self.uniform(), self.uniform());
            (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
        }
    }

    fn random_dataset(rng: &mut Lcg, n: usize, d: usize, ties: bool) -> SurvivalDataset {
        let cols: Vec<Vec<f64>> = (0..d).map(|_| (0..n).map(|_| rng.normal()).collect()).collect();
        let time = (0..n)
            .map(|_| {
                let t = -rng.uniform().ln();
                if ties {
                    (t * 4.0).ceil()
                } else {
                    t
                }
            })
            .collect();
        let status = (0..n).map(|_| rng.uniform() < 0.7).collect();
        let mut status: Vec<bool> = status;
        status[0] = true;
        SurvivalDataset::from_columns(time, status, cols).unwrap()
    }

    #[test]
    fn null_loglik_counts_risk_sets() {
        let d = dataset(&[1.0, 2.0, 2.0, 3.0, 4.0], &[1, 1, 1, 0, 1], vec![vec![0.3, -1.0, 2.0, 0.1, 0.5]]);
        let l = log_partial_likelihood(&d, &[0], &[0.0]).unwrap();
        let expected = -(5f64.ln() + 2.0 * 4f64.ln() + 1f64.ln());
        assert!((l - expected).abs() < 1e-12);
    }

    #[test]
    fn two_subject_loglik() {
        let d = dataset(&[1.0, 2.0], &[1, 1], vec![vec![1.0, 0.0]]);
        let l = log_partial_likelihood(&d, &[0], &[0.0]).unwrap();
        assert!((l + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn loglik_matches_brute_force() {
        let mut rng = Lcg(11);
        for case in 0..50 {
            let data = random_dataset(&mut rng, 5 + case % 20, 3, case % 2 == 0);
            let beta: Vec<f64> = (0..3).map(|_| 2.0 * rng.normal()).collect();
            let fast = log_partial_likelihood(&data, &[0, 1, 2], &beta).unwrap();
            let slow = brute_loglik(&data, &[0, 1, 2], &beta);
            assert!((fast - slow).abs() <= 1e-10 * (1.0 + slow.abs()), "{fast} vs {slow}");
        }
    }

    #[test]
    fn extreme_predictors_do_not_overflow() {
        let d = dataset(&[1.0, 2.0, 3.0], &[1, 1, 0], vec![vec![400.0, -300.0, 10.0]]);
        let l = log_partial_likelihood(&d, &[0], &[3.0]).unwrap();
        assert!(l.is_finite());
        // eta = (1200, -900, 30): the first event term is ~0, the second -900 - 30.
        let slow = -930.0;
        assert!((l - slow).abs() < 1e-9);
    }

    #[test]
    fn score_at_zero_is_observed_minus_expected() {
        let data = dataset(&[1.0, 2.0, 3.0, 4.0], &[1, 0, 1, 1], vec![vec![1.0, 2.0, 4.0, 8.0]]);
        let (score, _) = score_and_information(&data, &[0], &[0.0]).unwrap();
        // event at 1: 1 - 15/4; event at 3: 4 - 12/2; event at 4: 8 - 8
        let expected = (1.0 - 15.0 / 4.0) + (4.0 - 6.0) + 0.0;
        assert!((score[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn score_matches_finite_differences() {
        let mut rng = Lcg(5);
        let h = 1e-5;
        for case in 0..30 {
            let data = random_dataset(&mut rng, 10 + case, 2, case % 3 == 0);
            let beta = [rng.normal(), rng.normal()];
            let (score, info) = score_and_information(&data, &[0, 1], &beta).unwrap();
            for k in 0..2 {
                let mut up = beta;
                let mut dn = beta;
                up[k] += h;
                dn[k] -= h;
                let fd = (log_partial_likelihood(&data, &[0, 1], &up).unwrap()
                    - log_partial_likelihood(&data, &[0, 1], &dn).unwrap())
                    / (2.0 * h);
                assert!((fd - score[k]).abs() <= 1e-6 * score[k].abs().max(1.0));
                let (su, _) = score_and_information(&data, &[0, 1], &up).unwrap();
                let (sd, _) = score_and_information(&data, &[0, 1], &dn).unwrap();
                for r in 0..2 {
                    let jac = -(su[r] - sd[r]) / (2.0 * h);
                    assert!((jac - info[(r, k)]).abs() <= 1e-5 * info[(r, k)].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn constant_column_is_singular() {
        let data = dataset(&[1.0, 2.0, 3.0, 4.0], &[1, 1, 0, 1], vec![vec![2.0; 4]]);
        let err = fit(&data, &[0], &FitControl::default(), None).unwrap_err();
        assert!(matches!(err, FitError::NonIdentifiable { .. }));
    }

    #[test]
    fn duplicate_columns_are_singular() {
        let mut rng = Lcg(3);
        let data = random_dataset(&mut rng, 30, 1, false);
        let data = data.with_column("dup", data.column(0).to_vec()).unwrap();
        let err = fit(&data, &[0, 1], &FitControl::default(), None).unwrap_err();
        assert!(matches!(err, FitError::NonIdentifiable { .. }));
    }

    #[test]
    fn perfect_ordering_is_separation() {
        // Larger covariate always fails first: likelihood increases without bound.
        let data = dataset(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1, 1, 1, 1, 1], vec![vec![5.0, 4.0, 3.0, 2.0, 1.0]]);
        let err = fit(&data, &[0], &FitControl::default(), None).unwrap_err();
        assert!(matches!(err, FitError::Separation { column: 0, .. }), "{err:?}");
    }

    #[test]
    fn one_dimensional_fit_matches_golden_section() {
        let data = dataset(
            &[0.5, 1.2, 1.9, 2.3, 3.7],
            &[1, 1, 0, 1, 1],
            vec![vec![0.8, -0.3, 1.1, 0.4, -1.0]],
        );
        let f = fit(&data, &[0], &FitControl::default(), None).unwrap();
        assert!(f.converged);
        let objective = |b: f64| log_partial_likelihood(&data, &[0], &[b]).unwrap();
        let (mut lo, mut hi) = (-10.0f64, 10.0f64);
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..=400 {
            let b = lo + (hi - lo) * k as f64 / 400.0;
            let v = objective(b);
            if v > best.1 {
                best = (b, v);
            }
        }
        lo = best.0 - 0.05;
        hi = best.0 + 0.05;
        let g = (5f64.sqrt() - 1.0) / 2.0;
        while hi - lo > 1e-10 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if objective(a) < objective(b) {
                lo = a;
            } else {
                hi = b;
            }
        }
        assert!((f.coefficients[0] - 0.5 * (lo + hi)).abs() < 1e-6);
    }

    #[test]
    fn variance_of_last_coordinate_examples() {
        let mut fit1 = CoxFit {
            columns: vec![0],
            coefficients: vec![0.1],
            loglik: -1.0,
            score_norm: 0.0,
            information: vec![vec![4.0]],
            variances: vec![0.25],
            iterations: 1,
            converged: true,
        };
        assert!((variance_of_last_coordinate(&fit1).unwrap() - 0.25).abs() < 1e-15);
        fit1.columns = vec![0, 1];
        fit1.coefficients = vec![0.1, 0.2];
        fit1.information = vec![vec![2.0, 0.0], vec![0.0, 4.0]];
        assert!((variance_of_last_coordinate(&fit1).unwrap() - 0.25).abs() < 1e-15);
        fit1.information = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(variance_of_last_coordinate(&fit1).is_err());
    }

    #[test]
    fn variance_matches_gaussian_elimination() {
        let mut rng = Lcg(21);
        for _ in 0..20 {
            let data = random_dataset(&mut rng, 60, 3, false);
            let f = fit(&data, &[0, 1, 2], &FitControl::default(), None).unwrap();
            let v = variance_of_last_coordinate(&f).unwrap();
            // Solve I x = e_3 by Gauss-Jordan with partial pivoting.
            let mut a: Vec<Vec<f64>> = f.information.clone();
            for (r, row) in a.iter_mut().enumerate() {
                row.push(if r == 2 { 1.0 } else { 0.0 });
            }
            for c in 0..3 {
                let piv = (c..3).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
                a.swap(c, piv);
                for r in 0..3 {
                    if r != c {
                        let factor = a[r][c] / a[c][c];
                        for k in c..4 {
                            a[r][k] -= factor * a[c][k];
                        }
                    }
                }
            }
            let x = a[2][3] / a[2][2];
            assert!((v - x).abs() <= 1e-10 * x.abs().max(1.0), "{v} vs {x}");
            assert!((f.variances[2] - x).abs() <= 1e-10 * x.abs().max(1.0));
        }
    }

    #[test]
    fn fit_is_deterministic_and_warm_start_agrees() {
        let mut rng = Lcg(8);
        let data = random_dataset(&mut rng, 80, 2, true);
        let a = fit(&data, &[0, 1], &FitControl::default(), None).unwrap();
        let b = fit(&data, &[0, 1], &FitControl::default(), None).unwrap();
        assert_eq!(a, b);
        let warm = fit(&data, &[0, 1], &FitControl::default(), Some(&a.coefficients)).unwrap();
        assert!(warm.iterations <= 1);
        for (x, y) in a.coefficients.iter().zip(&warm.coefficients) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_model_reports_null_loglik() {
        let data = dataset(&[1.0, 2.0, 3.0], &[1, 1, 1], vec![vec![0.0, 1.0, 2.0]]);
        let f = fit(&data, &[], &FitControl::default(), None).unwrap();
        assert!(f.converged);
        assert!((f.loglik + 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let data = dataset(&[1.0, 2.0], &[1, 1], vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(matches!(
            fit(&data, &[0, 1], &FitControl::default(), None),
            Err(FitError::TooManyParameters { .. })
        ));
        assert!(matches!(
            log_partial_likelihood(&data, &[0], &[0.0, 1.0]),
            Err(FitError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            log_partial_likelihood(&data, &[7], &[0.0]),
            Err(FitError::ColumnOutOfRange { .. })
        ));
        let bad = FitControl {
            score_tolerance: 0.0,
            ..FitControl::default()
        };
        assert!(bad.check().is_err());
    }
}
