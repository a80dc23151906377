//! Sample versions of the conditional linear expectation and conditional
//! linear covariance, and the signal-strength diagnostic built on them.
//!
//! All moments use denominator `n`, so the sample identities (stability,
//! total expectation) hold exactly up to rounding.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::data::{ConditioningSet, DataError, SurvivalDataset};

/// Relative singular-value cutoff for the pseudo-inverse fallback.
pub const PINV_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum DiagError {
    #[error("need more samples ({n}) than predictors ({d})")]
    TooFewSamples { n: usize, d: usize },
    #[error("sample lengths disagree: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("predictor covariance is singular")]
    Singular,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("covariate {0} is in the conditioning set")]
    InConditioning(usize),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Best affine predictor of `zeta` from `xi` on a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CLEModel {
    pub target_mean: Vec<f64>,
    pub predictor_mean: Vec<f64>,
    /// `A` with `Var(xi) A = Cov(xi, zeta)`; rows index predictors, columns targets.
    pub coefficient_matrix: DMatrix<f64>,
    pub predictor_covariance: DMatrix<f64>,
    /// `Cov(xi, zeta)`, predictors by targets.
    pub cross_covariance: DMatrix<f64>,
    pub pseudo_inverse_used: bool,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn cov(a: &[f64], ma: f64, b: &[f64], mb: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64
}

fn check_lengths(n: usize, columns: &[&[f64]]) -> Result<(), DiagError> {
    match columns.iter().find(|c| c.len() != n) {
        Some(c) => Err(DiagError::LengthMismatch {
            expected: n,
            found: c.len(),
        }),
        None => Ok(()),
    }
}

/// Solves `v X = rhs` for symmetric PSD `v`, by Cholesky or, when allowed,
/// an SVD pseudo-inverse. Returns the solution and whether the fallback ran.
fn solve_psd(v: &DMatrix<f64>, rhs: &DMatrix<f64>, allow_pinv: bool) -> Result<(DMatrix<f64>, bool), DiagError> {
    if v.nrows() == 0 {
        return Ok((DMatrix::zeros(0, rhs.ncols()), false));
    }
    let svd = v.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax > 0.0 && smin > PINV_TOLERANCE * smax {
        if let Some(chol) = v.clone().cholesky() {
            return Ok((chol.solve(rhs), false));
        }
    }
    if !allow_pinv || !(smax > 0.0) {
        return Err(DiagError::Singular);
    }
    let pinv = svd
        .pseudo_inverse(PINV_TOLERANCE * smax)
        .map_err(|_| DiagError::Singular)?;
    Ok((pinv * rhs, true))
}

/// Fits the plug-in closed form `E*(zeta|xi) = E zeta + A'(xi - E xi)` from
/// column samples.
pub fn fit_cle(targets: &[&[f64]], predictors: &[&[f64]], allow_pinv: bool) -> Result<CLEModel, DiagError> {
    let n = targets
        .first()
        .or(predictors.first())
        .map_or(0, |c| c.len());
    check_lengths(n, targets)?;
    check_lengths(n, predictors)?;
    let d = predictors.len();
    if n <= d {
        return Err(DiagError::TooFewSamples { n, d });
    }
    let target_mean: Vec<f64> = targets.iter().map(|c| mean(c)).collect();
    let predictor_mean: Vec<f64> = predictors.iter().map(|c| mean(c)).collect();
    let vxx = DMatrix::from_fn(d, d, |a, b| cov(predictors[a], predictor_mean[a], predictors[b], predictor_mean[b]));
    let cxz = DMatrix::from_fn(d, targets.len(), |a, b| {
        cov(predictors[a], predictor_mean[a], targets[b], target_mean[b])
    });
    let (coef, pseudo_inverse_used) = solve_psd(&vxx, &cxz, allow_pinv)?;
    Ok(CLEModel {
        target_mean,
        predictor_mean,
        coefficient_matrix: coef,
        predictor_covariance: vxx,
        cross_covariance: cxz,
        pseudo_inverse_used,
    })
}

pub fn cle_predict(model: &CLEModel, xi: &[f64]) -> Result<Vec<f64>, DiagError> {
    if xi.len() != model.predictor_mean.len() {
        return Err(DiagError::DimensionMismatch {
            expected: model.predictor_mean.len(),
            found: xi.len(),
        });
    }
    let centered = DVector::from_iterator(xi.len(), xi.iter().zip(&model.predictor_mean).map(|(x, m)| x - m));
    let shift = model.coefficient_matrix.tr_mul(&centered);
    Ok(model.target_mean.iter().zip(shift.iter()).map(|(m, s)| m + s).collect())
}

impl CLEModel {
    /// Predictions at every row of a column sample.
    pub fn predict_rows(&self, predictors: &[&[f64]]) -> Result<Vec<Vec<f64>>, DiagError> {
        let n = predictors.first().map_or(0, |c| c.len());
        (0..n)
            .map(|i| {
                let xi: Vec<f64> = predictors.iter().map(|c| c[i]).collect();
                cle_predict(self, &xi)
            })
            .collect()
    }
}

/// Sample partial covariance `Cov(z1,z2) - Cov(z1,xi) Var(xi)^-1 Cov(xi,z2)`.
/// With no predictors this is the plain covariance.
pub fn cond_linear_cov(z1: &[f64], z2: &[f64], xi: &[&[f64]], allow_pinv: bool) -> Result<f64, DiagError> {
    check_lengths(z1.len(), &[z2])?;
    let model = fit_cle(&[z2], xi, allow_pinv)?;
    let m1 = mean(z1);
    let mut value = cov(z1, m1, z2, model.target_mean[0]);
    for (k, x) in xi.iter().enumerate() {
        value -= cov(z1, m1, x, model.predictor_mean[k]) * model.coefficient_matrix[(k, 0)];
    }
    Ok(value)
}

/// `Cov*(z1, z2 | xi) = E*(z1 z2 | xi) - E*(z1|xi) E*(z2|xi)` at every
/// sample row. Its sample mean equals [`cond_linear_cov`].
pub fn cond_linear_cov_pointwise(z1: &[f64], z2: &[f64], xi: &[&[f64]], allow_pinv: bool) -> Result<Vec<f64>, DiagError> {
    check_lengths(z1.len(), &[z2])?;
    let product: Vec<f64> = z1.iter().zip(z2).map(|(a, b)| a * b).collect();
    let model = fit_cle(&[z1, z2, &product], xi, allow_pinv)?;
    Ok(model
        .predict_rows(xi)?
        .into_iter()
        .map(|e| e[2] - e[0] * e[1])
        .collect())
}

fn event_indicator(data: &SurvivalDataset) -> Vec<f64> {
    data.events().iter().map(|&e| if e { 1.0 } else { 0.0 }).collect()
}

/// Partial covariance between covariate `j` and the event indicator given
/// the conditioning covariates: a sample proxy for the signal a candidate
/// carries beyond `C`.
pub fn signal_strength(data: &SurvivalDataset, conditioning: &ConditioningSet, j: usize) -> Result<f64, DiagError> {
    if j >= data.p() {
        return Err(DataError::IndexOutOfRange { index: j, p: data.p() }.into());
    }
    if conditioning.contains(j) {
        return Err(DiagError::InConditioning(j));
    }
    let delta = event_indicator(data);
    let xi: Vec<&[f64]> = conditioning.indices().iter().map(|&k| data.column(k)).collect();
    cond_linear_cov(data.column(j), &delta, &xi, true)
}

/// [`signal_strength`] for every covariate outside `C`, as `(index, value)`.
///
/// Residualizes the event indicator on `Z_C` once; the partial covariance of
/// each `Z_j` is then its plain covariance with that residual.
pub fn signal_strengths(data: &SurvivalDataset, conditioning: &ConditioningSet) -> Result<Vec<(usize, f64)>, DiagError> {
    let delta = event_indicator(data);
    let xi: Vec<&[f64]> = conditioning.indices().iter().map(|&k| data.column(k)).collect();
    let model = fit_cle(&[&delta], &xi, true)?;
    let fitted = model.predict_rows(&xi)?;
    let residual: Vec<f64> = if xi.is_empty() {
        delta.iter().map(|d| d - model.target_mean[0]).collect()
    } else {
        delta.iter().zip(&fitted).map(|(d, f)| d - f[0]).collect()
    };
    let n = data.n() as f64;
    Ok((0..data.p())
        .filter(|&j| !conditioning.contains(j))
        .map(|j| {
            let z = data.column(j);
            (j, z.iter().zip(&residual).map(|(a, r)| a * r).sum::<f64>() / n)
        })
        .collect())
}
