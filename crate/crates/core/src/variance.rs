//! Variance backends for the one-way layout: pooled, Satterthwaite plug-in and sandwich.

use crate::contrast::ContrastMatrix;
use crate::error::{Error, Result};
use crate::mvt::CorrelationMatrix;
use crate::sample::GroupedSample;
use nalgebra::DMatrix;

/// Per-group means, sample variances and sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroSummary {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub sizes: Vec<usize>,
}

impl HeteroSummary {
    pub fn from_sample(sample: &GroupedSample) -> Self {
        Self {
            means: sample.means(),
            variances: sample.variances(),
            sizes: sample.sizes(),
        }
    }
}

/// Pooled variance `S^2` and its degrees of freedom `sum(n_i - 1)`.
pub fn pooled_variance(sample: &GroupedSample) -> Result<(f64, f64)> {
    let (mut ss, mut df) = (0.0, 0.0);
    for g in sample.groups() {
        let m = g.mean();
        ss += g.responses.iter().map(|y| (y - m).powi(2)).sum::<f64>();
        df += g.len() as f64 - 1.0;
    }
    if df <= 0.0 {
        return Err(Error::DegenerateData("no residual degrees of freedom".into()));
    }
    let s2 = ss / df;
    if !(s2 > 0.0) {
        return Err(Error::DegenerateData("pooled variance is zero".into()));
    }
    Ok((s2, df))
}

/// `C diag(d) C^T`.
pub(crate) fn contrast_covariance(contrasts: &ContrastMatrix, diag: &[f64]) -> DMatrix<f64> {
    let c = contrasts.coefficients();
    let scaled = DMatrix::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)] * diag[j]);
    &scaled * c.transpose()
}

fn check_dims(contrasts: &ContrastMatrix, groups: usize) -> Result<()> {
    if contrasts.groups() != groups {
        return Err(Error::InvalidDesign(format!(
            "contrast matrix has {} columns for {groups} groups",
            contrasts.groups()
        )));
    }
    Ok(())
}

/// Per-contrast Satterthwaite degrees of freedom and the correlation implied by the
/// group-specific variances.
pub fn satterthwaite(
    summary: &HeteroSummary,
    contrasts: &ContrastMatrix,
) -> Result<(Vec<f64>, CorrelationMatrix)> {
    check_dims(contrasts, summary.sizes.len())?;
    let c = contrasts.coefficients();
    let v: Vec<f64> = summary
        .variances
        .iter()
        .zip(&summary.sizes)
        .map(|(s2, &n)| s2 / n as f64)
        .collect();
    let mut dfs = Vec::with_capacity(c.nrows());
    for i in 0..c.nrows() {
        let (mut num, mut den) = (0.0, 0.0);
        for l in 0..c.ncols() {
            let cl = c[(i, l)];
            if cl == 0.0 {
                continue;
            }
            if !(summary.variances[l] > 0.0) {
                return Err(Error::DegenerateData(format!(
                    "group {l} has zero variance but enters contrast {i}"
                )));
            }
            let term = cl * cl * v[l];
            num += term;
            den += term * term / (summary.sizes[l] as f64 - 1.0);
        }
        dfs.push(num * num / den);
    }
    let corr = CorrelationMatrix::from_covariance(&contrast_covariance(contrasts, &v))?;
    Ok((dfs, corr))
}

/// Heteroscedasticity-consistent (HC3) covariance of the contrast estimates.
///
/// In the one-way layout the leverage of every observation in group `i` is `1/n_i`, so the
/// HC3 variance of a group mean is `sum(e^2) / (n_i (n_i - 1))`, i.e. `s_i^2 / (n_i - 1)`.
/// Returned degrees of freedom are infinite (normal reference).
pub fn sandwich_covariance(
    sample: &GroupedSample,
    contrasts: &ContrastMatrix,
) -> Result<(DMatrix<f64>, CorrelationMatrix, f64)> {
    check_dims(contrasts, sample.groups().len())?;
    let v: Vec<f64> = sample
        .groups()
        .iter()
        .map(|g| g.variance() / (g.len() as f64 - 1.0))
        .collect();
    let cov = contrast_covariance(contrasts, &v);
    if let Some(i) = (0..cov.nrows()).find(|&i| !(cov[(i, i)] > 0.0)) {
        return Err(Error::DegenerateData(format!(
            "contrast {i} has zero sandwich variance"
        )));
    }
    let corr = CorrelationMatrix::from_covariance(&cov)?;
    Ok((cov, corr, f64::INFINITY))
}
