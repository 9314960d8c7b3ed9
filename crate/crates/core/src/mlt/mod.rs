//! Most likely transformation models: a monotone Bernstein transformation `h` with group
//! shifts, `P(Y <= y | group g) = F(h(y) + beta_g)`, for a normal or logistic `F`.

mod bernstein;
mod fit;

pub use bernstein::{quantile_type7, support_from_sample, BernsteinBasis};
pub use fit::{fit_mlt, fit_mlt_with, FitOptions};

use crate::contrast::{max_t_inference, LinearEstimates, MaxTResult};
use crate::error::{Error, Result};
use crate::mvt::{MvtOptions, Tail};
use crate::sample::GroupedSample;
use nalgebra::DMatrix;
use serde::Serialize;

/// Error distribution `F` of the transformed response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Normal,
    Logistic,
}

impl Link {
    /// `log f(z)` and its first two derivatives.
    #[inline]
    pub(crate) fn log_density(&self, z: f64) -> (f64, f64, f64) {
        match self {
            Link::Normal => (-0.5 * z * z - 0.918_938_533_204_672_8, -z, -1.0),
            Link::Logistic => {
                let e = (-z.abs()).exp();
                let f = 1.0 / (1.0 + (-z).exp());
                (-z.abs() - 2.0 * e.ln_1p(), 1.0 - 2.0 * f, -2.0 * f * (1.0 - f))
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Link::Normal => "normal",
            Link::Logistic => "logistic",
        }
    }
}

/// Optimizer diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Log-likelihood after every accepted step of the winning start.
    pub trace: Vec<f64>,
    /// Groups whose responses all fall outside the support.
    pub separated_groups: Vec<usize>,
}

/// Fitted transformation model.
#[derive(Debug, Clone)]
pub struct TransformationModel {
    pub basis: BernsteinBasis,
    pub link: Link,
    /// Nondecreasing transformation coefficients.
    pub theta: Vec<f64>,
    /// Shift of every treatment group; the control shift is fixed at zero.
    pub beta: Vec<f64>,
    pub loglik: f64,
    /// Inverse observed information of `(theta, beta)`, `None` if it is singular.
    pub covariance: Option<DMatrix<f64>>,
    pub diagnostics: FitDiagnostics,
    pub labels: Vec<String>,
    pub(crate) responses: Vec<f64>,
    pub(crate) group_of: Vec<usize>,
}

impl TransformationModel {
    /// Number of parameters, `M + 1 + k`.
    pub fn df(&self) -> usize {
        self.theta.len() + self.beta.len()
    }

    pub fn nobs(&self) -> usize {
        self.responses.len()
    }

    pub fn transform(&self, y: f64) -> f64 {
        let (a, _) = self.basis.basis(y);
        a.iter().zip(&self.theta).map(|(a, t)| a * t).sum()
    }

    pub fn transform_derivative(&self, y: f64) -> f64 {
        let (_, da) = self.basis.basis(y);
        da.iter().zip(&self.theta).map(|(a, t)| a * t).sum()
    }

    fn params(&self) -> Vec<f64> {
        self.theta.iter().chain(&self.beta).copied().collect()
    }

    /// Log-likelihood at an arbitrary `(theta, beta)`; `-inf` where `h' <= 0`.
    pub fn loglik_at(&self, params: &[f64]) -> f64 {
        fit::Problem::new(&self.basis, self.link, &self.responses, &self.group_of, self.beta.len())
            .loglik(params)
    }

    /// Analytic Hessian of the log-likelihood in `(theta, beta)` at the estimate.
    pub fn hessian(&self) -> DMatrix<f64> {
        fit::Problem::new(&self.basis, self.link, &self.responses, &self.group_of, self.beta.len())
            .derivatives(&self.params())
            .2
    }

    /// Per-observation score contributions, one row per observation.
    pub fn scores(&self) -> DMatrix<f64> {
        fit::Problem::new(&self.basis, self.link, &self.responses, &self.group_of, self.beta.len())
            .scores(&self.params())
    }

    fn require_covariance(&self) -> Result<&DMatrix<f64>> {
        self.covariance
            .as_ref()
            .ok_or_else(|| Error::NumericDomain("observed information is singular".into()))
    }

    /// Sandwich covariance `I^-1 (sum s s') I^-1` of `(theta, beta)`.
    pub fn sandwich_covariance(&self) -> Result<DMatrix<f64>> {
        let v = self.require_covariance()?;
        let s = self.scores();
        let meat = s.transpose() * &s;
        Ok(v * meat * v)
    }

    /// Covariance of the shift estimates.
    pub fn shift_covariance(&self, kind: CovarianceKind) -> Result<DMatrix<f64>> {
        let full = match kind {
            CovarianceKind::ObservedInformation => self.require_covariance()?.clone(),
            CovarianceKind::Sandwich => self.sandwich_covariance()?,
        };
        let p = self.theta.len();
        let k = self.beta.len();
        Ok(full.view((p, p), (k, k)).into_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceKind {
    #[default]
    ObservedInformation,
    Sandwich,
}

/// Wald max-t test of the group shifts. `df = None` is the asymptotic (normal) version.
pub fn mlt_dunnett(model: &TransformationModel, df: Option<f64>, tail: Tail, alpha: f64) -> Result<MaxTResult> {
    mlt_dunnett_with(model, df, CovarianceKind::ObservedInformation, tail, alpha, &MvtOptions::default())
}

pub fn mlt_dunnett_with(
    model: &TransformationModel,
    df: Option<f64>,
    kind: CovarianceKind,
    tail: Tail,
    alpha: f64,
    opts: &MvtOptions,
) -> Result<MaxTResult> {
    let est = shift_estimates(model, df, kind)?;
    let mut res = max_t_inference(&est, tail, alpha, opts)?;
    res.method = format!("mlt-{}", model.link.name());
    Ok(res)
}

pub(crate) fn shift_estimates(model: &TransformationModel, df: Option<f64>, kind: CovarianceKind) -> Result<LinearEstimates> {
    let covariance = model.shift_covariance(kind)?;
    if covariance.clone().cholesky().is_none() {
        return Err(Error::NumericDomain("shift covariance is singular".into()));
    }
    Ok(LinearEstimates {
        labels: shift_labels(model),
        estimates: model.beta.clone(),
        covariance,
        df: df.unwrap_or(f64::INFINITY),
        per_contrast_df: None,
    })
}

fn shift_labels(model: &TransformationModel) -> Vec<String> {
    (1..model.labels.len())
        .map(|i| format!("{} - {}", model.labels[i], model.labels[0]))
        .collect()
}

/// Odds ratio of a treatment against the control.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OddsRatio {
    pub label: String,
    pub odds_ratio: f64,
    pub lower: f64,
    pub upper: f64,
    pub p_adjusted: f64,
}

#[derive(Debug, Clone)]
pub struct ColrResult {
    pub model: TransformationModel,
    /// Max-t inference on the log odds ratio scale `-beta`.
    pub test: MaxTResult,
    pub odds_ratios: Vec<OddsRatio>,
}

/// Continuous outcome logistic regression. An odds ratio above one means larger responses
/// in the treatment group; `tail` refers to the log odds ratio.
pub fn colr_dunnett(sample: &GroupedSample, order: usize, tail: Tail, alpha: f64) -> Result<ColrResult> {
    colr_dunnett_with(sample, order, None, tail, alpha, &MvtOptions::default())
}

/// As [`colr_dunnett`], with `df = None` the asymptotic version.
pub fn colr_dunnett_with(
    sample: &GroupedSample,
    order: usize,
    df: Option<f64>,
    tail: Tail,
    alpha: f64,
    opts: &MvtOptions,
) -> Result<ColrResult> {
    let model = fit_mlt(sample, order, Link::Logistic)?;
    let mut est = shift_estimates(&model, df, CovarianceKind::ObservedInformation)?;
    est.estimates.iter_mut().for_each(|b| *b = -*b);
    let mut test = max_t_inference(&est, tail, alpha, opts)?;
    test.method = "colr".into();
    let odds_ratios = test
        .contrasts
        .iter()
        .map(|c| OddsRatio {
            label: c.label.clone(),
            odds_ratio: c.estimate.exp(),
            lower: c.lower.exp(),
            upper: c.upper.exp(),
            p_adjusted: c.p_adjusted,
        })
        .collect();
    Ok(ColrResult {
        model,
        test,
        odds_ratios,
    })
}
