//! Joint max-t inference over several endpoints measured on the same subjects.
//!
//! Each endpoint gets its own transformation model; the per-subject scores of all models are
//! stacked and their empirical covariance, sandwiched between the per-model inverse
//! information matrices, gives the joint covariance of all shift estimates.

use crate::contrast::{max_t_inference, LinearEstimates, MaxTResult};
use crate::error::{Error, Result};
use crate::mlt::{OddsRatio, TransformationModel};
use crate::mvt::{MvtOptions, Tail};
use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct StackedFit {
    pub endpoints: Vec<String>,
    pub models: Vec<TransformationModel>,
    /// Joint sandwich covariance of all parameters, model blocks in order.
    pub full_covariance: DMatrix<f64>,
    /// Joint covariance of the shift parameters only.
    pub covariance: DMatrix<f64>,
    pub subjects: usize,
    /// Mean of the per-model parameter counts.
    pub df: f64,
}

impl StackedFit {
    /// `endpoint: treatment - control` for every shift.
    fn shift_labels(&self) -> Vec<String> {
        self.endpoints
            .iter()
            .zip(&self.models)
            .flat_map(|(e, m)| {
                (1..m.labels.len()).map(move |i| format!("{e}: {} - {}", m.labels[i], m.labels[0]))
            })
            .collect()
    }

    pub fn shift_estimates(&self) -> Vec<f64> {
        self.models.iter().flat_map(|m| m.beta.iter().copied()).collect()
    }
}

/// Stacks models whose observations are in the same subject order.
pub fn stack_models(endpoints: Vec<String>, models: Vec<TransformationModel>) -> Result<StackedFit> {
    let n = models.first().map_or(0, |m| m.nobs());
    let index: Vec<Vec<usize>> = models.iter().map(|m| (0..m.nobs()).collect()).collect();
    if models.iter().any(|m| m.nobs() != n) {
        return Err(Error::InvalidDesign("models are fitted on different numbers of subjects".into()));
    }
    stack_models_indexed(endpoints, models, &index)
}

/// Stacks models where `subject_index[m][i]` identifies the subject of observation `i` in
/// model `m`. Every model must cover the same set of subjects exactly once.
pub fn stack_models_indexed(
    endpoints: Vec<String>,
    models: Vec<TransformationModel>,
    subject_index: &[Vec<usize>],
) -> Result<StackedFit> {
    if models.len() < 2 {
        return Err(Error::InvalidDesign("stacking needs at least two models".into()));
    }
    if endpoints.len() != models.len() || subject_index.len() != models.len() {
        return Err(Error::InvalidArgument("one endpoint name and subject index per model".into()));
    }
    let n = models[0].nobs();
    // position of each subject in every model
    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(models.len());
    let reference = &subject_index[0];
    for (m, idx) in models.iter().zip(subject_index) {
        if m.nobs() != n || idx.len() != n {
            return Err(Error::InvalidDesign("models are fitted on different subjects".into()));
        }
        let mut pos = std::collections::HashMap::with_capacity(n);
        for (i, &s) in idx.iter().enumerate() {
            if pos.insert(s, i).is_some() {
                return Err(Error::InvalidDesign(format!("subject {s} appears twice")));
            }
        }
        let order = reference
            .iter()
            .map(|s| {
                pos.get(s)
                    .copied()
                    .ok_or_else(|| Error::InvalidDesign(format!("subject {s} is missing from a model")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(order);
    }

    let mut breads = Vec::with_capacity(models.len());
    let mut scores = Vec::with_capacity(models.len());
    for (m, order) in models.iter().zip(&rows) {
        let v = m
            .covariance
            .clone()
            .ok_or_else(|| Error::NumericDomain("singular information matrix in a stacked model".into()))?;
        let s = m.scores();
        let aligned = DMatrix::from_fn(n, s.ncols(), |i, j| s[(order[i], j)]);
        breads.push(v);
        scores.push(aligned);
    }
    let dims: Vec<usize> = breads.iter().map(|b| b.nrows()).collect();
    let total: usize = dims.iter().sum();
    let offsets: Vec<usize> = dims
        .iter()
        .scan(0, |acc, d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    // (1/N) B M B' with B = N V and M = S'S / N reduces to V S' S V per block pair.
    let projected: Vec<DMatrix<f64>> = breads.iter().zip(&scores).map(|(v, s)| s * v).collect();
    let mut full = DMatrix::zeros(total, total);
    for a in 0..models.len() {
        for b in 0..=a {
            let block = projected[a].transpose() * &projected[b];
            full.view_mut((offsets[a], offsets[b]), (dims[a], dims[b]))
                .copy_from(&block);
            if a != b {
                full.view_mut((offsets[b], offsets[a]), (dims[b], dims[a]))
                    .copy_from(&block.transpose());
            }
        }
    }
    let shift_idx: Vec<usize> = models
        .iter()
        .zip(&offsets)
        .flat_map(|(m, &o)| (0..m.beta.len()).map(move |j| o + m.theta.len() + j))
        .collect();
    let covariance = full.select_rows(&shift_idx).select_columns(&shift_idx);
    let df = models.iter().map(|m| m.df() as f64).sum::<f64>() / models.len() as f64;
    Ok(StackedFit {
        endpoints,
        models,
        full_covariance: full,
        covariance,
        subjects: n,
        df,
    })
}

#[derive(Debug, Clone)]
pub struct MmmResult {
    /// Max-t inference on the shift scale `beta` over all endpoints and doses.
    pub test: MaxTResult,
    /// `exp(-beta)` with simultaneous bounds; meaningful for logistic-link endpoints.
    pub odds_ratios: Vec<OddsRatio>,
}

/// Joint test of all shifts with `df` the mean model parameter count (`None` keeps it).
pub fn mmm_dunnett(stacked: &StackedFit, df: Option<f64>, tail: Tail, alpha: f64) -> Result<MmmResult> {
    mmm_dunnett_with(stacked, df, tail, alpha, &MvtOptions::default())
}

pub fn mmm_dunnett_with(
    stacked: &StackedFit,
    df: Option<f64>,
    tail: Tail,
    alpha: f64,
    opts: &MvtOptions,
) -> Result<MmmResult> {
    let est = LinearEstimates {
        labels: stacked.shift_labels(),
        estimates: stacked.shift_estimates(),
        covariance: stacked.covariance.clone(),
        df: df.unwrap_or(stacked.df),
        per_contrast_df: None,
    };
    let mut test = max_t_inference(&est, tail, alpha, opts)?;
    test.method = "mmm".into();
    let odds_ratios = test
        .contrasts
        .iter()
        .map(|c| OddsRatio {
            label: c.label.clone(),
            odds_ratio: (-c.estimate).exp(),
            lower: (-c.upper).exp(),
            upper: (-c.lower).exp(),
            p_adjusted: c.p_adjusted,
        })
        .collect();
    Ok(MmmResult { test, odds_ratios })
}
