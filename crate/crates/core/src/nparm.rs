//! Relative treatment effects `p = P(X0 < Xi) + P(X0 = Xi) / 2` compared with the control.

use crate::contrast::{max_t_inference, LinearEstimates, MaxTResult};
use crate::dist::{norm_cdf, norm_pdf, norm_quantile};
use crate::error::{Error, Result};
use crate::mvt::{MvtOptions, Tail};
use crate::sample::GroupedSample;
use nalgebra::DMatrix;
use serde::Serialize;

/// Scale on which the relative effects are tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transform {
    Identity,
    #[default]
    Probit,
    Logit,
}

impl Transform {
    pub fn apply(&self, p: f64) -> f64 {
        match self {
            Transform::Identity => p,
            Transform::Probit => norm_quantile(p),
            Transform::Logit => (p / (1.0 - p)).ln(),
        }
    }

    pub fn inverse(&self, x: f64) -> f64 {
        match self {
            Transform::Identity => x.clamp(0.0, 1.0),
            Transform::Probit => norm_cdf(x),
            Transform::Logit => 1.0 / (1.0 + (-x).exp()),
        }
    }

    pub fn derivative(&self, p: f64) -> f64 {
        match self {
            Transform::Identity => 1.0,
            Transform::Probit => 1.0 / norm_pdf(norm_quantile(p)),
            Transform::Logit => 1.0 / (p * (1.0 - p)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Probit => "probit",
            Transform::Logit => "logit",
        }
    }
}

impl std::str::FromStr for Transform {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Transform::Identity),
            "probit" => Ok(Transform::Probit),
            "logit" => Ok(Transform::Logit),
            _ => Err(Error::InvalidArgument(format!("unknown transform `{s}`"))),
        }
    }
}

/// Estimated relative effects of each treatment against the control.
#[derive(Debug, Clone, PartialEq)]
pub struct RelEffects {
    /// Raw estimates, before any boundary correction.
    pub p_hat: Vec<f64>,
    /// Estimates used for inference (boundary values moved inside `(0, 1)`).
    pub p_used: Vec<f64>,
    pub boundary: Vec<bool>,
    pub variance: Vec<f64>,
    /// Joint covariance of the estimates, induced by the shared control placements.
    pub covariance: DMatrix<f64>,
    pub n0: usize,
    pub n: Vec<usize>,
    /// Brunner-Munzel degrees of freedom per comparison.
    pub df: Vec<f64>,
}

/// `F(x)` of the sample `v`: proportion below plus half the proportion tied.
fn mid_cdf(sorted: &[f64], x: f64) -> f64 {
    let below = sorted.partition_point(|&v| v < x);
    let upto = sorted.partition_point(|&v| v <= x);
    (below as f64 + 0.5 * (upto - below) as f64) / sorted.len() as f64
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

pub fn relative_effects(sample: &GroupedSample) -> Result<RelEffects> {
    let groups = sample.groups();
    let control = &groups[0].responses;
    let n0 = control.len();
    let mut sorted0 = control.clone();
    sorted0.sort_by(|a, b| a.total_cmp(b));
    let k = groups.len() - 1;

    let mut p_hat = Vec::with_capacity(k);
    let mut p_used = Vec::with_capacity(k);
    let mut boundary = Vec::with_capacity(k);
    let mut variance = Vec::with_capacity(k);
    let mut df = Vec::with_capacity(k);
    // centred F_i(x0j) per treatment, for the control part of the covariance
    let mut control_placements: Vec<Vec<f64>> = Vec::with_capacity(k);
    for g in &groups[1..] {
        let ni = g.len();
        let mut sorted = g.responses.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let f0_at_xi: Vec<f64> = g.responses.iter().map(|&x| mid_cdf(&sorted0, x)).collect();
        let fi_at_x0: Vec<f64> = control.iter().map(|&x| mid_cdf(&sorted, x)).collect();
        let (_, v1) = mean_var(&f0_at_xi);
        // twice the number of pairs with x0 < xi, ties counted once; exact in integers
        let twice: usize = g
            .responses
            .iter()
            .map(|&x| sorted0.partition_point(|&v| v < x) + sorted0.partition_point(|&v| v <= x))
            .sum();
        let p = twice as f64 / (2 * n0 * ni) as f64;
        let (m0, v0) = mean_var(&fi_at_x0);
        let (a, b) = (v0 / n0 as f64, v1 / ni as f64);
        let mut var = a + b;
        let on_boundary = p <= 0.0 || p >= 1.0;
        let lo = 1.0 / (2.0 * n0 as f64 * ni as f64);
        let used = if on_boundary { p.clamp(lo, 1.0 - lo) } else { p };
        if !(var > 0.0) {
            if !on_boundary {
                return Err(Error::DegenerateData(format!(
                    "no placement variance in comparison `{}` (all values tied)",
                    g.label
                )));
            }
            var = used * (1.0 - used) / (n0 as f64 * ni as f64);
            df.push((n0 + ni - 2) as f64);
        } else {
            let d = a * a / (n0 as f64 - 1.0) + b * b / (ni as f64 - 1.0);
            df.push(var * var / d);
        }
        p_hat.push(p);
        p_used.push(used);
        boundary.push(on_boundary);
        variance.push(var);
        control_placements.push(fi_at_x0.iter().map(|f| f - m0).collect());
    }

    let mut covariance = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(variance.clone()));
    for i in 0..k {
        for j in 0..i {
            let c = control_placements[i]
                .iter()
                .zip(&control_placements[j])
                .map(|(x, y)| x * y)
                .sum::<f64>()
                / ((n0 - 1) * n0) as f64;
            covariance[(i, j)] = c;
            covariance[(j, i)] = c;
        }
    }
    Ok(RelEffects {
        p_hat,
        p_used,
        boundary,
        variance,
        covariance,
        n0,
        n: groups[1..].iter().map(|g| g.len()).collect(),
        df,
    })
}

/// One relative effect with its simultaneous interval on the probability scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelInterval {
    pub label: String,
    pub p_hat: f64,
    pub lower: f64,
    pub upper: f64,
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NparResult {
    pub transform: Transform,
    pub effects: RelEffects,
    /// Max-t inference on the transformed scale, centred at `g(1/2)`.
    pub test: MaxTResult,
    pub intervals: Vec<RelInterval>,
}

/// Relative-effect Dunnett test with the default probit transform.
pub fn npar_dunnett(sample: &GroupedSample, tail: Tail, alpha: f64) -> Result<NparResult> {
    npar_dunnett_with(sample, Transform::Probit, tail, alpha)
}

pub fn npar_dunnett_with(
    sample: &GroupedSample,
    transform: Transform,
    tail: Tail,
    alpha: f64,
) -> Result<NparResult> {
    npar_dunnett_opts(sample, transform, tail, alpha, &MvtOptions::default())
}

pub fn npar_dunnett_opts(
    sample: &GroupedSample,
    transform: Transform,
    tail: Tail,
    alpha: f64,
    opts: &MvtOptions,
) -> Result<NparResult> {
    let eff = relative_effects(sample)?;
    let est = transformed_estimates(sample, &eff, transform);
    let mut test = max_t_inference(&est, tail, alpha, opts)?;
    test.method = format!("npar-{}", transform.name());
    let centre = transform.apply(0.5);
    let intervals = test
        .contrasts
        .iter()
        .enumerate()
        .map(|(i, c)| RelInterval {
            label: c.label.clone(),
            p_hat: eff.p_hat[i],
            lower: transform.inverse(c.lower + centre),
            upper: transform.inverse(c.upper + centre),
            boundary: eff.boundary[i],
        })
        .collect();
    Ok(NparResult {
        transform,
        effects: eff,
        test,
        intervals,
    })
}

/// Delta-method estimates `g(p) - g(1/2)` with covariance `D Sigma D`. The untransformed
/// scale uses a multivariate t with the smallest Brunner-Munzel df; the range-preserving
/// transforms use the normal reference.
pub fn transformed_estimates(sample: &GroupedSample, eff: &RelEffects, transform: Transform) -> LinearEstimates {
    let k = eff.p_used.len();
    let d: Vec<f64> = eff.p_used.iter().map(|&p| transform.derivative(p)).collect();
    let covariance = DMatrix::from_fn(k, k, |i, j| d[i] * eff.covariance[(i, j)] * d[j]);
    let labels = sample.labels();
    LinearEstimates {
        labels: (1..=k).map(|i| format!("{} - {}", labels[i], labels[0])).collect(),
        estimates: eff
            .p_used
            .iter()
            .map(|&p| transform.apply(p) - transform.apply(0.5))
            .collect(),
        covariance,
        df: match transform {
            Transform::Identity => eff.df.iter().copied().fold(f64::INFINITY, f64::min),
            Transform::Probit | Transform::Logit => f64::INFINITY,
        },
        per_contrast_df: (transform == Transform::Identity).then(|| eff.df.clone()),
    }
}
