//! Max-t multiple contrast tests: statistics, adjusted p-values and simultaneous intervals.

use crate::error::{Error, Result};
use crate::mvt::{
    acceptance_region, equicoordinate_quantile_with, max_exceedance, mvt_rectangle_with,
    CorrelationMatrix, MvtOptions, Tail,
};
use crate::robust::{self, Psi};
use crate::sample::GroupedSample;
use crate::variance::{contrast_covariance, pooled_variance, sandwich_covariance, satterthwaite, HeteroSummary};
use nalgebra::DMatrix;
use serde::Serialize;

/// Coefficient matrix with one row per hypothesis and one column per group.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMatrix {
    coefficients: DMatrix<f64>,
    labels: Vec<String>,
}

impl ContrastMatrix {
    pub fn new(coefficients: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if coefficients.nrows() == 0 || coefficients.ncols() < 2 {
            return Err(Error::InvalidDesign("empty contrast matrix".into()));
        }
        if labels.len() != coefficients.nrows() {
            return Err(Error::InvalidArgument(format!(
                "{} labels for {} contrasts",
                labels.len(),
                coefficients.nrows()
            )));
        }
        for (i, row) in coefficients.row_iter().enumerate() {
            if row.iter().all(|c| *c == 0.0) {
                return Err(Error::InvalidDesign(format!("contrast {i} is all zero")));
            }
            let scale = row.iter().map(|c| c.abs()).sum::<f64>();
            if row.sum().abs() > 1e-12 * scale {
                return Err(Error::InvalidDesign(format!(
                    "coefficients of contrast {i} do not sum to zero"
                )));
            }
        }
        Ok(Self {
            coefficients,
            labels,
        })
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of hypotheses.
    pub fn rows(&self) -> usize {
        self.coefficients.nrows()
    }

    /// Number of groups the contrasts act on.
    pub fn groups(&self) -> usize {
        self.coefficients.ncols()
    }

    /// Relabels the rows as `"<treatment> - <control>"` using group labels.
    pub fn with_group_labels(mut self, sample: &GroupedSample) -> Self {
        let labels = sample.labels();
        if labels.len() == self.groups() {
            for (i, row) in self.coefficients.row_iter().enumerate() {
                let pos: Vec<usize> = (0..row.len()).filter(|&j| row[j] > 0.0).collect();
                let neg: Vec<usize> = (0..row.len()).filter(|&j| row[j] < 0.0).collect();
                if pos.len() == 1 && neg.len() == 1 {
                    self.labels[i] = format!("{} - {}", labels[pos[0]], labels[neg[0]]);
                }
            }
        }
        self
    }
}

/// Many-to-one comparisons: row `i` is `-1` for the control, `+1` for treatment `i`.
pub fn dunnett_contrasts(k: usize) -> Result<ContrastMatrix> {
    if k == 0 {
        return Err(Error::InvalidDesign("at least one treatment group is required".into()));
    }
    let c = DMatrix::from_fn(k, k + 1, |i, j| {
        if j == 0 {
            -1.0
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    });
    ContrastMatrix::new(c, (1..=k).map(|i| format!("{i} - 0")).collect())
}

/// How the covariance of the contrast estimates is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarianceMethod {
    /// Common variance, `df = sum(n_i - 1)`.
    Pooled,
    /// Group-specific variances with Satterthwaite degrees of freedom.
    Satterthwaite,
    /// HC3 sandwich covariance; `df` defaults to infinity.
    Sandwich { df: Option<f64> },
    /// M-estimated group locations, `df = N - (k + 1)`.
    Robust(Psi),
}

impl VarianceMethod {
    pub fn name(&self) -> &'static str {
        match self {
            VarianceMethod::Pooled => "dunnett",
            VarianceMethod::Satterthwaite => "satterthwaite",
            VarianceMethod::Sandwich { .. } => "sandwich",
            VarianceMethod::Robust(_) => "robust",
        }
    }
}

/// Point estimates with their joint covariance, ready for max-t inference.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEstimates {
    pub labels: Vec<String>,
    pub estimates: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// Degrees of freedom of the reference distribution (`INFINITY` = normal).
    pub df: f64,
    /// Per-hypothesis degrees of freedom where they differ from `df`.
    pub per_contrast_df: Option<Vec<f64>>,
}

impl LinearEstimates {
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.estimates.len())
            .map(|i| self.covariance[(i, i)].sqrt())
            .collect()
    }

    pub fn statistics(&self) -> Vec<f64> {
        self.estimates
            .iter()
            .zip(self.std_errors())
            .map(|(e, s)| e / s)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let q = self.estimates.len();
        if q == 0 || self.covariance.nrows() != q || self.covariance.ncols() != q || self.labels.len() != q {
            return Err(Error::InvalidArgument("inconsistent estimate dimensions".into()));
        }
        if let Some(i) = (0..q).find(|&i| !(self.covariance[(i, i)] > 0.0)) {
            return Err(Error::DegenerateData(format!(
                "hypothesis `{}` has zero standard error",
                self.labels[i]
            )));
        }
        if !(self.df > 0.0) {
            return Err(Error::InvalidArgument(format!("degrees of freedom {}", self.df)));
        }
        Ok(())
    }
}

/// One row of a max-t result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastEstimate {
    pub label: String,
    pub estimate: f64,
    pub std_error: f64,
    pub statistic: f64,
    /// Marginal (unadjusted) p-value.
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub lower: f64,
    pub upper: f64,
    pub df: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxTResult {
    pub method: String,
    pub contrasts: Vec<ContrastEstimate>,
    pub df: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub tail: Tail,
    pub correlation: CorrelationMatrix,
}

impl MaxTResult {
    pub fn p_adjusted(&self) -> Vec<f64> {
        self.contrasts.iter().map(|c| c.p_adjusted).collect()
    }

    pub fn statistics(&self) -> Vec<f64> {
        self.contrasts.iter().map(|c| c.statistic).collect()
    }

    pub fn by_label(&self, label: &str) -> Option<&ContrastEstimate> {
        self.contrasts.iter().find(|c| c.label == label)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Estimates and covariance of `contrasts` applied to the group locations of `sample`.
pub fn linear_estimates(
    sample: &GroupedSample,
    contrasts: &ContrastMatrix,
    method: VarianceMethod,
) -> Result<LinearEstimates> {
    if contrasts.groups() != sample.groups().len() {
        return Err(Error::InvalidDesign(format!(
            "contrast matrix has {} columns for {} groups",
            contrasts.groups(),
            sample.groups().len()
        )));
    }
    let c = contrasts.coefficients();
    let sizes: Vec<f64> = sample.sizes().iter().map(|&n| n as f64).collect();
    let labels = contrasts.labels().to_vec();
    let locations = |loc: &[f64]| -> Vec<f64> {
        let m = c * nalgebra::DVector::from_column_slice(loc);
        m.iter().copied().collect()
    };
    Ok(match method {
        VarianceMethod::Pooled => {
            let (s2, df) = pooled_variance(sample)?;
            let d: Vec<f64> = sizes.iter().map(|n| s2 / n).collect();
            LinearEstimates {
                labels,
                estimates: locations(&sample.means()),
                covariance: contrast_covariance(contrasts, &d),
                df,
                per_contrast_df: None,
            }
        }
        VarianceMethod::Satterthwaite => {
            let summary = HeteroSummary::from_sample(sample);
            let (dfs, _) = satterthwaite(&summary, contrasts)?;
            let d: Vec<f64> = summary
                .variances
                .iter()
                .zip(&sizes)
                .map(|(v, n)| v / n)
                .collect();
            let df = dfs.iter().copied().fold(f64::INFINITY, f64::min);
            LinearEstimates {
                labels,
                estimates: locations(&summary.means),
                covariance: contrast_covariance(contrasts, &d),
                df,
                per_contrast_df: Some(dfs),
            }
        }
        VarianceMethod::Sandwich { df } => {
            let (cov, _, asymptotic) = sandwich_covariance(sample, contrasts)?;
            LinearEstimates {
                labels,
                estimates: locations(&sample.means()),
                covariance: cov,
                df: df.unwrap_or(asymptotic),
                per_contrast_df: None,
            }
        }
        VarianceMethod::Robust(psi) => {
            let fit = robust::m_estimate_oneway(sample, psi, &Default::default())?;
            let cells = fit.cell_locations();
            let cov = c * fit.cell_covariance() * c.transpose();
            LinearEstimates {
                labels,
                estimates: locations(&cells),
                covariance: cov,
                df: (sample.total() - sample.groups().len()) as f64,
                per_contrast_df: None,
            }
        }
    })
}

/// Max-t test of `contrasts` on `sample`.
pub fn max_t_test(
    sample: &GroupedSample,
    contrasts: &ContrastMatrix,
    variance: VarianceMethod,
    tail: Tail,
    alpha: f64,
) -> Result<MaxTResult> {
    check_alpha(alpha)?;
    let est = linear_estimates(sample, contrasts, variance)?;
    let mut res = max_t_inference(&est, tail, alpha, &MvtOptions::default())?;
    res.method = variance.name().to_string();
    Ok(res)
}

/// Max-t inference from estimates and their covariance.
pub fn max_t_inference(
    est: &LinearEstimates,
    tail: Tail,
    alpha: f64,
    opts: &MvtOptions,
) -> Result<MaxTResult> {
    check_alpha(alpha)?;
    est.validate()?;
    let se = est.std_errors();
    let stats = est.statistics();
    let corr = CorrelationMatrix::from_covariance(&est.covariance)?;
    let p_adj = adjusted_pvalues_with(&stats, &corr, est.df, tail, opts)?;
    let crit = equicoordinate_quantile_with(&corr, est.df, alpha, tail, opts)?;
    let contrasts = (0..stats.len())
        .map(|i| {
            let df_i = est.per_contrast_df.as_ref().map_or(est.df, |d| d[i]);
            let margin = crit * se[i];
            let (lower, upper) = match tail {
                Tail::TwoSided => (est.estimates[i] - margin, est.estimates[i] + margin),
                Tail::Greater => (est.estimates[i] - margin, f64::INFINITY),
                Tail::Less => (f64::NEG_INFINITY, est.estimates[i] + margin),
            };
            let p_raw = raw_pvalue(stats[i], est.df, tail);
            ContrastEstimate {
                label: est.labels[i].clone(),
                estimate: est.estimates[i],
                std_error: se[i],
                statistic: stats[i],
                p_raw,
                p_adjusted: p_adj[i].max(p_raw),
                lower,
                upper,
                df: df_i,
            }
        })
        .collect();
    Ok(MaxTResult {
        method: String::new(),
        contrasts,
        df: est.df,
        critical_value: crit,
        alpha,
        tail,
        correlation: corr,
    })
}

fn raw_pvalue(t: f64, df: f64, tail: Tail) -> f64 {
    use crate::dist::t_cdf;
    match tail {
        Tail::TwoSided => (2.0 * t_cdf(-t.abs(), df)).min(1.0),
        Tail::Greater => t_cdf(-t, df),
        Tail::Less => t_cdf(t, df),
    }
}

fn extremeness(t: f64, tail: Tail) -> f64 {
    match tail {
        Tail::TwoSided => t.abs(),
        Tail::Greater => t,
        Tail::Less => -t,
    }
}

/// Multiplicity-adjusted p-values `p_j = 1 - P(max statistic <= observed_j)`.
pub fn adjusted_pvalues(
    tstats: &[f64],
    corr: &CorrelationMatrix,
    df: f64,
    tail: Tail,
) -> Result<Vec<f64>> {
    adjusted_pvalues_with(tstats, corr, df, tail, &MvtOptions::default())
}

pub fn adjusted_pvalues_with(
    tstats: &[f64],
    corr: &CorrelationMatrix,
    df: f64,
    tail: Tail,
    opts: &MvtOptions,
) -> Result<Vec<f64>> {
    if tstats.len() != corr.dim() {
        return Err(Error::InvalidArgument(format!(
            "{} statistics for a {}-dimensional correlation",
            tstats.len(),
            corr.dim()
        )));
    }
    let mut p = tstats
        .iter()
        .map(|&t| max_exceedance(t, corr, df, tail, opts))
        .collect::<Result<Vec<_>>>()?;
    // Integration noise must not break the ordering implied by the statistics.
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        extremeness(tstats[b], tail)
            .partial_cmp(&extremeness(tstats[a], tail))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut running = 0.0_f64;
    for &i in &order {
        running = running.max(p[i]);
        p[i] = running;
    }
    Ok(p)
}

/// Smallest adjusted p-value, i.e. the p-value of the global max-t test.
pub fn global_pvalue(
    tstats: &[f64],
    corr: &CorrelationMatrix,
    df: f64,
    tail: Tail,
    opts: &MvtOptions,
) -> Result<f64> {
    let most = tstats
        .iter()
        .copied()
        .max_by(|a, b| extremeness(*a, tail).partial_cmp(&extremeness(*b, tail)).unwrap())
        .ok_or_else(|| Error::InvalidArgument("no statistics".into()))?;
    max_exceedance(most, corr, df, tail, opts)
}

/// Whether the max-t test rejects at level `alpha` given a precomputed critical value.
pub fn rejects_with_critical(tstats: &[f64], critical: f64, tail: Tail) -> bool {
    tstats.iter().any(|&t| extremeness(t, tail) > critical)
}

/// Coverage of the simultaneous region at `c` (used by compatibility checks).
pub fn region_coverage(c: f64, corr: &CorrelationMatrix, df: f64, tail: Tail) -> Result<f64> {
    let (a, b) = acceptance_region(c, corr.dim(), tail);
    Ok(mvt_rectangle_with(&a, &b, corr, df, &MvtOptions::default())?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::t_cdf;

    #[test]
    fn dunnett_contrast_layout() {
        let c = dunnett_contrasts(1).unwrap();
        assert_eq!(c.coefficients().as_slice(), &[-1.0, 1.0]);
        let c = dunnett_contrasts(3).unwrap();
        let expect = [
            [-1.0, 1.0, 0.0, 0.0],
            [-1.0, 0.0, 1.0, 0.0],
            [-1.0, 0.0, 0.0, 1.0],
        ];
        for i in 0..3 {
            for j in 0..4 {
                assert_eq!(c.coefficients()[(i, j)], expect[i][j]);
            }
        }
        let c = dunnett_contrasts(5).unwrap();
        assert_eq!((c.rows(), c.groups()), (5, 6));
        assert!(matches!(dunnett_contrasts(0), Err(Error::InvalidDesign(_))));
    }

    #[test]
    fn contrast_matrix_validation() {
        let bad = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        assert!(ContrastMatrix::new(bad, vec!["x".into()]).is_err());
        let zero = DMatrix::from_row_slice(1, 2, &[0.0, 0.0]);
        assert!(ContrastMatrix::new(zero, vec!["x".into()]).is_err());
    }

    #[test]
    fn two_groups_match_pooled_t_test() {
        let s = GroupedSample::from_vecs(vec![
            vec![4.1, 5.3, 3.8, 4.9, 5.0, 4.4],
            vec![5.6, 6.1, 4.9, 6.3, 5.8],
        ])
        .unwrap();
        let r = max_t_test(&s, &dunnett_contrasts(1).unwrap(), VarianceMethod::Pooled, Tail::TwoSided, 0.05).unwrap();
        let (m0, m1) = (s.groups()[0].mean(), s.groups()[1].mean());
        let (s2, df) = pooled_variance(&s).unwrap();
        let t = (m1 - m0) / (s2 * (1.0 / 6.0 + 1.0 / 5.0)).sqrt();
        let p = 2.0 * t_cdf(-t.abs(), df);
        assert!((r.contrasts[0].statistic - t).abs() < 1e-12);
        assert!((r.contrasts[0].p_adjusted - p).abs() < 1e-12);
    }

    #[test]
    fn constant_groups_are_degenerate() {
        let s = GroupedSample::from_vecs(vec![vec![3.0; 4]; 3]).unwrap();
        let r = max_t_test(&s, &dunnett_contrasts(2).unwrap(), VarianceMethod::Pooled, Tail::TwoSided, 0.05);
        assert!(matches!(r, Err(Error::DegenerateData(_))));
    }

    #[test]
    fn adjusted_pvalue_edge_values() {
        let r = CorrelationMatrix::equicorrelated(3, 0.5).unwrap();
        let p = adjusted_pvalues(&[0.0, 0.0, 0.0], &r, 12.0, Tail::TwoSided).unwrap();
        assert!(p.iter().all(|p| (p - 1.0).abs() < 1e-6));
        let r1 = CorrelationMatrix::identity(1).unwrap();
        let p = adjusted_pvalues(&[2.042272456301238], &r1, 30.0, Tail::TwoSided).unwrap();
        assert!((p[0] - 0.05).abs() < 1e-9);
    }

    #[test]
    fn one_sided_bounds_are_half_open() {
        let s = GroupedSample::from_vecs(vec![
            vec![1.0, 2.0, 3.0, 2.5],
            vec![2.0, 3.5, 4.0, 3.0],
            vec![0.5, 1.5, 2.0, 1.0],
        ])
        .unwrap();
        let c = dunnett_contrasts(2).unwrap();
        let g = max_t_test(&s, &c, VarianceMethod::Pooled, Tail::Greater, 0.05).unwrap();
        assert!(g.contrasts.iter().all(|r| r.upper.is_infinite() && r.lower.is_finite()));
        let l = max_t_test(&s, &c, VarianceMethod::Pooled, Tail::Less, 0.05).unwrap();
        assert!(l.contrasts.iter().all(|r| r.lower.is_infinite() && r.upper.is_finite()));
        // the treatment above control is significant only in the `greater` direction
        assert!(g.contrasts[0].p_adjusted < l.contrasts[0].p_adjusted);
    }

    #[test]
    fn satterthwaite_reports_per_contrast_df() {
        let s = GroupedSample::from_vecs(vec![
            vec![1.0, 2.0, 3.0, 2.5, 1.7],
            vec![2.0, 3.5, 4.0, 3.0, 3.3],
            vec![0.5, 9.5, 2.0, -4.0, 1.0],
        ])
        .unwrap();
        let r = max_t_test(&s, &dunnett_contrasts(2).unwrap(), VarianceMethod::Satterthwaite, Tail::TwoSided, 0.05).unwrap();
        let min = r.contrasts.iter().map(|c| c.df).fold(f64::INFINITY, f64::min);
        assert_eq!(r.df, min);
        assert!(r.contrasts[0].df != r.contrasts[1].df);
    }
}
