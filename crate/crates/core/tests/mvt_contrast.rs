mod common;

use common::{equicorrelated_t_draws, max_abs, normal_groups, rng};
use rand_distr::{Distribution, StandardNormal};
use robust_mct::contrast::adjusted_pvalues;
use robust_mct::dist::{norm_cdf, t_quantile};
use robust_mct::mvt::{equicoordinate_quantile, mvt_rectangle};
use robust_mct::{dunnett_contrasts, max_t_test, CorrelationMatrix, Tail, VarianceMethod};

/// Max |t| of the pooled Dunnett statistics for one normal data set, computed directly.
fn pooled_max_t(groups: &[Vec<f64>]) -> f64 {
    let means: Vec<f64> = groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    let (mut ss, mut df) = (0.0, 0.0);
    for (g, m) in groups.iter().zip(&means) {
        ss += g.iter().map(|y| (y - m).powi(2)).sum::<f64>();
        df += g.len() as f64 - 1.0;
    }
    let s2 = ss / df;
    let n0 = groups[0].len() as f64;
    (1..groups.len())
        .map(|i| ((means[i] - means[0]) / (s2 * (1.0 / n0 + 1.0 / groups[i].len() as f64)).sqrt()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn dunnett_pvalues_match_simulated_null() {
    let mut r = rng(11);
    let sample = normal_groups(&mut r, &[0.0, 0.4, 0.9, -0.2], &[1.0; 4], &[10; 4]);
    let res = max_t_test(&sample, &dunnett_contrasts(3).unwrap(), VarianceMethod::Pooled, Tail::TwoSided, 0.05).unwrap();

    let reps = 1_000_000;
    let mut null = Vec::with_capacity(reps);
    let mut buf = vec![vec![0.0; 10]; 4];
    for _ in 0..reps {
        for g in buf.iter_mut() {
            for y in g.iter_mut() {
                *y = StandardNormal.sample(&mut r);
            }
        }
        null.push(pooled_max_t(&buf));
    }
    for c in &res.contrasts {
        let oracle = null.iter().filter(|&&m| m >= c.statistic.abs()).count() as f64 / reps as f64;
        assert!((c.p_adjusted - oracle).abs() < 0.005, "{}: {} vs {}", c.label, c.p_adjusted, oracle);
    }
}

#[test]
fn equicorrelated_t_pvalues_match_monte_carlo() {
    let corr = CorrelationMatrix::equicorrelated(3, 0.5).unwrap();
    let t = [2.5, 1.0, 0.3];
    let p = adjusted_pvalues(&t, &corr, 36.0, Tail::TwoSided).unwrap();
    let draws = equicorrelated_t_draws(&mut rng(5), 3, 0.5, Some(36.0), 1_000_000);
    let maxima: Vec<f64> = draws.iter().map(|d| max_abs(d)).collect();
    for (ti, pi) in t.iter().zip(&p) {
        let oracle = maxima.iter().filter(|&&m| m >= *ti).count() as f64 / maxima.len() as f64;
        assert!((pi - oracle).abs() < 0.002, "t = {ti}: {pi} vs {oracle}");
    }
}

#[test]
fn rectangle_matches_monte_carlo_within_three_standard_errors() {
    let corr = CorrelationMatrix::equicorrelated(3, 0.5).unwrap();
    let v = mvt_rectangle(&[-2.35; 3], &[2.35; 3], &corr, 36.0).unwrap().value;
    let n = 1_000_000;
    let draws = equicorrelated_t_draws(&mut rng(6), 3, 0.5, Some(36.0), n);
    let hit = draws.iter().filter(|d| max_abs(d) <= 2.35).count() as f64 / n as f64;
    let se = (hit * (1.0 - hit) / n as f64).sqrt();
    assert!((v - hit).abs() < 3.0 * se, "{v} vs {hit} (se {se})");
}

#[test]
fn closed_form_reductions() {
    let one = CorrelationMatrix::equicorrelated(1, 0.0).unwrap();
    let v = mvt_rectangle(&[f64::NEG_INFINITY], &[1.96], &one, f64::INFINITY).unwrap().value;
    assert!((v - 0.975).abs() < 1e-4);
    let id = CorrelationMatrix::identity(2).unwrap();
    let z = 1.3;
    let v = mvt_rectangle(&[f64::NEG_INFINITY; 2], &[z; 2], &id, f64::INFINITY).unwrap().value;
    assert!((v - norm_cdf(z).powi(2)).abs() < 1e-6);
    let c = equicoordinate_quantile(&one, 30.0, 0.05, Tail::TwoSided).unwrap();
    assert!((c - 2.0423).abs() < 1e-4);
    assert!((c - t_quantile(0.975, 30.0)).abs() < 1e-6);
    let p = adjusted_pvalues(&[2.0423], &one, 30.0, Tail::TwoSided).unwrap();
    assert!((p[0] - 0.05).abs() < 2e-4);
}

#[test]
fn quantile_round_trip_and_large_df_limit() {
    let corr = CorrelationMatrix::equicorrelated(4, 0.3).unwrap();
    for df in [10.0, 36.0] {
        let c = equicoordinate_quantile(&corr, df, 0.05, Tail::TwoSided).unwrap();
        let cov = mvt_rectangle(&[-c; 4], &[c; 4], &corr, df).unwrap().value;
        assert!((cov - 0.95).abs() < 2e-4);
    }
    let a = mvt_rectangle(&[-2.2; 4], &[2.2; 4], &corr, 1e6).unwrap().value;
    let b = mvt_rectangle(&[-2.2; 4], &[2.2; 4], &corr, f64::INFINITY).unwrap().value;
    assert!((a - b).abs() < 5e-4);
}
