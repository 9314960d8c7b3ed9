mod common;

use common::{normal_groups, rng};
use rand::Rng;
use robust_mct::mlt::{colr_dunnett, fit_mlt, fit_mlt_with, mlt_dunnett, FitOptions, Link, TransformationModel};
use robust_mct::{dunnett_contrasts, max_t_test, GroupedSample, Tail, VarianceMethod};

fn logistic_groups(seed: u64, shifts: &[f64], n: usize) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    shifts
        .iter()
        .map(|b| {
            (0..n)
                .map(|_| {
                    let u: f64 = r.random();
                    10.0 + (u / (1.0 - u)).ln() - b
                })
                .collect()
        })
        .collect()
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

fn assert_monotone(m: &TransformationModel) {
    let (lo, hi) = m.basis.support();
    let mut prev = f64::NEG_INFINITY;
    for i in 0..1000 {
        let y = lo + (hi - lo) * i as f64 / 999.0;
        let h = m.transform(y);
        assert!(h >= prev, "h decreases at {y}");
        prev = h;
    }
}

#[test]
fn normal_link_recovers_affine_transformation() {
    let s = normal_groups(&mut rng(21), &[100.0, 104.0, 108.0], &[10.0; 3], &[500; 3]);
    let m = fit_mlt(&s, 5, Link::Normal).unwrap();
    assert!(m.diagnostics.converged);
    let ys: Vec<f64> = s.observations().map(|(_, y)| y).collect();
    let h: Vec<f64> = ys.iter().map(|&y| m.transform(y)).collect();
    let truth: Vec<f64> = ys.iter().map(|y| (y - 100.0) / 10.0).collect();
    assert!(pearson(&h, &truth) > 0.99);
    assert_monotone(&m);
}

#[test]
fn logistic_shift_matches_binary_logistic_regression() {
    let data = logistic_groups(0, &[0.0, -1.0, -2.0], 200);
    let m = fit_mlt(&GroupedSample::from_vecs(data.clone()).unwrap(), 5, Link::Logistic).unwrap();
    // saturated binary model for 1{y <= c}: shifts are differences of empirical logits
    let c = 10.5;
    let logit = |p: f64| (p / (1.0 - p)).ln();
    let p: Vec<f64> = data.iter().map(|g| g.iter().filter(|&&y| y <= c).count() as f64 / g.len() as f64).collect();
    for j in 1..3 {
        let binary = logit(p[j]) - logit(p[0]);
        assert!((m.beta[j - 1] - binary).abs() < 0.15 * binary.abs(), "{} vs {binary}", m.beta[j - 1]);
    }
}

#[test]
fn every_fit_is_monotone_and_ascends() {
    for seed in 0..12 {
        let link = if seed % 2 == 0 { Link::Normal } else { Link::Logistic };
        let s = normal_groups(&mut rng(seed), &[5.0, 5.5, 6.5, 5.2], &[1.0, 1.0, 2.5, 1.0], &[10; 4]);
        let m = fit_mlt(&s, 5, link).unwrap();
        assert_monotone(&m);
        let t = &m.diagnostics.trace;
        assert!(t.windows(2).all(|w| w[1] >= w[0]), "seed {seed}");
        assert!(m.diagnostics.converged && m.diagnostics.gradient_norm < 1e-6, "seed {seed}");
    }
}

#[test]
fn observed_information_matches_finite_differences() {
    let s = normal_groups(&mut rng(3), &[5.0, 5.3, 5.5, 5.8], &[1.0; 4], &[50; 4]);
    for link in [Link::Normal, Link::Logistic] {
        let m = fit_mlt(&s, 5, link).unwrap();
        let h = m.hessian();
        let p: Vec<f64> = m.theta.iter().chain(&m.beta).copied().collect();
        let step: Vec<f64> = p.iter().map(|v| 1e-5 * v.abs().max(1.0)).collect();
        let f = |i: usize, si: f64, j: usize, sj: f64| {
            let mut q = p.clone();
            q[i] += si * step[i];
            q[j] += sj * step[j];
            m.loglik_at(&q)
        };
        let scale = h.abs().max();
        for i in 0..p.len() {
            for j in 0..p.len() {
                let fd = (f(i, 1.0, j, 1.0) - f(i, 1.0, j, -1.0) - f(i, -1.0, j, 1.0) + f(i, -1.0, j, -1.0))
                    / (4.0 * step[i] * step[j]);
                assert!((fd - h[(i, j)]).abs() < 1e-4 * scale, "{link:?} ({i},{j}): {fd} vs {}", h[(i, j)]);
            }
        }
    }
}

#[test]
fn order_one_normal_model_agrees_with_dunnett() {
    let s = normal_groups(&mut rng(8), &[0.0, 0.3, 0.5, 0.1], &[1.0; 4], &[50; 4]);
    let m = fit_mlt(&s, 1, Link::Normal).unwrap();
    let z = mlt_dunnett(&m, None, Tail::TwoSided, 0.05).unwrap().statistics();
    let t = max_t_test(&s, &dunnett_contrasts(3).unwrap(), VarianceMethod::Pooled, Tail::TwoSided, 0.05)
        .unwrap()
        .statistics();
    // larger responses give negative shifts under P(Y <= y) = F(h(y) + beta)
    for (a, b) in z.iter().zip(&t) {
        assert!((-a - b).abs() < 0.05 * b.abs(), "{a} vs {b}");
    }
}

#[test]
#[ignore = "known failure: the Bernstein space in y^3 differs from the one in y, see README"]
fn cubic_response_map_leaves_shifts_unchanged() {
    for seed in 400..410 {
        let s = normal_groups(&mut rng(seed), &[10.0, 10.5, 11.0, 10.2], &[1.0; 4], &[50; 4]);
        let a = fit_mlt(&s, 5, Link::Normal).unwrap();
        let b = fit_mlt(&s.map_responses(|y| y.powi(3)).unwrap(), 5, Link::Normal).unwrap();
        for (x, y) in a.beta.iter().zip(&b.beta) {
            assert!((x - y).abs() < 1e-3, "seed {seed}: {x} vs {y}");
        }
    }
}

#[test]
fn identical_groups_give_unit_odds_ratio() {
    let data = logistic_groups(17, &[0.0, 0.0], 60);
    let r = colr_dunnett(&GroupedSample::from_vecs(data).unwrap(), 5, Tail::TwoSided, 0.05).unwrap();
    let or = &r.odds_ratios[0];
    assert!(or.lower < 1.0 && 1.0 < or.upper);
    assert!(or.p_adjusted > 0.5, "{or:?}");
}

#[test]
fn diagnostics_flag_problems() {
    let s = GroupedSample::from_vecs(vec![
        vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        vec![2.5, 3.5, 4.5, 5.5, 1.5, 6.5],
        vec![100.0, 101.0, 102.0, 103.0, 104.0, 105.0],
    ])
    .unwrap();
    let opts = FitOptions {
        support: Some((0.0, 10.0)),
        ..FitOptions::default()
    };
    let m = fit_mlt_with(&s, 3, Link::Normal, &opts).unwrap();
    assert_eq!(m.diagnostics.separated_groups, vec![2]);
    let capped = FitOptions {
        max_iter: 1,
        ..FitOptions::default()
    };
    let m = fit_mlt_with(&s, 3, Link::Normal, &capped).unwrap();
    assert!(!m.diagnostics.converged);
    let tiny = GroupedSample::from_vecs(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
    assert!(fit_mlt(&tiny, 5, Link::Normal).is_err());
}
