#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use robust_mct::GroupedSample;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent normal groups with the given means, SDs and sizes.
pub fn normal_groups(rng: &mut ChaCha8Rng, means: &[f64], sds: &[f64], sizes: &[usize]) -> GroupedSample {
    let data = means
        .iter()
        .zip(sds)
        .zip(sizes)
        .map(|((&m, &s), &n)| {
            let d = Normal::new(m, s).unwrap();
            (0..n).map(|_| d.sample(rng)).collect()
        })
        .collect();
    GroupedSample::from_vecs(data).unwrap()
}

/// Plain Monte Carlo draws of `Z / S` with `Z ~ N(0, R)` for equicorrelated `R` and
/// `S = sqrt(chi2_df / df)`; `df = None` gives the normal case.
pub fn equicorrelated_t_draws(rng: &mut ChaCha8Rng, q: usize, rho: f64, df: Option<f64>, n: usize) -> Vec<Vec<f64>> {
    let chi = df.map(|d| rand_distr::ChiSquared::new(d).unwrap());
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    (0..n)
        .map(|_| {
            let shared: f64 = rand_distr::StandardNormal.sample(rng);
            let s = match (&chi, df) {
                (Some(c), Some(d)) => (c.sample(rng) / d).sqrt(),
                _ => 1.0,
            };
            (0..q)
                .map(|_| {
                    let e: f64 = rand_distr::StandardNormal.sample(rng);
                    (a * shared + b * e) / s
                })
                .collect()
        })
        .collect()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Mid-ranks of `v` within itself.
fn midranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let below = v.iter().filter(|&&y| y < x).count() as f64;
            let tied = v.iter().filter(|&&y| y == x).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect()
}

/// Two-sample Brunner-Munzel test from pooled and internal ranks: (estimate, statistic, df, p).
pub fn brunner_munzel(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let r = midranks(&pooled);
    let (rx, ry) = r.split_at(x.len());
    let (rix, riy) = (midranks(x), midranks(y));
    let mx = rx.iter().sum::<f64>() / n1;
    let my = ry.iter().sum::<f64>() / n2;
    let v1 = rx.iter().zip(&rix).map(|(a, b)| (a - b - mx + (n1 + 1.0) / 2.0).powi(2)).sum::<f64>() / (n1 - 1.0);
    let v2 = ry.iter().zip(&riy).map(|(a, b)| (a - b - my + (n2 + 1.0) / 2.0).powi(2)).sum::<f64>() / (n2 - 1.0);
    let (a, b) = (n1 * v1, n2 * v2);
    let stat = n1 * n2 * (my - mx) / (n1 + n2) / (a + b).sqrt();
    let df = (a + b).powi(2) / (a * a / (n1 - 1.0) + b * b / (n2 - 1.0));
    let p = 2.0 * robust_mct::dist::t_cdf(-stat.abs(), df);
    ((my - (n2 + 1.0) / 2.0) / n1, stat, df, p)
}

/// Exhaustive pair count: twice the number of pairs with x0 < xi, ties counted once.
pub fn enumerate_pairs(x0: &[f64], xi: &[f64]) -> f64 {
    let mut twice = 0usize;
    for a in x0 {
        for b in xi {
            twice += if a < b { 2 } else if a == b { 1 } else { 0 };
        }
    }
    twice as f64 / (2 * x0.len() * xi.len()) as f64
}
