mod common;

use common::{normal_groups, rng};
use proptest::prelude::*;
use robust_mct::contrast::linear_estimates;
use robust_mct::variance::{pooled_variance, sandwich_covariance};
use robust_mct::{dunnett_contrasts, GroupedSample, VarianceMethod};

#[test]
fn sandwich_approaches_pooled_for_large_homoscedastic_samples() {
    let s = normal_groups(&mut rng(31), &[10.0, 10.5, 11.0, 9.0], &[2.0; 4], &[200; 4]);
    let c = dunnett_contrasts(3).unwrap();
    let pooled = linear_estimates(&s, &c, VarianceMethod::Pooled).unwrap().std_errors();
    let sand = linear_estimates(&s, &c, VarianceMethod::Sandwich { df: None }).unwrap().std_errors();
    for (p, w) in pooled.iter().zip(&sand) {
        assert!((w / p - 1.0).abs() < 0.05, "{w} vs {p}");
    }
}

#[test]
fn pooled_variance_of_two_groups() {
    // variances 1 and 3 with equal n
    let s = GroupedSample::from_vecs(vec![vec![-1.0, 0.0, 1.0], vec![-(3f64.sqrt()), 0.0, 3f64.sqrt()]]).unwrap();
    let (s2, df) = pooled_variance(&s).unwrap();
    assert!((s2 - 2.0).abs() < 1e-12);
    assert_eq!(df, 4.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sandwich_covariance_is_psd(data in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 2..=9), 2..=6)) {
        let s = GroupedSample::from_vecs(data).unwrap();
        let c = dunnett_contrasts(s.k()).unwrap();
        let (cov, _, df) = sandwich_covariance(&s, &c).unwrap();
        prop_assert!(df.is_infinite());
        let eig = cov.clone().symmetric_eigen();
        prop_assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-12 * cov.abs().max()));
    }
}
