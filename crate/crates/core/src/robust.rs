//! Huber and bisquare M-estimation for the one-way layout.

use crate::contrast::{dunnett_contrasts, max_t_test, MaxTResult, VarianceMethod};
use crate::error::{Error, Result};
use crate::mvt::Tail;
use crate::sample::GroupedSample;
use nalgebra::DMatrix;

/// `1 / Phi^-1(3/4)`, makes the MAD consistent for the normal standard deviation.
const MAD_CONSISTENCY: f64 = 1.482_602_218_505_602;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psi {
    Huber(f64),
    Bisquare(f64),
}

impl Psi {
    pub const HUBER: Psi = Psi::Huber(1.345);
    pub const BISQUARE: Psi = Psi::Bisquare(4.685);

    pub fn psi(&self, u: f64) -> f64 {
        match *self {
            Psi::Huber(c) => u.clamp(-c, c),
            Psi::Bisquare(c) => {
                if u.abs() >= c {
                    0.0
                } else {
                    let t = 1.0 - (u / c).powi(2);
                    u * t * t
                }
            }
        }
    }

    pub fn dpsi(&self, u: f64) -> f64 {
        match *self {
            Psi::Huber(c) => {
                if u.abs() <= c {
                    1.0
                } else {
                    0.0
                }
            }
            Psi::Bisquare(c) => {
                if u.abs() >= c {
                    0.0
                } else {
                    let v = (u / c).powi(2);
                    (1.0 - v) * (1.0 - 5.0 * v)
                }
            }
        }
    }

    /// IRLS weight `psi(u) / u`.
    fn weight(&self, u: f64) -> f64 {
        if u == 0.0 {
            self.dpsi(0.0)
        } else {
            self.psi(u) / u
        }
    }
}

impl Default for Psi {
    fn default() -> Self {
        Psi::HUBER
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for MOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-9,
        }
    }
}

/// Fitted one-way M-estimate in the treatment parametrization.
#[derive(Debug, Clone, PartialEq)]
pub struct MFit {
    /// Control location followed by the shift of each treatment group.
    pub coefficients: Vec<f64>,
    pub scale: f64,
    pub covariance: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl MFit {
    /// Location of every group.
    pub fn cell_locations(&self) -> Vec<f64> {
        let b0 = self.coefficients[0];
        std::iter::once(b0)
            .chain(self.coefficients[1..].iter().map(|b| b0 + b))
            .collect()
    }

    /// Covariance of the group locations.
    pub fn cell_covariance(&self) -> DMatrix<f64> {
        let t = treatment_to_cells(self.coefficients.len());
        &t * &self.covariance * t.transpose()
    }
}

/// Maps treatment-coded coefficients to cell locations.
fn treatment_to_cells(p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| if j == 0 || i == j { 1.0 } else { 0.0 })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// IRLS M-estimate of the group locations with the scale fixed at the normalised MAD of the
/// residuals from the group medians.
pub fn m_estimate_oneway(sample: &GroupedSample, psi: Psi, opts: &MOptions) -> Result<MFit> {
    let groups = sample.groups();
    let mut loc: Vec<f64> = groups
        .iter()
        .map(|g| median(&mut g.responses.clone()))
        .collect();
    let mut abs_res: Vec<f64> = groups
        .iter()
        .zip(&loc)
        .flat_map(|(g, m)| g.responses.iter().map(move |y| (y - m).abs()))
        .collect();
    let scale = MAD_CONSISTENCY * median(&mut abs_res);
    if !(scale > 0.0) {
        return Err(Error::DegenerateData(
            "MAD of the residuals is zero (more than half of them are identical)".into(),
        ));
    }

    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut change = 0.0_f64;
        for (g, m) in groups.iter().zip(loc.iter_mut()) {
            let (mut sw, mut swy) = (0.0, 0.0);
            for &y in &g.responses {
                let w = psi.weight((y - *m) / scale);
                sw += w;
                swy += w * y;
            }
            // A redescending psi can reject a whole group; keep the previous value then.
            if sw > 0.0 {
                let next = swy / sw;
                change = change.max((next - *m).abs());
                *m = next;
            }
        }
        if change <= opts.tol * scale {
            converged = true;
            break;
        }
    }

    let n_total = sample.total() as f64;
    let p = groups.len() as f64;
    let (mut s_psi2, mut s_dpsi) = (0.0, 0.0);
    for (g, m) in groups.iter().zip(&loc) {
        for &y in &g.responses {
            let u = (y - m) / scale;
            s_psi2 += psi.psi(u).powi(2);
            s_dpsi += psi.dpsi(u);
        }
    }
    let (e_psi2, e_dpsi) = (s_psi2 / n_total, s_dpsi / n_total);
    if !(e_dpsi > 0.0) {
        return Err(Error::DegenerateData("average psi derivative is not positive".into()));
    }
    let kappa = n_total / (n_total - p) * scale * scale * e_psi2 / (e_dpsi * e_dpsi);
    let cells = DMatrix::from_fn(groups.len(), groups.len(), |i, j| {
        if i == j {
            kappa / groups[i].len() as f64
        } else {
            0.0
        }
    });
    // cells -> treatment coding: b0 = m0, b_i = m_i - m0
    let inv = DMatrix::from_fn(groups.len(), groups.len(), |i, j| {
        if i == j {
            1.0
        } else if j == 0 {
            -1.0
        } else {
            0.0
        }
    });
    let covariance = &inv * cells * inv.transpose();
    let m0 = loc[0];
    let coefficients = std::iter::once(m0)
        .chain(loc[1..].iter().map(|m| m - m0))
        .collect();
    Ok(MFit {
        coefficients,
        scale,
        covariance,
        iterations,
        converged,
    })
}

/// Dunnett comparisons on M-estimated group locations, `df = N - (k + 1)`.
pub fn robust_dunnett(sample: &GroupedSample, psi: Psi, tail: Tail, alpha: f64) -> Result<MaxTResult> {
    let c = dunnett_contrasts(sample.k())?.with_group_labels(sample);
    max_t_test(sample, &c, VarianceMethod::Robust(psi), tail, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn normal_groups(seed: u64, sizes: &[usize], shifts: &[f64]) -> Vec<Vec<f64>> {
        scaled_groups(seed, sizes, shifts, 1.0)
    }

    fn scaled_groups(seed: u64, sizes: &[usize], shifts: &[f64], sd: f64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Normal::new(0.0, sd).unwrap();
        sizes
            .iter()
            .zip(shifts)
            .map(|(&n, &s)| (0..n).map(|_| s + z.sample(&mut rng)).collect())
            .collect()
    }

    #[test]
    fn psi_functions() {
        let h = Psi::HUBER;
        assert_eq!(h.psi(3.0), 1.345);
        assert_eq!(h.psi(-0.5), -0.5);
        assert_eq!(h.dpsi(2.0), 0.0);
        let b = Psi::BISQUARE;
        assert_eq!(b.psi(5.0), 0.0);
        let (u, e) = (1.3, 1e-6);
        let num = (b.psi(u + e) - b.psi(u - e)) / (2.0 * e);
        assert!((num - b.dpsi(u)).abs() < 1e-8);
    }

    #[test]
    fn clean_data_close_to_group_means() {
        for seed in 0..20 {
            let data = scaled_groups(seed, &[50; 4], &[100.0, 105.0, 110.0, 120.0], 10.0);
            let s = GroupedSample::from_vecs(data).unwrap();
            let fit = m_estimate_oneway(&s, Psi::HUBER, &MOptions::default()).unwrap();
            assert!(fit.converged);
            for (m, r) in s.means().iter().zip(fit.cell_locations()) {
                assert!((m - r).abs() < 0.02 * m.abs(), "{m} {r}");
            }
        }
    }

    #[test]
    fn gross_outlier_barely_moves_robust_shift() {
        let mut data = scaled_groups(5, &[10, 10], &[100.0, 130.0], 10.0);
        let s = GroupedSample::from_vecs(data.clone()).unwrap();
        let clean = m_estimate_oneway(&s, Psi::HUBER, &MOptions::default()).unwrap().coefficients[1];
        let ls_clean = s.means()[1] - s.means()[0];
        data[1][0] += 1000.0;
        let s = GroupedSample::from_vecs(data).unwrap();
        let dirty = m_estimate_oneway(&s, Psi::HUBER, &MOptions::default()).unwrap().coefficients[1];
        let ls_dirty = s.means()[1] - s.means()[0];
        assert!((dirty - clean).abs() < 0.1 * clean.abs(), "{clean} {dirty}");
        assert!((ls_dirty - ls_clean).abs() > 0.5 * ls_clean.abs());
    }

    #[test]
    fn constant_groups_are_degenerate() {
        let s = GroupedSample::from_vecs(vec![vec![1.0; 5], vec![4.0; 5], vec![2.5; 5]]).unwrap();
        let mut medians: Vec<f64> = s.groups().iter().map(|g| median(&mut g.responses.clone())).collect();
        medians.iter_mut().for_each(|m| *m -= 1.0);
        assert_eq!(medians, vec![0.0, 3.0, 1.5]);
        assert!(matches!(
            m_estimate_oneway(&s, Psi::HUBER, &MOptions::default()),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn huge_tuning_constant_is_least_squares() {
        let s = GroupedSample::from_vecs(normal_groups(3, &[8, 6, 12], &[0.0, 1.0, -1.0])).unwrap();
        let fit = m_estimate_oneway(&s, Psi::Huber(1e6), &MOptions::default()).unwrap();
        for (m, r) in s.means().iter().zip(fit.cell_locations()) {
            assert!((m - r).abs() < 1e-6);
        }
    }

    #[test]
    fn breakdown_sanity() {
        let data = normal_groups(17, &[10, 10, 10], &[0.0, 0.0, 0.0]);
        let s = GroupedSample::from_vecs(data.clone()).unwrap();
        let clean = m_estimate_oneway(&s, Psi::HUBER, &MOptions::default()).unwrap();
        for replaced in 1..=2 {
            let mut d = data.clone();
            for y in d[2].iter_mut().take(replaced) {
                *y = 1e6;
            }
            let fit = m_estimate_oneway(&GroupedSample::from_vecs(d).unwrap(), Psi::HUBER, &MOptions::default()).unwrap();
            for j in 0..3 {
                let se = clean.covariance[(j, j)].sqrt();
                assert!((fit.coefficients[j] - clean.coefficients[j]).abs() < 3.0 * se);
            }
        }
    }

    #[test]
    fn affine_equivariance() {
        let data = normal_groups(23, &[9, 11, 7], &[0.0, 0.3, 1.2]);
        let s = GroupedSample::from_vecs(data.clone()).unwrap();
        let (a, b) = (-2.5, 40.0);
        let t = GroupedSample::from_vecs(data.iter().map(|g| g.iter().map(|y| a * y + b).collect()).collect()).unwrap();
        for psi in [Psi::HUBER, Psi::BISQUARE] {
            let f = m_estimate_oneway(&s, psi, &MOptions::default()).unwrap();
            let g = m_estimate_oneway(&t, psi, &MOptions::default()).unwrap();
            assert!((g.coefficients[0] - (a * f.coefficients[0] + b)).abs() < 1e-7);
            for j in 1..3 {
                assert!((g.coefficients[j] - a * f.coefficients[j]).abs() < 1e-7);
            }
            assert!((g.scale - a.abs() * f.scale).abs() < 1e-9);
        }
    }

    #[test]
    fn covariance_is_psd_and_treatment_coded() {
        let s = GroupedSample::from_vecs(normal_groups(2, &[6, 9, 12], &[0.0, 0.0, 0.0])).unwrap();
        let fit = m_estimate_oneway(&s, Psi::HUBER, &MOptions::default()).unwrap();
        let cells = fit.cell_covariance();
        assert!(cells[(0, 1)].abs() < 1e-14);
        assert!((cells[(1, 1)] * 9.0 - cells[(2, 2)] * 12.0).abs() < 1e-12);
        assert!(fit.covariance.clone().symmetric_eigen().eigenvalues.min() > 0.0);
    }
}
