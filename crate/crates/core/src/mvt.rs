//! Multivariate normal and t rectangle probabilities and equicoordinate quantiles.
//!
//! Two integration routes are provided:
//!
//! * a factor route for correlation matrices of the form `rho_ij = l_i * l_j`
//!   (every many-to-one comparison design has this shape), which reduces the
//!   q-dimensional integral to one dimension over the shared latent factor and,
//!   for finite degrees of freedom, a second one over the chi scale variable;
//! * a general route using the separation-of-variables transform with
//!   variable prioritisation, integrated by randomly shifted Richtmyer lattice
//!   rules. The scale variable of the t family is one more lattice coordinate.
//!
//! Both routes are deterministic for a fixed seed.

use crate::dist::{
    chi_scale_pdf, chi_scale_quantile, gauss_legendre, norm_cdf, norm_pdf,
    norm_quantile, t_cdf, t_quantile,
};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Largest supported dimension.
pub const MAX_DIM: usize = 64;

/// Default seed of the lattice shifts.
pub const DEFAULT_SEED: u64 = 0x6d75_6c74_636f_6d70;

/// Smallest eigenvalue tolerated before a matrix is rejected as indefinite.
const PSD_TOLERANCE: f64 = -1e-8;
/// Eigenvalue floor applied to numerically singular matrices.
const EIGEN_FLOOR: f64 = 1e-10;

/// Direction of the alternative hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    #[default]
    TwoSided,
    /// Alternative `> 0`; the test rejects for large statistics.
    Greater,
    /// Alternative `< 0`; the test rejects for small statistics.
    Less,
}

impl Tail {
    pub fn name(self) -> &'static str {
        match self {
            Tail::TwoSided => "two.sided",
            Tail::Greater => "greater",
            Tail::Less => "less",
        }
    }
}

impl std::str::FromStr for Tail {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "two-sided" | "two.sided" | "two_sided" | "twosided" | "both" => Ok(Tail::TwoSided),
            "greater" | "upper" => Ok(Tail::Greater),
            "less" | "lower" => Ok(Tail::Less),
            other => Err(Error::InvalidArgument(format!("unknown tail `{other}`"))),
        }
    }
}

/// A validated correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
}

impl CorrelationMatrix {
    /// Validates symmetry, the unit diagonal, entry range and positive semidefiniteness.
    ///
    /// Matrices whose smallest eigenvalue lies in `[-1e-8, 1e-10)` are repaired by flooring
    /// the spectrum at `1e-10` and rescaling to a unit diagonal.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let q = entries.nrows();
        if q == 0 || entries.ncols() != q {
            return Err(Error::InvalidArgument(format!(
                "correlation matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if q > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "dimension {q} exceeds the supported maximum of {MAX_DIM}"
            )));
        }
        let mut m = entries;
        for i in 0..q {
            if (m[(i, i)] - 1.0).abs() > 1e-8 {
                return Err(Error::NumericDomain(format!(
                    "diagonal entry {i} is {} instead of 1",
                    m[(i, i)]
                )));
            }
            m[(i, i)] = 1.0;
            for j in 0..i {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::NumericDomain("non-finite correlation".into()));
                }
                if (a - b).abs() > 1e-8 {
                    return Err(Error::NumericDomain(format!(
                        "correlation matrix not symmetric at ({i}, {j})"
                    )));
                }
                let v = 0.5 * (a + b);
                if v.abs() > 1.0 + 1e-10 {
                    return Err(Error::NumericDomain(format!(
                        "correlation {v} at ({i}, {j}) outside [-1, 1]"
                    )));
                }
                let v = v.clamp(-1.0, 1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        if q == 1 {
            return Ok(Self { entries: m });
        }
        let eig = SymmetricEigen::new(m.clone());
        let min_eig = eig.eigenvalues.min();
        if min_eig < PSD_TOLERANCE {
            return Err(Error::NumericDomain(format!(
                "correlation matrix is not positive semidefinite (smallest eigenvalue {min_eig:e})"
            )));
        }
        if min_eig < EIGEN_FLOOR {
            let floored = eig.eigenvalues.map(|v| v.max(EIGEN_FLOOR));
            let rebuilt = &eig.eigenvectors
                * DMatrix::from_diagonal(&floored)
                * eig.eigenvectors.transpose();
            let d: Vec<f64> = (0..q).map(|i| rebuilt[(i, i)].sqrt()).collect();
            m = DMatrix::from_fn(q, q, |i, j| {
                if i == j {
                    1.0
                } else {
                    (rebuilt[(i, j)] / (d[i] * d[j])).clamp(-1.0, 1.0)
                }
            });
        }
        Ok(Self { entries: m })
    }

    /// Normalises a covariance matrix to a correlation matrix.
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self> {
        let q = cov.nrows();
        let d: Vec<f64> = (0..q).map(|i| cov[(i, i)]).collect();
        if let Some(i) = d.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::NumericDomain(format!(
                "covariance has non-positive variance at index {i}"
            )));
        }
        let s: Vec<f64> = d.iter().map(|v| v.sqrt()).collect();
        Self::new(DMatrix::from_fn(q, q, |i, j| {
            if i == j {
                1.0
            } else {
                cov[(i, j)] / (s[i] * s[j])
            }
        }))
    }

    pub fn identity(q: usize) -> Result<Self> {
        Self::new(DMatrix::identity(q, q))
    }

    /// Compound-symmetric matrix with common off-diagonal `rho`.
    pub fn equicorrelated(q: usize, rho: f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(q, q, |i, j| if i == j { 1.0 } else { rho }))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Principal submatrix on the given indices.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            entries: DMatrix::from_fn(idx.len(), idx.len(), |i, j| self.entries[(idx[i], idx[j])]),
        }
    }

    /// Loadings `l` with `rho_ij = l_i l_j` for all `i != j` and `|l_i| < 1`, if they exist.
    pub fn factor_loadings(&self) -> Option<Vec<f64>> {
        let q = self.dim();
        let r = &self.entries;
        if q == 1 {
            return Some(vec![0.0]);
        }
        let max_off = (0..q)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| r[(i, j)].abs())
            .fold(0.0, f64::max);
        let mut l = vec![0.0; q];
        if max_off > 1e-15 {
            if q == 2 {
                let rho = r[(0, 1)];
                l[0] = rho.abs().sqrt();
                l[1] = rho.signum() * l[0];
            } else {
                for (i, li) in l.iter_mut().enumerate() {
                    if (0..q).all(|j| j == i || r[(i, j)].abs() <= 1e-15) {
                        continue;
                    }
                    let mut best = (0.0, 0, 0);
                    for j in 0..q {
                        for k in 0..j {
                            if j != i && k != i && r[(j, k)].abs() > best.0 {
                                best = (r[(j, k)].abs(), j, k);
                            }
                        }
                    }
                    if best.0 < 1e-12 {
                        return None;
                    }
                    let sq = r[(i, best.1)] * r[(i, best.2)] / r[(best.1, best.2)];
                    if sq < 0.0 {
                        return None;
                    }
                    *li = sq.sqrt();
                }
                let reference = (0..q)
                    .max_by(|&a, &b| l[a].partial_cmp(&l[b]).unwrap())
                    .unwrap();
                for i in 0..q {
                    if i != reference && r[(i, reference)] < 0.0 {
                        l[i] = -l[i];
                    }
                }
            }
        }
        for i in 0..q {
            if l[i] * l[i] > 1.0 - 1e-6 {
                return None;
            }
            for j in 0..i {
                if (l[i] * l[j] - r[(i, j)]).abs() > 1e-12 {
                    return None;
                }
            }
        }
        Some(l)
    }
}

/// Correlation of the many-to-one comparison statistics for group sizes `(n_0, n_1, .., n_k)`.
pub fn dunnett_correlation(sample_sizes: &[usize]) -> Result<CorrelationMatrix> {
    if sample_sizes.len() < 2 {
        return Err(Error::InvalidDesign(
            "at least a control and one treatment group are required".into(),
        ));
    }
    if sample_sizes.contains(&0) {
        return Err(Error::InvalidDesign("empty group".into()));
    }
    let n0 = sample_sizes[0] as f64;
    let f: Vec<f64> = sample_sizes[1..]
        .iter()
        .map(|&n| 1.0 + n0 / n as f64)
        .collect();
    let k = f.len();
    CorrelationMatrix::new(DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            1.0
        } else {
            (1.0 / (f[i] * f[j])).sqrt()
        }
    }))
}

/// Integration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvtOptions {
    /// Target absolute error of the lattice rule.
    pub abs_tol: f64,
    /// Cap on the total number of lattice points.
    pub max_points: usize,
    pub seed: u64,
    /// Node count of the factor quadrature (per dimension).
    pub quad_nodes: usize,
    /// Allow the factor route when the correlation admits it.
    pub factor_path: bool,
}

impl Default for MvtOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-4,
            max_points: 1 << 22,
            seed: DEFAULT_SEED,
            quad_nodes: 64,
            factor_path: true,
        }
    }
}

/// Integration route that produced a probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Univariate,
    Factor,
    Lattice { points: usize },
}

/// A rectangle probability with its absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probability {
    pub value: f64,
    pub error: f64,
    pub route: Route,
}

fn check_df(df: f64) -> Result<()> {
    if df.is_nan() || df <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "degrees of freedom must be positive, got {df}"
        )));
    }
    Ok(())
}

/// `P(lower <= T <= upper)` for `T ~ t_q(df, corr)`; `df = f64::INFINITY` is the normal case.
pub fn mvt_rectangle(
    lower: &[f64],
    upper: &[f64],
    corr: &CorrelationMatrix,
    df: f64,
) -> Result<Probability> {
    mvt_rectangle_with(lower, upper, corr, df, &MvtOptions::default())
}

pub fn mvt_rectangle_with(
    lower: &[f64],
    upper: &[f64],
    corr: &CorrelationMatrix,
    df: f64,
    opts: &MvtOptions,
) -> Result<Probability> {
    let q = corr.dim();
    if lower.len() != q || upper.len() != q {
        return Err(Error::InvalidArgument(format!(
            "bounds of length {}/{} for a {q}-dimensional distribution",
            lower.len(),
            upper.len()
        )));
    }
    check_df(df)?;
    for i in 0..q {
        if lower[i].is_nan() || upper[i].is_nan() || lower[i] >= upper[i] {
            return Err(Error::InvalidArgument(format!(
                "empty or invalid interval [{}, {}] at index {i}",
                lower[i], upper[i]
            )));
        }
    }
    // Unbounded coordinates can be integrated out.
    let active: Vec<usize> = (0..q)
        .filter(|&i| lower[i] > f64::NEG_INFINITY || upper[i] < f64::INFINITY)
        .collect();
    if active.is_empty() {
        return Ok(Probability {
            value: 1.0,
            error: 0.0,
            route: Route::Univariate,
        });
    }
    if active.len() == 1 {
        let i = active[0];
        let v = (t_cdf(upper[i], df) - t_cdf(lower[i], df)).clamp(0.0, 1.0);
        return Ok(Probability {
            value: v,
            error: 0.0,
            route: Route::Univariate,
        });
    }
    let (a, b): (Vec<f64>, Vec<f64>) = active.iter().map(|&i| (lower[i], upper[i])).unzip();
    let sub = if active.len() == q {
        corr.clone()
    } else {
        corr.select(&active)
    };
    if opts.factor_path {
        if let Some(l) = sub.factor_loadings() {
            let v = factor_rectangle(&a, &b, &l, df, opts.quad_nodes);
            return Ok(Probability {
                value: v,
                error: 0.0,
                route: Route::Factor,
            });
        }
    }
    Ok(lattice_rectangle(&a, &b, &sub, df, opts))
}

/// Probability mass of `[a, b]` under the standard normal, accurate in either tail.
#[inline]
fn normal_interval(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        (norm_cdf(-a) - norm_cdf(-b)).max(0.0)
    } else {
        (norm_cdf(b) - norm_cdf(a)).max(0.0)
    }
}

fn legendre_rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULE8: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static RULE16: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    match n {
        8 => RULE8.get_or_init(|| gauss_legendre(8)),
        _ => RULE16.get_or_init(|| gauss_legendre(16)),
    }
}

const PANEL_NODES: usize = 8;

/// Composite Gauss-Legendre nodes and weights over the breakpoints `edges`.
fn composite_rule(edges: &[f64], per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = legendre_rule(per_panel);
    let mut nodes = Vec::with_capacity(per_panel * (edges.len() - 1));
    let mut weights = Vec::with_capacity(nodes.capacity());
    for pair in edges.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (xi, wi) in x.iter().zip(w) {
            nodes.push(mid + half * xi);
            weights.push(half * wi);
        }
    }
    (nodes, weights)
}

/// Latent-factor nodes: `phi(u) du` on `[-8.5, 8.5]` split into equal panels.
fn factor_rule(total_nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = (total_nodes / PANEL_NODES).max(2);
    let edges: Vec<f64> = (0..=panels)
        .map(|i| -8.5 + 17.0 * i as f64 / panels as f64)
        .collect();
    let (u, w) = composite_rule(&edges, PANEL_NODES);
    let w = u.iter().zip(w).map(|(u, w)| w * norm_pdf(*u)).collect();
    (u, w)
}

/// Scale-variable nodes: density-weighted, panels cut at fixed quantiles of `S`.
fn scale_rule(df: f64, total_nodes: usize) -> (Vec<f64>, Vec<f64>) {
    const CUTS: [f64; 9] = [
        1e-14,
        1e-7,
        1e-3,
        0.05,
        0.5,
        0.95,
        0.999,
        1.0 - 1e-7,
        1.0 - 1e-14,
    ];
    let edges: Vec<f64> = CUTS.iter().map(|&u| chi_scale_quantile(u, df)).collect();
    let per_panel = if total_nodes >= 16 * (CUTS.len() - 1) { 16 } else { PANEL_NODES };
    let (s, w) = composite_rule(&edges, per_panel);
    // Mass below/above the outer cuts is 1e-14 and is dropped.
    let w = s.iter().zip(w).map(|(s, w)| w * chi_scale_pdf(*s, df)).collect();
    (s, w)
}

/// Rectangle probability for the one-factor correlation `rho_ij = l_i l_j`.
pub fn factor_rectangle(lower: &[f64], upper: &[f64], loadings: &[f64], df: f64, nodes: usize) -> f64 {
    let (u, wu) = factor_rule(nodes);
    let tau: Vec<f64> = loadings.iter().map(|l| (1.0 - l * l).sqrt()).collect();
    let normal = |scale: f64| -> f64 {
        let mut total = 0.0;
        for (&ui, &wi) in u.iter().zip(&wu) {
            let mut prod = 1.0;
            for j in 0..loadings.len() {
                let shift = loadings[j] * ui;
                let a = (lower[j] * scale - shift) / tau[j];
                let b = (upper[j] * scale - shift) / tau[j];
                prod *= normal_interval(a, b);
                if prod == 0.0 {
                    break;
                }
            }
            total += wi * prod;
        }
        total
    };
    let value = if df.is_infinite() {
        normal(1.0)
    } else {
        let (s, ws) = scale_rule(df, nodes);
        s.iter().zip(&ws).map(|(&si, &wi)| wi * normal(si)).sum()
    };
    value.clamp(0.0, 1.0)
}

/// Reordered Cholesky factor of the separation-of-variables transform.
struct Sov {
    a: Vec<f64>,
    b: Vec<f64>,
    l: DMatrix<f64>,
}

const PIVOT_TINY: f64 = 1e-8;

/// Genz-Bretz prioritisation: at each step the coordinate with the smallest conditional
/// interval probability is placed next.
fn prioritised_cholesky(lower: &[f64], upper: &[f64], corr: &DMatrix<f64>) -> Sov {
    let q = lower.len();
    let mut a = lower.to_vec();
    let mut b = upper.to_vec();
    let mut s = corr.clone();
    let mut l = DMatrix::<f64>::zeros(q, q);
    let mut y = vec![0.0; q];
    for i in 0..q {
        let mut best = (f64::INFINITY, i);
        for j in i..q {
            let mut m = 0.0;
            let mut v = s[(j, j)];
            for k in 0..i {
                m += l[(j, k)] * y[k];
                v -= l[(j, k)] * l[(j, k)];
            }
            let score = if v > PIVOT_TINY * PIVOT_TINY {
                let sd = v.sqrt();
                normal_interval((a[j] - m) / sd, (b[j] - m) / sd)
            } else {
                1.0 + 1e-3
            };
            if score < best.0 {
                best = (score, j);
            }
        }
        let j = best.1;
        if j != i {
            a.swap(i, j);
            b.swap(i, j);
            s.swap_rows(i, j);
            s.swap_columns(i, j);
            for k in 0..i {
                let t = l[(i, k)];
                l[(i, k)] = l[(j, k)];
                l[(j, k)] = t;
            }
        }
        let mut v = s[(i, i)];
        for k in 0..i {
            v -= l[(i, k)] * l[(i, k)];
        }
        if v <= PIVOT_TINY * PIVOT_TINY {
            l[(i, i)] = 0.0;
            y[i] = 0.0;
            continue;
        }
        let d = v.sqrt();
        l[(i, i)] = d;
        for r in i + 1..q {
            let mut acc = s[(r, i)];
            for k in 0..i {
                acc -= l[(r, k)] * l[(i, k)];
            }
            l[(r, i)] = acc / d;
        }
        let mut m = 0.0;
        for k in 0..i {
            m += l[(i, k)] * y[k];
        }
        let (ta, tb) = ((a[i] - m) / d, (b[i] - m) / d);
        let p = normal_interval(ta, tb);
        y[i] = if p > 1e-300 {
            let fa = if ta.is_finite() { norm_pdf(ta) } else { 0.0 };
            let fb = if tb.is_finite() { norm_pdf(tb) } else { 0.0 };
            (fa - fb) / p
        } else if ta.is_finite() {
            ta
        } else {
            tb
        };
    }
    Sov { a, b, l }
}

impl Sov {
    /// Integrand at one lattice point `w` (length q-1, plus a leading scale coordinate if
    /// `df` is finite).
    fn eval(&self, w: &[f64], df: f64, y: &mut [f64]) -> f64 {
        let q = self.a.len();
        // the scale variable takes the first, best-distributed lattice coordinate
        let (scale, w) = if df.is_infinite() {
            (1.0, w)
        } else {
            (chi_scale_quantile(w[0].clamp(1e-16, 1.0 - 1e-16), df), &w[1..])
        };
        let mut f = 1.0;
        for i in 0..q {
            let mut m = 0.0;
            for k in 0..i {
                m += self.l[(i, k)] * y[k];
            }
            let (lo, hi) = (self.a[i] * scale, self.b[i] * scale);
            let d = self.l[(i, i)];
            if d == 0.0 {
                if m < lo || m > hi {
                    return 0.0;
                }
                y[i] = 0.0;
                continue;
            }
            let (ta, tb) = ((lo - m) / d, (hi - m) / d);
            let pa = norm_cdf(ta);
            let pb = norm_cdf(tb);
            let width = normal_interval(ta, tb);
            f *= width;
            if f <= 0.0 {
                return 0.0;
            }
            if i + 1 < q {
                let u = (pa + w[i] * (pb - pa)).clamp(1e-300, 1.0 - 1e-16);
                y[i] = norm_quantile(u);
            }
        }
        f
    }
}

const FIRST_PRIMES: [u32; 66] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293,
    307, 311, 313, 317,
];

const LATTICE_SHIFTS: usize = 12;

/// Randomised Richtmyer lattice integration of the separation-of-variables integrand.
fn lattice_rectangle(
    lower: &[f64],
    upper: &[f64],
    corr: &CorrelationMatrix,
    df: f64,
    opts: &MvtOptions,
) -> Probability {
    let q = lower.len();
    let sov = prioritised_cholesky(lower, upper, corr.as_matrix());
    let dim = if df.is_infinite() { q - 1 } else { q };
    let alpha: Vec<f64> = FIRST_PRIMES[..dim]
        .iter()
        .map(|&p| (p as f64).sqrt().fract())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let shifts: Vec<Vec<f64>> = (0..LATTICE_SHIFTS)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut sums = vec![0.0; LATTICE_SHIFTS];
    let mut done = 0usize;
    let mut n = 256usize;
    let mut w = vec![0.0; dim];
    let mut y = vec![0.0; q];
    let (mut value, mut error);
    loop {
        for (shift, sum) in shifts.iter().zip(sums.iter_mut()) {
            for i in done + 1..=n {
                for j in 0..dim {
                    let x = (i as f64 * alpha[j] + shift[j]).fract();
                    w[j] = (2.0 * x - 1.0).abs();
                }
                *sum += sov.eval(&w, df, &mut y);
            }
        }
        done = n;
        let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
        value = means.iter().sum::<f64>() / LATTICE_SHIFTS as f64;
        let var = means.iter().map(|m| (m - value).powi(2)).sum::<f64>()
            / ((LATTICE_SHIFTS - 1) * LATTICE_SHIFTS) as f64;
        error = 3.0 * var.sqrt();
        if error < opts.abs_tol || 2 * n * LATTICE_SHIFTS > opts.max_points {
            break;
        }
        n *= 2;
    }
    Probability {
        value: value.clamp(0.0, 1.0),
        error,
        route: Route::Lattice {
            points: n * LATTICE_SHIFTS,
        },
    }
}

/// Bounds of the acceptance region `{T : max statistic <= c}` for the given tail.
pub fn acceptance_region(c: f64, q: usize, tail: Tail) -> (Vec<f64>, Vec<f64>) {
    match tail {
        Tail::TwoSided => (vec![-c; q], vec![c; q]),
        Tail::Greater => (vec![f64::NEG_INFINITY; q], vec![c; q]),
        Tail::Less => (vec![-c; q], vec![f64::INFINITY; q]),
    }
}

fn univariate_quantile(alpha: f64, df: f64, tail: Tail) -> f64 {
    match tail {
        Tail::TwoSided => t_quantile(1.0 - alpha / 2.0, df),
        _ => t_quantile(1.0 - alpha, df),
    }
}

/// Critical value `c` with `P(max statistic <= c) = 1 - alpha`.
pub fn equicoordinate_quantile(
    corr: &CorrelationMatrix,
    df: f64,
    alpha: f64,
    tail: Tail,
) -> Result<f64> {
    equicoordinate_quantile_with(corr, df, alpha, tail, &MvtOptions::default())
}

pub fn equicoordinate_quantile_with(
    corr: &CorrelationMatrix,
    df: f64,
    alpha: f64,
    tail: Tail,
    opts: &MvtOptions,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    check_df(df)?;
    let q = corr.dim();
    let mut lo = univariate_quantile(alpha, df, tail);
    if q == 1 {
        return Ok(lo);
    }
    let mut hi = univariate_quantile(alpha / q as f64, df, tail);
    let target = 1.0 - alpha;
    let coverage = |c: f64| -> Result<f64> {
        let (a, b) = acceptance_region(c, q, tail);
        Ok(mvt_rectangle_with(&a, &b, corr, df, opts)?.value)
    };
    // The bracket is analytic; widen only if integration noise pushed it off.
    let mut f_hi = coverage(hi)? - target;
    while f_hi < 0.0 {
        hi += (hi - lo).max(0.1);
        f_hi = coverage(hi)? - target;
    }
    let mut f_lo = coverage(lo)? - target;
    while lo > 0.0 && f_lo > 0.0 {
        lo *= 0.5;
        f_lo = coverage(lo)? - target;
    }
    // Illinois false position; falls back to bisection when the secant leaves the bracket.
    let mut side = 0;
    for _ in 0..100 {
        if hi - lo <= 1e-6 {
            break;
        }
        let secant = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        let mid = if secant > lo && secant < hi { secant } else { 0.5 * (lo + hi) };
        let f = coverage(mid)? - target;
        if f.abs() < 1e-9 {
            return Ok(mid);
        }
        if f < 0.0 {
            lo = mid;
            f_lo = f;
            if side < 0 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = mid;
            f_hi = f;
            if side > 0 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `1 - P(max statistic <= observed)` where the observed value is `|t|` (two-sided) or `t`.
pub fn max_exceedance(stat: f64, corr: &CorrelationMatrix, df: f64, tail: Tail, opts: &MvtOptions) -> Result<f64> {
    let q = corr.dim();
    let c = match tail {
        Tail::TwoSided => stat.abs(),
        Tail::Greater => stat,
        Tail::Less => -stat,
    };
    if tail == Tail::TwoSided && c == 0.0 {
        return Ok(1.0);
    }
    let (a, b) = acceptance_region(c, q, tail);
    Ok((1.0 - mvt_rectangle_with(&a, &b, corr, df, opts)?.value).clamp(0.0, 1.0))
}
