use super::{BernsteinBasis, FitDiagnostics, Link, TransformationModel};
use crate::error::{Error, Result};
use crate::sample::GroupedSample;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Fixed support; taken from the 1% and 99% sample quantiles when `None`.
    pub support: Option<(f64, f64)>,
    pub max_iter: usize,
    /// Convergence threshold on the gradient norm.
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            support: None,
            max_iter: 200,
            tol: 1e-6,
        }
    }
}

/// Log-likelihood of one data set in `(theta, beta)` coordinates.
pub(crate) struct Problem<'a> {
    p: usize,
    k: usize,
    link: Link,
    group_of: &'a [usize],
    a: Vec<f64>,
    da: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub(crate) fn new(basis: &BernsteinBasis, link: Link, y: &[f64], group_of: &'a [usize], k: usize) -> Self {
        let p = basis.len();
        let mut a = vec![0.0; y.len() * p];
        let mut da = vec![0.0; y.len() * p];
        for (i, &yi) in y.iter().enumerate() {
            basis.eval(yi, &mut a[i * p..(i + 1) * p], &mut da[i * p..(i + 1) * p]);
        }
        Self {
            p,
            k,
            link,
            group_of,
            a,
            da,
        }
    }

    fn n(&self) -> usize {
        self.group_of.len()
    }

    fn row(&self, i: usize) -> (&[f64], &[f64]) {
        let p = self.p;
        (&self.a[i * p..(i + 1) * p], &self.da[i * p..(i + 1) * p])
    }

    fn linear(&self, i: usize, params: &[f64]) -> (f64, f64) {
        let (a, da) = self.row(i);
        let theta = &params[..self.p];
        let g = self.group_of[i];
        let shift = if g == 0 { 0.0 } else { params[self.p + g - 1] };
        let z = a.iter().zip(theta).map(|(a, t)| a * t).sum::<f64>() + shift;
        let d = da.iter().zip(theta).map(|(a, t)| a * t).sum::<f64>();
        (z, d)
    }

    pub(crate) fn loglik(&self, params: &[f64]) -> f64 {
        let mut ll = 0.0;
        for i in 0..self.n() {
            let (z, d) = self.linear(i, params);
            if !(d > 0.0) {
                return f64::NEG_INFINITY;
            }
            ll += self.link.log_density(z).0 + d.ln();
        }
        ll
    }

    /// Log-likelihood, gradient and Hessian.
    pub(crate) fn derivatives(&self, params: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let (p, k) = (self.p, self.k);
        let dim = p + k;
        let mut ll = 0.0;
        let mut g = DVector::zeros(dim);
        let mut h = DMatrix::zeros(dim, dim);
        for i in 0..self.n() {
            let (z, d) = self.linear(i, params);
            let (lf, d1, d2) = self.link.log_density(z);
            ll += lf + d.ln();
            let (a, da) = self.row(i);
            let grp = self.group_of[i];
            let bi = if grp == 0 { None } else { Some(p + grp - 1) };
            let inv = 1.0 / d;
            for r in 0..p {
                g[r] += d1 * a[r] + da[r] * inv;
                if a[r] == 0.0 && da[r] == 0.0 {
                    continue;
                }
                for c in 0..=r {
                    h[(r, c)] += d2 * a[r] * a[c] - da[r] * da[c] * inv * inv;
                }
            }
            if let Some(b) = bi {
                g[b] += d1;
                h[(b, b)] += d2;
                for c in 0..p {
                    h[(b, c)] += d2 * a[c];
                }
            }
        }
        for r in 0..dim {
            for c in 0..r {
                h[(c, r)] = h[(r, c)];
            }
        }
        (ll, g, h)
    }

    pub(crate) fn scores(&self, params: &[f64]) -> DMatrix<f64> {
        let (p, k) = (self.p, self.k);
        let mut s = DMatrix::zeros(self.n(), p + k);
        for i in 0..self.n() {
            let (z, d) = self.linear(i, params);
            let d1 = self.link.log_density(z).1;
            let (a, da) = self.row(i);
            for r in 0..p {
                s[(i, r)] = d1 * a[r] + da[r] / d;
            }
            let grp = self.group_of[i];
            if grp > 0 {
                s[(i, p + grp - 1)] = d1;
            }
        }
        s
    }
}

/// `(theta_1, log increments, beta)` to `(theta, beta)`.
fn unpack(phi: &[f64], p: usize) -> Vec<f64> {
    let mut out = phi.to_vec();
    for j in 1..p {
        out[j] = out[j - 1] + phi[j].exp();
    }
    out
}

fn pack(params: &[f64], p: usize) -> Vec<f64> {
    let mut out = params.to_vec();
    for j in 1..p {
        out[j] = (params[j] - params[j - 1]).max(1e-300).ln();
    }
    out
}

struct Run {
    params: Vec<f64>,
    loglik: f64,
    iterations: usize,
    gradient_norm: f64,
    converged: bool,
    trace: Vec<f64>,
}

/// Gradient and Hessian in the unconstrained coordinates.
fn reparametrised(prob: &Problem, phi: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
    let p = prob.p;
    let dim = phi.len();
    let params = unpack(phi, p);
    let (ll, g, h) = prob.derivatives(&params);
    // J[j][l]: d theta_j / d phi_l
    let mut jac = DMatrix::<f64>::identity(dim, dim);
    for j in 0..p {
        jac[(j, 0)] = 1.0;
        for l in 1..p {
            jac[(j, l)] = if l <= j { phi[l].exp() } else { 0.0 };
        }
    }
    let gphi = jac.transpose() * &g;
    let mut hphi = jac.transpose() * h * &jac;
    for l in 1..p {
        let tail: f64 = (l..p).map(|j| g[j]).sum();
        hphi[(l, l)] += phi[l].exp() * tail;
    }
    (ll, gphi, hphi)
}

fn newton(prob: &Problem, start: Vec<f64>, opts: &FitOptions) -> Run {
    let p = prob.p;
    let mut phi = start;
    let (mut ll, mut g, mut h) = reparametrised(prob, &phi);
    let mut trace = vec![ll];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        if g.norm() < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let neg = -&h;
        let scale = neg.diagonal().abs().max().max(1.0);
        let mut mu = 0.0;
        let dir = loop {
            let mut m = neg.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += mu;
            }
            if let Some(ch) = m.cholesky() {
                break ch.solve(&g);
            }
            mu = if mu == 0.0 { 1e-8 * scale } else { mu * 10.0 };
        };
        let mut dir = dir;
        let big = (1..p).map(|l| dir[l].abs()).fold(0.0, f64::max);
        if big > 3.0 {
            dir *= 3.0 / big;
        }
        let slope = g.dot(&dir);
        // Below this the change in log-likelihood is lost in rounding; take the Newton step.
        let negligible = slope < 64.0 * f64::EPSILON * ll.abs().max(1.0);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = phi.iter().zip(dir.iter()).map(|(x, d)| x + t * d).collect();
            let lt = prob.loglik(&unpack(&trial, p));
            if lt.is_finite() && (negligible || lt >= ll + 1e-4 * t * slope) {
                accepted = Some(trial);
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some(next) => {
                phi = next;
                let r = reparametrised(prob, &phi);
                ll = r.0;
                g = r.1;
                h = r.2;
                trace.push(ll);
            }
            None => break,
        }
    }
    if !converged && g.norm() < opts.tol {
        converged = true;
    }
    Run {
        params: unpack(&phi, p),
        loglik: ll,
        iterations,
        gradient_norm: g.norm(),
        converged,
        trace,
    }
}

/// Maximum likelihood fit with a Bernstein basis of the given order.
pub fn fit_mlt(sample: &GroupedSample, order: usize, link: Link) -> Result<TransformationModel> {
    fit_mlt_with(sample, order, link, &FitOptions::default())
}

pub fn fit_mlt_with(sample: &GroupedSample, order: usize, link: Link, opts: &FitOptions) -> Result<TransformationModel> {
    let (group_of, y): (Vec<usize>, Vec<f64>) = sample.observations().unzip();
    let k = sample.k();
    let n = y.len();
    if n < order + 1 + k + 2 {
        return Err(Error::InvalidDesign(format!(
            "{n} observations are too few for {} parameters",
            order + 1 + k
        )));
    }
    let (lo, hi) = match opts.support {
        Some(s) => s,
        None => super::support_from_sample(&y, 0.01, 0.99)?,
    };
    let basis = BernsteinBasis::new(order, lo, hi)?;
    let prob = Problem::new(&basis, link, &y, &group_of, k);

    let mean = y.iter().sum::<f64>() / n as f64;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    let sd = if sd > 0.0 { sd } else { hi - lo };
    let link_sd = match link {
        Link::Normal => 1.0,
        Link::Logistic => std::f64::consts::PI / 3f64.sqrt(),
    };
    let mut best: Option<Run> = None;
    for slope in [1.0, 0.25, 4.0] {
        let mut params: Vec<f64> = (0..=order)
            .map(|j| slope * link_sd * (lo + j as f64 * (hi - lo) / order as f64 - mean) / sd)
            .collect();
        params.extend(std::iter::repeat_n(0.0, k));
        let run = newton(&prob, pack(&params, order + 1), opts);
        if best.as_ref().is_none_or(|b| run.loglik > b.loglik) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one start");
    if !run.loglik.is_finite() {
        return Err(Error::NumericDomain("log-likelihood is not finite at the optimum".into()));
    }
    let (_, _, hess) = prob.derivatives(&run.params);
    let covariance = (-hess).cholesky().map(|c| c.inverse());
    let separated_groups = sample
        .groups()
        .iter()
        .enumerate()
        .filter(|(_, g)| g.responses.iter().all(|&v| v < lo) || g.responses.iter().all(|&v| v > hi))
        .map(|(i, _)| i)
        .collect();
    let p = order + 1;
    Ok(TransformationModel {
        basis,
        link,
        theta: run.params[..p].to_vec(),
        beta: run.params[p..].to_vec(),
        loglik: run.loglik,
        covariance,
        diagnostics: FitDiagnostics {
            converged: run.converged,
            iterations: run.iterations,
            gradient_norm: run.gradient_norm,
            trace: run.trace,
            separated_groups,
        },
        labels: sample.labels().iter().map(|s| s.to_string()).collect(),
        responses: y,
        group_of,
    })
}
