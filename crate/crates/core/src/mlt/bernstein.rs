use crate::error::{Error, Result};

/// Bernstein polynomial basis of order `M` on `[lo, hi]`, extended linearly outside.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinBasis {
    order: usize,
    lo: f64,
    hi: f64,
    binom: Vec<f64>,
    binom_d: Vec<f64>,
}

fn binomials(n: usize) -> Vec<f64> {
    let mut row = vec![1.0; n + 1];
    for j in 1..n {
        row[j] = row[j - 1] * (n + 1 - j) as f64 / j as f64;
    }
    row
}

impl BernsteinBasis {
    pub fn new(order: usize, lo: f64, hi: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("Bernstein order must be positive".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!("invalid support [{lo}, {hi}]")));
        }
        Ok(Self {
            order,
            lo,
            hi,
            binom: binomials(order),
            binom_d: binomials(order - 1),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of coefficients, `M + 1`.
    pub fn len(&self) -> usize {
        self.order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn raw(x: f64, n: usize, binom: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate().take(n + 1) {
            *o = binom[j] * x.powi(j as i32) * (1.0 - x).powi((n - j) as i32);
        }
    }

    /// Basis `a(y)` and its derivative `a'(y)` so that `h(y) = a(y)'theta`, `h'(y) = a'(y)'theta`.
    pub fn eval(&self, y: f64, a: &mut [f64], da: &mut [f64]) {
        let m = self.order;
        let s = m as f64 / self.width();
        a.iter_mut().for_each(|v| *v = 0.0);
        da.iter_mut().for_each(|v| *v = 0.0);
        if y < self.lo {
            da[0] = -s;
            da[1] = s;
            a[0] = 1.0;
            let d = y - self.lo;
            a[0] += d * da[0];
            a[1] += d * da[1];
        } else if y > self.hi {
            da[m - 1] = -s;
            da[m] = s;
            a[m] = 1.0;
            let d = y - self.hi;
            a[m - 1] += d * da[m - 1];
            a[m] += d * da[m];
        } else {
            let x = (y - self.lo) / self.width();
            Self::raw(x, m, &self.binom, a);
            let mut b = vec![0.0; m];
            Self::raw(x, m - 1, &self.binom_d, &mut b);
            for j in 0..=m {
                let left = if j > 0 { b[j - 1] } else { 0.0 };
                let right = if j < m { b[j] } else { 0.0 };
                da[j] = s * (left - right);
            }
        }
    }

    pub fn basis(&self, y: f64) -> (Vec<f64>, Vec<f64>) {
        let mut a = vec![0.0; self.len()];
        let mut da = vec![0.0; self.len()];
        self.eval(y, &mut a, &mut da);
        (a, da)
    }
}

/// Sample quantile with linear interpolation between order statistics (type 7).
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Support `[q(p_lo), q(p_hi)]` from type-7 sample quantiles.
pub fn support_from_sample(responses: &[f64], p_lo: f64, p_hi: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&p_lo) || !(p_lo < p_hi && p_hi <= 1.0) {
        return Err(Error::InvalidArgument(format!("support probabilities {p_lo}, {p_hi}")));
    }
    let mut v = responses.to_vec();
    if v.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidArgument("non-finite response".into()));
    }
    v.sort_by(|a, b| a.total_cmp(b));
    if v.len() < 2 {
        return Err(Error::DegenerateData("support needs at least two values".into()));
    }
    let (lo, hi) = (quantile_type7(&v, p_lo), quantile_type7(&v, p_hi));
    if !(lo < hi) {
        return Err(Error::DegenerateData("responses do not spread over an interval".into()));
    }
    Ok((lo, hi))
}
