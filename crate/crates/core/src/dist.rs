//! Scalar distribution helpers shared by the inference kernels.
//!
//! Degrees of freedom are plain `f64`; `f64::INFINITY` selects the normal limit.

use statrs::distribution::{ContinuousCDF, StudentsT};
use libm::erfc;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, ln_gamma};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x * FRAC_1_SQRT_2)
    }
}

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

#[inline]
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        // One Newton step on top of the rational approximation.
        let x = -SQRT_2 * erfc_inv(2.0 * p);
        let d = norm_pdf(x);
        if d > 1e-300 {
            let err = if x > 0.0 { (1.0 - p) - norm_cdf(-x) } else { norm_cdf(x) - p };
            x - err / d
        } else {
            x
        }
    }
}

pub fn t_cdf(x: f64, df: f64) -> f64 {
    if df.is_infinite() {
        return norm_cdf(x);
    }
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    StudentsT::new(0.0, 1.0, df)
        .expect("positive degrees of freedom")
        .cdf(x)
}

/// Upper tail `P(T > x)` without cancellation for large `x`.
pub fn t_sf(x: f64, df: f64) -> f64 {
    t_cdf(-x, df)
}

pub fn t_quantile(p: f64, df: f64) -> f64 {
    if df.is_infinite() {
        return norm_quantile(p);
    }
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    StudentsT::new(0.0, 1.0, df)
        .expect("positive degrees of freedom")
        .inverse_cdf(p)
}

/// CDF of `S = sqrt(X / df)` with `X ~ chi^2(df)`, the scale mixing variable of the t family.
pub fn chi_scale_cdf(s: f64, df: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        gamma_lr(0.5 * df, 0.5 * df * s * s)
    }
}

/// Density of `S = sqrt(X / df)`.
pub fn chi_scale_pdf(s: f64, df: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let a = 0.5 * df;
    // f(s) = 2 a^a s^(2a-1) exp(-a s^2) / Gamma(a)
    (std::f64::consts::LN_2 + a * a.ln() + (2.0 * a - 1.0) * s.ln() - a * s * s - ln_gamma(a)).exp()
}

/// Quantile of `S = sqrt(chi^2(df) / df)`: Wilson-Hilferty start, safeguarded Newton.
pub fn chi_scale_quantile(u: f64, df: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    let z = norm_quantile(u);
    let k = 2.0 / (9.0 * df);
    let wh = 1.0 - k + z * k.sqrt();
    let mut s = if wh > 0.05 { (wh * wh * wh).sqrt() } else { 0.05 };
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    for _ in 0..100 {
        let f = chi_scale_cdf(s, df) - u;
        if f.abs() <= 1e-14 {
            break;
        }
        if f > 0.0 {
            hi = hi.min(s);
        } else {
            lo = lo.max(s);
        }
        let d = chi_scale_pdf(s, df);
        let mut next = if d > 0.0 { s - f / d } else { f64::NAN };
        if !next.is_finite() || next <= lo || next >= hi {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * s.max(lo) };
        }
        if (next - s).abs() <= 1e-13 * s.max(1e-300) {
            s = next;
            break;
        }
        s = next;
    }
    s
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = x;
                p0 = 1.0;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
