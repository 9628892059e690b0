//! Scalar building blocks: Huber penalty, log-sum-exp, golden-section search.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::math;

/// Huber penalty: `r²/2` for `|r| ≤ delta`, `delta·(|r| − delta/2)` beyond.
#[inline]
pub fn huber(residual: f64, delta: f64) -> f64 {
    let a = residual.abs();
    if a <= delta {
        0.5 * residual * residual
    } else {
        delta * (a - 0.5 * delta)
    }
}

/// `ln Σ exp(t)` with the max subtracted first.
pub fn lse(terms: &[f64]) -> Result<f64> {
    if terms.is_empty() {
        bail!(Domain, "log-sum-exp of an empty list");
    }
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || !m.is_finite() {
        return Ok(m);
    }
    let s: f64 = terms.iter().map(|&t| math::exp(t - m)).sum();
    Ok(m + math::ln(s))
}

/// Three-term log-sum-exp on the fitting hot path.
#[inline]
pub(crate) fn lse3(x: f64, y: f64, z: f64) -> f64 {
    // Order so that `m` is the largest; its own term is exactly 1.
    let (m, p, q) = if x >= y && x >= z {
        (x, y, z)
    } else if y >= z {
        (y, x, z)
    } else {
        (z, x, y)
    };
    if !m.is_finite() {
        return m;
    }
    m + math::ln(1.0 + math::exp(p - m) + math::exp(q - m))
}

#[inline]
pub(crate) fn lse2(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if !hi.is_finite() {
        return hi;
    }
    hi + math::ln_1p(math::exp(lo - hi))
}

/// Minimizes a unimodal `f` on `[lo, hi]` by golden-section search; returns the argmin.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// `n` geometrically spaced points from `lo` to `hi` inclusive.
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => {
            let (l0, l1) = (math::ln(lo), math::ln(hi));
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        hi
                    } else if i == 0 {
                        lo
                    } else {
                        math::exp(l0 + (l1 - l0) * i as f64 / (n - 1) as f64)
                    }
                })
                .collect()
        }
    }
}
