//! Compute-optimal allocation of parameters and tokens.
//!
//! Minimizing a law at fixed `C = 6ND` gives `N_opt = G·(C/6)^a` and
//! `D_opt = G⁻¹·(C/6)^b` with `a + b = 1`:
//!
//! * Chinchilla: `G = (αA / (βB))^(1/(α+β))`, `a = β/(α+β)`, `b = α/(α+β)`
//! * extended:   `G = (αA / ((β′−γ)B′))^(1/(α+β′−γ))`,
//!   `a = β′/(α+β′−γ)`, `b = (α−γ)/(α+β′−γ)`
//!
//! The prefactors `k_N = G/6^a` and `k_D = G⁻¹/6^b` give `N_opt = k_N·C^a`
//! and `D_opt = k_D·C^b` directly in FLOPs.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::laws::{ChinchillaParams, ExtendedCptParams, ScalingLaw};
use crate::math;
use crate::numeric::{geomspace, golden_section};
use crate::run::FLOPS_PER_PARAM_TOKEN;

/// Bracket (in parameters) for the numeric frontier search.
pub const FRONTIER_SEARCH_BRACKET: (f64, f64) = (1e6, 1e13);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationCoefficients {
    #[serde(rename = "G")]
    pub g: f64,
    pub a: f64,
    pub b: f64,
    pub k_n: f64,
    pub k_d: f64,
}

fn from_parts(g: f64, a: f64, b: f64) -> AllocationCoefficients {
    AllocationCoefficients {
        g,
        a,
        b,
        k_n: g / math::powf(FLOPS_PER_PARAM_TOKEN, a),
        k_d: 1.0 / (g * math::powf(FLOPS_PER_PARAM_TOKEN, b)),
    }
}

pub fn coefficients_scratch(p: &ChinchillaParams) -> Result<AllocationCoefficients> {
    p.validate()?;
    let s = p.alpha + p.beta;
    let g = math::exp((math::ln(p.alpha * p.a) - math::ln(p.beta * p.b)) / s);
    Ok(from_parts(g, p.beta / s, p.alpha / s))
}

pub fn coefficients_cpt(p: &ExtendedCptParams) -> Result<AllocationCoefficients> {
    p.validate()?;
    if p.beta_prime <= p.gamma || p.alpha <= p.gamma {
        bail!(
            InvalidRegime,
            "no interior optimum unless beta_prime > gamma and alpha > gamma (beta_prime={}, alpha={}, gamma={})",
            p.beta_prime,
            p.alpha,
            p.gamma
        );
    }
    let s = p.alpha + p.beta_prime - p.gamma;
    let g = math::exp((math::ln(p.alpha * p.a) - math::ln((p.beta_prime - p.gamma) * p.b_prime)) / s);
    Ok(from_parts(g, p.beta_prime / s, (p.alpha - p.gamma) / s))
}

/// Coefficients for whichever law is given.
pub fn coefficients(law: &ScalingLaw) -> Result<AllocationCoefficients> {
    match law {
        ScalingLaw::Chinchilla(p) => coefficients_scratch(p),
        ScalingLaw::ExtendedCpt(p) => coefficients_cpt(p),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub compute: f64,
    pub n_opt: f64,
    pub d_opt: f64,
    pub predicted_loss: f64,
}

pub fn optimal_allocation(coeffs: &AllocationCoefficients, compute: f64, law: &ScalingLaw) -> Result<AllocationPlan> {
    if !(compute > 0.0 && compute.is_finite()) {
        bail!(Domain, "compute must be positive, got {compute}");
    }
    let ln_c = math::ln(compute);
    let n_opt = coeffs.k_n * math::exp(coeffs.a * ln_c);
    let d_opt = coeffs.k_d * math::exp(coeffs.b * ln_c);
    Ok(AllocationPlan { compute, n_opt, d_opt, predicted_loss: law.eval(n_opt, d_opt)? })
}

/// Loss-minimizing parameter count at fixed compute, by golden-section
/// search on `ln N` over [`FRONTIER_SEARCH_BRACKET`].
pub fn numeric_optimal_params(law: &ScalingLaw, compute: f64) -> Result<f64> {
    if !(compute > 0.0 && compute.is_finite()) {
        bail!(Domain, "compute must be positive, got {compute}");
    }
    law.validate()?;
    let (lo, hi) = FRONTIER_SEARCH_BRACKET;
    let ln_n = golden_section(
        |ln_n| {
            let n = math::exp(ln_n);
            law.eval(n, compute / (FLOPS_PER_PARAM_TOKEN * n)).unwrap_or(f64::INFINITY)
        },
        math::ln(lo),
        math::ln(hi),
        1e-10,
    );
    Ok(math::exp(ln_n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsoLossFrontierPoint {
    pub compute: f64,
    pub n: f64,
    pub d: f64,
    pub loss: f64,
}

/// Loss over a log-spaced `(N, D)` grid plus the numeric efficient frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoLossGrid {
    pub n_axis: Vec<f64>,
    pub d_axis: Vec<f64>,
    /// `loss_values[i][j]` is the loss at `(n_axis[i], d_axis[j])`.
    pub loss_values: Vec<Vec<f64>>,
    pub frontier: Vec<IsoLossFrontierPoint>,
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        bail!(Domain, "{name} must satisfy 0 < lo < hi, got ({lo}, {hi})");
    }
    Ok(())
}

/// Evaluates `law` on a `resolution × resolution` grid; the frontier is
/// sampled at `resolution` compute levels spanning the grid's corners.
pub fn isoloss_grid(law: &ScalingLaw, n_range: (f64, f64), d_range: (f64, f64), resolution: usize) -> Result<IsoLossGrid> {
    check_range("n_range", n_range)?;
    check_range("d_range", d_range)?;
    if resolution < 2 {
        bail!(Domain, "resolution must be at least 2");
    }
    law.validate()?;
    let n_axis = geomspace(n_range.0, n_range.1, resolution);
    let d_axis = geomspace(d_range.0, d_range.1, resolution);
    let loss_values = n_axis
        .iter()
        .map(|&n| d_axis.iter().map(|&d| law.eval(n, d)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let c_lo = FLOPS_PER_PARAM_TOKEN * n_range.0 * d_range.0;
    let c_hi = FLOPS_PER_PARAM_TOKEN * n_range.1 * d_range.1;
    let frontier = geomspace(c_lo, c_hi, resolution)
        .into_iter()
        .map(|c| {
            let n = numeric_optimal_params(law, c)?;
            let d = c / (FLOPS_PER_PARAM_TOKEN * n);
            Ok(IsoLossFrontierPoint { compute: c, n, d, loss: law.eval(n, d)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IsoLossGrid { n_axis, d_axis, loss_values, frontier })
}

/// Predicted loss at the closed-form optimum for `samples` compute levels
/// spaced geometrically over `c_range`.
pub fn efficient_frontier_loss(
    coeffs: &AllocationCoefficients,
    law: &ScalingLaw,
    c_range: (f64, f64),
    samples: usize,
) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = c_range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        bail!(Domain, "compute range must satisfy 0 < lo <= hi, got ({lo}, {hi})");
    }
    geomspace(lo, hi, samples)
        .into_iter()
        .map(|c| optimal_allocation(coeffs, c, law).map(|p| (c, p.predicted_loss)))
        .collect()
}
