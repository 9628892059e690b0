//! Robust fitting of loss laws to training runs.
//!
//! Both laws are fitted on log loss through the log-sum-exp form
//!
//! ```text
//! log L̂ = LSE(a − α·log N,  b − β·log D,  e)                 (from scratch)
//! log L̂ = LSE(a − α·log N,  b′ − β′·log D − γ·log N,  e)     (CPT)
//! ```
//!
//! with `A = exp(a)`, `B = exp(b)`, `B′ = exp(b′)`, `E = exp(e)`, minimizing
//! the mean Huber penalty of `log L̂ − log L` over all records. CPT fits keep
//! `(E, A, α)` from a preceding from-scratch fit and only move
//! `(b′, β′, γ)`. Each fit is a sweep of local searches over a fixed grid of
//! starting points; the lowest objective wins.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::laws::{ChinchillaParams, ExtendedCptParams, FrontierParams};
use crate::math;
use crate::numeric::{huber, lse2, lse3};
use crate::optimize::{minimize, LocalOptions};
use crate::run::{RunSet, FLOPS_PER_PARAM_TOKEN};

pub const DEFAULT_DELTA: f64 = 1e-3;
pub const DEFAULT_BINS_PER_DECADE: usize = 10;

/// Starting points for the multi-start sweep.
///
/// Coefficients are given as logs (`a = ln A`, ...); `e` is given as a
/// multiple of the smallest observed loss so the grid adapts to the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitGrid {
    pub log_a: Vec<f64>,
    pub log_b: Vec<f64>,
    pub e_fraction_of_min_loss: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub log_b_prime: Vec<f64>,
    pub beta_prime: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Default for InitGrid {
    fn default() -> Self {
        let exps = vec![0.1, 0.3, 0.5, 0.7];
        let logs = vec![2.0, 6.0, 10.0, 14.0];
        InitGrid {
            log_a: logs.clone(),
            log_b: logs.clone(),
            e_fraction_of_min_loss: vec![0.5, 0.9],
            alpha: exps.clone(),
            beta: exps.clone(),
            log_b_prime: logs,
            beta_prime: exps,
            gamma: vec![-0.1, 0.0, 0.1, 0.2],
        }
    }
}

impl InitGrid {
    fn validate(&self) -> Result<()> {
        let sets: [(&str, &[f64]); 8] = [
            ("log_a", &self.log_a),
            ("log_b", &self.log_b),
            ("e_fraction_of_min_loss", &self.e_fraction_of_min_loss),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("log_b_prime", &self.log_b_prime),
            ("beta_prime", &self.beta_prime),
            ("gamma", &self.gamma),
        ];
        for (name, v) in sets {
            if v.is_empty() {
                bail!(Domain, "init grid axis {name} is empty");
            }
            if v.iter().any(|x| !x.is_finite()) {
                bail!(Domain, "init grid axis {name} has a non-finite value");
            }
        }
        for (name, v) in [
            ("e_fraction_of_min_loss", &self.e_fraction_of_min_loss),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("beta_prime", &self.beta_prime),
        ] {
            if v.iter().any(|&x| x <= 0.0) {
                bail!(Domain, "init grid axis {name} must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Huber threshold on log-loss residuals.
    pub delta: f64,
    pub init_grid: InitGrid,
    /// Relative objective improvement below which a local search stops.
    pub local_tol: f64,
    pub max_iters: usize,
    /// Fraction of each run's token budget dropped as warmup before fitting.
    pub warmup_fraction: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            delta: DEFAULT_DELTA,
            init_grid: InitGrid::default(),
            local_tol: 1e-10,
            max_iters: 1000,
            warmup_fraction: 0.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            bail!(Domain, "delta must be positive, got {}", self.delta);
        }
        if !(self.local_tol > 0.0) {
            bail!(Domain, "local_tol must be positive, got {}", self.local_tol);
        }
        if self.max_iters == 0 {
            bail!(Domain, "max_iters must be positive");
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            bail!(Domain, "warmup_fraction {} outside [0, 1)", self.warmup_fraction);
        }
        self.init_grid.validate()
    }

    fn local_options(&self) -> LocalOptions {
        LocalOptions { tol: self.local_tol, max_iters: self.max_iters, ..LocalOptions::default() }
    }
}

/// From-scratch parameter vector in fitting coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScratchTheta {
    pub a: f64,
    pub b: f64,
    pub e: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ScratchTheta {
    pub fn from_params(p: &ChinchillaParams) -> Self {
        ScratchTheta { a: math::ln(p.a), b: math::ln(p.b), e: math::ln(p.e), alpha: p.alpha, beta: p.beta }
    }

    pub fn to_params(&self) -> ChinchillaParams {
        ChinchillaParams {
            e: math::exp(self.e),
            a: math::exp(self.a),
            b: math::exp(self.b),
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

/// The three coordinates moved by a CPT fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CptTheta {
    pub b_prime: f64,
    pub beta_prime: f64,
    pub gamma: f64,
}

/// `(E, A, α)` carried over from a from-scratch fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedTerms {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub alpha: f64,
}

impl From<&ChinchillaParams> for FixedTerms {
    fn from(p: &ChinchillaParams) -> Self {
        FixedTerms { e: p.e, a: p.a, alpha: p.alpha }
    }
}

impl FixedTerms {
    fn validate(&self) -> Result<()> {
        ChinchillaParams::new(self.e, self.a, 1.0, self.alpha, 1.0).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub run_id: String,
    pub tokens: u64,
    pub predicted_log_loss: f64,
    pub observed_log_loss: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport<P> {
    pub params: P,
    /// Mean Huber penalty at the optimum.
    pub objective: f64,
    pub n_points: usize,
    pub residuals: Vec<Residual>,
    /// Winning start in natural coordinates: `(a, b, e, α, β)` for
    /// from-scratch fits, `(b′, β′, γ)` for CPT fits.
    pub chosen_init: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub chinchilla_error: f64,
    pub extended_error: f64,
    pub gamma_fitted: f64,
    pub chinchilla: ChinchillaParams,
    pub extended: ExtendedCptParams,
}

#[derive(Debug, Clone, Copy)]
struct Obs {
    ln_n: f64,
    ln_d: f64,
    ln_l: f64,
}

fn observations(data: &RunSet) -> Result<Vec<Obs>> {
    let mut out = Vec::with_capacity(data.n_records());
    for run in data.runs() {
        let ln_n = math::ln(run.param_count() as f64);
        for r in run.records() {
            if !(r.loss > 0.0 && r.loss.is_finite()) {
                bail!(Domain, "run {}: nonpositive loss {}", run.id(), r.loss);
            }
            out.push(Obs { ln_n, ln_d: math::ln(r.tokens as f64), ln_l: math::ln(r.loss) });
        }
    }
    if out.is_empty() {
        bail!(Domain, "no records to fit");
    }
    Ok(out)
}

#[inline]
fn scratch_pred(t: &ScratchTheta, o: &Obs) -> f64 {
    lse3(t.a - t.alpha * o.ln_n, t.b - t.beta * o.ln_d, t.e)
}

#[inline]
fn cpt_pred(t: &CptTheta, fixed_ln: &(f64, f64, f64), o: &Obs) -> f64 {
    let (ln_a, ln_e, alpha) = *fixed_ln;
    lse3(ln_a - alpha * o.ln_n, t.b_prime - t.beta_prime * o.ln_d - t.gamma * o.ln_n, ln_e)
}

fn mean_huber(obs: &[Obs], delta: f64, pred: impl Fn(&Obs) -> f64) -> f64 {
    obs.iter().map(|o| huber(pred(o) - o.ln_l, delta)).sum::<f64>() / obs.len() as f64
}

fn fixed_logs(f: &FixedTerms) -> (f64, f64, f64) {
    (math::ln(f.a), math::ln(f.e), f.alpha)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        bail!(Domain, "delta must be positive, got {delta}");
    }
    Ok(())
}

/// Mean Huber penalty of the from-scratch law on `data`.
pub fn objective_scratch(theta: &ScratchTheta, data: &RunSet, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let obs = observations(data)?;
    Ok(mean_huber(&obs, delta, |o| scratch_pred(theta, o)))
}

/// Mean Huber penalty of the extended law with `(E, A, α)` held at `fixed`.
pub fn objective_cpt(theta: &CptTheta, fixed: &FixedTerms, data: &RunSet, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    fixed.validate()?;
    let obs = observations(data)?;
    let fl = fixed_logs(fixed);
    Ok(mean_huber(&obs, delta, |o| cpt_pred(theta, &fl, o)))
}

fn prepare(data: &RunSet, cfg: &FitConfig) -> Result<RunSet> {
    cfg.validate()?;
    if data.is_empty() {
        bail!(Unidentifiable, "empty run set");
    }
    let data = if cfg.warmup_fraction > 0.0 { data.without_warmup(cfg.warmup_fraction)? } else { data.clone() };
    let sizes: BTreeSet<u64> = data.runs().iter().map(|r| r.param_count()).collect();
    if sizes.len() < 2 {
        bail!(Unidentifiable, "need at least 2 distinct model sizes, found {}", sizes.len());
    }
    let tokens: BTreeSet<u64> = data.runs().iter().flat_map(|r| r.records().iter().map(|x| x.tokens)).collect();
    if tokens.len() < 2 {
        bail!(Unidentifiable, "need at least 2 distinct token counts, found {}", tokens.len());
    }
    Ok(data)
}

struct Best {
    x: Vec<f64>,
    f: f64,
    start: Vec<f64>,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Runs a local search from every start and keeps the converged result with
/// the lowest objective (ties go to the lexicographically smallest start).
fn multistart<F>(objective: F, starts: &[(Vec<f64>, Vec<f64>)], opts: &LocalOptions) -> Result<Best>
where
    F: Fn(&[f64]) -> f64,
{
    let mut best: Option<Best> = None;
    let mut attempted_best = f64::INFINITY;
    for (x0, natural) in starts {
        let r = minimize(&objective, x0, opts);
        if r.f.is_finite() {
            attempted_best = attempted_best.min(r.f);
        }
        if !r.converged || !r.f.is_finite() {
            continue;
        }
        let wins = match &best {
            None => true,
            Some(b) => r.f < b.f || (r.f == b.f && lex_cmp(natural, &b.start) == Ordering::Less),
        };
        if wins {
            best = Some(Best { x: r.x, f: r.f, start: natural.clone() });
        }
    }
    best.ok_or_else(|| {
        Error::FitFailure(alloc::format!(
            "none of {} starts converged (best objective seen: {attempted_best})",
            starts.len()
        ))
    })
}

fn residuals(data: &RunSet, pred: impl Fn(&Obs) -> f64) -> Vec<Residual> {
    let mut out = Vec::with_capacity(data.n_records());
    for run in data.runs() {
        let ln_n = math::ln(run.param_count() as f64);
        for r in run.records() {
            let o = Obs { ln_n, ln_d: math::ln(r.tokens as f64), ln_l: math::ln(r.loss) };
            let p = pred(&o);
            out.push(Residual {
                run_id: run.id().into(),
                tokens: r.tokens,
                predicted_log_loss: p,
                observed_log_loss: o.ln_l,
                residual: p - o.ln_l,
            });
        }
    }
    out
}

fn decode_scratch(x: &[f64]) -> ScratchTheta {
    ScratchTheta { a: x[0], b: x[1], e: x[2], alpha: math::exp(x[3]), beta: math::exp(x[4]) }
}

fn decode_cpt(x: &[f64]) -> CptTheta {
    CptTheta { b_prime: x[0], beta_prime: math::exp(x[1]), gamma: x[2] }
}

/// Fits `E + A/N^α + B/D^β` to every record in `data`.
pub fn fit_scratch(data: &RunSet, cfg: &FitConfig) -> Result<FitReport<ChinchillaParams>> {
    let data = prepare(data, cfg)?;
    let obs = observations(&data)?;
    let min_loss = obs.iter().map(|o| o.ln_l).fold(f64::INFINITY, f64::min);
    let g = &cfg.init_grid;
    let mut starts = Vec::new();
    for &a in &g.log_a {
        for &b in &g.log_b {
            for &ef in &g.e_fraction_of_min_loss {
                let e = math::ln(ef) + min_loss;
                for &alpha in &g.alpha {
                    for &beta in &g.beta {
                        starts.push((
                            vec![a, b, e, math::ln(alpha), math::ln(beta)],
                            vec![a, b, e, alpha, beta],
                        ));
                    }
                }
            }
        }
    }
    let delta = cfg.delta;
    let best = multistart(
        |x| {
            let t = decode_scratch(x);
            mean_huber(&obs, delta, |o| scratch_pred(&t, o))
        },
        &starts,
        &cfg.local_options(),
    )?;
    let theta = decode_scratch(&best.x);
    let params = theta.to_params();
    params.validate().map_err(|e| Error::FitFailure(alloc::format!("fitted law is invalid: {e}")))?;
    Ok(FitReport {
        params,
        objective: best.f,
        n_points: obs.len(),
        residuals: residuals(&data, |o| scratch_pred(&theta, o)),
        chosen_init: best.start,
    })
}

/// Fits the extended law's `(B′, β′, γ)` with `(E, A, α)` held at `fixed`.
pub fn fit_cpt(data: &RunSet, fixed: &FixedTerms, cfg: &FitConfig) -> Result<FitReport<ExtendedCptParams>> {
    fixed.validate()?;
    let data = prepare(data, cfg)?;
    let obs = observations(&data)?;
    let fl = fixed_logs(fixed);
    let g = &cfg.init_grid;
    let mut starts = Vec::new();
    for &b in &g.log_b_prime {
        for &bp in &g.beta_prime {
            for &gamma in &g.gamma {
                starts.push((vec![b, math::ln(bp), gamma], vec![b, bp, gamma]));
            }
        }
    }
    let delta = cfg.delta;
    let best = multistart(
        |x| {
            let t = decode_cpt(x);
            mean_huber(&obs, delta, |o| cpt_pred(&t, &fl, o))
        },
        &starts,
        &cfg.local_options(),
    )?;
    let theta = decode_cpt(&best.x);
    let params = ExtendedCptParams {
        e: fixed.e,
        a: fixed.a,
        alpha: fixed.alpha,
        b_prime: math::exp(theta.b_prime),
        beta_prime: theta.beta_prime,
        gamma: theta.gamma,
    };
    params.validate().map_err(|e| Error::FitFailure(alloc::format!("fitted law is invalid: {e}")))?;
    Ok(FitReport {
        params,
        objective: best.f,
        n_points: obs.len(),
        residuals: residuals(&data, |o| cpt_pred(&theta, &fl, o)),
        chosen_init: best.start,
    })
}

/// Fits both law families to `data` and reports their objectives.
///
/// The extended law follows the two-stage protocol: `(E, A, α)` come from
/// `reference` (a from-scratch fit on pre-training data) when given, and
/// from the Chinchilla fit on `data` itself otherwise.
pub fn compare_laws(
    data: &RunSet,
    cfg: &FitConfig,
    reference: Option<&ChinchillaParams>,
) -> Result<ModelComparison> {
    let chin = fit_scratch(data, cfg)?;
    let fixed = FixedTerms::from(reference.unwrap_or(&chin.params));
    let ext = fit_cpt(data, &fixed, cfg)?;
    Ok(ModelComparison {
        chinchilla_error: chin.objective,
        extended_error: ext.objective,
        gamma_fitted: ext.params.gamma,
        chinchilla: chin.params,
        extended: ext.params,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub compute: f64,
    pub loss: f64,
}

/// Lowest loss per log-compute bin, then Pareto-filtered so that loss
/// strictly decreases as compute grows.
pub fn extract_compute_frontier(data: &RunSet, bins_per_decade: usize) -> Result<Vec<FrontierPoint>> {
    if bins_per_decade == 0 {
        bail!(Domain, "bins_per_decade must be at least 1");
    }
    if data.n_records() == 0 {
        bail!(Domain, "no records");
    }
    let mut binned: Vec<(i64, FrontierPoint)> = Vec::new();
    for run in data.runs() {
        let n = run.param_count() as f64;
        for r in run.records() {
            let c = FLOPS_PER_PARAM_TOKEN * n * r.tokens as f64;
            let bin = math::floor(math::log10(c) * bins_per_decade as f64) as i64;
            binned.push((bin, FrontierPoint { compute: c, loss: r.loss }));
        }
    }
    binned.sort_by(|x, y| {
        x.0.cmp(&y.0)
            .then(x.1.loss.total_cmp(&y.1.loss))
            .then(x.1.compute.total_cmp(&y.1.compute))
    });
    let mut out: Vec<FrontierPoint> = Vec::new();
    let mut last_bin = None;
    for (bin, p) in binned {
        if last_bin == Some(bin) {
            continue;
        }
        last_bin = Some(bin);
        if out.last().is_none_or(|q| p.loss < q.loss) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Least squares of `ln L = ln A′ − γ′·ln C`; returns `(ln A′, γ′)`.
fn loglog_regression(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, -slope)
}

fn clean_exponent(e: f64) -> Result<f64> {
    if e.abs() < 1e-12 {
        Ok(0.0)
    } else if e < 0.0 {
        bail!(Domain, "loss increases with compute (fitted exponent {e})")
    } else {
        Ok(e)
    }
}

/// Fits `L(C) = E′ + A′·C^(−γ′)`.
///
/// With `fix_offset_zero` the fit is ordinary least squares in
/// `(ln C, ln L)`. Otherwise `E′` is free and the mean Huber penalty on log
/// loss is minimized.
pub fn fit_frontier(points: &[FrontierPoint], fix_offset_zero: bool) -> Result<FrontierParams> {
    for p in points {
        if !(p.compute > 0.0 && p.loss > 0.0 && p.compute.is_finite() && p.loss.is_finite()) {
            bail!(Domain, "frontier points need positive compute and loss");
        }
    }
    let distinct: BTreeSet<u64> = points.iter().map(|p| p.compute.to_bits()).collect();
    if distinct.len() < 2 {
        bail!(Unidentifiable, "need at least 2 points with distinct compute");
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|p| (math::ln(p.compute), math::ln(p.loss))).collect();
    let (ln_coef, exponent) = loglog_regression(&logs);
    if fix_offset_zero {
        return FrontierParams::new(math::exp(ln_coef), clean_exponent(exponent)?, 0.0);
    }

    let min_loss = points.iter().map(|p| p.loss).fold(f64::INFINITY, f64::min);
    let objective = |x: &[f64]| {
        let (ln_a, gamma, ln_e) = (x[0], math::exp(x[1]), x[2]);
        let s: f64 = logs.iter().map(|&(lc, ll)| huber(lse2(ln_e, ln_a - gamma * lc) - ll, DEFAULT_DELTA)).sum();
        s / logs.len() as f64
    };
    let mut starts = Vec::new();
    for frac in [1e-3, 0.25, 0.5, 0.9] {
        let e0 = frac * min_loss;
        let shifted: Vec<(f64, f64)> = points.iter().map(|p| (math::ln(p.compute), math::ln(p.loss - e0))).collect();
        let (c0, g0) = loglog_regression(&shifted);
        let g0 = if g0 > 1e-6 { g0 } else { 1e-3 };
        starts.push((vec![c0, math::ln(g0), math::ln(e0)], vec![c0, g0, e0]));
    }
    let opts = LocalOptions::default();
    let best = multistart(objective, &starts, &opts)?;
    FrontierParams::new(math::exp(best.x[0]), math::exp(best.x[1]), math::exp(best.x[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::run::{LossRecord, Strategy, TrainingRun};
    use crate::synth::{generate_runset, SynthConfig};

    fn small_grid() -> InitGrid {
        InitGrid {
            log_a: vec![4.0, 8.0],
            log_b: vec![4.0, 8.0],
            e_fraction_of_min_loss: vec![0.9],
            alpha: vec![0.3, 0.5],
            beta: vec![0.3, 0.5],
            log_b_prime: vec![4.0, 8.0],
            beta_prime: vec![0.1, 0.3],
            gamma: vec![0.0, 0.1],
        }
    }

    fn synth(law: crate::ScalingLaw, sizes: &[u64]) -> RunSet {
        generate_runset(&SynthConfig {
            law,
            param_sizes: sizes.to_vec(),
            records_per_run: 12,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    fn sizes() -> Vec<u64> {
        vec![50_000_000, 150_000_000, 400_000_000, 1_000_000_000, 3_000_000_000]
    }

    fn single_record(tokens: u64, loss: f64, n: u64, id: &str) -> TrainingRun {
        TrainingRun::new(id, Strategy::Scratch, "zh", 0.0, n, vec![LossRecord { tokens, loss }]).unwrap()
    }

    #[test]
    fn objective_zero_at_truth() {
        let p = ChinchillaParams::REFERENCE_SCRATCH;
        let data = synth(p.into(), &sizes());
        let f = objective_scratch(&ScratchTheta::from_params(&p), &data, 1e-3).unwrap();
        assert!(f < 1e-28, "{f}");
    }

    #[test]
    fn objective_single_residual() {
        // Observed loss chosen so that predicted − observed log loss is 0.01.
        let p = ChinchillaParams::REFERENCE_SCRATCH;
        let pred = p.eval(1e9, 2e10).unwrap();
        let data = RunSet::new(vec![single_record(20_000_000_000, pred * (-0.01f64).exp(), 1_000_000_000, "x")]).unwrap();
        let f = objective_scratch(&ScratchTheta::from_params(&p), &data, 1e-3).unwrap();
        assert!((f - 9.5e-6).abs() < 1e-15, "{f}");
    }

    #[test]
    fn objective_order_invariant() {
        let p = ChinchillaParams::REFERENCE_SCRATCH;
        let mut runs = synth(ChinchillaParams { b: 650.0, ..p }.into(), &sizes()).into_runs();
        let theta = ScratchTheta::from_params(&p);
        let f1 = objective_scratch(&theta, &RunSet::new(runs.clone()).unwrap(), 1e-3).unwrap();
        runs.reverse();
        let f2 = objective_scratch(&theta, &RunSet::new(runs).unwrap(), 1e-3).unwrap();
        assert!((f1 - f2).abs() <= 1e-15 * f1);
    }

    #[test]
    fn cpt_objective_reductions() {
        let s = ChinchillaParams::REFERENCE_SCRATCH;
        let c = crate::ExtendedCptParams::REFERENCE_CPT;
        let data = synth(c.into(), &sizes());
        let fixed = FixedTerms::from(&s);
        let truth = CptTheta { b_prime: c.b_prime.ln(), beta_prime: c.beta_prime, gamma: c.gamma };
        assert!(objective_cpt(&truth, &fixed, &data, 1e-3).unwrap() < 1e-28);

        let as_scratch = CptTheta { b_prime: s.b.ln(), beta_prime: s.beta, gamma: 0.0 };
        let a = objective_cpt(&as_scratch, &fixed, &data, 1e-3).unwrap();
        let b = objective_scratch(&ScratchTheta::from_params(&s), &data, 1e-3).unwrap();
        assert!((a - b).abs() <= 1e-14 * b, "{a} vs {b}");

        // log N = 0 at N = 1: gamma is irrelevant.
        let unit = RunSet::new(vec![single_record(1000, 3.0, 1, "u")]).unwrap();
        let g0 = objective_cpt(&CptTheta { gamma: 0.0, ..truth }, &fixed, &unit, 1e-3).unwrap();
        let g1 = objective_cpt(&CptTheta { gamma: 0.7, ..truth }, &fixed, &unit, 1e-3).unwrap();
        assert_eq!(g0, g1);
    }

    #[test]
    fn gradient_vanishes_at_truth() {
        let p = ChinchillaParams::REFERENCE_SCRATCH;
        let data = synth(p.into(), &sizes());
        let t = ScratchTheta::from_params(&p);
        let base = [t.a, t.b, t.e, t.alpha, t.beta];
        for i in 0..5 {
            let mut hi = base;
            let mut lo = base;
            hi[i] += 1e-6;
            lo[i] -= 1e-6;
            let th = |v: [f64; 5]| ScratchTheta { a: v[0], b: v[1], e: v[2], alpha: v[3], beta: v[4] };
            let g = (objective_scratch(&th(hi), &data, 1e-3).unwrap() - objective_scratch(&th(lo), &data, 1e-3).unwrap())
                / 2e-6;
            assert!(g.abs() < 1e-6, "coordinate {i}: {g}");
        }
    }

    #[test]
    fn scratch_fit_small_grid() {
        let p = ChinchillaParams::REFERENCE_SCRATCH;
        let data = synth(p.into(), &sizes());
        let cfg = FitConfig { init_grid: small_grid(), ..FitConfig::default() };
        let r = fit_scratch(&data, &cfg).unwrap();
        assert!((r.params.alpha - 0.40).abs() < 2e-2, "{:?}", r.params);
        assert!((r.params.beta - 0.30).abs() < 2e-2, "{:?}", r.params);
        assert!((r.params.e / 1.55 - 1.0).abs() < 0.05);
        assert_eq!(r.residuals.len(), r.n_points);
        assert_eq!(r.chosen_init.len(), 5);
        assert!(r.objective >= 0.0 && r.objective < 1e-8);

        // Duplicating a run reweights uniformly; the noise-free minimum stays put.
        let mut runs = data.runs().to_vec();
        runs.push(runs[2].renamed("dup"));
        let r2 = fit_scratch(&RunSet::new(runs).unwrap(), &cfg).unwrap();
        assert!((r2.params.alpha - r.params.alpha).abs() < 1e-3);
        assert!((r2.params.beta - r.params.beta).abs() < 1e-3);
    }

    #[test]
    fn single_size_is_unidentifiable() {
        let data = synth(ChinchillaParams::REFERENCE_SCRATCH.into(), &[1_000_000_000]);
        assert!(matches!(fit_scratch(&data, &FitConfig::default()), Err(Error::Unidentifiable(_))));
        let fixed = FixedTerms::from(&ChinchillaParams::REFERENCE_SCRATCH);
        assert!(matches!(fit_cpt(&data, &fixed, &FitConfig::default()), Err(Error::Unidentifiable(_))));
    }

    #[test]
    fn cpt_fit_null_gamma() {
        let s = ChinchillaParams::REFERENCE_SCRATCH;
        let data = synth(s.into(), &sizes());
        let cfg = FitConfig { init_grid: small_grid(), ..FitConfig::default() };
        let r = fit_cpt(&data, &FixedTerms::from(&s), &cfg).unwrap();
        assert!(r.params.gamma.abs() < 2e-2, "{:?}", r.params);
        assert_eq!(r.chosen_init.len(), 3);
    }

    #[test]
    fn bad_config_rejected() {
        let data = synth(ChinchillaParams::REFERENCE_SCRATCH.into(), &sizes());
        let mut cfg = FitConfig { delta: 0.0, ..FitConfig::default() };
        assert!(fit_scratch(&data, &cfg).is_err());
        cfg.delta = 1e-3;
        cfg.init_grid.alpha.clear();
        assert!(fit_scratch(&data, &cfg).is_err());
    }

    #[test]
    fn frontier_min_per_bin() {
        // 6N = 6e6 FLOPs per token: C = 6e18, 6.06e18, 6e19.
        let runs = vec![
            single_record(1_000_000_000_000, 3.0, 1_000_000, "a"),
            single_record(1_010_000_000_000, 2.9, 1_000_000, "b"),
            single_record(10_000_000_000_000, 2.5, 1_000_000, "c"),
        ];
        let pts = extract_compute_frontier(&RunSet::new(runs).unwrap(), 1).unwrap();
        assert_eq!(
            pts,
            vec![FrontierPoint { compute: 6.06e18, loss: 2.9 }, FrontierPoint { compute: 6e19, loss: 2.5 }]
        );
    }

    #[test]
    fn frontier_drops_dominated() {
        let runs = vec![
            single_record(1_000_000_000_000, 2.0, 1_000_000, "low"),
            single_record(10_000_000_000_000, 2.5, 1_000_000, "high"),
        ];
        let pts = extract_compute_frontier(&RunSet::new(runs).unwrap(), 10).unwrap();
        assert_eq!(pts, vec![FrontierPoint { compute: 6e18, loss: 2.0 }]);
        assert!(extract_compute_frontier(&RunSet::default(), 10).is_err());
    }

    #[test]
    fn frontier_matches_brute_force_on_synthetic_runs() {
        let data = synth(ChinchillaParams::REFERENCE_SCRATCH.into(), &sizes());
        let pts = extract_compute_frontier(&data, DEFAULT_BINS_PER_DECADE).unwrap();
        assert!(pts.windows(2).all(|w| w[0].compute < w[1].compute && w[0].loss > w[1].loss));
        for p in &pts {
            let bin = (p.compute.log10() * 10.0).floor();
            let brute = data
                .runs()
                .iter()
                .flat_map(|r| r.records().iter().map(move |x| (6.0 * r.param_count() as f64 * x.tokens as f64, x.loss)))
                .filter(|(c, _)| (c.log10() * 10.0).floor() == bin)
                .map(|(_, l)| l)
                .fold(f64::INFINITY, f64::min);
            assert_eq!(p.loss, brute);
        }
    }

    #[test]
    fn frontier_fit_exact_points() {
        let truth = FrontierParams::REFERENCE_SCRATCH;
        let pts: Vec<_> = crate::numeric::geomspace(1e18, 1e23, 12)
            .into_iter()
            .map(|c| FrontierPoint { compute: c, loss: truth.eval(c).unwrap() })
            .collect();
        let f = fit_frontier(&pts, true).unwrap();
        assert!((f.coefficient / truth.coefficient - 1.0).abs() < 1e-6);
        assert!((f.exponent / truth.exponent - 1.0).abs() < 1e-6);
        assert_eq!(f.offset, 0.0);
    }

    #[test]
    fn frontier_fit_two_points_and_flat() {
        let two = [FrontierPoint { compute: 1.0, loss: 10.0 }, FrontierPoint { compute: 100.0, loss: 1.0 }];
        let f = fit_frontier(&two, true).unwrap();
        assert!((f.coefficient - 10.0).abs() < 1e-12 && (f.exponent - 0.5).abs() < 1e-12);
        let flat = [FrontierPoint { compute: 1e18, loss: 2.5 }, FrontierPoint { compute: 1e20, loss: 2.5 }];
        let f = fit_frontier(&flat, true).unwrap();
        assert_eq!(f.exponent, 0.0);
        assert!((f.coefficient - 2.5).abs() < 1e-12);
        assert!(matches!(fit_frontier(&two[..1], true), Err(Error::Unidentifiable(_))));
    }

    #[test]
    fn frontier_fit_with_offset() {
        let truth = FrontierParams::new(40.0, 0.08, 1.2).unwrap();
        let pts: Vec<_> = crate::numeric::geomspace(1e17, 1e24, 30)
            .into_iter()
            .map(|c| FrontierPoint { compute: c, loss: truth.eval(c).unwrap() })
            .collect();
        let f = fit_frontier(&pts, false).unwrap();
        for p in &pts {
            assert!((f.eval(p.compute).unwrap() / p.loss - 1.0).abs() < 2e-3, "{f:?}");
        }
    }
}
