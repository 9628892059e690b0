//! Measuring what continual pre-training saves.
//!
//! At a common loss level, CPT reaches the loss after `D_CPT` tokens and
//! training from scratch after `D_PT`. The effectively transferred data is
//! `D_PT − D_CPT` and the FLOPs saving is `(C_PT − C_CPT)/C_PT`. Both are
//! available empirically (from interpolated loss curves) and parametrically
//! (from fitted laws or loss-compute frontiers). Values are signed and never
//! clamped.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::laws::{ChinchillaParams, ExtendedCptParams, FrontierParams};
use crate::math;
use crate::numeric::geomspace;
use crate::run::{attribute_flops_by_language, RunSet, TrainingRun, FLOPS_PER_PARAM_TOKEN};

pub const DEFAULT_LEVELS: usize = 32;

/// Piecewise-linear loss curve in `(ln D, ln L)` after running-minimum
/// smoothing, so loss never increases with tokens. Lookups that land on a
/// knot return the knot's raw value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveInterpolator {
    tokens: Vec<f64>,
    loss: Vec<f64>,
    ln_tokens: Vec<f64>,
    ln_loss: Vec<f64>,
}

impl CurveInterpolator {
    pub fn from_points(points: &[(u64, f64)]) -> Result<Self> {
        let mut pts: Vec<(u64, f64)> = points.to_vec();
        pts.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts.dedup_by_key(|p| p.0);
        if pts.len() < 2 {
            bail!(Domain, "a loss curve needs at least 2 distinct token counts");
        }
        let mut best = f64::INFINITY;
        let mut c = CurveInterpolator {
            tokens: Vec::with_capacity(pts.len()),
            loss: Vec::with_capacity(pts.len()),
            ln_tokens: Vec::with_capacity(pts.len()),
            ln_loss: Vec::with_capacity(pts.len()),
        };
        for (t, l) in pts {
            if !(l > 0.0 && l.is_finite()) || t == 0 {
                bail!(Domain, "curve points need positive tokens and loss");
            }
            best = best.min(l);
            c.tokens.push(t as f64);
            c.loss.push(best);
            c.ln_tokens.push(math::ln(t as f64));
            c.ln_loss.push(math::ln(best));
        }
        Ok(c)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.tokens[0], self.tokens[self.tokens.len() - 1])
    }

    /// `(min, max)` loss over the smoothed knots.
    pub fn loss_range(&self) -> (f64, f64) {
        (self.loss[self.loss.len() - 1], self.loss[0])
    }

    pub fn loss_at_tokens(&self, tokens: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(tokens >= lo && tokens <= hi) {
            bail!(OutOfRange, "tokens {tokens} outside curve domain [{lo}, {hi}]");
        }
        let i = self.tokens.partition_point(|&v| v < tokens);
        if self.tokens[i] == tokens {
            return Ok(self.loss[i]);
        }
        let (k, l) = (&self.ln_tokens, &self.ln_loss);
        let t = (math::ln(tokens) - k[i - 1]) / (k[i] - k[i - 1]);
        Ok(math::exp(l[i - 1] + t * (l[i] - l[i - 1])))
    }

    /// Fewest tokens at which the smoothed curve reaches `loss`.
    pub fn tokens_at_loss(&self, loss: f64) -> Result<f64> {
        let (lo, hi) = self.loss_range();
        if !(loss >= lo && loss <= hi) {
            bail!(OutOfRange, "loss {loss} outside curve range [{lo}, {hi}]");
        }
        // First knot at or below the target; loss is nonincreasing.
        let i = self.loss.partition_point(|&v| v > loss);
        if self.loss[i] == loss {
            return Ok(self.tokens[i]);
        }
        let (k, l) = (&self.ln_tokens, &self.ln_loss);
        let t = (math::ln(loss) - l[i - 1]) / (l[i] - l[i - 1]);
        Ok(math::exp(k[i - 1] + t * (k[i] - k[i - 1])))
    }
}

pub fn interp_loss_curve(run: &TrainingRun) -> Result<CurveInterpolator> {
    if run.records().len() < 2 {
        bail!(Domain, "run {} has fewer than 2 records", run.id());
    }
    let pts: Vec<(u64, f64)> = run.records().iter().map(|r| (r.tokens, r.loss)).collect();
    CurveInterpolator::from_points(&pts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub loss_levels: Vec<f64>,
    pub d_pt: Vec<f64>,
    pub d_cpt: Vec<f64>,
    pub transferred_tokens: Vec<f64>,
    pub flops_saved_fraction: Vec<f64>,
}

/// Compares a from-scratch run and a CPT run of the same size at `levels`
/// loss values spaced geometrically across the overlap of their curves.
pub fn empirical_transfer(run_pt: &TrainingRun, run_cpt: &TrainingRun, levels: usize) -> Result<TransferReport> {
    if run_pt.param_count() != run_cpt.param_count() {
        bail!(
            Validation,
            "runs {} and {} differ in size ({} vs {})",
            run_pt.id(),
            run_cpt.id(),
            run_pt.param_count(),
            run_cpt.param_count()
        );
    }
    if levels == 0 {
        bail!(Domain, "levels must be at least 1");
    }
    let pt = interp_loss_curve(run_pt)?;
    let cpt = interp_loss_curve(run_cpt)?;
    let (pt_lo, pt_hi) = pt.loss_range();
    let (cpt_lo, cpt_hi) = cpt.loss_range();
    let lo = pt_lo.max(cpt_lo);
    let hi = pt_hi.min(cpt_hi);
    if !(lo <= hi) {
        bail!(OutOfRange, "loss ranges of {} and {} do not overlap", run_pt.id(), run_cpt.id());
    }
    let n = run_pt.param_count() as f64;
    let mut report = TransferReport {
        loss_levels: Vec::with_capacity(levels),
        d_pt: Vec::with_capacity(levels),
        d_cpt: Vec::with_capacity(levels),
        transferred_tokens: Vec::with_capacity(levels),
        flops_saved_fraction: Vec::with_capacity(levels),
    };
    for level in geomspace(hi, lo, levels) {
        let d_pt = pt.tokens_at_loss(level)?;
        let d_cpt = cpt.tokens_at_loss(level)?;
        let c_pt = FLOPS_PER_PARAM_TOKEN * n * d_pt;
        let c_cpt = FLOPS_PER_PARAM_TOKEN * n * d_cpt;
        report.loss_levels.push(level);
        report.d_pt.push(d_pt);
        report.d_cpt.push(d_cpt);
        report.transferred_tokens.push(d_pt - d_cpt);
        report.flops_saved_fraction.push((c_pt - c_cpt) / c_pt);
    }
    Ok(report)
}

/// Tokens a from-scratch model of size `n` needs beyond `d_cpt` to match the
/// CPT loss at `(n, d_cpt)`.
pub fn parametric_transfer(scratch: &ChinchillaParams, cpt: &ExtendedCptParams, n: f64, d_cpt: f64) -> Result<f64> {
    let loss = cpt.eval(n, d_cpt)?;
    Ok(scratch.solve_tokens_for_loss(n, loss)? - d_cpt)
}

/// `1 − C_CPT/C_PT` at equal `loss` on two zero-offset frontiers.
pub fn flops_saving_from_frontiers(f_pt: &FrontierParams, f_cpt: &FrontierParams, loss: f64) -> Result<f64> {
    f_pt.validate()?;
    f_cpt.validate()?;
    if f_pt.offset != 0.0 || f_cpt.offset != 0.0 {
        bail!(Unsupported, "FLOPs saving needs zero-offset frontiers");
    }
    let ceiling = f_pt.coefficient.min(f_cpt.coefficient);
    if !(loss > 0.0 && loss < ceiling) {
        bail!(Domain, "loss {loss} must lie in (0, {ceiling})");
    }
    let ln_c_pt = (math::ln(f_pt.coefficient) - math::ln(loss)) / f_pt.exponent;
    let ln_c_cpt = (math::ln(f_cpt.coefficient) - math::ln(loss)) / f_cpt.exponent;
    Ok(1.0 - math::exp(ln_c_cpt - ln_c_pt))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgettingCurve {
    pub run_id: String,
    pub replay_ratio: f64,
    pub target_language: String,
    /// `(target-language FLOPs, loss)` on the run's own validation set.
    pub target: Vec<(f64, f64)>,
    pub source_language: Option<String>,
    /// `(source-language FLOPs, loss)`; empty when nothing is replayed.
    pub source: Vec<(f64, f64)>,
}

/// Per-language compute/loss curves for replay runs.
///
/// Every run must carry validation-language tags. The run's own language is
/// the target; a single other tagged language is the source. Each record's
/// total FLOPs `6·N·D` is split by the replay ratio.
pub fn forgetting_curves(runs: &RunSet) -> Result<Vec<ForgettingCurve>> {
    let mut out = Vec::with_capacity(runs.len());
    for run in runs.runs() {
        if !run.records_tagged() && run.val_curves().is_empty() {
            bail!(Validation, "run {} has no validation-language tags", run.id());
        }
        if run.val_curves().len() > 1 {
            bail!(Validation, "run {} has more than one source validation language", run.id());
        }
        let n = run.param_count() as f64;
        let ratio = run.replay_ratio();
        let split = |tokens: u64| attribute_flops_by_language(FLOPS_PER_PARAM_TOKEN * n * tokens as f64, ratio);
        let target = run
            .records()
            .iter()
            .map(|r| split(r.tokens).map(|(_, t)| (t, r.loss)))
            .collect::<Result<Vec<_>>>()?;
        let (source_language, source) = match run.val_curves().first() {
            Some(c) if ratio > 0.0 => {
                let pts = c.records.iter().map(|r| split(r.tokens).map(|(s, _)| (s, r.loss))).collect::<Result<_>>()?;
                (Some(c.language.clone()), pts)
            }
            Some(c) => (Some(c.language.clone()), Vec::new()),
            None => (None, Vec::new()),
        };
        out.push(ForgettingCurve {
            run_id: run.id().into(),
            replay_ratio: ratio,
            target_language: run.language().into(),
            target,
            source_language,
            source,
        });
    }
    Ok(out)
}
