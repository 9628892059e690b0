//! Closed-form loss laws: evaluation, inversion and frontier crossover.
//!
//! * Chinchilla: `L(N, D) = E + A/N^α + B/D^β`
//! * Extended CPT: `L(N, D) = E + A/N^α + B′/(D^β′ · N^γ)`
//! * Loss-compute frontier: `L(C) = E′ + A′/C^γ′`
//!
//! Evaluation sums the terms as `exp(lse(ln term_i))`, which stays finite
//! for any positive `N`, `D`, `C` representable as `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::math;
use crate::numeric::{lse2, lse3};

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!(Domain, "{name} must be positive and finite, got {v}");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChinchillaParams {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ChinchillaParams {
    /// Pre-training fit reported for the from-scratch runs.
    pub const REFERENCE_SCRATCH: ChinchillaParams =
        ChinchillaParams { e: 1.55, a: 420.0, b: 719.5, alpha: 0.40, beta: 0.30 };

    pub fn new(e: f64, a: f64, b: f64, alpha: f64, beta: f64) -> Result<Self> {
        let p = ChinchillaParams { e, a, b, alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("E", self.e)?;
        check_positive("A", self.a)?;
        check_positive("B", self.b)?;
        check_positive("alpha", self.alpha)?;
        check_positive("beta", self.beta)
    }

    pub fn eval(&self, n: f64, d: f64) -> Result<f64> {
        check_positive("N", n)?;
        check_positive("D", d)?;
        Ok(math::exp(lse3(
            math::ln(self.e),
            math::ln(self.a) - self.alpha * math::ln(n),
            math::ln(self.b) - self.beta * math::ln(d),
        )))
    }

    /// `E + A/N^α`, the loss reached with unlimited data at size `N`.
    pub fn floor_at_params(&self, n: f64) -> Result<f64> {
        check_positive("N", n)?;
        Ok(math::exp(lse2(math::ln(self.e), math::ln(self.a) - self.alpha * math::ln(n))))
    }

    /// `E + B/D^β`, the loss reached with unlimited parameters at `D` tokens.
    pub fn floor_at_tokens(&self, d: f64) -> Result<f64> {
        check_positive("D", d)?;
        Ok(math::exp(lse2(math::ln(self.e), math::ln(self.b) - self.beta * math::ln(d))))
    }

    /// Tokens needed at size `N` to reach `loss`.
    pub fn solve_tokens_for_loss(&self, n: f64, loss: f64) -> Result<f64> {
        let floor = self.floor_at_params(n)?;
        let gap = loss - floor;
        if !(gap > 0.0) || !loss.is_finite() {
            return Err(Error::UnreachableLoss { loss, floor });
        }
        Ok(math::exp((math::ln(self.b) - math::ln(gap)) / self.beta))
    }

    /// Parameters needed with `D` tokens to reach `loss`.
    pub fn solve_params_for_loss(&self, d: f64, loss: f64) -> Result<f64> {
        let floor = self.floor_at_tokens(d)?;
        let gap = loss - floor;
        if !(gap > 0.0) || !loss.is_finite() {
            return Err(Error::UnreachableLoss { loss, floor });
        }
        Ok(math::exp((math::ln(self.a) - math::ln(gap)) / self.alpha))
    }

    /// The same law written in extended form with `γ = 0`.
    pub fn as_extended(&self) -> ExtendedCptParams {
        ExtendedCptParams {
            e: self.e,
            a: self.a,
            alpha: self.alpha,
            b_prime: self.b,
            beta_prime: self.beta,
            gamma: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendedCptParams {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub alpha: f64,
    #[serde(rename = "B_prime")]
    pub b_prime: f64,
    pub beta_prime: f64,
    /// Parameter-transfer exponent; may be negative in a fit.
    pub gamma: f64,
}

impl ExtendedCptParams {
    /// CPT fit reported alongside [`ChinchillaParams::REFERENCE_SCRATCH`].
    pub const REFERENCE_CPT: ExtendedCptParams =
        ExtendedCptParams { e: 1.55, a: 420.0, alpha: 0.40, b_prime: 433.3, beta_prime: 0.20, gamma: 0.08 };

    pub fn new(e: f64, a: f64, alpha: f64, b_prime: f64, beta_prime: f64, gamma: f64) -> Result<Self> {
        let p = ExtendedCptParams { e, a, alpha, b_prime, beta_prime, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("E", self.e)?;
        check_positive("A", self.a)?;
        check_positive("alpha", self.alpha)?;
        check_positive("B_prime", self.b_prime)?;
        check_positive("beta_prime", self.beta_prime)?;
        if !self.gamma.is_finite() {
            bail!(Domain, "gamma must be finite, got {}", self.gamma);
        }
        Ok(())
    }

    pub fn eval(&self, n: f64, d: f64) -> Result<f64> {
        check_positive("N", n)?;
        check_positive("D", d)?;
        let ln_n = math::ln(n);
        Ok(math::exp(lse3(
            math::ln(self.e),
            math::ln(self.a) - self.alpha * ln_n,
            math::ln(self.b_prime) - self.beta_prime * math::ln(d) - self.gamma * ln_n,
        )))
    }

    pub fn floor_at_params(&self, n: f64) -> Result<f64> {
        check_positive("N", n)?;
        Ok(math::exp(lse2(math::ln(self.e), math::ln(self.a) - self.alpha * math::ln(n))))
    }

    pub fn solve_tokens_for_loss(&self, n: f64, loss: f64) -> Result<f64> {
        let floor = self.floor_at_params(n)?;
        let gap = loss - floor;
        if !(gap > 0.0) || !loss.is_finite() {
            return Err(Error::UnreachableLoss { loss, floor });
        }
        let ln_n = math::ln(n);
        Ok(math::exp((math::ln(self.b_prime) - math::ln(gap) - self.gamma * ln_n) / self.beta_prime))
    }
}

/// Either parametric loss law, for operations that accept both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law_kind", rename_all = "snake_case")]
pub enum ScalingLaw {
    Chinchilla(ChinchillaParams),
    ExtendedCpt(ExtendedCptParams),
}

impl ScalingLaw {
    pub fn eval(&self, n: f64, d: f64) -> Result<f64> {
        match self {
            ScalingLaw::Chinchilla(p) => p.eval(n, d),
            ScalingLaw::ExtendedCpt(p) => p.eval(n, d),
        }
    }

    pub fn solve_tokens_for_loss(&self, n: f64, loss: f64) -> Result<f64> {
        match self {
            ScalingLaw::Chinchilla(p) => p.solve_tokens_for_loss(n, loss),
            ScalingLaw::ExtendedCpt(p) => p.solve_tokens_for_loss(n, loss),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScalingLaw::Chinchilla(p) => p.validate(),
            ScalingLaw::ExtendedCpt(p) => p.validate(),
        }
    }

    /// Fixed `(E, A, α)` shared by both forms.
    pub fn param_term(&self) -> (f64, f64, f64) {
        match self {
            ScalingLaw::Chinchilla(p) => (p.e, p.a, p.alpha),
            ScalingLaw::ExtendedCpt(p) => (p.e, p.a, p.alpha),
        }
    }
}

impl From<ChinchillaParams> for ScalingLaw {
    fn from(p: ChinchillaParams) -> Self {
        ScalingLaw::Chinchilla(p)
    }
}

impl From<ExtendedCptParams> for ScalingLaw {
    fn from(p: ExtendedCptParams) -> Self {
        ScalingLaw::ExtendedCpt(p)
    }
}

/// `L(C) = offset + coefficient · C^(−exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierParams {
    pub coefficient: f64,
    pub exponent: f64,
    #[serde(default)]
    pub offset: f64,
}

impl FrontierParams {
    pub const REFERENCE_SCRATCH: FrontierParams =
        FrontierParams { coefficient: 33.69907, exponent: 0.0579, offset: 0.0 };
    pub const REFERENCE_CPT: FrontierParams =
        FrontierParams { coefficient: 31.9594, exponent: 0.0575, offset: 0.0 };

    pub fn new(coefficient: f64, exponent: f64, offset: f64) -> Result<Self> {
        let p = FrontierParams { coefficient, exponent, offset };
        p.validate()?;
        Ok(p)
    }

    /// A zero exponent (flat frontier) is accepted so that degenerate fits
    /// remain representable.
    pub fn validate(&self) -> Result<()> {
        check_positive("coefficient", self.coefficient)?;
        if !(self.exponent >= 0.0 && self.exponent.is_finite()) {
            bail!(Domain, "exponent must be nonnegative, got {}", self.exponent);
        }
        if !(self.offset >= 0.0 && self.offset.is_finite()) {
            bail!(Domain, "offset must be nonnegative, got {}", self.offset);
        }
        Ok(())
    }

    pub fn eval(&self, compute: f64) -> Result<f64> {
        check_positive("C", compute)?;
        let power = math::ln(self.coefficient) - self.exponent * math::ln(compute);
        Ok(if self.offset > 0.0 {
            math::exp(lse2(math::ln(self.offset), power))
        } else {
            math::exp(power)
        })
    }

    /// Compute at which this frontier reaches `loss` (offset must be zero).
    pub fn compute_for_loss(&self, loss: f64) -> Result<f64> {
        if self.offset != 0.0 {
            bail!(Unsupported, "inverting a frontier with a nonzero offset");
        }
        if !(loss > 0.0 && loss < self.coefficient) {
            bail!(Domain, "loss {loss} must lie in (0, {})", self.coefficient);
        }
        if self.exponent == 0.0 {
            bail!(Domain, "flat frontier never reaches loss {loss}");
        }
        Ok(math::exp((math::ln(self.coefficient) - math::ln(loss)) / self.exponent))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crossover {
    /// The two frontiers meet at this compute.
    At(f64),
    /// The frontiers coincide everywhere.
    Identical,
}

/// Compute where two zero-offset frontiers intersect.
pub fn frontier_crossover(f1: &FrontierParams, f2: &FrontierParams) -> Result<Crossover> {
    f1.validate()?;
    f2.validate()?;
    if f1.offset != 0.0 || f2.offset != 0.0 {
        bail!(Unsupported, "crossover of frontiers with nonzero offsets has no closed form");
    }
    let d_exp = f1.exponent - f2.exponent;
    if d_exp == 0.0 {
        if f1.coefficient == f2.coefficient {
            return Ok(Crossover::Identical);
        }
        bail!(NoCrossover, "parallel frontiers with exponent {}", f1.exponent);
    }
    Ok(Crossover::At(math::exp((math::ln(f1.coefficient) - math::ln(f2.coefficient)) / d_exp)))
}

/// Any fitted law record, as carried by the JSON parameter documents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law_kind", rename_all = "snake_case")]
pub enum LawRecord {
    Chinchilla(ChinchillaParams),
    ExtendedCpt(ExtendedCptParams),
    Frontier(FrontierParams),
}

impl LawRecord {
    pub fn scaling_law(&self) -> Option<ScalingLaw> {
        match *self {
            LawRecord::Chinchilla(p) => Some(p.into()),
            LawRecord::ExtendedCpt(p) => Some(p.into()),
            LawRecord::Frontier(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LawRecord::Chinchilla(p) => p.validate(),
            LawRecord::ExtendedCpt(p) => p.validate(),
            LawRecord::Frontier(p) => p.validate(),
        }
    }
}

impl From<ScalingLaw> for LawRecord {
    fn from(l: ScalingLaw) -> Self {
        match l {
            ScalingLaw::Chinchilla(p) => LawRecord::Chinchilla(p),
            ScalingLaw::ExtendedCpt(p) => LawRecord::ExtendedCpt(p),
        }
    }
}

impl From<ChinchillaParams> for LawRecord {
    fn from(p: ChinchillaParams) -> Self {
        LawRecord::Chinchilla(p)
    }
}

impl From<ExtendedCptParams> for LawRecord {
    fn from(p: ExtendedCptParams) -> Self {
        LawRecord::ExtendedCpt(p)
    }
}

impl From<FrontierParams> for LawRecord {
    fn from(p: FrontierParams) -> Self {
        LawRecord::Frontier(p)
    }
}
