//! Synthetic training runs drawn from a known law.
//!
//! Each run gets records at geometrically spaced token counts in
//! `[0.01·m·N, m·N]` (`m` = `token_multiple`), with loss
//! `law(N, D)·exp(ε)`, `ε ~ Normal(0, σ²)`. The noise draw for record `j` of
//! run `i` depends only on `(seed, i, j)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::catalog::catalog;
use crate::error::{bail, Result};
use crate::laws::{ChinchillaParams, ExtendedCptParams, ScalingLaw};
use crate::math;
use crate::numeric::geomspace;
use crate::run::{LossRecord, RunSet, Strategy, TrainingRun};

/// Token budget as a multiple of parameter count.
pub const DEFAULT_TOKEN_MULTIPLE: f64 = 20.0;

/// First record sits at this fraction of the token budget.
const FIRST_RECORD_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub law: ScalingLaw,
    pub param_sizes: Vec<u64>,
    pub token_multiple: f64,
    pub records_per_run: usize,
    /// Standard deviation of the multiplicative log-normal loss noise.
    pub noise_sigma: f64,
    pub seed: u64,
    pub language: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            law: ChinchillaParams::REFERENCE_SCRATCH.into(),
            param_sizes: Vec::new(),
            token_multiple: DEFAULT_TOKEN_MULTIPLE,
            records_per_run: 20,
            noise_sigma: 0.0,
            seed: 0,
            language: "target".into(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        if self.param_sizes.is_empty() {
            bail!(Domain, "param_sizes is empty");
        }
        if self.param_sizes.contains(&0) {
            bail!(Domain, "param sizes must be positive");
        }
        if self.records_per_run < 2 {
            bail!(Domain, "records_per_run must be at least 2");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            bail!(Domain, "noise_sigma must be nonnegative, got {}", self.noise_sigma);
        }
        if !(self.token_multiple > 0.0 && self.token_multiple.is_finite()) {
            bail!(Domain, "token_multiple must be positive, got {}", self.token_multiple);
        }
        Ok(())
    }

    fn strategy(&self) -> Strategy {
        match self.law {
            ScalingLaw::Chinchilla(_) => Strategy::Scratch,
            ScalingLaw::ExtendedCpt(_) => Strategy::Cpt,
        }
    }
}

/// SplitMix64 finalizer, used to derive independent per-record seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn record_seed(seed: u64, run: usize, record: usize) -> u64 {
    mix(mix(mix(seed) ^ run as u64) ^ record as u64)
}

/// Token grid for one run of size `n`.
pub fn token_grid(n: u64, token_multiple: f64, records: usize) -> Vec<u64> {
    let budget = token_multiple * n as f64;
    geomspace(FIRST_RECORD_FRACTION * budget, budget, records)
        .into_iter()
        .map(|d| math::round(d).max(1.0) as u64)
        .collect()
}

pub fn generate_runset(cfg: &SynthConfig) -> Result<RunSet> {
    cfg.validate()?;
    let strategy = cfg.strategy();
    let mut runs = Vec::with_capacity(cfg.param_sizes.len());
    for (i, &n) in cfg.param_sizes.iter().enumerate() {
        let mut grid = token_grid(n, cfg.token_multiple, cfg.records_per_run);
        grid.dedup();
        let mut records = Vec::with_capacity(grid.len());
        for (j, &d) in grid.iter().enumerate() {
            let clean = cfg.law.eval(n as f64, d as f64)?;
            let loss = if cfg.noise_sigma > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(record_seed(cfg.seed, i, j));
                let eps: f64 = StandardNormal.sample(&mut rng);
                clean * math::exp(cfg.noise_sigma * eps)
            } else {
                clean
            };
            records.push(LossRecord { tokens: d, loss });
        }
        let id = format!("{strategy}-{i:03}-{n}");
        runs.push(TrainingRun::new(id, strategy, cfg.language.clone(), 0.0, n, records)?);
    }
    RunSet::new(runs)
}

/// Ground-truth setup mirroring the reference experiment: every catalog
/// size, 20× token budget, 20 noise-free records per run.
pub fn paper_replica_config(strategy: Strategy) -> Result<SynthConfig> {
    let law = match strategy {
        Strategy::Scratch => ScalingLaw::from(ChinchillaParams::REFERENCE_SCRATCH),
        Strategy::Cpt => ScalingLaw::from(ExtendedCptParams::REFERENCE_CPT),
    };
    Ok(SynthConfig {
        law,
        param_sizes: catalog()?.iter().map(|m| m.param_count()).collect(),
        token_multiple: DEFAULT_TOKEN_MULTIPLE,
        records_per_run: 20,
        noise_sigma: 0.0,
        seed: 0,
        language: "target".into(),
    })
}
