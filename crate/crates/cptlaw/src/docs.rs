//! Versioned JSON documents written and read by the CLI.
//!
//! Every document carries `schema_version`. Parameter-bearing documents
//! (params, fit, frontier) flatten a [`LawRecord`] into the top level, so any
//! of them can be read back wherever a law is expected.

use std::fs;
use std::path::Path;

use cptlaw_core::allocator::{AllocationCoefficients, AllocationPlan};
use cptlaw_core::fitter::{FitConfig, FrontierPoint, ModelComparison};
use cptlaw_core::transfer::{ForgettingCurve, TransferReport};
use cptlaw_core::{ChinchillaParams, FrontierParams, LawRecord, ScalingLaw};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Any document with a flattened law record; other fields are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDoc {
    pub schema_version: u32,
    #[serde(flatten)]
    pub law: LawRecord,
}

impl ParamsDoc {
    pub fn new(law: impl Into<LawRecord>) -> Self {
        ParamsDoc { schema_version: SCHEMA_VERSION, law: law.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDoc {
    pub schema_version: u32,
    #[serde(flatten)]
    pub law: LawRecord,
    pub objective: f64,
    pub n_points: usize,
    pub chosen_init: Vec<f64>,
    pub config: FitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierDoc {
    pub schema_version: u32,
    #[serde(flatten)]
    pub law: LawRecord,
    pub bins_per_decade: usize,
    pub points: Vec<FrontierPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationDoc {
    pub schema_version: u32,
    pub law: LawRecord,
    pub coefficients: AllocationCoefficients,
    pub plans: Vec<AllocationPlan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    Empirical,
    Parametric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferDoc {
    pub schema_version: u32,
    pub mode: TransferMode,
    pub report: TransferReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonDoc {
    pub schema_version: u32,
    #[serde(flatten)]
    pub comparison: ModelComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayDoc {
    pub schema_version: u32,
    pub curves: Vec<ForgettingCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoLossDoc {
    pub schema_version: u32,
    pub law: LawRecord,
    pub grid: cptlaw_core::allocator::IsoLossGrid,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e))
}

/// Reads the law from a params, fit or frontier document.
pub fn read_law(path: &Path) -> Result<LawRecord> {
    let doc: ParamsDoc = read_json(path)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(CliError::format(
            path,
            format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", doc.schema_version),
        ));
    }
    doc.law.validate()?;
    Ok(doc.law)
}

/// Reads a Chinchilla or extended CPT law.
pub fn read_scaling_law(path: &Path) -> Result<ScalingLaw> {
    read_law(path)?
        .scaling_law()
        .ok_or_else(|| CliError::format(path, "expected a chinchilla or extended_cpt law, found a frontier"))
}

/// Reads a from-scratch law (`law_kind` = `chinchilla`).
pub fn read_chinchilla(path: &Path) -> Result<ChinchillaParams> {
    match read_law(path)? {
        LawRecord::Chinchilla(p) => Ok(p),
        _ => Err(CliError::format(path, "expected a chinchilla law")),
    }
}

pub fn read_frontier(path: &Path) -> Result<FrontierParams> {
    match read_law(path)? {
        LawRecord::Frontier(p) => Ok(p),
        _ => Err(CliError::format(path, "expected a frontier law")),
    }
}

pub fn read_fit_config(path: &Path) -> Result<FitConfig> {
    let cfg: FitConfig = read_json(path)?;
    cfg.validate()?;
    Ok(cfg)
}
