//! Bundled catalog of the 42 reference model shapes.
//!
//! Lookup only: parameter counts cannot be recomputed from the shape without
//! the vocabulary size, so `param_size_millions` is taken as given.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};

/// Raw catalog file, `# ...` comment lines then a CSV header and rows.
pub const CATALOG_V1: &str = include_str!("../data/catalog_v1.csv");

const HEADER: &str = "param_size_millions,hidden,intermediate,heads,layers";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub param_size_millions: u32,
    pub hidden: u32,
    pub intermediate: u32,
    pub heads: u32,
    pub layers: u32,
}

impl ModelSpec {
    pub fn param_count(&self) -> u64 {
        u64::from(self.param_size_millions) * 1_000_000
    }
}

/// Parses a catalog in the bundled CSV layout.
pub fn parse_catalog(text: &str) -> Result<Vec<ModelSpec>> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some(HEADER) => {}
        other => bail!(Internal, "catalog header mismatch: {other:?}"),
    }
    let mut rows = Vec::new();
    for line in lines {
        let mut f = [0u32; 5];
        let mut cols = line.split(',');
        for slot in f.iter_mut() {
            *slot = cols
                .next()
                .and_then(|c| c.trim().parse().ok())
                .filter(|&v| v > 0)
                .ok_or_else(|| Error::Internal(alloc::format!("bad catalog row {line:?}")))?;
        }
        if cols.next().is_some() {
            bail!(Internal, "bad catalog row {line:?}");
        }
        let [param_size_millions, hidden, intermediate, heads, layers] = f;
        rows.push(ModelSpec { param_size_millions, hidden, intermediate, heads, layers });
    }
    if rows.is_empty() {
        bail!(Internal, "catalog is empty");
    }
    Ok(rows)
}

/// The bundled catalog, in ascending parameter size.
pub fn catalog() -> Result<Vec<ModelSpec>> {
    parse_catalog(CATALOG_V1)
}

/// Catalog row whose size is nearest to `target_millions`; ties go to the smaller model.
pub fn catalog_lookup(target_millions: f64) -> Result<ModelSpec> {
    if !(target_millions > 0.0 && target_millions.is_finite()) {
        bail!(Domain, "target size must be positive, got {target_millions}");
    }
    nearest(&catalog()?, target_millions)
}

pub(crate) fn nearest(rows: &[ModelSpec], target: f64) -> Result<ModelSpec> {
    let mut best: Option<(f64, ModelSpec)> = None;
    for &row in rows {
        let dist = (f64::from(row.param_size_millions) - target).abs();
        let better = match best {
            None => true,
            Some((d, b)) => dist < d || (dist == d && row.param_size_millions < b.param_size_millions),
        };
        if better {
            best = Some((dist, row));
        }
    }
    best.map(|(_, r)| r).ok_or_else(|| Error::Internal("catalog is empty".into()))
}
