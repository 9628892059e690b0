//! Row types for the plot-ready CSV exports.

use cptlaw_core::allocator::IsoLossGrid;
use cptlaw_core::run::FLOPS_PER_PARAM_TOKEN;
use cptlaw_core::transfer::{ForgettingCurve, TransferReport};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsoLossRow {
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub loss: f64,
    pub is_frontier: bool,
}

/// Long-form grid cells followed by the frontier points.
pub fn isoloss_rows(grid: &IsoLossGrid) -> Vec<IsoLossRow> {
    let mut rows = Vec::with_capacity(grid.n_axis.len() * grid.d_axis.len() + grid.frontier.len());
    for (i, &n) in grid.n_axis.iter().enumerate() {
        for (j, &d) in grid.d_axis.iter().enumerate() {
            rows.push(IsoLossRow { n, d, c: FLOPS_PER_PARAM_TOKEN * n * d, loss: grid.loss_values[i][j], is_frontier: false });
        }
    }
    rows.extend(grid.frontier.iter().map(|p| IsoLossRow { n: p.n, d: p.d, c: p.compute, loss: p.loss, is_frontier: true }));
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferRow {
    pub loss_level: f64,
    pub d_pt: f64,
    pub d_cpt: f64,
    pub transferred_tokens: f64,
    pub flops_saved_fraction: f64,
}

pub fn transfer_rows(r: &TransferReport) -> Vec<TransferRow> {
    (0..r.loss_levels.len())
        .map(|i| TransferRow {
            loss_level: r.loss_levels[i],
            d_pt: r.d_pt[i],
            d_cpt: r.d_cpt[i],
            transferred_tokens: r.transferred_tokens[i],
            flops_saved_fraction: r.flops_saved_fraction[i],
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForgettingRow<'a> {
    pub replay_ratio: f64,
    pub language: &'a str,
    pub flops: f64,
    pub loss: f64,
}

/// Target-language points, then source-language points, per curve.
pub fn forgetting_rows(curves: &[ForgettingCurve]) -> Vec<ForgettingRow<'_>> {
    let mut rows = Vec::new();
    for c in curves {
        let row = |language, &(flops, loss): &(f64, f64)| ForgettingRow { replay_ratio: c.replay_ratio, language, flops, loss };
        rows.extend(c.target.iter().map(|p| row(c.target_language.as_str(), p)));
        if let Some(src) = &c.source_language {
            rows.extend(c.source.iter().map(|p| row(src.as_str(), p)));
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use cptlaw_core::allocator::IsoLossFrontierPoint;

    #[test]
    fn isoloss_long_form() {
        let grid = IsoLossGrid {
            n_axis: vec![1.0, 2.0],
            d_axis: vec![10.0, 20.0],
            loss_values: vec![vec![4.0, 3.0], vec![3.5, 2.5]],
            frontier: vec![IsoLossFrontierPoint { compute: 120.0, n: 2.0, d: 10.0, loss: 3.5 }],
        };
        let rows = isoloss_rows(&grid);
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[1], IsoLossRow { n: 1.0, d: 20.0, c: 120.0, loss: 3.0, is_frontier: false });
        assert!(rows[4].is_frontier);
    }

    #[test]
    fn forgetting_languages() {
        let c = ForgettingCurve {
            run_id: "r".into(),
            replay_ratio: 0.2,
            target_language: "de".into(),
            target: vec![(8e19, 2.5)],
            source_language: Some("en".into()),
            source: vec![(2e19, 2.1)],
        };
        let rows = forgetting_rows(std::slice::from_ref(&c));
        assert_eq!(rows[0], ForgettingRow { replay_ratio: 0.2, language: "de", flops: 8e19, loss: 2.5 });
        assert_eq!(rows[1].language, "en");
    }
}
