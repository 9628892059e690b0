//! Training-run records, validation and compute accounting.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};

/// Default fraction of a run treated as learning-rate warmup.
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.05;

/// FLOPs per parameter per token under the `C = 6ND` convention.
pub const FLOPS_PER_PARAM_TOKEN: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Scratch,
    Cpt,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Scratch => "scratch",
            Strategy::Cpt => "cpt",
        })
    }
}

/// One validation-loss measurement: `loss` nats after `tokens` training tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub tokens: u64,
    pub loss: f64,
}

impl LossRecord {
    pub fn new(tokens: u64, loss: f64) -> Result<Self> {
        if tokens == 0 {
            bail!(Validation, "tokens must be positive");
        }
        if !loss.is_finite() || loss <= 0.0 {
            bail!(Validation, "loss must be finite and positive, got {loss}");
        }
        Ok(LossRecord { tokens, loss })
    }
}

/// Loss trajectory evaluated on a validation set other than the run's own
/// language (e.g. source-language loss during CPT).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValCurve {
    pub language: String,
    pub records: Vec<LossRecord>,
}

/// One model's loss trajectory plus the metadata needed to fit it.
///
/// Records are sorted by strictly increasing token count. `records` is the
/// run's own-language curve; `val_curves` holds curves on other validation
/// languages, used only by the forgetting analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    id: String,
    strategy: Strategy,
    language: String,
    replay_ratio: f64,
    param_count: u64,
    records: Vec<LossRecord>,
    records_tagged: bool,
    val_curves: Vec<ValCurve>,
}

impl TrainingRun {
    pub fn new(
        id: impl Into<String>,
        strategy: Strategy,
        language: impl Into<String>,
        replay_ratio: f64,
        param_count: u64,
        mut records: Vec<LossRecord>,
    ) -> Result<Self> {
        let id = id.into();
        validate_meta(&id, strategy, replay_ratio, param_count)?;
        if records.is_empty() {
            bail!(Validation, "run {id}: no loss records");
        }
        for r in &records {
            LossRecord::new(r.tokens, r.loss).map_err(|e| prefix(&id, e))?;
        }
        sort_strict(&id, &mut records)?;
        Ok(TrainingRun {
            id,
            strategy,
            language: language.into(),
            replay_ratio,
            param_count,
            records,
            records_tagged: false,
            val_curves: Vec::new(),
        })
    }

    /// Marks the run's own-language records as explicitly tagged with its
    /// language and attaches curves measured on other validation languages.
    pub fn with_val_curves(mut self, tagged: bool, mut curves: Vec<ValCurve>) -> Result<Self> {
        for c in &mut curves {
            if c.language == self.language {
                bail!(
                    Validation,
                    "run {}: extra validation curve uses the run's own language {}",
                    self.id,
                    c.language
                );
            }
            if c.records.is_empty() {
                bail!(Validation, "run {}: empty validation curve {}", self.id, c.language);
            }
            for r in &c.records {
                LossRecord::new(r.tokens, r.loss).map_err(|e| prefix(&self.id, e))?;
            }
            sort_strict(&self.id, &mut c.records)?;
        }
        curves.sort_by(|a, b| a.language.cmp(&b.language));
        if curves.windows(2).any(|w| w[0].language == w[1].language) {
            bail!(Validation, "run {}: duplicate validation language", self.id);
        }
        self.records_tagged = tagged;
        self.val_curves = curves;
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }
    pub fn strategy(&self) -> Strategy {
        self.strategy
    }
    pub fn language(&self) -> &str {
        &self.language
    }
    pub fn replay_ratio(&self) -> f64 {
        self.replay_ratio
    }
    pub fn param_count(&self) -> u64 {
        self.param_count
    }
    pub fn records(&self) -> &[LossRecord] {
        &self.records
    }
    pub fn records_tagged(&self) -> bool {
        self.records_tagged
    }
    pub fn val_curves(&self) -> &[ValCurve] {
        &self.val_curves
    }

    pub fn max_tokens(&self) -> u64 {
        self.records.last().map_or(0, |r| r.tokens)
    }

    /// Returns a copy of this run under a new id.
    pub fn renamed(&self, id: impl Into<String>) -> TrainingRun {
        TrainingRun { id: id.into(), ..self.clone() }
    }
}

fn prefix(id: &str, e: Error) -> Error {
    match e {
        Error::Validation(m) => Error::Validation(alloc::format!("run {id}: {m}")),
        other => other,
    }
}

fn validate_meta(id: &str, strategy: Strategy, replay_ratio: f64, param_count: u64) -> Result<()> {
    if id.is_empty() {
        bail!(Validation, "empty run id");
    }
    if param_count == 0 {
        bail!(Validation, "run {id}: param_count must be positive");
    }
    if !(0.0..=1.0).contains(&replay_ratio) {
        bail!(Validation, "run {id}: replay_ratio {replay_ratio} outside [0, 1]");
    }
    if strategy == Strategy::Scratch && replay_ratio != 0.0 {
        bail!(Validation, "run {id}: scratch runs cannot replay source data");
    }
    Ok(())
}

fn sort_strict(id: &str, records: &mut [LossRecord]) -> Result<()> {
    records.sort_by_key(|r| r.tokens);
    if let Some(w) = records.windows(2).find(|w| w[0].tokens >= w[1].tokens) {
        bail!(Validation, "run {id}: tokens not strictly increasing (repeated {})", w[1].tokens);
    }
    Ok(())
}

/// A collection of runs with unique ids.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunSet {
    runs: Vec<TrainingRun>,
}

impl RunSet {
    pub fn new(runs: Vec<TrainingRun>) -> Result<Self> {
        let mut seen = BTreeMap::new();
        for r in &runs {
            if seen.insert(r.id.as_str(), ()).is_some() {
                bail!(Validation, "duplicate run id {}", r.id);
            }
        }
        Ok(RunSet { runs })
    }

    pub fn runs(&self) -> &[TrainingRun] {
        &self.runs
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn n_records(&self) -> usize {
        self.runs.iter().map(|r| r.records.len()).sum()
    }

    pub fn get(&self, id: &str) -> Option<&TrainingRun> {
        self.runs.iter().find(|r| r.id == id)
    }

    pub fn into_runs(self) -> Vec<TrainingRun> {
        self.runs
    }

    /// Applies [`warmup_filter`] to every run.
    pub fn without_warmup(&self, fraction: f64) -> Result<RunSet> {
        let runs = self.runs.iter().map(|r| warmup_filter(r, fraction)).collect::<Result<_>>()?;
        Ok(RunSet { runs })
    }

    /// Flattens the set into one row per record, in run order then token order.
    pub fn to_rows(&self) -> Vec<RunRow> {
        let mut rows = Vec::with_capacity(self.n_records());
        for run in &self.runs {
            let row = |rec: &LossRecord, val: Option<&str>| RunRow {
                run_id: run.id.clone(),
                strategy: run.strategy,
                language: run.language.clone(),
                replay_ratio: run.replay_ratio,
                param_count: run.param_count,
                tokens: rec.tokens,
                loss: rec.loss,
                val_language: val.map(ToString::to_string),
            };
            let own = run.records_tagged.then_some(run.language.as_str());
            rows.extend(run.records.iter().map(|r| row(r, own)));
            for c in &run.val_curves {
                rows.extend(c.records.iter().map(|r| row(r, Some(&c.language))));
            }
        }
        rows
    }
}

/// One line of the run-log format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run_id: String,
    pub strategy: Strategy,
    pub language: String,
    pub replay_ratio: f64,
    pub param_count: u64,
    pub tokens: u64,
    pub loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_language: Option<String>,
}

#[derive(Debug)]
struct Pending {
    strategy: Strategy,
    language: String,
    replay_ratio: f64,
    param_count: u64,
    records: Vec<LossRecord>,
    own_tagged: Option<bool>,
    curves: BTreeMap<String, Vec<LossRecord>>,
}

/// Groups flat [`RunRow`]s into a validated [`RunSet`].
///
/// Rows of one run may arrive in any order but must agree on the run's
/// metadata. Per-row checks happen in [`push`](Self::push) so callers can
/// attach their own position information to the error.
#[derive(Debug, Default)]
pub struct RunSetBuilder {
    order: Vec<String>,
    pending: BTreeMap<String, Pending>,
}

impl RunSetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: RunRow) -> Result<()> {
        validate_meta(&row.run_id, row.strategy, row.replay_ratio, row.param_count)?;
        let rec = LossRecord::new(row.tokens, row.loss)?;
        let id = row.run_id;
        let p = match self.pending.get_mut(&id) {
            Some(p) => {
                if p.strategy != row.strategy
                    || p.language != row.language
                    || p.replay_ratio != row.replay_ratio
                    || p.param_count != row.param_count
                {
                    bail!(Validation, "duplicate run id {id} with conflicting metadata");
                }
                p
            }
            None => {
                self.order.push(id.clone());
                self.pending.entry(id.clone()).or_insert(Pending {
                    strategy: row.strategy,
                    language: row.language,
                    replay_ratio: row.replay_ratio,
                    param_count: row.param_count,
                    records: Vec::new(),
                    own_tagged: None,
                    curves: BTreeMap::new(),
                })
            }
        };
        match row.val_language {
            Some(lang) if lang != p.language => p.curves.entry(lang).or_default().push(rec),
            tag => {
                let tagged = tag.is_some();
                if *p.own_tagged.get_or_insert(tagged) != tagged {
                    bail!(Validation, "run {id}: mixes tagged and untagged own-language records");
                }
                p.records.push(rec);
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<RunSet> {
        let mut runs = Vec::with_capacity(self.order.len());
        for id in self.order {
            let p = self.pending.remove(&id).ok_or_else(|| Error::Internal(id.clone()))?;
            if p.records.is_empty() {
                bail!(Validation, "run {id}: no records on its own language {}", p.language);
            }
            let curves = p
                .curves
                .into_iter()
                .map(|(language, records)| ValCurve { language, records })
                .collect();
            let run = TrainingRun::new(id, p.strategy, p.language, p.replay_ratio, p.param_count, p.records)?
                .with_val_curves(p.own_tagged.unwrap_or(false), curves)?;
            runs.push(run);
        }
        RunSet::new(runs)
    }
}

/// Training compute `6·N·D` in FLOPs.
pub fn compute_flops(params: f64, tokens: f64) -> Result<f64> {
    if !(params > 0.0 && params.is_finite()) || !(tokens > 0.0 && tokens.is_finite()) {
        bail!(Domain, "compute_flops needs positive N and D, got N={params}, D={tokens}");
    }
    Ok(FLOPS_PER_PARAM_TOKEN * params * tokens)
}

/// Splits total FLOPs into `(source, target)` shares by the replay ratio.
///
/// The smaller share is derived from the larger by an exact subtraction, so
/// the pair sums back to `total` exactly.
pub fn attribute_flops_by_language(total: f64, replay_ratio: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&replay_ratio) {
        bail!(Domain, "replay ratio {replay_ratio} outside [0, 1]");
    }
    if !(total >= 0.0 && total.is_finite()) {
        bail!(Domain, "total FLOPs must be finite and nonnegative, got {total}");
    }
    // Both subtractions are exact: the subtrahend lies in [total/2, total].
    if replay_ratio <= 0.5 {
        let target = total - total * replay_ratio;
        Ok((total - target, target))
    } else {
        let source = total * replay_ratio;
        Ok((source, total - source))
    }
}

/// Drops records with `tokens < fraction · max_tokens` from the run's own curve.
pub fn warmup_filter(run: &TrainingRun, fraction: f64) -> Result<TrainingRun> {
    if !(0.0..1.0).contains(&fraction) {
        bail!(Domain, "warmup fraction {fraction} outside [0, 1)");
    }
    let threshold = fraction * run.max_tokens() as f64;
    let records: Vec<_> = run.records.iter().copied().filter(|r| r.tokens as f64 >= threshold).collect();
    if records.is_empty() {
        bail!(Validation, "run {}: warmup filter removed every record", run.id);
    }
    Ok(TrainingRun { records, ..run.clone() })
}
