//! Knowledge maps: the Δ% of every metric column for every sweep setting.
//!
//! A map entry records how the best model of one (strategy, metric, example
//! class) setting moved each metric relative to the baseline. The map drives
//! setting selection in [`crate::ensemble`] and is rendered as cross-impact
//! tables by [`report`].

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ClassId;
use crate::metrics::{delta_row, Delta, MetricError, MetricId, MetricKind, ScoreVector};
use crate::search::{OptimizationResult, Setting, StrategyKind};

mod persist;
pub mod report;

pub use persist::{load_map, parse_map, save_map, save_map_string, MAGIC};

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a knowledge map (expected header {expected:?}, found {found:?})")]
    Magic { expected: String, found: String },
    #[error("knowledge map line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("knowledge map schema differs from the dataset at class {position}: map has {map:?}, dataset has {dataset:?}")]
    SchemaMismatch {
        position: usize,
        map: Option<String>,
        dataset: Option<String>,
    },
    #[error("knowledge map was built on dataset {map:016x}, current dataset is {current:016x} (use --force to treat the map as advisory)")]
    StaleMap { map: u64, current: u64 },
    #[error("sweep results do not share one baseline (first mismatch in setting {0})")]
    MixedBaselines(String),
    #[error("setting {0} appears more than once")]
    DuplicateSetting(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub setting: Setting,
    /// Δ% per metric column, in [`MetricId::columns`] order.
    pub deltas: Vec<Delta>,
    pub best_value: f64,
    pub baseline_value: f64,
}

impl MapEntry {
    pub fn delta(&self, schema: &[ClassId], metric: &MetricId) -> Option<Delta> {
        metric.column_index(schema).map(|i| self.deltas[i])
    }

    /// Δ of the setting's own objective.
    pub fn own_delta(&self, schema: &[ClassId]) -> Option<Delta> {
        self.delta(schema, &self.setting.objective())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapProvenance {
    pub dataset_hash: u64,
    /// Attempts per setting.
    pub budget: usize,
    pub config_hash: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeMap {
    pub schema: Vec<ClassId>,
    pub baseline: ScoreVector,
    pub entries: Vec<MapEntry>,
    pub provenance: MapProvenance,
}

impl KnowledgeMap {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, setting: &Setting) -> Option<&MapEntry> {
        self.entries.iter().find(|e| &e.setting == setting)
    }

    /// Inserts or replaces the entry for `entry.setting`.
    pub fn upsert(&mut self, entry: MapEntry) {
        match self.entries.iter_mut().find(|e| e.setting == entry.setting) {
            Some(e) => *e = entry,
            None => self.entries.push(entry),
        }
    }

    /// Errors unless the map was built over `schema` (and, without `force`,
    /// over the dataset with `dataset_hash`). Returns warnings.
    pub fn check_compatible(&self, schema: &[ClassId], dataset_hash: u64, force: bool) -> Result<Vec<String>, KnowledgeError> {
        let n = self.schema.len().max(schema.len());
        for i in 0..n {
            let (a, b) = (self.schema.get(i), schema.get(i));
            if a != b {
                return Err(KnowledgeError::SchemaMismatch {
                    position: i,
                    map: a.map(|c| c.to_string()),
                    dataset: b.map(|c| c.to_string()),
                });
            }
        }
        if self.provenance.dataset_hash != dataset_hash {
            if !force {
                return Err(KnowledgeError::StaleMap {
                    map: self.provenance.dataset_hash,
                    current: dataset_hash,
                });
            }
            return Ok(vec![format!(
                "knowledge map was built on dataset {:016x}, not {dataset_hash:016x}; using it as advisory",
                self.provenance.dataset_hash
            )]);
        }
        Ok(Vec::new())
    }
}

pub fn entry_from_result(result: &OptimizationResult, baseline: &ScoreVector) -> Result<MapEntry, KnowledgeError> {
    Ok(MapEntry {
        setting: result.setting.clone(),
        deltas: delta_row(baseline, &result.best_scores)?,
        best_value: result.best_value,
        baseline_value: result.baseline_value,
    })
}

/// One entry per result, Δ measured from `baseline` to each run's best model.
pub fn build_map(
    results: &[OptimizationResult],
    baseline: &ScoreVector,
    provenance: MapProvenance,
) -> Result<KnowledgeMap, KnowledgeError> {
    let mut seen = BTreeSet::new();
    let mut entries = Vec::with_capacity(results.len());
    for r in results {
        if &r.baseline_scores != baseline {
            return Err(KnowledgeError::MixedBaselines(r.setting.to_string()));
        }
        if !seen.insert(r.setting.clone()) {
            return Err(KnowledgeError::DuplicateSetting(r.setting.to_string()));
        }
        entries.push(entry_from_result(r, baseline)?);
    }
    Ok(KnowledgeMap {
        schema: baseline.schema.clone(),
        baseline: baseline.clone(),
        entries,
        provenance,
    })
}

/// Best strategies per (objective metric, example class) cell.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BestSummary {
    pub cells: BTreeMap<(MetricKind, ClassId), BTreeSet<StrategyKind>>,
}

impl BestSummary {
    pub fn get(&self, metric: MetricKind, class: &ClassId) -> Option<&BTreeSet<StrategyKind>> {
        self.cells.get(&(metric, class.clone()))
    }
}

const BAND_EPS: f64 = 1e-9;

/// Per cell, the strategies whose own-objective Δ is within `band` percentage
/// points of the cell's best. Infinite Δ outranks every finite value.
pub fn summarize_best(map: &KnowledgeMap, band: f64) -> BestSummary {
    assert!(band >= 0.0, "band must be non-negative");
    let mut by_cell: BTreeMap<(MetricKind, ClassId), Vec<(StrategyKind, Delta)>> = BTreeMap::new();
    for e in &map.entries {
        let Some(d) = e.own_delta(&map.schema) else { continue };
        by_cell
            .entry((e.setting.metric, e.setting.class.clone()))
            .or_default()
            .push((e.setting.strategy, d));
    }
    let cells = by_cell
        .into_iter()
        .map(|(cell, ds)| {
            let chosen = if ds.iter().any(|(_, d)| *d == Delta::Infinite) {
                ds.iter().filter(|(_, d)| *d == Delta::Infinite).map(|(s, _)| *s).collect()
            } else {
                let best = ds.iter().filter_map(|(_, d)| d.finite()).fold(f64::NEG_INFINITY, f64::max);
                ds.iter()
                    .filter(|(_, d)| d.finite().is_some_and(|v| v >= best - band - BAND_EPS))
                    .map(|(s, _)| *s)
                    .collect()
            };
            (cell, chosen)
        })
        .collect();
    BestSummary { cells }
}

/// Entries with positive Δ on `target`, best first, at most `k`. Ties are
/// broken by strategy name, then example class, then objective metric.
pub fn query_top_k<'a>(map: &'a KnowledgeMap, target: &MetricId, k: usize) -> Vec<(&'a MapEntry, Delta)> {
    assert!(k >= 1, "k must be at least 1");
    let Some(col) = target.column_index(&map.schema) else {
        return Vec::new();
    };
    let mut ranked: Vec<(&MapEntry, Delta)> = map
        .entries
        .iter()
        .map(|e| (e, e.deltas[col]))
        .filter(|(_, d)| d.is_positive())
        .collect();
    ranked.sort_by(|(a, da), (b, db)| {
        db.cmp_total(da)
            .then_with(|| a.setting.strategy.name().cmp(b.setting.strategy.name()))
            .then_with(|| a.setting.class.cmp(&b.setting.class))
            .then_with(|| a.setting.metric.cmp(&b.setting.metric))
            .then(Ordering::Equal)
    });
    ranked.truncate(k);
    ranked
}
