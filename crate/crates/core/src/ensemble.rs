//! Knowledge-guided, multi-phase, multi-objective improvement.
//!
//! Each phase samples one objective from the pool, picks settings from the
//! knowledge map (or sweeps the full grid when there is no map yet), splits
//! the phase budget across them in proportion to their historical Δ and runs
//! them. The phase's best model joins the model pool; its synthetic batch is
//! kept for later phases only when the assessment value rises.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ClassId, Split};
use crate::classifier::{ModelSpec, TrainedModel};
use crate::features::{FeatureSpace, Projection};
use crate::knowledge::{build_map, entry_from_result, query_top_k, KnowledgeError, KnowledgeMap, MapProvenance};
use crate::metrics::{CbaVariant, Delta, MetricError, MetricId, MetricKind, ScoreVector};
use crate::search::{
    grid, run_setting, setting_seed, sweep, Baseline, Budget, OptimizationResult, SearchContext, SearchError, Setting,
    StrategyKind, StrategyParams,
};
use crate::seed;
use crate::synthgen::{GenerationBudget, Generator, SyntheticBatch};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("objectives line {line}: {reason}")]
    Objectives { line: usize, reason: String },
    #[error("invalid ensemble configuration: {0}")]
    Config(String),
    #[error("allocation needs at least one attempt per setting ({settings} settings, budget {budget})")]
    BudgetTooSmall { budget: usize, settings: usize },
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub target: MetricId,
    /// Weight in the assessment function; 0 makes the row a pure constraint.
    pub weight: f64,
    pub min_threshold: Option<f64>,
}

/// Parses `metric<TAB>class<TAB>weight<TAB>min_threshold` rows. Fields may
/// also be separated by spaces; `-` means no class or no threshold. A header
/// row starting with `metric` and `#` comments are skipped.
pub fn parse_objectives(text: &str, schema: &[ClassId]) -> Result<Vec<Objective>, EnsembleError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |reason: String| EnsembleError::Objectives { line, reason };
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = if raw.contains('\t') {
            raw.split('\t').map(str::trim).collect()
        } else {
            trimmed.split_whitespace().collect()
        };
        if fields[0].eq_ignore_ascii_case("metric") {
            continue;
        }
        if !(2..=4).contains(&fields.len()) {
            return Err(err(format!("expected metric, class, weight, min_threshold; found {} fields", fields.len())));
        }
        let target = MetricId::parse_parts(fields[0], fields[1]).map_err(|e| err(e.to_string()))?;
        if target.column_index(schema).is_none() {
            return Err(err(format!("class {:?} is not in the schema", fields[1])));
        }
        let weight = match fields.get(2) {
            Some(w) => w.parse::<f64>().map_err(|_| err(format!("weight {w:?} is not a number")))?,
            None => 1.0,
        };
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(err(format!("weight must be a non-negative number, got {weight}")));
        }
        let min_threshold = match fields.get(3).copied() {
            None | Some("") | Some("-") => None,
            Some(t) => {
                let v = t.parse::<f64>().map_err(|_| err(format!("threshold {t:?} is not a number")))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(err(format!("threshold must be in [0, 1], got {v}")));
                }
                Some(v)
            }
        };
        out.push(Objective {
            target,
            weight,
            min_threshold,
        });
    }
    if out.is_empty() {
        return Err(EnsembleError::Objectives {
            line: 0,
            reason: "no objectives".into(),
        });
    }
    if !out.iter().any(|o| o.weight > 0.0) {
        return Err(EnsembleError::Objectives {
            line: 0,
            reason: "at least one objective needs a positive weight".into(),
        });
    }
    Ok(out)
}

/// Weighted sum of metric values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessmentFn {
    pub terms: Vec<(MetricId, f64)>,
}

impl AssessmentFn {
    pub fn new(terms: Vec<(MetricId, f64)>) -> Result<Self, EnsembleError> {
        if terms.iter().any(|(_, w)| !(*w >= 0.0)) {
            return Err(EnsembleError::Config("assessment weights must be non-negative".into()));
        }
        if !terms.iter().any(|(_, w)| *w > 0.0) {
            return Err(EnsembleError::Config("assessment needs at least one positive weight".into()));
        }
        Ok(AssessmentFn { terms })
    }

    pub fn from_objectives(objectives: &[Objective]) -> Result<Self, EnsembleError> {
        AssessmentFn::new(objectives.iter().filter(|o| o.weight > 0.0).map(|o| (o.target.clone(), o.weight)).collect())
    }

    pub fn eval(&self, scores: &ScoreVector) -> f64 {
        self.terms
            .iter()
            .map(|(m, w)| w * scores.get(m).unwrap_or(0.0))
            .sum()
    }
}

impl fmt::Display for AssessmentFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(|(m, w)| format!("{w}*{m}")).collect();
        f.write_str(&parts.join(" + "))
    }
}

/// Objectives sampled uniformly, one per phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePool {
    pub objectives: Vec<Objective>,
    pub seed: u64,
}

impl ObjectivePool {
    /// Pool of the positively weighted objectives.
    pub fn new(objectives: &[Objective], seed: u64) -> Result<Self, EnsembleError> {
        let objectives: Vec<Objective> = objectives.iter().filter(|o| o.weight > 0.0).cloned().collect();
        if objectives.is_empty() {
            return Err(EnsembleError::Config("objective pool is empty".into()));
        }
        Ok(ObjectivePool { objectives, seed })
    }

    pub fn sample(&self, phase: usize) -> &Objective {
        let mut rng = seed::rng(seed::derive(self.seed, &[phase as u64]));
        &self.objectives[rng.gen_range(0..self.objectives.len())]
    }
}

/// Splits `budget` in proportion to `x` by largest remainder (earliest first on
/// ties), then raises zero shares to 1 by taking from the share with the
/// largest surplus over its exact quota. A zero or non-finite total falls back
/// to an equal split.
pub fn allocate(budget: usize, x: &[f64]) -> Result<Vec<usize>, EnsembleError> {
    let n = x.len();
    if n == 0 || budget < n {
        return Err(EnsembleError::BudgetTooSmall { budget, settings: n });
    }
    let clean: Vec<f64> = x.iter().map(|&v| if v.is_finite() && v > 0.0 { v } else { 0.0 }).collect();
    let total: f64 = clean.iter().sum();
    let quota: Vec<f64> = if total > 0.0 && total.is_finite() {
        clean.iter().map(|v| budget as f64 * v / total).collect()
    } else {
        vec![budget as f64 / n as f64; n]
    };
    let mut alloc: Vec<usize> = quota.iter().map(|q| q.floor() as usize).collect();
    let mut left = budget - alloc.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let fa = quota[a] - quota[a].floor();
        let fb = quota[b] - quota[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        alloc[i] += 1;
        left -= 1;
    }
    for i in 0..n {
        if alloc[i] == 0 {
            let donor = (0..n)
                .filter(|&j| alloc[j] > 1)
                .max_by(|&a, &b| {
                    let sa = alloc[a] as f64 - quota[a];
                    let sb = alloc[b] as f64 - quota[b];
                    sa.total_cmp(&sb).then(b.cmp(&a))
                })
                .expect("budget >= settings leaves a donor");
            alloc[donor] -= 1;
            alloc[i] = 1;
        }
    }
    debug_assert_eq!(alloc.iter().sum::<usize>(), budget);
    Ok(alloc)
}

/// Allocation weights from map deltas: negatives become 0, infinities twice
/// the largest finite positive value (or 1 when there is none).
pub fn allocation_weights(deltas: &[Delta]) -> Vec<f64> {
    let max_finite = deltas.iter().filter_map(|d| d.finite()).filter(|v| *v > 0.0).fold(0.0, f64::max);
    let cap = if max_finite > 0.0 { 2.0 * max_finite } else { 1.0 };
    deltas
        .iter()
        .map(|d| match d {
            Delta::Infinite => cap,
            Delta::Finite(v) => v.max(0.0),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub model: TrainedModel,
    /// Scores on the optimization-test partition.
    pub scores: ScoreVector,
    pub phase: usize,
    /// `None` when the phase kept the incumbent model.
    pub setting: Option<Setting>,
    pub assessment: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelPool {
    pub entries: Vec<PoolEntry>,
}

impl ModelPool {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub metric: MetricId,
    pub threshold: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub assessment: f64,
    /// Empty when the selected entry meets every constraint.
    pub violations: Vec<Violation>,
}

fn violations(scores: &ScoreVector, constraints: &[(MetricId, f64)]) -> Vec<Violation> {
    constraints
        .iter()
        .filter_map(|(m, t)| {
            let value = scores.get(m).unwrap_or(0.0);
            (value < *t).then(|| Violation {
                metric: m.clone(),
                threshold: *t,
                value,
            })
        })
        .collect()
}

/// Arg max of `criterion` over entries meeting every constraint (earliest on
/// ties). When none qualifies, the unconstrained arg max and its violations.
pub fn select_final(pool: &ModelPool, criterion: &AssessmentFn, constraints: &[(MetricId, f64)]) -> Option<Selection> {
    let argmax = |ok: &dyn Fn(&PoolEntry) -> bool| {
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in pool.entries.iter().enumerate() {
            if !ok(e) {
                continue;
            }
            let s = criterion.eval(&e.scores);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best
    };
    let (index, assessment) = argmax(&|e| violations(&e.scores, constraints).is_empty()).or_else(|| argmax(&|_| true))?;
    Some(Selection {
        index,
        assessment,
        violations: violations(&pool.entries[index].scores, constraints),
    })
}

pub fn constraints_of(objectives: &[Objective]) -> Vec<(MetricId, f64)> {
    objectives
        .iter()
        .filter_map(|o| o.min_threshold.map(|t| (o.target.clone(), t)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    /// No map yet: the full grid was swept and a map built.
    Sweep,
    /// Top-k settings from the map.
    Map,
    /// The map had no setting with positive Δ for the objective.
    Fallback,
}

/// One line of the phase log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: usize,
    pub objective: String,
    pub mode: PhaseMode,
    pub settings: Vec<String>,
    pub allocations: Vec<usize>,
    pub best_setting: Option<String>,
    /// Δ% of the objective from the phase's starting model to its best model.
    pub best_delta: Delta,
    pub assessment: f64,
    pub incumbent_assessment: f64,
    pub accepted_batch: Option<String>,
    pub failed_settings: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub phases: usize,
    /// Attempts per phase, split across the selected settings.
    pub phase_budget: usize,
    pub k: usize,
    /// Grid used for the sweep-first phase and for fallback phases.
    pub strategies: Vec<StrategyKind>,
    pub metrics: Vec<MetricKind>,
    /// Attempts per setting in the sweep-first phase.
    pub sweep_budget: usize,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            phases: 3,
            phase_budget: 60,
            k: 3,
            strategies: StrategyKind::ALL.to_vec(),
            metrics: MetricKind::ALL.to_vec(),
            sweep_budget: 5,
            seed: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.phases == 0 {
            return Err(EnsembleError::Config("phases must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(EnsembleError::Config("k must be at least 1".into()));
        }
        if self.phase_budget == 0 || self.sweep_budget == 0 {
            return Err(EnsembleError::Config("budgets must be at least 1".into()));
        }
        if self.strategies.is_empty() || self.metrics.is_empty() {
            return Err(EnsembleError::Config("the setting grid is empty".into()));
        }
        Ok(())
    }
}

/// The pieces of a search context that stay fixed across phases.
#[derive(Clone, Copy)]
pub struct EnsembleEnv<'a> {
    pub split: &'a Split,
    pub space: &'a FeatureSpace,
    pub spec: &'a ModelSpec,
    pub generator: &'a dyn Generator,
    pub projections: &'a [Projection],
    pub gen_budget: GenerationBudget,
    pub cba_variant: CbaVariant,
    pub params: &'a StrategyParams,
}

impl<'a> EnsembleEnv<'a> {
    fn context(&self, extra: &'a [SyntheticBatch], baseline: &'a Baseline) -> SearchContext<'a> {
        SearchContext {
            split: self.split,
            space: self.space,
            spec: self.spec,
            generator: self.generator,
            projections: self.projections,
            gen_budget: self.gen_budget,
            cba_variant: self.cba_variant,
            params: self.params,
            extra_training: extra,
            baseline,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnsembleOutcome {
    pub pool: ModelPool,
    pub map: KnowledgeMap,
    pub log: Vec<PhaseRecord>,
    /// Synthetic batches accepted into training, in phase order.
    pub accepted: Vec<SyntheticBatch>,
    pub baseline_scores: ScoreVector,
}

/// Class whose examples a fallback phase uses: the objective's own class, or
/// for overall metrics the class with the lowest recall (earliest on ties).
fn fallback_class(target: &MetricId, scores: &ScoreVector) -> ClassId {
    if let Some(c) = target.class() {
        return c.clone();
    }
    let mut best: Option<(&ClassId, f64)> = None;
    for c in &scores.schema {
        let r = scores.get(&MetricId::Cr(c.clone())).unwrap_or(0.0);
        if best.is_none_or(|(_, b)| r < b) {
            best = Some((c, r));
        }
    }
    best.expect("schema is non-empty").0.clone()
}

/// Index of the result with the highest `target`, earliest on ties; `None`
/// when no result beats `floor`.
fn phase_best(results: &[(usize, OptimizationResult)], target: &MetricId, floor: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (_, r)) in results.iter().enumerate() {
        let v = r.best_scores.get(target).unwrap_or(f64::NEG_INFINITY);
        if r.improved() && v > best.map_or(floor, |(_, b)| b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Runs `cfg.phases` phases. Without a map the first phase sweeps the grid
/// and builds one; later phases use it.
pub fn run_ensemble(
    env: &EnsembleEnv,
    pool: &ObjectivePool,
    assessment: &AssessmentFn,
    cfg: &EnsembleConfig,
    map: Option<KnowledgeMap>,
    provenance: MapProvenance,
) -> Result<EnsembleOutcome, EnsembleError> {
    cfg.validate()?;
    let schema = env.split.train.schema().to_vec();
    let mut map = map;
    let mut accepted: Vec<SyntheticBatch> = Vec::new();
    let mut models = ModelPool::default();
    let mut log = Vec::new();
    let start = Baseline::fit(env.split, env.space, env.spec, &[], env.cba_variant)?;
    let baseline_scores = start.opt_scores.clone();
    let mut incumbent_s = assessment.eval(&baseline_scores);

    for phase in 0..cfg.phases {
        let objective = pool.sample(phase).clone();
        let target = objective.target.clone();
        let phase_seed = seed::derive(cfg.seed, &[phase as u64]);
        let base = if accepted.is_empty() {
            start.clone()
        } else {
            Baseline::fit(env.split, env.space, env.spec, &accepted, env.cba_variant)?
        };
        let ctx = env.context(&accepted, &base);
        let floor = base.opt_scores.get(&target).unwrap_or(0.0);
        let mut warnings = Vec::new();

        let (mode, settings, allocations, outcomes) = match map.as_ref() {
            None => {
                let settings = grid(&cfg.strategies, &cfg.metrics, &schema);
                let budget = Budget::attempts(cfg.sweep_budget);
                let results = sweep(&ctx, &settings, budget, phase_seed, None);
                let allocations = vec![cfg.sweep_budget; settings.len()];
                (PhaseMode::Sweep, settings, allocations, results)
            }
            Some(m) => {
                let top = query_top_k(m, &target, cfg.k);
                let (mode, mut settings, weights) = if top.is_empty() {
                    let class = fallback_class(&target, &base.opt_scores);
                    let settings = grid(&cfg.strategies, &cfg.metrics, &[class]);
                    let n = settings.len();
                    (PhaseMode::Fallback, settings, vec![1.0; n])
                } else {
                    let deltas: Vec<Delta> = top.iter().map(|(_, d)| *d).collect();
                    let settings = top.iter().map(|(e, _)| e.setting.clone()).collect();
                    (PhaseMode::Map, settings, allocation_weights(&deltas))
                };
                let mut weights = weights;
                if settings.len() > cfg.phase_budget {
                    warnings.push(format!(
                        "phase budget {} is smaller than {} settings; keeping the first {}",
                        cfg.phase_budget,
                        settings.len(),
                        cfg.phase_budget
                    ));
                    settings.truncate(cfg.phase_budget);
                    weights.truncate(cfg.phase_budget);
                }
                let allocations = allocate(cfg.phase_budget, &weights)?;
                let results = run_allocated(&ctx, &settings, &allocations, phase_seed);
                (mode, settings, allocations, results)
            }
        };

        let mut ok = Vec::new();
        let mut failed = Vec::new();
        for (i, (s, r)) in settings.iter().zip(outcomes).enumerate() {
            match r {
                Ok(r) => ok.push((i, r)),
                Err(e) => failed.push(format!("{s}: {e}")),
            }
        }
        for (_, r) in &ok {
            warnings.extend(r.warnings.iter().map(|w| format!("{}: {w}", r.setting)));
        }

        if mode == PhaseMode::Sweep {
            let results: Vec<OptimizationResult> = ok.iter().map(|(_, r)| r.clone()).collect();
            map = Some(build_map(&results, &base.opt_scores, provenance.clone())?);
        } else if let Some(m) = map.as_mut() {
            for (_, r) in &ok {
                m.upsert(entry_from_result(r, &base.opt_scores)?);
            }
        }

        let best = phase_best(&ok, &target, floor);
        let (model, scores, setting, batch) = match best {
            Some(b) => {
                let r = &ok[b].1;
                (r.best_model.clone(), r.best_scores.clone(), Some(r.setting.clone()), r.winning_batch.clone())
            }
            None => (base.model.clone(), base.opt_scores.clone(), None, None),
        };
        let s = assessment.eval(&scores);
        let best_delta = Delta::between(floor, scores.get(&target).unwrap_or(0.0));
        let previous_s = incumbent_s;
        let mut accepted_batch = None;
        if s > incumbent_s {
            incumbent_s = s;
            if let Some(b) = batch {
                accepted_batch = Some(b.batch_id.clone());
                accepted.push(b);
            }
        }
        tracing::info!(phase, objective = %target, mode = ?mode, s, "phase finished");
        models.entries.push(PoolEntry {
            model,
            scores,
            phase,
            setting: setting.clone(),
            assessment: s,
        });
        log.push(PhaseRecord {
            phase,
            objective: target.to_string(),
            mode,
            settings: settings.iter().map(|s| s.to_string()).collect(),
            allocations,
            best_setting: setting.map(|s| s.to_string()),
            best_delta,
            assessment: s,
            incumbent_assessment: previous_s,
            accepted_batch,
            failed_settings: failed,
            warnings,
        });
    }

    let map = map.expect("the first phase builds a map when none is given");
    Ok(EnsembleOutcome {
        pool: models,
        map,
        log,
        accepted,
        baseline_scores,
    })
}

fn run_allocated(
    ctx: &SearchContext,
    settings: &[Setting],
    allocations: &[usize],
    seed: u64,
) -> Vec<Result<OptimizationResult, SearchError>> {
    let jobs: Vec<(&Setting, usize)> = settings.iter().zip(allocations.iter().copied()).collect();
    let run = |(s, n): &(&Setting, usize)| run_setting(ctx, s, Budget::attempts(*n), setting_seed(seed, s), None);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(run).collect()
    }
}
