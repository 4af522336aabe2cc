//! Example-set search strategies and the attempt loop that evaluates them.
//!
//! Every strategy is a [`CandidateSource`]: it proposes batches of example
//! sets and is told the objective value each one reached. The runner turns an
//! example set into a synthetic batch, retrains the classifier on the train
//! partition plus that batch, scores the model on the optimization-test
//! partition, and keeps the best model seen. The baseline model `M_0` stays
//! best unless an attempt is strictly better.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{self, ClassifierError, ModelSpec, TrainedModel};
use crate::corpus::{ClassId, Split};
use crate::features::{target_points, FeatureSpace, Projection};
use crate::metrics::{score_vector, CbaVariant, MetricError, MetricId, MetricKind, ScoreVector};
use crate::seed;
use crate::synthgen::{self, ExampleSet, GenError, GenerationBudget, Generator, SyntheticBatch};

mod ga;
mod hsw;
mod sw;
mod window;

pub use ga::{GaParams, GaSearch};
pub use hsw::{HswParams, HswSearch, Promising};
pub use sw::{sw_attempts, ProjectedTargets, SwParams, SwSearch};
pub use window::{sliding_windows, Window};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Generator(#[from] GenError),
    #[error("class {0:?} is not in the schema")]
    UnknownClass(String),
    #[error("class {0:?} has no train messages to use as examples")]
    NoExamples(String),
    #[error("attempt manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("invalid search parameters: {0}")]
    Params(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    Sw,
    Hsw,
    Ga,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::Sw, StrategyKind::Hsw, StrategyKind::Ga];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Sw => "SW",
            StrategyKind::Hsw => "HSW",
            StrategyKind::Ga => "GA",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "SW" => Ok(StrategyKind::Sw),
            "HSW" => Ok(StrategyKind::Hsw),
            "GA" => Ok(StrategyKind::Ga),
            _ => Err(SearchError::Params(format!("unknown strategy {s:?} (expected SW, HSW or GA)"))),
        }
    }
}

/// One cell of a sweep: a strategy optimizing a metric using examples of a class.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Setting {
    pub strategy: StrategyKind,
    pub metric: MetricKind,
    /// Class the example sets are drawn from.
    pub class: ClassId,
}

impl Setting {
    pub fn new(strategy: StrategyKind, metric: MetricKind, class: impl Into<ClassId>) -> Self {
        Setting {
            strategy,
            metric,
            class: class.into(),
        }
    }

    pub fn objective(&self) -> MetricId {
        self.metric.on(&self.class)
    }

    pub fn key(&self) -> String {
        format!("{}_{}_{}", self.strategy, self.metric.name(), self.class)
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {} / {}", self.strategy, self.metric.name(), self.class)
    }
}

/// Settings in sweep order: strategies, then metrics, then classes.
pub fn grid(strategies: &[StrategyKind], metrics: &[MetricKind], classes: &[ClassId]) -> Vec<Setting> {
    let mut out = Vec::with_capacity(strategies.len() * metrics.len() * classes.len());
    for &s in strategies {
        for &m in metrics {
            for c in classes {
                out.push(Setting::new(s, m, c.clone()));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_attempts: usize,
    pub wall_clock: Option<Duration>,
}

impl Budget {
    pub fn attempts(n: usize) -> Self {
        Budget {
            max_attempts: n,
            wall_clock: None,
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::attempts(60)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    pub sw: SwParams,
    pub hsw: HswParams,
    pub ga: GaParams,
}

impl StrategyParams {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::Params(m.to_string()));
        for (size, stride) in [(self.sw.window_size, self.sw.stride), (self.hsw.window_size, self.hsw.stride)] {
            if !(size > 0.0 && size <= 1.0) {
                return bad("window size must be in (0, 1]");
            }
            if !(stride > 0.0 && stride <= size) {
                return bad("stride must be in (0, window size]");
            }
        }
        if self.sw.k == 0 || self.hsw.k == 0 || self.ga.k_max == 0 {
            return bad("example set size must be at least 1");
        }
        if self.sw.attempts_per_window == 0 || self.hsw.attempts_per_window == 0 {
            return bad("attempts per window must be at least 1");
        }
        if self.hsw.max_depth == 0 {
            return bad("max depth must be at least 1");
        }
        if self.ga.population < 2 {
            return bad("GA population must be at least 2");
        }
        if self.ga.tournament == 0 {
            return bad("tournament size must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.ga.crossover_rate) {
            return bad("crossover rate must be in [0, 1]");
        }
        if let Some(r) = self.ga.mutation_rate {
            if !(0.0..=1.0).contains(&r) {
                return bad("mutation rate must be in [0, 1]");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Window(Window),
    /// Selection bits over the sorted target-class train messages.
    Chromosome(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub examples: ExampleSet,
    pub provenance: Provenance,
}

/// Ask/tell interface of a search strategy.
pub trait CandidateSource {
    /// The next candidates to evaluate, at most `remaining`. Empty when done.
    fn next_batch(&mut self, remaining: usize) -> Vec<Candidate>;

    /// Objective values for the last batch, in order. `None` marks a failed attempt.
    fn observe(&mut self, results: &[(Candidate, Option<f64>)]);

    fn warnings(&self) -> Vec<String> {
        Vec::new()
    }
}

/// The model trained without a new synthetic batch, and its scores.
#[derive(Clone, Debug)]
pub struct Baseline {
    pub model: TrainedModel,
    pub opt_scores: ScoreVector,
}

impl Baseline {
    pub fn fit(
        split: &Split,
        space: &FeatureSpace,
        spec: &ModelSpec,
        extra_training: &[SyntheticBatch],
        variant: CbaVariant,
    ) -> Result<Self, SearchError> {
        let extra: Vec<&SyntheticBatch> = extra_training.iter().collect();
        let model = classifier::train(spec, &split.train, &extra, space)?;
        let preds = model.predict(&split.opt_test, space)?;
        let opt_scores = score_vector(&split.opt_test, &preds, variant)?;
        Ok(Baseline { model, opt_scores })
    }
}

/// Everything an attempt needs besides the example set.
#[derive(Clone, Copy)]
pub struct SearchContext<'a> {
    pub split: &'a Split,
    pub space: &'a FeatureSpace,
    pub spec: &'a ModelSpec,
    pub generator: &'a dyn Generator,
    pub projections: &'a [Projection],
    pub gen_budget: GenerationBudget,
    pub cba_variant: CbaVariant,
    pub params: &'a StrategyParams,
    /// Synthetic batches already accepted into training (earlier ensemble phases).
    pub extra_training: &'a [SyntheticBatch],
    /// Must have been fitted with the same `extra_training`.
    pub baseline: &'a Baseline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt_index: usize,
    pub strategy: StrategyKind,
    pub example_set: ExampleSet,
    pub batch_id: Option<String>,
    pub synthetic_count: usize,
    pub scores: Option<ScoreVector>,
    pub objective_value: Option<f64>,
    pub provenance: Provenance,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub setting: Setting,
    pub objective: MetricId,
    pub baseline_scores: ScoreVector,
    pub baseline_value: f64,
    pub best_model: TrainedModel,
    pub best_scores: ScoreVector,
    pub best_value: f64,
    /// `None` when no attempt beat the baseline.
    pub best_attempt: Option<usize>,
    pub winning_batch: Option<SyntheticBatch>,
    pub attempts: Vec<AttemptRecord>,
    pub warnings: Vec<String>,
}

impl OptimizationResult {
    pub fn improved(&self) -> bool {
        self.best_attempt.is_some()
    }
}

struct Evaluation {
    model: TrainedModel,
    scores: ScoreVector,
    batch: SyntheticBatch,
}

fn attempt_seed(seed: u64, index: usize) -> u64 {
    seed::derive(seed, &[index as u64])
}

fn evaluate(ctx: &SearchContext, examples: &ExampleSet, seed: u64) -> Result<Evaluation, SearchError> {
    let count = ctx.gen_budget.count_for(examples.len());
    let batch = synthgen::generate(ctx.generator, &ctx.split.train, examples, count, seed)?;
    let mut training: Vec<&SyntheticBatch> = ctx.extra_training.iter().collect();
    training.push(&batch);
    let model = classifier::train(ctx.spec, &ctx.split.train, &training, ctx.space)?;
    let preds = model.predict(&ctx.split.opt_test, ctx.space)?;
    let scores = score_vector(&ctx.split.opt_test, &preds, ctx.cba_variant)?;
    Ok(Evaluation { model, scores, batch })
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(usize, &T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(usize, &T) -> R + Sync + Send) -> Vec<R> {
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

fn make_source(ctx: &SearchContext, setting: &Setting, seed: u64) -> Result<Box<dyn CandidateSource>, SearchError> {
    let class = &setting.class;
    let train = &ctx.split.train;
    if train.class_index(class).is_none() {
        return Err(SearchError::UnknownClass(class.to_string()));
    }
    if train.of_class(class).next().is_none() {
        return Err(SearchError::NoExamples(class.to_string()));
    }
    ctx.params.validate()?;
    let targets = || -> Vec<ProjectedTargets> {
        ctx.projections
            .iter()
            .map(|&p| ProjectedTargets {
                projection: p,
                points: target_points(train, class, p, ctx.space),
            })
            .collect()
    };
    let baseline_value = ctx.baseline.opt_scores.get(&setting.objective()).unwrap_or(0.0);
    Ok(match setting.strategy {
        StrategyKind::Sw => Box::new(SwSearch::new(&targets(), class, &ctx.params.sw, seed)),
        StrategyKind::Hsw => Box::new(HswSearch::new(&targets(), class, &ctx.params.hsw, baseline_value, seed)),
        StrategyKind::Ga => {
            let members = train.of_class(class).map(|m| m.id.clone()).collect();
            Box::new(GaSearch::new(members, class, &ctx.params.ga, seed))
        }
    })
}

/// Attempt records from an earlier, interrupted run of the same setting.
pub fn load_attempts(path: &Path) -> Result<Vec<AttemptRecord>, SearchError> {
    let err = |reason: String| SearchError::Manifest {
        path: path.to_path_buf(),
        reason,
    };
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(err(e.to_string())),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<AttemptRecord>(&line) {
            Ok(r) => out.push(r),
            // a torn final line from an interrupted write
            Err(_) => {
                tracing::warn!(path = %path.display(), line = i + 1, "ignoring unreadable attempt record");
                break;
            }
        }
    }
    Ok(out)
}

struct ManifestWriter {
    path: PathBuf,
    file: fs::File,
}

impl ManifestWriter {
    fn create(path: &Path) -> Result<Self, SearchError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| SearchError::Manifest {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        }
        let file = fs::File::create(path).map_err(|e| SearchError::Manifest {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok(ManifestWriter {
            path: path.to_path_buf(),
            file,
        })
    }

    fn append(&mut self, r: &AttemptRecord) -> Result<(), SearchError> {
        let line = serde_json::to_string(r).expect("attempt records serialize");
        writeln!(self.file, "{line}")
            .and_then(|_| self.file.flush())
            .map_err(|e| SearchError::Manifest {
                path: self.path.clone(),
                reason: e.to_string(),
            })
    }
}

/// Runs one setting until the strategy is exhausted or the budget is spent.
///
/// With `manifest`, every attempt is appended to that JSONL file as it
/// finishes; attempts already recorded there (same index and example set)
/// are reused instead of re-evaluated.
pub fn run_setting(
    ctx: &SearchContext,
    setting: &Setting,
    budget: Budget,
    seed: u64,
    manifest: Option<&Path>,
) -> Result<OptimizationResult, SearchError> {
    let objective = setting.objective();
    let baseline_scores = ctx.baseline.opt_scores.clone();
    let baseline_value = baseline_scores
        .get(&objective)
        .ok_or_else(|| SearchError::UnknownClass(setting.class.to_string()))?;
    let mut source = make_source(ctx, setting, seed)?;
    let cached = match manifest {
        Some(p) => load_attempts(p)?,
        None => Vec::new(),
    };
    let mut writer = manifest.map(ManifestWriter::create).transpose()?;

    let started = Instant::now();
    let mut attempts: Vec<AttemptRecord> = Vec::new();
    let mut best: Option<(usize, Evaluation)> = None;
    let mut best_value = baseline_value;
    let mut best_cached: Option<(usize, ExampleSet)> = None;
    let mut warnings = Vec::new();

    while attempts.len() < budget.max_attempts {
        if budget.wall_clock.is_some_and(|w| started.elapsed() >= w) {
            warnings.push(format!("wall-clock budget reached after {} attempts", attempts.len()));
            break;
        }
        let batch = source.next_batch(budget.max_attempts - attempts.len());
        if batch.is_empty() {
            break;
        }
        let first = attempts.len();
        let reuse: Vec<Option<&AttemptRecord>> = batch
            .iter()
            .enumerate()
            .map(|(i, c)| {
                cached
                    .get(first + i)
                    .filter(|r| r.attempt_index == first + i && r.example_set == c.examples && r.error.is_none())
            })
            .collect();
        let evals = par_map(&batch, |i, c| match reuse[i] {
            Some(_) => None,
            None => Some(evaluate(ctx, &c.examples, attempt_seed(seed, first + i))),
        });
        let mut observed = Vec::with_capacity(batch.len());
        for (i, (cand, eval)) in batch.into_iter().zip(evals).enumerate() {
            let index = first + i;
            let record = match (reuse[i], eval) {
                (Some(r), _) => r.clone(),
                (None, Some(Ok(ev))) => {
                    let value = ev.scores.get(&objective);
                    let r = AttemptRecord {
                        attempt_index: index,
                        strategy: setting.strategy,
                        example_set: cand.examples.clone(),
                        batch_id: Some(ev.batch.batch_id.clone()),
                        synthetic_count: ev.batch.len(),
                        scores: Some(ev.scores.clone()),
                        objective_value: value,
                        provenance: cand.provenance.clone(),
                        error: None,
                    };
                    if value.is_some_and(|v| v > best_value) {
                        best_value = value.unwrap();
                        best = Some((index, ev));
                        best_cached = None;
                    }
                    r
                }
                (None, Some(Err(e))) => {
                    tracing::warn!(setting = %setting, attempt = index, error = %e, "attempt failed");
                    AttemptRecord {
                        attempt_index: index,
                        strategy: setting.strategy,
                        example_set: cand.examples.clone(),
                        batch_id: None,
                        synthetic_count: 0,
                        scores: None,
                        objective_value: None,
                        provenance: cand.provenance.clone(),
                        error: Some(e.to_string()),
                    }
                }
                (None, None) => unreachable!("every candidate is either cached or evaluated"),
            };
            if reuse[i].is_some() {
                if let Some(v) = record.objective_value.filter(|&v| v > best_value) {
                    best_value = v;
                    best = None;
                    best_cached = Some((index, record.example_set.clone()));
                }
            }
            if let Some(w) = writer.as_mut() {
                w.append(&record)?;
            }
            observed.push((cand, record.objective_value));
            attempts.push(record);
        }
        source.observe(&observed);
    }
    warnings.extend(source.warnings());

    if let Some((index, examples)) = best_cached {
        best = Some((index, evaluate(ctx, &examples, attempt_seed(seed, index))?));
    }
    let (best_attempt, best_model, best_scores, winning_batch) = match best {
        Some((i, ev)) => (Some(i), ev.model, ev.scores, Some(ev.batch)),
        None => (None, ctx.baseline.model.clone(), baseline_scores.clone(), None),
    };
    let best_value = best_scores.get(&objective).unwrap_or(best_value);
    Ok(OptimizationResult {
        setting: setting.clone(),
        objective,
        baseline_scores,
        baseline_value,
        best_model,
        best_scores,
        best_value,
        best_attempt,
        winning_batch,
        attempts,
        warnings,
    })
}

/// Seed for one setting of a sweep, independent of the other settings.
pub fn setting_seed(seed: u64, setting: &Setting) -> u64 {
    seed::derive(seed, &[seed::fnv64(setting.key().as_bytes())])
}

/// Runs every setting (in parallel with the `parallel` feature). A failing
/// setting does not stop the others. Results are in `settings` order.
pub fn sweep(
    ctx: &SearchContext,
    settings: &[Setting],
    budget: Budget,
    seed: u64,
    manifest_dir: Option<&Path>,
) -> Vec<Result<OptimizationResult, SearchError>> {
    par_map(settings, |_, s| {
        let manifest = manifest_dir.map(|d| d.join(format!("attempts_{}.jsonl", s.key())));
        let r = run_setting(ctx, s, budget, setting_seed(seed, s), manifest.as_deref());
        if let Err(e) = &r {
            tracing::error!(setting = %s, error = %e, "setting failed");
        }
        r
    })
}
