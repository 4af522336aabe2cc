mod common;

use std::collections::HashSet;

use synthsearch::metrics::{CbaVariant, MetricKind};
use synthsearch::search::*;
use synthsearch::synthgen::{ExampleSet, GenError, GenerationBudget, Generator, MockGenerator, SyntheticBatch};
use synthsearch::toy;

fn run(strategy: StrategyKind, gen: &dyn Generator, seed: u64, attempts: usize) -> OptimizationResult {
    let ws = common::workspace(&toy::two_class(), seed);
    let base = common::baseline(&ws);
    let spec = common::spec();
    let params = common::quick_params();
    let ctx = ws.context(&spec, gen, &params, GenerationBudget::default(), CbaVariant::Printed, &[], &base);
    let class = ws.split.train.schema()[0].clone();
    run_setting(&ctx, &Setting::new(strategy, MetricKind::Cr, class), Budget::attempts(attempts), seed, None).unwrap()
}

#[test]
fn never_worse_and_objective_consistent() {
    for strategy in StrategyKind::ALL {
        for seed in 0..3 {
            let r = run(strategy, &MockGenerator::echo(), seed, 8);
            assert!(r.best_value >= r.baseline_value);
            let max_attempt = r.attempts.iter().filter_map(|a| a.objective_value).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(r.best_value, r.baseline_value.max(max_attempt));
            assert_eq!(r.winning_batch.is_none(), r.best_attempt.is_none());
            for (i, a) in r.attempts.iter().enumerate() {
                assert_eq!(a.attempt_index, i);
                let scores = a.scores.as_ref().unwrap();
                assert_eq!(a.objective_value, scores.get(&r.objective));
            }
        }
    }
}

#[test]
fn empty_batches_keep_the_baseline() {
    for strategy in StrategyKind::ALL {
        let r = run(strategy, &MockGenerator::empty(), 4, 6);
        assert_eq!(r.best_value, r.baseline_value);
        assert!(r.winning_batch.is_none());
        assert_eq!(r.best_scores, r.baseline_scores);
    }
}

#[test]
fn budget_of_one_gives_one_record() {
    for strategy in StrategyKind::ALL {
        assert_eq!(run(strategy, &MockGenerator::echo(), 1, 1).attempts.len(), 1);
    }
}

#[test]
fn deterministic_given_seed() {
    for strategy in StrategyKind::ALL {
        let a = run(strategy, &MockGenerator::echo(), 9, 6);
        let b = run(strategy, &MockGenerator::echo(), 9, 6);
        assert_eq!(a.attempts, b.attempts);
        assert_eq!(a.best_model, b.best_model);
        assert_eq!(a.best_scores, b.best_scores);
    }
}

/// Fails every other call (by seed parity).
struct Flaky;

impl Generator for Flaky {
    fn id(&self) -> &str {
        "flaky"
    }

    fn generate(&self, examples: &ExampleSet, texts: &[String], count: usize, seed: u64) -> Result<SyntheticBatch, GenError> {
        if seed % 2 == 0 {
            return Err(GenError::Retryable {
                attempts: 3,
                reason: "HTTP 503".into(),
            });
        }
        MockGenerator::echo().generate(examples, texts, count, seed)
    }
}

#[test]
fn failed_attempts_consume_budget() {
    let r = run(StrategyKind::Sw, &Flaky, 2, 10);
    assert_eq!(r.attempts.len(), 10);
    let failed: Vec<_> = r.attempts.iter().filter(|a| a.error.is_some()).collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|a| a.scores.is_none() && a.objective_value.is_none()));
    assert!(failed[0].error.as_ref().unwrap().contains("503"));
}

#[test]
fn ga_never_repeats_a_chromosome() {
    let r = run(StrategyKind::Ga, &MockGenerator::echo(), 5, 30);
    let sets: HashSet<_> = r.attempts.iter().map(|a| a.example_set.clone()).collect();
    assert_eq!(sets.len(), r.attempts.len());
}

#[test]
fn unknown_class_is_an_error() {
    let ws = common::workspace(&toy::two_class(), 0);
    let base = common::baseline(&ws);
    let spec = common::spec();
    let params = common::quick_params();
    let gen = MockGenerator::echo();
    let ctx = ws.context(&spec, &gen, &params, GenerationBudget::default(), CbaVariant::Printed, &[], &base);
    let bad = Setting::new(StrategyKind::Sw, MetricKind::Cr, "nope");
    assert!(matches!(run_setting(&ctx, &bad, Budget::attempts(3), 0, None), Err(SearchError::UnknownClass(_))));
}

#[test]
fn resume_from_manifest_reproduces_the_run() {
    let ws = common::workspace(&toy::two_class(), 3);
    let base = common::baseline(&ws);
    let spec = common::spec();
    let params = common::quick_params();
    let gen = MockGenerator::echo();
    let ctx = ws.context(&spec, &gen, &params, GenerationBudget::default(), CbaVariant::Printed, &[], &base);
    let setting = Setting::new(StrategyKind::Hsw, MetricKind::Oba, ws.split.train.schema()[1].clone());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("attempts.jsonl");

    let full = run_setting(&ctx, &setting, Budget::attempts(9), 11, Some(&path)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert_eq!(load_attempts(&path).unwrap(), full.attempts);

    // interrupted after four attempts, with a torn fifth line
    let partial: Vec<&str> = text.lines().take(4).collect();
    std::fs::write(&path, format!("{}\n{{\"attempt_in", partial.join("\n"))).unwrap();
    let resumed = run_setting(&ctx, &setting, Budget::attempts(9), 11, Some(&path)).unwrap();
    assert_eq!(resumed.attempts, full.attempts);
    assert_eq!(resumed.best_scores, full.best_scores);
    assert_eq!(resumed.best_model, full.best_model);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
}

#[test]
fn sweep_covers_the_grid_and_isolates_failures() {
    let ws = common::workspace(&toy::two_class(), 0);
    let base = common::baseline(&ws);
    let spec = common::spec();
    let params = common::quick_params();
    let gen = MockGenerator::echo();
    let ctx = ws.context(&spec, &gen, &params, GenerationBudget::default(), CbaVariant::Printed, &[], &base);
    let mut classes = ws.split.train.schema().to_vec();
    let settings = grid(&StrategyKind::ALL, &MetricKind::ALL, &classes);
    assert_eq!(settings.len(), 24);
    assert_eq!(grid(&[StrategyKind::Sw], &MetricKind::ALL, &classes).len(), 8);

    classes.push("ghost".into());
    let settings = grid(&[StrategyKind::Sw], &[MetricKind::Cr], &classes);
    let results = sweep(&ctx, &settings, Budget::attempts(2), 0, None);
    assert_eq!(results.len(), 3);
    assert!(results[0].is_ok() && results[1].is_ok());
    assert!(results[2].is_err());
}

#[test]
fn wall_clock_budget_stops_early() {
    let ws = common::workspace(&toy::two_class(), 0);
    let base = common::baseline(&ws);
    let spec = common::spec();
    let params = common::quick_params();
    let gen = MockGenerator::echo();
    let ctx = ws.context(&spec, &gen, &params, GenerationBudget::default(), CbaVariant::Printed, &[], &base);
    let setting = Setting::new(StrategyKind::Sw, MetricKind::Cr, ws.split.train.schema()[0].clone());
    let budget = Budget {
        max_attempts: 1000,
        wall_clock: Some(std::time::Duration::ZERO),
    };
    let r = run_setting(&ctx, &setting, budget, 0, None).unwrap();
    assert!(r.attempts.is_empty());
    assert_eq!(r.best_value, r.baseline_value);
    assert!(r.warnings.iter().any(|w| w.contains("wall-clock")));
}
