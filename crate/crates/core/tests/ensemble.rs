mod common;

use synthsearch::ensemble::*;
use synthsearch::knowledge::{build_map, query_top_k, summarize_best, KnowledgeMap, MapProvenance};
use synthsearch::metrics::{CbaVariant, Delta, MetricId, MetricKind};
use synthsearch::pipeline::Workspace;
use synthsearch::search::{grid, sweep, Budget, StrategyKind, StrategyParams};
use synthsearch::synthgen::{GenerationBudget, Generator, MockGenerator};
use synthsearch::toy;

fn env<'a>(ws: &'a Workspace, spec: &'a synthsearch::classifier::ModelSpec, gen: &'a dyn Generator, params: &'a StrategyParams) -> EnsembleEnv<'a> {
    EnsembleEnv {
        split: &ws.split,
        space: &ws.space,
        spec,
        generator: gen,
        projections: &ws.projections,
        gen_budget: GenerationBudget::default(),
        cba_variant: CbaVariant::Printed,
        params,
    }
}

fn objectives(ws: &Workspace) -> Vec<Objective> {
    ws.split
        .train
        .schema()
        .iter()
        .map(|c| Objective {
            target: MetricId::Cr(c.clone()),
            weight: 1.0,
            min_threshold: None,
        })
        .collect()
}

#[test]
fn sweep_first_phase_builds_the_map() {
    let ws = common::workspace(&toy::two_class(), 1);
    let spec = common::spec();
    let params = common::quick_params();
    let gen = MockGenerator::echo();
    let obj = objectives(&ws);
    let cfg = EnsembleConfig {
        phases: 1,
        strategies: vec![StrategyKind::Sw, StrategyKind::Ga],
        metrics: vec![MetricKind::Cr],
        sweep_budget: 3,
        ..EnsembleConfig::default()
    };
    let out = run_ensemble(
        &env(&ws, &spec, &gen, &params),
        &ObjectivePool::new(&obj, 0).unwrap(),
        &AssessmentFn::from_objectives(&obj).unwrap(),
        &cfg,
        None,
        MapProvenance::default(),
    )
    .unwrap();
    assert_eq!(out.map.len(), 4);
    assert_eq!(out.pool.len(), 1);
    assert_eq!(out.log[0].mode, PhaseMode::Sweep);
}

#[test]
fn empty_batches_leave_everything_at_baseline() {
    let ws = common::workspace(&toy::two_class(), 2);
    let spec = common::spec();
    let params = common::quick_params();
    let gen = MockGenerator::empty();
    let obj = objectives(&ws);
    let assess = AssessmentFn::from_objectives(&obj).unwrap();
    let cfg = EnsembleConfig {
        phases: 3,
        phase_budget: 12,
        sweep_budget: 2,
        ..EnsembleConfig::default()
    };
    let out = run_ensemble(&env(&ws, &spec, &gen, &params), &ObjectivePool::new(&obj, 5).unwrap(), &assess, &cfg, None, MapProvenance::default()).unwrap();
    assert_eq!(out.pool.len(), 3);
    assert!(out.accepted.is_empty());
    for e in &out.pool.entries {
        assert_eq!(e.scores, out.baseline_scores);
    }
    let s0 = assess.eval(&out.baseline_scores);
    assert!(out.log.iter().all(|r| r.assessment == s0));
    // the sweep map is all zeros, so later phases fall back
    assert!(out.log[1..].iter().all(|r| r.mode == PhaseMode::Fallback));
    let sel = select_final(&out.pool, &assess, &[]).unwrap();
    assert_eq!(out.pool.entries[sel.index].scores, out.baseline_scores);
}

#[test]
fn map_phases_follow_top_k_and_keep_best_s_monotone() {
    let ws = common::workspace(&toy::fifteen(), 0);
    let spec = common::spec();
    let params = common::quick_params();
    let gen = MockGenerator::echo();
    let base = common::baseline(&ws);
    let ctx = ws.context(&spec, &gen, &params, GenerationBudget::default(), CbaVariant::Printed, &[], &base);
    let classes = ws.split.train.schema()[..3].to_vec();
    let settings = grid(&[StrategyKind::Sw], &[MetricKind::Cr, MetricKind::Oba], &classes);
    let results: Vec<_> = sweep(&ctx, &settings, Budget::attempts(3), 0, None).into_iter().map(Result::unwrap).collect();
    let map: KnowledgeMap = build_map(&results, &base.opt_scores, MapProvenance::default()).unwrap();
    assert_eq!(map.len(), 6);
    assert!(!summarize_best(&map, 0.03).cells.is_empty());

    let obj = vec![Objective {
        target: MetricId::Oba,
        weight: 1.0,
        min_threshold: None,
    }];
    let assess = AssessmentFn::from_objectives(&obj).unwrap();
    let cfg = EnsembleConfig {
        phases: 3,
        phase_budget: 9,
        k: 2,
        ..EnsembleConfig::default()
    };
    let expected_first: Vec<String> = query_top_k(&map, &MetricId::Oba, 2).iter().map(|(e, _)| e.setting.to_string()).collect();
    let out = run_ensemble(&env(&ws, &spec, &gen, &params), &ObjectivePool::new(&obj, 0).unwrap(), &assess, &cfg, Some(map), MapProvenance::default()).unwrap();
    assert_eq!(out.pool.len(), 3);
    if !expected_first.is_empty() {
        assert_eq!(out.log[0].mode, PhaseMode::Map);
        assert_eq!(out.log[0].settings, expected_first);
    }
    for r in &out.log {
        assert_eq!(r.allocations.iter().sum::<usize>(), 9);
        assert!(r.allocations.iter().all(|&a| a >= 1));
    }
    let mut running = assess.eval(&out.baseline_scores);
    for r in &out.log {
        let next = running.max(r.assessment);
        assert!(next >= running);
        assert_eq!(r.accepted_batch.is_some(), r.assessment > r.incumbent_assessment && r.best_setting.is_some());
        running = next;
    }
    assert_eq!(out.accepted.len(), out.log.iter().filter(|r| r.accepted_batch.is_some()).count());
    assert!(out.log.iter().all(|r| r.best_delta.cmp_total(&Delta::Finite(0.0)).is_ge()));
}
