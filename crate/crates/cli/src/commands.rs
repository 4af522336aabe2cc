use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use synthsearch::corpus::{load_dataset, stratified_split, write_split, DatasetFormat};
use synthsearch::ensemble::{
    constraints_of, parse_objectives, run_ensemble, select_final, AssessmentFn, EnsembleConfig, EnsembleEnv, EnsembleError,
    ObjectivePool, PhaseMode,
};
use synthsearch::features::{color_points, points_to_tsv, Projection};
use synthsearch::knowledge::{build_map, load_map, report, save_map_string, KnowledgeMap, MapProvenance};
use synthsearch::corpus::ClassId;
use synthsearch::metrics::{confusion, score_vector, ScoreVector};
use synthsearch::pipeline::Workspace;
use synthsearch::search::{grid, sweep as run_sweep, Baseline};

use crate::config::RunConfig;
use crate::workspace::{dataset_hash, generator, prepare, write, SPLIT_DIR};
use crate::{tables, usage, Failure};

pub const MAP_FILE: &str = "map.tsv";

fn baseline_model(cfg: &RunConfig, ws: &Workspace) -> Result<Baseline, Failure> {
    Ok(ws.baseline(&cfg.model, cfg.cba_variant).context("training the baseline model")?)
}

fn holdout_scores(cfg: &RunConfig, ws: &Workspace, model: &synthsearch::classifier::TrainedModel) -> Result<ScoreVector, Failure> {
    let preds = model.predict(&ws.split.holdout, &ws.space).context("scoring holdout")?;
    Ok(score_vector(&ws.split.holdout, &preds, cfg.cba_variant).context("scoring holdout")?)
}

fn json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).context("serializing")?;
    s.push('\n');
    Ok(s)
}

pub fn ingest(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let Some(path) = &cfg.dataset else {
        return usage("ingest needs a dataset (--dataset PATH or `dataset = PATH`)");
    };
    if !path.is_file() {
        return usage(format!("dataset not found: {}", path.display()));
    }
    let ds = load_dataset(path, DatasetFormat::Tsv).with_context(|| format!("loading {}", path.display()))?;
    let split = stratified_split(&ds, &cfg.ratios, cfg.seed).map_err(|e| Failure::Usage(e.to_string()))?;
    write_split(&out.join(SPLIT_DIR), &split, &cfg.ratios, cfg.seed).context("writing the split")?;
    let table = tables::class_sizes(&split);
    write(&out.join("class_sizes.md"), &table)?;
    print!("{table}");
    Ok(())
}

pub fn baseline(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let ws = prepare(cfg, out)?;
    let base = baseline_model(cfg, &ws)?;
    let holdout = holdout_scores(cfg, &ws, &base.model)?;
    let dir = out.join("baseline");
    write(&dir.join("model.json"), json(&base.model)?)?;
    write(&dir.join("scores_opt.tsv"), base.opt_scores.to_tsv())?;
    write(&dir.join("scores_holdout.tsv"), holdout.to_tsv())?;

    let mut md = String::new();
    for (name, part) in [("optimization-test", &ws.split.opt_test), ("holdout", &ws.split.holdout)] {
        let preds = base.model.predict(part, &ws.space).context("predicting")?;
        let counts = confusion(part, &preds).context("scoring")?;
        writeln!(md, "## Original model on {name}\n\n{}", tables::model_table(&ws.split, &counts, cfg.cba_variant)).unwrap();
    }
    write(&dir.join("table.md"), &md)?;
    print!("{md}");
    Ok(())
}

fn grid_classes(cfg: &RunConfig, ws: &Workspace) -> Result<Vec<ClassId>, Failure> {
    let schema = ws.split.train.schema();
    match &cfg.classes {
        None => Ok(schema.to_vec()),
        Some(list) => {
            if let Some(c) = list.iter().find(|c| !schema.contains(c)) {
                return usage(format!("class {c:?} is not in the dataset schema"));
            }
            Ok(list.clone())
        }
    }
}

pub fn sweep(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let ws = prepare(cfg, out)?;
    let gen = generator(cfg, out)?;
    let base = baseline_model(cfg, &ws)?;
    let ctx = ws.context(&cfg.model, gen.as_ref(), &cfg.params, cfg.gen_budget, cfg.cba_variant, &[], &base);
    let settings = grid(&cfg.strategies, &cfg.metrics, &grid_classes(cfg, &ws)?);
    let dir = out.join("sweep");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    tracing::info!(settings = settings.len(), budget = cfg.budget.max_attempts, "sweeping");
    let results = run_sweep(&ctx, &settings, cfg.budget, cfg.seed, Some(&dir));

    let mut table = String::from("setting\tstrategy\tmetric\tclass\tattempts\tfailed_attempts\tbaseline_value\tbest_value\tbest_attempt\twinning_batch\n");
    let mut errors = String::new();
    let mut warnings = String::new();
    let mut ok = Vec::new();
    for (setting, r) in settings.iter().zip(results) {
        match r {
            Ok(r) => {
                let failed = r.attempts.iter().filter(|a| a.error.is_some()).count();
                writeln!(
                    table,
                    "{}\t{}\t{}\t{}\t{}\t{failed}\t{}\t{}\t{}\t{}",
                    setting.key(),
                    setting.strategy,
                    setting.metric,
                    setting.class,
                    r.attempts.len(),
                    r.baseline_value,
                    r.best_value,
                    r.best_attempt.map_or("-".into(), |i| i.to_string()),
                    r.winning_batch.as_ref().map_or("-", |b| b.batch_id.as_str()),
                )
                .unwrap();
                for w in &r.warnings {
                    tracing::warn!("{}: {w}", setting.key());
                    writeln!(warnings, "{}\t{w}", setting.key()).unwrap();
                }
                ok.push(r);
            }
            Err(e) => {
                tracing::error!("{}: {e}", setting.key());
                writeln!(errors, "{}\t{e}", setting.key()).unwrap();
            }
        }
    }
    write(&dir.join("results.tsv"), &table)?;
    write(&dir.join("warnings.tsv"), &warnings)?;
    write(&dir.join("errors.tsv"), &errors)?;
    write(&out.join("baseline").join("scores_opt.tsv"), base.opt_scores.to_tsv())?;

    let provenance = MapProvenance {
        dataset_hash: dataset_hash(&ws.split),
        budget: cfg.budget.max_attempts,
        config_hash: cfg.settings.search_hash(),
    };
    let map = build_map(&ok, &base.opt_scores, provenance).context("building the knowledge map")?;
    write(&out.join(MAP_FILE), save_map_string(&map))?;
    let rendered = report::render(&map, cfg.band);
    rendered.write(&out.join("report")).context("writing the report")?;
    println!("{} of {} settings completed; map written to {}", ok.len(), settings.len(), out.join(MAP_FILE).display());
    let failed = settings.len() - ok.len();
    if failed > 0 {
        return Err(anyhow::anyhow!("{failed} settings failed (see {}); rerun to resume", dir.join("errors.tsv").display()).into());
    }
    Ok(())
}

fn read_map(path: &Path) -> Result<KnowledgeMap, Failure> {
    if !path.is_file() {
        return usage(format!("knowledge map not found: {}", path.display()));
    }
    Ok(load_map(path).with_context(|| format!("loading {}", path.display()))?)
}

pub fn report(cfg: &RunConfig, out: &Path, map: Option<&Path>) -> Result<(), Failure> {
    let path = map.map_or_else(|| out.join(MAP_FILE), Path::to_path_buf);
    let map = read_map(&path)?;
    let rendered = report::render(&map, cfg.band);
    let files = rendered.write(&out.join("report")).context("writing the report")?;
    print!("{}", rendered.markdown());
    tracing::info!(files = files.len(), "report written");
    Ok(())
}

fn mode_name(m: PhaseMode) -> &'static str {
    match m {
        PhaseMode::Sweep => "sweep",
        PhaseMode::Map => "map",
        PhaseMode::Fallback => "fallback",
    }
}

fn or_dash(s: Option<&str>) -> &str {
    s.filter(|s| !s.is_empty()).unwrap_or("-")
}

pub fn improve(cfg: &RunConfig, out: &Path, map: Option<&Path>, no_map: bool, force: bool) -> Result<(), Failure> {
    let Some(obj_path) = &cfg.objectives else {
        return usage("improve needs an objectives file (--objectives PATH)");
    };
    let ws = prepare(cfg, out)?;
    let text = std::fs::read_to_string(obj_path).map_err(|e| Failure::Usage(format!("objectives {}: {e}", obj_path.display())))?;
    let objectives = match parse_objectives(&text, ws.split.train.schema()) {
        Ok(o) => o,
        Err(e @ EnsembleError::Objectives { .. }) => return usage(format!("{}: {e}", obj_path.display())),
        Err(e) => return Err(anyhow::Error::new(e).into()),
    };
    let pool = ObjectivePool::new(&objectives, cfg.seed).map_err(|e| Failure::Usage(e.to_string()))?;
    let assessment = AssessmentFn::from_objectives(&objectives).map_err(|e| Failure::Usage(e.to_string()))?;
    let hash = dataset_hash(&ws.split);

    let map = if no_map {
        None
    } else {
        let default = out.join(MAP_FILE);
        let path = match map {
            Some(p) => Some(p.to_path_buf()),
            None => default.is_file().then_some(default),
        };
        match path {
            Some(p) => {
                let m = read_map(&p)?;
                let warnings = m
                    .check_compatible(ws.split.train.schema(), hash, force)
                    .map_err(|e| Failure::Usage(e.to_string()))?;
                for w in warnings {
                    tracing::warn!("{w}");
                }
                Some(m)
            }
            None => None,
        }
    };

    let gen = generator(cfg, out)?;
    let env = EnsembleEnv {
        split: &ws.split,
        space: &ws.space,
        spec: &cfg.model,
        generator: gen.as_ref(),
        projections: &ws.projections,
        gen_budget: cfg.gen_budget,
        cba_variant: cfg.cba_variant,
        params: &cfg.params,
    };
    let ecfg = EnsembleConfig {
        phases: cfg.phases,
        phase_budget: cfg.phase_budget,
        k: cfg.k,
        strategies: cfg.strategies.clone(),
        metrics: cfg.metrics.clone(),
        sweep_budget: cfg.sweep_budget,
        seed: cfg.seed,
    };
    ecfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let provenance = MapProvenance {
        dataset_hash: hash,
        budget: cfg.sweep_budget,
        config_hash: cfg.settings.search_hash(),
    };
    let outcome = run_ensemble(&env, &pool, &assessment, &ecfg, map, provenance).context("running the ensemble")?;
    let constraints = constraints_of(&objectives);
    let sel = select_final(&outcome.pool, &assessment, &constraints).context("the model pool is empty")?;
    let chosen = &outcome.pool.entries[sel.index];
    let holdout = holdout_scores(cfg, &ws, &chosen.model)?;

    let dir = out.join("improve");
    let mut log = String::from(
        "phase\tobjective\tmode\tsettings\tallocations\tbest_setting\tbest_delta\tincumbent_assessment\tassessment\taccepted_batch\tfailed_settings\n",
    );
    for r in &outcome.log {
        let allocs: Vec<String> = r.allocations.iter().map(usize::to_string).collect();
        writeln!(
            log,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.phase,
            r.objective,
            mode_name(r.mode),
            r.settings.join(","),
            allocs.join(","),
            or_dash(r.best_setting.as_deref()),
            r.best_delta,
            r.incumbent_assessment,
            r.assessment,
            or_dash(r.accepted_batch.as_deref()),
            or_dash(Some(&r.failed_settings.join(","))),
        )
        .unwrap();
        for w in &r.warnings {
            tracing::warn!("phase {}: {w}", r.phase);
        }
    }
    let mut pool_tsv = format!("entry\tphase\tsetting\tassessment\t{}\n", outcome.baseline_scores.header_tsv());
    for (i, e) in outcome.pool.entries.iter().enumerate() {
        let setting = e.setting.as_ref().map(|s| s.key());
        writeln!(pool_tsv, "{i}\t{}\t{}\t{}\t{}", e.phase, or_dash(setting.as_deref()), e.assessment, e.scores.row_tsv()).unwrap();
    }
    let mut selection = format!(
        "entry = {}\nphase = {}\nsetting = {}\nassessment = {}\nbaseline_assessment = {}\n",
        sel.index,
        chosen.phase,
        or_dash(chosen.setting.as_ref().map(|s| s.key()).as_deref()),
        sel.assessment,
        assessment.eval(&outcome.baseline_scores),
    );
    for v in &sel.violations {
        tracing::warn!("selected model misses {} >= {} (has {})", v.metric, v.threshold, v.value);
        writeln!(selection, "violation = {} {} < {}", v.metric, v.value, v.threshold).unwrap();
    }

    write(&dir.join("phases.tsv"), &log)?;
    write(&dir.join("pool.tsv"), &pool_tsv)?;
    write(&dir.join("selection.txt"), &selection)?;
    write(&dir.join("model.json"), json(&chosen.model)?)?;
    write(&dir.join("scores_opt.tsv"), chosen.scores.to_tsv())?;
    write(&dir.join("scores_holdout.tsv"), holdout.to_tsv())?;
    write(&dir.join("baseline_scores_opt.tsv"), outcome.baseline_scores.to_tsv())?;
    write(&dir.join(MAP_FILE), save_map_string(&outcome.map))?;
    print!("{selection}");
    Ok(())
}

fn parse_projection(s: &str, dims: usize) -> Result<Projection, Failure> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b] = parts[..] else {
        return usage(format!("--projection expects A,B, got {s:?}"));
    };
    let (Ok(a), Ok(b)) = (a.parse(), b.parse()) else {
        return usage(format!("--projection expects two dimension indices, got {s:?}"));
    };
    Projection::new(a, b, dims).map_err(|e| Failure::Usage(e.to_string()))
}

pub fn dump_projection(cfg: &RunConfig, out: &Path, class: &str, projection: Option<&str>) -> Result<(), Failure> {
    let ws = prepare(cfg, out)?;
    let class = ClassId::new(class);
    if !ws.split.train.schema().contains(&class) {
        return usage(format!("class {class:?} is not in the dataset schema"));
    }
    let projections = match projection {
        Some(p) => vec![parse_projection(p, ws.space.dims())?],
        None => ws.projections.clone(),
    };
    let base = baseline_model(cfg, &ws)?;
    let preds = base.model.predict(&ws.split.opt_test, &ws.space).context("predicting")?;
    let dir = out.join("projections");
    for p in projections {
        let points = color_points(&ws.split, &class, &preds, p, &ws.space).context("projecting")?;
        let path = dir.join(format!("{}_{}_{}.tsv", class, p.dim_a, p.dim_b));
        write(&path, points_to_tsv(&points))?;
        println!("{}", path.display());
    }
    Ok(())
}
