//! Loading shared state from the output directory and building backends.

use std::path::Path;

use anyhow::Context;
use synthsearch::corpus::{read_split, Split, SPLIT_MANIFEST};
use synthsearch::pipeline::{PipelineError, Workspace};
use synthsearch::seed::Fnv64;
use synthsearch::synthgen::{
    load_synonyms, BackendKind, EdaGenerator, Generator, LlmConfig, LlmGenerator, MockGenerator, SynonymTable,
};

use crate::config::RunConfig;
use crate::{usage, Failure};

pub const SPLIT_DIR: &str = "split";

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn load_split(out: &Path) -> Result<Split, Failure> {
    let dir = out.join(SPLIT_DIR);
    if !dir.join(SPLIT_MANIFEST).is_file() {
        return usage(format!("no split under {}; run `synthsearch ingest` first", dir.display()));
    }
    let (split, _) = read_split(&dir).with_context(|| format!("reading split from {}", dir.display()))?;
    Ok(split)
}

pub fn prepare(cfg: &RunConfig, out: &Path) -> Result<Workspace, Failure> {
    let split = load_split(out)?;
    match Workspace::prepare(split, cfg.embedding.clone(), cfg.projections) {
        Ok(ws) => Ok(ws),
        Err(e @ PipelineError::NoOptimizationSplit) => usage(e.to_string()),
        Err(e) => Err(anyhow::Error::new(e).into()),
    }
}

/// Identity of the split the map was built on.
pub fn dataset_hash(split: &Split) -> u64 {
    let mut h = Fnv64::new();
    for part in [&split.train, &split.opt_test, &split.holdout] {
        h.field(&part.content_hash().to_le_bytes());
    }
    h.finish()
}

pub fn generator(cfg: &RunConfig, out: &Path) -> Result<Box<dyn Generator>, Failure> {
    Ok(match cfg.backend {
        BackendKind::Mock => Box::new(MockGenerator::echo()),
        BackendKind::MockEmpty => Box::new(MockGenerator::empty()),
        BackendKind::Eda => {
            let synonyms = match &cfg.synonyms {
                Some(path) => load_synonyms(path).map_err(|e| Failure::Usage(format!("eda.synonyms: {e}")))?,
                None => SynonymTable::new(),
            };
            Box::new(EdaGenerator::new(cfg.eda.clone(), synonyms).map_err(|e| Failure::Usage(e.to_string()))?)
        }
        BackendKind::Llm => {
            let env = LlmConfig::from_env();
            let endpoint = match (&cfg.llm.endpoint, &env) {
                (Some(e), _) => e.clone(),
                (None, Some(env)) => env.endpoint.clone(),
                (None, None) => {
                    return usage(format!(
                        "the llm backend needs llm.endpoint or ${}",
                        synthsearch::synthgen::ENV_ENDPOINT
                    ))
                }
            };
            let mut lc = LlmConfig::new(endpoint);
            if let Some(env) = env {
                lc.api_key = env.api_key;
                lc.model = env.model;
            }
            if let Some(m) = &cfg.llm.model {
                lc.model = m.clone();
            }
            if let Some(path) = &cfg.llm.template {
                lc.template = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("llm.template {}: {e}", path.display())))?;
            }
            lc.params = cfg.llm.params.clone();
            lc.timeout = cfg.llm.timeout;
            lc.max_in_flight = cfg.llm.max_in_flight;
            lc.max_attempts = cfg.llm.max_attempts;
            lc.audit_log = Some(out.join("llm_audit.jsonl"));
            Box::new(LlmGenerator::new(lc).map_err(|e| Failure::Usage(e.to_string()))?)
        }
    })
}
