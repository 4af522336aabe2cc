//! Token-level augmentation: synonym replacement, random insertion, random
//! swap and random deletion.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{check_request, batch_id, ExampleSet, GenError, Generator, SyntheticBatch};
use crate::corpus::unescape_field;
use crate::seed;

/// Lower-cased word to its synonyms.
pub type SynonymTable = BTreeMap<String, Vec<String>>;

/// Parses `word<TAB>synonym` rows. Repeated words accumulate synonyms.
pub fn parse_synonyms(text: &str) -> Result<SynonymTable, GenError> {
    let mut table = SynonymTable::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (word, syn) = line
            .split_once('\t')
            .ok_or_else(|| GenError::Params(format!("synonym table line {}: expected word<TAB>synonym", i + 1)))?;
        let (word, syn) = (unescape_field(word).to_lowercase(), unescape_field(syn));
        if word.is_empty() || syn.is_empty() {
            return Err(GenError::Params(format!("synonym table line {}: empty field", i + 1)));
        }
        let entry = table.entry(word).or_default();
        if !entry.contains(&syn) {
            entry.push(syn);
        }
    }
    Ok(table)
}

pub fn load_synonyms(path: &Path) -> Result<SynonymTable, GenError> {
    let text = fs::read_to_string(path).map_err(|e| GenError::Params(format!("{}: {e}", path.display())))?;
    parse_synonyms(&text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdaParams {
    pub alpha_sr: f64,
    pub alpha_ri: f64,
    pub alpha_rs: f64,
    pub alpha_rd: f64,
    pub n_aug: usize,
}

impl Default for EdaParams {
    fn default() -> Self {
        EdaParams {
            alpha_sr: 0.1,
            alpha_ri: 0.1,
            alpha_rs: 0.1,
            alpha_rd: 0.1,
            n_aug: 4,
        }
    }
}

impl EdaParams {
    pub fn identity(n_aug: usize) -> Self {
        EdaParams {
            alpha_sr: 0.0,
            alpha_ri: 0.0,
            alpha_rs: 0.0,
            alpha_rd: 0.0,
            n_aug,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        for (name, a) in [
            ("alpha_sr", self.alpha_sr),
            ("alpha_ri", self.alpha_ri),
            ("alpha_rs", self.alpha_rs),
            ("alpha_rd", self.alpha_rd),
        ] {
            if !(0.0..=1.0).contains(&a) {
                return Err(GenError::Params(format!("{name} must be in [0, 1], got {a}")));
            }
        }
        Ok(())
    }

    fn is_identity(&self) -> bool {
        self.alpha_sr == 0.0 && self.alpha_ri == 0.0 && self.alpha_rs == 0.0 && self.alpha_rd == 0.0
    }
}

fn applications(alpha: f64, len: usize) -> usize {
    if alpha <= 0.0 {
        0
    } else {
        (alpha * len as f64 - 1e-9).ceil().max(1.0) as usize
    }
}

fn synonyms_of<'a>(table: &'a SynonymTable, word: &str) -> Option<&'a [String]> {
    table.get(&word.to_lowercase()).map(Vec::as_slice).filter(|s| !s.is_empty())
}

fn synonym_replacement<R: Rng>(tokens: &mut [String], n: usize, table: &SynonymTable, rng: &mut R) {
    let mut positions: Vec<usize> = (0..tokens.len()).filter(|&i| synonyms_of(table, &tokens[i]).is_some()).collect();
    positions.shuffle(rng);
    for &i in positions.iter().take(n) {
        let syns = synonyms_of(table, &tokens[i]).expect("filtered above");
        tokens[i] = syns.choose(rng).expect("non-empty").clone();
    }
}

fn random_insertion<R: Rng>(tokens: &mut Vec<String>, n: usize, table: &SynonymTable, rng: &mut R) {
    for _ in 0..n {
        let candidates: Vec<&[String]> = tokens.iter().filter_map(|t| synonyms_of(table, t)).collect();
        let Some(syns) = candidates.choose(rng) else {
            return;
        };
        let word = syns.choose(rng).expect("non-empty").clone();
        let at = rng.gen_range(0..=tokens.len());
        tokens.insert(at, word);
    }
}

fn random_swap<R: Rng>(tokens: &mut [String], n: usize, rng: &mut R) {
    if tokens.len() < 2 {
        return;
    }
    for _ in 0..n {
        let i = rng.gen_range(0..tokens.len());
        let mut j = rng.gen_range(0..tokens.len() - 1);
        if j >= i {
            j += 1;
        }
        tokens.swap(i, j);
    }
}

fn random_deletion<R: Rng>(tokens: &mut Vec<String>, p: f64, rng: &mut R) {
    if tokens.len() <= 1 {
        return;
    }
    let kept: Vec<String> = tokens.iter().filter(|_| rng.gen::<f64>() >= p).cloned().collect();
    if kept.is_empty() {
        let keep = tokens.choose(rng).expect("non-empty").clone();
        *tokens = vec![keep];
    } else {
        *tokens = kept;
    }
}

/// Produces `params.n_aug` variants of `text`. Each variant applies, in order,
/// ⌈α·len⌉ synonym replacements, ⌈α·len⌉ random insertions, ⌈α·len⌉ random
/// swaps and per-token deletion with probability `alpha_rd` (at least one
/// token always survives).
pub fn eda_augment(text: &str, params: &EdaParams, synonyms: &SynonymTable, seed: u64) -> Vec<String> {
    let original: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    if original.is_empty() || params.is_identity() {
        return vec![text.to_string(); params.n_aug];
    }
    if synonyms.is_empty() && (params.alpha_sr > 0.0 || params.alpha_ri > 0.0) {
        warn!("synonym table is empty; synonym replacement and insertion are no-ops");
    }
    let len = original.len();
    (0..params.n_aug)
        .map(|v| {
            let mut rng = seed::rng(seed::derive(seed, &[v as u64]));
            let mut tokens = original.clone();
            synonym_replacement(&mut tokens, applications(params.alpha_sr, len), synonyms, &mut rng);
            random_insertion(&mut tokens, applications(params.alpha_ri, len), synonyms, &mut rng);
            random_swap(&mut tokens, applications(params.alpha_rs, len), &mut rng);
            if params.alpha_rd > 0.0 {
                random_deletion(&mut tokens, params.alpha_rd, &mut rng);
            }
            tokens.join(" ")
        })
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct EdaGenerator {
    pub params: EdaParams,
    pub synonyms: Arc<SynonymTable>,
}

impl EdaGenerator {
    pub fn new(params: EdaParams, synonyms: SynonymTable) -> Result<Self, GenError> {
        params.validate()?;
        Ok(EdaGenerator {
            params,
            synonyms: Arc::new(synonyms),
        })
    }
}

impl Generator for EdaGenerator {
    fn id(&self) -> &str {
        "eda"
    }

    /// Variants are interleaved across examples (first variant of each example,
    /// then the second, ...) and truncated to `count`.
    fn generate(&self, examples: &ExampleSet, texts: &[String], count: usize, seed: u64) -> Result<SyntheticBatch, GenError> {
        check_request(examples, texts, count)?;
        let per_example = count.div_ceil(texts.len());
        let params = EdaParams {
            n_aug: per_example,
            ..self.params.clone()
        };
        let variants: Vec<Vec<String>> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| eda_augment(t, &params, &self.synonyms, seed::derive(seed, &[i as u64])))
            .collect();
        let mut out = Vec::with_capacity(count);
        'outer: for v in 0..per_example {
            for vs in &variants {
                if out.len() == count {
                    break 'outer;
                }
                out.push(vs[v].clone());
            }
        }
        Ok(SyntheticBatch {
            batch_id: batch_id(self.id(), examples, count, seed),
            class: examples.class.clone(),
            texts: out,
            generator: self.id().to_string(),
            source: examples.clone(),
        })
    }
}
