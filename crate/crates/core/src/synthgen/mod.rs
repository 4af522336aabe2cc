//! Synthetic-text generator backends.
//!
//! A generator receives an [`ExampleSet`] (training messages of one class)
//! and returns a [`SyntheticBatch`] of new texts labeled with that class.
//! Backends: [`MockGenerator`] (deterministic, offline), [`EdaGenerator`]
//! (token-level augmentation) and, with the `llm` feature, an HTTP client for
//! chat-completion endpoints.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ClassId, LabeledDataset, Message};
use crate::seed::Fnv64;

mod eda;
#[cfg(feature = "llm")]
mod llm;
mod prompt;

pub use eda::{eda_augment, load_synonyms, parse_synonyms, EdaGenerator, EdaParams, SynonymTable};
#[cfg(feature = "llm")]
pub use llm::{AuditRecord, LlmConfig, LlmGenerator, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL};
pub use prompt::{build_prompt, DEFAULT_TEMPLATE};

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("example {0:?} is not in the train partition")]
    UnknownExample(String),
    #[error("example {id:?} belongs to {actual:?}, not {expected:?}")]
    WrongClass { id: String, expected: String, actual: String },
    #[error("example set is empty")]
    EmptyExamples,
    #[error("requested count must be at least 1")]
    ZeroCount,
    #[error("prompt template: {0}")]
    Template(String),
    #[error("generator endpoint failed after {attempts} attempt(s): {reason}")]
    Retryable { attempts: u32, reason: String },
    #[error("generator backend: {0}")]
    Backend(String),
    #[error("invalid generator parameters: {0}")]
    Params(String),
}

/// Training messages of a single class handed to a generator as examples.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExampleSet {
    pub class: ClassId,
    pub message_ids: BTreeSet<String>,
}

impl ExampleSet {
    pub fn new(class: ClassId, ids: impl IntoIterator<Item = String>) -> Self {
        ExampleSet {
            class,
            message_ids: ids.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.message_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.message_ids.is_empty()
    }

    /// Looks up example texts in `train`, in id order.
    pub fn resolve(&self, train: &LabeledDataset) -> Result<Vec<String>, GenError> {
        if self.message_ids.is_empty() {
            return Err(GenError::EmptyExamples);
        }
        let index: std::collections::HashMap<&str, &Message> =
            train.messages().iter().map(|m| (m.id.as_str(), m)).collect();
        self.message_ids
            .iter()
            .map(|id| {
                let m = index.get(id.as_str()).ok_or_else(|| GenError::UnknownExample(id.clone()))?;
                if m.label != self.class {
                    return Err(GenError::WrongClass {
                        id: id.clone(),
                        expected: self.class.to_string(),
                        actual: m.label.to_string(),
                    });
                }
                Ok(m.text.clone())
            })
            .collect()
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv64::new();
        h.field(self.class.as_str().as_bytes());
        for id in &self.message_ids {
            h.field(id.as_bytes());
        }
        h.finish()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBatch {
    pub batch_id: String,
    pub class: ClassId,
    pub texts: Vec<String>,
    pub generator: String,
    pub source: ExampleSet,
}

impl SyntheticBatch {
    /// Texts as labeled messages with ids `<batch_id>:<index>`.
    pub fn messages(&self) -> impl Iterator<Item = Message> + '_ {
        self.texts
            .iter()
            .enumerate()
            .map(|(i, t)| Message::new(format!("{}:{i}", self.batch_id), t.clone(), self.class.clone()))
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }
}

/// Deterministic batch id from backend, examples, count and seed.
pub fn batch_id(generator: &str, examples: &ExampleSet, count: usize, seed: u64) -> String {
    let mut h = Fnv64::new();
    h.field(generator.as_bytes())
        .write(&examples.fingerprint().to_le_bytes())
        .write(&(count as u64).to_le_bytes())
        .write(&seed.to_le_bytes());
    format!("{generator}-{:016x}", h.finish())
}

pub trait Generator: Send + Sync {
    fn id(&self) -> &str;

    /// Produces at most `count` texts from the example texts (in id order).
    fn generate(&self, examples: &ExampleSet, texts: &[String], count: usize, seed: u64) -> Result<SyntheticBatch, GenError>;
}

fn check_request(examples: &ExampleSet, texts: &[String], count: usize) -> Result<(), GenError> {
    if count == 0 {
        return Err(GenError::ZeroCount);
    }
    if examples.is_empty() || texts.is_empty() {
        return Err(GenError::EmptyExamples);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MockMode {
    /// `"<example text> [syn k]"`, cycling through the examples.
    #[default]
    Echo,
    /// Always returns an empty batch.
    Empty,
}

#[derive(Clone, Debug, Default)]
pub struct MockGenerator {
    pub mode: MockMode,
}

impl MockGenerator {
    pub fn echo() -> Self {
        MockGenerator { mode: MockMode::Echo }
    }

    pub fn empty() -> Self {
        MockGenerator { mode: MockMode::Empty }
    }
}

impl Generator for MockGenerator {
    fn id(&self) -> &str {
        match self.mode {
            MockMode::Echo => "mock",
            MockMode::Empty => "mock-empty",
        }
    }

    fn generate(&self, examples: &ExampleSet, texts: &[String], count: usize, seed: u64) -> Result<SyntheticBatch, GenError> {
        check_request(examples, texts, count)?;
        let out = match self.mode {
            MockMode::Echo => (0..count)
                .map(|k| format!("{} [syn {}]", texts[k % texts.len()], k + 1))
                .collect(),
            MockMode::Empty => Vec::new(),
        };
        Ok(SyntheticBatch {
            batch_id: batch_id(self.id(), examples, count, seed),
            class: examples.class.clone(),
            texts: out,
            generator: self.id().to_string(),
            source: examples.clone(),
        })
    }
}

/// Sampling parameters sent with every chat-completion request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
}

impl Default for LlmParams {
    fn default() -> Self {
        LlmParams {
            temperature: 0.7,
            max_tokens: 550,
            top_p: 0.5,
            frequency_penalty: 0.3,
            presence_penalty: 0.0,
        }
    }
}

impl LlmParams {
    pub fn validate(&self) -> Result<(), GenError> {
        if !(self.temperature >= 0.0) {
            return Err(GenError::Params("temperature must be >= 0".into()));
        }
        if self.max_tokens < 1 {
            return Err(GenError::Params("max_tokens must be >= 1".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GenError::Params("top_p must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// How many texts to request for one attempt: `per_example` per example,
/// capped at `cap`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationBudget {
    pub per_example: usize,
    pub cap: usize,
}

impl Default for GenerationBudget {
    fn default() -> Self {
        GenerationBudget {
            per_example: 10,
            cap: 200,
        }
    }
}

impl GenerationBudget {
    pub fn count_for(&self, examples: usize) -> usize {
        (self.per_example * examples).min(self.cap).max(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendKind {
    Mock,
    MockEmpty,
    Eda,
    Llm,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Mock => "mock",
            BackendKind::MockEmpty => "mock-empty",
            BackendKind::Eda => "eda",
            BackendKind::Llm => "llm",
        })
    }
}

impl std::str::FromStr for BackendKind {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, GenError> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "mock-empty" => Ok(BackendKind::MockEmpty),
            "eda" => Ok(BackendKind::Eda),
            "llm" => Ok(BackendKind::Llm),
            other => Err(GenError::Params(format!("unknown backend {other:?}"))),
        }
    }
}

/// Resolves the examples against `train` and runs the backend.
pub fn generate(
    backend: &dyn Generator,
    train: &LabeledDataset,
    examples: &ExampleSet,
    count: usize,
    seed: u64,
) -> Result<SyntheticBatch, GenError> {
    let texts = examples.resolve(train)?;
    let batch = backend.generate(examples, &texts, count, seed)?;
    debug_assert!(batch.texts.len() <= count);
    debug_assert_eq!(batch.class, examples.class);
    Ok(batch)
}
