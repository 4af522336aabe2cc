//! Blocking client for OpenAI-style chat-completion endpoints.
//!
//! One request per [`Generator::generate`] call: the prompt goes in a single
//! user message, the completion is split into texts on blank lines. Every call
//! appends one JSON line to the audit log when one is configured.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::warn;

use super::{batch_id, build_prompt, check_request, ExampleSet, GenError, Generator, LlmParams, SyntheticBatch, DEFAULT_TEMPLATE};

pub const ENV_ENDPOINT: &str = "SYNTHSEARCH_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "SYNTHSEARCH_LLM_API_KEY";
pub const ENV_MODEL: &str = "SYNTHSEARCH_LLM_MODEL";

#[derive(Clone, Debug)]
pub struct LlmConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub params: LlmParams,
    pub template: String,
    pub timeout: Duration,
    pub max_in_flight: usize,
    pub max_attempts: u32,
    pub audit_log: Option<PathBuf>,
}

impl LlmConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        LlmConfig {
            endpoint: endpoint.into(),
            api_key: None,
            model: "gpt-3.5-turbo".to_string(),
            params: LlmParams::default(),
            template: DEFAULT_TEMPLATE.to_string(),
            timeout: Duration::from_secs(60),
            max_in_flight: 4,
            max_attempts: 3,
            audit_log: None,
        }
    }

    /// Reads endpoint, key and model from the environment.
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var(ENV_ENDPOINT).ok()?;
        let mut cfg = LlmConfig::new(endpoint);
        cfg.api_key = std::env::var(ENV_API_KEY).ok();
        if let Ok(model) = std::env::var(ENV_MODEL) {
            cfg.model = model;
        }
        Some(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub batch_id: String,
    pub prompt: String,
    pub params: LlmParams,
    pub attempts: u32,
    pub status: Option<u16>,
    pub response: String,
    pub latency_ms: u64,
}

struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

pub struct LlmGenerator {
    config: LlmConfig,
    agent: ureq::Agent,
    slots: Slots,
    audit: Option<Mutex<File>>,
}

impl LlmGenerator {
    pub fn new(config: LlmConfig) -> Result<Self, GenError> {
        config.params.validate()?;
        if config.max_in_flight == 0 || config.max_attempts == 0 {
            return Err(GenError::Params("max_in_flight and max_attempts must be positive".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let audit = match &config.audit_log {
            Some(path) => Some(Mutex::new(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| GenError::Params(format!("audit log {}: {e}", path.display())))?,
            )),
            None => None,
        };
        Ok(LlmGenerator {
            slots: Slots {
                free: Mutex::new(config.max_in_flight),
                cv: Condvar::new(),
            },
            config,
            agent,
            audit,
        })
    }

    /// The JSON body sent for `prompt`.
    pub fn request_body(&self, prompt: &str) -> Value {
        let p = &self.config.params;
        json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": p.temperature,
            "max_tokens": p.max_tokens,
            "top_p": p.top_p,
            "frequency_penalty": p.frequency_penalty,
            "presence_penalty": p.presence_penalty,
        })
    }

    fn post(&self, body: &Value) -> Result<(u16, String), String> {
        let mut req = self.agent.post(&self.config.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok((status, text))
    }

    fn audit(&self, record: &AuditRecord) {
        if let Some(file) = &self.audit {
            let line = serde_json::to_string(record).expect("audit record serializes");
            let mut f = file.lock().unwrap();
            if let Err(e) = writeln!(f, "{line}") {
                warn!("failed to write LLM audit record: {e}");
            }
        }
    }
}

/// Splits a completion into texts on blank lines.
pub fn split_completion(content: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in content.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                out.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line.trim());
        }
    }
    if !current.is_empty() {
        out.push(current.join("\n"));
    }
    out
}

fn completion_text(body: &str) -> Result<String, String> {
    let v: Value = serde_json::from_str(body).map_err(|e| format!("response is not JSON: {e}"))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| "response has no choices[0].message.content".to_string())
}

impl Generator for LlmGenerator {
    fn id(&self) -> &str {
        "llm"
    }

    fn generate(&self, examples: &ExampleSet, texts: &[String], count: usize, seed: u64) -> Result<SyntheticBatch, GenError> {
        check_request(examples, texts, count)?;
        let prompt = build_prompt(&examples.class, texts, count, &self.config.template)?;
        let body = self.request_body(&prompt);
        let id = batch_id(self.id(), examples, count, seed);
        let _slot = self.slots.acquire();
        let start = Instant::now();
        let mut last_err = String::new();
        let mut outcome = None;
        let mut attempts = 0;
        while attempts < self.config.max_attempts {
            attempts += 1;
            match self.post(&body) {
                Ok((status, text)) if (200..300).contains(&status) => {
                    outcome = Some((status, text));
                    break;
                }
                Ok((status, text)) if status == 429 || status >= 500 => {
                    last_err = format!("HTTP {status}: {text}");
                }
                Ok((status, text)) => {
                    self.audit(&AuditRecord {
                        batch_id: id.clone(),
                        prompt: prompt.clone(),
                        params: self.config.params.clone(),
                        attempts,
                        status: Some(status),
                        response: text.clone(),
                        latency_ms: start.elapsed().as_millis() as u64,
                    });
                    return Err(GenError::Backend(format!("HTTP {status}: {text}")));
                }
                Err(e) => last_err = e,
            }
        }
        let latency_ms = start.elapsed().as_millis() as u64;
        let Some((status, raw)) = outcome else {
            self.audit(&AuditRecord {
                batch_id: id.clone(),
                prompt,
                params: self.config.params.clone(),
                attempts,
                status: None,
                response: last_err.clone(),
                latency_ms,
            });
            return Err(GenError::Retryable {
                attempts,
                reason: last_err,
            });
        };
        self.audit(&AuditRecord {
            batch_id: id.clone(),
            prompt,
            params: self.config.params.clone(),
            attempts,
            status: Some(status),
            response: raw.clone(),
            latency_ms,
        });
        let content = completion_text(&raw).map_err(GenError::Backend)?;
        let mut out = split_completion(&content);
        if out.is_empty() {
            warn!(batch = %id, "empty completion; batch skipped");
        }
        out.truncate(count);
        Ok(SyntheticBatch {
            batch_id: id,
            class: examples.class.clone(),
            texts: out,
            generator: self.id().to_string(),
            source: examples.clone(),
        })
    }
}
