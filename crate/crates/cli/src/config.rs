//! `key = value` run configuration.
//!
//! Sources are layered: built-in defaults, then the output directory's
//! `manifest` (if any), then `--config FILE`, then flags. The resolved
//! settings are written back to `manifest`, so any run can be repeated with
//! `--config OUT/manifest`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use synthsearch::classifier::{LogRegParams, ModelSpec, EXTERNAL, LOGREG};
use synthsearch::corpus::{ClassId, SplitRatios};
use synthsearch::features::{EmbeddingConfig, ProjectionMode};
use synthsearch::metrics::{CbaVariant, MetricKind};
use synthsearch::search::{Budget, GaParams, HswParams, Promising, StrategyKind, StrategyParams, SwParams};
use synthsearch::seed::Fnv64;
use synthsearch::synthgen::{BackendKind, EdaParams, GenerationBudget, LlmParams};

pub const MANIFEST: &str = "manifest";
const MANIFEST_HEADER: &str = "# synthsearch run manifest";

/// Keys that only steer reporting or the ensemble and so do not change what a
/// sweep computes.
const NON_SEARCH_KEYS: &[&str] = &["band", "phases", "phase_budget", "k", "sweep_budget", "objectives"];

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

fn promising_name(p: Promising) -> &'static str {
    match p {
        Promising::ImprovesIncumbent => "improves_incumbent",
        Promising::Always => "always",
        Promising::Never => "never",
    }
}

fn defaults() -> BTreeMap<String, String> {
    let emb = EmbeddingConfig::default();
    let lr = LogRegParams::default();
    let gen = GenerationBudget::default();
    let eda = EdaParams::default();
    let llm = LlmParams::default();
    let sw = SwParams::default();
    let hsw = HswParams::default();
    let ga = GaParams::default();
    let ratios = SplitRatios::default();
    let pairs: Vec<(&str, String)> = vec![
        ("dataset", String::new()),
        ("seed", "0".into()),
        ("ratios", ratios.to_string()),
        ("embedding.dims", emb.dims.to_string()),
        ("embedding.buckets", emb.buckets.to_string()),
        ("embedding.char_ngram", emb.char_ngram.to_string()),
        ("projections", ProjectionMode::default().to_string()),
        ("model", LOGREG.into()),
        ("model.epochs", lr.epochs.to_string()),
        ("model.learning_rate", lr.learning_rate.to_string()),
        ("model.l2", lr.l2.to_string()),
        ("model.program", String::new()),
        ("model.args", String::new()),
        ("cba_variant", CbaVariant::default().to_string()),
        ("backend", BackendKind::Mock.to_string()),
        ("gen.per_example", gen.per_example.to_string()),
        ("gen.cap", gen.cap.to_string()),
        ("eda.alpha_sr", eda.alpha_sr.to_string()),
        ("eda.alpha_ri", eda.alpha_ri.to_string()),
        ("eda.alpha_rs", eda.alpha_rs.to_string()),
        ("eda.alpha_rd", eda.alpha_rd.to_string()),
        ("eda.synonyms", String::new()),
        ("llm.endpoint", String::new()),
        ("llm.model", String::new()),
        ("llm.template", String::new()),
        ("llm.temperature", llm.temperature.to_string()),
        ("llm.max_tokens", llm.max_tokens.to_string()),
        ("llm.top_p", llm.top_p.to_string()),
        ("llm.frequency_penalty", llm.frequency_penalty.to_string()),
        ("llm.presence_penalty", llm.presence_penalty.to_string()),
        ("llm.timeout_secs", "60".into()),
        ("llm.max_in_flight", "4".into()),
        ("llm.max_attempts", "3".into()),
        ("sw.window_size", sw.window_size.to_string()),
        ("sw.stride", sw.stride.to_string()),
        ("sw.k", sw.k.to_string()),
        ("sw.attempts_per_window", sw.attempts_per_window.to_string()),
        ("hsw.window_size", hsw.window_size.to_string()),
        ("hsw.stride", hsw.stride.to_string()),
        ("hsw.k", hsw.k.to_string()),
        ("hsw.attempts_per_window", hsw.attempts_per_window.to_string()),
        ("hsw.max_depth", hsw.max_depth.to_string()),
        ("hsw.promising", promising_name(hsw.promising).into()),
        ("ga.population", ga.population.to_string()),
        ("ga.generations", ga.generations.to_string()),
        ("ga.k_max", ga.k_max.to_string()),
        ("ga.crossover_rate", ga.crossover_rate.to_string()),
        ("ga.mutation_rate", "auto".into()),
        ("ga.tournament", ga.tournament.to_string()),
        ("ga.max_repair", ga.max_repair.to_string()),
        ("budget", Budget::default().max_attempts.to_string()),
        ("wall_clock_secs", "none".into()),
        ("strategies", "SW,HSW,GA".into()),
        ("metrics", "CR,CBA,OBA,OF1".into()),
        ("classes", "all".into()),
        ("band", "0.03".into()),
        ("phases", "3".into()),
        ("phase_budget", "60".into()),
        ("k", "3".into()),
        ("sweep_budget", "5".into()),
        ("objectives", String::new()),
    ];
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Raw settings before typing.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Default for Settings {
    fn default() -> Self {
        Settings(defaults())
    }
}

impl Settings {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim();
        if !self.0.contains_key(key) {
            return err(format!("unknown config key {key:?}"));
        }
        self.0.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("{origin}:{}: expected `key = value`, got {line:?}", i + 1));
            };
            self.set(k, v).map_err(|e| ConfigError(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn get(&self, key: &str) -> &str {
        self.0.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn to_manifest(&self) -> String {
        let mut out = format!("{MANIFEST_HEADER}\n");
        for (k, v) in &self.0 {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }

    /// Hash of every setting that influences what a sweep computes.
    pub fn search_hash(&self) -> u64 {
        let mut h = Fnv64::new();
        for (k, v) in self.0.iter().filter(|(k, _)| !NON_SEARCH_KEYS.contains(&k.as_str())) {
            h.field(k.as_bytes()).field(v.as_bytes());
        }
        h.finish()
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.get(key);
        v.parse().map_err(|e| ConfigError(format!("{key} = {v:?}: {e}")))
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.get(key);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let out: Vec<T> = self
            .get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| ConfigError(format!("{key}: {s:?}: {e}"))))
            .collect::<Result<_, _>>()?;
        if out.is_empty() {
            return err(format!("{key} must list at least one value"));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct LlmSettings {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub template: Option<PathBuf>,
    pub params: LlmParams,
    pub timeout: Duration,
    pub max_in_flight: usize,
    pub max_attempts: u32,
}

/// Typed, validated configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub embedding: EmbeddingConfig,
    pub projections: ProjectionMode,
    pub model: ModelSpec,
    pub cba_variant: CbaVariant,
    pub backend: BackendKind,
    pub gen_budget: GenerationBudget,
    pub eda: EdaParams,
    pub synonyms: Option<PathBuf>,
    pub llm: LlmSettings,
    pub params: StrategyParams,
    pub budget: Budget,
    pub strategies: Vec<StrategyKind>,
    pub metrics: Vec<MetricKind>,
    /// `None` means every class of the schema.
    pub classes: Option<Vec<ClassId>>,
    pub band: f64,
    pub phases: usize,
    pub phase_budget: usize,
    pub k: usize,
    pub sweep_budget: usize,
    pub objectives: Option<PathBuf>,
    pub settings: Settings,
}

fn promising(s: &str) -> Result<Promising, ConfigError> {
    match s {
        "improves_incumbent" => Ok(Promising::ImprovesIncumbent),
        "always" => Ok(Promising::Always),
        "never" => Ok(Promising::Never),
        other => err(format!("hsw.promising: unknown rule {other:?}")),
    }
}

impl RunConfig {
    pub fn from_settings(s: Settings) -> Result<Self, ConfigError> {
        let seed: u64 = s.parse("seed")?;
        let ratios: SplitRatios = s.parse("ratios")?;
        let embedding = EmbeddingConfig {
            dims: s.parse("embedding.dims")?,
            buckets: s.parse("embedding.buckets")?,
            char_ngram: s.parse("embedding.char_ngram")?,
            seed,
        };
        let model = match s.get("model") {
            LOGREG => {
                let mut spec = ModelSpec::logreg(LogRegParams {
                    seed,
                    ..LogRegParams::default()
                });
                for key in ["epochs", "learning_rate", "l2"] {
                    spec.hyperparameters.insert(key.into(), s.get(&format!("model.{key}")).to_string());
                }
                spec
            }
            EXTERNAL => {
                let args: Vec<&str> = s.get("model.args").split_whitespace().collect();
                ModelSpec::external(s.get("model.program"), &args)
            }
            other => return err(format!("model: unknown trainer {other:?}")),
        };
        model.validate().map_err(|e| ConfigError(format!("model: {e}")))?;

        let eda = EdaParams {
            alpha_sr: s.parse("eda.alpha_sr")?,
            alpha_ri: s.parse("eda.alpha_ri")?,
            alpha_rs: s.parse("eda.alpha_rs")?,
            alpha_rd: s.parse("eda.alpha_rd")?,
            ..EdaParams::default()
        };
        eda.validate().map_err(|e| ConfigError(e.to_string()))?;
        let llm_params = LlmParams {
            temperature: s.parse("llm.temperature")?,
            max_tokens: s.parse("llm.max_tokens")?,
            top_p: s.parse("llm.top_p")?,
            frequency_penalty: s.parse("llm.frequency_penalty")?,
            presence_penalty: s.parse("llm.presence_penalty")?,
        };
        llm_params.validate().map_err(|e| ConfigError(e.to_string()))?;
        let non_empty = |k: &str| Some(s.get(k).to_string()).filter(|v| !v.is_empty());
        let llm = LlmSettings {
            endpoint: non_empty("llm.endpoint"),
            model: non_empty("llm.model"),
            template: s.path("llm.template"),
            params: llm_params,
            timeout: Duration::from_secs(s.parse("llm.timeout_secs")?),
            max_in_flight: s.parse("llm.max_in_flight")?,
            max_attempts: s.parse("llm.max_attempts")?,
        };

        let params = StrategyParams {
            sw: SwParams {
                window_size: s.parse("sw.window_size")?,
                stride: s.parse("sw.stride")?,
                k: s.parse("sw.k")?,
                attempts_per_window: s.parse("sw.attempts_per_window")?,
            },
            hsw: HswParams {
                window_size: s.parse("hsw.window_size")?,
                stride: s.parse("hsw.stride")?,
                k: s.parse("hsw.k")?,
                attempts_per_window: s.parse("hsw.attempts_per_window")?,
                max_depth: s.parse("hsw.max_depth")?,
                promising: promising(s.get("hsw.promising"))?,
            },
            ga: GaParams {
                population: s.parse("ga.population")?,
                generations: s.parse("ga.generations")?,
                k_max: s.parse("ga.k_max")?,
                crossover_rate: s.parse("ga.crossover_rate")?,
                mutation_rate: match s.get("ga.mutation_rate") {
                    "auto" => None,
                    _ => Some(s.parse("ga.mutation_rate")?),
                },
                tournament: s.parse("ga.tournament")?,
                max_repair: s.parse("ga.max_repair")?,
            },
        };
        params.validate().map_err(|e| ConfigError(e.to_string()))?;

        let budget = Budget {
            max_attempts: s.parse("budget")?,
            wall_clock: match s.get("wall_clock_secs") {
                "none" | "" => None,
                _ => Some(Duration::from_secs_f64(s.parse("wall_clock_secs")?)),
            },
        };
        if budget.max_attempts == 0 {
            return err("budget must be at least 1");
        }
        let classes = match s.get("classes") {
            "all" | "" => None,
            _ => Some(s.list::<String>("classes")?.into_iter().map(ClassId::new).collect()),
        };
        let band: f64 = s.parse("band")?;
        if !(band >= 0.0 && band.is_finite()) {
            return err("band must be a non-negative number");
        }
        let cfg = RunConfig {
            dataset: s.path("dataset"),
            seed,
            ratios,
            embedding,
            projections: s.parse("projections")?,
            model,
            cba_variant: s.parse("cba_variant")?,
            backend: s.parse("backend")?,
            gen_budget: GenerationBudget {
                per_example: s.parse("gen.per_example")?,
                cap: s.parse("gen.cap")?,
            },
            eda,
            synonyms: s.path("eda.synonyms"),
            llm,
            params,
            budget,
            strategies: s.list("strategies")?,
            metrics: s.list("metrics")?,
            classes,
            band,
            phases: s.parse("phases")?,
            phase_budget: s.parse("phase_budget")?,
            k: s.parse("k")?,
            sweep_budget: s.parse("sweep_budget")?,
            objectives: s.path("objectives"),
            settings: s,
        };
        if cfg.embedding.dims < 2 {
            return err("embedding.dims must be at least 2");
        }
        if cfg.gen_budget.per_example == 0 || cfg.gen_budget.cap == 0 {
            return err("gen.per_example and gen.cap must be at least 1");
        }
        Ok(cfg)
    }
}
