//! Train/predict abstraction with a built-in multinomial logistic regression
//! and a subprocess hook for external trainers.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{escape_field, unescape_field, ClassId, LabeledDataset, Message};
use crate::features::FeatureSpace;
use crate::synthgen::SyntheticBatch;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("unknown trainer {0:?}")]
    UnknownTrainer(String),
    #[error("invalid hyperparameter {key}={value:?}: {reason}")]
    Hyperparameter { key: String, value: String, reason: String },
    #[error("training data is empty")]
    EmptyTrainingData,
    #[error("synthetic batch {batch} is labeled {label:?}, which is outside the schema")]
    SyntheticLabel { batch: String, label: String },
    #[error("dataset schema {got:?} differs from the model schema {expected:?}")]
    SchemaMismatch { expected: Vec<String>, got: Vec<String> },
    #[error("model was trained under feature space {expected:016x}, dataset is embedded with {got:016x}")]
    FeatureMismatch { expected: u64, got: u64 },
    #[error("external trainer: {0}")]
    External(String),
}

/// Model structure plus hyperparameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub trainer: String,
    pub hyperparameters: BTreeMap<String, String>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::logreg(LogRegParams::default())
    }
}

impl ModelSpec {
    pub fn logreg(p: LogRegParams) -> Self {
        let hyperparameters = [
            ("epochs", p.epochs.to_string()),
            ("learning_rate", p.learning_rate.to_string()),
            ("l2", p.l2.to_string()),
            ("seed", p.seed.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        ModelSpec {
            trainer: LOGREG.to_string(),
            hyperparameters,
        }
    }

    /// A subprocess trainer invoked as `program [args..] train_file eval_file out_file`.
    pub fn external(program: impl Into<String>, args: &[&str]) -> Self {
        let mut hyperparameters = BTreeMap::new();
        hyperparameters.insert("program".to_string(), program.into());
        if !args.is_empty() {
            hyperparameters.insert("args".to_string(), args.join(" "));
        }
        ModelSpec {
            trainer: EXTERNAL.to_string(),
            hyperparameters,
        }
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        match self.trainer.as_str() {
            LOGREG => LogRegParams::from_spec(self).map(drop),
            EXTERNAL => self.program().map(drop),
            other => Err(ClassifierError::UnknownTrainer(other.to_string())),
        }
    }

    fn program(&self) -> Result<(String, Vec<String>), ClassifierError> {
        let program = self
            .hyperparameters
            .get("program")
            .filter(|p| !p.is_empty())
            .ok_or_else(|| ClassifierError::Hyperparameter {
                key: "program".into(),
                value: String::new(),
                reason: "external trainer needs a program".into(),
            })?;
        let args = self
            .hyperparameters
            .get("args")
            .map(|a| a.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default();
        Ok((program.clone(), args))
    }
}

pub const LOGREG: &str = "logreg";
pub const EXTERNAL: &str = "external";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Ridge penalty on the summed loss, i.e. `l2/2 * |W|²` added before averaging.
    pub l2: f64,
    pub seed: u64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            epochs: 300,
            learning_rate: 0.2,
            l2: 1.0,
            seed: 0,
        }
    }
}

impl LogRegParams {
    pub fn from_spec(spec: &ModelSpec) -> Result<Self, ClassifierError> {
        let mut p = LogRegParams::default();
        for (key, value) in &spec.hyperparameters {
            let bad = |reason: &str| ClassifierError::Hyperparameter {
                key: key.clone(),
                value: value.clone(),
                reason: reason.to_string(),
            };
            match key.as_str() {
                "epochs" => p.epochs = value.parse().map_err(|_| bad("not an integer"))?,
                "learning_rate" => {
                    p.learning_rate = value.parse().map_err(|_| bad("not a number"))?;
                    if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) {
                        return Err(bad("must be positive"));
                    }
                }
                "l2" => {
                    p.l2 = value.parse().map_err(|_| bad("not a number"))?;
                    if !(p.l2 >= 0.0 && p.l2.is_finite()) {
                        return Err(bad("must be non-negative"));
                    }
                }
                "seed" => p.seed = value.parse().map_err(|_| bad("not an integer"))?,
                _ => return Err(bad("unknown key for logreg")),
            }
        }
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Linear {
        mean: Vec<f64>,
        scale: Vec<f64>,
        /// `classes x dims`, row-major.
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    /// External trainers refit on every prediction call, so the model keeps its data.
    External { train: Vec<Message> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub schema: Vec<ClassId>,
    pub feature_fingerprint: u64,
    pub params: ModelParams,
    /// Ids of the synthetic batches included in training.
    pub provenance: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet(BTreeMap<String, ClassId>);

impl PredictionSet {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, ClassId)>) -> Self {
        PredictionSet(pairs.into_iter().collect())
    }

    pub fn get(&self, id: &str) -> Option<&ClassId> {
        self.0.get(id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ClassId)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("id\tlabel\n");
        for (id, label) in &self.0 {
            out.push_str(&format!("{}\t{}\n", escape_field(id), escape_field(label.as_str())));
        }
        out
    }
}

/// Trains on `train_data` plus every message of `synthetic`.
pub fn train(
    spec: &ModelSpec,
    train_data: &LabeledDataset,
    synthetic: &[&SyntheticBatch],
    space: &FeatureSpace,
) -> Result<TrainedModel, ClassifierError> {
    if train_data.is_empty() {
        return Err(ClassifierError::EmptyTrainingData);
    }
    for b in synthetic {
        if train_data.class_index(&b.class).is_none() {
            return Err(ClassifierError::SyntheticLabel {
                batch: b.batch_id.clone(),
                label: b.class.to_string(),
            });
        }
    }
    let provenance = synthetic.iter().map(|b| b.batch_id.clone()).collect();
    let schema = train_data.schema().to_vec();
    let params = match spec.trainer.as_str() {
        LOGREG => {
            let p = LogRegParams::from_spec(spec)?;
            let k = schema.len();
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for m in train_data.messages() {
                rows.push(space.vector(m).0);
                labels.push(train_data.class_index(&m.label).expect("labels in schema"));
            }
            for b in synthetic {
                let ci = train_data.class_index(&b.class).expect("checked above");
                for t in &b.texts {
                    rows.push(space.embed_text(t).0);
                    labels.push(ci);
                }
            }
            fit_logreg(&rows, &labels, k, &p)
        }
        EXTERNAL => {
            spec.program()?;
            let mut train: Vec<Message> = train_data.messages().to_vec();
            for b in synthetic {
                train.extend(b.messages());
            }
            ModelParams::External { train }
        }
        other => return Err(ClassifierError::UnknownTrainer(other.to_string())),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        schema,
        feature_fingerprint: space.fingerprint(),
        params,
        provenance,
    })
}

fn fit_logreg(rows: &[Vec<f64>], labels: &[usize], k: usize, p: &LogRegParams) -> ModelParams {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x / nf;
        }
    }
    let mut scale = vec![0.0; d];
    for r in rows {
        for ((s, x), m) in scale.iter_mut().zip(r).zip(&mean) {
            *s += (x - m) * (x - m) / nf;
        }
    }
    for s in &mut scale {
        *s = if *s > 1e-12 { s.sqrt() } else { 1.0 };
    }
    let xs: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).zip(&scale).map(|((x, m), s)| (x - m) / s).collect())
        .collect();

    let mut w = vec![0.0; k * d];
    let mut b = vec![0.0; k];
    let mut gw = vec![0.0; k * d];
    let mut gb = vec![0.0; k];
    let mut probs = vec![0.0; k];
    for _ in 0..p.epochs {
        gw.iter_mut().for_each(|g| *g = 0.0);
        gb.iter_mut().for_each(|g| *g = 0.0);
        for (x, &y) in xs.iter().zip(labels) {
            softmax_into(&w, &b, x, &mut probs);
            for c in 0..k {
                let err = probs[c] - if c == y { 1.0 } else { 0.0 };
                gb[c] += err;
                let row = &mut gw[c * d..(c + 1) * d];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += err * xi;
                }
            }
        }
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi -= p.learning_rate * (gi + p.l2 * *wi) / nf;
        }
        for (bi, gi) in b.iter_mut().zip(&gb) {
            *bi -= p.learning_rate * gi / nf;
        }
    }
    ModelParams::Linear {
        mean,
        scale,
        weights: w,
        bias: b,
    }
}

fn softmax_into(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for (c, o) in out.iter_mut().enumerate() {
        *o = b[c] + w[c * d..(c + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

impl TrainedModel {
    /// Predicted class index for one feature vector (linear models only).
    fn predict_vector(&self, v: &[f64]) -> usize {
        let ModelParams::Linear { mean, scale, weights, bias } = &self.params else {
            unreachable!("only linear models predict from vectors");
        };
        let d = mean.len();
        let x: Vec<f64> = v.iter().zip(mean).zip(scale).map(|((x, m), s)| (x - m) / s).collect();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for c in 0..bias.len() {
            let s = bias[c] + weights[c * d..(c + 1) * d].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            // strict comparison: ties go to the earliest class
            if s > best_score {
                best = c;
                best_score = s;
            }
        }
        best
    }

    pub fn predict_text(&self, text: &str, space: &FeatureSpace) -> Result<ClassId, ClassifierError> {
        self.check_space(space)?;
        match &self.params {
            ModelParams::Linear { .. } => Ok(self.schema[self.predict_vector(&space.embed_text(text).0)].clone()),
            ModelParams::External { .. } => {
                let ds = LabeledDataset::with_schema(
                    vec![Message::new("q", text, self.schema[0].clone())],
                    self.schema.clone(),
                )
                .map_err(|e| ClassifierError::External(e.to_string()))?;
                Ok(self.predict(&ds, space)?.get("q").cloned().expect("external output checked"))
            }
        }
    }

    fn check_space(&self, space: &FeatureSpace) -> Result<(), ClassifierError> {
        if space.fingerprint() != self.feature_fingerprint {
            return Err(ClassifierError::FeatureMismatch {
                expected: self.feature_fingerprint,
                got: space.fingerprint(),
            });
        }
        Ok(())
    }

    pub fn predict(&self, ds: &LabeledDataset, space: &FeatureSpace) -> Result<PredictionSet, ClassifierError> {
        self.check_space(space)?;
        if ds.schema() != self.schema.as_slice() {
            let names = |s: &[ClassId]| s.iter().map(|c| c.to_string()).collect();
            return Err(ClassifierError::SchemaMismatch {
                expected: names(&self.schema),
                got: names(ds.schema()),
            });
        }
        match &self.params {
            ModelParams::Linear { .. } => Ok(PredictionSet::from_pairs(ds.messages().iter().map(|m| {
                let c = self.predict_vector(&space.vector(m).0);
                (m.id.clone(), self.schema[c].clone())
            }))),
            ModelParams::External { train } => {
                if ds.is_empty() {
                    return Ok(PredictionSet::default());
                }
                let (program, args) = self.spec.program()?;
                run_external(&program, &args, train, ds, &self.schema)
            }
        }
    }
}

pub fn predict(model: &TrainedModel, ds: &LabeledDataset, space: &FeatureSpace) -> Result<PredictionSet, ClassifierError> {
    model.predict(ds, space)
}

static SCRATCH: AtomicU64 = AtomicU64::new(0);

fn run_external(
    program: &str,
    args: &[String],
    train: &[Message],
    eval: &LabeledDataset,
    schema: &[ClassId],
) -> Result<PredictionSet, ClassifierError> {
    let err = |e: std::io::Error| ClassifierError::External(e.to_string());
    let dir: PathBuf = std::env::temp_dir().join(format!(
        "synthsearch-ext-{}-{}",
        std::process::id(),
        SCRATCH.fetch_add(1, Ordering::Relaxed)
    ));
    fs::create_dir_all(&dir).map_err(err)?;
    let train_file = dir.join("train.tsv");
    let eval_file = dir.join("eval.tsv");
    let out_file = dir.join("predictions.tsv");
    let mut train_tsv = String::from("id\tlabel\ttext\n");
    for m in train {
        train_tsv.push_str(&format!(
            "{}\t{}\t{}\n",
            escape_field(&m.id),
            escape_field(m.label.as_str()),
            escape_field(&m.text)
        ));
    }
    fs::write(&train_file, train_tsv).map_err(err)?;
    fs::write(&eval_file, eval.to_tsv()).map_err(err)?;
    let status = Command::new(program)
        .args(args)
        .arg(&train_file)
        .arg(&eval_file)
        .arg(&out_file)
        .status()
        .map_err(|e| ClassifierError::External(format!("{program}: {e}")));
    let result = status.and_then(|status| {
        if !status.success() {
            return Err(ClassifierError::External(format!("{program} exited with {status}")));
        }
        let text = fs::read_to_string(&out_file).map_err(err)?;
        parse_predictions(&text, eval, schema)
    });
    let _ = fs::remove_dir_all(&dir);
    result
}

/// Parses `id<TAB>label` rows (an `id<TAB>label` header is optional).
pub fn parse_predictions(text: &str, eval: &LabeledDataset, schema: &[ClassId]) -> Result<PredictionSet, ClassifierError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || (i == 0 && line == "id\tlabel") {
            continue;
        }
        let (id, label) = line
            .split_once('\t')
            .ok_or_else(|| ClassifierError::External(format!("prediction line {}: expected id<TAB>label", i + 1)))?;
        let label = ClassId::new(unescape_field(label));
        if !schema.contains(&label) {
            return Err(ClassifierError::External(format!("prediction line {}: unknown label {label}", i + 1)));
        }
        out.insert(unescape_field(id), label);
    }
    for m in eval.messages() {
        if !out.contains_key(&m.id) {
            return Err(ClassifierError::External(format!("no prediction for {:?}", m.id)));
        }
    }
    out.retain(|id, _| eval.messages().iter().any(|m| &m.id == id));
    Ok(PredictionSet(out))
}
