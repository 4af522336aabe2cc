//! Labeled corpora, TSV ingestion and stratified three-way splitting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("no records")]
    NoRecords,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: duplicate id {id:?} (first seen on line {first})")]
    DuplicateId { line: usize, first: usize, id: String },
    #[error("duplicate message id {0:?}")]
    DuplicateMessage(String),
    #[error("message {id:?} has empty text")]
    EmptyText { id: String },
    #[error("message {id:?} has label {label:?} outside the schema")]
    UnknownLabel { id: String, label: String },
    #[error("a dataset needs at least two classes, found {0}")]
    TooFewClasses(usize),
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),
    #[error("class {class:?} has {size} messages; at least 3 are needed for a three-way split")]
    ClassTooSmall { class: String, size: usize },
    #[error("split manifest: {0}")]
    Manifest(String),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A class label. Case-sensitive, never empty.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(String);

impl ClassId {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        assert!(!name.is_empty(), "class names must be non-empty");
        ClassId(name)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClassId {
    fn from(s: &str) -> Self {
        ClassId::new(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: String,
    pub text: String,
    pub label: ClassId,
}

impl Message {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: impl Into<ClassId>) -> Self {
        Message {
            id: id.into(),
            text: text.into(),
            label: label.into(),
        }
    }
}

/// Messages plus the ordered label schema they are drawn from.
///
/// Partitions produced by [`stratified_split`] keep the schema of the full
/// dataset even when a class has no members in that partition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDataset {
    messages: Vec<Message>,
    schema: Vec<ClassId>,
}

impl LabeledDataset {
    /// Builds a dataset whose schema is the sorted set of distinct labels.
    pub fn new(messages: Vec<Message>) -> Result<Self> {
        let schema: BTreeSet<ClassId> = messages.iter().map(|m| m.label.clone()).collect();
        Self::with_schema(messages, schema.into_iter().collect())
    }

    pub fn with_schema(messages: Vec<Message>, mut schema: Vec<ClassId>) -> Result<Self> {
        schema.sort();
        schema.dedup();
        let known: BTreeSet<&ClassId> = schema.iter().collect();
        let mut ids = BTreeSet::new();
        for m in &messages {
            if !ids.insert(m.id.as_str()) {
                return Err(CorpusError::DuplicateMessage(m.id.clone()));
            }
            if m.text.is_empty() {
                return Err(CorpusError::EmptyText { id: m.id.clone() });
            }
            if !known.contains(&m.label) {
                return Err(CorpusError::UnknownLabel {
                    id: m.id.clone(),
                    label: m.label.to_string(),
                });
            }
        }
        Ok(LabeledDataset { messages, schema })
    }

    pub fn empty(schema: Vec<ClassId>) -> Self {
        let mut schema = schema;
        schema.sort();
        schema.dedup();
        LabeledDataset {
            messages: Vec::new(),
            schema,
        }
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn schema(&self) -> &[ClassId] {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn class_index(&self, class: &ClassId) -> Option<usize> {
        self.schema.binary_search(class).ok()
    }

    pub fn get(&self, id: &str) -> Option<&Message> {
        self.messages.iter().find(|m| m.id == id)
    }

    pub fn of_class<'a>(&'a self, class: &'a ClassId) -> impl Iterator<Item = &'a Message> + 'a {
        self.messages.iter().filter(move |m| &m.label == class)
    }

    /// Stable content hash over schema and messages, used in provenance records.
    pub fn content_hash(&self) -> u64 {
        let mut h = seed::Fnv64::new();
        for c in &self.schema {
            h.field(c.as_str().as_bytes());
        }
        for m in &self.messages {
            h.field(m.id.as_bytes())
                .field(m.label.as_str().as_bytes())
                .field(m.text.as_bytes());
        }
        h.finish()
    }

    /// Serializes as TSV with an `id<TAB>label<TAB>text` header.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("id\tlabel\ttext\n");
        for m in &self.messages {
            out.push_str(&escape_field(&m.id));
            out.push('\t');
            out.push_str(&escape_field(m.label.as_str()));
            out.push('\t');
            out.push_str(&escape_field(&m.text));
            out.push('\n');
        }
        out
    }
}

pub fn class_sizes(ds: &LabeledDataset) -> BTreeMap<ClassId, usize> {
    let mut sizes = BTreeMap::new();
    for m in ds.messages() {
        *sizes.entry(m.label.clone()).or_insert(0) += 1;
    }
    sizes
}

/// Escapes TAB, newline, carriage return and backslash.
pub fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetFormat {
    Tsv,
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<LabeledDataset> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    match format {
        DatasetFormat::Tsv => parse_tsv(&text),
    }
}

/// Parses a TSV corpus. Line numbers in errors are 1-based and count the header.
pub fn parse_tsv(text: &str) -> Result<LabeledDataset> {
    let ds = parse_tsv_rows(text)?;
    if ds.schema.len() < 2 {
        return Err(CorpusError::TooFewClasses(ds.schema.len()));
    }
    Ok(ds)
}

/// Like [`parse_tsv`] but allows single-class and empty partitions, with an
/// optional fixed schema.
fn parse_tsv_rows(text: &str) -> Result<LabeledDataset> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == "id\tlabel\ttext" => {}
        Some((_, header)) if header.trim().is_empty() => return Err(CorpusError::NoRecords),
        Some(_) => {
            return Err(CorpusError::Parse {
                line: 1,
                reason: "expected header `id<TAB>label<TAB>text`".into(),
            })
        }
        None => return Err(CorpusError::NoRecords),
    }
    let mut messages = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.splitn(3, '\t').collect();
        if fields.len() < 3 {
            return Err(CorpusError::Parse {
                line,
                reason: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let (id, label, text) = (
            unescape_field(fields[0]),
            unescape_field(fields[1]),
            unescape_field(fields[2]),
        );
        if id.is_empty() {
            return Err(CorpusError::Parse {
                line,
                reason: "empty id".into(),
            });
        }
        if label.is_empty() {
            return Err(CorpusError::Parse {
                line,
                reason: "empty label".into(),
            });
        }
        if text.is_empty() {
            return Err(CorpusError::Parse {
                line,
                reason: "empty text".into(),
            });
        }
        if let Some(&first) = seen.get(&id) {
            return Err(CorpusError::DuplicateId { line, first, id });
        }
        seen.insert(id.clone(), line);
        messages.push(Message {
            id,
            text,
            label: ClassId(label),
        });
    }
    if messages.is_empty() {
        return Err(CorpusError::NoRecords);
    }
    LabeledDataset::new(messages)
}

/// Fractions assigned to train, optimization-test and holdout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub opt: f64,
    pub holdout: f64,
}

impl SplitRatios {
    pub fn new(train: f64, opt: f64, holdout: f64) -> Result<Self> {
        let r = SplitRatios {
            train,
            opt,
            holdout,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.opt, self.holdout];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(CorpusError::InvalidRatios(format!(
                "fractions must be finite and non-negative: {self}"
            )));
        }
        if self.train <= 0.0 {
            return Err(CorpusError::InvalidRatios("train fraction must be positive".into()));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidRatios(format!("fractions sum to {sum}, not 1")));
        }
        Ok(())
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.6,
            opt: 0.2,
            holdout: 0.2,
        }
    }
}

impl fmt::Display for SplitRatios {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.train, self.opt, self.holdout)
    }
}

impl std::str::FromStr for SplitRatios {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| CorpusError::InvalidRatios(format!("{s:?}: {e}")))?;
        match parts[..] {
            [t, o, h] => SplitRatios::new(t, o, h),
            _ => Err(CorpusError::InvalidRatios(format!(
                "{s:?}: expected three comma-separated fractions"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    /// Training partition.
    pub train: LabeledDataset,
    /// Scored during optimization.
    pub opt_test: LabeledDataset,
    /// Never seen by the search; reported at the end.
    pub holdout: LabeledDataset,
}

/// Per-class partition sizes: floors of `ratio * size`, then leftover messages
/// one at a time to train first and then to the partition with the largest
/// fractional remainder (opt before holdout on ties).
pub fn partition_counts(size: usize, ratios: &SplitRatios) -> [usize; 3] {
    let exact = [
        ratios.train * size as f64,
        ratios.opt * size as f64,
        ratios.holdout * size as f64,
    ];
    // guard against 0.6 * 10 = 5.999...
    let mut counts = exact.map(|x| (x + 1e-9).floor().max(0.0) as usize);
    let assigned: usize = counts.iter().sum();
    let mut leftover = size.saturating_sub(assigned);
    if leftover > 0 {
        counts[0] += 1;
        leftover -= 1;
    }
    if leftover > 0 {
        let rem = |i: usize| exact[i] - exact[i].floor();
        let mut order = [1usize, 2];
        order.sort_by(|&a, &b| rem(b).partial_cmp(&rem(a)).unwrap_or(std::cmp::Ordering::Equal));
        for i in order {
            if leftover == 0 {
                break;
            }
            if exact[i] > 0.0 {
                counts[i] += 1;
                leftover -= 1;
            }
        }
        counts[0] += leftover;
    }
    counts
}

pub fn stratified_split(ds: &LabeledDataset, ratios: &SplitRatios, seed: u64) -> Result<Split> {
    ratios.validate()?;
    let all_positive = ratios.opt > 0.0 && ratios.holdout > 0.0;
    let mut parts: [Vec<Message>; 3] = Default::default();
    for (ci, class) in ds.schema().iter().enumerate() {
        let mut members: Vec<&Message> = ds.of_class(class).collect();
        if members.is_empty() {
            continue;
        }
        if all_positive && members.len() < 3 {
            return Err(CorpusError::ClassTooSmall {
                class: class.to_string(),
                size: members.len(),
            });
        }
        members.sort_by(|a, b| a.id.cmp(&b.id));
        let mut rng = seed::rng(seed::derive(seed, &[ci as u64, seed::fnv64(class.as_str().as_bytes())]));
        members.shuffle(&mut rng);
        let counts = partition_counts(members.len(), ratios);
        let mut it = members.into_iter();
        for (p, &n) in counts.iter().enumerate() {
            parts[p].extend(it.by_ref().take(n).cloned());
        }
    }
    let schema = ds.schema().to_vec();
    let [train, opt, holdout] = parts.map(|mut msgs| {
        msgs.sort_by(|a, b| a.id.cmp(&b.id));
        msgs
    });
    Ok(Split {
        train: LabeledDataset::with_schema(train, schema.clone())?,
        opt_test: LabeledDataset::with_schema(opt, schema.clone())?,
        holdout: LabeledDataset::with_schema(holdout, schema)?,
    })
}

pub const SPLIT_MANIFEST: &str = "split.manifest";
const SPLIT_FILES: [&str; 3] = ["train.tsv", "opt_test.tsv", "holdout.tsv"];

/// Writes `train.tsv`, `opt_test.tsv`, `holdout.tsv` and a manifest recording
/// seed, ratios and schema.
pub fn write_split(dir: &Path, split: &Split, ratios: &SplitRatios, seed: u64) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (name, part) in SPLIT_FILES.iter().zip([&split.train, &split.opt_test, &split.holdout]) {
        let path = dir.join(name);
        fs::write(&path, part.to_tsv()).map_err(io_err(&path))?;
    }
    let schema: Vec<&str> = split.train.schema().iter().map(|c| c.as_str()).collect();
    let manifest = format!(
        "seed = {seed}\nratios = {ratios}\nschema = {}\ntrain = {}\nopt_test = {}\nholdout = {}\n",
        schema.join(","),
        split.train.len(),
        split.opt_test.len(),
        split.holdout.len(),
    );
    let path = dir.join(SPLIT_MANIFEST);
    fs::write(&path, manifest).map_err(io_err(&path))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: SplitRatios,
    pub schema: Vec<ClassId>,
}

pub fn read_split(dir: &Path) -> Result<(Split, SplitManifest)> {
    let path = dir.join(SPLIT_MANIFEST);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut fields = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CorpusError::Manifest(format!("malformed line {line:?}")))?;
        fields.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| {
        fields
            .get(k)
            .cloned()
            .ok_or_else(|| CorpusError::Manifest(format!("missing key {k:?}")))
    };
    let seed = get("seed")?
        .parse::<u64>()
        .map_err(|e| CorpusError::Manifest(format!("seed: {e}")))?;
    let ratios: SplitRatios = get("ratios")?.parse()?;
    let schema: Vec<ClassId> = get("schema")?
        .split(',')
        .filter(|s| !s.is_empty())
        .map(ClassId::from)
        .collect();
    let mut parts = Vec::with_capacity(3);
    for name in SPLIT_FILES {
        let path = dir.join(name);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let ds = match parse_tsv_rows(&text) {
            Ok(ds) => ds,
            Err(CorpusError::NoRecords) => LabeledDataset::empty(schema.clone()),
            Err(e) => return Err(e),
        };
        parts.push(LabeledDataset::with_schema(ds.messages, schema.clone())?);
    }
    let holdout = parts.pop().unwrap();
    let opt_test = parts.pop().unwrap();
    let train = parts.pop().unwrap();
    Ok((
        Split {
            train,
            opt_test,
            holdout,
        },
        SplitManifest {
            seed,
            ratios,
            schema,
        },
    ))
}
