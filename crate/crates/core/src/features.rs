//! Deterministic text embedding into a small normalized feature space, plus
//! 2D projections and the four-way point coloring used to pick examples.
//!
//! Texts are hashed into `buckets` sparse features (word unigrams and
//! character n-grams), weighted by TF-IDF with document frequencies from the
//! train partition, L2-normalized, multiplied by a seeded random sign matrix
//! down to `dims` dimensions, and finally min-max scaled per dimension using
//! train-partition extremes. Dimensions that are constant on train map to 0.5.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::PredictionSet;
use crate::corpus::{ClassId, LabeledDataset, Message, Split};
use crate::seed::{self, Fnv64};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("feature space needs at least 2 dimensions, got {0}")]
    TooFewDims(usize),
    #[error("hash buckets must be positive")]
    NoBuckets,
    #[error("projection mode asks for {k} pairs but only {available} exist")]
    TooManyPairs { k: usize, available: usize },
    #[error("invalid projection ({0}, {1}) for {2} dimensions")]
    InvalidProjection(usize, usize, usize),
    #[error("unknown projection mode {0:?}")]
    UnknownMode(String),
    #[error("variance vector has {got} entries, expected {expected}")]
    VarianceLength { got: usize, expected: usize },
    #[error("no prediction for optimization-test message {0:?}")]
    MissingPrediction(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub dims: usize,
    pub buckets: usize,
    pub char_ngram: usize,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dims: 20,
            buckets: 4096,
            char_ngram: 3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Hashed sparse features of one text: (bucket, raw count).
fn hashed_terms(text: &str, cfg: &EmbeddingConfig) -> BTreeMap<usize, f64> {
    let lower = text.to_lowercase();
    let mut terms = BTreeMap::new();
    let buckets = cfg.buckets as u64;
    let mut add = |kind: u8, s: &str| {
        let h = Fnv64::new().write(&[kind]).write(s.as_bytes()).finish();
        *terms.entry((seed::mix64(h ^ cfg.seed) % buckets) as usize).or_insert(0.0) += 1.0;
    };
    let words: Vec<&str> = lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect();
    for w in &words {
        add(b'w', w);
    }
    if cfg.char_ngram > 0 {
        for w in &words {
            let padded: Vec<char> = std::iter::once(' ')
                .chain(w.chars())
                .chain(std::iter::once(' '))
                .collect();
            if padded.len() < cfg.char_ngram {
                continue;
            }
            for win in padded.windows(cfg.char_ngram) {
                let gram: String = win.iter().collect();
                add(b'c', &gram);
            }
        }
    }
    terms
}

/// A feature space fitted on a train partition.
#[derive(Clone, Debug)]
pub struct FeatureSpace {
    config: EmbeddingConfig,
    idf: Vec<f64>,
    /// `buckets * dims` random signs, row-major by bucket.
    signs: Vec<i8>,
    min: Vec<f64>,
    max: Vec<f64>,
    fingerprint: u64,
    cache: HashMap<String, (u64, FeatureVector)>,
}

impl FeatureSpace {
    pub fn fit(train: &LabeledDataset, config: EmbeddingConfig) -> Result<Self, FeatureError> {
        if config.dims < 2 {
            return Err(FeatureError::TooFewDims(config.dims));
        }
        if config.buckets == 0 {
            return Err(FeatureError::NoBuckets);
        }
        let docs: Vec<BTreeMap<usize, f64>> = train
            .messages()
            .iter()
            .map(|m| hashed_terms(&m.text, &config))
            .collect();
        let mut df = vec![0usize; config.buckets];
        for d in &docs {
            for &b in d.keys() {
                df[b] += 1;
            }
        }
        let n = docs.len() as f64;
        let idf = df
            .iter()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        let mut rng = seed::rng(seed::derive(config.seed, &[0x5167_4e5f]));
        let signs = (0..config.buckets * config.dims)
            .map(|_| if rand::Rng::gen::<bool>(&mut rng) { 1 } else { -1 })
            .collect();
        let mut space = FeatureSpace {
            min: vec![0.0; config.dims],
            max: vec![0.0; config.dims],
            fingerprint: 0,
            idf,
            signs,
            cache: HashMap::new(),
            config,
        };
        let raw: Vec<Vec<f64>> = docs.iter().map(|d| space.project(d)).collect();
        if !raw.is_empty() {
            for dim in 0..space.config.dims {
                let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r[dim]), hi.max(r[dim]))
                });
                space.min[dim] = lo;
                space.max[dim] = hi;
            }
        }
        let mut h = Fnv64::new();
        h.write(&train.content_hash().to_le_bytes());
        h.write(&(space.config.dims as u64).to_le_bytes())
            .write(&(space.config.buckets as u64).to_le_bytes())
            .write(&(space.config.char_ngram as u64).to_le_bytes())
            .write(&space.config.seed.to_le_bytes());
        space.fingerprint = h.finish();
        for (m, r) in train.messages().iter().zip(raw) {
            let v = space.normalize(r);
            space.cache.insert(m.id.clone(), (seed::fnv64(m.text.as_bytes()), v));
        }
        Ok(space)
    }

    pub fn config(&self) -> &EmbeddingConfig {
        &self.config
    }

    pub fn dims(&self) -> usize {
        self.config.dims
    }

    /// Identifies the (config, train partition) pair this space was fitted on.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    fn project(&self, terms: &BTreeMap<usize, f64>) -> Vec<f64> {
        let dims = self.config.dims;
        let weighted: Vec<(usize, f64)> = terms.iter().map(|(&b, &tf)| (b, tf * self.idf[b])).collect();
        let norm = weighted.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        let mut out = vec![0.0; dims];
        if norm == 0.0 {
            return out;
        }
        for (b, w) in weighted {
            let row = &self.signs[b * dims..(b + 1) * dims];
            for (o, &s) in out.iter_mut().zip(row) {
                *o += f64::from(s) * w / norm;
            }
        }
        out
    }

    fn normalize(&self, raw: Vec<f64>) -> FeatureVector {
        FeatureVector(
            raw.into_iter()
                .enumerate()
                .map(|(d, x)| {
                    let span = self.max[d] - self.min[d];
                    if span <= 0.0 {
                        0.5
                    } else {
                        ((x - self.min[d]) / span).clamp(0.0, 1.0)
                    }
                })
                .collect(),
        )
    }

    pub fn embed_text(&self, text: &str) -> FeatureVector {
        self.normalize(self.project(&hashed_terms(text, &self.config)))
    }

    /// Embeds a message, reusing the cached vector when id and text match.
    pub fn vector(&self, m: &Message) -> FeatureVector {
        match self.cache.get(&m.id) {
            Some((h, v)) if *h == seed::fnv64(m.text.as_bytes()) => v.clone(),
            _ => self.embed_text(&m.text),
        }
    }

    /// Precomputes vectors for additional datasets (for example the test partitions).
    pub fn warm(&mut self, ds: &LabeledDataset) {
        for m in ds.messages() {
            if !self.cache.contains_key(&m.id) {
                let v = self.embed_text(&m.text);
                self.cache.insert(m.id.clone(), (seed::fnv64(m.text.as_bytes()), v));
            }
        }
    }

    pub fn embed(&self, ds: &LabeledDataset) -> BTreeMap<String, FeatureVector> {
        ds.messages().iter().map(|m| (m.id.clone(), self.vector(m))).collect()
    }
}

pub fn embed(ds: &LabeledDataset, train: &LabeledDataset, config: EmbeddingConfig) -> Result<BTreeMap<String, FeatureVector>, FeatureError> {
    Ok(FeatureSpace::fit(train, config)?.embed(ds))
}

/// Population variance of each dimension.
pub fn dimension_variances<'a>(vectors: impl IntoIterator<Item = &'a FeatureVector>, dims: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dims];
    let mut sq = vec![0.0; dims];
    let mut n = 0usize;
    for v in vectors {
        n += 1;
        for (d, &x) in v.0.iter().enumerate().take(dims) {
            sum[d] += x;
            sq[d] += x * x;
        }
    }
    if n == 0 {
        return vec![0.0; dims];
    }
    let n = n as f64;
    sum.iter()
        .zip(&sq)
        .map(|(s, q)| (q / n - (s / n) * (s / n)).max(0.0))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Projection {
    pub dim_a: usize,
    pub dim_b: usize,
}

impl Projection {
    pub fn new(dim_a: usize, dim_b: usize, dims: usize) -> Result<Self, FeatureError> {
        if dim_a < dim_b && dim_b < dims {
            Ok(Projection { dim_a, dim_b })
        } else {
            Err(FeatureError::InvalidProjection(dim_a, dim_b, dims))
        }
    }

    pub fn coords(&self, v: &FeatureVector) -> (f64, f64) {
        (v.0[self.dim_a], v.0[self.dim_b])
    }
}

impl fmt::Display for Projection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.dim_a, self.dim_b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectionMode {
    AllPairs,
    Consecutive,
    TopVariance(usize),
}

impl Default for ProjectionMode {
    fn default() -> Self {
        ProjectionMode::TopVariance(10)
    }
}

impl fmt::Display for ProjectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProjectionMode::AllPairs => f.write_str("all_pairs"),
            ProjectionMode::Consecutive => f.write_str("consecutive"),
            ProjectionMode::TopVariance(k) => write!(f, "top_variance:{k}"),
        }
    }
}

impl FromStr for ProjectionMode {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, FeatureError> {
        match s {
            "all_pairs" => Ok(ProjectionMode::AllPairs),
            "consecutive" => Ok(ProjectionMode::Consecutive),
            _ => s
                .strip_prefix("top_variance:")
                .or_else(|| s.strip_prefix("top_variance(").and_then(|r| r.strip_suffix(')')))
                .and_then(|k| k.parse().ok())
                .map(ProjectionMode::TopVariance)
                .ok_or_else(|| FeatureError::UnknownMode(s.to_string())),
        }
    }
}

/// Lists 2D projections of an `n`-dimensional space. `variances` is only
/// consulted for [`ProjectionMode::TopVariance`], which ranks pairs by the
/// product of their per-dimension variances (ties in lexicographic order).
pub fn enumerate_projections(n: usize, mode: ProjectionMode, variances: &[f64]) -> Result<Vec<Projection>, FeatureError> {
    if n < 2 {
        return Err(FeatureError::TooFewDims(n));
    }
    let all: Vec<Projection> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| Projection { dim_a: a, dim_b: b }))
        .collect();
    match mode {
        ProjectionMode::AllPairs => Ok(all),
        ProjectionMode::Consecutive => Ok((0..n - 1).map(|a| Projection { dim_a: a, dim_b: a + 1 }).collect()),
        ProjectionMode::TopVariance(k) => {
            if k > all.len() {
                return Err(FeatureError::TooManyPairs { k, available: all.len() });
            }
            if variances.len() != n {
                return Err(FeatureError::VarianceLength {
                    got: variances.len(),
                    expected: n,
                });
            }
            let mut ranked = all;
            // stable sort keeps lexicographic order among equal products
            ranked.sort_by(|p, q| {
                let vp = variances[p.dim_a] * variances[p.dim_b];
                let vq = variances[q.dim_a] * variances[q.dim_b];
                vq.total_cmp(&vp)
            });
            ranked.truncate(k);
            Ok(ranked)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointColor {
    /// Train message of the target class (light green).
    TrainTarget,
    /// Optimization-test message of the target class, predicted correctly (blue).
    TestCorrect,
    /// Optimization-test message of the target class, mispredicted (red).
    TestIncorrect,
    /// Everything else (gray).
    Other,
}

impl PointColor {
    pub fn name(self) -> &'static str {
        match self {
            PointColor::TrainTarget => "train_target",
            PointColor::TestCorrect => "test_correct",
            PointColor::TestIncorrect => "test_incorrect",
            PointColor::Other => "other",
        }
    }
}

impl fmt::Display for PointColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub message_id: String,
    pub x: f64,
    pub y: f64,
    pub color: PointColor,
}

/// Colors every message of the split (train, then optimization-test, then
/// holdout) for one target class under one projection.
pub fn color_points(
    split: &Split,
    target: &ClassId,
    predictions: &PredictionSet,
    proj: Projection,
    space: &FeatureSpace,
) -> Result<Vec<ProjectedPoint>, FeatureError> {
    if proj.dim_b >= space.dims() || proj.dim_a >= proj.dim_b {
        return Err(FeatureError::InvalidProjection(proj.dim_a, proj.dim_b, space.dims()));
    }
    let mut out = Vec::with_capacity(split.train.len() + split.opt_test.len() + split.holdout.len());
    let mut push = |m: &Message, color| {
        let (x, y) = proj.coords(&space.vector(m));
        out.push(ProjectedPoint {
            message_id: m.id.clone(),
            x,
            y,
            color,
        });
    };
    for m in split.train.messages() {
        push(m, if &m.label == target { PointColor::TrainTarget } else { PointColor::Other });
    }
    for m in split.opt_test.messages() {
        let predicted = predictions
            .get(&m.id)
            .ok_or_else(|| FeatureError::MissingPrediction(m.id.clone()))?;
        let color = match (&m.label == target, predicted == target) {
            (true, true) => PointColor::TestCorrect,
            (true, false) => PointColor::TestIncorrect,
            (false, _) => PointColor::Other,
        };
        push(m, color);
    }
    for m in split.holdout.messages() {
        push(m, PointColor::Other);
    }
    Ok(out)
}

/// Train points of `target` under `proj`, as (id, x, y).
pub fn target_points(train: &LabeledDataset, target: &ClassId, proj: Projection, space: &FeatureSpace) -> Vec<(String, f64, f64)> {
    train
        .of_class(target)
        .map(|m| {
            let (x, y) = proj.coords(&space.vector(m));
            (m.id.clone(), x, y)
        })
        .collect()
}

/// `message_id<TAB>x<TAB>y<TAB>color` with a header line.
pub fn points_to_tsv(points: &[ProjectedPoint]) -> String {
    let mut out = String::from("message_id\tx\ty\tcolor\n");
    for p in points {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", p.message_id, p.x, p.y, p.color));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{stratified_split, SplitRatios};

    fn corpus() -> LabeledDataset {
        let mut msgs = Vec::new();
        for i in 0..12 {
            msgs.push(Message::new(format!("a{i:02}"), format!("printer jam paper tray {i}"), "A"));
            msgs.push(Message::new(format!("b{i:02}"), format!("password reset login locked {i}"), "B"));
        }
        LabeledDataset::new(msgs).unwrap()
    }

    #[test]
    fn identical_texts_identical_vectors() {
        let ds = corpus();
        let space = FeatureSpace::fit(&ds, EmbeddingConfig::default()).unwrap();
        assert_eq!(space.embed_text("reset my password"), space.embed_text("reset my password"));
        let v = space.embed(&ds);
        assert_eq!(v.len(), ds.len());
        for fv in v.values() {
            assert_eq!(fv.len(), 20);
            assert!(fv.0.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn single_message_is_all_mid() {
        let ds = LabeledDataset::new(vec![Message::new("x", "only one", "A")]).unwrap();
        let space = FeatureSpace::fit(&ds, EmbeddingConfig::default()).unwrap();
        assert!(space.embed(&ds)["x"].0.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn too_few_dims() {
        let cfg = EmbeddingConfig {
            dims: 1,
            ..Default::default()
        };
        assert_eq!(FeatureSpace::fit(&corpus(), cfg).unwrap_err(), FeatureError::TooFewDims(1));
    }

    #[test]
    fn train_extremes_hit_unit_interval() {
        let ds = corpus();
        let space = FeatureSpace::fit(&ds, EmbeddingConfig::default()).unwrap();
        let v = space.embed(&ds);
        for d in 0..20 {
            let lo = v.values().map(|f| f.0[d]).fold(f64::INFINITY, f64::min);
            let hi = v.values().map(|f| f.0[d]).fold(f64::NEG_INFINITY, f64::max);
            assert!(lo == 0.0 && hi == 1.0 || lo == 0.5 && hi == 0.5, "dim {d}: {lo} {hi}");
        }
    }

    #[test]
    fn fingerprint_tracks_config() {
        let ds = corpus();
        let a = FeatureSpace::fit(&ds, EmbeddingConfig::default()).unwrap();
        let b = FeatureSpace::fit(&ds, EmbeddingConfig { seed: 9, ..Default::default() }).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn projection_counts() {
        assert_eq!(enumerate_projections(20, ProjectionMode::AllPairs, &[]).unwrap().len(), 190);
        let c = enumerate_projections(3, ProjectionMode::Consecutive, &[]).unwrap();
        assert_eq!(c, vec![Projection { dim_a: 0, dim_b: 1 }, Projection { dim_a: 1, dim_b: 2 }]);
        assert!(matches!(
            enumerate_projections(4, ProjectionMode::TopVariance(7), &[0.0; 4]),
            Err(FeatureError::TooManyPairs { k: 7, available: 6 })
        ));
        assert!(enumerate_projections(1, ProjectionMode::AllPairs, &[]).is_err());
    }

    #[test]
    fn top_variance_by_hand() {
        // products: 01=.12 02=.08 03=.04 12=.06 13=.03 23=.02
        let p = enumerate_projections(4, ProjectionMode::TopVariance(2), &[0.4, 0.3, 0.2, 0.1]).unwrap();
        assert_eq!(p, vec![Projection { dim_a: 0, dim_b: 1 }, Projection { dim_a: 0, dim_b: 2 }]);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("top_variance:3".parse::<ProjectionMode>().unwrap(), ProjectionMode::TopVariance(3));
        assert_eq!("top_variance(3)".parse::<ProjectionMode>().unwrap(), ProjectionMode::TopVariance(3));
        assert_eq!(ProjectionMode::default().to_string(), "top_variance:10");
        assert!("diagonal".parse::<ProjectionMode>().is_err());
    }

    #[test]
    fn coloring_rules() {
        let ds = corpus();
        let split = stratified_split(&ds, &SplitRatios::default(), 1).unwrap();
        let space = FeatureSpace::fit(&split.train, EmbeddingConfig::default()).unwrap();
        let target = ClassId::from("A");
        // predict A for everything: A test points correct, B test points other
        let preds = PredictionSet::from_pairs(split.opt_test.messages().iter().map(|m| (m.id.clone(), target.clone())));
        let proj = Projection::new(0, 1, 20).unwrap();
        let pts = color_points(&split, &target, &preds, proj, &space).unwrap();
        assert_eq!(pts.len(), ds.len());
        let by_id: BTreeMap<&str, PointColor> = pts.iter().map(|p| (p.message_id.as_str(), p.color)).collect();
        for m in split.train.messages() {
            let want = if m.label == target { PointColor::TrainTarget } else { PointColor::Other };
            assert_eq!(by_id[m.id.as_str()], want);
        }
        for m in split.opt_test.messages() {
            let want = if m.label == target { PointColor::TestCorrect } else { PointColor::Other };
            assert_eq!(by_id[m.id.as_str()], want);
        }
        let wrong = PredictionSet::from_pairs(split.opt_test.messages().iter().map(|m| (m.id.clone(), "B".into())));
        let pts = color_points(&split, &target, &wrong, proj, &space).unwrap();
        assert!(pts.iter().any(|p| p.color == PointColor::TestIncorrect));
        let missing = PredictionSet::default();
        assert!(matches!(
            color_points(&split, &target, &missing, proj, &space),
            Err(FeatureError::MissingPrediction(_))
        ));
    }
}
