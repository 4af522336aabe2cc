//! One-vs-rest confusion accounting and the four objective metrics.
//!
//! Class recall `CR_c = TP_c / (TP_c + FN_c)`.
//!
//! Class balanced accuracy, as printed, averages precision and negative
//! predictive value: `CBA_c = ½(TP_c/(TP_c+FP_c) + TN_c/(TN_c+FN_c))`.
//! [`CbaVariant::Standard`] switches both CBA and OBA to `½(TPR + TNR)`.
//!
//! Overall metrics use pooled (micro-summed) counts:
//! `OF1 = 2TP / (2TP + FP + FN)` and `OBA` as CBA over the pooled counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::PredictionSet;
use crate::corpus::{ClassId, LabeledDataset};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("predictions do not cover the dataset: missing {missing:?}, extra {extra:?}")]
    Coverage {
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("prediction for {id:?} is {label:?}, which is outside the schema")]
    UnknownPrediction { id: String, label: String },
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("score vectors are over different schemas")]
    SchemaMismatch,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl std::ops::Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub schema: Vec<ClassId>,
    /// Indexed like `schema`.
    pub per_class: Vec<Counts>,
    pub pooled: Counts,
}

impl ConfusionCounts {
    pub fn class(&self, class: &ClassId) -> Option<&Counts> {
        self.schema
            .iter()
            .position(|c| c == class)
            .map(|i| &self.per_class[i])
    }

    /// Builds counts from parallel label-index slices.
    pub fn from_indices(schema: Vec<ClassId>, truth: &[usize], predicted: &[usize]) -> Self {
        assert_eq!(truth.len(), predicted.len());
        let k = schema.len();
        let n = truth.len() as u64;
        let mut tp = vec![0u64; k];
        let mut support = vec![0u64; k];
        let mut predicted_as = vec![0u64; k];
        for (&t, &p) in truth.iter().zip(predicted) {
            support[t] += 1;
            predicted_as[p] += 1;
            if t == p {
                tp[t] += 1;
            }
        }
        let per_class: Vec<Counts> = (0..k)
            .map(|c| {
                let fp = predicted_as[c] - tp[c];
                let fn_ = support[c] - tp[c];
                Counts {
                    tp: tp[c],
                    fp,
                    fn_,
                    tn: n - tp[c] - fp - fn_,
                }
            })
            .collect();
        let pooled = per_class.iter().fold(Counts::default(), |a, &b| a + b);
        ConfusionCounts {
            schema,
            per_class,
            pooled,
        }
    }
}

pub fn confusion(truth: &LabeledDataset, preds: &PredictionSet) -> Result<ConfusionCounts, MetricError> {
    let mut missing = Vec::new();
    let mut t_idx = Vec::with_capacity(truth.len());
    let mut p_idx = Vec::with_capacity(truth.len());
    for m in truth.messages() {
        match preds.get(&m.id) {
            None => missing.push(m.id.clone()),
            Some(label) => {
                let p = truth.class_index(label).ok_or_else(|| MetricError::UnknownPrediction {
                    id: m.id.clone(),
                    label: label.to_string(),
                })?;
                t_idx.push(truth.class_index(&m.label).expect("dataset labels are in schema"));
                p_idx.push(p);
            }
        }
    }
    let extra: Vec<String> = if preds.len() + missing.len() != truth.len() {
        let ids: BTreeSet<&str> = truth.messages().iter().map(|m| m.id.as_str()).collect();
        preds
            .ids()
            .filter(|id| !ids.contains(id))
            .map(str::to_string)
            .collect()
    } else {
        Vec::new()
    };
    if !missing.is_empty() || !extra.is_empty() {
        return Err(MetricError::Coverage { missing, extra });
    }
    Ok(ConfusionCounts::from_indices(truth.schema().to_vec(), &t_idx, &p_idx))
}

/// A ratio that may have had a zero denominator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ratio {
    pub value: f64,
    pub defined: bool,
}

impl Ratio {
    pub fn of(num: u64, den: u64) -> Ratio {
        if den == 0 {
            Ratio {
                value: 0.0,
                defined: false,
            }
        } else {
            Ratio {
                value: num as f64 / den as f64,
                defined: true,
            }
        }
    }

    /// Mean of two ratios; undefined if either term is undefined.
    fn half_sum(a: Ratio, b: Ratio) -> Ratio {
        Ratio {
            value: 0.5 * (a.value + b.value),
            defined: a.defined && b.defined,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CbaVariant {
    /// ½(precision + negative predictive value).
    #[default]
    Printed,
    /// ½(true positive rate + true negative rate).
    Standard,
}

impl FromStr for CbaVariant {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, MetricError> {
        match s {
            "printed" => Ok(CbaVariant::Printed),
            "standard" => Ok(CbaVariant::Standard),
            other => Err(MetricError::UnknownMetric(format!("cba variant {other}"))),
        }
    }
}

impl fmt::Display for CbaVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CbaVariant::Printed => "printed",
            CbaVariant::Standard => "standard",
        })
    }
}

pub fn recall(c: &Counts) -> Ratio {
    Ratio::of(c.tp, c.tp + c.fn_)
}

pub fn balanced_accuracy(c: &Counts, variant: CbaVariant) -> Ratio {
    match variant {
        CbaVariant::Printed => Ratio::half_sum(Ratio::of(c.tp, c.tp + c.fp), Ratio::of(c.tn, c.tn + c.fn_)),
        CbaVariant::Standard => Ratio::half_sum(Ratio::of(c.tp, c.tp + c.fn_), Ratio::of(c.tn, c.tn + c.fp)),
    }
}

pub fn f1(c: &Counts) -> Ratio {
    Ratio::of(2 * c.tp, 2 * c.tp + c.fp + c.fn_)
}

pub fn class_recall(counts: &ConfusionCounts, class: usize) -> Ratio {
    recall(&counts.per_class[class])
}

pub fn class_balanced_accuracy(counts: &ConfusionCounts, class: usize, variant: CbaVariant) -> Ratio {
    balanced_accuracy(&counts.per_class[class], variant)
}

pub fn overall_balanced_accuracy(counts: &ConfusionCounts, variant: CbaVariant) -> Ratio {
    balanced_accuracy(&counts.pooled, variant)
}

pub fn overall_f1(counts: &ConfusionCounts) -> Ratio {
    f1(&counts.pooled)
}

/// The four metric families, without a class binding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "CR")]
    Cr,
    #[serde(rename = "CBA")]
    Cba,
    #[serde(rename = "OBA")]
    Oba,
    #[serde(rename = "OF1")]
    Of1,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [MetricKind::Cr, MetricKind::Cba, MetricKind::Oba, MetricKind::Of1];

    pub fn is_class_based(self) -> bool {
        matches!(self, MetricKind::Cr | MetricKind::Cba)
    }

    /// The objective this kind denotes when examples come from `class`.
    pub fn on(self, class: &ClassId) -> MetricId {
        match self {
            MetricKind::Cr => MetricId::Cr(class.clone()),
            MetricKind::Cba => MetricId::Cba(class.clone()),
            MetricKind::Oba => MetricId::Oba,
            MetricKind::Of1 => MetricId::Of1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Cr => "CR",
            MetricKind::Cba => "CBA",
            MetricKind::Oba => "OBA",
            MetricKind::Of1 => "OF1",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, MetricError> {
        match s.to_ascii_uppercase().as_str() {
            "CR" => Ok(MetricKind::Cr),
            "CBA" => Ok(MetricKind::Cba),
            "OBA" => Ok(MetricKind::Oba),
            "OF1" => Ok(MetricKind::Of1),
            _ => Err(MetricError::UnknownMetric(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricId {
    Cr(ClassId),
    Cba(ClassId),
    Oba,
    Of1,
}

impl MetricId {
    pub fn kind(&self) -> MetricKind {
        match self {
            MetricId::Cr(_) => MetricKind::Cr,
            MetricId::Cba(_) => MetricKind::Cba,
            MetricId::Oba => MetricKind::Oba,
            MetricId::Of1 => MetricKind::Of1,
        }
    }

    pub fn class(&self) -> Option<&ClassId> {
        match self {
            MetricId::Cr(c) | MetricId::Cba(c) => Some(c),
            _ => None,
        }
    }

    /// Column order used by every table: CR per class, CBA per class, OBA, OF1.
    pub fn columns(schema: &[ClassId]) -> Vec<MetricId> {
        let mut cols: Vec<MetricId> = schema.iter().map(|c| MetricId::Cr(c.clone())).collect();
        cols.extend(schema.iter().map(|c| MetricId::Cba(c.clone())));
        cols.push(MetricId::Oba);
        cols.push(MetricId::Of1);
        cols
    }

    /// Position of this metric in [`MetricId::columns`].
    pub fn column_index(&self, schema: &[ClassId]) -> Option<usize> {
        let k = schema.len();
        match self {
            MetricId::Cr(c) => schema.iter().position(|s| s == c),
            MetricId::Cba(c) => schema.iter().position(|s| s == c).map(|i| k + i),
            MetricId::Oba => Some(2 * k),
            MetricId::Of1 => Some(2 * k + 1),
        }
    }

    /// Parses a metric name plus an optional class (`-` or empty for none).
    pub fn parse_parts(metric: &str, class: &str) -> Result<MetricId, MetricError> {
        let kind: MetricKind = metric.parse()?;
        let class = class.trim();
        let has_class = !class.is_empty() && class != "-";
        match (kind.is_class_based(), has_class) {
            (true, true) => Ok(kind.on(&ClassId::new(class))),
            (false, _) => Ok(kind.on(&ClassId::new("-"))),
            (true, false) => Err(MetricError::UnknownMetric(format!("{metric} needs a class"))),
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricId::Cr(c) => write!(f, "CR:{c}"),
            MetricId::Cba(c) => write!(f, "CBA:{c}"),
            MetricId::Oba => f.write_str("OBA"),
            MetricId::Of1 => f.write_str("OF1"),
        }
    }
}

impl FromStr for MetricId {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, MetricError> {
        match s.split_once(':') {
            Some((m, c)) => MetricId::parse_parts(m, c),
            None => MetricId::parse_parts(s, ""),
        }
    }
}

/// Every metric for one model on one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub schema: Vec<ClassId>,
    /// Values in [`MetricId::columns`] order.
    pub values: Vec<f64>,
    /// Metrics whose denominator was zero; their value is reported as 0.0.
    pub undefined: BTreeSet<MetricId>,
}

impl ScoreVector {
    pub fn from_counts(counts: &ConfusionCounts, variant: CbaVariant) -> Self {
        let k = counts.schema.len();
        let mut values = Vec::with_capacity(2 * k + 2);
        let mut undefined = BTreeSet::new();
        let columns = MetricId::columns(&counts.schema);
        let ratios = (0..k)
            .map(|c| class_recall(counts, c))
            .chain((0..k).map(|c| class_balanced_accuracy(counts, c, variant)))
            .chain([overall_balanced_accuracy(counts, variant), overall_f1(counts)]);
        for (id, r) in columns.into_iter().zip(ratios) {
            if !r.defined {
                undefined.insert(id);
            }
            values.push(r.value);
        }
        ScoreVector {
            schema: counts.schema.clone(),
            values,
            undefined,
        }
    }

    pub fn get(&self, id: &MetricId) -> Option<f64> {
        id.column_index(&self.schema).map(|i| self.values[i])
    }

    pub fn columns(&self) -> Vec<MetricId> {
        MetricId::columns(&self.schema)
    }

    pub fn iter(&self) -> impl Iterator<Item = (MetricId, f64)> + '_ {
        self.columns().into_iter().zip(self.values.iter().copied())
    }

    pub fn header_tsv(&self) -> String {
        let cols: Vec<String> = self.columns().iter().map(|c| c.to_string()).collect();
        cols.join("\t")
    }

    /// One TSV row in column order. Values use shortest round-trip formatting.
    pub fn row_tsv(&self) -> String {
        let vals: Vec<String> = self.values.iter().map(|v| format!("{v}")).collect();
        vals.join("\t")
    }

    /// Header, values and (if any) a line naming the undefined metrics.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("{}\n{}\n", self.header_tsv(), self.row_tsv());
        if !self.undefined.is_empty() {
            let names: Vec<String> = self.undefined.iter().map(|m| m.to_string()).collect();
            out.push_str(&format!("# undefined (zero denominator, reported as 0): {}\n", names.join(",")));
        }
        out
    }
}

pub fn score_vector(
    truth: &LabeledDataset,
    preds: &PredictionSet,
    variant: CbaVariant,
) -> Result<ScoreVector, MetricError> {
    confusion(truth, preds).map(|c| ScoreVector::from_counts(&c, variant))
}

/// Relative change in percent. Infinite when the baseline is zero and the new
/// value is positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Delta {
    Finite(f64),
    Infinite,
}

impl Delta {
    pub fn between(before: f64, after: f64) -> Delta {
        if before > 0.0 {
            Delta::Finite(100.0 * (after - before) / before)
        } else if after > before {
            Delta::Infinite
        } else {
            Delta::Finite(0.0)
        }
    }

    pub fn is_positive(&self) -> bool {
        match self {
            Delta::Infinite => true,
            Delta::Finite(v) => *v > 0.0,
        }
    }

    pub fn is_negative(&self) -> bool {
        matches!(self, Delta::Finite(v) if *v < 0.0)
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Delta::Finite(v) => Some(*v),
            Delta::Infinite => None,
        }
    }

    /// Total order with `Infinite` above every finite value.
    pub fn cmp_total(&self, other: &Delta) -> std::cmp::Ordering {
        match (self, other) {
            (Delta::Infinite, Delta::Infinite) => std::cmp::Ordering::Equal,
            (Delta::Infinite, _) => std::cmp::Ordering::Greater,
            (_, Delta::Infinite) => std::cmp::Ordering::Less,
            (Delta::Finite(a), Delta::Finite(b)) => a.total_cmp(b),
        }
    }

    /// Table rendering: two decimals, `######` for infinity.
    pub fn render(&self) -> String {
        match self {
            Delta::Infinite => "######".to_string(),
            Delta::Finite(v) => format!("{v:.2}"),
        }
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delta::Infinite => f.write_str("inf"),
            Delta::Finite(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Delta {
    type Err = std::num::ParseFloatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inf" | "######" => Ok(Delta::Infinite),
            _ => s.parse().map(Delta::Finite),
        }
    }
}

pub fn delta_percent(before: &ScoreVector, after: &ScoreVector) -> Result<BTreeMap<MetricId, Delta>, MetricError> {
    if before.schema != after.schema {
        return Err(MetricError::SchemaMismatch);
    }
    Ok(before
        .iter()
        .zip(after.values.iter())
        .map(|((id, b), &a)| (id, Delta::between(b, a)))
        .collect())
}

/// [`delta_percent`] as a vector in column order.
pub fn delta_row(before: &ScoreVector, after: &ScoreVector) -> Result<Vec<Delta>, MetricError> {
    if before.schema != after.schema {
        return Err(MetricError::SchemaMismatch);
    }
    Ok(before
        .values
        .iter()
        .zip(&after.values)
        .map(|(&b, &a)| Delta::between(b, a))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Message;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    fn truth_and_preds(truth: &[&str], pred: &[&str]) -> (LabeledDataset, PredictionSet) {
        let msgs: Vec<Message> = truth
            .iter()
            .enumerate()
            .map(|(i, l)| Message::new(format!("m{i}"), "x", *l))
            .collect();
        let ds = LabeledDataset::new(msgs).unwrap();
        let preds = PredictionSet::from_pairs(
            pred.iter()
                .enumerate()
                .map(|(i, l)| (format!("m{i}"), ClassId::from(*l))),
        );
        (ds, preds)
    }

    #[test]
    fn all_correct_has_no_errors() {
        let (ds, p) = truth_and_preds(&["A", "B", "A"], &["A", "B", "A"]);
        let c = confusion(&ds, &p).unwrap();
        for pc in &c.per_class {
            assert_eq!((pc.fp, pc.fn_), (0, 0));
        }
    }

    #[test]
    fn three_item_hand_enumeration() {
        let (ds, p) = truth_and_preds(&["A", "A", "B"], &["A", "B", "B"]);
        let c = confusion(&ds, &p).unwrap();
        assert_eq!(c.per_class[0], Counts { tp: 1, fn_: 1, fp: 0, tn: 1 });
        assert_eq!(c.per_class[1], Counts { tp: 1, fp: 1, fn_: 0, tn: 1 });
        assert_eq!(c.pooled, Counts { tp: 2, fp: 1, fn_: 1, tn: 2 });
    }

    #[test]
    fn empty_dataset_zero_counts() {
        let ds = LabeledDataset::empty(vec!["A".into(), "B".into()]);
        let c = confusion(&ds, &PredictionSet::default()).unwrap();
        assert!(c.per_class.iter().all(|pc| pc.total() == 0));
    }

    #[test]
    fn coverage_mismatch_lists_ids() {
        let (ds, _) = truth_and_preds(&["A", "B"], &["A", "B"]);
        let p = PredictionSet::from_pairs([("m0".to_string(), ClassId::from("A")), ("zz".to_string(), "B".into())]);
        assert_eq!(
            confusion(&ds, &p).unwrap_err(),
            MetricError::Coverage {
                missing: vec!["m1".into()],
                extra: vec!["zz".into()]
            }
        );
    }

    #[test]
    fn recall_half() {
        let c = Counts { tp: 5, fn_: 5, fp: 0, tn: 0 };
        assert_eq!(recall(&c).value, 0.5);
    }

    #[test]
    fn cba_perfect() {
        let c = Counts { tp: 1, fp: 0, tn: 1, fn_: 0 };
        assert_eq!(balanced_accuracy(&c, CbaVariant::Printed).value, 1.0);
        assert_eq!(balanced_accuracy(&c, CbaVariant::Standard).value, 1.0);
    }

    #[test]
    fn pooled_arithmetic() {
        let c = Counts { tp: 8, fp: 2, tn: 88, fn_: 2 };
        assert!(approx(f1(&c).value, 0.8));
        assert!(approx(balanced_accuracy(&c, CbaVariant::Printed).value, 0.5 * (0.8 + 88.0 / 90.0)));
        assert!((balanced_accuracy(&c, CbaVariant::Printed).value - 0.8889).abs() < 1e-4);
    }

    #[test]
    fn variants_differ_when_precision_differs_from_recall() {
        // TP=2 FP=1 TN=5 FN=2
        let c = Counts { tp: 2, fp: 1, tn: 5, fn_: 2 };
        assert!(approx(balanced_accuracy(&c, CbaVariant::Printed).value, 0.5 * (2.0 / 3.0 + 5.0 / 7.0)));
        assert!(approx(balanced_accuracy(&c, CbaVariant::Standard).value, 0.5 * (2.0 / 4.0 + 5.0 / 6.0)));
    }

    #[test]
    fn zero_denominator_is_flagged() {
        let r = recall(&Counts::default());
        assert_eq!((r.value, r.defined), (0.0, false));
    }

    #[test]
    fn perfect_score_vector() {
        let (ds, p) = truth_and_preds(&["A", "B", "C", "A"], &["A", "B", "C", "A"]);
        let s = score_vector(&ds, &p, CbaVariant::Printed).unwrap();
        assert!(s.values.iter().all(|&v| v == 1.0));
        assert!(s.undefined.is_empty());
    }

    #[test]
    fn all_wrong_two_class() {
        let (ds, p) = truth_and_preds(&["A", "B", "A"], &["B", "A", "B"]);
        let s = score_vector(&ds, &p, CbaVariant::Printed).unwrap();
        assert_eq!(s.get(&MetricId::Cr("A".into())), Some(0.0));
        assert_eq!(s.get(&MetricId::Cr("B".into())), Some(0.0));
    }

    #[test]
    fn never_predicted_class_has_zero_recall() {
        let (ds, p) = truth_and_preds(&["R1", "R2", "R1", "R2"], &["R1", "R1", "R1", "R1"]);
        let s = score_vector(&ds, &p, CbaVariant::Printed).unwrap();
        assert_eq!(s.get(&MetricId::Cr("R2".into())), Some(0.0));
        // precision of R2 is 0/0
        assert!(s.undefined.contains(&MetricId::Cba("R2".into())));
    }

    #[test]
    fn delta_semantics() {
        assert!(matches!(Delta::between(0.5, 0.6), Delta::Finite(v) if (v - 20.0).abs() < 1e-9));
        assert_eq!(Delta::between(0.4, 0.4), Delta::Finite(0.0));
        assert_eq!(Delta::between(0.0, 0.158), Delta::Infinite);
        assert_eq!(Delta::between(0.0, 0.0), Delta::Finite(0.0));
        assert_eq!(Delta::Infinite.render(), "######");
    }

    #[test]
    fn metric_id_round_trip() {
        for s in ["CR:T1", "CBA:ABBR", "OBA", "OF1"] {
            assert_eq!(s.parse::<MetricId>().unwrap().to_string(), s);
        }
        assert!("CR".parse::<MetricId>().is_err());
        assert_eq!(MetricId::parse_parts("OBA", "-").unwrap(), MetricId::Oba);
    }

    #[test]
    fn column_layout() {
        let schema: Vec<ClassId> = vec!["A".into(), "B".into()];
        let cols: Vec<String> = MetricId::columns(&schema).iter().map(|c| c.to_string()).collect();
        assert_eq!(cols, ["CR:A", "CR:B", "CBA:A", "CBA:B", "OBA", "OF1"]);
        for (i, c) in MetricId::columns(&schema).iter().enumerate() {
            assert_eq!(c.column_index(&schema), Some(i));
        }
    }
}
