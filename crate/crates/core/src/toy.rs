//! Small bundled corpora for tests, demos and the acceptance suite.
//!
//! Regenerate with `cargo run -p synthsearch --example make_toy_corpora`.

use crate::corpus::{parse_tsv, LabeledDataset};
use crate::synthgen::{parse_synonyms, SynonymTable};

/// Two overlapping IT-ticket classes, 60 messages each.
pub const TWO_CLASS: &str = include_str!("../data/two_class.tsv");
/// Two classes with disjoint vocabularies, 30 messages each.
pub const SEPARABLE: &str = include_str!("../data/separable.tsv");
/// 1000 tickets, 5% of them in the `escalation` class.
pub const IMBALANCED: &str = include_str!("../data/imbalanced.tsv");
/// Fifteen ticket classes, 40 messages each.
pub const FIFTEEN: &str = include_str!("../data/fifteen.tsv");
/// Synonym table covering the toy vocabularies.
pub const SYNONYMS: &str = include_str!("../data/synonyms.tsv");

pub const MINORITY: &str = "escalation";

fn parse(text: &str) -> LabeledDataset {
    parse_tsv(text).expect("bundled corpus parses")
}

pub fn two_class() -> LabeledDataset {
    parse(TWO_CLASS)
}

pub fn separable() -> LabeledDataset {
    parse(SEPARABLE)
}

pub fn imbalanced() -> LabeledDataset {
    parse(IMBALANCED)
}

pub fn fifteen() -> LabeledDataset {
    parse(FIFTEEN)
}

/// The fifteen-class corpus restricted to its first `n` classes.
pub fn first_classes(n: usize) -> LabeledDataset {
    let full = fifteen();
    let keep = &full.schema()[..n];
    LabeledDataset::new(full.messages().iter().filter(|m| keep.contains(&m.label)).cloned().collect())
        .expect("a class subset of the bundled corpus is valid")
}

pub fn synonyms() -> SynonymTable {
    parse_synonyms(SYNONYMS).expect("bundled synonym table parses")
}
