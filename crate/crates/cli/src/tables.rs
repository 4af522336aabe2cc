//! Plain-text tables printed by `ingest` and `baseline`.

use std::fmt::Write as _;

use synthsearch::corpus::{ClassId, Split};
use synthsearch::metrics::{balanced_accuracy, f1, recall, CbaVariant, ConfusionCounts};

/// Classes by descending size (name order on ties).
fn by_size(split: &Split) -> Vec<(ClassId, [usize; 3])> {
    let mut rows: Vec<(ClassId, [usize; 3])> = split
        .train
        .schema()
        .iter()
        .map(|c| {
            let n = [&split.train, &split.opt_test, &split.holdout].map(|p| p.of_class(c).count());
            (c.clone(), n)
        })
        .collect();
    rows.sort_by(|(a, x), (b, y)| y.iter().sum::<usize>().cmp(&x.iter().sum()).then_with(|| a.cmp(b)));
    rows
}

pub fn class_sizes(split: &Split) -> String {
    let mut out = String::from("| Class | Class Size | Train | Opt-test | Holdout |\n|---|---:|---:|---:|---:|\n");
    let mut total = [0usize; 3];
    for (c, n) in by_size(split) {
        writeln!(out, "| {c} | {} | {} | {} | {} |", n.iter().sum::<usize>(), n[0], n[1], n[2]).unwrap();
        for (t, v) in total.iter_mut().zip(n) {
            *t += v;
        }
    }
    writeln!(out, "| Overall | {} | {} | {} | {} |", total.iter().sum::<usize>(), total[0], total[1], total[2]).unwrap();
    out
}

/// Per-class balanced accuracy, recall and F1 of one model, with an overall
/// row over pooled counts. Class sizes are over the whole corpus.
pub fn model_table(split: &Split, counts: &ConfusionCounts, variant: CbaVariant) -> String {
    let mut out = String::from("| Class | Class Size | Balanced Accuracy | Recall | F1-Score |\n|---|---:|---:|---:|---:|\n");
    let mut total = 0;
    for (c, n) in by_size(split) {
        let size: usize = n.iter().sum();
        total += size;
        let k = counts.class(&c).copied().unwrap_or_default();
        writeln!(
            out,
            "| {c} | {size} | {:.3} | {:.3} | {:.3} |",
            balanced_accuracy(&k, variant).value,
            recall(&k).value,
            f1(&k).value
        )
        .unwrap();
    }
    let p = &counts.pooled;
    writeln!(
        out,
        "| Overall | {total} | {:.3} | {:.3} | {:.3} |",
        balanced_accuracy(p, variant).value,
        recall(p).value,
        f1(p).value
    )
    .unwrap();
    out
}
