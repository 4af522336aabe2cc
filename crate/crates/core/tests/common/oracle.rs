//! Brute-force reference for the classification metrics, written from the
//! definitions without sharing code with the library.

#[derive(Clone, Debug, PartialEq)]
pub struct OracleCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

#[derive(Clone, Debug)]
pub struct OracleScores {
    pub per_class: Vec<OracleCounts>,
    pub pooled: OracleCounts,
    pub cr: Vec<f64>,
    pub cba_printed: Vec<f64>,
    pub cba_standard: Vec<f64>,
    pub oba_printed: f64,
    pub oba_standard: f64,
    pub of1: f64,
}

fn div(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn counts_for(class: &str, truth: &[String], pred: &[String]) -> OracleCounts {
    let mut c = OracleCounts { tp: 0, fp: 0, tn: 0, fn_: 0 };
    for (t, p) in truth.iter().zip(pred) {
        match (t == class, p == class) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

fn printed(c: &OracleCounts) -> f64 {
    (div(c.tp, c.tp + c.fp) + div(c.tn, c.tn + c.fn_)) / 2.0
}

fn standard(c: &OracleCounts) -> f64 {
    (div(c.tp, c.tp + c.fn_) + div(c.tn, c.tn + c.fp)) / 2.0
}

pub fn brute(schema: &[String], truth: &[String], pred: &[String]) -> OracleScores {
    let per_class: Vec<OracleCounts> = schema.iter().map(|c| counts_for(c, truth, pred)).collect();
    let mut pooled = OracleCounts { tp: 0, fp: 0, tn: 0, fn_: 0 };
    for c in &per_class {
        pooled.tp += c.tp;
        pooled.fp += c.fp;
        pooled.tn += c.tn;
        pooled.fn_ += c.fn_;
    }
    OracleScores {
        cr: per_class.iter().map(|c| div(c.tp, c.tp + c.fn_)).collect(),
        cba_printed: per_class.iter().map(printed).collect(),
        cba_standard: per_class.iter().map(standard).collect(),
        oba_printed: printed(&pooled),
        oba_standard: standard(&pooled),
        of1: div(2 * pooled.tp, 2 * pooled.tp + pooled.fp + pooled.fn_),
        per_class,
        pooled,
    }
}
