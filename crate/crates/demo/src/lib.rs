//! Browser bindings for three inspection views: projection coloring, window
//! geometry and phase budget allocation. Every export returns a JSON string.

use std::cell::RefCell;
use std::collections::BTreeMap;

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use synthsearch::classifier::ModelSpec;
use synthsearch::corpus::{ClassId, LabeledDataset, SplitRatios};
use synthsearch::ensemble::{allocate, allocation_weights};
use synthsearch::features::{color_points, EmbeddingConfig, Projection, ProjectionMode};
use synthsearch::knowledge::{summarize_best, KnowledgeMap, MapEntry, MapProvenance};
use synthsearch::metrics::{CbaVariant, Delta, MetricId, MetricKind, ScoreVector};
use synthsearch::pipeline::Workspace;
use synthsearch::search::{sliding_windows, Setting, StrategyKind, Window};
use synthsearch::toy;

fn dataset(name: &str) -> Result<LabeledDataset, String> {
    match name {
        "two_class" => Ok(toy::two_class()),
        "separable" => Ok(toy::separable()),
        "imbalanced" => Ok(toy::imbalanced()),
        "fifteen" => Ok(toy::fifteen()),
        _ => Err(format!("unknown dataset {name:?}")),
    }
}

struct Prepared {
    key: (String, u64),
    ws: Workspace,
    predictions: synthsearch::classifier::PredictionSet,
}

thread_local! {
    static CACHE: RefCell<Option<Prepared>> = const { RefCell::new(None) };
}

fn err(e: impl ToString) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn with_workspace<T>(name: &str, seed: u64, f: impl FnOnce(&Prepared) -> Result<T, String>) -> Result<T, String> {
    CACHE.with(|c| {
        let mut c = c.borrow_mut();
        let key = (name.to_string(), seed);
        if c.as_ref().is_none_or(|p| p.key != key) {
            let ds = dataset(name)?;
            let ws = Workspace::from_dataset(&ds, &SplitRatios::default(), seed, EmbeddingConfig::default(), ProjectionMode::default())
                .map_err(|e| e.to_string())?;
            let base = ws.baseline(&ModelSpec::default(), CbaVariant::Printed).map_err(|e| e.to_string())?;
            let predictions = base.model.predict(&ws.split.opt_test, &ws.space).map_err(|e| e.to_string())?;
            *c = Some(Prepared { key, ws, predictions });
        }
        f(c.as_ref().expect("filled above"))
    })
}

/// Class names and embedding size of a bundled dataset.
#[wasm_bindgen]
pub fn describe(name: &str, seed: u64) -> Result<String, JsValue> {
    with_workspace(name, seed, |p| {
        let projections: Vec<[usize; 2]> = p.ws.projections.iter().map(|q| [q.dim_a, q.dim_b]).collect();
        Ok(json!({
            "classes": p.ws.split.train.schema().iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "dims": p.ws.space.dims(),
            "projections": projections,
        })
        .to_string())
    })
    .map_err(err)
}

/// Every message of the split under one projection, colored for `class`.
#[wasm_bindgen]
pub fn projection(name: &str, seed: u64, class: &str, dim_a: usize, dim_b: usize) -> Result<String, JsValue> {
    with_workspace(name, seed, |p| {
        let class = ClassId::new(class);
        if !p.ws.split.train.schema().contains(&class) {
            return Err(format!("class {class:?} is not in the dataset"));
        }
        let proj = Projection::new(dim_a, dim_b, p.ws.space.dims()).map_err(|e| e.to_string())?;
        let points = color_points(&p.ws.split, &class, &p.predictions, proj, &p.ws.space).map_err(|e| e.to_string())?;
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for q in &points {
            *counts.entry(q.color.name()).or_default() += 1;
        }
        let rows: Vec<Value> = points.iter().map(|q| json!([q.x, q.y, q.color.name()])).collect();
        Ok(json!({ "points": rows, "counts": counts }).to_string())
    })
    .map_err(err)
}

fn window_json(w: &Window) -> Value {
    json!({ "x0": w.x0, "y0": w.y0, "x1": w.x1, "y1": w.y1, "depth": w.depth })
}

/// Level-0 sliding windows for a window size and stride on the unit square.
#[wasm_bindgen]
pub fn windows(size: f64, stride: f64) -> Result<String, JsValue> {
    if !(size > 0.0 && size <= 1.0) {
        return Err(err("window size must be in (0, 1]"));
    }
    if !(stride > 0.0 && stride <= size) {
        return Err(err("stride must be in (0, window size]"));
    }
    let ws = sliding_windows(Projection { dim_a: 0, dim_b: 1 }, size, stride);
    Ok(Value::Array(ws.iter().map(window_json).collect()).to_string())
}

/// The four quadrants a promising window is subdivided into.
#[wasm_bindgen]
pub fn children(x0: f64, y0: f64, x1: f64, y1: f64, depth: u32) -> String {
    let w = Window {
        projection: Projection { dim_a: 0, dim_b: 1 },
        x0,
        y0,
        x1,
        y1,
        depth,
    };
    Value::Array(w.children().iter().map(window_json).collect()).to_string()
}

/// Parses `STRATEGY DELTA` lines (`inf` allowed), splits `budget` across them
/// and reports which strategies fall within `band` points of the best.
#[wasm_bindgen]
pub fn allocation(budget: usize, text: &str, band: f64) -> Result<String, JsValue> {
    let mut rows: Vec<(StrategyKind, Delta)> = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut parts = line.split_whitespace();
        let (Some(s), Some(d), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(err(format!("line {}: expected `STRATEGY DELTA`", n + 1)));
        };
        let s: StrategyKind = s.parse().map_err(|e| err(format!("line {}: {e}", n + 1)))?;
        let d: Delta = d.parse().map_err(|e| err(format!("line {}: {e}", n + 1)))?;
        if rows.iter().any(|(k, _)| *k == s) {
            return Err(err(format!("line {}: {s} listed twice", n + 1)));
        }
        rows.push((s, d));
    }
    if rows.is_empty() {
        return Err(err("no strategies given"));
    }
    if band.is_nan() || band < 0.0 {
        return Err(err("band must be non-negative"));
    }
    let deltas: Vec<Delta> = rows.iter().map(|(_, d)| *d).collect();
    let weights = allocation_weights(&deltas);
    let alloc = allocate(budget, &weights).map_err(err)?;

    let class = ClassId::new("c");
    let schema = vec![class.clone()];
    let cols = MetricId::columns(&schema);
    let entries = rows
        .iter()
        .map(|(s, d)| {
            let setting = Setting::new(*s, MetricKind::Cr, class.clone());
            let mut ds = vec![Delta::Finite(0.0); cols.len()];
            ds[setting.objective().column_index(&schema).expect("objective is a column")] = *d;
            MapEntry {
                setting,
                deltas: ds,
                best_value: 0.0,
                baseline_value: 0.0,
            }
        })
        .collect();
    let map = KnowledgeMap {
        schema: schema.clone(),
        baseline: ScoreVector {
            schema,
            values: vec![0.0; cols.len()],
            undefined: Default::default(),
        },
        entries,
        provenance: MapProvenance::default(),
    };
    let best: Vec<String> = summarize_best(&map, band)
        .get(MetricKind::Cr, &class)
        .map(|set| set.iter().map(|s| s.to_string()).collect())
        .unwrap_or_default();
    let out: Vec<Value> = rows
        .iter()
        .zip(weights.iter().zip(&alloc))
        .map(|((s, d), (w, a))| json!({ "strategy": s.to_string(), "delta": d.to_string(), "weight": w, "attempts": a }))
        .collect();
    Ok(json!({ "rows": out, "best": best }).to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocation_and_band() {
        let v: Value = serde_json::from_str(&allocation(10, "SW 10\nHSW 5\nGA 9.98", 0.03).unwrap()).unwrap();
        let attempts: Vec<u64> = v["rows"].as_array().unwrap().iter().map(|r| r["attempts"].as_u64().unwrap()).collect();
        assert_eq!(attempts.iter().sum::<u64>(), 10);
        assert_eq!(v["best"], json!(["SW", "GA"]));
    }

    #[test]
    fn window_geometry() {
        let level0: Value = serde_json::from_str(&windows(0.5, 0.5).unwrap()).unwrap();
        assert_eq!(level0.as_array().unwrap().len(), 4);
        let kids: Value = serde_json::from_str(&children(0.0, 0.0, 0.5, 0.5, 0)).unwrap();
        assert_eq!(kids[3], json!({ "x0": 0.25, "y0": 0.25, "x1": 0.5, "y1": 0.5, "depth": 1 }));
    }

    #[test]
    fn projection_counts_cover_the_split() {
        let d: Value = serde_json::from_str(&describe("two_class", 1).unwrap()).unwrap();
        let class = d["classes"][0].as_str().unwrap().to_string();
        let [a, b] = [d["projections"][0][0].as_u64().unwrap(), d["projections"][0][1].as_u64().unwrap()];
        let v: Value = serde_json::from_str(&projection("two_class", 1, &class, a as usize, b as usize).unwrap()).unwrap();
        let total: u64 = v["counts"].as_object().unwrap().values().map(|n| n.as_u64().unwrap()).sum();
        assert_eq!(total as usize, v["points"].as_array().unwrap().len());
        assert_eq!(total as usize, toy::two_class().len());
    }
}
