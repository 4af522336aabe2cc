use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::window::{sliding_windows, Window};
use super::{Candidate, CandidateSource, Provenance};
use crate::corpus::ClassId;
use crate::features::Projection;
use crate::seed;
use crate::synthgen::ExampleSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwParams {
    pub window_size: f64,
    pub stride: f64,
    pub k: usize,
    pub attempts_per_window: usize,
}

impl Default for SwParams {
    fn default() -> Self {
        SwParams {
            window_size: 0.25,
            stride: 0.125,
            k: 8,
            attempts_per_window: 3,
        }
    }
}

/// Target-class train points under one projection, as (id, x, y).
#[derive(Clone, Debug)]
pub struct ProjectedTargets {
    pub projection: Projection,
    pub points: Vec<(String, f64, f64)>,
}

impl ProjectedTargets {
    pub fn in_window(&self, w: &Window) -> Vec<&str> {
        self.points
            .iter()
            .filter(|(_, x, y)| w.contains(*x, *y))
            .map(|(id, _, _)| id.as_str())
            .collect()
    }
}

/// Samples `attempts` example sets of `min(k, available)` ids uniformly without
/// replacement from the ids inside `window`.
pub(crate) fn window_candidates(
    class: &ClassId,
    ids: &[&str],
    window: Window,
    k: usize,
    attempts: usize,
    seed: u64,
) -> Vec<Candidate> {
    let take = k.min(ids.len());
    (0..attempts)
        .map(|a| {
            let mut rng = seed::rng(seed::derive(seed, &[a as u64]));
            let picked = index::sample(&mut rng, ids.len(), take);
            Candidate {
                examples: ExampleSet::new(class.clone(), picked.iter().map(|i| ids[i].to_string())),
                provenance: Provenance::Window(window),
            }
        })
        .collect()
}

fn window_seed(seed: u64, w: &Window, index: usize) -> u64 {
    seed::derive(
        seed,
        &[w.projection.dim_a as u64, w.projection.dim_b as u64, u64::from(w.depth), index as u64],
    )
}

/// All sliding-window candidates for the given projections. Windows are
/// visited round-robin across projections (window 1 of every projection,
/// then window 2, ...); windows without target points are skipped.
pub fn sw_attempts(targets: &[ProjectedTargets], class: &ClassId, params: &SwParams, seed: u64) -> Vec<Candidate> {
    assert!(params.k >= 1, "k must be at least 1");
    let per_projection: Vec<Vec<Window>> = targets
        .iter()
        .map(|t| sliding_windows(t.projection, params.window_size, params.stride))
        .collect();
    let n_windows = per_projection.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::new();
    for wi in 0..n_windows {
        for (t, windows) in targets.iter().zip(&per_projection) {
            let Some(&w) = windows.get(wi) else { continue };
            let ids = t.in_window(&w);
            if ids.is_empty() {
                continue;
            }
            out.extend(window_candidates(class, &ids, w, params.k, params.attempts_per_window, window_seed(seed, &w, wi)));
        }
    }
    out
}

/// Non-adaptive source over a precomputed candidate list.
pub struct SwSearch {
    candidates: std::vec::IntoIter<Candidate>,
    chunk: usize,
}

impl SwSearch {
    pub fn new(targets: &[ProjectedTargets], class: &ClassId, params: &SwParams, seed: u64) -> Self {
        SwSearch {
            candidates: sw_attempts(targets, class, params, seed).into_iter(),
            chunk: params.attempts_per_window.max(1) * 4,
        }
    }
}

impl CandidateSource for SwSearch {
    fn next_batch(&mut self, remaining: usize) -> Vec<Candidate> {
        self.candidates.by_ref().take(self.chunk.min(remaining)).collect()
    }

    fn observe(&mut self, _results: &[(Candidate, Option<f64>)]) {}
}
