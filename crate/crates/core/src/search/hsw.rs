use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::sw::{window_candidates, ProjectedTargets};
use super::window::{sliding_windows, Window};
use super::{Candidate, CandidateSource, Provenance};
use crate::corpus::ClassId;
use crate::seed;

/// When a window gets subdivided.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Promising {
    /// Its best attempt beats the incumbent best value.
    #[default]
    ImprovesIncumbent,
    Always,
    Never,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HswParams {
    pub window_size: f64,
    pub stride: f64,
    pub k: usize,
    pub attempts_per_window: usize,
    pub max_depth: u32,
    pub promising: Promising,
}

impl Default for HswParams {
    fn default() -> Self {
        HswParams {
            window_size: 0.5,
            stride: 0.25,
            k: 8,
            attempts_per_window: 3,
            max_depth: 2,
            promising: Promising::ImprovesIncumbent,
        }
    }
}

/// Hierarchical sliding window. Level-0 windows are scanned like SW; a
/// promising window enqueues its four half-size quadrants (breadth-first) until
/// `max_depth`. One window is evaluated per batch so that the incumbent is
/// current when the next window is judged.
pub struct HswSearch {
    class: ClassId,
    params: HswParams,
    targets: Vec<ProjectedTargets>,
    queue: VecDeque<(Window, usize)>,
    incumbent: f64,
    current: Option<Window>,
    seed: u64,
    serial: usize,
    /// Every window that produced attempts, in order.
    pub visited: Vec<Window>,
}

impl HswSearch {
    pub fn new(targets: &[ProjectedTargets], class: &ClassId, params: &HswParams, baseline_value: f64, seed: u64) -> Self {
        assert!(params.max_depth >= 1, "max_depth must be at least 1");
        assert!(params.k >= 1, "k must be at least 1");
        let per_projection: Vec<Vec<Window>> = targets
            .iter()
            .map(|t| sliding_windows(t.projection, params.window_size, params.stride))
            .collect();
        let n_windows = per_projection.iter().map(Vec::len).max().unwrap_or(0);
        let mut queue = VecDeque::new();
        for wi in 0..n_windows {
            for (ti, windows) in per_projection.iter().enumerate() {
                if let Some(&w) = windows.get(wi) {
                    queue.push_back((w, ti));
                }
            }
        }
        HswSearch {
            class: class.clone(),
            params: *params,
            targets: targets.to_vec(),
            queue,
            incumbent: baseline_value,
            current: None,
            seed,
            serial: 0,
            visited: Vec::new(),
        }
    }

    pub fn queued(&self) -> impl Iterator<Item = &Window> {
        self.queue.iter().map(|(w, _)| w)
    }

    fn subdivide(&mut self, w: Window) {
        if w.depth >= self.params.max_depth {
            return;
        }
        let ti = self
            .targets
            .iter()
            .position(|t| t.projection == w.projection)
            .expect("window projection is one of the targets");
        for child in w.children() {
            self.queue.push_back((child, ti));
        }
    }
}

impl CandidateSource for HswSearch {
    fn next_batch(&mut self, remaining: usize) -> Vec<Candidate> {
        while let Some((w, ti)) = self.queue.pop_front() {
            let ids = self.targets[ti].in_window(&w);
            if ids.is_empty() {
                continue;
            }
            self.serial += 1;
            let s = seed::derive(self.seed, &[self.serial as u64]);
            let mut c = window_candidates(&self.class, &ids, w, self.params.k, self.params.attempts_per_window, s);
            c.truncate(remaining);
            self.current = Some(w);
            self.visited.push(w);
            return c;
        }
        Vec::new()
    }

    fn observe(&mut self, results: &[(Candidate, Option<f64>)]) {
        let Some(w) = self.current.take() else { return };
        let best = results.iter().filter_map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
        let promising = match self.params.promising {
            Promising::Always => true,
            Promising::Never => false,
            Promising::ImprovesIncumbent => best > self.incumbent,
        };
        if best > self.incumbent {
            self.incumbent = best;
        }
        debug_assert!(results.iter().all(|(c, _)| c.provenance == Provenance::Window(w)));
        if promising {
            self.subdivide(w);
        }
    }
}
