use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Candidate, CandidateSource, Provenance};
use crate::corpus::ClassId;
use crate::seed;
use crate::synthgen::ExampleSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    /// Upper bound on selected examples per chromosome.
    pub k_max: usize,
    pub crossover_rate: f64,
    /// Per-bit flip probability; `None` means `1 / m`.
    pub mutation_rate: Option<f64>,
    pub tournament: usize,
    /// Attempts at producing a not-yet-seen child before giving up on a slot.
    pub max_repair: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            population: 20,
            generations: 50,
            k_max: 16,
            crossover_rate: 0.9,
            mutation_rate: None,
            tournament: 3,
            max_repair: 32,
        }
    }
}

type Bits = Vec<bool>;

fn bit_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Genetic search over subsets of the target-class train messages. A
/// chromosome has one bit per member (members sorted by id). Every emitted
/// chromosome is distinct from all earlier ones.
pub struct GaSearch {
    class: ClassId,
    members: Vec<String>,
    params: GaParams,
    rng: ChaCha8Rng,
    seen: HashSet<Bits>,
    population: Vec<(Bits, f64)>,
    pending: Vec<Bits>,
    generation: usize,
    initialized: bool,
    done: bool,
    warnings: Vec<String>,
}

impl GaSearch {
    pub fn new(members: Vec<String>, class: &ClassId, params: &GaParams, seed: u64) -> Self {
        assert!(params.population >= 1 && params.tournament >= 1 && params.k_max >= 1);
        let mut members = members;
        members.sort();
        members.dedup();
        GaSearch {
            class: class.clone(),
            done: members.is_empty(),
            members,
            params: *params,
            rng: seed::rng(seed),
            seen: HashSet::new(),
            population: Vec::new(),
            pending: Vec::new(),
            generation: 0,
            initialized: false,
            warnings: Vec::new(),
        }
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    fn m(&self) -> usize {
        self.members.len()
    }

    fn exhausted(&self) -> bool {
        let m = self.m();
        m < 63 && self.seen.len() as u64 >= (1u64 << m) - 1
    }

    fn candidate(&self, bits: &Bits) -> Candidate {
        let ids = bits
            .iter()
            .zip(&self.members)
            .filter(|(b, _)| **b)
            .map(|(_, id)| id.clone());
        Candidate {
            examples: ExampleSet::new(self.class.clone(), ids),
            provenance: Provenance::Chromosome(bit_string(bits)),
        }
    }

    fn random_chromosome(&mut self) -> Bits {
        let m = self.m();
        let s = self.rng.gen_range(1..=self.params.k_max.min(m));
        let mut bits = vec![false; m];
        for i in index::sample(&mut self.rng, m, s).iter() {
            bits[i] = true;
        }
        bits
    }

    /// Forces at least one and at most `k_max` selected bits.
    fn repair(&mut self, bits: &mut Bits) {
        let on: Vec<usize> = (0..bits.len()).filter(|&i| bits[i]).collect();
        if on.is_empty() {
            let i = self.rng.gen_range(0..bits.len());
            bits[i] = true;
        } else if on.len() > self.params.k_max {
            for j in index::sample(&mut self.rng, on.len(), on.len() - self.params.k_max).iter() {
                bits[on[j]] = false;
            }
        }
    }

    fn tournament(&mut self) -> usize {
        let mut best = self.rng.gen_range(0..self.population.len());
        for _ in 1..self.params.tournament {
            let c = self.rng.gen_range(0..self.population.len());
            if self.population[c].1 > self.population[best].1 {
                best = c;
            }
        }
        best
    }

    fn offspring(&mut self) -> Bits {
        let m = self.m();
        let a = self.tournament();
        let b = self.tournament();
        let mut child = if self.rng.gen::<f64>() < self.params.crossover_rate {
            (0..m)
                .map(|i| {
                    let from_a = self.rng.gen::<bool>();
                    if from_a {
                        self.population[a].0[i]
                    } else {
                        self.population[b].0[i]
                    }
                })
                .collect()
        } else {
            self.population[a].0.clone()
        };
        let rate = self.params.mutation_rate.unwrap_or(1.0 / m as f64);
        for bit in child.iter_mut() {
            if self.rng.gen::<f64>() < rate {
                *bit = !*bit;
            }
        }
        self.repair(&mut child);
        child
    }

    /// Up to `want` novel chromosomes from `make`, each with `max_repair` tries.
    fn novel(&mut self, want: usize, make: fn(&mut Self) -> Bits) -> Vec<Bits> {
        let mut out = Vec::new();
        for _ in 0..want {
            if self.exhausted() {
                break;
            }
            for _ in 0..self.params.max_repair.max(1) {
                let c = make(self);
                if self.seen.insert(c.clone()) {
                    out.push(c);
                    break;
                }
            }
        }
        out
    }

    fn stop(&mut self, why: &str) {
        self.done = true;
        self.warnings.push(format!("GA stopped early after generation {}: {why}", self.generation));
    }
}

impl CandidateSource for GaSearch {
    fn next_batch(&mut self, remaining: usize) -> Vec<Candidate> {
        if self.done || remaining == 0 {
            return Vec::new();
        }
        let want = self.params.population.min(remaining);
        let batch = if !self.initialized {
            self.initialized = true;
            self.novel(want, Self::random_chromosome)
        } else {
            if self.generation >= self.params.generations {
                self.done = true;
                return Vec::new();
            }
            if self.exhausted() {
                self.stop("every subset has been evaluated");
                return Vec::new();
            }
            let b = self.novel(want, Self::offspring);
            if b.is_empty() {
                self.stop("no novel chromosome could be produced");
            }
            b
        };
        self.pending = batch;
        self.pending.iter().map(|b| self.candidate(b)).collect()
    }

    fn observe(&mut self, results: &[(Candidate, Option<f64>)]) {
        let pending = std::mem::take(&mut self.pending);
        debug_assert_eq!(pending.len(), results.len());
        if pending.is_empty() {
            return;
        }
        let was_initial = self.population.is_empty();
        for (bits, (_, v)) in pending.into_iter().zip(results) {
            self.population.push((bits, v.unwrap_or(f64::NEG_INFINITY)));
        }
        // (mu + lambda): keep the best r of parents and children, earlier on ties
        self.population.sort_by(|a, b| b.1.total_cmp(&a.1));
        self.population.truncate(self.params.population);
        if !was_initial {
            self.generation += 1;
        }
    }

    fn warnings(&self) -> Vec<String> {
        self.warnings.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn members(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("m{i:02}")).collect()
    }

    fn run(s: &mut GaSearch, budget: usize, fitness: impl Fn(&Candidate) -> f64) -> Vec<Candidate> {
        let mut all = Vec::new();
        while all.len() < budget {
            let batch = s.next_batch(budget - all.len());
            if batch.is_empty() {
                break;
            }
            let results: Vec<_> = batch.iter().map(|c| (c.clone(), Some(fitness(c)))).collect();
            s.observe(&results);
            all.extend(batch);
        }
        all
    }

    #[test]
    fn chromosomes_are_unique_and_nonempty() {
        let p = GaParams {
            population: 10,
            generations: 20,
            k_max: 4,
            ..GaParams::default()
        };
        let mut s = GaSearch::new(members(12), &"A".into(), &p, 7);
        let all = run(&mut s, 500, |c| c.examples.len() as f64);
        let distinct: HashSet<_> = all.iter().map(|c| c.examples.clone()).collect();
        assert_eq!(distinct.len(), all.len());
        assert!(all.iter().all(|c| (1..=4).contains(&c.examples.len())));
    }

    #[test]
    fn stops_when_every_subset_is_seen() {
        let p = GaParams {
            population: 4,
            generations: 100,
            k_max: 3,
            max_repair: 200,
            ..GaParams::default()
        };
        let mut s = GaSearch::new(members(3), &"A".into(), &p, 1);
        let all = run(&mut s, 1000, |_| 0.0);
        assert_eq!(all.len(), 7);
        assert!(!s.warnings().is_empty());
    }

    #[test]
    fn respects_budget_and_is_deterministic() {
        let p = GaParams::default();
        let a = run(&mut GaSearch::new(members(30), &"A".into(), &p, 3), 45, |c| c.examples.len() as f64);
        let b = run(&mut GaSearch::new(members(30), &"A".into(), &p, 3), 45, |c| c.examples.len() as f64);
        assert_eq!(a.len(), 45);
        assert_eq!(a, b);
    }

    #[test]
    fn selection_climbs_a_simple_fitness() {
        // reward chromosomes containing m00
        let p = GaParams {
            population: 8,
            generations: 15,
            k_max: 3,
            ..GaParams::default()
        };
        let mut s = GaSearch::new(members(20), &"A".into(), &p, 11);
        let fit = |c: &Candidate| if c.examples.message_ids.contains("m00") { 1.0 } else { 0.0 };
        let all = run(&mut s, 10_000, fit);
        let late = &all[all.len() - 8..];
        let hits = late.iter().filter(|c| fit(c) > 0.0).count();
        assert!(hits >= 4, "only {hits} of the last children carry the rewarded member");
    }
}
