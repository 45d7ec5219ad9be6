// Copyright (c) 2026 The rtcmp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! UCB path manager: per-path reward bookkeeping, obsolete-sample pruning
//! and per-slot path selection for every subflow.

use std::collections::VecDeque;
use std::time::Duration;

use crate::simnet::SimTime;

/// Weight of the newest sample in the smoothed reward.
pub const ALPHA: f64 = 0.9;
pub const K_OBSERVED_TIME: Duration = Duration::from_secs(10);

#[derive(Clone, Debug, PartialEq)]
pub struct PathStats {
    pub id: usize,
    pub flowid: usize,
    /// Largest sample in the observation window.
    pub bw: f64,
    /// Smoothed reward.
    pub bw_hat: f64,
    /// Pull count.
    pub n: u64,
    pub max_bw: f64,
    /// Samples ever received.
    pub samples: u64,
    bw_samples: VecDeque<(f64, SimTime)>,
}

impl PathStats {
    pub fn new(id: usize, flowid: usize) -> Self {
        Self {
            id,
            flowid,
            bw: 0.0,
            bw_hat: 0.0,
            n: 1,
            max_bw: 0.0,
            samples: 0,
            bw_samples: VecDeque::new(),
        }
    }

    /// Samples currently in the observation window.
    pub fn sample_count(&self) -> usize {
        self.bw_samples.len()
    }

    pub fn bw_samples(&self) -> impl Iterator<Item = (f64, SimTime)> + '_ {
        self.bw_samples.iter().copied()
    }

    pub fn on_new_bandwidth_sample(&mut self, bw: f64, now: SimTime) {
        self.bw_samples.push_back((bw, now));
        if self.samples == 0 {
            self.bw = bw;
            self.max_bw = bw;
            self.bw_hat = bw;
        } else {
            self.bw_hat = (1.0 - ALPHA) * self.bw_hat + ALPHA * bw;
        }
        if bw > self.max_bw {
            self.max_bw = bw;
        }
        self.delete_obsolete_samples(now);
        self.samples += 1;
    }

    pub fn delete_obsolete_samples(&mut self, now: SimTime) {
        while self.bw_samples.len() > 1 {
            let (_, at) = self.bw_samples[0];
            if now.saturating_since(at) > K_OBSERVED_TIME {
                self.bw_samples.pop_front();
            } else {
                break;
            }
        }
        let mut bw = 0.0;
        for &(b, _) in &self.bw_samples {
            if b > bw {
                bw = b;
            }
        }
        self.bw = bw;
        if self.bw_samples.is_empty() {
            self.bw = self.max_bw;
        }
    }
}

/// Upper-confidence score of one candidate.
pub fn ucb_score(bw_hat: f64, bw: f64, subflows: usize, slot: u64, pulls: u64) -> f64 {
    bw_hat + bw * (2.0 * (subflows as f64 * slot as f64).ln() / pulls as f64).sqrt()
}

/// Outcome of one decision slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotDecision {
    /// Value of T when the decision was made.
    pub slot: u64,
    pub choices: Vec<Option<usize>>,
    pub exploration: bool,
    /// (path, score) per candidate, per subflow; empty during exploration.
    pub scores: Vec<Vec<(usize, f64)>>,
}

#[derive(Clone, Debug)]
pub struct PathManager {
    paths: Vec<PathStats>,
    subflows: usize,
    t: u64,
    exploration_slots: usize,
    explored: usize,
}

impl PathManager {
    /// `candidates[i]` is the number of candidate paths of subflow `i`.
    /// Path ids are assigned in subflow order.
    pub fn new(candidates: &[usize]) -> Self {
        assert!(
            !candidates.is_empty() && candidates.iter().all(|&k| k > 0),
            "every subflow needs a candidate path"
        );
        let mut paths = Vec::new();
        for (flow, &k) in candidates.iter().enumerate() {
            for _ in 0..k {
                paths.push(PathStats::new(paths.len(), flow));
            }
        }
        Self {
            paths,
            subflows: candidates.len(),
            t: 1,
            exploration_slots: candidates.iter().copied().max().unwrap_or(1),
            explored: 0,
        }
    }

    pub fn paths(&self) -> &[PathStats] {
        &self.paths
    }

    pub fn path(&self, id: usize) -> &PathStats {
        &self.paths[id]
    }

    pub fn slot_counter(&self) -> u64 {
        self.t
    }

    pub fn candidates(&self, subflow: usize) -> impl Iterator<Item = usize> + '_ {
        self.paths
            .iter()
            .filter(move |p| p.flowid == subflow)
            .map(|p| p.id)
    }

    pub fn on_new_bandwidth_sample(&mut self, path: usize, bw: f64, now: SimTime) {
        self.paths[path].on_new_bandwidth_sample(bw, now);
    }

    pub fn delete_obsolete_samples(&mut self, path: usize, now: SimTime) {
        self.paths[path].delete_obsolete_samples(now);
    }

    /// One UCB round over all subflows. `None` for a subflow whose every
    /// candidate scores zero.
    pub fn select_paths(&mut self, now: SimTime) -> Vec<Option<usize>> {
        self.select_scored(now).0
    }

    fn select_scored(&mut self, now: SimTime) -> (Vec<Option<usize>>, Vec<Vec<(usize, f64)>>) {
        for p in &mut self.paths {
            p.delete_obsolete_samples(now);
        }
        let c = self.subflows;
        let mut choices = Vec::with_capacity(c);
        let mut scores = Vec::with_capacity(c);
        for flow in 0..c {
            let mut x_max = 0.0;
            let mut chosen = None;
            let mut flow_scores = Vec::new();
            for p in self.paths.iter().filter(|p| p.flowid == flow) {
                let x = ucb_score(p.bw_hat, p.bw, c, self.t, p.n);
                flow_scores.push((p.id, x));
                if x > x_max {
                    x_max = x;
                    chosen = Some(p.id);
                }
            }
            if let Some(id) = chosen {
                self.paths[id].n += 1;
            }
            choices.push(chosen);
            scores.push(flow_scores);
        }
        self.t += 1;
        (choices, scores)
    }

    /// Decision for the next slot: the initial visits to every candidate in
    /// ascending id order, then UCB rounds.
    pub fn next_slot(&mut self, now: SimTime) -> SlotDecision {
        let slot = self.t;
        if self.explored < self.exploration_slots {
            let k = self.explored;
            self.explored += 1;
            let choices = (0..self.subflows)
                .map(|flow| {
                    let ids: Vec<usize> = self.candidates(flow).collect();
                    Some(ids[k % ids.len()])
                })
                .collect();
            self.t += 1;
            return SlotDecision {
                slot,
                choices,
                exploration: true,
                scores: Vec::new(),
            };
        }
        let (choices, scores) = self.select_scored(now);
        SlotDecision {
            slot,
            choices,
            exploration: false,
            scores,
        }
    }
}
