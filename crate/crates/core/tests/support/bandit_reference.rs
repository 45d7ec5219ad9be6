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

//! A literal step interpreter for the path-manager pseudocode, used as the
//! reference for the production bandit. Shared by several test targets.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rtcmp::bandit::PathManager;
use rtcmp::SimTime;

const ALPHA: f64 = 0.9;
const K_OBSERVED_TIME_US: u64 = 10_000_000;

#[derive(Clone, Debug)]
struct RefPath {
    id: i64,
    flowid: i64,
    bw: f64,
    bw_hat: f64,
    n: f64,
    max_bw: f64,
    samples: u64,
    bw_samples: VecDeque<(f64, u64)>,
}

struct Reference {
    t: f64,
    subflows: Vec<i64>,
    exploited: Vec<i64>,
    paths: Vec<RefPath>,
}

impl Reference {
    fn new(candidates: &[usize]) -> Self {
        let mut paths = Vec::new();
        for (flow, &k) in candidates.iter().enumerate() {
            for _ in 0..k {
                paths.push(RefPath {
                    id: paths.len() as i64,
                    flowid: flow as i64,
                    bw: 0.0,
                    bw_hat: 0.0,
                    n: 1.0,
                    max_bw: 0.0,
                    samples: 0,
                    bw_samples: VecDeque::new(),
                });
            }
        }
        Reference {
            t: 1.0,
            subflows: (0..candidates.len() as i64).collect(),
            exploited: vec![-1; candidates.len()],
            paths,
        }
    }

    fn on_new_bandwidth_sample(&mut self, j: usize, bw: f64, now: u64) {
        let p = &mut self.paths[j];
        p.bw_samples.push_back((bw, now));
        if p.samples == 0 {
            p.bw = bw;
            p.max_bw = bw;
            p.bw_hat = bw;
        } else {
            p.bw_hat = (1.0 - ALPHA) * p.bw_hat + ALPHA * bw;
        }
        if bw > p.max_bw {
            p.max_bw = bw;
        }
        self.delete_obsolete_samples(j, now);
        self.paths[j].samples += 1;
    }

    fn delete_obsolete_samples(&mut self, j: usize, now: u64) {
        let p = &mut self.paths[j];
        while p.bw_samples.len() > 1 {
            let sample = *p.bw_samples.front().unwrap();
            if now - sample.1 > K_OBSERVED_TIME_US {
                p.bw_samples.pop_front();
            } else {
                break;
            }
        }
        let mut bw = 0.0;
        for sample in &p.bw_samples {
            if sample.0 > bw {
                bw = sample.0;
            }
        }
        p.bw = bw;
        if p.bw_samples.is_empty() {
            p.bw = p.max_bw;
        }
    }

    fn path_selection(&mut self, now: u64) {
        for j in 0..self.paths.len() {
            self.delete_obsolete_samples(j, now);
        }
        let c = self.subflows.len();
        let p = self.paths.len();
        for i in 0..c {
            let flowid = self.subflows[i];
            let mut x_max = 0.0;
            let mut path_id = -1;
            for j in 0..p {
                if self.paths[j].flowid == flowid {
                    let id = self.paths[j].id;
                    let bw_hat = self.paths[j].bw_hat;
                    let bw = self.paths[j].bw;
                    let n = self.paths[j].n;
                    let x = bw_hat + bw * (2.0 * (c as f64 * self.t).ln() / n).sqrt();
                    if x > x_max {
                        x_max = x;
                        path_id = id;
                    }
                }
            }
            self.exploited[i] = path_id;
            for j in 0..p {
                if self.paths[j].id == path_id {
                    self.paths[j].n += 1.0;
                }
            }
        }
        self.t += 1.0;
    }
}

#[derive(Clone, Debug)]
pub enum Event {
    Sample { path: usize, bw: f64, dt_us: u64 },
    Select { dt_us: u64 },
}

pub fn random_events(rng: &mut ChaCha8Rng, paths: usize, len: usize) -> Vec<Event> {
    (0..len)
        .map(|_| {
            // coarse time steps make ties and 10 s boundaries likely
            let dt_us = match rng.gen_range(0..4) {
                0 => 0,
                1 => rng.gen_range(0..3) * 5_000_000,
                _ => rng.gen_range(0..2_000_000),
            };
            if rng.gen_bool(0.8) {
                let bw = match rng.gen_range(0..5) {
                    0 => 0.0,
                    1 => 3e6,
                    _ => rng.gen_range(0.0..8e6),
                };
                Event::Sample {
                    path: rng.gen_range(0..paths),
                    bw,
                    dt_us,
                }
            } else {
                Event::Select { dt_us }
            }
        })
        .collect()
}

pub fn replay(candidates: &[usize], events: &[Event]) -> Result<(), String> {
    let mut reference = Reference::new(candidates);
    let mut prod = PathManager::new(candidates);
    let mut now = 0u64;
    for (step, e) in events.iter().enumerate() {
        match *e {
            Event::Sample { path, bw, dt_us } => {
                now += dt_us;
                reference.on_new_bandwidth_sample(path, bw, now);
                prod.on_new_bandwidth_sample(path, bw, SimTime::from_micros(now));
            }
            Event::Select { dt_us } => {
                now += dt_us;
                reference.path_selection(now);
                let chosen = prod.select_paths(SimTime::from_micros(now));
                let want: Vec<Option<usize>> = reference
                    .exploited
                    .iter()
                    .map(|&p| (p >= 0).then_some(p as usize))
                    .collect();
                if chosen != want {
                    return Err(format!("step {step}: chose {chosen:?}, reference {want:?}"));
                }
            }
        }
        if prod.slot_counter() != reference.t as u64 {
            return Err(format!("step {step}: T differs"));
        }
        for (r, p) in reference.paths.iter().zip(prod.paths()) {
            let same = r.bw.to_bits() == p.bw.to_bits()
                && r.bw_hat.to_bits() == p.bw_hat.to_bits()
                && r.n as u64 == p.n
                && r.max_bw.to_bits() == p.max_bw.to_bits()
                && r.samples == p.samples;
            if !same {
                return Err(format!(
                    "step {step}: path {} differs: ref {r:?} prod {p:?}",
                    r.id
                ));
            }
        }
    }
    Ok(())
}
