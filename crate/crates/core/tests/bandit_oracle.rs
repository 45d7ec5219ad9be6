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

//! The production bandit against the reference interpreter.

use std::time::Duration;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtcmp::bandit::PathManager;
use rtcmp::SimTime;

#[path = "support/bandit_reference.rs"]
mod reference;

use reference::{random_events, replay};

#[test]
fn matches_reference_on_random_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for case in 0..100 {
        let flows = rng.gen_range(1..=3);
        let candidates: Vec<usize> = (0..flows).map(|_| rng.gen_range(1..=3)).collect();
        let paths: usize = candidates.iter().sum();
        let len = rng.gen_range(1..=1000);
        let events = random_events(&mut rng, paths, len);
        if let Err(e) = replay(&candidates, &events) {
            panic!("sequence {case} ({candidates:?}): {e}");
        }
    }
}

#[test]
fn worked_example_single_path() {
    let mut pm = PathManager::new(&[1]);
    pm.on_new_bandwidth_sample(0, 2e6, SimTime::ZERO);
    let p = &pm.paths()[0];
    assert_eq!((p.bw, p.max_bw, p.bw_hat), (2e6, 2e6, 2e6));
    pm.on_new_bandwidth_sample(0, 3e6, SimTime::from_secs(1));
    assert!((pm.paths()[0].bw_hat - 2.9e6).abs() < 1e-6);
    pm.on_new_bandwidth_sample(0, 1e6, SimTime::from_secs(2));
    assert_eq!(pm.paths()[0].max_bw, 3e6);
}

#[test]
fn obsolete_samples_pruned() {
    let mut pm = PathManager::new(&[1]);
    pm.on_new_bandwidth_sample(0, 2e6, SimTime::ZERO);
    pm.on_new_bandwidth_sample(0, 1e6, SimTime::from_secs(10));
    pm.delete_obsolete_samples(0, SimTime::from_secs(11));
    assert_eq!(pm.paths()[0].bw, 1e6);

    let mut single = PathManager::new(&[1]);
    single.on_new_bandwidth_sample(0, 2e6, SimTime::ZERO);
    single.delete_obsolete_samples(0, SimTime::from_secs(60));
    assert_eq!(single.paths()[0].bw, 2e6);
    assert_eq!(single.paths()[0].sample_count(), 1);
}

#[test]
fn ucb_score_matches_hand_calculation() {
    // Bw_hat = 2.9 Mbps, Bw = 3 Mbps, C = 2, T = 100, N = 10
    let x = rtcmp::bandit::ucb_score(2.9e6, 3e6, 2, 100, 10);
    let by_hand = 2.9e6 + 3e6 * (2.0 * 200f64.ln() / 10.0).sqrt();
    assert_eq!(x, by_hand);
    assert!((x - 5.99e6).abs() < 0.01e6);
}

#[test]
fn single_candidate_always_chosen_and_pulled() {
    let mut pm = PathManager::new(&[1, 1]);
    pm.on_new_bandwidth_sample(0, 1e6, SimTime::ZERO);
    pm.on_new_bandwidth_sample(1, 5e5, SimTime::ZERO);
    for slot in 1..=50u64 {
        let chosen = pm.select_paths(SimTime::from_secs(slot));
        assert_eq!(chosen, [Some(0), Some(1)]);
        assert_eq!(pm.paths()[0].n, 1 + slot);
    }
}

#[test]
fn equal_scores_pick_lower_id() {
    let mut pm = PathManager::new(&[2]);
    pm.on_new_bandwidth_sample(0, 1e6, SimTime::ZERO);
    pm.on_new_bandwidth_sample(1, 1e6, SimTime::ZERO);
    assert_eq!(pm.select_paths(SimTime::ZERO), [Some(0)]);
}

#[test]
fn exploration_visits_every_candidate() {
    let mut pm = PathManager::new(&[2, 2]);
    let first = pm.next_slot(SimTime::ZERO);
    let second = pm.next_slot(SimTime::from_secs(1));
    assert_eq!(first.choices, [Some(0), Some(2)]);
    assert_eq!(second.choices, [Some(1), Some(3)]);
    assert!(first.exploration && second.exploration);
    assert!(pm.paths().iter().all(|p| p.n == 1));
    assert_eq!(pm.slot_counter(), 3);
    for p in 0..4 {
        pm.on_new_bandwidth_sample(p, 1e6 * (p + 1) as f64, SimTime::from_secs(2));
    }
    assert!(pm.paths().iter().all(|p| p.sample_count() >= 1));
    let third = pm.next_slot(SimTime::from_secs(2));
    assert!(!third.exploration);

    let mut one = PathManager::new(&[1]);
    assert!(one.next_slot(SimTime::ZERO).exploration);
    assert!(!one.next_slot(SimTime::from_secs(1)).exploration);
}

proptest! {
    #[test]
    fn argmax_is_scale_invariant(
        samples in proptest::collection::vec((0usize..4, 0.0f64..1e7, 0u64..3_000_000), 1..300),
        every in 2usize..10,
        shift in -8i32..8,
    ) {
        let k = 2f64.powi(shift);
        let mut a = PathManager::new(&[2, 2]);
        let mut b = PathManager::new(&[2, 2]);
        let mut now = 0;
        for (i, (path, bw, dt)) in samples.iter().enumerate() {
            now += dt;
            let t = SimTime::from_micros(now);
            a.on_new_bandwidth_sample(*path, *bw, t);
            b.on_new_bandwidth_sample(*path, bw * k, t);
            if i % every == 0 {
                prop_assert_eq!(a.select_paths(t), b.select_paths(t));
            }
        }
    }

    #[test]
    fn estimates_stay_within_sample_range(samples in proptest::collection::vec((0.0f64..1e7, 0u64..4_000_000), 1..300)) {
        let mut pm = PathManager::new(&[1]);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        let mut now = 0;
        for (bw, dt) in samples {
            now += dt;
            pm.on_new_bandwidth_sample(0, bw, SimTime::from_micros(now));
            lo = lo.min(bw);
            hi = hi.max(bw);
            let p = &pm.paths()[0];
            prop_assert!(p.bw <= p.max_bw);
            prop_assert!(p.bw_hat >= lo * (1.0 - 1e-12) && p.bw_hat <= hi * (1.0 + 1e-12));
        }
    }
}

#[test]
fn obsolete_window_is_strict() {
    let mut pm = PathManager::new(&[1]);
    pm.on_new_bandwidth_sample(0, 5e6, SimTime::ZERO);
    pm.on_new_bandwidth_sample(0, 1e6, SimTime::from_secs(1));
    pm.delete_obsolete_samples(0, SimTime::from_secs(10));
    assert_eq!(pm.paths()[0].bw, 5e6);
    pm.delete_obsolete_samples(0, SimTime::from_secs(10) + Duration::from_micros(1));
    assert_eq!(pm.paths()[0].bw, 1e6);
}
