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

use std::collections::VecDeque;
use std::time::Duration;

use crate::simnet::SimTime;

/// Running maximum over the last `window` rounds.
///
/// Entries expire only when a newer sample is inserted, so the estimate
/// holds steady while no usable samples arrive.
#[derive(Clone, Debug)]
pub struct WindowedMaxFilter {
    window: u64,
    // (round, value), values strictly decreasing front to back
    entries: VecDeque<(u64, f64)>,
}

impl WindowedMaxFilter {
    pub fn new(window_rounds: u64) -> Self {
        assert!(window_rounds > 0);
        Self {
            window: window_rounds,
            entries: VecDeque::new(),
        }
    }

    pub fn get(&self) -> f64 {
        self.entries.front().map_or(0.0, |e| e.1)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, round: u64, value: f64) {
        let value = value.max(0.0);
        while self.entries.back().is_some_and(|e| e.1 <= value) {
            self.entries.pop_back();
        }
        self.entries.push_back((round, value));
        while self
            .entries
            .front()
            .is_some_and(|e| e.0 + self.window <= round)
        {
            self.entries.pop_front();
        }
    }

    pub fn reset(&mut self) {
        self.entries.clear();
    }
}

/// Minimum RTT with a staleness deadline.
#[derive(Clone, Debug)]
pub struct MinRttFilter {
    window: Duration,
    min: Option<Duration>,
    stamp: SimTime,
}

impl MinRttFilter {
    pub fn new(window: Duration) -> Self {
        Self {
            window,
            min: None,
            stamp: SimTime::ZERO,
        }
    }

    pub fn get(&self) -> Option<Duration> {
        self.min
    }

    pub fn stamp(&self) -> SimTime {
        self.stamp
    }

    /// True once the current minimum was last refreshed more than a window ago.
    pub fn is_expired(&self, now: SimTime) -> bool {
        self.min.is_some() && now.saturating_since(self.stamp) > self.window
    }

    /// Returns whether the sample replaced the minimum.
    pub fn update(&mut self, now: SimTime, rtt: Duration) -> bool {
        let take = match self.min {
            None => true,
            Some(m) => rtt <= m || self.is_expired(now),
        };
        if take {
            self.min = Some(rtt);
            self.stamp = now;
        }
        take
    }

    /// Restarts the staleness clock without changing the value.
    pub fn refresh(&mut self, now: SimTime) {
        self.stamp = now;
    }

    pub(crate) fn shift_stamp(&mut self, by: Duration) {
        self.stamp += by;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn max_over_window() {
        let mut f = WindowedMaxFilter::new(10);
        f.insert(0, 5.0);
        f.insert(3, 2.0);
        assert_eq!(f.get(), 5.0);
        f.insert(9, 1.0);
        assert_eq!(f.get(), 5.0);
        f.insert(10, 1.5);
        assert_eq!(f.get(), 2.0);
        f.insert(20, 0.5);
        assert_eq!(f.get(), 0.5);
    }

    #[test]
    fn stale_max_held_without_insertions() {
        let mut f = WindowedMaxFilter::new(10);
        f.insert(0, 7.0);
        assert_eq!(f.get(), 7.0);
        f.insert(100, 7.5);
        assert_eq!(f.get(), 7.5);
    }

    #[test]
    fn min_rtt_expiry() {
        let mut f = MinRttFilter::new(Duration::from_secs(10));
        assert!(f.update(SimTime::ZERO, Duration::from_millis(100)));
        assert!(!f.update(SimTime::from_secs(5), Duration::from_millis(120)));
        assert!(!f.is_expired(SimTime::from_secs(10)));
        assert!(f.is_expired(SimTime::from_millis(10_001)));
        assert!(f.update(SimTime::from_millis(10_001), Duration::from_millis(130)));
        assert_eq!(f.get(), Some(Duration::from_millis(130)));
    }

    proptest! {
        #[test]
        fn max_filter_matches_brute_force(samples in proptest::collection::vec((0u64..3, 0.0f64..1e7), 1..200)) {
            let mut f = WindowedMaxFilter::new(10);
            let mut round = 0;
            let mut seen = Vec::new();
            for (step, v) in samples {
                round += step;
                f.insert(round, v);
                seen.push((round, v));
                let brute = seen
                    .iter()
                    .filter(|(r, _)| r + 10 > round)
                    .map(|&(_, v)| v)
                    .fold(0.0, f64::max);
                prop_assert_eq!(f.get(), brute);
            }
        }

        #[test]
        fn min_rtt_bounded_by_recent_samples(samples in proptest::collection::vec((1u64..3_000_000, 1u64..500_000), 1..200)) {
            let mut f = MinRttFilter::new(Duration::from_secs(10));
            let mut now = SimTime::ZERO;
            let mut seen = Vec::new();
            for (dt, rtt) in samples {
                now += Duration::from_micros(dt);
                f.update(now, Duration::from_micros(rtt));
                seen.push((now, rtt));
                let m = f.get().unwrap().as_micros() as u64;
                for &(t, r) in &seen {
                    if now.saturating_since(t) <= Duration::from_secs(10) && t >= f.stamp() {
                        prop_assert!(m <= r);
                    }
                }
            }
        }
    }
}
