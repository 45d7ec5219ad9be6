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

use std::time::Duration;

use crate::simnet::SimTime;

/// Earliest time the next packet may leave, or `None` while the rate is
/// zero. The gap is rounded up to the next whole microsecond.
pub fn next_send_time(prev_sent: SimTime, prev_len: usize, rate_bps: u64) -> Option<SimTime> {
    if rate_bps == 0 {
        return None;
    }
    let bits = prev_len as u128 * 8 * 1_000_000;
    let gap = bits.div_ceil(rate_bps as u128);
    Some(prev_sent + Duration::from_micros(u64::try_from(gap).unwrap_or(u64::MAX / 2)))
}

/// Per-connection pacing state.
#[derive(Clone, Debug, Default)]
pub struct Pacer {
    last: Option<(SimTime, usize)>,
}

impl Pacer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Release time for the next packet at the current rate.
    pub fn release_time(&self, rate_bps: u64) -> Option<SimTime> {
        match self.last {
            None => (rate_bps > 0).then_some(SimTime::ZERO),
            Some((at, len)) => next_send_time(at, len, rate_bps),
        }
    }

    pub fn can_send(&self, now: SimTime, rate_bps: u64) -> bool {
        self.release_time(rate_bps).is_some_and(|t| t <= now)
    }

    pub fn on_sent(&mut self, now: SimTime, len: usize) {
        self.last = Some((now, len));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mss_at_9_6_mbps_is_one_millisecond() {
        let t = next_send_time(SimTime::from_millis(5), 1200, 9_600_000).unwrap();
        assert_eq!(t, SimTime::from_millis(6));
    }

    #[test]
    fn zero_length_and_zero_rate() {
        assert_eq!(
            next_send_time(SimTime::from_millis(5), 0, 1).unwrap(),
            SimTime::from_millis(5)
        );
        assert_eq!(next_send_time(SimTime::ZERO, 1200, 0), None);
    }

    #[test]
    fn doubling_rate_halves_gap() {
        let a = next_send_time(SimTime::ZERO, 1000, 1_000_000).unwrap();
        let b = next_send_time(SimTime::ZERO, 1000, 2_000_000).unwrap();
        assert_eq!(a.as_micros(), 2 * b.as_micros());
    }

    #[test]
    fn rounds_up_to_microsecond() {
        // 8 bits at 3 bps is 2.666.. s
        assert_eq!(
            next_send_time(SimTime::ZERO, 1, 3).unwrap().as_micros(),
            2_666_667
        );
    }

    #[test]
    fn pacer_gates_sends() {
        let mut p = Pacer::new();
        assert!(p.can_send(SimTime::ZERO, 1_000_000));
        p.on_sent(SimTime::ZERO, 1250);
        assert!(!p.can_send(SimTime::from_micros(9_999), 1_000_000));
        assert!(p.can_send(SimTime::from_millis(10), 1_000_000));
        assert!(!p.can_send(SimTime::from_secs(100), 0));
    }
}
