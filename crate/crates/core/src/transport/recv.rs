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

use std::collections::BTreeMap;
use std::time::Duration;

use super::wire::{AckFrame, AckRange, PacketNumber};
use crate::simnet::SimTime;

/// Ack once this many ack-eliciting packets are waiting.
pub const ACK_EVERY_PACKETS: u32 = 2;
pub const MAX_ACK_DELAY: Duration = Duration::from_millis(10);
/// Ranges reported per ACK frame, newest first.
pub const MAX_ACK_RANGES: usize = 32;
// Ranges remembered for reporting; older holes are forgotten.
const MAX_TRACKED_RANGES: usize = 256;

/// Frame indices carried by the nearest received packets around an
/// abandoned gap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AbandonedGap {
    pub first: PacketNumber,
    pub last: PacketNumber,
    pub frame_below: Option<u32>,
    pub frame_above: Option<u32>,
}

/// Receiver half of one path connection.
#[derive(Debug, Default)]
pub struct ReceiveManager {
    // ascending, disjoint, non-adjacent inclusive ranges
    ranges: Vec<(u64, u64)>,
    largest: Option<(u64, SimTime)>,
    pending: u32,
    first_pending_at: Option<SimTime>,
    floor: u64,
    frames: BTreeMap<u64, u32>,
}

impl ReceiveManager {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stop_waiting_floor(&self) -> PacketNumber {
        PacketNumber(self.floor)
    }

    /// Records an arriving packet. `frame_index` is the video frame of the
    /// first STREAM frame it carries, if any. Returns false for duplicates and
    /// packets below the stop-waiting floor.
    pub fn on_packet(
        &mut self,
        now: SimTime,
        pn: PacketNumber,
        ack_eliciting: bool,
        frame_index: Option<u32>,
    ) -> bool {
        let pn = pn.0;
        if pn < self.floor || self.contains(pn) {
            return false;
        }
        self.insert(pn);
        if let Some(f) = frame_index {
            self.frames.insert(pn, f);
        }
        if self.largest.is_none_or(|(l, _)| pn > l) {
            self.largest = Some((pn, now));
        }
        if ack_eliciting {
            self.pending += 1;
            self.first_pending_at.get_or_insert(now);
        }
        true
    }

    /// When an ACK is due, if anything is waiting.
    pub fn ack_deadline(&self) -> Option<SimTime> {
        let first = self.first_pending_at?;
        if self.pending >= ACK_EVERY_PACKETS {
            Some(first)
        } else {
            Some(first + MAX_ACK_DELAY)
        }
    }

    pub fn should_ack(&self, now: SimTime) -> bool {
        self.ack_deadline().is_some_and(|t| t <= now)
    }

    /// Builds an ACK if one is due and resets the pending counters.
    pub fn maybe_ack(&mut self, now: SimTime) -> Option<AckFrame> {
        if !self.should_ack(now) {
            return None;
        }
        self.build_ack(now)
    }

    /// Builds an ACK covering everything received, due or not.
    pub fn build_ack(&mut self, now: SimTime) -> Option<AckFrame> {
        let (largest, arrived) = self.largest?;
        let ranges: Vec<AckRange> = self
            .ranges
            .iter()
            .rev()
            .take(MAX_ACK_RANGES)
            .map(|&(s, e)| AckRange {
                start: PacketNumber(s),
                end: PacketNumber(e),
            })
            .collect();
        if ranges.is_empty() {
            return None;
        }
        self.pending = 0;
        self.first_pending_at = None;
        let delay = now.saturating_since(arrived).as_micros();
        Some(AckFrame {
            largest_acked: PacketNumber(largest),
            ack_delay_us: u32::try_from(delay).unwrap_or(u32::MAX),
            ranges,
        })
    }

    /// Abandons every gap below `least_unacked`. Returns the gaps with the
    /// frame indices of their received neighbors; a regressing threshold is
    /// ignored.
    pub fn process_stop_waiting(&mut self, least_unacked: PacketNumber) -> Vec<AbandonedGap> {
        let least = least_unacked.0;
        if least <= self.floor {
            return Vec::new();
        }
        let mut gaps = Vec::new();
        let mut cursor = self.floor;
        for &(s, e) in &self.ranges {
            if cursor >= least {
                break;
            }
            if s > cursor {
                gaps.push((cursor, (s - 1).min(least - 1)));
            }
            cursor = cursor.max(e + 1);
        }
        // Numbers above everything received are not gaps yet unless below the floor.
        if cursor < least && self.ranges.last().is_some_and(|&(_, e)| e + 1 < least) {
            gaps.push((cursor, least - 1));
        }
        let out = gaps
            .into_iter()
            .map(|(lo, hi)| AbandonedGap {
                first: PacketNumber(lo),
                last: PacketNumber(hi),
                frame_below: self.frames.range(..lo).next_back().map(|(_, &f)| f),
                frame_above: self.frames.range(hi + 1..).next().map(|(_, &f)| f),
            })
            .collect();

        self.floor = least;
        self.ranges.retain_mut(|r| {
            r.0 = r.0.max(least);
            r.0 <= r.1
        });
        self.frames = self.frames.split_off(&least);
        out
    }

    fn contains(&self, pn: u64) -> bool {
        let i = self.ranges.partition_point(|&(_, e)| e < pn);
        self.ranges.get(i).is_some_and(|&(s, _)| s <= pn)
    }

    fn insert(&mut self, pn: u64) {
        let i = self.ranges.partition_point(|&(_, e)| e + 1 < pn);
        match self.ranges.get_mut(i) {
            Some(r) if r.0 <= pn + 1 => {
                r.0 = r.0.min(pn);
                r.1 = r.1.max(pn);
                if let Some(&(ns, ne)) = self.ranges.get(i + 1) {
                    if ns == self.ranges[i].1 + 1 {
                        self.ranges[i].1 = ne;
                        self.ranges.remove(i + 1);
                    }
                }
            }
            _ => self.ranges.insert(i, (pn, pn)),
        }
        if self.ranges.len() > MAX_TRACKED_RANGES {
            let (_, dropped_end) = self.ranges.remove(0);
            self.frames = self.frames.split_off(&(dropped_end + 1));
        }
    }
}
