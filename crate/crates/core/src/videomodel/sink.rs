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

use crate::simnet::SimTime;
use crate::transport::{AbandonedGap, StreamFrame};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeliveredFrame {
    pub frame_index: u32,
    pub capture_ts: SimTime,
    pub delivered_ts: SimTime,
    pub size: usize,
    pub key_frame: bool,
}

impl DeliveredFrame {
    pub fn delay(&self) -> Duration {
        self.delivered_ts.saturating_since(self.capture_ts)
    }
}

/// Outcome of one frame as seen by the receiver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameRecord {
    pub frame_index: u32,
    pub capture_ts: SimTime,
    pub delivered_ts: Option<SimTime>,
    pub size: usize,
    pub key_frame: bool,
    pub abandoned: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SinkStats {
    pub delivered: u64,
    pub abandoned: u64,
    pub duplicate_segments: u64,
    pub delivered_bytes: u64,
}

#[derive(Clone, Debug)]
struct Partial {
    capture_ts: SimTime,
    key_frame: bool,
    received: Vec<bool>,
    missing: usize,
    size: usize,
}

/// Reassembles segments into frames and hands complete frames over in
/// strictly increasing index order.
#[derive(Clone, Debug, Default)]
pub struct FrameSink {
    partial: BTreeMap<u32, Partial>,
    last_delivered: Option<u32>,
    records: BTreeMap<u32, FrameRecord>,
    stats: SinkStats,
}

impl FrameSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> SinkStats {
        self.stats
    }

    pub fn last_delivered(&self) -> Option<u32> {
        self.last_delivered
    }

    pub fn records(&self) -> impl Iterator<Item = &FrameRecord> {
        self.records.values()
    }

    pub fn pending_frames(&self) -> usize {
        self.partial.len()
    }

    /// Accepts one STREAM segment; returns the frame it completed, if any.
    pub fn on_segment(&mut self, now: SimTime, seg: &StreamFrame) -> Option<DeliveredFrame> {
        let index = seg.frame_index;
        if self
            .records
            .get(&index)
            .is_some_and(|r| r.delivered_ts.is_some() || r.abandoned)
        {
            self.stats.duplicate_segments += 1;
            return None;
        }
        self.records.entry(index).or_insert(FrameRecord {
            frame_index: index,
            capture_ts: seg.capture_ts,
            delivered_ts: None,
            size: 0,
            key_frame: seg.key_frame,
            abandoned: false,
        });
        let total = usize::from(seg.total_segments);
        let part = self.partial.entry(index).or_insert_with(|| Partial {
            capture_ts: seg.capture_ts,
            key_frame: seg.key_frame,
            received: vec![false; total],
            missing: total,
            size: 0,
        });
        let i = usize::from(seg.segment_index);
        if i >= part.received.len() || part.received[i] {
            self.stats.duplicate_segments += 1;
            return None;
        }
        part.received[i] = true;
        part.missing -= 1;
        part.size += seg.payload.len();
        if part.missing > 0 {
            return None;
        }
        let part = self.partial.remove(&index).expect("present");
        let record = self.records.get_mut(&index).expect("inserted above");
        record.size = part.size;
        if self.last_delivered.is_some_and(|l| index <= l) {
            // completed after a newer frame was already handed over
            record.abandoned = true;
            self.stats.abandoned += 1;
            return None;
        }
        record.delivered_ts = Some(now);
        self.last_delivered = Some(index);
        self.stats.delivered += 1;
        self.stats.delivered_bytes += part.size as u64;
        let older: Vec<u32> = self.partial.range(..index).map(|(&k, _)| k).collect();
        for k in older {
            self.abandon(k);
        }
        Some(DeliveredFrame {
            frame_index: index,
            capture_ts: part.capture_ts,
            delivered_ts: now,
            size: part.size,
            key_frame: part.key_frame,
        })
    }

    /// Gives up on incomplete frames that may have owned segments in an
    /// abandoned packet-number gap.
    pub fn on_abandoned_gap(&mut self, gap: &AbandonedGap) {
        let (lo, hi) = match (gap.frame_below, gap.frame_above) {
            (Some(a), Some(b)) => (a.min(b), a.max(b)),
            (Some(a), None) | (None, Some(a)) => (a, a),
            (None, None) => return,
        };
        let hit: Vec<u32> = self.partial.range(lo..=hi).map(|(&k, _)| k).collect();
        for k in hit {
            self.abandon(k);
        }
    }

    /// Marks every still-incomplete frame abandoned, e.g. at session end.
    pub fn finish(&mut self) {
        let all: Vec<u32> = self.partial.keys().copied().collect();
        for k in all {
            self.abandon(k);
        }
    }

    fn abandon(&mut self, index: u32) {
        if let Some(part) = self.partial.remove(&index) {
            let record = self
                .records
                .get_mut(&index)
                .expect("partial frames have records");
            record.abandoned = true;
            record.size = part.size;
            self.stats.abandoned += 1;
        }
    }
}
