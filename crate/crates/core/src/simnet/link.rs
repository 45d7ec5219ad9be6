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

//! Point-to-point links with a droptail FIFO and serialization delay.

use std::collections::VecDeque;
use std::time::Duration;

use super::trace::TraceSchedule;
use super::SimTime;

/// Anything that occupies bytes on a link.
pub trait WireSize {
    fn wire_size(&self) -> u32;
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LinkConfigError {
    #[error("link capacity must be positive")]
    ZeroCapacity,
    #[error("link queue capacity must be positive")]
    ZeroQueue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinkConfig {
    /// Bits per second.
    pub capacity_bps: u64,
    /// One-way propagation delay.
    pub owd: Duration,
    /// Droptail limit in bytes, including the packet being serialized.
    pub queue_bytes: u64,
}

impl LinkConfig {
    pub fn new(
        capacity_bps: u64,
        owd: Duration,
        queue_bytes: u64,
    ) -> Result<Self, LinkConfigError> {
        if capacity_bps == 0 {
            return Err(LinkConfigError::ZeroCapacity);
        }
        if queue_bytes == 0 {
            return Err(LinkConfigError::ZeroQueue);
        }
        Ok(LinkConfig {
            capacity_bps,
            owd,
            queue_bytes,
        })
    }

    /// Queue sized as `capacity x queue_time`, the "BW*Q" convention.
    pub fn with_queue_time(
        capacity_bps: u64,
        owd: Duration,
        queue_time: Duration,
    ) -> Result<Self, LinkConfigError> {
        let bytes = (capacity_bps as u128 * queue_time.as_micros() / 8_000_000) as u64;
        Self::new(capacity_bps, owd, bytes)
    }
}

/// Capacity source for a link.
#[derive(Clone, Debug, PartialEq)]
pub enum Capacity {
    Fixed(u64),
    Trace(TraceSchedule),
}

impl Capacity {
    pub fn at(&self, t: SimTime) -> u64 {
        match self {
            Capacity::Fixed(bps) => *bps,
            Capacity::Trace(tr) => tr.capacity_at(t),
        }
    }

    /// Average capacity over `[from, to)`.
    pub fn mean_between(&self, from: SimTime, to: SimTime) -> f64 {
        match self {
            Capacity::Fixed(bps) => *bps as f64,
            Capacity::Trace(tr) => tr.mean_between(from, to),
        }
    }

    fn finish_time(&self, start: SimTime, bytes: u32) -> SimTime {
        let bits = bytes as u64 * 8;
        match self {
            Capacity::Fixed(bps) => {
                let us = (bits as u128 * 1_000_000).div_ceil(*bps as u128);
                SimTime::from_micros(start.as_micros() + us as u64)
            }
            Capacity::Trace(tr) => tr.finish_time(start, bits),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub offered_packets: u64,
    pub offered_bytes: u64,
    pub dropped_packets: u64,
    pub dropped_bytes: u64,
    /// Packets that finished serialization and are propagating.
    pub propagating_packets: u64,
    /// Packets that reached the far end.
    pub delivered_packets: u64,
    pub delivered_bytes: u64,
}

#[derive(Debug)]
pub enum Enqueue<T> {
    /// Queue full; the packet is handed back.
    Dropped(T),
    /// Accepted. `tx_done` is set when the link was idle and started
    /// serializing this packet right away.
    Accepted { tx_done: Option<SimTime> },
}

#[derive(Debug)]
pub struct Link<T> {
    config: LinkConfig,
    capacity: Capacity,
    queue: VecDeque<T>,
    occupancy: u64,
    stats: LinkStats,
}

impl<T: WireSize> Link<T> {
    pub fn new(config: LinkConfig) -> Self {
        Self::with_capacity(config, Capacity::Fixed(config.capacity_bps))
    }

    pub fn with_capacity(config: LinkConfig, capacity: Capacity) -> Self {
        Link {
            config,
            capacity,
            queue: VecDeque::new(),
            occupancy: 0,
            stats: LinkStats::default(),
        }
    }

    pub fn config(&self) -> &LinkConfig {
        &self.config
    }

    pub fn capacity(&self) -> &Capacity {
        &self.capacity
    }

    pub fn occupancy(&self) -> u64 {
        self.occupancy
    }

    pub fn queued_packets(&self) -> usize {
        self.queue.len()
    }

    pub fn stats(&self) -> &LinkStats {
        &self.stats
    }

    pub fn enqueue(&mut self, now: SimTime, packet: T) -> Enqueue<T> {
        let size = packet.wire_size() as u64;
        self.stats.offered_packets += 1;
        self.stats.offered_bytes += size;
        if self.occupancy + size > self.config.queue_bytes {
            self.stats.dropped_packets += 1;
            self.stats.dropped_bytes += size;
            return Enqueue::Dropped(packet);
        }
        let idle = self.queue.is_empty();
        self.occupancy += size;
        self.queue.push_back(packet);
        let tx_done = idle.then(|| self.capacity.finish_time(now, size as u32));
        Enqueue::Accepted { tx_done }
    }

    /// Finishes serializing the head packet. Returns it together with the
    /// completion time of the next queued packet, if any.
    pub fn complete_tx(&mut self, now: SimTime) -> (T, Option<SimTime>) {
        let packet = self.queue.pop_front().expect("complete_tx on an idle link");
        self.occupancy -= packet.wire_size() as u64;
        self.stats.propagating_packets += 1;
        let next = self
            .queue
            .front()
            .map(|p| self.capacity.finish_time(now, p.wire_size()));
        (packet, next)
    }

    /// Records arrival of a propagating packet at the far end.
    pub fn record_arrival(&mut self, size: u32) {
        self.stats.propagating_packets -= 1;
        self.stats.delivered_packets += 1;
        self.stats.delivered_bytes += size as u64;
    }
}
