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

//! Multipath segment distribution by expected arrival latency, with the
//! partially reliable send buffer behind it.

use std::collections::{BTreeMap, VecDeque};
use std::time::Duration;

use crate::simnet::SimTime;
use crate::transport::StreamFrame;

/// Weight of the newest RTT sample in the subflow SRTT.
pub const SRTT_DELTA: f64 = 0.85;
/// Non-key segments stay retransmittable this long after first send.
pub const RETRANSMIT_CACHE: Duration = Duration::from_millis(400);

pub type SegmentId = u64;

#[derive(Clone, Debug)]
pub struct SendBufferEntry {
    pub segment: StreamFrame,
    pub subflow: usize,
    pub first_sent: Option<SimTime>,
    pub transmissions: u32,
    /// Waiting in a subflow queue.
    pub queued: bool,
}

impl SendBufferEntry {
    pub fn len(&self) -> u64 {
        self.segment.payload.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.segment.payload.is_empty()
    }
}

#[derive(Clone, Debug, Default)]
pub struct SubflowState {
    pub srtt: Option<Duration>,
    /// Bytes scheduled on this subflow but not yet sent.
    pub queued_bytes: u64,
    pub bw_es_bps: f64,
    pub active_path: usize,
    queue: VecDeque<SegmentId>,
}

impl SubflowState {
    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }
}

/// One assignment, with the latency estimate of every subflow at decision time.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub time: SimTime,
    pub segment: SegmentId,
    pub subflow: usize,
    pub retransmission: bool,
    /// Microseconds; infinite for unschedulable subflows.
    pub latencies_us: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossOutcome {
    pub retransmit: Vec<(SegmentId, usize)>,
    /// Lost segments no longer in the buffer.
    pub given_up: Vec<SegmentId>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SchedulerStats {
    pub segments: u64,
    pub retransmissions: u64,
    pub key_retransmissions: u64,
    pub given_up: u64,
    pub age_evicted: u64,
    pub key_age_evicted: u64,
    /// Oldest first-send age of any retransmitted non-key segment.
    pub max_nonkey_retransmit_age: Duration,
}

#[derive(Clone, Debug)]
pub struct Scheduler {
    subflows: Vec<SubflowState>,
    buffer: BTreeMap<SegmentId, SendBufferEntry>,
    unassigned: VecDeque<SegmentId>,
    next_id: SegmentId,
    initial_srtt: Duration,
    log: Option<Vec<Decision>>,
    stats: SchedulerStats,
}

impl Scheduler {
    /// `initial_srtt` stands in for a subflow's SRTT until its first sample.
    pub fn new(subflows: usize, initial_srtt: Duration) -> Self {
        assert!(subflows > 0, "scheduler needs at least one subflow");
        Self {
            subflows: vec![SubflowState::default(); subflows],
            buffer: BTreeMap::new(),
            unassigned: VecDeque::new(),
            next_id: 0,
            initial_srtt,
            log: None,
            stats: SchedulerStats::default(),
        }
    }

    pub fn with_decision_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn decisions(&self) -> &[Decision] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn subflows(&self) -> &[SubflowState] {
        &self.subflows
    }

    pub fn subflow(&self, s: usize) -> &SubflowState {
        &self.subflows[s]
    }

    pub fn entry(&self, id: SegmentId) -> Option<&SendBufferEntry> {
        self.buffer.get(&id)
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&SegmentId, &SendBufferEntry)> {
        self.buffer.iter()
    }

    pub fn stats(&self) -> SchedulerStats {
        self.stats
    }

    pub fn unassigned(&self) -> usize {
        self.unassigned.len()
    }

    pub fn set_bw_es(&mut self, subflow: usize, bw_bps: f64) {
        self.subflows[subflow].bw_es_bps = bw_bps.max(0.0);
    }

    pub fn set_active_path(&mut self, subflow: usize, path: usize) {
        self.subflows[subflow].active_path = path;
    }

    pub fn update_srtt(&mut self, subflow: usize, rtt: Duration) -> Duration {
        let sf = &mut self.subflows[subflow];
        let srtt = match sf.srtt {
            None => rtt,
            Some(prev) => Duration::from_secs_f64(
                (1.0 - SRTT_DELTA) * prev.as_secs_f64() + SRTT_DELTA * rtt.as_secs_f64(),
            ),
        };
        sf.srtt = Some(srtt);
        srtt
    }

    /// SRTT/2 plus the time to drain this subflow's queue, in microseconds.
    pub fn expected_latency(&self, subflow: usize) -> f64 {
        let sf = &self.subflows[subflow];
        if sf.bw_es_bps <= 0.0 {
            return f64::INFINITY;
        }
        let srtt_us = sf.srtt.unwrap_or(self.initial_srtt).as_micros() as f64;
        srtt_us / 2.0 + sf.queued_bytes as f64 * 8e6 / sf.bw_es_bps
    }

    /// Smallest expected latency over schedulable subflows.
    pub fn lambda_min(&self) -> Option<Duration> {
        let min = (0..self.subflows.len())
            .map(|s| self.expected_latency(s))
            .fold(f64::INFINITY, f64::min);
        min.is_finite().then(|| Duration::from_secs_f64(min / 1e6))
    }

    fn best_subflow(&self) -> Option<(usize, Vec<f64>)> {
        let lat: Vec<f64> = (0..self.subflows.len())
            .map(|s| self.expected_latency(s))
            .collect();
        let mut best: Option<usize> = None;
        for (s, &l) in lat.iter().enumerate() {
            if l.is_finite() && best.is_none_or(|b| l < lat[b]) {
                best = Some(s);
            }
        }
        best.map(|b| (b, lat))
    }

    /// Adds new segments to the buffer and assigns each in turn to the
    /// subflow with the least expected latency.
    pub fn schedule_segments(
        &mut self,
        now: SimTime,
        segments: Vec<StreamFrame>,
    ) -> Vec<(SegmentId, Option<usize>)> {
        let mut out = Vec::with_capacity(segments.len());
        for segment in segments {
            let id = self.next_id;
            self.next_id += 1;
            self.buffer.insert(
                id,
                SendBufferEntry {
                    segment,
                    subflow: 0,
                    first_sent: None,
                    transmissions: 0,
                    queued: false,
                },
            );
            self.stats.segments += 1;
            if self.unassigned.is_empty() {
                let s = self.assign(now, id, false);
                if s.is_none() {
                    self.unassigned.push_back(id);
                }
                out.push((id, s));
            } else {
                self.unassigned.push_back(id);
                out.push((id, None));
            }
        }
        out
    }

    /// Retries segments that arrived while no subflow was schedulable.
    pub fn assign_pending(&mut self, now: SimTime) {
        while let Some(&id) = self.unassigned.front() {
            if self.assign(now, id, false).is_none() {
                break;
            }
            self.unassigned.pop_front();
        }
    }

    fn assign(&mut self, now: SimTime, id: SegmentId, front: bool) -> Option<usize> {
        let (s, latencies_us) = self.best_subflow()?;
        let entry = self
            .buffer
            .get_mut(&id)
            .expect("assigning a buffered segment");
        entry.subflow = s;
        entry.queued = true;
        let len = entry.len();
        let sf = &mut self.subflows[s];
        sf.queued_bytes += len;
        if front {
            sf.queue.push_front(id);
        } else {
            sf.queue.push_back(id);
        }
        if let Some(log) = &mut self.log {
            log.push(Decision {
                time: now,
                segment: id,
                subflow: s,
                retransmission: front,
                latencies_us,
            });
        }
        Some(s)
    }

    /// Discards non-key segments at the head of `subflow`'s queue whose first
    /// transmission is older than the cache age, so a retransmission that
    /// waited too long in the queue never reaches the wire.
    pub fn expire_head(&mut self, now: SimTime, subflow: usize) -> usize {
        let mut n = 0;
        while let Some(&id) = self.subflows[subflow].queue.front() {
            let e = &self.buffer[&id];
            let stale = !e.segment.key_frame
                && e.first_sent
                    .is_some_and(|t| now.saturating_since(t) > RETRANSMIT_CACHE);
            if !stale {
                break;
            }
            let len = e.len();
            let sf = &mut self.subflows[subflow];
            sf.queue.pop_front();
            sf.queued_bytes -= len;
            self.buffer.remove(&id);
            n += 1;
        }
        self.stats.age_evicted += n as u64;
        n
    }

    /// Next segment waiting on `subflow`, without removing it.
    pub fn peek(&self, subflow: usize) -> Option<(SegmentId, &StreamFrame)> {
        let id = *self.subflows[subflow].queue.front()?;
        Some((id, &self.buffer[&id].segment))
    }

    /// Takes the next segment off `subflow`'s queue for transmission.
    pub fn pop_for_send(
        &mut self,
        now: SimTime,
        subflow: usize,
    ) -> Option<(SegmentId, StreamFrame)> {
        let sf = &mut self.subflows[subflow];
        let id = sf.queue.pop_front()?;
        let entry = self
            .buffer
            .get_mut(&id)
            .expect("queued segments are buffered");
        sf.queued_bytes -= entry.len();
        entry.queued = false;
        entry.first_sent.get_or_insert(now);
        entry.transmissions += 1;
        Some((id, entry.segment.clone()))
    }

    pub fn on_acked(&mut self, ids: impl IntoIterator<Item = SegmentId>) {
        for id in ids {
            if let Some(e) = self.buffer.get(&id) {
                if !e.queued {
                    self.buffer.remove(&id);
                } else {
                    // a queued retransmission raced the ack; drop it from the queue
                    let s = e.subflow;
                    let len = e.len();
                    let sf = &mut self.subflows[s];
                    sf.queue.retain(|&q| q != id);
                    sf.queued_bytes -= len;
                    self.buffer.remove(&id);
                }
            }
        }
    }

    /// Decides, for each lost segment, between immediate retransmission on
    /// the least-latency subflow and giving up.
    pub fn on_loss(
        &mut self,
        now: SimTime,
        ids: impl IntoIterator<Item = SegmentId>,
    ) -> LossOutcome {
        let mut out = LossOutcome::default();
        for id in ids {
            let Some(e) = self.buffer.get(&id) else {
                out.given_up.push(id);
                self.stats.given_up += 1;
                continue;
            };
            if e.queued {
                continue;
            }
            let age = e
                .first_sent
                .map_or(Duration::ZERO, |t| now.saturating_since(t));
            let key = e.segment.key_frame;
            if !key && age > RETRANSMIT_CACHE {
                self.buffer.remove(&id);
                out.given_up.push(id);
                self.stats.given_up += 1;
                continue;
            }
            match self.assign(now, id, true) {
                Some(s) => {
                    self.stats.retransmissions += 1;
                    if key {
                        self.stats.key_retransmissions += 1;
                    } else {
                        self.stats.max_nonkey_retransmit_age =
                            self.stats.max_nonkey_retransmit_age.max(age);
                    }
                    out.retransmit.push((id, s));
                }
                None => {
                    // nothing schedulable; retried with new segments
                    self.buffer.get_mut(&id).expect("present").queued = true;
                    self.unassigned.push_front(id);
                }
            }
        }
        out
    }

    /// Drops non-key segments first sent more than the cache age ago.
    /// Unsent segments and key-frame segments are kept.
    pub fn evict(&mut self, now: SimTime) -> usize {
        let expired: Vec<SegmentId> = self
            .buffer
            .iter()
            .filter(|(_, e)| {
                !e.segment.key_frame
                    && e.first_sent
                        .is_some_and(|t| now.saturating_since(t) > RETRANSMIT_CACHE)
            })
            .map(|(&id, _)| id)
            .collect();
        for &id in &expired {
            let e = self.buffer.remove(&id).expect("collected above");
            if e.queued {
                let sf = &mut self.subflows[e.subflow];
                if let Some(pos) = sf.queue.iter().position(|&q| q == id) {
                    sf.queue.remove(pos);
                    sf.queued_bytes -= e.len();
                } else {
                    self.unassigned.retain(|&q| q != id);
                }
            }
        }
        self.stats.age_evicted += expired.len() as u64;
        expired.len()
    }

    /// Lowest buffered segment id; never decreases.
    pub fn least_retained(&self) -> SegmentId {
        self.buffer.keys().next().copied().unwrap_or(self.next_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{packetize, FrameMeta};
    use proptest::prelude::*;

    fn ms(v: u64) -> Duration {
        Duration::from_millis(v)
    }

    fn frame(index: u32, size: usize, key: bool) -> Vec<StreamFrame> {
        let meta = FrameMeta {
            frame_index: index,
            capture_ts: SimTime::ZERO,
            key_frame: key,
        };
        packetize(meta, size, 1000, 0)
    }

    fn two_equal() -> Scheduler {
        let mut s = Scheduler::new(2, ms(100));
        for i in 0..2 {
            s.set_bw_es(i, 1e6);
            s.update_srtt(i, ms(100));
        }
        s
    }

    #[test]
    fn srtt_smoothing() {
        let mut s = Scheduler::new(1, ms(100));
        assert_eq!(s.update_srtt(0, ms(100)), ms(100));
        assert_eq!(s.update_srtt(0, ms(200)), ms(185));
        for _ in 0..30 {
            s.update_srtt(0, ms(40));
        }
        assert!(s.subflow(0).srtt.unwrap().abs_diff(ms(40)) < Duration::from_micros(1));
    }

    #[test]
    fn latency_terms() {
        let mut s = Scheduler::new(1, ms(100));
        s.set_bw_es(0, 1e6);
        s.update_srtt(0, ms(100));
        assert_eq!(s.expected_latency(0), 50_000.0);
        s.subflows[0].queued_bytes = 12_500;
        assert_eq!(s.expected_latency(0), 150_000.0);
        s.subflows[0].queued_bytes = 25_000;
        assert_eq!(s.expected_latency(0), 250_000.0);
        s.set_bw_es(0, 0.0);
        assert!(s.expected_latency(0).is_infinite());
        assert_eq!(s.lambda_min(), None);
    }

    #[test]
    fn argmin_and_ties() {
        let mut s = two_equal();
        s.subflows[0].queued_bytes = 12_500;
        let a = s.schedule_segments(SimTime::ZERO, frame(0, 10, false));
        assert_eq!(a[0].1, Some(1));
        let mut s = two_equal();
        let a = s.schedule_segments(SimTime::ZERO, frame(0, 10, false));
        assert_eq!(a[0].1, Some(0));
    }

    #[test]
    fn equal_subflows_alternate() {
        // oracle: greedy simulation over (srtt, Q, bw) triples
        let mut s = two_equal();
        let got: Vec<_> = s
            .schedule_segments(SimTime::ZERO, frame(0, 10_000, false))
            .into_iter()
            .map(|(_, sf)| sf.unwrap())
            .collect();
        let mut q = [0u64; 2];
        let mut want = Vec::new();
        for _ in 0..10 {
            let lat = |i: usize| 0.05 + q[i] as f64 * 8.0 / 1e6;
            let pick = if lat(1) < lat(0) { 1 } else { 0 };
            q[pick] += 1000;
            want.push(pick);
        }
        assert_eq!(got, want);
        assert_eq!(got, [0, 1, 0, 1, 0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn unschedulable_segments_wait() {
        let mut s = Scheduler::new(1, ms(100));
        let a = s.schedule_segments(SimTime::ZERO, frame(0, 2500, false));
        assert!(a.iter().all(|(_, sf)| sf.is_none()));
        assert_eq!(s.unassigned(), 3);
        s.set_bw_es(0, 1e6);
        s.assign_pending(SimTime::ZERO);
        assert_eq!(s.unassigned(), 0);
        assert_eq!(s.subflow(0).queued_bytes, 2500);
    }

    fn send_all(s: &mut Scheduler, now: SimTime) -> Vec<SegmentId> {
        let mut ids = Vec::new();
        for sf in 0..s.subflows().len() {
            while let Some((id, _)) = s.pop_for_send(now, sf) {
                ids.push(id);
            }
        }
        ids
    }

    #[test]
    fn key_segment_retransmitted_at_any_age() {
        let mut s = two_equal();
        s.schedule_segments(SimTime::ZERO, frame(0, 500, true));
        let ids = send_all(&mut s, SimTime::ZERO);
        assert_eq!(s.evict(SimTime::from_secs(30)), 0);
        let out = s.on_loss(SimTime::from_secs(30), ids.clone());
        assert_eq!(out.retransmit.len(), 1);
        assert!(out.given_up.is_empty());
    }

    #[test]
    fn old_non_key_segment_given_up() {
        let mut s = two_equal();
        s.schedule_segments(SimTime::ZERO, frame(0, 500, false));
        let ids = send_all(&mut s, SimTime::ZERO);
        let out = s.on_loss(SimTime::from_millis(401), ids.clone());
        assert!(out.retransmit.is_empty());
        assert_eq!(out.given_up, ids);
        assert_eq!(s.buffered(), 0);
    }

    #[test]
    fn retransmission_follows_current_best_subflow() {
        let mut s = two_equal();
        s.schedule_segments(SimTime::ZERO, frame(0, 500, false));
        let ids = send_all(&mut s, SimTime::ZERO);
        assert_eq!(s.entry(ids[0]).unwrap().subflow, 0);
        s.update_srtt(0, ms(400));
        let out = s.on_loss(SimTime::from_millis(100), ids.clone());
        assert_eq!(out.retransmit, [(ids[0], 1)]);
        // pushed ahead of queued new data
        s.schedule_segments(SimTime::from_millis(100), frame(1, 500, false));
        assert_eq!(s.peek(1).unwrap().0, ids[0]);
    }

    #[test]
    fn stale_queued_retransmission_expires() {
        let mut s = two_equal();
        s.schedule_segments(SimTime::ZERO, frame(0, 500, true));
        s.schedule_segments(SimTime::ZERO, frame(1, 500, false));
        let ids = send_all(&mut s, SimTime::ZERO);
        let out = s.on_loss(SimTime::from_millis(350), ids.clone());
        assert_eq!(out.retransmit.len(), 2);
        let sf = out.retransmit[1].1;
        let later = SimTime::from_millis(420);
        assert_eq!(s.expire_head(later, out.retransmit[0].1), 0);
        if sf != out.retransmit[0].1 {
            assert_eq!(s.expire_head(later, sf), 1);
        } else {
            s.pop_for_send(later, sf);
            assert_eq!(s.expire_head(later, sf), 1);
        }
        assert!(s.entry(ids[1]).is_none());
        assert!(s.entry(ids[0]).is_some());
        assert_eq!(s.stats().age_evicted, 1);
    }

    #[test]
    fn eviction_rules() {
        let mut s = two_equal();
        s.schedule_segments(SimTime::ZERO, frame(0, 500, true));
        s.schedule_segments(SimTime::ZERO, frame(1, 500, false));
        let sent = send_all(&mut s, SimTime::ZERO);
        s.schedule_segments(SimTime::ZERO, frame(2, 500, false));
        let before = s.least_retained();
        assert_eq!(s.evict(SimTime::from_secs(5)), 1);
        assert!(s.least_retained() >= before);
        // unsent and key segments remain
        assert_eq!(s.buffered(), 2);
        s.on_acked([sent[0]]);
        assert!(s.entry(sent[0]).is_none());
        assert!(s.least_retained() > before);
        assert_eq!(s.stats().key_age_evicted, 0);
    }

    #[derive(Clone, Debug)]
    enum Op {
        Frame(usize, bool),
        Send(usize),
        Ack(usize),
        Lose(usize),
        Bw(usize, u32),
        Evict,
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (1usize..5000, any::<bool>()).prop_map(|(n, k)| Op::Frame(n, k)),
            (0usize..3).prop_map(Op::Send),
            (0usize..50).prop_map(Op::Ack),
            (0usize..50).prop_map(Op::Lose),
            (0usize..3, 0u32..5_000_000).prop_map(|(s, b)| Op::Bw(s, b)),
            Just(Op::Evict),
        ]
    }

    proptest! {
        #[test]
        fn bookkeeping_and_optimality(ops in proptest::collection::vec(op(), 1..200)) {
            let mut s = Scheduler::new(3, ms(100)).with_decision_log();
            for i in 0..3 {
                s.set_bw_es(i, 1e6 * (i + 1) as f64);
            }
            let mut now = SimTime::ZERO;
            let mut sent: Vec<SegmentId> = Vec::new();
            let mut key_ids = Vec::new();
            for (n, o) in ops.into_iter().enumerate() {
                now += ms(37);
                match o {
                    Op::Frame(size, key) => {
                        for (id, _) in s.schedule_segments(now, frame(n as u32, size, key)) {
                            if key { key_ids.push(id); }
                        }
                    }
                    Op::Send(sf) => {
                        if let Some((id, _)) = s.pop_for_send(now, sf) { sent.push(id); }
                    }
                    Op::Ack(i) => if !sent.is_empty() { let id = sent[i % sent.len()]; s.on_acked([id]); key_ids.retain(|&k| k != id); },
                    Op::Lose(i) => if !sent.is_empty() { s.on_loss(now, [sent[i % sent.len()]]); },
                    Op::Bw(sf, bw) => { s.set_bw_es(sf, bw as f64); s.assign_pending(now); }
                    Op::Evict => { s.evict(now); }
                }
                for (i, sf) in s.subflows().iter().enumerate() {
                    let sum: u64 = sf.queue.iter().map(|id| s.entry(*id).unwrap().len()).sum();
                    prop_assert_eq!(sf.queued_bytes, sum, "subflow {}", i);
                }
                for id in &key_ids {
                    prop_assert!(s.entry(*id).is_some(), "key segment {} evicted before ack", id);
                }
            }
            for d in s.decisions() {
                let chosen = d.latencies_us[d.subflow];
                prop_assert!(d.latencies_us.iter().all(|&l| l >= chosen));
            }
            prop_assert!(s.stats().max_nonkey_retransmit_age <= RETRANSMIT_CACHE);
        }
    }
}
