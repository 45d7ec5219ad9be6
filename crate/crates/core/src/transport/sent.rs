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

use std::collections::{BTreeMap, VecDeque};
use std::time::Duration;

use super::wire::{AckFrame, PacketNumber};
use crate::simnet::SimTime;

/// A packet is lost once a packet this many numbers above it is acked.
pub const REORDERING_THRESHOLD: u64 = 3;
/// Time threshold as a multiple of the smoothed RTT.
pub const TIME_THRESHOLD: f64 = 1.25;
/// RTT assumed for the loss timer before the first sample.
pub const INITIAL_LOSS_RTT: Duration = Duration::from_millis(333);
const MIN_LOSS_DELAY: Duration = Duration::from_millis(1);
// Lost records are kept this long so late acks are still credited.
const LOST_RECORD_TTL: Duration = Duration::from_secs(2);

#[derive(Clone, Debug, PartialEq)]
pub struct SentPacket<M> {
    pub number: PacketNumber,
    pub sent_ts: SimTime,
    pub size: u32,
    pub delivered_at_send: u64,
    pub app_limited: bool,
    pub meta: M,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeliveryRateSample {
    pub bandwidth_bps: u64,
    pub rtt: Duration,
    /// Bytes in flight after the ack was processed.
    pub inflight: u64,
    pub has_loss: bool,
    pub app_limited: bool,
    /// Cumulative delivered bytes when the sampled packet was sent.
    pub prior_delivered: u64,
}

#[derive(Debug)]
pub struct AckOutcome<M> {
    pub samples: Vec<DeliveryRateSample>,
    pub acked: Vec<SentPacket<M>>,
    /// Packets previously declared lost that the peer did receive.
    pub late_acked: Vec<SentPacket<M>>,
    pub lost: Vec<SentPacket<M>>,
}

impl<M> Default for AckOutcome<M> {
    fn default() -> Self {
        Self {
            samples: Vec::new(),
            acked: Vec::new(),
            late_acked: Vec::new(),
            lost: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SendStats {
    pub packets_sent: u64,
    pub bytes_sent: u64,
    pub packets_acked: u64,
    pub packets_lost: u64,
    pub spurious_losses: u64,
}

/// Sender half of one path connection: numbering, in-flight records,
/// delivery-rate samples and loss detection.
#[derive(Debug)]
pub struct SendManager<M> {
    next_pn: u64,
    // Slot i holds packet `base_pn + i`; `None` once acked, lost or untracked.
    outstanding: VecDeque<Option<SentPacket<M>>>,
    base_pn: u64,
    lost: BTreeMap<u64, (SentPacket<M>, SimTime)>,
    inflight: u64,
    delivered: u64,
    largest_acked: Option<u64>,
    srtt: Option<Duration>,
    latest_rtt: Option<Duration>,
    app_limited_until: u64,
    stats: SendStats,
}

impl<M: Clone> Default for SendManager<M> {
    fn default() -> Self {
        Self::new()
    }
}

impl<M: Clone> SendManager<M> {
    pub fn new() -> Self {
        Self {
            next_pn: 0,
            outstanding: VecDeque::new(),
            base_pn: 0,
            lost: BTreeMap::new(),
            inflight: 0,
            delivered: 0,
            largest_acked: None,
            srtt: None,
            latest_rtt: None,
            app_limited_until: 0,
            stats: SendStats::default(),
        }
    }

    pub fn next_packet_number(&self) -> PacketNumber {
        PacketNumber(self.next_pn)
    }

    pub fn inflight(&self) -> u64 {
        self.inflight
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn srtt(&self) -> Option<Duration> {
        self.srtt
    }

    pub fn stats(&self) -> SendStats {
        self.stats
    }

    pub fn is_app_limited(&self) -> bool {
        self.app_limited_until != 0
    }

    /// Least packet number still awaiting an ack.
    pub fn least_unacked(&self) -> PacketNumber {
        PacketNumber(self.base_pn)
    }

    pub fn outstanding(&self) -> impl Iterator<Item = &SentPacket<M>> {
        self.outstanding.iter().flatten()
    }

    /// Marks the current flight as application-limited: samples from packets
    /// sent before it has been delivered are flagged.
    pub fn set_app_limited(&mut self) {
        self.app_limited_until = (self.delivered + self.inflight).max(1);
    }

    /// Records a data packet and returns its number.
    pub fn on_sent(&mut self, now: SimTime, size: u32, meta: M) -> PacketNumber {
        let pn = PacketNumber(self.next_pn);
        self.next_pn += 1;
        self.outstanding.push_back(Some(SentPacket {
            number: pn,
            sent_ts: now,
            size,
            delivered_at_send: self.delivered,
            app_limited: self.app_limited_until != 0,
            meta,
        }));
        self.inflight += u64::from(size);
        self.stats.packets_sent += 1;
        self.stats.bytes_sent += u64::from(size);
        pn
    }

    /// Allocates a number for a packet that is not tracked for acks.
    pub fn on_sent_untracked(&mut self) -> PacketNumber {
        let pn = PacketNumber(self.next_pn);
        self.next_pn += 1;
        self.outstanding.push_back(None);
        self.trim_front();
        pn
    }

    fn loss_delay(&self) -> Duration {
        let rtt = match (self.srtt, self.latest_rtt) {
            (Some(s), Some(l)) => s.max(l),
            _ => INITIAL_LOSS_RTT,
        };
        rtt.mul_f64(TIME_THRESHOLD).max(MIN_LOSS_DELAY)
    }

    /// When the oldest outstanding packet would be declared lost by time.
    pub fn loss_deadline(&self) -> Option<SimTime> {
        self.outstanding
            .front()
            .and_then(Option::as_ref)
            .map(|p| p.sent_ts + self.loss_delay())
    }

    pub fn on_ack(&mut self, now: SimTime, ack: &AckFrame) -> AckOutcome<M> {
        let mut out = AckOutcome::default();
        let ack_delay = Duration::from_micros(u64::from(ack.ack_delay_us));

        for range in &ack.ranges {
            let lo = range.start.0.max(self.base_pn);
            let hi = range.end.0.min(self.next_pn.saturating_sub(1));
            if self.next_pn == 0 || lo > hi {
                continue;
            }
            for pn in lo..=hi {
                let slot = &mut self.outstanding[(pn - self.base_pn) as usize];
                if let Some(p) = slot.take() {
                    out.acked.push(p);
                }
            }
        }
        if !self.lost.is_empty() {
            let late: Vec<u64> = self
                .lost
                .keys()
                .copied()
                .filter(|&pn| ack.acks(PacketNumber(pn)))
                .collect();
            for pn in late {
                let (p, _) = self.lost.remove(&pn).expect("key from map");
                self.delivered += u64::from(p.size);
                self.stats.spurious_losses += 1;
                out.late_acked.push(p);
            }
        }
        if out.acked.is_empty() {
            self.trim_front();
            self.prune_lost(now);
            return out;
        }
        out.acked.sort_by_key(|p| p.number);

        for p in &out.acked {
            self.inflight -= u64::from(p.size);
            self.delivered += u64::from(p.size);
        }
        self.stats.packets_acked += out.acked.len() as u64;

        let newest = out.acked.last().expect("non-empty");
        if self.largest_acked.is_none_or(|l| newest.number.0 > l) {
            self.largest_acked = Some(newest.number.0);
        }
        if newest.number == ack.largest_acked {
            let rtt = rtt_sample(now, newest.sent_ts, ack_delay);
            self.latest_rtt = Some(rtt);
            self.srtt = Some(match self.srtt {
                None => rtt,
                Some(s) => (s * 7 + rtt) / 8,
            });
        }

        self.detect_lost(now, &mut out.lost);
        let has_loss = !out.lost.is_empty();

        for p in &out.acked {
            let elapsed = now.saturating_since(p.sent_ts).as_micros().max(1);
            let bytes = self.delivered - p.delivered_at_send;
            let bandwidth_bps =
                u64::try_from(u128::from(bytes) * 8_000_000 / elapsed).unwrap_or(u64::MAX);
            out.samples.push(DeliveryRateSample {
                bandwidth_bps,
                rtt: rtt_sample(now, p.sent_ts, ack_delay),
                inflight: self.inflight,
                has_loss,
                app_limited: p.app_limited,
                prior_delivered: p.delivered_at_send,
            });
        }
        if self.app_limited_until != 0 && self.delivered > self.app_limited_until {
            self.app_limited_until = 0;
        }
        self.trim_front();
        self.prune_lost(now);
        out
    }

    /// Declares packets lost by the time threshold alone.
    pub fn on_loss_timer(&mut self, now: SimTime) -> Vec<SentPacket<M>> {
        let mut lost = Vec::new();
        self.detect_lost(now, &mut lost);
        self.trim_front();
        lost
    }

    fn detect_lost(&mut self, now: SimTime, lost: &mut Vec<SentPacket<M>>) {
        let delay = self.loss_delay();
        let largest = self.largest_acked;
        for (i, slot) in self.outstanding.iter_mut().enumerate() {
            let pn = self.base_pn + i as u64;
            let by_order = largest.is_some_and(|l| pn + REORDERING_THRESHOLD <= l);
            let Some(p) = slot else {
                continue;
            };
            let by_time = p.sent_ts + delay < now;
            if !by_order && !by_time {
                // later packets fail both tests too
                break;
            }
            let p = slot.take().expect("checked above");
            self.inflight -= u64::from(p.size);
            self.stats.packets_lost += 1;
            lost.push(p);
        }
        for p in lost.iter() {
            // kept so that a late ack still counts as delivered
            self.lost.insert(p.number.0, (p.clone(), now));
        }
    }

    fn trim_front(&mut self) {
        while let Some(None) = self.outstanding.front() {
            self.outstanding.pop_front();
            self.base_pn += 1;
        }
    }

    fn prune_lost(&mut self, now: SimTime) {
        self.lost
            .retain(|_, (_, at)| now.saturating_since(*at) <= LOST_RECORD_TTL);
    }
}

fn rtt_sample(now: SimTime, sent: SimTime, ack_delay: Duration) -> Duration {
    let raw = now.saturating_since(sent);
    let rtt = if raw > ack_delay {
        raw - ack_delay
    } else {
        raw
    };
    rtt.max(Duration::from_micros(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::wire::AckRange;
    use proptest::prelude::*;

    fn ack(largest: u64, delay_us: u32, ranges: &[(u64, u64)]) -> AckFrame {
        AckFrame {
            largest_acked: PacketNumber(largest),
            ack_delay_us: delay_us,
            ranges: ranges
                .iter()
                .map(|&(s, e)| AckRange {
                    start: PacketNumber(s),
                    end: PacketNumber(e),
                })
                .collect(),
        }
    }

    #[test]
    fn bandwidth_sample_from_delivered_bytes() {
        let mut sm = SendManager::new();
        sm.on_sent(SimTime::ZERO, 125_000, ());
        let out = sm.on_ack(SimTime::from_millis(100), &ack(0, 0, &[(0, 0)]));
        assert_eq!(out.samples.len(), 1);
        assert_eq!(out.samples[0].bandwidth_bps, 125_000 * 8 * 10);
        assert_eq!(out.samples[0].rtt, Duration::from_millis(100));
        assert_eq!(sm.inflight(), 0);
    }

    #[test]
    fn duplicate_ack_yields_nothing() {
        let mut sm = SendManager::new();
        sm.on_sent(SimTime::ZERO, 1200, ());
        let a = ack(0, 0, &[(0, 0)]);
        assert_eq!(sm.on_ack(SimTime::from_millis(50), &a).samples.len(), 1);
        assert!(sm.on_ack(SimTime::from_millis(60), &a).samples.is_empty());
    }

    #[test]
    fn ack_delay_is_removed_from_rtt() {
        let mut sm = SendManager::new();
        sm.on_sent(SimTime::ZERO, 1200, ());
        let out = sm.on_ack(SimTime::from_millis(130), &ack(0, 10_000, &[(0, 0)]));
        assert_eq!(out.samples[0].rtt, Duration::from_millis(120));
    }

    #[test]
    fn three_later_acks_declare_loss() {
        let mut sm = SendManager::new();
        for i in 0..4 {
            sm.on_sent(SimTime::from_millis(i), 1000, i);
        }
        let out = sm.on_ack(SimTime::from_millis(60), &ack(2, 0, &[(1, 2)]));
        assert!(out.lost.is_empty());
        let out = sm.on_ack(SimTime::from_millis(61), &ack(3, 0, &[(1, 3)]));
        assert_eq!(out.lost.iter().map(|p| p.meta).collect::<Vec<_>>(), [0]);
        assert!(out.samples.iter().all(|s| s.has_loss));
        assert_eq!(sm.inflight(), 0);
        assert_eq!(sm.least_unacked(), PacketNumber(4));
    }

    #[test]
    fn in_order_acks_lose_nothing() {
        let mut sm = SendManager::new();
        for i in 0..20u64 {
            sm.on_sent(SimTime::from_millis(i), 1000, ());
            let out = sm.on_ack(SimTime::from_millis(i + 40), &ack(i, 0, &[(i, i)]));
            assert!(out.lost.is_empty());
        }
    }

    #[test]
    fn timer_loss_after_threshold() {
        let mut sm = SendManager::new();
        sm.on_sent(SimTime::ZERO, 1000, ());
        sm.on_ack(SimTime::from_millis(100), &ack(0, 0, &[(0, 0)]));
        assert_eq!(sm.srtt(), Some(Duration::from_millis(100)));
        sm.on_sent(SimTime::from_millis(200), 1000, ());
        assert_eq!(sm.loss_deadline(), Some(SimTime::from_millis(325)));
        assert!(sm.on_loss_timer(SimTime::from_millis(325)).is_empty());
        assert_eq!(sm.on_loss_timer(SimTime::from_micros(325_001)).len(), 1);
        assert_eq!(sm.inflight(), 0);
    }

    #[test]
    fn late_ack_of_lost_packet_counts_delivered_once() {
        let mut sm = SendManager::new();
        sm.on_sent(SimTime::ZERO, 1000, ());
        assert_eq!(sm.on_loss_timer(SimTime::from_secs(1)).len(), 1);
        let out = sm.on_ack(SimTime::from_millis(1001), &ack(0, 0, &[(0, 0)]));
        assert_eq!(out.late_acked.len(), 1);
        assert!(out.samples.is_empty());
        assert_eq!(sm.delivered(), 1000);
        let again = sm.on_ack(SimTime::from_millis(1002), &ack(0, 0, &[(0, 0)]));
        assert!(again.late_acked.is_empty());
        assert_eq!(sm.delivered(), 1000);
    }

    #[test]
    fn app_limited_flag_clears_after_flight_delivered() {
        let mut sm = SendManager::new();
        sm.on_sent(SimTime::ZERO, 1000, ());
        sm.set_app_limited();
        sm.on_sent(SimTime::from_millis(1), 1000, ());
        let out = sm.on_ack(SimTime::from_millis(50), &ack(1, 0, &[(0, 1)]));
        assert_eq!(
            out.samples
                .iter()
                .map(|s| s.app_limited)
                .collect::<Vec<_>>(),
            [false, true]
        );
        assert!(!sm.is_app_limited());
    }

    #[test]
    fn untracked_numbers_stay_monotone() {
        let mut sm: SendManager<()> = SendManager::new();
        let a = sm.on_sent(SimTime::ZERO, 10, ());
        let b = sm.on_sent_untracked();
        let c = sm.on_sent(SimTime::ZERO, 10, ());
        assert!(a < b && b < c);
    }

    #[derive(Clone, Debug)]
    enum Op {
        Send(u32),
        Ack(u64, u64),
        Timer,
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (1u32..1500).prop_map(Op::Send),
            (0u64..64, 0u64..8).prop_map(|(a, w)| Op::Ack(a, w)),
            Just(Op::Timer),
        ]
    }

    proptest! {
        #[test]
        fn inflight_matches_outstanding(ops in proptest::collection::vec(op(), 1..300)) {
            let mut sm = SendManager::new();
            let mut now = SimTime::ZERO;
            let mut pns = Vec::new();
            for o in ops {
                now += Duration::from_millis(7);
                match o {
                    Op::Send(size) => pns.push(sm.on_sent(now, size, ()).0),
                    Op::Ack(start, width) => {
                        if pns.is_empty() { continue; }
                        let hi = pns.len() as u64 - 1;
                        let s = start.min(hi);
                        let e = (s + width).min(hi);
                        let out = sm.on_ack(now, &ack(e, 0, &[(s, e)]));
                        for smp in &out.samples {
                            prop_assert!(smp.rtt > Duration::ZERO);
                        }
                    }
                    Op::Timer => { sm.on_loss_timer(now); }
                }
                let sum: u64 = sm.outstanding().map(|p| u64::from(p.size)).sum();
                prop_assert_eq!(sm.inflight(), sum);
            }
        }
    }
}
