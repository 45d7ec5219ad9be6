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

//! Network model checked against a closed-form droptail recurrence.

use std::time::Duration;

use proptest::prelude::*;
use rtcmp::simnet::{
    Capacity, EventQueue, LinkConfig, NetEvent, NetOutput, Network, Route, SimTime, WireSize,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pkt {
    id: usize,
    size: u32,
}

impl WireSize for Pkt {
    fn wire_size(&self) -> u32 {
        self.size
    }
}

enum Ev {
    Inject(Pkt),
    Net(NetEvent<Pkt>),
}

#[derive(Debug, Default, PartialEq)]
struct Outcome {
    delivered: Vec<(usize, u64)>,
    dropped: Vec<usize>,
}

fn simulate(links: &[(u64, u64, u64)], arrivals: &[(u64, u32)]) -> Outcome {
    let mut net = Network::new();
    let ids: Vec<_> = links
        .iter()
        .map(|&(bps, owd_us, queue)| {
            let cfg = LinkConfig::new(bps, Duration::from_micros(owd_us), queue).unwrap();
            net.add_link(cfg, Capacity::Fixed(bps))
        })
        .collect();
    let route = Route::new(ids).unwrap();
    let mut q = EventQueue::new();
    for (id, &(t, size)) in arrivals.iter().enumerate() {
        q.schedule(SimTime::from_micros(t), Ev::Inject(Pkt { id, size }))
            .unwrap();
    }
    let mut out = Vec::new();
    let mut res = Outcome::default();
    while let Some((now, ev)) = q.pop_until(SimTime::from_secs(3600)) {
        match ev {
            Ev::Inject(p) => net.send(now, p, route.clone(), &mut out),
            Ev::Net(e) => net.handle(now, e, &mut out),
        }
        for o in out.drain(..) {
            match o {
                NetOutput::Schedule(at, e) => {
                    q.schedule(at, Ev::Net(e)).unwrap();
                }
                NetOutput::Delivered(p) => res.delivered.push((p.id, now.as_micros())),
                NetOutput::Dropped { packet, .. } => res.dropped.push(packet.id),
            }
        }
    }
    res
}

/// Single link: a packet is accepted if the bytes still in the queue at its
/// arrival, counting any packet finishing at that same instant, leave room;
/// accepted packets serialize back to back.
fn reference(bps: u64, owd_us: u64, queue: u64, arrivals: &[(u64, u32)]) -> Outcome {
    let mut res = Outcome::default();
    let mut in_queue: Vec<(u64, u64)> = Vec::new();
    let mut last_done = 0u64;
    for (id, &(t, size)) in arrivals.iter().enumerate() {
        in_queue.retain(|&(done, _)| done >= t);
        let occupied: u64 = in_queue.iter().map(|&(_, s)| s).sum();
        if occupied + size as u64 > queue {
            res.dropped.push(id);
            continue;
        }
        let start = t.max(last_done);
        let tx = (size as u64 * 8 * 1_000_000).div_ceil(bps);
        last_done = start + tx;
        in_queue.push((last_done, size as u64));
        res.delivered.push((id, last_done + owd_us));
    }
    res
}

fn sorted_arrivals() -> impl Strategy<Value = Vec<(u64, u32)>> {
    proptest::collection::vec((0u64..5_000, 40u32..1500), 1..200).prop_map(|v| {
        let mut t = 0;
        v.into_iter()
            .map(|(gap, size)| {
                t += gap;
                (t, size)
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn single_link_matches_recurrence(
        arrivals in sorted_arrivals(),
        bps in 100_000u64..20_000_000,
        owd_us in 0u64..100_000,
        queue in 1_500u64..40_000,
    ) {
        let got = simulate(&[(bps, owd_us, queue)], &arrivals);
        prop_assert_eq!(got, reference(bps, owd_us, queue, &arrivals));
    }

    #[test]
    fn two_hops_conserve_packets_in_order(
        arrivals in sorted_arrivals(),
        a in 200_000u64..20_000_000,
        b in 200_000u64..20_000_000,
        qa in 1_500u64..30_000,
        qb in 1_500u64..30_000,
    ) {
        let got = simulate(&[(a, 5_000, qa), (b, 20_000, qb)], &arrivals);
        prop_assert_eq!(got.delivered.len() + got.dropped.len(), arrivals.len());
        prop_assert!(got.delivered.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
        for &(id, at) in &got.delivered {
            // at least both propagation delays plus both serializations
            let size = arrivals[id].1 as u64 * 8 * 1_000_000;
            let floor = arrivals[id].0 + 25_000 + size.div_ceil(a) + size.div_ceil(b);
            prop_assert!(at >= floor, "packet {} at {} before {}", id, at, floor);
        }
    }
}

#[test]
fn idle_link_delivery_time() {
    // 1500 B at 1.2 Mbps is 10 ms, plus 30 ms propagation
    let got = simulate(&[(1_200_000, 30_000, 10_000)], &[(1_000, 1500)]);
    assert_eq!(got.delivered, [(0, 41_000)]);
}
