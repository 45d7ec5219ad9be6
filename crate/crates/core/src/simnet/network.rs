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

//! Multi-hop packet forwarding over a set of links.

use std::sync::Arc;

use super::link::{Capacity, Enqueue, Link, LinkConfig, LinkStats, WireSize};
use super::SimTime;

pub type LinkId = usize;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RouteError {
    #[error("route has no links")]
    Empty,
    #[error("route references unknown link {0}")]
    UnknownLink(LinkId),
}

/// Ordered links from a source endpoint to a destination endpoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Route(Arc<[LinkId]>);

impl Route {
    pub fn new(links: Vec<LinkId>) -> Result<Self, RouteError> {
        if links.is_empty() {
            return Err(RouteError::Empty);
        }
        Ok(Route(links.into()))
    }

    pub fn links(&self) -> &[LinkId] {
        &self.0
    }

    pub fn hops(&self) -> usize {
        self.0.len()
    }
}

/// A packet travelling along a route.
#[derive(Debug)]
pub struct InTransit<P> {
    pub packet: P,
    pub route: Route,
    hop: usize,
}

impl<P: WireSize> WireSize for InTransit<P> {
    fn wire_size(&self) -> u32 {
        self.packet.wire_size()
    }
}

#[derive(Debug)]
pub enum NetEvent<P> {
    /// The head packet of a link finished serializing.
    TxDone(LinkId),
    /// A packet reached the far end of `route[hop]`.
    Arrive(InTransit<P>),
}

#[derive(Debug)]
pub enum NetOutput<P> {
    Schedule(SimTime, NetEvent<P>),
    Delivered(P),
    Dropped { packet: P, link: LinkId },
}

#[derive(Debug, Default)]
pub struct Network<P> {
    links: Vec<Link<InTransit<P>>>,
}

impl<P: WireSize> Network<P> {
    pub fn new() -> Self {
        Network { links: Vec::new() }
    }

    pub fn add_link(&mut self, config: LinkConfig, capacity: Capacity) -> LinkId {
        self.links.push(Link::with_capacity(config, capacity));
        self.links.len() - 1
    }

    pub fn link(&self, id: LinkId) -> &Link<InTransit<P>> {
        &self.links[id]
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn stats(&self, id: LinkId) -> &LinkStats {
        self.links[id].stats()
    }

    pub fn check_route(&self, route: &Route) -> Result<(), RouteError> {
        match route.links().iter().find(|&&l| l >= self.links.len()) {
            Some(&l) => Err(RouteError::UnknownLink(l)),
            None => Ok(()),
        }
    }

    /// Sum of one-way propagation delays along `route`.
    pub fn route_owd(&self, route: &Route) -> std::time::Duration {
        route
            .links()
            .iter()
            .map(|&l| self.links[l].config().owd)
            .sum()
    }

    /// Bottleneck of the per-link average capacities over `[from, to)`.
    pub fn route_mean_capacity(&self, route: &Route, from: SimTime, to: SimTime) -> f64 {
        route
            .links()
            .iter()
            .map(|&l| self.links[l].capacity().mean_between(from, to))
            .fold(f64::INFINITY, f64::min)
    }

    /// Injects `packet` at the first link of `route`.
    pub fn send(&mut self, now: SimTime, packet: P, route: Route, out: &mut Vec<NetOutput<P>>) {
        self.enqueue(
            now,
            InTransit {
                packet,
                route,
                hop: 0,
            },
            out,
        );
    }

    pub fn handle(&mut self, now: SimTime, event: NetEvent<P>, out: &mut Vec<NetOutput<P>>) {
        match event {
            NetEvent::TxDone(id) => {
                let link = &mut self.links[id];
                let (transit, next) = link.complete_tx(now);
                if let Some(at) = next {
                    out.push(NetOutput::Schedule(at, NetEvent::TxDone(id)));
                }
                let arrive = now + link.config().owd;
                out.push(NetOutput::Schedule(arrive, NetEvent::Arrive(transit)));
            }
            NetEvent::Arrive(mut transit) => {
                let id = transit.route.links()[transit.hop];
                self.links[id].record_arrival(transit.packet.wire_size());
                transit.hop += 1;
                if transit.hop == transit.route.hops() {
                    out.push(NetOutput::Delivered(transit.packet));
                } else {
                    self.enqueue(now, transit, out);
                }
            }
        }
    }

    fn enqueue(&mut self, now: SimTime, transit: InTransit<P>, out: &mut Vec<NetOutput<P>>) {
        let id = transit.route.links()[transit.hop];
        match self.links[id].enqueue(now, transit) {
            Enqueue::Dropped(t) => out.push(NetOutput::Dropped {
                packet: t.packet,
                link: id,
            }),
            Enqueue::Accepted { tx_done: Some(at) } => {
                out.push(NetOutput::Schedule(at, NetEvent::TxDone(id)))
            }
            Enqueue::Accepted { tx_done: None } => {}
        }
    }
}
