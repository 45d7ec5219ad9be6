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

//! Topology assembly: dumbbell, two-flow RTT-unfairness, and the
//! two-subflow relay overlay.

use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::link::{Capacity, LinkConfig, LinkConfigError, WireSize};
use super::network::{LinkId, Network, Route};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TopologyError {
    #[error("unknown topology `{0}`")]
    UnknownTopology(String),
    #[error("missing parameter: {0}")]
    MissingParameter(&'static str),
    #[error("unknown {family} case {case}")]
    UnknownCase { family: &'static str, case: u32 },
    #[error(transparent)]
    Link(#[from] LinkConfigError),
}

/// Link parameters in the units the experiment tables use.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub bandwidth_mbps: f64,
    pub owd_ms: f64,
    /// Queue length expressed as time at line rate.
    pub queue_ms: f64,
}

impl LinkSpec {
    pub const fn new(bandwidth_mbps: f64, owd_ms: f64, queue_ms: f64) -> Self {
        LinkSpec {
            bandwidth_mbps,
            owd_ms,
            queue_ms,
        }
    }

    pub fn capacity_bps(&self) -> u64 {
        (self.bandwidth_mbps * 1e6).round() as u64
    }

    pub fn config(&self) -> Result<LinkConfig, LinkConfigError> {
        LinkConfig::with_queue_time(
            self.capacity_bps(),
            Duration::from_micros((self.owd_ms * 1e3).round() as u64),
            Duration::from_micros((self.queue_ms * 1e3).round() as u64),
        )
    }
}

/// Bottleneck link L1 of the dumbbell, cases 1 through 12.
pub fn dumbbell_case(case: u32) -> Result<LinkSpec, TopologyError> {
    let (mbps, queue_ms) = match case {
        1 => (3.0, 100.0),
        2 => (3.0, 150.0),
        3 => (3.0, 200.0),
        4 => (5.0, 100.0),
        5 => (5.0, 150.0),
        6 => (5.0, 200.0),
        7 => (6.0, 150.0),
        8 => (6.0, 200.0),
        9 => (8.0, 150.0),
        10 => (8.0, 200.0),
        11 => (10.0, 150.0),
        12 => (10.0, 200.0),
        _ => {
            return Err(TopologyError::UnknownCase {
                family: "dumbbell",
                case,
            })
        }
    };
    Ok(LinkSpec::new(mbps, 50.0, queue_ms))
}

/// Links L0..L4 of the RTT-unfairness topology, cases 1 through 3.
pub fn rtt_unfairness_case(case: u32) -> Result<[LinkSpec; 5], TopologyError> {
    let l = LinkSpec::new;
    match case {
        1 => Ok([
            l(10.0, 10.0, 200.0),
            l(4.0, 10.0, 200.0),
            l(10.0, 10.0, 200.0),
            l(10.0, 20.0, 200.0),
            l(10.0, 30.0, 200.0),
        ]),
        2 => Ok([
            l(10.0, 10.0, 200.0),
            l(4.0, 10.0, 200.0),
            l(10.0, 10.0, 200.0),
            l(10.0, 10.0, 200.0),
            l(10.0, 30.0, 200.0),
        ]),
        3 => Ok([
            l(10.0, 20.0, 200.0),
            l(4.0, 10.0, 200.0),
            l(10.0, 10.0, 200.0),
            l(10.0, 10.0, 200.0),
            l(10.0, 30.0, 200.0),
        ]),
        _ => Err(TopologyError::UnknownCase {
            family: "rtt-unfairness",
            case,
        }),
    }
}

/// Default sender/receiver access links of the dumbbell.
pub const DUMBBELL_ACCESS: LinkSpec = LinkSpec::new(100.0, 1.0, 100.0);

/// Candidate paths of the relay overlay.
#[derive(Clone, Debug)]
pub struct OverlayConfig {
    /// Per subflow: capacity of the direct path, then of the relay path.
    pub path_capacities: Vec<[Capacity; 2]>,
    /// Per-route one-way delay is drawn uniformly from this range.
    pub delay_range: (Duration, Duration),
    /// Droptail limit on the capacity-limited links.
    pub queue_bytes: u64,
    /// Capacity of the relay-to-receiver hop and of reverse links.
    pub fast_link_bps: u64,
}

impl OverlayConfig {
    pub fn new(path_capacities: Vec<[Capacity; 2]>) -> Self {
        OverlayConfig {
            path_capacities,
            delay_range: (Duration::from_millis(50), Duration::from_millis(100)),
            queue_bytes: 64_000,
            fast_link_bps: 100_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub enum TopologyConfig {
    /// `flows` senders share bottleneck L1 through access links.
    Dumbbell {
        bottleneck: LinkSpec,
        access: LinkSpec,
        flows: usize,
    },
    /// Flow 1 crosses L0, L1, L2; flow 2 crosses L3, L1, L4.
    RttUnfairness { links: [LinkSpec; 5] },
    /// Each subflow has a direct single-link route and a two-link relay
    /// route.
    MultipathOverlay(OverlayConfig),
}

impl TopologyConfig {
    /// Resolves a named topology from table-style link parameters. The
    /// overlay needs capacity schedules and is built with
    /// [`TopologyConfig::MultipathOverlay`] directly.
    pub fn from_links(
        name: &str,
        links: &[LinkSpec],
        flows: Option<usize>,
    ) -> Result<Self, TopologyError> {
        match name {
            "dumbbell" => {
                let bottleneck = *links
                    .first()
                    .ok_or(TopologyError::MissingParameter("dumbbell bottleneck link"))?;
                let access = links.get(1).copied().unwrap_or(DUMBBELL_ACCESS);
                Ok(TopologyConfig::Dumbbell {
                    bottleneck,
                    access,
                    flows: flows.unwrap_or(3),
                })
            }
            "rtt-unfairness" => {
                let links: [LinkSpec; 5] = links
                    .try_into()
                    .map_err(|_| TopologyError::MissingParameter("five links L0..L4"))?;
                Ok(TopologyConfig::RttUnfairness { links })
            }
            "multipath-overlay" => Err(TopologyError::MissingParameter(
                "multipath-overlay path capacities",
            )),
            other => Err(TopologyError::UnknownTopology(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathRoutes {
    pub forward: Route,
    pub reverse: Route,
}

/// Candidate paths of one flow (or subflow), in path-id order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowPaths {
    pub paths: Vec<PathRoutes>,
}

#[derive(Clone, Debug)]
pub struct Topology {
    pub links: Vec<(LinkConfig, Capacity)>,
    pub flows: Vec<FlowPaths>,
}

impl Topology {
    pub fn network<P: WireSize>(&self) -> Network<P> {
        let mut net = Network::new();
        for (cfg, cap) in &self.links {
            net.add_link(*cfg, cap.clone());
        }
        net
    }

    /// One-way propagation delay of `route`.
    pub fn route_owd(&self, route: &Route) -> Duration {
        route.links().iter().map(|&l| self.links[l].0.owd).sum()
    }

    fn push(&mut self, cfg: LinkConfig, cap: Capacity) -> LinkId {
        self.links.push((cfg, cap));
        self.links.len() - 1
    }

    fn push_fixed(&mut self, cfg: LinkConfig) -> LinkId {
        self.push(cfg, Capacity::Fixed(cfg.capacity_bps))
    }
}

fn route(links: Vec<LinkId>) -> Route {
    Route::new(links).expect("topology routes are non-empty")
}

pub fn build_topology<R: Rng + ?Sized>(
    config: &TopologyConfig,
    rng: &mut R,
) -> Result<Topology, TopologyError> {
    let mut topo = Topology {
        links: Vec::new(),
        flows: Vec::new(),
    };
    match config {
        TopologyConfig::Dumbbell {
            bottleneck,
            access,
            flows,
        } => {
            let l1 = topo.push_fixed(bottleneck.config()?);
            let l1_rev = topo.push_fixed(bottleneck.config()?);
            for _ in 0..*flows {
                let ingress = topo.push_fixed(access.config()?);
                let egress = topo.push_fixed(access.config()?);
                let ingress_rev = topo.push_fixed(access.config()?);
                let egress_rev = topo.push_fixed(access.config()?);
                topo.flows.push(FlowPaths {
                    paths: vec![PathRoutes {
                        forward: route(vec![ingress, l1, egress]),
                        reverse: route(vec![egress_rev, l1_rev, ingress_rev]),
                    }],
                });
            }
        }
        TopologyConfig::RttUnfairness { links } => {
            let mut fwd = [0; 5];
            let mut rev = [0; 5];
            for (i, spec) in links.iter().enumerate() {
                fwd[i] = topo.push_fixed(spec.config()?);
                rev[i] = topo.push_fixed(spec.config()?);
            }
            // n0 -L0- n2 -L1- n3 -L2- n4 and n1 -L3- n2, n3 -L4- n5.
            for (a, b, c) in [(0, 1, 2), (3, 1, 4)] {
                topo.flows.push(FlowPaths {
                    paths: vec![PathRoutes {
                        forward: route(vec![fwd[a], fwd[b], fwd[c]]),
                        reverse: route(vec![rev[c], rev[b], rev[a]]),
                    }],
                });
            }
        }
        TopologyConfig::MultipathOverlay(cfg) => {
            if cfg.path_capacities.is_empty() {
                return Err(TopologyError::MissingParameter("overlay path capacities"));
            }
            let (lo, hi) = cfg.delay_range;
            for caps in &cfg.path_capacities {
                let mut paths = Vec::with_capacity(2);
                for (path, cap) in caps.iter().enumerate() {
                    let owd = Duration::from_micros(
                        rng.gen_range(lo.as_micros() as u64..=hi.as_micros() as u64),
                    );
                    let nominal = cap.at(crate::simnet::SimTime::ZERO);
                    let forward = if path == 0 {
                        let cfgl = LinkConfig::new(nominal, owd, cfg.queue_bytes)?;
                        vec![topo.push(cfgl, cap.clone())]
                    } else {
                        // Access hop carries the bottleneck; the relay hop is fast.
                        let half = owd / 2;
                        let access = LinkConfig::new(nominal, half, cfg.queue_bytes)?;
                        let relay =
                            LinkConfig::new(cfg.fast_link_bps, owd - half, cfg.queue_bytes)?;
                        vec![topo.push(access, cap.clone()), topo.push_fixed(relay)]
                    };
                    let back =
                        LinkConfig::new(cfg.fast_link_bps, owd, cfg.queue_bytes.max(1 << 20))?;
                    let reverse = vec![topo.push_fixed(back)];
                    paths.push(PathRoutes {
                        forward: route(forward),
                        reverse: route(reverse),
                    });
                }
                topo.flows.push(FlowPaths { paths });
            }
        }
    }
    Ok(topo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> rand::rngs::StdRng {
        rand::rngs::StdRng::seed_from_u64(seed)
    }

    #[test]
    fn dumbbell_case_one() {
        let spec = dumbbell_case(1).unwrap();
        let cfg = spec.config().unwrap();
        assert_eq!(cfg.capacity_bps, 3_000_000);
        assert_eq!(cfg.owd, Duration::from_millis(50));
        assert_eq!(cfg.queue_bytes, 37_500);
        assert!(dumbbell_case(13).is_err());
    }

    #[test]
    fn rtt_case_three() {
        let links = rtt_unfairness_case(3).unwrap();
        assert_eq!(links[0], LinkSpec::new(10.0, 20.0, 200.0));
        assert_eq!(links[1], LinkSpec::new(4.0, 10.0, 200.0));
        assert_eq!(links[4], LinkSpec::new(10.0, 30.0, 200.0));
        let topo = build_topology(&TopologyConfig::RttUnfairness { links }, &mut rng(0)).unwrap();
        let owd = |f: usize| topo.route_owd(&topo.flows[f].paths[0].forward);
        assert_eq!(owd(0), Duration::from_millis(40));
        assert_eq!(owd(1), Duration::from_millis(50));
        // Both flows share L1.
        assert_eq!(
            topo.flows[0].paths[0].forward.links()[1],
            topo.flows[1].paths[0].forward.links()[1]
        );
    }

    #[test]
    fn named_topologies() {
        let b = dumbbell_case(2).unwrap();
        assert!(matches!(
            TopologyConfig::from_links("dumbbell", &[b], None),
            Ok(TopologyConfig::Dumbbell { flows: 3, .. })
        ));
        assert_eq!(
            TopologyConfig::from_links("ring", &[b], None).unwrap_err(),
            TopologyError::UnknownTopology("ring".into())
        );
        assert!(matches!(
            TopologyConfig::from_links("rtt-unfairness", &[b], None),
            Err(TopologyError::MissingParameter(_))
        ));
        assert!(matches!(
            TopologyConfig::from_links("dumbbell", &[], None),
            Err(TopologyError::MissingParameter(_))
        ));
    }

    #[test]
    fn overlay_delays_are_seeded() {
        let caps = vec![
            [Capacity::Fixed(2_000_000), Capacity::Fixed(3_000_000)],
            [Capacity::Fixed(1_000_000), Capacity::Fixed(4_000_000)],
        ];
        let cfg = TopologyConfig::MultipathOverlay(OverlayConfig::new(caps));
        let delays = |seed| {
            let topo = build_topology(&cfg, &mut rng(seed)).unwrap();
            topo.flows
                .iter()
                .flat_map(|f| f.paths.iter().map(|p| topo.route_owd(&p.forward)))
                .collect::<Vec<_>>()
        };
        let a = delays(7);
        assert_eq!(a, delays(7));
        assert_ne!(a, delays(8));
        for d in &a {
            assert!(*d >= Duration::from_millis(50) && *d <= Duration::from_millis(100));
        }
        let topo = build_topology(&cfg, &mut rng(7)).unwrap();
        assert_eq!(topo.flows[0].paths[0].forward.hops(), 1);
        assert_eq!(topo.flows[0].paths[1].forward.hops(), 2);
    }
}
