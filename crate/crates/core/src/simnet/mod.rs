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

//! Deterministic discrete-event network model.
//!
//! Links serialize packets at their (possibly trace-driven) capacity, hold
//! a droptail FIFO measured in bytes, and add a fixed propagation delay.
//! Everything runs on a single integer-microsecond clock.

mod event;
mod link;
mod network;
mod time;
pub mod topology;
mod trace;

pub use event::{EventHandle, EventQueue, ScheduleError};
pub use link::{Capacity, Enqueue, Link, LinkConfig, LinkConfigError, LinkStats, WireSize};
pub use network::{InTransit, LinkId, NetEvent, NetOutput, Network, Route, RouteError};
pub use time::{micros, SimTime};
pub use topology::{
    build_topology, dumbbell_case, rtt_unfairness_case, FlowPaths, LinkSpec, OverlayConfig,
    PathRoutes, Topology, TopologyConfig, TopologyError, DUMBBELL_ACCESS,
};
pub use trace::{TraceError, TraceSchedule};
