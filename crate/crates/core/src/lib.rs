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

//! Simulation and transport stack for multipath real-time video over relay
//! overlays.
//!
//! The crate is organized bottom-up:
//!
//! - [`simnet`]: discrete-event engine and the link/queue/topology model.
//! - [`transport`]: wire codec, packet numbering, ack/loss bookkeeping and
//!   the pacer.
//! - [`congestion`]: BBR and the RTC variant with randomized gain cycles.
//! - [`scheduler`]: expected-latency segment distribution across subflows
//!   and the sender's retransmission buffer.
//! - [`bandit`]: UCB path selection across candidate overlay paths.
//! - [`videomodel`]: synthetic encoder, frame dropping, reassembly and the
//!   rate-distortion quality proxy.

pub mod bandit;
pub mod congestion;
pub mod scheduler;
pub mod simnet;
pub mod transport;
pub mod videomodel;

pub use simnet::SimTime;
