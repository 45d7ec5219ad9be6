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

//! BBR-family congestion control: the stock eight-phase baseline and the
//! RTC variant with 1.1/0.85 gains and randomized cycle length.

mod bbr;
mod filters;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use bbr::{
    Bbr, CYCLE_RAND, DRAIN_GAIN, HIGH_GAIN, K_GAIN_CYCLE_LEN, PROBE_BW_CWND_GAIN,
    RTC_PROBE_DOWN_GAIN, RTC_PROBE_UP_GAIN, STOCK_GAINS,
};
pub use filters::{MinRttFilter, WindowedMaxFilter};

use crate::simnet::SimTime;
use crate::transport::MSS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    RtcBbr,
    Bbr,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::RtcBbr => "rtc-bbr",
            Variant::Bbr => "bbr",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown congestion control variant `{0}` (expected rtc-bbr or bbr)")]
pub struct UnknownVariant(String);

impl FromStr for Variant {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rtc-bbr" | "rtcbbr" => Ok(Variant::RtcBbr),
            "bbr" => Ok(Variant::Bbr),
            other => Err(UnknownVariant(other.to_owned())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CcMode {
    StartUp,
    Drain,
    ProbeBw,
    ProbeRtt,
}

impl fmt::Display for CcMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CcMode::StartUp => "startup",
            CcMode::Drain => "drain",
            CcMode::ProbeBw => "probe_bw",
            CcMode::ProbeRtt => "probe_rtt",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CcConfig {
    pub variant: Variant,
    pub mss: u64,
    pub initial_cwnd_packets: u64,
    /// RTT assumed until the first sample.
    pub initial_rtt: Duration,
    pub min_rtt_window: Duration,
    pub bw_window_rounds: u64,
    pub probe_rtt_duration: Duration,
    pub probe_rtt_cwnd_packets: u64,
}

impl CcConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            mss: MSS as u64,
            initial_cwnd_packets: 10,
            initial_rtt: Duration::from_millis(100),
            min_rtt_window: Duration::from_secs(10),
            bw_window_rounds: 10,
            probe_rtt_duration: Duration::from_millis(200),
            probe_rtt_cwnd_packets: 4,
        }
    }

    pub fn initial_cwnd(&self) -> u64 {
        self.initial_cwnd_packets * self.mss
    }

    pub fn probe_rtt_cwnd(&self) -> u64 {
        self.probe_rtt_cwnd_packets * self.mss
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CcOutputs {
    pub mode: CcMode,
    pub pacing_gain: f64,
    pub pacing_rate_bps: f64,
    /// Bytes.
    pub cwnd: u64,
    pub bw_es_bps: f64,
    pub rtt_min: Duration,
}

/// One row of the periodic controller trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CcTraceRow {
    pub time: SimTime,
    pub mode: CcMode,
    pub pacing_gain: f64,
    pub bw_es_bps: f64,
    pub rtt_min: Duration,
    pub inflight: u64,
    pub cwnd: u64,
}
