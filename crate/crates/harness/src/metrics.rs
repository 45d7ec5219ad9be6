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

//! Throughput, loss, delay and fairness metrics over a run record.

use crate::sim::{FlowCounters, RunRecord, VideoSummary};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("run record has no flows")]
    NoFlows,
    #[error("flow {0} never started before the run ended")]
    NotStarted(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowMetrics {
    pub flow: usize,
    pub start_s: f64,
    /// Received bytes over the time the flow was running, in bits/s.
    pub throughput_bps: f64,
    pub loss_rate: f64,
    pub mean_owd_ms: f64,
    pub sent_packets: u64,
    pub dropped_packets: u64,
    pub recv_bytes: u64,
    /// Received rate in each whole second of the run.
    pub rates_bps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub duration_s: f64,
    pub flows: Vec<FlowMetrics>,
    /// Over the flows' whole-run throughputs.
    pub jain: Option<f64>,
    /// Over the second half of the run.
    pub jain_converged: Option<f64>,
    /// Throughput of the second flow over the first.
    pub ratio: Option<f64>,
    pub loss_rate: f64,
    pub mean_owd_ms: f64,
    pub video: Option<VideoSummary>,
}

/// Jain's index (Σx)² / (n·Σx²); `None` for no flows or all-zero rates.
pub fn jain(xs: &[f64]) -> Option<f64> {
    let sum: f64 = xs.iter().sum();
    let sq: f64 = xs.iter().map(|x| x * x).sum();
    (!xs.is_empty() && sq > 0.0).then(|| sum * sum / (xs.len() as f64 * sq))
}

/// Mean received rate of `flow` over whole seconds `[from_s, to_s)`.
pub fn window_rate(flow: &FlowCounters, from_s: usize, to_s: usize) -> f64 {
    if to_s <= from_s {
        return 0.0;
    }
    let bytes: u64 = (from_s..to_s)
        .map(|s| flow.bins.get(s).copied().unwrap_or(0))
        .sum();
    bytes as f64 * 8.0 / (to_s - from_s) as f64
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(record: &RunRecord) -> Result<Metrics, MetricsError> {
    if record.flows.is_empty() {
        return Err(MetricsError::NoFlows);
    }
    let end = record.duration;
    let seconds = (end.as_micros() / 1_000_000) as usize;
    let mut flows = Vec::with_capacity(record.flows.len());
    for (i, f) in record.flows.iter().enumerate() {
        if f.start >= end {
            return Err(MetricsError::NotStarted(i));
        }
        let active = end.saturating_since(f.start).as_secs_f64();
        flows.push(FlowMetrics {
            flow: i,
            start_s: f.start.as_secs_f64(),
            throughput_bps: f.recv_bytes as f64 * 8.0 / active,
            loss_rate: ratio(f.dropped_packets, f.sent_packets),
            mean_owd_ms: if f.recv_packets == 0 {
                0.0
            } else {
                f.owd_sum_us as f64 / 1e3 / f.recv_packets as f64
            },
            sent_packets: f.sent_packets,
            dropped_packets: f.dropped_packets,
            recv_bytes: f.recv_bytes,
            rates_bps: (0..seconds).map(|s| window_rate(f, s, s + 1)).collect(),
        });
    }
    let multi = flows.len() > 1;
    let rates: Vec<f64> = flows.iter().map(|f| f.throughput_bps).collect();
    let half: Vec<f64> = record
        .flows
        .iter()
        .map(|f| window_rate(f, seconds / 2, seconds))
        .collect();
    let sent: u64 = record.flows.iter().map(|f| f.sent_packets).sum();
    let dropped: u64 = record.flows.iter().map(|f| f.dropped_packets).sum();
    let recv: u64 = record.flows.iter().map(|f| f.recv_packets).sum();
    let owd: u128 = record.flows.iter().map(|f| f.owd_sum_us).sum();
    Ok(Metrics {
        duration_s: end.as_secs_f64(),
        jain: if multi { jain(&rates) } else { None },
        jain_converged: if multi { jain(&half) } else { None },
        ratio: (flows.len() == 2 && rates[0] > 0.0).then(|| rates[1] / rates[0]),
        loss_rate: ratio(dropped, sent),
        mean_owd_ms: if recv == 0 {
            0.0
        } else {
            owd as f64 / 1e3 / recv as f64
        },
        flows,
        video: record.video.clone(),
    })
}
