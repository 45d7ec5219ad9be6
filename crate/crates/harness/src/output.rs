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

//! CSV emission for runs and batches.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::experiment::RunOutput;

pub const METRICS_CSV: &str = "metrics.csv";
pub const RATES_CSV: &str = "rates.csv";
pub const SELECTIONS_CSV: &str = "selections.csv";
pub const FRAMES_CSV: &str = "frames.csv";
pub const CC_CSV: &str = "cc.csv";
pub const SPEC_JSON: &str = "spec.json";

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Serialize)]
struct MetricRow<'a> {
    scope: &'a str,
    metric: &'a str,
    value: f64,
}

#[derive(Serialize)]
struct RateRow {
    flow: usize,
    second: usize,
    rate_bps: f64,
}

#[derive(Serialize)]
struct SelectionCsv {
    slot: u64,
    time_s: f64,
    subflow: usize,
    path: usize,
    exploration: bool,
    score: Option<f64>,
    capacity_bps: f64,
    best_capacity_bps: f64,
}

#[derive(Serialize)]
struct FrameCsv {
    frame_index: u32,
    capture_ms: f64,
    delivered_ms: Option<f64>,
    size: usize,
    key: bool,
    dropped_at_sender: bool,
    abandoned: bool,
    encode_rate_bps: Option<f64>,
}

#[derive(Serialize)]
struct CcCsv {
    time_s: f64,
    conn: usize,
    flow: usize,
    subflow: usize,
    path: usize,
    active: bool,
    mode: String,
    pacing_gain: f64,
    bw_es_bps: f64,
    rtt_min_ms: f64,
    inflight: u64,
    cwnd: u64,
}

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>, OutputError> {
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|source| OutputError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::Writer::from_writer(file))
}

fn write_all<T: Serialize>(
    dir: &Path,
    name: &str,
    header: &[&str],
    rows: impl IntoIterator<Item = T>,
) -> Result<(), OutputError> {
    let mut w = writer(dir, name)?;
    let mut empty = true;
    for r in rows {
        w.serialize(r)?;
        empty = false;
    }
    if empty {
        w.write_record(header)?;
    }
    w.flush().map_err(|source| OutputError::Io {
        path: dir.join(name).display().to_string(),
        source,
    })?;
    Ok(())
}

/// Metric rows as (scope, metric, value).
pub fn metric_rows(out: &RunOutput) -> Vec<(String, &'static str, f64)> {
    let m = &out.metrics;
    let mut rows = vec![
        ("run".to_string(), "duration_s", m.duration_s),
        ("run".to_string(), "loss_rate", m.loss_rate),
        ("run".to_string(), "mean_owd_ms", m.mean_owd_ms),
    ];
    let total: f64 = m.flows.iter().map(|f| f.throughput_bps).sum();
    rows.push(("run".to_string(), "throughput_bps", total));
    for (name, v) in [
        ("jain", m.jain),
        ("jain_converged", m.jain_converged),
        ("ratio", m.ratio),
    ] {
        if let Some(v) = v {
            rows.push(("run".to_string(), name, v));
        }
    }
    for f in &m.flows {
        let scope = format!("flow{}", f.flow);
        rows.push((scope.clone(), "start_s", f.start_s));
        rows.push((scope.clone(), "throughput_bps", f.throughput_bps));
        rows.push((scope.clone(), "loss_rate", f.loss_rate));
        rows.push((scope.clone(), "mean_owd_ms", f.mean_owd_ms));
        rows.push((scope.clone(), "sent_packets", f.sent_packets as f64));
        rows.push((scope.clone(), "dropped_packets", f.dropped_packets as f64));
        rows.push((scope, "recv_bytes", f.recv_bytes as f64));
    }
    if let Some(v) = &m.video {
        let s = "video".to_string();
        for (name, x) in [
            ("frames_captured", v.captured as f64),
            ("frames_dropped_at_sender", v.dropped_at_sender as f64),
            ("frames_delivered", v.delivered as f64),
            ("frames_abandoned", v.abandoned as f64),
            ("mean_frame_delay_ms", v.mean_frame_delay_ms),
            ("mean_distortion", v.mean_distortion),
            ("mean_psnr_proxy", v.mean_psnr_proxy),
            ("retransmissions", v.retransmissions as f64),
            ("key_retransmissions", v.key_retransmissions as f64),
            ("given_up", v.given_up as f64),
            ("age_evicted", v.age_evicted as f64),
            ("key_age_evicted", v.key_age_evicted as f64),
            (
                "max_nonkey_retransmit_age_ms",
                v.max_nonkey_retransmit_age.as_secs_f64() * 1e3,
            ),
            ("observed_key_evictions", v.observed_key_evictions as f64),
            (
                "observed_max_nonkey_resend_age_ms",
                v.observed_max_nonkey_resend_age.as_secs_f64() * 1e3,
            ),
            ("path_switches", v.path_switches as f64),
        ] {
            rows.push((s.clone(), name, x));
        }
    }
    rows
}

/// Writes metrics.csv, rates.csv, selections.csv, frames.csv, the spec, and
/// cc.csv when the run traced its controllers.
pub fn write_run(out: &RunOutput, dir: &Path) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let metrics = metric_rows(out);
    write_all(
        dir,
        METRICS_CSV,
        &["scope", "metric", "value"],
        metrics.iter().map(|(scope, metric, value)| MetricRow {
            scope,
            metric,
            value: *value,
        }),
    )?;
    write_all(
        dir,
        RATES_CSV,
        &["flow", "second", "rate_bps"],
        out.metrics.flows.iter().flat_map(|f| {
            f.rates_bps
                .iter()
                .enumerate()
                .map(move |(second, &rate_bps)| RateRow {
                    flow: f.flow,
                    second,
                    rate_bps,
                })
        }),
    )?;
    write_all(
        dir,
        SELECTIONS_CSV,
        &[
            "slot",
            "time_s",
            "subflow",
            "path",
            "exploration",
            "score",
            "capacity_bps",
            "best_capacity_bps",
        ],
        out.record.selections.iter().map(|s| SelectionCsv {
            slot: s.slot,
            time_s: s.time.as_secs_f64(),
            subflow: s.subflow,
            path: s.path,
            exploration: s.exploration,
            score: s.score,
            capacity_bps: s.capacity_bps,
            best_capacity_bps: s.best_capacity_bps,
        }),
    )?;
    write_all(
        dir,
        FRAMES_CSV,
        &[
            "frame_index",
            "capture_ms",
            "delivered_ms",
            "size",
            "key",
            "dropped_at_sender",
            "abandoned",
            "encode_rate_bps",
        ],
        out.record.frames.iter().map(|f| FrameCsv {
            frame_index: f.frame_index,
            capture_ms: f.capture_ts.as_millis_f64(),
            delivered_ms: f.delivered_ts.map(|t| t.as_millis_f64()),
            size: f.size,
            key: f.key_frame,
            dropped_at_sender: f.dropped_at_sender,
            abandoned: f.abandoned,
            encode_rate_bps: f.encode_rate_bps,
        }),
    )?;
    if out.spec.cc_trace {
        write_all(
            dir,
            CC_CSV,
            &[],
            out.record.cc_rows.iter().map(|r| CcCsv {
                time_s: r.time.as_secs_f64(),
                conn: r.conn,
                flow: r.flow,
                subflow: r.subflow,
                path: r.path,
                active: r.active,
                mode: r.mode.to_string(),
                pacing_gain: r.pacing_gain,
                bw_es_bps: r.bw_es_bps,
                rtt_min_ms: r.rtt_min.as_secs_f64() * 1e3,
                inflight: r.inflight,
                cwnd: r.cwnd,
            }),
        )?;
    }
    let spec = serde_json::to_string_pretty(&out.spec)?;
    let path = dir.join(SPEC_JSON);
    fs::write(&path, spec).map_err(|source| OutputError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}
