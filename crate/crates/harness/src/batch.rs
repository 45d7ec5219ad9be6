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

//! Seed batches run in parallel; results come back in seed order.

use rayon::prelude::*;
use serde::Serialize;

use crate::experiment::{run, ExperimentError, ExperimentSpec, RunOutput, Scheme};

pub const DEFAULT_BATCH: u64 = 30;

/// Runs `base` once per seed in `seeds`, each on an independent engine.
pub fn run_seeds(base: &ExperimentSpec, seeds: &[u64]) -> Vec<Result<RunOutput, ExperimentError>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut spec = base.clone();
            spec.seed = seed;
            run(&spec)
        })
        .collect()
}

/// One line of a batch summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scheme: String,
    pub algorithm: String,
    pub seed: u64,
    pub throughput_bps: f64,
    pub loss_rate: f64,
    pub mean_owd_ms: f64,
    pub mean_distortion: Option<f64>,
    pub mean_psnr_proxy: Option<f64>,
    pub jain: Option<f64>,
    pub ratio: Option<f64>,
}

pub fn summary_row(out: &RunOutput) -> SummaryRow {
    let m = &out.metrics;
    SummaryRow {
        scheme: out.spec.scheme.to_string(),
        algorithm: out.spec.algorithm.to_string(),
        seed: out.spec.seed,
        throughput_bps: m.flows.iter().map(|f| f.throughput_bps).sum(),
        loss_rate: m.loss_rate,
        mean_owd_ms: m.mean_owd_ms,
        mean_distortion: m.video.as_ref().map(|v| v.mean_distortion),
        mean_psnr_proxy: m.video.as_ref().map(|v| v.mean_psnr_proxy),
        jain: m.jain,
        ratio: m.ratio,
    }
}

/// Every scheme over the same seeds, so each seed sees the same traces.
pub fn run_schemes(
    base: &ExperimentSpec,
    schemes: &[Scheme],
    seeds: &[u64],
) -> Vec<Result<RunOutput, ExperimentError>> {
    let jobs: Vec<(Scheme, u64)> = schemes
        .iter()
        .flat_map(|&s| seeds.iter().map(move |&x| (s, x)))
        .collect();
    jobs.par_iter()
        .map(|&(scheme, seed)| {
            let mut spec = base.clone();
            spec.scheme = scheme;
            spec.seed = seed;
            run(&spec)
        })
        .collect()
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}
