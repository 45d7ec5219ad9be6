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

//! Synthetic bandwidth traces standing in for a recorded throughput
//! dataset, plus loading of recorded traces in "ms,kbps" form.

use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtcmp::simnet::{TraceError, TraceSchedule};
use rtcmp::SimTime;

pub const DATASET_SEED: u64 = 0x7274_636d_7000_0001;
pub const DATASET_SIZE: usize = 100;
pub const TRACE_LEN_S: u64 = 300;
pub const MEAN_RANGE_BPS: (f64, f64) = (400_000.0, 6_000_000.0);
const MIN_STEP_BPS: f64 = 100_000.0;

/// Parameters of the synthetic dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticParams {
    pub seed: u64,
    pub count: usize,
    pub len_s: u64,
    pub mean_range_bps: (f64, f64),
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            seed: DATASET_SEED,
            count: DATASET_SIZE,
            len_s: TRACE_LEN_S,
            mean_range_bps: MEAN_RANGE_BPS,
        }
    }
}

/// Piecewise-constant trace whose long-run mean is `mean_bps`. Steps last
/// 1 to 5 s and sit between 0.4 and 1.6 times the mean before rescaling.
pub fn synthetic_trace<R: Rng + ?Sized>(rng: &mut R, mean_bps: f64, len_s: u64) -> TraceSchedule {
    let mut starts = Vec::new();
    let mut t_ms = 0u64;
    while t_ms < len_s * 1000 {
        starts.push(t_ms);
        t_ms += rng.gen_range(1..=5) * 1000;
    }
    // a schedule wraps after its last step, which lasts as long as the gap before it
    let durations: Vec<u64> = (0..starts.len())
        .map(|i| match (starts.get(i + 1), i.checked_sub(1)) {
            (Some(&next), _) => next - starts[i],
            (None, Some(prev)) => starts[i] - starts[prev],
            (None, None) => 1000,
        })
        .collect();
    let levels: Vec<f64> = starts
        .iter()
        .map(|_| mean_bps * rng.gen_range(0.4..1.6))
        .collect();
    let total_ms: u64 = durations.iter().sum();
    let weighted: f64 = levels
        .iter()
        .zip(&durations)
        .map(|(b, &d)| b * d as f64)
        .sum();
    let scale = mean_bps * total_ms as f64 / weighted;
    let entries: Vec<(SimTime, u64)> = starts
        .iter()
        .zip(&levels)
        .map(|(&t, b)| {
            (
                SimTime::from_millis(t),
                (b * scale).max(MIN_STEP_BPS).round() as u64,
            )
        })
        .collect();
    TraceSchedule::new(&entries).expect("synthetic steps are ordered and positive")
}

/// The full synthetic dataset; identical for every caller.
pub fn synthetic_dataset(params: &SyntheticParams) -> Vec<TraceSchedule> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (lo, hi) = params.mean_range_bps;
    (0..params.count)
        .map(|_| {
            let mean = (rng.gen_range(lo.ln()..hi.ln())).exp();
            synthetic_trace(&mut rng, mean, params.len_s)
        })
        .collect()
}

/// Loads every `*.txt`/`*.csv` trace in `dir`, sorted by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<TraceSchedule>, TraceError> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|source| TraceError::Io {
            path: dir.display().to_string(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt" || x == "csv"))
        .collect();
    files.sort();
    files.iter().map(TraceSchedule::load).collect()
}

/// Picks `k` distinct traces.
pub fn draw<R: Rng + ?Sized>(
    rng: &mut R,
    dataset: &[TraceSchedule],
    k: usize,
) -> Vec<TraceSchedule> {
    sample(rng, dataset.len(), k)
        .into_iter()
        .map(|i| dataset[i].clone())
        .collect()
}
