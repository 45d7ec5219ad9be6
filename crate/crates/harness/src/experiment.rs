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

//! Experiment specifications and the three experiment families.

use std::path::PathBuf;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rtcmp::congestion::Variant;
use rtcmp::simnet::{
    build_topology, dumbbell_case, rtt_unfairness_case, Capacity, LinkSpec, OverlayConfig,
    TopologyConfig, TopologyError, TraceError, TraceSchedule, DUMBBELL_ACCESS,
};
use rtcmp::videomodel::{EncoderConfig, QualityModelParams};
use rtcmp::SimTime;
use serde::{Deserialize, Serialize};

use crate::metrics::{compute_metrics, Metrics, MetricsError};
use crate::sim::{Engine, RunRecord, Selection, VideoSetup};
use crate::traces;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Dumbbell,
    #[serde(alias = "rtt-unfairness")]
    #[value(alias = "rtt-unfairness")]
    Rtt,
    Multipath,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Ucb,
    Default,
    Oracle,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Ucb => "ucb",
            Scheme::Default => "default",
            Scheme::Oracle => "oracle",
        })
    }
}

pub const APP_CAP_BPS: f64 = 4_000_000.0;
pub const DUMBBELL_STARTS_S: [f64; 3] = [0.0, 40.0, 80.0];
pub const MULTIPATH_SUBFLOWS: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid experiment: {0}")]
    Invalid(String),
}

/// One simulation run. Every optional field falls back to the family's
/// standard set-up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub family: Family,
    #[serde(default = "default_case")]
    pub case: u32,
    #[serde(default = "default_algorithm")]
    pub algorithm: Variant,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub duration_s: Option<f64>,
    /// Dumbbell flow count.
    #[serde(default)]
    pub flows: Option<usize>,
    /// Dumbbell flow start times.
    #[serde(default)]
    pub start_s: Option<Vec<f64>>,
    #[serde(default = "default_cap")]
    pub app_cap_bps: f64,
    /// Replaces the case table's links: the bottleneck (and optionally the
    /// access link) for the dumbbell, L0..L4 for the RTT family.
    #[serde(default)]
    pub links: Option<Vec<LinkSpec>>,
    /// Fixed per-subflow capacities (direct, relay) in Mbps instead of
    /// drawn traces.
    #[serde(default)]
    pub paths_mbps: Option<Vec<[f64; 2]>>,
    /// Range of per-route one-way delays.
    #[serde(default)]
    pub delay_ms: Option<[f64; 2]>,
    /// Directory of "ms,kbps" traces replacing the synthetic dataset.
    #[serde(default)]
    pub trace_dir: Option<PathBuf>,
    #[serde(default)]
    pub cc_trace: bool,
}

fn default_case() -> u32 {
    1
}

fn default_algorithm() -> Variant {
    Variant::RtcBbr
}

fn default_cap() -> f64 {
    APP_CAP_BPS
}

impl ExperimentSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            case: default_case(),
            algorithm: default_algorithm(),
            scheme: Scheme::default(),
            seed: 0,
            duration_s: None,
            flows: None,
            start_s: None,
            app_cap_bps: APP_CAP_BPS,
            links: None,
            paths_mbps: None,
            delay_ms: None,
            trace_dir: None,
            cc_trace: false,
        }
    }

    pub fn duration(&self) -> f64 {
        self.duration_s.unwrap_or(match self.family {
            Family::Dumbbell | Family::Multipath => 400.0,
            Family::Rtt => 300.0,
        })
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        let d = self.duration();
        if !(d.is_finite() && d > 0.0) {
            return Err(ExperimentError::Invalid(format!("duration {d} s")));
        }
        if self.app_cap_bps.is_nan() || self.app_cap_bps <= 0.0 {
            return Err(ExperimentError::Invalid(format!(
                "app rate cap {} bps",
                self.app_cap_bps
            )));
        }
        if let Some([lo, hi]) = self.delay_ms {
            if !(lo >= 0.0 && hi >= lo) {
                return Err(ExperimentError::Invalid(format!(
                    "delay range [{lo}, {hi}] ms"
                )));
            }
        }
        Ok(())
    }
}

/// A finished run with its metrics.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub spec: ExperimentSpec,
    pub record: RunRecord,
    pub metrics: Metrics,
}

pub fn run(spec: &ExperimentSpec) -> Result<RunOutput, ExperimentError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let duration = Duration::from_secs_f64(spec.duration());
    let record = match spec.family {
        Family::Dumbbell => {
            let bottleneck = match spec.links.as_deref() {
                Some([b, ..]) => *b,
                Some([]) => return Err(ExperimentError::Invalid("empty link list".into())),
                None => dumbbell_case(spec.case)?,
            };
            let access = spec
                .links
                .as_ref()
                .and_then(|l| l.get(1).copied())
                .unwrap_or(DUMBBELL_ACCESS);
            let flows = spec.flows.unwrap_or(DUMBBELL_STARTS_S.len());
            let starts: Vec<f64> = match &spec.start_s {
                Some(s) if s.len() >= flows => s.clone(),
                Some(s) => {
                    return Err(ExperimentError::Invalid(format!(
                        "{} start times for {flows} flows",
                        s.len()
                    )));
                }
                None => (0..flows)
                    .map(|i| DUMBBELL_STARTS_S.get(i).copied().unwrap_or(40.0 * i as f64))
                    .collect(),
            };
            let topo = build_topology(
                &TopologyConfig::Dumbbell {
                    bottleneck,
                    access,
                    flows,
                },
                &mut rng,
            )?;
            let mut engine = Engine::new(topo, rng, duration);
            for (i, &s) in starts.iter().take(flows).enumerate() {
                engine.add_bulk_flow(
                    i,
                    spec.algorithm,
                    SimTime::ZERO + Duration::from_secs_f64(s),
                    spec.app_cap_bps,
                );
            }
            finish(engine, spec)
        }
        Family::Rtt => {
            let links: [LinkSpec; 5] = match spec.links.as_deref() {
                Some(l) => l.try_into().map_err(|_| {
                    ExperimentError::Invalid(format!("{} links given, five needed", l.len()))
                })?,
                None => rtt_unfairness_case(spec.case)?,
            };
            let topo = build_topology(&TopologyConfig::RttUnfairness { links }, &mut rng)?;
            let mut engine = Engine::new(topo, rng, duration);
            for i in 0..2 {
                engine.add_bulk_flow(i, spec.algorithm, SimTime::ZERO, spec.app_cap_bps);
            }
            finish(engine, spec)
        }
        Family::Multipath => {
            let caps: Vec<[Capacity; 2]> = match &spec.paths_mbps {
                Some(p) if p.is_empty() => {
                    return Err(ExperimentError::Invalid("no subflow paths".into()))
                }
                Some(p) => p
                    .iter()
                    .map(|&[a, b]| [Capacity::Fixed(mbps(a)), Capacity::Fixed(mbps(b))])
                    .collect(),
                None => {
                    let dataset = match &spec.trace_dir {
                        Some(dir) => traces::load_dir(dir)?,
                        None => traces::synthetic_dataset(&traces::SyntheticParams::default()),
                    };
                    let needed = 2 * MULTIPATH_SUBFLOWS;
                    if dataset.len() < needed {
                        return Err(ExperimentError::Invalid(format!(
                            "{} traces available, {needed} needed",
                            dataset.len()
                        )));
                    }
                    let picked: Vec<TraceSchedule> = traces::draw(&mut rng, &dataset, needed);
                    picked
                        .chunks(2)
                        .map(|c| [Capacity::Trace(c[0].clone()), Capacity::Trace(c[1].clone())])
                        .collect()
                }
            };
            let subflows = caps.len();
            let mut overlay = OverlayConfig::new(caps);
            if let Some([lo, hi]) = spec.delay_ms {
                overlay.delay_range = (
                    Duration::from_secs_f64(lo / 1e3),
                    Duration::from_secs_f64(hi / 1e3),
                );
            }
            let topo = build_topology(&TopologyConfig::MultipathOverlay(overlay), &mut rng)?;
            let mut engine = Engine::new(topo, rng, duration);
            let selection = match spec.scheme {
                Scheme::Ucb => Selection::Ucb,
                Scheme::Default => Selection::Pinned,
                Scheme::Oracle => Selection::Oracle,
            };
            engine.add_video(
                VideoSetup {
                    topology_flows: (0..subflows).collect(),
                    selection,
                    encoder: EncoderConfig::default(),
                    quality: QualityModelParams::default(),
                },
                spec.algorithm,
            );
            finish(engine, spec)
        }
    };
    let metrics = compute_metrics(&record)?;
    Ok(RunOutput {
        spec: spec.clone(),
        record,
        metrics,
    })
}

fn finish(engine: Engine, spec: &ExperimentSpec) -> RunRecord {
    if spec.cc_trace {
        engine.with_cc_trace().run()
    } else {
        engine.run()
    }
}

fn mbps(x: f64) -> u64 {
    (x * 1e6).round() as u64
}
