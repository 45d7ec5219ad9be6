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

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rtcmp::congestion::Variant;
use rtcmp_harness::batch::{mean, run_schemes, summary_row, DEFAULT_BATCH};
use rtcmp_harness::output::write_run;
use rtcmp_harness::{run, ExperimentSpec, Family, Scheme};

#[derive(Parser)]
#[command(
    name = "rtcmp",
    version,
    about = "Multipath real-time video simulation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV files.
    Run {
        #[command(flatten)]
        common: Common,
        /// Overrides the config's scheme (ucb when neither is given).
        #[arg(long, value_enum)]
        scheme: Option<Scheme>,
        /// Overrides the config's seed (0 when neither is given).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a seed batch for one or more schemes in parallel.
    Batch {
        #[command(flatten)]
        common: Common,
        /// Repeatable; defaults to all three schemes for multipath and ucb otherwise.
        #[arg(long, value_enum)]
        scheme: Vec<Scheme>,
        #[arg(long, default_value_t = DEFAULT_BATCH)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
    },
}

#[derive(Args)]
struct Common {
    /// JSON experiment spec; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long)]
    case: Option<u32>,
    #[arg(long)]
    algo: Option<Variant>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Directory of "ms,kbps" traces used instead of the synthetic dataset.
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Also write per-connection congestion-control traces.
    #[arg(long)]
    cc_trace: bool,
    #[arg(long)]
    out: PathBuf,
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))?
            }
            None => match self.family {
                Some(f) => ExperimentSpec::new(f),
                None => bail!("either --config or --family is required"),
            },
        };
        if let Some(f) = self.family {
            spec.family = f;
        }
        if let Some(c) = self.case {
            spec.case = c;
        }
        if let Some(a) = self.algo {
            spec.algorithm = a;
        }
        if let Some(d) = self.duration {
            spec.duration_s = Some(d);
        }
        if let Some(t) = &self.traces {
            spec.trace_dir = Some(t.clone());
        }
        spec.cc_trace |= self.cc_trace;
        Ok(spec)
    }
}

fn run_one(spec: &ExperimentSpec, out: &Path) -> Result<()> {
    let result = run(spec)?;
    write_run(&result, out)?;
    let total: f64 = result.metrics.flows.iter().map(|f| f.throughput_bps).sum();
    println!(
        "{} case {} {} seed {}: throughput {:.0} bps, loss {:.4}, owd {:.1} ms -> {}",
        family_name(spec.family),
        spec.case,
        spec.algorithm,
        spec.seed,
        total,
        result.metrics.loss_rate,
        result.metrics.mean_owd_ms,
        out.display()
    );
    Ok(())
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::Dumbbell => "dumbbell",
        Family::Rtt => "rtt",
        Family::Multipath => "multipath",
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            common,
            scheme,
            seed,
        } => {
            let mut spec = common.spec()?;
            if let Some(s) = scheme {
                spec.scheme = s;
            }
            if let Some(s) = seed {
                spec.seed = s;
            }
            run_one(&spec, &common.out)
        }
        Command::Batch {
            common,
            scheme,
            seeds,
            first_seed,
        } => {
            let base = common.spec()?;
            let schemes = match (scheme.is_empty(), base.family) {
                (false, _) => scheme,
                (true, Family::Multipath) => vec![Scheme::Ucb, Scheme::Default, Scheme::Oracle],
                (true, _) => vec![base.scheme],
            };
            let seed_list: Vec<u64> = (first_seed..first_seed + seeds).collect();
            let results = run_schemes(&base, &schemes, &seed_list);
            let mut rows = Vec::new();
            for r in results {
                let r = r?;
                let dir = common
                    .out
                    .join(r.spec.scheme.to_string())
                    .join(format!("seed-{}", r.spec.seed));
                write_run(&r, &dir)?;
                rows.push(summary_row(&r));
            }
            std::fs::create_dir_all(&common.out)?;
            let mut w = csv::Writer::from_path(common.out.join("summary.csv"))?;
            for row in &rows {
                w.serialize(row)?;
            }
            w.flush()?;
            for s in &schemes {
                let name = s.to_string();
                let tp = mean(
                    rows.iter()
                        .filter(|r| r.scheme == name)
                        .map(|r| r.throughput_bps),
                );
                let dist = mean(
                    rows.iter()
                        .filter(|r| r.scheme == name)
                        .filter_map(|r| r.mean_distortion),
                );
                println!("{name}: mean throughput {tp:.0} bps, mean distortion {dist:.2} over {seeds} seeds");
            }
            Ok(())
        }
    }
}
