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

//! Piecewise-constant link capacity schedules.
//!
//! A trace is a list of `(timestamp, capacity)` steps. The capacity between
//! two entries is the earlier entry's value. A trace with more than one
//! entry repeats once exhausted: its period is the span of the entries plus
//! the final step's length (taken to equal the step before it).
//!
//! The on-disk format is one `milliseconds,kilobits-per-second` pair per
//! line, no header.

use std::path::Path;
use std::time::Duration;

use super::time::micros;
use super::SimTime;

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("trace has no entries")]
    Empty,
    #[error("reading trace {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceSchedule {
    /// (offset from trace start in microseconds, capacity in bits/s).
    steps: Vec<(u64, u64)>,
    /// Repeat period in microseconds; `None` for single-entry traces.
    period: Option<u64>,
    /// Shift applied to simulation time before lookup.
    offset: u64,
}

impl TraceSchedule {
    /// Builds a schedule from `(timestamp, bits/s)` entries.
    pub fn new(entries: &[(SimTime, u64)]) -> Result<Self, TraceError> {
        let first = entries.first().ok_or(TraceError::Empty)?.0;
        let mut steps = Vec::with_capacity(entries.len());
        for (i, &(ts, bps)) in entries.iter().enumerate() {
            if bps == 0 {
                return Err(TraceError::Parse {
                    line: i + 1,
                    reason: "capacity must be positive".into(),
                });
            }
            let rel = ts.as_micros() - first.as_micros().min(ts.as_micros());
            if let Some(&(prev, _)) = steps.last() {
                if rel <= prev {
                    return Err(TraceError::Parse {
                        line: i + 1,
                        reason: "timestamps must be strictly increasing".into(),
                    });
                }
            }
            steps.push((rel, bps));
        }
        let period = match steps.len() {
            1 => None,
            n => {
                let last_gap = steps[n - 1].0 - steps[n - 2].0;
                Some(steps[n - 1].0 + last_gap)
            }
        };
        Ok(TraceSchedule {
            steps,
            period,
            offset: 0,
        })
    }

    pub fn constant(bps: u64) -> Result<Self, TraceError> {
        Self::new(&[(SimTime::ZERO, bps)])
    }

    /// Parses the `ms,kbps` text format.
    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: &str| TraceError::Parse {
                line: i + 1,
                reason: reason.to_string(),
            };
            let (ms, kbps) = line
                .split_once(',')
                .ok_or_else(|| err("expected `milliseconds,kbps`"))?;
            let ms: u64 = ms
                .trim()
                .parse()
                .map_err(|_| err("timestamp is not a non-negative integer"))?;
            let kbps: f64 = kbps
                .trim()
                .parse()
                .map_err(|_| err("capacity is not a number"))?;
            if !(kbps.is_finite() && kbps > 0.0) {
                return Err(err("capacity must be positive"));
            }
            let bps = (kbps * 1000.0).round() as u64;
            if let Some(&(prev, _)) = entries.last() {
                if SimTime::from_millis(ms) <= prev {
                    return Err(err("timestamps must be strictly increasing"));
                }
            }
            entries.push((SimTime::from_millis(ms), bps.max(1)));
        }
        Self::new(&entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TraceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Renders the schedule back into the `ms,kbps` format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for &(us, bps) in &self.steps {
            out.push_str(&format!("{},{}\n", us / 1000, bps as f64 / 1000.0));
        }
        out
    }

    /// Starts lookups `offset` into the trace.
    pub fn with_offset(mut self, offset: Duration) -> Self {
        self.offset = match self.period {
            Some(p) => micros(offset) % p,
            None => 0,
        };
        self
    }

    pub fn period(&self) -> Option<Duration> {
        self.period.map(Duration::from_micros)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Capacity in effect at `t`.
    pub fn capacity_at(&self, t: SimTime) -> u64 {
        self.step_at(t).0
    }

    /// Mean of the per-step capacities weighted by time over one period.
    pub fn mean_bps(&self) -> f64 {
        match self.period {
            None => self.steps[0].1 as f64,
            Some(p) => {
                let mut acc = 0.0;
                for (i, &(start, bps)) in self.steps.iter().enumerate() {
                    let end = self.steps.get(i + 1).map_or(p, |s| s.0);
                    acc += bps as f64 * (end - start) as f64;
                }
                acc / p as f64
            }
        }
    }

    /// Average capacity over `[from, to)`.
    pub fn mean_between(&self, from: SimTime, to: SimTime) -> f64 {
        if to <= from {
            return self.capacity_at(from) as f64;
        }
        let mut t = from;
        let mut acc: u128 = 0;
        while t < to {
            let (bps, end) = self.step_at(t);
            let end = end.unwrap_or(to).min(to);
            acc += bps as u128 * (end.as_micros() - t.as_micros()) as u128;
            t = end;
        }
        acc as f64 / (to.as_micros() - from.as_micros()) as f64
    }

    /// Time at which `bits` finish serializing when transmission starts at
    /// `start`, integrating the capacity schedule exactly.
    pub fn finish_time(&self, start: SimTime, bits: u64) -> SimTime {
        // Work in bit-microseconds so every step is exact integer math.
        let mut remaining = bits as u128 * 1_000_000;
        let mut t = start;
        loop {
            let (bps, end) = self.step_at(t);
            let bps = bps as u128;
            match end {
                Some(end) => {
                    let available = bps * (end.as_micros() - t.as_micros()) as u128;
                    if available >= remaining {
                        return SimTime::from_micros(t.as_micros() + ceil_div(remaining, bps));
                    }
                    remaining -= available;
                    t = end;
                }
                None => {
                    return SimTime::from_micros(t.as_micros() + ceil_div(remaining, bps));
                }
            }
        }
    }

    /// Capacity at `t` and the absolute time the current step ends (`None`
    /// when the capacity never changes again).
    fn step_at(&self, t: SimTime) -> (u64, Option<SimTime>) {
        let Some(period) = self.period else {
            return (self.steps[0].1, None);
        };
        let phase = (t.as_micros() + self.offset) % period;
        let idx = match self.steps.binary_search_by(|s| s.0.cmp(&phase)) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let step_end_rel = self.steps.get(idx + 1).map_or(period, |s| s.0);
        // step_end_rel > phase, so the step always ends strictly after t.
        let end = t.as_micros() + (step_end_rel - phase);
        (self.steps[idx].1, Some(SimTime::from_micros(end)))
    }
}

fn ceil_div(a: u128, b: u128) -> u64 {
    u64::try_from(a.div_ceil(b)).unwrap_or(u64::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_function_semantics() {
        let tr = TraceSchedule::parse("0,3000\n1000,5000\n").unwrap();
        assert_eq!(tr.capacity_at(SimTime::ZERO), 3_000_000);
        assert_eq!(tr.capacity_at(SimTime::from_micros(999_999)), 3_000_000);
        assert_eq!(tr.capacity_at(SimTime::from_secs(1)), 5_000_000);
        assert_eq!(tr.capacity_at(SimTime::from_millis(1_999)), 5_000_000);
    }

    #[test]
    fn single_entry_is_constant_forever() {
        let tr = TraceSchedule::parse("0,1200").unwrap();
        assert_eq!(tr.period(), None);
        assert_eq!(tr.capacity_at(SimTime::from_secs(100_000)), 1_200_000);
    }

    #[test]
    fn wraps_when_exhausted() {
        // 300 one-second steps: a 300 s trace.
        let text: String = (0..300)
            .map(|s| format!("{},{}\n", s * 1000, 1000 + s))
            .collect();
        let tr = TraceSchedule::parse(&text).unwrap();
        assert_eq!(tr.period(), Some(Duration::from_secs(300)));
        assert_eq!(
            tr.capacity_at(SimTime::from_secs(301)),
            tr.capacity_at(SimTime::from_secs(1))
        );
        assert_eq!(tr.capacity_at(SimTime::from_secs(300)), 1_000_000);
        assert_eq!(tr.capacity_at(SimTime::from_secs(399)), 1_099_000);
    }

    #[test]
    fn parse_errors_name_the_line() {
        for (text, line) in [
            ("0,100\nabc\n", 2),
            ("0,100\n5,0\n", 2),
            ("10,100\n10,200\n", 2),
            ("0,-3\n", 1),
            ("0;100\n", 1),
        ] {
            match TraceSchedule::parse(text) {
                Err(TraceError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        assert!(matches!(TraceSchedule::parse("\n"), Err(TraceError::Empty)));
    }

    #[test]
    fn finish_time_integrates_across_steps() {
        // 1 Mbps for 1 ms then 2 Mbps.
        let tr = TraceSchedule::new(&[
            (SimTime::ZERO, 1_000_000),
            (SimTime::from_millis(1), 2_000_000),
            (SimTime::from_millis(2), 1_000_000),
        ])
        .unwrap();
        // 1000 bits in the first ms, remaining 2000 bits at 2 Mbps = 1 ms.
        assert_eq!(
            tr.finish_time(SimTime::ZERO, 3_000),
            SimTime::from_millis(2)
        );
        assert_eq!(tr.finish_time(SimTime::ZERO, 0), SimTime::ZERO);
        assert!((tr.mean_between(SimTime::ZERO, SimTime::from_millis(2)) - 1.5e6).abs() < 1e-6);
    }

    #[test]
    fn offset_shifts_lookup() {
        let tr = TraceSchedule::parse("0,1000\n1000,2000\n")
            .unwrap()
            .with_offset(Duration::from_secs(1));
        assert_eq!(tr.capacity_at(SimTime::ZERO), 2_000_000);
        assert_eq!(tr.capacity_at(SimTime::from_secs(1)), 1_000_000);
    }
}
