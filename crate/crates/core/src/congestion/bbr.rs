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

use std::time::Duration;

use rand::RngCore;

use super::filters::{MinRttFilter, WindowedMaxFilter};
use super::{CcConfig, CcMode, CcOutputs, CcTraceRow, Variant};
use crate::simnet::SimTime;
use crate::transport::DeliveryRateSample;

/// 2/ln(2), the StartUp gain.
pub const HIGH_GAIN: f64 = 2.885;
pub const DRAIN_GAIN: f64 = 1.0 / HIGH_GAIN;
pub const STOCK_GAINS: [f64; 8] = [1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
pub const RTC_PROBE_UP_GAIN: f64 = 1.1;
pub const RTC_PROBE_DOWN_GAIN: f64 = 0.85;
pub const K_GAIN_CYCLE_LEN: u32 = 8;
pub const CYCLE_RAND: u32 = 7;
pub const PROBE_BW_CWND_GAIN: f64 = 2.0;
const FULL_BW_THRESHOLD: f64 = 1.25;
const FULL_BW_ROUNDS: u32 = 3;

#[derive(Clone, Debug)]
enum Cycle {
    Stock { index: usize },
    Rtc { len: u32 },
}

/// BBR-family controller for one path connection.
#[derive(Clone, Debug)]
pub struct Bbr {
    config: CcConfig,
    mode: CcMode,
    bw: WindowedMaxFilter,
    min_rtt: MinRttFilter,
    round_count: u64,
    next_round_delivered: u64,
    full_bw: f64,
    full_bw_count: u32,
    filled_pipe: bool,
    pacing_gain: f64,
    cycle: Cycle,
    cycle_stamp: SimTime,
    probe_rtt_done: Option<SimTime>,
    loss_pending: bool,
    paused_at: Option<SimTime>,
    inflight: u64,
    probe_rtt_count: u64,
}

impl Bbr {
    pub fn new(config: CcConfig) -> Self {
        let cycle = match config.variant {
            Variant::Bbr => Cycle::Stock { index: 0 },
            Variant::RtcBbr => Cycle::Rtc {
                len: K_GAIN_CYCLE_LEN,
            },
        };
        Self {
            bw: WindowedMaxFilter::new(config.bw_window_rounds),
            min_rtt: MinRttFilter::new(config.min_rtt_window),
            config,
            mode: CcMode::StartUp,
            round_count: 0,
            next_round_delivered: 0,
            full_bw: 0.0,
            full_bw_count: 0,
            filled_pipe: false,
            pacing_gain: HIGH_GAIN,
            cycle,
            cycle_stamp: SimTime::ZERO,
            probe_rtt_done: None,
            loss_pending: false,
            paused_at: None,
            inflight: 0,
            probe_rtt_count: 0,
        }
    }

    pub fn config(&self) -> &CcConfig {
        &self.config
    }

    pub fn mode(&self) -> CcMode {
        self.mode
    }

    pub fn pacing_gain(&self) -> f64 {
        self.pacing_gain
    }

    pub fn filled_pipe(&self) -> bool {
        self.filled_pipe
    }

    pub fn round_count(&self) -> u64 {
        self.round_count
    }

    /// Gain-cycle length in RTT_min units; stock BBR always reports 8.
    pub fn cycle_len(&self) -> u32 {
        match self.cycle {
            Cycle::Stock { .. } => STOCK_GAINS.len() as u32,
            Cycle::Rtc { len } => len,
        }
    }

    /// Current phase of the stock eight-gain vector.
    pub fn stock_phase(&self) -> Option<usize> {
        match self.cycle {
            Cycle::Stock { index } => Some(index),
            Cycle::Rtc { .. } => None,
        }
    }

    pub fn cycle_stamp(&self) -> SimTime {
        self.cycle_stamp
    }

    pub fn probe_rtt_count(&self) -> u64 {
        self.probe_rtt_count
    }

    pub fn is_paused(&self) -> bool {
        self.paused_at.is_some()
    }

    /// Windowed-max delivery rate, or the initial-window estimate before the
    /// pipe is known to be full.
    pub fn bw_es(&self) -> f64 {
        let measured = self.bw.get();
        if self.filled_pipe {
            measured
        } else {
            measured.max(self.initial_bw())
        }
    }

    fn initial_bw(&self) -> f64 {
        self.config.initial_cwnd() as f64 * 8.0 / self.config.initial_rtt.as_secs_f64()
    }

    pub fn rtt_min(&self) -> Duration {
        self.min_rtt.get().unwrap_or(self.config.initial_rtt)
    }

    /// Bandwidth-delay product in bytes.
    pub fn bdp(&self) -> f64 {
        self.bw_es() * self.rtt_min().as_secs_f64() / 8.0
    }

    pub fn cwnd(&self) -> u64 {
        match self.mode {
            CcMode::StartUp | CcMode::Drain => {
                ((HIGH_GAIN * self.bdp()) as u64).max(self.config.initial_cwnd())
            }
            CcMode::ProbeBw => (PROBE_BW_CWND_GAIN * self.bdp()) as u64,
            CcMode::ProbeRtt => self.config.probe_rtt_cwnd(),
        }
    }

    pub fn outputs(&self) -> CcOutputs {
        let bw_es = self.bw_es();
        CcOutputs {
            mode: self.mode,
            pacing_gain: self.pacing_gain,
            pacing_rate_bps: bw_es * self.pacing_gain,
            cwnd: self.cwnd(),
            bw_es_bps: bw_es,
            rtt_min: self.rtt_min(),
        }
    }

    pub fn trace_row(&self, now: SimTime) -> CcTraceRow {
        CcTraceRow {
            time: now,
            mode: self.mode,
            pacing_gain: self.pacing_gain,
            bw_es_bps: self.bw_es(),
            rtt_min: self.rtt_min(),
            inflight: self.inflight,
            cwnd: self.cwnd(),
        }
    }

    /// Records a loss detected outside ack processing; it is consumed by the
    /// next gain update.
    pub fn on_loss(&mut self) {
        self.loss_pending = true;
    }

    /// Freezes the controller's clocks while its path is not exploited.
    pub fn pause(&mut self, now: SimTime) {
        if self.paused_at.is_none() {
            self.paused_at = Some(now);
        }
    }

    pub fn resume(&mut self, now: SimTime) {
        if let Some(at) = self.paused_at.take() {
            let idle = now.saturating_since(at);
            self.min_rtt.shift_stamp(idle);
            self.cycle_stamp += idle;
            if let Some(done) = &mut self.probe_rtt_done {
                *done += idle;
            }
        }
    }

    pub fn on_sample(
        &mut self,
        now: SimTime,
        sample: &DeliveryRateSample,
        delivered: u64,
        rng: &mut dyn RngCore,
    ) -> CcOutputs {
        self.inflight = sample.inflight;

        let round_start = sample.prior_delivered >= self.next_round_delivered;
        if round_start {
            self.next_round_delivered = delivered;
            self.round_count += 1;
        }

        let bw = sample.bandwidth_bps as f64;
        if !sample.app_limited || bw > self.bw.get() {
            self.bw.insert(self.round_count, bw);
        }

        if !self.filled_pipe && round_start && !sample.app_limited {
            let max = self.bw.get();
            if max >= self.full_bw * FULL_BW_THRESHOLD {
                self.full_bw = max;
                self.full_bw_count = 0;
            } else {
                self.full_bw_count += 1;
                if self.full_bw_count >= FULL_BW_ROUNDS {
                    self.filled_pipe = true;
                }
            }
        }

        let rtt_expired = self.min_rtt.is_expired(now);
        self.min_rtt.update(now, sample.rtt);

        let has_loss = sample.has_loss || std::mem::take(&mut self.loss_pending);
        match self.mode {
            CcMode::StartUp => {
                if self.filled_pipe {
                    self.mode = CcMode::Drain;
                    self.pacing_gain = DRAIN_GAIN;
                }
            }
            CcMode::Drain => {}
            CcMode::ProbeBw => self.update_cycle(now, sample.inflight, has_loss, rng),
            CcMode::ProbeRtt => {}
        }
        if self.mode == CcMode::Drain && sample.inflight as f64 <= self.bdp() {
            self.enter_probe_bw(now, rng);
        }

        if rtt_expired && self.mode != CcMode::ProbeRtt && self.paused_at.is_none() {
            self.mode = CcMode::ProbeRtt;
            self.pacing_gain = 1.0;
            self.probe_rtt_done = None;
            self.probe_rtt_count += 1;
        }
        if self.mode == CcMode::ProbeRtt {
            self.handle_probe_rtt(now, sample.inflight, rng);
        }
        self.outputs()
    }

    /// Advances time-driven state when no acks arrive. Returns whether the
    /// mode changed.
    pub fn tick(&mut self, now: SimTime, inflight: u64, rng: &mut dyn RngCore) -> bool {
        self.inflight = inflight;
        let before = self.mode;
        if self.mode == CcMode::ProbeRtt {
            self.handle_probe_rtt(now, inflight, rng);
        }
        before != self.mode
    }

    fn handle_probe_rtt(&mut self, now: SimTime, inflight: u64, rng: &mut dyn RngCore) {
        match self.probe_rtt_done {
            None => {
                if inflight <= self.config.probe_rtt_cwnd() {
                    let dwell = self.config.probe_rtt_duration.max(self.rtt_min());
                    self.probe_rtt_done = Some(now + dwell);
                }
            }
            Some(done) if now >= done => {
                self.probe_rtt_done = None;
                self.min_rtt.refresh(now);
                if self.filled_pipe {
                    self.enter_probe_bw(now, rng);
                } else {
                    self.mode = CcMode::StartUp;
                    self.pacing_gain = HIGH_GAIN;
                }
            }
            Some(_) => {}
        }
    }

    /// Deadline after which `tick` may end ProbeRTT.
    pub fn probe_rtt_deadline(&self) -> Option<SimTime> {
        self.probe_rtt_done
    }

    fn enter_probe_bw(&mut self, now: SimTime, rng: &mut dyn RngCore) {
        self.mode = CcMode::ProbeBw;
        self.cycle_stamp = now;
        match &mut self.cycle {
            Cycle::Stock { index } => {
                // random start phase that never opens on the drain phase
                *index =
                    (STOCK_GAINS.len() - 1 - (rng.next_u32() % 7) as usize + 1) % STOCK_GAINS.len();
                self.pacing_gain = STOCK_GAINS[*index];
            }
            Cycle::Rtc { len } => {
                *len = K_GAIN_CYCLE_LEN - rng.next_u32() % CYCLE_RAND;
                self.pacing_gain = 1.0;
            }
        }
    }

    fn update_cycle(&mut self, now: SimTime, inflight: u64, has_loss: bool, rng: &mut dyn RngCore) {
        let _ = match self.cycle {
            Cycle::Stock { .. } => self.stock_bbr_cycle(now, inflight),
            Cycle::Rtc { .. } => self.update_gain_cycle_phase(now, inflight, has_loss, rng),
        };
    }

    /// Probe gain update of the RTC variant. Only meaningful in ProbeBW.
    pub fn update_gain_cycle_phase(
        &mut self,
        now: SimTime,
        inflight: u64,
        has_loss: bool,
        rng: &mut dyn RngCore,
    ) -> f64 {
        let Cycle::Rtc { len } = self.cycle else {
            return self.pacing_gain;
        };
        let elapsed = now.saturating_since(self.cycle_stamp);
        let rtt_min = self.rtt_min();
        if elapsed > rtt_min * len {
            self.cycle_stamp = now;
            self.cycle = Cycle::Rtc {
                len: K_GAIN_CYCLE_LEN - rng.next_u32() % CYCLE_RAND,
            };
            self.pacing_gain = RTC_PROBE_UP_GAIN;
            return self.pacing_gain;
        }
        if self.pacing_gain == 1.0 {
            return self.pacing_gain;
        }
        let bdp = self.bdp();
        if self.pacing_gain < 1.0 && inflight as f64 <= bdp {
            self.pacing_gain = 1.0;
        }
        if elapsed > rtt_min && (inflight as f64 > RTC_PROBE_UP_GAIN * bdp || has_loss) {
            self.pacing_gain = RTC_PROBE_DOWN_GAIN;
        }
        self.pacing_gain
    }

    /// Fixed eight-phase cycle of the baseline. Only meaningful in ProbeBW.
    pub fn stock_bbr_cycle(&mut self, now: SimTime, inflight: u64) -> f64 {
        let Cycle::Stock { index } = self.cycle else {
            return self.pacing_gain;
        };
        let full_length = now.saturating_since(self.cycle_stamp) > self.rtt_min();
        let gain = STOCK_GAINS[index];
        if full_length || (gain < 1.0 && inflight as f64 <= self.bdp()) {
            let next = (index + 1) % STOCK_GAINS.len();
            self.cycle = Cycle::Stock { index: next };
            self.cycle_stamp = now;
            self.pacing_gain = STOCK_GAINS[next];
        }
        self.pacing_gain
    }

    #[cfg(test)]
    pub(crate) fn force_probe_bw(&mut self, now: SimTime, gain: f64, cycle_len_or_index: u32) {
        self.mode = CcMode::ProbeBw;
        self.filled_pipe = true;
        self.cycle_stamp = now;
        self.pacing_gain = gain;
        match &mut self.cycle {
            Cycle::Stock { index } => *index = cycle_len_or_index as usize,
            Cycle::Rtc { len } => *len = cycle_len_or_index,
        }
    }
}
