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

use rand::{Rng, RngCore};

use super::RawFrame;
use crate::simnet::SimTime;

pub const MIN_RATE_BPS: f64 = 50_000.0;
pub const MAX_RATE_BPS: f64 = 4_000_000.0;
pub const RATE_TICK: Duration = Duration::from_millis(50);
pub const DROP_THRESHOLD: Duration = Duration::from_millis(400);
/// Weight of the newest encode-delay sample.
pub const ENCODE_ALPHA: f64 = 0.9;

/// Reference rate: the sum of the exploited paths' estimates, clamped.
#[derive(Clone, Copy, Debug, Default)]
pub struct RateController;

impl RateController {
    pub fn tick(&self, bw_es: &[f64]) -> f64 {
        bw_es.iter().sum::<f64>().clamp(MIN_RATE_BPS, MAX_RATE_BPS)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderConfig {
    pub fps: u64,
    /// Time constant of the output-rate lag.
    pub lag: Duration,
    pub key_period: u32,
    pub key_size_factor: f64,
    pub encode_delay: Duration,
    pub encode_jitter: Duration,
    pub initial_rate_bps: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            fps: super::FPS,
            lag: Duration::from_secs(1),
            key_period: 60,
            key_size_factor: 4.0,
            encode_delay: Duration::from_millis(8),
            encode_jitter: Duration::from_millis(2),
            initial_rate_bps: 500_000.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedFrame {
    pub frame_index: u32,
    pub capture_ts: SimTime,
    pub size: usize,
    pub key_frame: bool,
    pub encode_done_ts: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropDecision {
    Keep,
    Drop,
}

/// Keeps a dequeued raw frame unless its projected sender-side delay
/// exceeds the threshold.
pub fn drop_decision(
    raw: &RawFrame,
    now: SimTime,
    d_en_hat: Duration,
    lambda_min: Duration,
) -> DropDecision {
    let d_q = now.saturating_since(raw.capture_ts);
    if d_q + d_en_hat + lambda_min > DROP_THRESHOLD {
        DropDecision::Drop
    } else {
        DropDecision::Keep
    }
}

#[derive(Clone, Debug)]
pub struct Encoder {
    config: EncoderConfig,
    target: f64,
    actual: f64,
    last_update: Option<SimTime>,
    d_en_hat: Duration,
    key_pending: bool,
    // raw frames seen since the last scheduled key frame
    since_key: u32,
    bits_out: u64,
}

impl Encoder {
    pub fn new(config: EncoderConfig) -> Self {
        Self {
            target: config.initial_rate_bps,
            actual: config.initial_rate_bps.max(MIN_RATE_BPS),
            last_update: None,
            d_en_hat: config.encode_delay,
            key_pending: true,
            since_key: 0,
            bits_out: 0,
            config,
        }
    }

    pub fn target_rate(&self) -> f64 {
        self.target
    }

    pub fn actual_rate(&self) -> f64 {
        self.actual
    }

    pub fn d_en_hat(&self) -> Duration {
        self.d_en_hat
    }

    pub fn bits_out(&self) -> u64 {
        self.bits_out
    }

    pub fn set_target(&mut self, rate_bps: f64) {
        self.target = rate_bps;
    }

    /// Moves the output rate toward the target over the time since the last
    /// update.
    pub fn advance(&mut self, now: SimTime) {
        if let Some(last) = self.last_update {
            let dt = now.saturating_since(last).as_secs_f64();
            let k = 1.0 - (-dt / self.config.lag.as_secs_f64()).exp();
            self.actual += (self.target - self.actual) * k;
        }
        self.actual = self.actual.max(MIN_RATE_BPS);
        self.last_update = Some(now);
    }

    /// Counts a raw frame that was dropped before encoding; a key frame due
    /// on it moves to the next encoded frame.
    pub fn on_dropped(&mut self) {
        self.tick_gop();
    }

    fn tick_gop(&mut self) {
        if self.since_key == 0 {
            self.key_pending = true;
        }
        self.since_key = (self.since_key + 1) % self.config.key_period;
    }

    /// Encodes a frame starting at `now`; the result is ready at
    /// `encode_done_ts`, after which `on_encoded` should be called.
    pub fn encode_frame(
        &mut self,
        raw: &RawFrame,
        now: SimTime,
        rng: &mut dyn RngCore,
    ) -> EncodedFrame {
        self.advance(now);
        self.tick_gop();
        let key_frame = std::mem::take(&mut self.key_pending);
        let period = f64::from(self.config.key_period);
        let unit = self.actual / (8.0 * self.config.fps as f64) * period
            / (period - 1.0 + self.config.key_size_factor);
        let size = if key_frame {
            unit * self.config.key_size_factor
        } else {
            unit
        };
        let size = (size.round() as usize).max(1);
        self.bits_out += size as u64 * 8;

        let jitter = self.config.encode_jitter.as_micros() as i64;
        let offset = if jitter > 0 {
            rng.gen_range(-jitter..=jitter)
        } else {
            0
        };
        let delay_us = (self.config.encode_delay.as_micros() as i64 + offset).max(0) as u64;
        EncodedFrame {
            frame_index: raw.frame_index,
            capture_ts: raw.capture_ts,
            size,
            key_frame,
            encode_done_ts: now + Duration::from_micros(delay_us),
        }
    }

    /// Folds an encode-delay sample into the smoothed estimate.
    pub fn on_encoded(&mut self, sample: Duration) -> Duration {
        let smoothed = (1.0 - ENCODE_ALPHA) * self.d_en_hat.as_secs_f64()
            + ENCODE_ALPHA * sample.as_secs_f64();
        self.d_en_hat = Duration::from_secs_f64(smoothed);
        self.d_en_hat
    }
}
