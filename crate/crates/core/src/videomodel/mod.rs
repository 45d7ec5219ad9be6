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

//! Synthetic video source and sink.

mod encoder;
mod quality;
mod sink;

use std::time::Duration;

pub use encoder::{
    drop_decision, DropDecision, EncodedFrame, Encoder, EncoderConfig, RateController,
    DROP_THRESHOLD, ENCODE_ALPHA, MAX_RATE_BPS, MIN_RATE_BPS, RATE_TICK,
};
pub use quality::{psnr_proxy, QualityError, QualityModelParams};
pub use sink::{DeliveredFrame, FrameRecord, FrameSink, SinkStats};

use crate::simnet::SimTime;

pub const FPS: u64 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RawFrame {
    pub frame_index: u32,
    pub capture_ts: SimTime,
}

impl RawFrame {
    /// The `index`-th captured frame, on the exact 1/30 s grid.
    pub fn captured(index: u32) -> Self {
        Self {
            frame_index: index,
            capture_ts: capture_time(index),
        }
    }
}

pub fn capture_time(index: u32) -> SimTime {
    SimTime::from_micros(u64::from(index) * 1_000_000 / FPS)
}

pub fn frame_interval() -> Duration {
    Duration::from_micros(1_000_000 / FPS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capture_grid() {
        assert_eq!(capture_time(0), SimTime::ZERO);
        assert_eq!(capture_time(1).as_micros(), 33_333);
        assert_eq!(capture_time(30), SimTime::from_secs(1));
        assert_eq!(capture_time(12_000), SimTime::from_secs(400));
    }
}
