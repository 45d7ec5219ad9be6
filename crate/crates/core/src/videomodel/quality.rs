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

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum QualityError {
    #[error("encode rate {rate} bps is not above R_0 = {r0} bps")]
    RateBelowFloor { rate: f64, r0: f64 },
}

/// Parameters of D = theta / (R - R_0) + D_0. Synthetic defaults, meant for
/// relative comparisons only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityModelParams {
    pub theta: f64,
    pub r0_bps: f64,
    pub d0: f64,
}

impl Default for QualityModelParams {
    fn default() -> Self {
        Self {
            theta: 3.2e6,
            r0_bps: 50_000.0,
            d0: 2.0,
        }
    }
}

impl QualityModelParams {
    pub fn distortion(&self, rate_bps: f64) -> Result<f64, QualityError> {
        if rate_bps <= self.r0_bps {
            return Err(QualityError::RateBelowFloor {
                rate: rate_bps,
                r0: self.r0_bps,
            });
        }
        Ok(self.theta / (rate_bps - self.r0_bps) + self.d0)
    }
}

/// PSNR-style score of a distortion value; `None` unless D > 0.
pub fn psnr_proxy(distortion: f64) -> Option<f64> {
    (distortion > 0.0).then(|| 10.0 * (255.0f64 * 255.0 / distortion).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_substitution() {
        let p = QualityModelParams {
            theta: 1.0,
            r0_bps: 0.0,
            d0: 0.0,
        };
        assert_eq!(p.distortion(2.0).unwrap(), 0.5);
    }

    #[test]
    fn asymptote_and_monotonicity() {
        let p = QualityModelParams::default();
        assert!((p.distortion(1e15).unwrap() - p.d0) < 1e-6);
        let mut prev = f64::INFINITY;
        for r in (1..400).map(|k| 50_000.0 + 1_000.0 * k as f64) {
            let d = p.distortion(r).unwrap();
            assert!(d < prev && d > p.d0);
            prev = d;
        }
    }

    #[test]
    fn domain_error() {
        let p = QualityModelParams::default();
        assert!(p.distortion(50_000.0).is_err());
        assert!(p.distortion(0.0).is_err());
    }

    #[test]
    fn psnr_of_unit_distortion() {
        assert!((psnr_proxy(1.0).unwrap() - 48.1308).abs() < 1e-3);
        assert_eq!(psnr_proxy(0.0), None);
    }
}
