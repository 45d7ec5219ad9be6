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

use bytes::Bytes;

use super::wire::StreamFrame;
use crate::simnet::SimTime;

// Simulated payloads carry no content; every segment slices this buffer.
static ZEROS: [u8; u16::MAX as usize] = [0; u16::MAX as usize];

/// Frame-level metadata copied into every segment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameMeta {
    pub frame_index: u32,
    pub capture_ts: SimTime,
    pub key_frame: bool,
}

/// Splits an encoded frame of `size` bytes into STREAM segments of at most
/// `budget` payload bytes. Offsets continue from `stream_offset`.
///
/// # Panics
///
/// Panics if `size` or `budget` is zero, `budget` exceeds a u16 length, or
/// the frame would need more than `u16::MAX` segments.
pub fn packetize(
    meta: FrameMeta,
    size: usize,
    budget: usize,
    stream_offset: u64,
) -> Vec<StreamFrame> {
    assert!(size > 0, "empty frame");
    assert!(
        budget > 0 && budget <= ZEROS.len(),
        "segment budget {budget} out of range"
    );
    let total = size.div_ceil(budget);
    let total_segments = u16::try_from(total).expect("frame too large for u16 segment count");
    (0..total)
        .map(|i| {
            let start = i * budget;
            let len = budget.min(size - start);
            StreamFrame {
                offset: stream_offset + start as u64,
                frame_index: meta.frame_index,
                capture_ts: meta.capture_ts,
                total_segments,
                segment_index: i as u16,
                key_frame: meta.key_frame,
                payload: Bytes::from_static(&ZEROS[..len]),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta() -> FrameMeta {
        FrameMeta {
            frame_index: 5,
            capture_ts: SimTime::from_millis(166),
            key_frame: false,
        }
    }

    #[test]
    fn three_segments() {
        let segs = packetize(meta(), 3000, 1200, 0);
        let lens: Vec<_> = segs.iter().map(|s| s.payload_len()).collect();
        assert_eq!(lens, [1200, 1200, 600]);
        assert!(segs.iter().all(|s| s.total_segments == 3));
        assert_eq!(segs[2].offset, 2400);
    }

    #[test]
    fn single_byte() {
        let segs = packetize(meta(), 1, 1200, 77);
        assert_eq!(segs.len(), 1);
        assert_eq!(
            (
                segs[0].segment_index,
                segs[0].total_segments,
                segs[0].offset
            ),
            (0, 1, 77)
        );
    }

    proptest! {
        #[test]
        fn covers_frame_in_order(size in 1usize..200_000, budget in 1usize..2000, base in 0u64..1 << 40) {
            let segs = packetize(meta(), size, budget, base);
            prop_assert_eq!(segs.iter().map(|s| s.payload_len()).sum::<usize>(), size);
            let mut next = base;
            for (i, s) in segs.iter().enumerate() {
                prop_assert_eq!(s.offset, next);
                prop_assert_eq!(s.segment_index as usize, i);
                prop_assert_eq!(s.total_segments as usize, segs.len());
                if i + 1 < segs.len() {
                    prop_assert_eq!(s.payload_len(), budget);
                }
                next += s.payload_len() as u64;
            }
        }
    }
}
