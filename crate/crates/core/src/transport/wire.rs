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

//! Wire codec for the three-frame protocol.
//!
//! ```text
//! packet       = flags:u8 packet_number:u64 frame*
//! STREAM       = 0x01 offset:u64 length:u16 frame_index:u32 capture_ts_us:u64
//!                total_segments:u16 segment_index:u16 key_flag:u8 payload[length]
//! ACK          = 0x02 largest_acked:u64 ack_delay_us:u32 range_count:u8
//!                (start:u64 end:u64){range_count}
//! STOP_WAITING = 0x03 least_unacked:u64
//! ```
//!
//! All integers are big-endian.

use bytes::Bytes;

use crate::simnet::SimTime;

/// Total packet budget in bytes.
pub const MSS: usize = 1200;
pub const PACKET_HEADER_LEN: usize = 1 + 8;
pub const STREAM_FRAME_HEADER_LEN: usize = 1 + 8 + 2 + 4 + 8 + 2 + 2 + 1;
pub const STOP_WAITING_FRAME_LEN: usize = 1 + 8;
/// Video payload carried by a full data packet.
pub const MAX_STREAM_PAYLOAD: usize = MSS - PACKET_HEADER_LEN - STREAM_FRAME_HEADER_LEN;

const STREAM_TYPE: u8 = 0x01;
const ACK_TYPE: u8 = 0x02;
const STOP_WAITING_TYPE: u8 = 0x03;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketNumber(pub u64);

impl PacketNumber {
    pub fn next(self) -> PacketNumber {
        PacketNumber(self.0 + 1)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum WireError {
    #[error("buffer truncated: needed {needed} bytes, {remaining} remaining")]
    Truncated { needed: usize, remaining: usize },
    #[error("unknown frame type {0:#04x}")]
    UnknownFrameType(u8),
    #[error("field out of range: {0}")]
    RangeViolation(&'static str),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamFrame {
    pub offset: u64,
    pub frame_index: u32,
    pub capture_ts: SimTime,
    pub total_segments: u16,
    pub segment_index: u16,
    pub key_frame: bool,
    pub payload: Bytes,
}

impl StreamFrame {
    pub fn payload_len(&self) -> usize {
        self.payload.len()
    }
}

/// Inclusive range of acknowledged packet numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AckRange {
    pub start: PacketNumber,
    pub end: PacketNumber,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AckFrame {
    pub largest_acked: PacketNumber,
    pub ack_delay_us: u32,
    /// Disjoint, sorted descending, none above `largest_acked`.
    pub ranges: Vec<AckRange>,
}

impl AckFrame {
    pub fn validate(&self) -> Result<(), WireError> {
        if self.ranges.len() > u8::MAX as usize {
            return Err(WireError::RangeViolation("more than 255 ack ranges"));
        }
        let mut upper_bound = Some(self.largest_acked.0);
        for r in &self.ranges {
            if r.start > r.end {
                return Err(WireError::RangeViolation("ack range start after end"));
            }
            match upper_bound {
                Some(ub) if r.end.0 <= ub => {}
                _ => {
                    return Err(WireError::RangeViolation(
                        "ack ranges not disjoint and descending",
                    ))
                }
            }
            upper_bound = r.start.0.checked_sub(1);
        }
        Ok(())
    }

    pub fn acks(&self, pn: PacketNumber) -> bool {
        self.ranges.iter().any(|r| r.start <= pn && pn <= r.end)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StopWaitingFrame {
    pub least_unacked: PacketNumber,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    Stream(StreamFrame),
    Ack(AckFrame),
    StopWaiting(StopWaitingFrame),
}

impl Frame {
    pub fn encoded_len(&self) -> usize {
        match self {
            Frame::Stream(s) => STREAM_FRAME_HEADER_LEN + s.payload.len(),
            Frame::Ack(a) => 1 + 8 + 4 + 1 + 16 * a.ranges.len(),
            Frame::StopWaiting(_) => STOP_WAITING_FRAME_LEN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Packet {
    pub flags: u8,
    pub number: PacketNumber,
    pub frames: Vec<Frame>,
}

impl Packet {
    pub fn encoded_len(&self) -> usize {
        PACKET_HEADER_LEN + self.frames.iter().map(Frame::encoded_len).sum::<usize>()
    }

    pub fn encode(&self, out: &mut Vec<u8>) -> Result<(), WireError> {
        out.reserve(self.encoded_len());
        out.push(self.flags);
        out.extend_from_slice(&self.number.0.to_be_bytes());
        for frame in &self.frames {
            match frame {
                Frame::Stream(s) => {
                    if s.segment_index >= s.total_segments {
                        return Err(WireError::RangeViolation("segment_index >= total_segments"));
                    }
                    let len = u16::try_from(s.payload.len()).map_err(|_| {
                        WireError::RangeViolation("stream payload over 65535 bytes")
                    })?;
                    out.push(STREAM_TYPE);
                    out.extend_from_slice(&s.offset.to_be_bytes());
                    out.extend_from_slice(&len.to_be_bytes());
                    out.extend_from_slice(&s.frame_index.to_be_bytes());
                    out.extend_from_slice(&s.capture_ts.as_micros().to_be_bytes());
                    out.extend_from_slice(&s.total_segments.to_be_bytes());
                    out.extend_from_slice(&s.segment_index.to_be_bytes());
                    out.push(s.key_frame as u8);
                    out.extend_from_slice(&s.payload);
                }
                Frame::Ack(a) => {
                    a.validate()?;
                    out.push(ACK_TYPE);
                    out.extend_from_slice(&a.largest_acked.0.to_be_bytes());
                    out.extend_from_slice(&a.ack_delay_us.to_be_bytes());
                    out.push(a.ranges.len() as u8);
                    for r in &a.ranges {
                        out.extend_from_slice(&r.start.0.to_be_bytes());
                        out.extend_from_slice(&r.end.0.to_be_bytes());
                    }
                }
                Frame::StopWaiting(sw) => {
                    out.push(STOP_WAITING_TYPE);
                    out.extend_from_slice(&sw.least_unacked.0.to_be_bytes());
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode(&mut out)?;
        Ok(out)
    }

    /// Decodes a whole packet; fails without returning partial results.
    pub fn decode(buf: &[u8]) -> Result<Packet, WireError> {
        let mut r = Reader { buf };
        let flags = r.u8()?;
        let number = PacketNumber(r.u64()?);
        let mut frames = Vec::new();
        while !r.buf.is_empty() {
            let frame = match r.u8()? {
                STREAM_TYPE => {
                    let offset = r.u64()?;
                    let len = r.u16()? as usize;
                    let frame_index = r.u32()?;
                    let capture_ts = SimTime::from_micros(r.u64()?);
                    let total_segments = r.u16()?;
                    let segment_index = r.u16()?;
                    let key_frame = match r.u8()? {
                        0 => false,
                        1 => true,
                        _ => return Err(WireError::RangeViolation("key flag not 0 or 1")),
                    };
                    if segment_index >= total_segments {
                        return Err(WireError::RangeViolation("segment_index >= total_segments"));
                    }
                    let payload = Bytes::copy_from_slice(r.take(len)?);
                    Frame::Stream(StreamFrame {
                        offset,
                        frame_index,
                        capture_ts,
                        total_segments,
                        segment_index,
                        key_frame,
                        payload,
                    })
                }
                ACK_TYPE => {
                    let largest_acked = PacketNumber(r.u64()?);
                    let ack_delay_us = r.u32()?;
                    let count = r.u8()? as usize;
                    let mut ranges = Vec::with_capacity(count);
                    for _ in 0..count {
                        let start = PacketNumber(r.u64()?);
                        let end = PacketNumber(r.u64()?);
                        ranges.push(AckRange { start, end });
                    }
                    let ack = AckFrame {
                        largest_acked,
                        ack_delay_us,
                        ranges,
                    };
                    ack.validate()?;
                    Frame::Ack(ack)
                }
                STOP_WAITING_TYPE => Frame::StopWaiting(StopWaitingFrame {
                    least_unacked: PacketNumber(r.u64()?),
                }),
                other => return Err(WireError::UnknownFrameType(other)),
            };
            frames.push(frame);
        }
        Ok(Packet {
            flags,
            number,
            frames,
        })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() < n {
            return Err(WireError::Truncated {
                needed: n,
                remaining: self.buf.len(),
            });
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        Ok(self.take(N)?.try_into().expect("take returns N bytes"))
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        self.array().map(u16::from_be_bytes)
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        self.array().map(u32::from_be_bytes)
    }

    fn u64(&mut self) -> Result<u64, WireError> {
        self.array().map(u64::from_be_bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_packet() -> Packet {
        Packet {
            flags: 0x01,
            number: PacketNumber(42),
            frames: vec![
                Frame::Stream(StreamFrame {
                    offset: 3_000,
                    frame_index: 7,
                    capture_ts: SimTime::from_millis(233),
                    total_segments: 3,
                    segment_index: 2,
                    key_frame: true,
                    payload: Bytes::from_static(b"abc"),
                }),
                Frame::Ack(AckFrame {
                    largest_acked: PacketNumber(u64::MAX),
                    ack_delay_us: 1_500,
                    ranges: vec![
                        AckRange {
                            start: PacketNumber(u64::MAX - 3),
                            end: PacketNumber(u64::MAX),
                        },
                        AckRange {
                            start: PacketNumber(1),
                            end: PacketNumber(5),
                        },
                    ],
                }),
            ],
        }
    }

    #[test]
    fn round_trip_stream_with_piggybacked_ack() {
        let p = sample_packet();
        let bytes = p.to_bytes().unwrap();
        assert_eq!(bytes.len(), p.encoded_len());
        assert_eq!(Packet::decode(&bytes).unwrap(), p);
    }

    #[test]
    fn exact_layout() {
        let p = Packet {
            flags: 0,
            number: PacketNumber(0x0102),
            frames: vec![Frame::StopWaiting(StopWaitingFrame {
                least_unacked: PacketNumber(9),
            })],
        };
        assert_eq!(
            p.to_bytes().unwrap(),
            [0, 0, 0, 0, 0, 0, 0, 1, 2, 3, 0, 0, 0, 0, 0, 0, 0, 9]
        );
        assert_eq!(MAX_STREAM_PAYLOAD, 1163);
    }

    #[test]
    fn truncated_header_is_an_error() {
        let p = sample_packet();
        let bytes = p.to_bytes().unwrap();
        let stream_end = PACKET_HEADER_LEN + p.frames[0].encoded_len();
        // cutting exactly on a frame boundary leaves a valid shorter packet
        for cut in (0..bytes.len()).filter(|&c| c != PACKET_HEADER_LEN && c != stream_end) {
            assert!(
                matches!(
                    Packet::decode(&bytes[..cut]),
                    Err(WireError::Truncated { .. })
                ),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn unknown_frame_type() {
        let mut bytes = vec![0u8; 9];
        bytes.push(0x7f);
        assert_eq!(
            Packet::decode(&bytes),
            Err(WireError::UnknownFrameType(0x7f))
        );
    }

    #[test]
    fn range_violations() {
        let bad_ack = AckFrame {
            largest_acked: PacketNumber(5),
            ack_delay_us: 0,
            ranges: vec![AckRange {
                start: PacketNumber(4),
                end: PacketNumber(6),
            }],
        };
        assert!(bad_ack.validate().is_err());
        let overlapping = AckFrame {
            largest_acked: PacketNumber(10),
            ack_delay_us: 0,
            ranges: vec![
                AckRange {
                    start: PacketNumber(5),
                    end: PacketNumber(10),
                },
                AckRange {
                    start: PacketNumber(3),
                    end: PacketNumber(5),
                },
            ],
        };
        assert!(overlapping.validate().is_err());

        let mut p = sample_packet();
        if let Frame::Stream(s) = &mut p.frames[0] {
            s.segment_index = 3;
        }
        assert!(p.to_bytes().is_err());

        let mut bytes = sample_packet().to_bytes().unwrap();
        // key flag byte of the stream frame
        bytes[9 + STREAM_FRAME_HEADER_LEN - 1] = 2;
        assert!(matches!(
            Packet::decode(&bytes),
            Err(WireError::RangeViolation(_))
        ));
    }
}
