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

//! Wire protocol, packetization, per-connection send and receive state, and
//! pacing.

mod pacer;
mod packetize;
mod recv;
mod sent;
mod wire;

pub use pacer::{next_send_time, Pacer};
pub use packetize::{packetize, FrameMeta};
pub use recv::{AbandonedGap, ReceiveManager, ACK_EVERY_PACKETS, MAX_ACK_DELAY, MAX_ACK_RANGES};
pub use sent::{
    AckOutcome, DeliveryRateSample, SendManager, SendStats, SentPacket, INITIAL_LOSS_RTT,
    REORDERING_THRESHOLD, TIME_THRESHOLD,
};
pub use wire::{
    AckFrame, AckRange, Frame, Packet, PacketNumber, StopWaitingFrame, StreamFrame, WireError,
    MAX_STREAM_PAYLOAD, MSS, PACKET_HEADER_LEN, STOP_WAITING_FRAME_LEN, STREAM_FRAME_HEADER_LEN,
};
