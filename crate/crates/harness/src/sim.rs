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

//! Event-driven session engine: path connections over the simulated
//! network, bulk and video sources, and the per-run records the metrics
//! are computed from.

use std::collections::{BTreeMap, VecDeque};
use std::time::Duration;

use rand_chacha::ChaCha8Rng;
use rtcmp::bandit::PathManager;
use rtcmp::congestion::{Bbr, CcConfig, CcMode, Variant};
use rtcmp::scheduler::{Scheduler, SegmentId};
use rtcmp::simnet::{EventQueue, NetEvent, NetOutput, Network, Route, Topology, WireSize};
use rtcmp::transport::{
    packetize, AckFrame, Frame, FrameMeta, Pacer, Packet, PacketNumber, ReceiveManager,
    SendManager, SentPacket, StopWaitingFrame, StreamFrame, MAX_STREAM_PAYLOAD,
};
use rtcmp::videomodel::{
    capture_time, drop_decision, DropDecision, EncodedFrame, Encoder, EncoderConfig, FrameSink,
    QualityModelParams, RateController, RawFrame, RATE_TICK,
};
use rtcmp::SimTime;

/// Spacing of congestion-control trace rows.
pub const CC_TRACE_INTERVAL: Duration = Duration::from_millis(100);
pub const SLOT: Duration = Duration::from_secs(1);
/// An exploited path with nothing in flight for this long gets an empty
/// ack-eliciting packet, so its RTT estimate keeps tracking the path.
pub const PROBE_IDLE: Duration = Duration::from_millis(200);
/// Encode rates are floored this far above R_0 before the distortion model
/// is evaluated, so the model stays finite at the encoder's minimum rate.
pub const QUALITY_RATE_MARGIN_BPS: f64 = 10_000.0;

#[derive(Debug)]
pub struct SimPacket {
    conn: usize,
    sent_ts: SimTime,
    size: u32,
    packet: Packet,
}

impl WireSize for SimPacket {
    fn wire_size(&self) -> u32 {
        self.size
    }
}

#[derive(Debug)]
enum Ev {
    Net(NetEvent<SimPacket>),
    Pacer(usize),
    AckTimer(usize),
    LossAlarm(usize),
    CcTick(usize),
    FlowStart(usize),
    Capture(u32),
    EncodeDone,
    RateTick,
    Slot,
    CcSample,
}

#[derive(Debug)]
struct Conn {
    flow: usize,
    subflow: usize,
    path: usize,
    fwd: Route,
    rev: Route,
    tx: SendManager<Option<SegmentId>>,
    rx: ReceiveManager,
    cc: Bbr,
    pacer: Pacer,
    active: bool,
    rate_cap_bps: f64,
    pacer_at: Option<SimTime>,
    ack_at: Option<SimTime>,
    loss_at: Option<SimTime>,
    tick_at: Option<SimTime>,
    ack_pn: PacketNumber,
    last_sent: SimTime,
    bulk_frames: u32,
    bulk_offset: u64,
}

/// Data-packet counters of one flow (a bulk flow or the video session).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowCounters {
    pub start: SimTime,
    pub sent_packets: u64,
    pub sent_bytes: u64,
    pub dropped_packets: u64,
    pub recv_packets: u64,
    pub recv_bytes: u64,
    pub owd_sum_us: u128,
    /// Received bytes per whole simulated second.
    pub bins: Vec<u64>,
}

impl FlowCounters {
    fn on_receive(&mut self, now: SimTime, sent: SimTime, size: u32) {
        self.recv_packets += 1;
        self.recv_bytes += u64::from(size);
        self.owd_sum_us += u128::from(now.saturating_since(sent).as_micros() as u64);
        let bin = (now.as_micros() / 1_000_000) as usize;
        if self.bins.len() <= bin {
            self.bins.resize(bin + 1, 0);
        }
        self.bins[bin] += u64::from(size);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CcRow {
    pub time: SimTime,
    pub conn: usize,
    pub flow: usize,
    pub subflow: usize,
    pub path: usize,
    pub active: bool,
    pub mode: CcMode,
    pub pacing_gain: f64,
    pub bw_es_bps: f64,
    pub rtt_min: Duration,
    pub inflight: u64,
    pub cwnd: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionRow {
    pub slot: u64,
    pub time: SimTime,
    pub subflow: usize,
    pub path: usize,
    pub exploration: bool,
    pub score: Option<f64>,
    /// Ground-truth mean capacity of the chosen path over the slot.
    pub capacity_bps: f64,
    pub best_capacity_bps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameRow {
    pub frame_index: u32,
    pub capture_ts: SimTime,
    pub delivered_ts: Option<SimTime>,
    pub size: usize,
    pub key_frame: bool,
    pub dropped_at_sender: bool,
    pub abandoned: bool,
    pub encode_rate_bps: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VideoSummary {
    pub captured: u64,
    pub dropped_at_sender: u64,
    pub delivered: u64,
    pub abandoned: u64,
    pub mean_frame_delay_ms: f64,
    pub mean_distortion: f64,
    pub mean_psnr_proxy: f64,
    pub retransmissions: u64,
    pub key_retransmissions: u64,
    pub given_up: u64,
    pub age_evicted: u64,
    pub key_age_evicted: u64,
    pub max_nonkey_retransmit_age: Duration,
    pub path_switches: u64,
    /// Key segments seen leaving the send buffer through eviction, counted
    /// by the engine rather than the scheduler.
    pub observed_key_evictions: u64,
    /// Oldest non-key segment actually put on the wire again, measured from
    /// its first transmission.
    pub observed_max_nonkey_resend_age: Duration,
}

/// Everything a run produced.
#[derive(Clone, Debug, Default)]
pub struct RunRecord {
    pub duration: SimTime,
    pub flows: Vec<FlowCounters>,
    pub cc_rows: Vec<CcRow>,
    pub selections: Vec<SelectionRow>,
    pub frames: Vec<FrameRow>,
    pub video: Option<VideoSummary>,
}

/// How each slot's path is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    Ucb,
    /// Every subflow stays on its first (direct) path.
    Pinned,
    /// Candidate with the most ground-truth capacity over the coming slot.
    Oracle,
}

#[derive(Debug)]
enum Selector {
    Ucb(PathManager),
    Pinned,
    Oracle,
}

#[derive(Debug)]
struct SubflowPaths {
    conns: Vec<usize>,
    active: usize,
    first_id: usize,
}

#[derive(Clone, Copy, Debug)]
struct SenderFrame {
    capture_ts: SimTime,
    dropped: bool,
    size: usize,
    key_frame: bool,
    rate_bps: f64,
}

#[derive(Debug)]
struct Video {
    encoder: Encoder,
    scheduler: Scheduler,
    sink: FrameSink,
    quality: QualityModelParams,
    raw: VecDeque<RawFrame>,
    encoding: Option<(EncodedFrame, SimTime)>,
    offset: u64,
    subflows: Vec<SubflowPaths>,
    selector: Selector,
    sent_frames: BTreeMap<u32, SenderFrame>,
    switches: u64,
    delay_sum_us: u128,
    key_evictions: u64,
    max_nonkey_resend_age: Duration,
}

/// Video session set-up: one entry per subflow, listing its candidate
/// paths as indices into the topology's flow list entry.
#[derive(Clone, Debug)]
pub struct VideoSetup {
    pub topology_flows: Vec<usize>,
    pub selection: Selection,
    pub encoder: EncoderConfig,
    pub quality: QualityModelParams,
}

pub struct Engine {
    q: EventQueue<Ev>,
    net: Network<SimPacket>,
    topo: Topology,
    conns: Vec<Conn>,
    flows: Vec<FlowCounters>,
    video: Option<Video>,
    video_flow: Option<usize>,
    rng: ChaCha8Rng,
    now: SimTime,
    end: SimTime,
    cc_trace: bool,
    cc_rows: Vec<CcRow>,
    selections: Vec<SelectionRow>,
}

impl Engine {
    pub fn new(topo: Topology, rng: ChaCha8Rng, duration: Duration) -> Self {
        Self {
            q: EventQueue::new(),
            net: topo.network(),
            topo,
            conns: Vec::new(),
            flows: Vec::new(),
            video: None,
            video_flow: None,
            rng,
            now: SimTime::ZERO,
            end: SimTime::ZERO + duration,
            cc_trace: false,
            cc_rows: Vec::new(),
            selections: Vec::new(),
        }
    }

    /// Records congestion-control state of every started connection each
    /// [`CC_TRACE_INTERVAL`].
    pub fn with_cc_trace(mut self) -> Self {
        self.cc_trace = true;
        self
    }

    fn add_conn(
        &mut self,
        flow: usize,
        subflow: usize,
        path: usize,
        topo_flow: usize,
        variant: Variant,
        cap: f64,
    ) -> usize {
        let routes = &self.topo.flows[topo_flow].paths[path];
        self.conns.push(Conn {
            flow,
            subflow,
            path,
            fwd: routes.forward.clone(),
            rev: routes.reverse.clone(),
            tx: SendManager::new(),
            rx: ReceiveManager::new(),
            cc: Bbr::new(CcConfig::new(variant)),
            pacer: Pacer::new(),
            active: false,
            rate_cap_bps: cap,
            pacer_at: None,
            ack_at: None,
            loss_at: None,
            tick_at: None,
            ack_pn: PacketNumber(0),
            last_sent: SimTime::ZERO,
            bulk_frames: 0,
            bulk_offset: 0,
        });
        self.conns.len() - 1
    }

    /// A backlogged flow on the first path of topology flow `topo_flow`,
    /// sending no faster than `cap_bps`. Returns the flow index.
    pub fn add_bulk_flow(
        &mut self,
        topo_flow: usize,
        variant: Variant,
        start: SimTime,
        cap_bps: f64,
    ) -> usize {
        let flow = self.flows.len();
        self.flows.push(FlowCounters {
            start,
            ..FlowCounters::default()
        });
        self.add_conn(flow, 0, 0, topo_flow, variant, cap_bps);
        self.q.schedule_clamped(start, Ev::FlowStart(flow));
        flow
    }

    /// The multipath video session; at most one per engine. Returns the flow
    /// index its counters are kept under.
    pub fn add_video(&mut self, setup: VideoSetup, variant: Variant) -> usize {
        assert!(self.video.is_none(), "one video session per engine");
        let flow = self.flows.len();
        self.flows.push(FlowCounters::default());
        self.video_flow = Some(flow);
        let mut subflows = Vec::new();
        let mut first_id = 0;
        for (s, &tf) in setup.topology_flows.iter().enumerate() {
            let k = self.topo.flows[tf].paths.len();
            let conns = (0..k)
                .map(|p| self.add_conn(flow, s, p, tf, variant, f64::INFINITY))
                .collect();
            subflows.push(SubflowPaths {
                conns,
                active: 0,
                first_id,
            });
            first_id += k;
        }
        let counts: Vec<usize> = subflows.iter().map(|s| s.conns.len()).collect();
        let selector = match setup.selection {
            Selection::Ucb => Selector::Ucb(PathManager::new(&counts)),
            Selection::Pinned => Selector::Pinned,
            Selection::Oracle => Selector::Oracle,
        };
        let initial_srtt = CcConfig::new(variant).initial_rtt;
        let mut scheduler = Scheduler::new(subflows.len(), initial_srtt);
        for sf in &subflows {
            let c = &mut self.conns[sf.conns[0]];
            c.active = true;
            scheduler.set_bw_es(c.subflow, c.cc.bw_es());
        }
        self.video = Some(Video {
            encoder: Encoder::new(setup.encoder),
            scheduler,
            sink: FrameSink::new(),
            quality: setup.quality,
            raw: VecDeque::new(),
            encoding: None,
            offset: 0,
            subflows,
            selector,
            sent_frames: BTreeMap::new(),
            switches: 0,
            delay_sum_us: 0,
            key_evictions: 0,
            max_nonkey_resend_age: Duration::ZERO,
        });
        self.q.schedule_clamped(SimTime::ZERO, Ev::Slot);
        self.q.schedule_clamped(SimTime::ZERO, Ev::RateTick);
        self.q.schedule_clamped(SimTime::ZERO, Ev::Capture(0));
        flow
    }

    pub fn run(mut self) -> RunRecord {
        if self.cc_trace {
            self.q.schedule_clamped(SimTime::ZERO, Ev::CcSample);
        }
        while let Some((t, ev)) = self.q.pop_until(self.end) {
            self.now = t;
            self.handle(ev);
        }
        self.finish()
    }

    fn handle(&mut self, ev: Ev) {
        match ev {
            Ev::Net(e) => {
                let mut out = Vec::new();
                self.net.handle(self.now, e, &mut out);
                self.net_outputs(out);
            }
            Ev::Pacer(c) => {
                if self.conns[c].pacer_at == Some(self.now) {
                    self.conns[c].pacer_at = None;
                    self.try_send(c);
                }
            }
            Ev::AckTimer(c) => {
                if self.conns[c].ack_at == Some(self.now) {
                    self.conns[c].ack_at = None;
                    if let Some(ack) = self.conns[c].rx.maybe_ack(self.now) {
                        self.send_ack(c, ack);
                    }
                }
            }
            Ev::LossAlarm(c) => {
                if self.conns[c].loss_at == Some(self.now) {
                    self.conns[c].loss_at = None;
                    let lost = self.conns[c].tx.on_loss_timer(self.now);
                    if !lost.is_empty() {
                        self.conns[c].cc.on_loss();
                        self.on_lost(c, lost);
                    }
                    self.after_tx_change(c);
                }
            }
            Ev::CcTick(c) => {
                if self.conns[c].tick_at == Some(self.now) {
                    self.conns[c].tick_at = None;
                    self.after_tx_change(c);
                }
            }
            Ev::FlowStart(f) => {
                let ids: Vec<usize> = (0..self.conns.len())
                    .filter(|&c| self.conns[c].flow == f)
                    .collect();
                for c in ids {
                    self.conns[c].active = true;
                    self.try_send(c);
                }
            }
            Ev::Capture(i) => self.on_capture(i),
            Ev::EncodeDone => self.on_encode_done(),
            Ev::RateTick => self.on_rate_tick(),
            Ev::Slot => self.on_slot(),
            Ev::CcSample => {
                for (i, c) in self.conns.iter().enumerate() {
                    let started = c.active || c.tx.next_packet_number().0 > 0;
                    if !started {
                        continue;
                    }
                    let row = c.cc.trace_row(self.now);
                    self.cc_rows.push(CcRow {
                        time: self.now,
                        conn: i,
                        flow: c.flow,
                        subflow: c.subflow,
                        path: c.path,
                        active: c.active,
                        mode: row.mode,
                        pacing_gain: row.pacing_gain,
                        bw_es_bps: row.bw_es_bps,
                        rtt_min: row.rtt_min,
                        inflight: c.tx.inflight(),
                        cwnd: row.cwnd,
                    });
                }
                self.q
                    .schedule_clamped(self.now + CC_TRACE_INTERVAL, Ev::CcSample);
            }
        }
    }

    fn net_outputs(&mut self, out: Vec<NetOutput<SimPacket>>) {
        for o in out {
            match o {
                NetOutput::Schedule(at, e) => {
                    self.q.schedule_clamped(at, Ev::Net(e));
                }
                NetOutput::Delivered(p) => self.on_delivered(p),
                NetOutput::Dropped { packet, .. } => {
                    if is_data(&packet.packet) {
                        let flow = self.conns[packet.conn].flow;
                        self.flows[flow].dropped_packets += 1;
                    }
                }
            }
        }
    }

    fn transmit(&mut self, c: usize, packet: Packet, forward: bool) {
        let size = packet.encoded_len() as u32;
        let route = if forward {
            self.conns[c].fwd.clone()
        } else {
            self.conns[c].rev.clone()
        };
        let mut out = Vec::new();
        let p = SimPacket {
            conn: c,
            sent_ts: self.now,
            size,
            packet,
        };
        self.net.send(self.now, p, route, &mut out);
        self.net_outputs(out);
    }

    fn next_segment(&self, c: usize) -> Option<usize> {
        let conn = &self.conns[c];
        match &self.video {
            Some(v) if self.video_flow == Some(conn.flow) => v
                .scheduler
                .peek(conn.subflow)
                .map(|(_, seg)| seg.payload_len()),
            _ => Some(MAX_STREAM_PAYLOAD),
        }
    }

    fn is_video_conn(&self, c: usize) -> bool {
        self.video_flow == Some(self.conns[c].flow)
    }

    fn try_send(&mut self, c: usize) {
        loop {
            if !self.conns[c].active {
                return;
            }
            if self.is_video_conn(c) {
                let sf = self.conns[c].subflow;
                self.video
                    .as_mut()
                    .expect("video conn")
                    .scheduler
                    .expire_head(self.now, sf);
            }
            let Some(payload) = self.next_segment(c) else {
                let conn = &mut self.conns[c];
                if conn.tx.inflight() < conn.cc.cwnd() {
                    conn.tx.set_app_limited();
                }
                return;
            };
            let size = (rtcmp::transport::PACKET_HEADER_LEN
                + rtcmp::transport::STREAM_FRAME_HEADER_LEN
                + payload) as u64;
            let now = self.now;
            let conn = &mut self.conns[c];
            let inflight = conn.tx.inflight();
            if inflight > 0 && inflight + size > conn.cc.cwnd() {
                return;
            }
            let rate = conn
                .cc
                .outputs()
                .pacing_rate_bps
                .min(conn.rate_cap_bps)
                .max(1.0) as u64;
            if !conn.pacer.can_send(now, rate) {
                if let Some(at) = conn.pacer.release_time(rate) {
                    if conn.pacer_at.is_none_or(|p| at < p) {
                        conn.pacer_at = Some(at);
                        self.q.schedule_clamped(at, Ev::Pacer(c));
                    }
                }
                return;
            }
            let (seg, meta) = if self.is_video_conn(c) {
                let v = self.video.as_mut().expect("video conn");
                let (id, seg) = v
                    .scheduler
                    .pop_for_send(now, self.conns[c].subflow)
                    .expect("peeked");
                let e = v.scheduler.entry(id).expect("just popped");
                if e.transmissions > 1 && !seg.key_frame {
                    let age = now.saturating_since(e.first_sent.expect("sent before"));
                    v.max_nonkey_resend_age = v.max_nonkey_resend_age.max(age);
                }
                (seg, Some(id))
            } else {
                let conn = &mut self.conns[c];
                let meta = FrameMeta {
                    frame_index: conn.bulk_frames,
                    capture_ts: now,
                    key_frame: false,
                };
                let seg = packetize(
                    meta,
                    MAX_STREAM_PAYLOAD,
                    MAX_STREAM_PAYLOAD,
                    conn.bulk_offset,
                )
                .remove(0);
                conn.bulk_frames = conn.bulk_frames.wrapping_add(1);
                conn.bulk_offset += MAX_STREAM_PAYLOAD as u64;
                (seg, None)
            };
            let conn = &mut self.conns[c];
            conn.last_sent = now;
            if conn.cc.mode() == CcMode::ProbeRtt {
                conn.tx.set_app_limited();
            }
            let pn = conn.tx.on_sent(now, size as u32, meta);
            conn.pacer.on_sent(now, size as usize);
            let packet = Packet {
                flags: conn.path as u8 & 0x0f,
                number: pn,
                frames: vec![Frame::Stream(seg)],
            };
            let flow = conn.flow;
            self.flows[flow].sent_packets += 1;
            self.flows[flow].sent_bytes += size;
            self.transmit(c, packet, true);
            self.arm_loss_alarm(c);
        }
    }

    fn send_probe(&mut self, c: usize) {
        let now = self.now;
        let conn = &mut self.conns[c];
        let seg = StreamFrame {
            offset: 0,
            frame_index: 0,
            capture_ts: now,
            total_segments: 0,
            segment_index: 0,
            key_frame: false,
            payload: Default::default(),
        };
        let packet_len = (rtcmp::transport::PACKET_HEADER_LEN
            + rtcmp::transport::STREAM_FRAME_HEADER_LEN) as u32;
        conn.last_sent = now;
        let number = conn.tx.on_sent(now, packet_len, None);
        let packet = Packet {
            flags: conn.path as u8 & 0x0f,
            number,
            frames: vec![Frame::Stream(seg)],
        };
        self.transmit(c, packet, true);
        self.arm_loss_alarm(c);
    }

    fn arm_loss_alarm(&mut self, c: usize) {
        let conn = &mut self.conns[c];
        if let Some(deadline) = conn.tx.loss_deadline() {
            // loss is declared strictly after the deadline
            let at = deadline + Duration::from_micros(1);
            if conn.loss_at.is_none_or(|p| at < p) {
                conn.loss_at = Some(at);
                self.q.schedule_clamped(at, Ev::LossAlarm(c));
            }
        }
    }

    fn send_ack(&mut self, c: usize, ack: AckFrame) {
        let conn = &mut self.conns[c];
        conn.ack_at = None;
        let number = conn.ack_pn;
        conn.ack_pn = number.next();
        let packet = Packet {
            flags: conn.path as u8 & 0x0f,
            number,
            frames: vec![Frame::Ack(ack)],
        };
        self.transmit(c, packet, false);
    }

    fn send_stop_waiting(&mut self, c: usize) {
        let conn = &mut self.conns[c];
        let least_unacked = conn.tx.least_unacked();
        let number = conn.tx.on_sent_untracked();
        let packet = Packet {
            flags: conn.path as u8 & 0x0f,
            number,
            frames: vec![Frame::StopWaiting(StopWaitingFrame { least_unacked })],
        };
        self.transmit(c, packet, true);
    }

    fn on_delivered(&mut self, p: SimPacket) {
        let c = p.conn;
        let now = self.now;
        for frame in &p.packet.frames {
            match frame {
                Frame::Stream(seg) if is_probe(seg) => {
                    self.conns[c].rx.on_packet(now, p.packet.number, true, None);
                    self.schedule_ack(c);
                }
                Frame::Stream(seg) => {
                    let flow = self.conns[c].flow;
                    self.flows[flow].on_receive(now, p.sent_ts, p.size);
                    self.conns[c]
                        .rx
                        .on_packet(now, p.packet.number, true, Some(seg.frame_index));
                    if self.is_video_conn(c) {
                        let v = self.video.as_mut().expect("video conn");
                        if let Some(f) = v.sink.on_segment(now, seg) {
                            v.delay_sum_us += u128::from(f.delay().as_micros() as u64);
                        }
                    }
                    self.schedule_ack(c);
                }
                Frame::StopWaiting(sw) => {
                    let conn = &mut self.conns[c];
                    conn.rx.on_packet(now, p.packet.number, false, None);
                    let gaps = conn.rx.process_stop_waiting(sw.least_unacked);
                    if self.is_video_conn(c) {
                        let v = self.video.as_mut().expect("video conn");
                        for g in &gaps {
                            v.sink.on_abandoned_gap(g);
                        }
                    }
                }
                Frame::Ack(ack) => self.on_ack(c, ack),
            }
        }
    }

    fn schedule_ack(&mut self, c: usize) {
        let now = self.now;
        let conn = &mut self.conns[c];
        if conn.rx.should_ack(now) {
            if let Some(ack) = conn.rx.build_ack(now) {
                self.send_ack(c, ack);
            }
        } else if let Some(at) = conn.rx.ack_deadline() {
            if conn.ack_at != Some(at) {
                conn.ack_at = Some(at);
                self.q.schedule_clamped(at, Ev::AckTimer(c));
            }
        }
    }

    fn on_ack(&mut self, c: usize, ack: &AckFrame) {
        let now = self.now;
        let video = self.is_video_conn(c);
        let conn = &mut self.conns[c];
        let outcome = conn.tx.on_ack(now, ack);
        let delivered = conn.tx.delivered();
        for s in &outcome.samples {
            conn.cc.on_sample(now, s, delivered, &mut self.rng);
        }
        if conn.cc.mode() == CcMode::ProbeRtt {
            // samples taken at the ProbeRTT window say nothing about bandwidth
            conn.tx.set_app_limited();
        }
        if video {
            let (subflow, active, bw) = (conn.subflow, conn.active, conn.cc.bw_es());
            let newest = outcome.samples.last().map(|s| s.rtt);
            let v = self.video.as_mut().expect("video conn");
            if active {
                if let Some(rtt) = newest {
                    v.scheduler.update_srtt(subflow, rtt);
                }
                v.scheduler.set_bw_es(subflow, bw);
            }
            let ids = outcome
                .acked
                .iter()
                .chain(&outcome.late_acked)
                .filter_map(|p| p.meta);
            v.scheduler.on_acked(ids);
        }
        if !outcome.lost.is_empty() {
            self.on_lost(c, outcome.lost);
        }
        self.after_tx_change(c);
    }

    fn on_lost(&mut self, c: usize, lost: Vec<SentPacket<Option<SegmentId>>>) {
        if !self.is_video_conn(c) {
            return;
        }
        let now = self.now;
        let v = self.video.as_mut().expect("video conn");
        let outcome = v.scheduler.on_loss(now, lost.iter().filter_map(|p| p.meta));
        let mut wake: Vec<usize> = outcome
            .retransmit
            .iter()
            .map(|&(_, s)| v.subflows[s].conns[v.subflows[s].active])
            .collect();
        wake.sort_unstable();
        wake.dedup();
        if !outcome.given_up.is_empty() {
            self.send_stop_waiting(c);
        }
        for w in wake {
            if w != c {
                self.try_send(w);
            }
        }
    }

    /// Follow-up after acks, losses or timers: time-driven controller state,
    /// the loss alarm, and sending.
    fn after_tx_change(&mut self, c: usize) {
        let now = self.now;
        let conn = &mut self.conns[c];
        if conn.cc.mode() == CcMode::ProbeRtt {
            let inflight = conn.tx.inflight();
            conn.cc.tick(now, inflight, &mut self.rng);
            if let Some(at) = conn.cc.probe_rtt_deadline() {
                if conn.tick_at.is_none_or(|p| at < p || p <= now) && at > now {
                    conn.tick_at = Some(at);
                    self.q.schedule_clamped(at, Ev::CcTick(c));
                }
            }
        }
        self.arm_loss_alarm(c);
        self.try_send(c);
    }

    fn video_conns(&self) -> Vec<usize> {
        self.video
            .as_ref()
            .map(|v| v.subflows.iter().map(|s| s.conns[s.active]).collect())
            .unwrap_or_default()
    }

    fn on_capture(&mut self, i: u32) {
        let v = self.video.as_mut().expect("capture without video");
        v.raw.push_back(RawFrame::captured(i));
        let next = capture_time(i + 1);
        if next <= self.end {
            self.q.schedule_clamped(next, Ev::Capture(i + 1));
        }
        self.start_encode();
    }

    fn start_encode(&mut self) {
        let now = self.now;
        let v = self.video.as_mut().expect("video");
        if v.encoding.is_some() {
            return;
        }
        while let Some(raw) = v.raw.pop_front() {
            let lambda = v.scheduler.lambda_min().unwrap_or(Duration::ZERO);
            if drop_decision(&raw, now, v.encoder.d_en_hat(), lambda) == DropDecision::Drop {
                v.encoder.on_dropped();
                v.sent_frames.insert(
                    raw.frame_index,
                    SenderFrame {
                        capture_ts: raw.capture_ts,
                        dropped: true,
                        size: 0,
                        key_frame: false,
                        rate_bps: v.encoder.actual_rate(),
                    },
                );
                continue;
            }
            let f = v.encoder.encode_frame(&raw, now, &mut self.rng);
            v.sent_frames.insert(
                f.frame_index,
                SenderFrame {
                    capture_ts: f.capture_ts,
                    dropped: false,
                    size: f.size,
                    key_frame: f.key_frame,
                    rate_bps: v.encoder.actual_rate(),
                },
            );
            self.q.schedule_clamped(f.encode_done_ts, Ev::EncodeDone);
            v.encoding = Some((f, now));
            return;
        }
    }

    fn on_encode_done(&mut self) {
        let now = self.now;
        let v = self.video.as_mut().expect("video");
        let (f, started) = v.encoding.take().expect("encode in progress");
        v.encoder.on_encoded(now.saturating_since(started));
        let meta = FrameMeta {
            frame_index: f.frame_index,
            capture_ts: f.capture_ts,
            key_frame: f.key_frame,
        };
        let segments = packetize(meta, f.size, MAX_STREAM_PAYLOAD, v.offset);
        v.offset += f.size as u64;
        v.scheduler.schedule_segments(now, segments);
        for c in self.video_conns() {
            self.try_send(c);
        }
        self.start_encode();
    }

    fn on_rate_tick(&mut self) {
        let now = self.now;
        let conns = self.video_conns();
        let bws: Vec<f64> = conns.iter().map(|&c| self.conns[c].cc.bw_es()).collect();
        let v = self.video.as_mut().expect("video");
        v.encoder.set_target(RateController.tick(&bws));
        for (s, &bw) in bws.iter().enumerate() {
            v.scheduler.set_bw_es(s, bw);
            if let Selector::Ucb(pm) = &mut v.selector {
                let sf = &v.subflows[s];
                pm.on_new_bandwidth_sample(sf.first_id + sf.active, bw, now);
            }
        }
        let keys: Vec<SegmentId> = v
            .scheduler
            .entries()
            .filter(|(_, e)| e.segment.key_frame)
            .map(|(&id, _)| id)
            .collect();
        v.scheduler.evict(now);
        v.key_evictions += keys
            .iter()
            .filter(|&&id| v.scheduler.entry(id).is_none())
            .count() as u64;
        v.scheduler.assign_pending(now);
        for c in conns {
            self.try_send(c);
            let conn = &self.conns[c];
            if conn.tx.inflight() == 0 && now.saturating_since(conn.last_sent) >= PROBE_IDLE {
                self.send_probe(c);
            }
        }
        self.q.schedule_clamped(now + RATE_TICK, Ev::RateTick);
    }

    fn capacity(&self, c: usize, from: SimTime) -> f64 {
        self.net
            .route_mean_capacity(&self.conns[c].fwd, from, from + SLOT)
    }

    fn on_slot(&mut self) {
        let now = self.now;
        let v = self.video.as_ref().expect("video");
        let count = v.subflows.len();
        let (choices, scores, exploration, slot): (
            Vec<Option<usize>>,
            Vec<Vec<(usize, f64)>>,
            bool,
            u64,
        ) = match &v.selector {
            Selector::Pinned => (vec![Some(0); count], Vec::new(), false, 0),
            Selector::Oracle => {
                let picks = v
                    .subflows
                    .iter()
                    .map(|sf| {
                        let caps: Vec<f64> =
                            sf.conns.iter().map(|&c| self.capacity(c, now)).collect();
                        Some(argmax(&caps))
                    })
                    .collect();
                (picks, Vec::new(), false, 0)
            }
            Selector::Ucb(_) => {
                let v = self.video.as_mut().expect("video");
                let Selector::Ucb(pm) = &mut v.selector else {
                    unreachable!()
                };
                let d = pm.next_slot(now);
                let picks = d
                    .choices
                    .iter()
                    .enumerate()
                    .map(|(s, ch)| ch.map(|id| id - v.subflows[s].first_id))
                    .collect();
                (picks, d.scores, d.exploration, d.slot)
            }
        };
        let slot = if slot == 0 {
            now.as_micros() / SLOT.as_micros() as u64 + 1
        } else {
            slot
        };
        for (s, choice) in choices.into_iter().enumerate() {
            let v = self.video.as_ref().expect("video");
            let sf = &v.subflows[s];
            let path = choice.unwrap_or(sf.active);
            let caps: Vec<f64> = sf.conns.iter().map(|&c| self.capacity(c, now)).collect();
            let score = scores
                .get(s)
                .and_then(|row| row.iter().find(|&&(id, _)| id == sf.first_id + path))
                .map(|&(_, x)| x);
            self.selections.push(SelectionRow {
                slot,
                time: now,
                subflow: s,
                path,
                exploration,
                score,
                capacity_bps: caps[path],
                best_capacity_bps: caps.iter().copied().fold(0.0, f64::max),
            });
            self.switch_path(s, path);
        }
        let next = now + SLOT;
        if next < self.end {
            self.q.schedule_clamped(next, Ev::Slot);
        }
    }

    fn switch_path(&mut self, s: usize, path: usize) {
        let now = self.now;
        let v = self.video.as_mut().expect("video");
        let sf = &mut v.subflows[s];
        if sf.active == path {
            return;
        }
        let (old, new) = (sf.conns[sf.active], sf.conns[path]);
        sf.active = path;
        v.switches += 1;
        self.conns[old].active = false;
        self.conns[old].cc.pause(now);
        let conn = &mut self.conns[new];
        conn.active = true;
        conn.cc.resume(now);
        v.scheduler.set_active_path(s, path);
        v.scheduler.set_bw_es(s, conn.cc.bw_es());
        self.try_send(new);
    }

    fn finish(mut self) -> RunRecord {
        let mut frames = Vec::new();
        let mut summary = None;
        if let Some(v) = &mut self.video {
            v.sink.finish();
            let received: BTreeMap<u32, _> =
                v.sink.records().map(|r| (r.frame_index, *r)).collect();
            let mut s = VideoSummary::default();
            let mut dist_sum = 0.0;
            let mut psnr_sum = 0.0;
            for (&i, f) in &v.sent_frames {
                let r = received.get(&i);
                let delivered_ts = r.and_then(|r| r.delivered_ts);
                let abandoned = !f.dropped && delivered_ts.is_none();
                s.captured += 1;
                s.dropped_at_sender += u64::from(f.dropped);
                s.abandoned += u64::from(abandoned);
                if delivered_ts.is_some() {
                    s.delivered += 1;
                    let rate = f.rate_bps.max(v.quality.r0_bps + QUALITY_RATE_MARGIN_BPS);
                    let d = v.quality.distortion(rate).expect("rate floored above R_0");
                    dist_sum += d;
                    psnr_sum += rtcmp::videomodel::psnr_proxy(d).unwrap_or(0.0);
                }
                frames.push(FrameRow {
                    frame_index: i,
                    capture_ts: f.capture_ts,
                    delivered_ts,
                    size: f.size,
                    key_frame: f.key_frame,
                    dropped_at_sender: f.dropped,
                    abandoned,
                    encode_rate_bps: (!f.dropped).then_some(f.rate_bps),
                });
            }
            if s.delivered > 0 {
                s.mean_distortion = dist_sum / s.delivered as f64;
                s.mean_psnr_proxy = psnr_sum / s.delivered as f64;
                s.mean_frame_delay_ms = v.delay_sum_us as f64 / 1e3 / s.delivered as f64;
            }
            let st = v.scheduler.stats();
            s.retransmissions = st.retransmissions;
            s.key_retransmissions = st.key_retransmissions;
            s.given_up = st.given_up;
            s.age_evicted = st.age_evicted;
            s.key_age_evicted = st.key_age_evicted;
            s.max_nonkey_retransmit_age = st.max_nonkey_retransmit_age;
            s.observed_key_evictions = v.key_evictions;
            s.observed_max_nonkey_resend_age = v.max_nonkey_resend_age;
            s.path_switches = v.switches;
            summary = Some(s);
        }
        RunRecord {
            duration: self.end,
            flows: self.flows,
            cc_rows: self.cc_rows,
            selections: self.selections,
            frames,
            video: summary,
        }
    }
}

fn is_probe(seg: &StreamFrame) -> bool {
    seg.total_segments == 0
}

fn is_data(p: &Packet) -> bool {
    p.frames
        .iter()
        .any(|f| matches!(f, Frame::Stream(s) if !is_probe(s)))
}

/// Index of the largest value; the lowest index wins ties.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
