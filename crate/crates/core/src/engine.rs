//! Discrete-event core: one clock, one ordered event queue, and the glue
//! between mobility steps, the wireless medium, the MAC state machines,
//! routing, and application traffic.
//!
//! Time resolution is exact: mobility steps are scheduled at k*dt computed
//! multiplicatively, and event order is the strict lexicographic pair
//! (time, scheduling sequence). Scheduling into the past is a simulator bug
//! and faults immediately.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand_chacha::ChaCha12Rng;

use crate::aodv::{Action, AodvConfig, AodvNode, ControlMsg};
use crate::app::{self, AppConfig};
use crate::error::InputError;
use crate::mac::{backoff_draw, Band, IfQueue, MacConfig, ACK_BYTES};
use crate::metrics::{self, CounterSet, DATA_TYPE};
use crate::mobility::{MobilityConfig, MobilityModel, TrafficDemand};
use crate::phy::{PhyConfig, RxOutcome};
use crate::rng::substream;
use crate::road_network::{Point2D, RoadNetwork};
use crate::trace::{DropReason, Event as Ev, EventTrace, Layer, MobilityTrace};

/// Everything a single run needs, fully specified up front.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub network: RoadNetwork,
    pub demand: TrafficDemand,
    pub mobility: MobilityConfig,
    pub phy: PhyConfig,
    pub mac: MacConfig,
    pub aodv: AodvConfig,
    pub app: AppConfig,
    /// Explicit (src, dst) pairs; when absent, one flow per four nodes is
    /// drawn from the "flows" substream.
    pub flows: Option<Vec<(usize, usize)>>,
    pub duration_s: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), InputError> {
        self.phy.validate()?;
        self.mac.validate()?;
        self.aodv.validate()?;
        self.app.validate()?;
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(InputError::ConfigKey {
                key: "duration_s".into(),
                msg: format!("must be positive and finite, got {}", self.duration_s),
            });
        }
        if let Some(flows) = &self.flows {
            app::validate_flows(self.demand.vehicles.len(), flows)?;
        }
        Ok(())
    }
}

/// The product of one run.
#[derive(Debug)]
pub struct RunOutput {
    pub event_trace: String,
    pub mobility_trace: String,
    pub counters: CounterSet,
    pub flows: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
enum EventKind {
    MobilityStep { k: u64 },
    AppSend { flow: usize, pkt: u64 },
    BackoffDone { node: usize, generation: u64 },
    FrameEnd { tx: u64 },
    AckStart { from: usize, to: usize, acked_tx: u64 },
    AckTimeout { node: usize, generation: u64 },
    AodvTimer { node: usize, dest: usize, token: u64 },
}

#[derive(Debug)]
struct EventEntry {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for EventEntry {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl Eq for EventEntry {}

impl Ord for EventEntry {
    // inverted so the std max-heap pops the earliest (time, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}
impl PartialOrd for EventEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum FrameKind {
    Data { uid: u64 },
    Control(ControlMsg),
    Ack { acked_tx: u64 },
}

#[derive(Debug, Clone, PartialEq)]
struct Frame {
    kind: FrameKind,
    pkt_id: u64,
    /// MAC destination; None broadcasts.
    dst: Option<usize>,
    bytes: u32,
}

impl Frame {
    fn type_name(&self) -> &'static str {
        match &self.kind {
            FrameKind::Data { .. } => DATA_TYPE,
            FrameKind::Control(m) => m.type_name(),
            FrameKind::Ack { .. } => "ack",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum MacState {
    Idle,
    /// Has a frame but the medium is busy; waiting for it to clear.
    Deferring,
    /// Counting down; fires BackoffDone at `until` unless frozen first.
    Backoff { until: f64 },
    Transmitting,
    AwaitingAck { tx: u64 },
}

#[derive(Debug)]
struct MacNode {
    ifq: IfQueue<Frame>,
    current: Option<Frame>,
    state: MacState,
    cw: u32,
    retries: u32,
    /// Backoff slots still owed for the current attempt.
    slots: u32,
    /// Bumped on every state change; events carrying an older value are
    /// stale and ignored.
    generation: u64,
}

impl MacNode {
    fn new(cfg: &MacConfig) -> Self {
        MacNode {
            ifq: IfQueue::new(cfg.ifq_len),
            current: None,
            state: MacState::Idle,
            cw: cfg.cw_min,
            retries: 0,
            slots: 0,
            generation: 0,
        }
    }
}

#[derive(Debug)]
struct TxRecord {
    sender: usize,
    sender_pos: Point2D,
    frame: Frame,
    /// Senders (and their frozen positions) of every transmission that
    /// overlapped this one in time.
    interferers: Vec<(usize, Point2D)>,
}

#[derive(Debug)]
struct PacketMeta {
    src: usize,
    dst: usize,
    ttl: u32,
}

pub struct World {
    mobility: MobilityModel,
    phy: PhyConfig,
    mac_cfg: MacConfig,
    app_cfg: AppConfig,
    duration: f64,
    flows: Vec<(usize, usize)>,
    clock: f64,
    heap: BinaryHeap<EventEntry>,
    next_seq: u64,
    next_pkt_id: u64,
    next_tx_id: u64,
    steps_total: u64,
    macs: Vec<MacNode>,
    aodv: Vec<AodvNode>,
    rng_mac: ChaCha12Rng,
    active: BTreeMap<u64, TxRecord>,
    pkts: BTreeMap<u64, PacketMeta>,
    delivered: BTreeSet<u64>,
    /// Per node: (transmitter, pkt id) pairs already accepted, so MAC-level
    /// retries of an acknowledged frame are not processed twice.
    seen: Vec<BTreeSet<(usize, u64)>>,
    positions: Vec<Point2D>,
    events: EventTrace,
    mob_trace: MobilityTrace,
}

impl World {
    pub fn new(sc: &Scenario) -> Result<World, InputError> {
        sc.validate()?;
        let mobility = MobilityModel::new(&sc.network, &sc.demand, sc.mobility.clone(), sc.seed)?;
        let n = mobility.n_vehicles();
        let flows = match &sc.flows {
            Some(f) => f.clone(),
            None => {
                let k = app::default_flow_count(n);
                let mut rng = substream(sc.seed, "flows");
                app::select_flows(n, k, &mut rng)?
            }
        };
        let positions = (0..n).map(|i| mobility.position(i)).collect();
        let mut mob_trace = MobilityTrace::new();
        mob_trace.log_step(0.0, &mobility.snapshot());
        let dt = mobility.dt();
        let steps_total = (sc.duration_s / dt + 1e-9).floor() as u64;

        let mut w = World {
            mobility,
            phy: sc.phy.clone(),
            mac_cfg: sc.mac.clone(),
            app_cfg: sc.app.clone(),
            duration: sc.duration_s,
            flows,
            clock: 0.0,
            heap: BinaryHeap::new(),
            next_seq: 0,
            next_pkt_id: 0,
            next_tx_id: 0,
            steps_total,
            macs: (0..n).map(|_| MacNode::new(&sc.mac)).collect(),
            aodv: (0..n).map(|i| AodvNode::new(i, sc.aodv.clone())).collect(),
            rng_mac: substream(sc.seed, "mac"),
            active: BTreeMap::new(),
            pkts: BTreeMap::new(),
            delivered: BTreeSet::new(),
            seen: vec![BTreeSet::new(); n],
            positions,
            events: EventTrace::new(),
            mob_trace,
        };
        if steps_total >= 1 {
            w.schedule(dt, EventKind::MobilityStep { k: 1 });
        }
        for f in 0..w.flows.len() {
            let t0 = w.app_cfg.send_time(0);
            if t0 < w.duration && w.app_cfg.max_packets > 0 {
                w.schedule(t0, EventKind::AppSend { flow: f, pkt: 0 });
            }
        }
        Ok(w)
    }

    pub fn now(&self) -> f64 {
        self.clock
    }

    /// Antenna position from the most recent completed mobility step;
    /// piecewise-constant between steps.
    pub fn position_of(&self, node: usize) -> Option<Point2D> {
        self.positions.get(node).copied()
    }

    /// Dispatch every event up to and including `t_stop`.
    pub fn advance_until(&mut self, t_stop: f64) {
        while let Some(head) = self.heap.peek() {
            if head.time > t_stop {
                break;
            }
            let ev = self.heap.pop().unwrap();
            assert!(
                ev.time >= self.clock,
                "event queue went backwards: {} after {}",
                ev.time,
                self.clock
            );
            self.clock = ev.time;
            self.dispatch(ev.kind);
        }
        if t_stop > self.clock {
            self.clock = t_stop;
        }
    }

    /// Run out the clock and settle the books.
    pub fn finish(mut self) -> RunOutput {
        self.advance_until(self.duration);
        let event_trace = self.events.into_string();
        let counters = metrics::tally(&event_trace, &self.flows)
            .expect("run produced an inconsistent event trace");
        RunOutput {
            event_trace,
            mobility_trace: self.mob_trace.into_string(),
            counters,
            flows: self.flows,
        }
    }

    fn schedule(&mut self, time: f64, kind: EventKind) {
        assert!(
            time >= self.clock,
            "event scheduled into the past: {time} < {}",
            self.clock
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(EventEntry { time, seq, kind });
    }

    fn alloc_pkt_id(&mut self) -> u64 {
        let id = self.next_pkt_id;
        self.next_pkt_id += 1;
        id
    }

    fn dispatch(&mut self, kind: EventKind) {
        match kind {
            EventKind::MobilityStep { k } => self.on_mobility_step(k),
            EventKind::AppSend { flow, pkt } => self.on_app_send(flow, pkt),
            EventKind::BackoffDone { node, generation } => {
                if self.macs[node].generation == generation {
                    self.start_transmission(node);
                }
            }
            EventKind::FrameEnd { tx } => self.on_frame_end(tx),
            EventKind::AckStart { from, to, acked_tx } => {
                let frame = Frame {
                    kind: FrameKind::Ack { acked_tx },
                    pkt_id: acked_tx,
                    dst: Some(to),
                    bytes: ACK_BYTES,
                };
                let dur = self.mac_cfg.ack_duration_s();
                self.begin_tx(from, frame, dur);
            }
            EventKind::AckTimeout { node, generation } => {
                if self.macs[node].generation == generation {
                    self.retry_current(node);
                }
            }
            EventKind::AodvTimer { node, dest, token } => {
                let now = self.clock;
                let actions = self.aodv[node].discovery_timeout(dest, token, now);
                self.process_actions(node, actions, None);
            }
        }
    }

    fn on_mobility_step(&mut self, k: u64) {
        self.mobility.step();
        for i in 0..self.positions.len() {
            self.positions[i] = self.mobility.position(i);
        }
        let t = self.mobility.time();
        let snap = self.mobility.snapshot();
        self.mob_trace.log_step(t, &snap);
        if k + 1 <= self.steps_total {
            let dt = self.mobility.dt();
            self.schedule((k + 1) as f64 * dt, EventKind::MobilityStep { k: k + 1 });
        }
    }

    fn on_app_send(&mut self, flow: usize, pkt: u64) {
        let (src, dst) = self.flows[flow];
        let uid = self.alloc_pkt_id();
        self.pkts.insert(
            uid,
            PacketMeta { src, dst, ttl: self.aodv[src].net_diameter() },
        );
        self.events.log(
            self.clock,
            Ev::Send,
            src,
            Layer::Agt,
            uid,
            DATA_TYPE,
            self.app_cfg.packet_size_bytes,
            None,
        );
        let now = self.clock;
        let actions = self.aodv[src].route_data(uid, dst, now);
        self.process_actions(src, actions, None);

        let next = pkt + 1;
        if next < self.app_cfg.max_packets {
            let t = self.app_cfg.send_time(next);
            if t < self.duration {
                self.schedule(t, EventKind::AppSend { flow, pkt: next });
            }
        }
    }

    /// Carry out what the routing layer asked for.
    fn process_actions(&mut self, node: usize, actions: Vec<Action>, inbound_pkt: Option<u64>) {
        for action in actions {
            match action {
                Action::Broadcast(msg) => self.send_control(node, msg, None),
                Action::Unicast { msg, next_hop } => self.send_control(node, msg, Some(next_hop)),
                Action::ForwardData { uid, next_hop } => {
                    let wire = self.app_cfg.wire_bytes();
                    if self.pkts[&uid].src != node {
                        self.events.log(
                            self.clock,
                            Ev::Forward,
                            node,
                            Layer::Rtr,
                            uid,
                            DATA_TYPE,
                            wire,
                            None,
                        );
                    }
                    let frame = Frame {
                        kind: FrameKind::Data { uid },
                        pkt_id: uid,
                        dst: Some(next_hop),
                        bytes: wire,
                    };
                    self.enqueue_frame(node, frame);
                }
                Action::DropNoRoute { uid } => {
                    self.events.log(
                        self.clock,
                        Ev::Drop,
                        node,
                        Layer::Rtr,
                        uid,
                        DATA_TYPE,
                        self.app_cfg.wire_bytes(),
                        Some(DropReason::Nrte),
                    );
                }
                Action::DiscardControl { msg } => {
                    let id = inbound_pkt.unwrap_or_else(|| self.alloc_pkt_id());
                    self.events.log(
                        self.clock,
                        Ev::Drop,
                        node,
                        Layer::Rtr,
                        id,
                        msg.type_name(),
                        msg.wire_bytes(),
                        Some(DropReason::Nrte),
                    );
                }
                Action::StartTimer { dest, token, delay_s } => {
                    self.schedule(
                        self.clock + delay_s,
                        EventKind::AodvTimer { node, dest, token },
                    );
                }
            }
        }
    }

    fn send_control(&mut self, node: usize, msg: ControlMsg, dst: Option<usize>) {
        let originated = match &msg {
            ControlMsg::Rreq(m) => m.orig == node,
            ControlMsg::Rrep(m) => m.hop_count == 0,
            ControlMsg::Rerr(_) => true,
        };
        let pkt_id = self.alloc_pkt_id();
        self.events.log(
            self.clock,
            if originated { Ev::Send } else { Ev::Forward },
            node,
            Layer::Rtr,
            pkt_id,
            msg.type_name(),
            msg.wire_bytes(),
            None,
        );
        let bytes = msg.wire_bytes();
        let frame = Frame { kind: FrameKind::Control(msg), pkt_id, dst, bytes };
        self.enqueue_frame(node, frame);
    }

    fn enqueue_frame(&mut self, node: usize, frame: Frame) {
        let band = match frame.kind {
            FrameKind::Control(_) => Band::Control,
            _ => Band::Data,
        };
        match self.macs[node].ifq.enqueue(frame, band) {
            Ok(()) => self.kick(node),
            Err(rejected) => {
                self.events.log(
                    self.clock,
                    Ev::Drop,
                    node,
                    Layer::Ifq,
                    rejected.pkt_id,
                    rejected.type_name(),
                    rejected.bytes,
                    Some(DropReason::Ifq),
                );
            }
        }
    }

    /// If the node is idle and has queued work, pull a frame and contend.
    fn kick(&mut self, node: usize) {
        let mac = &mut self.macs[node];
        if mac.state != MacState::Idle || mac.current.is_some() {
            return;
        }
        if let Some((frame, _band)) = mac.ifq.dequeue() {
            mac.current = Some(frame);
            mac.retries = 0;
            self.begin_contention(node, true);
        }
    }

    /// Enter the backoff procedure. A fresh attempt draws new slots; a
    /// resumed one spends what is left from the freeze.
    fn begin_contention(&mut self, node: usize, fresh: bool) {
        if fresh {
            self.macs[node].slots = backoff_draw(self.macs[node].cw, &mut self.rng_mac);
        }
        let busy = self.medium_busy(node);
        let mac = &mut self.macs[node];
        mac.generation += 1;
        if busy {
            mac.state = MacState::Deferring;
        } else {
            let until = self.clock
                + self.mac_cfg.difs_s
                + f64::from(mac.slots) * self.mac_cfg.slot_s;
            mac.state = MacState::Backoff { until };
            let generation = mac.generation;
            self.schedule(until, EventKind::BackoffDone { node, generation });
        }
    }

    fn medium_busy(&self, node: usize) -> bool {
        let here = self.positions[node];
        self.active.values().any(|t| {
            t.sender == node
                || self.phy.received_power_w(t.sender_pos.distance(&here)) >= self.phy.cs_thresh_w
        })
    }

    fn start_transmission(&mut self, node: usize) {
        let frame = self.macs[node]
            .current
            .clone()
            .expect("backoff completed with no frame");
        let basic_rate = frame.dst.is_none();
        let dur = self.mac_cfg.tx_duration_s(frame.bytes, basic_rate);
        self.macs[node].state = MacState::Transmitting;
        self.macs[node].generation += 1;
        self.begin_tx(node, frame, dur);
    }

    /// Put a transmission on the air: record mutual interference with
    /// everything already active and freeze backoffs that now sense energy.
    fn begin_tx(&mut self, sender: usize, frame: Frame, duration: f64) {
        let tx_id = self.next_tx_id;
        self.next_tx_id += 1;
        let sender_pos = self.positions[sender];
        let mut interferers = Vec::new();
        for rec in self.active.values_mut() {
            interferers.push((rec.sender, rec.sender_pos));
            rec.interferers.push((sender, sender_pos));
        }
        self.active.insert(tx_id, TxRecord { sender, sender_pos, frame, interferers });
        self.schedule(self.clock + duration, EventKind::FrameEnd { tx: tx_id });

        for n in 0..self.macs.len() {
            let senses = n == sender
                || self
                    .phy
                    .received_power_w(sender_pos.distance(&self.positions[n]))
                    >= self.phy.cs_thresh_w;
            if !senses {
                continue;
            }
            if let MacState::Backoff { until } = self.macs[n].state {
                // a countdown ending exactly now still fires: nodes whose
                // slots elapse in the same instant collide, as they should
                if until > self.clock {
                    let remaining =
                        ((until - self.clock) / self.mac_cfg.slot_s).ceil() as u32;
                    let mac = &mut self.macs[n];
                    mac.slots = mac.slots.min(remaining);
                    mac.state = MacState::Deferring;
                    mac.generation += 1;
                }
            }
        }
    }

    fn on_frame_end(&mut self, tx: u64) {
        let rec = self.active.remove(&tx).expect("frame end without record");

        // reception outcomes at every node that can hear it
        for r in 0..self.macs.len() {
            if r == rec.sender {
                continue;
            }
            // half duplex: a node that transmitted during the frame is deaf
            if rec.interferers.iter().any(|&(s, _)| s == r) {
                continue;
            }
            let here = self.positions[r];
            let signal = self.phy.received_power_w(rec.sender_pos.distance(&here));
            if signal < self.phy.rx_thresh_w {
                continue;
            }
            let interference = rec
                .interferers
                .iter()
                .map(|(_, pos)| self.phy.received_power_w(pos.distance(&here)));
            match self.phy.reception_outcome(signal, interference) {
                RxOutcome::Delivered => {
                    if rec.frame.dst.is_none_or(|d| d == r) {
                        self.receive_frame(r, &rec, tx);
                    }
                }
                RxOutcome::Collision => {
                    if rec.frame.dst.is_none() {
                        self.events.log(
                            self.clock,
                            Ev::Drop,
                            r,
                            Layer::Mac,
                            rec.frame.pkt_id,
                            rec.frame.type_name(),
                            rec.frame.bytes,
                            Some(DropReason::Col),
                        );
                    }
                }
                RxOutcome::TooWeak => {}
            }
        }

        // sender-side completion
        match &rec.frame.kind {
            FrameKind::Ack { .. } => {}
            _ if rec.frame.dst.is_none() => self.finish_current(rec.sender, false),
            _ => {
                let mac = &mut self.macs[rec.sender];
                mac.state = MacState::AwaitingAck { tx };
                mac.generation += 1;
                let generation = mac.generation;
                self.schedule(
                    self.clock + self.mac_cfg.ack_timeout_s(),
                    EventKind::AckTimeout { node: rec.sender, generation },
                );
            }
        }

        // medium may have cleared: deferring nodes resume their countdown
        for n in 0..self.macs.len() {
            if self.macs[n].state == MacState::Deferring && !self.medium_busy(n) {
                self.begin_contention(n, false);
            }
        }
    }

    /// A frame addressed to (or heard by, for broadcast) node `r` survived
    /// the channel.
    fn receive_frame(&mut self, r: usize, rec: &TxRecord, tx: u64) {
        let prev_hop = rec.sender;
        match &rec.frame.kind {
            FrameKind::Ack { acked_tx } => {
                if self.macs[r].state == (MacState::AwaitingAck { tx: *acked_tx }) {
                    self.finish_current(r, true);
                }
            }
            FrameKind::Data { uid } => {
                // every unicast reception is acknowledged, duplicates too
                self.schedule(
                    self.clock + self.mac_cfg.sifs_s,
                    EventKind::AckStart { from: r, to: prev_hop, acked_tx: tx },
                );
                if !self.seen[r].insert((prev_hop, rec.frame.pkt_id)) {
                    return;
                }
                let uid = *uid;
                let (dst, ttl) = {
                    let meta = &self.pkts[&uid];
                    (meta.dst, meta.ttl)
                };
                if r == dst {
                    if self.delivered.insert(uid) {
                        self.events.log(
                            self.clock,
                            Ev::Receive,
                            r,
                            Layer::Agt,
                            uid,
                            DATA_TYPE,
                            self.app_cfg.packet_size_bytes,
                            None,
                        );
                    }
                    return;
                }
                if ttl <= 1 {
                    self.events.log(
                        self.clock,
                        Ev::Drop,
                        r,
                        Layer::Rtr,
                        uid,
                        DATA_TYPE,
                        rec.frame.bytes,
                        Some(DropReason::Ttl),
                    );
                    return;
                }
                self.pkts.get_mut(&uid).unwrap().ttl = ttl - 1;
                let now = self.clock;
                let actions = self.aodv[r].route_data(uid, dst, now);
                self.process_actions(r, actions, Some(rec.frame.pkt_id));
            }
            FrameKind::Control(msg) => {
                if rec.frame.dst.is_some() {
                    self.schedule(
                        self.clock + self.mac_cfg.sifs_s,
                        EventKind::AckStart { from: r, to: prev_hop, acked_tx: tx },
                    );
                }
                if !self.seen[r].insert((prev_hop, rec.frame.pkt_id)) {
                    return;
                }
                let now = self.clock;
                let actions = match msg {
                    ControlMsg::Rreq(m) => self.aodv[r].process_rreq(m, prev_hop, now),
                    ControlMsg::Rrep(m) => self.aodv[r].process_rrep(m, prev_hop, now),
                    ControlMsg::Rerr(m) => self.aodv[r].process_rerr(m, prev_hop, now),
                };
                self.process_actions(r, actions, Some(rec.frame.pkt_id));
            }
        }
    }

    /// The current frame is done with, successfully or not.
    fn finish_current(&mut self, node: usize, acked: bool) {
        let mac = &mut self.macs[node];
        if acked {
            mac.cw = self.mac_cfg.cw_min;
        }
        mac.current = None;
        mac.retries = 0;
        mac.state = MacState::Idle;
        mac.generation += 1;
        self.kick(node);
    }

    /// No ACK arrived: back off harder and try again, or give up and treat
    /// the next hop as gone.
    fn retry_current(&mut self, node: usize) {
        self.macs[node].retries += 1;
        if self.macs[node].retries <= self.mac_cfg.retry_limit {
            self.macs[node].cw = self.mac_cfg.next_cw(self.macs[node].cw);
            self.begin_contention(node, true);
            return;
        }
        let frame = self.macs[node].current.take().expect("retry with no frame");
        let lost = frame.dst.expect("retry exhausted on a broadcast");
        self.events.log(
            self.clock,
            Ev::Drop,
            node,
            Layer::Mac,
            frame.pkt_id,
            frame.type_name(),
            frame.bytes,
            Some(DropReason::Ret),
        );
        // everything else queued toward the dead hop dies with it
        let purged = self.macs[node].ifq.drain_matching(|f| f.dst == Some(lost));
        for f in purged {
            self.events.log(
                self.clock,
                Ev::Drop,
                node,
                Layer::Ifq,
                f.pkt_id,
                f.type_name(),
                f.bytes,
                Some(DropReason::Lnk),
            );
        }
        let mac = &mut self.macs[node];
        mac.cw = self.mac_cfg.cw_min;
        mac.retries = 0;
        mac.state = MacState::Idle;
        mac.generation += 1;
        let now = self.clock;
        let actions = self.aodv[node].handle_link_break(lost, now);
        self.process_actions(node, actions, None);
        self.kick(node);
    }
}

/// Run a complete scenario: validation first, then strictly ordered event
/// execution until the configured duration.
pub fn run(sc: &Scenario) -> Result<RunOutput, InputError> {
    let world = World::new(sc)?;
    Ok(world.finish())
}
