//! On-demand distance-vector routing: expanding-ring route discovery,
//! route replies, error propagation on link break, sequence-number
//! freshness, and data buffering while discovery runs.
//!
//! Each node's state machine is a plain struct; methods consume a received
//! message or timer and return the actions the caller must carry out
//! (transmissions, forwards, drops, timer arming). That keeps the protocol
//! logic synchronous and directly testable.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::InputError;

/// Payload sizes on the wire, before the IP header.
pub const RREQ_BYTES: u32 = 24;
pub const RREP_BYTES: u32 = 20;
pub const RERR_BASE_BYTES: u32 = 4;
pub const RERR_PER_DEST_BYTES: u32 = 8;
pub const IP_HEADER_BYTES: u32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct AodvConfig {
    /// How long a route stays fresh after last use, seconds.
    pub active_route_timeout_s: f64,
    /// One-hop traversal estimate used for discovery timeouts, seconds.
    pub node_traversal_time_s: f64,
    /// Network diameter in hops; final ring TTL.
    pub net_diameter: u32,
    /// Extra full-diameter attempts after the expanding ring.
    pub rreq_retries: u32,
    pub ttl_start: u32,
    pub ttl_increment: u32,
    pub ttl_threshold: u32,
    /// Data packets buffered per destination during discovery.
    pub buffer_per_dest: usize,
}

impl Default for AodvConfig {
    fn default() -> Self {
        AodvConfig {
            active_route_timeout_s: 3.0,
            node_traversal_time_s: 0.040,
            net_diameter: 35,
            rreq_retries: 2,
            ttl_start: 1,
            ttl_increment: 2,
            ttl_threshold: 7,
            buffer_per_dest: 64,
        }
    }
}

impl AodvConfig {
    pub fn validate(&self) -> Result<(), InputError> {
        if !(self.active_route_timeout_s > 0.0) || !(self.node_traversal_time_s > 0.0) {
            return Err(InputError::ConfigKey {
                key: "aodv.active_route_timeout_s".into(),
                msg: "timeouts must be positive".into(),
            });
        }
        if self.ttl_start == 0 || self.net_diameter == 0 || self.buffer_per_dest == 0 {
            return Err(InputError::ConfigKey {
                key: "aodv.ttl_start".into(),
                msg: "ttl_start, net_diameter and buffer_per_dest must be positive".into(),
            });
        }
        Ok(())
    }

    /// TTL used by the k-th discovery attempt (0-based): the expanding ring
    /// up to the threshold, then the full diameter for the remaining tries.
    pub fn ttl_for_attempt(&self, attempt: u32) -> u32 {
        let ttl = self.ttl_start + attempt * self.ttl_increment;
        if ttl <= self.ttl_threshold {
            ttl
        } else {
            self.net_diameter
        }
    }

    /// Total discovery attempts before giving up.
    pub fn max_attempts(&self) -> u32 {
        let ring = if self.ttl_threshold >= self.ttl_start {
            (self.ttl_threshold - self.ttl_start) / self.ttl_increment + 1
        } else {
            0
        };
        ring + 1 + self.rreq_retries
    }

    /// Wait after sending a RREQ with the given TTL before retrying.
    pub fn ring_wait_s(&self, ttl: u32) -> f64 {
        2.0 * self.node_traversal_time_s * f64::from(ttl + 2)
    }
}

/// Signed circular comparison: is `a` newer than `b`?
pub fn seq_newer(a: u32, b: u32) -> bool {
    (a.wrapping_sub(b) as i32) > 0
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteEntry {
    pub next_hop: usize,
    pub hop_count: u32,
    pub dest_seq: u32,
    /// False until a sequence number has been learned for this destination.
    pub valid_seq: bool,
    pub valid: bool,
    /// Absolute expiry time, seconds.
    pub lifetime: f64,
    pub precursors: BTreeSet<usize>,
}

/// True when a candidate (seq, hops) should replace the stored entry.
pub fn fresher(candidate_seq: u32, candidate_hops: u32, entry: &RouteEntry) -> bool {
    if !entry.valid_seq {
        return true;
    }
    if seq_newer(candidate_seq, entry.dest_seq) {
        return true;
    }
    candidate_seq == entry.dest_seq
        && (candidate_hops < entry.hop_count || !entry.valid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RreqMessage {
    pub orig: usize,
    pub orig_seq: u32,
    pub dest: usize,
    /// Last sequence number the originator knew for dest, if any.
    pub dest_seq: Option<u32>,
    pub rreq_id: u32,
    pub hop_count: u32,
    pub ttl: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrepMessage {
    pub orig: usize,
    pub dest: usize,
    pub dest_seq: u32,
    pub hop_count: u32,
    /// Remaining validity the reply advertises, seconds.
    pub lifetime_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerrMessage {
    pub unreachable: Vec<(usize, u32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlMsg {
    Rreq(RreqMessage),
    Rrep(RrepMessage),
    Rerr(RerrMessage),
}

impl ControlMsg {
    /// Size handed to the MAC, including the IP header.
    pub fn wire_bytes(&self) -> u32 {
        let payload = match self {
            ControlMsg::Rreq(_) => RREQ_BYTES,
            ControlMsg::Rrep(_) => RREP_BYTES,
            ControlMsg::Rerr(m) => {
                RERR_BASE_BYTES + RERR_PER_DEST_BYTES * m.unreachable.len() as u32
            }
        };
        payload + IP_HEADER_BYTES
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            ControlMsg::Rreq(_) => "rreq",
            ControlMsg::Rrep(_) => "rrep",
            ControlMsg::Rerr(_) => "rerr",
        }
    }
}

/// What the caller must do after feeding an event into the node.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Broadcast a control message to all neighbors.
    Broadcast(ControlMsg),
    /// Unicast a control message to a specific next hop.
    Unicast { msg: ControlMsg, next_hop: usize },
    /// Hand a data packet to the MAC toward its next hop.
    ForwardData { uid: u64, next_hop: usize },
    /// Drop a data packet: no route could be found for it.
    DropNoRoute { uid: u64 },
    /// A received control message was unusable and discarded.
    DiscardControl { msg: ControlMsg },
    /// Arm the discovery retry timer for `dest`; deliver it back via
    /// `discovery_timeout(dest, token)` after `delay_s`.
    StartTimer { dest: usize, token: u64, delay_s: f64 },
}

#[derive(Debug)]
struct Discovery {
    attempt: u32,
    token: u64,
}

#[derive(Debug)]
pub struct AodvNode {
    id: usize,
    cfg: AodvConfig,
    seq: u32,
    rreq_id: u32,
    routes: BTreeMap<usize, RouteEntry>,
    seen_rreqs: BTreeSet<(usize, u32)>,
    buffered: BTreeMap<usize, VecDeque<u64>>,
    pending: BTreeMap<usize, Discovery>,
    next_token: u64,
}

impl AodvNode {
    pub fn new(id: usize, cfg: AodvConfig) -> Self {
        AodvNode {
            id,
            cfg,
            seq: 0,
            rreq_id: 0,
            routes: BTreeMap::new(),
            seen_rreqs: BTreeSet::new(),
            buffered: BTreeMap::new(),
            pending: BTreeMap::new(),
            next_token: 0,
        }
    }

    pub fn route(&self, dest: usize) -> Option<&RouteEntry> {
        self.routes.get(&dest)
    }

    /// Hop budget given to data packets at origination.
    pub fn net_diameter(&self) -> u32 {
        self.cfg.net_diameter
    }

    pub fn buffered_count(&self, dest: usize) -> usize {
        self.buffered.get(&dest).map_or(0, VecDeque::len)
    }

    /// Valid next hop toward `dest`, expiring the entry lazily.
    fn lookup(&mut self, dest: usize, now: f64) -> Option<usize> {
        let entry = self.routes.get_mut(&dest)?;
        if !entry.valid {
            return None;
        }
        if entry.lifetime < now {
            entry.valid = false;
            entry.dest_seq = entry.dest_seq.wrapping_add(1);
            return None;
        }
        Some(entry.next_hop)
    }

    fn refresh(&mut self, dest: usize, now: f64) {
        let art = self.cfg.active_route_timeout_s;
        if let Some(entry) = self.routes.get_mut(&dest) {
            entry.lifetime = entry.lifetime.max(now + art);
        }
    }

    /// Install or improve a route using the freshness rule. `seq` of None
    /// means the teller did not know a sequence number.
    fn update_route(
        &mut self,
        dest: usize,
        next_hop: usize,
        hop_count: u32,
        seq: Option<u32>,
        lifetime: f64,
    ) {
        if dest == self.id {
            return;
        }
        match self.routes.get_mut(&dest) {
            Some(entry) => {
                let take = match seq {
                    Some(s) => fresher(s, hop_count, entry),
                    // no sequence knowledge: only fill gaps, never downgrade
                    None => !entry.valid || (!entry.valid_seq && hop_count <= entry.hop_count),
                };
                if take {
                    entry.next_hop = next_hop;
                    entry.hop_count = hop_count;
                    if let Some(s) = seq {
                        entry.dest_seq = s;
                        entry.valid_seq = true;
                    }
                    entry.valid = true;
                    entry.lifetime = entry.lifetime.max(lifetime);
                } else if entry.valid && entry.next_hop == next_hop {
                    entry.lifetime = entry.lifetime.max(lifetime);
                }
            }
            None => {
                self.routes.insert(
                    dest,
                    RouteEntry {
                        next_hop,
                        hop_count,
                        dest_seq: seq.unwrap_or(0),
                        valid_seq: seq.is_some(),
                        valid: true,
                        lifetime,
                        precursors: BTreeSet::new(),
                    },
                );
            }
        }
    }

    fn originate_rreq(&mut self, dest: usize, attempt: u32) -> Vec<Action> {
        self.seq = self.seq.wrapping_add(1);
        self.rreq_id = self.rreq_id.wrapping_add(1);
        // own discoveries count as seen so the flood cannot loop back
        self.seen_rreqs.insert((self.id, self.rreq_id));
        let known_seq = self
            .routes
            .get(&dest)
            .filter(|e| e.valid_seq)
            .map(|e| e.dest_seq);
        let ttl = self.cfg.ttl_for_attempt(attempt);
        let token = self.next_token;
        self.next_token += 1;
        self.pending.insert(dest, Discovery { attempt, token });
        vec![
            Action::Broadcast(ControlMsg::Rreq(RreqMessage {
                orig: self.id,
                orig_seq: self.seq,
                dest,
                dest_seq: known_seq,
                rreq_id: self.rreq_id,
                hop_count: 0,
                ttl,
            })),
            Action::StartTimer {
                dest,
                token,
                delay_s: self.cfg.ring_wait_s(ttl),
            },
        ]
    }

    fn flush_buffer(&mut self, dest: usize, now: f64) -> Vec<Action> {
        let mut actions = Vec::new();
        if let Some(mut queued) = self.buffered.remove(&dest) {
            while let Some(uid) = queued.pop_front() {
                match self.lookup(dest, now) {
                    Some(next_hop) => {
                        self.refresh(dest, now);
                        actions.push(Action::ForwardData { uid, next_hop });
                    }
                    None => actions.push(Action::DropNoRoute { uid }),
                }
            }
        }
        actions
    }

    /// Route a data packet originated here or received for forwarding.
    pub fn route_data(&mut self, uid: u64, dest: usize, now: f64) -> Vec<Action> {
        if let Some(next_hop) = self.lookup(dest, now) {
            self.refresh(dest, now);
            return vec![Action::ForwardData { uid, next_hop }];
        }
        let mut actions = Vec::new();
        let queue = self.buffered.entry(dest).or_default();
        if queue.len() >= self.cfg.buffer_per_dest {
            let evicted = queue.pop_front().unwrap();
            actions.push(Action::DropNoRoute { uid: evicted });
        }
        queue.push_back(uid);
        if !self.pending.contains_key(&dest) {
            actions.extend(self.originate_rreq(dest, 0));
        }
        actions
    }

    /// The discovery retry timer fired. Stale tokens are ignored.
    pub fn discovery_timeout(&mut self, dest: usize, token: u64, now: f64) -> Vec<Action> {
        match self.pending.get(&dest) {
            Some(d) if d.token == token => {}
            _ => return Vec::new(),
        }
        // a reply may have landed through an unrelated exchange
        if self.lookup(dest, now).is_some() {
            self.pending.remove(&dest);
            return self.flush_buffer(dest, now);
        }
        let attempt = self.pending[&dest].attempt + 1;
        if attempt < self.cfg.max_attempts() {
            self.originate_rreq(dest, attempt)
        } else {
            self.pending.remove(&dest);
            self.flush_buffer(dest, now)
        }
    }

    pub fn process_rreq(&mut self, msg: &RreqMessage, prev_hop: usize, now: f64) -> Vec<Action> {
        if !self.seen_rreqs.insert((msg.orig, msg.rreq_id)) {
            return Vec::new();
        }
        let art = self.cfg.active_route_timeout_s;
        // the broadcast itself proves prev_hop is a neighbor
        self.update_route(prev_hop, prev_hop, 1, None, now + art);
        if msg.orig != self.id {
            self.update_route(msg.orig, prev_hop, msg.hop_count + 1, Some(msg.orig_seq), now + art);
        }

        if msg.dest == self.id {
            // answering as the destination: advance own sequence number
            if let Some(s) = msg.dest_seq {
                if seq_newer(s, self.seq) {
                    self.seq = s;
                }
            }
            self.seq = self.seq.wrapping_add(1);
            let rrep = RrepMessage {
                orig: msg.orig,
                dest: self.id,
                dest_seq: self.seq,
                hop_count: 0,
                lifetime_s: art,
            };
            let next_hop = match self.lookup(msg.orig, now) {
                Some(h) => h,
                None => prev_hop,
            };
            return vec![Action::Unicast { msg: ControlMsg::Rrep(rrep), next_hop }];
        }

        // an intermediate node with a fresh-enough valid route answers
        let can_answer = {
            let usable = self.lookup(msg.dest, now).is_some();
            usable
                && self.routes.get(&msg.dest).is_some_and(|e| {
                    e.valid_seq
                        && msg.dest_seq.is_none_or(|s| !seq_newer(s, e.dest_seq))
                })
        };
        if can_answer {
            let (dest_seq, hop_count, lifetime, fwd_next) = {
                let e = &self.routes[&msg.dest];
                (e.dest_seq, e.hop_count, e.lifetime, e.next_hop)
            };
            let reverse_next = self.lookup(msg.orig, now).unwrap_or(prev_hop);
            if let Some(e) = self.routes.get_mut(&msg.dest) {
                e.precursors.insert(reverse_next);
            }
            if let Some(e) = self.routes.get_mut(&msg.orig) {
                e.precursors.insert(fwd_next);
            }
            let rrep = RrepMessage {
                orig: msg.orig,
                dest: msg.dest,
                dest_seq,
                hop_count,
                lifetime_s: (lifetime - now).max(0.0),
            };
            return vec![Action::Unicast { msg: ControlMsg::Rrep(rrep), next_hop: reverse_next }];
        }

        if msg.ttl <= 1 {
            // the ring boundary: scope exhausted, flood goes no further
            return Vec::new();
        }
        let mut fwd = msg.clone();
        fwd.hop_count += 1;
        fwd.ttl -= 1;
        vec![Action::Broadcast(ControlMsg::Rreq(fwd))]
    }

    pub fn process_rrep(&mut self, msg: &RrepMessage, prev_hop: usize, now: f64) -> Vec<Action> {
        let art = self.cfg.active_route_timeout_s;
        self.update_route(prev_hop, prev_hop, 1, None, now + art);
        self.update_route(
            msg.dest,
            prev_hop,
            msg.hop_count + 1,
            Some(msg.dest_seq),
            now + msg.lifetime_s.max(art),
        );

        if msg.orig == self.id {
            self.pending.remove(&msg.dest);
            return self.flush_buffer(msg.dest, now);
        }

        match self.lookup(msg.orig, now) {
            Some(reverse_next) => {
                if let Some(e) = self.routes.get_mut(&msg.dest) {
                    e.precursors.insert(reverse_next);
                }
                if let Some(e) = self.routes.get_mut(&msg.orig) {
                    e.precursors.insert(prev_hop);
                }
                let mut fwd = msg.clone();
                fwd.hop_count += 1;
                vec![Action::Unicast { msg: ControlMsg::Rrep(fwd), next_hop: reverse_next }]
            }
            None => vec![Action::DiscardControl { msg: ControlMsg::Rrep(msg.clone()) }],
        }
    }

    pub fn process_rerr(&mut self, msg: &RerrMessage, prev_hop: usize, _now: f64) -> Vec<Action> {
        let mut invalidated = Vec::new();
        for &(dest, seq) in &msg.unreachable {
            if let Some(entry) = self.routes.get_mut(&dest) {
                if entry.valid && entry.next_hop == prev_hop {
                    entry.valid = false;
                    if !entry.valid_seq || seq_newer(seq, entry.dest_seq) {
                        entry.dest_seq = seq;
                        entry.valid_seq = true;
                    }
                    invalidated.push((dest, entry.dest_seq));
                }
            }
        }
        if invalidated.is_empty() {
            Vec::new()
        } else {
            vec![Action::Broadcast(ControlMsg::Rerr(RerrMessage { unreachable: invalidated }))]
        }
    }

    /// The MAC exhausted retries toward a neighbor: every route through it
    /// breaks at once.
    pub fn handle_link_break(&mut self, lost_neighbor: usize, _now: f64) -> Vec<Action> {
        let mut unreachable = Vec::new();
        for (&dest, entry) in self.routes.iter_mut() {
            if entry.valid && entry.next_hop == lost_neighbor {
                entry.valid = false;
                entry.dest_seq = entry.dest_seq.wrapping_add(1);
                unreachable.push((dest, entry.dest_seq));
            }
        }
        if unreachable.is_empty() {
            Vec::new()
        } else {
            vec![Action::Broadcast(ControlMsg::Rerr(RerrMessage { unreachable }))]
        }
    }
}
