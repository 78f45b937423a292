//! Run output writers: the network event trace and the mobility trace.
//! Both are plain text built deterministically in memory.

use std::fmt::Write as _;

use crate::mobility::VehicleSnapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Send,
    Receive,
    Drop,
    Forward,
}

impl Event {
    fn code(self) -> char {
        match self {
            Event::Send => 's',
            Event::Receive => 'r',
            Event::Drop => 'd',
            Event::Forward => 'f',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Agt,
    Rtr,
    Mac,
    Ifq,
}

impl Layer {
    fn name(self) -> &'static str {
        match self {
            Layer::Agt => "AGT",
            Layer::Rtr => "RTR",
            Layer::Mac => "MAC",
            Layer::Ifq => "IFQ",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    /// Interface queue overflow.
    Ifq,
    /// Unicast retry limit exhausted.
    Ret,
    /// No route after discovery failed, or routing buffer eviction.
    Nrte,
    /// Queued frames purged toward a broken next hop.
    Lnk,
    /// Broadcast frame lost to overlapping transmissions.
    Col,
    /// Hop budget exhausted.
    Ttl,
}

impl DropReason {
    pub fn name(self) -> &'static str {
        match self {
            DropReason::Ifq => "IFQ",
            DropReason::Ret => "RET",
            DropReason::Nrte => "NRTE",
            DropReason::Lnk => "LNK",
            DropReason::Col => "COL",
            DropReason::Ttl => "TTL",
        }
    }
}

/// Accumulates network event lines:
/// `<time> <s|r|d|f> <node> <layer> <pkt_id> <pkt_type> <size_bytes> [reason]`.
#[derive(Debug, Default)]
pub struct EventTrace {
    out: String,
}

impl EventTrace {
    pub fn new() -> Self {
        EventTrace::default()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn log(
        &mut self,
        time: f64,
        event: Event,
        node: usize,
        layer: Layer,
        pkt_id: u64,
        pkt_type: &str,
        size_bytes: u32,
        reason: Option<DropReason>,
    ) {
        let _ = write!(
            self.out,
            "{time:.9} {} {node} {} {pkt_id} {pkt_type} {size_bytes}",
            event.code(),
            layer.name()
        );
        if let Some(r) = reason {
            let _ = write!(self.out, " {}", r.name());
        }
        self.out.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.out
    }

    pub fn into_string(self) -> String {
        self.out
    }
}

/// Accumulates mobility rows: `time,vehicle,edge,lane,pos,speed,x,y`.
#[derive(Debug)]
pub struct MobilityTrace {
    out: String,
}

impl Default for MobilityTrace {
    fn default() -> Self {
        MobilityTrace {
            out: String::from("time,vehicle,edge,lane,pos,speed,x,y\n"),
        }
    }
}

impl MobilityTrace {
    pub fn new() -> Self {
        MobilityTrace::default()
    }

    pub fn log_step(&mut self, time: f64, rows: &[VehicleSnapshot]) {
        for r in rows {
            let _ = writeln!(
                self.out,
                "{time:.1},{},{},{},{:.3},{:.3},{:.3},{:.3}",
                r.vehicle, r.edge, r.lane, r.pos, r.speed, r.world.x, r.world.y
            );
        }
    }

    pub fn as_str(&self) -> &str {
        &self.out
    }

    pub fn into_string(self) -> String {
        self.out
    }
}
