//! Road graph model: nodes, directed edges with lanes, allowed connections
//! between edges, and fixed-time signal programs at traffic-light nodes.
//!
//! Networks are loaded from a small XML subset (see `parse_network`) and are
//! immutable after construction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::InputError;

/// Default green phase duration for generated signal programs, seconds.
pub const DEFAULT_GREEN_S: f64 = 30.0;
/// Default yellow phase duration for generated signal programs, seconds.
pub const DEFAULT_YELLOW_S: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub fn new(x: f64, y: f64) -> Self {
        Point2D { x, y }
    }

    pub fn distance(&self, other: &Point2D) -> f64 {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Shift points into a frame with a new origin: (x, y) -> (x + h, y + k).
pub fn translate_origin(points: &[Point2D], offset: (f64, f64)) -> Vec<Point2D> {
    points
        .iter()
        .map(|p| Point2D::new(p.x + offset.0, p.y + offset.1))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Priority,
    TrafficLight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: String,
    pub position: Point2D,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub num_lanes: u32,
    /// Lane speed limit, m/s.
    pub speed_limit: f64,
    /// Road priority percentage, stored but not used by any model.
    pub priority: f64,
    /// Euclidean distance between endpoint nodes, meters.
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurnDirection {
    Left,
    Right,
    Straight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub from_edge: String,
    pub to_edge: String,
    pub direction: TurnDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalState {
    Green,
    Yellow,
    Red,
}

impl SignalState {
    fn to_char(self) -> char {
        match self {
            SignalState::Green => 'G',
            SignalState::Yellow => 'Y',
            SignalState::Red => 'r',
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            'G' | 'g' => Some(SignalState::Green),
            'Y' | 'y' => Some(SignalState::Yellow),
            'r' | 'R' => Some(SignalState::Red),
            _ => None,
        }
    }
}

/// One timed phase; `states` is indexed by the node's connections in
/// network file order.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalPhase {
    pub duration: f64,
    pub states: Vec<SignalState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalProgram {
    pub node: String,
    pub phases: Vec<SignalPhase>,
    pub cycle_offset: f64,
}

impl SignalProgram {
    pub fn cycle(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum()
    }

    /// Signal state of the node's `slot`-th connection at simulation time `t`.
    pub fn state_at(&self, slot: usize, t: f64) -> SignalState {
        let cycle = self.cycle();
        if cycle <= 0.0 {
            return SignalState::Green;
        }
        let mut elapsed = (t + self.cycle_offset).rem_euclid(cycle);
        for phase in &self.phases {
            if elapsed < phase.duration {
                return phase.states[slot];
            }
            elapsed -= phase.duration;
        }
        // rem_euclid keeps elapsed < cycle; rounding can land exactly on it.
        self.phases.last().map_or(SignalState::Green, |p| p.states[slot])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    pub nodes: BTreeMap<String, NodeSpec>,
    pub edges: BTreeMap<String, EdgeSpec>,
    pub connections: Vec<Connection>,
    pub signals: BTreeMap<String, SignalProgram>,
    /// Axis-aligned extent of all node positions: (width, height), meters.
    pub bounding_box: (f64, f64),
}

impl RoadNetwork {
    /// Heading unit vector of an edge (from -> to).
    pub fn edge_heading(&self, edge: &EdgeSpec) -> (f64, f64) {
        let a = self.nodes[&edge.from].position;
        let b = self.nodes[&edge.to].position;
        let len = a.distance(&b);
        ((b.x - a.x) / len, (b.y - a.y) / len)
    }

    /// Indices into `connections` for all connections through `node`,
    /// in file order. This order defines signal state string slots.
    pub fn node_connections(&self, node: &str) -> Vec<usize> {
        self.connections
            .iter()
            .enumerate()
            .filter(|(_, c)| self.edges[&c.from_edge].to == node)
            .map(|(i, _)| i)
            .collect()
    }

    /// Turn direction for a listed connection, from the signed angle between
    /// the two edge headings (counterclockwise positive): |a| <= 30 deg is
    /// straight, (30, 180] left, [-180, -30) right.
    pub fn classify_turn(&self, from_edge: &str, to_edge: &str) -> Result<TurnDirection, InputError> {
        let conn = self
            .connections
            .iter()
            .find(|c| c.from_edge == from_edge && c.to_edge == to_edge)
            .ok_or_else(|| InputError::UnknownRef {
                file: "connections".into(),
                line: 0,
                kind: "connection",
                id: format!("{from_edge}->{to_edge}"),
            })?;
        let fe = &self.edges[&conn.from_edge];
        let te = &self.edges[&conn.to_edge];
        Ok(classify_heading_change(
            self.edge_heading(fe),
            self.edge_heading(te),
        ))
    }

    /// Width x height of the bounding box.
    pub fn bounding_area(&self) -> Result<f64, InputError> {
        if self.nodes.is_empty() {
            return Err(InputError::Scenario("bounding_area of empty network".into()));
        }
        Ok(self.bounding_box.0 * self.bounding_box.1)
    }

    /// Build the fixed-time default program for a traffic-light node:
    /// approaches grouped by axis, each group green then yellow while the
    /// other group holds red.
    pub fn default_signal_program(&self, node: &str) -> Result<SignalProgram, InputError> {
        self.signal_program(node, DEFAULT_GREEN_S, DEFAULT_YELLOW_S)
    }

    /// Same phase structure as the default program with custom green and
    /// yellow durations.
    pub fn signal_program(
        &self,
        node: &str,
        green_s: f64,
        yellow_s: f64,
    ) -> Result<SignalProgram, InputError> {
        let spec = self.nodes.get(node).ok_or_else(|| InputError::UnknownRef {
            file: "nodes".into(),
            line: 0,
            kind: "node",
            id: node.to_string(),
        })?;
        if spec.kind != NodeKind::TrafficLight {
            return Err(InputError::Scenario(format!(
                "node \"{node}\" is not a traffic light"
            )));
        }
        let slots = self.node_connections(node);
        // Axis of the approach: east-west when the incoming heading is
        // mostly horizontal, north-south otherwise.
        let is_ew: Vec<bool> = slots
            .iter()
            .map(|&i| {
                let (dx, dy) = self.edge_heading(&self.edges[&self.connections[i].from_edge]);
                dx.abs() >= dy.abs()
            })
            .collect();
        let mut phases = Vec::new();
        for group_ew in [true, false] {
            if !is_ew.iter().any(|&ew| ew == group_ew) {
                continue;
            }
            for (dur, active) in [
                (green_s, SignalState::Green),
                (yellow_s, SignalState::Yellow),
            ] {
                phases.push(SignalPhase {
                    duration: dur,
                    states: is_ew
                        .iter()
                        .map(|&ew| if ew == group_ew { active } else { SignalState::Red })
                        .collect(),
                });
            }
        }
        Ok(SignalProgram {
            node: node.to_string(),
            phases,
            cycle_offset: 0.0,
        })
    }

    /// Emit the four XML documents this network parses from.
    pub fn to_documents(&self) -> (String, String, String, String) {
        let mut nodes = String::from("<nodes>\n");
        for n in self.nodes.values() {
            let kind = match n.kind {
                NodeKind::Priority => "priority",
                NodeKind::TrafficLight => "traffic_light",
            };
            let _ = writeln!(
                nodes,
                "  <node id=\"{}\" x=\"{}\" y=\"{}\" type=\"{}\"/>",
                n.id, n.position.x, n.position.y, kind
            );
        }
        nodes.push_str("</nodes>\n");

        let mut edges = String::from("<edges>\n");
        for e in self.edges.values() {
            let _ = writeln!(
                edges,
                "  <edge id=\"{}\" from=\"{}\" to=\"{}\" numLanes=\"{}\" speed=\"{}\" priority=\"{}\"/>",
                e.id, e.from, e.to, e.num_lanes, e.speed_limit, e.priority
            );
        }
        edges.push_str("</edges>\n");

        let mut conns = String::from("<connections>\n");
        for c in &self.connections {
            let _ = writeln!(
                conns,
                "  <connection from=\"{}\" to=\"{}\"/>",
                c.from_edge, c.to_edge
            );
        }
        conns.push_str("</connections>\n");

        let mut signals = String::from("<signals>\n");
        for p in self.signals.values() {
            let _ = writeln!(signals, "  <program node=\"{}\">", p.node);
            for phase in &p.phases {
                let state: String = phase.states.iter().map(|s| s.to_char()).collect();
                let _ = writeln!(
                    signals,
                    "    <phase dur=\"{}\" state=\"{}\"/>",
                    phase.duration, state
                );
            }
            signals.push_str("  </program>\n");
        }
        signals.push_str("</signals>\n");

        (nodes, edges, conns, signals)
    }
}

/// Turn direction from two heading unit vectors.
pub fn classify_heading_change(from: (f64, f64), to: (f64, f64)) -> TurnDirection {
    let cross = from.0 * to.1 - from.1 * to.0;
    let dot = from.0 * to.0 + from.1 * to.1;
    let angle = cross.atan2(dot).to_degrees();
    if angle.abs() <= 30.0 {
        TurnDirection::Straight
    } else if angle > 0.0 {
        TurnDirection::Left
    } else {
        TurnDirection::Right
    }
}

struct Doc<'a> {
    name: &'static str,
    xml: roxmltree::Document<'a>,
}

impl<'a> Doc<'a> {
    fn parse(name: &'static str, text: &'a str) -> Result<Self, InputError> {
        let xml = roxmltree::Document::parse(text).map_err(|e| InputError::Xml {
            file: name.into(),
            line: e.pos().row,
            msg: e.to_string(),
        })?;
        Ok(Doc { name, xml })
    }

    fn line(&self, node: roxmltree::Node) -> u32 {
        self.xml.text_pos_at(node.range().start).row
    }

    fn expect_root(&self, tag: &str) -> Result<roxmltree::Node<'_, 'a>, InputError> {
        let root = self.xml.root_element();
        if root.tag_name().name() != tag {
            return Err(InputError::invalid(
                self.name,
                self.line(root),
                format!("expected root element <{tag}>, found <{}>", root.tag_name().name()),
            ));
        }
        Ok(root)
    }

    fn attr(&self, node: roxmltree::Node, name: &str) -> Result<String, InputError> {
        node.attribute(name).map(str::to_string).ok_or_else(|| {
            InputError::invalid(
                self.name,
                self.line(node),
                format!("<{}> missing attribute \"{name}\"", node.tag_name().name()),
            )
        })
    }

    fn attr_f64(&self, node: roxmltree::Node, name: &str) -> Result<f64, InputError> {
        let raw = self.attr(node, name)?;
        raw.parse::<f64>().map_err(|_| {
            InputError::invalid(
                self.name,
                self.line(node),
                format!("attribute {name}=\"{raw}\" is not a number"),
            )
        })
    }
}

/// Parse and validate the nodes/edges/connections (and optional signals)
/// documents into a `RoadNetwork`. Traffic-light nodes without an explicit
/// program receive the default two-group program.
pub fn parse_network(
    nodes_doc: &str,
    edges_doc: &str,
    connections_doc: &str,
    signals_doc: Option<&str>,
) -> Result<RoadNetwork, InputError> {
    let mut nodes = BTreeMap::new();
    let doc = Doc::parse("nodes", nodes_doc)?;
    for el in doc.expect_root("nodes")?.children().filter(|n| n.is_element()) {
        let line = doc.line(el);
        if el.tag_name().name() != "node" {
            return Err(InputError::invalid(
                "nodes",
                line,
                format!("unexpected element <{}>", el.tag_name().name()),
            ));
        }
        let id = doc.attr(el, "id")?.to_string();
        let x = doc.attr_f64(el, "x")?;
        let y = doc.attr_f64(el, "y")?;
        if !x.is_finite() || !y.is_finite() {
            return Err(InputError::invalid("nodes", line, "non-finite coordinate"));
        }
        if x < 0.0 || y < 0.0 {
            return Err(InputError::invalid(
                "nodes",
                line,
                format!("node \"{id}\" at ({x}, {y}) outside the first quadrant; translate the origin first"),
            ));
        }
        let kind = match doc.attr(el, "type")?.as_str() {
            "priority" => NodeKind::Priority,
            "traffic_light" => NodeKind::TrafficLight,
            other => {
                return Err(InputError::invalid(
                    "nodes",
                    line,
                    format!("unknown node type \"{other}\""),
                ))
            }
        };
        let spec = NodeSpec {
            id: id.clone(),
            position: Point2D::new(x, y),
            kind,
        };
        if nodes.insert(id.clone(), spec).is_some() {
            return Err(InputError::DuplicateId {
                file: "nodes".into(),
                line,
                id,
            });
        }
    }

    let mut edges = BTreeMap::new();
    let doc = Doc::parse("edges", edges_doc)?;
    for el in doc.expect_root("edges")?.children().filter(|n| n.is_element()) {
        let line = doc.line(el);
        if el.tag_name().name() != "edge" {
            return Err(InputError::invalid(
                "edges",
                line,
                format!("unexpected element <{}>", el.tag_name().name()),
            ));
        }
        let id = doc.attr(el, "id")?.to_string();
        let from = doc.attr(el, "from")?.to_string();
        let to = doc.attr(el, "to")?.to_string();
        for node_id in [&from, &to] {
            if !nodes.contains_key(node_id) {
                return Err(InputError::UnknownRef {
                    file: "edges".into(),
                    line,
                    kind: "node",
                    id: node_id.clone(),
                });
            }
        }
        if from == to {
            return Err(InputError::invalid(
                "edges",
                line,
                format!("edge \"{id}\" starts and ends at node \"{from}\""),
            ));
        }
        let num_lanes = doc.attr_f64(el, "numLanes")? as u32;
        let speed_limit = doc.attr_f64(el, "speed")?;
        let priority = doc.attr_f64(el, "priority")?;
        if num_lanes < 1 {
            return Err(InputError::invalid("edges", line, "numLanes must be >= 1"));
        }
        if speed_limit <= 0.0 || !speed_limit.is_finite() {
            return Err(InputError::invalid("edges", line, "speed must be > 0"));
        }
        if !(0.0..=100.0).contains(&priority) {
            return Err(InputError::invalid("edges", line, "priority must be in [0, 100]"));
        }
        let length = nodes[&from].position.distance(&nodes[&to].position);
        if length <= 0.0 {
            return Err(InputError::invalid(
                "edges",
                line,
                format!("edge \"{id}\" has zero length (coincident endpoints)"),
            ));
        }
        let spec = EdgeSpec {
            id: id.clone(),
            from,
            to,
            num_lanes,
            speed_limit,
            priority,
            length,
        };
        if edges.insert(id.clone(), spec).is_some() {
            return Err(InputError::DuplicateId {
                file: "edges".into(),
                line,
                id,
            });
        }
    }

    let mut connections: Vec<Connection> = Vec::new();
    let doc = Doc::parse("connections", connections_doc)?;
    for el in doc.expect_root("connections")?.children().filter(|n| n.is_element()) {
        let line = doc.line(el);
        if el.tag_name().name() != "connection" {
            return Err(InputError::invalid(
                "connections",
                line,
                format!("unexpected element <{}>", el.tag_name().name()),
            ));
        }
        let from_edge = doc.attr(el, "from")?.to_string();
        let to_edge = doc.attr(el, "to")?.to_string();
        for edge_id in [&from_edge, &to_edge] {
            if !edges.contains_key(edge_id) {
                return Err(InputError::UnknownRef {
                    file: "connections".into(),
                    line,
                    kind: "edge",
                    id: edge_id.clone(),
                });
            }
        }
        if edges[&from_edge].to != edges[&to_edge].from {
            return Err(InputError::invalid(
                "connections",
                line,
                format!(
                    "connection {from_edge}->{to_edge} does not meet at a shared node"
                ),
            ));
        }
        if connections
            .iter()
            .any(|c| c.from_edge == from_edge && c.to_edge == to_edge)
        {
            return Err(InputError::DuplicateId {
                file: "connections".into(),
                line,
                id: format!("{from_edge}->{to_edge}"),
            });
        }
        connections.push(Connection {
            from_edge,
            to_edge,
            direction: TurnDirection::Straight, // set below once all nodes known
        });
    }

    let mut bounding = (0.0, 0.0);
    if !nodes.is_empty() {
        let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
        for n in nodes.values() {
            min_x = min_x.min(n.position.x);
            max_x = max_x.max(n.position.x);
            min_y = min_y.min(n.position.y);
            max_y = max_y.max(n.position.y);
        }
        bounding = (max_x - min_x, max_y - min_y);
    }

    let mut net = RoadNetwork {
        nodes,
        edges,
        connections,
        signals: BTreeMap::new(),
        bounding_box: bounding,
    };
    for i in 0..net.connections.len() {
        let from = net.edge_heading(&net.edges[&net.connections[i].from_edge]);
        let to = net.edge_heading(&net.edges[&net.connections[i].to_edge]);
        net.connections[i].direction = classify_heading_change(from, to);
    }

    if let Some(text) = signals_doc {
        let doc = Doc::parse("signals", text)?;
        for el in doc.expect_root("signals")?.children().filter(|n| n.is_element()) {
            let line = doc.line(el);
            if el.tag_name().name() != "program" {
                return Err(InputError::invalid(
                    "signals",
                    line,
                    format!("unexpected element <{}>", el.tag_name().name()),
                ));
            }
            let node = doc.attr(el, "node")?.to_string();
            if !net.nodes.contains_key(&node) {
                return Err(InputError::UnknownRef {
                    file: "signals".into(),
                    line,
                    kind: "node",
                    id: node,
                });
            }
            let slots = net.node_connections(&node);
            let mut phases = Vec::new();
            for ph in el.children().filter(|n| n.is_element()) {
                let ph_line = doc.line(ph);
                if ph.tag_name().name() != "phase" {
                    return Err(InputError::invalid(
                        "signals",
                        ph_line,
                        format!("unexpected element <{}>", ph.tag_name().name()),
                    ));
                }
                let dur = doc.attr_f64(ph, "dur")?;
                if dur <= 0.0 {
                    return Err(InputError::invalid("signals", ph_line, "phase dur must be > 0"));
                }
                let raw = doc.attr(ph, "state")?;
                if raw.chars().count() != slots.len() {
                    return Err(InputError::invalid(
                        "signals",
                        ph_line,
                        format!(
                            "state \"{raw}\" has {} entries, node \"{node}\" has {} connections",
                            raw.chars().count(),
                            slots.len()
                        ),
                    ));
                }
                let states = raw
                    .chars()
                    .map(|c| {
                        SignalState::from_char(c).ok_or_else(|| {
                            InputError::invalid(
                                "signals",
                                ph_line,
                                format!("state char '{c}' is not one of G/Y/r"),
                            )
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                phases.push(SignalPhase { duration: dur, states });
            }
            if phases.is_empty() {
                return Err(InputError::invalid(
                    "signals",
                    line,
                    format!("program for node \"{node}\" has no phases"),
                ));
            }
            for slot in 0..slots.len() {
                if !phases
                    .iter()
                    .any(|p| p.states[slot] == SignalState::Green)
                {
                    let c = &net.connections[slots[slot]];
                    return Err(InputError::invalid(
                        "signals",
                        line,
                        format!(
                            "connection {}->{} is never green at node \"{node}\"",
                            c.from_edge, c.to_edge
                        ),
                    ));
                }
            }
            let program = SignalProgram {
                node: node.clone(),
                phases,
                cycle_offset: 0.0,
            };
            if net.signals.insert(node.clone(), program).is_some() {
                return Err(InputError::DuplicateId {
                    file: "signals".into(),
                    line,
                    id: node,
                });
            }
        }
    }

    // Traffic lights without an explicit program get the default one.
    let missing: BTreeSet<String> = net
        .nodes
        .values()
        .filter(|n| n.kind == NodeKind::TrafficLight && !net.signals.contains_key(&n.id))
        .map(|n| n.id.clone())
        .collect();
    for node in missing {
        let program = net.default_signal_program(&node)?;
        net.signals.insert(node, program);
    }

    Ok(net)
}
