//! Microscopic traffic: fixed-step car following with gap acceptance,
//! signal obedience, and per-vehicle route or turn-ratio driving.
//!
//! Positions are front-bumper offsets along an edge; a vehicle occupies
//! `[pos - length, pos]` of its lane. Each step recomputes every speed from
//! the previous step's state, then moves all vehicles at once.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::InputError;
use crate::rng;
use crate::road_network::{Point2D, RoadNetwork, SignalState};

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleType {
    pub id: String,
    /// Maximum acceleration, m/s^2.
    pub accel: f64,
    /// Maximum (comfortable and emergency) deceleration, m/s^2.
    pub decel: f64,
    /// Body length, meters.
    pub length: f64,
    /// Top speed, m/s.
    pub max_speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub id: String,
    pub edges: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSpec {
    pub id: String,
    pub vtype: String,
    pub route: String,
    pub depart_s: f64,
}

/// Turn probabilities per decision edge: outgoing edge and weight.
pub type TurnRatios = BTreeMap<String, Vec<(String, f64)>>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrafficDemand {
    pub vtypes: BTreeMap<String, VehicleType>,
    pub routes: BTreeMap<String, Route>,
    pub vehicles: Vec<VehicleSpec>,
    /// When present, vehicles keep driving past the end of their listed
    /// route by sampling these ratios at each junction.
    pub turns: Option<TurnRatios>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityConfig {
    /// Step length, seconds.
    pub dt_s: f64,
    /// Driver reaction headway, seconds.
    pub tau_s: f64,
    /// Standstill gap kept to the vehicle ahead, meters.
    pub min_gap_m: f64,
    /// When false, all signals read as green.
    pub signals_enabled: bool,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig {
            dt_s: 0.1,
            tau_s: 1.0,
            min_gap_m: 2.5,
            signals_enabled: true,
        }
    }
}

/// Largest speed from which a follower can still keep clear of a leader
/// moving at `leader_speed`, given braking rate `decel` and reaction
/// headway `tau_s`, with `gap_m` of free road between them.
pub fn safe_speed(gap_m: f64, leader_speed: f64, decel: f64, tau_s: f64) -> f64 {
    let b = decel;
    let t = tau_s;
    let disc = b * b * t * t + leader_speed * leader_speed + 2.0 * b * gap_m.max(0.0);
    (disc.sqrt() - b * t).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Waiting,
    OnRoad,
    Parked,
}

#[derive(Debug, Clone)]
struct Veh {
    phase: Phase,
    vtype: usize,
    /// Remaining explicit route edges after the current one.
    route_rest: Vec<usize>,
    /// Planned continuation: up to two edges ahead of the current one.
    planned: Vec<usize>,
    /// True once planning hit a dead end or route end.
    no_continuation: bool,
    edge: usize,
    lane: u32,
    pos: f64,
    speed: f64,
    depart: f64,
    world: Point2D,
}

struct EdgeRt {
    id: String,
    from_pos: Point2D,
    to_pos: Point2D,
    length: f64,
    num_lanes: u32,
    speed_limit: f64,
    /// Outgoing connections: (to-edge index, signal slot in the program of
    /// the shared node, if that node runs one).
    outgoing: Vec<(usize, Option<usize>)>,
    /// Program of the node this edge ends at, if any.
    end_program: Option<String>,
    /// Turn weights aligned with `outgoing` (None when no ratios given).
    turn_weights: Option<Vec<f64>>,
}

struct TypeRt {
    accel: f64,
    decel: f64,
    length: f64,
    max_speed: f64,
}

/// Snapshot row for one on-road vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSnapshot {
    pub vehicle: usize,
    pub edge: String,
    pub lane: u32,
    pub pos: f64,
    pub speed: f64,
    pub world: Point2D,
}

pub struct MobilityModel {
    cfg: MobilityConfig,
    edges: Vec<EdgeRt>,
    edge_index: BTreeMap<String, usize>,
    types: Vec<TypeRt>,
    vehicles: Vec<Veh>,
    vehicle_ids: Vec<String>,
    programs: BTreeMap<String, crate::road_network::SignalProgram>,
    turns_enabled: bool,
    rng: ChaCha12Rng,
    step_count: u64,
}

impl MobilityModel {
    pub fn new(
        net: &RoadNetwork,
        demand: &TrafficDemand,
        cfg: MobilityConfig,
        seed: u64,
    ) -> Result<Self, InputError> {
        if !(cfg.dt_s > 0.0) || !(cfg.tau_s >= cfg.dt_s) || !(cfg.min_gap_m >= 0.0) {
            return Err(InputError::Scenario(format!(
                "mobility config: need dt > 0, tau >= dt, min_gap >= 0 (dt={}, tau={}, min_gap={})",
                cfg.dt_s, cfg.tau_s, cfg.min_gap_m
            )));
        }

        let edge_index: BTreeMap<String, usize> = net
            .edges
            .keys()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();

        let mut edges: Vec<EdgeRt> = net
            .edges
            .values()
            .map(|e| {
                let end_node = &net.nodes[&e.to];
                EdgeRt {
                    id: e.id.clone(),
                    from_pos: net.nodes[&e.from].position,
                    to_pos: end_node.position,
                    length: e.length,
                    num_lanes: e.num_lanes,
                    speed_limit: e.speed_limit,
                    outgoing: Vec::new(),
                    end_program: net.signals.contains_key(&e.to).then(|| e.to.clone()),
                    turn_weights: None,
                }
            })
            .collect();

        // Connection slots within a node's program follow network file order.
        let mut slot_within_node: BTreeMap<String, usize> = BTreeMap::new();
        for conn in &net.connections {
            let from = edge_index[&conn.from_edge];
            let to = edge_index[&conn.to_edge];
            let node = net.edges[&conn.from_edge].to.clone();
            let slot = slot_within_node.entry(node.clone()).or_insert(0);
            let this_slot = *slot;
            *slot += 1;
            let has_program = net.signals.contains_key(&node);
            edges[from].outgoing.push((to, has_program.then_some(this_slot)));
        }

        if let Some(ratios) = &demand.turns {
            for (from_id, outs) in ratios {
                let from = *edge_index.get(from_id).ok_or_else(|| InputError::UnknownRef {
                    file: "turns".into(),
                    line: 0,
                    kind: "edge",
                    id: from_id.clone(),
                })?;
                let mut weights = vec![0.0; edges[from].outgoing.len()];
                for (to_id, w) in outs {
                    let to = *edge_index.get(to_id).ok_or_else(|| InputError::UnknownRef {
                        file: "turns".into(),
                        line: 0,
                        kind: "edge",
                        id: to_id.clone(),
                    })?;
                    let slot = edges[from]
                        .outgoing
                        .iter()
                        .position(|&(e, _)| e == to)
                        .ok_or_else(|| {
                            InputError::Scenario(format!(
                                "turn ratio {from_id}->{to_id} has no matching connection"
                            ))
                        })?;
                    if !(w.is_finite() && *w > 0.0) {
                        return Err(InputError::Scenario(format!(
                            "turn ratio {from_id}->{to_id} must be a positive number, got {w}"
                        )));
                    }
                    weights[slot] += w;
                }
                edges[from].turn_weights = Some(weights);
            }
        }

        let type_index: BTreeMap<String, usize> = demand
            .vtypes
            .keys()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let types: Vec<TypeRt> = demand
            .vtypes
            .values()
            .map(|t| TypeRt {
                accel: t.accel,
                decel: t.decel,
                length: t.length,
                max_speed: t.max_speed,
            })
            .collect();
        for t in demand.vtypes.values() {
            if !(t.accel > 0.0 && t.decel > 0.0 && t.length > 0.0 && t.max_speed > 0.0) {
                return Err(InputError::Scenario(format!(
                    "vehicle type \"{}\" has a non-positive parameter",
                    t.id
                )));
            }
        }

        let mut vehicles = Vec::with_capacity(demand.vehicles.len());
        let mut vehicle_ids = Vec::with_capacity(demand.vehicles.len());
        for spec in &demand.vehicles {
            let vtype = *type_index.get(&spec.vtype).ok_or_else(|| InputError::UnknownRef {
                file: "routes".into(),
                line: 0,
                kind: "vType",
                id: spec.vtype.clone(),
            })?;
            let route = demand.routes.get(&spec.route).ok_or_else(|| InputError::UnknownRef {
                file: "routes".into(),
                line: 0,
                kind: "route",
                id: spec.route.clone(),
            })?;
            if route.edges.is_empty() {
                return Err(InputError::Scenario(format!("route \"{}\" has no edges", route.id)));
            }
            let mut compiled: Vec<usize> = Vec::with_capacity(route.edges.len());
            for (i, eid) in route.edges.iter().enumerate() {
                let e = *edge_index.get(eid).ok_or_else(|| InputError::UnknownRef {
                    file: "routes".into(),
                    line: 0,
                    kind: "edge",
                    id: eid.clone(),
                })?;
                if i > 0 {
                    let prev = compiled[i - 1];
                    if !edges[prev].outgoing.iter().any(|&(to, _)| to == e) {
                        return Err(InputError::Scenario(format!(
                            "route \"{}\": no connection {} -> {}",
                            route.id,
                            route.edges[i - 1],
                            eid
                        )));
                    }
                }
                compiled.push(e);
            }
            if !(spec.depart_s >= 0.0 && spec.depart_s.is_finite()) {
                return Err(InputError::Scenario(format!(
                    "vehicle \"{}\" has invalid depart time {}",
                    spec.id, spec.depart_s
                )));
            }
            let first = compiled[0];
            vehicles.push(Veh {
                phase: Phase::Waiting,
                vtype,
                route_rest: compiled[1..].to_vec(),
                planned: Vec::new(),
                no_continuation: false,
                edge: first,
                lane: 0,
                pos: 0.0,
                speed: 0.0,
                depart: spec.depart_s,
                world: edges[first].from_pos,
            });
            vehicle_ids.push(spec.id.clone());
        }
        {
            let mut seen = std::collections::BTreeSet::new();
            for id in &vehicle_ids {
                if !seen.insert(id) {
                    return Err(InputError::Scenario(format!("duplicate vehicle id \"{id}\"")));
                }
            }
        }

        let mut model = MobilityModel {
            cfg,
            edges,
            edge_index,
            types,
            vehicles,
            vehicle_ids,
            programs: net.signals.clone(),
            turns_enabled: demand.turns.is_some(),
            rng: rng::substream(seed, "turns"),
            step_count: 0,
        };
        for i in 0..model.vehicles.len() {
            model.extend_plan(i);
        }
        Ok(model)
    }

    pub fn time(&self) -> f64 {
        self.step_count as f64 * self.cfg.dt_s
    }

    pub fn dt(&self) -> f64 {
        self.cfg.dt_s
    }

    pub fn n_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    pub fn vehicle_id(&self, i: usize) -> &str {
        &self.vehicle_ids[i]
    }

    /// Antenna position of vehicle `i` regardless of phase: the route start
    /// before departure, the live position on the road, and the final
    /// position after the drive ends.
    pub fn position(&self, i: usize) -> Point2D {
        self.vehicles[i].world
    }

    pub fn is_on_road(&self, i: usize) -> bool {
        self.vehicles[i].phase == Phase::OnRoad
    }

    pub fn is_parked(&self, i: usize) -> bool {
        self.vehicles[i].phase == Phase::Parked
    }

    pub fn speed(&self, i: usize) -> f64 {
        self.vehicles[i].speed
    }

    /// On-road vehicles in index order, for trace output.
    pub fn snapshot(&self) -> Vec<VehicleSnapshot> {
        self.vehicles
            .iter()
            .enumerate()
            .filter(|(_, v)| v.phase == Phase::OnRoad)
            .map(|(i, v)| VehicleSnapshot {
                vehicle: i,
                edge: self.edges[v.edge].id.clone(),
                lane: v.lane,
                pos: v.pos,
                speed: v.speed,
                world: v.world,
            })
            .collect()
    }

    fn world_of(&self, edge: usize, pos: f64) -> Point2D {
        let e = &self.edges[edge];
        let f = (pos / e.length).clamp(0.0, 1.0);
        Point2D::new(
            e.from_pos.x + (e.to_pos.x - e.from_pos.x) * f,
            e.from_pos.y + (e.to_pos.y - e.from_pos.y) * f,
        )
    }

    /// Pick the edge after `edge` for vehicle `i`: explicit route first,
    /// then turn ratios, then (with ratios enabled) uniform over the
    /// connected edges. Consumes one route entry or one random draw.
    fn choose_next_edge(&mut self, i: usize, edge: usize, route_cursor: &mut usize) -> Option<usize> {
        let veh = &self.vehicles[i];
        if *route_cursor < veh.route_rest.len() {
            let e = veh.route_rest[*route_cursor];
            *route_cursor += 1;
            return Some(e);
        }
        if !self.turns_enabled {
            return None;
        }
        let out = &self.edges[edge].outgoing;
        if out.is_empty() {
            return None;
        }
        let weights: Vec<f64> = match &self.edges[edge].turn_weights {
            Some(w) => w.clone(),
            None => vec![1.0; out.len()],
        };
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let mut pick = self.rng.gen_range(0.0..total);
        for (slot, w) in weights.iter().enumerate() {
            if pick < *w {
                return Some(out[slot].0);
            }
            pick -= w;
        }
        Some(out[weights.len() - 1].0)
    }

    /// Keep two planned edges ahead of the current one when possible.
    fn extend_plan(&mut self, i: usize) {
        if self.vehicles[i].no_continuation {
            return;
        }
        let mut cursor = 0usize;
        // Entries already in `planned` were taken from route_rest or drawn;
        // recompute the route cursor from how many route edges are consumed.
        let consumed = self.vehicles[i]
            .planned
            .iter()
            .zip(self.vehicles[i].route_rest.iter())
            .take_while(|(p, r)| p == r)
            .count();
        cursor = consumed.max(cursor);
        while self.vehicles[i].planned.len() < 2 {
            let last = *self.vehicles[i].planned.last().unwrap_or(&self.vehicles[i].edge);
            match self.choose_next_edge(i, last, &mut cursor) {
                Some(e) => self.vehicles[i].planned.push(e),
                None => {
                    self.vehicles[i].no_continuation = true;
                    break;
                }
            }
        }
    }

    /// Signal state at time `t` for leaving `edge` onto `next`, or None when
    /// unsignalled. All-green when signals are disabled.
    fn signal_for(&self, edge: usize, next: usize, t: f64) -> Option<SignalState> {
        if !self.cfg.signals_enabled {
            return None;
        }
        let e = &self.edges[edge];
        let program = self.programs.get(e.end_program.as_ref()?)?;
        let (_, slot) = e.outgoing.iter().find(|&&(to, _)| to == next)?;
        Some(program.state_at((*slot)?, t))
    }

    /// True when the light at the end of `edge` demands a stop, applying the
    /// yellow rule: stop unless already too close to brake comfortably.
    fn must_stop(&self, state: SignalState, speed: f64, dist_to_line: f64, decel: f64) -> bool {
        match state {
            SignalState::Green => false,
            SignalState::Red => true,
            SignalState::Yellow => speed * speed / (2.0 * decel) <= dist_to_line,
        }
    }

    /// Advance the model by one step.
    pub fn step(&mut self) {
        let dt = self.cfg.dt_s;
        let t_old = self.time();
        let n = self.vehicles.len();

        // Lane occupancy from the previous step: vehicles sorted front first.
        let mut lanes: BTreeMap<(usize, u32), Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let v = &self.vehicles[i];
            if v.phase == Phase::OnRoad {
                lanes.entry((v.edge, v.lane)).or_default().push(i);
            }
        }
        for list in lanes.values_mut() {
            list.sort_by(|&a, &b| {
                self.vehicles[b]
                    .pos
                    .total_cmp(&self.vehicles[a].pos)
                    .then(a.cmp(&b))
            });
        }

        // Vehicles bound for the same lane of the same next edge form a
        // virtual lane ordered by distance to the junction; each follows its
        // predecessor so merging traffic zippers instead of colliding.
        let target_of = |v: &Veh| -> Option<(usize, u32)> {
            v.planned
                .first()
                .map(|&next| (next, v.lane.min(self.edges[next].num_lanes - 1)))
        };
        let mut merge_groups: BTreeMap<(usize, u32), Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let v = &self.vehicles[i];
            if v.phase == Phase::OnRoad {
                if let Some(key) = target_of(v) {
                    merge_groups.entry(key).or_default().push(i);
                }
            }
        }
        let remaining = |i: usize| -> f64 {
            let v = &self.vehicles[i];
            self.edges[v.edge].length - v.pos
        };
        for list in merge_groups.values_mut() {
            list.sort_by(|&a, &b| remaining(a).total_cmp(&remaining(b)).then(a.cmp(&b)));
        }
        let mut merge_leader: Vec<Option<usize>> = vec![None; n];
        for list in merge_groups.values() {
            for w in list.windows(2) {
                merge_leader[w[1]] = Some(w[0]);
            }
        }

        // Pass 1: new speed for every on-road vehicle from old state.
        let mut new_speed = vec![0.0f64; n];
        for ((edge, _lane), list) in &lanes {
            let e_len = self.edges[*edge].length;
            for (k, &i) in list.iter().enumerate() {
                let v = &self.vehicles[i];
                let ty = &self.types[v.vtype];
                let mut want = (v.speed + ty.accel * dt)
                    .min(ty.max_speed)
                    .min(self.edges[*edge].speed_limit);

                // Leader in the same lane.
                if k > 0 {
                    let l = &self.vehicles[list[k - 1]];
                    let lt = &self.types[l.vtype];
                    let gap = (l.pos - lt.length) - v.pos - self.cfg.min_gap_m;
                    let eff = l.speed * (ty.decel / lt.decel).sqrt().min(1.0);
                    want = want.min(safe_speed(gap, eff, ty.decel, self.cfg.tau_s));
                }

                // Predecessor in the merge order for the same target lane,
                // measured along distance to the shared junction.
                if let Some(li) = merge_leader[i] {
                    let l = &self.vehicles[li];
                    let lt = &self.types[l.vtype];
                    let d_self = e_len - v.pos;
                    let d_lead = self.edges[l.edge].length - l.pos;
                    let gap = (d_self - d_lead) - lt.length - self.cfg.min_gap_m;
                    let eff = l.speed * (ty.decel / lt.decel).sqrt().min(1.0);
                    want = want.min(safe_speed(gap, eff, ty.decel, self.cfg.tau_s));
                }

                if let Some((next, target_lane)) = target_of(v) {
                    // Follow the rearmost vehicle already on the target lane
                    // across the junction; this also propagates queues back
                    // through it.
                    if let Some(nlist) = lanes.get(&(next, target_lane)) {
                        if let Some(&li) = nlist.last() {
                            let l = &self.vehicles[li];
                            let lt = &self.types[l.vtype];
                            let gap = (e_len - v.pos) + (l.pos - lt.length) - self.cfg.min_gap_m;
                            let eff = l.speed * (ty.decel / lt.decel).sqrt().min(1.0);
                            want = want.min(safe_speed(gap, eff, ty.decel, self.cfg.tau_s));
                        }
                    }
                    // Respect the next edge's limit once crossing is possible.
                    if v.pos + (v.speed + ty.accel * dt) * dt >= e_len {
                        want = want.min(self.edges[next].speed_limit);
                    }
                }

                // Stop line at the end of this edge.
                let mut stop_here = false;
                if let Some(&next) = v.planned.first() {
                    if let Some(state) = self.signal_for(*edge, next, t_old) {
                        stop_here |= self.must_stop(state, v.speed, e_len - v.pos, ty.decel);
                    }
                } else if !v.no_continuation {
                    // Plan not ready (should not happen); hold at the line.
                    stop_here = true;
                }
                if stop_here {
                    let gap = (e_len - v.pos) - self.cfg.min_gap_m;
                    want = want.min(safe_speed(gap, 0.0, ty.decel, self.cfg.tau_s));
                }

                // Stop line at the end of the planned next edge.
                if v.planned.len() >= 2 {
                    let next = v.planned[0];
                    let after = v.planned[1];
                    if let Some(state) = self.signal_for(next, after, t_old) {
                        let dist = (e_len - v.pos) + self.edges[next].length;
                        if self.must_stop(state, v.speed, dist, ty.decel) {
                            let gap = dist - self.cfg.min_gap_m;
                            want = want.min(safe_speed(gap, 0.0, ty.decel, self.cfg.tau_s));
                        }
                    }
                }

                // Physical bounds: cannot brake harder than decel allows.
                new_speed[i] = want.max(v.speed - ty.decel * dt).max(0.0);
            }
        }

        // Pass 2: move, cross junctions, park at route ends.
        self.step_count += 1;
        for i in 0..n {
            if self.vehicles[i].phase != Phase::OnRoad {
                continue;
            }
            let speed = new_speed[i];
            let mut pos = self.vehicles[i].pos + speed * dt;
            self.vehicles[i].speed = speed;
            let mut edge = self.vehicles[i].edge;
            while pos >= self.edges[edge].length {
                if self.vehicles[i].planned.is_empty() {
                    let end = self.edges[edge].to_pos;
                    let v = &mut self.vehicles[i];
                    v.phase = Phase::Parked;
                    v.world = end;
                    v.pos = self.edges[edge].length;
                    v.speed = 0.0;
                    break;
                }
                pos -= self.edges[edge].length;
                let next = self.vehicles[i].planned.remove(0);
                let consumed_route = !self.vehicles[i].route_rest.is_empty()
                    && self.vehicles[i].route_rest[0] == next;
                if consumed_route {
                    self.vehicles[i].route_rest.remove(0);
                }
                self.vehicles[i].lane = self.vehicles[i].lane.min(self.edges[next].num_lanes - 1);
                edge = next;
                self.vehicles[i].edge = edge;
                self.extend_plan(i);
            }
            if self.vehicles[i].phase == Phase::OnRoad {
                self.vehicles[i].pos = pos;
                self.vehicles[i].world = self.world_of(edge, pos);
            }
        }

        // Departures: a vehicle enters once its whole body plus the
        // standstill gap fits behind everyone already in some lane.
        let t_new = self.time();
        for i in 0..n {
            let can_depart = {
                let v = &self.vehicles[i];
                v.phase == Phase::Waiting && v.depart <= t_new
            };
            if !can_depart {
                continue;
            }
            let edge = self.vehicles[i].edge;
            let ty_len = self.types[self.vehicles[i].vtype].length;
            let need = ty_len + self.cfg.min_gap_m;
            let mut chosen: Option<u32> = None;
            'lane: for lane in 0..self.edges[edge].num_lanes {
                for j in 0..n {
                    let o = &self.vehicles[j];
                    if j != i && o.phase == Phase::OnRoad && o.edge == edge && o.lane == lane {
                        let rear = o.pos - self.types[o.vtype].length;
                        if rear < need {
                            continue 'lane;
                        }
                    }
                }
                chosen = Some(lane);
                break;
            }
            if let Some(lane) = chosen {
                let world = self.world_of(edge, ty_len);
                let v = &mut self.vehicles[i];
                v.phase = Phase::OnRoad;
                v.lane = lane;
                v.pos = ty_len;
                v.speed = 0.0;
                v.world = world;
            }
        }
    }

    /// Check the internal consistency of the current state; returns a
    /// description of the first violation found, if any.
    pub fn audit(&self) -> Option<String> {
        let mut lanes: BTreeMap<(usize, u32), Vec<usize>> = BTreeMap::new();
        for (i, v) in self.vehicles.iter().enumerate() {
            if v.phase != Phase::OnRoad {
                continue;
            }
            if !(0.0..=self.edges[v.edge].length + 1e-9).contains(&v.pos) {
                return Some(format!(
                    "vehicle {i} at pos {} outside edge {} of length {}",
                    v.pos, self.edges[v.edge].id, self.edges[v.edge].length
                ));
            }
            if v.lane >= self.edges[v.edge].num_lanes {
                return Some(format!("vehicle {i} on missing lane {}", v.lane));
            }
            if v.speed < 0.0 || v.speed > self.types[v.vtype].max_speed + 1e-9 {
                return Some(format!("vehicle {i} speed {} out of bounds", v.speed));
            }
            lanes.entry((v.edge, v.lane)).or_default().push(i);
        }
        for list in lanes.values_mut() {
            list.sort_by(|&a, &b| self.vehicles[b].pos.total_cmp(&self.vehicles[a].pos));
            for w in list.windows(2) {
                let front = &self.vehicles[w[0]];
                let back = &self.vehicles[w[1]];
                let gap = (front.pos - self.types[front.vtype].length) - back.pos;
                if gap < -1e-9 {
                    return Some(format!(
                        "overlap on edge {} lane {}: vehicles {} and {} (gap {gap})",
                        self.edges[front.edge].id, front.lane, w[0], w[1]
                    ));
                }
            }
        }
        None
    }

    pub fn edge_length(&self, edge_id: &str) -> Option<f64> {
        self.edge_index.get(edge_id).map(|&i| self.edges[i].length)
    }
}

/// Parse the route-demand document: vehicle types, routes, vehicles.
pub fn parse_routes(text: &str) -> Result<TrafficDemand, InputError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| InputError::Xml {
        file: "routes".into(),
        line: e.pos().row,
        msg: e.to_string(),
    })?;
    let line_of = |n: roxmltree::Node| doc.text_pos_at(n.range().start).row;
    let root = doc.root_element();
    if root.tag_name().name() != "routes" {
        return Err(InputError::invalid(
            "routes",
            line_of(root),
            format!("expected root element <routes>, found <{}>", root.tag_name().name()),
        ));
    }
    let attr = |n: roxmltree::Node, name: &str| -> Result<String, InputError> {
        n.attribute(name).map(str::to_string).ok_or_else(|| {
            InputError::invalid(
                "routes",
                line_of(n),
                format!("<{}> missing attribute \"{name}\"", n.tag_name().name()),
            )
        })
    };
    let attr_f64 = |n: roxmltree::Node, name: &str| -> Result<f64, InputError> {
        let raw = attr(n, name)?;
        raw.parse::<f64>().map_err(|_| {
            InputError::invalid(
                "routes",
                line_of(n),
                format!("attribute {name}=\"{raw}\" is not a number"),
            )
        })
    };

    let mut demand = TrafficDemand::default();
    for el in root.children().filter(|n| n.is_element()) {
        let line = line_of(el);
        match el.tag_name().name() {
            "vType" => {
                let id = attr(el, "id")?;
                let t = VehicleType {
                    id: id.clone(),
                    accel: attr_f64(el, "accel")?,
                    decel: attr_f64(el, "decel")?,
                    length: attr_f64(el, "length")?,
                    max_speed: attr_f64(el, "maxSpeed")?,
                };
                if demand.vtypes.insert(id.clone(), t).is_some() {
                    return Err(InputError::DuplicateId { file: "routes".into(), line, id });
                }
            }
            "route" => {
                let id = attr(el, "id")?;
                let edges: Vec<String> = attr(el, "edges")?
                    .split_whitespace()
                    .map(str::to_string)
                    .collect();
                if edges.is_empty() {
                    return Err(InputError::invalid(
                        "routes",
                        line,
                        format!("route \"{id}\" lists no edges"),
                    ));
                }
                if demand.routes.insert(id.clone(), Route { id: id.clone(), edges }).is_some() {
                    return Err(InputError::DuplicateId { file: "routes".into(), line, id });
                }
            }
            "vehicle" => {
                let id = attr(el, "id")?;
                // either a named route, or a start edge plus turn-table
                // steering: the latter becomes a one-edge implicit route
                let route = match el.attribute("mode") {
                    None => attr(el, "route")?,
                    Some("turnpolicy") => {
                        let start = attr(el, "start")?;
                        let implicit = format!("__start_{start}");
                        demand.routes.entry(implicit.clone()).or_insert_with(|| Route {
                            id: implicit.clone(),
                            edges: vec![start],
                        });
                        implicit
                    }
                    Some(other) => {
                        return Err(InputError::invalid(
                            "routes",
                            line,
                            format!("vehicle \"{id}\" has unknown mode \"{other}\""),
                        ));
                    }
                };
                demand.vehicles.push(VehicleSpec {
                    id,
                    vtype: attr(el, "type")?,
                    route,
                    depart_s: attr_f64(el, "depart")?,
                });
            }
            other => {
                return Err(InputError::invalid(
                    "routes",
                    line,
                    format!("unexpected element <{other}>"),
                ));
            }
        }
    }
    Ok(demand)
}

/// Parse turn ratios: `<turns><fromEdge id><toEdge id probability/></fromEdge></turns>`.
pub fn parse_turns(text: &str) -> Result<TurnRatios, InputError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| InputError::Xml {
        file: "turns".into(),
        line: e.pos().row,
        msg: e.to_string(),
    })?;
    let line_of = |n: roxmltree::Node| doc.text_pos_at(n.range().start).row;
    let root = doc.root_element();
    if root.tag_name().name() != "turns" {
        return Err(InputError::invalid(
            "turns",
            line_of(root),
            format!("expected root element <turns>, found <{}>", root.tag_name().name()),
        ));
    }
    let mut ratios = TurnRatios::new();
    for from in root.children().filter(|n| n.is_element()) {
        let line = line_of(from);
        if from.tag_name().name() != "fromEdge" {
            return Err(InputError::invalid(
                "turns",
                line,
                format!("unexpected element <{}>", from.tag_name().name()),
            ));
        }
        let from_id = from
            .attribute("id")
            .ok_or_else(|| InputError::invalid("turns", line, "<fromEdge> missing attribute \"id\""))?
            .to_string();
        let mut outs = Vec::new();
        for to in from.children().filter(|n| n.is_element()) {
            let tl = line_of(to);
            if to.tag_name().name() != "toEdge" {
                return Err(InputError::invalid(
                    "turns",
                    tl,
                    format!("unexpected element <{}>", to.tag_name().name()),
                ));
            }
            let to_id = to
                .attribute("id")
                .ok_or_else(|| InputError::invalid("turns", tl, "<toEdge> missing attribute \"id\""))?
                .to_string();
            let p: f64 = to
                .attribute("probability")
                .ok_or_else(|| {
                    InputError::invalid("turns", tl, "<toEdge> missing attribute \"probability\"")
                })?
                .parse()
                .map_err(|_| InputError::invalid("turns", tl, "probability is not a number"))?;
            outs.push((to_id, p));
        }
        if ratios.insert(from_id.clone(), outs).is_some() {
            return Err(InputError::DuplicateId {
                file: "turns".into(),
                line,
                id: from_id,
            });
        }
    }
    Ok(ratios)
}
