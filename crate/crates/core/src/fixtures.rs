//! Synthetic benchmark map: a 3x3 signalized grid with 400 m blocks and a
//! fixed set of 36 routes crossing it. The density sweep instantiates this
//! map with 10 to 70 vehicles.

use crate::aodv::AodvConfig;
use crate::app::AppConfig;
use crate::engine::Scenario;
use crate::error::InputError;
use crate::mac::MacConfig;
use crate::mobility::{parse_routes, MobilityConfig, TurnRatios};
use crate::phy::PhyConfig;
use crate::road_network::{parse_network, RoadNetwork};

pub const GRID_BLOCK_M: f64 = 400.0;
pub const GRID_ROUTE_COUNT: usize = 36;
/// Departures are spread evenly over this many seconds.
pub const GRID_DEPART_WINDOW_S: f64 = 20.0;
/// Urban speed limit on the grid edges, meters per second.
pub const GRID_SPEED_LIMIT_MPS: f64 = 13.9;
/// Lower limit on the patrol corridor. Matches the slowest vehicle class,
/// so a bunched column stays bunched between lights.
pub const GRID_CORRIDOR_SPEED_MPS: f64 = 10.0;
/// Short fixed-time cycle at every junction. Brief greens meter the flow,
/// so queues rebuild each cycle and the fleet stays bunched.
pub const GRID_GREEN_S: f64 = 10.0;
pub const GRID_YELLOW_S: f64 = 3.0;

fn node_id(c: usize, r: usize) -> String {
    format!("n{c}{r}")
}

fn edge_id(from: &str, to: &str) -> String {
    format!("{from}{to}")
}

/// The grid's nodes, edges, and connections documents, in the same XML
/// subset the parsers accept. Every junction runs a traffic light with the
/// default program.
pub fn grid3x3_network_docs() -> (String, String, String) {
    let mut nodes = String::from("<nodes>\n");
    for r in 0..3 {
        for c in 0..3 {
            nodes.push_str(&format!(
                "  <node id=\"{}\" x=\"{}\" y=\"{}\" type=\"traffic_light\"/>\n",
                node_id(c, r),
                c as f64 * GRID_BLOCK_M,
                r as f64 * GRID_BLOCK_M,
            ));
        }
    }
    nodes.push_str("</nodes>\n");

    // both directions between every pair of orthogonal neighbors
    let mut pairs: Vec<(String, String)> = Vec::new();
    for r in 0..3 {
        for c in 0..3 {
            if c + 1 < 3 {
                pairs.push((node_id(c, r), node_id(c + 1, r)));
            }
            if r + 1 < 3 {
                pairs.push((node_id(c, r), node_id(c, r + 1)));
            }
        }
    }
    let mut edges = String::from("<edges>\n");
    for (a, b) in &pairs {
        for (f, t) in [(a, b), (b, a)] {
            let id = edge_id(f, t);
            let speed = if GRID_CORRIDOR_EDGES.contains(&id.as_str()) {
                GRID_CORRIDOR_SPEED_MPS
            } else {
                GRID_SPEED_LIMIT_MPS
            };
            edges.push_str(&format!(
                "  <edge id=\"{id}\" from=\"{f}\" to=\"{t}\" numLanes=\"2\" speed=\"{speed}\" priority=\"75\"/>\n",
            ));
        }
    }
    edges.push_str("</edges>\n");

    // every turn, U-turns included
    let mut conns = String::from("<connections>\n");
    for r in 0..3 {
        for c in 0..3 {
            let here = node_id(c, r);
            let mut neighbors = Vec::new();
            if c > 0 {
                neighbors.push(node_id(c - 1, r));
            }
            if c + 1 < 3 {
                neighbors.push(node_id(c + 1, r));
            }
            if r > 0 {
                neighbors.push(node_id(c, r - 1));
            }
            if r + 1 < 3 {
                neighbors.push(node_id(c, r + 1));
            }
            for from in &neighbors {
                for to in &neighbors {
                    conns.push_str(&format!(
                        "  <connection from=\"{}\" to=\"{}\"/>\n",
                        edge_id(from, &here),
                        edge_id(&here, to),
                    ));
                }
            }
        }
    }
    conns.push_str("</connections>\n");
    (nodes, edges, conns)
}

/// The parsed grid with the short-cycle program installed at every
/// junction in place of the 30 s default.
pub fn grid3x3_network() -> Result<RoadNetwork, InputError> {
    let (nodes, edges, conns) = grid3x3_network_docs();
    let mut network = parse_network(&nodes, &edges, &conns, None)?;
    let ids: Vec<String> = network.nodes.keys().cloned().collect();
    for id in ids {
        let program = network.signal_program(&id, GRID_GREEN_S, GRID_YELLOW_S)?;
        network.signals.insert(id, program);
    }
    Ok(network)
}

/// The 36 fixed routes: 12 straight crossings, 8 L-turns through the
/// center, 8 corner-to-opposite-corner paths via the center, and 8 corner
/// doglegs. 28 of the 36 pass the central junction.
pub fn grid3x3_route_edges() -> Vec<Vec<String>> {
    let n = node_id;
    let path = |stops: &[(usize, usize)]| -> Vec<String> {
        stops
            .windows(2)
            .map(|w| edge_id(&n(w[0].0, w[0].1), &n(w[1].0, w[1].1)))
            .collect()
    };
    let mut routes = Vec::with_capacity(GRID_ROUTE_COUNT);
    // straight across, each row and column, both directions
    for k in 0..3 {
        routes.push(path(&[(0, k), (1, k), (2, k)]));
        routes.push(path(&[(2, k), (1, k), (0, k)]));
        routes.push(path(&[(k, 0), (k, 1), (k, 2)]));
        routes.push(path(&[(k, 2), (k, 1), (k, 0)]));
    }
    // L-turns: boundary midpoints into the center, then left or right
    for (mid, exits) in [
        ((1, 0), [(0, 1), (2, 1)]),
        ((1, 2), [(0, 1), (2, 1)]),
        ((0, 1), [(1, 0), (1, 2)]),
        ((2, 1), [(1, 0), (1, 2)]),
    ] {
        for exit in exits {
            routes.push(path(&[mid, (1, 1), exit]));
        }
    }
    // opposite corners through the center, two variants each way
    for (a, b) in [((0, 0), (2, 2)), ((2, 2), (0, 0)), ((2, 0), (0, 2)), ((0, 2), (2, 0))] {
        routes.push(path(&[a, (1, a.1), (1, 1), (1, b.1), b]));
        routes.push(path(&[a, (a.0, 1), (1, 1), (b.0, 1), b]));
    }
    // corner doglegs ending at a far boundary midpoint
    for (corner, via, exit) in [
        ((0, 0), (1, 0), (1, 2)),
        ((0, 0), (0, 1), (2, 1)),
        ((2, 0), (2, 1), (0, 1)),
        ((2, 0), (1, 0), (1, 2)),
        ((0, 2), (0, 1), (2, 1)),
        ((0, 2), (1, 2), (1, 0)),
        ((2, 2), (2, 1), (0, 1)),
        ((2, 2), (1, 2), (1, 0)),
    ] {
        routes.push(path(&[corner, via, (1, 1), exit]));
    }
    debug_assert_eq!(routes.len(), GRID_ROUTE_COUNT);
    routes
}

/// The patrol corridor: one street shuttled in both directions, with
/// U-turns at its two ends. After their assigned routes the vehicles
/// funnel onto this street and keep shuttling it, so the fleet stays
/// within one block at every density.
pub const GRID_CORRIDOR_EDGES: [&str; 2] = ["n11n01", "n01n11"];

/// Turn table steering circulating vehicles onto the corridor: corridor
/// edges get overwhelming weight, elsewhere turns toward the corridor are
/// preferred and turns toward the far rim discouraged.
pub fn grid3x3_turns() -> TurnRatios {
    let weight_to = |id: &str| -> f64 {
        if GRID_CORRIDOR_EDGES.contains(&id) {
            return 200.0;
        }
        // target node is the last three characters of the edge id
        let b = id.as_bytes();
        let (c, r) = ((b[b.len() - 2] - b'0') as i32, (b[b.len() - 1] - b'0') as i32);
        // block distance from the target to the nearest corridor end
        let dist = [(1, 1), (0, 1)]
            .iter()
            .map(|&(rc, rr)| (c - rc).abs() + (r - rr).abs())
            .min()
            .unwrap();
        match dist {
            0 => 4.0,
            1 => 1.0,
            _ => 0.25,
        }
    };
    let mut turns = TurnRatios::new();
    for r in 0..3i32 {
        for c in 0..3i32 {
            let here = node_id(c as usize, r as usize);
            let mut neighbors = Vec::new();
            for (dc, dr) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                let (nc, nr) = (c + dc, r + dr);
                if (0..3).contains(&nc) && (0..3).contains(&nr) {
                    neighbors.push(node_id(nc as usize, nr as usize));
                }
            }
            for from in &neighbors {
                let inc = edge_id(from, &here);
                let outs: Vec<(String, f64)> = neighbors
                    .iter()
                    .map(|to| {
                        let out = edge_id(&here, to);
                        let w = weight_to(&out);
                        (out, w)
                    })
                    .collect();
                turns.insert(inc, outs);
            }
        }
    }
    turns
}

/// Scenario config shipped with the grid assets: the sweep's run length
/// and traffic warm-up, everything else at library defaults.
pub fn grid3x3_config_doc() -> String {
    "# 3x3 grid benchmark scenario\n\
     duration_s = 300\n\
     # sources switch on once the fleet has settled into the corridor\n\
     app.start_s = 150\n"
        .to_string()
}

/// Four vehicle classes covering the accel/decel/length/top-speed spread
/// of cars, vans, buses, and heavy trucks.
pub const GRID_VEHICLE_TYPES: [(&str, f64, f64, f64, f64); 4] = [
    ("carA", 3.0, 6.0, 5.0, 30.0),
    ("carB", 2.0, 6.0, 7.5, 30.0),
    ("carC", 1.0, 5.0, 5.0, 20.0),
    ("carD", 1.0, 5.0, 7.5, 10.0),
];

/// Route file for `n_vehicles` vehicles: types and routes assigned round
/// robin, departures spread evenly over the departure window.
pub fn grid3x3_routes_doc(n_vehicles: usize) -> String {
    let mut out = String::from("<routes>\n");
    for (id, accel, decel, length, max_speed) in GRID_VEHICLE_TYPES {
        out.push_str(&format!(
            "  <vType id=\"{id}\" accel=\"{accel}\" decel=\"{decel}\" length=\"{length}\" maxSpeed=\"{max_speed}\"/>\n"
        ));
    }
    for (i, edges) in grid3x3_route_edges().iter().enumerate() {
        out.push_str(&format!("  <route id=\"r{i}\" edges=\"{}\"/>\n", edges.join(" ")));
    }
    for i in 0..n_vehicles {
        let vtype = GRID_VEHICLE_TYPES[i % GRID_VEHICLE_TYPES.len()].0;
        let route = i % GRID_ROUTE_COUNT;
        let depart = i as f64 * GRID_DEPART_WINDOW_S / n_vehicles as f64;
        out.push_str(&format!(
            "  <vehicle id=\"v{i}\" type=\"{vtype}\" route=\"r{route}\" depart=\"{depart}\"/>\n"
        ));
    }
    out.push_str("</routes>\n");
    out
}

/// A ready-to-run scenario on the grid with the default radio stack.
pub fn grid3x3_scenario(
    n_vehicles: usize,
    seed: u64,
    duration_s: f64,
    signals_enabled: bool,
) -> Result<Scenario, InputError> {
    let network = grid3x3_network()?;
    let mut demand = parse_routes(&grid3x3_routes_doc(n_vehicles))?;
    // keep driving after the assigned route, steered onto the patrol
    // corridor, so the population stays on the road and bunched
    demand.turns = Some(grid3x3_turns());
    Ok(Scenario {
        network,
        demand,
        mobility: MobilityConfig { signals_enabled, ..MobilityConfig::default() },
        phy: PhyConfig::default(),
        mac: MacConfig::default(),
        aodv: AodvConfig::default(),
        // hold traffic back until the fleet has worked through its initial
        // routes; measurements then see the settled circulation pattern
        app: AppConfig { start_s: 150.0, ..AppConfig::default() },
        flows: None,
        duration_s,
        seed,
    })
}
