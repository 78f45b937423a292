//! Scenario assembly: the flat `key = value` config format, the on-disk
//! file layout (`{prefix}.nod.xml` and friends), and loading everything
//! into a runnable [`Scenario`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::aodv::AodvConfig;
use crate::app::AppConfig;
use crate::engine::Scenario;
use crate::error::InputError;
use crate::mac::MacConfig;
use crate::mobility::{parse_routes, parse_turns, MobilityConfig, TrafficDemand};
use crate::phy::PhyConfig;
use crate::road_network::{parse_network, RoadNetwork};

/// Default run length when the config does not set `duration_s`.
pub const DEFAULT_DURATION_S: f64 = 200.0;

/// A parsed flat config file: one `key = value` per line, `#` comments,
/// blank lines ignored. Keys are consumed by the `take_*` accessors;
/// whatever is left over is unknown.
#[derive(Debug, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile, InputError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(InputError::invalid(
                    "config",
                    i as u32 + 1,
                    format!("expected \"key = value\", got \"{raw}\""),
                ));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(InputError::invalid(
                    "config",
                    i as u32 + 1,
                    "empty key or value",
                ));
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(InputError::ConfigKey {
                    key,
                    msg: "set more than once".into(),
                });
            }
        }
        Ok(ConfigFile { entries })
    }

    pub fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn take_parsed<T: std::str::FromStr>(
        &mut self,
        key: &str,
        kind: &str,
    ) -> Result<Option<T>, InputError> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| InputError::ConfigKey {
                key: key.to_string(),
                msg: format!("expected {kind}, got \"{v}\""),
            }),
        }
    }

    pub fn take_f64(&mut self, key: &str) -> Result<Option<f64>, InputError> {
        self.take_parsed(key, "a number")
    }

    pub fn take_u32(&mut self, key: &str) -> Result<Option<u32>, InputError> {
        self.take_parsed(key, "a non-negative integer")
    }

    pub fn take_u64(&mut self, key: &str) -> Result<Option<u64>, InputError> {
        self.take_parsed(key, "a non-negative integer")
    }

    pub fn take_usize(&mut self, key: &str) -> Result<Option<usize>, InputError> {
        self.take_parsed(key, "a non-negative integer")
    }

    pub fn take_bool(&mut self, key: &str) -> Result<Option<bool>, InputError> {
        match self.take(key).as_deref() {
            None => Ok(None),
            Some("true") => Ok(Some(true)),
            Some("false") => Ok(Some(false)),
            Some(v) => Err(InputError::ConfigKey {
                key: key.to_string(),
                msg: format!("expected true or false, got \"{v}\""),
            }),
        }
    }

    /// Error on the first unconsumed key.
    pub fn reject_unknown(self) -> Result<(), InputError> {
        match self.entries.into_keys().next() {
            Some(key) => Err(InputError::UnknownConfigKey { key }),
            None => Ok(()),
        }
    }
}

/// Parse `"0:5,3:7"` into flow endpoint pairs.
fn parse_flow_list(key: &str, value: &str) -> Result<Vec<(usize, usize)>, InputError> {
    let mut flows = Vec::new();
    for part in value.split(',') {
        let bad = || InputError::ConfigKey {
            key: key.to_string(),
            msg: format!("expected a \"src:dst\" pair, got \"{part}\""),
        };
        let (src, dst) = part.trim().split_once(':').ok_or_else(bad)?;
        let src: usize = src.trim().parse().map_err(|_| bad())?;
        let dst: usize = dst.trim().parse().map_err(|_| bad())?;
        flows.push((src, dst));
    }
    Ok(flows)
}

/// Overlay the config file's keys onto a scenario that already carries its
/// network, demand, and defaults. Unknown keys are rejected.
pub fn apply_config(text: &str, scenario: &mut Scenario) -> Result<(), InputError> {
    let mut cfg = ConfigFile::parse(text)?;

    if let Some(v) = cfg.take_f64("duration_s")? {
        scenario.duration_s = v;
    }
    if let Some(v) = cfg.take_bool("signals_enabled")? {
        scenario.mobility.signals_enabled = v;
    }
    if let Some(v) = cfg.take_usize("n_vehicles")? {
        let actual = scenario.demand.vehicles.len();
        if v != actual {
            return Err(InputError::ConfigKey {
                key: "n_vehicles".into(),
                msg: format!("config says {v}, route file defines {actual} vehicles"),
            });
        }
    }

    if let Some(v) = cfg.take_f64("mobility.timestep_s")? {
        scenario.mobility.dt_s = v;
    }
    if let Some(v) = cfg.take_f64("mobility.tau_s")? {
        scenario.mobility.tau_s = v;
    }
    if let Some(v) = cfg.take_f64("mobility.min_gap_m")? {
        scenario.mobility.min_gap_m = v;
    }

    let phy = &mut scenario.phy;
    if let Some(v) = cfg.take_f64("phy.pt_w")? {
        phy.pt_w = v;
    }
    if let Some(v) = cfg.take_f64("phy.freq_hz")? {
        phy.freq_hz = v;
    }
    if let Some(v) = cfg.take_f64("phy.ht_m")? {
        phy.ht_m = v;
    }
    if let Some(v) = cfg.take_f64("phy.hr_m")? {
        phy.hr_m = v;
    }
    if let Some(v) = cfg.take_f64("phy.gt")? {
        phy.gt = v;
    }
    if let Some(v) = cfg.take_f64("phy.gr")? {
        phy.gr = v;
    }
    if let Some(v) = cfg.take_f64("phy.sys_loss")? {
        phy.sys_loss = v;
    }
    let rx = cfg.take_f64("phy.rx_thresh_w")?;
    let cs = cfg.take_f64("phy.cs_thresh_w")?;
    if let Some(v) = rx {
        phy.rx_thresh_w = v;
        // carrier sense follows the decode threshold unless set explicitly
        phy.cs_thresh_w = 0.9 * v;
    }
    if let Some(v) = cs {
        phy.cs_thresh_w = v;
    }

    let mac = &mut scenario.mac;
    if let Some(v) = cfg.take_u32("mac.cw_min")? {
        mac.cw_min = v;
    }
    if let Some(v) = cfg.take_u32("mac.cw_max")? {
        mac.cw_max = v;
    }
    if let Some(v) = cfg.take_u32("mac.retry_limit")? {
        mac.retry_limit = v;
    }
    if let Some(v) = cfg.take_f64("mac.slot_us")? {
        mac.slot_s = v * 1e-6;
    }
    if let Some(v) = cfg.take_f64("mac.sifs_us")? {
        mac.sifs_s = v * 1e-6;
    }
    if let Some(v) = cfg.take_f64("mac.difs_us")? {
        mac.difs_s = v * 1e-6;
    }
    if let Some(v) = cfg.take_f64("mac.data_rate_bps")? {
        mac.data_rate_bps = v;
    }
    if let Some(v) = cfg.take_f64("mac.basic_rate_bps")? {
        mac.basic_rate_bps = v;
    }
    if let Some(v) = cfg.take_usize("mac.ifq_len")? {
        mac.ifq_len = v;
    }

    let aodv = &mut scenario.aodv;
    if let Some(v) = cfg.take_f64("aodv.active_route_timeout_s")? {
        aodv.active_route_timeout_s = v;
    }
    if let Some(v) = cfg.take_u32("aodv.rreq_retries")? {
        aodv.rreq_retries = v;
    }
    if let Some(v) = cfg.take_u32("aodv.ttl_start")? {
        aodv.ttl_start = v;
    }
    if let Some(v) = cfg.take_usize("aodv.buffer_per_dest")? {
        aodv.buffer_per_dest = v;
    }

    let app = &mut scenario.app;
    if let Some(v) = cfg.take_u32("app.packet_size_b")? {
        app.packet_size_bytes = v;
    }
    if let Some(v) = cfg.take_f64("app.rate_bps")? {
        app.rate_bps = v;
    }
    if let Some(v) = cfg.take_f64("app.start_s")? {
        app.start_s = v;
    }
    if let Some(v) = cfg.take_u64("app.max_pkts")? {
        app.max_packets = v;
    }
    if let Some(v) = cfg.take("app.flows") {
        scenario.flows = Some(parse_flow_list("app.flows", &v)?);
    }

    cfg.reject_unknown()
}

/// The four network files addressed by one prefix. The signals file is
/// optional; junctions without programs run the built-in default.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkPaths {
    pub nodes: PathBuf,
    pub edges: PathBuf,
    pub connections: PathBuf,
    pub signals: PathBuf,
}

impl NetworkPaths {
    pub fn from_prefix(prefix: &Path) -> NetworkPaths {
        let with = |suffix: &str| {
            let mut name = prefix.file_name().unwrap_or_default().to_os_string();
            name.push(suffix);
            prefix.with_file_name(name)
        };
        NetworkPaths {
            nodes: with(".nod.xml"),
            edges: with(".edg.xml"),
            connections: with(".con.xml"),
            signals: with(".tll.xml"),
        }
    }
}

fn read(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Swap a parser's generic document label ("edges", "routes", ...) for the
/// path actually read, so diagnostics point at the file on disk.
fn relabel(err: InputError, map: &[(&str, &Path)]) -> InputError {
    let rename = |file: String| -> String {
        map.iter()
            .find(|(label, _)| *label == file)
            .map(|(_, p)| p.display().to_string())
            .unwrap_or(file)
    };
    match err {
        InputError::Xml { file, line, msg } => InputError::Xml {
            file: rename(file),
            line,
            msg,
        },
        InputError::DuplicateId { file, line, id } => InputError::DuplicateId {
            file: rename(file),
            line,
            id,
        },
        InputError::UnknownRef {
            file,
            line,
            kind,
            id,
        } => InputError::UnknownRef {
            file: rename(file),
            line,
            kind,
            id,
        },
        InputError::Invalid { file, line, msg } => InputError::Invalid {
            file: rename(file),
            line,
            msg,
        },
        other => other,
    }
}

/// Read and parse `{prefix}.nod.xml`, `.edg.xml`, `.con.xml`, and (when
/// present on disk) `.tll.xml`.
pub fn load_network(prefix: &Path) -> Result<RoadNetwork, InputError> {
    let paths = NetworkPaths::from_prefix(prefix);
    let nodes = read(&paths.nodes)?;
    let edges = read(&paths.edges)?;
    let conns = read(&paths.connections)?;
    let signals = if paths.signals.exists() {
        Some(read(&paths.signals)?)
    } else {
        None
    };
    parse_network(&nodes, &edges, &conns, signals.as_deref()).map_err(|e| {
        relabel(
            e,
            &[
                ("nodes", paths.nodes.as_path()),
                ("edges", paths.edges.as_path()),
                ("connections", paths.connections.as_path()),
                ("signals", paths.signals.as_path()),
            ],
        )
    })
}

/// Read and parse the route file, plus the turn table when given.
pub fn load_demand(routes: &Path, turns: Option<&Path>) -> Result<TrafficDemand, InputError> {
    let text = read(routes)?;
    let mut demand =
        parse_routes(&text).map_err(|e| relabel(e, &[("routes", routes)]))?;
    if let Some(turns_path) = turns {
        let text = read(turns_path)?;
        let table = parse_turns(&text).map_err(|e| relabel(e, &[("turns", turns_path)]))?;
        demand.turns = Some(table);
    }
    Ok(demand)
}

/// Assemble a validated scenario from files: network prefix, route file,
/// optional turn table, optional config file, and the run seed.
pub fn load_scenario(
    net_prefix: &Path,
    routes: &Path,
    turns: Option<&Path>,
    config: Option<&Path>,
    seed: u64,
) -> Result<Scenario, InputError> {
    let network = load_network(net_prefix)?;
    let demand = load_demand(routes, turns)?;
    let mut scenario = Scenario {
        network,
        demand,
        mobility: MobilityConfig::default(),
        phy: PhyConfig::default(),
        mac: MacConfig::default(),
        aodv: AodvConfig::default(),
        app: AppConfig::default(),
        flows: None,
        duration_s: DEFAULT_DURATION_S,
        seed,
    };
    if let Some(path) = config {
        let text = read(path)?;
        apply_config(&text, &mut scenario)?;
    }
    scenario.validate()?;
    Ok(scenario)
}

/// Render a turn table in the XML form `parse_turns` reads.
pub fn turns_to_document(turns: &crate::mobility::TurnRatios) -> String {
    let mut doc = String::from("<turns>\n");
    for (from, outs) in turns {
        doc.push_str(&format!("  <fromEdge id=\"{from}\">\n"));
        for (to, p) in outs {
            doc.push_str(&format!(
                "    <toEdge id=\"{to}\" probability=\"{p}\"/>\n"
            ));
        }
        doc.push_str("  </fromEdge>\n");
    }
    doc.push_str("</turns>\n");
    doc
}
