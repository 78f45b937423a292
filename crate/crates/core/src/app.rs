//! Application traffic: constant-bit-rate flows over UDP between randomly
//! paired nodes.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::InputError;

pub const UDP_HEADER_BYTES: u32 = 8;
pub const IP_HEADER_BYTES: u32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    /// Application payload per packet, bytes.
    pub packet_size_bytes: u32,
    /// Offered load per flow, bits per second.
    pub rate_bps: f64,
    /// Hard cap on packets originated per flow.
    pub max_packets: u64,
    /// Time the sources switch on, seconds.
    pub start_s: f64,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            packet_size_bytes: 1000,
            rate_bps: 64_000.0,
            max_packets: 2_280_000,
            start_s: 10.0,
        }
    }
}

impl AppConfig {
    pub fn validate(&self) -> Result<(), InputError> {
        if self.packet_size_bytes == 0 {
            return Err(InputError::ConfigKey {
                key: "app.packet_size_bytes".into(),
                msg: "must be positive".into(),
            });
        }
        if !(self.rate_bps > 0.0 && self.rate_bps.is_finite()) {
            return Err(InputError::ConfigKey {
                key: "app.rate_bps".into(),
                msg: format!("must be positive and finite, got {}", self.rate_bps),
            });
        }
        if !(self.start_s >= 0.0 && self.start_s.is_finite()) {
            return Err(InputError::ConfigKey {
                key: "app.start_s".into(),
                msg: format!("must be nonnegative and finite, got {}", self.start_s),
            });
        }
        Ok(())
    }

    /// Gap between consecutive packets of one flow, seconds.
    pub fn interval_s(&self) -> f64 {
        f64::from(self.packet_size_bytes) * 8.0 / self.rate_bps
    }

    /// Departure time of the j-th packet of a flow.
    pub fn send_time(&self, j: u64) -> f64 {
        self.start_s + j as f64 * self.interval_s()
    }

    /// Bytes handed to the network layer per packet (payload + UDP + IP).
    pub fn wire_bytes(&self) -> u32 {
        self.packet_size_bytes + UDP_HEADER_BYTES + IP_HEADER_BYTES
    }
}

/// Number of flows run by default over `n_nodes` nodes: one flow per four
/// nodes, so half the nodes are flow endpoints.
pub fn default_flow_count(n_nodes: usize) -> usize {
    n_nodes / 4
}

/// Draw `k` source/destination pairs over `0..n_nodes` with all `2k`
/// endpoints distinct, via a partial shuffle on the given stream.
pub fn select_flows(
    n_nodes: usize,
    k: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<(usize, usize)>, InputError> {
    if 2 * k > n_nodes {
        return Err(InputError::Scenario(format!(
            "{k} flows need {} distinct endpoints but only {n_nodes} nodes exist",
            2 * k
        )));
    }
    let mut ids: Vec<usize> = (0..n_nodes).collect();
    for i in 0..2 * k {
        let j = rng.gen_range(i..n_nodes);
        ids.swap(i, j);
    }
    Ok((0..k).map(|f| (ids[2 * f], ids[2 * f + 1])).collect())
}

/// Reject flow lists whose endpoints are not pairwise distinct or point
/// outside the node range.
pub fn validate_flows(n_nodes: usize, flows: &[(usize, usize)]) -> Result<(), InputError> {
    let mut seen = std::collections::BTreeSet::new();
    for &(src, dst) in flows {
        for end in [src, dst] {
            if end >= n_nodes {
                return Err(InputError::Scenario(format!(
                    "flow endpoint {end} out of range (nodes: {n_nodes})"
                )));
            }
            if !seen.insert(end) {
                return Err(InputError::Scenario(format!(
                    "node {end} appears in more than one flow endpoint"
                )));
            }
        }
    }
    Ok(())
}
