//! Packet accounting over finished event traces and the averaged
//! delivery/drop/loss statistics reported per vehicle density.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::MetricError;

/// Data packet type tag in the event trace.
pub const DATA_TYPE: &str = "cbr";

/// Accounting reason for packets still unsettled when the run ends. Never
/// appears in the trace itself; it closes the conservation identity
/// ps = pr + attributed drops.
pub const END_REASON: &str = "END";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CounterSet {
    /// Application-layer sends at flow sources.
    pub ps: u64,
    /// Application-layer receives at flow destinations.
    pub pr: u64,
    /// Drops of data packets at nodes that are neither that packet's
    /// source nor its destination.
    pub rd: u64,
    pub drops_by_reason: BTreeMap<String, u64>,
}

impl CounterSet {
    /// Packet loss: sent minus received.
    pub fn pl(&self) -> u64 {
        self.ps - self.pr
    }

    pub fn total_drops(&self) -> u64 {
        self.drops_by_reason.values().sum()
    }
}

/// Count one run's data-packet fates from its event trace.
///
/// `flows` pairs source node with destination node; flow endpoints are
/// pairwise distinct, so a packet's source determines its destination.
/// Each packet is settled by its first terminal event (delivery or drop);
/// anything logged for it afterwards is a stale duplicate and ignored.
pub fn tally(trace: &str, flows: &[(usize, usize)]) -> Result<CounterSet, MetricError> {
    let per_flow = tally_flows(trace, flows)?;
    let mut total = CounterSet::default();
    for c in per_flow.values() {
        total.ps += c.ps;
        total.pr += c.pr;
        total.rd += c.rd;
        for (reason, n) in &c.drops_by_reason {
            *total.drops_by_reason.entry(reason.clone()).or_insert(0) += n;
        }
    }
    Ok(total)
}

/// Like [`tally`], but keep the counts separated per flow. Every flow gets
/// an entry even if it never sent.
pub fn tally_flows(
    trace: &str,
    flows: &[(usize, usize)],
) -> Result<BTreeMap<(usize, usize), CounterSet>, MetricError> {
    let dst_of: BTreeMap<usize, usize> = flows.iter().copied().collect();
    let mut per_flow: BTreeMap<(usize, usize), CounterSet> =
        flows.iter().map(|&f| (f, CounterSet::default())).collect();
    // packet uid -> (src, dst, settled)
    let mut live: BTreeMap<u64, (usize, usize, bool)> = BTreeMap::new();

    for (lineno, raw) in trace.lines().enumerate() {
        let line = lineno + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() < 7 {
            return Err(MetricError::MalformedTrace {
                line,
                msg: format!("expected at least 7 fields, got {}", fields.len()),
            });
        }
        let event = fields[1];
        let node: usize = fields[2].parse().map_err(|_| MetricError::MalformedTrace {
            line,
            msg: format!("bad node id \"{}\"", fields[2]),
        })?;
        let layer = fields[3];
        let uid: u64 = fields[4].parse().map_err(|_| MetricError::MalformedTrace {
            line,
            msg: format!("bad packet id \"{}\"", fields[4]),
        })?;
        let ptype = fields[5];
        if ptype != DATA_TYPE {
            continue;
        }
        match (event, layer) {
            ("s", "AGT") => {
                let dst = *dst_of.get(&node).ok_or_else(|| MetricError::MalformedTrace {
                    line,
                    msg: format!("data send at node {node}, which is not a flow source"),
                })?;
                if live.insert(uid, (node, dst, false)).is_some() {
                    return Err(MetricError::MalformedTrace {
                        line,
                        msg: format!("packet {uid} originated twice"),
                    });
                }
                per_flow.get_mut(&(node, dst)).unwrap().ps += 1;
            }
            ("r", "AGT") => {
                let entry = live.get_mut(&uid).ok_or_else(|| MetricError::MalformedTrace {
                    line,
                    msg: format!("receive for unknown packet {uid}"),
                })?;
                if node != entry.1 {
                    return Err(MetricError::MalformedTrace {
                        line,
                        msg: format!("packet {uid} received at node {node}, not its destination"),
                    });
                }
                if !entry.2 {
                    entry.2 = true;
                    per_flow.get_mut(&(entry.0, entry.1)).unwrap().pr += 1;
                }
            }
            ("d", _) => {
                if fields.len() < 8 {
                    return Err(MetricError::MalformedTrace {
                        line,
                        msg: "drop line without a reason".into(),
                    });
                }
                let reason = fields[7];
                let entry = live.get_mut(&uid).ok_or_else(|| MetricError::MalformedTrace {
                    line,
                    msg: format!("drop for unknown packet {uid}"),
                })?;
                if !entry.2 {
                    entry.2 = true;
                    let flow = per_flow.get_mut(&(entry.0, entry.1)).unwrap();
                    *flow.drops_by_reason.entry(reason.to_string()).or_insert(0) += 1;
                    if node != entry.0 && node != entry.1 {
                        flow.rd += 1;
                    }
                }
            }
            _ => {}
        }
    }
    for &(src, dst, settled) in live.values() {
        if !settled {
            let flow = per_flow.get_mut(&(src, dst)).unwrap();
            *flow.drops_by_reason.entry(END_REASON.into()).or_insert(0) += 1;
        }
    }
    Ok(per_flow)
}

/// Average delivery ratio over runs: (apr, aps, adr_pct).
pub fn adr(runs: &[CounterSet]) -> Result<(f64, f64, f64), MetricError> {
    if runs.is_empty() {
        return Err(MetricError::NoRuns);
    }
    let apr = runs.iter().map(|r| r.pr as f64).sum::<f64>() / runs.len() as f64;
    let aps = runs.iter().map(|r| r.ps as f64).sum::<f64>() / runs.len() as f64;
    if aps == 0.0 {
        return Err(MetricError::ZeroMeanSent);
    }
    Ok((apr, aps, 100.0 * apr / aps))
}

fn mean_ratio(runs: &[CounterSet], num: impl Fn(&CounterSet) -> u64) -> Result<f64, MetricError> {
    if runs.is_empty() {
        return Err(MetricError::NoRuns);
    }
    let mut acc = 0.0;
    for (i, r) in runs.iter().enumerate() {
        if r.ps == 0 {
            return Err(MetricError::ZeroSent { run: i });
        }
        acc += num(r) as f64 / r.ps as f64;
    }
    Ok(100.0 * acc / runs.len() as f64)
}

/// Router-drop percentage: mean over runs of rd/ps.
pub fn rd_pct(runs: &[CounterSet]) -> Result<f64, MetricError> {
    mean_ratio(runs, |r| r.rd)
}

/// Packet-loss percentage: mean over runs of (ps - pr)/ps.
pub fn pl_pct(runs: &[CounterSet]) -> Result<f64, MetricError> {
    mean_ratio(runs, |r| r.pl())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n_vehicles: u32,
    pub apr: f64,
    pub aps: f64,
    pub adr_pct: f64,
    pub rd_pct: f64,
    pub pl_pct: f64,
    pub seeds: Vec<u64>,
    /// False when some expected seeds are missing from the cell.
    pub complete: bool,
}

/// Collapse per-seed run counters into one row per vehicle count. Cells
/// missing part of `expected_seeds` still produce a row, flagged incomplete.
pub fn summarize_sweep(
    cells: &BTreeMap<u32, Vec<(u64, CounterSet)>>,
    expected_seeds: &[u64],
) -> Result<Vec<SummaryRow>, MetricError> {
    let mut rows = Vec::with_capacity(cells.len());
    for (&n, runs) in cells {
        let counters: Vec<CounterSet> = runs.iter().map(|(_, c)| c.clone()).collect();
        let (apr, aps, adr_pct_v) = adr(&counters)?;
        let rd = rd_pct(&counters)?;
        let pl = pl_pct(&counters)?;
        let seeds: Vec<u64> = runs.iter().map(|(s, _)| *s).collect();
        let complete = expected_seeds.iter().all(|s| seeds.contains(s));
        rows.push(SummaryRow {
            n_vehicles: n,
            apr,
            aps,
            adr_pct: adr_pct_v,
            rd_pct: rd,
            pl_pct: pl,
            seeds,
            complete,
        });
    }
    Ok(rows)
}

/// Render summary rows as CSV: `n_vehicles,adr_pct,rd_pct,pl_pct,seeds`.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("n_vehicles,adr_pct,rd_pct,pl_pct,seeds\n");
    for row in rows {
        let mut seeds = row
            .seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(";");
        if !row.complete {
            seeds.push_str(";INCOMPLETE");
        }
        let _ = writeln!(
            out,
            "{},{:.2},{:.2},{:.2},{}",
            row.n_vehicles, row.adr_pct, row.rd_pct, row.pl_pct, seeds
        );
    }
    out
}

/// Render per-run counters as CSV: `n_vehicles,seed,ps,pr,rd,pl`.
pub fn per_run_csv(cells: &BTreeMap<u32, Vec<(u64, CounterSet)>>) -> String {
    let mut out = String::from("n_vehicles,seed,ps,pr,rd,pl\n");
    for (&n, runs) in cells {
        for (seed, c) in runs {
            let _ = writeln!(out, "{},{},{},{},{},{}", n, seed, c.ps, c.pr, c.rd, c.pl());
        }
    }
    out
}
