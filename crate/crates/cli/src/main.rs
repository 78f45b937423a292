mod chart;
mod sweep;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use vanetsim_core::engine;
use vanetsim_core::metrics::{adr, per_run_csv, rd_pct, pl_pct};
use vanetsim_core::scenario::load_scenario;

#[derive(Parser)]
#[command(
    name = "vanetsim",
    version,
    about = "Deterministic VANET simulator: signalized road traffic under an 802.11/AODV stack"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check scenario inputs without simulating
    Validate(ScenarioArgs),
    /// Simulate one scenario and write traces plus a counters CSV
    Run(RunArgs),
    /// Simulate every vehicle-count x seed cell and summarize delivery metrics
    Sweep(sweep::SweepArgs),
    /// Render SVG charts from a sweep summary
    Report(ReportArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Network file prefix: expects <prefix>.nod.xml, .edg.xml, .con.xml
    /// and, when present, .tll.xml
    #[arg(long)]
    net: PathBuf,
    /// Vehicle and route definitions (.rou.xml)
    #[arg(long)]
    routes: PathBuf,
    /// Turn ratios steering junction route choice (.turns.xml)
    #[arg(long)]
    turns: Option<PathBuf>,
    /// Scenario settings, one `key = value` per line
    #[arg(long)]
    config: Option<PathBuf>,
    /// Simulation seed
    #[arg(long, default_value_t = 2)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Directory for the trace and counter files
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep summary CSV (written by `vanetsim sweep`)
    #[arg(long)]
    summary: PathBuf,
    /// Directory for the chart files
    #[arg(long)]
    out: PathBuf,
}

impl ScenarioArgs {
    fn load(&self) -> Result<vanetsim_core::engine::Scenario> {
        load_scenario(
            &self.net,
            &self.routes,
            self.turns.as_deref(),
            self.config.as_deref(),
            self.seed,
        )
        .map_err(anyhow::Error::from)
    }
}

fn cmd_validate(args: &ScenarioArgs) -> Result<()> {
    let sc = args.load()?;
    let flows = match &sc.flows {
        Some(f) => f.len().to_string(),
        None => "auto".into(),
    };
    println!(
        "ok: {} nodes, {} edges, {} vehicles, {} flows, {} s at seed {}",
        sc.network.nodes.len(),
        sc.network.edges.len(),
        sc.demand.vehicles.len(),
        flows,
        sc.duration_s,
        sc.seed
    );
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let sc = args.scenario.load()?;
    let out = engine::run(&sc)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let write = |name: &str, data: &str| -> Result<PathBuf> {
        let path = args.out.join(name);
        fs::write(&path, data).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    };
    write("mobility.trace", &out.mobility_trace)?;
    write("events.trace", &out.event_trace)?;
    let mut cell = BTreeMap::new();
    cell.insert(
        sc.demand.vehicles.len() as u32,
        vec![(sc.seed, out.counters.clone())],
    );
    write("counters.csv", &per_run_csv(&cell))?;
    let runs = [out.counters];
    let (_, _, adr_pct) = adr(&runs)?;
    println!(
        "done: sent {} received {} adr {:.2}% rd {:.2}% pl {:.2}% over {} flows -> {}",
        runs[0].ps,
        runs[0].pr,
        adr_pct,
        rd_pct(&runs)?,
        pl_pct(&runs)?,
        out.flows.len(),
        args.out.display()
    );
    Ok(())
}

/// Rows of a sweep summary: (n_vehicles, adr%, rd%, pl%).
fn parse_summary(path: &Path) -> Result<Vec<(u32, f64, f64, f64)>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.starts_with("n_vehicles,adr_pct,rd_pct,pl_pct") => {}
        _ => bail!("{}: not a sweep summary (unexpected header)", path.display()),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let parse = |what: &str, v: Option<&&str>| -> Result<f64> {
            v.and_then(|s| s.parse().ok())
                .with_context(|| format!("{}:{}: bad {what} value", path.display(), i + 2))
        };
        rows.push((
            parse("n_vehicles", cols.first())? as u32,
            parse("adr_pct", cols.get(1))?,
            parse("rd_pct", cols.get(2))?,
            parse("pl_pct", cols.get(3))?,
        ));
    }
    if rows.is_empty() {
        bail!("{}: summary has no data rows", path.display());
    }
    Ok(rows)
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let rows = parse_summary(&args.summary)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;

    let xs: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
    let series = |ys: Vec<f64>, label, color| chart::Series {
        label,
        color,
        points: xs.iter().copied().zip(ys).collect(),
    };

    let adr_chart = chart::line_chart(
        "Average delivery ratio vs vehicle count",
        "vehicles",
        "ADR %",
        &[series(rows.iter().map(|r| r.1).collect(), "ADR %", "#1f77b4")],
    );
    let drops_chart = chart::line_chart(
        "Router drop and packet loss vs vehicle count",
        "vehicles",
        "percent",
        &[
            series(rows.iter().map(|r| r.2).collect(), "RD %", "#d62728"),
            series(rows.iter().map(|r| r.3).collect(), "PL %", "#2ca02c"),
        ],
    );

    for (name, svg) in [("adr.svg", adr_chart), ("drops.svg", drops_chart)] {
        let path = args.out.join(name);
        fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Validate(args) => cmd_validate(args),
        Cmd::Run(args) => cmd_run(args),
        Cmd::Sweep(args) => sweep::cmd_sweep(args),
        Cmd::Report(args) => cmd_report(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
