//! The density sweep: one simulation per vehicle-count x seed cell, fanned
//! out to a bounded worker pool. Each worker owns its run end to end, so
//! per-run determinism is untouched; results are merged once all workers
//! finish. A failed cell is recorded and reported without stopping the rest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::Args;

use vanetsim_core::engine;
use vanetsim_core::metrics::{per_run_csv, summarize_sweep, summary_csv, CounterSet};
use vanetsim_core::scenario::load_scenario;

#[derive(Args)]
pub struct SweepArgs {
    /// Network file prefix shared by every cell
    #[arg(long)]
    net: PathBuf,
    /// Route file path or template; `{n}` expands to the vehicle count
    #[arg(long)]
    routes: String,
    /// Turn ratios shared by every cell
    #[arg(long)]
    turns: Option<PathBuf>,
    /// Scenario settings shared by every cell
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; per-cell counters land in its `runs/` subdirectory
    #[arg(long)]
    out: PathBuf,
    /// Vehicle counts to simulate
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50,60,70")]
    counts: Vec<u32>,
    /// Seeds simulated per vehicle count
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8,10")]
    seeds: Vec<u64>,
    /// Worker pool size; the VANETSIM_WORKERS variable takes precedence
    #[arg(long)]
    workers: Option<usize>,
    /// Skip cells whose counters file already exists in the output directory
    #[arg(long)]
    resume: bool,
}

fn worker_count(args: &SweepArgs, tasks: usize) -> Result<usize> {
    let configured = match std::env::var("VANETSIM_WORKERS") {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&w| w > 0)
            .with_context(|| format!("VANETSIM_WORKERS=\"{v}\" is not a positive integer"))?,
        Err(_) => match args.workers {
            Some(0) => bail!("--workers must be positive"),
            Some(w) => w,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    Ok(configured.min(tasks).max(1))
}

fn cell_file(out: &Path, n: u32, seed: u64) -> PathBuf {
    out.join("runs").join(format!("run_n{n}_s{seed}.csv"))
}

/// Read a previously written one-row cell file back into counters. Drop
/// attribution is not kept there, so the reasons map stays empty; every
/// summary figure needs only ps, pr and rd.
fn read_cell(path: &Path, n: u32, seed: u64) -> Option<CounterSet> {
    let text = fs::read_to_string(path).ok()?;
    let row = text.lines().nth(1)?;
    let cols: Vec<&str> = row.split(',').collect();
    if cols.len() < 6 || cols[0].parse() != Ok(n) || cols[1].parse() != Ok(seed) {
        return None;
    }
    Some(CounterSet {
        ps: cols[2].parse().ok()?,
        pr: cols[3].parse().ok()?,
        rd: cols[4].parse().ok()?,
        drops_by_reason: BTreeMap::new(),
    })
}

fn routes_for(template: &str, n: u32) -> PathBuf {
    PathBuf::from(template.replace("{n}", &n.to_string()))
}

fn run_cell(args: &SweepArgs, n: u32, seed: u64) -> Result<CounterSet> {
    let sc = load_scenario(
        &args.net,
        &routes_for(&args.routes, n),
        args.turns.as_deref(),
        args.config.as_deref(),
        seed,
    )?;
    let out = engine::run(&sc)?;
    let path = cell_file(&args.out, n, seed);
    let mut cell = BTreeMap::new();
    cell.insert(n, vec![(seed, out.counters.clone())]);
    fs::write(&path, per_run_csv(&cell))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(out.counters)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    if args.counts.is_empty() || args.seeds.is_empty() {
        bail!("--counts and --seeds must be non-empty");
    }
    if args.counts.len() > 1 && !args.routes.contains("{n}") {
        bail!("--routes needs a {{n}} placeholder to sweep more than one vehicle count");
    }
    fs::create_dir_all(args.out.join("runs"))
        .with_context(|| format!("creating {}", args.out.join("runs").display()))?;

    let mut tasks = Vec::new();
    let mut resumed = 0usize;
    let mut cells: BTreeMap<u32, Vec<(u64, CounterSet)>> = BTreeMap::new();
    for &n in &args.counts {
        for &seed in &args.seeds {
            match args.resume.then(|| read_cell(&cell_file(&args.out, n, seed), n, seed)) {
                Some(Some(counters)) => {
                    cells.entry(n).or_default().push((seed, counters));
                    resumed += 1;
                }
                _ => tasks.push((n, seed)),
            }
        }
    }

    let workers = worker_count(args, tasks.len())?;
    let queue = Mutex::new(tasks);
    let results = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let Some((n, seed)) = queue.lock().unwrap().pop() else {
                    return;
                };
                let outcome = run_cell(args, n, seed);
                results.lock().unwrap().push((n, seed, outcome));
            });
        }
    });

    let mut failures = Vec::new();
    for (n, seed, outcome) in results.into_inner().unwrap() {
        match outcome {
            Ok(counters) => cells.entry(n).or_default().push((seed, counters)),
            Err(err) => failures.push(format!("n={n} seed={seed}: {err:#}")),
        }
    }
    for runs in cells.values_mut() {
        runs.sort_by_key(|&(seed, _)| seed);
    }

    let rows = summarize_sweep(&cells, &args.seeds)?;
    let summary = summary_csv(&rows);
    let summary_path = args.out.join("summary.csv");
    fs::write(&summary_path, &summary)
        .with_context(|| format!("writing {}", summary_path.display()))?;
    let per_run_path = args.out.join("per_run.csv");
    fs::write(&per_run_path, per_run_csv(&cells))
        .with_context(|| format!("writing {}", per_run_path.display()))?;

    print!("{summary}");
    let done = cells.values().map(Vec::len).sum::<usize>() - resumed;
    println!("cells: {done} run, {resumed} resumed, {} failed -> {}", failures.len(), summary_path.display());
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("failed {f}");
        }
        bail!("{} of {} cells failed", failures.len(), done + resumed + failures.len());
    }
    Ok(())
}
