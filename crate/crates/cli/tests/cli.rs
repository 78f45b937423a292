//! End-to-end checks of the vanetsim binary: exit codes, output files, and
//! the error diagnostics promised to operators.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vanetsim"))
}

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/grid3x3")
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("vanetsim_cli_{name}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn scenario_flags(cmd: &mut Command) -> &mut Command {
    cmd.arg("--net")
        .arg(assets().join("grid3x3"))
        .arg("--turns")
        .arg(assets().join("grid3x3.turns.xml"))
        .arg("--config")
        .arg(assets().join("scenario.conf"))
}

fn check(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed:\n{}\n{}",
        text(&out.stdout),
        text(&out.stderr)
    );
}

#[test]
fn validate_reports_scenario_shape() {
    let mut cmd = bin();
    cmd.arg("validate").arg("--routes").arg(assets().join("grid3x3_n10.rou.xml"));
    let out = scenario_flags(&mut cmd).output().unwrap();
    check(&out, "validate");
    let stdout = text(&out.stdout);
    assert!(stdout.contains("ok: 9 nodes, 24 edges, 10 vehicles"), "{stdout}");
}

#[test]
fn run_writes_traces_and_counters() {
    let dir = tmp_dir("run");
    let mut cmd = bin();
    cmd.arg("run")
        .arg("--routes")
        .arg(assets().join("grid3x3_n10.rou.xml"))
        .arg("--seed")
        .arg("2")
        .arg("--out")
        .arg(&dir);
    let out = scenario_flags(&mut cmd).output().unwrap();
    check(&out, "run");
    for name in ["mobility.trace", "events.trace", "counters.csv"] {
        let path = dir.join(name);
        assert!(
            fs::metadata(&path).map(|m| m.len() > 0).unwrap_or(false),
            "{name} missing or empty"
        );
    }
    let counters = fs::read_to_string(dir.join("counters.csv")).unwrap();
    assert!(counters.starts_with("n_vehicles,seed,ps,pr,rd,pl\n10,2,"), "{counters}");
}

#[test]
fn missing_net_flag_prints_usage() {
    let out = bin().arg("run").arg("--routes").arg("x.rou.xml").output().unwrap();
    assert!(!out.status.success());
    let stderr = text(&out.stderr);
    assert!(stderr.contains("--net"), "{stderr}");
    assert!(stderr.contains("Usage"), "{stderr}");
}

#[test]
fn malformed_edge_xml_names_file_and_line() {
    let dir = tmp_dir("badnet");
    for name in ["grid3x3.nod.xml", "grid3x3.con.xml"] {
        fs::copy(assets().join(name), dir.join(name)).unwrap();
    }
    fs::write(
        dir.join("grid3x3.edg.xml"),
        "<edges>\n  <edge id=\"broken\" from=\"n00\"/>\n</edges>\n",
    )
    .unwrap();
    let out = bin()
        .arg("run")
        .arg("--net")
        .arg(dir.join("grid3x3"))
        .arg("--routes")
        .arg(assets().join("grid3x3_n10.rou.xml"))
        .arg("--seed")
        .arg("2")
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = text(&out.stderr);
    assert!(stderr.contains("grid3x3.edg.xml:2"), "{stderr}");
}

#[test]
fn sweep_then_resume_skips_completed_cells() {
    let dir = tmp_dir("sweep");
    let sweep = |resume: bool| {
        let mut cmd = bin();
        cmd.arg("sweep")
            .arg("--routes")
            .arg(assets().join("grid3x3_n{n}.rou.xml"))
            .arg("--counts")
            .arg("10")
            .arg("--seeds")
            .arg("2,4")
            .arg("--out")
            .arg(&dir)
            .env("VANETSIM_WORKERS", "2");
        if resume {
            cmd.arg("--resume");
        }
        scenario_flags(&mut cmd).output().unwrap()
    };

    let first = sweep(false);
    check(&first, "sweep");
    assert!(text(&first.stdout).contains("2 run, 0 resumed, 0 failed"));
    let summary = fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("n_vehicles,adr_pct,rd_pct,pl_pct,seeds\n10,"), "{summary}");
    assert!(summary.contains(",2;4\n"), "{summary}");
    let per_run = fs::read_to_string(dir.join("per_run.csv")).unwrap();
    assert_eq!(per_run.lines().count(), 3, "{per_run}");
    for name in ["run_n10_s2.csv", "run_n10_s4.csv"] {
        assert!(dir.join("runs").join(name).exists(), "{name} missing");
    }

    let second = sweep(true);
    check(&second, "sweep --resume");
    assert!(text(&second.stdout).contains("0 run, 2 resumed, 0 failed"));
    assert_eq!(fs::read_to_string(dir.join("summary.csv")).unwrap(), summary);
}

#[test]
fn sweep_records_failures_and_exits_nonzero() {
    let dir = tmp_dir("sweepfail");
    let mut cmd = bin();
    cmd.arg("sweep")
        .arg("--routes")
        .arg(assets().join("no_such_n{n}.rou.xml"))
        .arg("--counts")
        .arg("10")
        .arg("--seeds")
        .arg("2,4")
        .arg("--out")
        .arg(&dir)
        .env("VANETSIM_WORKERS", "1");
    let out = scenario_flags(&mut cmd).output().unwrap();
    assert!(!out.status.success());
    let stderr = text(&out.stderr);
    assert!(stderr.contains("failed n=10 seed=2"), "{stderr}");
    assert!(stderr.contains("failed n=10 seed=4"), "{stderr}");
    assert!(stderr.contains("2 of 2 cells failed"), "{stderr}");
    // the summary is still written, with the incomplete row flagged
    let summary = fs::read_to_string(dir.join("summary.csv")).unwrap();
    assert_eq!(summary, "n_vehicles,adr_pct,rd_pct,pl_pct,seeds\n");
}

#[test]
fn sweeping_multiple_counts_needs_a_routes_placeholder() {
    let mut cmd = bin();
    cmd.arg("sweep")
        .arg("--routes")
        .arg(assets().join("grid3x3_n10.rou.xml"))
        .arg("--counts")
        .arg("10,20")
        .arg("--seeds")
        .arg("2")
        .arg("--out")
        .arg(tmp_dir("noplaceholder"));
    let out = scenario_flags(&mut cmd).output().unwrap();
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("{n} placeholder"), "{}", text(&out.stderr));
}

fn table_summary() -> &'static str {
    "n_vehicles,adr_pct,rd_pct,pl_pct,seeds\n\
     10,87.68,2.01,12.32,2;4;6;8;10\n\
     20,79.25,4.10,20.75,2;4;6;8;10\n\
     30,71.03,6.20,28.97,2;4;6;8;10\n\
     40,55.00,9.00,45.00,2;4;6;8;10\n\
     50,40.12,11.50,59.88,2;4;6;8;10\n\
     60,27.40,13.00,72.60,2;4;6;8;10\n\
     70,16.61,14.20,83.39,2;4;6;8;10\n"
}

#[test]
fn report_renders_deterministic_charts() {
    let dir = tmp_dir("report");
    let summary = dir.join("summary.csv");
    fs::write(&summary, table_summary()).unwrap();
    let render = || {
        let out = bin()
            .arg("report")
            .arg("--summary")
            .arg(&summary)
            .arg("--out")
            .arg(&dir)
            .output()
            .unwrap();
        check(&out, "report");
        (
            fs::read(dir.join("adr.svg")).unwrap(),
            fs::read(dir.join("drops.svg")).unwrap(),
        )
    };
    let (adr_a, drops_a) = render();
    let (adr_b, drops_b) = render();
    assert_eq!(adr_a, adr_b, "adr.svg bytes changed between runs");
    assert_eq!(drops_a, drops_b, "drops.svg bytes changed between runs");

    let adr = text(&adr_a);
    assert_eq!(adr.matches("<polyline").count(), 1);
    assert_eq!(adr.matches("<circle").count(), 7, "one marker per density");
    let drops = text(&drops_a);
    assert_eq!(drops.matches("<polyline").count(), 2, "RD and PL share the axes");
    assert!(drops.contains("RD %") && drops.contains("PL %"), "{drops}");
}

#[test]
fn report_rejects_missing_and_empty_summaries() {
    let dir = tmp_dir("reportbad");
    let out = bin()
        .arg("report")
        .arg("--summary")
        .arg(dir.join("missing.csv"))
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("missing.csv"), "{}", text(&out.stderr));

    let empty = dir.join("empty.csv");
    fs::write(&empty, "n_vehicles,adr_pct,rd_pct,pl_pct,seeds\n").unwrap();
    let out = bin()
        .arg("report")
        .arg("--summary")
        .arg(&empty)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(text(&out.stderr).contains("no data rows"), "{}", text(&out.stderr));
}
