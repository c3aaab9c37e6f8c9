use std::path::Path;
use std::process::{Command, Output};

fn isolab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isolab")).args(args).output().unwrap()
}

fn poc_config() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/poc.toml").display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn plan_lists_the_three_runs() {
    let o = isolab(&["plan", "--config", &poc_config()]);
    assert_eq!(o.status.code(), Some(0));
    let ids: Vec<String> = stdout(&o).lines().filter(|l| !l.starts_with(' ') && l.contains("_FIFO")).map(String::from).collect();
    assert_eq!(ids, ["LOW_FIFO", "MID_FIFO", "HIGH_FIFO"]);
}

#[test]
fn plan_two_by_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "[[factor]]\nname = \"stress\"\nlevels = [\"Low\", \"High\"]\n[[factor]]\nname = \"scheduler\"\nlevels = [\"FIFO\", \"RR\"]\n",
    )
    .unwrap();
    let o = isolab(&["plan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("4 runs"));
    for id in ["LOW_FIFO", "LOW_RR", "HIGH_FIFO", "HIGH_RR"] {
        assert!(stdout(&o).lines().any(|l| l == id), "{id}");
    }
}

#[test]
fn malformed_config_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[app]\nsamples = 35\nsamples_typo = 3\n").unwrap();
    let o = isolab(&["plan", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");

    std::fs::write(&cfg, "[app\n").unwrap();
    assert_eq!(isolab(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));

    std::fs::write(&cfg, "[app]\nsamples = 1\n").unwrap();
    assert_eq!(isolab(&["plan", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn run_writes_six_files_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = isolab(&["run", "--config", &poc_config(), "--out", d.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let files = csv_files(&a.path().join("raw"));
    assert_eq!(files.len(), 6);
    assert_eq!(files[0], "r00_LOW_FIFO__with__rep000.csv");
    for f in &files {
        let x = std::fs::read(a.path().join("raw").join(f)).unwrap();
        let y = std::fs::read(b.path().join("raw").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
        let text = String::from_utf8(x).unwrap();
        assert!(text.starts_with("config_id,arm,vm,kind,seq,latency_us\n"));
        // 70 replica round trips + 35 voter decisions
        assert_eq!(text.lines().count(), 1 + 105, "{f}");
    }

    let o = isolab(&["report", "--out", a.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(a.path().join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    for line in csv.lines().skip(1).filter(|l| l.contains(",Voter,")) {
        assert!(line.ends_with(",pass"), "{line}");
    }
    let txt = std::fs::read_to_string(a.path().join("summary.txt")).unwrap();
    assert!(txt.contains("Welch"));
    let o2 = isolab(&["report", "--out", b.path().to_str().unwrap()]);
    assert_eq!(o2.status.code(), Some(0));
    assert_eq!(csv, std::fs::read_to_string(b.path().join("summary.csv")).unwrap());
}

#[test]
fn repetitions_and_merged() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    let o = isolab(&["run", "--repetitions", "10", "--seed", "5", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(csv_files(&d.path().join("raw")).len(), 60);

    let m = tempfile::tempdir().unwrap();
    let o = isolab(&["run", "--merged", "--trace", "--out", m.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(csv_files(&m.path().join("raw")), ["samples.csv"]);
    let merged = std::fs::read_to_string(m.path().join("raw/samples.csv")).unwrap();
    assert_eq!(merged.lines().count(), 1 + 6 * 105);
    assert_eq!(std::fs::read_dir(m.path().join("trace")).unwrap().count(), 6);

    let pooled = isolab(&["report", "--pooled", "--out", m.path().to_str().unwrap()]);
    assert_eq!(pooled.status.code(), Some(0));
    assert!(stdout(&pooled).contains("pooled variance"));
}

#[test]
fn report_errors_exit_4() {
    let d = tempfile::tempdir().unwrap();
    let o = isolab(&["report", "--raw", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));

    let o = isolab(&["run", "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    std::fs::remove_file(d.path().join("raw/r01_MID_FIFO__with__rep000.csv")).unwrap();
    let o = isolab(&["report", "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("MID_FIFO"));
}

#[test]
fn zero_stress_campaign_shows_no_effect() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.toml");
    // stress vCPUs get a tiny server and no slack, contention off
    std::fs::write(
        &cfg,
        "[rtds]\nstress_budget_us = 1\nstress_period_us = 10000000\nstress_extratime = false\n[contention]\nenabled = false\n",
    )
    .unwrap();
    let out = d.path().join("o");
    let o = isolab(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = isolab(&["report", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let incr: f64 = cells[4].parse().unwrap();
        assert!(incr.abs() < 1.0, "{line}");
        assert_eq!(cells[7], "no", "{line}");
    }
}
