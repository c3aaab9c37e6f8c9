//! Raw sample CSVs and the summary table built from them.
//!
//! The summary is a pure function of the raw CSV bytes: files are read in
//! name order and rows keep their file order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app::{check_response_requirement, response_band, LatencySample, SampleKind};
use crate::doe::{Arm, CellResult};
use crate::stats::{format_p, mean, pct_increase, sample_sd, t_test, StatsError, TestVariant, DEFAULT_ALPHA};

pub const RAW_HEADER: [&str; 6] = ["config_id", "arm", "vm", "kind", "seq", "latency_us"];
pub const SUMMARY_HEADER: [&str; 9] = [
    "config_id",
    "vm",
    "base_avg_us",
    "base_sd_us",
    "avg_incr_pct",
    "sd_incr_pct",
    "p_value",
    "significant",
    "response_check",
];
pub const MERGED_FILE: &str = "samples.csv";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}, record {record}: {message}")]
    BadRow { path: PathBuf, record: u64, message: String },
    #[error("no raw sample files in {0}")]
    NoData(PathBuf),
    #[error("run {config_id} has no `{arm}` samples")]
    MissingArm { config_id: String, arm: Arm },
    #[error("run {config_id}, {role}: {source}")]
    Stats {
        config_id: String,
        role: Role,
        source: StatsError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub config_id: String,
    pub arm: Arm,
    pub vm: String,
    pub kind: String,
    pub seq: u32,
    pub latency_us: f64,
}

/// File name of one cell, e.g. `r00_LOW_FIFO__without__rep000.csv`.
pub fn cell_file_name(run_index: usize, run_id: &str, arm: Arm, repetition: u32) -> String {
    format!("r{run_index:02}_{run_id}__{arm}__rep{repetition:03}.csv")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_rows<W: std::io::Write>(w: W, cells: &[&CellResult], path: &Path) -> Result<(), ReportError> {
    let csv_err = |source| ReportError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RAW_HEADER).map_err(csv_err)?;
    for cell in cells {
        for s in &cell.samples {
            out.write_record([
                cell.key.run_id.as_str(),
                cell.key.arm.as_str(),
                s.vm.as_str(),
                s.kind.as_str(),
                &s.seq.to_string(),
                &format!("{:.3}", s.latency_us),
            ])
            .map_err(csv_err)?;
        }
    }
    out.flush().map_err(io_err(path))?;
    Ok(())
}

/// Renders the raw CSV of `cells` in memory.
pub fn raw_csv(cells: &[&CellResult]) -> String {
    let mut buf = Vec::new();
    write_rows(&mut buf, cells, Path::new("<memory>")).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8 csv")
}

/// Writes one CSV per cell, or a single merged file. Returns the paths in
/// write order.
pub fn write_raw(dir: &Path, cells: &[CellResult], merged: bool) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    if merged {
        let path = dir.join(MERGED_FILE);
        let refs: Vec<&CellResult> = cells.iter().collect();
        std::fs::write(&path, raw_csv(&refs)).map_err(io_err(&path))?;
        written.push(path);
    } else {
        for cell in cells {
            let k = &cell.key;
            let path = dir.join(cell_file_name(k.run_index, &k.run_id, k.arm, k.repetition));
            std::fs::write(&path, raw_csv(&[cell])).map_err(io_err(&path))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Parses one raw CSV.
pub fn read_raw(path: &Path, bytes: &[u8]) -> Result<Vec<RawRow>, ReportError> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let headers = rdr.headers().map_err(|source| ReportError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    if headers.iter().collect::<Vec<_>>() != RAW_HEADER {
        return Err(ReportError::BadRow {
            path: path.to_path_buf(),
            record: 0,
            message: format!("expected header {}", RAW_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<RawRow>().enumerate() {
        let row = rec.map_err(|source| ReportError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let bad = |message: String| ReportError::BadRow {
            path: path.to_path_buf(),
            record: i as u64 + 1,
            message,
        };
        if SampleKind::parse(&row.kind).is_none() {
            return Err(bad(format!("unknown kind `{}`", row.kind)));
        }
        if !(row.latency_us >= 0.0) {
            return Err(bad(format!("negative latency {}", row.latency_us)));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Reads every `*.csv` in `dir`, in file-name order.
pub fn read_raw_dir(dir: &Path) -> Result<Vec<RawRow>, ReportError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(ReportError::NoData(dir.to_path_buf()));
    }
    let mut rows = Vec::new();
    for f in files {
        let bytes = std::fs::read(&f).map_err(io_err(&f))?;
        rows.extend(read_raw(&f, &bytes)?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Replicas,
    Voter,
}

impl Role {
    pub fn of(kind: SampleKind) -> Role {
        match kind {
            SampleKind::ReplicaRoundTrip => Role::Replicas,
            SampleKind::VoterDecision => Role::Voter,
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Replicas => "Replicas",
            Role::Voter => "Voter",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub config_id: String,
    pub vm: Role,
    pub base_avg_us: f64,
    pub base_sd_us: f64,
    pub avg_incr_pct: f64,
    pub sd_incr_pct: f64,
    pub p_value: f64,
    pub significant: bool,
    pub response_check: bool,
    pub n_without: usize,
    pub n_with: usize,
}

impl SummaryRow {
    /// Formatted cells, shared by the text table and the CSV.
    pub fn cells(&self) -> [String; 9] {
        [
            self.config_id.clone(),
            self.vm.to_string(),
            format!("{:.2}", self.base_avg_us),
            format!("{:.2}", self.base_sd_us),
            format!("{:.2}", self.avg_incr_pct),
            format!("{:.2}", self.sd_incr_pct),
            format_p(self.p_value),
            if self.significant { "yes" } else { "no" }.into(),
            if self.response_check { "pass" } else { "fail" }.into(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub variant: TestVariant,
    pub alpha: f64,
}

/// One row per (run, role). Replica samples of both replica VMs are pooled,
/// and so are repetitions.
pub fn summarize(rows: &[RawRow], variant: TestVariant) -> Result<Summary, ReportError> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<(String, Role, Arm), Vec<f64>> = BTreeMap::new();
    for r in rows {
        if !order.contains(&r.config_id) {
            order.push(r.config_id.clone());
        }
        let kind = SampleKind::parse(&r.kind).expect("validated on read");
        groups
            .entry((r.config_id.clone(), Role::of(kind), r.arm))
            .or_default()
            .push(r.latency_us);
    }
    let mut out = Vec::new();
    for id in &order {
        for arm in [Arm::Without, Arm::With] {
            if !groups.keys().any(|(c, _, a)| c == id && *a == arm) {
                return Err(ReportError::MissingArm {
                    config_id: id.clone(),
                    arm,
                });
            }
        }
        for role in [Role::Replicas, Role::Voter] {
            let get = |arm| groups.get(&(id.clone(), role, arm));
            let (base, stressed) = match (get(Arm::Without), get(Arm::With)) {
                (None, None) => continue,
                (Some(a), Some(b)) => (a, b),
                (None, _) => {
                    return Err(ReportError::MissingArm {
                        config_id: id.clone(),
                        arm: Arm::Without,
                    })
                }
                (_, None) => {
                    return Err(ReportError::MissingArm {
                        config_id: id.clone(),
                        arm: Arm::With,
                    })
                }
            };
            let stats_err = |source| ReportError::Stats {
                config_id: id.clone(),
                role,
                source,
            };
            let (ma, mb) = (mean(base).map_err(stats_err)?, mean(stressed).map_err(stats_err)?);
            let (sa, sb) = (sample_sd(base).map_err(stats_err)?, sample_sd(stressed).map_err(stats_err)?);
            let test = t_test(variant, base, stressed, DEFAULT_ALPHA);
            // identical arms: nothing to test, report no effect
            let (p, significant) = match test {
                Ok(t) => (t.p, t.significant),
                Err(StatsError::ZeroVariance) if base == stressed => (1.0, false),
                Err(e) => return Err(stats_err(e)),
            };
            let all: Vec<f64> = base.iter().chain(stressed.iter()).copied().collect();
            out.push(SummaryRow {
                config_id: id.clone(),
                vm: role,
                base_avg_us: ma,
                base_sd_us: sa,
                avg_incr_pct: pct_increase(ma, mb).map_err(stats_err)?,
                sd_incr_pct: if sa > 0.0 {
                    pct_increase(sa, sb).map_err(stats_err)?
                } else {
                    0.0
                },
                p_value: p,
                significant,
                response_check: check_response_requirement(&all).pass,
                n_without: base.len(),
                n_with: stressed.len(),
            });
        }
    }
    Ok(Summary {
        rows: out,
        variant,
        alpha: DEFAULT_ALPHA,
    })
}

impl Summary {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SUMMARY_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.cells()).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    pub fn to_text(&self) -> String {
        let mut table: Vec<[String; 9]> = vec![SUMMARY_HEADER.map(String::from)];
        table.extend(self.rows.iter().map(|r| r.cells()));
        let widths: Vec<usize> = (0..9).map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut s = String::new();
        for (i, row) in table.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, v)| if c < 2 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
                .collect();
            writeln!(s, "{}", line.join("  ").trim_end()).unwrap();
            if i == 0 {
                writeln!(s, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * 8)).unwrap();
            }
        }
        s.push('\n');
        s.push_str(&self.footer());
        s
    }

    pub fn footer(&self) -> String {
        let test = match self.variant {
            TestVariant::Welch => "Welch two-sample t-test (unequal variances)",
            TestVariant::Pooled => "Student two-sample t-test (pooled variance)",
        };
        let n = self.rows.first().map_or(String::new(), |r| format!(" n = {}/{} (without/with) in the first row.", r.n_without, r.n_with));
        format!(
            "p-values: {test}, two-tailed, alpha = {}.\n\
             Replicas rows pool the round trips of both replica VMs and all repetitions.{n}\n\
             response_check: every sample of the row within the {} band's upper bound.\n",
            self.alpha,
            response_band()
        )
    }
}

/// Convenience for in-process use: summary straight from campaign cells,
/// through the CSV encoding so the result matches `report` on the files.
pub fn summarize_cells(cells: &[CellResult], variant: TestVariant) -> Result<Summary, ReportError> {
    let refs: Vec<&CellResult> = cells.iter().collect();
    let text = raw_csv(&refs);
    let rows = read_raw(Path::new("<memory>"), text.as_bytes())?;
    summarize(&rows, variant)
}

/// Samples of one kind, for callers that skip the CSV layer.
pub fn latencies(samples: &[LatencySample], kind: SampleKind) -> Vec<f64> {
    samples.iter().filter(|s| s.kind == kind).map(|s| s.latency_us).collect()
}
