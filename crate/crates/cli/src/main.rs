//! `isolab plan|run|report`.
//!
//! Exit codes: 0 success, 2 config error, 3 simulation error, 4 analysis error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use isolab_core::config::{ConfigError, ConfigFile};
use isolab_core::doe::{run_campaign, Campaign};
use isolab_core::report::{cell_file_name, read_raw_dir, summarize, write_raw};
use isolab_core::stats::TestVariant;
use isolab_core::system::RunOptions;

#[derive(Parser)]
#[command(name = "isolab", version, about = "Simulated 2oo2 latency campaigns on an RTDS-scheduled platform")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List every run of the design with its parameters.
    Plan(Common),
    /// Simulate all cells and write raw sample CSVs to <out>/raw.
    Run {
        #[command(flatten)]
        common: Common,
        /// Write one merged CSV instead of one file per cell.
        #[arg(long)]
        merged: bool,
        /// Dump the event trace of every cell to <out>/trace.
        #[arg(long)]
        trace: bool,
    },
    /// Summarize raw CSVs into summary.txt and summary.csv.
    Report {
        /// Directory holding the raw CSVs (default: <out>/raw).
        #[arg(long)]
        raw: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        test: TestFlags,
    },
}

#[derive(Args)]
struct Common {
    /// Campaign file; the PoC defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repetitions: Option<u32>,
}

#[derive(Args)]
#[group(multiple = false)]
struct TestFlags {
    /// Welch unequal-variance t-test (default).
    #[arg(long)]
    welch: bool,
    /// Pooled-variance t-test.
    #[arg(long)]
    pooled: bool,
}

impl TestFlags {
    fn variant(&self) -> TestVariant {
        if self.pooled {
            TestVariant::Pooled
        } else {
            TestVariant::Welch
        }
    }
}

enum Failure {
    Config(String),
    Simulation(String),
    Analysis(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Simulation(_) => 3,
            Failure::Analysis(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Simulation(m) | Failure::Analysis(m) => m,
        }
    }
}

fn load(common: &Common) -> Result<(ConfigFile, Campaign, PathBuf), Failure> {
    let mut file = match &common.config {
        Some(path) => ConfigFile::load(path).map_err(|e| match e {
            ConfigError::Io { .. } => Failure::Config(e.to_string()),
            _ => Failure::Config(format!("{}: {e}", path.display())),
        })?,
        None => ConfigFile::default(),
    };
    if let Some(seed) = common.seed {
        file.campaign.seed = seed;
    }
    if let Some(k) = common.repetitions {
        file.campaign.repetitions = k;
    }
    let campaign = file.campaign().map_err(|e| Failure::Config(e.to_string()))?;
    let out = common.out.clone().unwrap_or_else(|| file.output.dir.clone());
    Ok((file, campaign, out))
}

fn plan(common: &Common) -> Result<(), Failure> {
    let (_, campaign, _) = load(common)?;
    let plan = campaign.plan().map_err(|e| Failure::Config(e.to_string()))?;
    println!(
        "{} runs x 2 arms x {} repetitions, master seed {}",
        plan.runs.len(),
        campaign.repetitions,
        campaign.seed
    );
    for run in &plan.runs {
        println!("{}", run.id);
        for (factor, level) in &run.assignment {
            println!("  {factor} = {level}");
        }
        let with = campaign
            .cell_config(run, isolab_core::doe::Arm::With)
            .map_err(|e| Failure::Config(e.to_string()))?;
        for vm in &with.platform.vms {
            let pins: Vec<String> = vm
                .vcpus
                .iter()
                .map(|v| {
                    let aff: Vec<String> = v.affinity.iter().map(|p| p.to_string()).collect();
                    format!("{}@{{{}}} {}/{}us", v.id, aff.join(","), v.params.budget_us, v.params.period_us)
                })
                .collect();
            println!("  vm {} ({:?}, {}): {}", vm.name, vm.role, vm.guest_policy, pins.join(" "));
        }
        let a = &with.app;
        println!(
            "  app: N={} period={}us p_mismatch={} | channel: backend={}us wire={}us | kappa={}{}",
            a.samples,
            a.period_us,
            a.p_mismatch,
            with.channel.backend_cost_us,
            with.channel.wire_delay_us,
            with.contention.kappa,
            if with.contention.enabled { "" } else { " (disabled)" }
        );
    }
    Ok(())
}

fn run(common: &Common, merged: bool, trace: bool) -> Result<(), Failure> {
    let (file, campaign, out) = load(common)?;
    let merged = merged || file.output.merged;
    let sim = |e: &dyn std::fmt::Display| Failure::Simulation(e.to_string());
    let cells = run_campaign(
        &campaign,
        RunOptions {
            keep_trace: trace,
            keep_segments: false,
        },
    )
    .map_err(|e| sim(&e))?;
    let raw = out.join("raw");
    let written = write_raw(&raw, &cells, merged).map_err(|e| sim(&e))?;
    if trace {
        let dir = out.join("trace");
        std::fs::create_dir_all(&dir).map_err(|e| sim(&e))?;
        for c in &cells {
            let k = &c.key;
            let name = cell_file_name(k.run_index, &k.run_id, k.arm, k.repetition).replace(".csv", ".log");
            let body = c.trace.as_deref().unwrap_or_default().join("\n");
            std::fs::write(dir.join(name), body + "\n").map_err(|e| sim(&e))?;
        }
    }
    let samples: usize = cells.iter().map(|c| c.samples.len()).sum();
    println!("{} cells, {samples} samples, {} files in {}", cells.len(), written.len(), raw.display());
    Ok(())
}

fn report(raw: Option<PathBuf>, out: Option<PathBuf>, variant: TestVariant) -> Result<(), Failure> {
    let out = out.unwrap_or_else(|| PathBuf::from("out"));
    let raw = raw.unwrap_or_else(|| out.join("raw"));
    let bad = |e: &dyn std::fmt::Display| Failure::Analysis(e.to_string());
    let rows = read_raw_dir(&raw).map_err(|e| bad(&e))?;
    let summary = summarize(&rows, variant).map_err(|e| bad(&e))?;
    std::fs::create_dir_all(&out).map_err(|e| bad(&e))?;
    let text = summary.to_text();
    write(&out.join("summary.txt"), &text).map_err(|e| bad(&e))?;
    write(&out.join("summary.csv"), &summary.to_csv()).map_err(|e| bad(&e))?;
    print!("{text}");
    Ok(())
}

fn write(path: &Path, body: &str) -> std::io::Result<()> {
    std::fs::write(path, body)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.cmd {
        Cmd::Plan(c) => plan(&c),
        Cmd::Run { common, merged, trace } => run(&common, merged, trace),
        Cmd::Report { raw, out, test } => report(raw, out, test.variant()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
