//! Contention calibration: LOW/MID/HIGH effects for a list of kappa values,
//! pooled over 10 repetitions.
//!
//! cargo run --release -p isolab-core --example kappa_sweep -- 0.1 0.2

use isolab_core::app::SampleKind;
use isolab_core::doe::{run_campaign, Arm, Campaign};
use isolab_core::sim::ContentionModel;
use isolab_core::stats::{mean, pct_increase, sample_sd, welch_t_test, DEFAULT_ALPHA};
use isolab_core::system::RunOptions;

fn main() {
    let mut kappas: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("kappa")).collect();
    if kappas.is_empty() {
        kappas = (1..=10).map(|i| i as f64 * 0.02).collect();
    }
    for k in kappas {
        let mut c = Campaign::poc(42, 10);
        c.base.contention = ContentionModel::with_kappa(k);
        let cells = run_campaign(&c, RunOptions::default()).expect("campaign");
        println!("kappa {k:.2}");
        for run in ["LOW_FIFO", "MID_FIFO", "HIGH_FIFO"] {
            for kind in [SampleKind::ReplicaRoundTrip, SampleKind::VoterDecision] {
                let pick = |arm| -> Vec<f64> {
                    cells
                        .iter()
                        .filter(|c| c.key.run_id == run && c.key.arm == arm)
                        .flat_map(|c| c.samples.iter().filter(|s| s.kind == kind).map(|s| s.latency_us))
                        .collect()
                };
                let (a, b) = (pick(Arm::Without), pick(Arm::With));
                let (ma, mb) = (mean(&a).unwrap(), mean(&b).unwrap());
                let (sa, sb) = (sample_sd(&a).unwrap(), sample_sd(&b).unwrap());
                let p = welch_t_test(&a, &b, DEFAULT_ALPHA).unwrap().p;
                println!(
                    "  {run:10} {kind:17} base {ma:8.2} avg+ {:7.2}% sd+ {:8.2}% p {p:.2e}",
                    pct_increase(ma, mb).unwrap(),
                    pct_increase(sa, sb).unwrap()
                );
            }
        }
    }
}
