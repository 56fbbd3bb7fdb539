use std::time::Instant;

use dqstab::freq::FrequencyGrid;
use dqstab::params::SystemParams;
use dqstab::sweep::{default_families, run_family, SweepOutcome};

fn main() {
    let base = SystemParams::default();
    let grid = FrequencyGrid::default();
    let t0 = Instant::now();
    for fam in default_families() {
        let rep = run_family(&base, &fam, &grid).unwrap();
        println!("== {} ({})", fam.name, rep.path);
        for e in &rep.entries {
            match &e.outcome {
                SweepOutcome::Decided { report } => {
                    println!(
                        "  {:>9.4}: ext {:?} eig {:?} (max_re {:+.4}) | f_gnc {:.4} Hz f_eig {:.4} Hz offset {:?} | std {:?} closest {:.4}",
                        e.value,
                        report.extended.verdict,
                        report.eigen.verdict,
                        report.eigen.max_real,
                        report.extended.closest.f_hz,
                        report.eigen.dominant.f_hz,
                        report.critical_freq_offset_intervals.map(|v| (v * 100.0).round() / 100.0),
                        report.standard.verdict,
                        report.extended.closest.distance,
                    );
                }
                SweepOutcome::Marginal { detail } => {
                    println!("  {:>9.4}: MARGINAL ({detail})", e.value);
                }
            }
        }
    }
    println!("total {:.1} s", t0.elapsed().as_secs_f64());
}
