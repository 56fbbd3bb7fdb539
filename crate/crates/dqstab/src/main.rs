//! Command-line front end. One analysis mode per invocation; data artifacts
//! (CSV/JSON) always land in the output directory, SVG plots unless
//! suppressed, and a human-readable summary goes to standard output. On
//! failure a machine-readable error record is printed to standard error and
//! the exit code classifies the failure: 1 for configuration problems, 2 for
//! analysis problems.

use std::f64::consts::TAU;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use nalgebra::DMatrix;
use num_complex::Complex64;

use dqstab::config::{RunConfig, SweepSection};
use dqstab::error::{Error, Result};
use dqstab::export;
use dqstab::extract;
use dqstab::freq::TransferSamples;
use dqstab::ident;
use dqstab::model::{self, OperatingPoint};
use dqstab::params::SystemParams;
use dqstab::plot;
use dqstab::sim;
use dqstab::stability::{self, EquivalenceReport, GncReport, LoopSamples};
use dqstab::sweep::{self, SweepFamily, SweepOutcome, SweepReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Tabulate Z_V, Γ_V, Y_C, Ψ_C over the frequency grid.
    Extract,
    /// Generalized Nyquist verdicts for the extended and standard loops.
    Gnc,
    /// Whole-system eigenvalue verdict.
    Eigen,
    /// All three criteria side by side with the agreement check.
    Equivalence,
    /// Equivalence across a parameter sweep (inline, config, or stock).
    Sweep,
    /// Nonlinear time-domain run of the configured scenario.
    Simulate,
    /// Tone-injection identification compared against extraction.
    Identify,
}

#[derive(Parser)]
#[command(
    name = "dqstab",
    version,
    about = "Small-signal stability analysis of a grid-forming / grid-following converter pair"
)]
struct Cli {
    /// Analysis mode.
    #[arg(long, value_enum)]
    mode: Mode,

    /// TOML configuration file; omitted means stock parameters.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for data files and plots.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Inline sweep, e.g. "gfl.alpha_cc=100,90,80,70". Overrides the config.
    #[arg(long)]
    sweep: Option<String>,

    /// Skip SVG plot emission.
    #[arg(long)]
    no_plots: bool,

    /// Lower edge of the frequency grid (Hz).
    #[arg(long)]
    freq_min: Option<f64>,

    /// Upper edge of the frequency grid (Hz).
    #[arg(long)]
    freq_max: Option<f64>,

    /// Frequency grid density.
    #[arg(long)]
    points_per_decade: Option<usize>,
}

fn main() {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("DQSTAB_WORKERS") {
        if let Ok(n) = n.parse::<usize>() {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
        }
    }
    if let Err(e) = run(&cli) {
        let record = serde_json::json!({
            "error": { "kind": e.kind(), "message": e.to_string() }
        });
        eprintln!("{record}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(f) = cli.freq_min {
        cfg.grid.f_min_hz = f;
    }
    if let Some(f) = cli.freq_max {
        cfg.grid.f_max_hz = f;
    }
    if let Some(n) = cli.points_per_decade {
        cfg.grid.points_per_decade = n;
    }
    if let Some(arg) = &cli.sweep {
        cfg.sweep = Some(parse_sweep_arg(arg)?);
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cli.out)?;

    match cli.mode {
        Mode::Extract => mode_extract(&cfg, cli),
        Mode::Gnc => mode_gnc(&cfg, cli),
        Mode::Eigen => mode_eigen(&cfg, cli),
        Mode::Equivalence => mode_equivalence(&cfg, cli),
        Mode::Sweep => mode_sweep(&cfg, cli),
        Mode::Simulate => mode_simulate(&cfg, cli),
        Mode::Identify => mode_identify(&cfg, cli),
    }
}

fn parse_sweep_arg(arg: &str) -> Result<SweepSection> {
    let (path, list) = arg
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("sweep argument {arg:?} is not path=v1,v2,...")))?;
    let values = list
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("sweep value {v:?}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(SweepSection { path: path.trim().to_string(), values })
}

fn solve(sys: &SystemParams) -> Result<OperatingPoint> {
    model::solve_operating_point(sys)
}

fn verdict_line(name: &str, report: &GncReport) -> String {
    format!(
        "{name:<10} {:<9} windings [{}, {}]  closest |1+λ| = {:.4} at {:.3} Hz ({} points)",
        format!("{:?}", report.verdict),
        report.windings[0],
        report.windings[1],
        report.closest.distance,
        report.closest.f_hz,
        report.n_points
    )
}

fn loci_samples(samples: &LoopSamples) -> Result<TransferSamples> {
    let values: Vec<DMatrix<Complex64>> = samples
        .loci
        .lambda1
        .iter()
        .zip(&samples.loci.lambda2)
        .map(|(&l1, &l2)| DMatrix::from_row_slice(1, 2, &[l1, l2]))
        .collect();
    TransferSamples::new(samples.loci.omega.clone(), values)
}

fn mode_extract(cfg: &RunConfig, cli: &Cli) -> Result<()> {
    let sys = cfg.system();
    let op = solve(&sys)?;
    let omegas = cfg.grid.omegas();

    let z_v = extract::vsm_impedance(&sys, &op, &omegas)?;
    let gamma_v = extract::vsm_frequency_impedance(&sys, &op, &omegas)?;
    let y_c = extract::csm_admittance(&sys, &op, &omegas)?;
    let psi_c = extract::csm_frequency_admittance(&sys, &op, &omegas)?;

    export::write_transfer_csv(&cli.out.join("z_v.csv"), &z_v)?;
    export::write_transfer_csv(&cli.out.join("gamma_v.csv"), &gamma_v)?;
    export::write_transfer_csv(&cli.out.join("y_c.csv"), &y_c)?;
    export::write_transfer_csv(&cli.out.join("psi_c.csv"), &psi_c)?;

    let u0 = op.bus_voltage(&sys.network);
    export::write_json(
        &cli.out.join("extract.json"),
        &serde_json::json!({
            "operating_point": {
                "bus_voltage_d": u0.x,
                "bus_voltage_q": u0.y,
                "omega_v": op.omega_v(&sys.gfm),
                "residual": op.residual,
                "iterations": op.iterations,
            },
            "grid": { "f_min_hz": cfg.grid.f_min_hz, "f_max_hz": cfg.grid.f_max_hz,
                      "points_per_decade": cfg.grid.points_per_decade,
                      "n_points": omegas.len() },
            "files": ["z_v.csv", "gamma_v.csv", "y_c.csv", "psi_c.csv"],
        }),
    )?;

    println!("extracted 4 frequency-domain objects at {} grid points", omegas.len());
    println!(
        "operating point: u = ({:.3}, {:.3}) V, ω_V = {:.4} rad/s, residual {:.2e}",
        u0.x,
        u0.y,
        op.omega_v(&sys.gfm),
        op.residual
    );
    println!("wrote z_v.csv, gamma_v.csv, y_c.csv, psi_c.csv to {}", cli.out.display());
    Ok(())
}

/// Shared GNC data pass: both loops sampled on the configured grid.
fn gnc_pass(cfg: &RunConfig, cli: &Cli) -> Result<(LoopSamples, LoopSamples, GncReport, GncReport)> {
    let sys = cfg.system();
    let op = solve(&sys)?;
    let ctx = extract::ExtractionContext::new(&sys, &op)?;
    stability::open_loop_check(&sys, &op)?;
    let ext = stability::sample_minor_loop(&ctx, &cfg.grid, true)?;
    let std = stability::sample_minor_loop(&ctx, &cfg.grid, false)?;
    let ext_report = stability::gnc_verdict(&ext)?;
    let std_report = stability::gnc_verdict(&std)?;

    export::write_transfer_csv(
        &cli.out.join("minor_loop_extended.csv"),
        &TransferSamples::new(ext.omega.clone(), ext.values.clone())?,
    )?;
    export::write_transfer_csv(
        &cli.out.join("minor_loop_standard.csv"),
        &TransferSamples::new(std.omega.clone(), std.values.clone())?,
    )?;
    export::write_transfer_csv(&cli.out.join("loci_extended.csv"), &loci_samples(&ext)?)?;
    export::write_transfer_csv(&cli.out.join("loci_standard.csv"), &loci_samples(&std)?)?;

    if !cli.no_plots {
        plot::write_svg(
            &cli.out.join("nyquist_extended.svg"),
            &plot::nyquist_svg(&ext.loci, "minor loop with frequency dynamics")?,
        )?;
        plot::write_svg(
            &cli.out.join("nyquist_standard.svg"),
            &plot::nyquist_svg(&std.loci, "standard minor loop")?,
        )?;
        plot::write_svg(
            &cli.out.join("bode_loci.svg"),
            &plot::bode_compare_svg(&ext.loci, &std.loci, "eigenvalue loci: extended vs standard")?,
        )?;
    }
    Ok((ext, std, ext_report, std_report))
}

fn mode_gnc(cfg: &RunConfig, cli: &Cli) -> Result<()> {
    let (_, _, ext_report, std_report) = gnc_pass(cfg, cli)?;
    export::write_json(
        &cli.out.join("gnc.json"),
        &serde_json::json!({ "extended": ext_report, "standard": std_report }),
    )?;
    println!("{}", verdict_line("extended", &ext_report));
    println!("{}", verdict_line("standard", &std_report));
    Ok(())
}

fn mode_eigen(cfg: &RunConfig, cli: &Cli) -> Result<()> {
    let sys = cfg.system();
    let op = solve(&sys)?;
    let report = stability::eigen_verdict(&sys, &op)?;

    let mut csv = String::from("re_1_s,im_rad_s,f_hz\n");
    for ev in &report.eigenvalues {
        use std::fmt::Write as _;
        writeln!(csv, "{:.16e},{:.16e},{:.16e}", ev.re, ev.im, ev.im.abs() / TAU).unwrap();
    }
    export::write_text(&cli.out.join("eigenvalues.csv"), &csv)?;
    export::write_json(&cli.out.join("eigen.json"), &report)?;

    println!(
        "eigen      {:<9} max Re = {:+.4} 1/s, dominant {:.3} Hz (ζ = {:.4}), {} states",
        format!("{:?}", report.verdict),
        report.max_real,
        report.dominant.f_hz,
        report.dominant.damping_ratio,
        report.eigenvalues.len()
    );
    Ok(())
}

fn equivalence_lines(report: &EquivalenceReport) -> Vec<String> {
    let mut lines = vec![
        verdict_line("extended", &report.extended),
        verdict_line("standard", &report.standard),
        format!(
            "{:<10} {:<9} max Re = {:+.4} 1/s, dominant {:.3} Hz (ζ = {:.4})",
            "eigen",
            format!("{:?}", report.eigen.verdict),
            report.eigen.max_real,
            report.eigen.dominant.f_hz,
            report.eigen.dominant.damping_ratio
        ),
    ];
    let offset = report
        .critical_freq_offset_intervals
        .map(|v| format!("critical-frequency offset {v:.2} grid intervals"))
        .unwrap_or_else(|| "no unstable pair to compare".to_string());
    lines.push(format!(
        "{:<10} {:<9} {}",
        "agreement",
        if report.agree { "yes" } else { "NO" },
        offset
    ));
    lines
}

fn mode_equivalence(cfg: &RunConfig, cli: &Cli) -> Result<()> {
    let sys = cfg.system();
    let op = solve(&sys)?;
    let report = stability::equivalence_report(&sys, &op, &cfg.grid)?;
    // Reuse the GNC pass for artifacts; verdicts in the report came from the
    // identical computation.
    gnc_pass(cfg, cli)?;
    export::write_json(&cli.out.join("equivalence.json"), &report)?;
    for line in equivalence_lines(&report) {
        println!("{line}");
    }
    Ok(())
}

fn family_stub(section: &SweepSection) -> SweepFamily {
    SweepFamily {
        name: section.path.replace('.', "-"),
        overrides: Vec::new(),
        spec: dqstab::sweep::SweepSpec {
            path: section.path.clone(),
            values: section.values.clone(),
        },
    }
}

fn mode_sweep(cfg: &RunConfig, cli: &Cli) -> Result<()> {
    let families = match cfg.sweep.as_ref() {
        Some(section) => vec![family_stub(section)],
        None => sweep::default_families(),
    };
    let sys = cfg.system();
    for family in &families {
        let report = sweep::run_family(&sys, family, &cfg.grid)?;
        write_sweep_artifacts(&report, &family.name, cli)?;
    }
    Ok(())
}

fn write_sweep_artifacts(report: &SweepReport, name: &str, cli: &Cli) -> Result<()> {
    export::write_json(&cli.out.join(format!("sweep_{name}.json")), report)?;

    let mut csv = String::from(
        "value,extended,standard,eigen,max_re_1_s,f_gnc_hz,f_eig_hz,closest_extended,closest_standard\n",
    );
    println!("sweep {name} over {}:", report.path);
    for entry in &report.entries {
        use std::fmt::Write as _;
        match &entry.outcome {
            SweepOutcome::Decided { report: eq } => {
                writeln!(
                    csv,
                    "{},{:?},{:?},{:?},{:.6e},{:.6},{:.6},{:.6e},{:.6e}",
                    entry.value,
                    eq.extended.verdict,
                    eq.standard.verdict,
                    eq.eigen.verdict,
                    eq.eigen.max_real,
                    eq.extended.closest.f_hz,
                    eq.eigen.dominant.f_hz,
                    eq.extended.closest.distance,
                    eq.standard.closest.distance
                )
                .unwrap();
                println!(
                    "  {:<10} extended {:<9} standard {:<9} eigen {:<9} max Re {:+.4}  {}",
                    entry.value,
                    format!("{:?}", eq.extended.verdict),
                    format!("{:?}", eq.standard.verdict),
                    format!("{:?}", eq.eigen.verdict),
                    eq.eigen.max_real,
                    if eq.agree { "agree" } else { "DISAGREE" }
                );
            }
            SweepOutcome::Marginal { detail } => {
                writeln!(csv, "{},marginal,,,,,,,", entry.value).unwrap();
                println!("  {:<10} marginal: {detail}", entry.value);
            }
        }
    }
    export::write_text(&cli.out.join(format!("sweep_{name}.csv")), &csv)?;

    if !cli.no_plots {
        let traces: Vec<(f64, Vec<Complex64>)> = report
            .decided()
            .map(|(v, eq)| (v, eq.eigen.eigenvalues.clone()))
            .collect();
        if !traces.is_empty() {
            plot::write_svg(
                &cli.out.join(format!("eigtrace_{name}.svg")),
                &plot::eigtrace_svg(
                    &traces,
                    &report.path,
                    &format!("system eigenvalues over {}", report.path),
                )?,
            )?;
        }
    }
    Ok(())
}

fn mode_simulate(cfg: &RunConfig, cli: &Cli) -> Result<()> {
    let sc = cfg.scenario();
    let ts = sim::simulate(&sc)?;
    export::write_timeseries_csv(&cli.out.join("timeseries.csv"), &ts)?;

    // Post-kick ring-down estimate when a disturbance is configured and the
    // channel holds a clean tone.
    let estimate = cfg.sim.param_step.as_ref().and_then(|ps| {
        let window = (sc.duration - ps.at) * 0.75;
        sim::estimate_oscillation(&ts, "i_q", window).ok()
    });

    export::write_json(
        &cli.out.join("sim.json"),
        &serde_json::json!({
            "duration": sc.duration,
            "step": sc.step,
            "record_every": sc.record_every,
            "samples": ts.t.len(),
            "divergence": ts.divergence.as_ref().map(|d| serde_json::json!({
                "t": d.t, "state": d.state, "value": d.value })),
            "oscillation": estimate.map(|(f_hz, growth)| serde_json::json!({
                "f_hz": f_hz, "growth_rate_1_s": growth })),
        }),
    )?;

    if !cli.no_plots {
        plot::write_svg(
            &cli.out.join("timeseries.svg"),
            &plot::timeseries_svg(&ts, &["u_d", "i_q", "omega_v"], "time-domain response")?,
        )?;
    }

    match &ts.divergence {
        Some(d) => println!(
            "simulation diverged at t = {:.4} s (state {} reached {:.3e})",
            d.t, d.state, d.value
        ),
        None => println!("simulation completed: {} samples over {} s", ts.t.len(), sc.duration),
    }
    if let Some((f_hz, growth)) = estimate {
        println!("dominant oscillation {f_hz:.3} Hz, growth rate {growth:+.4} 1/s");
    }
    Ok(())
}

fn mode_identify(cfg: &RunConfig, cli: &Cli) -> Result<()> {
    let sys = cfg.system();
    let op = solve(&sys)?;
    let plan = cfg.injection_plan();

    let y_c = ident::identify_csm_admittance(&sys, &op, &plan)?;
    let psi_c = ident::identify_csm_frequency_admittance(&sys, &op, &plan)?;
    let (z_v, gamma_v) = ident::identify_vsm_both(&sys, &op, &plan)?;

    let objects: [(&str, &TransferSamples, TransferSamples); 4] = [
        ("y_c", &y_c, extract::csm_admittance(&sys, &op, y_c.omega())?),
        ("psi_c", &psi_c, extract::csm_frequency_admittance(&sys, &op, psi_c.omega())?),
        ("z_v", &z_v, extract::vsm_impedance(&sys, &op, z_v.omega())?),
        ("gamma_v", &gamma_v, extract::vsm_frequency_impedance(&sys, &op, gamma_v.omega())?),
    ];

    let mut summary = serde_json::Map::new();
    for (name, identified, extracted) in &objects {
        export::write_transfer_csv(&cli.out.join(format!("identified_{name}.csv")), identified)?;
        export::write_transfer_csv(&cli.out.join(format!("extracted_{name}.csv")), &extracted)?;
        let err = ident::max_relative_error(identified, extracted)?;
        summary.insert(
            name.to_string(),
            serde_json::json!({ "n_freqs": identified.len(), "max_rel_error": err }),
        );
        println!(
            "{name:<8} {} tones, max relative error vs extraction {err:.3e}",
            identified.len()
        );
    }
    export::write_json(&cli.out.join("identify.json"), &serde_json::Value::Object(summary))?;
    Ok(())
}
