//! Parameter sweeps: run the three-way stability comparison (extended
//! criterion, standard criterion, eigenvalues) across a list of values of one
//! parameter and collect the verdicts.
//!
//! A configuration where any verdict path refuses to decide (a Nyquist locus
//! grazing −1 or an eigenvalue pair sitting on the axis within the
//! marginality band) is recorded as marginal and excluded from agreement
//! statistics instead of being forced to a side; every other error aborts the
//! sweep. Entries are evaluated independently (in parallel) and reported in
//! the order the values were given.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::freq::FrequencyGrid;
use crate::model::solve_operating_point;
use crate::params::SystemParams;
use crate::stability::{equivalence_report, EquivalenceReport};

/// One swept parameter: a `SystemParams::set_path` path plus the values to
/// visit, in presentation order.
#[derive(Debug, Clone, Serialize)]
pub struct SweepSpec {
    pub path: String,
    pub values: Vec<f64>,
}

/// A named sweep with optional base-parameter overrides applied before the
/// swept path, so a family can explore one axis around a non-default anchor.
#[derive(Debug, Clone, Serialize)]
pub struct SweepFamily {
    pub name: String,
    pub overrides: Vec<(String, f64)>,
    pub spec: SweepSpec,
}

/// Verdict bundle for one swept value.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status")]
pub enum SweepOutcome {
    #[serde(rename = "decided")]
    Decided { report: Box<EquivalenceReport> },
    /// A verdict path hit its marginality band; no side is forced.
    #[serde(rename = "marginal")]
    Marginal { detail: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub value: f64,
    pub outcome: SweepOutcome,
}

/// All entries of one sweep, in the order the values were given.
#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub path: String,
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    /// Entries that produced a verdict, with their swept values.
    pub fn decided(&self) -> impl Iterator<Item = (f64, &EquivalenceReport)> {
        self.entries.iter().filter_map(|e| match &e.outcome {
            SweepOutcome::Decided { report } => Some((e.value, report.as_ref())),
            SweepOutcome::Marginal { .. } => None,
        })
    }

    pub fn n_marginal(&self) -> usize {
        self.entries.len() - self.decided().count()
    }

    /// Extended criterion vs eigenvalues on every decided entry.
    pub fn all_decided_agree(&self) -> bool {
        self.decided().all(|(_, r)| r.agree)
    }
}

/// Evaluate one configuration: solve the equilibrium, then run all three
/// verdict paths. Only marginality is mapped to a non-fatal outcome.
fn evaluate(sys: &SystemParams, grid: &FrequencyGrid) -> Result<SweepOutcome> {
    let op = solve_operating_point(sys)?;
    match equivalence_report(sys, &op, grid) {
        Ok(report) => Ok(SweepOutcome::Decided { report: Box::new(report) }),
        Err(e @ Error::Marginal { .. }) => Ok(SweepOutcome::Marginal { detail: e.to_string() }),
        Err(e) => Err(e),
    }
}

/// Run one sweep against a base configuration.
pub fn run_sweep(
    base: &SystemParams,
    spec: &SweepSpec,
    grid: &FrequencyGrid,
) -> Result<SweepReport> {
    if spec.values.is_empty() {
        return Err(Error::Config(format!("sweep over {:?} has no values", spec.path)));
    }
    let entries = spec
        .values
        .par_iter()
        .map(|&value| {
            let mut sys = base.clone();
            sys.set_path(&spec.path, value)?;
            Ok(SweepEntry { value, outcome: evaluate(&sys, grid)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport { path: spec.path.clone(), entries })
}

/// Run a named family: apply its overrides to the base, then sweep.
pub fn run_family(
    base: &SystemParams,
    family: &SweepFamily,
    grid: &FrequencyGrid,
) -> Result<SweepReport> {
    let mut sys = base.clone();
    for (path, value) in &family.overrides {
        sys.set_path(path, *value)?;
    }
    run_sweep(&sys, &family.spec, grid)
}

/// The stock sweep set: current-control bandwidth and PLL bandwidth from the
/// default configuration, and line inductance (with its paired resistance)
/// anchored at the reduced current-control bandwidth where the line length
/// decides stability. Spans both stable and unstable territory on each axis.
pub fn default_families() -> Vec<SweepFamily> {
    let tau = std::f64::consts::TAU;
    vec![
        SweepFamily {
            name: "current-control".into(),
            overrides: vec![],
            spec: SweepSpec {
                path: "gfl.alpha_cc".into(),
                values: vec![100.0, 95.0, 90.0, 85.0, 80.0, 75.0, 70.0],
            },
        },
        SweepFamily {
            name: "pll-bandwidth".into(),
            overrides: vec![],
            spec: SweepSpec {
                path: "gfl.alpha_pll".into(),
                values: (0..7).map(|k| tau * (1.0 + 0.5 * k as f64)).collect(),
            },
        },
        SweepFamily {
            name: "line-at-cc70".into(),
            overrides: vec![("gfl.alpha_cc".into(), 70.0)],
            spec: SweepSpec {
                path: "network.line".into(),
                values: (0..9).map(|k| 3e-3 + 0.5e-3 * k as f64).collect(),
            },
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stability::Verdict;

    fn coarse_grid() -> FrequencyGrid {
        FrequencyGrid { f_min_hz: 1e-2, f_max_hz: 1e4, points_per_decade: 50 }
    }

    #[test]
    fn stock_families_cover_twenty_configurations() {
        let families = default_families();
        let total: usize = families.iter().map(|f| f.spec.values.len()).sum();
        assert!(total >= 20, "only {total} configurations");
        for f in &families {
            assert!(f.spec.values.windows(2).all(|w| w[0] != w[1]));
        }
    }

    #[test]
    fn current_control_sweep_crosses_the_flip() {
        let base = SystemParams::default();
        let spec =
            SweepSpec { path: "gfl.alpha_cc".into(), values: vec![100.0, 70.0] };
        let report = run_sweep(&base, &spec, &coarse_grid()).unwrap();
        assert_eq!(report.entries.len(), 2);
        let verdicts: Vec<_> = report.decided().map(|(_, r)| r.eigen.verdict).collect();
        assert_eq!(verdicts, vec![Verdict::Stable, Verdict::Unstable]);
        assert!(report.all_decided_agree(), "criteria disagree across the flip");
    }

    #[test]
    fn family_overrides_anchor_the_line_sweep() {
        let base = SystemParams::default();
        let family = SweepFamily {
            name: "line-at-cc70".into(),
            overrides: vec![("gfl.alpha_cc".into(), 70.0)],
            spec: SweepSpec { path: "network.line".into(), values: vec![4e-3, 6e-3] },
        };
        let report = run_family(&base, &family, &coarse_grid()).unwrap();
        let verdicts: Vec<_> = report.decided().map(|(_, r)| r.eigen.verdict).collect();
        assert_eq!(
            verdicts,
            vec![Verdict::Stable, Verdict::Unstable],
            "longer line should destabilize at reduced current-control bandwidth"
        );
        assert!(report.all_decided_agree());
    }

    #[test]
    fn empty_sweep_is_refused() {
        let base = SystemParams::default();
        let spec = SweepSpec { path: "gfl.alpha_cc".into(), values: vec![] };
        match run_sweep(&base, &spec, &coarse_grid()) {
            Err(Error::Config(_)) => {}
            other => panic!("expected Config error, got {other:?}"),
        }
    }
}
