//! Run configuration: one TOML file with sections mirroring the parameter
//! structs (`gfm`, `gfl`, `network`) plus analysis settings (`grid`, `sweep`,
//! `sim`, `identify`). Every section is optional and defaults to the shipped
//! tuning; unknown keys are rejected so typos fail loudly. Angular quantities
//! are rad/s throughout, matching the parameter structs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq::FrequencyGrid;
use crate::ident::InjectionPlan;
use crate::params::{GflParams, GfmParams, NetworkParams, SystemParams, PARAM_PATHS};
use crate::sim::{ParamStep, Scenario};
use crate::sweep::SweepSpec;

/// Sweep section: one parameter path and the values to visit.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub path: String,
    pub values: Vec<f64>,
}

/// Mid-run parameter step for simulation scenarios.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamStepSection {
    pub path: String,
    pub value: f64,
    /// Time (s) at which the new value takes effect.
    pub at: f64,
}

/// Simulation section. Defaults mirror `Scenario::new`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub duration: f64,
    pub step: f64,
    pub record_every: usize,
    pub param_step: Option<ParamStepSection>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self { duration: 20.0, step: 50e-6, record_every: 20, param_step: None }
    }
}

/// Identification section. Defaults mirror `InjectionPlan::new` with a
/// 20-point log schedule over the band where the linear models are trusted.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentifySection {
    pub freqs_hz: Vec<f64>,
    pub amplitude_frac: f64,
    pub step: f64,
    pub settle: f64,
    pub min_window_s: f64,
    pub min_periods: usize,
}

impl Default for IdentifySection {
    fn default() -> Self {
        let plan = InjectionPlan::new(log_freqs(0.1, 100.0, 20));
        Self {
            freqs_hz: plan.freqs_hz,
            amplitude_frac: plan.amplitude_frac,
            step: plan.step,
            settle: plan.settle,
            min_window_s: plan.min_window_s,
            min_periods: plan.min_periods,
        }
    }
}

/// n log-spaced frequencies (Hz), endpoints included.
pub fn log_freqs(f_min: f64, f_max: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = (f_min.log10(), f_max.log10());
    (0..n)
        .map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (n - 1).max(1) as f64))
        .collect()
}

/// Everything one run needs, deserialized from TOML.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gfm: GfmParams,
    pub gfl: GflParams,
    pub network: NetworkParams,
    pub grid: FrequencyGrid,
    pub sweep: Option<SweepSection>,
    pub sim: SimSection,
    pub identify: IdentifySection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("TOML parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.system().validate()?;
        self.grid.validate()?;
        if let Some(sweep) = &self.sweep {
            check_path(&sweep.path)?;
            if sweep.values.is_empty() {
                return Err(Error::Config(format!("sweep over {:?} has no values", sweep.path)));
            }
        }
        if !(self.sim.duration.is_finite() && self.sim.duration > 0.0) {
            return Err(Error::Config(format!(
                "sim.duration must be positive, got {}",
                self.sim.duration
            )));
        }
        if !(self.sim.step.is_finite() && self.sim.step > 0.0) {
            return Err(Error::Config(format!("sim.step must be positive, got {}", self.sim.step)));
        }
        if self.sim.record_every == 0 {
            return Err(Error::Config("sim.record_every must be at least 1".into()));
        }
        if let Some(ps) = &self.sim.param_step {
            check_path(&ps.path)?;
            if !(ps.at.is_finite() && ps.at >= 0.0 && ps.at <= self.sim.duration) {
                return Err(Error::Config(format!(
                    "sim.param_step.at must lie in [0, duration], got {}",
                    ps.at
                )));
            }
        }
        self.injection_plan().validate()?;
        Ok(())
    }

    pub fn system(&self) -> SystemParams {
        SystemParams {
            gfm: self.gfm.clone(),
            gfl: self.gfl.clone(),
            network: self.network.clone(),
        }
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            sys: self.system(),
            duration: self.sim.duration,
            step: self.sim.step,
            record_every: self.sim.record_every,
            param_step: self.sim.param_step.as_ref().map(|ps| ParamStep {
                path: ps.path.clone(),
                value: ps.value,
                at: ps.at,
            }),
        }
    }

    pub fn injection_plan(&self) -> InjectionPlan {
        InjectionPlan {
            freqs_hz: self.identify.freqs_hz.clone(),
            amplitude_frac: self.identify.amplitude_frac,
            step: self.identify.step,
            settle: self.identify.settle,
            min_window_s: self.identify.min_window_s,
            min_periods: self.identify.min_periods,
        }
    }

    pub fn sweep_spec(&self) -> Option<SweepSpec> {
        self.sweep
            .as_ref()
            .map(|s| SweepSpec { path: s.path.clone(), values: s.values.clone() })
    }
}

fn check_path(path: &str) -> Result<()> {
    if PARAM_PATHS.contains(&path) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "unknown parameter path {path:?}; valid paths: {}",
            PARAM_PATHS.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        let sys = cfg.system();
        assert_eq!(sys.gfm.omega0, SystemParams::default().gfm.omega0);
        assert_eq!(cfg.grid.points_per_decade, 100);
        assert!(cfg.sweep.is_none());
        assert_eq!(cfg.identify.freqs_hz.len(), 20);
    }

    #[test]
    fn sections_override_selected_fields_only() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [gfl]
            alpha_cc = 70.0

            [grid]
            f_min_hz = 0.1
            f_max_hz = 100.0
            points_per_decade = 25

            [sweep]
            path = "network.line"
            values = [0.004, 0.006]

            [sim]
            duration = 5.0
            param_step = { path = "gfl.q_set", value = 15.0, at = 0.5 }
            "#,
        )
        .unwrap();
        assert_eq!(cfg.gfl.alpha_cc, 70.0);
        assert_eq!(cfg.gfl.p_set, SystemParams::default().gfl.p_set);
        assert_eq!(cfg.grid.points_per_decade, 25);
        assert_eq!(cfg.sweep_spec().unwrap().values, vec![0.004, 0.006]);
        let sc = cfg.scenario();
        assert_eq!(sc.duration, 5.0);
        assert_eq!(sc.param_step.as_ref().unwrap().path, "gfl.q_set");
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        for (toml, needle) in [
            ("[gfl]\nalpha_c = 70.0", "TOML parse"),
            ("[grid]\nf_min_hz = -1.0", "frequency grid"),
            ("[sweep]\npath = \"gfl.bogus\"\nvalues = [1.0]", "unknown parameter path"),
            ("[sweep]\npath = \"gfl.alpha_cc\"\nvalues = []", "no values"),
            ("[sim]\nduration = 0.0", "duration"),
            ("[sim]\nparam_step = { path = \"gfl.q_set\", value = 1.0, at = 99.0 }", "param_step.at"),
            ("[identify]\nfreqs_hz = []", "no frequencies"),
        ] {
            match RunConfig::from_toml_str(toml) {
                Err(Error::Config(msg)) => {
                    assert!(msg.contains(needle), "for {toml:?}: {msg}")
                }
                other => panic!("expected Config error for {toml:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.gfl.alpha_pll = 4.0 * std::f64::consts::TAU;
        cfg.sweep = Some(SweepSection {
            path: "gfl.alpha_pll".into(),
            values: vec![6.28, 12.56],
        });
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(back.gfl.alpha_pll, cfg.gfl.alpha_pll);
        assert_eq!(back.sweep.as_ref().unwrap().values, vec![6.28, 12.56]);
    }
}
