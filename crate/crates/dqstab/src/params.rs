//! Converter and network parameter sets with validated defaults.
//!
//! All values are SI (volts, amperes, henries, farads, rad/s). Controller
//! gains are derived from bandwidth targets so a sweep over one bandwidth
//! retunes the affected loop consistently.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid-forming converter: LC filter, droop governor with first-order power
/// filters, cascaded voltage/current PI loops in its own droop frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GfmParams {
    /// Line-to-line RMS voltage rating.
    pub v_nom_ll_rms: f64,
    /// Nominal angular frequency (rad/s).
    pub omega0: f64,
    /// Power rating used to scale the droop slopes.
    pub s_rated: f64,
    pub l_f: f64,
    pub r_f: f64,
    pub c_f: f64,
    /// Active/reactive power filter cutoff (rad/s).
    pub omega_c: f64,
    /// Frequency droop as a fraction of nominal frequency at rated power.
    pub droop_freq_frac: f64,
    /// Voltage droop as a fraction of nominal magnitude at rated power.
    pub droop_volt_frac: f64,
    /// Active power setpoint.
    pub p_star: f64,
    /// Reactive power setpoint.
    pub q_star: f64,
    /// Inner current loop bandwidth (rad/s); gains are k_p = α·L_f, k_i = α·R_f.
    pub alpha_cc: f64,
    /// Outer voltage loop natural frequency (rad/s). Deliberately slow and
    /// heavily damped (see `zeta_v`): the loop only has to track the droop
    /// frame, and a stiff setting feeds the sub-hertz power-synchronization
    /// mode between the droop governor and the follower's PLL.
    pub alpha_v: f64,
    /// Outer voltage loop damping ratio.
    pub zeta_v: f64,
}

impl Default for GfmParams {
    fn default() -> Self {
        Self {
            v_nom_ll_rms: 400.0,
            omega0: std::f64::consts::TAU * 50.0,
            s_rated: 15e3,
            l_f: 2.3e-3,
            r_f: 0.1,
            c_f: 10e-6,
            omega_c: std::f64::consts::TAU * 4.0,
            droop_freq_frac: 0.01,
            droop_volt_frac: 0.05,
            p_star: 15e3,
            q_star: 0.0,
            alpha_cc: 1000.0,
            alpha_v: 10.5,
            zeta_v: 2.5,
        }
    }
}

impl GfmParams {
    /// Peak phase voltage for the amplitude-invariant dq convention.
    pub fn v_peak(&self) -> f64 {
        self.v_nom_ll_rms * (2.0f64 / 3.0).sqrt()
    }

    /// Frequency droop slope (rad/s per watt).
    pub fn m_p(&self) -> f64 {
        self.droop_freq_frac * self.omega0 / self.s_rated
    }

    /// Voltage droop slope (volts per var).
    pub fn n_q(&self) -> f64 {
        self.droop_volt_frac * self.v_peak() / self.s_rated
    }

    /// Voltage reference magnitude at zero reactive load.
    pub fn v_star(&self) -> f64 {
        self.v_peak()
    }

    pub fn k_pc(&self) -> f64 {
        self.alpha_cc * self.l_f
    }

    pub fn k_ic(&self) -> f64 {
        self.alpha_cc * self.r_f
    }

    pub fn k_pv(&self) -> f64 {
        2.0 * self.zeta_v * self.alpha_v * self.c_f
    }

    pub fn k_iv(&self) -> f64 {
        self.alpha_v * self.alpha_v * self.c_f
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("v_nom_ll_rms", self.v_nom_ll_rms),
            ("omega0", self.omega0),
            ("s_rated", self.s_rated),
            ("l_f", self.l_f),
            ("r_f", self.r_f),
            ("c_f", self.c_f),
            ("omega_c", self.omega_c),
            ("droop_freq_frac", self.droop_freq_frac),
            ("droop_volt_frac", self.droop_volt_frac),
            ("alpha_cc", self.alpha_cc),
            ("alpha_v", self.alpha_v),
            ("zeta_v", self.zeta_v),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("gfm.{name} must be finite and positive, got {v}")));
            }
        }
        if !self.p_star.is_finite() || !self.q_star.is_finite() {
            return Err(Error::Config("gfm power setpoints must be finite".into()));
        }
        Ok(())
    }
}

/// Grid-following converter: L-coupled current source with PI current control
/// in the PLL frame and a type-2 synchronous reference frame PLL.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GflParams {
    pub l_c: f64,
    /// Coupling branch resistance. Includes the damping resistance of the
    /// reactor; it also sets the current loop's integral gain (k_i = α·R_c),
    /// which governs how strongly the converter rejects bus-voltage
    /// disturbances below the loop bandwidth.
    pub r_c: f64,
    /// Current loop bandwidth (rad/s); gains are k_p = α·L_c, k_i = α·R_c.
    pub alpha_cc: f64,
    /// PLL closed-loop −3 dB bandwidth target (rad/s).
    pub alpha_pll: f64,
    /// PLL damping ratio.
    pub zeta_pll: f64,
    /// Voltage magnitude assumed by the PLL gain normalisation.
    pub v_pll_norm: f64,
    pub p_set: f64,
    pub q_set: f64,
}

impl Default for GflParams {
    fn default() -> Self {
        Self {
            l_c: 5e-3,
            r_c: 1.0,
            alpha_cc: 100.0,
            alpha_pll: std::f64::consts::TAU,
            zeta_pll: std::f64::consts::FRAC_1_SQRT_2,
            v_pll_norm: 400.0 * (2.0f64 / 3.0).sqrt(),
            p_set: 10e3,
            q_set: 0.0,
        }
    }
}

impl GflParams {
    pub fn k_pc(&self) -> f64 {
        self.alpha_cc * self.l_c
    }

    pub fn k_ic(&self) -> f64 {
        self.alpha_cc * self.r_c
    }

    /// Natural frequency giving a −3 dB bandwidth of `alpha_pll` for the
    /// type-2 loop at ζ = 1/√2: the bandwidth-to-ω_n ratio is the positive
    /// root of x⁴ − 4x² − 1 (≈ 2.058).
    pub fn omega_n_pll(&self) -> f64 {
        let z2 = 2.0 * self.zeta_pll * self.zeta_pll;
        let ratio = (z2 + 1.0 + ((z2 + 1.0).powi(2) + 1.0).sqrt()).sqrt();
        self.alpha_pll / ratio
    }

    pub fn k_p_pll(&self) -> f64 {
        2.0 * self.zeta_pll * self.omega_n_pll() / self.v_pll_norm
    }

    pub fn k_i_pll(&self) -> f64 {
        let wn = self.omega_n_pll();
        wn * wn / self.v_pll_norm
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("l_c", self.l_c),
            ("r_c", self.r_c),
            ("alpha_cc", self.alpha_cc),
            ("alpha_pll", self.alpha_pll),
            ("zeta_pll", self.zeta_pll),
            ("v_pll_norm", self.v_pll_norm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("gfl.{name} must be finite and positive, got {v}")));
            }
        }
        if !self.p_set.is_finite() || !self.q_set.is_finite() {
            return Err(Error::Config("gfl power setpoints must be finite".into()));
        }
        Ok(())
    }
}

/// Interconnection: series line between the grid-forming filter and the
/// common bus, plus the resistive bus load.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkParams {
    pub l_line: f64,
    pub r_line: f64,
    pub r_load: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self { l_line: 7e-3, r_line: 0.4, r_load: 8.0 }
    }
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("l_line", self.l_line), ("r_line", self.r_line), ("r_load", self.r_load)]
        {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "network.{name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Full parameterisation of the two-converter system.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    pub gfm: GfmParams,
    pub gfl: GflParams,
    pub network: NetworkParams,
}

/// Resistance per henry for the paired line path (Ω/H): a longer line has
/// proportionally more of both.
pub const LINE_R_PER_HENRY: f64 = 50.0;
/// Terminal resistance floor for the paired line path (Ω).
pub const LINE_R_OFFSET: f64 = 0.05;

/// Every parameter path accepted by [`SystemParams::set_path`].
pub const PARAM_PATHS: &[&str] = &[
    "gfm.v_nom_ll_rms",
    "gfm.omega0",
    "gfm.s_rated",
    "gfm.l_f",
    "gfm.r_f",
    "gfm.c_f",
    "gfm.omega_c",
    "gfm.droop_freq_frac",
    "gfm.droop_volt_frac",
    "gfm.p_star",
    "gfm.q_star",
    "gfm.alpha_cc",
    "gfm.alpha_v",
    "gfm.zeta_v",
    "gfl.l_c",
    "gfl.r_c",
    "gfl.alpha_cc",
    "gfl.alpha_pll",
    "gfl.zeta_pll",
    "gfl.v_pll_norm",
    "gfl.p_set",
    "gfl.q_set",
    "network.l_line",
    "network.r_line",
    "network.r_load",
    "network.line",
];

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        self.gfm.validate()?;
        self.gfl.validate()?;
        self.network.validate()
    }

    /// Assign one parameter by dotted path ("section.field") and re-validate.
    /// The pseudo-path `network.line` sets the line inductance and co-varies
    /// the resistance as R = [`LINE_R_OFFSET`] + [`LINE_R_PER_HENRY`]·L, so a
    /// line sweep walks a physically consistent family instead of an
    /// ever-better-damped one.
    pub fn set_path(&mut self, path: &str, value: f64) -> Result<()> {
        match path {
            "gfm.v_nom_ll_rms" => self.gfm.v_nom_ll_rms = value,
            "gfm.omega0" => self.gfm.omega0 = value,
            "gfm.s_rated" => self.gfm.s_rated = value,
            "gfm.l_f" => self.gfm.l_f = value,
            "gfm.r_f" => self.gfm.r_f = value,
            "gfm.c_f" => self.gfm.c_f = value,
            "gfm.omega_c" => self.gfm.omega_c = value,
            "gfm.droop_freq_frac" => self.gfm.droop_freq_frac = value,
            "gfm.droop_volt_frac" => self.gfm.droop_volt_frac = value,
            "gfm.p_star" => self.gfm.p_star = value,
            "gfm.q_star" => self.gfm.q_star = value,
            "gfm.alpha_cc" => self.gfm.alpha_cc = value,
            "gfm.alpha_v" => self.gfm.alpha_v = value,
            "gfm.zeta_v" => self.gfm.zeta_v = value,
            "gfl.l_c" => self.gfl.l_c = value,
            "gfl.r_c" => self.gfl.r_c = value,
            "gfl.alpha_cc" => self.gfl.alpha_cc = value,
            "gfl.alpha_pll" => self.gfl.alpha_pll = value,
            "gfl.zeta_pll" => self.gfl.zeta_pll = value,
            "gfl.v_pll_norm" => self.gfl.v_pll_norm = value,
            "gfl.p_set" => self.gfl.p_set = value,
            "gfl.q_set" => self.gfl.q_set = value,
            "network.l_line" => self.network.l_line = value,
            "network.r_line" => self.network.r_line = value,
            "network.r_load" => self.network.r_load = value,
            "network.line" => {
                self.network.l_line = value;
                self.network.r_line = LINE_R_OFFSET + LINE_R_PER_HENRY * value;
            }
            _ => {
                return Err(Error::Config(format!(
                    "unknown parameter path {path:?}; valid paths: {}",
                    PARAM_PATHS.join(", ")
                )))
            }
        }
        self.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn derived_gains_match_hand_values() {
        let g = GfmParams::default();
        assert_relative_eq!(g.v_peak(), 326.598, max_relative = 1e-4);
        assert_relative_eq!(g.k_pc(), 2.3, max_relative = 1e-12);
        assert_relative_eq!(g.k_ic(), 100.0, max_relative = 1e-12);
        assert_relative_eq!(g.k_pv(), 5.25e-4, max_relative = 1e-12);
        assert_relative_eq!(g.k_iv(), 1.1025e-3, max_relative = 1e-12);
        assert_relative_eq!(g.m_p(), 0.01 * g.omega0 / 15e3, max_relative = 1e-12);
    }

    /// The type-2 PLL with ζ = 1/√2 has |T(jω)|² = (1 + 4ζ²x²)/((1−x²)² + 4ζ²x²)
    /// at x = ω/ω_n; the −3 dB point must land on the configured bandwidth.
    #[test]
    fn pll_bandwidth_mapping_hits_minus_3db() {
        let g = GflParams::default();
        let wn = g.omega_n_pll();
        let x = g.alpha_pll / wn;
        let z2 = 2.0 * g.zeta_pll * g.zeta_pll;
        let num = 1.0 + 2.0 * z2 * x * x;
        let den = (1.0 - x * x).powi(2) + 2.0 * z2 * x * x;
        assert_relative_eq!(num / den, 0.5, max_relative = 1e-12);
        assert_relative_eq!(x, 2.0581, max_relative = 1e-4);
    }

    #[test]
    fn validation_rejects_nonpositive_inductance() {
        let mut g = GflParams::default();
        g.l_c = 0.0;
        assert!(g.validate().is_err());
        let mut n = NetworkParams::default();
        n.r_load = -1.0;
        assert!(n.validate().is_err());
    }

    #[test]
    fn every_listed_path_is_settable() {
        for path in PARAM_PATHS {
            let mut sys = SystemParams::default();
            // Setpoints accept any finite value; everything else must stay
            // positive, so a small positive probe works for both.
            sys.set_path(path, 0.5).unwrap_or_else(|e| panic!("{path}: {e}"));
        }
        let mut sys = SystemParams::default();
        assert!(sys.set_path("gfm.alpha_q", 1.0).is_err());
        assert!(sys.set_path("network.l_line", -1.0).is_err());
    }

    #[test]
    fn paired_line_path_covaries_resistance() {
        let mut sys = SystemParams::default();
        sys.set_path("network.line", 4e-3).unwrap();
        assert_relative_eq!(sys.network.l_line, 4e-3, max_relative = 1e-15);
        assert_relative_eq!(sys.network.r_line, 0.25, max_relative = 1e-12);
        sys.set_path("network.line", 6e-3).unwrap();
        assert_relative_eq!(sys.network.r_line, 0.35, max_relative = 1e-12);
    }
}
