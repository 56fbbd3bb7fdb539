//! Nonlinear time-domain simulation of the merged two-converter system.
//!
//! Fixed-step classical Runge-Kutta with an integrator-stability precheck
//! against the fastest linearized mode, instantaneous mid-run parameter
//! steps, and divergence truncation (a blowing-up run yields a truncated,
//! NaN-free record instead of an error). A linearized twin of the same
//! scenario machinery provides the oracle for small-signal validation, and
//! [`estimate_oscillation`] turns a recorded channel into a dominant
//! frequency and growth rate.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Vector2};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linearize::assemble_system;
use crate::model::{
    self, solve_operating_point, MergedSystem, OperatingPoint, GFM_STATES, IC, PF, SYS_STATES,
};
use crate::params::SystemParams;
use crate::tol;

/// Classical fourth-order Runge-Kutta stepper with caller-owned stage
/// buffers so the integration loop never allocates.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(n: usize) -> Self {
        Self { k1: vec![0.0; n], k2: vec![0.0; n], k3: vec![0.0; n], k4: vec![0.0; n], tmp: vec![0.0; n] }
    }

    /// Advance `x` by one step of ẋ = f(t, x).
    pub(crate) fn step(
        &mut self,
        t: f64,
        h: f64,
        x: &mut [f64],
        mut f: impl FnMut(f64, &[f64], &mut [f64]),
    ) {
        let n = x.len();
        f(t, x, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        f(t + h, &self.tmp, &mut self.k4);
        for i in 0..n {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Instantaneous parameter change applied mid-run, snapped to the nearest
/// integrator step boundary.
#[derive(Debug, Clone)]
pub struct ParamStep {
    /// Dotted path understood by [`SystemParams::set_path`].
    pub path: String,
    pub value: f64,
    /// Time (s) at which the new value takes effect.
    pub at: f64,
}

/// A time-domain experiment. The system starts at the solved equilibrium of
/// the base parameters (time zero is steady state by construction) and
/// optionally has one parameter stepped mid-run; the state carries over the
/// step continuously, so a gain or setpoint change kicks the system exactly
/// the way it would a running converter.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub sys: SystemParams,
    pub duration: f64,
    /// Integrator step (s).
    pub step: f64,
    /// Record every k-th integrator step (1 = every step).
    pub record_every: usize,
    pub param_step: Option<ParamStep>,
}

impl Scenario {
    /// 20 s at a 50 µs step, recorded at 1 kHz.
    pub fn new(sys: SystemParams) -> Self {
        Self { sys, duration: 20.0, step: 50e-6, record_every: 20, param_step: None }
    }
}

/// Recorded channels: bus voltage, follower current, droop frame speed, and
/// the follower's injected power, all in the droop frame.
pub const CHANNEL_NAMES: [&str; 7] = ["u_d", "u_q", "i_d", "i_q", "omega_v", "p", "q"];

/// Where and why a run was truncated.
#[derive(Debug, Clone)]
pub struct Divergence {
    pub t: f64,
    pub state: String,
    pub value: f64,
}

/// Uniformly sampled multi-channel record of one run.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub names: Vec<String>,
    /// `data[k]` is channel k, same length as `t`.
    pub data: Vec<Vec<f64>>,
    /// Set when the run was truncated; the recorded samples stop at the last
    /// state inside the divergence bound, so the record itself is NaN-free.
    pub divergence: Option<Divergence>,
    /// State after the last step taken. When `divergence` is set this is the
    /// offending state, kept for diagnostics.
    pub final_state: DVector<f64>,
}

impl TimeSeries {
    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        match self.names.iter().position(|n| n == name) {
            Some(k) => Ok(&self.data[k]),
            None => Err(Error::UnknownChannel {
                channel: name.to_string(),
                available: self.names.clone(),
            }),
        }
    }

    /// Uniform sampling interval (s).
    pub fn sample_step(&self) -> f64 {
        if self.t.len() >= 2 {
            self.t[1] - self.t[0]
        } else {
            0.0
        }
    }
}

fn channels_at(merged: &MergedSystem, x: &[f64]) -> [f64; 7] {
    let u = merged.bus_voltage(x);
    let i = Vector2::new(x[GFM_STATES + IC], x[GFM_STATES + IC + 1]);
    let omega_v = merged.gfm.omega_v(x[PF]);
    let p = 1.5 * (u.x * i.x + u.y * i.y);
    let q = 1.5 * (u.y * i.x - u.x * i.y);
    [u.x, u.y, i.x, i.y, omega_v, p, q]
}

/// Integrator-stability precheck: the step must resolve the fastest
/// linearized mode of the given configuration.
fn check_step(sys: &SystemParams, h: f64) -> Result<()> {
    let op = solve_operating_point(sys)?;
    let model = assemble_system(sys, &op)?;
    let eig_max = model.eigenvalues()?.iter().map(|e| e.norm()).fold(0.0, f64::max);
    if h * eig_max >= tol::RK4_STEP_LIMIT {
        return Err(Error::StepTooLarge { step: h, eig_max, limit: tol::RK4_STEP_LIMIT });
    }
    Ok(())
}

fn validate_scenario(sc: &Scenario) -> Result<()> {
    sc.sys.validate()?;
    if !(sc.step.is_finite() && sc.step > 0.0) {
        return Err(Error::Config(format!("sim step must be positive, got {}", sc.step)));
    }
    let fundamental = TAU / sc.sys.gfm.omega0;
    if sc.duration < 10.0 * fundamental {
        return Err(Error::Config(format!(
            "sim duration {} s shorter than 10 fundamental periods ({} s)",
            sc.duration,
            10.0 * fundamental
        )));
    }
    if sc.record_every == 0 {
        return Err(Error::Config("record_every must be at least 1".into()));
    }
    if sc.record_every as f64 * sc.step > sc.duration {
        return Err(Error::Config("record_every leaves fewer than two samples".into()));
    }
    if let Some(ps) = &sc.param_step {
        if !(ps.at.is_finite() && (0.0..=sc.duration).contains(&ps.at)) {
            return Err(Error::Config(format!(
                "parameter step time {} s outside the run duration {} s",
                ps.at, sc.duration
            )));
        }
    }
    Ok(())
}

/// Run one scenario. Returns the recorded channels; a diverged run comes
/// back truncated with a [`Divergence`] record instead of failing.
pub fn simulate(sc: &Scenario) -> Result<TimeSeries> {
    validate_scenario(sc)?;
    let op = solve_operating_point(&sc.sys)?;
    check_step(&sc.sys, sc.step)?;

    let stepped_sys = match &sc.param_step {
        Some(ps) => {
            let mut s = sc.sys.clone();
            s.set_path(&ps.path, ps.value)?;
            Some(s)
        }
        None => None,
    };
    // The stepped configuration is often deliberately unstable; an unstable
    // equilibrium still pins its fastest mode for the step check. When its
    // equilibrium solve fails outright the base check has to stand alone
    // (the structural fast modes barely move under a setpoint change).
    if let Some(s2) = &stepped_sys {
        if let Err(e @ Error::StepTooLarge { .. }) = check_step(s2, sc.step) {
            return Err(e);
        }
    }

    let merged_base = MergedSystem::new(&sc.sys);
    let merged_stepped = stepped_sys.as_ref().map(MergedSystem::new);
    let k_switch = match &sc.param_step {
        Some(ps) => (ps.at / sc.step).round() as usize,
        None => usize::MAX,
    };
    let active = |k: usize| -> &MergedSystem {
        if k >= k_switch {
            merged_stepped.as_ref().expect("switch index set only with a stepped system")
        } else {
            &merged_base
        }
    };

    let scales = model::state_scales(&sc.sys.gfm);
    let labels = model::sys_state_labels();
    let n_steps = (sc.duration / sc.step).round() as usize;
    let dt_rec = sc.step * sc.record_every as f64;

    let cap = n_steps / sc.record_every + 2;
    let mut t_rec: Vec<f64> = Vec::with_capacity(cap);
    let mut data: Vec<Vec<f64>> = (0..CHANNEL_NAMES.len()).map(|_| Vec::with_capacity(cap)).collect();
    let record = |k_sample: usize, ch: [f64; 7], t_rec: &mut Vec<f64>, data: &mut Vec<Vec<f64>>| {
        t_rec.push(k_sample as f64 * dt_rec);
        for (col, v) in data.iter_mut().zip(ch) {
            col.push(v);
        }
    };

    let mut x: Vec<f64> = op.x.as_slice().to_vec();
    let mut rk = Rk4::new(SYS_STATES);
    let mut divergence = None;
    record(0, channels_at(active(0), &x), &mut t_rec, &mut data);

    for k in 0..n_steps {
        let m = active(k);
        let tk = k as f64 * sc.step;
        rk.step(tk, sc.step, &mut x, |_, x, dx| m.rhs_default_setpoints(x, dx));

        if let Some(idx) = x
            .iter()
            .zip(scales.iter())
            .position(|(v, s)| !v.is_finite() || v.abs() > tol::SIM_DIVERGENCE_FACTOR * s)
        {
            divergence = Some(Divergence {
                t: (k + 1) as f64 * sc.step,
                state: labels[idx].clone(),
                value: x[idx],
            });
            break;
        }
        if (k + 1) % sc.record_every == 0 {
            record(
                (k + 1) / sc.record_every,
                channels_at(active(k + 1), &x),
                &mut t_rec,
                &mut data,
            );
        }
    }

    Ok(TimeSeries {
        t: t_rec,
        names: CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
        data,
        divergence,
        final_state: DVector::from_vec(x),
    })
}

/// Integrate the linearized merged model from the same operating point under
/// a power-setpoint step (ΔP, ΔQ) applied at t = 0, producing the same
/// channels as [`simulate`]. Channels are evaluated on x₀ + Δx with the
/// physical output maps, so the quadratic power channels carry a
/// second-order error, negligible in the small-signal regime this oracle
/// serves.
pub fn simulate_linearized(
    sys: &SystemParams,
    op: &OperatingPoint,
    dpq: (f64, f64),
    duration: f64,
    step: f64,
    record_every: usize,
) -> Result<TimeSeries> {
    if !(step.is_finite() && step > 0.0) || record_every == 0 {
        return Err(Error::Config("linearized run needs a positive step and record_every".into()));
    }
    let model = assemble_system(sys, op)?;
    let a: DMatrix<f64> = model.a().clone();
    let eig_max = model.eigenvalues()?.iter().map(|e| e.norm()).fold(0.0, f64::max);
    if step * eig_max >= tol::RK4_STEP_LIMIT {
        return Err(Error::StepTooLarge { step, eig_max, limit: tol::RK4_STEP_LIMIT });
    }
    let forcing = model.input_block("pq")? * DVector::from_column_slice(&[dpq.0, dpq.1]);
    let merged = MergedSystem::new(sys);

    let n_steps = (duration / step).round() as usize;
    let dt_rec = step * record_every as f64;
    let cap = n_steps / record_every + 2;
    let mut t_rec: Vec<f64> = Vec::with_capacity(cap);
    let mut data: Vec<Vec<f64>> = (0..CHANNEL_NAMES.len()).map(|_| Vec::with_capacity(cap)).collect();

    let n = SYS_STATES;
    let mut dx_state = vec![0.0; n];
    let mut rk = Rk4::new(n);
    let mut x_full = vec![0.0; n];
    let record = |k_sample: usize, dx_state: &[f64], x_full: &mut [f64], t_rec: &mut Vec<f64>, data: &mut Vec<Vec<f64>>| {
        for i in 0..n {
            x_full[i] = op.x[i] + dx_state[i];
        }
        t_rec.push(k_sample as f64 * dt_rec);
        for (col, v) in data.iter_mut().zip(channels_at(&merged, x_full)) {
            col.push(v);
        }
    };
    record(0, &dx_state, &mut x_full, &mut t_rec, &mut data);

    let rhs = |_t: f64, x: &[f64], dx: &mut [f64]| {
        for i in 0..n {
            let mut acc = forcing[i];
            for j in 0..n {
                acc += a[(i, j)] * x[j];
            }
            dx[i] = acc;
        }
    };
    for k in 0..n_steps {
        rk.step(k as f64 * step, step, &mut dx_state, rhs);
        if (k + 1) % record_every == 0 {
            record((k + 1) / record_every, &dx_state, &mut x_full, &mut t_rec, &mut data);
        }
    }

    for i in 0..n {
        x_full[i] = op.x[i] + dx_state[i];
    }
    Ok(TimeSeries {
        t: t_rec,
        names: CHANNEL_NAMES.iter().map(|s| s.to_string()).collect(),
        data,
        divergence: None,
        final_state: DVector::from_column_slice(&x_full),
    })
}

fn linear_detrend(y: &[f64]) -> Vec<f64> {
    let n = y.len() as f64;
    let mean_m = (n - 1.0) / 2.0;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (m, &v) in y.iter().enumerate() {
        let dm = m as f64 - mean_m;
        sxx += dm * dm;
        sxy += dm * (v - mean_y);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    y.iter()
        .enumerate()
        .map(|(m, &v)| v - mean_y - slope * (m as f64 - mean_m))
        .collect()
}

/// Dominant oscillation in the tail of a recorded channel.
///
/// The last `window` seconds are linearly detrended; the dominant frequency
/// is the parabolically interpolated peak of a Hann-windowed DFT, accepted
/// only when it stands [`tol::TONE_PROMINENCE_DB`] above the median bin; the
/// growth rate is the least-squares slope of the log magnitude of the
/// analytic signal over the interior 80% of the window (the edges carry the
/// discrete Hilbert transform's wrap-around artifacts).
///
/// Returns (frequency Hz, growth rate 1/s).
pub fn estimate_oscillation(ts: &TimeSeries, channel: &str, window: f64) -> Result<(f64, f64)> {
    let y_all = ts.channel(channel)?;
    let h = ts.sample_step();
    if h <= 0.0 || y_all.len() < 16 {
        return Err(Error::EmptyDataset("need at least 16 uniform samples for oscillation estimation".into()));
    }
    let n_w = ((window / h).round() as usize).clamp(16, y_all.len());
    let y = &y_all[y_all.len() - n_w..];
    let n = y.len();
    let detr = linear_detrend(y);

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex64> = detr
        .iter()
        .enumerate()
        .map(|(m, &v)| {
            let w = 0.5 - 0.5 * (TAU * m as f64 / (n - 1) as f64).cos();
            Complex64::new(v * w, 0.0)
        })
        .collect();
    fft.process(&mut buf);

    let half = n / 2;
    // Positive-frequency interior bins; bin 0 (mean) is gone by detrending.
    let mags: Vec<f64> = (1..half).map(|k| buf[k].norm()).collect();
    let mut sorted = mags.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let (k_rel, &pk_mag) = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("non-empty spectrum");
    let k_pk = k_rel + 1;

    // A peak below the round-off floor of the channel is not a tone at all.
    let y_scale = y.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if !(pk_mag > 1e-9 * n as f64 * y_scale) {
        return Err(Error::NoDominantTone { prominence_db: 0.0, required_db: tol::TONE_PROMINENCE_DB });
    }
    let prominence_db = 20.0 * (pk_mag / median.max(f64::MIN_POSITIVE)).log10();
    if prominence_db < tol::TONE_PROMINENCE_DB {
        return Err(Error::NoDominantTone { prominence_db, required_db: tol::TONE_PROMINENCE_DB });
    }

    // Parabolic refinement on log magnitude.
    let delta = if k_pk >= 2 && k_pk + 1 < half {
        let (a, b, c) = (mags[k_rel - 1].max(1e-300).ln(), pk_mag.ln(), mags[k_rel + 1].max(1e-300).ln());
        let den = a - 2.0 * b + c;
        if den.abs() > 0.0 {
            (0.5 * (a - c) / den).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    } else {
        0.0
    };
    let f_hz = (k_pk as f64 + delta) / (n as f64 * h);

    // Analytic signal of the (unwindowed) detrended tail.
    let mut abuf: Vec<Complex64> = detr.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut abuf);
    let pos_end = if n % 2 == 0 { n / 2 } else { n.div_ceil(2) };
    for v in abuf.iter_mut().take(pos_end).skip(1) {
        *v *= 2.0;
    }
    let neg_start = if n % 2 == 0 { n / 2 + 1 } else { n.div_ceil(2) };
    for v in abuf.iter_mut().skip(neg_start) {
        *v = Complex64::new(0.0, 0.0);
    }
    planner.plan_fft_inverse(n).process(&mut abuf);

    let drop = n / 10;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut count = 0.0;
    for (m, z) in abuf.iter().enumerate().take(n - drop).skip(drop) {
        let env = z.norm() / n as f64;
        if env < 1e-300 {
            continue;
        }
        let (tm, le) = (m as f64 * h, env.ln());
        sx += tm;
        sy += le;
        sxx += tm * tm;
        sxy += tm * le;
        count += 1.0;
    }
    if count < 8.0 {
        return Err(Error::NoDominantTone { prominence_db, required_db: tol::TONE_PROMINENCE_DB });
    }
    let denom = count * sxx - sx * sx;
    let growth = if denom.abs() > 0.0 { (count * sxy - sx * sy) / denom } else { 0.0 };
    Ok((f_hz, growth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic_series(f: f64, sigma: f64, amp: f64, phase: f64, fs: f64, dur: f64) -> TimeSeries {
        let n = (dur * fs) as usize;
        let t: Vec<f64> = (0..n).map(|m| m as f64 / fs).collect();
        let y: Vec<f64> =
            t.iter().map(|&tv| amp * (sigma * tv).exp() * (TAU * f * tv + phase).sin()).collect();
        TimeSeries {
            t,
            names: vec!["y".into()],
            data: vec![y],
            divergence: None,
            final_state: DVector::zeros(1),
        }
    }

    #[test]
    fn growing_tone_is_recovered() {
        let ts = synthetic_series(0.7, 0.2, 1.0, 0.0, 1000.0, 20.0);
        let (f, g) = estimate_oscillation(&ts, "y", 20.0).unwrap();
        assert!((f - 0.7).abs() < 0.01, "f = {f}");
        assert!((g - 0.2).abs() < 0.01, "growth = {g}");
    }

    #[test]
    fn decaying_tone_has_negative_growth() {
        let ts = synthetic_series(1.7, -0.05, 2.5, 1.0, 1000.0, 20.0);
        let (f, g) = estimate_oscillation(&ts, "y", 20.0).unwrap();
        assert!((f - 1.7).abs() < 0.01, "f = {f}");
        assert!((g + 0.05).abs() < 0.01, "growth = {g}");
    }

    #[test]
    fn constant_channel_is_refused() {
        let n = 4000;
        let ts = TimeSeries {
            t: (0..n).map(|m| m as f64 * 1e-3).collect(),
            names: vec!["y".into()],
            data: vec![vec![3.3; n]],
            divergence: None,
            final_state: DVector::zeros(1),
        };
        match estimate_oscillation(&ts, "y", 4.0) {
            Err(Error::NoDominantTone { .. }) => {}
            other => panic!("expected no-dominant-tone, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]
        /// Synthetic exponential tones across the band of interest come back
        /// within 0.01 Hz and 0.01 s⁻¹.
        #[test]
        fn estimator_recovers_synthetic_tones(
            f in 0.4f64..4.0,
            sigma in -0.25f64..0.25,
            amp in 0.1f64..100.0,
            phase in 0.0f64..TAU,
        ) {
            let ts = synthetic_series(f, sigma, amp, phase, 500.0, 20.0);
            let (fe, ge) = estimate_oscillation(&ts, "y", 20.0).unwrap();
            prop_assert!((fe - f).abs() < 0.01, "f {f} -> {fe}");
            prop_assert!((ge - sigma).abs() < 0.01, "sigma {sigma} -> {ge}");
        }
    }

    #[test]
    fn equilibrium_holds_without_excitation() {
        let mut sc = Scenario::new(SystemParams::default());
        sc.duration = 1.0;
        let ts = simulate(&sc).unwrap();
        assert!(ts.divergence.is_none());
        for (k, name) in ts.names.iter().enumerate() {
            let y = &ts.data[k];
            let y0 = y[0];
            let dev = y.iter().fold(0.0f64, |m, &v| m.max((v - y0).abs()));
            assert!(dev <= 1e-3 * y0.abs().max(1.0), "{name} drifted by {dev}");
        }
    }

    /// Fourth-order convergence in practice: halving the default step moves
    /// the end state of an excited stable run by less than 1e-6 relative.
    #[test]
    fn step_halving_leaves_end_state_unchanged() {
        let mut ends = Vec::new();
        for step in [50e-6, 25e-6] {
            let mut sc = Scenario::new(SystemParams::default());
            sc.duration = 5.0;
            sc.step = step;
            sc.param_step =
                Some(ParamStep { path: "gfl.q_set".into(), value: 500.0, at: 0.0 });
            ends.push(simulate(&sc).unwrap().final_state);
        }
        let scales = model::state_scales(&SystemParams::default().gfm);
        let rel = (0..SYS_STATES)
            .map(|i| (ends[0][i] - ends[1][i]).abs() / scales[i])
            .fold(0.0f64, f64::max);
        assert!(rel < 1e-6, "end-state shift {rel:e}");
    }

    #[test]
    fn oversized_step_is_refused() {
        let mut sc = Scenario::new(SystemParams::default());
        sc.duration = 1.0;
        sc.step = 0.05;
        sc.record_every = 1;
        match simulate(&sc) {
            Err(Error::StepTooLarge { .. }) => {}
            other => panic!("expected step refusal, got {other:?}"),
        }
    }

    /// A run that collapses the bus (the follower suddenly draws far more
    /// than the system can source) must come back truncated with a
    /// divergence record and a NaN-free series, not an error. The stepped
    /// configuration has no equilibrium at all, which also exercises the
    /// step-check fallback onto the base configuration.
    #[test]
    fn divergence_truncates_cleanly() {
        let mut sc = Scenario::new(SystemParams::default());
        sc.duration = 5.0;
        sc.record_every = 1;
        sc.param_step = Some(ParamStep { path: "gfl.p_set".into(), value: -100e3, at: 0.0 });
        let ts = simulate(&sc).unwrap();
        let div = ts.divergence.as_ref().expect("run should diverge");
        assert!(div.t < sc.duration, "diverged only at {}", div.t);
        for col in &ts.data {
            assert!(col.iter().all(|v| v.is_finite()));
        }
        assert!(*ts.t.last().unwrap() <= div.t);
    }

    /// A 0.1% setpoint step stays in the linear regime: the nonlinear
    /// response tracks the linearized model within 5% of the linear swing.
    #[test]
    fn small_setpoint_step_matches_linearized_response() {
        let sys = SystemParams::default();
        let op = solve_operating_point(&sys).unwrap();
        let dp = 0.001 * sys.gfl.p_set;

        let mut sc = Scenario::new(sys.clone());
        sc.duration = 3.0;
        sc.record_every = 10;
        sc.param_step =
            Some(ParamStep { path: "gfl.p_set".into(), value: sys.gfl.p_set + dp, at: 0.0 });
        let nl = simulate(&sc).unwrap();
        let lin = simulate_linearized(&sys, &op, (dp, 0.0), 3.0, sc.step, 10).unwrap();

        assert_eq!(nl.t.len(), lin.t.len());
        for (k, name) in nl.names.iter().enumerate() {
            let (ynl, ylin) = (&nl.data[k], &lin.data[k]);
            let swing = ylin.iter().fold(0.0f64, |m, &v| m.max((v - ylin[0]).abs()));
            if swing < 1e-9 {
                continue;
            }
            let err = ynl
                .iter()
                .zip(ylin)
                .fold(0.0f64, |m, (&a, &b)| m.max(((a - ynl[0]) - (b - ylin[0])).abs()));
            assert!(err <= 0.05 * swing, "{name}: err {err:e} vs swing {swing:e}");
        }
    }
}
