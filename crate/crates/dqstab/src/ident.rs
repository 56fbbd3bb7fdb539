//! Tone-injection identification: measure the four frequency-domain objects
//! from nonlinear time-domain experiments, the way a hardware frequency sweep
//! on a converter testbench would.
//!
//! Each frequency is one or two single-tone experiments. The tone amplitude
//! ramps in with a raised cosine over the first half of the settle phase and
//! dwells at full amplitude for the second half so the turn-on transient has
//! decayed before the measurement window opens; the window length is snapped
//! to an integer number of tone periods, which makes the single-bin DFT
//! projection exact (no leakage, and dc plus every other coherent harmonic is
//! exactly orthogonal). Dividing response phasors by injection phasors then
//! gives one column of the object per experiment.
//!
//! Sign conventions match `extract`: `Y_C` is the load-sign admittance
//! (negated voltage-to-current response), `Z_V` maps current injected into
//! the bus node to the bus voltage, `Γ_V` maps that same injection to the
//! droop frequency, and `Ψ_C` maps frame-speed deviation to injected current.
//! Experiments are independent (each restarts from the equilibrium), so the
//! result cannot depend on the order the axes are excited in.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Matrix2, RowVector2, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::freq::TransferSamples;
use crate::model::{jrot, GflBlock, GfmBlock, OperatingPoint, GFM_STATES, IC, IL, PF};
use crate::params::SystemParams;
use crate::sim::{Rk4, TimeSeries};
use crate::tol;

/// Frequency schedule and injection shape shared by all identification runs.
#[derive(Debug, Clone)]
pub struct InjectionPlan {
    /// Requested tone frequencies (Hz). Sorted internally; frequencies that
    /// snap onto the same coherent bin collapse into one experiment.
    pub freqs_hz: Vec<f64>,
    /// Tone amplitude as a fraction of the driven quantity's nominal value
    /// (peak phase voltage, rated current, or nominal frequency).
    pub amplitude_frac: f64,
    /// Integrator step (s). Accuracy of the identified response is governed
    /// by (ωh)⁴; 50 µs holds ~10⁻³ at 100 Hz, 20 µs ~10⁻⁴ at 1 kHz.
    pub step: f64,
    /// Pre-window time (s): the tone ramps in over the first half and dwells
    /// at full amplitude for the second, letting startup transients die.
    pub settle: f64,
    /// Minimum measurement window (s); bounds the snap quantum 1/T_w.
    pub min_window_s: f64,
    /// The window also spans at least this many tone periods.
    pub min_periods: usize,
}

impl InjectionPlan {
    pub fn new(freqs_hz: Vec<f64>) -> Self {
        Self {
            freqs_hz,
            amplitude_frac: 0.005,
            step: 50e-6,
            settle: 2.0,
            min_window_s: 0.5,
            min_periods: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.freqs_hz.is_empty() {
            return Err(Error::Config("injection plan has no frequencies".into()));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::Config(format!("injection step must be positive, got {}", self.step)));
        }
        for &f in &self.freqs_hz {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::Config(format!("tone frequency must be positive, got {f}")));
            }
            // Keep the tone well inside the band the integrator resolves.
            if TAU * f * self.step >= 0.5 {
                return Err(Error::Config(format!(
                    "tone at {f} Hz needs a step below {:.2e} s (got {:.2e})",
                    0.5 / (TAU * f),
                    self.step
                )));
            }
        }
        if !(self.amplitude_frac > 0.0 && self.amplitude_frac <= 0.05) {
            return Err(Error::Config(format!(
                "injection amplitude must be in (0, 0.05] of nominal, got {}",
                self.amplitude_frac
            )));
        }
        if !(self.settle.is_finite() && self.settle >= 0.0) {
            return Err(Error::Config(format!("settle time must be non-negative, got {}", self.settle)));
        }
        if !(self.min_window_s.is_finite() && self.min_window_s > 0.0) {
            return Err(Error::Config(format!("window must be positive, got {}", self.min_window_s)));
        }
        if self.min_periods == 0 {
            return Err(Error::Config("window must span at least one tone period".into()));
        }
        Ok(())
    }

    /// Snap one requested frequency to the nearest coherent bin of its
    /// window: with n samples of step h the window holds exactly k periods of
    /// k/(n·h) Hz, so the DFT projection at the snapped frequency is exact.
    fn snap(&self, f_req: f64) -> ToneJob {
        let h = self.step;
        let t_w = (self.min_periods as f64 / f_req).max(self.min_window_s);
        let n_window = (t_w / h).round().max(2.0) as usize;
        let cycles = (f_req * n_window as f64 * h).round().max(1.0);
        let f_hz = cycles / (n_window as f64 * h);
        ToneJob { f_hz, omega: TAU * f_hz, n_settle: (self.settle / h).ceil() as usize, n_window }
    }

    /// Sorted, deduplicated experiment schedule.
    fn jobs(&self) -> Result<Vec<ToneJob>> {
        self.validate()?;
        let mut fs = self.freqs_hz.clone();
        fs.sort_by(f64::total_cmp);
        let mut jobs: Vec<ToneJob> = Vec::with_capacity(fs.len());
        for f_req in fs {
            let job = self.snap(f_req);
            if jobs.last().is_none_or(|last| job.f_hz > last.f_hz) {
                jobs.push(job);
            }
        }
        Ok(jobs)
    }
}

/// One scheduled experiment frequency after coherence snapping.
#[derive(Debug, Clone, Copy)]
struct ToneJob {
    f_hz: f64,
    omega: f64,
    n_settle: usize,
    n_window: usize,
}

impl ToneJob {
    fn tone(&self, amp: f64, h: f64) -> Tone {
        Tone { omega: self.omega, amp, t_ramp: 0.5 * self.n_settle as f64 * h }
    }
}

/// Soft-started sinusoid: raised-cosine amplitude ramp, then steady tone.
/// The envelope is C¹ at both ends of the ramp, which keeps the excitation
/// of the plant's free modes orders of magnitude below a hard turn-on.
#[derive(Debug, Clone, Copy)]
struct Tone {
    omega: f64,
    amp: f64,
    t_ramp: f64,
}

impl Tone {
    fn value(&self, t: f64) -> f64 {
        let gate = if t >= self.t_ramp { 1.0 } else { 0.5 - 0.5 * (PI * t / self.t_ramp).cos() };
        self.amp * gate * (self.omega * t).sin()
    }
}

/// Single-bin DFT phasor of one recorded channel at `f_hz`, in the sine
/// convention: a channel equal to sin(2πf·t) over the window yields −j.
///
/// The window must span an integer number of periods (which the injection
/// scheduler guarantees by construction); anything else would leak the tone
/// across bins and is refused rather than silently biased.
pub fn extract_phasor(ts: &TimeSeries, channel: &str, f_hz: f64) -> Result<Complex64> {
    let y = ts.channel(channel)?;
    let h = ts.sample_step();
    let n = y.len();
    if n < 2 || h <= 0.0 {
        return Err(Error::EmptyDataset(format!("phasor extraction on {} samples", n)));
    }
    if !(f_hz.is_finite() && f_hz > 0.0) {
        return Err(Error::Config(format!("phasor frequency must be positive, got {f_hz}")));
    }
    let periods = f_hz * n as f64 * h;
    if (periods - periods.round()).abs() > tol::COHERENCE_REL * periods.max(1.0)
        || periods.round() < 1.0
    {
        return Err(Error::NonCoherent { f_hz, periods, tol: tol::COHERENCE_REL });
    }

    let omega = TAU * f_hz;
    let w = Complex64::from_polar(1.0, -omega * h);
    let mut ph = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (m, &ym) in y.iter().enumerate() {
        // Rotator recurrence drifts ~m·eps; rebase periodically so million-
        // sample windows stay at full precision.
        if m % 8192 == 0 {
            ph = Complex64::from_polar(1.0, -((omega * h * m as f64) % TAU));
        }
        acc += ph * ym;
        ph *= w;
    }
    Ok(acc * 2.0 / n as f64)
}

/// Integrate ẋ = f(t, x) through the settle phase, then record `N` channels
/// over the measurement window at every step. Time passed to the callbacks is
/// global (tone phase is continuous across the settle/window boundary); the
/// recorded time axis is window-local so the series is phasor-ready.
fn drive_window<const N: usize>(
    names: [&str; N],
    x0: &[f64],
    h: f64,
    n_settle: usize,
    n_window: usize,
    mut rhs: impl FnMut(f64, &[f64], &mut [f64]),
    mut sample: impl FnMut(f64, &[f64]) -> [f64; N],
) -> Result<TimeSeries> {
    let mut x = x0.to_vec();
    let mut rk = Rk4::new(x.len());
    for k in 0..n_settle {
        rk.step(k as f64 * h, h, &mut x, &mut rhs);
    }
    let t0 = n_settle as f64 * h;
    let mut t = Vec::with_capacity(n_window);
    let mut data: Vec<Vec<f64>> = (0..N).map(|_| Vec::with_capacity(n_window)).collect();
    for k in 0..n_window {
        let tau = k as f64 * h;
        let vals = sample(t0 + tau, &x);
        t.push(tau);
        for (chan, v) in data.iter_mut().zip(vals) {
            chan.push(v);
        }
        rk.step(t0 + tau, h, &mut x, &mut rhs);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("identification experiment state".into()));
    }
    Ok(TimeSeries {
        t,
        names: names.iter().map(|s| s.to_string()).collect(),
        data,
        divergence: None,
        final_state: DVector::from_vec(x),
    })
}

/// Cap on the frame-angle excursion a frequency-channel tone may cause
/// (rad). A speed tone of amplitude a wobbles the frame angle by a/ω, so a
/// fixed speed amplitude drives the synchronization loop far outside its
/// linear range at low tone frequencies; capping the angle swing keeps the
/// experiment small-signal across the whole band.
const MAX_FRAME_ANGLE_SWING: f64 = 0.02;

/// Which scalar the follower experiment perturbs.
#[derive(Debug, Clone, Copy)]
enum GflDrive {
    UD,
    UQ,
    Omega,
}

/// Tone experiment on the stand-alone follower: prescribed bus voltage and
/// frame speed around the merged equilibrium, injected current recorded.
fn gfl_tone_experiment(
    sys: &SystemParams,
    op: &OperatingPoint,
    tone: Tone,
    h: f64,
    job: ToneJob,
    drive: GflDrive,
) -> Result<TimeSeries> {
    let gfl = GflBlock::new(sys.gfl.clone(), sys.gfm.omega0);
    let u0 = op.bus_voltage(&sys.network);
    let w0 = op.omega_v(&sys.gfm);
    let (p_set, q_set) = (sys.gfl.p_set, sys.gfl.q_set);
    let input = move |t: f64| -> (Vector2<f64>, f64) {
        let s = tone.value(t);
        match drive {
            GflDrive::UD => (Vector2::new(u0.x + s, u0.y), w0),
            GflDrive::UQ => (Vector2::new(u0.x, u0.y + s), w0),
            GflDrive::Omega => (u0, w0 + s),
        }
    };
    drive_window(
        ["inj", "i_d", "i_q"],
        op.gfl_state(),
        h,
        job.n_settle,
        job.n_window,
        |t, x, dx| {
            let (u, w) = input(t);
            gfl.rhs(x, u, w, p_set, q_set, dx);
        },
        |t, x| [tone.value(t), x[IC], x[IC + 1]],
    )
}

/// Tone experiment on the stand-alone forming side: current injected into the
/// bus node on one axis, bus voltage and droop frequency recorded. The bus
/// constraint u = R_load·(i_line + i_inj) is the exact nonlinear counterpart
/// of the current-driven model used by extraction.
fn gfm_tone_experiment(
    sys: &SystemParams,
    op: &OperatingPoint,
    tone: Tone,
    h: f64,
    job: ToneJob,
    axis: usize,
) -> Result<TimeSeries> {
    let gfm = GfmBlock::new(sys.gfm.clone(), sys.network.clone());
    let r_load = sys.network.r_load;
    let i0 = Vector2::new(op.x[GFM_STATES + IC], op.x[GFM_STATES + IC + 1]);
    let bus = move |t: f64, x: &[f64]| -> (Vector2<f64>, f64) {
        let s = tone.value(t);
        let mut i_inj = i0;
        i_inj[axis] += s;
        ((Vector2::new(x[IL], x[IL + 1]) + i_inj) * r_load, s)
    };
    drive_window(
        ["inj", "u_d", "u_q", "omega_v"],
        op.gfm_state(),
        h,
        job.n_settle,
        job.n_window,
        |t, x, dx| {
            let (u, _) = bus(t, x);
            gfm.rhs(x, u, 0.0, dx);
        },
        |t, x| {
            let (u, s) = bus(t, x);
            [s, u.x, u.y, gfm.omega_v(x[PF])]
        },
    )
}

/// Invert the 2×2 injection matrix, refusing experiments whose excitation
/// directions are too parallel to separate the columns reliably.
fn checked_inverse(ins: &Matrix2<Complex64>) -> Result<Matrix2<Complex64>> {
    // Singular values from the eigenvalues of the 2×2 Gram matrix.
    let g = ins.adjoint() * ins;
    let tr = g[(0, 0)].re + g[(1, 1)].re;
    let det_g = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]).re.max(0.0);
    let disc = (tr * tr - 4.0 * det_g).max(0.0).sqrt();
    let s_max = (0.5 * (tr + disc)).sqrt();
    let s_min = (0.5 * (tr - disc)).max(0.0).sqrt();
    let cond = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if !(cond <= tol::IDENT_COND_MAX) {
        return Err(Error::IllConditioned { cond, limit: tol::IDENT_COND_MAX });
    }
    let det = ins[(0, 0)] * ins[(1, 1)] - ins[(0, 1)] * ins[(1, 0)];
    Ok(Matrix2::new(
        ins[(1, 1)] / det,
        -ins[(0, 1)] / det,
        -ins[(1, 0)] / det,
        ins[(0, 0)] / det,
    ))
}

fn dmat(rows: usize, cols: usize, entries: &[Complex64]) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(rows, cols, entries)
}

/// Follower admittance Y_C (load sign) identified from one d-axis and one
/// q-axis voltage tone per frequency.
pub fn identify_csm_admittance(
    sys: &SystemParams,
    op: &OperatingPoint,
    plan: &InjectionPlan,
) -> Result<TransferSamples> {
    sys.validate()?;
    let amp = plan.amplitude_frac * sys.gfm.v_peak();
    let pairs = plan
        .jobs()?
        .par_iter()
        .map(|&job| {
            let tone = job.tone(amp, plan.step);
            let ts_d = gfl_tone_experiment(sys, op, tone, plan.step, job, GflDrive::UD)?;
            let ts_q = gfl_tone_experiment(sys, op, tone, plan.step, job, GflDrive::UQ)?;
            let ins = Matrix2::new(
                extract_phasor(&ts_d, "inj", job.f_hz)?,
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                extract_phasor(&ts_q, "inj", job.f_hz)?,
            );
            let outs = Matrix2::new(
                extract_phasor(&ts_d, "i_d", job.f_hz)?,
                extract_phasor(&ts_q, "i_d", job.f_hz)?,
                extract_phasor(&ts_d, "i_q", job.f_hz)?,
                extract_phasor(&ts_q, "i_q", job.f_hz)?,
            );
            let y = -outs * checked_inverse(&ins)?;
            Ok((job.omega, dmat(2, 2, &[y[(0, 0)], y[(0, 1)], y[(1, 0)], y[(1, 1)]])))
        })
        .collect::<Result<Vec<_>>>()?;
    let (omegas, values) = pairs.into_iter().unzip();
    TransferSamples::new(omegas, values)
}

/// Follower frequency column Ψ_C identified from one frame-speed tone per
/// frequency.
pub fn identify_csm_frequency_admittance(
    sys: &SystemParams,
    op: &OperatingPoint,
    plan: &InjectionPlan,
) -> Result<TransferSamples> {
    sys.validate()?;
    let pairs = plan
        .jobs()?
        .par_iter()
        .map(|&job| {
            let amp =
                (plan.amplitude_frac * sys.gfm.omega0).min(MAX_FRAME_ANGLE_SWING * job.omega);
            let tone = job.tone(amp, plan.step);
            let ts = gfl_tone_experiment(sys, op, tone, plan.step, job, GflDrive::Omega)?;
            let w_inj = extract_phasor(&ts, "inj", job.f_hz)?;
            if w_inj.norm() == 0.0 {
                return Err(Error::IllConditioned {
                    cond: f64::INFINITY,
                    limit: tol::IDENT_COND_MAX,
                });
            }
            let psi_d = extract_phasor(&ts, "i_d", job.f_hz)? / w_inj;
            let psi_q = extract_phasor(&ts, "i_q", job.f_hz)? / w_inj;
            Ok((job.omega, dmat(2, 1, &[psi_d, psi_q])))
        })
        .collect::<Result<Vec<_>>>()?;
    let (omegas, values) = pairs.into_iter().unzip();
    TransferSamples::new(omegas, values)
}

/// Forming-side impedance Z_V and frequency row Γ_V identified together: both
/// come out of the same pair of current-injection experiments per frequency.
pub fn identify_vsm_both(
    sys: &SystemParams,
    op: &OperatingPoint,
    plan: &InjectionPlan,
) -> Result<(TransferSamples, TransferSamples)> {
    sys.validate()?;
    let i_base = sys.gfm.s_rated / (1.5 * sys.gfm.v_peak());
    let amp = plan.amplitude_frac * i_base;
    let triples = plan
        .jobs()?
        .par_iter()
        .map(|&job| {
            let tone = job.tone(amp, plan.step);
            let ts_d = gfm_tone_experiment(sys, op, tone, plan.step, job, 0)?;
            let ts_q = gfm_tone_experiment(sys, op, tone, plan.step, job, 1)?;
            let ins = Matrix2::new(
                extract_phasor(&ts_d, "inj", job.f_hz)?,
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                extract_phasor(&ts_q, "inj", job.f_hz)?,
            );
            let inv = checked_inverse(&ins)?;
            let outs_u = Matrix2::new(
                extract_phasor(&ts_d, "u_d", job.f_hz)?,
                extract_phasor(&ts_q, "u_d", job.f_hz)?,
                extract_phasor(&ts_d, "u_q", job.f_hz)?,
                extract_phasor(&ts_q, "u_q", job.f_hz)?,
            );
            let outs_w = RowVector2::new(
                extract_phasor(&ts_d, "omega_v", job.f_hz)?,
                extract_phasor(&ts_q, "omega_v", job.f_hz)?,
            );
            let z = outs_u * inv;
            let g = outs_w * inv;
            Ok((
                job.omega,
                dmat(2, 2, &[z[(0, 0)], z[(0, 1)], z[(1, 0)], z[(1, 1)]]),
                dmat(1, 2, &[g[0], g[1]]),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut omegas = Vec::with_capacity(triples.len());
    let mut z_values = Vec::with_capacity(triples.len());
    let mut g_values = Vec::with_capacity(triples.len());
    for (w, z, g) in triples {
        omegas.push(w);
        z_values.push(z);
        g_values.push(g);
    }
    Ok((
        TransferSamples::new(omegas.clone(), z_values)?,
        TransferSamples::new(omegas, g_values)?,
    ))
}

/// Forming-side impedance Z_V alone.
pub fn identify_vsm_impedance(
    sys: &SystemParams,
    op: &OperatingPoint,
    plan: &InjectionPlan,
) -> Result<TransferSamples> {
    Ok(identify_vsm_both(sys, op, plan)?.0)
}

/// Forming-side frequency row Γ_V alone.
pub fn identify_vsm_frequency_impedance(
    sys: &SystemParams,
    op: &OperatingPoint,
    plan: &InjectionPlan,
) -> Result<TransferSamples> {
    Ok(identify_vsm_both(sys, op, plan)?.1)
}

/// Series RL branch in the rotating frame: a passive plant with a closed-form
/// dq admittance, used to validate the whole identification chain end to end.
#[derive(Debug, Clone, Copy)]
pub struct RlBranch {
    pub r: f64,
    pub l: f64,
    /// Frame rotation speed (rad/s), the source of the dq cross-coupling.
    pub omega0: f64,
}

impl RlBranch {
    /// Y(jω) = Z(jω)⁻¹ with Z = [[R + jωL, −ω₀L], [ω₀L, R + jωL]].
    pub fn analytic_admittance(&self, omega: f64) -> DMatrix<Complex64> {
        let zs = Complex64::new(self.r, omega * self.l);
        let x0 = Complex64::new(self.omega0 * self.l, 0.0);
        let det = zs * zs + x0 * x0;
        dmat(2, 2, &[zs / det, x0 / det, -x0 / det, zs / det])
    }

    fn rhs(&self, u: Vector2<f64>, i: Vector2<f64>, dx: &mut [f64]) {
        let di = (u - i * self.r) / self.l - jrot(i) * self.omega0;
        dx[0] = di.x;
        dx[1] = di.y;
    }
}

/// Identify the RL branch admittance by voltage tones from rest.
pub fn identify_rl_admittance(branch: &RlBranch, plan: &InjectionPlan) -> Result<TransferSamples> {
    if !(branch.r > 0.0 && branch.l > 0.0 && branch.omega0.is_finite()) {
        return Err(Error::Config(format!(
            "RL branch needs positive R and L, got R = {}, L = {}",
            branch.r, branch.l
        )));
    }
    let pairs = plan
        .jobs()?
        .par_iter()
        .map(|&job| {
            let tone = job.tone(1.0, plan.step);
            let run = |axis: usize| -> Result<TimeSeries> {
                drive_window(
                    ["inj", "i_d", "i_q"],
                    &[0.0, 0.0],
                    plan.step,
                    job.n_settle,
                    job.n_window,
                    |t, x, dx| {
                        let mut u = Vector2::zeros();
                        u[axis] = tone.value(t);
                        branch.rhs(u, Vector2::new(x[0], x[1]), dx);
                    },
                    |t, x| [tone.value(t), x[0], x[1]],
                )
            };
            let ts_d = run(0)?;
            let ts_q = run(1)?;
            let ins = Matrix2::new(
                extract_phasor(&ts_d, "inj", job.f_hz)?,
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                extract_phasor(&ts_q, "inj", job.f_hz)?,
            );
            let outs = Matrix2::new(
                extract_phasor(&ts_d, "i_d", job.f_hz)?,
                extract_phasor(&ts_q, "i_d", job.f_hz)?,
                extract_phasor(&ts_d, "i_q", job.f_hz)?,
                extract_phasor(&ts_q, "i_q", job.f_hz)?,
            );
            let y = outs * checked_inverse(&ins)?;
            Ok((job.omega, dmat(2, 2, &[y[(0, 0)], y[(0, 1)], y[(1, 0)], y[(1, 1)]])))
        })
        .collect::<Result<Vec<_>>>()?;
    let (omegas, values) = pairs.into_iter().unzip();
    TransferSamples::new(omegas, values)
}

/// Largest entrywise relative deviation between two sample sets on the same
/// grid, normalized by the per-frequency Frobenius norm of the reference.
pub fn max_relative_error(got: &TransferSamples, reference: &TransferSamples) -> Result<f64> {
    if got.len() != reference.len()
        || got.omega().iter().zip(reference.omega()).any(|(a, b)| (a - b).abs() > 1e-12 * b.abs())
    {
        return Err(Error::GridMismatch(
            "identified and reference samples are on different grids".into(),
        ));
    }
    let mut worst = 0.0_f64;
    for k in 0..got.len() {
        let r = reference.value(k);
        let g = got.value(k);
        if r.shape() != g.shape() {
            return Err(Error::Dimension(format!(
                "sample shape {:?} vs reference {:?}",
                g.shape(),
                r.shape()
            )));
        }
        let scale = r.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        for (gv, rv) in g.iter().zip(r.iter()) {
            worst = worst.max((gv - rv).norm() / scale);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract;
    use crate::model::{solve_operating_point, EPS, GFL_STATES, XG};
    use approx::assert_relative_eq;

    fn series(h: f64, y: Vec<f64>) -> TimeSeries {
        let n = y.len();
        TimeSeries {
            t: (0..n).map(|k| k as f64 * h).collect(),
            names: vec!["y".into()],
            data: vec![y],
            divergence: None,
            final_state: DVector::zeros(1),
        }
    }

    #[test]
    fn sine_phasor_is_minus_j() {
        let h = 1e-3;
        let f = 5.0;
        let n = 2000; // 10 full periods
        let ts = series(h, (0..n).map(|k| (TAU * f * k as f64 * h).sin()).collect());
        let x = extract_phasor(&ts, "y", f).unwrap();
        assert_relative_eq!(x.re, 0.0, epsilon = 1e-12);
        assert_relative_eq!(x.im, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn dc_and_coherent_second_tone_are_rejected() {
        let h = 1e-3;
        let f = 5.0;
        let n = 2000;
        let y: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 * h;
                3.0 + (TAU * f * t).sin() + 0.7 * (TAU * 2.0 * f * t + 1.1).sin()
            })
            .collect();
        let x = extract_phasor(&series(h, y), "y", f).unwrap();
        let err = (x - Complex64::new(0.0, -1.0)).norm();
        assert!(err < 1e-9, "dc/harmonic leakage {err:.3e}");
    }

    #[test]
    fn non_coherent_window_is_refused() {
        let h = 1e-3;
        let n = 1037; // 5.185 periods of 5 Hz
        let ts = series(h, (0..n).map(|k| (TAU * 5.0 * k as f64 * h).sin()).collect());
        match extract_phasor(&ts, "y", 5.0) {
            Err(Error::NonCoherent { .. }) => {}
            other => panic!("expected NonCoherent, got {other:?}"),
        }
    }

    #[test]
    fn snapped_frequencies_are_coherent_and_increasing() {
        let plan = InjectionPlan::new(vec![0.1, 0.17, 1.0, 10.0, 100.0, 400.0]);
        let jobs = plan.jobs().unwrap();
        assert_eq!(jobs.len(), 6);
        for pair in jobs.windows(2) {
            assert!(pair[1].f_hz > pair[0].f_hz);
        }
        for job in &jobs {
            let periods = job.f_hz * job.n_window as f64 * plan.step;
            assert!((periods - periods.round()).abs() < 1e-9, "{periods}");
            assert!(periods.round() >= plan.min_periods as f64 - 0.5);
        }
    }

    #[test]
    fn rl_branch_identification_matches_closed_form() {
        let branch = RlBranch { r: 0.4, l: 7e-3, omega0: TAU * 50.0 };
        let mut plan = InjectionPlan::new(vec![0.1, 0.8, 6.3, 50.0, 400.0, 1000.0]);
        plan.step = 20e-6;
        plan.settle = 0.4;
        let got = identify_rl_admittance(&branch, &plan).unwrap();
        let reference = TransferSamples::new(
            got.omega().to_vec(),
            got.omega().iter().map(|&w| branch.analytic_admittance(w)).collect(),
        )
        .unwrap();
        let err = max_relative_error(&got, &reference).unwrap();
        assert!(err < 1e-3, "worst relative error {err:.3e}");
    }

    #[test]
    fn linear_plant_identification_is_integrator_limited() {
        // One mid-band tone, fine step, long dwell: every error source except
        // the RK4 truncation is driven below 1e-9.
        let branch = RlBranch { r: 0.4, l: 7e-3, omega0: TAU * 50.0 };
        let mut plan = InjectionPlan::new(vec![10.0]);
        plan.step = 5e-6;
        plan.settle = 1.2;
        let got = identify_rl_admittance(&branch, &plan).unwrap();
        let w = got.omega()[0];
        let reference =
            TransferSamples::new(vec![w], vec![branch.analytic_admittance(w)]).unwrap();
        let err = max_relative_error(&got, &reference).unwrap();
        assert!(err < tol::IDENT_LINEAR_REL, "worst relative error {err:.3e}");
    }

    #[test]
    fn follower_identification_matches_extraction() {
        let sys = SystemParams::default();
        let op = solve_operating_point(&sys).unwrap();
        let plan = InjectionPlan::new(vec![1.0, 12.0, 80.0]);
        let y = identify_csm_admittance(&sys, &op, &plan).unwrap();
        let y_ref = extract::csm_admittance(&sys, &op, y.omega()).unwrap();
        let y_err = max_relative_error(&y, &y_ref).unwrap();
        assert!(y_err < 1e-2, "admittance error {y_err:.3e}");
        let psi = identify_csm_frequency_admittance(&sys, &op, &plan).unwrap();
        let psi_ref = extract::csm_frequency_admittance(&sys, &op, psi.omega()).unwrap();
        let psi_err = max_relative_error(&psi, &psi_ref).unwrap();
        assert!(psi_err < 1e-2, "frequency column error {psi_err:.3e}");
    }

    #[test]
    fn forming_side_identification_matches_extraction() {
        let sys = SystemParams::default();
        let op = solve_operating_point(&sys).unwrap();
        let plan = InjectionPlan::new(vec![1.0, 12.0, 80.0]);
        let (z, g) = identify_vsm_both(&sys, &op, &plan).unwrap();
        let z_ref = extract::vsm_impedance(&sys, &op, z.omega()).unwrap();
        let g_ref = extract::vsm_frequency_impedance(&sys, &op, g.omega()).unwrap();
        let z_err = max_relative_error(&z, &z_ref).unwrap();
        let g_err = max_relative_error(&g, &g_ref).unwrap();
        assert!(z_err < 1e-2, "impedance error {z_err:.3e}");
        assert!(g_err < 1e-2, "frequency row error {g_err:.3e}");
    }

    #[test]
    fn doubling_injection_amplitude_barely_moves_the_answer() {
        // Identification of a nonlinear plant is only meaningful if the
        // answer is amplitude-invariant at the chosen level.
        let sys = SystemParams::default();
        let op = solve_operating_point(&sys).unwrap();
        let mut plan = InjectionPlan::new(vec![2.0]);
        let y1 = identify_csm_admittance(&sys, &op, &plan).unwrap();
        plan.amplitude_frac *= 2.0;
        let y2 = identify_csm_admittance(&sys, &op, &plan).unwrap();
        let diff = max_relative_error(&y2, &y1).unwrap();
        assert!(diff < 1e-3, "amplitude sensitivity {diff:.3e}");
    }

    #[test]
    fn frozen_pll_frequency_column_matches_hand_derivation() {
        // Zero operating current kills the kinematic rotation term, and a
        // (numerically) frozen PLL makes the remaining pathway a pure chain:
        // δ = −Δω/s rotates the integrator-held modulation voltage, and the
        // current loop answers. In the complex pair i_d + j·i_q that chain
        // collapses to D(s)·i = −j·u_d·Δω with real D, so the d-axis response
        // is identically zero and
        //   Ψ_q(jω) = −u_d / (k_ic + jω(k_pc + r_c) − ω²·l_c).
        let mut sys = SystemParams::default();
        sys.gfl.p_set = 0.0;
        sys.gfl.q_set = 0.0;
        sys.gfl.alpha_pll = 1e-9;
        let u_d = sys.gfm.v_peak();
        // Hand-built merged equilibrium: follower idle, forming side reduced
        // to the static relations the experiment samples (bus voltage from
        // the line current, droop frequency at nominal).
        let mut x = DVector::zeros(crate::model::SYS_STATES);
        x[IL] = u_d / sys.network.r_load;
        x[PF] = sys.gfm.p_star;
        let g = GFM_STATES;
        x[g + XG] = u_d / sys.gfl.k_ic();
        let op = OperatingPoint { x, residual: 0.0, iterations: 0 };
        let gfl = GflBlock::new(sys.gfl.clone(), sys.gfm.omega0);
        let mut dx = vec![0.0; GFL_STATES];
        gfl.rhs(op.gfl_state(), Vector2::new(u_d, 0.0), sys.gfm.omega0, 0.0, 0.0, &mut dx);
        let drift = dx.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(drift < 1e-12, "hand-built state is not an equilibrium: {drift:.3e}");
        assert_eq!(op.x[g + EPS], 0.0);

        // Keep the frame-angle swing amp/ω small so the rotation stays in
        // its linear range at the lowest tone.
        let mut plan = InjectionPlan::new(vec![3.0, 8.0, 20.0]);
        plan.amplitude_frac = 1e-3;
        let psi = identify_csm_frequency_admittance(&sys, &op, &plan).unwrap();
        for (k, &w) in psi.omega().iter().enumerate() {
            let d = Complex64::new(
                sys.gfl.k_ic() - w * w * sys.gfl.l_c,
                w * (sys.gfl.k_pc() + sys.gfl.r_c),
            );
            let expect = -u_d / d;
            let got = psi.value(k);
            let rel_q = (got[(1, 0)] - expect).norm() / expect.norm();
            let rel_d = got[(0, 0)].norm() / expect.norm();
            assert!(rel_q < 1e-3, "Ψ_q off by {rel_q:.3e} at ω = {w:.2}");
            assert!(rel_d < 1e-3, "Ψ_d should vanish, got {rel_d:.3e} at ω = {w:.2}");
        }
    }
}
