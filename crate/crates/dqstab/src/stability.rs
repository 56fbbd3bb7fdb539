//! Stability verdicts: the generalized Nyquist criterion on the 2×2 minor
//! loop (with and without the frequency-coupling term) and the whole-system
//! eigenvalue criterion, plus the report comparing them.
//!
//! The minor loop is L(jω) = Y_C·Z_V − Ψ_C·Γ_V. With every subsystem stable
//! on its own (checked before counting), the interconnection is stable iff
//! the eigenvalue loci of L, mirrored across the real axis and closed, do
//! not encircle −1.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extract::{gfm_current_driven, ExtractionContext};
use crate::freq::{
    complex_eigenvalues, eigen2, mirror_closed, sort_loci, winding_number, EigenLoci,
    FrequencyGrid, TransferSamples,
};
use crate::linearize::{assemble_system, build_gfl_model};
use crate::model::OperatingPoint;
use crate::params::SystemParams;
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Stable,
    Unstable,
}

/// Compose the minor loop from pre-sampled objects on a shared grid.
/// `with_frequency` keeps the frequency-coupling term; without it this is
/// the voltage-only loop of the standard impedance criterion.
pub fn minor_loop(
    z_v: &TransferSamples,
    gamma_v: &TransferSamples,
    y_c: &TransferSamples,
    psi_c: &TransferSamples,
    with_frequency: bool,
) -> Result<TransferSamples> {
    let base = y_c.mul(z_v)?;
    if with_frequency {
        base.sub(&psi_c.mul(gamma_v)?)
    } else {
        Ok(base)
    }
}

/// Minor-loop samples on a (possibly refined) grid with continuity-sorted
/// eigenvalue loci.
#[derive(Debug, Clone)]
pub struct LoopSamples {
    pub omega: Vec<f64>,
    pub values: Vec<DMatrix<Complex64>>,
    pub loci: EigenLoci,
    /// ‖L‖ at the top of the grid; must be small for the contour closure.
    pub closure_norm: f64,
}

fn frobenius(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn loci_of(omega: &[f64], values: &[DMatrix<Complex64>]) -> Result<EigenLoci> {
    let pairs: Vec<(Complex64, Complex64)> = values.iter().map(eigen2).collect();
    sort_loci(omega.to_vec(), pairs)
}

/// Does the interval between consecutive samples of one locus need a midpoint?
/// Yes where the locus approaches −1 or its phase wraps past ±180° left of
/// the imaginary axis: both situations decide encirclements.
fn needs_refinement(a: Complex64, b: Complex64) -> bool {
    let near = (a + 1.0).norm().min((b + 1.0).norm()) < tol::REFINE_CRITICAL_DIST;
    let wrap = a.im.signum() != b.im.signum() && (a.re < 0.0 || b.re < 0.0);
    near || wrap
}

/// Sample the minor loop over the grid, bisecting (in log frequency) every
/// interval where a locus is near −1 or wrapping phase, until intervals are
/// dense or the point budget is reached.
pub fn sample_minor_loop(
    ctx: &ExtractionContext,
    grid: &FrequencyGrid,
    with_frequency: bool,
) -> Result<LoopSamples> {
    let mut omega = grid.omegas();
    let mut values: Vec<DMatrix<Complex64>> = omega
        .iter()
        .map(|&w| ctx.minor_loop_at(w, with_frequency))
        .collect::<Result<_>>()?;

    let budget = 8 * omega.len();
    for _pass in 0..40 {
        let loci = loci_of(&omega, &values)?;
        let mut mids = Vec::new();
        for k in 0..omega.len() - 1 {
            if omega[k + 1] / omega[k] - 1.0 < 1e-4 {
                continue;
            }
            if needs_refinement(loci.lambda1[k], loci.lambda1[k + 1])
                || needs_refinement(loci.lambda2[k], loci.lambda2[k + 1])
            {
                mids.push((omega[k] * omega[k + 1]).sqrt());
            }
        }
        if mids.is_empty() || omega.len() + mids.len() > budget {
            break;
        }
        for w in mids {
            let v = ctx.minor_loop_at(w, with_frequency)?;
            let pos = omega.partition_point(|&x| x < w);
            omega.insert(pos, w);
            values.insert(pos, v);
        }
    }

    let closure_norm = frobenius(values.last().expect("non-empty grid"));
    let loci = loci_of(&omega, &values)?;
    Ok(LoopSamples { omega, values, loci, closure_norm })
}

/// One phase crossing of a locus through ±180° left of the imaginary axis.
#[derive(Debug, Clone, Serialize)]
pub struct Crossing {
    pub f_hz: f64,
    pub locus: usize,
    /// |λ| interpolated at the crossing; > 1 means the locus passes beyond −1.
    pub magnitude: f64,
}

/// Closest approach of the loci to −1.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClosestApproach {
    pub f_hz: f64,
    pub locus: usize,
    pub distance: f64,
}

/// Phase-crossing scan of sorted loci: records each interval where Im λ
/// changes sign with Re λ < 0, with log-interpolated frequency and magnitude.
pub fn bode_crossing_analysis(loci: &EigenLoci) -> Vec<Crossing> {
    let mut out = Vec::new();
    for (idx, lam) in [&loci.lambda1, &loci.lambda2].into_iter().enumerate() {
        for k in 0..lam.len() - 1 {
            let (a, b) = (lam[k], lam[k + 1]);
            if a.im.signum() != b.im.signum() && (a.re < 0.0 || b.re < 0.0) {
                let t = if (a.im - b.im).abs() > 0.0 { a.im / (a.im - b.im) } else { 0.5 };
                let lw = loci.omega[k].ln() + t * (loci.omega[k + 1].ln() - loci.omega[k].ln());
                let mag = a.norm() + t * (b.norm() - a.norm());
                out.push(Crossing {
                    f_hz: lw.exp() / std::f64::consts::TAU,
                    locus: idx,
                    magnitude: mag,
                });
            }
        }
    }
    out.sort_by(|x, y| x.f_hz.partial_cmp(&y.f_hz).unwrap());
    out
}

fn closest_approach(loci: &EigenLoci) -> ClosestApproach {
    let mut best = ClosestApproach { f_hz: 0.0, locus: 0, distance: f64::INFINITY };
    for (idx, lam) in [&loci.lambda1, &loci.lambda2].into_iter().enumerate() {
        for (k, &l) in lam.iter().enumerate() {
            let d = (l + 1.0).norm();
            if d < best.distance {
                best = ClosestApproach {
                    f_hz: loci.omega[k] / std::f64::consts::TAU,
                    locus: idx,
                    distance: d,
                };
            }
        }
    }
    best
}

/// Generalized Nyquist report for one loop variant.
#[derive(Debug, Clone, Serialize)]
pub struct GncReport {
    pub verdict: Verdict,
    pub windings: [i64; 2],
    pub closest: ClosestApproach,
    pub crossings: Vec<Crossing>,
    pub closure_norm: f64,
    pub n_points: usize,
}

/// Every subsystem whose poles become the open-loop poles of the minor loop
/// must be stable for the zero-encirclement reading to be valid: the
/// current-driven forming one-port (realizes Z_V and Γ_V) and the
/// voltage-driven following block (realizes Y_C and Ψ_C).
///
/// The voltage-driven forming realization is deliberately absent: its
/// eigenvalues are the transmission zeros of Z_V, not loop poles, and with
/// the source pinned to the droop frame it loses the power-angle feedback
/// and can sit in the right half-plane even when every loop factor is
/// stable.
pub fn open_loop_check(sys: &SystemParams, op: &OperatingPoint) -> Result<()> {
    let gfm_i = gfm_current_driven(sys, op)?;
    let gfl_v = build_gfl_model(
        &sys.gfl,
        sys.gfm.omega0,
        op.omega_v(&sys.gfm),
        op.gfl_state(),
        op.bus_voltage(&sys.network),
    )?;
    for (name, model) in [("gfm-current-driven", &gfm_i), ("gfl", &gfl_v)] {
        let unstable = model.eigenvalues()?.iter().filter(|e| e.re >= 0.0).count();
        if unstable > 0 {
            return Err(Error::OpenLoopUnstable { which: name.to_string(), count: unstable });
        }
    }
    Ok(())
}

/// Count encirclements of −1 by both mirrored loci and pronounce the verdict.
/// Errors out if a locus passes within the marginality band of −1 (the count
/// would not be trustworthy) and surfaces a poor contour closure in the
/// report for the caller to judge.
pub fn gnc_verdict(samples: &LoopSamples) -> Result<GncReport> {
    let closest = closest_approach(&samples.loci);
    if closest.distance < tol::GNC_MARGIN_EPS {
        return Err(Error::Marginal { distance: closest.distance, epsilon: tol::GNC_MARGIN_EPS });
    }
    let mut windings = [0i64; 2];
    for (idx, lam) in [&samples.loci.lambda1, &samples.loci.lambda2].into_iter().enumerate() {
        let contour = mirror_closed(lam);
        windings[idx] = winding_number(&contour, Complex64::new(-1.0, 0.0), tol::GNC_MARGIN_EPS)?;
    }
    let verdict =
        if windings[0] + windings[1] == 0 { Verdict::Stable } else { Verdict::Unstable };
    Ok(GncReport {
        verdict,
        windings,
        closest,
        crossings: bode_crossing_analysis(&samples.loci),
        closure_norm: samples.closure_norm,
        n_points: samples.omega.len(),
    })
}

/// Convenience pipeline: open-loop check, sampling with refinement, verdict.
pub fn analyze_gnc(
    sys: &SystemParams,
    op: &OperatingPoint,
    grid: &FrequencyGrid,
    with_frequency: bool,
) -> Result<(GncReport, LoopSamples)> {
    open_loop_check(sys, op)?;
    let ctx = ExtractionContext::new(sys, op)?;
    let samples = sample_minor_loop(&ctx, grid, with_frequency)?;
    let report = gnc_verdict(&samples)?;
    Ok((report, samples))
}

/// Dominant mode of the whole-system state matrix.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DominantMode {
    pub growth_rate: f64,
    pub f_hz: f64,
    pub damping_ratio: f64,
}

/// Whole-system eigenvalue report.
#[derive(Debug, Clone, Serialize)]
pub struct EigenReport {
    pub verdict: Verdict,
    pub max_real: f64,
    pub dominant: DominantMode,
    #[serde(skip)]
    pub eigenvalues: Vec<Complex64>,
}

/// Eigenvalue criterion on the merged state matrix. Errors out when the
/// spectrum sits inside the marginality band of the imaginary axis.
pub fn eigen_verdict(sys: &SystemParams, op: &OperatingPoint) -> Result<EigenReport> {
    let model = assemble_system(sys, op)?;
    let eigs = model.eigenvalues()?;
    let dom = eigs
        .iter()
        .cloned()
        .max_by(|a, b| a.re.partial_cmp(&b.re).unwrap())
        .expect("non-empty spectrum");
    let max_real = dom.re;
    let mag = dom.norm();
    if mag > 0.0 && (max_real / mag).abs() < tol::EIGEN_MARGIN_REL {
        return Err(Error::Marginal {
            distance: (max_real / mag).abs(),
            epsilon: tol::EIGEN_MARGIN_REL,
        });
    }
    let verdict = if max_real < 0.0 { Verdict::Stable } else { Verdict::Unstable };
    let dominant = DominantMode {
        growth_rate: dom.re,
        f_hz: dom.im.abs() / std::f64::consts::TAU,
        damping_ratio: if mag > 0.0 { -dom.re / mag } else { 1.0 },
    };
    Ok(EigenReport { verdict, max_real, dominant, eigenvalues: eigs })
}

/// Side-by-side result of all three verdict paths at one operating point.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub extended: GncReport,
    pub standard: GncReport,
    pub eigen: EigenReport,
    /// Extended impedance criterion agrees with the eigenvalue criterion.
    pub agree: bool,
    /// |log₁₀ f_gnc − log₁₀ f_eig| in units of grid intervals, when both
    /// criteria expose an oscillatory critical frequency.
    pub critical_freq_offset_intervals: Option<f64>,
}

/// Run both impedance-criterion variants plus the eigenvalue criterion and
/// compare. The critical frequency on the impedance side is the closest
/// approach to −1; on the eigenvalue side, the dominant mode frequency.
pub fn equivalence_report(
    sys: &SystemParams,
    op: &OperatingPoint,
    grid: &FrequencyGrid,
) -> Result<EquivalenceReport> {
    open_loop_check(sys, op)?;
    let ctx = ExtractionContext::new(sys, op)?;
    let ext_samples = sample_minor_loop(&ctx, grid, true)?;
    let std_samples = sample_minor_loop(&ctx, grid, false)?;
    let extended = gnc_verdict(&ext_samples)?;
    let standard = gnc_verdict(&std_samples)?;
    let eigen = eigen_verdict(sys, op)?;

    let agree = extended.verdict == eigen.verdict;
    let critical_freq_offset_intervals = {
        let f_gnc = extended.closest.f_hz;
        let f_eig = eigen.dominant.f_hz;
        if f_gnc > 0.0 && f_eig > 0.0 {
            let interval = (f_gnc.log10() - f_eig.log10()).abs();
            Some(interval * grid.points_per_decade as f64)
        } else {
            None
        }
    };
    Ok(EquivalenceReport { extended, standard, eigen, agree, critical_freq_offset_intervals })
}

/// Pointwise check that the determinant of I + L factors through the two
/// eigenvalue loci: det(I+L) = (1+λ₁)(1+λ₂).
pub fn det_factorisation_max_error(samples: &LoopSamples) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, l) in samples.values.iter().enumerate() {
        let det = (Complex64::new(1.0, 0.0) + l[(0, 0)]) * (Complex64::new(1.0, 0.0) + l[(1, 1)])
            - l[(0, 1)] * l[(1, 0)];
        let prod = (samples.loci.lambda1[k] + 1.0) * (samples.loci.lambda2[k] + 1.0);
        let err = (det - prod).norm() / det.norm().max(1.0);
        worst = worst.max(err);
    }
    worst
}

/// The merged state matrix's spectrum, exposed for traces over sweeps.
pub fn system_eigenvalues(sys: &SystemParams, op: &OperatingPoint) -> Result<Vec<Complex64>> {
    let model = assemble_system(sys, op)?;
    complex_eigenvalues(model.a())
}
