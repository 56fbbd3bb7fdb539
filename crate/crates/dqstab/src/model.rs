//! Nonlinear dq models of the two converters and their interconnection, plus
//! the Newton equilibrium solver the linearised analyses are anchored to.
//!
//! Frames: the merged model lives in the grid-forming droop frame, whose
//! rotation speed tracks the droop law instant by instant. That choice makes
//! the frame speed an algebraic function of the filtered power state, so the
//! merged system has no residual rotational symmetry and its Jacobian carries
//! no structural zero eigenvalue. The only angle state is the PLL angle of
//! the grid-following converter relative to this frame.

use nalgebra::{DVector, Vector2};

use crate::error::{Error, Result};
use crate::params::{GflParams, GfmParams, NetworkParams, SystemParams};
use crate::tol;

/// 90° rotation J·(d,q) = (−q, d); ω·J·x is the dq cross-coupling term.
#[inline]
pub fn jrot(x: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-x.y, x.x)
}

/// Rotation by angle θ from a local frame into the reference frame.
#[inline]
pub fn rot(theta: f64, x: Vector2<f64>) -> Vector2<f64> {
    let (s, c) = theta.sin_cos();
    Vector2::new(c * x.x - s * x.y, s * x.x + c * x.y)
}

pub const GFM_STATES: usize = 12;
pub const GFL_STATES: usize = 6;
pub const SYS_STATES: usize = GFM_STATES + GFL_STATES;

/// State labels, fixed ordering shared by the nonlinear and linear models.
pub fn gfm_state_labels() -> Vec<String> {
    ["i_f_d", "i_f_q", "v_c_d", "v_c_q", "i_l_d", "i_l_q", "p_filt", "q_filt", "xi_v_d", "xi_v_q",
        "xi_c_d", "xi_c_q"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

pub fn gfl_state_labels() -> Vec<String> {
    ["i_c_d", "i_c_q", "eps_pll", "delta_pll", "xi_g_d", "xi_g_q"].iter().map(|s| s.to_string()).collect()
}

pub fn sys_state_labels() -> Vec<String> {
    let mut l = gfm_state_labels();
    l.extend(gfl_state_labels());
    l
}

// GFM state indices.
pub const IF: usize = 0;
pub const VC: usize = 2;
pub const IL: usize = 4;
pub const PF: usize = 6;
pub const QF: usize = 7;
pub const XV: usize = 8;
pub const XC: usize = 10;
// GFL state indices (within the GFL block).
pub const IC: usize = 0;
pub const EPS: usize = 2;
pub const DELTA: usize = 3;
pub const XG: usize = 4;

#[inline]
fn v2(x: &[f64], k: usize) -> Vector2<f64> {
    Vector2::new(x[k], x[k + 1])
}

/// Grid-forming converter with its series line, voltage-driven at the common
/// bus: input is the bus voltage in the converter's droop frame plus an
/// optional extra frame-speed term, outputs are the droop frequency and the
/// current drawn from the bus source (load current minus line current).
#[derive(Debug, Clone)]
pub struct GfmBlock {
    pub p: GfmParams,
    pub net: NetworkParams,
}

impl GfmBlock {
    pub fn new(p: GfmParams, net: NetworkParams) -> Self {
        Self { p, net }
    }

    /// Droop frequency as a function of the filtered active power.
    pub fn omega_v(&self, p_filt: f64) -> f64 {
        self.p.omega0 + self.p.m_p() * (self.p.p_star - p_filt)
    }

    /// Current controller reference from the outer voltage loop.
    fn i_ref(&self, v_c: Vector2<f64>, i_l: Vector2<f64>, xi_v: Vector2<f64>, q_filt: f64) -> Vector2<f64> {
        let p = &self.p;
        let v_ref = Vector2::new(p.v_star() + p.n_q() * (p.q_star - q_filt), 0.0);
        i_l + jrot(v_c) * (p.omega0 * p.c_f) + (v_ref - v_c) * p.k_pv() + xi_v * p.k_iv()
    }

    /// State derivative. `u` is the bus voltage expressed in the droop frame;
    /// `omega_ext` adds to the frame rotation speed (zero in normal use).
    pub fn rhs(&self, x: &[f64], u: Vector2<f64>, omega_ext: f64, dx: &mut [f64]) {
        debug_assert_eq!(x.len(), GFM_STATES);
        let p = &self.p;
        let (i_f, v_c, i_l) = (v2(x, IF), v2(x, VC), v2(x, IL));
        let (p_filt, q_filt) = (x[PF], x[QF]);
        let (xi_v, xi_c) = (v2(x, XV), v2(x, XC));

        let omega_fr = self.omega_v(p_filt) + omega_ext;
        let v_ref = Vector2::new(p.v_star() + p.n_q() * (p.q_star - q_filt), 0.0);
        let i_ref = self.i_ref(v_c, i_l, xi_v, q_filt);
        let v_m = v_c + jrot(i_f) * (p.omega0 * p.l_f) + (i_ref - i_f) * p.k_pc() + xi_c * p.k_ic();

        let di_f = (v_m - v_c - i_f * p.r_f) / p.l_f - jrot(i_f) * omega_fr;
        let dv_c = (i_f - i_l) / p.c_f - jrot(v_c) * omega_fr;
        let di_l = (v_c - u - i_l * self.net.r_line) / self.net.l_line - jrot(i_l) * omega_fr;
        let pm = 1.5 * (v_c.x * i_l.x + v_c.y * i_l.y);
        let qm = 1.5 * (v_c.y * i_l.x - v_c.x * i_l.y);

        dx[IF] = di_f.x;
        dx[IF + 1] = di_f.y;
        dx[VC] = dv_c.x;
        dx[VC + 1] = dv_c.y;
        dx[IL] = di_l.x;
        dx[IL + 1] = di_l.y;
        dx[PF] = p.omega_c * (pm - p_filt);
        dx[QF] = p.omega_c * (qm - q_filt);
        dx[XV] = v_ref.x - v_c.x;
        dx[XV + 1] = v_ref.y - v_c.y;
        dx[XC] = i_ref.x - i_f.x;
        dx[XC + 1] = i_ref.y - i_f.y;
    }

    /// Current drawn from the bus voltage source: load current minus the line
    /// current delivered by the converter.
    pub fn i_out(&self, x: &[f64], u: Vector2<f64>) -> Vector2<f64> {
        u / self.net.r_load - v2(x, IL)
    }
}

/// Grid-following converter, voltage-driven at the bus: inputs are the bus
/// voltage (in whatever frame the caller uses), that frame's rotation speed,
/// and the power setpoints; output is the injected current in the same frame.
/// The PLL angle state is relative to the caller's frame.
#[derive(Debug, Clone)]
pub struct GflBlock {
    pub p: GflParams,
    /// Nominal angular frequency the PLL regulates around.
    pub omega0: f64,
    /// Lower bound applied to the PLL-frame d-axis voltage before the current
    /// reference division. Numerical guard only: inactive in any sane
    /// operating region, it keeps the right-hand side finite while the
    /// divergence detector reacts to a collapsing bus voltage.
    pub up_d_floor: f64,
}

impl GflBlock {
    pub fn new(p: GflParams, omega0: f64) -> Self {
        let floor = 1e-3 * p.v_pll_norm;
        Self { p, omega0, up_d_floor: floor }
    }

    /// State derivative. `omega0_frame` is the rotation speed of the frame
    /// `u` and the current state are expressed in.
    pub fn rhs(
        &self,
        x: &[f64],
        u: Vector2<f64>,
        omega_frame: f64,
        p_set: f64,
        q_set: f64,
        dx: &mut [f64],
    ) {
        debug_assert_eq!(x.len(), GFL_STATES);
        let p = &self.p;
        let i_c = v2(x, IC);
        let (eps, delta) = (x[EPS], x[DELTA]);
        let xi_g = v2(x, XG);

        let u_p = rot(-delta, u);
        let omega_pll = self.omega0 + p.k_p_pll() * u_p.y + p.k_i_pll() * eps;
        let up_d = u_p.x.max(self.up_d_floor);
        let i_star = Vector2::new((2.0 / 3.0) * p_set / up_d, -(2.0 / 3.0) * q_set / up_d);
        let i_p = rot(-delta, i_c);
        // PI with cross-coupling compensation only; no bus-voltage
        // feedforward, so the integrator carries the full bus voltage and
        // grid disturbances enter the current loop at its own bandwidth.
        let v_mp = jrot(i_p) * (self.omega0 * p.l_c) + (i_star - i_p) * p.k_pc()
            + xi_g * p.k_ic();
        let v_m = rot(delta, v_mp);
        let di_c = (v_m - u - i_c * p.r_c) / p.l_c - jrot(i_c) * omega_frame;

        dx[IC] = di_c.x;
        dx[IC + 1] = di_c.y;
        dx[EPS] = u_p.y;
        dx[DELTA] = omega_pll - omega_frame;
        dx[XG] = i_star.x - i_p.x;
        dx[XG + 1] = i_star.y - i_p.y;
    }
}

/// The interconnected two-converter system in the droop frame: bus voltage is
/// the load resistance times the sum of injected currents, the PLL sees the
/// droop frequency as its grid frequency.
#[derive(Debug, Clone)]
pub struct MergedSystem {
    pub gfm: GfmBlock,
    pub gfl: GflBlock,
}

impl MergedSystem {
    pub fn new(sys: &SystemParams) -> Self {
        Self {
            gfm: GfmBlock::new(sys.gfm.clone(), sys.network.clone()),
            gfl: GflBlock::new(sys.gfl.clone(), sys.gfm.omega0),
        }
    }

    /// Bus voltage from the interconnection constraint.
    pub fn bus_voltage(&self, x: &[f64]) -> Vector2<f64> {
        (v2(x, IL) + v2(x, GFM_STATES + IC)) * self.gfm.net.r_load
    }

    /// State derivative with the power setpoints as exogenous inputs.
    pub fn rhs(&self, x: &[f64], p_set: f64, q_set: f64, dx: &mut [f64]) {
        debug_assert_eq!(x.len(), SYS_STATES);
        let u = self.bus_voltage(x);
        let omega_v = self.gfm.omega_v(x[PF]);
        self.gfm.rhs(&x[..GFM_STATES], u, 0.0, &mut dx[..GFM_STATES]);
        self.gfl.rhs(&x[GFM_STATES..], u, omega_v, p_set, q_set, &mut dx[GFM_STATES..]);
    }

    pub fn rhs_default_setpoints(&self, x: &[f64], dx: &mut [f64]) {
        self.rhs(x, self.gfl.p.p_set, self.gfl.p.q_set, dx);
    }
}

/// Typical magnitude of each merged state, used for residual scaling, finite
/// difference steps, and divergence detection.
pub fn state_scales(gfm: &GfmParams) -> DVector<f64> {
    let i_base = gfm.s_rated / (1.5 * gfm.v_peak());
    let v_base = gfm.v_peak();
    let mut s = DVector::zeros(SYS_STATES);
    for k in 0..2 {
        s[IF + k] = i_base;
        s[VC + k] = v_base;
        s[IL + k] = i_base;
        s[XV + k] = i_base / 10.0;
        s[XC + k] = i_base / 10.0;
        s[GFM_STATES + IC + k] = i_base;
        s[GFM_STATES + XG + k] = i_base / 10.0;
    }
    s[PF] = gfm.s_rated;
    s[QF] = gfm.s_rated;
    s[GFM_STATES + EPS] = 10.0;
    s[GFM_STATES + DELTA] = 1.0;
    s
}

/// Natural rate scale for each state derivative: the state scale times the
/// nominal angular frequency. Residuals are judged relative to this.
fn rate_scales(gfm: &GfmParams) -> DVector<f64> {
    state_scales(gfm) * gfm.omega0
}

/// Solved equilibrium of the merged system.
#[derive(Debug, Clone)]
pub struct OperatingPoint {
    pub x: DVector<f64>,
    /// Scaled residual max-norm at the solution.
    pub residual: f64,
    pub iterations: usize,
}

impl OperatingPoint {
    pub fn gfm_state(&self) -> &[f64] {
        &self.x.as_slice()[..GFM_STATES]
    }

    pub fn gfl_state(&self) -> &[f64] {
        &self.x.as_slice()[GFM_STATES..]
    }

    pub fn bus_voltage(&self, net: &NetworkParams) -> Vector2<f64> {
        (Vector2::new(self.x[IL], self.x[IL + 1])
            + Vector2::new(self.x[GFM_STATES + IC], self.x[GFM_STATES + IC + 1]))
            * net.r_load
    }

    pub fn omega_v(&self, gfm: &GfmParams) -> f64 {
        gfm.omega0 + gfm.m_p() * (gfm.p_star - self.x[PF])
    }
}

fn scaled_residual_norm(f: &DVector<f64>, rate: &DVector<f64>) -> f64 {
    f.iter().zip(rate.iter()).map(|(fi, si)| (fi / si).abs()).fold(0.0, f64::max)
}

/// Power-balance warm start: bus at nominal voltage on the d axis, currents
/// split between the two converters, capacitor voltage back-computed through
/// the line drop. A zero-voltage flat start is useless here: with a dead bus
/// the PLL rows lose rank and the Newton direction is garbage.
fn warm_start(sys: &SystemParams) -> DVector<f64> {
    let vp = sys.gfm.v_peak();
    let (rl, ll, rload) = (sys.network.r_line, sys.network.l_line, sys.network.r_load);
    let w0 = sys.gfm.omega0;
    let u = Vector2::new(vp, 0.0);
    let i_total = u / rload;
    let i_c = Vector2::new((2.0 / 3.0) * sys.gfl.p_set / vp, (2.0 / 3.0) * -sys.gfl.q_set / vp);
    let i_l = i_total - i_c;
    let v_c = u + i_l * rl + jrot(i_l) * (w0 * ll);
    let i_f = i_l + jrot(v_c) * (w0 * sys.gfm.c_f);
    let p0 = 1.5 * (v_c.x * i_l.x + v_c.y * i_l.y);
    let q0 = 1.5 * (v_c.y * i_l.x - v_c.x * i_l.y);

    let mut x = DVector::<f64>::zeros(SYS_STATES);
    x[IF] = i_f.x;
    x[IF + 1] = i_f.y;
    x[VC] = v_c.x;
    x[VC + 1] = v_c.y;
    x[IL] = i_l.x;
    x[IL + 1] = i_l.y;
    x[PF] = p0;
    x[QF] = q0;
    x[GFM_STATES + IC] = i_c.x;
    x[GFM_STATES + IC + 1] = i_c.y;
    // PLL integrator preloaded with the droop frequency offset.
    x[GFM_STATES + EPS] = sys.gfm.m_p() * (sys.gfm.p_star - p0) / sys.gfl.k_i_pll();
    // Current-loop integrator carries bus voltage plus resistive drop.
    let xi_g = (u + i_c * sys.gfl.r_c) / sys.gfl.k_ic();
    x[GFM_STATES + XG] = xi_g.x;
    x[GFM_STATES + XG + 1] = xi_g.y;
    x
}

/// Newton solve of the merged equilibrium from a power-balance warm start,
/// with a finite difference Jacobian, backtracking on the scaled residual,
/// and a PLL divisor floor that is only active far from the solution.
pub fn solve_operating_point(sys: &SystemParams) -> Result<OperatingPoint> {
    sys.validate()?;
    // Wide divisor floor for robustness during iteration; the solution is
    // re-verified against the physical model with its tight guard below.
    let mut merged = MergedSystem::new(sys);
    merged.gfl.up_d_floor = 0.2 * sys.gfm.v_peak();

    let scales = state_scales(&sys.gfm);
    let rates = rate_scales(&sys.gfm);
    let n = SYS_STATES;

    let mut x = warm_start(sys);

    let eval = |x: &DVector<f64>| -> DVector<f64> {
        let mut f = DVector::zeros(n);
        merged.rhs(x.as_slice(), sys.gfl.p_set, sys.gfl.q_set, f.as_mut_slice());
        f
    };

    let mut f = eval(&x);
    let mut best = scaled_residual_norm(&f, &rates);
    for iter in 0..tol::OP_MAX_ITER {
        if best < tol::OP_RESIDUAL_PU {
            // Confirm with the physical (tight-floor) model: the wide floor
            // must be inactive at the solution.
            let physical = MergedSystem::new(sys);
            let mut fp = DVector::zeros(n);
            physical.rhs(x.as_slice(), sys.gfl.p_set, sys.gfl.q_set, fp.as_mut_slice());
            let r = scaled_residual_norm(&fp, &rates);
            if r > tol::OP_RESIDUAL_PU * 10.0 {
                return Err(Error::OperatingPointMismatch { residual: r });
            }
            return Ok(OperatingPoint { x, residual: r, iterations: iter });
        }

        // Forward-difference Jacobian, column scaled.
        let mut jac = nalgebra::DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let h = 1e-7 * scales[j];
            let mut xp = x.clone();
            xp[j] += h;
            let fp = eval(&xp);
            for i in 0..n {
                jac[(i, j)] = (fp[i] - f[i]) / h;
            }
        }
        let lu = jac.lu();
        let Some(step) = lu.solve(&f) else {
            return Err(Error::NoConvergence { iterations: iter, residual: best });
        };

        // Backtracking: accept the first step length that improves the
        // scaled residual.
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let xt = &x - &step * alpha;
            let ft = eval(&xt);
            let rt = scaled_residual_norm(&ft, &rates);
            if rt.is_finite() && rt < best {
                x = xt;
                f = ft;
                best = rt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence { iterations: iter, residual: best });
        }
    }
    if best < tol::OP_RESIDUAL_PU {
        let physical = MergedSystem::new(sys);
        let mut fp = DVector::zeros(n);
        physical.rhs(x.as_slice(), sys.gfl.p_set, sys.gfl.q_set, fp.as_mut_slice());
        let r = scaled_residual_norm(&fp, &rates);
        if r <= tol::OP_RESIDUAL_PU * 10.0 {
            return Ok(OperatingPoint { x, residual: r, iterations: tol::OP_MAX_ITER });
        }
    }
    Err(Error::NoConvergence { iterations: tol::OP_MAX_ITER, residual: best })
}
