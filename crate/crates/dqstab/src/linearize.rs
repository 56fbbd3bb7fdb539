//! Analytic small-signal models of the converter blocks and the merged
//! system, linearised at a solved equilibrium.
//!
//! Port conventions (load sign at the shared bus):
//! - grid-forming block: inputs `u_dq` (bus voltage, droop frame) and
//!   `omega_ext` (additional frame speed); outputs `omega_v` and `i_dq`, the
//!   current drawn from the bus source (load current minus line current),
//!   with the resistive load's direct feedthrough included.
//! - grid-following block: inputs `pq` (setpoints), `u_dq`, `omega_ext`
//!   (frame-speed deviation); output `i_dq`, the injected current.
//! - merged system: input `pq`, output `i_dq` (injected current deviation).

use nalgebra::{DMatrix, Vector2};

use crate::error::Result;
use crate::freq::{ModelBuilder, StateSpaceModel};
use crate::model::{
    self, jrot, GflBlock, GfmBlock, OperatingPoint, DELTA, EPS, GFL_STATES, GFM_STATES, IC, IF,
    IL, PF, QF, SYS_STATES, VC, XC, XG, XV,
};
use crate::params::{GflParams, GfmParams, NetworkParams, SystemParams};

const J: [[f64; 2]; 2] = [[0.0, -1.0], [1.0, 0.0]];

fn set2(m: &mut DMatrix<f64>, r: usize, c: usize, blk: [[f64; 2]; 2]) {
    for i in 0..2 {
        for j in 0..2 {
            m[(r + i, c + j)] += blk[i][j];
        }
    }
}

fn setcol2(m: &mut DMatrix<f64>, r: usize, c: usize, v: Vector2<f64>) {
    m[(r, c)] += v.x;
    m[(r + 1, c)] += v.y;
}

fn scaled(s: f64, blk: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[s * blk[0][0], s * blk[0][1]], [s * blk[1][0], s * blk[1][1]]]
}

fn eye(s: f64) -> [[f64; 2]; 2] {
    [[s, 0.0], [0.0, s]]
}

fn add(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

fn matmul2(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn matvec2(a: [[f64; 2]; 2], v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(a[0][0] * v.x + a[0][1] * v.y, a[1][0] * v.x + a[1][1] * v.y)
}

fn rotmat(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

/// Outer product of a column and a row vector.
fn outer(col: Vector2<f64>, row: Vector2<f64>) -> [[f64; 2]; 2] {
    [[col.x * row.x, col.x * row.y], [col.y * row.x, col.y * row.y]]
}

/// Small-signal model of the grid-forming block (with its line and the bus
/// load) at the state `x0`, taken in its own droop frame.
pub fn build_gfm_model(
    gfm: &GfmParams,
    net: &NetworkParams,
    x0: &[f64],
    omega_ext0: f64,
) -> Result<StateSpaceModel> {
    assert_eq!(x0.len(), GFM_STATES);
    let block = GfmBlock::new(gfm.clone(), net.clone());
    let i_f0 = Vector2::new(x0[IF], x0[IF + 1]);
    let v_c0 = Vector2::new(x0[VC], x0[VC + 1]);
    let i_l0 = Vector2::new(x0[IL], x0[IL + 1]);
    let omega_fr0 = block.omega_v(x0[PF]) + omega_ext0;

    let (mp, nq) = (gfm.m_p(), gfm.n_q());
    let (kpv, kiv, kpc, kic) = (gfm.k_pv(), gfm.k_iv(), gfm.k_pc(), gfm.k_ic());
    let (lf, rf, cf, w0, wc) = (gfm.l_f, gfm.r_f, gfm.c_f, gfm.omega0, gfm.omega_c);
    let (ll, rl) = (net.l_line, net.r_line);

    // Shared controller sub-Jacobians.
    let diref_dvc = add(scaled(w0 * cf, J), eye(-kpv));
    let dvm_dvc = scaled(kpc, diref_dvc);
    let dvm_dif = add(scaled(w0 * lf, J), eye(-kpc));
    let dvref_dqf = Vector2::new(-nq, 0.0);

    let n = GFM_STATES;
    let mut a = DMatrix::<f64>::zeros(n, n);

    // i_f rows.
    set2(&mut a, IF, IF, add(scaled(1.0 / lf, add(dvm_dif, eye(-rf))), scaled(-omega_fr0, J)));
    set2(&mut a, IF, VC, scaled(1.0 / lf, dvm_dvc));
    set2(&mut a, IF, IL, eye(kpc / lf));
    setcol2(&mut a, IF, PF, jrot(i_f0) * mp);
    setcol2(&mut a, IF, QF, dvref_dqf * (kpc * kpv / lf));
    set2(&mut a, IF, XV, eye(kpc * kiv / lf));
    set2(&mut a, IF, XC, eye(kic / lf));
    // v_c rows.
    set2(&mut a, VC, IF, eye(1.0 / cf));
    set2(&mut a, VC, IL, eye(-1.0 / cf));
    set2(&mut a, VC, VC, scaled(-omega_fr0, J));
    setcol2(&mut a, VC, PF, jrot(v_c0) * mp);
    // i_l rows.
    set2(&mut a, IL, VC, eye(1.0 / ll));
    set2(&mut a, IL, IL, add(eye(-rl / ll), scaled(-omega_fr0, J)));
    setcol2(&mut a, IL, PF, jrot(i_l0) * mp);
    // Power filter rows.
    a[(PF, VC)] = 1.5 * wc * i_l0.x;
    a[(PF, VC + 1)] = 1.5 * wc * i_l0.y;
    a[(PF, IL)] = 1.5 * wc * v_c0.x;
    a[(PF, IL + 1)] = 1.5 * wc * v_c0.y;
    a[(PF, PF)] = -wc;
    a[(QF, VC)] = -1.5 * wc * i_l0.y;
    a[(QF, VC + 1)] = 1.5 * wc * i_l0.x;
    a[(QF, IL)] = 1.5 * wc * v_c0.y;
    a[(QF, IL + 1)] = -1.5 * wc * v_c0.x;
    a[(QF, QF)] = -wc;
    // Voltage integrator rows.
    set2(&mut a, XV, VC, eye(-1.0));
    setcol2(&mut a, XV, QF, dvref_dqf);
    // Current integrator rows.
    set2(&mut a, XC, IF, eye(-1.0));
    set2(&mut a, XC, VC, diref_dvc);
    set2(&mut a, XC, IL, eye(1.0));
    setcol2(&mut a, XC, QF, dvref_dqf * kpv);
    set2(&mut a, XC, XV, eye(kiv));

    let mut b_u = DMatrix::<f64>::zeros(n, 2);
    set2(&mut b_u, IL, 0, eye(-1.0 / ll));

    let mut b_w = DMatrix::<f64>::zeros(n, 1);
    setcol2(&mut b_w, IF, 0, -jrot(i_f0));
    setcol2(&mut b_w, VC, 0, -jrot(v_c0));
    setcol2(&mut b_w, IL, 0, -jrot(i_l0));

    let mut c_omega = DMatrix::<f64>::zeros(1, n);
    c_omega[(0, PF)] = -mp;

    let mut c_i = DMatrix::<f64>::zeros(2, n);
    set2(&mut c_i, 0, IL, eye(-1.0));

    let d_ui = DMatrix::<f64>::identity(2, 2) / net.r_load;

    ModelBuilder::new(a, model::gfm_state_labels())
        .input("u_dq", b_u)
        .input("omega_ext", b_w)
        .output("omega_v", c_omega)
        .output("i_dq", c_i)
        .feedthrough("u_dq", "i_dq", d_ui)
        .build()
}

/// Small-signal model of the grid-following block at the state `x0` with bus
/// voltage `u0`, in a frame rotating at `omega_g0`. The `omega_ext` input is
/// the frame-speed deviation.
pub fn build_gfl_model(
    gfl: &GflParams,
    omega0: f64,
    omega_g0: f64,
    x0: &[f64],
    u0: Vector2<f64>,
) -> Result<StateSpaceModel> {
    assert_eq!(x0.len(), GFL_STATES);
    let i_c0 = Vector2::new(x0[IC], x0[IC + 1]);
    let delta0 = x0[DELTA];
    let xi_g0 = Vector2::new(x0[XG], x0[XG + 1]);
    let (kpc, kic) = (gfl.k_pc(), gfl.k_ic());
    let (kp_pll, ki_pll) = (gfl.k_p_pll(), gfl.k_i_pll());
    let (lc, rc) = (gfl.l_c, gfl.r_c);

    let rm = rotmat(-delta0);
    let rp = rotmat(delta0);
    let u_p0 = matvec2(rm, u0);
    let i_p0 = matvec2(rm, i_c0);
    assert!(
        u_p0.x > GflBlock::new(gfl.clone(), omega0).up_d_floor,
        "linearisation point inside the PLL divisor guard"
    );
    let i_star0 =
        Vector2::new((2.0 / 3.0) * gfl.p_set / u_p0.x, -(2.0 / 3.0) * gfl.q_set / u_p0.x);
    let v_mp0 = jrot(i_p0) * (omega0 * lc) + (i_star0 - i_p0) * kpc + xi_g0 * kic;
    let v_m0 = matvec2(rp, v_mp0);

    // δ-derivatives of the frame-rotated signals.
    let dup_ddelta = -jrot(u_p0);
    let dip_ddelta = -jrot(i_p0);
    // Current reference sensitivities (divisor unclamped at the op).
    let s_col = -i_star0 / u_p0.x;
    let distar_du = outer(s_col, Vector2::new(rm[0][0], rm[0][1]));
    let distar_ddelta = s_col * dup_ddelta.x;

    let cross = add(scaled(omega0 * lc, J), eye(-kpc));
    let dvmp_du = scaled(kpc, distar_du);
    let dvmp_ddelta = matvec2(cross, dip_ddelta) + distar_ddelta * kpc;

    let n = GFL_STATES;
    let mut a = DMatrix::<f64>::zeros(n, n);
    // i_c rows: rotations commute with J and I, so R(δ)·cross·R(−δ) = cross.
    set2(&mut a, IC, IC, add(scaled(1.0 / lc, add(cross, eye(-rc))), scaled(-omega_g0, J)));
    setcol2(&mut a, IC, DELTA, (matvec2(rp, dvmp_ddelta) + jrot(v_m0)) / lc);
    set2(&mut a, IC, XG, scaled(kic / lc, rp));
    // PLL integrator row.
    a[(EPS, DELTA)] = dup_ddelta.y;
    // PLL angle row.
    a[(DELTA, EPS)] = ki_pll;
    a[(DELTA, DELTA)] = kp_pll * dup_ddelta.y;
    // Current integrator rows.
    set2(&mut a, XG, IC, scaled(-1.0, rm));
    setcol2(&mut a, XG, DELTA, distar_ddelta - dip_ddelta);

    let mut b_u = DMatrix::<f64>::zeros(n, 2);
    set2(&mut b_u, IC, 0, scaled(1.0 / lc, add(matmul2(rp, dvmp_du), eye(-1.0))));
    b_u[(EPS, 0)] = rm[1][0];
    b_u[(EPS, 1)] = rm[1][1];
    b_u[(DELTA, 0)] = kp_pll * rm[1][0];
    b_u[(DELTA, 1)] = kp_pll * rm[1][1];
    set2(&mut b_u, XG, 0, distar_du);

    let mut b_w = DMatrix::<f64>::zeros(n, 1);
    setcol2(&mut b_w, IC, 0, -jrot(i_c0));
    b_w[(DELTA, 0)] = -1.0;

    let mut b_pq = DMatrix::<f64>::zeros(n, 2);
    let distar_dp = Vector2::new((2.0 / 3.0) / u_p0.x, 0.0);
    let distar_dq = Vector2::new(0.0, -(2.0 / 3.0) / u_p0.x);
    setcol2(&mut b_pq, IC, 0, matvec2(rp, distar_dp) * (kpc / lc));
    setcol2(&mut b_pq, IC, 1, matvec2(rp, distar_dq) * (kpc / lc));
    setcol2(&mut b_pq, XG, 0, distar_dp);
    setcol2(&mut b_pq, XG, 1, distar_dq);

    let mut c_i = DMatrix::<f64>::zeros(2, n);
    set2(&mut c_i, 0, IC, eye(1.0));

    ModelBuilder::new(a, model::gfl_state_labels())
        .input("pq", b_pq)
        .input("u_dq", b_u)
        .input("omega_ext", b_w)
        .output("i_dq", c_i)
        .build()
}

/// Merged small-signal model: both blocks coupled through the bus voltage
/// constraint u = R_load·(i_l + i_c) and the frame constraint that the PLL's
/// grid frequency is the droop frequency. Input `pq`, output `i_dq`.
pub fn assemble_system(sys: &SystemParams, op: &OperatingPoint) -> Result<StateSpaceModel> {
    let u0 = op.bus_voltage(&sys.network);
    let omega_v0 = op.omega_v(&sys.gfm);
    let gfm_m = build_gfm_model(&sys.gfm, &sys.network, op.gfm_state(), 0.0)?;
    let gfl_m = build_gfl_model(&sys.gfl, sys.gfm.omega0, omega_v0, op.gfl_state(), u0)?;

    let n = SYS_STATES;
    let mut a = DMatrix::<f64>::zeros(n, n);
    a.view_mut((0, 0), (GFM_STATES, GFM_STATES)).copy_from(gfm_m.a());
    a.view_mut((GFM_STATES, GFM_STATES), (GFL_STATES, GFL_STATES)).copy_from(gfl_m.a());

    // Bus voltage coupling: ∂u/∂x = R_load·(selector(i_l) + selector(i_c)).
    let r = sys.network.r_load;
    let bu_v = gfm_m.input_block("u_dq")?;
    let bu_c = gfl_m.input_block("u_dq")?;
    for row in 0..GFM_STATES {
        for k in 0..2 {
            a[(row, IL + k)] += r * bu_v[(row, k)];
            a[(row, GFM_STATES + IC + k)] += r * bu_v[(row, k)];
        }
    }
    for row in 0..GFL_STATES {
        for k in 0..2 {
            a[(GFM_STATES + row, IL + k)] += r * bu_c[(row, k)];
            a[(GFM_STATES + row, GFM_STATES + IC + k)] += r * bu_c[(row, k)];
        }
    }

    // Frame coupling: the PLL's grid frequency deviation is −m_p·ΔP_f.
    let bw_c = gfl_m.input_block("omega_ext")?;
    let mp = sys.gfm.m_p();
    for row in 0..GFL_STATES {
        a[(GFM_STATES + row, PF)] += -mp * bw_c[(row, 0)];
    }

    let mut b_pq = DMatrix::<f64>::zeros(n, 2);
    b_pq.view_mut((GFM_STATES, 0), (GFL_STATES, 2)).copy_from(gfl_m.input_block("pq")?);

    let mut c_i = DMatrix::<f64>::zeros(2, n);
    c_i[(0, GFM_STATES + IC)] = 1.0;
    c_i[(1, GFM_STATES + IC + 1)] = 1.0;

    ModelBuilder::new(a, model::sys_state_labels()).input("pq", b_pq).output("i_dq", c_i).build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{solve_operating_point, state_scales, MergedSystem};
    use nalgebra::DVector;

    /// Central-difference Jacobian of `f` at `x0`, column-scaled.
    fn fd_jacobian(
        f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
        x0: &DVector<f64>,
        scales: &[f64],
    ) -> DMatrix<f64> {
        let fx = f(x0);
        let (m, n) = (fx.len(), x0.len());
        let mut jac = DMatrix::zeros(m, n);
        for j in 0..n {
            let h = 1e-6 * scales[j];
            let mut xp = x0.clone();
            let mut xm = x0.clone();
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (f(&xp), f(&xm));
            for i in 0..m {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        jac
    }

    fn assert_jac_match(analytic: &DMatrix<f64>, fd: &DMatrix<f64>, label: &str) {
        assert_eq!(analytic.shape(), fd.shape());
        for i in 0..analytic.nrows() {
            for j in 0..analytic.ncols() {
                let (a, f) = (analytic[(i, j)], fd[(i, j)]);
                let tol = crate::tol::FD_JACOBIAN_REL * a.abs().max(f.abs())
                    + crate::tol::FD_JACOBIAN_ABS;
                assert!(
                    (a - f).abs() <= tol,
                    "{label}[{i},{j}]: analytic {a:.9e} vs fd {f:.9e}"
                );
            }
        }
    }

    #[test]
    fn gfm_jacobian_matches_finite_differences() {
        let sys = SystemParams::default();
        let op = solve_operating_point(&sys).unwrap();
        let m = build_gfm_model(&sys.gfm, &sys.network, op.gfm_state(), 0.0).unwrap();
        let block = GfmBlock::new(sys.gfm.clone(), sys.network.clone());
        let u0 = op.bus_voltage(&sys.network);
        let x0 = DVector::from_column_slice(op.gfm_state());
        let scales: Vec<f64> =
            state_scales(&sys.gfm).as_slice()[..GFM_STATES].to_vec();

        let f_states = |x: &DVector<f64>| {
            let mut dx = vec![0.0; GFM_STATES];
            block.rhs(x.as_slice(), u0, 0.0, &mut dx);
            DVector::from_vec(dx)
        };
        assert_jac_match(m.a(), &fd_jacobian(&f_states, &x0, &scales), "A_gfm");

        // Input Jacobians: u and omega_ext.
        let vp = sys.gfm.v_peak();
        let f_u = |uv: &DVector<f64>| {
            let mut dx = vec![0.0; GFM_STATES];
            block.rhs(x0.as_slice(), Vector2::new(uv[0], uv[1]), 0.0, &mut dx);
            DVector::from_vec(dx)
        };
        let fd_bu = fd_jacobian(&f_u, &DVector::from_vec(vec![u0.x, u0.y]), &[vp, vp]);
        assert_jac_match(m.input_block("u_dq").unwrap(), &fd_bu, "B_u_gfm");

        let f_w = |w: &DVector<f64>| {
            let mut dx = vec![0.0; GFM_STATES];
            block.rhs(x0.as_slice(), u0, w[0], &mut dx);
            DVector::from_vec(dx)
        };
        let fd_bw = fd_jacobian(&f_w, &DVector::from_vec(vec![0.0]), &[1.0]);
        assert_jac_match(m.input_block("omega_ext").unwrap(), &fd_bw, "B_w_gfm");
    }

    #[test]
    fn gfl_jacobian_matches_finite_differences() {
        let sys = SystemParams::default();
        let op = solve_operating_point(&sys).unwrap();
        let u0 = op.bus_voltage(&sys.network);
        let omega_v0 = op.omega_v(&sys.gfm);
        let m = build_gfl_model(&sys.gfl, sys.gfm.omega0, omega_v0, op.gfl_state(), u0).unwrap();
        let block = GflBlock::new(sys.gfl.clone(), sys.gfm.omega0);
        let x0 = DVector::from_column_slice(op.gfl_state());
        let scales: Vec<f64> =
            state_scales(&sys.gfm).as_slice()[GFM_STATES..].to_vec();

        let f_states = |x: &DVector<f64>| {
            let mut dx = vec![0.0; GFL_STATES];
            block.rhs(x.as_slice(), u0, omega_v0, sys.gfl.p_set, sys.gfl.q_set, &mut dx);
            DVector::from_vec(dx)
        };
        assert_jac_match(m.a(), &fd_jacobian(&f_states, &x0, &scales), "A_gfl");

        let vp = sys.gfm.v_peak();
        let f_u = |uv: &DVector<f64>| {
            let mut dx = vec![0.0; GFL_STATES];
            block.rhs(
                x0.as_slice(),
                Vector2::new(uv[0], uv[1]),
                omega_v0,
                sys.gfl.p_set,
                sys.gfl.q_set,
                &mut dx,
            );
            DVector::from_vec(dx)
        };
        let fd_bu = fd_jacobian(&f_u, &DVector::from_vec(vec![u0.x, u0.y]), &[vp, vp]);
        assert_jac_match(m.input_block("u_dq").unwrap(), &fd_bu, "B_u_gfl");

        let f_w = |w: &DVector<f64>| {
            let mut dx = vec![0.0; GFL_STATES];
            block.rhs(x0.as_slice(), u0, omega_v0 + w[0], sys.gfl.p_set, sys.gfl.q_set, &mut dx);
            DVector::from_vec(dx)
        };
        let fd_bw = fd_jacobian(&f_w, &DVector::from_vec(vec![0.0]), &[1.0]);
        assert_jac_match(m.input_block("omega_ext").unwrap(), &fd_bw, "B_w_gfl");

        let f_pq = |pq: &DVector<f64>| {
            let mut dx = vec![0.0; GFL_STATES];
            block.rhs(x0.as_slice(), u0, omega_v0, pq[0], pq[1], &mut dx);
            DVector::from_vec(dx)
        };
        let fd_bpq = fd_jacobian(
            &f_pq,
            &DVector::from_vec(vec![sys.gfl.p_set, sys.gfl.q_set]),
            &[sys.gfm.s_rated, sys.gfm.s_rated],
        );
        assert_jac_match(m.input_block("pq").unwrap(), &fd_bpq, "B_pq_gfl");
    }

    #[test]
    fn merged_jacobian_matches_finite_differences() {
        let sys = SystemParams::default();
        let op = solve_operating_point(&sys).unwrap();
        let m = assemble_system(&sys, &op).unwrap();
        let merged = MergedSystem::new(&sys);
        let scales: Vec<f64> = state_scales(&sys.gfm).as_slice().to_vec();

        let f_states = |x: &DVector<f64>| {
            let mut dx = vec![0.0; SYS_STATES];
            merged.rhs(x.as_slice(), sys.gfl.p_set, sys.gfl.q_set, &mut dx);
            DVector::from_vec(dx)
        };
        assert_jac_match(m.a(), &fd_jacobian(&f_states, &op.x, &scales), "A_sys");

        let f_pq = |pq: &DVector<f64>| {
            let mut dx = vec![0.0; SYS_STATES];
            merged.rhs(op.x.as_slice(), pq[0], pq[1], &mut dx);
            DVector::from_vec(dx)
        };
        let fd_bpq = fd_jacobian(
            &f_pq,
            &DVector::from_vec(vec![sys.gfl.p_set, sys.gfl.q_set]),
            &[sys.gfm.s_rated, sys.gfm.s_rated],
        );
        assert_jac_match(m.input_block("pq").unwrap(), &fd_bpq, "B_pq_sys");
    }

    /// The droop frame removes the rotational symmetry: the merged system has
    /// no structural zero eigenvalue, and the default tuning is stable.
    #[test]
    fn merged_spectrum_is_stable_with_no_zero_mode() {
        let sys = SystemParams::default();
        let op = solve_operating_point(&sys).unwrap();
        let m = assemble_system(&sys, &op).unwrap();
        let eigs = m.eigenvalues().unwrap();
        assert_eq!(eigs.len(), SYS_STATES);
        let max_re = eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
        assert!(max_re < 0.0, "default tuning should be stable, max Re = {max_re}");
        let min_mag = eigs.iter().map(|e| e.norm()).fold(f64::INFINITY, f64::min);
        assert!(min_mag > 1e-6, "unexpected near-zero mode, |λ|min = {min_mag}");
    }

    /// DC gain of the linear model against a nonlinear re-solve: a small
    /// setpoint step moves the equilibrium by −A⁻¹·B·Δpq.
    #[test]
    fn dc_setpoint_gain_matches_equilibrium_shift() {
        let sys = SystemParams::default();
        let op = solve_operating_point(&sys).unwrap();
        let m = assemble_system(&sys, &op).unwrap();

        let dp = 1e-3 * sys.gfl.p_set;
        let mut up = sys.clone();
        up.gfl.p_set += dp;
        let mut dn = sys.clone();
        dn.gfl.p_set -= dp;
        let (op_up, op_dn) =
            (solve_operating_point(&up).unwrap(), solve_operating_point(&dn).unwrap());
        let dx_fd = (&op_up.x - &op_dn.x) / (2.0 * dp);

        let b = m.input_block("pq").unwrap().column(0).clone_owned();
        let dx_lin = -m.a().clone().lu().solve(&b).unwrap();

        let scales = state_scales(&sys.gfm);
        for i in 0..SYS_STATES {
            let denom = dx_lin.amax().max(1e-12 * scales[i]);
            assert!(
                (dx_fd[i] - dx_lin[i]).abs() <= 1e-3 * denom + 1e-6 * scales[i] / sys.gfl.p_set,
                "state {i}: fd {:.6e} vs lin {:.6e}",
                dx_fd[i],
                dx_lin[i]
            );
        }
    }
}
