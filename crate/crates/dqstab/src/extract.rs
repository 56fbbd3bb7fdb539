//! Extraction of the four frequency-domain objects the stability criterion
//! is built from, all linearised at the same merged equilibrium:
//!
//! - `vsm_impedance`: bus impedance of the forming-side subsystem (converter,
//!   line, load), the inverse of its voltage-driven current response.
//! - `vsm_frequency_impedance`: frequency-vs-current sensitivity row of the
//!   same subsystem, mapping injected bus current to the droop frequency.
//! - `csm_admittance`: following-converter admittance in load sign, the
//!   negated voltage-driven response of its injected current.
//! - `csm_frequency_admittance`: following-converter current sensitivity to
//!   the frame frequency seen by its PLL.
//!
//! Signs are chosen so the closed-loop characteristic equation is exactly
//! det(I + Y_C·Z_V − Ψ_C·Γ_V) = 0; see `stability::minor_loop`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freq::{StateSpaceModel, TransferSamples};
use crate::linearize::{build_gfl_model, build_gfm_model};
use crate::model::OperatingPoint;
use crate::params::SystemParams;
use crate::tol;

/// Invert a 2×2 complex matrix, failing when it is numerically singular
/// relative to its own scale.
fn inv2(m: &DMatrix<Complex64>, omega: f64) -> Result<DMatrix<Complex64>> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let scale: f64 = m.iter().map(|x| x.norm_sqr()).sum::<f64>();
    if det.norm() <= tol::IMPEDANCE_INVERSE_ABS * scale {
        return Err(Error::SingularAdmittance { omega });
    }
    let mut out = DMatrix::zeros(2, 2);
    out[(0, 0)] = m[(1, 1)] / det;
    out[(0, 1)] = -m[(0, 1)] / det;
    out[(1, 0)] = -m[(1, 0)] / det;
    out[(1, 1)] = m[(0, 0)] / det;
    Ok(out)
}

/// Linearised block models anchored at one equilibrium, with per-frequency
/// evaluators for the four objects and the minor loop.
pub struct ExtractionContext {
    gfm_model: StateSpaceModel,
    gfl_model: StateSpaceModel,
}

impl ExtractionContext {
    pub fn new(sys: &SystemParams, op: &OperatingPoint) -> Result<Self> {
        let u0 = op.bus_voltage(&sys.network);
        let omega_v0 = op.omega_v(&sys.gfm);
        Ok(Self {
            gfm_model: build_gfm_model(&sys.gfm, &sys.network, op.gfm_state(), 0.0)?,
            gfl_model: build_gfl_model(&sys.gfl, sys.gfm.omega0, omega_v0, op.gfl_state(), u0)?,
        })
    }

    pub fn gfm_model(&self) -> &StateSpaceModel {
        &self.gfm_model
    }

    pub fn gfl_model(&self) -> &StateSpaceModel {
        &self.gfl_model
    }

    /// Forming-side impedance and frequency row at one frequency:
    /// Z_V = Y_V⁻¹ and Γ_V = G_ω·Y_V⁻¹, from one resolvent solve.
    pub fn vsm_at(&self, omega: f64) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
        let y_v = self.gfm_model.eval_response("u_dq", "i_dq", omega)?;
        let g_w = self.gfm_model.eval_response("u_dq", "omega_v", omega)?;
        let z_v = inv2(&y_v, omega)?;
        let gamma = g_w * &z_v;
        Ok((z_v, gamma))
    }

    /// Following-side admittance (load sign) and frequency column at one
    /// frequency: Y_C = −G_ui and Ψ_C = G_ωi.
    pub fn csm_at(&self, omega: f64) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
        let g_ui = self.gfl_model.eval_response("u_dq", "i_dq", omega)?;
        let psi = self.gfl_model.eval_response("omega_ext", "i_dq", omega)?;
        Ok((-g_ui, psi))
    }

    /// Minor loop L(jω) = Y_C·Z_V − Ψ_C·Γ_V; dropping the frequency coupling
    /// gives the voltage-only loop Y_C·Z_V.
    pub fn minor_loop_at(&self, omega: f64, with_frequency: bool) -> Result<DMatrix<Complex64>> {
        let (z_v, gamma) = self.vsm_at(omega)?;
        let (y_c, psi) = self.csm_at(omega)?;
        let mut l = y_c * z_v;
        if with_frequency {
            l -= psi * gamma;
        }
        Ok(l)
    }
}

/// Forming-side 2×2 bus impedance over a frequency grid.
pub fn vsm_impedance(
    sys: &SystemParams,
    op: &OperatingPoint,
    omegas: &[f64],
) -> Result<TransferSamples> {
    let ctx = ExtractionContext::new(sys, op)?;
    let mut vals = Vec::with_capacity(omegas.len());
    for &w in omegas {
        vals.push(ctx.vsm_at(w)?.0);
    }
    TransferSamples::new(omegas.to_vec(), vals)
}

/// Forming-side 1×2 frequency-vs-current row over a frequency grid.
pub fn vsm_frequency_impedance(
    sys: &SystemParams,
    op: &OperatingPoint,
    omegas: &[f64],
) -> Result<TransferSamples> {
    let ctx = ExtractionContext::new(sys, op)?;
    let mut vals = Vec::with_capacity(omegas.len());
    for &w in omegas {
        vals.push(ctx.vsm_at(w)?.1);
    }
    TransferSamples::new(omegas.to_vec(), vals)
}

/// Virtual-resistor realisation of the frequency row: the current injection
/// is closed through a finite resistor R_v instead of an ideal source. The
/// feedback seen by the converter block combines R_v with the bus load in
/// parallel; the ideal row is the R_v → ∞ limit.
pub fn vsm_frequency_impedance_virtual(
    sys: &SystemParams,
    op: &OperatingPoint,
    r_v: f64,
    omegas: &[f64],
) -> Result<TransferSamples> {
    if !(r_v.is_finite() && r_v > 0.0) {
        return Err(Error::Config(format!("virtual resistance must be positive, got {r_v}")));
    }
    let gfm_model = build_gfm_model(&sys.gfm, &sys.network, op.gfm_state(), 0.0)?;
    let r_eff = r_v * sys.network.r_load / (r_v + sys.network.r_load);
    let model = current_driven_gfm(&gfm_model, r_eff)?;
    model.response_samples("i_inj", "omega_v", omegas)
}

/// Rebuild the voltage-driven forming-side model as a current-driven one:
/// u = R_eff·(i_inj − C_i·x). With R_eff equal to the bus load resistance
/// this is the exact elimination of the bus voltage; with the parallel
/// combination of load and virtual resistor it is the finite-R_v realisation.
fn current_driven_gfm(gfm_model: &StateSpaceModel, r_eff: f64) -> Result<StateSpaceModel> {
    let a_v = gfm_model.a();
    let b_u = gfm_model.input_block("u_dq")?;
    let c_i = gfm_model.output_block("i_dq")?;
    let c_w = gfm_model.output_block("omega_v")?;
    let n = a_v.nrows();

    let a_m = a_v - b_u * c_i * r_eff;
    let b_m = b_u * r_eff;
    let labels = gfm_model.state_labels().to_vec();
    let mut c_u = DMatrix::<f64>::zeros(2, n);
    c_u.copy_from(&(-c_i * r_eff));

    crate::freq::ModelBuilder::new(a_m, labels)
        .input("i_inj", b_m)
        .output("omega_v", c_w.clone())
        .output("u_dq", c_u)
        .feedthrough("i_inj", "u_dq", DMatrix::identity(2, 2) * r_eff)
        .build()
}

/// Exact current-driven forming-side model (ideal injection), exposing both
/// the bus voltage and the droop frequency. Used by analyses that need the
/// injection-form state matrix, e.g. the open-loop pole check.
pub fn gfm_current_driven(sys: &SystemParams, op: &OperatingPoint) -> Result<StateSpaceModel> {
    let gfm_model = build_gfm_model(&sys.gfm, &sys.network, op.gfm_state(), 0.0)?;
    current_driven_gfm(&gfm_model, sys.network.r_load)
}

/// Following-side 2×2 admittance (load sign) over a frequency grid.
pub fn csm_admittance(
    sys: &SystemParams,
    op: &OperatingPoint,
    omegas: &[f64],
) -> Result<TransferSamples> {
    let ctx = ExtractionContext::new(sys, op)?;
    let mut vals = Vec::with_capacity(omegas.len());
    for &w in omegas {
        vals.push(ctx.csm_at(w)?.0);
    }
    TransferSamples::new(omegas.to_vec(), vals)
}

/// Following-side 2×1 frequency-to-current column over a frequency grid.
pub fn csm_frequency_admittance(
    sys: &SystemParams,
    op: &OperatingPoint,
    omegas: &[f64],
) -> Result<TransferSamples> {
    let ctx = ExtractionContext::new(sys, op)?;
    let mut vals = Vec::with_capacity(omegas.len());
    for &w in omegas {
        vals.push(ctx.csm_at(w)?.1);
    }
    TransferSamples::new(omegas.to_vec(), vals)
}
