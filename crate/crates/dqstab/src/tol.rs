//! Centralized numeric tolerances. Every threshold used by the analysis code
//! and the test suite lives here with its rationale; no ad-hoc magic numbers.

/// Determinant factorization identity det(I+L) = (1+λ₁)(1+λ₂), relative.
///
/// Both sides are computed from the same sampled matrix in f64; the quadratic
/// solve loses a few digits on near-defective pairs.
pub const DET_FACTORIZATION_REL: f64 = 1e-9;

/// eigen2 trace/determinant consistency, relative. Pure 2×2 arithmetic.
pub const EIGEN2_CONSISTENCY_REL: f64 = 1e-12;

/// Z_V·Y_V = I check, per entry. One LU solve plus one 2×2 inverse.
pub const IMPEDANCE_INVERSE_ABS: f64 = 1e-10;

/// Relative pivot ratio below which a resolvent LU is declared singular.
pub const RESOLVENT_PIVOT_REL: f64 = 1e-12;

/// Marginality band around −1 for the generalized Nyquist criterion.
/// Separates numerical grazing from a true encirclement flip.
pub const GNC_MARGIN_EPS: f64 = 1e-3;

/// Minor-loop norm required at the top of the grid before closing the
/// Nyquist contour through the last sample. Strictly proper physical loops
/// roll off; a larger value means the grid stops too early.
pub const CLOSURE_NORM_MAX: f64 = 0.05;

/// |1+λ| threshold that triggers adaptive grid refinement near −1.
pub const REFINE_CRITICAL_DIST: f64 = 0.2;

/// Operating-point residual, per-unit. Newton converges quadratically;
/// this is ~6 decades above f64 noise on the scaled equations.
pub const OP_RESIDUAL_PU: f64 = 1e-9;

/// Newton iteration cap for the operating-point solve.
pub const OP_MAX_ITER: usize = 50;

/// Finite-difference Jacobian vs analytic linearization, entrywise relative
/// (with a per-matrix absolute floor; central differences, step 1e-6 pu).
pub const FD_JACOBIAN_REL: f64 = 1e-5;

/// Absolute floor for the entrywise Jacobian comparison, covering structural
/// zeros where the finite difference only carries rounding noise.
pub const FD_JACOBIAN_ABS: f64 = 1e-6;

/// Central-difference step for Jacobian checks, per-unit of each state scale.
pub const FD_STEP_PU: f64 = 1e-6;

/// Eigenvalue marginality: |Re λ|/|λ| below this is too close to the axis to
/// call, mirroring the GNC marginality band.
pub const EIGEN_MARGIN_REL: f64 = 1e-4;

/// Divergence guard for the simulator: any state beyond this multiple of its
/// nominal scale halts integration with a divergence record.
pub const SIM_DIVERGENCE_FACTOR: f64 = 1e3;

/// RK4 absolute-stability limit on h·|λ| for the fastest mode (the real-axis
/// stability interval of classical RK4 is ≈ 2.79; keep a margin).
pub const RK4_STEP_LIMIT: f64 = 2.5;

/// Spectral prominence (dB over the median spectrum) required to declare a
/// dominant oscillation tone.
pub const TONE_PROMINENCE_DB: f64 = 6.0;

/// Coherence check for single-bin DFT windows, relative deviation of the
/// window length from an integer number of periods.
pub const COHERENCE_REL: f64 = 1e-6;

/// Condition-number cap on the 2×2 identification experiment matrix.
pub const IDENT_COND_MAX: f64 = 1e3;

/// Identified vs analytic response on a noiseless linear system, relative.
/// Limited by integrator truncation error, not by the DFT.
pub const IDENT_LINEAR_REL: f64 = 1e-9;
