//! Crate-wide error type. Variants carry enough context to pick the CLI exit
//! code (config errors exit 1, analysis errors exit 2).

use thiserror::Error;

/// Unified error for all toolkit operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A port name was not found on a state-space model.
    #[error("unknown port {port:?} (model has {available:?})")]
    UnknownPort { port: String, available: Vec<String> },

    /// Matrix or port dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// jω hit an imaginary-axis eigenvalue of A; the resolvent solve is
    /// singular and the frequency grid needs indentation.
    #[error("resolvent singular at ω = {omega} rad/s (jω within conditioning threshold of an eigenvalue)")]
    SingularResolvent { omega: f64 },

    /// The voltage-to-current response is not invertible at a grid point.
    #[error("admittance singular at ω = {omega} rad/s (grid point coincides with a transmission zero)")]
    SingularAdmittance { omega: f64 },

    /// Nyquist polyline passes too close to the test point for a reliable
    /// winding count.
    #[error("locus passes within {distance:.3e} of the critical point (ε = {epsilon:.1e}); refine the grid")]
    PointOnCurve { distance: f64, epsilon: f64 },

    /// GNC verdict withheld: a locus grazes −1 inside the marginality band.
    #[error("marginal case: locus approaches −1 to {distance:.3e} (< ε = {epsilon:.1e}); verdict withheld")]
    Marginal { distance: f64, epsilon: f64 },

    /// GNC precondition violated: an open-loop subsystem has right-half-plane
    /// poles, so encirclement counting alone cannot decide stability.
    #[error("open-loop subsystem {which} has {count} right-half-plane pole(s); GNC precondition violated")]
    OpenLoopUnstable { which: String, count: usize },

    /// Newton iteration for the operating point did not converge.
    #[error("operating point did not converge after {iterations} iterations (residual {residual:.3e} per-unit); setpoints may be infeasible")]
    NoConvergence { iterations: usize, residual: f64 },

    /// The operating point handed to a model builder does not satisfy the
    /// steady-state equations of the given parameters.
    #[error("operating point inconsistent with parameters (residual {residual:.3e} per-unit)")]
    OperatingPointMismatch { residual: f64 },

    /// A constructed matrix contains NaN or infinity.
    #[error("non-finite entries in {0}")]
    NonFinite(String),

    /// Two sample sets that must share a frequency grid do not.
    #[error("frequency grid mismatch: {0}")]
    GridMismatch(String),

    /// RK4 step too large for the fastest system mode.
    #[error("integrator step {step} s too large for fastest mode |λ|max = {eig_max:.3e} rad/s (need h·|λ| < {limit})")]
    StepTooLarge { step: f64, eig_max: f64, limit: f64 },

    /// Spectral peak not prominent enough to call a dominant oscillation.
    #[error("no dominant tone: spectral peak only {prominence_db:.1} dB above median (need ≥ {required_db} dB)")]
    NoDominantTone { prominence_db: f64, required_db: f64 },

    /// Identification experiment matrix too close to singular.
    #[error("injection experiments ill-conditioned (condition number {cond:.3e} > {limit:.0e})")]
    IllConditioned { cond: f64, limit: f64 },

    /// Phasor extraction window does not hold an integer number of tone
    /// periods, so the projection would leak.
    #[error("window spans {periods:.6} periods of {f_hz} Hz; phasor extraction needs an integer count (relative tolerance {tol:.0e})")]
    NonCoherent { f_hz: f64, periods: f64, tol: f64 },

    /// Requested channel not present in a time series.
    #[error("unknown channel {channel:?} (have {available:?})")]
    UnknownChannel { channel: String, available: Vec<String> },

    /// Eigensolver failed to converge.
    #[error("eigensolver did not converge on a {n}×{n} matrix")]
    EigenSolver { n: usize },

    /// Configuration file missing, unparsable, or semantically invalid.
    #[error("config: {0}")]
    Config(String),

    /// Plot/export asked to render an empty dataset.
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    /// Filesystem failure while writing artifacts.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code class: 1 for configuration errors, 2 for analysis errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            _ => 2,
        }
    }

    /// Stable machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnknownPort { .. } => "unknown_port",
            Error::Dimension(_) => "dimension",
            Error::SingularResolvent { .. } => "singular_resolvent",
            Error::SingularAdmittance { .. } => "singular_admittance",
            Error::PointOnCurve { .. } => "point_on_curve",
            Error::Marginal { .. } => "marginal",
            Error::OpenLoopUnstable { .. } => "open_loop_unstable",
            Error::NoConvergence { .. } => "no_convergence",
            Error::OperatingPointMismatch { .. } => "operating_point_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::StepTooLarge { .. } => "step_too_large",
            Error::NoDominantTone { .. } => "no_dominant_tone",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::NonCoherent { .. } => "non_coherent",
            Error::UnknownChannel { .. } => "unknown_channel",
            Error::EigenSolver { .. } => "eigen_solver",
            Error::Config(_) => "config",
            Error::EmptyDataset(_) => "empty_dataset",
            Error::Io(_) => "io",
        }
    }
}
