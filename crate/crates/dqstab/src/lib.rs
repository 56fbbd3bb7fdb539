//! Small-signal stability toolkit for a two-converter dq-frame power system:
//! a grid-forming converter (droop-controlled voltage source behind an LC
//! filter and a line, feeding a resistive load at the PCC) in parallel with a
//! grid-following converter (PLL-synchronized controlled current source).
//!
//! The toolkit computes the four frequency-domain objects that characterize
//! the interconnection — the source impedance `Z_V`, the frequency-impedance
//! row `Γ_V`, the load admittance `Y_C`, and the frequency-admittance column
//! `Ψ_C` — and decides stability three independent ways:
//!
//! * generalized Nyquist criterion on the extended minor loop
//!   `L = Y_C·Z_V − Ψ_C·Γ_V` (grid-frequency dynamics included),
//! * the same criterion on the standard loop `L′ = Y_C·Z_V`,
//! * eigenvalues of the merged state matrix `A_SYS`.
//!
//! A nonlinear time-domain simulator and a tone-injection identification
//! procedure provide independent validation of both the linearizations and
//! the verdicts.

pub mod config;
pub mod error;
pub mod export;
pub mod extract;
pub mod freq;
pub mod ident;
pub mod linearize;
pub mod model;
pub mod params;
pub mod plot;
pub mod sim;
pub mod stability;
pub mod sweep;
pub mod tol;

pub use error::{Error, Result};
