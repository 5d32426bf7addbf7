//! Solitary internal waves of a nonlocal two-layer Boussinesq system.
//!
//! The crate computes traveling solitary waves of
//!
//! ```text
//! zeta_t + (1/(gamma+delta)) v_x + K (zeta v)_x = 0
//! (1 - beta d_xx) v_t + (1 - gamma) zeta_x + (K/2) (v^2)_x = 0
//! ```
//!
//! with a Fourier pseudospectral discretization solved by Petviashvili
//! iteration ([`solver`]), cross-checks them against an independent
//! integration of the traveling-wave ODE ([`oracle`]), and provides the
//! analyses used to characterize the profiles ([`analysis`]).

pub mod analysis;
pub mod dispersion;
pub mod grid;
pub mod io;
pub mod oracle;
pub mod params;
pub mod solver;

pub use grid::{GridFunction, SpectralGrid};
pub use params::{ModelParameters, WaveType};
