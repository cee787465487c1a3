//! Semiclassical spectral toolkit for Berezin-Toeplitz operators on the
//! two-torus: clock-and-shift quantization of trigonometric symbols, dense
//! Hermitian spectra with residual certificates, action-integral eigenvalue
//! predictors near an elliptic minimum, and an exact truncated-Bargmann model
//! of the Toeplitz symbol calculus on the plane.

pub mod bohr_sommerfeld;
pub mod cli;
pub mod fock;
pub mod io;
pub mod par;
pub mod spectral;
pub mod symbols;
pub mod theta;
pub mod torus;

pub use par::Execution;
