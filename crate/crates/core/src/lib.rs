//! Simulation of quantum and classical dynamics as measured by imperfect clocks.
//!
//! A real clock reads out time with a small stationary stochastic error. This
//! crate models that error process, propagates quantum states both exactly
//! (dephasing master equation, closed-form solution) and by brute force
//! (ensemble averaging over sampled noise realizations), solves the classical
//! angle-diffusion analogue, and computes the spectral density that maps the
//! clock noise onto an effective thermal bath.
//!
//! Modules:
//! - [`clock`]: clock-error processes (Ornstein-Uhlenbeck and tabulated
//!   correlation), tick sequences, and statistical estimators.
//! - [`quantum`]: dense complex linear algebra for small Hilbert spaces —
//!   Hamiltonians, density matrices, unitary propagation, entropy.
//! - [`master`]: the dephasing master equation, RK4 integration and the exact
//!   eigenbasis solution.
//! - [`monte_carlo`]: ensemble averaging over noise paths and closed-form
//!   Gaussian dephasing factors, used as mutual consistency oracles.
//! - [`classical`]: the angle-variable advection-diffusion equation on the
//!   circle, grid and Fourier-mode solvers.
//! - [`bath`]: cosine-transform spectral densities and the effective-bath
//!   consistency checks.
//! - [`io`]: CSV and plain-text matrix formats shared with the CLI.
//!
//! With the default `parallel` feature, ensemble work is distributed with
//! rayon; reductions are chunked in a fixed order so results are bit-identical
//! to the sequential fallback at any thread count.

pub mod bath;
pub mod classical;
pub mod clock;
mod error;
pub mod io;
pub mod master;
pub mod monte_carlo;
pub mod numeric;
mod par;
pub mod quantum;

pub use error::{Error, Result};
