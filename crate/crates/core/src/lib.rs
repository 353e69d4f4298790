//! Truncated Fock-space simulation of hybrid discrete/continuous-variable
//! entanglement swapping.
//!
//! A single-photon entangled pair is pushed through a gain-tunable
//! continuous-variable teleportation channel. The crate covers the full
//! analysis chain around that experiment:
//!
//! - [`fock`]: dense density matrices and kets on truncated multi-mode Fock
//!   spaces, partial trace/transpose, trace norm and fidelities.
//! - [`state_prep`]: split single photon, two-mode squeezed vacuum, beam
//!   splitter and displacement unitaries.
//! - [`channel`]: the phase-insensitive Gaussian teleportation channel and a
//!   brute-force Monte-Carlo Bell-measurement oracle for it.
//! - [`entanglement`]: logarithmic negativity and gain scans.
//! - [`postselect`]: qubit-block purification, CHSH analysis and
//!   post-selected qubit teleportation.
//! - [`tomography`]: two-mode homodyne sampling and iterative
//!   maximum-likelihood reconstruction.
//! - [`pipeline`]: config-driven experiment runner and reference-value
//!   comparison.
//!
//! Basis ordering everywhere is lexicographic in photon-number tuples with
//! mode 0 varying slowest. Quadratures follow `x = (a + a†)/√2`, so the
//! vacuum has quadrature variance 1/2.

pub mod channel;
pub mod entanglement;
mod error;
pub mod fock;
pub mod pipeline;
pub mod postselect;
pub mod state_prep;
pub mod tolerances;
pub mod tomography;

pub use error::{Error, Result};
pub use fock::{FockDensityMatrix, FockKet};
