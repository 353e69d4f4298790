//! Dense linear algebra on truncated multi-mode Fock spaces.
//!
//! Every state lives in `(cutoff + 1)^modes` dimensions. Basis index `i`
//! enumerates photon-number tuples `(n_0, …, n_{modes-1})` lexicographically
//! with mode 0 slowest, i.e. `i = Σ n_k (cutoff+1)^(modes-1-k)`.

mod basis;
mod density;
mod json;
mod ket;
pub(crate) mod linalg;
mod ops;

pub use basis::{basis_dim, basis_digits, basis_index};
pub use density::FockDensityMatrix;
pub use ket::FockKet;
pub use linalg::{hermitian_eigen, HermitianEigen};
pub use ops::{
    FockState, fidelity, partial_trace, partial_transpose, state_fidelity, tensor, trace_distance,
    trace_norm,
};

pub(crate) use ops::{apply_local_ket, LocalLayout};

pub use num_complex::Complex64;

/// Shorthand for a complex number.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
