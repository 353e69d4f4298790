//! Numerical tolerances shared by the library and its tests.

/// Max elementwise |M − M†| accepted for a Hermitian matrix.
pub const HERMITICITY: f64 = 1e-10;

/// Allowed deviation of a normalized trace from 1.
pub const TRACE: f64 = 1e-9;

/// Slack on eigenvalues of normalized states (λ ≥ −POSITIVITY).
pub const POSITIVITY: f64 = 1e-9;

/// Max residual ‖Mv − λv‖ of a reported eigenpair.
pub const EIGEN_RESIDUAL: f64 = 1e-8;

/// Norm accepted for a normalized ket.
pub const KET_NORM: f64 = 1e-10;

/// A partial-transpose eigenvalue below −PPT counts as genuine negativity.
pub const PPT: f64 = 1e-7;

/// Largest norm a displacement may push past the cutoff.
pub const DISPLACEMENT_LEAK: f64 = 1e-6;

/// Per-level trace lost to truncation of the amplifier dilation.
pub const AMPLIFIER_TAIL: f64 = 1e-10;

/// Hard ceiling on the per-mode cutoff the channel may enlarge to.
pub const MAX_CHANNEL_CUTOFF: usize = 80;

/// Rows/columns with all entries at or below this are dropped before
/// eigen-decomposition; they only carry zero eigenvalues.
pub const ZERO_ROW: f64 = 1e-15;

/// Qubit normalization |α|² + |β|² = 1.
pub const QUBIT_NORM: f64 = 1e-10;

/// Pdf normalization on a quadrature grid.
pub const PDF_NORMALIZATION: f64 = 1e-4;

/// Slack on MLE log-likelihood monotonicity.
pub const LOGLIK_SLACK: f64 = 1e-9;
