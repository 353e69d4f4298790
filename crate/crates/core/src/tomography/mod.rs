//! Two-mode homodyne tomography: joint quadrature densities, seeded
//! sampling over a phase schedule, and binned maximum-likelihood
//! reconstruction.

pub mod hermite;
mod mle;
mod pdf;
mod sample;

pub use mle::{bootstrap, mle_reconstruct, mle_reconstruct_from, BootstrapReport, MleDiagnostics, MleOptions, NumberSymmetry};
pub use pdf::{default_half_width, homodyne_pdf, HomodynePdf, QuadratureGrid};
pub use sample::{default_schedule, read_dataset, sample, write_dataset, DatasetSidecar, QuadratureSample, TomoDataset};
