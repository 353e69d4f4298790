use nalgebra::DVector;
use num_complex::Complex64;

use super::basis::{basis_dim, basis_index};
use crate::error::invalid;
use crate::tolerances;
use crate::{Error, Result};

/// Pure state on a truncated multi-mode Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockKet {
    modes: usize,
    cutoff: usize,
    amplitudes: DVector<Complex64>,
    normalized: bool,
}

impl FockKet {
    /// Normalized ket; rejects vectors whose norm is off by more than
    /// [`tolerances::KET_NORM`].
    pub fn new(modes: usize, cutoff: usize, amplitudes: DVector<Complex64>) -> Result<Self> {
        let ket = Self::new_unnormalized(modes, cutoff, amplitudes)?;
        let norm = ket.norm();
        if (norm - 1.0).abs() > tolerances::KET_NORM {
            return Err(Error::NotNormalized(norm * norm));
        }
        Ok(Self {
            normalized: true,
            ..ket
        })
    }

    pub fn new_unnormalized(modes: usize, cutoff: usize, amplitudes: DVector<Complex64>) -> Result<Self> {
        if modes == 0 {
            return Err(invalid("modes", "need at least one mode"));
        }
        let dim = basis_dim(modes, cutoff);
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: amplitudes.len(),
            });
        }
        Ok(Self {
            modes,
            cutoff,
            amplitudes,
            normalized: false,
        })
    }

    pub(crate) fn from_parts(modes: usize, cutoff: usize, amplitudes: DVector<Complex64>, normalized: bool) -> Self {
        Self {
            modes,
            cutoff,
            amplitudes,
            normalized,
        }
    }

    /// Fock basis state `|n_0, n_1, …⟩`.
    pub fn basis(numbers: &[usize], cutoff: usize) -> Self {
        let mut amplitudes = DVector::zeros(basis_dim(numbers.len(), cutoff));
        amplitudes[basis_index(numbers, cutoff)] = Complex64::from(1.0);
        Self::from_parts(numbers.len(), cutoff, amplitudes, true)
    }

    /// Superposition `Σ c_k |n_k⟩`; must be normalized.
    pub fn from_terms(modes: usize, cutoff: usize, terms: &[(&[usize], Complex64)]) -> Result<Self> {
        let mut amplitudes = DVector::zeros(basis_dim(modes, cutoff));
        for (numbers, c) in terms {
            if numbers.len() != modes || numbers.iter().any(|&n| n > cutoff) {
                return Err(invalid("terms", format!("basis label {numbers:?} outside {modes} modes / cutoff {cutoff}")));
            }
            amplitudes[basis_index(numbers, cutoff)] += c;
        }
        Self::new(modes, cutoff, amplitudes)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn amplitude(&self, numbers: &[usize]) -> Complex64 {
        self.amplitudes[basis_index(numbers, self.cutoff)]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        Ok(Self::from_parts(
            self.modes,
            self.cutoff,
            &self.amplitudes / Complex64::from(n),
            true,
        ))
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &FockKet) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `⟨n_mode⟩`.
    pub fn mean_photon_number(&self, mode: usize) -> f64 {
        super::FockDensityMatrix::from_ket(self).mean_photon_number(mode)
    }
}
