use nalgebra::DMatrix;
use num_complex::Complex64;

use super::basis::{basis_digits, basis_dim, basis_index};
use super::ket::FockKet;
use super::linalg::hermiticity_error;
use crate::error::invalid;
use crate::tolerances;
use crate::{Error, Result};

/// Density operator of `modes` modes on a Fock space truncated at `cutoff`
/// photons per mode.
///
/// States flagged `normalized` have unit trace and are positive
/// semidefinite. Post-selected blocks and other intermediate objects may be
/// built with [`FockDensityMatrix::new_unnormalized`], which only requires
/// Hermiticity.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityMatrix {
    modes: usize,
    cutoff: usize,
    data: DMatrix<Complex64>,
    normalized: bool,
}

impl FockDensityMatrix {
    /// Wraps a normalized density matrix. Checks shape, Hermiticity and
    /// trace; positivity is left to [`validate`](Self::validate).
    pub fn new(modes: usize, cutoff: usize, data: DMatrix<Complex64>) -> Result<Self> {
        let rho = Self::new_unnormalized(modes, cutoff, data)?;
        let tr = rho.trace();
        if (tr - 1.0).abs() > tolerances::TRACE {
            return Err(Error::NotNormalized(tr));
        }
        Ok(Self {
            normalized: true,
            ..rho
        })
    }

    /// Wraps a Hermitian matrix without any trace requirement.
    pub fn new_unnormalized(modes: usize, cutoff: usize, data: DMatrix<Complex64>) -> Result<Self> {
        if modes == 0 {
            return Err(invalid("modes", "need at least one mode"));
        }
        let dim = basis_dim(modes, cutoff);
        if data.nrows() != dim || data.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: data.nrows().max(data.ncols()),
            });
        }
        let herm = hermiticity_error(&data);
        if herm > tolerances::HERMITICITY {
            return Err(Error::NotHermitian(herm));
        }
        Ok(Self {
            modes,
            cutoff,
            data,
            normalized: false,
        })
    }

    pub(crate) fn from_parts(modes: usize, cutoff: usize, data: DMatrix<Complex64>, normalized: bool) -> Self {
        debug_assert_eq!(data.nrows(), basis_dim(modes, cutoff));
        Self {
            modes,
            cutoff,
            data,
            normalized,
        }
    }

    /// `|ψ⟩⟨ψ|`; inherits the ket's normalization flag.
    pub fn from_ket(psi: &FockKet) -> Self {
        let a = psi.amplitudes();
        Self::from_parts(psi.modes(), psi.cutoff(), a * a.adjoint(), psi.is_normalized())
    }

    pub fn vacuum(modes: usize, cutoff: usize) -> Self {
        Self::fock(&vec![0; modes], cutoff)
    }

    /// Projector onto the Fock state `|n_0, n_1, …⟩`.
    pub fn fock(numbers: &[usize], cutoff: usize) -> Self {
        Self::from_ket(&FockKet::basis(numbers, cutoff))
    }

    /// Convex combination `Σ w_k ρ_k` of normalized states with weights
    /// summing to one.
    pub fn mixture(terms: &[(f64, &FockDensityMatrix)]) -> Result<Self> {
        let (_, first) = terms.first().ok_or_else(|| invalid("terms", "empty mixture"))?;
        let mut data = DMatrix::zeros(first.dim(), first.dim());
        let mut total = 0.0;
        for (w, rho) in terms {
            if *w < 0.0 {
                return Err(invalid("weight", format!("negative weight {w}")));
            }
            if rho.modes != first.modes {
                return Err(Error::InvalidModes(format!("{} vs {} modes", rho.modes, first.modes)));
            }
            if rho.cutoff != first.cutoff {
                return Err(Error::CutoffMismatch(rho.cutoff, first.cutoff));
            }
            data += &rho.data * Complex64::from(*w);
            total += w;
        }
        if (total - 1.0).abs() > tolerances::TRACE {
            return Err(invalid("weights", format!("sum to {total}, not 1")));
        }
        Ok(Self::from_parts(first.modes, first.cutoff, data, true))
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.data
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Real part of the trace.
    pub fn trace(&self) -> f64 {
        self.data.diagonal().iter().map(|z| z.re).sum()
    }

    /// Matrix element `⟨row|ρ|col⟩` addressed by photon-number tuples.
    pub fn element(&self, row: &[usize], col: &[usize]) -> Complex64 {
        self.data[(basis_index(row, self.cutoff), basis_index(col, self.cutoff))]
    }

    /// Rescales to unit trace and flags the result normalized.
    pub fn normalize(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= 0.0 {
            return Err(Error::NotNormalized(tr));
        }
        Ok(Self::from_parts(
            self.modes,
            self.cutoff,
            &self.data * Complex64::from(1.0 / tr),
            true,
        ))
    }

    /// Checks every invariant of the type: Hermiticity, trace and (for
    /// normalized states) positivity.
    pub fn validate(&self) -> Result<()> {
        let herm = hermiticity_error(&self.data);
        if herm > tolerances::HERMITICITY {
            return Err(Error::NotHermitian(herm));
        }
        let im_tr: f64 = self.data.diagonal().iter().map(|z| z.im).sum();
        if im_tr.abs() > tolerances::TRACE {
            return Err(Error::InvalidState(format!("complex trace (im = {im_tr:e})")));
        }
        if self.normalized {
            let tr = self.trace();
            if (tr - 1.0).abs() > tolerances::TRACE {
                return Err(Error::NotNormalized(tr));
            }
            let min = self.min_eigenvalue()?;
            if min < -tolerances::POSITIVITY {
                return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
            }
        }
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let ev = super::linalg::compressed_eigenvalues(&self.data)?;
        // dropped zero rows contribute eigenvalue 0
        let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(if ev.len() < self.dim() { min.min(0.0) } else { min })
    }

    /// Same state on a larger per-mode cutoff (zero-padded).
    pub fn embed(&self, cutoff: usize) -> Result<Self> {
        if cutoff < self.cutoff {
            return Err(invalid("cutoff", format!("cannot embed cutoff {} into {cutoff}", self.cutoff)));
        }
        if cutoff == self.cutoff {
            return Ok(self.clone());
        }
        let map = embedding_map(self.modes, self.cutoff, cutoff);
        let dim = basis_dim(self.modes, cutoff);
        let mut data = DMatrix::zeros(dim, dim);
        for (i, &ii) in map.iter().enumerate() {
            for (j, &jj) in map.iter().enumerate() {
                data[(ii, jj)] = self.data[(i, j)];
            }
        }
        Ok(Self::from_parts(self.modes, cutoff, data, self.normalized))
    }

    /// Projects onto a smaller per-mode cutoff. The result is flagged
    /// unnormalized whenever weight is discarded.
    pub fn truncate(&self, cutoff: usize) -> Result<Self> {
        if cutoff > self.cutoff {
            return Err(invalid("cutoff", format!("cannot truncate cutoff {} to {cutoff}", self.cutoff)));
        }
        let map = embedding_map(self.modes, cutoff, self.cutoff);
        let data = self.data.select_rows(&map).select_columns(&map);
        let rho = Self::from_parts(self.modes, cutoff, data, false);
        let kept = (rho.trace() - self.trace()).abs() <= tolerances::TRACE;
        Ok(Self {
            normalized: self.normalized && kept,
            ..rho
        })
    }

    /// `⟨n_mode⟩`.
    pub fn mean_photon_number(&self, mode: usize) -> f64 {
        (0..self.dim())
            .map(|i| basis_digits(i, self.modes, self.cutoff)[mode] as f64 * self.data[(i, i)].re)
            .sum()
    }

    /// Highest photon number of `mode` carrying population above `tol`.
    pub fn max_occupied(&self, mode: usize, tol: f64) -> usize {
        (0..self.dim())
            .filter(|&i| self.data[(i, i)].re > tol)
            .map(|i| basis_digits(i, self.modes, self.cutoff)[mode])
            .max()
            .unwrap_or(0)
    }

    /// Elementwise absolute values, the bar-chart view of a density matrix.
    pub fn abs_elements(&self) -> DMatrix<f64> {
        self.data.map(|z| z.norm())
    }
}

/// Flat indices of the `from`-cutoff basis inside the `to`-cutoff basis.
fn embedding_map(modes: usize, from: usize, to: usize) -> Vec<usize> {
    (0..basis_dim(modes, from))
        .map(|i| basis_index(&basis_digits(i, modes, from), to))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::c64;

    fn bell() -> FockDensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        FockDensityMatrix::from_ket(&FockKet::from_terms(2, 1, &[(&[1, 0], c64(s, 0.0)), (&[0, 1], c64(s, 0.0))]).unwrap())
    }

    #[test]
    fn fock_projector_sits_on_the_right_index() {
        let rho = FockDensityMatrix::fock(&[1, 0], 2);
        assert_eq!(rho.matrix()[(3, 3)], c64(1.0, 0.0));
        assert_eq!(rho.trace(), 1.0);
        rho.validate().unwrap();
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = c64(1.0, 0.0);
        m[(0, 1)] = c64(0.1, 0.0);
        assert!(matches!(FockDensityMatrix::new(1, 1, m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn rejects_wrong_trace_and_shape() {
        let m = DMatrix::from_diagonal_element(2, 2, c64(0.4, 0.0));
        assert!(matches!(FockDensityMatrix::new(1, 1, m.clone()), Err(Error::NotNormalized(_))));
        assert!(FockDensityMatrix::new_unnormalized(1, 1, m).is_ok());
        let m3 = DMatrix::from_diagonal_element(3, 3, c64(1.0 / 3.0, 0.0));
        assert!(matches!(FockDensityMatrix::new(1, 1, m3), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn validate_catches_negative_eigenvalue() {
        let m = DMatrix::from_row_slice(2, 2, &[c64(0.5, 0.0), c64(0.8, 0.0), c64(0.8, 0.0), c64(0.5, 0.0)]);
        let rho = FockDensityMatrix::new(1, 1, m).unwrap();
        assert!(rho.validate().is_err());
    }

    #[test]
    fn embed_then_truncate_is_identity() {
        let rho = bell();
        let big = rho.embed(4).unwrap();
        assert_eq!(big.dim(), 25);
        assert_eq!(big.element(&[1, 0], &[0, 1]), rho.element(&[1, 0], &[0, 1]));
        let back = big.truncate(1).unwrap();
        assert_eq!(back, rho);
    }

    #[test]
    fn truncation_that_drops_weight_clears_flag() {
        let rho = FockDensityMatrix::mixture(&[
            (0.5, &FockDensityMatrix::fock(&[2], 2)),
            (0.5, &FockDensityMatrix::fock(&[0], 2)),
        ])
        .unwrap();
        let t = rho.truncate(1).unwrap();
        assert!(!t.is_normalized());
        assert!((t.trace() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn photon_statistics() {
        let rho = bell().embed(3).unwrap();
        assert!((rho.mean_photon_number(0) - 0.5).abs() < 1e-15);
        assert_eq!(rho.max_occupied(1, 1e-12), 1);
    }
}
