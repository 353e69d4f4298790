use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::tolerances;
use crate::{Error, Result};

/// Eigen-decomposition of a Hermitian matrix: `M = V diag(λ) V†`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<Complex64>,
}

impl HermitianEigen {
    /// Largest ‖Mv − λv‖ over all eigenpairs.
    pub fn max_residual(&self, m: &DMatrix<Complex64>) -> f64 {
        (0..self.values.len())
            .map(|k| {
                let v = self.vectors.column(k);
                let mv = m * v;
                (mv - v * Complex64::from(self.values[k])).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Max elementwise |M − M†|.
pub(crate) fn hermiticity_error(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition of a Hermitian matrix. The input is symmetrized
/// first, so callers should check Hermiticity beforehand where it matters.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> Result<HermitianEigen> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Ok(HermitianEigen {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let sym = (m + m.adjoint()) * Complex64::from(0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("QR iteration did not converge".into()))?;
    Ok(HermitianEigen {
        values: eig.eigenvalues,
        vectors: eig.eigenvectors,
    })
}

/// Indices of rows that contain at least one entry above [`tolerances::ZERO_ROW`].
fn live_indices(m: &DMatrix<Complex64>) -> Vec<usize> {
    (0..m.nrows())
        .filter(|&i| {
            m.row(i).iter().any(|z| z.norm() > tolerances::ZERO_ROW)
                || m.column(i).iter().any(|z| z.norm() > tolerances::ZERO_ROW)
        })
        .collect()
}

/// Eigenvalues of a Hermitian matrix with identically-zero rows/columns
/// removed first. The dropped directions only contribute zero eigenvalues,
/// which are omitted from the result.
pub(crate) fn compressed_eigenvalues(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    let live = live_indices(m);
    let sub = m.select_rows(&live).select_columns(&live);
    let eig = hermitian_eigen(&sub)?;
    Ok(eig.values.iter().copied().collect())
}

/// `exp(K)` for anti-Hermitian `K`, via the eigenbasis of the Hermitian `iK`.
pub(crate) fn expm_anti_hermitian(k: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let h = k * Complex64::i();
    let eig = hermitian_eigen(&h)?;
    let phases = eig.values.map(|l| Complex64::from_polar(1.0, -l));
    let v = &eig.vectors;
    Ok(v * DMatrix::from_diagonal(&phases) * v.adjoint())
}

/// Square root of a positive semidefinite Hermitian matrix (negative
/// eigenvalues from rounding are clamped to zero).
pub(crate) fn psd_sqrt(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let eig = hermitian_eigen(m)?;
    let roots = eig.values.map(|l| Complex64::from(l.max(0.0).sqrt()));
    let v = &eig.vectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.adjoint())
}
