use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::basis::{basis_digits, basis_dim, stride};
use super::linalg::{compressed_eigenvalues, hermiticity_error, psd_sqrt};
use super::{FockDensityMatrix, FockKet};
use crate::tolerances;
use crate::{Error, Result};

/// Sorted, deduplicated, range-checked mode set.
fn checked_modes(set: &[usize], modes: usize) -> Result<Vec<usize>> {
    let mut v = set.to_vec();
    v.sort_unstable();
    if v.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidModes(format!("duplicate mode in {set:?}")));
    }
    if let Some(&m) = v.iter().find(|&&m| m >= modes) {
        return Err(Error::InvalidModes(format!("mode {m} out of range for {modes} modes")));
    }
    Ok(v)
}

/// `a ⊗ b`; the modes of `a` come first.
pub fn tensor(a: &FockDensityMatrix, b: &FockDensityMatrix) -> Result<FockDensityMatrix> {
    if a.cutoff() != b.cutoff() {
        return Err(Error::CutoffMismatch(a.cutoff(), b.cutoff()));
    }
    Ok(FockDensityMatrix::from_parts(
        a.modes() + b.modes(),
        a.cutoff(),
        a.matrix().kronecker(b.matrix()),
        a.is_normalized() && b.is_normalized(),
    ))
}

/// Reduced state on the modes in `keep` (returned in ascending mode order).
pub fn partial_trace(rho: &FockDensityMatrix, keep: &[usize]) -> Result<FockDensityMatrix> {
    let keep = checked_modes(keep, rho.modes())?;
    if keep.is_empty() {
        return Err(Error::InvalidModes("partial trace must keep at least one mode".into()));
    }
    if keep.len() == rho.modes() {
        return Ok(rho.clone());
    }
    let layout = LocalLayout::new(rho.modes(), rho.cutoff(), &keep);
    let m = rho.matrix();
    let kd = layout.local_dim;
    let mut out = DMatrix::<Complex64>::zeros(kd, kd);
    for r in 0..layout.rest_dim {
        let block = &layout.full[r * kd..(r + 1) * kd];
        for (ki, &fi) in block.iter().enumerate() {
            for (kj, &fj) in block.iter().enumerate() {
                out[(ki, kj)] += m[(fi, fj)];
            }
        }
    }
    Ok(FockDensityMatrix::from_parts(keep.len(), rho.cutoff(), out, rho.is_normalized()))
}

/// Transposes the indices of the modes in `part`. Involutive; preserves
/// Hermiticity and trace but not positivity.
pub fn partial_transpose(rho: &FockDensityMatrix, part: &[usize]) -> Result<FockDensityMatrix> {
    let part = checked_modes(part, rho.modes())?;
    let (modes, cutoff) = (rho.modes(), rho.cutoff());
    let dim = rho.dim();
    // split every index into its `part` component and the remainder
    let part_component: Vec<usize> = (0..dim)
        .map(|i| {
            let d = basis_digits(i, modes, cutoff);
            part.iter().map(|&m| d[m] * stride(m, modes, cutoff)).sum()
        })
        .collect();
    let m = rho.matrix();
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..dim {
        let (pi, ri) = (part_component[i], i - part_component[i]);
        for j in 0..dim {
            let pj = part_component[j];
            out[(ri + pj, j - pj + pi)] = m[(i, j)];
        }
    }
    // the result is a Hermitian operator but generally not a state
    Ok(FockDensityMatrix::from_parts(modes, cutoff, out, false))
}

/// Σ|λ_i| of a Hermitian matrix.
pub fn trace_norm(m: &FockDensityMatrix) -> Result<f64> {
    let herm = hermiticity_error(m.matrix());
    if herm > tolerances::HERMITICITY {
        return Err(Error::NotHermitian(herm));
    }
    Ok(compressed_eigenvalues(m.matrix())?.iter().map(|l| l.abs()).sum())
}

/// `⟨ψ|ρ|ψ⟩` for a normalized ket.
pub fn fidelity(rho: &FockDensityMatrix, psi: &FockKet) -> Result<f64> {
    if rho.dim() != psi.dim() || rho.modes() != psi.modes() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: psi.dim(),
        });
    }
    if (psi.norm() - 1.0).abs() > tolerances::KET_NORM {
        return Err(Error::NotNormalized(psi.norm().powi(2)));
    }
    let v = psi.amplitudes();
    Ok(v.dotc(&(rho.matrix() * v)).re)
}

fn same_space(a: &FockDensityMatrix, b: &FockDensityMatrix) -> Result<()> {
    if a.modes() != b.modes() {
        return Err(Error::InvalidModes(format!("{} vs {} modes", a.modes(), b.modes())));
    }
    if a.cutoff() != b.cutoff() {
        return Err(Error::CutoffMismatch(a.cutoff(), b.cutoff()));
    }
    Ok(())
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²`, reducing to `⟨ψ|σ|ψ⟩` for pure ρ.
pub fn state_fidelity(rho: &FockDensityMatrix, sigma: &FockDensityMatrix) -> Result<f64> {
    same_space(rho, sigma)?;
    let s = psd_sqrt(rho.matrix())?;
    let inner = &s * sigma.matrix() * &s;
    let root_sum: f64 = compressed_eigenvalues(&inner)?.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok(root_sum * root_sum)
}

/// `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &FockDensityMatrix, sigma: &FockDensityMatrix) -> Result<f64> {
    same_space(rho, sigma)?;
    let diff = rho.matrix() - sigma.matrix();
    Ok(0.5 * compressed_eigenvalues(&diff)?.iter().fold(0.0, |acc, l| acc + l.abs()))
}

/// Factorization of the flat basis into (rest, local) index pairs for an
/// operator acting on `targets` (local digits ordered as given).
pub(crate) struct LocalLayout {
    pub local_dim: usize,
    pub rest_dim: usize,
    /// `full[rest * local_dim + local]` is the flat index.
    pub full: Vec<usize>,
}

impl LocalLayout {
    pub fn new(modes: usize, cutoff: usize, targets: &[usize]) -> Self {
        let base = cutoff + 1;
        let local_dim = base.pow(targets.len() as u32);
        let dim = basis_dim(modes, cutoff);
        let rest_dim = dim / local_dim;
        let rest_modes: Vec<usize> = (0..modes).filter(|m| !targets.contains(m)).collect();
        let mut full = vec![0; dim];
        for f in 0..dim {
            let d = basis_digits(f, modes, cutoff);
            let local = targets.iter().fold(0, |acc, &m| acc * base + d[m]);
            let rest = rest_modes.iter().fold(0, |acc, &m| acc * base + d[m]);
            full[rest * local_dim + local] = f;
        }
        Self {
            local_dim,
            rest_dim,
            full,
        }
    }
}

/// `(op ⊗ 1)|ψ⟩` with `op` acting on the layout's target modes.
pub(crate) fn apply_local_ket(amps: &DVector<Complex64>, layout: &LocalLayout, op: &DMatrix<Complex64>) -> DVector<Complex64> {
    let l = layout.local_dim;
    let mut out = DVector::zeros(amps.len());
    let mut buf = DVector::zeros(l);
    for r in 0..layout.rest_dim {
        let idx = &layout.full[r * l..(r + 1) * l];
        for (k, &f) in idx.iter().enumerate() {
            buf[k] = amps[f];
        }
        let w = op * &buf;
        for (k, &f) in idx.iter().enumerate() {
            out[f] = w[k];
        }
    }
    out
}

fn apply_local_columns(m: &DMatrix<Complex64>, layout: &LocalLayout, op: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        let col = m.column(j).into_owned();
        if col.iter().all(|z| *z == Complex64::default()) {
            continue;
        }
        out.set_column(j, &apply_local_ket(&col, layout, op));
    }
    out
}

/// `(op ⊗ 1) ρ (op ⊗ 1)†`.
pub(crate) fn apply_local_density(m: &DMatrix<Complex64>, layout: &LocalLayout, op: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let left = apply_local_columns(m, layout, op);
    apply_local_columns(&left.adjoint(), layout, op).adjoint()
}

/// Kets and density matrices alike: anything a local operator can act on.
pub trait FockState: Sized {
    fn modes(&self) -> usize;
    fn cutoff(&self) -> usize;
    /// Norm² for kets, trace for density matrices.
    fn weight(&self) -> f64;
    /// Applies `op` (ordered as `targets`) to the given modes. The
    /// normalization flag is kept only if the weight is unchanged.
    fn transform_modes(&self, targets: &[usize], op: &DMatrix<Complex64>) -> Result<Self>;
}

fn check_targets(targets: &[usize], modes: usize, cutoff: usize, op: &DMatrix<Complex64>) -> Result<()> {
    checked_modes(targets, modes)?;
    let local = (cutoff + 1).pow(targets.len() as u32);
    if op.nrows() != local || op.ncols() != local {
        return Err(Error::DimensionMismatch {
            expected: local,
            got: op.nrows().max(op.ncols()),
        });
    }
    Ok(())
}

impl FockState for FockKet {
    fn modes(&self) -> usize {
        FockKet::modes(self)
    }
    fn cutoff(&self) -> usize {
        FockKet::cutoff(self)
    }
    fn weight(&self) -> f64 {
        self.norm().powi(2)
    }
    fn transform_modes(&self, targets: &[usize], op: &DMatrix<Complex64>) -> Result<Self> {
        check_targets(targets, self.modes(), self.cutoff(), op)?;
        let layout = LocalLayout::new(self.modes(), self.cutoff(), targets);
        let amps = apply_local_ket(self.amplitudes(), &layout, op);
        let kept = (amps.norm() - self.norm()).abs() <= tolerances::KET_NORM;
        Ok(FockKet::from_parts(self.modes(), self.cutoff(), amps, self.is_normalized() && kept))
    }
}

impl FockState for FockDensityMatrix {
    fn modes(&self) -> usize {
        FockDensityMatrix::modes(self)
    }
    fn cutoff(&self) -> usize {
        FockDensityMatrix::cutoff(self)
    }
    fn weight(&self) -> f64 {
        self.trace()
    }
    fn transform_modes(&self, targets: &[usize], op: &DMatrix<Complex64>) -> Result<Self> {
        check_targets(targets, self.modes(), self.cutoff(), op)?;
        let layout = LocalLayout::new(self.modes(), self.cutoff(), targets);
        let m = apply_local_density(self.matrix(), &layout, op);
        let out = FockDensityMatrix::from_parts(self.modes(), self.cutoff(), m, false);
        let kept = (out.trace() - self.trace()).abs() <= tolerances::TRACE;
        Ok(FockDensityMatrix::from_parts(
            self.modes(),
            self.cutoff(),
            out.into_matrix(),
            self.is_normalized() && kept,
        ))
    }
}
