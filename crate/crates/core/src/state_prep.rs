//! Input states and the passive/displacement unitaries used to build them.
//!
//! Conventions:
//! - Beam splitter with intensity transmissivity `t` and phase `φ` maps
//!   `|1,0⟩ → √t |1,0⟩ + e^{iφ} √(1−t) |0,1⟩`; `φ` is a relative phase on the
//!   reflected arm and the coupling is otherwise real and symmetric.
//! - Displacement `D(α)` shifts `x` by `√2 Re α` and `p` by `√2 Im α`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::fock::linalg::expm_anti_hermitian;
use crate::fock::{basis_index, FockDensityMatrix, FockKet, FockState};
use crate::tolerances;
use crate::{Error, Result};

/// Shape of the multiphoton admixture in an impure split-photon state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MultiphotonShape {
    /// `|1,1⟩⟨1,1|`.
    #[default]
    Coincidence,
    /// Diagonal Fock populations `(n_A, n_B, weight)`, renormalized to one.
    Populations(Vec<(usize, usize, f64)>),
}

/// Measured composition of an imperfect split-photon state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Impurity {
    pub ideal: f64,
    pub vacuum: f64,
    pub multiphoton: f64,
    #[serde(default)]
    pub multiphoton_shape: MultiphotonShape,
}

impl Impurity {
    pub fn new(ideal: f64, vacuum: f64, multiphoton: f64) -> Self {
        Self {
            ideal,
            vacuum,
            multiphoton,
            multiphoton_shape: MultiphotonShape::Coincidence,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("ideal", self.ideal), ("vacuum", self.vacuum), ("multiphoton", self.multiphoton)] {
            if !(w >= 0.0) {
                return Err(invalid("impurity", format!("{name} weight {w} is negative")));
            }
        }
        let sum = self.ideal + self.vacuum + self.multiphoton;
        if (sum - 1.0).abs() > tolerances::TRACE {
            return Err(invalid("impurity", format!("weights sum to {sum}, not 1")));
        }
        if let MultiphotonShape::Populations(p) = &self.multiphoton_shape {
            if p.is_empty() || p.iter().any(|&(_, _, w)| !(w >= 0.0)) || p.iter().map(|t| t.2).sum::<f64>() <= 0.0 {
                return Err(invalid("multiphoton_shape", "needs nonnegative populations with positive sum"));
            }
        }
        Ok(())
    }

    fn max_photons(&self) -> usize {
        match &self.multiphoton_shape {
            MultiphotonShape::Coincidence => 1,
            MultiphotonShape::Populations(p) => p.iter().map(|&(a, b, _)| a.max(b)).max().unwrap_or(1).max(1),
        }
    }
}

/// A single photon split at a beam splitter of reflectivity `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPhotonSpec {
    pub reflectivity: f64,
    #[serde(default)]
    pub impurity: Option<Impurity>,
}

impl SplitPhotonSpec {
    pub fn pure(reflectivity: f64) -> Self {
        Self {
            reflectivity,
            impurity: None,
        }
    }

    pub fn impure(reflectivity: f64, impurity: Impurity) -> Self {
        Self {
            reflectivity,
            impurity: Some(impurity),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.reflectivity) {
            return Err(invalid("reflectivity", format!("{} not in [0, 1]", self.reflectivity)));
        }
        if let Some(imp) = &self.impurity {
            imp.validate()?;
        }
        Ok(())
    }
}

/// `√(1−R)|1,0⟩ + √R|0,1⟩`.
pub fn split_photon_ket(reflectivity: f64, cutoff: usize) -> Result<FockKet> {
    if !(0.0..=1.0).contains(&reflectivity) {
        return Err(invalid("reflectivity", format!("{reflectivity} not in [0, 1]")));
    }
    if cutoff < 1 {
        return Err(invalid("cutoff", "split photon needs cutoff >= 1"));
    }
    FockKet::from_terms(
        2,
        cutoff,
        &[
            (&[1, 0], Complex64::from((1.0 - reflectivity).sqrt())),
            (&[0, 1], Complex64::from(reflectivity.sqrt())),
        ],
    )
}

/// Two-mode (A, B) split-photon state, pure or mixed with vacuum and
/// multiphoton contributions.
pub fn split_photon(spec: &SplitPhotonSpec, cutoff: usize) -> Result<FockDensityMatrix> {
    spec.validate()?;
    let ideal = FockDensityMatrix::from_ket(&split_photon_ket(spec.reflectivity, cutoff)?);
    let Some(imp) = &spec.impurity else {
        return Ok(ideal);
    };
    if imp.max_photons() > cutoff {
        return Err(invalid("cutoff", format!("multiphoton shape needs cutoff >= {}", imp.max_photons())));
    }
    let multi = match &imp.multiphoton_shape {
        MultiphotonShape::Coincidence => FockDensityMatrix::fock(&[1, 1], cutoff),
        MultiphotonShape::Populations(p) => {
            let total: f64 = p.iter().map(|t| t.2).sum();
            let dim = ideal.dim();
            let mut m = DMatrix::zeros(dim, dim);
            for &(a, b, w) in p {
                let i = basis_index(&[a, b], cutoff);
                m[(i, i)] += Complex64::from(w / total);
            }
            FockDensityMatrix::new(2, cutoff, m)?
        }
    };
    FockDensityMatrix::mixture(&[
        (imp.ideal, &ideal),
        (imp.vacuum, &FockDensityMatrix::vacuum(2, cutoff)),
        (imp.multiphoton, &multi),
    ])
}

/// Two-mode squeezed vacuum with squeezing `r`, truncated at `cutoff`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmsvSpec {
    pub r: f64,
    pub cutoff: usize,
}

/// `Σ λⁿ|n,n⟩` with `λ = tanh r`, renormalized over the truncated space.
/// The untruncated prefactor is `√(1−λ²)`.
pub fn tmsv(spec: &TmsvSpec) -> Result<FockKet> {
    if !(spec.r >= 0.0) || !spec.r.is_finite() {
        return Err(invalid("r", format!("squeezing {} must be a finite value >= 0", spec.r)));
    }
    let lambda = spec.r.tanh();
    let c = spec.cutoff;
    let mut amps = DVector::zeros((c + 1) * (c + 1));
    let mut norm2 = 0.0;
    let mut coeff = 1.0;
    for n in 0..=c {
        amps[basis_index(&[n, n], c)] = Complex64::from(coeff);
        norm2 += coeff * coeff;
        coeff *= lambda;
    }
    amps /= Complex64::from(norm2.sqrt());
    FockKet::new(2, c, amps)
}

/// Weight `Σ_{n>cutoff} (1−λ²) λ^{2n} = λ^{2(cutoff+1)}` lost by truncating
/// the squeezed vacuum.
pub fn tmsv_tail_weight(r: f64, cutoff: usize) -> f64 {
    r.tanh().powi(2 * (cutoff as i32 + 1))
}

/// Two-mode beam-splitter unitary on a pair of modes truncated at `cutoff`.
///
/// The exact unitary is block diagonal in total photon number; every block
/// is exponentiated exactly and the per-mode truncation applied afterwards.
/// States with at most `cutoff` photons in the pair are mapped exactly;
/// larger components leak out of the truncated space.
pub fn beam_splitter_unitary(cutoff: usize, transmissivity: f64, phase: f64) -> Result<DMatrix<Complex64>> {
    if !(0.0..=1.0).contains(&transmissivity) {
        return Err(invalid("transmissivity", format!("{transmissivity} not in [0, 1]")));
    }
    let theta = transmissivity.sqrt().acos();
    let coupling = Complex64::from_polar(theta, phase);
    let base = cutoff + 1;
    let mut u = DMatrix::zeros(base * base, base * base);
    for total in 0..=2 * cutoff {
        // block basis |n, total-n⟩, n = 0..=total
        let size = total + 1;
        let mut k = DMatrix::<Complex64>::zeros(size, size);
        for n in 0..=total {
            let m = total - n;
            // θ e^{iφ} a_i a_j† : |n,m⟩ → √n √(m+1) |n-1, m+1⟩
            if n > 0 {
                k[(n - 1, n)] += coupling * ((n * (m + 1)) as f64).sqrt();
            }
            // −θ e^{−iφ} a_i† a_j : |n,m⟩ → √(n+1) √m |n+1, m-1⟩
            if m > 0 {
                k[(n + 1, n)] -= coupling.conj() * (((n + 1) * m) as f64).sqrt();
            }
        }
        let block = expm_anti_hermitian(&k)?;
        for n_in in 0..=total {
            let m_in = total - n_in;
            if n_in > cutoff || m_in > cutoff {
                continue;
            }
            for n_out in 0..=total {
                let m_out = total - n_out;
                if n_out > cutoff || m_out > cutoff {
                    continue;
                }
                u[(n_out * base + m_out, n_in * base + m_in)] = block[(n_out, n_in)];
            }
        }
    }
    Ok(u)
}

/// Beam splitter between modes `i` and `j`.
pub fn beam_splitter<S: FockState>(state: &S, i: usize, j: usize, transmissivity: f64, phase: f64) -> Result<S> {
    if i == j {
        return Err(Error::InvalidModes(format!("beam splitter needs two distinct modes, got {i} twice")));
    }
    let u = beam_splitter_unitary(state.cutoff(), transmissivity, phase)?;
    state.transform_modes(&[i, j], &u)
}

fn generalized_laguerre(n: usize, alpha: usize, x: f64) -> f64 {
    let a = alpha as f64;
    let (mut prev, mut cur) = (1.0, 1.0 + a - x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * cur - (kf + a) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Matrix elements `⟨m|D(α)|n⟩` of the untruncated displacement for
/// `m < rows`, `n < cols`.
pub fn displacement_matrix(alpha: Complex64, rows: usize, cols: usize) -> DMatrix<Complex64> {
    let x = alpha.norm_sqr();
    let gauss = (-x / 2.0).exp();
    DMatrix::from_fn(rows, cols, |m, n| {
        let (lo, hi) = (m.min(n), m.max(n));
        // √(lo!/hi!)
        let ratio = ((lo + 1)..=hi).fold(1.0, |acc, k| acc / (k as f64).sqrt());
        let power = if m >= n { alpha } else { -alpha.conj() }.powu((hi - lo) as u32);
        power * (ratio * gauss * generalized_laguerre(lo, hi - lo, x))
    })
}

/// Displacement generated by the truncated `α a† − α* a`; exactly unitary
/// on the truncated space, so `D(α)D(−α)` is the identity to rounding.
pub fn displacement_unitary(alpha: Complex64, cutoff: usize) -> Result<DMatrix<Complex64>> {
    let d = cutoff + 1;
    let mut k = DMatrix::<Complex64>::zeros(d, d);
    for n in 0..cutoff {
        let s = ((n + 1) as f64).sqrt();
        k[(n + 1, n)] = alpha * s;
        k[(n, n + 1)] = -alpha.conj() * s;
    }
    expm_anti_hermitian(&k)
}

/// Displacement `D(α)` on mode `i`.
///
/// Applies [`displacement_unitary`]. Its deviation from the exact operator
/// is governed by the weight the exact matrix elements push past the
/// cutoff; when that leak exceeds [`tolerances::DISPLACEMENT_LEAK`] the call
/// fails with [`Error::DisplacementOutOfRange`]. For the vacuum at cutoff 12
/// this admits |α| up to about 1.5.
pub fn displacement<S: FockState>(state: &S, i: usize, alpha: Complex64) -> Result<S> {
    let c = state.cutoff();
    let exact = state.transform_modes(&[i], &displacement_matrix(alpha, c + 1, c + 1))?;
    let leak = state.weight() - exact.weight();
    if leak > tolerances::DISPLACEMENT_LEAK {
        return Err(Error::DisplacementOutOfRange {
            alpha: alpha.norm(),
            leak,
            cutoff: c,
        });
    }
    state.transform_modes(&[i], &displacement_unitary(alpha, c)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{c64, partial_trace};

    #[test]
    fn balanced_split_photon() {
        let psi = split_photon_ket(0.5, 1).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((psi.amplitude(&[1, 0]).re - s).abs() < 1e-15);
        assert!((psi.amplitude(&[0, 1]).re - s).abs() < 1e-15);
    }

    #[test]
    fn zero_reflectivity_is_product() {
        let psi = split_photon_ket(0.0, 1).unwrap();
        assert_eq!(psi, FockKet::basis(&[1, 0], 1));
    }

    #[test]
    fn reduced_state_of_balanced_split_photon() {
        // hand expansion: Tr_B of (|10⟩+|01⟩)(⟨10|+⟨01|)/2 = diag(1/2, 1/2)
        let rho = split_photon(&SplitPhotonSpec::pure(0.5), 1).unwrap();
        let a = partial_trace(&rho, &[0]).unwrap();
        let want = DMatrix::from_diagonal_element(2, 2, c64(0.5, 0.0));
        assert!((a.matrix() - want).norm() < 1e-15);
    }

    #[test]
    fn impurity_mixture_composition() {
        let spec = SplitPhotonSpec::impure(0.5, Impurity::new(0.806, 0.183, 0.011));
        let rho = split_photon(&spec, 2).unwrap();
        rho.validate().unwrap();
        assert!((rho.element(&[0, 0], &[0, 0]).re - 0.183).abs() < 1e-15);
        assert!((rho.element(&[1, 1], &[1, 1]).re - 0.011).abs() < 1e-15);
        assert!((rho.element(&[1, 0], &[0, 1]).re - 0.403).abs() < 1e-15);
    }

    #[test]
    fn custom_multiphoton_shape() {
        let mut imp = Impurity::new(0.9, 0.05, 0.05);
        imp.multiphoton_shape = MultiphotonShape::Populations(vec![(2, 0, 1.0), (0, 2, 1.0)]);
        let rho = split_photon(&SplitPhotonSpec::impure(0.5, imp.clone()), 2).unwrap();
        assert!((rho.element(&[2, 0], &[2, 0]).re - 0.025).abs() < 1e-15);
        assert!(split_photon(&SplitPhotonSpec::impure(0.5, imp), 1).is_err());
    }

    #[test]
    fn split_photon_rejects_bad_input() {
        assert!(split_photon(&SplitPhotonSpec::pure(1.5), 1).is_err());
        let neg = SplitPhotonSpec::impure(0.5, Impurity::new(1.1, -0.1, 0.0));
        assert!(split_photon(&neg, 1).is_err());
        let short = SplitPhotonSpec::impure(0.5, Impurity::new(0.5, 0.2, 0.1));
        assert!(split_photon(&short, 1).is_err());
    }

    #[test]
    fn tmsv_vacuum_and_ratio() {
        let v = tmsv(&TmsvSpec { r: 0.0, cutoff: 4 }).unwrap();
        assert_eq!(v, FockKet::basis(&[0, 0], 4));
        let s = tmsv(&TmsvSpec { r: 1.01, cutoff: 5 }).unwrap();
        let ratio = s.amplitude(&[1, 1]).re / s.amplitude(&[0, 0]).re;
        assert!((ratio - 1.01f64.tanh()).abs() < 1e-15);
        assert!((ratio - 0.7658).abs() < 1e-4);
        assert!(tmsv(&TmsvSpec { r: -0.1, cutoff: 3 }).is_err());
    }

    #[test]
    fn tmsv_mean_photon_number() {
        // closed form sinh²r versus the truncated numerical expectation
        let r: f64 = 0.71;
        let s = tmsv(&TmsvSpec { r, cutoff: 5 }).unwrap();
        let n = s.mean_photon_number(1);
        let l2 = r.tanh().powi(2);
        let truncated: f64 = (0..=5).map(|k| k as f64 * l2.powi(k)).sum::<f64>() / (0..=5).map(|k| l2.powi(k)).sum::<f64>();
        assert!((n - truncated).abs() < 1e-12);
        // the shortfall is the tail's contribution, bounded by tail · (mean beyond the cutoff)
        let tail = tmsv_tail_weight(r, 5);
        assert!(r.sinh().powi(2) - n > 0.0);
        assert!(r.sinh().powi(2) - n < tail * (6.0 + l2 / (1.0 - l2)));
        let big = tmsv(&TmsvSpec { r, cutoff: 30 }).unwrap();
        assert!((big.mean_photon_number(0) - r.sinh().powi(2)).abs() < 1e-10);
    }

    #[test]
    fn tmsv_tail_below_bound_at_default_cutoff() {
        for r in [0.0f64, 0.3, 0.71, 1.01] {
            let direct: f64 = (6..400).map(|n| (1.0 - r.tanh().powi(2)) * r.tanh().powi(2 * n)).sum();
            assert!((tmsv_tail_weight(r, 5) - direct).abs() < 1e-12);
        }
        // tail λ^{2(c+1)} < 1e-4 first holds at c = 9 for r = 0.71 and c = 17 for r = 1.01
        assert!(tmsv_tail_weight(0.71, 9) < 1e-4 && tmsv_tail_weight(0.71, 8) >= 1e-4);
        assert!(tmsv_tail_weight(1.01, 17) < 1e-4 && tmsv_tail_weight(1.01, 16) >= 1e-4);
    }

    #[test]
    fn beam_splitter_single_photon_and_identity() {
        let psi = FockKet::basis(&[1, 0], 2);
        let out = beam_splitter(&psi, 0, 1, 0.5, 0.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out.amplitude(&[1, 0]) - c64(s, 0.0)).norm() < 1e-14);
        assert!((out.amplitude(&[0, 1]) - c64(s, 0.0)).norm() < 1e-14);
        let id = beam_splitter(&psi, 0, 1, 1.0, 0.3).unwrap();
        assert!((id.amplitudes() - psi.amplitudes()).norm() < 1e-14);
        assert!(beam_splitter(&psi, 1, 1, 0.5, 0.0).is_err());
    }

    #[test]
    fn hong_ou_mandel() {
        // two-photon algebra: a†b† → (a†² − b†²)/2 → (|2,0⟩ − |0,2⟩)/√2
        let out = beam_splitter(&FockKet::basis(&[1, 1], 2), 0, 1, 0.5, 0.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(out.amplitude(&[1, 1]).norm() < 1e-14);
        assert!((out.amplitude(&[2, 0]).norm() - s).abs() < 1e-14);
        assert!((out.amplitude(&[0, 2]).norm() - s).abs() < 1e-14);
        assert!((out.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beam_splitter_phase_on_reflected_arm() {
        let out = beam_splitter(&FockKet::basis(&[1, 0], 1), 0, 1, 0.25, 0.7).unwrap();
        assert!((out.amplitude(&[1, 0]) - c64(0.5, 0.0)).norm() < 1e-14);
        assert!((out.amplitude(&[0, 1]) - Complex64::from_polar(0.75f64.sqrt(), 0.7)).norm() < 1e-14);
    }

    #[test]
    fn displacement_identity_and_moments() {
        let vac = FockKet::basis(&[0], 12);
        let same = displacement(&vac, 0, c64(0.0, 0.0)).unwrap();
        assert!((same.amplitudes() - vac.amplitudes()).norm() < 1e-15);
        let alpha = c64(0.6, -0.3);
        let coh = displacement(&vac, 0, alpha).unwrap();
        assert!((coh.mean_photon_number(0) - alpha.norm_sqr()).abs() < 1e-9);
        // coherent-state amplitudes e^{-|α|²/2} αⁿ/√n!
        let mut fact = 1.0;
        for n in 0..6 {
            if n > 0 {
                fact *= n as f64;
            }
            let want = alpha.powu(n as u32) * ((-alpha.norm_sqr() / 2.0).exp() / fact.sqrt());
            assert!((coh.amplitude(&[n]) - want).norm() < 1e-9);
        }
    }

    #[test]
    fn displacement_composition() {
        for alpha in [c64(1.0, 0.0), c64(0.0, -1.0), c64(0.5, 0.6)] {
            for n in 0..3 {
                let psi = FockKet::basis(&[n], 12);
                let there = displacement(&psi, 0, alpha).unwrap();
                let back = displacement(&there, 0, -alpha).unwrap();
                let err = (back.amplitudes() - psi.amplitudes()).norm();
                assert!(err < 1e-8, "alpha {alpha}, n {n}, err {err}");
            }
        }
    }

    #[test]
    fn displacement_matches_generator_exponential() {
        // independent route: exponentiate α a† − α* a in a much larger space
        let alpha = c64(0.8, 0.4);
        let big = 60;
        let mut k = DMatrix::<Complex64>::zeros(big, big);
        for n in 0..big - 1 {
            let s = ((n + 1) as f64).sqrt();
            k[(n + 1, n)] = alpha * s;
            k[(n, n + 1)] = -alpha.conj() * s;
        }
        let u = expm_anti_hermitian(&k).unwrap();
        let d = displacement_matrix(alpha, 10, 10);
        for m in 0..10 {
            for n in 0..10 {
                assert!((u[(m, n)] - d[(m, n)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn displacement_tracks_exact_elements_below_bound() {
        let psi = FockKet::basis(&[1], 12);
        let alpha = c64(0.7, 0.2);
        let got = displacement(&psi, 0, alpha).unwrap();
        let exact = displacement_matrix(alpha, 13, 13).column(1).into_owned();
        assert!((got.amplitudes() - exact).norm() < 1e-5);
    }

    #[test]
    fn displacement_rejects_large_amplitude() {
        let vac = FockKet::basis(&[0], 5);
        assert!(matches!(
            displacement(&vac, 0, c64(2.0, 0.0)),
            Err(Error::DisplacementOutOfRange { .. })
        ));
    }
}
