//! Post-selected two-copy analysis of a swapped state.
//!
//! Two copies `ρ_{A1D1} ⊗ ρ_{A2D2}` are conditioned on exactly one photon
//! on each side, leaving the qubit basis `{A1D1, A1D2, A2D1, A2D2}`. Every
//! quantity depends on the single-copy state only through the
//! `{|00⟩,|01⟩,|10⟩,|11⟩}` block, and on the coherence `d` only through
//! `|d|²`.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::entanglement::log_negativity;
use crate::error::invalid;
use crate::fock::{basis_index, tensor, FockDensityMatrix};
use crate::tolerances;
use crate::{Error, Result};

/// Canonical CHSH angles `(θ_A, θ_A′, θ_D, θ_D′)`.
pub const CANONICAL_ANGLES: (f64, f64, f64, f64) = (
    0.0,
    std::f64::consts::FRAC_PI_4,
    3.0 * std::f64::consts::FRAC_PI_8,
    std::f64::consts::FRAC_PI_8,
);

/// The photon-number block of a two-mode state: populations `p_ad` and
/// the coherence `d = ⟨0_A 1_D|ρ|1_A 0_D⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitBlock {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
    pub d: Complex64,
}

impl QubitBlock {
    pub fn validate(&self) -> Result<()> {
        let slack = 1e-9;
        let ps = [self.p00, self.p01, self.p10, self.p11];
        if ps.iter().any(|p| !(*p >= -slack)) {
            return Err(invalid("block", format!("negative population in {ps:?}")));
        }
        if ps.iter().sum::<f64>() > 1.0 + slack {
            return Err(invalid("block", "populations sum above 1"));
        }
        if self.d.norm_sqr() > self.p01 * self.p10 + slack {
            return Err(invalid("block", "coherence exceeds sqrt(p01 p10)"));
        }
        Ok(())
    }

    /// Success probability `P = 2(p00 p11 + p01 p10)`.
    pub fn success_probability(&self) -> f64 {
        2.0 * (self.p00 * self.p11 + self.p01 * self.p10)
    }

    /// `(x, y) = (2 p01 p10 / P, 2|d|² / P)`.
    pub fn xy(&self) -> Result<(f64, f64)> {
        let p = self.success_probability();
        if p <= 0.0 {
            return Err(Error::NoPostSelection);
        }
        Ok((2.0 * self.p01 * self.p10 / p, 2.0 * self.d.norm_sqr() / p))
    }
}

/// Reads the block from a two-mode state; all other elements are ignored.
pub fn extract_qubit_block(rho: &FockDensityMatrix) -> Result<QubitBlock> {
    if rho.modes() != 2 {
        return Err(Error::InvalidModes(format!("need a two-mode state, got {} modes", rho.modes())));
    }
    if rho.cutoff() < 1 {
        return Err(invalid("cutoff", "qubit block needs cutoff >= 1"));
    }
    Ok(QubitBlock {
        p00: rho.element(&[0, 0], &[0, 0]).re,
        p01: rho.element(&[0, 1], &[0, 1]).re,
        p10: rho.element(&[1, 0], &[1, 0]).re,
        p11: rho.element(&[1, 1], &[1, 1]).re,
        d: rho.element(&[0, 1], &[1, 0]),
    })
}

fn unnormalized_ps(block: &QubitBlock) -> Matrix4<Complex64> {
    let a = Complex64::from(block.p00 * block.p11);
    let b = Complex64::from(block.p01 * block.p10);
    let c = Complex64::from(block.d.norm_sqr());
    let z = Complex64::default();
    Matrix4::new(a, z, z, z, z, b, c, z, z, c, b, z, z, z, z, a)
}

/// Post-selected state over `{A1D1, A1D2, A2D1, A2D2}`, stored as two
/// modes (A, D) at cutoff 1 with `A1, D1 ↦ 0` and `A2, D2 ↦ 1`, together
/// with the success probability `P`.
pub fn purify(block: &QubitBlock) -> Result<(FockDensityMatrix, f64)> {
    block.validate()?;
    let p = block.success_probability();
    if p <= 0.0 {
        return Err(Error::NoPostSelection);
    }
    let m = unnormalized_ps(block) / Complex64::from(p);
    let data = DMatrix::from_iterator(4, 4, m.iter().copied());
    Ok((FockDensityMatrix::new(2, 1, data)?, p))
}

/// Two copies of `rho` (modes A1 D1 A2 D2) projected onto one photon per
/// side, without normalization. Cross-checks [`purify`] on explicit states.
pub fn two_copy_projection(rho: &FockDensityMatrix) -> Result<DMatrix<Complex64>> {
    let single = rho.truncate(1)?;
    let pair = tensor(&single, &single)?;
    // basis label (a, d) → digits (A1, D1, A2, D2)
    let digits = |a: usize, d: usize| -> [usize; 4] { [1 - a, 1 - d, a, d] };
    let labels = [(0, 0), (0, 1), (1, 0), (1, 1)];
    Ok(DMatrix::from_fn(4, 4, |i, j| {
        let (ri, ci) = (digits(labels[i].0, labels[i].1), digits(labels[j].0, labels[j].1));
        pair.matrix()[(basis_index(&ri, 1), basis_index(&ci, 1))]
    }))
}

fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, s, -s, c)
}

/// `R(δ, φ)`: rotation by `δ` on A and by `φ` on D.
pub fn rotation_matrix(delta: f64, phi: f64) -> Matrix4<f64> {
    rotation(delta).kronecker(&rotation(phi))
}

/// Coincidence probabilities `P_ij = ⟨A_i D_j|R† ρ_ps R|A_i D_j⟩`.
pub fn coincidence_probabilities(rho_ps: &FockDensityMatrix, theta_a: f64, theta_d: f64) -> Matrix2<f64> {
    let r = rotation_matrix(theta_a, theta_d).map(Complex64::from);
    let rho = Matrix4::from_iterator(rho_ps.matrix().iter().copied());
    let rot = r.adjoint() * rho * r;
    Matrix2::new(rot[(0, 0)].re, rot[(1, 1)].re, rot[(2, 2)].re, rot[(3, 3)].re)
}

/// `E(θ_A, θ_D) = P11 − P12 − P21 + P22` from the rotated state.
pub fn chsh_correlation_matrix(block: &QubitBlock, theta_a: f64, theta_d: f64) -> Result<f64> {
    let (rho_ps, _) = purify(block)?;
    let p = coincidence_probabilities(&rho_ps, theta_a, theta_d);
    Ok(p[(0, 0)] - p[(0, 1)] - p[(1, 0)] + p[(1, 1)])
}

/// `E(θ_A, θ_D) = ½[(1−2x+y) cos 2(θ_A−θ_D) + (1−2x−y) cos 2(θ_A+θ_D)]`.
pub fn chsh_correlation(block: &QubitBlock, theta_a: f64, theta_d: f64) -> Result<f64> {
    block.validate()?;
    let (x, y) = block.xy()?;
    Ok(0.5 * ((1.0 - 2.0 * x + y) * (2.0 * (theta_a - theta_d)).cos() + (1.0 - 2.0 * x - y) * (2.0 * (theta_a + theta_d)).cos()))
}

/// `S = |E(a,d) + E(a′,d) − E(a,d′) + E(a′,d′)|`.
pub fn chsh_s(block: &QubitBlock, angles: (f64, f64, f64, f64)) -> Result<f64> {
    let (a, a2, d, d2) = angles;
    let e = |ta, td| chsh_correlation(block, ta, td);
    Ok((e(a, d)? + e(a2, d)? - e(a, d2)? + e(a2, d2)?).abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct QubitTeleportation {
    /// Normalized output over `{D1, D2}`.
    pub rho_out: Matrix2<Complex64>,
    pub fidelity: f64,
    pub success_probability: f64,
}

/// Post-selected teleportation of `α|X⟩ + β|Y⟩` through two swapped copies.
///
/// Projects `|ψ_in⟩⟨ψ_in| ⊗ ρ_ext` onto `(⟨Y A1| + ⟨X A2|)/√2`, where
/// `ρ_ext` is the unnormalized one-photon-per-side block.
pub fn teleport_qubit(block: &QubitBlock, alpha: Complex64, beta: Complex64) -> Result<QubitTeleportation> {
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > tolerances::QUBIT_NORM {
        return Err(invalid("qubit", format!("|α|² + |β|² = {norm}, not 1")));
    }
    block.validate()?;
    if block.success_probability() <= 0.0 {
        return Err(Error::NoPostSelection);
    }
    let ext = unnormalized_ps(block);
    // input index 0 = X, 1 = Y; ext index = a·2 + d
    let input = [alpha, beta];
    let s = Complex64::from(0.5f64.sqrt());
    // ⟨Ψ| picks (Y, A1) and (X, A2)
    let bell = [(1usize, 0usize), (0, 1)];
    let mut out = Matrix2::<Complex64>::zeros();
    for dr in 0..2 {
        for dc in 0..2 {
            let mut acc = Complex64::default();
            for &(qr, ar) in &bell {
                for &(qc, ac) in &bell {
                    acc += s * input[qr] * ext[(ar * 2 + dr, ac * 2 + dc)] * input[qc].conj() * s;
                }
            }
            out[(dr, dc)] = acc;
        }
    }
    let trace = (out[(0, 0)] + out[(1, 1)]).re;
    let rho_out = out / Complex64::from(trace);
    let psi = nalgebra::Vector2::new(alpha, beta);
    let fidelity = (psi.adjoint() * rho_out * psi)[(0, 0)].re;
    Ok(QubitTeleportation {
        rho_out,
        fidelity,
        success_probability: trace,
    })
}

/// Haar-random qubit `(cos θ/2, e^{iφ} sin θ/2)` with `cos θ` uniform,
/// from two uniform numbers in `[0, 1)`.
pub fn bloch_qubit(u: f64, v: f64) -> (Complex64, Complex64) {
    let cos_t = 1.0 - 2.0 * u;
    let half = cos_t.clamp(-1.0, 1.0).acos() / 2.0;
    (
        Complex64::from(half.cos()),
        Complex64::from_polar(half.sin(), 2.0 * std::f64::consts::PI * v),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostSelectSummary {
    #[serde(rename = "P")]
    pub p: f64,
    pub x: f64,
    pub y: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "E_ps")]
    pub e_ps: f64,
    #[serde(rename = "F_av")]
    pub f_av: f64,
    pub tele_success: f64,
    pub rho_ps: FockDensityMatrix,
}

/// Every post-selected figure of merit of a two-mode state.
pub fn summarize(rho: &FockDensityMatrix) -> Result<PostSelectSummary> {
    let block = extract_qubit_block(rho)?;
    let (rho_ps, p) = purify(&block)?;
    let (x, y) = block.xy()?;
    Ok(PostSelectSummary {
        p,
        x,
        y,
        s: chsh_s(&block, CANONICAL_ANGLES)?,
        e_ps: log_negativity(&rho_ps, &[0])?.log_negativity,
        f_av: (1.0 + x + y) / 3.0,
        tele_success: p / 4.0,
        rho_ps,
    })
}
