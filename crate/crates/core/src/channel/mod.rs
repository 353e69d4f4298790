//! The continuous-variable teleportation channel acting on one mode.
//!
//! At gain `g` and resource squeezing `r` the channel is phase-insensitive
//! and Gaussian: it scales quadratures by `g` and adds noise of variance
//! `σ² = [(1+g)²e^{−2r} + (1−g)²e^{2r}]/4` (vacuum variance 1/2). It is
//! realized exactly as a pure loss `η` followed by a quantum-limited
//! amplifier `G` with `ηG = g²`. At `g = tanh r` the amplifier drops out
//! and the channel is pure loss with `η = g²`.

mod mc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::fock::{basis_digits, basis_dim, basis_index, FockDensityMatrix};
use crate::tolerances;
use crate::{Error, Result};

pub use mc::{mc_teleport_oracle, TeleportSimulator};

/// Teleportation setting plus optional transmissivities before and after.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub r: f64,
    pub g: f64,
    #[serde(default = "unit")]
    pub pre_loss: f64,
    #[serde(default = "unit")]
    pub post_loss: f64,
}

fn unit() -> f64 {
    1.0
}

impl ChannelSpec {
    pub fn new(r: f64, g: f64) -> Self {
        Self {
            r,
            g,
            pre_loss: 1.0,
            post_loss: 1.0,
        }
    }

    /// Gain `g = tanh r`, where the channel becomes pure loss.
    pub fn optimal(r: f64) -> Self {
        Self::new(r, r.tanh())
    }

    pub fn with_losses(self, pre_loss: f64, post_loss: f64) -> Self {
        Self {
            pre_loss,
            post_loss,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(invalid("r", format!("{} must be a finite value >= 0", self.r)));
        }
        if !(self.g >= 0.0) || !self.g.is_finite() {
            return Err(invalid("g", format!("{} must be a finite value >= 0", self.g)));
        }
        for (name, t) in [("pre_loss", self.pre_loss), ("post_loss", self.post_loss)] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(invalid(name, format!("transmissivity {t} not in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Loss-then-amplifier decomposition of a phase-insensitive channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dilation {
    pub eta: f64,
    #[serde(rename = "G")]
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianChannelParams {
    pub amplitude_gain: f64,
    pub added_noise: f64,
    pub dilation: Dilation,
}

/// Teleportation noise `σ²` at gain `g` (vacuum units 1/2).
pub fn teleportation_noise(r: f64, g: f64) -> f64 {
    ((1.0 + g).powi(2) * (-2.0 * r).exp() + (1.0 - g).powi(2) * (2.0 * r).exp()) / 4.0
}

/// Folds losses into the teleportation channel and decomposes the result.
pub fn channel_params(spec: &ChannelSpec) -> Result<GaussianChannelParams> {
    spec.validate()?;
    let (g, e1, e2) = (spec.g, spec.pre_loss, spec.post_loss);
    let tau = e2 * g * g * e1;
    let noise = e2 * g * g * (1.0 - e1) / 2.0 + e2 * teleportation_noise(spec.r, g) + (1.0 - e2) / 2.0;
    let mut gain = (2.0 * noise + 1.0 + tau) / 2.0;
    if (gain - 1.0).abs() <= 1e-12 {
        gain = 1.0;
    }
    Ok(GaussianChannelParams {
        amplitude_gain: tau.sqrt(),
        added_noise: noise,
        dilation: Dilation {
            eta: (tau / gain).min(1.0),
            gain,
        },
    })
}

/// `⟨n−l|B_l|n⟩ = √(C(n,l) η^{n−l} (1−η)^l)` for `l = 0..=n`: the amplitudes
/// a beam splitter of transmissivity `η` produces from `|n⟩ ⊗ |0⟩` in
/// `|n−l⟩ ⊗ |l⟩`.
pub fn loss_amplitudes(eta: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut binom = 1.0;
    for l in 0..=n {
        out.push((binom * eta.powi((n - l) as i32) * (1.0 - eta).powi(l as i32)).sqrt());
        binom *= (n - l) as f64 / (l + 1) as f64;
    }
    out
}

/// Applies `Σ_k K_k ρ K_k†` for Kraus operators that shift the photon
/// number of `mode` by `shift(k)`, with amplitudes `table[n][k]` and output
/// cutoff `c_out`. Only nonzero entries of `rho` are visited.
fn apply_number_shift_kraus(
    rho: &FockDensityMatrix,
    mode: usize,
    c_out: usize,
    table: &[Vec<f64>],
    raise: bool,
) -> FockDensityMatrix {
    let (modes, c_in) = (rho.modes(), rho.cutoff());
    let stride = (c_out + 1).pow((modes - 1 - mode) as u32);
    let dim = basis_dim(modes, c_out);
    let lifted: Vec<(usize, usize)> = (0..rho.dim())
        .map(|i| {
            let d = basis_digits(i, modes, c_in);
            (basis_index(&d, c_out), d[mode])
        })
        .collect();
    let m = rho.matrix();
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for (j, &(col, nc)) in lifted.iter().enumerate() {
        for (i, &(row, nr)) in lifted.iter().enumerate() {
            let z = m[(i, j)];
            if z == Complex64::default() {
                continue;
            }
            let kmax = table[nr].len().min(table[nc].len());
            for k in 0..kmax {
                let w = table[nr][k] * table[nc][k];
                let (r, c) = if raise {
                    (row + k * stride, col + k * stride)
                } else {
                    (row - k * stride, col - k * stride)
                };
                out[(r, c)] += z * w;
            }
        }
    }
    let out = FockDensityMatrix::from_parts(modes, c_out, out, false);
    let kept = (out.trace() - rho.trace()).abs() <= tolerances::TRACE;
    let normalized = rho.is_normalized() && kept;
    FockDensityMatrix::from_parts(modes, c_out, out.into_matrix(), normalized)
}

/// Pure loss of transmissivity `eta` on `mode`: the beam-splitter dilation
/// with a vacuum ancilla, traced over the ancilla. Applied through its
/// closed-form amplitudes ([`loss_amplitudes`]), which is exact at any
/// cutoff and avoids materializing the ancilla.
pub fn pure_loss(rho: &FockDensityMatrix, mode: usize, eta: f64) -> Result<FockDensityMatrix> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid("eta", format!("{eta} not in [0, 1]")));
    }
    if mode >= rho.modes() {
        return Err(Error::InvalidModes(format!("mode {mode} out of range for {} modes", rho.modes())));
    }
    if eta == 1.0 {
        return Ok(rho.clone());
    }
    let table: Vec<Vec<f64>> = (0..=rho.cutoff()).map(|n| loss_amplitudes(eta, n)).collect();
    Ok(apply_number_shift_kraus(rho, mode, rho.cutoff(), &table, false))
}

/// `⟨n+k|A_k|n⟩` for `k = 0..=max_k`: the amplitudes a two-mode squeezer
/// with `cosh²s = G` produces from `|n⟩ ⊗ |0⟩` in `|n+k⟩ ⊗ |k⟩`.
pub fn amplifier_amplitudes(gain: f64, n: usize, max_k: usize) -> Vec<f64> {
    let x = (gain - 1.0) / gain;
    let mut out = Vec::with_capacity(max_k + 1);
    let mut c = gain.powf(-((n + 1) as f64) / 2.0);
    for k in 0..=max_k {
        out.push(c);
        c *= (x * (n + k + 1) as f64 / (k + 1) as f64).sqrt();
    }
    out
}

/// Weight the amplifier sends from `|n⟩` beyond photon number `cutoff`.
pub fn amplifier_tail(gain: f64, n: usize, cutoff: usize) -> f64 {
    if n > cutoff {
        return 1.0;
    }
    let kept: f64 = amplifier_amplitudes(gain, n, cutoff - n).iter().map(|c| c * c).sum();
    (1.0 - kept).max(0.0)
}

/// Smallest cutoff `≥ from` at which every level up to `max_n` loses at
/// most [`tolerances::AMPLIFIER_TAIL`] to truncation.
pub fn amplifier_cutoff(gain: f64, max_n: usize, from: usize) -> Result<usize> {
    let mut c = from.max(max_n);
    loop {
        // the tail grows with n, so the top level decides
        let err = amplifier_tail(gain, max_n, c);
        if err <= tolerances::AMPLIFIER_TAIL {
            return Ok(c);
        }
        if c >= tolerances::MAX_CHANNEL_CUTOFF {
            return Err(Error::CutoffTooSmall {
                cutoff: c,
                error: err,
                bound: tolerances::AMPLIFIER_TAIL,
            });
        }
        c += 1;
    }
}

/// Kraus operators `A_k` of the quantum-limited amplifier as
/// `(cutoff_out+1) × (cutoff_in+1)` matrices.
pub fn amplifier_kraus(gain: f64, cutoff_in: usize, cutoff_out: usize) -> Vec<DMatrix<f64>> {
    let table: Vec<Vec<f64>> = (0..=cutoff_in.min(cutoff_out))
        .map(|n| amplifier_amplitudes(gain, n, cutoff_out - n))
        .collect();
    (0..=cutoff_out)
        .map(|k| {
            DMatrix::from_fn(cutoff_out + 1, cutoff_in + 1, |m, n| {
                if n < table.len() && m == n + k {
                    table[n][k]
                } else {
                    0.0
                }
            })
        })
        .collect()
}

/// Quantum-limited amplifier of gain `G ≥ 1` on `mode`. The cutoff of every
/// mode is raised to [`amplifier_cutoff`] so the discarded weight stays
/// below [`tolerances::AMPLIFIER_TAIL`].
pub fn amplifier(rho: &FockDensityMatrix, mode: usize, gain: f64) -> Result<FockDensityMatrix> {
    if !(gain >= 1.0) || !gain.is_finite() {
        return Err(invalid("G", format!("amplifier gain {gain} must be >= 1")));
    }
    if mode >= rho.modes() {
        return Err(Error::InvalidModes(format!("mode {mode} out of range for {} modes", rho.modes())));
    }
    if gain == 1.0 {
        return Ok(rho.clone());
    }
    let max_n = rho.max_occupied(mode, 0.0);
    let c = amplifier_cutoff(gain, max_n, rho.cutoff())?;
    let table: Vec<Vec<f64>> = (0..=rho.cutoff())
        .map(|n| if n <= max_n { amplifier_amplitudes(gain, n, c - n) } else { Vec::new() })
        .collect();
    Ok(apply_number_shift_kraus(rho, mode, c, &table, true))
}

/// Teleports `mode` of `rho` through the channel described by `spec`.
///
/// The output cutoff equals the input cutoff at optimal gain and is raised
/// as needed otherwise (see [`amplifier`]).
pub fn apply_channel(rho: &FockDensityMatrix, mode: usize, spec: &ChannelSpec) -> Result<FockDensityMatrix> {
    if (rho.trace() - 1.0).abs() > tolerances::TRACE {
        return Err(Error::NotNormalized(rho.trace()));
    }
    let p = channel_params(spec)?;
    let lossy = pure_loss(rho, mode, p.dilation.eta)?;
    let out = amplifier(&lossy, mode, p.dilation.gain)?;
    let lost = 1.0 - out.trace();
    if lost.abs() > 1e-8 {
        return Err(Error::Invariant(format!("channel output trace deviates from 1 by {lost:e}")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{c64, linalg::expm_anti_hermitian, FockKet};
    use crate::state_prep::{split_photon, SplitPhotonSpec};
    use proptest::prelude::*;

    fn binomial(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
    }

    /// Independent pure-loss oracle: binomial Kraus operators.
    fn loss_oracle(rho: &FockDensityMatrix, eta: f64) -> DMatrix<Complex64> {
        let c = rho.cutoff();
        let mut out = DMatrix::zeros(c + 1, c + 1);
        for l in 0..=c {
            let b = DMatrix::from_fn(c + 1, c + 1, |m, n| {
                if n >= l && m == n - l {
                    c64((binomial(n, l) * eta.powi((n - l) as i32) * (1.0 - eta).powi(l as i32)).sqrt(), 0.0)
                } else {
                    c64(0.0, 0.0)
                }
            });
            out += &b * rho.matrix() * b.adjoint();
        }
        out
    }

    #[test]
    fn optimal_gain_parameters() {
        let p = channel_params(&ChannelSpec::optimal(1.01)).unwrap();
        assert_eq!(p.dilation.gain, 1.0);
        // 0.5865 is 0.7658², i.e. g rounded to four places first
        assert!((p.dilation.eta - 1.01f64.tanh().powi(2)).abs() < 1e-15);
        assert!((p.dilation.eta - 0.5865).abs() < 2e-4);
        let g = 1.01f64.tanh();
        assert!((p.added_noise - (1.0 - g * g) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn classical_limit_parameters() {
        let p = channel_params(&ChannelSpec::new(0.0, 1.0)).unwrap();
        assert!((teleportation_noise(0.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((p.dilation.gain - 2.0).abs() < 1e-15);
        assert!((p.dilation.eta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_gain_forgets_the_input() {
        let spec = ChannelSpec::new(0.5, 0.0);
        let a = apply_channel(&FockDensityMatrix::fock(&[0], 3), 0, &spec).unwrap();
        let b = apply_channel(&FockDensityMatrix::fock(&[3], 3), 0, &spec).unwrap();
        assert_eq!(a.cutoff(), b.cutoff());
        assert!((a.matrix() - b.matrix()).norm() < 1e-12);
        // thermal with quadrature variance σ², i.e. n̄ = σ² − 1/2 = sinh²r
        assert!((a.mean_photon_number(0) - (teleportation_noise(0.5, 0.0) - 0.5)).abs() < 1e-8);
        assert!((a.mean_photon_number(0) - 0.5f64.sinh().powi(2)).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(channel_params(&ChannelSpec::new(-0.1, 0.5)).is_err());
        assert!(channel_params(&ChannelSpec::new(0.1, -0.5)).is_err());
        assert!(channel_params(&ChannelSpec::new(0.1, 0.5).with_losses(0.0, 1.0)).is_err());
        assert!(channel_params(&ChannelSpec::new(0.1, 0.5).with_losses(1.0, 1.2)).is_err());
        let unnormalized = FockDensityMatrix::new_unnormalized(1, 1, DMatrix::identity(2, 2)).unwrap();
        assert!(apply_channel(&unnormalized, 0, &ChannelSpec::optimal(0.3)).is_err());
    }

    #[test]
    fn loss_matches_binomial_oracle() {
        let s = 0.5f64.sqrt();
        let psi = FockKet::from_terms(1, 4, &[(&[1], c64(s, 0.0)), (&[4], c64(0.0, s))]).unwrap();
        let rho = FockDensityMatrix::from_ket(&psi);
        let got = pure_loss(&rho, 0, 0.37).unwrap();
        assert!((got.matrix() - loss_oracle(&rho, 0.37)).norm() < 1e-13);
    }

    #[test]
    fn loss_equals_beam_splitter_dilation() {
        use crate::fock::{partial_trace, tensor};
        use crate::state_prep::beam_splitter;
        let rho = split_photon(&SplitPhotonSpec::impure(0.4, crate::state_prep::Impurity::new(0.8, 0.1, 0.1)), 3).unwrap();
        let anc = tensor(&rho, &FockDensityMatrix::vacuum(1, 3)).unwrap();
        let mixed = beam_splitter(&anc, 1, 2, 0.6, 0.0).unwrap();
        let dilated = partial_trace(&mixed, &[0, 1]).unwrap();
        let got = pure_loss(&rho, 1, 0.6).unwrap();
        assert!((got.matrix() - dilated.matrix()).camax() < 1e-13);
    }

    #[test]
    fn amplifier_is_the_two_mode_squeezer_dilation() {
        // ⟨n+k, k| exp[s(a†b† − ab)] |n, 0⟩ within the invariant block n_a − n_b = n
        let gain: f64 = 1.3;
        let s = gain.sqrt().acosh();
        for n in 0..3 {
            let size = 80;
            let mut k = DMatrix::<Complex64>::zeros(size, size);
            for j in 0..size - 1 {
                // |n+j, j⟩ → √((n+j+1)(j+1)) |n+j+1, j+1⟩
                let amp = s * (((n + j + 1) * (j + 1)) as f64).sqrt();
                k[(j + 1, j)] = c64(amp, 0.0);
                k[(j, j + 1)] = c64(-amp, 0.0);
            }
            let u = expm_anti_hermitian(&k).unwrap();
            let want = amplifier_amplitudes(gain, n, 6);
            for (kk, w) in want.iter().enumerate() {
                assert!((u[(kk, 0)].re - w).abs() < 1e-10, "n {n} k {kk}");
            }
        }
    }

    #[test]
    fn kraus_completeness_on_input_space() {
        for gain in [1.0, 1.2, 2.0, 2.44] {
            let c_in = 3;
            let c_out = amplifier_cutoff(gain, c_in, c_in).unwrap();
            let ops = amplifier_kraus(gain, c_in, c_out);
            let sum = ops.iter().fold(DMatrix::<f64>::zeros(c_in + 1, c_in + 1), |acc, a| acc + a.transpose() * a);
            assert!((sum - DMatrix::identity(c_in + 1, c_in + 1)).norm() < 1e-8, "G {gain}");
        }
    }

    #[test]
    fn amplifier_cutoff_is_tail_driven() {
        assert_eq!(amplifier_cutoff(1.0, 2, 5).unwrap(), 5);
        let c = amplifier_cutoff(2.44, 1, 1).unwrap();
        assert!(amplifier_tail(2.44, 1, c) <= tolerances::AMPLIFIER_TAIL);
        assert!(amplifier_tail(2.44, 1, c - 1) > tolerances::AMPLIFIER_TAIL);
        assert!(matches!(amplifier_cutoff(50.0, 5, 5), Err(Error::CutoffTooSmall { .. })));
    }

    #[test]
    fn amplifier_of_vacuum_is_thermal() {
        let gain = 1.5;
        let out = amplifier(&FockDensityMatrix::vacuum(1, 2), 0, gain).unwrap();
        let nbar = gain - 1.0;
        for n in 0..=out.cutoff() {
            let want = nbar.powi(n as i32) / (1.0 + nbar).powi(n as i32 + 1);
            assert!((out.element(&[n], &[n]).re - want).abs() < 1e-12);
        }
    }

    fn eq1_expected(g: f64) -> [(usize, usize, usize, usize, f64); 5] {
        // (a, d, a', d', value) over the qubit block of the swapped state
        [
            (0, 0, 0, 0, (1.0 - g * g) / 2.0),
            (0, 1, 0, 1, g * g / 2.0),
            (1, 0, 1, 0, 0.5),
            (1, 0, 0, 1, g / 2.0),
            (0, 1, 1, 0, g / 2.0),
        ]
    }

    #[test]
    fn optimal_gain_swaps_split_photon() {
        for r in [0.3, 0.71, 1.01] {
            let g = f64::tanh(r);
            let rho = split_photon(&SplitPhotonSpec::pure(0.5), 5).unwrap();
            let out = apply_channel(&rho, 1, &ChannelSpec::optimal(r)).unwrap();
            let mut want = DMatrix::<Complex64>::zeros(36, 36);
            for (a, d, a2, d2, v) in eq1_expected(g) {
                want[(basis_index(&[a, d], 5), basis_index(&[a2, d2], 5))] = c64(v, 0.0);
            }
            assert!((out.matrix() - want).camax() < 1e-8, "r {r}");
        }
    }

    #[test]
    fn large_squeezing_approaches_identity() {
        let rho = split_photon(&SplitPhotonSpec::pure(0.5), 1).unwrap();
        let out = apply_channel(&rho, 1, &ChannelSpec::optimal(8.0)).unwrap();
        assert!((out.matrix() - rho.matrix()).camax() < 1e-6);
    }

    #[test]
    fn optimal_gain_is_pure_loss_on_spanning_inputs() {
        let c = 2;
        let mut inputs = Vec::new();
        for m in 0..=c {
            inputs.push(FockKet::basis(&[m], c));
            for n in m + 1..=c {
                let s = 0.5f64.sqrt();
                inputs.push(FockKet::from_terms(1, c, &[(&[m], c64(s, 0.0)), (&[n], c64(s, 0.0))]).unwrap());
                inputs.push(FockKet::from_terms(1, c, &[(&[m], c64(s, 0.0)), (&[n], c64(0.0, s))]).unwrap());
            }
        }
        assert_eq!(inputs.len(), (c + 1) * (c + 1));
        for r in [0.3, 0.71, 1.01] {
            for psi in &inputs {
                let rho = FockDensityMatrix::from_ket(psi);
                let got = apply_channel(&rho, 0, &ChannelSpec::optimal(r)).unwrap();
                let want = loss_oracle(&rho, r.tanh().powi(2));
                assert!((got.matrix() - want).camax() < 1e-9);
            }
        }
    }

    #[test]
    fn folded_losses_equal_explicit_sequence() {
        let rho = split_photon(&SplitPhotonSpec::pure(0.5), 2).unwrap();
        for (r, g, e1, e2) in [(0.71, 0.63, 0.9, 0.8), (1.01, 0.79, 0.7, 0.95), (0.3, 1.1, 0.85, 0.85)] {
            let folded = apply_channel(&rho, 1, &ChannelSpec::new(r, g).with_losses(e1, e2)).unwrap();
            let step = pure_loss(&rho, 1, e1).unwrap();
            let step = apply_channel(&step, 1, &ChannelSpec::new(r, g)).unwrap();
            let step = pure_loss(&step, 1, e2).unwrap();
            let c = folded.cutoff().max(step.cutoff());
            let diff = folded.embed(c).unwrap().matrix() - step.embed(c).unwrap().matrix();
            assert!(diff.camax() < 1e-8, "({r}, {g}, {e1}, {e2}): {}", diff.camax());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn parameters_respect_quantum_limit(
            r in 0.0f64..2.0, g in 0.0f64..1.5, e1 in 0.05f64..=1.0, e2 in 0.05f64..=1.0,
        ) {
            let p = channel_params(&ChannelSpec::new(r, g).with_losses(e1, e2)).unwrap();
            let tau = p.amplitude_gain.powi(2);
            prop_assert!(p.added_noise >= (tau - 1.0).abs() / 2.0 - 1e-12);
            prop_assert!(p.dilation.gain >= 1.0);
            prop_assert!(p.dilation.eta > 0.0 && p.dilation.eta <= 1.0);
            prop_assert!((p.dilation.eta * p.dilation.gain - tau).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn output_is_a_state(r in 0.0f64..1.1, g in 0.0f64..1.2, rr in 0.0f64..=1.0) {
            let rho = split_photon(&SplitPhotonSpec::pure(rr), 1).unwrap();
            let out = apply_channel(&rho, 1, &ChannelSpec::new(r, g)).unwrap();
            prop_assert!((out.trace() - 1.0).abs() < 1e-8);
            prop_assert!(crate::fock::linalg::hermiticity_error(out.matrix()) < tolerances::HERMITICITY);
            prop_assert!(out.min_eigenvalue().unwrap() > -tolerances::POSITIVITY);
        }
    }
}
