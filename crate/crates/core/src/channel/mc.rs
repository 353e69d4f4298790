//! Brute-force teleportation: explicit resource state, Bell measurement by
//! two homodyne detectors, and displacement feedforward.
//!
//! Modes: the input state's modes, then resource modes C and D. A 50:50
//! beam splitter mixes the teleported mode with C; `x` is read on the
//! teleported port and `p` on the C port. D is displaced by
//! `α = g(x + ip)` and takes the teleported mode's place in the output.
//!
//! Outcomes are drawn from a fine grid of the exact joint density (inverse
//! CDF with uniform jitter inside the cell) and every trial is weighted by
//! the ratio of the exact density to the sampling density, so the average
//! is unbiased. Trials run in fixed chunks, each with its own ChaCha stream
//! derived from the seed, and chunks are summed in order: the result does
//! not depend on the number of worker threads.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{pure_loss, ChannelSpec};
use crate::error::invalid;
use crate::fock::{
    apply_local_ket, basis_digits, basis_dim, basis_index, hermitian_eigen, FockDensityMatrix, FockKet, LocalLayout,
};
use crate::state_prep::{beam_splitter, displacement_matrix, tmsv, tmsv_tail_weight, TmsvSpec};
use crate::tomography::hermite::{fill_hermite_functions, quadrature_amplitudes};
use crate::tolerances;
use crate::{Error, Result};

const GRID: usize = 601;
const CHUNK: usize = 256;
/// Largest tolerated mean weight lost to truncation across trials.
const MAX_MEAN_LOSS: f64 = 1e-3;
const MIN_COMPONENT: f64 = 1e-12;

/// One sampled outcome: displaced conditional amplitudes, their importance
/// weight and the conditional weight before displacement.
struct Trial {
    out: DVector<Complex64>,
    weight: f64,
    norm2_before: f64,
}

struct Component {
    /// `phi[(nu·(c+1) + nv, rest)]`: amplitudes after the beam splitter,
    /// with the measured photon numbers in the row and the output in the column.
    phi: DMatrix<Complex64>,
    cdf: Vec<f64>,
    /// Exact density on the grid centres.
    density: Vec<f64>,
    /// `Σ density · dx²`.
    mass: f64,
}

/// Precomputed Bell-measurement statistics for one input state.
pub struct TeleportSimulator {
    spec: ChannelSpec,
    mode: usize,
    modes: usize,
    cutoff: usize,
    components: Vec<Component>,
    component_cdf: Vec<f64>,
    weights: Vec<f64>,
    centres: Vec<f64>,
    step: f64,
    layout: LocalLayout,
    /// Weight lost to truncating the resource and the beam splitter output.
    prepared_loss: f64,
}

impl TeleportSimulator {
    pub fn new(rho: &FockDensityMatrix, mode: usize, spec: &ChannelSpec) -> Result<Self> {
        spec.validate()?;
        if (rho.trace() - 1.0).abs() > tolerances::TRACE {
            return Err(Error::NotNormalized(rho.trace()));
        }
        let (modes, c) = (rho.modes(), rho.cutoff());
        if mode >= modes {
            return Err(Error::InvalidModes(format!("mode {mode} out of range for {modes} modes")));
        }
        let input = pure_loss(rho, mode, spec.pre_loss)?;
        let resource = tmsv(&TmsvSpec { r: spec.r, cutoff: c })?;

        let half_width = ((2 * c + 1) as f64).sqrt() + 4.0;
        let step = 2.0 * half_width / GRID as f64;
        let centres: Vec<f64> = (0..GRID).map(|k| -half_width + (k as f64 + 0.5) * step).collect();

        let eig = hermitian_eigen(input.matrix())?;
        let total: f64 = eig.values.iter().filter(|&&v| v > MIN_COMPONENT).sum();
        let mut components = Vec::new();
        let mut weights = Vec::new();
        let mut prepared_loss = tmsv_tail_weight(spec.r, c);
        for (k, &p) in eig.values.iter().enumerate() {
            if p <= MIN_COMPONENT {
                continue;
            }
            let psi = eig.vectors.column(k).into_owned();
            let full = psi.kronecker(resource.amplitudes());
            let joint = FockKet::new_unnormalized(modes + 2, c, full)?;
            let mixed = beam_splitter(&joint, mode, modes, 0.5, 0.0)?;
            components.push(Component::new(&mixed, mode, modes, c, &centres, step)?);
            weights.push(p / total);
            prepared_loss += p / total * (1.0 - mixed.norm().powi(2));
        }
        let mut acc = 0.0;
        let component_cdf = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            spec: *spec,
            mode,
            modes,
            cutoff: c,
            components,
            component_cdf,
            weights,
            centres,
            step,
            layout: LocalLayout::new(modes, c, &[mode]),
            prepared_loss,
        })
    }

    /// Conditional output for a fixed Bell-measurement outcome, after the
    /// feedforward displacement and any output loss; normalized.
    pub fn conditional_state(&self, x: f64, p: f64) -> Result<FockDensityMatrix> {
        let dim = basis_dim(self.modes, self.cutoff);
        let mut m = DMatrix::zeros(dim, dim);
        for (comp, w) in self.components.iter().zip(&self.weights) {
            let out = self.displaced(comp, x, p);
            m += (out.clone() * out.adjoint()) * Complex64::from(*w);
        }
        let rho = FockDensityMatrix::new_unnormalized(self.modes, self.cutoff, m)?.normalize()?;
        pure_loss(&rho, self.mode, self.spec.post_loss)
    }

    /// Averages `n_trials` sampled outcomes.
    pub fn run(&self, n_trials: usize, seed: u64) -> Result<FockDensityMatrix> {
        if n_trials == 0 {
            return Err(invalid("n_trials", "need at least one trial"));
        }
        let chunks = n_trials.div_ceil(CHUNK);
        let dim = basis_dim(self.modes, self.cutoff);
        let parts: Vec<(DMatrix<Complex64>, f64)> = (0..chunks)
            .into_par_iter()
            .map(|j| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(j as u64);
                let count = CHUNK.min(n_trials - j * CHUNK);
                let mut acc = DMatrix::zeros(dim, dim);
                let mut before = 0.0;
                for _ in 0..count {
                    let t = self.trial(&mut rng);
                    acc += (t.out.clone() * t.out.adjoint()) * Complex64::from(t.weight);
                    before += t.weight * t.norm2_before;
                }
                (acc, before)
            })
            .collect();
        let mut sum = DMatrix::zeros(dim, dim);
        let mut before = 0.0;
        for (part, b) in &parts {
            sum += part;
            before += b;
        }
        let avg = FockDensityMatrix::new_unnormalized(self.modes, self.cutoff, sum)?;
        // displacement truncation relative to the conditional weight, plus
        // whatever the resource and beam splitter already cut off
        let lost = (1.0 - avg.trace() / before) + self.prepared_loss;
        if lost > MAX_MEAN_LOSS {
            return Err(Error::CutoffTooSmall {
                cutoff: self.cutoff,
                error: lost,
                bound: MAX_MEAN_LOSS,
            });
        }
        let rho = pure_loss(&avg.normalize()?, self.mode, self.spec.post_loss)?;
        rho.validate()?;
        Ok(rho)
    }

    fn trial(&self, rng: &mut ChaCha8Rng) -> Trial {
        let u: f64 = rng.random();
        let k = self.component_cdf.partition_point(|&c| c < u).min(self.components.len() - 1);
        let comp = &self.components[k];
        let v: f64 = rng.random();
        let cell = comp.cdf.partition_point(|&c| c < v).min(GRID * GRID - 1);
        let (ix, ip) = (cell / GRID, cell % GRID);
        let x = self.centres[ix] + (rng.random::<f64>() - 0.5) * self.step;
        let p = self.centres[ip] + (rng.random::<f64>() - 0.5) * self.step;
        let cond = self.conditional(comp, x, p);
        Trial {
            norm2_before: cond.norm_squared(),
            out: self.displace(&cond, x, p),
            // sampling density is density[cell] / mass
            weight: comp.mass / comp.density[cell],
        }
    }

    fn displaced(&self, comp: &Component, x: f64, p: f64) -> DVector<Complex64> {
        self.displace(&self.conditional(comp, x, p), x, p)
    }

    fn conditional(&self, comp: &Component, x: f64, p: f64) -> DVector<Complex64> {
        let c = self.cutoff;
        let mut hx = vec![0.0; c + 1];
        fill_hermite_functions(x, &mut hx);
        let hp = quadrature_amplitudes(p, std::f64::consts::FRAC_PI_2, c);
        let coeffs = DVector::from_fn((c + 1) * (c + 1), |row, _| Complex64::from(hx[row / (c + 1)]) * hp[row % (c + 1)]);
        comp.phi.tr_mul(&coeffs)
    }

    fn displace(&self, cond: &DVector<Complex64>, x: f64, p: f64) -> DVector<Complex64> {
        let c = self.cutoff;
        let alpha = Complex64::new(x, p) * self.spec.g;
        let d = displacement_matrix(alpha, c + 1, c + 1);
        apply_local_ket(cond, &self.layout, &d)
    }
}

impl Component {
    fn new(mixed: &FockKet, mode: usize, modes: usize, c: usize, centres: &[f64], step: f64) -> Result<Self> {
        let base = c + 1;
        let rest_dim = basis_dim(modes, c);
        let mut phi = DMatrix::zeros(base * base, rest_dim);
        for (f, amp) in mixed.amplitudes().iter().enumerate() {
            if *amp == Complex64::default() {
                continue;
            }
            let d = basis_digits(f, modes + 2, c);
            let (nu, nv) = (d[mode], d[modes]);
            let mut out = d[..modes].to_vec();
            out[mode] = d[modes + 1];
            phi[(nu * base + nv, basis_index(&out, c))] = *amp;
        }
        let hx: Vec<Vec<f64>> = centres
            .iter()
            .map(|&x| {
                let mut h = vec![0.0; base];
                fill_hermite_functions(x, &mut h);
                h
            })
            .collect();
        let hp = DMatrix::from_fn(GRID, base, |l, nv| {
            quadrature_amplitudes(centres[l], std::f64::consts::FRAC_PI_2, c)[nv]
        });
        let density: Vec<f64> = hx
            .par_iter()
            .flat_map_iter(|h| {
                // t[(nv, rest)] = Σ_nu ψ_nu(x) phi[(nu, nv), rest]
                let t = DMatrix::from_fn(base, rest_dim, |nv, rest| {
                    (0..base).map(|nu| phi[(nu * base + nv, rest)] * h[nu]).sum::<Complex64>()
                });
                let a = &hp * t;
                (0..GRID).map(move |l| a.row(l).norm_squared()).collect::<Vec<_>>()
            })
            .collect();
        let mass: f64 = density.iter().sum::<f64>() * step * step;
        let norm2 = mixed.norm().powi(2);
        if (mass - norm2).abs() > 1e-6 {
            return Err(Error::GridTooCoarse((mass - norm2).abs()));
        }
        let mut acc = 0.0;
        let scale = 1.0 / density.iter().sum::<f64>();
        let cdf = density
            .iter()
            .map(|d| {
                acc += d * scale;
                acc
            })
            .collect();
        Ok(Self {
            phi,
            cdf,
            density,
            mass,
        })
    }
}

/// Monte-Carlo estimate of teleporting `mode` of `rho`, at the input cutoff.
pub fn mc_teleport_oracle(
    rho: &FockDensityMatrix,
    mode: usize,
    spec: &ChannelSpec,
    n_trials: usize,
    seed: u64,
) -> Result<FockDensityMatrix> {
    TeleportSimulator::new(rho, mode, spec)?.run(n_trials, seed)
}
