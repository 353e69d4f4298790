use nalgebra::DMatrix;
use num_complex::Complex64;

use super::hermite::quadrature_amplitudes;
use crate::error::invalid;
use crate::fock::FockDensityMatrix;
use crate::tolerances;
use crate::{Error, Result};

/// Cell-centred grid over `[−half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureGrid {
    pub half_width: f64,
    pub points: usize,
}

impl QuadratureGrid {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0) || points == 0 {
            return Err(invalid("grid", format!("half width {half_width}, {points} points")));
        }
        Ok(Self { half_width, points })
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn centres(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.points).map(|k| -self.half_width + (k as f64 + 0.5) * h).collect()
    }
}

/// `6·√(2n̄+1)` for the more populated mode: six standard deviations of a
/// thermal state with the same photon number.
pub fn default_half_width(rho: &FockDensityMatrix) -> f64 {
    let nbar = (0..rho.modes()).map(|m| rho.mean_photon_number(m)).fold(0.0, f64::max);
    6.0 * (2.0 * nbar + 1.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomodynePdf {
    pub grid: QuadratureGrid,
    /// `density[(k, l)]` at `(x1, x2) = (centres[k], centres[l])`.
    pub density: DMatrix<f64>,
}

impl HomodynePdf {
    /// `Σ density · dx²`.
    pub fn mass(&self) -> f64 {
        self.density.sum() * self.grid.step().powi(2)
    }
}

/// Joint density of `(x1, x2)` measured at local-oscillator phases
/// `(θ1, θ2)`, i.e. `⟨x1_θ1, x2_θ2|ρ|x1_θ1, x2_θ2⟩`.
pub fn homodyne_pdf(rho: &FockDensityMatrix, phases: (f64, f64), grid: QuadratureGrid) -> Result<HomodynePdf> {
    if rho.modes() != 2 {
        return Err(Error::InvalidModes(format!("homodyne pdf needs two modes, got {}", rho.modes())));
    }
    let c = rho.cutoff();
    let base = c + 1;
    let xs = grid.centres();
    let amps = |theta: f64| -> Vec<Vec<Complex64>> { xs.iter().map(|&x| quadrature_amplitudes(x, theta, c)).collect() };
    let (a1, a2) = (amps(phases.0), amps(phases.1));
    let m = rho.matrix();
    let mut density = DMatrix::zeros(grid.points, grid.points);
    let mut reduced = DMatrix::<Complex64>::zeros(base, base);
    for (k, u) in a1.iter().enumerate() {
        // reduced[n2, m2] = Σ u[n1] ρ[(n1 n2), (m1 m2)] conj(u[m1])
        reduced.fill(Complex64::default());
        for n1 in 0..base {
            for m1 in 0..base {
                let w = u[n1] * u[m1].conj();
                for n2 in 0..base {
                    for m2 in 0..base {
                        reduced[(n2, m2)] += w * m[(n1 * base + n2, m1 * base + m2)];
                    }
                }
            }
        }
        for (l, v) in a2.iter().enumerate() {
            let mut p = Complex64::default();
            for n2 in 0..base {
                for m2 in 0..base {
                    p += v[n2] * reduced[(n2, m2)] * v[m2].conj();
                }
            }
            density[(k, l)] = p.re.max(0.0);
        }
    }
    let pdf = HomodynePdf { grid, density };
    let err = (pdf.mass() - rho.trace()).abs();
    if err > tolerances::PDF_NORMALIZATION {
        return Err(Error::GridTooCoarse(err));
    }
    Ok(pdf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{c64, FockKet};
    use crate::state_prep::{split_photon, SplitPhotonSpec};

    fn grid(rho: &FockDensityMatrix) -> QuadratureGrid {
        QuadratureGrid::new(default_half_width(rho), 201).unwrap()
    }

    #[test]
    fn vacuum_is_a_product_gaussian() {
        let rho = FockDensityMatrix::vacuum(2, 2);
        let pdf = homodyne_pdf(&rho, (0.3, 1.9), grid(&rho)).unwrap();
        let xs = pdf.grid.centres();
        for &(k, l) in &[(100, 100), (80, 130), (60, 100)] {
            let want = (-(xs[k] * xs[k] + xs[l] * xs[l])).exp() / std::f64::consts::PI;
            assert!((pdf.density[(k, l)] - want).abs() < 1e-12);
        }
        let h = pdf.grid.step();
        let var: f64 = (0..201).map(|k| (0..201).map(|l| pdf.density[(k, l)]).sum::<f64>() * xs[k] * xs[k]).sum::<f64>() * h * h;
        assert!((var - 0.5).abs() < 1e-8);
    }

    #[test]
    fn single_photon_marginal_is_phase_independent() {
        let rho = FockDensityMatrix::fock(&[1, 0], 2);
        let g = grid(&rho);
        let xs = g.centres();
        for theta in [0.0, 0.8, 2.5] {
            let pdf = homodyne_pdf(&rho, (theta, 0.0), g).unwrap();
            for k in [40, 90, 120] {
                let marginal: f64 = (0..201).map(|l| pdf.density[(k, l)]).sum::<f64>() * g.step();
                let want = 2.0 * xs[k] * xs[k] * (-xs[k] * xs[k]).exp() / std::f64::consts::PI.sqrt();
                assert!((marginal - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn split_photon_depends_only_on_phase_difference() {
        let rho = split_photon(&SplitPhotonSpec::pure(0.5), 1).unwrap();
        let g = grid(&rho);
        let a = homodyne_pdf(&rho, (0.9, 0.2), g).unwrap();
        let b = homodyne_pdf(&rho, (1.6, 0.9), g).unwrap();
        assert!((a.density.clone() - b.density).amax() < 1e-12);
        let c = homodyne_pdf(&rho, (0.9, 0.9), g).unwrap();
        assert!((a.density - c.density).amax() > 1e-3);
    }

    #[test]
    fn coherence_breaks_phase_sum_invariance() {
        // |00⟩ + |11⟩ carries a phase-sum dependence
        let s = 0.5f64.sqrt();
        let psi = FockKet::from_terms(2, 1, &[(&[0, 0], c64(s, 0.0)), (&[1, 1], c64(s, 0.0))]).unwrap();
        let rho = FockDensityMatrix::from_ket(&psi);
        let g = grid(&rho);
        let a = homodyne_pdf(&rho, (0.5, 0.5), g).unwrap();
        let b = homodyne_pdf(&rho, (0.0, 0.0), g).unwrap();
        assert!((a.density - b.density).amax() > 1e-3);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let rho = FockDensityMatrix::fock(&[2, 2], 2);
        let narrow = QuadratureGrid::new(1.0, 201).unwrap();
        assert!(matches!(homodyne_pdf(&rho, (0.0, 0.0), narrow), Err(Error::GridTooCoarse(_))));
        assert!(homodyne_pdf(&FockDensityMatrix::vacuum(1, 2), (0.0, 0.0), narrow).is_err());
    }
}
