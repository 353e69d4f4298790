use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hermite::hermite_functions;
use super::sample::{QuadratureSample, TomoDataset};
use crate::error::invalid;
use crate::fock::{basis_dim, hermitian_eigen, FockDensityMatrix};
use crate::tolerances;
use crate::{Error, Result};

const GL_NODES: [f64; 6] = [
    -0.932_469_514_203_152_1,
    -0.661_209_386_466_264_5,
    -0.238_619_186_083_196_9,
    0.238_619_186_083_196_9,
    0.661_209_386_466_264_5,
    0.932_469_514_203_152_1,
];
const GL_WEIGHTS: [f64; 6] = [
    0.171_324_492_379_170_4,
    0.360_761_573_048_138_6,
    0.467_913_934_572_691_0,
    0.467_913_934_572_691_0,
    0.360_761_573_048_138_6,
    0.171_324_492_379_170_4,
];

/// Accepted steps averaged by the stopping rule.
const CONVERGENCE_WINDOW: usize = 20;

/// Whether the estimate is restricted to states commuting with the total
/// photon number `n1 + n2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NumberSymmetry {
    /// Restrict exactly when every sample shares one phase sum `θ1 + θ2`.
    /// Such data carry no handle on the phase of coherences between
    /// different total photon numbers; a schedule of that kind is only
    /// chosen for states without them.
    #[default]
    Auto,
    Enforce,
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleOptions {
    pub max_iter: usize,
    /// Stop once the per-step log-likelihood gain, relative to the total gain
    /// since the start, drops below this.
    pub tol: f64,
    /// Equal-width bins per quadrature axis.
    pub bins: usize,
    pub symmetry: NumberSymmetry,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { max_iter: 2000, tol: 1e-7, bins: 201, symmetry: NumberSymmetry::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleDiagnostics {
    pub iterations: usize,
    pub final_loglik: f64,
    pub converged: bool,
    pub number_symmetric: bool,
    /// Log-likelihood of the starting point followed by every accepted step.
    #[serde(skip)]
    pub loglik_history: Vec<f64>,
}

/// Bin-integrated projectors `∫_bin |x_θ⟩⟨x_θ| dx` on one axis.
struct Axis {
    povm: Vec<DMatrix<Complex64>>,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64> + Clone, theta: f64, bins: usize, cutoff: usize) -> (Self, Vec<usize>) {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.clone().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let sigma = var.sqrt().max(std::f64::consts::FRAC_1_SQRT_2);
        let max_abs = values.clone().fold(0.0f64, |m, x| m.max(x.abs()));
        let half = (6.0 * sigma).max(max_abs * (1.0 + 1e-9));
        let h = 2.0 * half / bins as f64;
        let base = cutoff + 1;
        let povm = (0..bins)
            .map(|b| {
                let lo = -half + b as f64 * h;
                let mut m = DMatrix::<Complex64>::zeros(base, base);
                for (t, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                    let psi = hermite_functions(lo + 0.5 * h * (1.0 + t), cutoff);
                    for i in 0..base {
                        for j in 0..base {
                            m[(i, j)].re += 0.5 * h * w * psi[i] * psi[j];
                        }
                    }
                }
                for i in 0..base {
                    for j in 0..base {
                        m[(i, j)] *= Complex64::from_polar(1.0, (i as f64 - j as f64) * theta);
                    }
                }
                m
            })
            .collect();
        let index = values.map(|x| (((x + half) / h).floor().max(0.0) as usize).min(bins - 1)).collect();
        (Self { povm }, index)
    }
}

/// Counts for one phase setting, grouped by the first axis bin.
struct Group {
    axis1: Axis,
    axis2: Axis,
    rows: Vec<(usize, Vec<(usize, f64)>)>,
}

impl Group {
    fn build(samples: &[&QuadratureSample], weights: &[f64], bins: usize, cutoff: usize) -> Self {
        let (t1, t2) = (samples[0].theta1, samples[0].theta2);
        let (axis1, i1) = Axis::new(samples.iter().map(|s| s.x1), t1, bins, cutoff);
        let (axis2, i2) = Axis::new(samples.iter().map(|s| s.x2), t2, bins, cutoff);
        let mut table: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
        for k in 0..samples.len() {
            if weights[k] > 0.0 {
                *table.entry(i1[k]).or_default().entry(i2[k]).or_default() += weights[k];
            }
        }
        let rows = table.into_iter().map(|(b1, cols)| (b1, cols.into_iter().collect())).collect();
        Self { axis1, axis2, rows }
    }

    /// `tr(ρ Π_b1 ⊗ Π_b2)` for every occupied bin, in row order.
    fn probabilities(&self, rho: &DMatrix<Complex64>, base: usize) -> Vec<f64> {
        let mut out = Vec::new();
        let mut reduced = DMatrix::<Complex64>::zeros(base, base);
        for (b1, cols) in &self.rows {
            let p1 = &self.axis1.povm[*b1];
            reduced.fill(Complex64::default());
            for n1 in 0..base {
                for m1 in 0..base {
                    let w = p1[(m1, n1)];
                    for n2 in 0..base {
                        for m2 in 0..base {
                            reduced[(n2, m2)] += w * rho[(n1 * base + n2, m1 * base + m2)];
                        }
                    }
                }
            }
            for (b2, _) in cols {
                let p2 = &self.axis2.povm[*b2];
                let mut p = 0.0;
                for n2 in 0..base {
                    for m2 in 0..base {
                        p += (p2[(m2, n2)] * reduced[(n2, m2)]).re;
                    }
                }
                out.push(p.max(f64::MIN_POSITIVE));
            }
        }
        out
    }

    fn loglik(&self, probs: &[f64]) -> f64 {
        self.rows.iter().flat_map(|(_, c)| c.iter()).zip(probs).map(|((_, n), p)| n * p.ln()).sum()
    }

    /// `Σ n_b Π_b / p_b` (unscaled).
    fn r_operator(&self, probs: &[f64], base: usize) -> DMatrix<Complex64> {
        let mut r = DMatrix::<Complex64>::zeros(base * base, base * base);
        let mut k = 0;
        for (b1, cols) in &self.rows {
            let mut q = DMatrix::<Complex64>::zeros(base, base);
            for (b2, n) in cols {
                q += &self.axis2.povm[*b2] * Complex64::from(n / probs[k]);
                k += 1;
            }
            r += self.axis1.povm[*b1].kronecker(&q);
        }
        r
    }
}

struct Likelihood {
    groups: Vec<Group>,
    base: usize,
    total: f64,
    /// Drop couplings between different total photon numbers from `R`.
    symmetric: bool,
}

impl Likelihood {
    fn new(data: &TomoDataset, weights: &[f64], cutoff: usize, bins: usize) -> Self {
        let mut order: Vec<(u64, u64)> = Vec::new();
        let mut members: BTreeMap<(u64, u64), (Vec<&QuadratureSample>, Vec<f64>)> = BTreeMap::new();
        for (s, &w) in data.samples.iter().zip(weights) {
            let key = (s.theta1.to_bits(), s.theta2.to_bits());
            let entry = members.entry(key).or_insert_with(|| {
                order.push(key);
                (Vec::new(), Vec::new())
            });
            entry.0.push(s);
            entry.1.push(w);
        }
        let groups = order
            .par_iter()
            .map(|key| {
                let (s, w) = &members[key];
                Group::build(s, w, bins, cutoff)
            })
            .collect();
        Self { groups, base: cutoff + 1, total: weights.iter().sum(), symmetric: false }
    }

    fn evaluate(&self, rho: &DMatrix<Complex64>) -> (Vec<Vec<f64>>, f64) {
        let probs: Vec<Vec<f64>> = self.groups.par_iter().map(|g| g.probabilities(rho, self.base)).collect();
        let loglik = self.groups.iter().zip(&probs).map(|(g, p)| g.loglik(p)).sum();
        (probs, loglik)
    }

    fn r_operator(&self, probs: &[Vec<f64>]) -> DMatrix<Complex64> {
        let parts: Vec<DMatrix<Complex64>> =
            self.groups.par_iter().zip(probs).map(|(g, p)| g.r_operator(p, self.base)).collect();
        let d = self.base * self.base;
        let mut r = parts.into_iter().fold(DMatrix::zeros(d, d), |acc, m| acc + m) / Complex64::from(self.total);
        if self.symmetric {
            dephase(&mut r, self.base);
        }
        r
    }
}

/// Zeroes every element between different total photon numbers.
fn dephase(m: &mut DMatrix<Complex64>, base: usize) {
    let total = |i: usize| i / base + i % base;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if total(i) != total(j) {
                m[(i, j)] = Complex64::default();
            }
        }
    }
}

/// True when all samples share one `θ1 + θ2` modulo 2π.
fn single_phase_sum(data: &TomoDataset) -> bool {
    let tau = std::f64::consts::TAU;
    let first = (data.samples[0].theta1 + data.samples[0].theta2).rem_euclid(tau);
    data.samples.iter().all(|s| {
        let d = ((s.theta1 + s.theta2).rem_euclid(tau) - first).abs();
        d.min(tau - d) < 1e-9
    })
}

/// Clips negative eigenvalues and rescales to unit trace.
fn psd_normalized(m: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let eig = hermitian_eigen(m).ok()?;
    let clipped = eig.values.map(|l| l.max(0.0));
    let tr = clipped.sum();
    if !(tr > 0.0) {
        return None;
    }
    let v = &eig.vectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * (clipped[j] / tr));
    Some(scaled * v.adjoint())
}

fn sandwich(a: &DMatrix<Complex64>, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let m = a * rho * a.adjoint();
    let m = (&m + m.adjoint()) * Complex64::from(0.5);
    let tr = m.trace().re;
    m / Complex64::from(tr)
}

/// Binned iterative maximum-likelihood estimate at the given cutoff with
/// default binning and a maximally mixed start.
pub fn mle_reconstruct(data: &TomoDataset, cutoff: usize, max_iter: usize, tol: f64) -> Result<(FockDensityMatrix, MleDiagnostics)> {
    mle_reconstruct_from(data, cutoff, &MleOptions { max_iter, tol, ..MleOptions::default() }, None)
}

/// As [`mle_reconstruct`], optionally warm-started from `start`.
///
/// The basic step is `ρ ← RρR / tr`. Plain RρR crawls along flat
/// directions of the likelihood, so each iteration first tries the same
/// step from a momentum-extrapolated point (projected back to a state) and
/// keeps it only if the log-likelihood does not drop. Failing that, it takes
/// the plain step, diluted to `(I + ε(R − I))ρ(I + ε(R − I))` with halving ε
/// if needed. Every accepted step is nondecreasing and all variants share the
/// RρR fixed point. Hitting `max_iter` returns the best iterate with
/// `converged = false`.
pub fn mle_reconstruct_from(
    data: &TomoDataset,
    cutoff: usize,
    opts: &MleOptions,
    start: Option<&FockDensityMatrix>,
) -> Result<(FockDensityMatrix, MleDiagnostics)> {
    let weights = vec![1.0; data.len()];
    reconstruct_weighted(data, &weights, cutoff, opts, start)
}

fn reconstruct_weighted(
    data: &TomoDataset,
    weights: &[f64],
    cutoff: usize,
    opts: &MleOptions,
    start: Option<&FockDensityMatrix>,
) -> Result<(FockDensityMatrix, MleDiagnostics)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cutoff == 0 || opts.bins == 0 || !(opts.tol > 0.0) {
        return Err(invalid("mle", format!("cutoff {cutoff}, bins {}, tol {}", opts.bins, opts.tol)));
    }
    let d = basis_dim(2, cutoff);
    let mut rho = match start {
        Some(s) => {
            if s.modes() != 2 || s.cutoff() != cutoff {
                return Err(Error::CutoffMismatch(s.cutoff(), cutoff));
            }
            s.normalize()?.into_matrix()
        }
        None => DMatrix::identity(d, d) / Complex64::from(d as f64),
    };
    let symmetric = match opts.symmetry {
        NumberSymmetry::Auto => single_phase_sum(data),
        NumberSymmetry::Enforce => true,
        NumberSymmetry::Off => false,
    };
    if symmetric {
        dephase(&mut rho, cutoff + 1);
    }
    let mut lik = Likelihood::new(data, weights, cutoff, opts.bins);
    lik.symmetric = symmetric;
    let (mut probs, mut loglik) = lik.evaluate(&rho);
    let mut history = vec![loglik];
    let mut converged = false;
    let mut iterations = 0;
    let identity = DMatrix::<Complex64>::identity(d, d);
    let mut previous: Option<DMatrix<Complex64>> = None;
    let mut momentum = 0usize;
    while iterations < opts.max_iter {
        let mut step = None;
        // Extrapolate along the last move, then take a full RρR step from
        // there. Kept only if it beats the current iterate; otherwise the
        // momentum restarts.
        if let (Some(prev), true) = (&previous, momentum > 0) {
            let beta = momentum as f64 / (momentum as f64 + 3.0);
            if let Some(y) = psd_normalized(&(&rho + (&rho - prev) * Complex64::from(beta))) {
                let (py, _) = lik.evaluate(&y);
                let cand = sandwich(&lik.r_operator(&py), &y);
                let (p, l) = lik.evaluate(&cand);
                if l >= loglik - tolerances::LOGLIK_SLACK * loglik.abs() {
                    step = Some((cand, p, l, 1.0));
                }
            }
        }
        if step.is_none() {
            momentum = 0;
            let shift = lik.r_operator(&probs) - &identity;
            let mut eps = 1.0;
            while eps > 1e-8 {
                let cand = sandwich(&(&identity + &shift * Complex64::from(eps)), &rho);
                let (p, l) = lik.evaluate(&cand);
                if l >= loglik - tolerances::LOGLIK_SLACK * loglik.abs() {
                    step = Some((cand, p, l, eps));
                    break;
                }
                eps *= 0.5;
            }
        }
        let Some((cand, p, l, eps)) = step else {
            // no ascent direction left at working precision
            converged = true;
            break;
        };
        iterations += 1;
        momentum += 1;
        previous = Some(std::mem::replace(&mut rho, cand));
        probs = p;
        loglik = l;
        history.push(l);
        // Mean per-step gain over a window, relative to the total gain since
        // the start. |L| itself carries an offset set by the bin width, so it
        // is no scale for convergence.
        let back = history.len().saturating_sub(CONVERGENCE_WINDOW + 1);
        let span = (history.len() - 1 - back) as f64;
        let gained = (l - history[0]).max(f64::EPSILON * l.abs());
        let change = (l - history[back]).abs() / (span * gained);
        if history.len() > CONVERGENCE_WINDOW && change < opts.tol && eps >= 1.0 {
            converged = true;
            break;
        }
    }
    let rho = FockDensityMatrix::new(2, cutoff, rho)?;
    rho.validate()?;
    Ok((rho, MleDiagnostics { iterations, final_loglik: loglik, converged, number_symmetric: symmetric, loglik_history: history }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub resamples: usize,
    /// Resamples for which the statistic could be evaluated.
    pub used: usize,
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
}

/// Nonparametric bootstrap of `statistic` over MLE reconstructions of
/// resampled datasets. Each resample draws multinomial weights from its own
/// generator stream and is warm-started from `center`; resamples where the
/// statistic errors are skipped.
pub fn bootstrap<F>(
    data: &TomoDataset,
    center: &FockDensityMatrix,
    opts: &MleOptions,
    resamples: usize,
    seed: u64,
    statistic: F,
) -> Result<BootstrapReport>
where
    F: Fn(&FockDensityMatrix) -> Result<Vec<f64>> + Sync,
{
    if resamples < 2 {
        return Err(invalid("resamples", "need at least two"));
    }
    let n = data.len();
    let values: Vec<Option<Vec<f64>>> = (0..resamples)
        .into_par_iter()
        .map(|j| -> Result<Option<Vec<f64>>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut weights = vec![0.0; n];
            for _ in 0..n {
                weights[rng.random_range(0..n)] += 1.0;
            }
            let (rho, _) = reconstruct_weighted(data, &weights, center.cutoff(), opts, Some(center))?;
            Ok(statistic(&rho).ok())
        })
        .collect::<Result<_>>()?;
    let used: Vec<&Vec<f64>> = values.iter().flatten().collect();
    let k = used.first().map_or(0, |v| v.len());
    if used.len() < 2 || used.iter().any(|v| v.len() != k) {
        return Err(Error::Invariant("bootstrap statistic unavailable on most resamples".into()));
    }
    let m = used.len() as f64;
    let mean: Vec<f64> = (0..k).map(|i| used.iter().map(|v| v[i]).sum::<f64>() / m).collect();
    let std_error = (0..k)
        .map(|i| (used.iter().map(|v| (v[i] - mean[i]).powi(2)).sum::<f64>() / (m - 1.0)).sqrt())
        .collect();
    Ok(BootstrapReport { resamples, used: used.len(), mean, std_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{state_fidelity, FockKet};
    use crate::tomography::{default_schedule, sample};

    #[test]
    fn quadrature_rule_is_exact_for_polynomials() {
        let integral: f64 = GL_NODES.iter().zip(GL_WEIGHTS).map(|(t, w)| w * t.powi(10)).sum();
        assert!((integral - 2.0 / 11.0).abs() < 1e-14);
        assert!((GL_WEIGHTS.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn bin_povm_sums_to_identity() {
        let xs = [-3.0, 0.1, 2.0];
        let (axis, idx) = Axis::new(xs.iter().copied(), 0.7, 201, 3);
        let sum = axis.povm.iter().fold(DMatrix::<Complex64>::zeros(4, 4), |a, m| a + m);
        assert!((sum - DMatrix::identity(4, 4)).camax() < 1e-8);
        assert!(idx.iter().all(|&i| i < 201));
    }

    #[test]
    fn vacuum_round_trip_small_space() {
        let truth = FockDensityMatrix::vacuum(2, 1);
        let data = sample(&truth, &default_schedule(12), 20_000, 4).unwrap();
        let (rho, diag) = mle_reconstruct(&data, 1, 2000, 1e-7).unwrap();
        let f = crate::fock::fidelity(&rho, &FockKet::basis(&[0, 0], 1)).unwrap();
        assert!(f >= 0.99, "{f}");
        assert!(diag.converged);
        for w in diag.loglik_history.windows(2) {
            assert!(w[1] >= w[0] - tolerances::LOGLIK_SLACK * w[0].abs());
        }
        assert!(state_fidelity(&rho, &truth).unwrap() >= 0.99);
    }

    #[test]
    fn single_sample_stays_physical() {
        let data = TomoDataset::new(
            vec![QuadratureSample { theta1: 0.0, theta2: 0.0, x1: 0.3, x2: -1.2 }],
            0,
            "one",
            vec![(0.0, 0.0)],
        )
        .unwrap();
        let (rho, diag) = mle_reconstruct(&data, 3, 50, 1e-7).unwrap();
        rho.validate().unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-9);
        assert!(diag.iterations <= 50);
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let truth = FockDensityMatrix::fock(&[1, 0], 3);
        let data = sample(&truth, &default_schedule(4), 2000, 1).unwrap();
        let (rho, diag) = mle_reconstruct(&data, 3, 2, 1e-12).unwrap();
        assert!(!diag.converged);
        assert_eq!(diag.iterations, 2);
        rho.validate().unwrap();
    }

    #[test]
    fn bootstrap_spread_shrinks_with_data() {
        let truth = FockDensityMatrix::fock(&[1, 0], 2);
        let opts = MleOptions { max_iter: 300, tol: 1e-6, bins: 101, ..MleOptions::default() };
        let spread = |n: usize| {
            let data = sample(&truth, &default_schedule(4), n, 3).unwrap();
            let (center, _) = mle_reconstruct_from(&data, 2, &opts, None).unwrap();
            let stat = |r: &FockDensityMatrix| Ok(vec![r.mean_photon_number(0)]);
            bootstrap(&data, &center, &opts, 12, 8, stat).unwrap().std_error[0]
        };
        let (small, large) = (spread(500), spread(8000));
        assert!(large < small, "{large} vs {small}");
    }

    #[test]
    fn number_symmetry_follows_the_schedule() {
        let truth = FockDensityMatrix::fock(&[1, 0], 2);
        let opts = MleOptions { max_iter: 50, ..MleOptions::default() };
        let fixed = sample(&truth, &default_schedule(6), 3000, 5).unwrap();
        let (rho, diag) = mle_reconstruct_from(&fixed, 2, &opts, None).unwrap();
        assert!(diag.number_symmetric);
        for i in 0..9 {
            for j in 0..9 {
                if i / 3 + i % 3 != j / 3 + j % 3 {
                    assert!(rho.matrix()[(i, j)].norm() < 1e-12);
                }
            }
        }
        let free = sample(&truth, &[(0.0, 0.0), (0.0, 1.0), (1.0, 0.3)], 3000, 5).unwrap();
        assert!(!mle_reconstruct_from(&free, 2, &opts, None).unwrap().1.number_symmetric);
        let off = MleOptions { symmetry: NumberSymmetry::Off, ..opts };
        assert!(!mle_reconstruct_from(&fixed, 2, &off, None).unwrap().1.number_symmetric);
    }

    #[test]
    fn rejects_bad_options() {
        let data = TomoDataset::new(
            vec![QuadratureSample { theta1: 0.0, theta2: 0.0, x1: 0.0, x2: 0.0 }],
            0,
            "one",
            vec![(0.0, 0.0)],
        )
        .unwrap();
        assert!(mle_reconstruct(&data, 0, 10, 1e-7).is_err());
        assert!(mle_reconstruct(&data, 2, 10, 0.0).is_err());
        let wrong = FockDensityMatrix::vacuum(2, 1);
        assert!(mle_reconstruct_from(&data, 2, &MleOptions::default(), Some(&wrong)).is_err());
    }
}
