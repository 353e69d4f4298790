//! Number-state wavefunctions `⟨x|n⟩ = ψ_n(x)` for `x = (a+a†)/√2`.

use num_complex::Complex64;

/// Writes `ψ_0(x) … ψ_{len−1}(x)` into `out` by the stable three-term
/// recurrence.
pub fn fill_hermite_functions(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

/// `ψ_0(x) … ψ_{nmax}(x)`.
pub fn hermite_functions(x: f64, nmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    fill_hermite_functions(x, &mut out);
    out
}

/// `⟨x_θ|n⟩ = e^{−inθ} ψ_n(x)` for the rotated quadrature
/// `x_θ = x cos θ + p sin θ`.
pub fn quadrature_amplitudes(x: f64, theta: f64, nmax: usize) -> Vec<Complex64> {
    hermite_functions(x, nmax)
        .into_iter()
        .enumerate()
        .map(|(n, psi)| Complex64::from_polar(psi, -(n as f64) * theta))
        .collect()
}
