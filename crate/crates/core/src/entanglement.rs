//! Logarithmic negativity `E = log2 ‖ρ^Γ‖₁` and gain scans of the swapped state.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel, ChannelSpec};
use crate::fock::linalg::{compressed_eigenvalues, hermiticity_error};
use crate::fock::{partial_transpose, FockDensityMatrix};
use crate::state_prep::{split_photon, SplitPhotonSpec};
use crate::tolerances;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativityReport {
    /// `max(0, raw_log_negativity)`, in bits.
    pub log_negativity: f64,
    pub raw_log_negativity: f64,
    /// `(‖ρ^Γ‖₁ − 1)/2`, clamped at 0.
    pub negativity: f64,
    pub min_pt_eigenvalue: f64,
    /// `min_pt_eigenvalue < −ppt_tolerance`.
    pub entangled: bool,
    pub ppt_tolerance: f64,
}

/// Log-negativity across the split `part | rest` of a normalized state.
pub fn log_negativity(rho: &FockDensityMatrix, part: &[usize]) -> Result<NegativityReport> {
    if (rho.trace() - 1.0).abs() > tolerances::TRACE {
        return Err(Error::NotNormalized(rho.trace()));
    }
    let pt = partial_transpose(rho, part)?;
    let herm = hermiticity_error(pt.matrix());
    if herm > tolerances::HERMITICITY {
        return Err(Error::NotHermitian(herm));
    }
    let ev = compressed_eigenvalues(pt.matrix())?;
    let norm: f64 = ev.iter().map(|l| l.abs()).sum();
    let mut min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    if ev.len() < pt.dim() {
        min = min.min(0.0);
    }
    let raw = norm.log2();
    let log_negativity = raw.max(0.0);
    Ok(NegativityReport {
        log_negativity,
        raw_log_negativity: raw,
        negativity: (log_negativity.exp2() - 1.0) / 2.0,
        min_pt_eigenvalue: min,
        entangled: min < -tolerances::PPT,
        ppt_tolerance: tolerances::PPT,
    })
}

/// `log2(1 + g²)`: the log-negativity of the ideal swapped state at optimal
/// gain. The partial transpose couples |00⟩ and |11⟩ through `d = g/2`,
/// giving the single negative eigenvalue `((1−g²)/2 − (1+g²)/2)/2`.
pub fn ideal_swapped_log_negativity(g: f64) -> f64 {
    (1.0 + g * g).log2()
}

/// Grid of `(r, g)` points for a swapped split-photon state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainScanSpec {
    pub split: SplitPhotonSpec,
    pub r_values: Vec<f64>,
    pub g_values: Vec<f64>,
    #[serde(default = "one")]
    pub pre_loss: f64,
    #[serde(default = "one")]
    pub post_loss: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
}

fn one() -> f64 {
    1.0
}

fn default_cutoff() -> usize {
    5
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Default gain grid: 21 points over `[0, 1.2]`.
pub fn default_gain_grid() -> Vec<f64> {
    linspace(0.0, 1.2, 21)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub r: f64,
    pub g: f64,
    pub log_negativity: f64,
    pub negativity: f64,
    pub min_pt_eigenvalue: f64,
}

/// One row per `(r, g)`, r-major. Mode B of the split photon is teleported;
/// the negativity is taken across A | D.
pub fn gain_scan(spec: &GainScanSpec) -> Result<Vec<ScanRow>> {
    let input = split_photon(&spec.split, spec.cutoff)?;
    let cells: Vec<(f64, f64)> = spec
        .r_values
        .iter()
        .flat_map(|&r| spec.g_values.iter().map(move |&g| (r, g)))
        .collect();
    cells
        .par_iter()
        .map(|&(r, g)| {
            let channel = ChannelSpec::new(r, g).with_losses(spec.pre_loss, spec.post_loss);
            let out = apply_channel(&input, 1, &channel)?;
            let rep = log_negativity(&out, &[0])?;
            Ok(ScanRow {
                r,
                g,
                log_negativity: rep.log_negativity,
                negativity: rep.negativity,
                min_pt_eigenvalue: rep.min_pt_eigenvalue,
            })
        })
        .collect()
}

/// Writes `r,g,log_negativity,negativity,min_pt_eigenvalue` rows with
/// shortest round-trip float formatting.
pub fn write_scan_csv<W: Write>(rows: &[ScanRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
