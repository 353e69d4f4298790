use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pdf::{default_half_width, homodyne_pdf, QuadratureGrid};
use crate::error::invalid;
use crate::fock::FockDensityMatrix;
use crate::{Error, Result};

/// Grid used to tabulate the inverse CDF; samples are spread uniformly
/// inside the selected cell.
const SAMPLING_POINTS: usize = 601;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSample {
    pub theta1: f64,
    pub theta2: f64,
    pub x1: f64,
    pub x2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomoDataset {
    pub samples: Vec<QuadratureSample>,
    pub seed: u64,
    pub source: String,
    pub schedule: Vec<(f64, f64)>,
}

impl TomoDataset {
    pub fn new(samples: Vec<QuadratureSample>, seed: u64, source: impl Into<String>, schedule: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for s in &samples {
            for t in [s.theta1, s.theta2] {
                if !(0.0..TAU).contains(&t) {
                    return Err(invalid("theta", format!("{t} outside [0, 2π)")));
                }
            }
            if !s.x1.is_finite() || !s.x2.is_finite() {
                return Err(invalid("x", "non-finite quadrature"));
            }
        }
        Ok(Self { samples, seed, source: source.into(), schedule })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Sidecar metadata stored next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub seed: u64,
    pub n: usize,
    pub schedule: Vec<(f64, f64)>,
    pub source: String,
}

fn wrap(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU { 0.0 } else { t }
}

/// Relative phase `Δ` stepped over `[0, π)` with `θ1 = Δ/2`, `θ2 = −Δ/2`,
/// so the phase sum stays at zero.
pub fn default_schedule(steps: usize) -> Vec<(f64, f64)> {
    (0..steps)
        .map(|k| {
            let delta = PI * k as f64 / steps as f64;
            (wrap(delta / 2.0), wrap(-delta / 2.0))
        })
        .collect()
}

/// Draws `n` joint quadrature pairs, split as evenly as possible across the
/// schedule. Each phase setting gets its own stream of the seeded generator,
/// so the result does not depend on thread scheduling.
pub fn sample(rho: &FockDensityMatrix, schedule: &[(f64, f64)], n: usize, seed: u64) -> Result<TomoDataset> {
    if n == 0 {
        return Err(invalid("n", "need at least one sample"));
    }
    if schedule.is_empty() {
        return Err(invalid("schedule", "no phase settings"));
    }
    let rho = rho.normalize()?;
    let schedule: Vec<(f64, f64)> = schedule.iter().map(|&(a, b)| (wrap(a), wrap(b))).collect();
    let grid = QuadratureGrid::new(default_half_width(&rho), SAMPLING_POINTS)?;
    let per = n / schedule.len();
    let extra = n % schedule.len();
    let chunks: Vec<Vec<QuadratureSample>> = schedule
        .par_iter()
        .enumerate()
        .map(|(j, &(t1, t2))| {
            let count = per + usize::from(j < extra);
            if count == 0 {
                return Ok(Vec::new());
            }
            let pdf = homodyne_pdf(&rho, (t1, t2), grid)?;
            let mut cdf = Vec::with_capacity(grid.points * grid.points);
            let mut acc = 0.0;
            for k in 0..grid.points {
                for l in 0..grid.points {
                    acc += pdf.density[(k, l)];
                    cdf.push(acc);
                }
            }
            let h = grid.step();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            Ok((0..count)
                .map(|_| {
                    let u: f64 = rng.random::<f64>() * acc;
                    let cell = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                    let (k, l) = (cell / grid.points, cell % grid.points);
                    let x1 = -grid.half_width + (k as f64 + rng.random::<f64>()) * h;
                    let x2 = -grid.half_width + (l as f64 + rng.random::<f64>()) * h;
                    QuadratureSample { theta1: t1, theta2: t2, x1, x2 }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let samples = chunks.into_iter().flatten().collect();
    TomoDataset::new(samples, seed, "simulated homodyne sampling", schedule)
}

/// Writes the `theta1,theta2,x1,x2` CSV and its JSON sidecar.
pub fn write_dataset(data: &TomoDataset, csv_out: impl Write, sidecar_out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(csv_out);
    for s in &data.samples {
        w.serialize(s)?;
    }
    w.flush()?;
    let meta = DatasetSidecar { seed: data.seed, n: data.len(), schedule: data.schedule.clone(), source: data.source.clone() };
    let mut out = sidecar_out;
    serde_json::to_writer_pretty(&mut out, &meta)?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_dataset(csv_in: impl Read, sidecar_in: impl Read) -> Result<TomoDataset> {
    let meta: DatasetSidecar = serde_json::from_reader(sidecar_in)?;
    let samples = csv::Reader::from_reader(csv_in).deserialize().collect::<std::result::Result<Vec<QuadratureSample>, _>>()?;
    if samples.len() != meta.n {
        return Err(invalid("n", format!("sidecar says {}, CSV has {}", meta.n, samples.len())));
    }
    TomoDataset::new(samples, meta.seed, meta.source, meta.schedule)
}
