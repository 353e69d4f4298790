use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::compare::{
    compare_to_paper, fit_losses, initial_value, reference_table, ComparisonReport, Context, LossFit, LossModel,
    ModelInfo, Quantity, SimulatedValue, SimulatedValues, SourceModel,
};
use super::config::{Experiment, RunConfig};
use crate::channel::{apply_channel, channel_params, ChannelSpec};
use crate::entanglement::{gain_scan, log_negativity, write_scan_csv, GainScanSpec, NegativityReport, ScanRow};
use crate::fock::{basis_digits, state_fidelity, trace_distance, FockDensityMatrix};
use crate::postselect::{
    bloch_qubit, chsh_correlation, chsh_correlation_matrix, chsh_s, extract_qubit_block, summarize, teleport_qubit, PostSelectSummary,
    QubitBlock, CANONICAL_ANGLES,
};
use crate::state_prep::split_photon;
use crate::tomography::{bootstrap, default_schedule, mle_reconstruct_from, sample, write_dataset, BootstrapReport, MleDiagnostics, MleOptions};
use crate::{Error, Result};

/// Largest photon number per mode written to the bar-chart CSVs.
const BAR_PHOTONS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: Experiment,
    pub seed: u64,
    pub config_sha256: String,
    pub config: RunConfig,
    pub converged: bool,
    pub files: Vec<FileRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<FileRecord>,
    /// False when a reconstruction hit its iteration cap.
    pub converged: bool,
    pub values: SimulatedValues,
    pub comparison: Option<ComparisonReport>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<FileRecord>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn bytes(&mut self, name: &str, data: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), data)?;
        self.files.push(FileRecord { name: name.to_string(), sha256: hex(&Sha256::digest(data)) });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut data = serde_json::to_vec_pretty(value)?;
        data.push(b'\n');
        self.bytes(name, &data)
    }

    /// Validated state as JSON plus `|ρ|` bar data.
    fn state(&mut self, stem: &str, rho: &FockDensityMatrix) -> Result<()> {
        rho.validate().map_err(|e| Error::Invariant(format!("{stem}: {e}")))?;
        self.json(&format!("{stem}.json"), rho)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let modes = rho.modes();
        let mut header: Vec<String> = (0..modes).map(|m| format!("row_n{m}")).collect();
        header.extend((0..modes).map(|m| format!("col_n{m}")));
        header.push("abs".into());
        w.write_record(&header)?;
        let keep = |d: &[usize]| d.iter().all(|&n| n <= BAR_PHOTONS);
        let m = rho.matrix();
        for i in 0..rho.dim() {
            let di = basis_digits(i, modes, rho.cutoff());
            if !keep(&di) {
                continue;
            }
            for j in 0..rho.dim() {
                let dj = basis_digits(j, modes, rho.cutoff());
                if !keep(&dj) {
                    continue;
                }
                let mut rec: Vec<String> = di.iter().chain(&dj).map(|n| n.to_string()).collect();
                rec.push(m[(i, j)].norm().to_string());
                w.write_record(&rec)?;
            }
        }
        let data = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.bytes(&format!("{stem}_abs.csv"), &data)
    }
}

#[derive(Serialize)]
struct SwapReport<'a> {
    reflectivity: f64,
    channel: ChannelSpec,
    channel_params: crate::channel::GaussianChannelParams,
    initial: &'a NegativityReport,
    swapped: &'a NegativityReport,
    swapped_cutoff: usize,
}

#[derive(Serialize)]
struct ScanPeak {
    r: f64,
    g_at_max: f64,
    max_log_negativity: f64,
}

#[derive(Serialize)]
struct ChshReport {
    x: f64,
    y: f64,
    #[serde(rename = "S")]
    s: f64,
    #[serde(rename = "S_closed_form")]
    s_closed_form: f64,
    angles: [f64; 4],
    correlations: [f64; 4],
}

#[derive(Serialize)]
struct TeleportReport {
    x: f64,
    y: f64,
    #[serde(rename = "F_av")]
    f_av: f64,
    bloch_mean: f64,
    bloch_std_error: f64,
    samples: usize,
    seed: u64,
    tele_success: f64,
    #[serde(rename = "F_alpha_1")]
    f_alpha_one: f64,
}

#[derive(Serialize)]
struct TomographyReport {
    samples: usize,
    phases: usize,
    seed: u64,
    cutoff: usize,
    diagnostics: MleDiagnostics,
    fidelity_to_truth: f64,
    trace_distance_to_truth: f64,
    log_negativity: f64,
    postselect: Option<PostSelectSummary>,
    /// Spreads of `[S, F_av, E_ps, P]` over resampled datasets.
    bootstrap: Option<BootstrapReport>,
}

#[derive(Serialize)]
struct CompareOutput<'a> {
    loss_fit: Option<&'a LossFit>,
    report: &'a ComparisonReport,
}

fn canonical_hash(config: &RunConfig) -> Result<String> {
    let mut c = config.clone();
    c.output = PathBuf::new();
    Ok(hex(&Sha256::digest(serde_json::to_vec(&c)?)))
}

fn model_info(config: &RunConfig, fit: Option<&LossFit>) -> ModelInfo {
    let source = if config.source.impurity.is_some() { SourceModel::Measured } else { SourceModel::Ideal };
    let losses = match fit {
        Some(f) => LossModel::Fitted { pre_loss: f.pre_loss, post_loss: f.post_loss },
        None if config.channel.pre_loss < 1.0 || config.channel.post_loss < 1.0 => {
            LossModel::Manual { pre_loss: config.channel.pre_loss, post_loss: config.channel.post_loss }
        }
        None => LossModel::None,
    };
    ModelInfo { source, losses }
}

/// Maps an error to the process exit status: 2 for configuration problems,
/// 3 for violated numerical invariants, 1 for I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParameter { .. } | Error::InvalidModes(_) | Error::MissingQuantity(_) => 2,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
        _ => 3,
    }
}

/// Exit status for a finished run.
pub fn run_exit_code(out: &RunOutput) -> i32 {
    if out.converged { 0 } else { 4 }
}

/// Executes one configured experiment, writing every artifact plus
/// `manifest.json` into the configured output directory.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let experiment = config.experiment.ok_or_else(|| Error::Config("no experiment given".into()))?;
    let mut config = config.clone();
    let mut art = Artifacts::new(&config.output)?;
    let split = config.source.spec();

    let fit = if config.compare.enabled && config.compare.fit_losses {
        let f = fit_losses(&split, &reference_table(), config.cutoff)?;
        config.channel.pre_loss = f.pre_loss;
        config.channel.post_loss = f.post_loss;
        Some(f)
    } else {
        None
    };
    let channel = config.channel.spec();
    let ctx = Context::swapped(split.reflectivity, channel.r, channel.g);
    let mut values = Vec::new();
    let mut converged = true;
    let push = |values: &mut Vec<SimulatedValue>, quantity, context, value| values.push(SimulatedValue { quantity, context, value });

    let initial = split_photon(&split, config.cutoff)?;
    let swapped = || apply_channel(&initial, 1, &channel);
    let record_ps = |values: &mut Vec<SimulatedValue>, s: &PostSelectSummary| {
        for (q, v) in [(Quantity::P, s.p), (Quantity::EPs, s.e_ps), (Quantity::S, s.s), (Quantity::FAv, s.f_av)] {
            values.push(SimulatedValue { quantity: q, context: ctx, value: v });
        }
    };

    match experiment {
        Experiment::Swap => {
            let rho = swapped()?;
            let e_ab = log_negativity(&initial, &[0])?;
            let e_ad = log_negativity(&rho, &[0])?;
            art.state("initial_state", &initial)?;
            art.state("swapped_state", &rho)?;
            art.json(
                "swap.json",
                &SwapReport {
                    reflectivity: split.reflectivity,
                    channel,
                    channel_params: channel_params(&channel)?,
                    initial: &e_ab,
                    swapped: &e_ad,
                    swapped_cutoff: rho.cutoff(),
                },
            )?;
            push(&mut values, Quantity::EAb, Context::initial(split.reflectivity), e_ab.log_negativity);
            push(&mut values, Quantity::EAd, ctx, e_ad.log_negativity);
            if config.postselect.enabled {
                let s = summarize(&rho)?;
                art.state("postselected_state", &s.rho_ps)?;
                art.json("postselect.json", &s)?;
                record_ps(&mut values, &s);
            }
            if config.tomography.enabled {
                converged &= tomography(&config, &rho, &mut art)?;
            }
        }
        Experiment::Scan => {
            let spec = GainScanSpec {
                split: split.clone(),
                r_values: config.scan.r_values.clone(),
                g_values: config.scan.g_values.clone(),
                pre_loss: channel.pre_loss,
                post_loss: channel.post_loss,
                cutoff: config.cutoff,
            };
            let rows = gain_scan(&spec)?;
            let mut data = Vec::new();
            write_scan_csv(&rows, &mut data)?;
            art.bytes("scan.csv", &data)?;
            let peaks: Vec<ScanPeak> = config
                .scan
                .r_values
                .iter()
                .map(|&r| {
                    let best = rows
                        .iter()
                        .filter(|row| row.r == r)
                        .fold(None::<&ScanRow>, |b, row| match b {
                            Some(b) if b.log_negativity >= row.log_negativity => Some(b),
                            _ => Some(row),
                        })
                        .expect("every r has a row");
                    ScanPeak { r, g_at_max: best.g, max_log_negativity: best.log_negativity }
                })
                .collect();
            art.json("scan_peaks.json", &peaks)?;
            for row in &rows {
                push(&mut values, Quantity::EAd, Context::swapped(split.reflectivity, row.r, row.g), row.log_negativity);
            }
            push(&mut values, Quantity::EAb, Context::initial(split.reflectivity), initial_value(&split, config.cutoff)?.value);
        }
        Experiment::Postselect => {
            let rho = swapped()?;
            art.state("swapped_state", &rho)?;
            let s = summarize(&rho)?;
            art.state("postselected_state", &s.rho_ps)?;
            art.json("postselect.json", &s)?;
            record_ps(&mut values, &s);
        }
        Experiment::Chsh => {
            let rho = swapped()?;
            let block = extract_qubit_block(&rho)?;
            let (x, y) = block.xy()?;
            let (a, a2, d, d2) = CANONICAL_ANGLES;
            let correlations = [
                chsh_correlation(&block, a, d)?,
                chsh_correlation(&block, a, d2)?,
                chsh_correlation(&block, a2, d)?,
                chsh_correlation(&block, a2, d2)?,
            ];
            let s = chsh_s(&block, CANONICAL_ANGLES)?;
            art.json(
                "chsh.json",
                &ChshReport {
                    x,
                    y,
                    s,
                    s_closed_form: (2f64.sqrt() * (2.0 * x + y - 1.0)).abs(),
                    angles: [a, a2, d, d2],
                    correlations,
                },
            )?;
            art.bytes("chsh_grid.csv", &chsh_grid(&block)?)?;
            push(&mut values, Quantity::S, ctx, s);
        }
        Experiment::Teleport => {
            let rho = swapped()?;
            let block = extract_qubit_block(&rho)?;
            let (x, y) = block.xy()?;
            let n = config.teleport.samples;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut fids = Vec::with_capacity(n);
            for _ in 0..n {
                let (alpha, beta) = bloch_qubit(rng.random(), rng.random());
                fids.push(teleport_qubit(&block, alpha, beta)?.fidelity);
            }
            let mean = fids.iter().sum::<f64>() / n as f64;
            let var = fids.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let one = teleport_qubit(&block, 1.0.into(), 0.0.into())?;
            let f_av = (1.0 + x + y) / 3.0;
            art.json(
                "teleport.json",
                &TeleportReport {
                    x,
                    y,
                    f_av,
                    bloch_mean: mean,
                    bloch_std_error: (var / n as f64).sqrt(),
                    samples: n,
                    seed: config.seed,
                    tele_success: block.success_probability() / 4.0,
                    f_alpha_one: one.fidelity,
                },
            )?;
            push(&mut values, Quantity::FAv, ctx, f_av);
        }
        Experiment::Tomo => {
            let rho = swapped()?;
            art.state("swapped_state", &rho)?;
            converged &= tomography(&config, &rho, &mut art)?;
        }
    }

    let sim = SimulatedValues { model: model_info(&config, fit.as_ref()), values };
    let comparison = if config.compare.enabled {
        let rows: Vec<_> = reference_table().into_iter().filter(|r| sim.covers(r)).collect();
        let report = compare_to_paper(&sim, &rows)?;
        art.json("compare.json", &CompareOutput { loss_fit: fit.as_ref(), report: &report })?;
        Some(report)
    } else {
        None
    };

    let manifest = Manifest {
        tool: "hybridswap",
        version: env!("CARGO_PKG_VERSION"),
        experiment,
        seed: config.seed,
        config_sha256: canonical_hash(&config)?,
        config: config.clone(),
        converged,
        files: art.files.clone(),
    };
    let mut data = serde_json::to_vec_pretty(&manifest)?;
    data.push(b'\n');
    fs::write(art.dir.join("manifest.json"), data)?;
    Ok(RunOutput { dir: art.dir, files: art.files, converged, values: sim, comparison })
}

fn chsh_grid(block: &QubitBlock) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["theta_a", "theta_d", "correlation", "correlation_matrix_path"])?;
    for i in 0..10 {
        for j in 0..10 {
            let (ta, td) = (std::f64::consts::PI * i as f64 / 10.0, std::f64::consts::PI * j as f64 / 10.0);
            let e = chsh_correlation(block, ta, td)?;
            let m = chsh_correlation_matrix(block, ta, td)?;
            w.write_record([ta.to_string(), td.to_string(), e.to_string(), m.to_string()])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Samples, reconstructs and reports; returns the convergence flag.
fn tomography(config: &RunConfig, truth: &FockDensityMatrix, art: &mut Artifacts) -> Result<bool> {
    let t = &config.tomography;
    let seed = t.seed.unwrap_or(config.seed);
    let data = sample(truth, &default_schedule(t.phases), t.n_samples, seed)?;
    let (mut csv_bytes, mut sidecar) = (Vec::new(), Vec::new());
    write_dataset(&data, &mut csv_bytes, &mut sidecar)?;
    art.bytes("dataset.csv", &csv_bytes)?;
    art.bytes("dataset.json", &sidecar)?;
    let opts = MleOptions { max_iter: t.max_iter, tol: t.tol, ..MleOptions::default() };
    let (rho, diagnostics) = mle_reconstruct_from(&data, t.cutoff, &opts, None)?;
    art.state("reconstruction", &rho)?;
    let reference = truth.truncate(t.cutoff)?.normalize()?;
    let statistic = |r: &FockDensityMatrix| {
        let s = summarize(r)?;
        Ok(vec![s.s, s.f_av, s.e_ps, s.p])
    };
    let boot = if t.bootstrap >= 2 { Some(bootstrap(&data, &rho, &opts, t.bootstrap, seed, statistic)?) } else { None };
    let converged = diagnostics.converged;
    art.json(
        "tomography.json",
        &TomographyReport {
            samples: data.len(),
            phases: t.phases,
            seed,
            cutoff: t.cutoff,
            fidelity_to_truth: state_fidelity(&rho, &reference)?,
            trace_distance_to_truth: trace_distance(&rho, &reference)?,
            log_negativity: log_negativity(&rho, &[0])?.log_negativity,
            postselect: summarize(&rho).ok(),
            diagnostics,
            bootstrap: boot,
        },
    )?;
    Ok(converged)
}
