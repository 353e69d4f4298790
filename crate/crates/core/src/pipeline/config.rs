//! TOML run configuration.
//!
//! ```toml
//! experiment = "postselect"   # swap | scan | postselect | tomo | chsh | teleport
//! seed = 7
//! output = "runs/ps"
//! cutoff = 5                  # per-mode cutoff of the input state
//!
//! [source]
//! reflectivity = 0.5
//! impurity = { ideal = 0.806, vacuum = 0.183, multiphoton = 0.011 }
//!
//! [channel]
//! r = 1.01
//! g = 0.79                    # omit for g = tanh r
//! pre_loss = 1.0              # transmissivities, 1 = lossless
//! post_loss = 1.0
//!
//! [scan]
//! r_values = [0.0, 0.71, 1.01]
//! g_values = [0.0, 0.5, 1.0]  # omit for 21 points over [0, 1.2]
//!
//! [postselect]
//! enabled = true
//!
//! [tomography]
//! enabled = false
//! n_samples = 100000
//! phases = 12
//! cutoff = 3
//! max_iter = 2000
//! tol = 1e-7
//! bootstrap = 0
//!
//! [teleport]
//! samples = 100000
//!
//! [compare]
//! enabled = false
//! fit_losses = false
//! ```
//!
//! Every section and key is optional except `experiment`, which may also
//! come from the command line.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSpec;
use crate::entanglement::default_gain_grid;
use crate::state_prep::{Impurity, SplitPhotonSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Swap,
    Scan,
    Postselect,
    Tomo,
    Chsh,
    Teleport,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Swap,
        Experiment::Scan,
        Experiment::Postselect,
        Experiment::Tomo,
        Experiment::Chsh,
        Experiment::Teleport,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Swap => "swap",
            Experiment::Scan => "scan",
            Experiment::Postselect => "postselect",
            Experiment::Tomo => "tomo",
            Experiment::Chsh => "chsh",
            Experiment::Teleport => "teleport",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}` (expected swap, scan, postselect, tomo, chsh or teleport)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default = "half")]
    pub reflectivity: f64,
    #[serde(default)]
    pub impurity: Option<Impurity>,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self { reflectivity: 0.5, impurity: None }
    }
}

impl SourceConfig {
    pub fn spec(&self) -> SplitPhotonSpec {
        SplitPhotonSpec { reflectivity: self.reflectivity, impurity: self.impurity.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default)]
    pub g: Option<f64>,
    #[serde(default = "one")]
    pub pre_loss: f64,
    #[serde(default = "one")]
    pub post_loss: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { r: default_r(), g: None, pre_loss: 1.0, post_loss: 1.0 }
    }
}

impl ChannelConfig {
    pub fn spec(&self) -> ChannelSpec {
        ChannelSpec::new(self.r, self.gain()).with_losses(self.pre_loss, self.post_loss)
    }

    /// Configured gain, or `tanh r` when unset.
    pub fn gain(&self) -> f64 {
        self.g.unwrap_or_else(|| self.r.tanh())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default = "default_r_values")]
    pub r_values: Vec<f64>,
    #[serde(default = "default_gain_grid")]
    pub g_values: Vec<f64>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { r_values: default_r_values(), g_values: default_gain_grid() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostselectConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
}

impl Default for PostselectConfig {
    fn default() -> Self {
        Self { enabled: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographyConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_phases")]
    pub phases: usize,
    /// Defaults to the run seed.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_tomo_cutoff")]
    pub cutoff: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Bootstrap resamples for S and F_av error bars; 0 disables.
    #[serde(default)]
    pub bootstrap: usize,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            n_samples: default_samples(),
            phases: default_phases(),
            seed: None,
            cutoff: default_tomo_cutoff(),
            max_iter: default_max_iter(),
            tol: default_tol(),
            bootstrap: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeleportConfig {
    /// Haar-random input qubits for the numerical fidelity average.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for TeleportConfig {
    fn default() -> Self {
        Self { samples: default_samples() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(default)]
    pub enabled: bool,
    /// Fit the two transmissivities to the reference endpoints and run with
    /// the fitted values.
    #[serde(default)]
    pub fit_losses: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub postselect: PostselectConfig,
    #[serde(default)]
    pub tomography: TomographyConfig,
    #[serde(default)]
    pub teleport: TeleportConfig,
    #[serde(default)]
    pub compare: CompareConfig,
}

fn half() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_r() -> f64 {
    1.01
}
fn default_r_values() -> Vec<f64> {
    vec![0.0, 0.71, 1.01]
}
fn default_samples() -> usize {
    100_000
}
fn default_phases() -> usize {
    12
}
fn default_tomo_cutoff() -> usize {
    3
}
fn default_max_iter() -> usize {
    2000
}
fn default_tol() -> f64 {
    1e-7
}
fn default_output() -> PathBuf {
    PathBuf::from("hybridswap-out")
}
fn default_cutoff() -> usize {
    5
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config uses defaults")
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the first `key = …` assignment, inline-table entry or
/// `[….key]` header.
fn locate(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|line| {
        let t = line.trim_start();
        if t.starts_with('#') {
            return false;
        }
        if t.starts_with('[') {
            return t.trim_end().trim_end_matches(']').rsplit('.').next().is_some_and(|k| k.trim_start_matches('[') == key);
        }
        t.split(|c| c == ',' || c == '{').any(|part| {
            let part = part.trim_start();
            part.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
        })
    })
    .map(|i| i + 1)
}

fn located(text: &str, key: &str, message: impl fmt::Display) -> Error {
    match locate(text, key) {
        Some(line) => Error::Config(format!("line {line}: {message}")),
        None => Error::Config(message.to_string()),
    }
}

impl RunConfig {
    /// Parses and validates; errors name the offending line where known.
    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().trim().to_string();
            match e.span() {
                Some(span) => Error::Config(format!("line {}: {msg}", line_of(text, span.start))),
                None => Error::Config(msg),
            }
        })?;
        config.validate_with_source(text)?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_source("")
    }

    fn validate_with_source(&self, text: &str) -> Result<()> {
        let relocate = |e: Error| match e {
            Error::InvalidParameter { name, reason } => located(text, name, format!("invalid `{name}`: {reason}")),
            other => Error::Config(other.to_string()),
        };
        self.source.spec().validate().map_err(relocate)?;
        self.channel.spec().validate().map_err(relocate)?;
        if self.cutoff < 2 || self.cutoff > 30 {
            return Err(located(text, "cutoff", format!("cutoff {} outside 2..=30", self.cutoff)));
        }
        if self.scan.r_values.is_empty() || self.scan.r_values.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(located(text, "r_values", "r_values must be a nonempty list of finite values >= 0"));
        }
        if self.scan.g_values.is_empty() || self.scan.g_values.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(located(text, "g_values", "g_values must be a nonempty list of finite values >= 0"));
        }
        let t = &self.tomography;
        if t.n_samples == 0 {
            return Err(located(text, "n_samples", "n_samples must be at least 1"));
        }
        if t.phases == 0 {
            return Err(located(text, "phases", "phases must be at least 1"));
        }
        if !(1..=8).contains(&t.cutoff) {
            return Err(located(text, "cutoff", format!("tomography cutoff {} outside 1..=8", t.cutoff)));
        }
        if t.max_iter == 0 {
            return Err(located(text, "max_iter", "max_iter must be at least 1"));
        }
        if !(t.tol > 0.0) {
            return Err(located(text, "tol", format!("tol {} must be positive", t.tol)));
        }
        if t.bootstrap == 1 {
            return Err(located(text, "bootstrap", "bootstrap needs 0 (off) or at least 2 resamples"));
        }
        if self.teleport.samples < 2 {
            return Err(located(text, "samples", "teleport samples must be at least 2"));
        }
        Ok(())
    }

    /// Experiment from the file, reconciled with one named on the command
    /// line.
    pub fn resolve_experiment(&mut self, requested: Option<Experiment>) -> Result<Experiment> {
        match (self.experiment, requested) {
            (Some(a), Some(b)) if a != b => Err(Error::Config(format!("config is for `{a}` but `{b}` was requested"))),
            (Some(a), _) | (None, Some(a)) => {
                self.experiment = Some(a);
                Ok(a)
            }
            (None, None) => Err(Error::Config("no experiment given".into())),
        }
    }
}
