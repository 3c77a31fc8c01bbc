//! Experiment configuration files.
//!
//! Configs are TOML or JSON documents with the same schema; the format is
//! picked from the file extension (`.json` is JSON, anything else TOML).
//! Unknown keys are rejected so that typos surface as errors.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use otoc_core::hamiltonians::{build_power_law_xy, ChainMetadata, ChainPart, HamiltonianSpec, PauliString};
use otoc_core::noise::NoiseKind;
use otoc_core::protocol::{time_grid, WOperator};
use otoc_core::qstate::{DiagonalOperator, PhaseFrame};
use otoc_core::varprep::{spectrum_of_zsum, Distribution, Level, Spectrum, DEFAULT_GAUSSIAN_SIGMA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free-form label copied into the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Shots per estimate; 0 writes infinite-shot values only.
    #[serde(default)]
    pub shots: u64,
    /// Exit successfully even when a series carries warnings.
    #[serde(default)]
    pub allow_warnings: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub frame: FrameConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operators: Option<OperatorConfig>,
    #[serde(default)]
    pub times: TimeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shot_noise: Option<ShotNoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub varprep: Option<VarprepConfig>,
}

fn one() -> f64 {
    1.0
}

fn three() -> f64 {
    3.0
}

fn ab() -> ChainPart {
    ChainPart::Ab
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `Σ J/|i-j|^exponent (XᵢXⱼ + YᵢYⱼ)` over the pairs selected by `part`.
    XyChain {
        n: usize,
        #[serde(default = "one")]
        coupling: f64,
        #[serde(default = "three")]
        exponent: f64,
        #[serde(default = "ab")]
        part: ChainPart,
    },
    /// Explicit Pauli sum, e.g. `terms = [{ paulis = "XYI", coeff = 0.5 }]`.
    PauliSum {
        num_qubits: usize,
        terms: Vec<PauliString>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        metadata: Option<ChainMetadata>,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<HamiltonianSpec> {
        Ok(match self {
            ModelConfig::XyChain { n, coupling, exponent, part } => {
                build_power_law_xy(*n, *coupling, *exponent, *part)?
            }
            ModelConfig::PauliSum { num_qubits, terms, metadata } => {
                HamiltonianSpec::new(*num_qubits, terms.clone())?.with_metadata(metadata.clone())
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameName {
    /// Search for a frame in which `Hᵀ = -H`; fall back to the trivial one.
    #[default]
    Auto,
    Trivial,
    /// Quarter turns on even-indexed sites.
    Alternating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrameConfig {
    Named(FrameName),
    /// One angle per site, each 0 or π/2.
    Angles(Vec<f64>),
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig::Named(FrameName::Auto)
    }
}

impl FrameConfig {
    /// `None` asks the core to search.
    pub fn resolve(&self, n: usize) -> Result<Option<PhaseFrame>> {
        Ok(match self {
            FrameConfig::Named(FrameName::Auto) => None,
            FrameConfig::Named(FrameName::Trivial) => Some(PhaseFrame::trivial(n)),
            FrameConfig::Named(FrameName::Alternating) => Some(PhaseFrame::alternating(n)),
            FrameConfig::Angles(a) => {
                ensure!(a.len() == n, "frame lists {} angles for {n} sites", a.len());
                Some(PhaseFrame::from_angles(a)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WConfig {
    /// `σᶻ` on one site.
    Site(usize),
    /// `Σ σᶻ` over the listed sites.
    ZSum { z_sum: Vec<usize> },
}

impl WConfig {
    pub fn to_operator(&self, n: usize) -> Result<WOperator> {
        Ok(match self {
            WConfig::Site(j) => {
                ensure!(*j < n, "W site {j} is outside the {n}-site model");
                WOperator::PauliZ(*j)
            }
            WConfig::ZSum { z_sum } => {
                let label = format!("Zsum{}", z_sum.iter().map(|j| j.to_string()).collect::<Vec<_>>().join("_"));
                WOperator::Diagonal { label, op: DiagonalOperator::z_sum(n, z_sum)? }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub w: WConfig,
    /// `V = σˣ` on each of these sites; one series per site.
    pub v_sites: Vec<usize>,
}

/// Either an evenly spaced grid or explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default)]
    pub start: f64,
    #[serde(default = "three")]
    pub stop: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

fn default_points() -> usize {
    61
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { start: 0.0, stop: 3.0, points: 61, values: None }
    }
}

impl TimeConfig {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if let Some(v) = &self.values {
            return Ok(v.clone());
        }
        if self.points == 0 {
            return Ok(Vec::new());
        }
        Ok(time_grid(self.start, self.stop, self.points)?)
    }
}

/// Repeated sampling of the ideal protocol to measure the shot-noise error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShotNoiseConfig {
    pub shots: Vec<u64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: u64,
}

fn default_repetitions() -> u64 {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSweepConfig {
    pub channel: NoiseKind,
    pub strengths: Vec<f64>,
    /// Also run `-ε` for every strength (ε channels only).
    #[serde(default)]
    pub mirror: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lindblad_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
}

/// Log-log fit of the deviation of `O_est` against the strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub times: Vec<f64>,
    #[serde(default = "default_fit_strengths")]
    pub strengths: Vec<f64>,
}

pub fn default_fit_strengths() -> Vec<f64> {
    vec![0.0025, 0.005, 0.01, 0.02, 0.04]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarprepConfig {
    pub spectra: Vec<SpectrumConfig>,
    #[serde(default = "default_depths")]
    pub depths: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landscape: Option<LandscapeConfig>,
}

fn default_depths() -> Vec<usize> {
    vec![0, 1, 2]
}

/// `|F₂(α₁, α₂)|` on a square grid, written for every spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeConfig {
    #[serde(default = "default_landscape_points")]
    pub points: usize,
    #[serde(default)]
    pub lower: f64,
    #[serde(default = "two_pi")]
    pub upper: f64,
}

fn default_landscape_points() -> usize {
    101
}

fn two_pi() -> f64 {
    2.0 * std::f64::consts::PI
}

fn half() -> f64 {
    0.5
}

fn gaussian_sigma() -> f64 {
    DEFAULT_GAUSSIAN_SIGMA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumConfig {
    /// `Σ σᶻ` on `k` of `n` qubits (`n` defaults to `k`).
    Zsum {
        k: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
    },
    Uniform,
    Arcsine,
    WignerSemicircle,
    Gaussian {
        #[serde(default = "gaussian_sigma")]
        sigma: f64,
    },
    /// `±1` with `P(+1) = q`.
    Bernoulli {
        #[serde(default = "half")]
        q: f64,
    },
    TwoPoint {
        low: f64,
        high: f64,
        q: f64,
    },
    Levels {
        num_qubits: usize,
        levels: Vec<Level>,
    },
}

impl SpectrumConfig {
    pub fn build(&self) -> Result<Spectrum> {
        Ok(match self {
            SpectrumConfig::Zsum { k, n } => spectrum_of_zsum(*k, n.unwrap_or(*k))?,
            SpectrumConfig::Uniform => Spectrum::continuous(Distribution::Uniform)?,
            SpectrumConfig::Arcsine => Spectrum::continuous(Distribution::Arcsine)?,
            SpectrumConfig::WignerSemicircle => Spectrum::continuous(Distribution::WignerSemicircle)?,
            SpectrumConfig::Gaussian { sigma } => Spectrum::continuous(Distribution::Gaussian { sigma: *sigma })?,
            SpectrumConfig::Bernoulli { q } => Spectrum::continuous(Distribution::bernoulli(*q))?,
            SpectrumConfig::TwoPoint { low, high, q } => {
                Spectrum::continuous(Distribution::TwoPoint { low: *low, high: *high, q: *q })?
            }
            SpectrumConfig::Levels { num_qubits, levels } => Spectrum::discrete(*num_qubits, levels.clone())?,
        })
    }

    /// File-name friendly label.
    pub fn label(&self) -> String {
        match self {
            SpectrumConfig::Zsum { k, .. } => format!("zsum{k}"),
            SpectrumConfig::Uniform => "uniform".into(),
            SpectrumConfig::Arcsine => "arcsine".into(),
            SpectrumConfig::WignerSemicircle => "wigner_semicircle".into(),
            SpectrumConfig::Gaussian { sigma } => format!("gaussian_sigma{sigma:.4}"),
            SpectrumConfig::Bernoulli { q } => format!("bernoulli_q{q}"),
            SpectrumConfig::TwoPoint { low, high, q } => format!("two_point_{low}_{high}_q{q}"),
            SpectrumConfig::Levels { num_qubits, .. } => format!("levels_n{num_qubits}"),
        }
    }
}

/// Parses `text` as JSON when `path` ends in `.json`, TOML otherwise.
pub fn parse_config(text: &str, path: &Path) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = if is_json(path) {
        serde_json::from_str(text).with_context(|| format!("{}: invalid JSON config", path.display()))?
    } else {
        toml::from_str(text).with_context(|| format!("{}: invalid TOML config", path.display()))?
    };
    config.validate()?;
    Ok(config)
}

pub fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

impl ExperimentConfig {
    /// Checks the parts that serde cannot.
    pub fn validate(&self) -> Result<()> {
        if let Some(v) = &self.times.values {
            ensure!(
                self.times.start == 0.0 && self.times.stop == 3.0 && self.times.points == 61,
                "give either `values` or `start`/`stop`/`points` in [times], not both"
            );
            ensure!(v.windows(2).all(|w| w[1] > w[0]), "time values must be strictly increasing");
        }
        if let Some(ops) = &self.operators {
            ensure!(!ops.v_sites.is_empty(), "operators.v_sites is empty");
        }
        if let Some(s) = &self.shot_noise {
            ensure!(
                !s.shots.is_empty() && s.shots.iter().all(|&n| n >= 2),
                "shot_noise.shots needs entries of at least 2"
            );
            ensure!(s.repetitions >= 2, "shot_noise.repetitions must be at least 2");
        }
        if let Some(noise) = &self.noise {
            ensure!(!noise.strengths.is_empty(), "noise.strengths is empty");
            for &s in &noise.strengths {
                noise.channel.validate(s)?;
            }
            if noise.mirror
                && !matches!(
                    noise.channel,
                    NoiseKind::SymmetryBreaking | NoiseKind::UnequalHamiltonians | NoiseKind::IntercopyCoupling
                )
            {
                bail!("noise.mirror only applies to the ε channels");
            }
            if let Some(fit) = &noise.fit {
                ensure!(!fit.times.is_empty(), "noise.fit.times is empty");
            }
        }
        if let Some(v) = &self.varprep {
            ensure!(!v.spectra.is_empty(), "varprep.spectra is empty");
            if let Some(l) = &v.landscape {
                ensure!(l.points >= 2 && l.upper > l.lower, "landscape needs at least 2 points and upper > lower");
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<HamiltonianSpec> {
        self.model.as_ref().context("the config has no [model] section")?.build()
    }

    pub fn operators(&self) -> Result<&OperatorConfig> {
        self.operators.as_ref().context("the config has no [operators] section")
    }
}
