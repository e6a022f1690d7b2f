//! TOML experiment configuration: schema-validated, unknown keys rejected,
//! defaults matching the standard 8-sensor / 44.1 kHz setup.

use std::path::Path;

use serde::Deserialize;

use doalab_core::beamformers::Method;
use doalab_core::pipeline::{
    PhatMode, ProcessingConfig, Scenario, Sigma2Source, SweepAxis, SweepSpec,
};
use doalab_core::simulator::{SourceKind, SourceSpec};
use doalab_core::spectral::Window;
use doalab_core::{ArrayGeometry, DoaGrid};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_trials")]
    pub trials: usize,
    #[serde(default = "d_snr")]
    pub snr_db: f64,
    #[serde(default = "d_snapshots")]
    pub snapshots: usize,
    #[serde(default)]
    pub array: ArraySection,
    #[serde(default)]
    pub stft: StftSection,
    #[serde(default)]
    pub band: BandSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub method: MethodSection,
    #[serde(default)]
    pub sources: Vec<SourceSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

fn d_seed() -> u64 {
    42
}
fn d_trials() -> usize {
    50
}
fn d_snr() -> f64 {
    20.0
}
fn d_snapshots() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    /// ULA sensor count; used with `spacing_m`.
    pub sensors: Option<usize>,
    /// ULA inter-sensor spacing in meters.
    pub spacing_m: Option<f64>,
    /// Explicit reference-relative spacings; overrides the ULA pair.
    pub spacings_m: Option<Vec<f64>>,
    #[serde(default = "d_speed")]
    pub speed_of_sound_mps: f64,
}

fn d_speed() -> f64 {
    343.0
}

impl Default for ArraySection {
    fn default() -> Self {
        Self {
            sensors: Some(8),
            spacing_m: Some(0.07),
            spacings_m: None,
            speed_of_sound_mps: d_speed(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftSection {
    #[serde(default = "d_fs")]
    pub sample_rate_hz: f64,
    #[serde(default = "d_fft")]
    pub fft_size: usize,
    #[serde(default = "d_hop")]
    pub hop: usize,
    #[serde(default = "d_window")]
    pub window: String,
}

fn d_fs() -> f64 {
    44100.0
}
fn d_fft() -> usize {
    2048
}
fn d_hop() -> usize {
    1536
}
fn d_window() -> String {
    "hann".into()
}

impl Default for StftSection {
    fn default() -> Self {
        Self {
            sample_rate_hz: d_fs(),
            fft_size: d_fft(),
            hop: d_hop(),
            window: d_window(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSection {
    #[serde(default = "d_fmin")]
    pub f_min_hz: f64,
    #[serde(default = "d_fmax")]
    pub f_max_hz: f64,
}

fn d_fmin() -> f64 {
    80.0
}
fn d_fmax() -> f64 {
    8000.0
}

impl Default for BandSection {
    fn default() -> Self {
        Self {
            f_min_hz: d_fmin(),
            f_max_hz: d_fmax(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(default = "d_step")]
    pub grid_step_deg: f64,
    #[serde(default = "d_sep")]
    pub min_separation_deg: f64,
}

fn d_step() -> f64 {
    1.0
}
fn d_sep() -> f64 {
    5.0
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            grid_step_deg: d_step(),
            min_separation_deg: d_sep(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSection {
    #[serde(default = "d_method")]
    pub name: String,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_delta")]
    pub delta: f64,
    #[serde(default = "d_sources")]
    pub sources: usize,
    /// "truth", "none", or a time-domain noise variance.
    #[serde(default = "d_sigma2")]
    pub sigma2: Sigma2Field,
    #[serde(default = "d_phat")]
    pub phat: String,
}

fn d_method() -> String {
    "du".into()
}
fn d_beta() -> f64 {
    1.0
}
fn d_delta() -> f64 {
    1e-4
}
fn d_sources() -> usize {
    1
}
fn d_sigma2() -> Sigma2Field {
    Sigma2Field::Keyword("none".into())
}
fn d_phat() -> String {
    "post-average".into()
}

impl Default for MethodSection {
    fn default() -> Self {
        Self {
            name: d_method(),
            beta: d_beta(),
            delta: d_delta(),
            sources: d_sources(),
            sigma2: d_sigma2(),
            phat: d_phat(),
        }
    }
}

/// `sigma2` accepts either a keyword or a number in TOML.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Sigma2Field {
    Value(f64),
    Keyword(String),
}

impl Sigma2Field {
    pub fn parse(&self) -> Result<Sigma2Source, CliError> {
        match self {
            Sigma2Field::Value(v) if *v >= 0.0 => Ok(Sigma2Source::Provided(*v)),
            Sigma2Field::Value(v) => Err(CliError::Config(format!(
                "method.sigma2 must be >= 0, got {v}"
            ))),
            Sigma2Field::Keyword(s) => match s.as_str() {
                "truth" => Ok(Sigma2Source::Truth),
                "none" => Ok(Sigma2Source::None),
                other => Err(CliError::Config(format!(
                    "method.sigma2 must be 'truth', 'none' or a number, got '{other}'"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    /// "sinusoid", "white" or "bandlimited".
    pub kind: String,
    pub frequency_hz: Option<f64>,
    pub f_lo_hz: Option<f64>,
    pub f_hi_hz: Option<f64>,
    #[serde(default = "d_duration")]
    pub duration_s: f64,
    pub doa_deg: f64,
    #[serde(default = "d_power")]
    pub power: f64,
}

fn d_duration() -> f64 {
    1.0
}
fn d_power() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// "snr_db" or "snapshots".
    pub axis: String,
    pub values: Vec<f64>,
    #[serde(default = "d_sweep_methods")]
    pub methods: Vec<String>,
}

fn d_sweep_methods() -> Vec<String> {
    ["srp", "srp-phat", "du", "mvdr", "music"]
        .map(String::from)
        .to_vec()
}

/// Flag overrides applied on top of the loaded file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub method: Option<String>,
    pub snapshots: Option<usize>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub sources: Option<usize>,
    pub sigma2: Option<String>,
    pub grid_step_deg: Option<f64>,
    pub f_min_hz: Option<f64>,
    pub f_max_hz: Option<f64>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut config: ExperimentConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::from_str("").expect("empty config is valid"),
        };

        if let Some(m) = &overrides.method {
            config.method.name = m.clone();
        }
        if let Some(v) = overrides.snapshots {
            config.snapshots = v;
        }
        if let Some(v) = overrides.beta {
            config.method.beta = v;
        }
        if let Some(v) = overrides.delta {
            config.method.delta = v;
        }
        if let Some(v) = overrides.sources {
            config.method.sources = v;
        }
        if let Some(s) = &overrides.sigma2 {
            config.method.sigma2 = match s.parse::<f64>() {
                Ok(v) => Sigma2Field::Value(v),
                Err(_) => Sigma2Field::Keyword(s.clone()),
            };
        }
        if let Some(v) = overrides.grid_step_deg {
            config.scan.grid_step_deg = v;
        }
        if let Some(v) = overrides.f_min_hz {
            config.band.f_min_hz = v;
        }
        if let Some(v) = overrides.f_max_hz {
            config.band.f_max_hz = v;
        }
        if let Some(v) = overrides.seed {
            config.seed = v;
        }
        if let Some(v) = overrides.trials {
            config.trials = v;
        }
        Ok(config)
    }

    pub fn geometry(&self) -> Result<ArrayGeometry, CliError> {
        let bad = |msg: String| CliError::Config(msg);
        if let Some(spacings) = &self.array.spacings_m {
            return ArrayGeometry::new(spacings.clone(), self.array.speed_of_sound_mps)
                .map_err(|e| bad(format!("array.spacings_m: {e}")));
        }
        let sensors = self
            .array
            .sensors
            .ok_or_else(|| bad("array.sensors missing (or give array.spacings_m)".into()))?;
        let spacing = self
            .array
            .spacing_m
            .ok_or_else(|| bad("array.spacing_m missing (or give array.spacings_m)".into()))?;
        ArrayGeometry::uniform_linear(sensors, spacing, self.array.speed_of_sound_mps)
            .map_err(|e| bad(format!("array: {e}")))
    }

    pub fn window(&self) -> Result<Window, CliError> {
        match self.stft.window.as_str() {
            "hann" => Ok(Window::Hann),
            "rectangular" => Ok(Window::Rectangular),
            other => Err(CliError::Config(format!(
                "stft.window must be 'hann' or 'rectangular', got '{other}'"
            ))),
        }
    }

    pub fn processing(&self) -> Result<ProcessingConfig, CliError> {
        if !(self.stft.sample_rate_hz > 0.0) {
            return Err(CliError::Config(format!(
                "stft.sample_rate_hz must be > 0, got {}",
                self.stft.sample_rate_hz
            )));
        }
        let method: Method = self
            .method
            .name
            .parse()
            .map_err(|e| CliError::Config(format!("method.name: {e}")))?;
        let phat = match self.method.phat.as_str() {
            "post-average" => PhatMode::PostAverage,
            "per-snapshot" => PhatMode::PerSnapshot,
            other => {
                return Err(CliError::Config(format!(
                    "method.phat must be 'post-average' or 'per-snapshot', got '{other}'"
                )))
            }
        };
        let grid = DoaGrid::with_step(-90.0, 90.0, self.scan.grid_step_deg)
            .map_err(|e| CliError::Config(format!("scan.grid_step_deg: {e}")))?;
        let config = ProcessingConfig {
            fft_size: self.stft.fft_size,
            hop: self.stft.hop,
            window: self.window()?,
            f_min_hz: self.band.f_min_hz,
            f_max_hz: self.band.f_max_hz,
            grid,
            method,
            beta: self.method.beta,
            dl_constant: self.method.delta,
            n_sources: self.method.sources,
            snapshots: self.snapshots,
            sigma2: self.method.sigma2.parse()?,
            phat_mode: phat,
            min_separation_deg: self.scan.min_separation_deg,
        };
        if !(0.0..=1.0).contains(&config.beta) {
            return Err(CliError::Config(format!(
                "method.beta must lie in [0, 1], got {}",
                config.beta
            )));
        }
        if !(config.dl_constant > 0.0) {
            return Err(CliError::Config(format!(
                "method.delta must be > 0, got {}",
                config.dl_constant
            )));
        }
        doalab_core::pipeline::validate_config(&self.geometry()?, &config)
            .map_err(|e| CliError::Config(e.to_string()))?;
        doalab_core::spectral::bin_range(
            self.stft.sample_rate_hz,
            config.fft_size,
            config.f_min_hz,
            config.f_max_hz,
        )
        .map_err(|e| CliError::Config(format!("band: {e}")))?;
        Ok(config)
    }

    pub fn source_specs(&self) -> Result<Vec<SourceSpec>, CliError> {
        if self.sources.is_empty() {
            return Err(CliError::Config("config has no [[sources]] entries".into()));
        }
        let fs = self.stft.sample_rate_hz;
        let mut specs = Vec::with_capacity(self.sources.len());
        for (i, s) in self.sources.iter().enumerate() {
            let kind = match s.kind.as_str() {
                "sinusoid" => SourceKind::Sinusoid {
                    frequency_hz: s.frequency_hz.ok_or_else(|| {
                        CliError::Config(format!("sources[{i}]: sinusoid needs frequency_hz"))
                    })?,
                },
                "white" => SourceKind::WhiteBroadband,
                "bandlimited" => SourceKind::Bandlimited {
                    f_lo_hz: s.f_lo_hz.ok_or_else(|| {
                        CliError::Config(format!("sources[{i}]: bandlimited needs f_lo_hz"))
                    })?,
                    f_hi_hz: s.f_hi_hz.ok_or_else(|| {
                        CliError::Config(format!("sources[{i}]: bandlimited needs f_hi_hz"))
                    })?,
                },
                other => {
                    return Err(CliError::Config(format!(
                    "sources[{i}].kind must be 'sinusoid', 'white' or 'bandlimited', got '{other}'"
                )))
                }
            };
            let spec = SourceSpec {
                kind,
                duration_s: s.duration_s,
                doa_deg: s.doa_deg,
                power: s.power,
            };
            spec.validate(fs)
                .map_err(|e| CliError::Config(format!("sources[{i}]: {e}")))?;
            specs.push(spec);
        }
        Ok(specs)
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        Ok(Scenario {
            geometry: self.geometry()?,
            sample_rate: self.stft.sample_rate_hz,
            sources: self.source_specs()?,
            snr_db: self.snr_db,
            seed: self.seed,
        })
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec, CliError> {
        let section = self
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::Config("config has no [sweep] section".into()))?;
        let axis = match section.axis.as_str() {
            "snr_db" => SweepAxis::SnrDb,
            "snapshots" => SweepAxis::Snapshots,
            other => {
                return Err(CliError::Config(format!(
                    "sweep.axis must be 'snr_db' or 'snapshots', got '{other}'"
                )))
            }
        };
        if section.values.is_empty() {
            return Err(CliError::Config("sweep.values is empty".into()));
        }
        let methods = section
            .methods
            .iter()
            .map(|s| {
                s.parse::<Method>()
                    .map_err(|e| CliError::Config(format!("sweep.methods: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if self.trials == 0 {
            return Err(CliError::Config("trials must be >= 1".into()));
        }
        Ok(SweepSpec {
            axis,
            values: section.values.clone(),
            methods,
            trials: self.trials,
        })
    }
}
