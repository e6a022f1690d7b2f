//! Experiment orchestration: scene synthesis, the STFT -> PSD -> spectrum ->
//! fusion -> locate chain, beampattern tables, and Monte-Carlo sweeps.
//!
//! Every run is a deterministic function of (configuration, seed). Sweeps may
//! execute trials in parallel; results are reduced in a fixed order so the
//! output is identical regardless of thread count.

use rayon::prelude::*;

use crate::array::{steering_grid, ArrayGeometry, DoaGrid, SteeringGrid};
use crate::beamformers::{
    beam_weights, du_noise_aware_spectrum, du_spectrum, music_spectrum, mvdr_dl_spectrum,
    phat_psd_per_snapshot, srp_phat_spectrum, srp_spectrum, BeamWeights, Method,
    NarrowbandSpectrum, RegularizationParams, WeightKind,
};
use crate::error::{Error, Result};
use crate::fusion::{fuse, locate, matched_squared_errors, BroadbandSpectrum, DoaEstimate};
use crate::simulator::{
    add_noise, derive_seed, generate_source, mix, propagate_freefield, NoiseSpec, SourceKind,
    SourceSpec,
};
use crate::spectral::{bin_range, estimate_psd, stft, MultichannelSignal, PsdMatrix, Window};

/// Where the noise power for the noise-aware DU variant comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma2Source {
    /// Use the simulator's ground-truth noise variance.
    Truth,
    /// A user-provided time-domain noise variance.
    Provided(f64),
    /// No noise knowledge available.
    None,
}

/// How SRP-PHAT normalizes: the averaged PSD matrix entrywise, or each
/// snapshot outer product before averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhatMode {
    PostAverage,
    PerSnapshot,
}

/// Processing-side configuration shared by localization runs and sweeps.
#[derive(Debug, Clone)]
pub struct ProcessingConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub window: Window,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub grid: DoaGrid,
    pub method: Method,
    pub beta: f64,
    pub dl_constant: f64,
    pub n_sources: usize,
    pub snapshots: usize,
    pub sigma2: Sigma2Source,
    pub phat_mode: PhatMode,
    pub min_separation_deg: f64,
}

impl Default for ProcessingConfig {
    fn default() -> Self {
        Self {
            fft_size: 2048,
            hop: 1536,
            window: Window::Hann,
            f_min_hz: 80.0,
            f_max_hz: 8000.0,
            grid: DoaGrid::with_step(-90.0, 90.0, 1.0).expect("default grid"),
            method: Method::Du,
            beta: 1.0,
            dl_constant: 1e-4,
            n_sources: 1,
            snapshots: 10,
            sigma2: Sigma2Source::None,
            phat_mode: PhatMode::PostAverage,
            min_separation_deg: 5.0,
        }
    }
}

/// Scene-side configuration: geometry, sources, noise level and base seed.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    pub sample_rate: f64,
    pub sources: Vec<SourceSpec>,
    pub snr_db: f64,
    pub seed: u64,
}

/// Ground truth attached to a synthesized scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneTruth {
    pub doas_deg: Vec<f64>,
    /// Time-domain noise variance actually injected.
    pub sigma2: f64,
    pub seed: u64,
}

const NOISE_SALT: u64 = 0x6e6f_6973;

/// Generate, propagate, mix and add noise for every source of a scenario.
///
/// Scenes from different DOAs lose different propagation margins, so all are
/// truncated to the shortest before mixing.
pub fn synthesize_scene(scenario: &Scenario) -> Result<(MultichannelSignal, SceneTruth)> {
    if scenario.sources.is_empty() {
        return Err(Error::InvalidParameter("scenario has no sources".into()));
    }
    let fs = scenario.sample_rate;
    let mut scenes = Vec::with_capacity(scenario.sources.len());
    for (i, spec) in scenario.sources.iter().enumerate() {
        let samples = generate_source(spec, fs, derive_seed(scenario.seed, i as u64))?;
        scenes.push(propagate_freefield(
            &samples,
            &scenario.geometry,
            spec.doa_deg,
            fs,
        )?);
    }
    let min_len = scenes.iter().map(|s| s.len()).min().unwrap();
    let aligned: Vec<MultichannelSignal> = scenes
        .into_iter()
        .map(|s| {
            if s.len() == min_len {
                Ok(s)
            } else {
                MultichannelSignal::new(
                    s.channels().iter().map(|c| c[..min_len].to_vec()).collect(),
                    fs,
                )
            }
        })
        .collect::<Result<_>>()?;
    let mixed = mix(&aligned)?;
    let (noisy, sigma2) = add_noise(
        &mixed,
        &NoiseSpec {
            snr_db: scenario.snr_db,
            seed: derive_seed(scenario.seed, NOISE_SALT),
        },
    )?;
    Ok((
        noisy,
        SceneTruth {
            doas_deg: scenario.sources.iter().map(|s| s.doa_deg).collect(),
            sigma2,
            seed: scenario.seed,
        },
    ))
}

/// Result of localizing one multichannel recording.
#[derive(Debug, Clone)]
pub struct LocalizeOutcome {
    /// One estimate per PSD window (M consecutive snapshots each).
    pub window_estimates: Vec<DoaEstimate>,
    /// Broadband spectrum averaged across windows.
    pub mean_spectrum: BroadbandSpectrum,
    /// Estimate extracted from the mean spectrum.
    pub pooled_estimate: DoaEstimate,
    /// Bins where noise-aware DU fell back to plain DU, summed over windows.
    pub fallback_bins: usize,
}

/// Validate a processing config against an array before running anything.
pub fn validate_config(geometry: &ArrayGeometry, config: &ProcessingConfig) -> Result<()> {
    if config.snapshots == 0 {
        return Err(Error::InvalidParameter(
            "snapshot count must be >= 1".into(),
        ));
    }
    if config.n_sources == 0 {
        return Err(Error::InvalidParameter("source count must be >= 1".into()));
    }
    if config.method == Method::Music && config.n_sources >= geometry.sensors() {
        return Err(Error::InvalidParameter(format!(
            "MUSIC needs sources < sensors, got {} sources for {} sensors",
            config.n_sources,
            geometry.sensors()
        )));
    }
    if config.method == Method::DuSigma && config.sigma2 == Sigma2Source::None {
        return Err(Error::InvalidParameter(
            "method du-sigma needs a noise power source (truth or a value)".into(),
        ));
    }
    Ok(())
}

/// Localize a recording with the configured method.
///
/// `truth_sigma2` feeds the noise-aware DU variant when the config says
/// [`Sigma2Source::Truth`]; it is the time-domain noise variance and is
/// rescaled by the window energy into the snapshot-spectrum units the PSD
/// matrices live in.
pub fn localize_signal(
    signal: &MultichannelSignal,
    geometry: &ArrayGeometry,
    config: &ProcessingConfig,
    truth_sigma2: Option<f64>,
) -> Result<LocalizeOutcome> {
    let steering = build_steering(geometry, config, signal.sample_rate())?;
    localize_with_steering(
        signal,
        geometry,
        config,
        truth_sigma2,
        &steering,
        config.method,
    )
}

fn build_steering(
    geometry: &ArrayGeometry,
    config: &ProcessingConfig,
    sample_rate: f64,
) -> Result<SteeringGrid> {
    let bins = bin_range(
        sample_rate,
        config.fft_size,
        config.f_min_hz,
        config.f_max_hz,
    )?;
    steering_grid(geometry, config.fft_size, sample_rate, &bins, &config.grid)
}

fn psd_noise_power(config: &ProcessingConfig, truth_sigma2: Option<f64>) -> Result<Option<f64>> {
    let time_domain = match config.sigma2 {
        Sigma2Source::None => return Ok(None),
        Sigma2Source::Provided(v) => v,
        Sigma2Source::Truth => truth_sigma2.ok_or_else(|| {
            Error::InvalidParameter(
                "sigma2 source is 'truth' but no ground-truth noise power is available".into(),
            )
        })?,
    };
    if time_domain < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise power must be >= 0, got {time_domain}"
        )));
    }
    Ok(Some(time_domain * config.window.energy(config.fft_size)))
}

fn localize_with_steering(
    signal: &MultichannelSignal,
    geometry: &ArrayGeometry,
    config: &ProcessingConfig,
    truth_sigma2: Option<f64>,
    steering: &SteeringGrid,
    method: Method,
) -> Result<LocalizeOutcome> {
    if signal.n_channels() != geometry.sensors() {
        return Err(Error::DimensionMismatch(format!(
            "recording has {} channels but the array has {} sensors",
            signal.n_channels(),
            geometry.sensors()
        )));
    }
    let spectra = stft(signal, config.fft_size, config.hop, config.window)?;
    let m = config.snapshots;
    let n_windows = spectra.n_frames() / m;
    if n_windows == 0 {
        return Err(Error::TooFewFrames {
            needed: m,
            end_frame: m - 1,
            available: spectra.n_frames(),
        });
    }
    let bins = steering.bins().clone();
    let noise_power = psd_noise_power(config, truth_sigma2)?;

    let mut window_estimates = Vec::with_capacity(n_windows);
    let mut mean_values: Vec<f64> = vec![0.0; config.grid.len()];
    let mut fallback_bins = 0usize;
    let mut mean_template: Option<BroadbandSpectrum> = None;

    for w in 0..n_windows {
        let end_frame = (w + 1) * m - 1;
        let mut psds = if method == Method::SrpPhat && config.phat_mode == PhatMode::PerSnapshot {
            phat_psd_per_snapshot(&spectra, end_frame, m, &bins)?
        } else {
            estimate_psd(&spectra, end_frame, m, &bins)?
        };
        if let Some(np) = noise_power {
            for psd in &mut psds {
                psd.noise_power = Some(np);
            }
        }
        let nb = window_spectra(&psds, &bins, steering, config, method)?;
        fallback_bins += nb.iter().filter(|s| s.fallback).count();
        let broadband = fuse(&nb, config.beta)?;
        let estimate = locate(
            &broadband,
            &config.grid,
            config.n_sources,
            config.min_separation_deg,
        )?;
        for (acc, v) in mean_values.iter_mut().zip(&broadband.values) {
            *acc += v;
        }
        mean_template.get_or_insert(broadband);
        window_estimates.push(estimate);
    }

    let mut mean_spectrum = mean_template.expect("at least one window");
    let inv = 1.0 / n_windows as f64;
    mean_spectrum.values = mean_values.into_iter().map(|v| v * inv).collect();
    let pooled_estimate = locate(
        &mean_spectrum,
        &config.grid,
        config.n_sources,
        config.min_separation_deg,
    )?;

    Ok(LocalizeOutcome {
        window_estimates,
        mean_spectrum,
        pooled_estimate,
        fallback_bins,
    })
}

fn window_spectra(
    psds: &[PsdMatrix],
    bins: &crate::spectral::BinRange,
    steering: &SteeringGrid,
    config: &ProcessingConfig,
    method: Method,
) -> Result<Vec<NarrowbandSpectrum>> {
    let mut out = Vec::with_capacity(psds.len());
    for (psd, bin) in psds.iter().zip(bins.iter()) {
        let view = steering.bin(bin)?;
        let spectrum = match method {
            Method::Srp => srp_spectrum(psd, &view),
            Method::SrpPhat => {
                if config.phat_mode == PhatMode::PerSnapshot {
                    // Snapshots were phase-normalized before averaging; scan
                    // the averaged matrix as-is.
                    let mut s = srp_spectrum(psd, &view);
                    s.method = Method::SrpPhat;
                    s
                } else {
                    srp_phat_spectrum(psd, &view)
                }
            }
            Method::Du => du_spectrum(psd, &view)?,
            Method::DuSigma => du_noise_aware_spectrum(psd, &view)?,
            Method::Mvdr => {
                let params =
                    RegularizationParams::for_psd(psd, config.dl_constant, config.fft_size)?;
                mvdr_dl_spectrum(psd, &params, &view)?
            }
            Method::Music => music_spectrum(psd, config.n_sources, &view)?,
        };
        out.push(spectrum);
    }
    Ok(out)
}

/// Sweep axis: which scenario knob varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SnrDb,
    Snapshots,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::Snapshots => "snapshots",
        }
    }
}

/// Sweep request: axis values, methods to compare, trials per cell.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub methods: Vec<Method>,
    pub trials: usize,
}

/// One (axis value, method) cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub axis_value: f64,
    pub method: Method,
    pub rmse_deg: f64,
    pub trials: usize,
}

/// Aggregated sweep output.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    pub seed: u64,
}

/// Monte-Carlo sweep: for each axis value and trial, synthesize a fresh
/// seed-derived scene (trial seed = base seed + trial index), localize with
/// every requested method, and pool per-window squared errors into one RMSE
/// per (axis value, method).
///
/// Trials run in parallel under the ambient rayon pool; rows come out in
/// (axis, method) order with trial contributions summed in trial order, so
/// the result is byte-stable across thread counts.
pub fn run_sweep(
    scenario: &Scenario,
    config: &ProcessingConfig,
    sweep: &SweepSpec,
) -> Result<SweepResult> {
    if sweep.trials == 0 {
        return Err(Error::InvalidParameter("sweep needs trials >= 1".into()));
    }
    if sweep.values.is_empty() {
        return Err(Error::InvalidParameter("sweep axis has no values".into()));
    }
    if sweep.methods.is_empty() {
        return Err(Error::InvalidParameter("sweep has no methods".into()));
    }
    // Validated eagerly so a bad config fails before any trial runs.
    for m in &sweep.methods {
        let mut probe = config.clone();
        probe.method = *m;
        validate_config(&scenario.geometry, &probe)?;
    }

    // (axis value, trial) cells are independent; collect preserves order.
    let cells: Vec<(usize, usize)> = (0..sweep.values.len())
        .flat_map(|v| (0..sweep.trials).map(move |t| (v, t)))
        .collect();

    let per_cell: Vec<Result<Vec<Vec<f64>>>> = cells
        .par_iter()
        .map(|&(value_idx, trial)| {
            run_trial(scenario, config, sweep, value_idx, trial).map_err(|e| Error::TrialFailed {
                trial,
                seed: scenario.seed.wrapping_add(trial as u64),
                source: Box::new(e),
            })
        })
        .collect();

    // Pool squared errors in deterministic (axis, trial, method) order.
    let n_methods = sweep.methods.len();
    let mut sums = vec![vec![(0.0f64, 0usize); n_methods]; sweep.values.len()];
    for (cell, result) in cells.iter().zip(per_cell) {
        let per_method = result?;
        for (m_idx, errors) in per_method.iter().enumerate() {
            let slot = &mut sums[cell.0][m_idx];
            for e in errors {
                slot.0 += e;
                slot.1 += 1;
            }
        }
    }

    let mut rows = Vec::with_capacity(sweep.values.len() * n_methods);
    for (v_idx, &axis_value) in sweep.values.iter().enumerate() {
        for (m_idx, &method) in sweep.methods.iter().enumerate() {
            let (sum, count) = sums[v_idx][m_idx];
            rows.push(SweepRow {
                axis_value,
                method,
                rmse_deg: (sum / count as f64).sqrt(),
                trials: sweep.trials,
            });
        }
    }
    Ok(SweepResult {
        axis: sweep.axis,
        rows,
        seed: scenario.seed,
    })
}

/// One trial: returns pooled squared errors per method (over windows).
fn run_trial(
    scenario: &Scenario,
    config: &ProcessingConfig,
    sweep: &SweepSpec,
    value_idx: usize,
    trial: usize,
) -> Result<Vec<Vec<f64>>> {
    let value = sweep.values[value_idx];
    let mut scenario = scenario.clone();
    scenario.seed = scenario.seed.wrapping_add(trial as u64);
    let mut config = config.clone();
    match sweep.axis {
        SweepAxis::SnrDb => scenario.snr_db = value,
        SweepAxis::Snapshots => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "snapshot axis values must be positive integers, got {value}"
                )));
            }
            config.snapshots = value as usize;
        }
    }

    let (signal, truth) = synthesize_scene(&scenario)?;
    let steering = build_steering(&scenario.geometry, &config, scenario.sample_rate)?;

    let mut per_method = Vec::with_capacity(sweep.methods.len());
    for &method in &sweep.methods {
        let outcome = localize_with_steering(
            &signal,
            &scenario.geometry,
            &config,
            Some(truth.sigma2),
            &steering,
            method,
        )?;
        let mut errors = Vec::new();
        for est in &outcome.window_estimates {
            errors.extend(matched_squared_errors(&est.angles_deg, &truth.doas_deg));
        }
        per_method.push(errors);
    }
    Ok(per_method)
}

/// Beampattern table: each family's look-direction weights `w(theta)`
/// responding to the source steering vector, `|w^H(theta) a(theta_0)|^2` in
/// dB, max-normalized to 0 dB.
#[derive(Debug, Clone)]
pub struct BeampatternTable {
    pub grid: DoaGrid,
    pub frequency_hz: f64,
    pub bin: usize,
    pub steer_deg: f64,
    pub patterns: Vec<(WeightKind, Vec<f64>)>,
}

/// A sinusoid at `frequency_hz` impinges from `steer_deg`; the PSD matrix is
/// estimated from the first window of the noisy scene, each family's weights
/// scan the grid, and every look direction's response to the impinging
/// direction is recorded. The distortionless constraint pins the response at
/// `steer_deg` to unity.
pub fn beampattern_table(
    scenario: &Scenario,
    config: &ProcessingConfig,
    frequency_hz: f64,
    steer_deg: f64,
) -> Result<BeampatternTable> {
    if frequency_hz < config.f_min_hz || frequency_hz > config.f_max_hz {
        return Err(Error::InvalidParameter(format!(
            "beampattern frequency {frequency_hz} Hz outside band [{}, {}] Hz",
            config.f_min_hz, config.f_max_hz
        )));
    }
    let fs = scenario.sample_rate;
    let bin = (frequency_hz * config.fft_size as f64 / fs).round() as usize;

    let mut scenario = scenario.clone();
    scenario.sources = vec![SourceSpec {
        kind: SourceKind::Sinusoid { frequency_hz },
        duration_s: 1.0,
        doa_deg: steer_deg,
        power: 1.0,
    }];
    let (signal, _truth) = synthesize_scene(&scenario)?;

    let spectra = stft(&signal, config.fft_size, config.hop, config.window)?;
    let m = config.snapshots.min(spectra.n_frames());
    let bins = crate::spectral::BinRange::new(bin, bin);
    let psd = estimate_psd(&spectra, m - 1, m, &bins)?.remove(0);
    let params = RegularizationParams::for_psd(&psd, config.dl_constant, config.fft_size)?;

    let steering = steering_grid(&scenario.geometry, config.fft_size, fs, &bins, &config.grid)?;
    let view = steering.bin(bin)?;
    let source =
        crate::array::steering_vector(&scenario.geometry, bin, config.fft_size, fs, steer_deg)?;

    let mut patterns = Vec::new();
    for kind in WeightKind::ALL {
        let weights = beam_weights(kind, &psd, &params, config.n_sources, &view)?;
        patterns.push((kind, pattern_db(&weights, &source.entries)));
    }
    Ok(BeampatternTable {
        grid: config.grid.clone(),
        frequency_hz,
        bin,
        steer_deg,
        patterns,
    })
}

fn pattern_db(weights: &BeamWeights, source: &[num_complex::Complex64]) -> Vec<f64> {
    let linear: Vec<f64> = (0..weights.n_angles())
        .map(|idx| {
            let w = weights.weight(idx);
            let dot: num_complex::Complex64 =
                w.iter().zip(source).map(|(wi, ai)| wi.conj() * ai).sum();
            dot.norm_sqr()
        })
        .collect();
    let max = linear.iter().cloned().fold(f64::MIN, f64::max);
    linear
        .into_iter()
        .map(|v| 10.0 * (v / max).max(1e-300).log10())
        .collect()
}

/// Half-power (-3 dB) width around the global peak of a linear-power pattern,
/// with linear interpolation between grid points. `None` when the pattern
/// never drops below half power on either side.
pub fn half_power_beamwidth(angles_deg: &[f64], linear: &[f64]) -> Option<f64> {
    let peak = linear
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())?
        .0;
    let half = linear[peak] / 2.0;

    let mut left = None;
    for i in (0..peak).rev() {
        if linear[i] <= half {
            let t = (half - linear[i]) / (linear[i + 1] - linear[i]);
            left = Some(angles_deg[i] + t * (angles_deg[i + 1] - angles_deg[i]));
            break;
        }
    }
    let mut right = None;
    for i in peak + 1..linear.len() {
        if linear[i] <= half {
            let t = (half - linear[i - 1]) / (linear[i] - linear[i - 1]);
            right = Some(angles_deg[i - 1] + t * (angles_deg[i] - angles_deg[i - 1]));
            break;
        }
    }
    Some(right? - left?)
}
