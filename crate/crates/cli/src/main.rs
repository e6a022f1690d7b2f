//! `doalab` — scenario simulation, DOA localization, beampattern dumps and
//! Monte-Carlo RMSE sweeps for a uniform linear microphone array.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 data/runtime error.

// `!(x > 0.0)` guards reject NaN as well; keep them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod wav;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use doalab_core::error::Error as CoreError;
use doalab_core::pipeline::{
    beampattern_table, localize_signal, run_sweep, synthesize_scene, Sigma2Source,
};
use doalab_core::MultichannelSignal;

use config::{ExperimentConfig, Overrides};

#[derive(Debug, Error)]
pub enum CliError {
    /// Usage or configuration problems; exit status 2.
    #[error("{0}")]
    Config(String),
    /// Data or runtime problems; exit status 3.
    #[error("{0}")]
    Data(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter(_) | CoreError::DimensionMismatch(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "doalab",
    version,
    about = "Broadband array-processing experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Experiment TOML config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Spatial-spectrum method: srp, srp-phat, du, du-sigma, mvdr, music.
    #[arg(long, global = true)]
    method: Option<String>,
    /// Snapshots M averaged into each PSD estimate.
    #[arg(long, global = true)]
    snapshots: Option<usize>,
    /// Broadband fusion exponent in [0, 1].
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// MVDR loading constant.
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Source count for MUSIC and peak picking.
    #[arg(long, global = true)]
    sources: Option<usize>,
    /// Noise power for du-sigma: 'truth', 'none', or a variance.
    #[arg(long, global = true)]
    sigma2: Option<String>,
    /// DOA grid step in degrees.
    #[arg(long = "grid-step", global = true)]
    grid_step: Option<f64>,
    /// Band lower edge in Hz.
    #[arg(long, global = true)]
    fmin: Option<f64>,
    /// Band upper edge in Hz.
    #[arg(long, global = true)]
    fmax: Option<f64>,
    /// Base seed; trial i uses seed + i.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte-Carlo trials per sweep cell.
    #[arg(long, global = true)]
    trials: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            method: self.method.clone(),
            snapshots: self.snapshots,
            beta: self.beta,
            delta: self.delta,
            sources: self.sources,
            sigma2: self.sigma2.clone(),
            grid_step_deg: self.grid_step,
            f_min_hz: self.fmin,
            f_max_hz: self.fmax,
            seed: self.seed,
            trials: self.trials,
        }
    }

    fn load(&self) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::load(self.config.as_deref(), &self.overrides())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a multichannel scene to WAV plus a truth sidecar.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Output WAV path; the sidecar lands next to it as *.truth.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate DOAs from a multichannel WAV and dump the fused spectrum.
    Localize {
        #[command(flatten)]
        common: CommonArgs,
        /// Input multichannel WAV.
        wav: PathBuf,
        /// Fused-spectrum CSV path.
        #[arg(long, default_value = "spectrum.csv")]
        out: PathBuf,
    },
    /// Dump beampatterns of all weight families at one frequency and steer.
    Beampattern {
        #[command(flatten)]
        common: CommonArgs,
        /// Narrowband frequency in Hz.
        #[arg(long)]
        freq: f64,
        /// Steering (= impinging) direction in degrees.
        #[arg(long, allow_hyphen_values = true)]
        steer: f64,
        /// Beampattern CSV path.
        #[arg(long, default_value = "beampattern.csv")]
        out: PathBuf,
    },
    /// Monte-Carlo RMSE sweep over SNR or snapshot count.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Sweep CSV path.
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
        /// Worker threads for trials (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
}

/// Ground-truth sidecar written next to every simulated WAV.
#[derive(Debug, Serialize, Deserialize)]
struct TruthSidecar {
    doas_deg: Vec<f64>,
    sigma2: f64,
    seed: u64,
    sample_rate_hz: f64,
    geometry: GeometrySidecar,
}

#[derive(Debug, Serialize, Deserialize)]
struct GeometrySidecar {
    spacings_m: Vec<f64>,
    speed_of_sound_mps: f64,
}

fn sidecar_path(wav: &Path) -> PathBuf {
    wav.with_extension("truth.json")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { common, out } => cmd_simulate(&common, &out),
        Command::Localize { common, wav, out } => cmd_localize(&common, &wav, &out),
        Command::Beampattern {
            common,
            freq,
            steer,
            out,
        } => cmd_beampattern(&common, freq, steer, &out),
        Command::Sweep {
            common,
            out,
            threads,
        } => cmd_sweep(&common, &out, threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e @ CliError::Data(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn cmd_simulate(common: &CommonArgs, out: &Path) -> Result<(), CliError> {
    let config = common.load()?;
    config.processing()?; // validate the full config even though only the scene is used
    let scenario = config.scenario()?;
    let (signal, truth) = synthesize_scene(&scenario)?;

    wav::write_wav(out, signal.channels(), scenario.sample_rate)?;
    let sidecar = TruthSidecar {
        doas_deg: truth.doas_deg,
        sigma2: truth.sigma2,
        seed: truth.seed,
        sample_rate_hz: scenario.sample_rate,
        geometry: GeometrySidecar {
            spacings_m: scenario.geometry.spacings_m().to_vec(),
            speed_of_sound_mps: scenario.geometry.speed_of_sound(),
        },
    };
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| CliError::Data(format!("sidecar: {e}")))?;
    let sidecar_file = sidecar_path(out);
    fs::write(&sidecar_file, json + "\n")
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", sidecar_file.display())))?;

    println!(
        "wrote {} ({} channels, {} samples at {} Hz) and {}",
        out.display(),
        signal.n_channels(),
        signal.len(),
        scenario.sample_rate,
        sidecar_file.display()
    );
    Ok(())
}

fn cmd_localize(common: &CommonArgs, wav_path: &Path, out: &Path) -> Result<(), CliError> {
    let config = common.load()?;
    let processing = config.processing()?;
    let geometry = config.geometry()?;

    let wav = wav::read_wav(wav_path)?;
    if wav.channels.len() != geometry.sensors() {
        return Err(CliError::Config(format!(
            "recording has {} channels but the configured array has {} sensors",
            wav.channels.len(),
            geometry.sensors()
        )));
    }
    let signal = MultichannelSignal::new(wav.channels, wav.sample_rate)
        .map_err(|e| CliError::Data(e.to_string()))?;

    let truth_sigma2 = if processing.sigma2 == Sigma2Source::Truth {
        let path = sidecar_path(wav_path);
        let text = fs::read_to_string(&path).map_err(|e| {
            CliError::Data(format!(
                "sigma2 = truth needs the sidecar {}: {e}",
                path.display()
            ))
        })?;
        let sidecar: TruthSidecar = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Some(sidecar.sigma2)
    } else {
        None
    };

    let outcome =
        localize_signal(&signal, &geometry, &processing, truth_sigma2).map_err(|e| match e {
            CoreError::TooFewFrames { .. } => CliError::Data(e.to_string()),
            other => CliError::from(other),
        })?;

    let angles: Vec<String> = outcome
        .pooled_estimate
        .angles_deg
        .iter()
        .map(|a| format!("{a}"))
        .collect();
    println!("estimated DOA (deg): {}", angles.join(", "));
    println!("windows: {}", outcome.window_estimates.len());
    if outcome.fallback_bins > 0 {
        println!("noise-aware fallback bins: {}", outcome.fallback_bins);
    }

    let mut csv = String::from("theta_deg,power\n");
    for (theta, p) in processing
        .grid
        .angles_deg()
        .iter()
        .zip(&outcome.mean_spectrum.values)
    {
        csv.push_str(&format!("{theta},{p}\n"));
    }
    write_text(out, &csv)?;
    println!("spectrum: {}", out.display());
    Ok(())
}

fn cmd_beampattern(common: &CommonArgs, freq: f64, steer: f64, out: &Path) -> Result<(), CliError> {
    let config = common.load()?;
    let processing = config.processing()?;
    // Beampatterns synthesize their own sinusoid; config sources are ignored.
    let scenario = doalab_core::Scenario {
        geometry: config.geometry()?,
        sample_rate: config.stft.sample_rate_hz,
        sources: Vec::new(),
        snr_db: config.snr_db,
        seed: config.seed,
    };

    let table = beampattern_table(&scenario, &processing, freq, steer)?;

    let mut csv = String::from("theta_deg,conventional,du,mvdr,music\n");
    for (idx, theta) in table.grid.angles_deg().iter().enumerate() {
        csv.push_str(&format!("{theta}"));
        for (_, db) in &table.patterns {
            csv.push_str(&format!(",{}", db[idx]));
        }
        csv.push('\n');
    }
    write_text(out, &csv)?;
    println!(
        "beampattern at {} Hz (bin {}), steered to {} deg: {}",
        table.frequency_hz,
        table.bin,
        table.steer_deg,
        out.display()
    );
    Ok(())
}

fn cmd_sweep(common: &CommonArgs, out: &Path, threads: Option<usize>) -> Result<(), CliError> {
    let config = common.load()?;
    let processing = config.processing()?;
    let scenario = config.scenario()?;
    let sweep = config.sweep_spec()?;

    let result = match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Config(format!("--threads {t}: {e}")))?;
            pool.install(|| run_sweep(&scenario, &processing, &sweep))
        }
        None => run_sweep(&scenario, &processing, &sweep),
    }?;

    let mut csv = String::from("axis_value,method,rmse_deg,trials\n");
    for row in &result.rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.axis_value,
            row.method.name(),
            row.rmse_deg,
            row.trials
        ));
    }
    write_text(out, &csv)?;
    println!(
        "sweep over {} ({} cells x {} trials): {}",
        result.axis.name(),
        result.rows.len(),
        sweep.trials,
        out.display()
    );
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = fs::File::create(path)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    f.write_all(text.as_bytes())
        .map_err(|e| CliError::Data(format!("write {}: {e}", path.display())))
}
