//! Synthetic multichannel scenes: source waveforms, far-field free-field
//! propagation with exact fractional delays, mixing, and calibrated white
//! Gaussian noise. Everything is a deterministic function of (spec, seed).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::array::ArrayGeometry;
use crate::error::{Error, Result};
use crate::spectral::MultichannelSignal;

/// Source waveform families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceKind {
    /// Pure tone at the given frequency.
    Sinusoid { frequency_hz: f64 },
    /// White Gaussian noise across the full band.
    WhiteBroadband,
    /// White Gaussian noise brickwall-filtered to `[f_lo_hz, f_hi_hz]`.
    Bandlimited { f_lo_hz: f64, f_hi_hz: f64 },
}

/// One source: waveform kind, duration, direction and power at the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub duration_s: f64,
    pub doa_deg: f64,
    pub power: f64,
}

impl SourceSpec {
    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "source duration must be > 0 s, got {}",
                self.duration_s
            )));
        }
        if !(-90.0..=90.0).contains(&self.doa_deg) {
            return Err(Error::InvalidParameter(format!(
                "source DOA must lie in [-90, 90] deg, got {}",
                self.doa_deg
            )));
        }
        if !(self.power > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "source power must be > 0, got {}",
                self.power
            )));
        }
        let highest = match self.kind {
            SourceKind::Sinusoid { frequency_hz } => frequency_hz,
            SourceKind::WhiteBroadband => 0.0,
            SourceKind::Bandlimited { f_lo_hz, f_hi_hz } => {
                if !(0.0 <= f_lo_hz && f_lo_hz < f_hi_hz) {
                    return Err(Error::InvalidParameter(format!(
                        "bandlimited source needs 0 <= f_lo < f_hi, got [{f_lo_hz}, {f_hi_hz}]"
                    )));
                }
                f_hi_hz
            }
        };
        if highest > 0.0 && sample_rate <= 2.0 * highest {
            return Err(Error::InvalidParameter(format!(
                "sample rate {sample_rate} Hz cannot represent content up to {highest} Hz"
            )));
        }
        Ok(())
    }
}

/// Additive sensor-noise request: SNR relative to the received power at the
/// reference sensor. `f64::INFINITY` means no noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
}

/// splitmix64 step; used to derive independent sub-seeds from one base seed.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut z = base ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn gaussian_stream(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let g: f64 = rng.sample(StandardNormal);
            g * scale
        })
        .collect()
}

fn mean_square(samples: &[f64]) -> f64 {
    samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64
}

/// Generate the mono waveform for a source spec.
pub fn generate_source(spec: &SourceSpec, sample_rate: f64, seed: u64) -> Result<Vec<f64>> {
    spec.validate(sample_rate)?;
    let len = (spec.duration_s * sample_rate).round() as usize;
    if len == 0 {
        return Err(Error::InvalidParameter(format!(
            "duration {} s rounds to zero samples at fs={sample_rate}",
            spec.duration_s
        )));
    }
    match spec.kind {
        SourceKind::Sinusoid { frequency_hz } => {
            let amplitude = (2.0 * spec.power).sqrt();
            Ok((0..len)
                .map(|t| {
                    amplitude
                        * (2.0 * std::f64::consts::PI * frequency_hz * t as f64 / sample_rate).sin()
                })
                .collect())
        }
        SourceKind::WhiteBroadband => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(gaussian_stream(&mut rng, len, spec.power.sqrt()))
        }
        SourceKind::Bandlimited { f_lo_hz, f_hi_hz } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let white = gaussian_stream(&mut rng, len, 1.0);
            let filtered = brickwall_filter(&white, sample_rate, f_lo_hz, f_hi_hz)?;
            let ms = mean_square(&filtered);
            if !(ms > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "band [{f_lo_hz}, {f_hi_hz}] Hz retains no energy at fs={sample_rate}"
                )));
            }
            let scale = (spec.power / ms).sqrt();
            Ok(filtered.into_iter().map(|x| x * scale).collect())
        }
    }
}

/// Zero every DFT bin whose center frequency falls outside `[f_lo, f_hi]`.
fn brickwall_filter(samples: &[f64], sample_rate: f64, f_lo: f64, f_hi: f64) -> Result<Vec<f64>> {
    let len = samples.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    planner.plan_fft_forward(len).process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        let idx = if k <= len / 2 { k } else { len - k };
        let freq = idx as f64 * sample_rate / len as f64;
        if freq < f_lo || freq > f_hi {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let inv = 1.0 / len as f64;
    Ok(buf.into_iter().map(|z| z.re * inv).collect())
}

/// Delay one channel by a fractional number of samples via a full-signal
/// linear-phase shift (exact under periodic extension).
fn fractional_delay(samples: &[f64], delay_samples: f64) -> Vec<f64> {
    if delay_samples == 0.0 {
        return samples.to_vec();
    }
    let len = samples.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    planner.plan_fft_forward(len).process(&mut buf);
    let factor = -2.0 * std::f64::consts::PI * delay_samples / len as f64;
    for (k, z) in buf.iter_mut().enumerate() {
        if len.is_multiple_of(2) && k == len / 2 {
            // Nyquist bin must stay real for a real output.
            *z *= (std::f64::consts::PI * delay_samples).cos();
        } else {
            let signed = if k <= len / 2 {
                k as f64
            } else {
                k as f64 - len as f64
            };
            *z *= Complex64::from_polar(1.0, factor * signed);
        }
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let inv = 1.0 / len as f64;
    buf.into_iter().map(|z| z.re * inv).collect()
}

/// Far-field free-field propagation: channel n is the source delayed by
/// `tau_n(theta) * fs` samples. Circular edge effects are confined to the
/// first/last `ceil(max |delay|)` samples, which are trimmed from every
/// channel; the reference channel stays bit-equal to the (trimmed) source.
pub fn propagate_freefield(
    samples: &[f64],
    geometry: &ArrayGeometry,
    theta_deg: f64,
    sample_rate: f64,
) -> Result<MultichannelSignal> {
    let tdoa = geometry.tdoa(theta_deg)?;
    let delays: Vec<f64> = tdoa.iter().map(|tau| tau * sample_rate).collect();
    let margin = delays.iter().fold(0.0_f64, |m, d| m.max(d.abs())).ceil() as usize;
    if samples.len() <= 2 * margin {
        return Err(Error::InvalidParameter(format!(
            "signal of {} samples too short to trim a {margin}-sample propagation margin",
            samples.len()
        )));
    }
    let channels = delays
        .iter()
        .map(|&d| {
            let full = fractional_delay(samples, d);
            full[margin..samples.len() - margin].to_vec()
        })
        .collect();
    MultichannelSignal::new(channels, sample_rate)
}

/// Samplewise sum of scenes with identical shape.
pub fn mix(scenes: &[MultichannelSignal]) -> Result<MultichannelSignal> {
    let first = scenes
        .first()
        .ok_or_else(|| Error::InvalidParameter("nothing to mix: no scenes".into()))?;
    for s in &scenes[1..] {
        if s.n_channels() != first.n_channels()
            || s.len() != first.len()
            || s.sample_rate() != first.sample_rate()
        {
            return Err(Error::DimensionMismatch(
                "scenes must share channel count, length and sample rate".into(),
            ));
        }
    }
    let mut channels: Vec<Vec<f64>> = first.channels().to_vec();
    for s in &scenes[1..] {
        for (acc, ch) in channels.iter_mut().zip(s.channels()) {
            for (a, x) in acc.iter_mut().zip(ch) {
                *a += x;
            }
        }
    }
    MultichannelSignal::new(channels, first.sample_rate())
}

/// Add mutually independent white Gaussian noise per channel, calibrated so
/// that `sigma^2 = P_ref / 10^(snr_db/10)` with `P_ref` the measured
/// mean-square of the reference channel. Returns the noisy signal and the
/// noise variance actually used.
pub fn add_noise(
    signal: &MultichannelSignal,
    spec: &NoiseSpec,
) -> Result<(MultichannelSignal, f64)> {
    let p_ref = mean_square(signal.channel(0));
    if !(p_ref > 0.0) {
        return Err(Error::InvalidParameter(
            "cannot calibrate SNR against a zero-power reference channel".into(),
        ));
    }
    if spec.snr_db == f64::INFINITY {
        return Ok((signal.clone(), 0.0));
    }
    let sigma2 = p_ref / 10f64.powf(spec.snr_db / 10.0);
    let sigma = sigma2.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let channels = signal
        .channels()
        .iter()
        .map(|ch| {
            ch.iter()
                .map(|&x| {
                    let g: f64 = rng.sample(StandardNormal);
                    x + g * sigma
                })
                .collect()
        })
        .collect();
    Ok((
        MultichannelSignal::new(channels, signal.sample_rate())?,
        sigma2,
    ))
}
