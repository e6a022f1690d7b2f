//! STFT front end and per-bin snapshot PSD estimation.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::HermitianMatrix;

/// Analysis window applied to each STFT frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Periodic Hann taper; the default for broadband material.
    Hann,
    /// No taper; useful for analytic tests at exact bin frequencies.
    Rectangular,
}

impl Window {
    fn sample(&self, idx: usize, len: usize) -> f64 {
        match self {
            Window::Rectangular => 1.0,
            Window::Hann => {
                let x = 2.0 * std::f64::consts::PI * idx as f64 / len as f64;
                0.5 * (1.0 - x.cos())
            }
        }
    }

    /// Sum of squared window samples; converts a time-domain noise variance
    /// into the per-bin noise power seen by the snapshot spectra.
    pub fn energy(&self, len: usize) -> f64 {
        (0..len).map(|i| self.sample(i, len).powi(2)).sum()
    }
}

/// N equal-length real sample streams sharing one sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSignal {
    channels: Vec<Vec<f64>>,
    sample_rate: f64,
}

impl MultichannelSignal {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: f64) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::InvalidParameter(
                "signal needs at least one channel".into(),
            ));
        }
        if !(sample_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be > 0, got {sample_rate}"
            )));
        }
        let len = channels[0].len();
        if channels.iter().any(|ch| ch.len() != len) {
            return Err(Error::DimensionMismatch(
                "all channels must have equal length".into(),
            ));
        }
        Ok(Self {
            channels,
            sample_rate,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channel(&self, n: usize) -> &[f64] {
        &self.channels[n]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }
}

/// Per-frame, per-bin sensor snapshot vectors from the STFT.
///
/// Frame `k` covers samples `[k*hop, k*hop + fft_size)`. Bins `0..=fft_size/2`
/// are retained; within a frame the data is bin-major, one N-vector per bin.
#[derive(Debug, Clone)]
pub struct SnapshotSpectra {
    n_channels: usize,
    fft_size: usize,
    hop: usize,
    frames: Vec<Vec<Complex64>>,
}

impl SnapshotSpectra {
    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    /// Sensor vector for one (frame, bin) pair.
    #[inline]
    pub fn snapshot(&self, frame: usize, bin: usize) -> &[Complex64] {
        let n = self.n_channels;
        &self.frames[frame][bin * n..(bin + 1) * n]
    }
}

/// Windowed short-time Fourier transform of every channel.
pub fn stft(
    signal: &MultichannelSignal,
    fft_size: usize,
    hop: usize,
    window: Window,
) -> Result<SnapshotSpectra> {
    if !fft_size.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "FFT size must be a power of two, got {fft_size}"
        )));
    }
    if hop == 0 {
        return Err(Error::InvalidParameter("hop must be >= 1".into()));
    }
    if signal.len() < fft_size {
        return Err(Error::InvalidParameter(format!(
            "signal length {} shorter than one frame of {fft_size}",
            signal.len()
        )));
    }

    let n_channels = signal.n_channels();
    let n_frames = (signal.len() - fft_size) / hop + 1;
    let n_bins = fft_size / 2 + 1;
    let taper: Vec<f64> = (0..fft_size).map(|i| window.sample(i, fft_size)).collect();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_size);
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_size];

    let mut frames = Vec::with_capacity(n_frames);
    for k in 0..n_frames {
        let start = k * hop;
        let mut frame = vec![Complex64::new(0.0, 0.0); n_bins * n_channels];
        for ch in 0..n_channels {
            let samples = &signal.channel(ch)[start..start + fft_size];
            for (i, (&x, &w)) in samples.iter().zip(&taper).enumerate() {
                buf[i] = Complex64::new(x * w, 0.0);
            }
            fft.process(&mut buf);
            for bin in 0..n_bins {
                frame[bin * n_channels + ch] = buf[bin];
            }
        }
        frames.push(frame);
    }

    Ok(SnapshotSpectra {
        n_channels,
        fft_size,
        hop,
        frames,
    })
}

#[cfg(test)]
pub(crate) fn test_fixture(
    n_channels: usize,
    fft_size: usize,
    hop: usize,
    frames: Vec<Vec<Complex64>>,
) -> SnapshotSpectra {
    SnapshotSpectra {
        n_channels,
        fft_size,
        hop,
        frames,
    }
}

/// Inclusive frequency-bin range `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinRange {
    lo: usize,
    hi: usize,
}

impl BinRange {
    pub fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.hi
    }

    pub fn len(&self) -> usize {
        if self.hi < self.lo {
            0
        } else {
            self.hi - self.lo + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, bin: usize) -> bool {
        (self.lo..=self.hi).contains(&bin)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        self.lo..=self.hi
    }
}

/// Bins whose center frequencies fall inside `[f_min, f_max]`:
/// `ceil(f_min L / fs) ..= floor(f_max L / fs)`.
pub fn bin_range(sample_rate: f64, fft_size: usize, f_min: f64, f_max: f64) -> Result<BinRange> {
    if !(0.0 <= f_min && f_min < f_max && f_max <= sample_rate / 2.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= f_min < f_max <= fs/2, got f_min={f_min}, f_max={f_max}, fs={sample_rate}"
        )));
    }
    let lo = (f_min * fft_size as f64 / sample_rate).ceil() as usize;
    let hi = (f_max * fft_size as f64 / sample_rate).floor() as usize;
    if hi < lo {
        return Err(Error::InvalidParameter(format!(
            "band [{f_min}, {f_max}] Hz spans no bin center at fs={sample_rate}, L={fft_size}"
        )));
    }
    Ok(BinRange::new(lo, hi))
}

/// Per-bin spatial PSD estimate with optional known noise power (in snapshot
/// spectrum units).
#[derive(Debug, Clone)]
pub struct PsdMatrix {
    pub matrix: HermitianMatrix,
    pub snapshot_count: usize,
    pub noise_power: Option<f64>,
}

impl PsdMatrix {
    pub fn order(&self) -> usize {
        self.matrix.order()
    }

    pub fn with_noise_power(mut self, sigma2: f64) -> Result<Self> {
        if sigma2 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise power must be >= 0, got {sigma2}"
            )));
        }
        self.noise_power = Some(sigma2);
        Ok(self)
    }
}

/// Snapshot-averaged PSD matrices, one per bin in `bins`:
/// `(1/M) sum_{p=0}^{M-1} x(k-p, f) x^H(k-p, f)` ending at frame `end_frame`.
pub fn estimate_psd(
    snapshots: &SnapshotSpectra,
    end_frame: usize,
    m: usize,
    bins: &BinRange,
) -> Result<Vec<PsdMatrix>> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "snapshot count must be >= 1".into(),
        ));
    }
    if end_frame >= snapshots.n_frames() || end_frame + 1 < m {
        return Err(Error::TooFewFrames {
            needed: m,
            end_frame,
            available: snapshots.n_frames().min(end_frame + 1),
        });
    }
    if bins.is_empty() || bins.hi() >= snapshots.n_bins() {
        return Err(Error::InvalidParameter(format!(
            "bin range {}..={} outside spectra bins 0..={}",
            bins.lo(),
            bins.hi(),
            snapshots.n_bins() - 1
        )));
    }

    let n = snapshots.n_channels();
    let inv_m = 1.0 / m as f64;
    let mut out = Vec::with_capacity(bins.len());
    for bin in bins.iter() {
        let mut acc = vec![Complex64::new(0.0, 0.0); n * n];
        for p in 0..m {
            let x = snapshots.snapshot(end_frame - p, bin);
            // Upper triangle only; the mirror is exact by conjugation.
            for i in 0..n {
                for j in i..n {
                    acc[i * n + j] += x[i] * x[j].conj();
                }
            }
        }
        for i in 0..n {
            for j in i..n {
                let v = acc[i * n + j] * inv_m;
                acc[i * n + j] = v;
                acc[j * n + i] = v.conj();
            }
        }
        out.push(PsdMatrix {
            matrix: HermitianMatrix::from_raw_symmetrize(n, acc),
            snapshot_count: m,
            noise_power: None,
        });
    }
    Ok(out)
}
