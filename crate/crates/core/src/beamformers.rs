//! Narrowband spatial-spectrum estimators and beampattern weights.
//!
//! Every estimator here is a quadratic form of some regularized PSD matrix
//! against the steering grid, so they all share one scan loop and differ only
//! in how that matrix is prepared:
//!
//! * SRP scans the PSD matrix itself.
//! * SRP-PHAT scans the entrywise phase-normalized PSD matrix.
//! * Diagonal unloading scans `tr(Phi) I - Phi` (reciprocal spectrum); the
//!   preparation is O(N^2) additions, no eigensolve and no inverse.
//! * Diagonally loaded MVDR scans `(Phi + mu' I)^-1` (reciprocal spectrum).
//! * MUSIC scans the noise-subspace projector (reciprocal spectrum).
//!
//! Reciprocal spectra floor their denominator (1e-12-scaled) so that exact
//! orthogonality on a grid point yields a large finite peak instead of an
//! infinity.

use num_complex::Complex64;

use crate::array::BinSteering;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, HermitianMatrix};
use crate::spectral::{BinRange, PsdMatrix, SnapshotSpectra};

/// Spatial-spectrum estimators exposed to the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Srp,
    SrpPhat,
    Du,
    DuSigma,
    Mvdr,
    Music,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Srp,
        Method::SrpPhat,
        Method::Du,
        Method::DuSigma,
        Method::Mvdr,
        Method::Music,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Srp => "srp",
            Method::SrpPhat => "srp-phat",
            Method::Du => "du",
            Method::DuSigma => "du-sigma",
            Method::Mvdr => "mvdr",
            Method::Music => "music",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown method '{s}' (expected one of srp, srp-phat, du, du-sigma, mvdr, music)"
                ))
            })
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One bin's spatial spectrum over the scan grid.
#[derive(Debug, Clone)]
pub struct NarrowbandSpectrum {
    pub bin: usize,
    pub values: Vec<f64>,
    pub method: Method,
    /// Set when a noise-aware DU request fell back to the plain DU spectrum
    /// because the claimed noise power exceeded what the PSD trace supports.
    pub fallback: bool,
}

/// Regularization constants for one bin: the loading constant, the derived
/// diagonal load `mu' = tr(Phi) Delta / L`, and the unloading weight
/// `mu = tr(Phi)`.
#[derive(Debug, Clone, Copy)]
pub struct RegularizationParams {
    pub dl_constant: f64,
    pub dl_load: f64,
    pub du_unload: f64,
}

impl RegularizationParams {
    pub fn for_psd(psd: &PsdMatrix, dl_constant: f64, fft_size: usize) -> Result<Self> {
        if !(dl_constant > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "loading constant must be > 0, got {dl_constant}"
            )));
        }
        let trace = psd.matrix.trace();
        if !(trace > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "PSD trace must be > 0 for regularization, got {trace}"
            )));
        }
        Ok(Self {
            dl_constant,
            dl_load: dl_load(psd, dl_constant, fft_size),
            du_unload: trace,
        })
    }
}

/// Data-dependent diagonal load `mu'(f) = tr(Phi(f)) * Delta / L`.
pub fn dl_load(psd: &PsdMatrix, dl_constant: f64, fft_size: usize) -> f64 {
    psd.matrix.trace() * dl_constant / fft_size as f64
}

/// Shared scan loop: `a^H M a` across all grid angles of one bin.
fn scan_quadratic(matrix: &HermitianMatrix, steering: &BinSteering<'_>) -> Vec<f64> {
    let n = matrix.order();
    let mut values = Vec::with_capacity(steering.n_angles());
    for idx in 0..steering.n_angles() {
        let a = steering.vector(idx);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let row = matrix.row(i);
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..n {
                s += row[j] * a[j];
            }
            acc += a[i].conj() * s;
        }
        values.push(acc.re);
    }
    values
}

fn reciprocal_spectrum(denominators: Vec<f64>, floor: f64) -> Vec<f64> {
    denominators
        .into_iter()
        .map(|d| 1.0 / d.max(floor))
        .collect()
}

/// Steered response power: `P(theta) = a^H Phi a` (the 1/N^2 of the
/// conventional weights is omitted; the argmax is scale-free).
pub fn srp_spectrum(psd: &PsdMatrix, steering: &BinSteering<'_>) -> NarrowbandSpectrum {
    NarrowbandSpectrum {
        bin: steering.bin,
        values: scan_quadratic(&psd.matrix, steering),
        method: Method::Srp,
        fallback: false,
    }
}

/// Diagonal unloading of the PSD matrix: `tr(Phi) I - Phi`.
///
/// The result shares the input's eigenvectors and maps every eigenvalue
/// `lambda` to `tr(Phi) - lambda`, which annihilates the dominant (signal)
/// direction while keeping the noise directions strictly positive. No
/// eigendecomposition is performed.
pub fn du_unload(psd: &PsdMatrix) -> Result<HermitianMatrix> {
    unload_by(psd, psd.matrix.trace())
}

fn unload_by(psd: &PsdMatrix, mu: f64) -> Result<HermitianMatrix> {
    if !(psd.matrix.trace() > 0.0) {
        return Err(Error::InvalidParameter(
            "cannot unload a zero PSD matrix (trace 0 gives a null regularization)".into(),
        ));
    }
    let n = psd.order();
    let mut entries: Vec<Complex64> = psd.matrix.entries().iter().map(|z| -z).collect();
    for i in 0..n {
        entries[i * n + i] += mu;
    }
    Ok(HermitianMatrix::from_raw_symmetrize(n, entries))
}

fn du_floor(psd: &PsdMatrix) -> f64 {
    1e-12 * psd.matrix.trace() * psd.order() as f64
}

/// Diagonal-unloading pseudo spectrum:
/// `P(theta) = 1 / (a^H (tr(Phi) I - Phi) a)`.
pub fn du_spectrum(psd: &PsdMatrix, steering: &BinSteering<'_>) -> Result<NarrowbandSpectrum> {
    let unloaded = du_unload(psd)?;
    Ok(NarrowbandSpectrum {
        bin: steering.bin,
        values: reciprocal_spectrum(scan_quadratic(&unloaded, steering), du_floor(psd)),
        method: Method::Du,
        fallback: false,
    })
}

/// Noise-aware diagonal unloading:
/// `P(theta) = 1 / (a^H ([tr(Phi) - (N-1) sigma^2] I - Phi) a)`.
///
/// Requires `psd.noise_power`; when the claimed noise power is too large for
/// the observed trace the plain DU spectrum is returned with `fallback` set.
pub fn du_noise_aware_spectrum(
    psd: &PsdMatrix,
    steering: &BinSteering<'_>,
) -> Result<NarrowbandSpectrum> {
    let sigma2 = psd.noise_power.ok_or_else(|| {
        Error::InvalidParameter("noise-aware DU needs a known noise power on the PSD".into())
    })?;
    if sigma2 < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise power must be >= 0, got {sigma2}"
        )));
    }
    let n = psd.order();
    let mu = psd.matrix.trace() - (n as f64 - 1.0) * sigma2;
    if !(mu > 0.0) {
        let mut spectrum = du_spectrum(psd, steering)?;
        spectrum.method = Method::DuSigma;
        spectrum.fallback = true;
        return Ok(spectrum);
    }
    let unloaded = unload_by(psd, mu)?;
    Ok(NarrowbandSpectrum {
        bin: steering.bin,
        values: reciprocal_spectrum(scan_quadratic(&unloaded, steering), du_floor(psd)),
        method: Method::DuSigma,
        fallback: false,
    })
}

/// Noise-aware unloaded matrix `[tr(Phi) - (N-1) sigma^2] I - Phi`, without
/// the fallback wrapping; used by diagnostics and tests.
pub fn du_noise_aware_unload(psd: &PsdMatrix, sigma2: f64) -> Result<HermitianMatrix> {
    let n = psd.order();
    unload_by(psd, psd.matrix.trace() - (n as f64 - 1.0) * sigma2)
}

/// Diagonally loaded MVDR spectrum: `P(theta) = 1 / (a^H (Phi + mu' I)^-1 a)`.
pub fn mvdr_dl_spectrum(
    psd: &PsdMatrix,
    params: &RegularizationParams,
    steering: &BinSteering<'_>,
) -> Result<NarrowbandSpectrum> {
    if !(params.dl_load > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "diagonal load must be > 0, got {}",
            params.dl_load
        )));
    }
    let inverse = psd.matrix.regularized_inverse(params.dl_load)?;
    // a^H (Phi + mu' I)^-1 a >= N / (lambda_max + mu') > 0: no floor needed.
    let values = scan_quadratic(&inverse, steering)
        .into_iter()
        .map(|d| 1.0 / d)
        .collect();
    Ok(NarrowbandSpectrum {
        bin: steering.bin,
        values,
        method: Method::Mvdr,
        fallback: false,
    })
}

/// MUSIC pseudo spectrum: `P(theta) = 1 / (a^H U_v U_v^H a)` with `U_v` the
/// eigenvectors of the noise subspace (all but the `n_sources` dominant).
pub fn music_spectrum(
    psd: &PsdMatrix,
    n_sources: usize,
    steering: &BinSteering<'_>,
) -> Result<NarrowbandSpectrum> {
    let n = psd.order();
    if n_sources == 0 || n_sources >= n {
        return Err(Error::InvalidParameter(format!(
            "MUSIC needs 1 <= sources < sensors, got {n_sources} sources for {n} sensors"
        )));
    }
    let eig = hermitian_eig(&psd.matrix)?;
    let projector = eig.subspace_projector(n_sources);
    let floor = 1e-12 * n as f64;
    Ok(NarrowbandSpectrum {
        bin: steering.bin,
        values: reciprocal_spectrum(scan_quadratic(&projector, steering), floor),
        method: Method::Music,
        fallback: false,
    })
}

/// Entrywise phase normalization: each entry divided by its modulus, entries
/// below 1e-15 modulus zeroed.
pub fn phat_normalize(matrix: &HermitianMatrix) -> HermitianMatrix {
    let n = matrix.order();
    let entries = matrix
        .entries()
        .iter()
        .map(|z| {
            let m = z.norm();
            if m < 1e-15 {
                Complex64::new(0.0, 0.0)
            } else {
                z / m
            }
        })
        .collect();
    HermitianMatrix::from_raw_symmetrize(n, entries)
}

/// SRP-PHAT spectrum: steered response power of the phase-only PSD matrix.
pub fn srp_phat_spectrum(psd: &PsdMatrix, steering: &BinSteering<'_>) -> NarrowbandSpectrum {
    let normalized = phat_normalize(&psd.matrix);
    NarrowbandSpectrum {
        bin: steering.bin,
        values: scan_quadratic(&normalized, steering),
        method: Method::SrpPhat,
        fallback: false,
    }
}

/// Per-snapshot PHAT variant: each snapshot outer product is phase-normalized
/// before averaging. Mirrors [`crate::spectral::estimate_psd`] otherwise.
pub fn phat_psd_per_snapshot(
    snapshots: &SnapshotSpectra,
    end_frame: usize,
    m: usize,
    bins: &BinRange,
) -> Result<Vec<PsdMatrix>> {
    let raw = crate::spectral::estimate_psd(snapshots, end_frame, 1, bins)?;
    let n = snapshots.n_channels();
    let mut acc: Vec<Vec<Complex64>> = raw
        .iter()
        .map(|p| phat_normalize(&p.matrix).entries().to_vec())
        .collect();
    for p in 1..m {
        let frame = crate::spectral::estimate_psd(snapshots, end_frame - p, 1, bins)?;
        for (a, psd) in acc.iter_mut().zip(&frame) {
            for (dst, src) in a.iter_mut().zip(phat_normalize(&psd.matrix).entries()) {
                *dst += src;
            }
        }
    }
    let inv_m = 1.0 / m as f64;
    Ok(acc
        .into_iter()
        .map(|mut entries| {
            for z in &mut entries {
                *z *= inv_m;
            }
            PsdMatrix {
                matrix: HermitianMatrix::from_raw_symmetrize(n, entries),
                snapshot_count: m,
                noise_power: None,
            }
        })
        .collect())
}

/// Weighting-vector families for beampattern work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightKind {
    Conventional,
    Du,
    Mvdr,
    Music,
}

impl WeightKind {
    pub const ALL: [WeightKind; 4] = [
        WeightKind::Conventional,
        WeightKind::Du,
        WeightKind::Mvdr,
        WeightKind::Music,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            WeightKind::Conventional => "conventional",
            WeightKind::Du => "du",
            WeightKind::Mvdr => "mvdr",
            WeightKind::Music => "music",
        }
    }
}

/// Distortionless weight vectors `w(theta)` for every grid angle.
#[derive(Debug, Clone)]
pub struct BeamWeights {
    pub kind: WeightKind,
    sensors: usize,
    data: Vec<Complex64>,
}

impl BeamWeights {
    pub fn n_angles(&self) -> usize {
        self.data.len() / self.sensors
    }

    pub fn weight(&self, angle_idx: usize) -> &[Complex64] {
        &self.data[angle_idx * self.sensors..(angle_idx + 1) * self.sensors]
    }
}

/// Weight vectors per grid angle: `w = a/N` for the conventional beamformer,
/// otherwise `w = R a / (a^H R a)` with `R` the method's regularized PSD
/// matrix. Distortionless by construction: `w^H a = 1`.
pub fn beam_weights(
    kind: WeightKind,
    psd: &PsdMatrix,
    params: &RegularizationParams,
    n_sources: usize,
    steering: &BinSteering<'_>,
) -> Result<BeamWeights> {
    let n = psd.order();
    let matrix = match kind {
        WeightKind::Conventional => None,
        WeightKind::Du => Some(du_unload(psd)?),
        WeightKind::Mvdr => Some(psd.matrix.regularized_inverse(params.dl_load)?),
        WeightKind::Music => {
            if n_sources == 0 || n_sources >= n {
                return Err(Error::InvalidParameter(format!(
                    "MUSIC weights need 1 <= sources < sensors, got {n_sources} for {n}"
                )));
            }
            Some(hermitian_eig(&psd.matrix)?.subspace_projector(n_sources))
        }
    };

    let mut data = Vec::with_capacity(steering.n_angles() * n);
    for idx in 0..steering.n_angles() {
        let a = steering.vector(idx);
        match &matrix {
            None => data.extend(a.iter().map(|z| z / n as f64)),
            Some(r) => {
                let ra: Vec<Complex64> = (0..n)
                    .map(|i| r.row(i).iter().zip(a).map(|(m, aj)| m * aj).sum())
                    .collect();
                let denom: Complex64 = a.iter().zip(&ra).map(|(ai, ri)| ai.conj() * ri).sum();
                let floor = 1e-12 * r.trace().abs();
                if denom.norm() <= floor {
                    return Err(Error::SingularSteering {
                        theta_deg: steering.angle_deg(idx),
                        value: denom.norm(),
                        floor,
                    });
                }
                data.extend(ra.iter().map(|z| z / denom));
            }
        }
    }
    Ok(BeamWeights {
        kind,
        sensors: n,
        data,
    })
}

/// Signal-subspace gain left behind by trace unloading under white noise:
/// `G = (N-1) / (N (SNR + 1))`.
pub fn du_gain(sensors: usize, snr: f64) -> f64 {
    (sensors as f64 - 1.0) / (sensors as f64 * (snr + 1.0))
}

/// Two-source residual gains of the unloaded signal subspaces:
/// `G1 = (N SNR2 + N - 1) / (N (SNR1 + SNR2 + 1))` and symmetrically for G2.
pub fn two_source_gains(sensors: usize, snr1: f64, snr2: f64) -> (f64, f64) {
    let n = sensors as f64;
    let denom = n * (snr1 + snr2 + 1.0);
    ((n * snr2 + n - 1.0) / denom, (n * snr1 + n - 1.0) / denom)
}

/// Closed-form subspace gains for a sensor count and per-source SNRs.
#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub sensors: usize,
    /// Linear SNR per source (one or two entries).
    pub snr: Vec<f64>,
    /// Residual signal-subspace gain per source, each in [0, 1].
    pub gains: Vec<f64>,
}

impl GainReport {
    pub fn single_source(sensors: usize, snr: f64) -> Self {
        Self {
            sensors,
            snr: vec![snr],
            gains: vec![du_gain(sensors, snr)],
        }
    }

    pub fn two_sources(sensors: usize, snr1: f64, snr2: f64) -> Self {
        let (g1, g2) = two_source_gains(sensors, snr1, snr2);
        Self {
            sensors,
            snr: vec![snr1, snr2],
            gains: vec![g1, g2],
        }
    }
}
