//! Shared fixtures for the estimator benchmarks.

use doalab_core::array::{steering_grid, DoaGrid, SteeringGrid};
use doalab_core::pipeline::{synthesize_scene, Scenario};
use doalab_core::simulator::{SourceKind, SourceSpec};
use doalab_core::spectral::{bin_range, estimate_psd, stft, BinRange, PsdMatrix, Window};
use doalab_core::ArrayGeometry;

pub const FS: f64 = 44100.0;
pub const FFT_SIZE: usize = 2048;

/// Full-band per-bin PSD estimates plus the matching steering table for one
/// window of a broadband scene.
pub struct ScanFixture {
    pub psds: Vec<PsdMatrix>,
    pub bins: BinRange,
    pub steering: SteeringGrid,
}

pub fn scan_fixture(sensors: usize, spacing_m: f64, snapshots: usize, seed: u64) -> ScanFixture {
    let geometry = ArrayGeometry::uniform_linear(sensors, spacing_m, 343.0).unwrap();
    let scenario = Scenario {
        geometry: geometry.clone(),
        sample_rate: FS,
        sources: vec![SourceSpec {
            kind: SourceKind::Bandlimited {
                f_lo_hz: 80.0,
                f_hi_hz: 8000.0,
            },
            duration_s: 1.0,
            doa_deg: -18.0,
            power: 1.0,
        }],
        snr_db: 20.0,
        seed,
    };
    let (signal, _) = synthesize_scene(&scenario).unwrap();
    let spectra = stft(&signal, FFT_SIZE, 1536, Window::Hann).unwrap();
    let bins = bin_range(FS, FFT_SIZE, 80.0, 8000.0).unwrap();
    let psds = estimate_psd(&spectra, snapshots - 1, snapshots, &bins).unwrap();
    let grid = DoaGrid::with_step(-90.0, 90.0, 1.0).unwrap();
    let steering = steering_grid(&geometry, FFT_SIZE, FS, &bins, &grid).unwrap();
    ScanFixture {
        psds,
        bins,
        steering,
    }
}
