//! Array geometry, TDOA and far-field steering vectors over a DOA grid.
//!
//! Sensor 1 is the reference; spacings are reference-relative. Delays are
//! converted to samples (`tau * fs`) before the `bin / fft_size` phase
//! exponent is applied, which keeps the steering phase dimensionless.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::BinRange;

/// Default propagation speed in air, m/s.
pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// Reference-relative sensor spacings and the propagation speed.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    spacings_m: Vec<f64>,
    speed_of_sound: f64,
}

impl ArrayGeometry {
    /// `spacings_m[n]` is the distance from the reference sensor to sensor n;
    /// the first entry must be zero.
    pub fn new(spacings_m: Vec<f64>, speed_of_sound: f64) -> Result<Self> {
        if spacings_m.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "array needs at least 2 sensors, got {}",
                spacings_m.len()
            )));
        }
        if !(speed_of_sound > 0.0) || !speed_of_sound.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "propagation speed must be finite and > 0, got {speed_of_sound}"
            )));
        }
        if spacings_m.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidParameter(
                "sensor spacings must be finite".into(),
            ));
        }
        if spacings_m[0] != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sensor 1 is the reference and must have spacing 0, got {}",
                spacings_m[0]
            )));
        }
        Ok(Self {
            spacings_m,
            speed_of_sound,
        })
    }

    /// Uniform linear array: `sensors` elements spaced `spacing_m` apart.
    pub fn uniform_linear(sensors: usize, spacing_m: f64, speed_of_sound: f64) -> Result<Self> {
        if !(spacing_m > 0.0) || !spacing_m.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ULA spacing must be finite and > 0, got {spacing_m}"
            )));
        }
        let spacings = (0..sensors).map(|n| n as f64 * spacing_m).collect();
        Self::new(spacings, speed_of_sound)
    }

    pub fn sensors(&self) -> usize {
        self.spacings_m.len()
    }

    pub fn spacings_m(&self) -> &[f64] {
        &self.spacings_m
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    /// Time difference of arrival per sensor for a far-field source at
    /// `theta_deg`: `tau_n = d_n sin(theta) / c`, in seconds.
    pub fn tdoa(&self, theta_deg: f64) -> Result<Vec<f64>> {
        check_theta(theta_deg)?;
        let s = theta_deg.to_radians().sin();
        Ok(self
            .spacings_m
            .iter()
            .map(|d| d * s / self.speed_of_sound)
            .collect())
    }
}

fn check_theta(theta_deg: f64) -> Result<()> {
    if !(-90.0..=90.0).contains(&theta_deg) || theta_deg.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "DOA must lie in [-90, 90] deg (far-field linear-array model), got {theta_deg}"
        )));
    }
    Ok(())
}

/// Strictly increasing scan angles in degrees, all within [-90, +90].
#[derive(Debug, Clone, PartialEq)]
pub struct DoaGrid {
    angles_deg: Vec<f64>,
}

impl DoaGrid {
    pub fn new(angles_deg: Vec<f64>) -> Result<Self> {
        if angles_deg.len() < 2 {
            return Err(Error::InvalidParameter(
                "DOA grid needs at least 2 points".into(),
            ));
        }
        for pair in angles_deg.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(Error::InvalidParameter(format!(
                    "DOA grid must be strictly increasing, found {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        check_theta(angles_deg[0])?;
        check_theta(*angles_deg.last().unwrap())?;
        Ok(Self { angles_deg })
    }

    /// Inclusive grid from `lo` to `hi` with the given step.
    pub fn with_step(lo_deg: f64, hi_deg: f64, step_deg: f64) -> Result<Self> {
        if !(step_deg > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid step must be > 0, got {step_deg}"
            )));
        }
        let count = ((hi_deg - lo_deg) / step_deg).round() as i64;
        if count < 1 {
            return Err(Error::InvalidParameter(format!(
                "grid span [{lo_deg}, {hi_deg}] too small for step {step_deg}"
            )));
        }
        let angles = (0..=count).map(|i| lo_deg + i as f64 * step_deg).collect();
        Self::new(angles)
    }

    pub fn len(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles_deg.is_empty()
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn angle(&self, idx: usize) -> f64 {
        self.angles_deg[idx]
    }
}

/// Unit-modulus steering vector for one (bin, angle) pair. The reference
/// sensor entry is exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub entries: Vec<Complex64>,
    pub bin: usize,
    pub theta_deg: f64,
}

/// `a_n = exp(-j 2 pi bin (tau_n * fs) / fft_size)`.
pub fn steering_vector(
    geometry: &ArrayGeometry,
    bin: usize,
    fft_size: usize,
    sample_rate: f64,
    theta_deg: f64,
) -> Result<SteeringVector> {
    if bin > fft_size / 2 {
        return Err(Error::InvalidParameter(format!(
            "bin {bin} exceeds Nyquist bin {}",
            fft_size / 2
        )));
    }
    let tdoa = geometry.tdoa(theta_deg)?;
    let entries = steering_entries(&tdoa, bin, fft_size, sample_rate);
    Ok(SteeringVector {
        entries,
        bin,
        theta_deg,
    })
}

fn steering_entries(tdoa: &[f64], bin: usize, fft_size: usize, sample_rate: f64) -> Vec<Complex64> {
    let factor = -2.0 * std::f64::consts::PI * bin as f64 / fft_size as f64;
    tdoa.iter()
        .enumerate()
        .map(|(n, tau)| {
            if n == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, factor * tau * sample_rate)
            }
        })
        .collect()
}

/// Precomputed steering vectors for every (bin, angle) pair of a scan.
///
/// Immutable after construction; lookups are views into one flat allocation.
#[derive(Debug, Clone)]
pub struct SteeringGrid {
    sensors: usize,
    bins: BinRange,
    grid: DoaGrid,
    data: Vec<Complex64>,
}

pub fn steering_grid(
    geometry: &ArrayGeometry,
    fft_size: usize,
    sample_rate: f64,
    bins: &BinRange,
    grid: &DoaGrid,
) -> Result<SteeringGrid> {
    if bins.is_empty() {
        return Err(Error::InvalidParameter("empty bin range".into()));
    }
    if bins.hi() > fft_size / 2 {
        return Err(Error::InvalidParameter(format!(
            "bin range {}..={} exceeds Nyquist bin {}",
            bins.lo(),
            bins.hi(),
            fft_size / 2
        )));
    }
    let sensors = geometry.sensors();
    let tdoas: Vec<Vec<f64>> = grid
        .angles_deg()
        .iter()
        .map(|&theta| geometry.tdoa(theta))
        .collect::<Result<_>>()?;

    let mut data = Vec::with_capacity(bins.len() * grid.len() * sensors);
    for bin in bins.iter() {
        for tdoa in &tdoas {
            data.extend_from_slice(&steering_entries(tdoa, bin, fft_size, sample_rate));
        }
    }
    Ok(SteeringGrid {
        sensors,
        bins: bins.clone(),
        grid: grid.clone(),
        data,
    })
}

impl SteeringGrid {
    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn bins(&self) -> &BinRange {
        &self.bins
    }

    pub fn grid(&self) -> &DoaGrid {
        &self.grid
    }

    /// Total number of stored complex values (sensors x angles x bins).
    pub fn complex_entries(&self) -> usize {
        self.data.len()
    }

    /// Steering vectors for one bin across all grid angles.
    pub fn bin(&self, bin: usize) -> Result<BinSteering<'_>> {
        if !self.bins.contains(bin) {
            return Err(Error::InvalidParameter(format!(
                "bin {bin} outside precomputed range {}..={}",
                self.bins.lo(),
                self.bins.hi()
            )));
        }
        let angles = self.grid.len();
        let offset = (bin - self.bins.lo()) * angles * self.sensors;
        Ok(BinSteering {
            bin,
            sensors: self.sensors,
            angles: &self.grid,
            data: &self.data[offset..offset + angles * self.sensors],
        })
    }
}

/// Per-bin view into a [`SteeringGrid`].
#[derive(Debug, Clone, Copy)]
pub struct BinSteering<'a> {
    pub bin: usize,
    sensors: usize,
    angles: &'a DoaGrid,
    data: &'a [Complex64],
}

impl<'a> BinSteering<'a> {
    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn angle_deg(&self, idx: usize) -> f64 {
        self.angles.angle(idx)
    }

    #[inline]
    pub fn vector(&self, angle_idx: usize) -> &'a [Complex64] {
        &self.data[angle_idx * self.sensors..(angle_idx + 1) * self.sensors]
    }
}
