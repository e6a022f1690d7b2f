use thiserror::Error;

/// Errors surfaced by the core library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(
        "matrix is not Hermitian: entry ({row},{col}) = {found} vs conjugate {expected} \
         (deviation {deviation:.3e} exceeds tolerance {tolerance:.3e})"
    )]
    NotHermitian {
        row: usize,
        col: usize,
        found: String,
        expected: String,
        deviation: f64,
        tolerance: f64,
    },

    #[error("eigensolver did not converge within {sweeps} sweeps (off-diagonal residual {residual:.3e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error(
        "matrix is ill-conditioned for inversion: eigenvalue range [{smallest:.3e}, {largest:.3e}] \
         spans more than 1e12"
    )]
    IllConditioned { smallest: f64, largest: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "need {needed} snapshot frames ending at frame {end_frame} but only {available} available"
    )]
    TooFewFrames {
        needed: usize,
        end_frame: usize,
        available: usize,
    },

    #[error(
        "steering is singular at {theta_deg} deg: |a^H R a| = {value:.3e} below floor {floor:.3e}"
    )]
    SingularSteering {
        theta_deg: f64,
        value: f64,
        floor: f64,
    },

    #[error(
        "found only {found} separated peaks ({peaks_deg:?} deg) but {requested} sources requested"
    )]
    TooFewPeaks {
        requested: usize,
        found: usize,
        peaks_deg: Vec<f64>,
    },

    #[error("trial {trial} (seed {seed}) failed: {source}")]
    TrialFailed {
        trial: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
