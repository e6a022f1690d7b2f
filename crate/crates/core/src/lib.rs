//! Broadband array-processing library: narrowband spatial-spectrum
//! estimators (SRP, SRP-PHAT, diagonal-unloading, diagonally loaded MVDR,
//! MUSIC), incoherent broadband fusion, a free-field multichannel scene
//! simulator, and a Monte-Carlo experiment pipeline.

// Validation guards are written as `!(x > 0.0)` on purpose: the negated form
// also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod beamformers;
pub mod error;
pub mod fusion;
pub mod linalg;
pub mod pipeline;
pub mod simulator;
pub mod spectral;

pub use array::{ArrayGeometry, DoaGrid, SteeringGrid, SteeringVector};
pub use beamformers::{BeamWeights, GainReport, Method, NarrowbandSpectrum, WeightKind};
pub use error::{Error, Result};
pub use fusion::{BroadbandSpectrum, DoaEstimate};
pub use linalg::{ComplexMatrix, EigenSystem, HermitianMatrix};
pub use pipeline::{
    BeampatternTable, LocalizeOutcome, PhatMode, ProcessingConfig, Scenario, SceneTruth,
    Sigma2Source, SweepAxis, SweepResult, SweepRow, SweepSpec,
};
pub use simulator::{NoiseSpec, SourceKind, SourceSpec};
pub use spectral::{BinRange, MultichannelSignal, PsdMatrix, SnapshotSpectra, Window};
