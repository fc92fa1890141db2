//! Simulation of local-hidden-variable sources that fake CHSH violations
//! by steering blinded single-photon detectors with bright light.
//!
//! The crate pairs each strategy with closed-form predictions in
//! [`analytic`] so Monte Carlo runs from [`engine`] can be checked against
//! them. With the default `parallel` feature the engine spreads batches
//! over a rayon pool; results are identical to the sequential path.

pub mod analytic;
pub mod detector;
pub mod engine;
pub mod error;
pub mod inequalities;
pub mod optics;
pub mod report;
pub mod rng;
pub mod strategies;
pub mod types;

pub use engine::{merge, run, RunConfig, Strategy};
pub use error::{Error, Result};
pub use types::{
    Angle, Basis, CoincidenceCounts, MeasurementSettings, Outcome, OutcomeTable, Party, Pulse, PulsePair, RunSummary,
    SettingCounts, SettingPair,
};
