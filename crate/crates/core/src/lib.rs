//! Class-conditional time-series forecasters used as synthesizers for
//! labeled biosignal epochs, together with the spectrogram classifier and
//! experiment protocol that measure how useful the synthetic data is.
//!
//! The pipeline runs: [`labeling`] a raw EEG/EMG recording into epochs,
//! [`windowing`] same-class runs into supervised pairs, training one
//! [`forecast`] model per class, [`generator`] synthesis of one synthetic
//! epoch per original, and [`evaluation`] of a [`classifier`] trained on
//! original, synthetic or combined data.

pub mod checkpoint;
pub mod classifier;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod forecast;
pub mod generator;
pub mod io;
pub mod labeling;
pub mod pipeline;
pub mod signal;
pub mod spectrum;
pub mod toy;
pub mod windowing;

pub use error::{Error, Result};
pub use signal::{ClassLabel, Dataset, EpochId, LabeledEpoch, Provenance, Signal};
