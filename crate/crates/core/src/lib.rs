//! Estimation of cyclic Poisson arrival rates from raw event times.
//!
//! The pipeline tapers the events with a window, scans the resulting
//! periodogram for peaks above a noise-calibrated threshold, and fits
//! complex amplitudes to the selected frequencies by least squares.

pub mod coefficients;
pub mod error;
pub mod experiments;
pub mod nufft;
pub mod numeric;
pub mod periodogram;
pub mod rate_model;
pub mod recovery;
pub mod rng;
pub mod sim;
pub mod windows;

pub use error::{Error, Result};
pub use rate_model::{Component, GapRule, Intensity, RateModel, SawtoothRate, SeparationReport};
pub use rng::RngStream;
pub use sim::{simulate_homogeneous, simulate_nhpp, EventSeries};
pub use windows::{WindowKind, WindowSpec};
