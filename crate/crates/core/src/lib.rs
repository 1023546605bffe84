//! LoRa physical-layer simulation for frequency-selective multipath channels.
//!
//! The crate covers the whole receive chain at chip rate:
//!
//! * [`waveform`]: chirp synthesis, dechirping, the M-point DFT and the legacy
//!   coherent / non-coherent detectors.
//! * [`channel`]: integer-delay multipath channels, frame construction, exact
//!   ISI-bearing reception, AWGN and the dechirped path-gain algebra.
//! * [`detect`]: ideal-MF, MF and RAKE detectors (full and candidate variants),
//!   the parasitic-peak indicators and the TDEL baseline.
//! * [`estimator`]: pilot-averaged estimation of tap delays and gains.
//! * [`complexity`]: closed-form operation counts for MF and RAKE receivers.
//! * [`fastsim`]: the equivalent-system simulator built from a precomputed
//!   noise-free statistic matrix and correlated DFT-domain noise.
//! * [`sim`]: the Monte Carlo harness behind the command-line tool.

pub mod channel;
pub mod complexity;
pub mod detect;
mod dft;
mod error;
pub mod estimator;
pub mod fastsim;
pub mod sim;
pub mod waveform;

pub use channel::{DechirpedGains, Frame, MultipathChannel, Tap};
pub use detect::{CandidateSet, CorrelationTable, DetectionStatistic, SelectionMode};
pub use dft::{dft, idft, Dft};
pub use error::{Error, Result};
pub use estimator::EstimatorConfig;
pub use waveform::{LoRaParams, Modem, SampleBuffer, SpectrumBuffer, Symbol};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;
