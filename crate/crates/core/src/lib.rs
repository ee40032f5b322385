//! Simulation of local and global two-photon interference between photons whose
//! time-bin mode structure is synthesized in a polarization fiber loop.
//!
//! The crate is organized bottom-up:
//!
//! - [`modes`]: amplitude vectors over time bins and bin subsets
//! - [`network`]: loop dynamics, switching patterns and the pattern compiler
//! - [`interference`]: first- and second-order correlations behind a beam splitter
//! - [`wavepacket`]: temporal overlap of Gaussian packets against delay
//! - [`source`]: heralded down-conversion statistics and the source visibility
//! - [`experiment`]: delay scans, shot noise, dip fits and normalization
//! - [`demos`]: the bundled scenarios

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod demos;
pub mod error;
pub mod experiment;
pub mod interference;
pub mod modes;
pub mod network;
pub mod source;
pub mod wavepacket;

pub use error::{Diagnostic, DiagnosticKind, Error, Result};
pub use experiment::{run_scan, ScanResult, Scenario};
pub use interference::{CorrelationMatrix, CorrelationMode, Indistinguishability};
pub use modes::{
    inner_product, normalize, restrict, Amplitude, ModeSubset, ModeVector, Polarization,
};
pub use network::{
    compile_pattern, run_loop, step, synthesize, validate_pattern, CoinSetting, LoopConfig,
    LoopState, SwitchingPattern,
};
pub use source::PdcSourceModel;
pub use wavepacket::GaussianPacket;
