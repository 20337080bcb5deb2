//! Heralded single-photon synchronization through a decaying quantum memory.
//!
//! The crate has four layers:
//!
//! * [`model`]: closed-form rate, efficiency, downtime, noise and SNR equations,
//!   composed end to end by [`model::full_chain`].
//! * [`sim`]: a seeded discrete-event Monte-Carlo of the photon source, the
//!   trigger electronics, the memory, an optional beamsplitter and the detectors.
//!   It produces time-tag streams and an event log.
//! * [`analysis`]: estimators that turn time-tag streams into rates, g², HOM
//!   visibility, temporal overlap and decay curves.
//! * [`fit`]: Levenberg-Marquardt fits of the decay and g² models, and the
//!   two-constraint decay calibration.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! files and the command-line front end live in the `photosync` crate.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod error;
pub mod fit;
pub mod model;
pub mod params;
pub mod quad;
pub mod sim;
pub mod units;

pub use error::{AnalysisError, FitError, ModelError, SimError};
pub use params::{
    DecayModel, DetectorParams, ElectronicsParams, EnvelopeShape, MemoryMode, MemoryParams,
    Routing, SimParams, SourceParams, SystemConfig,
};
pub use units::Picos;
