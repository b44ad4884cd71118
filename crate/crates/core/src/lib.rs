//! Automated detection of pathological slowing in multi-channel scalp EEG.
//!
//! The crate covers the full chain from raw EDF recordings to channel-,
//! segment- and recording-level slowing decisions:
//!
//! ```text
//! EDF / CSV ──► preprocess (notch, 1 Hz high-pass, CAR, 128 Hz, artifact epochs)
//!           ──► 5 s windows, 75 % overlap
//!           ──► channel detector   (spectral threshold | shallow model | 1D CNN)
//!           ──► histogram features over channels / windows
//!           ──► shallow classifier ──► segment / EEG decision
//! ```
//!
//! [`eval`] holds metrics and leave-one-subject/institution-out harnesses and
//! [`synth`] generates multi-site cohorts with exact ground truth.

pub mod cnn;
pub mod detect;
pub mod edf;
pub mod error;
pub mod eval;
pub mod filter;
pub mod model_io;
pub mod preprocess;
pub mod recording;
pub mod shallow;
pub mod spectral;
pub mod synth;
pub mod system;

pub use error::{Error, Result};
pub use recording::Recording;
