//! EEG trial decoding library.
//!
//! Implements a decoding pipeline for event-locked multichannel EEG:
//! signal conditioning (common average reference, resampling, exponential
//! moving standardization), epoching into trials, three classifiers
//! (a deep four-block ConvNet, regularized LDA on time-domain features,
//! and filter-bank CSP + rLDA), permutation/sign-test statistics, and
//! input-perturbation correlation maps for model interpretation.
//!
//! Recordings live in a simple on-disk container (JSON header plus raw
//! little-endian `f32` payload) so datasets can be produced and consumed
//! by any language. The [`synth`] module generates seeded ground-truth
//! datasets that make the whole pipeline verifiable end to end.

pub mod classical;
pub mod container;
pub mod convnet;
pub mod error;
pub mod filters;
pub mod interpret;
pub mod linalg;
pub mod preprocess;
pub mod stats;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{ConditionLabel, EventMarker, Outcome, Recording, Robot, Task, TrialSet};
