//! Streaming gesture recognition from a single wrist-worn triaxial accelerometer.
//!
//! The pipeline has three stages that run per incoming sample:
//!
//! 1. [`feeding`] keeps a sliding buffer of the last `N` samples and emits a
//!    `3 × N` window once the buffer is full.
//! 2. [`rnn`] runs an LSTM + softmax classifier over the window and returns a
//!    probability for every gesture class in the dictionary.
//! 3. [`cgr`] watches the per-class probability traces for a sharp rise followed
//!    by a sustained plateau and emits one [`RecognitionEvent`] per rise.
//!
//! [`calibrate`] derives the detector thresholds from a trained model,
//! [`synthgen`] produces seeded synthetic corpora, and [`eval`] scores events
//! against labeled segments.

pub mod calibrate;
pub mod cgr;
pub mod cli;
pub mod error;
pub mod eval;
pub mod feeding;
pub mod io;
pub mod par;
pub mod pipeline;
pub mod rnn;
pub mod synthgen;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    AccelSample, ClassId, GestureClass, GestureDictionary, LabeledSegment, LabeledSequence,
    ProbabilityVector, RecognitionEvent, Recording,
};
