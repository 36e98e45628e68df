//! Wiring of feeding → classifier → detector.
//!
//! [`Recognizer`] is the live path: one sample in, zero or more events out.
//! [`probability_stream`] computes the same per-window outputs in bulk; every
//! window is classified from zero state, so windows are independent and can be
//! evaluated in parallel.

use crate::cgr::{run_stream, CgrParams, CgrState};
use crate::error::{Error, Result};
use crate::feeding::{sliding_windows, WindowBuffer};
use crate::par::Execution;
use crate::rnn::{forward, ModelParams};
use crate::types::{
    validate_recording, AccelSample, ProbabilityVector, RecognitionEvent, Recording,
};

fn check_recording(r: &Recording) -> Result<()> {
    let report = validate_recording(r);
    match report.violations.first() {
        None => Ok(()),
        Some(v) => Err(Error::InvalidInput(v.message.clone())),
    }
}

fn check_compatible(model: &ModelParams, params: &CgrParams) -> Result<()> {
    if model.classes() != params.classes() {
        return Err(Error::Dimension {
            what: "detector classes vs model classes",
            expected: model.classes(),
            got: params.classes(),
        });
    }
    Ok(())
}

/// Classifier output for every full window of the recording, in sample order.
pub fn probability_stream(
    model: &ModelParams,
    recording: &Recording,
    exec: Execution,
) -> Result<Vec<ProbabilityVector>> {
    check_recording(recording)?;
    let windows = sliding_windows(&recording.to_matrix(), model.window_len);
    let t0 = recording.samples[0].t;
    exec.map(&windows, |(k, w)| {
        ProbabilityVector::new(t0 + k, forward(w, model)?)
    })
    .into_iter()
    .collect()
}

/// Events for a whole recording via the bulk path.
pub fn recognize(
    model: &ModelParams,
    params: &CgrParams,
    recording: &Recording,
    exec: Execution,
) -> Result<Vec<RecognitionEvent>> {
    check_compatible(model, params)?;
    run_stream(&probability_stream(model, recording, exec)?, params)
}

/// Live sample-by-sample recognizer.
#[derive(Debug, Clone)]
pub struct Recognizer<'a> {
    model: &'a ModelParams,
    params: &'a CgrParams,
    buffer: WindowBuffer,
    state: CgrState,
}

impl<'a> Recognizer<'a> {
    pub fn new(model: &'a ModelParams, params: &'a CgrParams) -> Result<Self> {
        check_compatible(model, params)?;
        params.validate()?;
        Ok(Self {
            model,
            params,
            buffer: WindowBuffer::new(model.window_len)?,
            state: CgrState::new(),
        })
    }

    pub fn push(&mut self, sample: AccelSample) -> Result<Vec<RecognitionEvent>> {
        if !sample.is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite sample at t={}",
                sample.t
            )));
        }
        match self.buffer.push(sample)? {
            None => Ok(Vec::new()),
            Some(window) => {
                let o = ProbabilityVector::new(sample.t, forward(&window, self.model)?)?;
                self.state.step(&o, self.params)
            }
        }
    }

    pub fn reset(&mut self) {
        self.buffer.reset();
        self.state = CgrState::new();
    }
}
