//! Shared domain types.
//!
//! Sample indices are integers throughout; wall-clock time is `t / rate_hz`.
//! Accelerations are raw m/s² with gravity included.

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the unit-sum invariant of a [`ProbabilityVector`].
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-9;

/// 1-based gesture class identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u32);

impl ClassId {
    /// Builds the id for a 0-based position in the dictionary.
    pub fn from_index(index: usize) -> Self {
        ClassId(index as u32 + 1)
    }

    /// 0-based position in the dictionary.
    pub fn index(self) -> usize {
        (self.0 as usize)
            .checked_sub(1)
            .expect("class ids start at 1")
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelSample {
    pub t: usize,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl AccelSample {
    pub fn new(t: usize, ax: f64, ay: f64, az: f64) -> Self {
        Self { t, ax, ay, az }
    }

    pub fn axes(&self) -> [f64; 3] {
        [self.ax, self.ay, self.az]
    }

    pub fn is_finite(&self) -> bool {
        self.ax.is_finite() && self.ay.is_finite() && self.az.is_finite()
    }
}

/// A timestamped triaxial acceleration series at a fixed rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub rate_hz: f64,
    pub samples: Vec<AccelSample>,
}

impl Recording {
    /// Builds a recording from a `3 × L` matrix, indexing samples from `start_t`.
    pub fn from_matrix(rate_hz: f64, start_t: usize, data: &Array2<f64>) -> Self {
        assert_eq!(data.nrows(), 3, "acceleration matrices have three rows");
        let samples = data
            .columns()
            .into_iter()
            .enumerate()
            .map(|(k, col)| AccelSample::new(start_t + k, col[0], col[1], col[2]))
            .collect();
        Self { rate_hz, samples }
    }

    /// The samples as a `3 × L` matrix, oldest column first.
    pub fn to_matrix(&self) -> Array2<f64> {
        let mut out = Array2::zeros((3, self.samples.len()));
        for (k, s) in self.samples.iter().enumerate() {
            out[[0, k]] = s.ax;
            out[[1, k]] = s.ay;
            out[[2, k]] = s.az;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Position in `samples`, when the violation is tied to one sample.
    pub position: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every recording invariant and reports all failures at once.
pub fn validate_recording(r: &Recording) -> ValidationReport {
    let mut violations = Vec::new();
    if !(r.rate_hz.is_finite() && r.rate_hz > 0.0) {
        violations.push(Violation {
            position: None,
            message: format!("rate_hz must be positive, got {}", r.rate_hz),
        });
    }
    if r.samples.is_empty() {
        violations.push(Violation {
            position: None,
            message: "recording has no samples".into(),
        });
    }
    for (pos, s) in r.samples.iter().enumerate() {
        if !s.is_finite() {
            violations.push(Violation {
                position: Some(pos),
                message: format!("non-finite value at position {pos} (t={})", s.t),
            });
        }
        if pos > 0 {
            let prev = r.samples[pos - 1].t;
            if s.t != prev + 1 {
                violations.push(Violation {
                    position: Some(pos),
                    message: format!(
                        "non-contiguous index at position {pos}: expected {}, got {}",
                        prev + 1,
                        s.t
                    ),
                });
            }
        }
    }
    ValidationReport { violations }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureClass {
    pub id: ClassId,
    pub name: String,
    /// Mean execution length in samples (`S_i`).
    pub mean_duration: usize,
}

/// The closed set of gesture classes the classifier discriminates between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureDictionary {
    classes: Vec<GestureClass>,
}

impl GestureDictionary {
    pub fn new(classes: Vec<GestureClass>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidInput("gesture dictionary is empty".into()));
        }
        for (k, c) in classes.iter().enumerate() {
            if c.id != ClassId::from_index(k) {
                return Err(Error::InvalidInput(format!(
                    "class ids must be dense and ordered from 1; position {k} has id {}",
                    c.id
                )));
            }
            if c.mean_duration == 0 {
                return Err(Error::InvalidInput(format!(
                    "class {} has zero mean duration",
                    c.id
                )));
            }
        }
        Ok(Self { classes })
    }

    /// Builds a dictionary with generic names `G1..Gk` from per-class mean durations.
    pub fn from_durations(durations: &[usize]) -> Result<Self> {
        Self::new(
            durations
                .iter()
                .enumerate()
                .map(|(k, &s)| GestureClass {
                    id: ClassId::from_index(k),
                    name: format!("G{}", k + 1),
                    mean_duration: s,
                })
                .collect(),
        )
    }

    pub fn classes(&self) -> &[GestureClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn durations(&self) -> Vec<usize> {
        self.classes.iter().map(|c| c.mean_duration).collect()
    }

    pub fn contains(&self, id: ClassId) -> bool {
        id.0 >= 1 && (id.0 as usize) <= self.classes.len()
    }
}

/// Per-class classifier output `o(t)` for the window ending at sample `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector {
    pub t: usize,
    pub values: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(t: usize, values: Vec<f64>) -> Result<Self> {
        let pv = Self { t, values };
        pv.check()?;
        Ok(pv)
    }

    pub fn check(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidInput("empty probability vector".into()));
        }
        if let Some(v) = self
            .values
            .iter()
            .find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(Error::InvalidInput(format!(
                "probability {v} outside [0, 1] at t={}",
                self.t
            )));
        }
        let sum: f64 = self.values.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum} at t={}",
                self.t
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A ground-truth gesture occurrence, `start..=end` in sample indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSegment {
    pub class_id: ClassId,
    pub start: usize,
    pub end: usize,
}

impl LabeledSegment {
    pub fn new(class_id: ClassId, start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidInput(format!(
                "segment start {start} after end {end}"
            )));
        }
        Ok(Self {
            class_id,
            start,
            end,
        })
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One recognition emitted by the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecognitionEvent {
    pub class_id: ClassId,
    pub peak_t: usize,
    /// Last sample of the plateau window, `peak_t + C_i - 1`.
    pub decision_t: usize,
    pub plateau_mean: f64,
}

/// A trimmed, isolated gesture execution stored as a `3 × L` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub class_id: ClassId,
    pub data: Array2<f64>,
}

impl LabeledSequence {
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }
}
