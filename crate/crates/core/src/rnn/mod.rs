//! LSTM + softmax probabilistic classifier, trained from scratch.

mod cell;
mod params;
mod train;

use ndarray::{concatenate, s, Array2, Axis};

pub use cell::{backward, forward, lstm_cell, Backprop};
pub use params::{Gate, ModelParams, Standardization, Weights, INPUT_SIZE, TENSOR_NAMES};
pub use train::{train, train_with, TrainConfig, TrainReport};

use crate::error::{Error, Result};
use crate::types::ClassId;

/// Offset inside the log of [`cross_entropy`].
pub const LOG_EPSILON: f64 = 1e-12;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|v| v / sum).collect()
}

/// One-hot training target.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetVector {
    values: Vec<f64>,
}

impl TargetVector {
    /// Target for the class at 0-based `index` among `classes`.
    pub fn one_hot(index: usize, classes: usize) -> Result<Self> {
        if index >= classes {
            return Err(Error::InvalidInput(format!(
                "target index {index} outside {classes} classes"
            )));
        }
        let mut values = vec![0.0; classes];
        values[index] = 1.0;
        Ok(Self { values })
    }

    pub fn for_class(id: ClassId, classes: usize) -> Result<Self> {
        if id.0 == 0 {
            return Err(Error::InvalidInput("class id 0".into()));
        }
        Self::one_hot(id.index(), classes)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `-Σ v_j ln(o_j + ε)`
pub fn cross_entropy(probs: &[f64], target: &TargetVector) -> f64 {
    -probs
        .iter()
        .zip(target.values())
        .map(|(o, v)| v * (o + LOG_EPSILON).ln())
        .sum::<f64>()
}

/// Left-pads a `3 × L` sequence to `3 × n` by repeating its first column.
pub fn pad_to_n(seq: &Array2<f64>, n: usize) -> Result<Array2<f64>> {
    let len = seq.ncols();
    if len == 0 {
        return Err(Error::InvalidInput("cannot pad an empty sequence".into()));
    }
    if len > n {
        return Err(Error::Dimension {
            what: "sequence longer than window",
            expected: n,
            got: len,
        });
    }
    if len == n {
        return Ok(seq.to_owned());
    }
    let first = seq.slice(s![.., 0..1]);
    let pad = first.broadcast((seq.nrows(), n - len)).unwrap();
    Ok(concatenate(Axis(1), &[pad, seq.view()]).unwrap())
}

/// Shapes an isolated sequence into a window: pads short ones, keeps the
/// trailing `n` samples of long ones (what the live buffer would hold at the
/// gesture's last sample).
pub fn fit_to_window(seq: &Array2<f64>, n: usize) -> Result<Array2<f64>> {
    if seq.ncols() > n {
        Ok(seq.slice(s![.., seq.ncols() - n..]).to_owned())
    } else {
        pad_to_n(seq, n)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

/// Offline label for one isolated sequence.
pub fn predict_label(seq: &Array2<f64>, p: &ModelParams) -> Result<ClassId> {
    let probs = forward(&fit_to_window(seq, p.window_len)?, p)?;
    Ok(ClassId::from_index(argmax(&probs)))
}
