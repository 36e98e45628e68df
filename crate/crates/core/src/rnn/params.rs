use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of input channels (ax, ay, az).
pub const INPUT_SIZE: usize = 3;

/// Weights of one LSTM gate: `pre = w · x + u · h_prev + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    /// `H × 3`
    pub w: Array2<f64>,
    /// `H × H`
    pub u: Array2<f64>,
    pub b: Array1<f64>,
}

impl Gate {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            w: Array2::zeros((hidden, INPUT_SIZE)),
            u: Array2::zeros((hidden, hidden)),
            b: Array1::zeros(hidden),
        }
    }
}

/// Every trainable tensor of the classifier. Gradients share this layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub input: Gate,
    pub forget: Gate,
    pub output: Gate,
    pub cell: Gate,
    /// `|G| × H`
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

/// Tensor names in the fixed order used by [`Weights::tensors`] and the model file.
pub const TENSOR_NAMES: [&str; 14] = [
    "input.w", "input.u", "input.b", "forget.w", "forget.u", "forget.b", "output.w", "output.u",
    "output.b", "cell.w", "cell.u", "cell.b", "w_out", "b_out",
];

macro_rules! flat {
    ($a:expr) => {
        $a.as_slice().expect("parameter tensors are contiguous")
    };
}

macro_rules! flat_mut {
    ($a:expr) => {
        $a.as_slice_mut().expect("parameter tensors are contiguous")
    };
}

impl Weights {
    pub fn zeros(hidden: usize, classes: usize) -> Self {
        Self {
            input: Gate::zeros(hidden),
            forget: Gate::zeros(hidden),
            output: Gate::zeros(hidden),
            cell: Gate::zeros(hidden),
            w_out: Array2::zeros((classes, hidden)),
            b_out: Array1::zeros(classes),
        }
    }

    pub fn hidden(&self) -> usize {
        self.input.b.len()
    }

    pub fn classes(&self) -> usize {
        self.b_out.len()
    }

    /// Flat row-major views of every tensor, in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> [&[f64]; 14] {
        [
            flat!(self.input.w),
            flat!(self.input.u),
            flat!(self.input.b),
            flat!(self.forget.w),
            flat!(self.forget.u),
            flat!(self.forget.b),
            flat!(self.output.w),
            flat!(self.output.u),
            flat!(self.output.b),
            flat!(self.cell.w),
            flat!(self.cell.u),
            flat!(self.cell.b),
            flat!(self.w_out),
            flat!(self.b_out),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 14] {
        [
            flat_mut!(self.input.w),
            flat_mut!(self.input.u),
            flat_mut!(self.input.b),
            flat_mut!(self.forget.w),
            flat_mut!(self.forget.u),
            flat_mut!(self.forget.b),
            flat_mut!(self.output.w),
            flat_mut!(self.output.u),
            flat_mut!(self.output.b),
            flat_mut!(self.cell.w),
            flat_mut!(self.cell.u),
            flat_mut!(self.cell.b),
            flat_mut!(self.w_out),
            flat_mut!(self.b_out),
        ]
    }

    /// Shapes in [`TENSOR_NAMES`] order.
    pub fn shapes(&self) -> [Vec<usize>; 14] {
        let gate = |g: &Gate| {
            [
                g.w.shape().to_vec(),
                g.u.shape().to_vec(),
                g.b.shape().to_vec(),
            ]
        };
        let [a, b, c] = gate(&self.input);
        let [d, e, f] = gate(&self.forget);
        let [g, h, i] = gate(&self.output);
        let [j, k, l] = gate(&self.cell);
        [
            a,
            b,
            c,
            d,
            e,
            f,
            g,
            h,
            i,
            j,
            k,
            l,
            self.w_out.shape().to_vec(),
            self.b_out.shape().to_vec(),
        ]
    }

    /// `self += k * other`
    pub fn add_scaled(&mut self, other: &Weights, k: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += k * s;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= k);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Per-channel input standardization learned from the training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

/// LSTM + softmax classifier over `3 × window_len` windows.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub window_len: usize,
    pub weights: Weights,
    pub standardization: Option<Standardization>,
}

impl ModelParams {
    pub fn zeros(hidden: usize, classes: usize, window_len: usize) -> Self {
        Self {
            window_len,
            weights: Weights::zeros(hidden, classes),
            standardization: None,
        }
    }

    /// Uniform weights in `[-1/√H, 1/√H]`, forget-gate bias 1, other biases 0.
    pub fn init(hidden: usize, classes: usize, window_len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut p = Self::zeros(hidden, classes, window_len);
        let w = &mut p.weights;
        for gate in [&mut w.input, &mut w.forget, &mut w.output, &mut w.cell] {
            gate.w.mapv_inplace(|_| rng.random_range(-bound..=bound));
            gate.u.mapv_inplace(|_| rng.random_range(-bound..=bound));
        }
        w.w_out.mapv_inplace(|_| rng.random_range(-bound..=bound));
        w.forget.b.fill(1.0);
        p
    }

    pub fn hidden(&self) -> usize {
        self.weights.hidden()
    }

    pub fn classes(&self) -> usize {
        self.weights.classes()
    }

    /// Checks tensor dimensions and finiteness.
    pub fn validate(&self) -> Result<()> {
        let h = self.hidden();
        let g = self.classes();
        if h == 0 || g == 0 || self.window_len == 0 {
            return Err(Error::InvalidInput(
                "hidden size, class count and window length must be positive".into(),
            ));
        }
        for gate in [
            &self.weights.input,
            &self.weights.forget,
            &self.weights.output,
            &self.weights.cell,
        ] {
            check_shape("gate input weights", gate.w.dim(), (h, INPUT_SIZE))?;
            check_shape("gate recurrent weights", gate.u.dim(), (h, h))?;
            check_len("gate bias", gate.b.len(), h)?;
        }
        check_shape("output weights", self.weights.w_out.dim(), (g, h))?;
        if !self.weights.is_finite() {
            return Err(Error::InvalidInput("non-finite model weight".into()));
        }
        if let Some(s) = &self.standardization {
            if s.std.iter().any(|v| !(v.is_finite() && *v > 0.0))
                || s.mean.iter().any(|v| !v.is_finite())
            {
                return Err(Error::InvalidInput(
                    "invalid standardization vectors".into(),
                ));
            }
        }
        Ok(())
    }
}

fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::Dimension {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

fn check_shape(what: &'static str, got: (usize, usize), expected: (usize, usize)) -> Result<()> {
    check_len(what, got.0, expected.0)?;
    check_len(what, got.1, expected.1)
}
