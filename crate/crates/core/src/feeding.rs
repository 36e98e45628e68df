//! Sliding buffer that turns a sample stream into overlapping fixed-length windows.

use std::collections::VecDeque;

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::types::AccelSample;

/// Fixed-capacity FIFO of the most recent `N` samples.
///
/// Once full, every push evicts the oldest sample and yields the window
/// `t - N + 1 ..= t` as a `3 × N` matrix (oldest column first).
#[derive(Debug, Clone)]
pub struct WindowBuffer {
    capacity: usize,
    contents: VecDeque<AccelSample>,
    next_t: Option<usize>,
}

impl WindowBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Constraint("window capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            contents: VecDeque::with_capacity(capacity),
            next_t: None,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.contents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contents.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.contents.len() == self.capacity
    }

    pub fn push(&mut self, sample: AccelSample) -> Result<Option<Array2<f64>>> {
        if let Some(expected) = self.next_t {
            if sample.t != expected {
                return Err(Error::OutOfOrder {
                    expected,
                    got: sample.t,
                });
            }
        }
        if self.contents.len() == self.capacity {
            self.contents.pop_front();
        }
        self.contents.push_back(sample);
        self.next_t = Some(sample.t + 1);
        Ok(self.is_full().then(|| self.window()))
    }

    fn window(&self) -> Array2<f64> {
        let mut w = Array2::zeros((3, self.capacity));
        for (k, s) in self.contents.iter().enumerate() {
            w[[0, k]] = s.ax;
            w[[1, k]] = s.ay;
            w[[2, k]] = s.az;
        }
        w
    }

    /// Empties the buffer; the next `N - 1` pushes emit nothing.
    pub fn reset(&mut self) {
        self.contents.clear();
        self.next_t = None;
    }
}

/// Every full window of a `3 × L` series, keyed by the index of its newest column.
///
/// Equivalent to pushing the series through a [`WindowBuffer`] sample by sample.
pub fn sliding_windows(data: &Array2<f64>, n: usize) -> Vec<(usize, Array2<f64>)> {
    if n == 0 || data.ncols() < n {
        return Vec::new();
    }
    (n - 1..data.ncols())
        .map(|k| (k, data.slice(s![.., k + 1 - n..=k]).to_owned()))
        .collect()
}
