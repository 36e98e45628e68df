//! Forward pass and backpropagation through time.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use super::params::{Gate, ModelParams, Weights, INPUT_SIZE};
use super::{cross_entropy, softmax, TargetVector};
use crate::error::{Error, Result};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn preactivation(gate: &Gate, x: &ArrayView1<f64>, h_prev: &Array1<f64>) -> Array1<f64> {
    gate.w.dot(x) + gate.u.dot(h_prev) + &gate.b
}

/// Activations of one time step, kept for the backward pass.
struct Step {
    i: Array1<f64>,
    f: Array1<f64>,
    o: Array1<f64>,
    g: Array1<f64>,
    c: Array1<f64>,
    tanh_c: Array1<f64>,
}

fn step(w: &Weights, x: &ArrayView1<f64>, h_prev: &Array1<f64>, c_prev: &Array1<f64>) -> Step {
    let i = preactivation(&w.input, x, h_prev).mapv_into(sigmoid);
    let f = preactivation(&w.forget, x, h_prev).mapv_into(sigmoid);
    let o = preactivation(&w.output, x, h_prev).mapv_into(sigmoid);
    let g = preactivation(&w.cell, x, h_prev).mapv_into(f64::tanh);
    let c = &f * c_prev + &i * &g;
    let tanh_c = c.mapv(f64::tanh);
    Step {
        i,
        f,
        o,
        g,
        c,
        tanh_c,
    }
}

/// One LSTM update: returns `(h, c)`.
pub fn lstm_cell(
    x: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
    c_prev: ArrayView1<f64>,
    p: &ModelParams,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let hidden = p.hidden();
    expect_len("cell input", x.len(), INPUT_SIZE)?;
    expect_len("previous hidden state", h_prev.len(), hidden)?;
    expect_len("previous cell state", c_prev.len(), hidden)?;
    let s = step(&p.weights, &x, &h_prev.to_owned(), &c_prev.to_owned());
    let h = &s.o * &s.tanh_c;
    Ok((h, s.c))
}

fn expect_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::Dimension {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

/// Applies the model's input standardization (if any) and checks the window shape.
fn prepare(window: &Array2<f64>, p: &ModelParams) -> Result<Array2<f64>> {
    expect_len("window rows", window.nrows(), INPUT_SIZE)?;
    expect_len("window columns", window.ncols(), p.window_len)?;
    let mut x = window.to_owned();
    if let Some(st) = &p.standardization {
        for (ch, mut row) in x.axis_iter_mut(Axis(0)).enumerate() {
            row.mapv_inplace(|v| (v - st.mean[ch]) / st.std[ch]);
        }
    }
    Ok(x)
}

struct Trace {
    x: Array2<f64>,
    steps: Vec<Step>,
    h: Vec<Array1<f64>>,
    probs: Vec<f64>,
}

fn run(window: &Array2<f64>, p: &ModelParams) -> Result<Trace> {
    let x = prepare(window, p)?;
    let hidden = p.hidden();
    let w = &p.weights;
    let mut h = vec![Array1::zeros(hidden)];
    let mut steps: Vec<Step> = Vec::with_capacity(x.ncols());
    let zero_c = Array1::zeros(hidden);
    for col in x.columns() {
        let c_prev = steps.last().map_or(&zero_c, |s| &s.c);
        let s = step(w, &col, h.last().unwrap(), c_prev);
        h.push(&s.o * &s.tanh_c);
        steps.push(s);
    }
    let logits = w.w_out.dot(h.last().unwrap()) + &w.b_out;
    let probs = softmax(logits.as_slice().unwrap());
    Ok(Trace { x, steps, h, probs })
}

/// Class probabilities for one `3 × N` window, from zero initial state.
pub fn forward(window: &Array2<f64>, p: &ModelParams) -> Result<Vec<f64>> {
    Ok(run(window, p)?.probs)
}

/// Result of one forward/backward pass.
#[derive(Debug, Clone)]
pub struct Backprop {
    pub loss: f64,
    pub probs: Vec<f64>,
    pub grads: Weights,
}

/// Cross-entropy loss of one window and its gradient w.r.t. every weight.
pub fn backward(window: &Array2<f64>, target: &TargetVector, p: &ModelParams) -> Result<Backprop> {
    expect_len("target vector", target.values().len(), p.classes())?;
    let trace = run(window, p)?;
    let w = &p.weights;
    let hidden = p.hidden();
    let mut grads = Weights::zeros(hidden, p.classes());

    let dz = Array1::from_iter(trace.probs.iter().zip(target.values()).map(|(o, v)| o - v));
    let h_last = trace.h.last().unwrap();
    grads.w_out = outer(&dz, h_last);
    grads.b_out = dz.clone();

    let mut dh = w.w_out.t().dot(&dz);
    let mut dc = Array1::<f64>::zeros(hidden);
    let zero_c = Array1::zeros(hidden);
    for t in (0..trace.steps.len()).rev() {
        let s = &trace.steps[t];
        let c_prev = if t == 0 {
            &zero_c
        } else {
            &trace.steps[t - 1].c
        };
        let h_prev = &trace.h[t];
        let x = trace.x.column(t);

        let d_o = &dh * &s.tanh_c;
        dc = dc + &dh * &s.o * &s.tanh_c.mapv(|v| 1.0 - v * v);
        let d_i = &dc * &s.g;
        let d_g = &dc * &s.i;
        let d_f = &dc * c_prev;

        let da_i = d_i * &s.i.mapv(|v| v * (1.0 - v));
        let da_f = d_f * &s.f.mapv(|v| v * (1.0 - v));
        let da_o = d_o * &s.o.mapv(|v| v * (1.0 - v));
        let da_g = d_g * &s.g.mapv(|v| 1.0 - v * v);

        dh = Array1::zeros(hidden);
        for (gate, grad, da) in [
            (&w.input, &mut grads.input, &da_i),
            (&w.forget, &mut grads.forget, &da_f),
            (&w.output, &mut grads.output, &da_o),
            (&w.cell, &mut grads.cell, &da_g),
        ] {
            accumulate_outer(&mut grad.w, da, &x);
            accumulate_outer(&mut grad.u, da, &h_prev.view());
            grad.b += da;
            dh += &gate.u.t().dot(da);
        }
        dc *= &s.f;
    }

    let loss = cross_entropy(&trace.probs, target);
    Ok(Backprop {
        loss,
        probs: trace.probs,
        grads,
    })
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.len(), b.len()));
    accumulate_outer(&mut out, a, &b.view());
    out
}

fn accumulate_outer(dst: &mut Array2<f64>, a: &Array1<f64>, b: &ArrayView1<f64>) {
    for (mut row, &ai) in dst.rows_mut().into_iter().zip(a) {
        row.scaled_add(ai, b);
    }
}
