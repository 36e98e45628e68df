//! Derives detector parameters from dataset statistics and the trained model's
//! mean response: `C = round(α (S + N))`, `τ = γ M`.

use serde::{Deserialize, Serialize};

use crate::cgr::CgrParams;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::rnn::{fit_to_window, forward, ModelParams};
use crate::types::{ClassId, LabeledSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStats {
    /// Mean duration per class in samples (`S`).
    pub durations: Vec<usize>,
    /// Mean network output for the true class (`M`).
    pub mean_response: Vec<f64>,
    /// Sequences per class (`n`).
    pub counts: Vec<usize>,
    /// Window length (`N`).
    pub window_len: usize,
}

/// Rounds half up; the tolerance absorbs binary representation error in
/// products like `0.25 * 78`.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

fn per_class_counts(dataset: &[LabeledSequence], classes: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; classes];
    for seq in dataset {
        let k = seq.class_id.0 as usize;
        if k == 0 || k > classes {
            return Err(Error::InvalidInput(format!(
                "class {} outside 1..={classes}",
                seq.class_id
            )));
        }
        counts[k - 1] += 1;
    }
    if let Some(k) = counts.iter().position(|&n| n == 0) {
        return Err(Error::MissingClass(ClassId::from_index(k)));
    }
    Ok(counts)
}

/// Mean sequence length per class, rounded half up.
pub fn compute_s(dataset: &[LabeledSequence], classes: usize) -> Result<Vec<usize>> {
    let counts = per_class_counts(dataset, classes)?;
    let mut totals = vec![0usize; classes];
    for seq in dataset {
        totals[seq.class_id.index()] += seq.len();
    }
    // exact integer half-up rounding of total / n
    Ok(totals
        .iter()
        .zip(&counts)
        .map(|(&total, &n)| (2 * total + n) / (2 * n))
        .collect())
}

/// `max(S)` unless an explicit window length is supplied.
pub fn compute_n(durations: &[usize], override_n: Option<usize>) -> usize {
    override_n.unwrap_or_else(|| durations.iter().copied().max().unwrap_or(1))
}

/// Mean probability the model assigns to each sequence's own class.
pub fn compute_m(
    model: &ModelParams,
    dataset: &[LabeledSequence],
    exec: Execution,
) -> Result<Vec<f64>> {
    let classes = model.classes();
    let counts = per_class_counts(dataset, classes)?;
    let responses = exec.map(dataset, |seq| {
        let window = fit_to_window(&seq.data, model.window_len)?;
        Ok::<_, Error>((seq.class_id, forward(&window, model)?[seq.class_id.index()]))
    });
    let responses = responses.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(mean_per_class(&responses, &counts))
}

/// Averages `(class, response)` pairs given per-class counts.
fn mean_per_class(responses: &[(ClassId, f64)], counts: &[usize]) -> Vec<f64> {
    let mut sums = vec![0.0; counts.len()];
    for (id, r) in responses {
        sums[id.index()] += r;
    }
    sums.iter()
        .zip(counts)
        .map(|(s, &n)| s / n as f64)
        .collect()
}

/// Builds detector parameters, enforcing `0 < α ≤ 1`, `0 < γ ≤ 1`, `0 < ρ < 1`
/// and `C_i < S_i + N`.
pub fn derive_params(
    durations: &[usize],
    mean_response: &[f64],
    window_len: usize,
    alpha: f64,
    gamma: f64,
    rho: f64,
) -> Result<CgrParams> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Constraint(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Constraint(format!(
            "gamma must lie in (0, 1], got {gamma}"
        )));
    }
    if durations.len() != mean_response.len() {
        return Err(Error::Constraint(format!(
            "S has {} classes but M has {}",
            durations.len(),
            mean_response.len()
        )));
    }
    let window: Vec<usize> = durations
        .iter()
        .map(|&s| round_half_up(alpha * (s + window_len) as f64).max(1))
        .collect();
    let tau: Vec<f64> = mean_response.iter().map(|m| gamma * m).collect();
    let mut params = CgrParams::new(rho, window, tau)?;
    params.check_durations(durations, window_len)?;
    params.alpha = Some(alpha);
    params.gamma = Some(gamma);
    Ok(params)
}

/// Full calibration: statistics from the dataset, then [`derive_params`].
pub fn calibrate(
    model: &ModelParams,
    dataset: &[LabeledSequence],
    alpha: f64,
    gamma: f64,
    rho: f64,
    exec: Execution,
) -> Result<(CalibrationStats, CgrParams)> {
    let classes = model.classes();
    let durations = compute_s(dataset, classes)?;
    let counts = per_class_counts(dataset, classes)?;
    let mean_response = compute_m(model, dataset, exec)?;
    let params = derive_params(
        &durations,
        &mean_response,
        model.window_len,
        alpha,
        gamma,
        rho,
    )?;
    let stats = CalibrationStats {
        durations,
        mean_response,
        counts,
        window_len: model.window_len,
    };
    Ok((stats, params))
}
