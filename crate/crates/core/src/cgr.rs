//! Continuous gesture recognition over the per-class probability stream.
//!
//! For every class independently: a one-step rise `o_i(t) - o_i(t-1) > ρ` opens a
//! peak at `t_p`; the next `C_i` values (including `t_p`) are averaged; if the
//! mean reaches `τ_i` the gesture is recognized at `t_p + C_i - 1`. A peak is
//! tested exactly once, and rises while a peak is pending are ignored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ClassId, ProbabilityVector, RecognitionEvent};

/// Detector thresholds, plus the generating scalars and statistics they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgrParams {
    pub rho: f64,
    /// Plateau window length per class (`C_i`).
    pub window: Vec<usize>,
    /// Plateau acceptance threshold per class (`τ_i`).
    pub tau: Vec<f64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
}

impl CgrParams {
    pub fn new(rho: f64, window: Vec<usize>, tau: Vec<f64>) -> Result<Self> {
        let p = Self {
            rho,
            window,
            tau,
            alpha: None,
            gamma: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn classes(&self) -> usize {
        self.window.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Constraint(format!(
                "rho must lie in (0, 1), got {}",
                self.rho
            )));
        }
        if self.window.is_empty() || self.window.len() != self.tau.len() {
            return Err(Error::Constraint(format!(
                "need one window length and one threshold per class, got {} and {}",
                self.window.len(),
                self.tau.len()
            )));
        }
        if let Some(k) = self.window.iter().position(|&c| c == 0) {
            return Err(Error::Constraint(format!("class {} has C = 0", k + 1)));
        }
        if let Some(k) = self.tau.iter().position(|&t| !(t > 0.0 && t <= 1.0)) {
            return Err(Error::Constraint(format!(
                "class {} has tau = {} outside (0, 1]",
                k + 1,
                self.tau[k]
            )));
        }
        Ok(())
    }

    /// Checks `C_i < S_i + N` against the dataset statistics.
    pub fn check_durations(&self, durations: &[usize], window_len: usize) -> Result<()> {
        if durations.len() != self.window.len() {
            return Err(Error::Constraint("duration vector length mismatch".into()));
        }
        for (k, (&c, &s)) in self.window.iter().zip(durations).enumerate() {
            if c >= s + window_len {
                return Err(Error::Constraint(format!(
                    "class {}: C = {c} must be below S + N = {}",
                    k + 1,
                    s + window_len
                )));
            }
        }
        Ok(())
    }
}

/// One-step change of a class probability.
pub fn delta(current: f64, previous: f64) -> f64 {
    current - previous
}

pub fn is_peak(d: f64, rho: f64) -> bool {
    d > rho
}

/// Mean of exactly `expected_len` values.
pub fn plateau_mean(values: &[f64], expected_len: usize) -> Result<f64> {
    if values.len() != expected_len || expected_len == 0 {
        return Err(Error::Dimension {
            what: "plateau window",
            expected: expected_len,
            got: values.len(),
        });
    }
    Ok(values.iter().sum::<f64>() / expected_len as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PendingPeak {
    peak_t: usize,
    sum: f64,
    count: usize,
}

/// Streaming detector state.
#[derive(Debug, Clone, Default)]
pub struct CgrState {
    prev: Option<ProbabilityVector>,
    pending: Vec<Option<PendingPeak>>,
}

impl CgrState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Consumes the next probability vector; returns events decided at `o.t`,
    /// ordered by class id.
    pub fn step(
        &mut self,
        o: &ProbabilityVector,
        params: &CgrParams,
    ) -> Result<Vec<RecognitionEvent>> {
        let classes = params.classes();
        if o.values.len() != classes {
            return Err(Error::Dimension {
                what: "probability vector",
                expected: classes,
                got: o.values.len(),
            });
        }
        let Some(prev) = self.prev.as_ref() else {
            self.pending = vec![None; classes];
            self.prev = Some(o.clone());
            return Ok(Vec::new());
        };
        if o.t != prev.t + 1 {
            return Err(Error::OutOfOrder {
                expected: prev.t + 1,
                got: o.t,
            });
        }

        let mut events = Vec::new();
        for k in 0..classes {
            let value = o.values[k];
            let slot = &mut self.pending[k];
            if slot.is_none() && is_peak(delta(value, prev.values[k]), params.rho) {
                *slot = Some(PendingPeak {
                    peak_t: o.t,
                    sum: 0.0,
                    count: 0,
                });
            }
            if let Some(peak) = slot {
                peak.sum += value;
                peak.count += 1;
                if peak.count == params.window[k] {
                    let mean = peak.sum / peak.count as f64;
                    if mean >= params.tau[k] {
                        events.push(RecognitionEvent {
                            class_id: ClassId::from_index(k),
                            peak_t: peak.peak_t,
                            decision_t: o.t,
                            plateau_mean: mean,
                        });
                    }
                    *slot = None;
                }
            }
        }
        self.prev = Some(o.clone());
        Ok(events)
    }
}

/// Folds [`CgrState::step`] over a whole stream from a fresh state.
pub fn run_stream(
    probs: &[ProbabilityVector],
    params: &CgrParams,
) -> Result<Vec<RecognitionEvent>> {
    let mut state = CgrState::new();
    let mut out = Vec::new();
    for o in probs {
        out.extend(state.step(o, params)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(traces: &[Vec<f64>]) -> Vec<ProbabilityVector> {
        // traces[k][t]; values are not normalized here, the detector only reads them.
        let len = traces[0].len();
        (0..len)
            .map(|t| ProbabilityVector {
                t,
                values: traces.iter().map(|tr| tr[t]).collect(),
            })
            .collect()
    }

    fn params(c: usize, tau: f64) -> CgrParams {
        CgrParams::new(0.2, vec![c], vec![tau]).unwrap()
    }

    #[test]
    fn helpers() {
        assert!((delta(0.9, 0.3) - 0.6).abs() < 1e-15);
        assert_eq!(delta(0.4, 0.4), 0.0);
        assert!((delta(0.1, 0.8) + 0.7).abs() < 1e-15);
        assert!(is_peak(0.45, 0.2));
        assert!(!is_peak(0.2, 0.2));
        assert!(!is_peak(-0.5, 0.2));
        assert_eq!(plateau_mean(&[1.0; 20], 20).unwrap(), 1.0);
        assert_eq!(plateau_mean(&[0.0; 7], 7).unwrap(), 0.0);
        assert!((plateau_mean(&[0.8, 0.9, 1.0, 0.9], 4).unwrap() - 0.9).abs() < 1e-15);
        assert!(plateau_mean(&[0.8, 0.9], 3).is_err());
    }

    #[test]
    fn held_plateau_fires_once() {
        let c = 6;
        let mut tr = vec![0.0; 5];
        tr.extend(vec![1.0; c]);
        tr.extend(vec![1.0; 10]);
        let events = run_stream(&stream(&[tr]), &params(c, 0.9)).unwrap();
        assert_eq!(events.len(), 1);
        let e = events[0];
        assert_eq!(e.peak_t, 5);
        assert_eq!(e.decision_t, 5 + c - 1);
        assert_eq!(e.plateau_mean, 1.0);
    }

    #[test]
    fn short_plateau_is_rejected() {
        let c = 8;
        let mut tr = vec![0.0; 3];
        tr.extend(vec![1.0; c / 2]);
        tr.extend(vec![0.0; 20]);
        // A = (c/2) / c = 0.5 < 0.9
        let events = run_stream(&stream(&[tr]), &params(c, 0.9)).unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn constant_stream_never_fires() {
        let tr = vec![0.95; 100];
        assert!(run_stream(&stream(&[tr]), &params(4, 0.5))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn rises_during_pending_window_are_ignored() {
        // two rises 2 samples apart, C = 4: the second must not open a new peak
        let tr = vec![0.0, 0.5, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let events = run_stream(&stream(&[tr]), &params(4, 0.5)).unwrap();
        // window t=1..=4: 0.5 + 0 + 1 + 1 = 2.5 / 4 = 0.625
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].peak_t, 1);
        assert_eq!(events[0].plateau_mean, 0.625);
    }

    #[test]
    fn window_of_one_decides_at_the_peak() {
        let tr = vec![0.0, 0.9, 0.0, 0.9];
        let events = run_stream(&stream(&[tr]), &params(1, 0.8)).unwrap();
        assert_eq!(events.len(), 2);
        assert!(events.iter().all(|e| e.peak_t == e.decision_t));
    }

    #[test]
    fn one_event_per_class_in_time_order() {
        let c = 3;
        let mut a = vec![0.0; 30];
        let mut b = vec![0.0; 30];
        a[2..8].fill(1.0);
        b[15..22].fill(1.0);
        let p = CgrParams::new(0.2, vec![c, c], vec![0.9, 0.9]).unwrap();
        let events = run_stream(&stream(&[a, b]), &p).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!((events[0].class_id, events[0].decision_t), (ClassId(1), 4));
        assert_eq!((events[1].class_id, events[1].decision_t), (ClassId(2), 17));
    }

    #[test]
    fn simultaneous_events_ordered_by_class() {
        let tr = vec![0.0, 1.0, 1.0];
        let p = CgrParams::new(0.2, vec![2, 2, 2], vec![0.9, 0.9, 0.9]).unwrap();
        let events = run_stream(&stream(&[tr.clone(), vec![0.0; 3], tr]), &p).unwrap();
        let ids: Vec<_> = events.iter().map(|e| e.class_id).collect();
        assert_eq!(ids, vec![ClassId(1), ClassId(3)]);
    }

    #[test]
    fn errors() {
        let mut st = CgrState::new();
        let p = params(2, 0.5);
        st.step(
            &ProbabilityVector {
                t: 4,
                values: vec![1.0],
            },
            &p,
        )
        .unwrap();
        assert!(matches!(
            st.step(
                &ProbabilityVector {
                    t: 6,
                    values: vec![1.0]
                },
                &p
            ),
            Err(Error::OutOfOrder {
                expected: 5,
                got: 6
            })
        ));
        assert!(st
            .step(
                &ProbabilityVector {
                    t: 5,
                    values: vec![0.5, 0.5]
                },
                &p
            )
            .is_err());
        assert!(run_stream(&[], &p).unwrap().is_empty());
    }

    #[test]
    fn params_validation() {
        assert!(CgrParams::new(0.0, vec![1], vec![0.5]).is_err());
        assert!(CgrParams::new(1.0, vec![1], vec![0.5]).is_err());
        assert!(CgrParams::new(0.2, vec![0], vec![0.5]).is_err());
        assert!(CgrParams::new(0.2, vec![1], vec![0.0]).is_err());
        assert!(CgrParams::new(0.2, vec![1], vec![1.1]).is_err());
        assert!(CgrParams::new(0.2, vec![1, 2], vec![0.5]).is_err());
        let p = CgrParams::new(0.2, vec![20, 19], vec![0.9, 0.9]).unwrap();
        assert!(p.check_durations(&[38, 37], 40).is_ok());
        assert!(p.check_durations(&[1, 37], 19).is_err());
    }
}
