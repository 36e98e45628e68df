//! Offline and online scoring: confusion matrices with a not-a-gesture (N.G.)
//! category, event-to-segment matching and recognition latency.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::rnn::{predict_label, ModelParams};
use crate::types::{ClassId, LabeledSegment, LabeledSequence, RecognitionEvent};

/// `(|G| + 1)²` counts; rows are ground truth, columns predictions, and the
/// last row/column is N.G. The (N.G., N.G.) cell is always 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![vec![0; classes + 1]; classes + 1],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    fn slot(&self, id: Option<ClassId>) -> Result<usize> {
        match id {
            None => Ok(self.classes),
            Some(c) if c.0 >= 1 && (c.0 as usize) <= self.classes => Ok(c.index()),
            Some(c) => Err(Error::InvalidInput(format!(
                "class {c} outside 1..={}",
                self.classes
            ))),
        }
    }

    /// Records one outcome; `None` stands for N.G.
    pub fn record(&mut self, truth: Option<ClassId>, predicted: Option<ClassId>) -> Result<()> {
        if truth.is_none() && predicted.is_none() {
            return Err(Error::InvalidInput("the N.G./N.G. cell is unused".into()));
        }
        let (r, c) = (self.slot(truth)?, self.slot(predicted)?);
        self.counts[r][c] += 1;
        Ok(())
    }

    pub fn get(&self, truth: Option<ClassId>, predicted: Option<ClassId>) -> u64 {
        match (self.slot(truth), self.slot(predicted)) {
            (Ok(r), Ok(c)) => self.counts[r][c],
            _ => 0,
        }
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_total(&self, row: usize) -> u64 {
        self.counts[row].iter().sum()
    }

    pub fn col_total(&self, col: usize) -> u64 {
        self.counts.iter().map(|r| r[col]).sum()
    }

    /// Adds another matrix over the same dictionary cell by cell.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::Dimension {
                what: "confusion matrix classes",
                expected: self.classes,
                got: other.classes,
            });
        }
        for (row, o) in self.counts.iter_mut().zip(&other.counts) {
            for (c, v) in row.iter_mut().zip(o) {
                *c += v;
            }
        }
        Ok(())
    }

    pub fn summarize(&self) -> Summary {
        summarize(self)
    }

    fn labels(&self) -> Vec<String> {
        (1..=self.classes)
            .map(|k| format!("G{k}"))
            .chain(std::iter::once("N.G.".to_string()))
            .collect()
    }

    /// Aligned table with a recall row and a precision column.
    pub fn to_table(&self) -> String {
        let s = self.summarize();
        let labels = self.labels();
        let fmt_pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.1}%", 100.0 * x));
        let mut header = vec!["truth\\pred".to_string()];
        header.extend(labels.iter().cloned());
        header.push("precision".into());
        let mut rows = vec![header];
        for (r, label) in labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend(self.counts[r].iter().map(|c| c.to_string()));
            row.push(String::new());
            rows.push(row);
        }
        // precision sits in the column of each predicted class
        let mut prec_row = vec!["precision".to_string()];
        prec_row.extend(s.precision.iter().map(|p| fmt_pct(*p)));
        prec_row.push(String::new());
        prec_row.push(String::new());
        let mut rec_row = vec!["recall".to_string()];
        rec_row.extend(s.recall.iter().map(|p| fmt_pct(*p)));
        rec_row.push(String::new());
        rec_row.push(format!("acc {}", fmt_pct(s.accuracy)));
        rows.push(prec_row);
        rows.push(rec_row);
        // drop the trailing column header if nothing uses it
        for row in &mut rows {
            row.truncate(self.classes + 3);
        }
        rows[0].truncate(self.classes + 2);
        render_aligned(&rows)
    }

    /// `truth,G1,…,G|G|,N.G.` followed by one line per row.
    pub fn to_csv(&self) -> String {
        let labels = self.labels();
        let mut out = format!("truth,{}\n", labels.join(","));
        for (label, row) in labels.iter().zip(&self.counts) {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "{label},{}", cells.join(","));
        }
        out
    }
}

fn render_aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.len())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| format!("{cell:>w$}", w = widths[c]))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

/// Per-class precision and recall plus overall accuracy; `None` where the
/// denominator is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub precision: Vec<Option<f64>>,
    pub recall: Vec<Option<f64>>,
    pub accuracy: Option<f64>,
}

impl Summary {
    pub fn mean_recall(&self) -> Option<f64> {
        mean_defined(&self.recall)
    }

    pub fn mean_precision(&self) -> Option<f64> {
        mean_defined(&self.precision)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,precision,recall\n");
        let f = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for (k, (p, r)) in self.precision.iter().zip(&self.recall).enumerate() {
            let _ = writeln!(out, "{},{},{}", k + 1, f(*p), f(*r));
        }
        let _ = writeln!(out, "accuracy,{},", f(self.accuracy));
        out
    }
}

fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

pub fn summarize(cm: &ConfusionMatrix) -> Summary {
    let g = cm.classes;
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let precision = (0..g)
        .map(|k| ratio(cm.counts[k][k], cm.col_total(k)))
        .collect();
    let recall = (0..g)
        .map(|k| ratio(cm.counts[k][k], cm.row_total(k)))
        .collect();
    let trace: u64 = (0..g).map(|k| cm.counts[k][k]).sum();
    let truth_total: u64 = (0..g).map(|k| cm.row_total(k)).sum();
    Summary {
        precision,
        recall,
        accuracy: ratio(trace, truth_total),
    }
}

/// Argmax predictions on isolated sequences; no N.G. outcomes.
pub fn offline_confusion(
    model: &ModelParams,
    test_set: &[LabeledSequence],
    exec: Execution,
) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(model.classes());
    let preds = exec.map(test_set, |s| predict_label(&s.data, model));
    for (seq, pred) in test_set.iter().zip(preds) {
        cm.record(Some(seq.class_id), Some(pred?))?;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub event: RecognitionEvent,
    pub segment: LabeledSegment,
    /// `decision_t - segment.end`; non-positive means recognized before the gesture ended.
    pub latency: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub matches: Vec<Match>,
    pub false_positives: Vec<RecognitionEvent>,
    pub missed: Vec<LabeledSegment>,
    /// Tolerance past a segment's end within which a decision still counts.
    pub window_len: usize,
}

fn in_window(seg: &LabeledSegment, t: usize, window_len: usize) -> bool {
    seg.start <= t && t <= seg.end + window_len
}

/// Greedy chronological one-to-one matching: each event takes the earliest
/// unmatched same-class segment whose `[start, end + N]` contains its decision.
pub fn match_events(
    events: &[RecognitionEvent],
    segments: &[LabeledSegment],
    window_len: usize,
) -> MatchReport {
    let mut events: Vec<RecognitionEvent> = events.to_vec();
    events.sort_by_key(|e| (e.decision_t, e.class_id));
    let mut segments: Vec<LabeledSegment> = segments.to_vec();
    segments.sort_by_key(|s| (s.start, s.end));
    let mut taken = vec![false; segments.len()];
    let mut matches = Vec::new();
    let mut false_positives = Vec::new();
    for ev in events {
        let hit = segments.iter().enumerate().position(|(k, s)| {
            !taken[k] && s.class_id == ev.class_id && in_window(s, ev.decision_t, window_len)
        });
        match hit {
            Some(k) => {
                taken[k] = true;
                let seg = segments[k];
                matches.push(Match {
                    event: ev,
                    segment: seg,
                    latency: ev.decision_t as i64 - seg.end as i64,
                });
            }
            None => false_positives.push(ev),
        }
    }
    let missed = segments
        .into_iter()
        .zip(taken)
        .filter_map(|(s, t)| (!t).then_some(s))
        .collect();
    MatchReport {
        matches,
        false_positives,
        missed,
        window_len,
    }
}

/// Online confusion matrix.
///
/// Matches land on the diagonal. A false positive inside the window of a
/// missed segment of another class is booked as that confusion (consuming the
/// miss); any other false positive goes to the N.G. row. Remaining misses go to
/// the N.G. column. Every segment therefore contributes exactly one count to
/// its class row.
pub fn online_confusion(report: &MatchReport, classes: usize) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(classes);
    for m in &report.matches {
        cm.record(Some(m.segment.class_id), Some(m.event.class_id))?;
    }
    let mut consumed = vec![false; report.missed.len()];
    for ev in &report.false_positives {
        let hit = report.missed.iter().enumerate().position(|(k, s)| {
            !consumed[k]
                && s.class_id != ev.class_id
                && in_window(s, ev.decision_t, report.window_len)
        });
        match hit {
            Some(k) => {
                consumed[k] = true;
                cm.record(Some(report.missed[k].class_id), Some(ev.class_id))?;
            }
            None => cm.record(None, Some(ev.class_id))?,
        }
    }
    for (seg, used) in report.missed.iter().zip(consumed) {
        if !used {
            cm.record(Some(seg.class_id), None)?;
        }
    }
    Ok(cm)
}

/// Online scores over several independent recordings.
///
/// Each recording is matched and booked on its own time axis; the matrices are
/// summed and the match reports concatenated.
pub fn online_evaluation<'a, I>(
    recordings: I,
    classes: usize,
    window_len: usize,
) -> Result<(ConfusionMatrix, MatchReport)>
where
    I: IntoIterator<Item = (&'a [RecognitionEvent], &'a [LabeledSegment])>,
{
    let mut cm = ConfusionMatrix::new(classes);
    let mut all = MatchReport {
        matches: Vec::new(),
        false_positives: Vec::new(),
        missed: Vec::new(),
        window_len,
    };
    for (events, segments) in recordings {
        let report = match_events(events, segments, window_len);
        cm.merge(&online_confusion(&report, classes)?)?;
        all.matches.extend(report.matches);
        all.false_positives.extend(report.false_positives);
        all.missed.extend(report.missed);
    }
    Ok((cm, all))
}

/// Signed latency distribution over matched events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyHistogram {
    pub counts: BTreeMap<i64, usize>,
    /// Share of matched events decided at or before the segment's last sample.
    pub before_end_fraction: Option<f64>,
    pub mean: Option<f64>,
}

impl LatencyHistogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("latency,count\n");
        for (l, c) in &self.counts {
            let _ = writeln!(out, "{l},{c}");
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
        let _ = writeln!(out, "matched: {}", self.counts.values().sum::<usize>());
        let _ = writeln!(out, "mean latency (samples): {}", f(self.mean));
        let _ = writeln!(out, "before-end fraction: {}", f(self.before_end_fraction));
        let rows: Vec<Vec<String>> = std::iter::once(vec!["latency".into(), "count".into()])
            .chain(
                self.counts
                    .iter()
                    .map(|(l, c)| vec![l.to_string(), c.to_string()]),
            )
            .collect();
        out.push_str(&render_aligned(&rows));
        out
    }
}

pub fn latency_histogram(report: &MatchReport) -> LatencyHistogram {
    let mut counts = BTreeMap::new();
    for m in &report.matches {
        *counts.entry(m.latency).or_insert(0) += 1;
    }
    let n = report.matches.len();
    let before = report.matches.iter().filter(|m| m.latency <= 0).count();
    let sum: i64 = report.matches.iter().map(|m| m.latency).sum();
    LatencyHistogram {
        counts,
        before_end_fraction: (n > 0).then(|| before as f64 / n as f64),
        mean: (n > 0).then(|| sum as f64 / n as f64),
    }
}
