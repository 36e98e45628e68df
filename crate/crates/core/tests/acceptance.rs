//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.
//!
//! `cargo test --test acceptance -- 1 3` runs a subset.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use gesture_stream::calibrate::{calibrate, compute_s, derive_params};
use gesture_stream::cgr::{run_stream, CgrParams, CgrState};
use gesture_stream::cli::{cmd_calibrate, cmd_eval, cmd_gen, cmd_sweep, cmd_train, RunConfig};
use gesture_stream::eval::{latency_histogram, offline_confusion, online_evaluation, Summary};
use gesture_stream::feeding::{sliding_windows, WindowBuffer};
use gesture_stream::par::Execution;
use gesture_stream::pipeline::probability_stream;
use gesture_stream::rnn::{
    backward, cross_entropy, forward, ModelParams, TargetVector, TrainConfig, TENSOR_NAMES,
};
use gesture_stream::synthgen::{generate_corpus, CorpusConfig};
use gesture_stream::{
    AccelSample, ClassId, GestureDictionary, ProbabilityVector, RecognitionEvent,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

// Pinned tolerances and budgets.
const TAU_PRINTED_TOL: f64 = 1e-3;
const DERIVE_BUDGET: Duration = Duration::from_millis(1);
const GRAD_STEP: f64 = 1e-5;
const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_BUDGET: Duration = Duration::from_secs(10);
const STREAMS: usize = 100;
const STREAM_LEN: usize = 500;
const ORACLE_CASES: usize = 60;
const INVARIANT_STREAMS: usize = 10_000;
const OFFLINE_ACC_MIN: f64 = 0.90;
const ONLINE_PREC_MIN: f64 = 0.90;
const ONLINE_RECALL_MIN: f64 = 0.60;
const E2E_BUDGET: Duration = Duration::from_secs(600);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Check = fn() -> Result<Outcome, String>;

fn main() {
    let checks: [(&str, Check); 7] = [
        ("parameter derivation", derivation),
        ("gradient check", gradient_check),
        ("streaming equivalence", streaming_equivalence),
        ("detector oracle", detector_oracle),
        ("end-to-end synthetic", end_to_end),
        ("detector invariants", detector_invariants),
        ("determinism", determinism),
    ];
    let wanted: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (k, (name, check)) in checks.iter().enumerate() {
        let id = k + 1;
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = check().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!outcome.pass);
        println!(
            "{status} {id} {name} [{:.2?}] {}",
            start.elapsed(),
            outcome.detail
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Reference statistics and the thresholds as printed (three decimals).
const REF_S: [usize; 6] = [38, 38, 37, 37, 38, 38];
const REF_M: [f64; 6] = [0.996, 0.996, 0.97, 0.995, 0.934, 0.917];
const REF_C: [usize; 6] = [20, 20, 19, 19, 20, 20];
const REF_TAU_PRINTED: [f64; 6] = [0.896, 0.896, 0.873, 0.895, 0.840, 0.825];

fn derivation() -> Result<Outcome, String> {
    let start = Instant::now();
    let p = derive_params(&REF_S, &REF_M, 40, 0.25, 0.9, 0.2).map_err(err)?;
    let elapsed = start.elapsed();
    let c_ok = p.window == REF_C;
    // The printed thresholds are γM cut to three decimals (0.8406 appears as
    // 0.840), so compare by truncation and by absolute distance.
    let truncated: Vec<f64> = p
        .tau
        .iter()
        .map(|t| (t * 1000.0 + 1e-9).floor() / 1000.0)
        .collect();
    let trunc_ok = truncated
        .iter()
        .zip(REF_TAU_PRINTED)
        .all(|(a, b)| (a - b).abs() < 1e-12);
    let close_ok = p
        .tau
        .iter()
        .zip(REF_TAU_PRINTED)
        .all(|(a, b)| (a - b).abs() < TAU_PRINTED_TOL);
    let rounded_mismatch: Vec<usize> = p
        .tau
        .iter()
        .zip(REF_TAU_PRINTED)
        .enumerate()
        .filter(|(_, (t, b))| ((*t * 1000.0).round() / 1000.0 - b).abs() > 1e-12)
        .map(|(k, _)| k + 1)
        .collect();
    let fast = elapsed < DERIVE_BUDGET;
    Ok(Outcome::new(
        c_ok && trunc_ok && close_ok && p.rho == 0.2 && fast,
        format!(
            "C={:?} tau={:?} truncated={truncated:?} (half-up rounding differs for classes {rounded_mismatch:?}) time={elapsed:.2?}",
            p.window, p.tau
        ),
    ))
}

fn random_window(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    Array2::from_shape_fn((3, n), |_| StandardNormal.sample(rng))
}

fn gradient_check() -> Result<Outcome, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let model = ModelParams::init(4, 3, 5, 17);
    let window = random_window(&mut rng, 5);
    let target = TargetVector::one_hot(1, 3).map_err(err)?;
    let analytic = backward(&window, &target, &model).map_err(err)?.grads;
    let loss = |p: &ModelParams| -> Result<f64, String> {
        Ok(cross_entropy(&forward(&window, p).map_err(err)?, &target))
    };
    let mut worst = (0.0f64, "");
    for (ti, grad) in analytic.tensors().iter().enumerate() {
        let mut diff = 0.0;
        let mut na = 0.0;
        let mut nn = 0.0;
        for (k, &g) in grad.iter().enumerate() {
            let mut plus = model.clone();
            plus.weights.tensors_mut()[ti][k] += GRAD_STEP;
            let mut minus = model.clone();
            minus.weights.tensors_mut()[ti][k] -= GRAD_STEP;
            let numeric = (loss(&plus)? - loss(&minus)?) / (2.0 * GRAD_STEP);
            diff += (g - numeric).powi(2);
            na += g * g;
            nn += numeric * numeric;
        }
        let rel = diff.sqrt() / na.sqrt().max(nn.sqrt()).max(1e-12);
        if rel >= worst.0 {
            worst = (rel, TENSOR_NAMES[ti]);
        }
    }
    let elapsed = start.elapsed();
    Ok(Outcome::new(
        worst.0 <= GRAD_REL_TOL && elapsed < GRAD_BUDGET,
        format!(
            "{} tensors, worst relative error {:.2e} ({}) <= {GRAD_REL_TOL:e}",
            TENSOR_NAMES.len(),
            worst.0,
            worst.1
        ),
    ))
}

/// Softmax of a few bumps on a noisy floor, so the stream has real peaks.
fn random_stream(rng: &mut ChaCha8Rng, classes: usize, len: usize) -> Vec<ProbabilityVector> {
    let mut logits = vec![vec![0.0; classes]; len];
    for _ in 0..rng.random_range(0..12) {
        let k = rng.random_range(0..classes);
        let at = rng.random_range(0..len);
        let width = rng.random_range(3..40);
        let height = rng.random_range(1.0..8.0);
        for row in logits.iter_mut().skip(at).take(width) {
            row[k] += height;
        }
    }
    logits
        .into_iter()
        .enumerate()
        .map(|(t, mut z)| {
            for v in &mut z {
                *v += rng.random_range(-0.5..0.5);
            }
            let m = z.iter().cloned().fold(f64::MIN, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            ProbabilityVector {
                t,
                values: e.into_iter().map(|v| v / s).collect(),
            }
        })
        .collect()
}

fn random_params(rng: &mut ChaCha8Rng, classes: usize) -> CgrParams {
    CgrParams::new(
        rng.random_range(0.05..0.5),
        (0..classes).map(|_| rng.random_range(1..30)).collect(),
        (0..classes).map(|_| rng.random_range(0.2..1.0)).collect(),
    )
    .expect("valid random parameters")
}

fn streaming_equivalence() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut events = 0;
    for case in 0..STREAMS {
        let probs = random_stream(&mut rng, 6, STREAM_LEN);
        let params = random_params(&mut rng, 6);
        let whole = run_stream(&probs, &params).map_err(err)?;
        let mut state = CgrState::new();
        let mut chunked = Vec::new();
        let mut rest = probs.as_slice();
        while !rest.is_empty() {
            let (chunk, tail) = rest.split_at(rng.random_range(1..=rest.len().min(64)));
            for o in chunk {
                chunked.extend(state.step(o, &params).map_err(err)?);
            }
            rest = tail;
        }
        if chunked != whole {
            return Ok(Outcome::new(
                false,
                format!("stream {case}: chunked fold differs"),
            ));
        }
        events += whole.len();

        let n = rng.random_range(1..50);
        let data = random_window(&mut rng, STREAM_LEN);
        let mut buf = WindowBuffer::new(n).map_err(err)?;
        let mut pushed = Vec::new();
        for t in 0..STREAM_LEN {
            let s = AccelSample::new(t, data[[0, t]], data[[1, t]], data[[2, t]]);
            if let Some(w) = buf.push(s).map_err(err)? {
                pushed.push((t, w));
            }
        }
        let sliced: Vec<_> = (0..=STREAM_LEN - n)
            .map(|k| (k + n - 1, data.slice(ndarray::s![.., k..k + n]).to_owned()))
            .collect();
        if pushed != sliced || sliding_windows(&data, n) != sliced {
            return Ok(Outcome::new(
                false,
                format!("stream {case}: windows differ from slicing (N={n})"),
            ));
        }
    }
    Ok(Outcome::new(
        true,
        format!(
            "{STREAMS} streams of {STREAM_LEN} samples, {events} events, windows equal slicing"
        ),
    ))
}

/// Direct evaluation: every rise is a candidate peak; a candidate is tested
/// when no earlier tested peak of the same class still covers it.
fn oracle(probs: &[ProbabilityVector], params: &CgrParams) -> Vec<RecognitionEvent> {
    let mut out = Vec::new();
    for k in 0..params.classes() {
        let c = params.window[k];
        let mut free_from = 0;
        for j in 1..probs.len() {
            let rise = probs[j].values[k] - probs[j - 1].values[k];
            if rise <= params.rho || j < free_from {
                continue;
            }
            if j + c > probs.len() {
                break;
            }
            free_from = j + c;
            let mut sum = 0.0;
            for o in &probs[j..j + c] {
                sum += o.values[k];
            }
            let mean = sum / c as f64;
            if mean >= params.tau[k] {
                out.push(RecognitionEvent {
                    class_id: ClassId::from_index(k),
                    peak_t: probs[j].t,
                    decision_t: probs[j + c - 1].t,
                    plateau_mean: mean,
                });
            }
        }
    }
    out.sort_by_key(|e| (e.decision_t, e.class_id));
    out
}

/// Flat traces with hand-placed step rises, plateaus of chosen height and
/// occasional dips, so both accepted and rejected plateaus occur.
fn constructed_stream(rng: &mut ChaCha8Rng, classes: usize, len: usize) -> Vec<ProbabilityVector> {
    let mut traces = vec![vec![0.02; len]; classes];
    for tr in &mut traces {
        let mut t = rng.random_range(1..20);
        while t < len {
            let width = rng.random_range(2..40);
            let height = rng.random_range(0.3..1.0);
            for v in tr.iter_mut().skip(t).take(width) {
                *v = height;
            }
            if rng.random_bool(0.3) {
                let dip = (t + rng.random_range(0..width)).min(len - 1);
                tr[dip] = 0.05;
            }
            t += width + rng.random_range(1..30);
        }
    }
    (0..len)
        .map(|t| ProbabilityVector {
            t: t + 7,
            values: traces.iter().map(|tr| tr[t]).collect(),
        })
        .collect()
}

fn detector_oracle() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut events = 0;
    for case in 0..ORACLE_CASES {
        let classes = rng.random_range(1..7);
        let len = rng.random_range(20..300);
        let probs = constructed_stream(&mut rng, classes, len);
        let params = random_params(&mut rng, classes);
        let got = run_stream(&probs, &params).map_err(err)?;
        if got != oracle(&probs, &params) {
            return Ok(Outcome::new(
                false,
                format!("case {case}: events differ from oracle"),
            ));
        }
        events += got.len();
    }
    Ok(Outcome::new(
        events > 0,
        format!("{ORACLE_CASES} cases, {events} events, exact equality"),
    ))
}

fn detector_invariants() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut events = 0;
    for case in 0..INVARIANT_STREAMS {
        let classes = rng.random_range(1..7);
        let len = rng.random_range(2..200);
        let probs = if rng.random_bool(0.5) {
            random_stream(&mut rng, classes, len)
        } else {
            constructed_stream(&mut rng, classes, len)
        };
        let params = random_params(&mut rng, classes);
        let got = run_stream(&probs, &params).map_err(err)?;
        let t0 = probs[0].t;
        let mut per_class = vec![0usize; classes];
        for e in &got {
            let k = e.class_id.index();
            per_class[k] += 1;
            let c = params.window[k];
            let window = &probs[e.peak_t - t0..e.peak_t - t0 + c];
            let mean = window.iter().map(|o| o.values[k]).sum::<f64>() / c as f64;
            let bad = e.plateau_mean < params.tau[k]
                || mean < params.tau[k]
                || e.decision_t - e.peak_t != c - 1;
            if bad {
                return Ok(Outcome::new(
                    false,
                    format!("stream {case}: invariant broken by {e:?}"),
                ));
            }
        }
        for (k, &n) in per_class.iter().enumerate() {
            let peaks = probs
                .windows(2)
                .filter(|w| w[1].values[k] - w[0].values[k] > params.rho)
                .count();
            if n > peaks {
                return Ok(Outcome::new(
                    false,
                    format!(
                        "stream {case}: class {} has {n} events for {peaks} peaks",
                        k + 1
                    ),
                ));
            }
        }
        events += got.len();
    }
    Ok(Outcome::new(
        true,
        format!(
            "{INVARIANT_STREAMS} streams, {events} events: A >= tau, events <= peaks, latency C-1"
        ),
    ))
}

struct OnlineRun {
    summary: Summary,
    mean_latency: Option<f64>,
}

fn fmt_pct(v: &[Option<f64>]) -> String {
    let parts: Vec<String> = v
        .iter()
        .map(|x| x.map_or("-".into(), |x| format!("{:.1}", 100.0 * x)))
        .collect();
    format!("[{}]", parts.join(" "))
}

fn end_to_end() -> Result<Outcome, String> {
    let start = Instant::now();
    let exec = Execution::Parallel;
    let corpus = generate_corpus(&CorpusConfig::default()).map_err(err)?;
    let all = corpus.isolated.all();
    let durations = compute_s(&all, 6).map_err(err)?;
    let dict = GestureDictionary::from_durations(&durations).map_err(err)?;
    let cfg = TrainConfig {
        window_len: Some(40),
        ..TrainConfig::default()
    };
    let (model, _) =
        gesture_stream::rnn::train_with(&corpus.isolated.train, &dict, &cfg, exec).map_err(err)?;
    let offline = offline_confusion(&model, &corpus.isolated.test, exec).map_err(err)?;
    let offline_acc = offline.summarize().accuracy.unwrap_or(0.0);

    let streams = corpus
        .continuous
        .iter()
        .map(|s| probability_stream(&model, &s.recording, exec))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let online = |alpha: f64| -> Result<OnlineRun, String> {
        let (_, params) = calibrate(&model, &all, alpha, 0.9, 0.2, exec).map_err(err)?;
        let events = streams
            .iter()
            .map(|p| run_stream(p, &params))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let (cm, report) = online_evaluation(
            events
                .iter()
                .zip(&corpus.continuous)
                .map(|(e, s)| (e.as_slice(), s.labels.as_slice())),
            6,
            model.window_len,
        )
        .map_err(err)?;
        Ok(OnlineRun {
            summary: cm.summarize(),
            mean_latency: latency_histogram(&report).mean,
        })
    };
    let base = online(0.25)?;
    let early = online(0.05)?;
    let elapsed = start.elapsed();

    let min_prec = base
        .summary
        .precision
        .iter()
        .map(|p| p.unwrap_or(0.0))
        .fold(1.0, f64::min);
    let recall = base.summary.mean_recall().unwrap_or(0.0);
    let early_recall = early.summary.mean_recall().unwrap_or(0.0);
    let latency_drop = match (early.mean_latency, base.mean_latency) {
        (Some(e), Some(b)) => e < b,
        _ => false,
    };
    let mut checks = BTreeMap::new();
    checks.insert("offline accuracy", offline_acc >= OFFLINE_ACC_MIN);
    checks.insert("per-class precision", min_prec >= ONLINE_PREC_MIN);
    checks.insert("mean recall", recall >= ONLINE_RECALL_MIN);
    checks.insert("early recall gain", early_recall > recall);
    checks.insert("early latency drop", latency_drop);
    checks.insert("runtime", elapsed <= E2E_BUDGET);
    let failed: Vec<&str> = checks
        .iter()
        .filter(|(_, ok)| !**ok)
        .map(|(k, _)| *k)
        .collect();
    Ok(Outcome::new(
        failed.is_empty(),
        format!(
            "offline acc {:.1}% | alpha 0.25: precision {} recall {} mean recall {:.1}% mean latency {:.2} | alpha 0.05: mean recall {:.1}% mean latency {:.2} | failed: {failed:?}",
            100.0 * offline_acc,
            fmt_pct(&base.summary.precision),
            fmt_pct(&base.summary.recall),
            100.0 * recall,
            base.mean_latency.unwrap_or(f64::NAN),
            100.0 * early_recall,
            early.mean_latency.unwrap_or(f64::NAN),
        ),
    ))
}

fn pipeline(out: &Path, exec: Execution) -> Result<(), String> {
    let mut cfg = RunConfig::from_toml(
        "n_override = 40\n[train]\nepochs = 6\n[corpus]\nper_class_count = 20\nsequences = 3\n",
    )
    .map_err(err)?;
    cfg.out = out.to_path_buf();
    cfg.execution = exec;
    cmd_gen(&cfg).map_err(err)?;
    cmd_train(&cfg).map_err(err)?;
    cmd_calibrate(&cfg).map_err(err)?;
    cmd_eval(&cfg).map_err(err)?;
    cmd_sweep(&cfg).map_err(err)?;
    Ok(())
}

fn files(root: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(err)? {
            let path = entry.map_err(err)?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).map_err(err)?.display().to_string();
                out.insert(rel, std::fs::read(&path).map_err(err)?);
            }
        }
    }
    Ok(out)
}

fn determinism() -> Result<Outcome, String> {
    let a = tempfile::tempdir().map_err(err)?;
    let b = tempfile::tempdir().map_err(err)?;
    // second run on the calling thread only: the strategies must agree bit for bit
    pipeline(a.path(), Execution::Parallel)?;
    pipeline(b.path(), Execution::Sequential)?;
    let fa = files(a.path())?;
    let fb = files(b.path())?;
    let differing: Vec<&String> = fa
        .keys()
        .chain(fb.keys())
        .filter(|k| fa.get(*k) != fb.get(*k))
        .collect();
    let kinds = [
        "model.json",
        "params.json",
        "events/",
        "online_confusion.csv",
        "offline_confusion.csv",
    ];
    let covered = kinds.iter().all(|k| fa.keys().any(|f| f.contains(k)));
    Ok(Outcome::new(
        differing.is_empty() && covered,
        format!(
            "{} files compared byte for byte, differing: {differing:?}",
            fa.len()
        ),
    ))
}
