//! Seeded synthetic gesture corpora.
//!
//! Each gesture is `9.81 · gravity(φ) + motion(φ) + noise` over a phase
//! `φ ∈ [0, 1]`, where the gravity direction leaves and returns to a shared
//! resting pose. Four default templates swing gravity across axes; the two
//! circle templates keep gravity fixed and differ only in motion phase.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ClassId, LabeledSegment, LabeledSequence, Recording};

pub const GRAVITY: f64 = 9.81;

/// Gravity direction in the resting pose (sensor frame).
pub const REST_DIRECTION: [f64; 3] = [0.0, 0.0, 1.0];

/// Movement intensity over the execution, in `[0, 1]`.
///
/// With `ramp == 0` this is `sin(πφ)`. Otherwise the gesture accelerates over
/// the first `ramp` fraction of the execution with a smoothstep edge, holds,
/// and decelerates over the last `ramp` fraction. Sharp edges make executions
/// distinguishable from rest after only a few samples.
pub fn envelope(phase: f64, ramp: f64) -> f64 {
    if ramp <= 0.0 {
        return (PI * phase).sin();
    }
    let smooth = |x: f64| {
        let x = x.clamp(0.0, 1.0);
        x * x * (3.0 - 2.0 * x)
    };
    smooth(phase / ramp) * smooth((1.0 - phase) / ramp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GravityPath {
    /// Gravity stays at the resting direction.
    Fixed,
    /// Gravity tilts toward `toward` (orthogonal to the rest direction) by
    /// `max_angle · envelope(φ)` radians, then returns.
    Tilt { toward: [f64; 3], max_angle: f64 },
}

impl GravityPath {
    /// Direction at envelope value `lift`.
    pub fn direction(&self, lift: f64, angle_scale: f64) -> [f64; 3] {
        match self {
            GravityPath::Fixed => REST_DIRECTION,
            GravityPath::Tilt { toward, max_angle } => {
                let theta = angle_scale * max_angle * lift;
                let (s, c) = theta.sin_cos();
                std::array::from_fn(|k| c * REST_DIRECTION[k] + s * toward[k])
            }
        }
    }
}

/// Per-axis `amplitude · w · sin(2π·cycles·φ + phase)` for an envelope weight `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    pub amplitude: [f64; 3],
    pub cycles: f64,
    pub phase: [f64; 3],
}

impl MotionProfile {
    pub fn none() -> Self {
        Self {
            amplitude: [0.0; 3],
            cycles: 1.0,
            phase: [0.0; 3],
        }
    }

    pub fn at(&self, phase: f64, weight: f64, scale: f64) -> [f64; 3] {
        std::array::from_fn(|k| {
            scale
                * self.amplitude[k]
                * weight
                * (2.0 * PI * self.cycles * phase + self.phase[k]).sin()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureTemplate {
    pub class_id: ClassId,
    pub name: String,
    /// Inclusive length range in samples at the generation rate.
    pub duration_range: (usize, usize),
    pub gravity_path: GravityPath,
    pub motion: MotionProfile,
    pub noise_std: f64,
    /// Relative per-execution variation of motion amplitude and tilt angle.
    pub jitter: f64,
    /// Edge width of [`envelope`] as a fraction of the execution; 0 gives the
    /// sine profile (with a `sin²` motion weight).
    #[serde(default)]
    pub ramp: f64,
}

impl GestureTemplate {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.duration_range;
        if lo < 5 || lo > hi {
            return Err(Error::InvalidInput(format!(
                "template {}: duration range ({lo}, {hi}) must satisfy 5 <= min <= max",
                self.class_id
            )));
        }
        if !(0.0..=0.5).contains(&self.ramp) {
            return Err(Error::InvalidInput(format!(
                "template {}: ramp must lie in [0, 0.5]",
                self.class_id
            )));
        }
        if !(self.noise_std >= 0.0 && (0.0..1.0).contains(&self.jitter)) {
            return Err(Error::InvalidInput(format!(
                "template {}: noise must be non-negative and jitter in [0, 1)",
                self.class_id
            )));
        }
        if let GravityPath::Tilt { toward, .. } = &self.gravity_path {
            let dot: f64 = toward.iter().zip(REST_DIRECTION).map(|(a, b)| a * b).sum();
            let norm: f64 = toward.iter().map(|v| v * v).sum::<f64>().sqrt();
            if dot.abs() > 1e-9 || (norm - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "template {}: tilt direction must be a unit vector orthogonal to rest",
                    self.class_id
                )));
            }
        }
        Ok(())
    }
}

/// Six templates at 40 Hz: arm raise/lower and two wrist twists rotate gravity;
/// two circles of opposite direction keep it fixed.
pub fn default_templates() -> Vec<GestureTemplate> {
    let tilt = |toward: [f64; 3], deg: f64| GravityPath::Tilt {
        toward,
        max_angle: deg.to_radians(),
    };
    let small = |phase: f64| MotionProfile {
        amplitude: [1.0, 1.0, 0.5],
        cycles: 1.0,
        phase: [phase, 0.0, 0.0],
    };
    let circle = |x_phase: f64| MotionProfile {
        amplitude: [3.0, 3.0, 0.0],
        cycles: 1.0,
        phase: [x_phase, PI / 2.0, 0.0],
    };
    let long = (144, 160);
    let short = (140, 156);
    let table: [(&str, (usize, usize), GravityPath, MotionProfile); 6] = [
        ("arm up", long, tilt([1.0, 0.0, 0.0], 70.0), small(0.0)),
        ("arm down", long, tilt([-1.0, 0.0, 0.0], 70.0), small(PI)),
        (
            "twist cw",
            short,
            tilt([0.0, 1.0, 0.0], 80.0),
            small(PI / 2.0),
        ),
        (
            "twist ccw",
            short,
            tilt([0.0, -1.0, 0.0], 80.0),
            small(-PI / 2.0),
        ),
        ("circle cw", long, GravityPath::Fixed, circle(0.0)),
        ("circle ccw", long, GravityPath::Fixed, circle(PI)),
    ];
    table
        .into_iter()
        .enumerate()
        .map(|(k, (name, range, gravity_path, motion))| GestureTemplate {
            class_id: ClassId::from_index(k),
            name: name.into(),
            duration_range: range,
            gravity_path,
            motion,
            noise_std: 0.2,
            jitter: 0.2,
            ramp: 0.04,
        })
        .collect()
}

fn noise(std: f64) -> Option<Normal<f64>> {
    (std > 0.0).then(|| Normal::new(0.0, std).expect("finite std"))
}

fn sample_gesture<R: Rng>(tpl: &GestureTemplate, noise_std: f64, rng: &mut R) -> Array2<f64> {
    let (lo, hi) = tpl.duration_range;
    let len = rng.random_range(lo..=hi);
    let scale = if tpl.jitter > 0.0 {
        rng.random_range(1.0 - tpl.jitter..=1.0 + tpl.jitter)
    } else {
        1.0
    };
    let dist = noise(noise_std);
    let mut out = Array2::zeros((3, len));
    for t in 0..len {
        let phase = t as f64 / (len - 1) as f64;
        let lift = envelope(phase, tpl.ramp);
        let weight = if tpl.ramp > 0.0 { lift } else { lift * lift };
        let g = tpl.gravity_path.direction(lift, scale);
        let m = tpl.motion.at(phase, weight, scale);
        for k in 0..3 {
            let n = dist.map_or(0.0, |d| d.sample(rng));
            out[[k, t]] = GRAVITY * g[k] + m[k] + n;
        }
    }
    out
}

fn sample_idle<R: Rng>(len: usize, noise_std: f64, rng: &mut R) -> Array2<f64> {
    let dist = noise(noise_std);
    Array2::from_shape_fn((3, len), |(k, _)| {
        GRAVITY * REST_DIRECTION[k] + dist.map_or(0.0, |d| d.sample(rng))
    })
}

/// One execution of `tpl` as a `3 × L` matrix; deterministic per seed.
pub fn gen_gesture(tpl: &GestureTemplate, seed: u64) -> Result<Array2<f64>> {
    tpl.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_gesture(tpl, tpl.noise_std, &mut rng))
}

/// Trimmed executions split 70/30 per class.
#[derive(Debug, Clone, PartialEq)]
pub struct IsolatedDataset {
    pub train: Vec<LabeledSequence>,
    pub test: Vec<LabeledSequence>,
}

impl IsolatedDataset {
    pub fn all(&self) -> Vec<LabeledSequence> {
        self.train.iter().chain(&self.test).cloned().collect()
    }

    pub fn downsample(&self, factor: usize, mode: DownsampleMode) -> Result<Self> {
        let f = |set: &[LabeledSequence]| {
            set.iter()
                .map(|s| {
                    Ok(LabeledSequence {
                        class_id: s.class_id,
                        data: downsample_matrix(&s.data, factor, mode)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        };
        Ok(Self {
            train: f(&self.train)?,
            test: f(&self.test)?,
        })
    }
}

/// Number of training items in a 70/30 split of `n`, rounded half up.
pub fn train_share(n: usize) -> usize {
    (7 * n + 5) / 10
}

pub fn gen_isolated_dataset(
    templates: &[GestureTemplate],
    per_class_count: usize,
    seed: u64,
) -> Result<IsolatedDataset> {
    if per_class_count == 0 {
        return Err(Error::InvalidInput(
            "per_class_count must be positive".into(),
        ));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (k, tpl) in templates.iter().enumerate() {
        tpl.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64 + 1);
        let mut execs: Vec<LabeledSequence> = (0..per_class_count)
            .map(|_| LabeledSequence {
                class_id: tpl.class_id,
                data: sample_gesture(tpl, tpl.noise_std, &mut rng),
            })
            .collect();
        rand::seq::SliceRandom::shuffle(execs.as_mut_slice(), &mut rng);
        let cut = train_share(per_class_count);
        test.extend(execs.split_off(cut));
        train.extend(execs);
    }
    Ok(IsolatedDataset { train, test })
}

/// Layout of one continuous recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub gesture_order: Vec<ClassId>,
    /// Inclusive range of resting samples between consecutive gestures.
    pub idle_range: (usize, usize),
    /// Resting samples before the first and after the last gesture.
    pub edge_idle: usize,
    pub noise_std: f64,
    pub rate_hz: f64,
    pub seed: u64,
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(w) = self.gesture_order.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!(
                "gesture order repeats class {} consecutively",
                w[0]
            )));
        }
        if self.idle_range.0 > self.idle_range.1 {
            return Err(Error::InvalidInput("idle range min exceeds max".into()));
        }
        // written to also reject NaN
        if !(self.rate_hz > 0.0 && self.noise_std >= 0.0) {
            return Err(Error::InvalidInput(
                "rate must be positive, noise non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Concatenates resting spans and gesture executions; labels mark each execution.
pub fn gen_continuous_sequence(
    templates: &[GestureTemplate],
    spec: &SequenceSpec,
) -> Result<(Recording, Vec<LabeledSegment>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut parts: Vec<Array2<f64>> = vec![sample_idle(spec.edge_idle, spec.noise_std, &mut rng)];
    let mut labels = Vec::new();
    let mut cursor = spec.edge_idle;
    for (pos, id) in spec.gesture_order.iter().enumerate() {
        let tpl = templates
            .iter()
            .find(|t| t.class_id == *id)
            .ok_or_else(|| Error::InvalidInput(format!("no template for class {id}")))?;
        tpl.validate()?;
        if pos > 0 {
            let gap = rng.random_range(spec.idle_range.0..=spec.idle_range.1);
            parts.push(sample_idle(gap, spec.noise_std, &mut rng));
            cursor += gap;
        }
        let g = sample_gesture(tpl, spec.noise_std, &mut rng);
        labels.push(LabeledSegment::new(*id, cursor, cursor + g.ncols() - 1)?);
        cursor += g.ncols();
        parts.push(g);
    }
    parts.push(sample_idle(spec.edge_idle, spec.noise_std, &mut rng));
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    let data = ndarray::concatenate(ndarray::Axis(1), &views).expect("3-row parts");
    Ok((Recording::from_matrix(spec.rate_hz, 0, &data), labels))
}

/// Random gesture orders with no immediate repeats, balancing class usage.
pub fn gen_gesture_orders(
    classes: usize,
    sequences: usize,
    length_range: (usize, usize),
    seed: u64,
) -> Vec<Vec<ClassId>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut usage = vec![0usize; classes];
    (0..sequences)
        .map(|_| {
            let len = rng.random_range(length_range.0..=length_range.1);
            let mut order: Vec<ClassId> = Vec::with_capacity(len);
            for _ in 0..len {
                let prev = order.last().copied();
                let candidates: Vec<usize> = (0..classes)
                    .filter(|&k| Some(ClassId::from_index(k)) != prev)
                    .collect();
                let Some(least) = candidates.iter().map(|&k| usage[k]).min() else {
                    break;
                };
                let pool: Vec<usize> = candidates
                    .into_iter()
                    .filter(|&k| usage[k] == least)
                    .collect();
                let k = pool[rng.random_range(0..pool.len())];
                usage[k] += 1;
                order.push(ClassId::from_index(k));
            }
            order
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DownsampleMode {
    /// Mean of each block of `factor` samples.
    #[default]
    BlockMean,
    /// First sample of each block.
    Decimate,
}

/// Downsamples a `3 × L` matrix; a trailing partial block is dropped.
pub fn downsample_matrix(
    data: &Array2<f64>,
    factor: usize,
    mode: DownsampleMode,
) -> Result<Array2<f64>> {
    if factor == 0 {
        return Err(Error::InvalidInput(
            "downsample factor must be positive".into(),
        ));
    }
    if factor > data.ncols() {
        return Err(Error::InvalidInput(format!(
            "downsample factor {factor} exceeds length {}",
            data.ncols()
        )));
    }
    let blocks = data.ncols() / factor;
    Ok(Array2::from_shape_fn((data.nrows(), blocks), |(r, b)| {
        let block = &data.row(r);
        match mode {
            DownsampleMode::BlockMean => {
                (0..factor).map(|k| block[b * factor + k]).sum::<f64>() / factor as f64
            }
            DownsampleMode::Decimate => block[b * factor],
        }
    }))
}

pub fn downsample(r: &Recording, factor: usize) -> Result<Recording> {
    downsample_with(r, factor, DownsampleMode::BlockMean)
}

pub fn downsample_with(r: &Recording, factor: usize, mode: DownsampleMode) -> Result<Recording> {
    let data = downsample_matrix(&r.to_matrix(), factor, mode)?;
    let start = r.samples.first().map_or(0, |s| s.t / factor);
    Ok(Recording::from_matrix(
        r.rate_hz / factor as f64,
        start,
        &data,
    ))
}

/// Maps labels onto a recording downsampled by `factor` with `len` samples.
pub fn downsample_segments(
    segments: &[LabeledSegment],
    factor: usize,
    len: usize,
) -> Vec<LabeledSegment> {
    segments
        .iter()
        .filter(|s| s.start / factor < len)
        .map(|s| LabeledSegment {
            class_id: s.class_id,
            start: s.start / factor,
            end: (s.end / factor).min(len - 1),
        })
        .collect()
}

/// Everything needed to generate a full synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub seed: u64,
    pub rate_hz: f64,
    pub downsample: usize,
    pub downsample_mode: DownsampleMode,
    /// Isolated executions per class (volunteers × repetitions).
    pub per_class_count: usize,
    pub sequences: usize,
    pub gestures_per_sequence: (usize, usize),
    /// At the generation rate.
    pub idle_range: (usize, usize),
    /// At the generation rate.
    pub edge_idle: usize,
    pub noise_std: f64,
    pub templates: Vec<GestureTemplate>,
    /// Explicit gesture orders for the continuous sequences; when non-empty they
    /// replace the random ones and `sequences` is ignored.
    #[serde(default)]
    pub orders: Vec<Vec<ClassId>>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            rate_hz: 40.0,
            downsample: 4,
            downsample_mode: DownsampleMode::BlockMean,
            per_class_count: 90,
            sequences: 15,
            gestures_per_sequence: (6, 12),
            idle_range: (20, 80),
            edge_idle: 200,
            noise_std: 0.2,
            templates: default_templates(),
            orders: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSequence {
    pub recording: Recording,
    pub labels: Vec<LabeledSegment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub isolated: IsolatedDataset,
    pub continuous: Vec<ContinuousSequence>,
}

/// Isolated set plus continuous recordings, all downsampled to the working rate.
///
/// Unless explicit orders are configured, the first continuous sequence uses the
/// fixed order `1,2,1,2,3,4,3,4,5,6,5,6` when the dictionary has six classes and
/// the rest are random balanced orders.
pub fn generate_corpus(cfg: &CorpusConfig) -> Result<Corpus> {
    let classes = cfg.templates.len();
    let isolated = gen_isolated_dataset(&cfg.templates, cfg.per_class_count, cfg.seed)?
        .downsample(cfg.downsample, cfg.downsample_mode)?;
    let orders = if cfg.orders.is_empty() {
        let mut orders = gen_gesture_orders(
            classes,
            cfg.sequences,
            cfg.gestures_per_sequence,
            cfg.seed ^ 0x5eed,
        );
        if classes == 6 && !orders.is_empty() {
            orders[0] = [1, 2, 1, 2, 3, 4, 3, 4, 5, 6, 5, 6].map(ClassId).to_vec();
        }
        orders
    } else {
        cfg.orders.clone()
    };
    let continuous = orders
        .into_iter()
        .enumerate()
        .map(|(k, order)| {
            let spec = SequenceSpec {
                gesture_order: order,
                idle_range: cfg.idle_range,
                edge_idle: cfg.edge_idle,
                noise_std: cfg.noise_std,
                rate_hz: cfg.rate_hz,
                seed: cfg.seed.wrapping_add(1000 + k as u64),
            };
            let (rec, labels) = gen_continuous_sequence(&cfg.templates, &spec)?;
            let recording = downsample_with(&rec, cfg.downsample, cfg.downsample_mode)?;
            let labels = downsample_segments(&labels, cfg.downsample, recording.len());
            Ok(ContinuousSequence { recording, labels })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus {
        isolated,
        continuous,
    })
}
