//! On-disk formats: CSV for recordings, labels and events; JSON for model,
//! detector parameters and dataset manifests.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading a
//! file back yields bit-identical values and identical inputs always produce
//! identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibrate::CalibrationStats;
use crate::cgr::CgrParams;
use crate::error::{Error, Result};
use crate::rnn::{ModelParams, Standardization, TrainConfig, TrainReport, Weights, TENSOR_NAMES};
use crate::synthgen::{ContinuousSequence, Corpus, CorpusConfig, IsolatedDataset};
use crate::types::{
    AccelSample, ClassId, LabeledSegment, LabeledSequence, RecognitionEvent, Recording,
};

fn read_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_string(path)?).map_err(|e| Error::parse(path, e))
}

/// Lower-case hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn csv_records<T: DeserializeOwned>(path: &Path, text: &str, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let found: Vec<String> = r
        .headers()
        .map_err(|e| Error::parse(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if found != header {
        return Err(Error::parse(
            path,
            format!(
                "expected header {}, found {}",
                header.join(","),
                found.join(",")
            ),
        ));
    }
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::parse(path, e))
}

const RECORDING_HEADER: [&str; 4] = ["t", "ax", "ay", "az"];
const LABEL_HEADER: [&str; 3] = ["class_id", "start", "end"];
const EVENT_HEADER: [&str; 4] = ["class_id", "peak_t", "decision_t", "plateau_mean"];

/// `# rate_hz=<r>` followed by a `t,ax,ay,az` table.
pub fn recording_to_csv(r: &Recording) -> String {
    let rows = r.samples.iter().map(|s| {
        vec![
            s.t.to_string(),
            s.ax.to_string(),
            s.ay.to_string(),
            s.az.to_string(),
        ]
    });
    format!(
        "# rate_hz={}\n{}",
        r.rate_hz,
        csv_text(&RECORDING_HEADER, rows)
    )
}

pub fn recording_from_csv(path: &Path, text: &str) -> Result<Recording> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let rate_hz = first
        .trim()
        .strip_prefix("# rate_hz=")
        .and_then(|v| v.parse::<f64>().ok())
        .ok_or_else(|| Error::parse(path, "first line must be `# rate_hz=<value>`"))?;
    let samples: Vec<AccelSample> = csv_records(path, rest, &RECORDING_HEADER)?;
    Ok(Recording { rate_hz, samples })
}

pub fn write_recording(path: &Path, r: &Recording) -> Result<()> {
    write_text(path, &recording_to_csv(r))
}

pub fn read_recording(path: &Path) -> Result<Recording> {
    recording_from_csv(path, &read_string(path)?)
}

pub fn labels_to_csv(labels: &[LabeledSegment]) -> String {
    csv_text(
        &LABEL_HEADER,
        labels.iter().map(|l| {
            vec![
                l.class_id.to_string(),
                l.start.to_string(),
                l.end.to_string(),
            ]
        }),
    )
}

pub fn write_labels(path: &Path, labels: &[LabeledSegment]) -> Result<()> {
    write_text(path, &labels_to_csv(labels))
}

pub fn read_labels(path: &Path) -> Result<Vec<LabeledSegment>> {
    #[derive(Deserialize)]
    struct Row {
        class_id: u32,
        start: usize,
        end: usize,
    }
    let rows: Vec<Row> = csv_records(path, &read_string(path)?, &LABEL_HEADER)?;
    rows.into_iter()
        .map(|r| {
            LabeledSegment::new(ClassId(r.class_id), r.start, r.end)
                .map_err(|e| Error::parse(path, e))
        })
        .collect()
}

pub fn events_to_csv(events: &[RecognitionEvent]) -> String {
    csv_text(
        &EVENT_HEADER,
        events.iter().map(|e| {
            vec![
                e.class_id.to_string(),
                e.peak_t.to_string(),
                e.decision_t.to_string(),
                e.plateau_mean.to_string(),
            ]
        }),
    )
}

pub fn write_events(path: &Path, events: &[RecognitionEvent]) -> Result<()> {
    write_text(path, &events_to_csv(events))
}

pub fn read_events(path: &Path) -> Result<Vec<RecognitionEvent>> {
    csv_records(path, &read_string(path)?, &EVENT_HEADER)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    /// Row-major.
    pub data: Vec<f64>,
}

/// Training provenance stored next to the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub config: TrainConfig,
    pub report: TrainReport,
}

/// Self-describing model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub hidden_size: usize,
    pub classes: usize,
    pub window_len: usize,
    pub tensors: Vec<TensorRecord>,
    pub standardization: Option<Standardization>,
    pub training: Option<TrainingRecord>,
}

impl ModelFile {
    pub fn new(model: &ModelParams, training: Option<TrainingRecord>) -> Self {
        let shapes = model.weights.shapes();
        let tensors = TENSOR_NAMES
            .iter()
            .zip(shapes)
            .zip(model.weights.tensors())
            .map(|((name, shape), data)| TensorRecord {
                name: name.to_string(),
                shape,
                data: data.to_vec(),
            })
            .collect();
        Self {
            hidden_size: model.hidden(),
            classes: model.classes(),
            window_len: model.window_len,
            tensors,
            standardization: model.standardization,
            training,
        }
    }

    pub fn to_params(&self) -> Result<ModelParams> {
        let mut weights = Weights::zeros(self.hidden_size, self.classes);
        if self.tensors.len() != TENSOR_NAMES.len() {
            return Err(Error::InvalidInput(format!(
                "model file has {} tensors, expected {}",
                self.tensors.len(),
                TENSOR_NAMES.len()
            )));
        }
        let shapes = weights.shapes();
        for (((rec, name), shape), dst) in self
            .tensors
            .iter()
            .zip(TENSOR_NAMES)
            .zip(shapes)
            .zip(weights.tensors_mut())
        {
            if rec.name != name || rec.shape != shape || rec.data.len() != dst.len() {
                return Err(Error::InvalidInput(format!(
                    "tensor {} has shape {:?}; expected {name} with shape {shape:?}",
                    rec.name, rec.shape
                )));
            }
            dst.copy_from_slice(&rec.data);
        }
        let model = ModelParams {
            window_len: self.window_len,
            weights,
            standardization: self.standardization,
        };
        model.validate()?;
        Ok(model)
    }
}

pub fn save_model(
    path: &Path,
    model: &ModelParams,
    training: Option<TrainingRecord>,
) -> Result<()> {
    write_json(path, &ModelFile::new(model, training))
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    read_json::<ModelFile>(path)?
        .to_params()
        .map_err(|e| Error::parse(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    pub class_id: ClassId,
    /// Mean duration `S`.
    pub s: usize,
    /// Mean response `M`.
    pub m: f64,
    /// Plateau window `C`.
    pub c: usize,
    pub tau: f64,
}

/// Detector parameters with the statistics they were derived from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub rho: f64,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub window_len: usize,
    pub model_sha256: Option<String>,
    pub classes: Vec<ClassParams>,
}

impl ParamsFile {
    pub fn new(stats: &CalibrationStats, params: &CgrParams, model_sha256: Option<String>) -> Self {
        let classes = (0..params.classes())
            .map(|k| ClassParams {
                class_id: ClassId::from_index(k),
                s: stats.durations[k],
                m: stats.mean_response[k],
                c: params.window[k],
                tau: params.tau[k],
            })
            .collect();
        Self {
            rho: params.rho,
            alpha: params.alpha,
            gamma: params.gamma,
            window_len: stats.window_len,
            model_sha256,
            classes,
        }
    }

    pub fn to_params(&self) -> Result<CgrParams> {
        let mut p = CgrParams::new(
            self.rho,
            self.classes.iter().map(|c| c.c).collect(),
            self.classes.iter().map(|c| c.tau).collect(),
        )?;
        let durations: Vec<usize> = self.classes.iter().map(|c| c.s).collect();
        p.check_durations(&durations, self.window_len)?;
        p.alpha = self.alpha;
        p.gamma = self.gamma;
        Ok(p)
    }

    pub fn stats(&self) -> CalibrationStats {
        CalibrationStats {
            durations: self.classes.iter().map(|c| c.s).collect(),
            mean_response: self.classes.iter().map(|c| c.m).collect(),
            counts: Vec::new(),
            window_len: self.window_len,
        }
    }
}

pub fn load_params(path: &Path) -> Result<CgrParams> {
    read_json::<ParamsFile>(path)?.to_params()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolatedEntry {
    pub file: String,
    pub class_id: ClassId,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub recording: String,
    pub labels: String,
    pub gestures: usize,
    pub samples: usize,
}

/// Records how a corpus was generated and where its files are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: CorpusConfig,
    pub rate_hz: f64,
    pub isolated_index: String,
    pub train_count: usize,
    pub test_count: usize,
    pub continuous: Vec<SequenceEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes the corpus under `dir` and returns the manifest path.
pub fn write_corpus(dir: &Path, corpus: &Corpus, cfg: &CorpusConfig) -> Result<PathBuf> {
    let rate_hz = cfg.rate_hz / cfg.downsample as f64;
    let mut index = Vec::new();
    let splits = [
        (Split::Train, &corpus.isolated.train),
        (Split::Test, &corpus.isolated.test),
    ];
    for (split, seqs) in splits {
        for seq in seqs {
            let file = format!("isolated/{:05}.csv", index.len());
            let rec = Recording::from_matrix(rate_hz, 0, &seq.data);
            write_recording(&dir.join(&file), &rec)?;
            index.push(vec![
                file,
                seq.class_id.to_string(),
                format!("{split:?}").to_lowercase(),
            ]);
        }
    }
    let index_file = "isolated/index.csv".to_string();
    write_text(
        &dir.join(&index_file),
        &csv_text(&["file", "class_id", "split"], index),
    )?;

    let mut continuous = Vec::new();
    for (k, seq) in corpus.continuous.iter().enumerate() {
        let entry = SequenceEntry {
            recording: format!("continuous/seq_{k:02}.csv"),
            labels: format!("continuous/seq_{k:02}.labels.csv"),
            gestures: seq.labels.len(),
            samples: seq.recording.len(),
        };
        write_recording(&dir.join(&entry.recording), &seq.recording)?;
        write_labels(&dir.join(&entry.labels), &seq.labels)?;
        continuous.push(entry);
    }
    let manifest = Manifest {
        config: cfg.clone(),
        rate_hz,
        isolated_index: index_file,
        train_count: corpus.isolated.train.len(),
        test_count: corpus.isolated.test.len(),
        continuous,
    };
    let path = dir.join(MANIFEST_FILE);
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Accepts either the corpus directory or the manifest file itself.
pub fn read_manifest(path: &Path) -> Result<(PathBuf, Manifest)> {
    let file = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((dir, read_json(&file)?))
}

fn recording_matrix(path: &Path) -> Result<Array2<f64>> {
    let rec = read_recording(path)?;
    if rec.is_empty() {
        return Err(Error::parse(path, "empty sequence"));
    }
    Ok(rec.to_matrix())
}

pub fn read_isolated(dir: &Path, manifest: &Manifest) -> Result<IsolatedDataset> {
    let path = dir.join(&manifest.isolated_index);
    let entries: Vec<IsolatedEntry> =
        csv_records(&path, &read_string(&path)?, &["file", "class_id", "split"])?;
    let mut out = IsolatedDataset {
        train: Vec::new(),
        test: Vec::new(),
    };
    for e in entries {
        let seq = LabeledSequence {
            class_id: e.class_id,
            data: recording_matrix(&dir.join(&e.file))?,
        };
        match e.split {
            Split::Train => out.train.push(seq),
            Split::Test => out.test.push(seq),
        }
    }
    Ok(out)
}

pub fn read_continuous(dir: &Path, manifest: &Manifest) -> Result<Vec<ContinuousSequence>> {
    manifest
        .continuous
        .iter()
        .map(|e| {
            Ok(ContinuousSequence {
                recording: read_recording(&dir.join(&e.recording))?,
                labels: read_labels(&dir.join(&e.labels))?,
            })
        })
        .collect()
}
