//! Command-line front end: `gen`, `train`, `calibrate`, `run`, `eval`, `sweep`.
//!
//! Every command reads a [`RunConfig`] (TOML file plus flag overrides) and
//! writes plain files under the output directory. The `cmd_*` functions are
//! public so the same behavior can be driven in-process.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::calibrate::{calibrate, compute_s, derive_params, CalibrationStats};
use crate::cgr::{run_stream, CgrParams};
use crate::error::{Error, Result};
use crate::eval::{
    latency_histogram, offline_confusion, online_evaluation, ConfusionMatrix, LatencyHistogram,
};
use crate::io::{
    load_model, load_params, read_continuous, read_isolated, read_manifest, read_recording,
    save_model, sha256_file, write_corpus, write_events, write_json, write_text, ParamsFile,
    TrainingRecord,
};
use crate::par::Execution;
use crate::pipeline::{probability_stream, Recognizer};
use crate::rnn::{train_with, ModelParams, TrainConfig};
use crate::synthgen::{generate_corpus, ContinuousSequence, CorpusConfig};
use crate::types::{ClassId, GestureDictionary, ProbabilityVector, RecognitionEvent};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_CONSTRAINT: i32 = 4;

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io { .. } | Error::Parse { .. } => EXIT_IO,
        _ => EXIT_CONSTRAINT,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_size: usize,
    pub standardize: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            learning_rate: d.learning_rate,
            momentum: d.momentum,
            epochs: d.epochs,
            batch_size: d.batch_size,
            hidden_size: d.hidden_size,
            standardize: d.standardize,
        }
    }
}

/// Corpus shape; templates always come from the built-in set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub rate_hz: f64,
    pub per_class_count: usize,
    pub sequences: usize,
    pub gestures_per_sequence: (usize, usize),
    pub idle_range: (usize, usize),
    pub edge_idle: usize,
    pub noise_std: f64,
    /// Explicit gesture orders (class ids); replaces the random orders.
    pub orders: Vec<Vec<u32>>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        let d = CorpusConfig::default();
        Self {
            rate_hz: d.rate_hz,
            per_class_count: d.per_class_count,
            sequences: d.sequences,
            gestures_per_sequence: d.gestures_per_sequence,
            idle_range: d.idle_range,
            edge_idle: d.edge_idle,
            noise_std: d.noise_std,
            orders: Vec::new(),
        }
    }
}

/// Everything a command needs. Paths left unset resolve inside `out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: PathBuf,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub params: Option<PathBuf>,
    pub seed: u64,
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    /// Window length; `max S` when unset.
    pub n_override: Option<usize>,
    pub downsample: usize,
    pub sweep_alpha: Vec<f64>,
    pub sweep_gamma: Vec<f64>,
    pub execution: Execution,
    pub train: TrainSection,
    pub corpus: CorpusSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            data: None,
            model: None,
            params: None,
            seed: CorpusConfig::default().seed,
            alpha: 0.25,
            gamma: 0.9,
            rho: 0.2,
            n_override: None,
            downsample: CorpusConfig::default().downsample,
            sweep_alpha: vec![0.05, 0.25],
            sweep_gamma: vec![0.6, 0.9],
            execution: Execution::default(),
            train: TrainSection::default(),
            corpus: CorpusSection::default(),
        }
    }
}

fn in_unit(name: &str, v: f64, include_one: bool) -> Result<()> {
    let ok = v > 0.0 && (v < 1.0 || (include_one && v == 1.0));
    if ok {
        Ok(())
    } else {
        let hi = if include_one { "1]" } else { "1)" };
        Err(Error::Constraint(format!(
            "{name} must lie in (0, {hi}, got {v}"
        )))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        in_unit("alpha", self.alpha, true)?;
        in_unit("gamma", self.gamma, true)?;
        in_unit("rho", self.rho, false)?;
        for &a in &self.sweep_alpha {
            in_unit("sweep alpha", a, true)?;
        }
        for &g in &self.sweep_gamma {
            in_unit("sweep gamma", g, true)?;
        }
        if self.n_override == Some(0) {
            return Err(Error::Constraint("n_override must be positive".into()));
        }
        if self.downsample == 0 {
            return Err(Error::Constraint("downsample must be positive".into()));
        }
        self.train_config().validate()
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data.clone().unwrap_or_else(|| self.out.join("data"))
    }

    pub fn model_path(&self) -> PathBuf {
        self.model
            .clone()
            .unwrap_or_else(|| self.out.join("model.json"))
    }

    pub fn params_path(&self) -> PathBuf {
        self.params
            .clone()
            .unwrap_or_else(|| self.out.join("params.json"))
    }

    pub fn corpus_config(&self) -> CorpusConfig {
        let c = &self.corpus;
        CorpusConfig {
            seed: self.seed,
            rate_hz: c.rate_hz,
            downsample: self.downsample,
            per_class_count: c.per_class_count,
            sequences: c.sequences,
            gestures_per_sequence: c.gestures_per_sequence,
            idle_range: c.idle_range,
            edge_idle: c.edge_idle,
            noise_std: c.noise_std,
            orders: c
                .orders
                .iter()
                .map(|o| o.iter().copied().map(ClassId).collect())
                .collect(),
            ..CorpusConfig::default()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: self.seed,
            standardize: t.standardize,
            hidden_size: t.hidden_size,
            window_len: self.n_override,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gesture-stream",
    version,
    about = "Streaming accelerometer gesture recognition"
)]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags that override fields of the config file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    #[arg(long, global = true)]
    pub n_override: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Corpus directory (defaults to `<out>/data`).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Model file (defaults to `<out>/model.json`).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Detector parameters (defaults to `<out>/params.json`).
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus.
    Gen,
    /// Train the classifier on the isolated training split.
    Train,
    /// Derive detector parameters from the isolated corpus.
    Calibrate,
    /// Stream one recording through the recognizer.
    Run {
        /// Recording CSV.
        recording: PathBuf,
        /// Event CSV to write (defaults to `<out>/events.csv`).
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Score the continuous sequences.
    Eval,
    /// Score the continuous sequences over an alpha × gamma grid.
    Sweep,
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.n_override {
            cfg.n_override = Some(v);
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = &self.data {
            cfg.data = Some(v.clone());
        }
        if let Some(v) = &self.model {
            cfg.model = Some(v.clone());
        }
        if let Some(v) = &self.params {
            cfg.params = Some(v.clone());
        }
        if self.sequential {
            cfg.execution = Execution::Sequential;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs a parsed command line and prints a short report to stdout.
pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = cli.overrides.resolve()?;
    match &cli.command {
        Command::Gen => {
            println!("{}", cmd_gen(&cfg)?.display());
        }
        Command::Train => {
            let cm = cmd_train(&cfg)?;
            print!("{}", cm.to_table());
            println!("model: {}", cfg.model_path().display());
        }
        Command::Calibrate => {
            let p = cmd_calibrate(&cfg)?;
            println!(
                "C = {:?}",
                p.classes.iter().map(|c| c.c).collect::<Vec<_>>()
            );
            println!(
                "tau = {:?}",
                p.classes.iter().map(|c| c.tau).collect::<Vec<_>>()
            );
            println!("params: {}", cfg.params_path().display());
        }
        Command::Run { recording, events } => {
            let out = events.clone().unwrap_or_else(|| cfg.out.join("events.csv"));
            let ev = cmd_run(&cfg, recording, &out)?;
            println!("{} events -> {}", ev.len(), out.display());
        }
        Command::Eval => {
            let r = cmd_eval(&cfg)?;
            print!("{}", r.confusion.to_table());
            print!("{}", r.latency.to_table());
        }
        Command::Sweep => {
            for p in cmd_sweep(&cfg)? {
                println!("alpha={} gamma={}", p.alpha, p.gamma);
                print!("{}", p.confusion.to_table());
            }
        }
    }
    Ok(())
}

/// Writes the corpus and returns the manifest path.
pub fn cmd_gen(cfg: &RunConfig) -> Result<PathBuf> {
    let corpus_cfg = cfg.corpus_config();
    let corpus = generate_corpus(&corpus_cfg)?;
    write_corpus(&cfg.data_dir(), &corpus, &corpus_cfg)
}

struct Corpus {
    classes: usize,
    isolated: crate::synthgen::IsolatedDataset,
}

fn load_isolated(cfg: &RunConfig) -> Result<Corpus> {
    let (dir, manifest) = read_manifest(&cfg.data_dir())?;
    Ok(Corpus {
        classes: manifest.config.templates.len(),
        isolated: read_isolated(&dir, &manifest)?,
    })
}

fn load_continuous(cfg: &RunConfig) -> Result<Vec<ContinuousSequence>> {
    let (dir, manifest) = read_manifest(&cfg.data_dir())?;
    read_continuous(&dir, &manifest)
}

/// Trains on the training split, saves the model and the offline test matrix.
pub fn cmd_train(cfg: &RunConfig) -> Result<ConfusionMatrix> {
    let corpus = load_isolated(cfg)?;
    let durations = compute_s(&corpus.isolated.all(), corpus.classes)?;
    let dict = GestureDictionary::from_durations(&durations)?;
    let train_cfg = cfg.train_config();
    let (model, report) = train_with(&corpus.isolated.train, &dict, &train_cfg, cfg.execution)?;
    let record = TrainingRecord {
        config: train_cfg,
        report,
    };
    save_model(&cfg.model_path(), &model, Some(record))?;
    let cm = offline_confusion(&model, &corpus.isolated.test, cfg.execution)?;
    write_text(&cfg.out.join("offline_confusion.txt"), &cm.to_table())?;
    write_text(&cfg.out.join("offline_confusion.csv"), &cm.to_csv())?;
    Ok(cm)
}

/// Calibrates against the whole isolated corpus and saves the parameters.
pub fn cmd_calibrate(cfg: &RunConfig) -> Result<ParamsFile> {
    let model_path = cfg.model_path();
    let model = load_model(&model_path)?;
    let corpus = load_isolated(cfg)?;
    let (stats, params) = calibrate(
        &model,
        &corpus.isolated.all(),
        cfg.alpha,
        cfg.gamma,
        cfg.rho,
        cfg.execution,
    )?;
    let file = ParamsFile::new(&stats, &params, Some(sha256_file(&model_path)?));
    write_json(&cfg.params_path(), &file)?;
    Ok(file)
}

/// Streams one recording sample by sample and writes its events.
pub fn cmd_run(
    cfg: &RunConfig,
    recording: &Path,
    events_out: &Path,
) -> Result<Vec<RecognitionEvent>> {
    let model = load_model(&cfg.model_path())?;
    let params = load_params(&cfg.params_path())?;
    let rec = read_recording(recording)?;
    if let Some(v) = crate::types::validate_recording(&rec).violations.first() {
        return Err(Error::parse(recording, &v.message));
    }
    let mut recognizer = Recognizer::new(&model, &params)?;
    let mut events = Vec::new();
    for s in &rec.samples {
        events.extend(recognizer.push(*s)?);
    }
    write_events(events_out, &events)?;
    Ok(events)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub confusion: ConfusionMatrix,
    pub latency: LatencyHistogram,
    pub events: Vec<Vec<RecognitionEvent>>,
}

fn streams(
    model: &ModelParams,
    seqs: &[ContinuousSequence],
    exec: Execution,
) -> Result<Vec<Vec<ProbabilityVector>>> {
    seqs.iter()
        .map(|s| probability_stream(model, &s.recording, exec))
        .collect()
}

fn score(
    probs: &[Vec<ProbabilityVector>],
    seqs: &[ContinuousSequence],
    params: &CgrParams,
    window_len: usize,
) -> Result<EvalOutcome> {
    let events = probs
        .iter()
        .map(|p| run_stream(p, params))
        .collect::<Result<Vec<_>>>()?;
    let (confusion, report) = online_evaluation(
        events
            .iter()
            .zip(seqs)
            .map(|(e, s)| (e.as_slice(), s.labels.as_slice())),
        params.classes(),
        window_len,
    )?;
    Ok(EvalOutcome {
        confusion,
        latency: latency_histogram(&report),
        events,
    })
}

fn write_scores(dir: &Path, r: &EvalOutcome) -> Result<()> {
    write_text(
        &dir.join("online_confusion.txt"),
        &format!("{}\n{}", r.confusion.to_table(), r.latency.to_table()),
    )?;
    write_text(&dir.join("online_confusion.csv"), &r.confusion.to_csv())?;
    write_text(&dir.join("summary.csv"), &r.confusion.summarize().to_csv())?;
    write_text(&dir.join("latency.csv"), &r.latency.to_csv())
}

/// Runs every continuous sequence and writes events, the online matrix and latencies.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalOutcome> {
    let model = load_model(&cfg.model_path())?;
    let params = load_params(&cfg.params_path())?;
    let seqs = load_continuous(cfg)?;
    let probs = streams(&model, &seqs, cfg.execution)?;
    let r = score(&probs, &seqs, &params, model.window_len)?;
    for (k, ev) in r.events.iter().enumerate() {
        write_events(&cfg.out.join(format!("events/seq_{k:02}.events.csv")), ev)?;
    }
    write_scores(&cfg.out, &r)?;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub alpha: f64,
    pub gamma: f64,
    pub confusion: ConfusionMatrix,
    pub latency: LatencyHistogram,
}

/// Re-derives the parameters for each grid point from the calibration
/// statistics in the params file; probability streams are computed once.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<SweepPoint>> {
    let model = load_model(&cfg.model_path())?;
    let file: ParamsFile = crate::io::read_json(&cfg.params_path())?;
    let stats: CalibrationStats = file.stats();
    let seqs = load_continuous(cfg)?;
    let probs = streams(&model, &seqs, cfg.execution)?;
    let grid: Vec<(f64, f64)> = cfg
        .sweep_alpha
        .iter()
        .flat_map(|&a| cfg.sweep_gamma.iter().map(move |&g| (a, g)))
        .collect();
    let points = cfg.execution.map(&grid, |&(alpha, gamma)| {
        let params = derive_params(
            &stats.durations,
            &stats.mean_response,
            stats.window_len,
            alpha,
            gamma,
            file.rho,
        )?;
        let r = score(&probs, &seqs, &params, model.window_len)?;
        let dir = cfg.out.join(format!("sweep/alpha_{alpha}_gamma_{gamma}"));
        write_json(
            &dir.join("params.json"),
            &ParamsFile::new(&stats, &params, file.model_sha256.clone()),
        )?;
        write_scores(&dir, &r)?;
        Ok(SweepPoint {
            alpha,
            gamma,
            confusion: r.confusion,
            latency: r.latency,
        })
    });
    points.into_iter().collect()
}
