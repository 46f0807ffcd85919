//! Batch pipeline: a config file names the per-video input tracks and all
//! stage parameters; the commands wire pattern extraction, feature
//! assembly, training and evaluation into reproducible runs.
//!
//! Every stage derives its randomness from the one master seed, and all
//! output files are written atomically (temp file + rename), so rerunning
//! a command with identical inputs produces byte-identical artifacts.

pub mod synth;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::eval::{
    self, category_weights, repeated_splits, split_roc_curve, subsample_experiment, CategoryPercent,
    EvalReport, LabeledDataset, ProtocolRun, RocEntry, SplitSpec, TTestEntry, WeightShareEntry,
};
use crate::features::{
    assemble_pattern_row, feature_schema, load_feature_matrix, write_feature_matrix, FaceMap,
    FeatureMatrix, FeatureSchema, TrackBundle, zscore_normalize,
};
use crate::models::{fit_model, ModelKind, TaskMode, TrainConfig};
use crate::seed;
use crate::signal::{
    load_annotations, load_face, load_lexicon, load_prosody, load_signal, load_transcript,
    AnnotationSource, JointLayout, TimeWindow,
};
use crate::sisc::{
    extract_occurrences, fit as sisc_fit, load_occurrences, write_decomposition,
    write_occurrences, SolverConfig,
};

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_n_patterns() -> usize {
    5
}
fn default_pattern_seconds() -> f64 {
    2.0
}
fn default_lambda() -> f64 {
    0.1
}
fn default_max_iters() -> usize {
    500
}
fn default_rel_tol() -> f64 {
    1e-5
}
fn default_min_amplitude_frac() -> f64 {
    0.1
}

/// `[solver]` section of the config.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_n_patterns")]
    pub n_patterns: usize,
    #[serde(default = "default_pattern_seconds")]
    pub pattern_seconds: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_min_amplitude_frac")]
    pub min_amplitude_frac: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            n_patterns: default_n_patterns(),
            pattern_seconds: default_pattern_seconds(),
            lambda: default_lambda(),
            max_iters: default_max_iters(),
            rel_tol: default_rel_tol(),
            min_amplitude_frac: default_min_amplitude_frac(),
        }
    }
}

impl SolverSection {
    pub fn to_solver_config(&self, seed_value: u64) -> SolverConfig {
        SolverConfig {
            n_patterns: self.n_patterns,
            pattern_seconds: self.pattern_seconds,
            lambda: self.lambda,
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            seed: seed_value,
        }
    }
}

fn default_margin_c() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_max_epochs() -> usize {
    500
}

/// `[train]` section of the config.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    /// Omit to select by 5-fold cross-validation.
    #[serde(default)]
    pub lasso_lambda: Option<f64>,
    #[serde(default = "default_margin_c")]
    pub margin_c: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default)]
    pub lr_decay: f64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            lasso_lambda: None,
            margin_c: default_margin_c(),
            epsilon: default_epsilon(),
            learning_rate: default_learning_rate(),
            lr_decay: 0.0,
            max_epochs: default_max_epochs(),
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, seed_value: u64) -> TrainConfig {
        TrainConfig {
            lasso_lambda: self.lasso_lambda,
            margin_c: self.margin_c,
            epsilon: self.epsilon,
            learning_rate: self.learning_rate,
            lr_decay: self.lr_decay,
            max_epochs: self.max_epochs,
            seed: seed_value,
        }
    }
}

fn default_n_repeats() -> usize {
    30
}
fn default_test_fraction() -> f64 {
    0.2
}
fn default_subsample_fraction() -> f64 {
    1.0 / 3.0
}

/// `[split]` section of the config.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    #[serde(default = "default_n_repeats")]
    pub n_repeats: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_subsample_fraction")]
    pub subsample_fraction: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            n_repeats: default_n_repeats(),
            test_fraction: default_test_fraction(),
            subsample_fraction: default_subsample_fraction(),
        }
    }
}

fn default_kinds() -> Vec<String> {
    ModelKind::ALL.iter().map(|k| k.as_str().to_string()).collect()
}
fn default_tasks() -> Vec<String> {
    vec!["classification".into(), "regression".into()]
}

/// `[evaluate]` section of the config.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    #[serde(default = "default_kinds")]
    pub kinds: Vec<String>,
    #[serde(default = "default_tasks")]
    pub tasks: Vec<String>,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        EvaluateSection {
            kinds: default_kinds(),
            tasks: default_tasks(),
        }
    }
}

impl EvaluateSection {
    pub fn model_kinds(&self) -> Result<Vec<ModelKind>> {
        self.kinds
            .iter()
            .map(|s| {
                ModelKind::parse(s)
                    .ok_or_else(|| Error::Invalid(format!("unknown model kind `{s}` in config")))
            })
            .collect()
    }

    pub fn task_modes(&self) -> Result<Vec<TaskMode>> {
        self.tasks
            .iter()
            .map(|s| {
                TaskMode::parse(s)
                    .ok_or_else(|| Error::Invalid(format!("unknown task `{s}` in config")))
            })
            .collect()
    }
}

/// One video's input files, relative to the config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoEntry {
    pub id: String,
    pub signal: PathBuf,
    pub transcript: PathBuf,
    pub prosody: PathBuf,
    pub face: PathBuf,
}

/// The whole pipeline configuration. Relative paths resolve against the
/// directory containing the config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; 0 means one per core.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default)]
    pub lexicon: Option<PathBuf>,
    #[serde(default)]
    pub annotations: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub layout: Option<JointLayout>,
    #[serde(default)]
    pub face_map: Option<FaceMap>,
    #[serde(default)]
    pub videos: Vec<VideoEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::parse(path, 1, e.to_string()))?;
        cfg.base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        Ok(cfg)
    }

    /// A minimal config for runs that only need synthetic fixtures.
    pub fn standalone(output_dir: impl Into<PathBuf>, seed_value: u64) -> Self {
        PipelineConfig {
            seed: seed_value,
            output_dir: output_dir.into(),
            jobs: 0,
            lexicon: None,
            annotations: None,
            solver: SolverSection::default(),
            train: TrainSection::default(),
            split: SplitSection::default(),
            evaluate: EvaluateSection::default(),
            layout: None,
            face_map: None,
            videos: Vec::new(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    fn ensure_output_dir(&self) -> Result<PathBuf> {
        let dir = self.output_dir();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }

    fn required_lexicon(&self) -> Result<PathBuf> {
        self.lexicon
            .as_ref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| Error::Invalid("config is missing the `lexicon` path".into()))
    }

    fn required_annotations(&self) -> Result<PathBuf> {
        self.annotations
            .as_ref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| Error::Invalid("config is missing the `annotations` path".into()))
    }

    fn required_layout(&self) -> Result<&JointLayout> {
        self.layout
            .as_ref()
            .ok_or_else(|| Error::Invalid("config is missing the [layout] section".into()))
    }

    fn required_face_map(&self) -> Result<&FaceMap> {
        self.face_map
            .as_ref()
            .ok_or_else(|| Error::Invalid("config is missing the [face_map] section".into()))
    }
}

/// Writes through a temp file in the same directory, then renames, so
/// concurrent stages never observe partial files.
pub fn atomic_write_with(
    path: &Path,
    write: impl FnOnce(&Path) -> Result<()>,
) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    write(&tmp)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn decomposition_path(dir: &Path, video_id: &str) -> PathBuf {
    dir.join(format!("{video_id}.decomposition.json"))
}

fn occurrences_path(dir: &Path, video_id: &str) -> PathBuf {
    dir.join(format!("{video_id}.occurrences.csv"))
}

/// Learns a pattern dictionary and activations per video and writes one
/// decomposition JSON and one occurrence CSV per video.
pub fn cmd_extract(cfg: &PipelineConfig) -> Result<()> {
    if cfg.videos.is_empty() {
        return Err(Error::Invalid("config lists no videos to extract from".into()));
    }
    let out = cfg.ensure_output_dir()?;
    let summaries: Vec<String> = cfg
        .videos
        .par_iter()
        .map(|video| -> Result<String> {
            let signal = load_signal(cfg.resolve(&video.signal))?;
            let video_seed = seed::derive(
                cfg.seed,
                &[seed::hash_label("extract"), seed::hash_label(&video.id)],
            );
            let solver_cfg = cfg.solver.to_solver_config(video_seed);
            let (dict, acts, trace) = sisc_fit(&signal, &solver_cfg)?;
            let occurrences = extract_occurrences(&dict, &acts, cfg.solver.min_amplitude_frac)?;
            atomic_write_with(&decomposition_path(&out, &video.id), |p| {
                write_decomposition(p, &dict, &acts)
            })?;
            atomic_write_with(&occurrences_path(&out, &video.id), |p| {
                write_occurrences(p, &video.id, &occurrences)
            })?;
            Ok(format!(
                "{}: {} iterations ({}), objective {:.6}, {} occurrences",
                video.id,
                trace.iterations,
                if trace.converged { "converged" } else { "max iters" },
                trace.final_objective,
                occurrences.len()
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    for line in summaries {
        println!("extract {line}");
    }
    Ok(())
}

/// Builds the per-pattern feature matrix over all videos, z-scores it, and
/// writes `features.csv` plus `normalization.json`.
pub fn cmd_features(cfg: &PipelineConfig) -> Result<()> {
    if cfg.videos.is_empty() {
        return Err(Error::Invalid("config lists no videos".into()));
    }
    let out = cfg.ensure_output_dir()?;
    let layout = cfg.required_layout()?;
    let face_map = cfg.required_face_map()?;
    let lexicon = load_lexicon(cfg.required_lexicon()?)?;
    let schema = feature_schema(layout, face_map, &lexicon)?;

    let per_video: Vec<(Vec<(String, u32)>, Vec<Vec<f64>>)> = cfg
        .videos
        .par_iter()
        .map(|video| -> Result<(Vec<(String, u32)>, Vec<Vec<f64>>)> {
            let occ_path = occurrences_path(&out, &video.id);
            if !occ_path.exists() {
                return Err(Error::Invalid(format!(
                    "{}: no occurrence file at {}; run `extract` first",
                    video.id,
                    occ_path.display()
                )));
            }
            let signal = load_signal(cfg.resolve(&video.signal))?;
            let transcript = load_transcript(cfg.resolve(&video.transcript))?;
            let prosody = load_prosody(cfg.resolve(&video.prosody))?;
            let face = load_face(cfg.resolve(&video.face))?;
            let tracks = TrackBundle {
                signal: &signal,
                transcript: &transcript,
                prosody: &prosody,
                face: &face,
            };

            let pattern_len = cfg
                .solver
                .to_solver_config(0)
                .pattern_len(signal.sample_rate_hz());
            let window_seconds = pattern_len as f64 / signal.sample_rate_hz();

            let mut windows_by_pattern: BTreeMap<u32, Vec<TimeWindow>> = BTreeMap::new();
            for row in load_occurrences(&occ_path)? {
                if row.video_id != video.id {
                    return Err(Error::Invalid(format!(
                        "occurrence file {} names video {}",
                        occ_path.display(),
                        row.video_id
                    )));
                }
                windows_by_pattern
                    .entry(row.pattern_id)
                    .or_default()
                    .push(TimeWindow::new(row.start_s, row.start_s + window_seconds));
            }
            for d in 0..cfg.solver.n_patterns as u32 {
                if !windows_by_pattern.contains_key(&d) {
                    eprintln!(
                        "warning: {}: pattern {d} has no occurrences and is excluded",
                        video.id
                    );
                }
            }
            let mut keys = Vec::new();
            let mut rows = Vec::new();
            for (pattern_id, windows) in &windows_by_pattern {
                let row = assemble_pattern_row(&tracks, layout, face_map, &lexicon, windows)?;
                keys.push((video.id.clone(), *pattern_id));
                rows.push(row);
            }
            Ok((keys, rows))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut keys = Vec::new();
    let mut flat = Vec::new();
    let mut n_rows = 0;
    for (video_keys, rows) in per_video {
        for (key, row) in video_keys.into_iter().zip(rows) {
            keys.push(key);
            flat.extend(row);
            n_rows += 1;
        }
    }
    if n_rows == 0 {
        return Err(Error::Invalid("no pattern has any occurrences".into()));
    }
    let values = Array2::from_shape_vec((n_rows, schema.len()), flat)
        .expect("rows share the schema width");
    let matrix = FeatureMatrix::new(schema, keys, values)?;
    let (normalized, params) = zscore_normalize(&matrix)?;
    atomic_write_with(&out.join("features.csv"), |p| {
        write_feature_matrix(p, &normalized)
    })?;
    atomic_write_with(&out.join("normalization.json"), |p| params.write_json(p))?;
    println!(
        "features: {} rows x {} columns -> {}",
        normalized.n_rows(),
        normalized.schema.len(),
        out.join("features.csv").display()
    );
    Ok(())
}

/// Annotation-source filter for training and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFilter {
    All,
    SelfRated,
    CrowdAverage,
}

impl SourceFilter {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all" => Some(SourceFilter::All),
            "self" => Some(SourceFilter::SelfRated),
            "crowd_average" => Some(SourceFilter::CrowdAverage),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SourceFilter::All => "all",
            SourceFilter::SelfRated => "self",
            SourceFilter::CrowdAverage => "crowd_average",
        }
    }

    fn accepts(&self, source: AnnotationSource) -> bool {
        match self {
            SourceFilter::All => true,
            SourceFilter::SelfRated => source == AnnotationSource::SelfRated,
            SourceFilter::CrowdAverage => source == AnnotationSource::CrowdAverage,
        }
    }
}

/// Joins annotation rows to feature rows by (video_id, pattern_id) and
/// builds the supervised dataset for one task.
fn join_dataset(
    matrix: &FeatureMatrix,
    annotations: &[crate::signal::AnnotationRecord],
    filter: SourceFilter,
    mode: TaskMode,
) -> Result<LabeledDataset> {
    let mut row_of: BTreeMap<(&str, u32), usize> = BTreeMap::new();
    for (i, (video, pattern)) in matrix.keys.iter().enumerate() {
        row_of.insert((video.as_str(), *pattern), i);
    }
    let mut seen: BTreeMap<(&str, u32, &'static str), ()> = BTreeMap::new();
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for record in annotations {
        if !filter.accepts(record.source) {
            continue;
        }
        let Some(&row) = row_of.get(&(record.video_id.as_str(), record.pattern_id)) else {
            continue;
        };
        let dedup_key = (record.video_id.as_str(), record.pattern_id, record.source.as_str());
        if seen.insert(dedup_key, ()).is_some() {
            return Err(Error::Invalid(format!(
                "duplicate annotation for ({}, {}) from source {}",
                record.video_id,
                record.pattern_id,
                record.source.as_str()
            )));
        }
        rows.push(row);
        targets.push(match mode {
            TaskMode::Classification => {
                if eval::binarize(record.rating)? {
                    1.0
                } else {
                    0.0
                }
            }
            TaskMode::Regression => f64::from(record.rating),
        });
    }
    if rows.is_empty() {
        return Err(Error::Invalid(format!(
            "joining annotations (source = {}) to the feature matrix produced zero rows",
            filter.as_str()
        )));
    }
    let x = Array2::from_shape_fn((rows.len(), matrix.schema.len()), |(i, j)| {
        matrix.values[[rows[i], j]]
    });
    LabeledDataset::new(x, Array1::from_vec(targets))
}

fn load_features_and_annotations(
    cfg: &PipelineConfig,
) -> Result<(FeatureMatrix, Vec<crate::signal::AnnotationRecord>)> {
    let out = cfg.output_dir();
    let matrix_path = out.join("features.csv");
    if !matrix_path.exists() {
        return Err(Error::Invalid(format!(
            "no feature matrix at {}; run `features` first",
            matrix_path.display()
        )));
    }
    let matrix = load_feature_matrix(&matrix_path)?;
    let annotations = load_annotations(cfg.required_annotations()?)?;
    Ok((matrix, annotations))
}

/// Resolves the lasso L1 weight: configured value, or 5-fold CV selection
/// on the given dataset.
fn resolve_lasso_lambda(
    cfg: &PipelineConfig,
    ds: &LabeledDataset,
    mode: TaskMode,
    train_cfg: &TrainConfig,
    context: &str,
) -> Result<Option<f64>> {
    if cfg.train.lasso_lambda.is_some() {
        return Ok(cfg.train.lasso_lambda);
    }
    let lambda_seed = seed::derive(cfg.seed, &[seed::hash_label("lambda"), seed::hash_label(context)]);
    let lambda = eval::select_lasso_lambda(ds, mode, train_cfg, lambda_seed)?;
    eprintln!("info: cross-validated lasso lambda ({context}) = {lambda}");
    Ok(Some(lambda))
}

/// Trains one model on the joined dataset and writes it as JSON.
pub fn cmd_train(
    cfg: &PipelineConfig,
    kind: ModelKind,
    mode: TaskMode,
    filter: SourceFilter,
) -> Result<PathBuf> {
    let out = cfg.ensure_output_dir()?;
    let (matrix, annotations) = load_features_and_annotations(cfg)?;
    let ds = join_dataset(&matrix, &annotations, filter, mode)?;
    if mode == TaskMode::Classification {
        let pos = ds.y.iter().filter(|&&v| v > 0.5).count();
        if pos == 0 || pos == ds.n_rows() {
            return Err(Error::Invalid(
                "training set has a single class; cannot train a classifier".into(),
            ));
        }
    }
    let train_seed = seed::derive(
        cfg.seed,
        &[
            seed::hash_label("train"),
            seed::hash_label(kind.as_str()),
            seed::hash_label(mode.as_str()),
            seed::hash_label(filter.as_str()),
        ],
    );
    let mut train_cfg = cfg.train.to_train_config(train_seed);
    if kind == ModelKind::Lasso {
        train_cfg.lasso_lambda =
            resolve_lasso_lambda(cfg, &ds, mode, &train_cfg, filter.as_str())?;
    }
    let mut model = fit_model(kind, &ds.x.view(), &ds.y, mode, &train_cfg)?;
    model.columns_digest = Some(matrix.schema.digest());
    let path = out.join(format!(
        "model_{}_{}_{}.json",
        kind.as_str(),
        mode.as_str(),
        filter.as_str()
    ));
    atomic_write_with(&path, |p| model.write_json(p))?;
    println!(
        "train: {} {} on {} rows (source = {}) -> {}",
        kind.as_str(),
        mode.as_str(),
        ds.n_rows(),
        filter.as_str(),
        path.display()
    );
    Ok(path)
}

/// Runs the full evaluation protocol and writes `evaluation.json`,
/// `weights.csv` and per-classifier ROC CSVs.
pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<EvalReport> {
    let out = cfg.ensure_output_dir()?;
    let (matrix, annotations) = load_features_and_annotations(cfg)?;
    let kinds = cfg.evaluate.model_kinds()?;
    let modes = cfg.evaluate.task_modes()?;

    let mut sources = Vec::new();
    for filter in [SourceFilter::CrowdAverage, SourceFilter::SelfRated] {
        if annotations.iter().any(|a| filter.accepts(a.source)) {
            sources.push(filter);
        }
    }
    if sources.is_empty() {
        return Err(Error::Invalid("annotation file has no usable sources".into()));
    }

    let mut report = EvalReport::default();
    // metric lists kept for the t-tests
    let mut metric_lists: BTreeMap<(ModelKind, TaskMode, &'static str, bool), Vec<f64>> =
        BTreeMap::new();

    for &mode in &modes {
        for &source in &sources {
            let ds = join_dataset(&matrix, &annotations, source, mode)?;
            let base_train = cfg.train.to_train_config(0);
            let lambda = resolve_lasso_lambda(
                cfg,
                &ds,
                mode,
                &base_train,
                &format!("{} {}", source.as_str(), mode.as_str()),
            )?;
            for &kind in &kinds {
                let mut train_cfg = cfg.train.to_train_config(0);
                if kind == ModelKind::Lasso {
                    train_cfg.lasso_lambda = lambda;
                }
                let spec = SplitSpec {
                    n_repeats: cfg.split.n_repeats,
                    test_fraction: cfg.split.test_fraction,
                    seed: seed::derive(
                        cfg.seed,
                        &[
                            seed::hash_label("evaluate"),
                            seed::hash_label(kind.as_str()),
                            seed::hash_label(mode.as_str()),
                            seed::hash_label(source.as_str()),
                        ],
                    ),
                };
                let metrics = repeated_splits(&ds, kind, mode, &train_cfg, &spec)?;
                metric_lists.insert((kind, mode, source.as_str(), false), metrics.clone());
                report.runs.push(ProtocolRun {
                    kind,
                    mode,
                    source: source.as_str().to_string(),
                    subsampled: false,
                    mean: eval::mean_of(&metrics),
                    metrics,
                });

                if source == SourceFilter::CrowdAverage {
                    let sub = subsample_experiment(
                        &ds,
                        cfg.split.subsample_fraction,
                        kind,
                        mode,
                        &train_cfg,
                        &spec,
                    )?;
                    metric_lists.insert((kind, mode, source.as_str(), true), sub.clone());
                    report.runs.push(ProtocolRun {
                        kind,
                        mode,
                        source: source.as_str().to_string(),
                        subsampled: true,
                        mean: eval::mean_of(&sub),
                        metrics: sub,
                    });
                }

                if mode == TaskMode::Classification {
                    let points = split_roc_curve(&ds, 0, kind, &train_cfg, &spec)?;
                    atomic_write_with(
                        &out.join(format!("roc_{}_{}.csv", kind.as_str(), source.as_str())),
                        |p| eval::write_roc_csv(p, &points),
                    )?;
                    report.roc_curves.push(RocEntry {
                        kind,
                        source: source.as_str().to_string(),
                        points,
                    });
                }

                if kind.is_linear() {
                    let weights_seed = seed::derive(
                        cfg.seed,
                        &[
                            seed::hash_label("weights"),
                            seed::hash_label(kind.as_str()),
                            seed::hash_label(mode.as_str()),
                            seed::hash_label(source.as_str()),
                        ],
                    );
                    let mut weight_cfg = train_cfg.clone();
                    weight_cfg.seed = weights_seed;
                    let norm = crate::features::Normalization::fit(&ds.x.view())?;
                    let x = norm.apply(&ds.x.view())?;
                    let model = fit_model(kind, &x.view(), &ds.y, mode, &weight_cfg)?;
                    match category_weights(&model, &matrix.schema.categories) {
                        Ok(shares) => report.weight_shares.push(WeightShareEntry {
                            kind,
                            mode,
                            source: source.as_str().to_string(),
                            percents: shares
                                .into_iter()
                                .map(|(category, percent)| CategoryPercent { category, percent })
                                .collect(),
                        }),
                        Err(e) => eprintln!(
                            "warning: weight shares unavailable for {} {} {}: {e}",
                            kind.as_str(),
                            mode.as_str(),
                            source.as_str()
                        ),
                    }
                }
            }
        }
    }

    // the headline statistical contrast: self vs subsampled crowd, plus
    // the raw crowd-vs-self comparison
    for &mode in &modes {
        for &kind in &kinds {
            let self_list = metric_lists.get(&(kind, mode, "self", false));
            let sub_crowd = metric_lists.get(&(kind, mode, "crowd_average", true));
            let crowd = metric_lists.get(&(kind, mode, "crowd_average", false));
            let mut push_test = |a: &Vec<f64>, b: &Vec<f64>, comparison: &str| {
                match eval::welch_ttest(a, b) {
                    Ok(result) => report.t_tests.push(TTestEntry {
                        kind,
                        mode,
                        comparison: comparison.to_string(),
                        t: result.t,
                        p: result.p,
                        dof: result.dof,
                    }),
                    Err(e) => eprintln!(
                        "warning: t-test {} skipped for {} {}: {e}",
                        comparison,
                        kind.as_str(),
                        mode.as_str()
                    ),
                }
            };
            if let (Some(a), Some(b)) = (self_list, sub_crowd) {
                push_test(a, b, "self_vs_subsampled_crowd");
            }
            if let (Some(a), Some(b)) = (crowd, self_list) {
                push_test(a, b, "crowd_vs_self");
            }
        }
    }

    atomic_write_with(&out.join("evaluation.json"), |p| report.write_json(p))?;
    atomic_write_with(&out.join("weights.csv"), |p| report.write_weights_csv(p))?;
    println!(
        "evaluate: {} protocol runs, {} t-tests, {} weight tables -> {}",
        report.runs.len(),
        report.t_tests.len(),
        report.weight_shares.len(),
        out.join("evaluation.json").display()
    );
    Ok(report)
}

/// Renders the evaluation report as human-readable tables.
pub fn cmd_report(cfg: &PipelineConfig) -> Result<String> {
    let path = cfg.output_dir().join("evaluation.json");
    if !path.exists() {
        return Err(Error::Invalid(format!(
            "no evaluation report at {}; run `evaluate` first",
            path.display()
        )));
    }
    let report = EvalReport::load_json(&path)?;
    let mut text = String::new();

    let mut means: BTreeMap<(String, String, String, bool), f64> = BTreeMap::new();
    let mut kinds: Vec<String> = Vec::new();
    let mut modes: Vec<String> = Vec::new();
    for run in &report.runs {
        let kind = run.kind.as_str().to_string();
        let mode = run.mode.as_str().to_string();
        if !kinds.contains(&kind) {
            kinds.push(kind.clone());
        }
        if !modes.contains(&mode) {
            modes.push(mode.clone());
        }
        means.insert((kind, mode, run.source.clone(), run.subsampled), run.mean);
    }

    for mode in &modes {
        let metric = if mode == "classification" { "AUC" } else { "correlation" };
        text.push_str(&format!("== Mean {metric} ({mode}) ==\n"));
        text.push_str(&format!(
            "{:<12} {:>14} {:>18} {:>14}\n",
            "model", "crowd", "crowd(subsample)", "self"
        ));
        for kind in &kinds {
            let cell = |source: &str, subsampled: bool| {
                means
                    .get(&(kind.clone(), mode.clone(), source.to_string(), subsampled))
                    .map(|m| format!("{m:.3}"))
                    .unwrap_or_else(|| "-".to_string())
            };
            text.push_str(&format!(
                "{:<12} {:>14} {:>18} {:>14}\n",
                kind,
                cell("crowd_average", false),
                cell("crowd_average", true),
                cell("self", false)
            ));
        }
        text.push('\n');
    }

    if !report.t_tests.is_empty() {
        text.push_str("== Welch t-tests ==\n");
        text.push_str(&format!(
            "{:<12} {:<16} {:<26} {:>9} {:>12} {:>8}\n",
            "model", "task", "comparison", "t", "p", "dof"
        ));
        for t in &report.t_tests {
            text.push_str(&format!(
                "{:<12} {:<16} {:<26} {:>9.3} {:>12.3e} {:>8.1}\n",
                t.kind.as_str(),
                t.mode.as_str(),
                t.comparison,
                t.t,
                t.p,
                t.dof
            ));
        }
        text.push('\n');
    }

    if !report.weight_shares.is_empty() {
        text.push_str("== Category weight shares (%) ==\n");
        text.push_str(&format!(
            "{:<12} {:<16} {:<14} {:>7} {:>8} {:>6} {:>6} {:>8}\n",
            "model", "task", "source", "disf", "prosody", "body", "face", "lexical"
        ));
        for entry in &report.weight_shares {
            let get = |cat: crate::features::FeatureCategory| {
                entry
                    .percents
                    .iter()
                    .find(|cp| cp.category == cat)
                    .map(|cp| cp.percent)
                    .unwrap_or(0.0)
            };
            use crate::features::FeatureCategory as FC;
            text.push_str(&format!(
                "{:<12} {:<16} {:<14} {:>7.1} {:>8.1} {:>6.1} {:>6.1} {:>8.1}\n",
                entry.kind.as_str(),
                entry.mode.as_str(),
                entry.source,
                get(FC::Disfluency),
                get(FC::Prosody),
                get(FC::Body),
                get(FC::Face),
                get(FC::Lexical)
            ));
        }
    }
    Ok(text)
}

/// Writes a planted-pattern signal fixture: `synthetic_signal.csv` plus
/// `ground_truth.json`.
pub fn cmd_synth_sisc(
    out_dir: &Path,
    params: &synth::SiscParams,
    seed_value: u64,
) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (signal, truth) = synth::generate_sisc(params, seed_value)?;
    atomic_write_with(&out_dir.join("synthetic_signal.csv"), |p| {
        crate::signal::write_signal(p, &signal)
    })?;
    atomic_write_with(&out_dir.join("ground_truth.json"), |p| truth.write_json(p))?;
    println!(
        "synth sisc: {} samples x {} channels, {} impulses -> {}",
        truth.n_samples,
        truth.n_channels,
        truth.impulses.len(),
        out_dir.display()
    );
    Ok(())
}

/// Writes a planted-structure classification fixture: `features.csv`,
/// `annotations.csv`, `classification_truth.json`.
pub fn cmd_synth_classification(
    out_dir: &Path,
    params: &synth::ClassificationParams,
    seed_value: u64,
) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (matrix, annotations, truth) = synth::generate_classification(params, seed_value)?;
    atomic_write_with(&out_dir.join("features.csv"), |p| {
        write_feature_matrix(p, &matrix)
    })?;
    atomic_write_with(&out_dir.join("annotations.csv"), |p| {
        crate::signal::write_annotations(p, &annotations)
    })?;
    atomic_write_with(&out_dir.join("classification_truth.json"), |p| {
        let json = serde_json::to_string_pretty(&truth).expect("truth serializes");
        fs::write(p, json).map_err(|e| Error::io(p, e))
    })?;
    println!(
        "synth classification: {} rows -> {}",
        matrix.n_rows(),
        out_dir.display()
    );
    Ok(())
}

/// Generates a full demo project (tracks, annotations, lexicon, config).
pub fn cmd_synth_demo(out_dir: &Path, seed_value: u64, n_videos: usize) -> Result<synth::DemoProject> {
    let project = synth::write_demo_project(out_dir, seed_value, n_videos)?;
    println!(
        "synth demo: {n_videos} videos -> {} (config at {})",
        project.root.display(),
        project.config.display()
    );
    Ok(project)
}

/// Re-exported schema helper for callers that need the canonical fixture
/// schema.
pub fn fixture_schema() -> Result<FeatureSchema> {
    feature_schema(
        &synth::demo_layout(),
        &FaceMap::standard_66(),
        &synth::demo_lexicon(),
    )
}
