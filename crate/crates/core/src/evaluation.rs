//! The original / synthetic / combined training protocol, classification
//! metrics and multi-seed aggregation.
//!
//! The test split is always original data. Synthetic epochs are generated
//! from training-split contexts only, and [`assemble_training_set`] refuses
//! any synthetic epoch whose source is not in the training split.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{train_classifier, ClassifierSpec, ClassifierTrainConfig, TrainedClassifier};
use crate::error::{Error, Result};
use crate::features::{fit_norm_stats, log_spectrogram, standardize, NormMode, Spectrogram, StftConfig};
use crate::forecast::{train_class_forecaster, Architecture, ForecasterModel, ForecasterSpec, TrainConfig};
use crate::generator::{synthesize_dataset, SyntheticDataset};
use crate::signal::{ClassLabel, Dataset, Provenance};
use crate::windowing::{build_class_streams, build_pairs, WindowConfig, DEFAULT_CONTEXT_SWEEP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    /// Original training epochs only.
    O,
    /// Synthetic epochs only.
    S,
    /// Original and synthetic epochs together.
    OS,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::O, Condition::S, Condition::OS];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::O => "O",
            Condition::S => "S",
            Condition::OS => "OS",
        }
    }

    pub fn uses_synthetic(self) -> bool {
        self != Condition::O
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "O" => Ok(Condition::O),
            "S" => Ok(Condition::S),
            "OS" | "O+S" => Ok(Condition::OS),
            _ => Err(Error::invalid(format!("unknown condition {s:?}; expected O, S or OS"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub stratified: bool,
    pub split_seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            stratified: true,
            split_seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train fraction {} is outside (0, 1)", self.train_fraction)));
        }
        Ok(())
    }
}

/// Training share of `n` items: the rounded fraction, kept inside `[1, n-1]`.
fn train_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n - 1)
}

/// Seeded train/test partition. With stratification every class is split
/// separately. Both halves keep the dataset's epoch order.
pub fn make_split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    for c in ClassLabel::ALL {
        let n = dataset.class_counts()[c.index()];
        if n == 1 {
            return Err(Error::InsufficientData {
                class: c,
                reason: "a class needs at least 2 epochs to appear in both splits".into(),
            });
        }
    }
    if dataset.len() < 2 {
        return Err(Error::invalid("cannot split fewer than 2 epochs"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.split_seed);
    let groups: Vec<Vec<usize>> = if spec.stratified {
        ClassLabel::ALL
            .iter()
            .map(|&c| (0..dataset.len()).filter(|&i| dataset.epochs()[i].label == c).collect())
            .collect()
    } else {
        vec![(0..dataset.len()).collect()]
    };
    let mut in_train = vec![false; dataset.len()];
    for mut g in groups.into_iter().filter(|g| !g.is_empty()) {
        g.shuffle(&mut rng);
        for &i in &g[..train_count(g.len(), spec.train_fraction)] {
            in_train[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (e, t) in dataset.epochs().iter().zip(in_train) {
        if t { train.push(e.clone()) } else { test.push(e.clone()) }
    }
    Ok((Dataset::new(train)?, Dataset::new(test)?))
}

/// Training data for one condition. Every synthetic epoch must be
/// synthetic and derived from an epoch of `orig_train`.
pub fn assemble_training_set(condition: Condition, orig_train: &Dataset, synthetic: Option<&Dataset>) -> Result<Dataset> {
    if condition == Condition::O {
        return Ok(orig_train.clone());
    }
    let synthetic = synthetic.ok_or_else(|| Error::invalid(format!("condition {condition} needs synthetic data")))?;
    let allowed = orig_train.ids();
    for e in synthetic.epochs() {
        match &e.provenance {
            Provenance::Synthetic { source_epoch, .. } if allowed.contains(source_epoch) => {}
            Provenance::Synthetic { source_epoch, .. } => {
                return Err(Error::Leakage(format!(
                    "synthetic epoch was generated from {source_epoch}, which is not in the training split"
                )))
            }
            Provenance::Original => {
                return Err(Error::Leakage(format!("epoch {} in the synthetic set is an original", e.id())))
            }
        }
    }
    match condition {
        Condition::S => Ok(synthetic.clone()),
        _ => {
            let mut all = orig_train.epochs().to_vec();
            all.extend_from_slice(synthetic.epochs());
            Dataset::new(all)
        }
    }
}

/// Counts with rows = true class, columns = predicted class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; ClassLabel::COUNT]; ClassLabel::COUNT],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..ClassLabel::COUNT).map(|c| self.counts[c][c]).sum()
    }

    pub fn true_positives(&self, c: ClassLabel) -> u64 {
        self.counts[c.index()][c.index()]
    }

    pub fn false_positives(&self, c: ClassLabel) -> u64 {
        (0..ClassLabel::COUNT).map(|t| self.counts[t][c.index()]).sum::<u64>() - self.true_positives(c)
    }

    pub fn false_negatives(&self, c: ClassLabel) -> u64 {
        self.counts[c.index()].iter().sum::<u64>() - self.true_positives(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: ClassLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// True epochs of this class.
    pub support: u64,
    /// Set when the matching ratio had a zero denominator and was reported as 0.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

impl Metrics {
    pub fn degenerate(&self) -> bool {
        self.per_class
            .iter()
            .any(|m| m.precision_undefined || m.recall_undefined || m.f1_undefined)
    }
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 { (0.0, true) } else { (num as f64 / den as f64, false) }
}

pub fn compute_metrics(truth: &[ClassLabel], predicted: &[ClassLabel]) -> Result<Metrics> {
    if truth.is_empty() {
        return Err(Error::invalid("cannot score an empty prediction set"));
    }
    if truth.len() != predicted.len() {
        return Err(Error::shape(format!("{} predictions", truth.len()), format!("{} predictions", predicted.len())));
    }
    let mut confusion = ConfusionMatrix::default();
    for (t, p) in truth.iter().zip(predicted) {
        confusion.counts[t.index()][p.index()] += 1;
    }
    let per_class = ClassLabel::ALL
        .iter()
        .map(|&c| {
            let (tp, fp, fn_) = (confusion.true_positives(c), confusion.false_positives(c), confusion.false_negatives(c));
            let (precision, precision_undefined) = ratio(tp, tp + fp);
            let (recall, recall_undefined) = ratio(tp, tp + fn_);
            // Harmonic mean of precision and recall, as one exact ratio.
            let (f1, f1_undefined) = ratio(2 * tp, 2 * tp + fp + fn_);
            ClassMetrics {
                class: c,
                precision,
                recall,
                f1,
                support: tp + fn_,
                precision_undefined,
                recall_undefined,
                f1_undefined,
            }
        })
        .collect();
    Ok(Metrics {
        accuracy: confusion.correct() as f64 / confusion.total() as f64,
        per_class,
        confusion,
    })
}

/// Stable 64-bit seed from a base seed and named coordinates.
pub fn cell_seed(base_seed: u64, coordinates: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(base_seed.to_le_bytes());
    for c in coordinates {
        h.update((c.len() as u64).to_le_bytes());
        h.update(c.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Architecture and width; context length and horizon come from the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ForecasterChoice {
    pub architecture: Architecture,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_width: Option<usize>,
}

impl ForecasterChoice {
    pub fn new(architecture: Architecture) -> Self {
        ForecasterChoice { architecture, hidden_width: None }
    }

    pub fn spec(&self, context_len: usize, horizon: usize) -> ForecasterSpec {
        let spec = ForecasterSpec::new(self.architecture, context_len, horizon);
        match self.hidden_width {
            Some(w) => spec.with_width(w),
            None => spec,
        }
    }

    /// `linear-dms`, `mlp-w256`, ...
    pub fn name(&self) -> String {
        let spec = self.spec(1, 1);
        match self.architecture {
            Architecture::LinearDms => self.architecture.name().to_string(),
            a => format!("{}-w{}", a.name(), spec.hidden_width),
        }
    }
}

impl FromStr for ForecasterChoice {
    type Err = Error;

    /// Accepts `name` or `name-wN`.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(a) = Architecture::from_name(s) {
            return Ok(ForecasterChoice::new(a));
        }
        if let Some((name, w)) = s.rsplit_once("-w") {
            if let (Some(a), Ok(w)) = (Architecture::from_name(name), w.parse()) {
                return Ok(ForecasterChoice { architecture: a, hidden_width: Some(w) });
            }
        }
        Err(Error::invalid(format!("unknown forecaster {s:?}")))
    }
}

/// Everything that determines a grid run. The seeds inside the nested
/// training configs are ignored; every run draws its seed from
/// [`cell_seed`] instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub forecasters: Vec<ForecasterChoice>,
    pub windows: Vec<usize>,
    pub horizon: usize,
    pub stride: usize,
    pub conditions: Vec<Condition>,
    pub seeds: usize,
    pub base_seed: u64,
    pub forecaster_training: TrainConfig,
    pub stft: StftConfig,
    pub norm_mode: NormMode,
    pub classifier_channels: Vec<usize>,
    pub classifier_training: ClassifierTrainConfig,
    pub split: SplitSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            forecasters: Architecture::ALL.iter().map(|&a| ForecasterChoice::new(a)).collect(),
            windows: DEFAULT_CONTEXT_SWEEP.to_vec(),
            horizon: 500,
            stride: 1,
            conditions: Condition::ALL.to_vec(),
            seeds: 5,
            base_seed: 0,
            forecaster_training: TrainConfig::default(),
            stft: StftConfig::default(),
            norm_mode: NormMode::default(),
            classifier_channels: vec![8, 16],
            classifier_training: ClassifierTrainConfig::default(),
            split: SplitSpec::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.forecasters.is_empty() || self.windows.is_empty() || self.conditions.is_empty() || self.seeds == 0 {
            return Err(Error::Config("grid needs at least one forecaster, window, condition and seed".into()));
        }
        for f in &self.forecasters {
            for &l in &self.windows {
                f.spec(l, self.horizon).validate()?;
            }
        }
        WindowConfig { context_len: self.windows[0], horizon: self.horizon, stride: self.stride }.validate()?;
        self.forecaster_training.validate()?;
        self.stft.validate()?;
        self.classifier_training.validate()?;
        self.split.validate()
    }

    /// The split actually used: its seed is mixed with the base seed so
    /// that all randomness follows from `base_seed`.
    pub fn effective_split(&self) -> SplitSpec {
        SplitSpec {
            split_seed: cell_seed(self.base_seed, &["split", &self.split.split_seed.to_string()]),
            ..self.split.clone()
        }
    }

    pub fn classifier_spec(&self, epoch_len: usize) -> ClassifierSpec {
        ClassifierSpec::new(self.classifier_channels.clone(), self.stft.freq_bins(), self.stft.frames(epoch_len))
    }

    /// Seed shared by the three class forecasters of one cell.
    pub fn forecaster_seed(&self, forecaster: &ForecasterChoice, window: usize, rep: usize) -> u64 {
        cell_seed(self.base_seed, &["forecaster", &forecaster.name(), &window.to_string(), &rep.to_string()])
    }

    /// Classifier seed. Original-only runs do not depend on the forecaster
    /// or window, so they share one seed (and one result) per repetition.
    pub fn classifier_seed(&self, condition: Condition, forecaster: &ForecasterChoice, window: usize, rep: usize) -> u64 {
        match condition {
            Condition::O => cell_seed(self.base_seed, &["classifier", "O", &rep.to_string()]),
            c => cell_seed(
                self.base_seed,
                &["classifier", c.as_str(), &forecaster.name(), &window.to_string(), &rep.to_string()],
            ),
        }
    }
}

/// Trains one forecaster per class present in `train`; class `c` uses seed
/// `cell_seed(seed, [c])`.
pub fn train_forecaster_set(
    train: &Dataset,
    spec: ForecasterSpec,
    stride: usize,
    config: &TrainConfig,
    seed: u64,
) -> Result<BTreeMap<ClassLabel, ForecasterModel>> {
    let window = WindowConfig { context_len: spec.context_len, horizon: spec.horizon, stride };
    window.validate()?;
    let streams = build_class_streams(train);
    streams
        .par_iter()
        .map(|(&class, stream)| {
            let pairs = build_pairs(stream, &window);
            let cfg = TrainConfig { seed: cell_seed(seed, &[class.as_str()]), ..config.clone() };
            train_class_forecaster(&pairs, spec, class, &cfg).map(|m| (class, m))
        })
        .collect()
}

/// Trains forecasters on `train` and synthesizes one epoch per training
/// epoch.
pub fn synthesize_for_cell(
    train: &Dataset,
    forecaster: &ForecasterChoice,
    window: usize,
    rep: usize,
    config: &ExperimentConfig,
) -> Result<(BTreeMap<ClassLabel, ForecasterModel>, SyntheticDataset)> {
    let seed = config.forecaster_seed(forecaster, window, rep);
    let models = train_forecaster_set(train, forecaster.spec(window, config.horizon), config.stride, &config.forecaster_training, seed)?;
    let epoch_len = epoch_len(train)?;
    let synthetic = synthesize_dataset(&models, train, epoch_len, seed)?;
    Ok((models, synthetic))
}

fn epoch_len(d: &Dataset) -> Result<usize> {
    let len = d.epochs().first().map(|e| e.signal.len()).ok_or_else(|| Error::invalid("dataset is empty"))?;
    if d.epochs().iter().any(|e| e.signal.len() != len) {
        return Err(Error::invalid("epochs differ in length"));
    }
    Ok(len)
}

fn features(d: &Dataset, stft: &StftConfig) -> Result<Vec<Spectrogram>> {
    d.epochs().par_iter().map(|e| log_spectrogram(e.signal.samples(), stft)).collect()
}

/// Trains a classifier on `train_set` and scores it on the original `test`
/// set. Standardisation statistics come from the training set only.
pub fn train_and_score(
    train_set: &Dataset,
    test: &Dataset,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(TrainedClassifier, Metrics)> {
    if let Some(e) = test.epochs().iter().find(|e| !e.provenance.is_original()) {
        return Err(Error::invalid(format!("test epoch {} is not original", e.id())));
    }
    let len = epoch_len(test)?;
    if epoch_len(train_set)? != len {
        return Err(Error::invalid("training and test epochs differ in length"));
    }
    let raw_train = features(train_set, &config.stft)?;
    let stats = fit_norm_stats(&raw_train, config.norm_mode, &train_set.fingerprint())?;
    let x_train = raw_train.iter().map(|s| standardize(s, &stats)).collect::<Result<Vec<_>>>()?;
    let x_test = features(test, &config.stft)?
        .iter()
        .map(|s| standardize(s, &stats))
        .collect::<Result<Vec<_>>>()?;
    let cfg = ClassifierTrainConfig { seed, ..config.classifier_training.clone() };
    let model = train_classifier(&x_train, &train_set.labels(), &config.classifier_spec(len), &cfg)?;
    let predicted = model.predict(&x_test)?;
    let metrics = compute_metrics(&test.labels(), &predicted)?;
    Ok((model, metrics))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub condition: Condition,
    pub forecaster: String,
    pub window: usize,
    /// Repetition index in `0..seeds`.
    pub rep: usize,
    /// Seed the classifier was trained with.
    pub seed: u64,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
    pub degenerate: bool,
    pub train_size: usize,
    pub test_size: usize,
}

impl RunReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        condition: Condition,
        forecaster: &ForecasterChoice,
        window: usize,
        rep: usize,
        seed: u64,
        metrics: Metrics,
        train_size: usize,
        test_size: usize,
    ) -> Self {
        RunReport {
            condition,
            forecaster: forecaster.name(),
            window,
            rep,
            seed,
            accuracy: metrics.accuracy,
            degenerate: metrics.degenerate(),
            per_class: metrics.per_class,
            confusion: metrics.confusion,
            train_size,
            test_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellFailure {
    pub condition: Condition,
    pub forecaster: String,
    pub window: usize,
    pub rep: usize,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Summary { mean, std, n })
    }
}

/// Accuracy summary of one (forecaster, window) row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub forecaster: String,
    pub window: usize,
    pub accuracy: BTreeMap<Condition, Summary>,
}

/// Groups reports by (forecaster, window, condition) and summarises accuracy
/// across repetitions.
pub fn aggregate(reports: &[RunReport]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(String, usize), BTreeMap<Condition, Vec<f64>>> = BTreeMap::new();
    for r in reports {
        groups
            .entry((r.forecaster.clone(), r.window))
            .or_default()
            .entry(r.condition)
            .or_default()
            .push(r.accuracy);
    }
    groups
        .into_iter()
        .map(|((forecaster, window), by_cond)| AggregateRow {
            forecaster,
            window,
            accuracy: by_cond
                .into_iter()
                .filter_map(|(c, v)| Summary::of(&v).map(|s| (c, s)))
                .collect(),
        })
        .collect()
}

/// CSV with one row per (forecaster, window) and mean/std/n columns per
/// condition; missing cells are left empty.
pub fn aggregate_csv(rows: &[AggregateRow], conditions: &[Condition]) -> String {
    let mut out = String::from("forecaster,window");
    for c in conditions {
        out.push_str(&format!(",{c}_mean,{c}_std,{c}_n"));
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{}", r.forecaster, r.window));
        for c in conditions {
            match r.accuracy.get(c) {
                Some(s) => out.push_str(&format!(",{:.6},{:.6},{}", s.mean, s.std, s.n)),
                None => out.push_str(",,,0"),
            }
        }
        out.push('\n');
    }
    out
}

/// One JSON object per line.
pub fn reports_jsonl(reports: &[RunReport]) -> Result<String> {
    let mut out = String::new();
    for r in reports {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub reports: Vec<RunReport>,
    pub failures: Vec<CellFailure>,
    pub aggregate: Vec<AggregateRow>,
}

impl GridResult {
    pub fn aggregate_csv(&self, conditions: &[Condition]) -> String {
        aggregate_csv(&self.aggregate, conditions)
    }
}

/// Runs every (forecaster, window, condition, repetition) cell on one fixed
/// split. A failing cell is recorded and the rest still run.
pub fn run_experiment_grid(dataset: &Dataset, config: &ExperimentConfig) -> Result<GridResult> {
    config.validate()?;
    let (train, test) = make_split(dataset, &config.effective_split())?;
    let reps: Vec<usize> = (0..config.seeds).collect();

    let original: Vec<Result<Metrics>> = if config.conditions.contains(&Condition::O) {
        reps.par_iter()
            .map(|&rep| {
                let seed = config.classifier_seed(Condition::O, &config.forecasters[0], 0, rep);
                train_and_score(&train, &test, config, seed).map(|(_, m)| m)
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut cells = Vec::new();
    for f in &config.forecasters {
        for &l in &config.windows {
            cells.extend(reps.iter().map(|&r| (*f, l, r)));
        }
    }
    let synthetic_conditions: Vec<Condition> = config.conditions.iter().copied().filter(|c| c.uses_synthetic()).collect();

    let outcomes: Vec<Vec<std::result::Result<RunReport, CellFailure>>> = cells
        .par_iter()
        .map(|&(f, l, rep)| {
            let fail = |c: Condition, e: &Error| CellFailure {
                condition: c,
                forecaster: f.name(),
                window: l,
                rep,
                error: e.to_string(),
            };
            let mut out = Vec::new();
            for &c in &config.conditions {
                if c == Condition::O {
                    out.push(match &original[rep] {
                        Ok(m) => Ok(RunReport::new(
                            c,
                            &f,
                            l,
                            rep,
                            config.classifier_seed(c, &f, l, rep),
                            m.clone(),
                            train.len(),
                            test.len(),
                        )),
                        Err(e) => Err(fail(c, e)),
                    });
                }
            }
            if synthetic_conditions.is_empty() {
                return out;
            }
            let synthetic = match synthesize_for_cell(&train, &f, l, rep, config) {
                Ok((_, s)) => s,
                Err(e) => {
                    out.extend(synthetic_conditions.iter().map(|&c| Err(fail(c, &e))));
                    return out;
                }
            };
            for &c in &synthetic_conditions {
                let seed = config.classifier_seed(c, &f, l, rep);
                let run = assemble_training_set(c, &train, Some(&synthetic.dataset))
                    .and_then(|set| train_and_score(&set, &test, config, seed).map(|(_, m)| (set.len(), m)));
                out.push(match run {
                    Ok((n, m)) => Ok(RunReport::new(c, &f, l, rep, seed, m, n, test.len())),
                    Err(e) => Err(fail(c, &e)),
                });
            }
            out
        })
        .collect();

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes.into_iter().flatten() {
        match o {
            Ok(r) => reports.push(r),
            Err(f) => {
                log::warn!("cell {} {} L={} rep {} failed: {}", f.condition, f.forecaster, f.window, f.rep, f.error);
                failures.push(f);
            }
        }
    }
    let key = |c: Condition| config.conditions.iter().position(|&x| x == c);
    reports.sort_by(|a, b| {
        (&a.forecaster, a.window, key(a.condition), a.rep).cmp(&(&b.forecaster, b.window, key(b.condition), b.rep))
    });
    let aggregate = aggregate(&reports);
    Ok(GridResult { reports, failures, aggregate })
}
