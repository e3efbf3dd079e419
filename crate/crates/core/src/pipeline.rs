//! File-backed pipeline stages sharing one workdir:
//!
//! ```text
//! dataset.ndjson                          labeled original epochs
//! models/<forecaster>_L<L>/rep<r>/<CLASS>.bin   class forecasters
//! synthetic/<forecaster>_L<L>_rep<r>.ndjson     synthetic training epochs
//! classifiers/<condition>/...bin                trained classifiers
//! reports/{runs.jsonl, aggregate.csv, failures.jsonl}
//! ```
//!
//! Checkpoints carry the config hash in their header; every other artifact
//! has a `<file>.meta.json` sidecar with the hash and a content
//! fingerprint. Stages refuse inputs produced under a different hash.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::checkpoint::{load_forecaster, save_classifier, save_forecaster};
use crate::config::{PipelineConfig, WORKDIR_CONFIG};
use crate::error::{Error, Result};
use crate::evaluation::{
    aggregate, aggregate_csv, assemble_training_set, cell_seed, make_split, reports_jsonl,
    train_and_score, train_forecaster_set, CellFailure, Condition, ForecasterChoice, GridResult, Metrics, RunReport,
};
use crate::forecast::ForecasterModel;
use crate::generator::synthesize_dataset;
use crate::io::{load_dataset, read_meta, read_recording, require_file, save_dataset, write_atomic, write_meta, ArtifactMeta};
use crate::labeling::label_dataset;
use crate::signal::{ClassLabel, Dataset};
use crate::toy::make_toy_recording;

/// Optional narrowing of the configured grid; a given value replaces the
/// corresponding list for this invocation only and does not enter the
/// config hash.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Selection {
    pub forecaster: Option<ForecasterChoice>,
    pub window: Option<usize>,
    pub condition: Option<Condition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelSummary {
    pub epochs: usize,
    pub class_counts: [usize; ClassLabel::COUNT],
    /// Agreement with the generator's stages when the toy recording is used.
    pub toy_agreement: Option<f64>,
}

type Cell = (ForecasterChoice, usize, usize);

pub struct Pipeline {
    config: PipelineConfig,
    hash: String,
    selection: Selection,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, selection: Selection) -> Result<Self> {
        config.validate()?;
        if let Some(f) = selection.forecaster {
            for &l in &config.experiment.windows {
                f.spec(selection.window.unwrap_or(l), config.experiment.horizon).validate()?;
            }
        }
        let hash = config.hash();
        Ok(Pipeline { config, hash, selection })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    fn workdir(&self) -> PathBuf {
        self.config.workdir()
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.workdir().join("dataset.ndjson")
    }

    fn cell_name(f: &ForecasterChoice, window: usize) -> String {
        format!("{}_L{window}", f.name())
    }

    pub fn model_path(&self, f: &ForecasterChoice, window: usize, rep: usize, class: ClassLabel) -> PathBuf {
        self.workdir()
            .join("models")
            .join(Self::cell_name(f, window))
            .join(format!("rep{rep}"))
            .join(format!("{class}.bin"))
    }

    pub fn synthetic_path(&self, f: &ForecasterChoice, window: usize, rep: usize) -> PathBuf {
        self.workdir()
            .join("synthetic")
            .join(format!("{}_rep{rep}.ndjson", Self::cell_name(f, window)))
    }

    pub fn classifier_path(&self, c: Condition, f: &ForecasterChoice, window: usize, rep: usize) -> PathBuf {
        let dir = self.workdir().join("classifiers").join(c.as_str());
        match c {
            Condition::O => dir.join(format!("rep{rep}.bin")),
            _ => dir.join(format!("{}_rep{rep}.bin", Self::cell_name(f, window))),
        }
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.config.reports_dir()
    }

    fn forecasters(&self) -> Vec<ForecasterChoice> {
        match self.selection.forecaster {
            Some(f) => vec![f],
            None => self.config.experiment.forecasters.clone(),
        }
    }

    fn windows(&self) -> Vec<usize> {
        match self.selection.window {
            Some(l) => vec![l],
            None => self.config.experiment.windows.clone(),
        }
    }

    /// Conditions run by this invocation.
    pub fn conditions(&self) -> Vec<Condition> {
        match self.selection.condition {
            Some(c) => vec![c],
            None => self.config.experiment.conditions.clone(),
        }
    }

    fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for f in self.forecasters() {
            for l in self.windows() {
                cells.extend((0..self.config.experiment.seeds).map(|r| (f, l, r)));
            }
        }
        cells
    }

    fn meta(&self, kind: &str, fingerprint: Option<String>) -> ArtifactMeta {
        ArtifactMeta { kind: kind.into(), config_hash: self.hash.clone(), fingerprint }
    }

    fn check_hash(&self, what: &Path, found: &str) -> Result<()> {
        if found != self.hash {
            return Err(Error::HashMismatch(format!(
                "{} was produced under config {found}, current config is {}",
                what.display(),
                self.hash
            )));
        }
        Ok(())
    }

    /// Loads an NDJSON artifact after checking its sidecar hash and
    /// fingerprint.
    fn load_checked(&self, path: &Path) -> Result<Dataset> {
        require_file(path)?;
        let meta = read_meta(path)?;
        self.check_hash(path, &meta.config_hash)?;
        let d = load_dataset(path)?;
        if meta.fingerprint.as_deref().is_some_and(|f| f != d.fingerprint()) {
            return Err(Error::HashMismatch(format!("{} does not match its recorded fingerprint", path.display())));
        }
        Ok(d)
    }

    fn save_with_meta(&self, d: &Dataset, path: &Path, kind: &str) -> Result<()> {
        save_dataset(d, path)?;
        write_meta(path, &self.meta(kind, Some(d.fingerprint())))
    }

    /// Labels the configured recording, or the toy recording when no input
    /// is configured, and writes `dataset.ndjson`.
    pub fn label(&self) -> Result<LabelSummary> {
        let cfg = &self.config;
        let (dataset, toy_agreement) = match &cfg.paths.eeg_input {
            Some(eeg_path) => {
                let eeg_rec = read_recording(eeg_path)?;
                let emg_rec = match &cfg.paths.emg_input {
                    Some(p) => read_recording(p)?,
                    None => eeg_rec.clone(),
                };
                let d = label_dataset(
                    eeg_rec.channel("eeg")?,
                    emg_rec.channel("emg")?,
                    cfg.epoch_seconds,
                    &eeg_rec.sidecar.subject_id,
                    &cfg.labeling,
                )?;
                (d, None)
            }
            None => {
                let toy = make_toy_recording(&cfg.toy, cell_seed(cfg.experiment.base_seed, &["toy"]))?;
                let d = label_dataset(&toy.eeg, &toy.emg, cfg.epoch_seconds, &cfg.toy.subject_id, &cfg.labeling)?;
                let agree = d.labels().iter().zip(&toy.labels).filter(|(a, b)| a == b).count();
                let agreement = agree as f64 / toy.labels.len().max(1) as f64;
                log::info!("toy labels agree with ground truth on {:.1}% of epochs", 100.0 * agreement);
                (d, Some(agreement))
            }
        };
        self.save_with_meta(&dataset, &self.dataset_path(), "dataset")?;
        let mut json = cfg.for_workdir().to_pretty_json();
        json.push('\n');
        write_atomic(&self.workdir().join(WORKDIR_CONFIG), json.as_bytes())?;
        Ok(LabelSummary { epochs: dataset.len(), class_counts: dataset.class_counts(), toy_agreement })
    }

    fn split(&self) -> Result<(Dataset, Dataset)> {
        let d = self.load_checked(&self.dataset_path())?;
        make_split(&d, &self.config.experiment.effective_split())
    }

    /// Trains the class forecasters of every selected cell on the training
    /// split and writes their checkpoints. Returns the number of models.
    pub fn train_forecasters(&self) -> Result<usize> {
        let (train, _) = self.split()?;
        let exp = &self.config.experiment;
        let trained: Vec<(Cell, BTreeMap<ClassLabel, ForecasterModel>)> = self
            .cells()
            .into_par_iter()
            .map(|(f, l, rep)| {
                let seed = exp.forecaster_seed(&f, l, rep);
                train_forecaster_set(&train, f.spec(l, exp.horizon), exp.stride, &exp.forecaster_training, seed)
                    .map(|m| ((f, l, rep), m))
            })
            .collect::<Result<_>>()?;
        let mut n = 0;
        for ((f, l, rep), models) in trained {
            for (class, m) in models {
                save_forecaster(&m, &self.model_path(&f, l, rep, class), &self.hash)?;
                n += 1;
            }
        }
        Ok(n)
    }

    /// Synthesizes one epoch per training-split epoch for every selected
    /// cell. All checkpoints are checked before anything is written.
    pub fn synthesize(&self) -> Result<usize> {
        let cells = self.cells();
        let (train, _) = self.split()?;
        let classes: Vec<ClassLabel> = train.class_histogram().into_keys().collect();
        for &(f, l, rep) in &cells {
            for &c in &classes {
                require_file(&self.model_path(&f, l, rep, c))?;
            }
        }
        let mut loaded = Vec::with_capacity(cells.len());
        for &(f, l, rep) in &cells {
            let mut models = BTreeMap::new();
            for &c in &classes {
                let path = self.model_path(&f, l, rep, c);
                let (m, hash) = load_forecaster(&path)?;
                self.check_hash(&path, &hash)?;
                models.insert(c, m);
            }
            loaded.push(((f, l, rep), models));
        }
        let epoch_len = train.epochs().first().map_or(0, |e| e.signal.len());
        let synthetic: Vec<(Cell, Dataset)> = loaded
            .into_par_iter()
            .map(|((f, l, rep), models)| {
                let seed = self.config.experiment.forecaster_seed(&f, l, rep);
                synthesize_dataset(&models, &train, epoch_len, seed).map(|s| ((f, l, rep), s.dataset))
            })
            .collect::<Result<_>>()?;
        for ((f, l, rep), d) in &synthetic {
            self.save_with_meta(d, &self.synthetic_path(f, *l, *rep), "synthetic")?;
        }
        Ok(synthetic.len())
    }

    /// Trains and scores classifiers for every selected condition and cell,
    /// then writes per-run reports and the aggregate table. Failed runs are
    /// recorded and do not stop the others.
    pub fn evaluate(&self) -> Result<GridResult> {
        let conditions = self.conditions();
        let cells = self.cells();
        let exp = &self.config.experiment;
        let (train, test) = self.split()?;

        let mut synthetic: BTreeMap<(ForecasterChoice, usize, usize), Dataset> = BTreeMap::new();
        if conditions.iter().any(|c| c.uses_synthetic()) {
            for &(f, l, rep) in &cells {
                require_file(&self.synthetic_path(&f, l, rep))?;
            }
            for &(f, l, rep) in &cells {
                synthetic.insert((f, l, rep), self.load_checked(&self.synthetic_path(&f, l, rep))?);
            }
        }

        type Outcome = (Cell, Condition, std::result::Result<(usize, Metrics), String>);
        let mut jobs: Vec<(Cell, Condition)> = Vec::new();
        if conditions.contains(&Condition::O) {
            jobs.extend((0..exp.seeds).map(|rep| ((cells[0].0, 0, rep), Condition::O)));
        }
        for &cell in &cells {
            jobs.extend(conditions.iter().filter(|c| c.uses_synthetic()).map(|&c| (cell, c)));
        }
        let outcomes: Vec<Outcome> = jobs
            .into_par_iter()
            .map(|((f, l, rep), c)| {
                let seed = exp.classifier_seed(c, &f, l, rep);
                let run = assemble_training_set(c, &train, synthetic.get(&(f, l, rep))).and_then(|set| {
                    let (model, metrics) = train_and_score(&set, &test, exp, seed)?;
                    save_classifier(&model, &self.classifier_path(c, &f, l, rep), &self.hash)?;
                    Ok((set.len(), metrics))
                });
                ((f, l, rep), c, run.map_err(|e| e.to_string()))
            })
            .collect();

        let original: BTreeMap<usize, &std::result::Result<_, String>> = outcomes
            .iter()
            .filter(|(_, c, _)| *c == Condition::O)
            .map(|((_, _, rep), _, r)| (*rep, r))
            .collect();
        let mut reports = Vec::new();
        let mut failures = Vec::new();
        let mut record = |f: ForecasterChoice, l: usize, rep: usize, c: Condition, r: &std::result::Result<(usize, Metrics), String>| {
            match r {
                Ok((n, m)) => reports.push(RunReport::new(c, &f, l, rep, exp.classifier_seed(c, &f, l, rep), m.clone(), *n, test.len())),
                Err(e) => failures.push(CellFailure { condition: c, forecaster: f.name(), window: l, rep, error: e.clone() }),
            }
        };
        for &(f, l, rep) in &cells {
            for &c in &conditions {
                if c == Condition::O {
                    record(f, l, rep, c, original[&rep]);
                }
            }
        }
        for ((f, l, rep), c, r) in &outcomes {
            if *c != Condition::O {
                record(*f, *l, *rep, *c, r);
            }
        }
        let key = |c: Condition| conditions.iter().position(|&x| x == c);
        reports.sort_by(|a, b| {
            (&a.forecaster, a.window, key(a.condition), a.rep).cmp(&(&b.forecaster, b.window, key(b.condition), b.rep))
        });
        let result = GridResult { aggregate: aggregate(&reports), reports, failures };
        self.write_reports(&result, &conditions)?;
        Ok(result)
    }

    fn write_reports(&self, result: &GridResult, conditions: &[Condition]) -> Result<()> {
        let dir = self.reports_dir();
        let runs = reports_jsonl(&result.reports)?;
        let csv = aggregate_csv(&result.aggregate, conditions);
        let mut failures = String::new();
        for f in &result.failures {
            failures.push_str(&serde_json::to_string(f)?);
            failures.push('\n');
        }
        for (name, body) in [("runs.jsonl", runs), ("aggregate.csv", csv), ("failures.jsonl", failures)] {
            let path = dir.join(name);
            write_atomic(&path, body.as_bytes())?;
            let digest = Sha256::digest(body.as_bytes());
            write_meta(&path, &self.meta("report", Some(hex::encode(&digest[..12]))))?;
        }
        Ok(())
    }

    /// Every stage in order.
    pub fn run_all(&self) -> Result<GridResult> {
        let s = self.label()?;
        log::info!("labeled {} epochs {:?}", s.epochs, s.class_counts);
        let n = self.train_forecasters()?;
        log::info!("trained {n} forecasters");
        let n = self.synthesize()?;
        log::info!("wrote {n} synthetic datasets");
        self.evaluate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::Architecture;

    fn tiny(workdir: &Path) -> PipelineConfig {
        let mut c = PipelineConfig::demo();
        c.toy.epochs_per_class = 12;
        c.toy.block_epochs = 6;
        c.experiment.windows = vec![20];
        c.experiment.horizon = 100;
        c.experiment.seeds = 1;
        c.experiment.forecaster_training.max_steps = 20;
        c.experiment.classifier_training.max_epochs = 3;
        c.paths.workdir = Some(workdir.to_owned());
        c
    }

    #[test]
    fn stages_chain_and_guard_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let p = Pipeline::new(tiny(dir.path()), Selection::default()).unwrap();

        assert!(matches!(p.train_forecasters(), Err(Error::MissingArtifact(_))));
        let s = p.label().unwrap();
        assert_eq!(s.epochs, 36);
        assert!(matches!(p.synthesize(), Err(Error::MissingArtifact(_))));
        assert!(!dir.path().join("synthetic").exists());

        assert_eq!(p.train_forecasters().unwrap(), 3);
        assert_eq!(p.synthesize().unwrap(), 1);
        let r = p.evaluate().unwrap();
        assert_eq!(r.reports.len() + r.failures.len(), 3);
        for name in ["runs.jsonl", "aggregate.csv", "failures.jsonl"] {
            assert!(p.reports_dir().join(name).is_file());
        }

        let mut other = tiny(dir.path());
        other.experiment.base_seed = 99;
        let q = Pipeline::new(other, Selection::default()).unwrap();
        assert!(matches!(q.evaluate(), Err(Error::HashMismatch(_))));

        let only_o = Pipeline::new(
            tiny(dir.path()),
            Selection { condition: Some(Condition::O), ..Selection::default() },
        )
        .unwrap();
        let r = only_o.evaluate().unwrap();
        assert!(r.reports.iter().all(|x| x.condition == Condition::O));
    }

    #[test]
    fn selection_narrows_grid() {
        let dir = tempfile::tempdir().unwrap();
        let sel = Selection {
            forecaster: Some(ForecasterChoice::new(Architecture::Mlp)),
            window: Some(30),
            condition: None,
        };
        let p = Pipeline::new(tiny(dir.path()), sel).unwrap();
        assert_eq!(p.cells(), vec![(ForecasterChoice::new(Architecture::Mlp), 30, 0)]);
        assert_eq!(p.config_hash(), tiny(dir.path()).hash());
    }
}
