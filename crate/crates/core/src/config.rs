//! Pipeline configuration: a single JSON document. Every field has a
//! default, so `{}` is a valid config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evaluation::{ExperimentConfig, ForecasterChoice};
use crate::forecast::Architecture;
use crate::labeling::LabelingConfig;
use crate::toy::{ToyConfig, TOY_EPOCH_SECONDS};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// Raw EEG recording (f32 LE or CSV with a JSON sidecar). When absent the
    /// toy recording is generated instead.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eeg_input: Option<PathBuf>,
    /// Raw EMG recording; defaults to an `emg` channel of `eeg_input`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emg_input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workdir: Option<PathBuf>,
    /// Defaults to `<workdir>/reports`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reports: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub labeling: LabelingConfig,
    pub epoch_seconds: f64,
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    pub toy: ToyConfig,
    pub paths: Paths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            labeling: LabelingConfig::default(),
            epoch_seconds: TOY_EPOCH_SECONDS,
            experiment: ExperimentConfig::default(),
            toy: ToyConfig::default(),
            paths: Paths::default(),
        }
    }
}

pub const DEFAULT_WORKDIR: &str = "work";
/// Name of the effective config recorded inside a workdir.
pub const WORKDIR_CONFIG: &str = "config.json";

impl PipelineConfig {
    /// Small grid used by `demo`: one linear forecaster, one window, two
    /// repetitions on a 40-epochs-per-class toy recording.
    pub fn demo() -> Self {
        let mut c = PipelineConfig::default();
        c.toy.epochs_per_class = 40;
        c.experiment.forecasters = vec![ForecasterChoice::new(Architecture::LinearDms)];
        c.experiment.windows = vec![100];
        c.experiment.seeds = 2;
        c
    }

    /// Reads and validates a config file. Relative input paths are resolved
    /// against the file's directory and must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(p) = p.as_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        resolve(&mut config.paths.eeg_input);
        resolve(&mut config.paths.emg_input);
        resolve(&mut config.paths.workdir);
        resolve(&mut config.paths.reports);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.labeling.validate()?;
        if !(self.epoch_seconds > 0.0) {
            return Err(Error::Config("epoch_seconds must be positive".into()));
        }
        self.experiment.validate()?;
        for p in [&self.paths.eeg_input, &self.paths.emg_input].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::Config(format!("input {} does not exist", p.display())));
            }
        }
        if self.paths.emg_input.is_some() && self.paths.eeg_input.is_none() {
            return Err(Error::Config("emg_input given without eeg_input".into()));
        }
        Ok(())
    }

    pub fn workdir(&self) -> PathBuf {
        self.paths.workdir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_WORKDIR))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.paths.reports.clone().unwrap_or_else(|| self.workdir().join("reports"))
    }

    /// SHA-256 (first 16 hex digits) of the canonical JSON form with
    /// `paths` removed, so moving a workdir keeps artifacts valid.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Some(m) = v.as_object_mut() {
            m.remove("paths");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        hex::encode(&digest[..8])
    }

    /// Copy suitable for storing inside the workdir: output paths dropped
    /// (the workdir is wherever the file sits) and input paths absolute.
    pub fn for_workdir(&self) -> Self {
        let mut c = self.clone();
        c.paths.workdir = None;
        c.paths.reports = None;
        for p in [&mut c.paths.eeg_input, &mut c.paths.emg_input].into_iter().flatten() {
            if let Ok(abs) = std::fs::canonicalize(&*p) {
                *p = abs;
            }
        }
        c
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_recipe() {
        let c = PipelineConfig::default();
        let e = &c.experiment;
        assert_eq!(e.forecaster_training.batch_size, 32);
        assert_eq!(e.forecaster_training.max_steps, 1000);
        assert_eq!(e.horizon, 500);
        assert_eq!((c.experiment.stft.window_len, c.experiment.stft.hop), (128, 64));
        assert_eq!(e.classifier_training.learning_rate, 1e-4);
        assert_eq!(e.seeds, 5);
        assert_eq!(e.windows, vec![10, 25, 50, 100, 250]);
        c.validate().unwrap();
    }

    #[test]
    fn empty_document_is_default_and_round_trips() {
        let c: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, PipelineConfig::default());
        let back: PipelineConfig = serde_json::from_str(&c.to_pretty_json()).unwrap();
        assert_eq!(back, c);
        let demo = PipelineConfig::demo();
        let back: PipelineConfig = serde_json::from_str(&demo.to_pretty_json()).unwrap();
        assert_eq!(back, demo);
    }

    #[test]
    fn hash_ignores_paths_only() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.paths.workdir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.experiment.base_seed = 7;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn load_errors_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.json");
        assert!(matches!(PipelineConfig::load(&missing), Err(Error::Config(_))));
        let bad = dir.path().join("bad.json");
        fs::write(&bad, "{ not json").unwrap();
        assert!(matches!(PipelineConfig::load(&bad), Err(Error::Config(_))));
        let dangling = dir.path().join("dangling.json");
        fs::write(&dangling, r#"{"paths": {"eeg_input": "missing.f32"}}"#).unwrap();
        assert!(matches!(PipelineConfig::load(&dangling), Err(Error::Config(_))));
        let ok = dir.path().join("ok.json");
        fs::write(&ok, r#"{"seeds": 2, "paths": {"workdir": "w"}}"#).unwrap();
        let c = PipelineConfig::load(&ok).unwrap();
        assert_eq!(c.experiment.seeds, 2);
        assert_eq!(c.workdir(), dir.path().join("w"));
    }
}
