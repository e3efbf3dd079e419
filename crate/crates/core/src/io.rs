//! File formats: NDJSON epoch datasets, raw recordings with a JSON sidecar,
//! artifact metadata sidecars and crash-consistent writes.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ClassLabel, Dataset, LabeledEpoch, Provenance, Signal};

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingArtifact(path.to_owned()))
    }
}

/// One line of the dataset NDJSON format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub subject_id: String,
    pub epoch_index: u64,
    pub label: ClassLabel,
    pub sample_rate: u32,
    pub samples: Vec<f64>,
    pub provenance: Provenance,
}

impl From<&LabeledEpoch> for EpochRecord {
    fn from(e: &LabeledEpoch) -> Self {
        EpochRecord {
            subject_id: e.subject_id.clone(),
            epoch_index: e.epoch_index,
            label: e.label,
            sample_rate: e.signal.sample_rate(),
            samples: e.signal.samples().to_vec(),
            provenance: e.provenance.clone(),
        }
    }
}

impl TryFrom<EpochRecord> for LabeledEpoch {
    type Error = Error;
    fn try_from(r: EpochRecord) -> Result<Self> {
        Ok(LabeledEpoch {
            signal: Signal::new(r.samples, r.sample_rate)?,
            label: r.label,
            subject_id: r.subject_id,
            epoch_index: r.epoch_index,
            provenance: r.provenance,
        })
    }
}

pub fn dataset_to_ndjson(dataset: &Dataset) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for e in dataset.epochs() {
        serde_json::to_writer(&mut out, &EpochRecord::from(e))?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, &dataset_to_ndjson(dataset)?)
}

/// Reads an NDJSON dataset. Blank lines are skipped; every record must have
/// the same sample rate and epoch length.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_owned()),
        _ => Error::io(path, e),
    })?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let mut epochs = Vec::new();
    let mut epoch_len = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EpochRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?;
        let n = record.samples.len();
        if *epoch_len.get_or_insert(n) != n {
            return Err(parse_err(
                i + 1,
                format!("epoch has {n} samples, earlier epochs have {}", epoch_len.unwrap_or(0)),
            ));
        }
        let epoch = LabeledEpoch::try_from(record).map_err(|e| parse_err(i + 1, e.to_string()))?;
        epochs.push(epoch);
    }
    if epochs.is_empty() {
        log::warn!("{} contains no epochs", path.display());
    }
    Dataset::new(epochs)
}

/// Sidecar describing a raw recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingSidecar {
    pub sample_rate: u32,
    pub channel_names: Vec<String>,
    pub subject_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub sidecar: RecordingSidecar,
    pub channels: Vec<Signal>,
}

impl Recording {
    /// The channel whose name contains `name` (case-insensitive), or the only
    /// channel of a single-channel recording.
    pub fn channel(&self, name: &str) -> Result<&Signal> {
        if self.channels.len() == 1 {
            return Ok(&self.channels[0]);
        }
        let wanted = name.to_ascii_lowercase();
        self.sidecar
            .channel_names
            .iter()
            .position(|c| c.to_ascii_lowercase().contains(&wanted))
            .map(|i| &self.channels[i])
            .ok_or_else(|| {
                Error::invalid(format!(
                    "recording has no {name} channel (channels: {:?})",
                    self.sidecar.channel_names
                ))
            })
    }
}

/// `rec.f32` → `rec.json`.
pub fn sidecar_path(data: &Path) -> PathBuf {
    data.with_extension("json")
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads a raw recording: interleaved little-endian `f32` frames, or a
/// single-column CSV (an optional non-numeric header line is skipped).
pub fn read_recording(path: &Path) -> Result<Recording> {
    let side_path = sidecar_path(path);
    require_file(&side_path)?;
    require_file(path)?;
    let sidecar: RecordingSidecar = serde_json::from_slice(&fs::read(&side_path).map_err(|e| Error::io(&side_path, e))?)?;
    let n_ch = sidecar.channel_names.len();
    if n_ch == 0 {
        return Err(Error::invalid(format!("{} lists no channels", side_path.display())));
    }
    let columns: Vec<Vec<f64>> = if is_csv(path) {
        if n_ch != 1 {
            return Err(Error::invalid("CSV recordings hold exactly one channel"));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut samples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let field = line.split(',').next().unwrap_or("").trim();
            if field.is_empty() {
                continue;
            }
            match field.parse::<f64>() {
                Ok(v) => samples.push(v),
                Err(_) if i == 0 => continue,
                Err(e) => {
                    return Err(Error::Parse {
                        path: path.to_owned(),
                        line: i + 1,
                        message: e.to_string(),
                    })
                }
            }
        }
        vec![samples]
    } else {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let frame = 4 * n_ch;
        if bytes.len() % frame != 0 {
            return Err(Error::invalid(format!(
                "{}: {} bytes is not a whole number of {n_ch}-channel f32 frames",
                path.display(),
                bytes.len()
            )));
        }
        let mut cols = vec![Vec::with_capacity(bytes.len() / frame); n_ch];
        for (i, chunk) in bytes.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
            cols[i % n_ch].push(f64::from(v));
        }
        cols
    };
    let channels = columns
        .into_iter()
        .map(|c| Signal::new(c, sidecar.sample_rate))
        .collect::<Result<Vec<_>>>()?;
    Ok(Recording { sidecar, channels })
}

/// Writes a raw recording in the interleaved `f32` format (or CSV for a
/// single channel with a `.csv` path) plus its sidecar.
pub fn write_recording(path: &Path, recording: &Recording) -> Result<()> {
    let n = recording.channels.first().map_or(0, Signal::len);
    if recording.channels.len() != recording.sidecar.channel_names.len()
        || recording.channels.iter().any(|c| c.len() != n)
    {
        return Err(Error::invalid("channels and names disagree in count or length"));
    }
    let bytes = if is_csv(path) {
        if recording.channels.len() != 1 {
            return Err(Error::invalid("CSV recordings hold exactly one channel"));
        }
        let mut s = String::new();
        for v in recording.channels[0].samples() {
            s.push_str(&format!("{v}\n"));
        }
        s.into_bytes()
    } else {
        let mut b = Vec::with_capacity(n * recording.channels.len() * 4);
        for i in 0..n {
            for c in &recording.channels {
                b.extend_from_slice(&(c.samples()[i] as f32).to_le_bytes());
            }
        }
        b
    };
    write_atomic(path, &bytes)?;
    write_atomic(&sidecar_path(path), &serde_json::to_vec_pretty(&recording.sidecar)?)
}

/// Metadata stored next to artifacts that have no header of their own.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub kind: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn write_meta(path: &Path, meta: &ArtifactMeta) -> Result<()> {
    write_atomic(&meta_path(path), &serde_json::to_vec_pretty(meta)?)
}

pub fn read_meta(path: &Path) -> Result<ArtifactMeta> {
    let p = meta_path(path);
    require_file(&p)?;
    Ok(serde_json::from_slice(&fs::read(&p).map_err(|e| Error::io(&p, e))?)?)
}
