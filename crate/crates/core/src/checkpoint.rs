//! Model checkpoints: parameters as raw little-endian f64 in `<name>.bin`,
//! described by a JSON header in `<name>.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{ClassifierSpec, TrainedClassifier};
use crate::error::{Error, Result};
use crate::forecast::{ForecasterModel, ForecasterSpec, Layout};
use crate::io::{require_file, write_atomic};
use crate::signal::ClassLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader<M> {
    pub kind: String,
    pub config_hash: String,
    pub dtype: String,
    pub param_count: usize,
    /// SHA-256 of the `.bin` file.
    pub sha256: String,
    pub train_seed: u64,
    pub blocks: Vec<BlockInfo>,
    pub loss_curve: Vec<f64>,
    pub model: M,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterInfo {
    pub spec: ForecasterSpec,
    pub class: ClassLabel,
}

const DTYPE: &str = "f64-le";

pub fn header_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

fn blocks(layout: &Layout) -> Vec<BlockInfo> {
    layout
        .blocks
        .iter()
        .map(|b| BlockInfo { name: b.name.clone(), shape: b.shape.clone(), offset: b.offset })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn save<M: Serialize>(
    bin: &Path,
    kind: &str,
    params: &[f64],
    layout: &Layout,
    train_seed: u64,
    loss_curve: &[f64],
    model: M,
    config_hash: &str,
) -> Result<()> {
    let bytes: Vec<u8> = params.iter().flat_map(|p| p.to_le_bytes()).collect();
    let header = CheckpointHeader {
        kind: kind.into(),
        config_hash: config_hash.into(),
        dtype: DTYPE.into(),
        param_count: params.len(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        train_seed,
        blocks: blocks(layout),
        loss_curve: loss_curve.to_vec(),
        model,
    };
    let mut json = serde_json::to_vec_pretty(&header)?;
    json.push(b'\n');
    write_atomic(bin, &bytes)?;
    write_atomic(&header_path(bin), &json)
}

/// Reads the header alone, e.g. to check its config hash.
pub fn read_header<M: DeserializeOwned>(bin: &Path) -> Result<CheckpointHeader<M>> {
    let hp = header_path(bin);
    require_file(&hp)?;
    let text = fs::read(&hp).map_err(|e| Error::io(&hp, e))?;
    Ok(serde_json::from_slice(&text)?)
}

fn load<M: DeserializeOwned>(bin: &Path, kind: &str) -> Result<(CheckpointHeader<M>, Vec<f64>)> {
    require_file(bin)?;
    let header: CheckpointHeader<M> = read_header(bin)?;
    if header.kind != kind || header.dtype != DTYPE {
        return Err(Error::invalid(format!(
            "{} holds a {} {} checkpoint, expected {kind} {DTYPE}",
            bin.display(),
            header.kind,
            header.dtype
        )));
    }
    let bytes = fs::read(bin).map_err(|e| Error::io(bin, e))?;
    if hex::encode(Sha256::digest(&bytes)) != header.sha256 {
        return Err(Error::invalid(format!("{} does not match its header checksum", bin.display())));
    }
    if bytes.len() != header.param_count * 8 {
        return Err(Error::shape(
            format!("{} parameters", header.param_count),
            format!("{} bytes", bytes.len()),
        ));
    }
    let params = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((header, params))
}

pub fn save_forecaster(model: &ForecasterModel, bin: &Path, config_hash: &str) -> Result<()> {
    save(
        bin,
        "forecaster",
        &model.params,
        &model.spec.layout(),
        model.train_seed,
        &model.loss_curve,
        ForecasterInfo { spec: model.spec, class: model.class },
        config_hash,
    )
}

/// Returns the model and the config hash it was trained under.
pub fn load_forecaster(bin: &Path) -> Result<(ForecasterModel, String)> {
    let (h, params) = load::<ForecasterInfo>(bin, "forecaster")?;
    h.model.spec.validate()?;
    if params.len() != h.model.spec.param_count() {
        return Err(Error::shape(format!("{} parameters", h.model.spec.param_count()), format!("{}", params.len())));
    }
    Ok((
        ForecasterModel {
            spec: h.model.spec,
            class: h.model.class,
            train_seed: h.train_seed,
            params,
            loss_curve: h.loss_curve,
        },
        h.config_hash,
    ))
}

pub fn save_classifier(model: &TrainedClassifier, bin: &Path, config_hash: &str) -> Result<()> {
    save(
        bin,
        "classifier",
        &model.params,
        &model.spec.layout(),
        model.train_seed,
        &model.loss_curve,
        model.spec.clone(),
        config_hash,
    )
}

pub fn load_classifier(bin: &Path) -> Result<(TrainedClassifier, String)> {
    let (h, params) = load::<ClassifierSpec>(bin, "classifier")?;
    h.model.validate()?;
    if params.len() != h.model.param_count() {
        return Err(Error::shape(format!("{} parameters", h.model.param_count()), format!("{}", params.len())));
    }
    Ok((
        TrainedClassifier { spec: h.model, params, train_seed: h.train_seed, loss_curve: h.loss_curve },
        h.config_hash,
    ))
}
