//! Binary model container.
//!
//! Layout (little-endian): 8-byte magic, `u32` version, `u64` metadata length, metadata JSON,
//! raw `f64` parameter payload in metadata order, `u8` optimizer flag optionally followed by a
//! `u64` Adam step and the two moment payloads, then a SHA-256 digest of every preceding byte.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::linear::INPUTS;
use super::{LinearModel, Model, ModelError, ModelSpec, Predictor, LINEAR_NAME};
use crate::ingest::{Normalizer, WindowSample};
use crate::ndkernel::{ParamStore, Tensor};
use crate::train::AdamState;

pub const MAGIC: &[u8; 8] = b"HRSEQMDL";
pub const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

/// A trained predictor of either family.
#[derive(Debug, Clone)]
pub enum SavedModel {
    Network(Model),
    Linear(LinearModel),
}

impl SavedModel {
    pub fn count_params(&self) -> usize {
        match self {
            SavedModel::Network(m) => m.count_params(),
            SavedModel::Linear(m) => m.weights.len() + 1,
        }
    }

    fn store(&self) -> Result<ParamStore, ModelError> {
        match self {
            SavedModel::Network(m) => Ok(m.params().clone()),
            SavedModel::Linear(m) => {
                let mut store = ParamStore::new();
                store.insert("lr.w", Tensor::new(vec![1, m.weights.len()], m.weights.clone())?)?;
                store.insert("lr.b", Tensor::scalar(m.intercept))?;
                Ok(store)
            }
        }
    }
}

impl Predictor for SavedModel {
    fn name(&self) -> &str {
        match self {
            SavedModel::Network(m) => m.name(),
            SavedModel::Linear(m) => m.name(),
        }
    }

    fn predict(&self, samples: &[WindowSample]) -> Result<Vec<f64>, ModelError> {
        match self {
            SavedModel::Network(m) => m.predict(samples),
            SavedModel::Linear(m) => m.predict(samples),
        }
    }
}

/// Everything stored in one model file.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub model: SavedModel,
    /// Statistics to apply to raw samples before prediction.
    pub normalizer: Option<Normalizer>,
    /// Free-form provenance, e.g. the effective run configuration.
    pub info: serde_json::Value,
    /// Present in training checkpoints only.
    pub adam: Option<AdamState>,
}

impl ModelFile {
    pub fn new(model: SavedModel) -> Self {
        Self {
            model,
            normalizer: None,
            info: serde_json::Value::Null,
            adam: None,
        }
    }

    /// Normalizes raw samples (when a normalizer is stored) and predicts.
    pub fn predict_raw(&self, samples: &[WindowSample]) -> Result<Vec<f64>, ModelError> {
        match &self.normalizer {
            Some(n) => self.model.predict(&n.apply(samples)),
            None => self.model.predict(samples),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    Network,
    Linear,
}

#[derive(Debug, Serialize, Deserialize)]
struct ParamMeta {
    name: String,
    shape: Vec<usize>,
    trainable: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    kind: Kind,
    name: String,
    spec: Option<ModelSpec>,
    params: Vec<ParamMeta>,
    normalizer: Option<Normalizer>,
    info: serde_json::Value,
}

fn put_payload<'a>(out: &mut Vec<u8>, tensors: impl IntoIterator<Item = &'a Tensor>) {
    for t in tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

/// Serializes `file` into container bytes.
pub fn write_model(file: &ModelFile) -> Result<Vec<u8>, ModelError> {
    let store = file.model.store()?;
    let (kind, spec) = match &file.model {
        SavedModel::Network(m) => (Kind::Network, Some(m.spec().clone())),
        SavedModel::Linear(_) => (Kind::Linear, None),
    };
    let meta = Meta {
        kind,
        name: file.model.name().to_string(),
        spec,
        params: store
            .iter()
            .map(|p| ParamMeta {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
                trainable: p.trainable,
            })
            .collect(),
        normalizer: file.normalizer.clone(),
        info: file.info.clone(),
    };
    let meta_bytes = serde_json::to_vec(&meta)?;

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(meta_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta_bytes);
    put_payload(&mut out, store.iter().map(|p| &p.value));
    match &file.adam {
        None => out.push(0),
        Some(adam) => {
            if adam.m.len() != store.len() || adam.v.len() != store.len() {
                return Err(ModelError::ParamLayout("Adam state does not mirror the parameters".into()));
            }
            out.push(1);
            out.extend_from_slice(&adam.t.to_le_bytes());
            put_payload(&mut out, &adam.m);
            put_payload(&mut out, &adam.v);
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub fn save_model(path: &Path, file: &ModelFile) -> Result<(), ModelError> {
    std::fs::write(path, write_model(file)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile, ModelError> {
    read_model(&std::fs::read(path)?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| ModelError::Format("unexpected end of data".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn tensor(&mut self, shape: &[usize]) -> Result<Tensor, ModelError> {
        let n: usize = shape.iter().product();
        let raw = self.take(n.checked_mul(8).ok_or_else(|| ModelError::Format("shape overflow".into()))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Tensor::new(shape.to_vec(), data)?)
    }
}

pub fn read_model(bytes: &[u8]) -> Result<ModelFile, ModelError> {
    let head = MAGIC.len() + 4;
    if !bytes.starts_with(&MAGIC[..bytes.len().min(MAGIC.len())]) || bytes.is_empty() {
        return Err(ModelError::Format("bad magic bytes".into()));
    }
    if bytes.len() < head + DIGEST_LEN {
        return Err(ModelError::Checksum);
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(ModelError::Checksum);
    }
    let version = u32::from_le_bytes(body[MAGIC.len()..head].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(ModelError::Version {
            found: version,
            expected: VERSION,
        });
    }
    let mut cur = Cursor { bytes: body, pos: head };
    let meta_len = usize::try_from(cur.u64()?).map_err(|_| ModelError::Format("metadata too long".into()))?;
    let meta: Meta = serde_json::from_slice(cur.take(meta_len)?)?;

    let mut store = ParamStore::new();
    let mut shapes = Vec::with_capacity(meta.params.len());
    for p in &meta.params {
        let t = cur.tensor(&p.shape)?;
        if p.trainable {
            store.insert(p.name.clone(), t)?;
        } else {
            store.insert_frozen(p.name.clone(), t)?;
        }
        shapes.push(p.shape.clone());
    }
    let adam = match cur.take(1)?[0] {
        0 => None,
        1 => {
            let t = cur.u64()?;
            let m = shapes.iter().map(|s| cur.tensor(s)).collect::<Result<_, _>>()?;
            let v = shapes.iter().map(|s| cur.tensor(s)).collect::<Result<_, _>>()?;
            Some(AdamState { t, m, v })
        }
        other => return Err(ModelError::Format(format!("bad optimizer flag {other}"))),
    };
    if cur.pos != body.len() {
        return Err(ModelError::Format("trailing bytes after payload".into()));
    }

    let model = match meta.kind {
        Kind::Network => {
            let spec = meta
                .spec
                .ok_or_else(|| ModelError::Format("network file without a spec".into()))?;
            SavedModel::Network(Model::from_parts(&spec, store)?)
        }
        Kind::Linear => {
            if meta.name != LINEAR_NAME || store.len() != 2 || store.iter().next().map(|p| p.value.len()) != Some(INPUTS) {
                return Err(ModelError::ParamLayout("linear model must hold 105 weights and an intercept".into()));
            }
            let mut it = store.iter();
            let w = it.next().expect("checked").value.data().to_vec();
            let b = it.next().expect("checked").value.data()[0];
            SavedModel::Linear(LinearModel {
                weights: w,
                intercept: b,
            })
        }
    };
    Ok(ModelFile {
        model,
        normalizer: meta.normalizer,
        info: meta.info,
        adam,
    })
}
