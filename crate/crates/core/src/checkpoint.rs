//! Binary model checkpoints.
//!
//! Layout: 8-byte magic, `u32` format version, `u32` header length, a TOML
//! header describing the architecture, then every parameter tensor in
//! declared order as little-endian `f64`.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::RidgeModel;
use crate::nn::{McMrConvModel, ModelSpec};
use crate::pipeline::{FittedModel, ModelKind};

pub const MAGIC: &[u8; 8] = b"DGRAPHCK";
pub const FORMAT_VERSION: u32 = 1;
pub const FLATTEN_ORDER: &str = "row-major";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub kind: ModelKind,
    /// Order in which conv feature maps are flattened before the dense
    /// layers.
    pub flatten_order: String,
    /// Hash of the statistics file the inputs were normalized with.
    #[serde(default)]
    pub stats_sha256: Option<String>,
    pub val_mse: f64,
    #[serde(default)]
    pub l2: Option<f64>,
    pub tensor_names: Vec<String>,
    pub tensor_lengths: Vec<usize>,
    #[serde(default)]
    pub spec: Option<ModelSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelParams {
    Net(McMrConvModel),
    Ridge(RidgeModel),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn from_fitted(fitted: &FittedModel, stats_sha256: Option<String>) -> Self {
        let (params, l2) = match fitted {
            FittedModel::Net { outcome, .. } => (ModelParams::Net(outcome.model.clone()), None),
            FittedModel::Ridge { model, .. } => (ModelParams::Ridge(model.clone()), Some(model.l2)),
        };
        let (tensor_names, tensor_lengths, spec) = match &params {
            ModelParams::Net(m) => (
                m.tensor_names(),
                m.tensors().iter().map(|(_, t)| t.len()).collect(),
                Some(m.spec().clone()),
            ),
            ModelParams::Ridge(r) => {
                let p = r.weights.len();
                (ridge_names(), vec![p, p, p, 1], None)
            }
        };
        Self {
            header: CheckpointHeader {
                kind: fitted.kind(),
                flatten_order: FLATTEN_ORDER.into(),
                stats_sha256,
                val_mse: fitted.val_mse(),
                l2,
                tensor_names,
                tensor_lengths,
                spec,
            },
            params,
        }
    }

    pub fn predict_many(&self, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        match &self.params {
            ModelParams::Net(m) => m.predict_many(inputs),
            ModelParams::Ridge(r) => r.predict_many(inputs),
        }
    }

    pub fn input_len(&self) -> usize {
        match &self.params {
            ModelParams::Net(m) => m.input_len(),
            ModelParams::Ridge(r) => r.weights.len(),
        }
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let header = toml::to_string(&self.header).map_err(|e| Error::Config(format!("cannot encode checkpoint header: {e}")))?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(header.as_bytes())?;
        let mut put = |t: &[f64]| -> Result<()> {
            for v in t {
                w.write_all(&v.to_le_bytes())?;
            }
            Ok(())
        };
        match &self.params {
            ModelParams::Net(m) => {
                for (_, t) in m.tensors() {
                    put(t)?;
                }
            }
            ModelParams::Ridge(r) => {
                put(&r.weights)?;
                put(&r.means)?;
                put(&r.sds)?;
                put(&[r.intercept])?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R, path: &Path) -> Result<Self> {
        let bad = |message: String| Error::Format { path: path.to_path_buf(), message };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated magic".into()))?;
        if &magic != MAGIC {
            return Err(bad("not a model checkpoint".into()));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word).map_err(|_| bad("truncated version".into()))?;
        let version = u32::from_le_bytes(word);
        if version != FORMAT_VERSION {
            return Err(bad(format!("unsupported checkpoint version {version}")));
        }
        r.read_exact(&mut word).map_err(|_| bad("truncated header length".into()))?;
        let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
        r.read_exact(&mut header).map_err(|_| bad("truncated header".into()))?;
        let header = String::from_utf8(header).map_err(|_| bad("header is not UTF-8".into()))?;
        let header: CheckpointHeader = toml::from_str(&header).map_err(|e| bad(format!("bad header: {e}")))?;
        if header.flatten_order != FLATTEN_ORDER {
            return Err(bad(format!("unsupported flatten order {:?}", header.flatten_order)));
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        let total: usize = header.tensor_lengths.iter().sum();
        if rest.len() != total * 8 {
            return Err(bad(format!("expected {} parameter bytes, found {}", total * 8, rest.len())));
        }
        let values: Vec<f64> = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let mut tensors = Vec::with_capacity(header.tensor_lengths.len());
        let mut at = 0;
        for &len in &header.tensor_lengths {
            tensors.push(&values[at..at + len]);
            at += len;
        }
        let params = match (&header.spec, header.kind.spec(1, 1)) {
            (Some(spec), Some(_)) => {
                let mut model = McMrConvModel::zeros(spec.clone())?;
                let names = model.tensor_names();
                if names != header.tensor_names {
                    return Err(bad("tensor layout does not match the architecture".into()));
                }
                for ((_, dst), src) in model.tensors_mut().into_iter().zip(&tensors) {
                    if dst.len() != src.len() {
                        return Err(bad("tensor length does not match the architecture".into()));
                    }
                    dst.copy_from_slice(src);
                }
                ModelParams::Net(model)
            }
            (None, None) => {
                let p = header.tensor_lengths.first().copied().unwrap_or(0);
                if header.tensor_names != ridge_names() || header.tensor_lengths != [p, p, p, 1] {
                    return Err(bad("bad ridge tensor layout".into()));
                }
                let l2 = header.l2.ok_or_else(|| bad("ridge checkpoint without l2".into()))?;
                ModelParams::Ridge(RidgeModel {
                    weights: tensors[0].to_vec(),
                    means: tensors[1].to_vec(),
                    sds: tensors[2].to_vec(),
                    intercept: tensors[3][0],
                    l2,
                })
            }
            _ => return Err(bad(format!("architecture does not fit model kind {}", header.kind.name()))),
        };
        Ok(Self { header, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::read(bytes.as_slice(), path)
    }
}

fn ridge_names() -> Vec<String> {
    ["weights", "means", "sds", "intercept"].map(String::from).to_vec()
}
