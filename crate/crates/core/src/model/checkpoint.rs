//! Self-describing checkpoint container: a JSON header with the full model
//! config and variant, followed by named f64 tensors.
//!
//! Layout (little-endian): magic `SQKT`, u32 version, u64 header length,
//! header JSON, u64 tensor count, then per tensor `u32 name_len`, name,
//! `u32 rows`, `u32 cols`, and `rows*cols` f64 values.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::encoders::{EncoderBackend, FrozenCache};
use crate::nn::ParamStore;

use super::{ModelConfig, ModelError, SqktModel, Variant};

const MAGIC: &[u8; 4] = b"SQKT";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    config: ModelConfig,
    variant: Variant,
    backend: BackendKind,
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BackendKind {
    Trainable,
    Frozen,
}

pub fn save_checkpoint(model: &SqktModel, path: &Path) -> Result<(), ModelError> {
    let header = CheckpointHeader {
        config: model.cfg.clone(),
        variant: model.variant.clone(),
        backend: match model.backend {
            EncoderBackend::Trainable => BackendKind::Trainable,
            EncoderBackend::Frozen(_) => BackendKind::Frozen,
        },
        seed: model.store.seed(),
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&VERSION.to_le_bytes())?;
    file.write_all(&(header_json.len() as u64).to_le_bytes())?;
    file.write_all(&header_json)?;
    let tensors: Vec<_> = model.store.tensors().collect();
    file.write_all(&(tensors.len() as u64).to_le_bytes())?;
    for (name, tensor) in tensors {
        let name_bytes = name.as_bytes();
        file.write_all(&(name_bytes.len() as u32).to_le_bytes())?;
        file.write_all(name_bytes)?;
        file.write_all(&(tensor.nrows() as u32).to_le_bytes())?;
        file.write_all(&(tensor.ncols() as u32).to_le_bytes())?;
        for &v in tensor.iter() {
            file.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_checkpoint(
    path: &Path,
    frozen_cache: Option<FrozenCache>,
) -> Result<SqktModel, ModelError> {
    let mut file = std::fs::File::open(path)?;
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ModelError::Checkpoint("bad magic".into()));
    }
    let mut u32buf = [0u8; 4];
    file.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(ModelError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    let mut u64buf = [0u8; 8];
    file.read_exact(&mut u64buf)?;
    let header_len = u64::from_le_bytes(u64buf) as usize;
    let mut header_json = vec![0u8; header_len];
    file.read_exact(&mut header_json)?;
    let header: CheckpointHeader = serde_json::from_slice(&header_json)
        .map_err(|e| ModelError::Checkpoint(format!("bad header: {e}")))?;

    let backend = match header.backend {
        BackendKind::Trainable => EncoderBackend::Trainable,
        BackendKind::Frozen => EncoderBackend::Frozen(frozen_cache.ok_or_else(|| {
            ModelError::Checkpoint(
                "checkpoint uses a frozen backend; a sidecar cache is required".into(),
            )
        })?),
    };
    let mut model = SqktModel::new(header.config, header.variant, backend, header.seed)?;

    file.read_exact(&mut u64buf)?;
    let count = u64::from_le_bytes(u64buf);
    let mut store = ParamStore::new(header.seed);
    for _ in 0..count {
        file.read_exact(&mut u32buf)?;
        let name_len = u32::from_le_bytes(u32buf) as usize;
        let mut name_bytes = vec![0u8; name_len];
        file.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|e| ModelError::Checkpoint(format!("bad tensor name: {e}")))?;
        file.read_exact(&mut u32buf)?;
        let rows = u32::from_le_bytes(u32buf) as usize;
        file.read_exact(&mut u32buf)?;
        let cols = u32::from_le_bytes(u32buf) as usize;
        let mut raw = vec![0u8; rows * cols * 8];
        file.read_exact(&mut raw)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect();
        let tensor = Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        store.set(&name, tensor);
    }
    model.store = store;
    Ok(model)
}
