//! Checkpoint serialization.
//!
//! Layout: the 5-byte magic `RECG2`, a little-endian u32 format version, a
//! little-endian u64 metadata length, the UTF-8 JSON metadata (training and
//! model configuration, class names, and the registry manifest), then every
//! registry entry as raw little-endian f32 values in manifest order. The
//! manifest is validated against the registry derived from the stored model
//! configuration, so shape or naming drift is caught before any array is
//! accepted.

use super::{TrainConfig, TrainError};
use crate::model::{ManifestEntry, ModelConfig, ModelParams};
use crate::preprocess::ClassScheme;
use crate::rng::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MAGIC: &[u8; 5] = b"RECG2";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    train_config: TrainConfig,
    model_config: ModelConfig,
    class_names: Vec<String>,
    manifest: Vec<ManifestEntry>,
}

pub fn save_checkpoint(
    params: &ModelParams<f32>,
    config: &TrainConfig,
    path: &Path,
) -> Result<(), TrainError> {
    let meta = CheckpointMeta {
        train_config: config.clone(),
        model_config: params.config().clone(),
        class_names: params
            .config()
            .scheme
            .class_names()
            .iter()
            .map(|s| s.to_string())
            .collect(),
        manifest: params.manifest(),
    };
    let json = serde_json::to_vec(&meta).map_err(|e| TrainError::Corrupt(e.to_string()))?;
    let arrays: usize = params.entries().iter().map(|e| 4 * e.tensor.len()).sum();
    let mut out = Vec::with_capacity(MAGIC.len() + 12 + json.len() + arrays);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for entry in params.entries() {
        for &v in entry.tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(std::fs::write(path, out)?)
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams<f32>, TrainConfig), TrainError> {
    let bytes = std::fs::read(path)?;
    let take = |offset: usize, len: usize| -> Result<&[u8], TrainError> {
        bytes
            .get(offset..offset + len)
            .ok_or_else(|| TrainError::Corrupt(format!("file ends inside field at byte {offset}")))
    };

    if take(0, MAGIC.len())? != MAGIC {
        return Err(TrainError::VersionMismatch("bad magic; not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(take(5, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(TrainError::VersionMismatch(format!(
            "format version {version}, expected {VERSION}"
        )));
    }
    let meta_len = u64::from_le_bytes(take(9, 8)?.try_into().unwrap()) as usize;
    let meta: CheckpointMeta = serde_json::from_slice(take(17, meta_len)?)
        .map_err(|e| TrainError::Corrupt(format!("metadata: {e}")))?;

    let mut params = ModelParams::<f32>::build(&meta.model_config, &mut Rng::new(0))?;
    let derived = params.manifest();
    if derived != meta.manifest {
        return Err(TrainError::RegistryMismatch(format!(
            "stored manifest ({} entries) does not match the model configuration ({} entries)",
            meta.manifest.len(),
            derived.len()
        )));
    }

    let mut offset = 17 + meta_len;
    for entry in params.entries_mut() {
        let raw = take(offset, 4 * entry.tensor.len())?;
        offset += raw.len();
        for (v, chunk) in entry.tensor.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    if offset != bytes.len() {
        return Err(TrainError::Corrupt(format!(
            "{} trailing bytes after the parameter arrays",
            bytes.len() - offset
        )));
    }
    Ok((params, meta.train_config))
}

/// Guards artifact combinations: a checkpoint only evaluates against data
/// preprocessed under the same labeling scheme.
pub fn ensure_scheme(params: &ModelParams<f32>, scheme: ClassScheme) -> Result<(), TrainError> {
    if params.config().scheme != scheme {
        return Err(TrainError::RegistryMismatch(format!(
            "checkpoint was trained for scheme {}, data uses {}",
            params.config().scheme.name(),
            scheme.name()
        )));
    }
    Ok(())
}
