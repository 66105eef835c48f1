//! On-disk dataset cache: `manifest.json` + `beats.bin`.
//!
//! The manifest records everything that parameterized preprocessing (scheme,
//! window sizes, channel, seed) plus per-class counts; it deliberately holds
//! no timestamps so identical inputs produce byte-identical caches. The
//! binary file holds, per sample and little-endian: the label as u16, the
//! two meta floats, then `IMAGE_SIZE`² pixel floats row-major.

use super::{BeatImage, ClassScheme, PreprocessConfig, PreprocessError, IMAGE_PIXELS, IMAGE_SIZE};
use serde::{Deserialize, Serialize};
use std::io::{BufWriter, Write};
use std::path::Path;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BEATS_FILE: &str = "beats.bin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub name: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheManifest {
    pub scheme: ClassScheme,
    pub delta_n: usize,
    pub smoothing_window: usize,
    pub channel: usize,
    pub image_size: usize,
    /// Split seed the dataset is meant to be used with.
    pub seed: u64,
    pub total: usize,
    /// Per-class sample counts in class-index order.
    pub counts: Vec<ClassCount>,
}

impl CacheManifest {
    pub fn new(config: &PreprocessConfig, seed: u64, items: &[BeatImage]) -> CacheManifest {
        let names = config.scheme.class_names();
        let mut counts = vec![0usize; names.len()];
        for item in items {
            counts[item.label as usize] += 1;
        }
        CacheManifest {
            scheme: config.scheme,
            delta_n: config.delta_n,
            smoothing_window: config.smoothing_window,
            channel: config.channel,
            image_size: IMAGE_SIZE,
            seed,
            total: items.len(),
            counts: names
                .iter()
                .zip(counts)
                .map(|(&name, count)| ClassCount { name: name.to_string(), count })
                .collect(),
        }
    }
}

const SAMPLE_BYTES: usize = 2 + 2 * 4 + IMAGE_PIXELS * 4;

/// Writes `manifest.json` and `beats.bin` into `dir` (created if missing).
pub fn save_dataset(
    dir: &Path,
    manifest: &CacheManifest,
    items: &[BeatImage],
) -> Result<(), PreprocessError> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| PreprocessError::BadCache(e.to_string()))?;
    std::fs::write(dir.join(MANIFEST_FILE), json + "\n")?;

    let file = std::fs::File::create(dir.join(BEATS_FILE))?;
    let mut out = BufWriter::new(file);
    for item in items {
        out.write_all(&item.label.to_le_bytes())?;
        for &m in &item.meta_vector {
            out.write_all(&m.to_le_bytes())?;
        }
        for &p in &item.pixels {
            out.write_all(&p.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a cache directory back; validates sizes and label ranges.
pub fn load_dataset(dir: &Path) -> Result<(CacheManifest, Vec<BeatImage>), PreprocessError> {
    let json = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: CacheManifest = serde_json::from_str(&json)
        .map_err(|e| PreprocessError::BadCache(format!("manifest: {e}")))?;
    if manifest.image_size != IMAGE_SIZE {
        return Err(PreprocessError::BadCache(format!(
            "cache image size {} does not match the expected {IMAGE_SIZE}",
            manifest.image_size
        )));
    }
    let bytes = std::fs::read(dir.join(BEATS_FILE))?;
    if bytes.len() != manifest.total * SAMPLE_BYTES {
        return Err(PreprocessError::BadCache(format!(
            "beats file holds {} bytes, manifest wants {}",
            bytes.len(),
            manifest.total * SAMPLE_BYTES
        )));
    }
    let num_classes = manifest.scheme.num_classes() as u16;
    let mut items = Vec::with_capacity(manifest.total);
    for chunk in bytes.chunks_exact(SAMPLE_BYTES) {
        let label = u16::from_le_bytes([chunk[0], chunk[1]]);
        if label >= num_classes {
            return Err(PreprocessError::BadCache(format!(
                "label {label} outside scheme {}",
                manifest.scheme.name()
            )));
        }
        let f32_at =
            |o: usize| f32::from_le_bytes([chunk[o], chunk[o + 1], chunk[o + 2], chunk[o + 3]]);
        let meta_vector = [f32_at(2), f32_at(6)];
        let pixels = (0..IMAGE_PIXELS).map(|i| f32_at(10 + 4 * i)).collect();
        items.push(BeatImage { pixels, label, meta_vector });
    }
    Ok((manifest, items))
}
