//! On-disk analysis artifacts: PGM maps, embedding CSVs and the raw-vector
//! sidecar.

use super::{pca2, EvalError};
use crate::model::{Graph, Mode, ModelParams};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};
use crate::train::Sample;
use std::io::Write;
use std::path::Path;

/// Writes a `[height, width]` map with values in [0, 1] as a binary
/// portable graymap (P5, maxval 255). Values outside [0, 1] are clamped.
pub fn write_pgm<F: Real>(path: &Path, map: &Tensor<F>) -> Result<(), EvalError> {
    let shape = map.shape();
    if shape.len() != 2 {
        return Err(EvalError::BadInput(format!("PGM wants a 2-D map, got {shape:?}")));
    }
    let (height, width) = (shape[0], shape[1]);
    let mut out = Vec::with_capacity(20 + map.len());
    write!(out, "P5\n{width} {height}\n255\n")?;
    for &v in map.data() {
        out.push((v.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    Ok(std::fs::write(path, out)?)
}

/// `label,pc1,pc2` rows, one per sample.
pub fn embeddings_csv(labels: &[String], coordinates: &[[f64; 2]]) -> String {
    let mut out = String::from("label,pc1,pc2\n");
    for (label, c) in labels.iter().zip(coordinates) {
        out.push_str(&format!("{label},{},{}\n", c[0], c[1]));
    }
    out
}

pub fn write_embeddings_csv(
    path: &Path,
    labels: &[String],
    coordinates: &[[f64; 2]],
) -> Result<(), EvalError> {
    if labels.len() != coordinates.len() {
        return Err(EvalError::LengthMismatch(labels.len(), coordinates.len()));
    }
    Ok(std::fs::write(path, embeddings_csv(labels, coordinates))?)
}

/// Raw per-sample vectors: little-endian `u32 n`, `u32 d`, then `n·d` f32
/// values row-major.
pub fn write_vector_sidecar(path: &Path, vectors: &[Vec<f32>]) -> Result<(), EvalError> {
    let d = vectors.first().map_or(0, |v| v.len());
    if let Some(row) = vectors.iter().find(|v| v.len() != d) {
        return Err(EvalError::BadInput(format!(
            "ragged vectors: expected {d}, found {}",
            row.len()
        )));
    }
    let mut out = Vec::with_capacity(8 + 4 * vectors.len() * d);
    out.extend_from_slice(&(vectors.len() as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for row in vectors {
        for &v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(std::fs::write(path, out)?)
}

/// Per-sample embeddings plus their 2-D PCA projection (computed from the
/// post-fusion vectors).
#[derive(Clone, Debug)]
pub struct EmbeddingDump {
    pub labels: Vec<usize>,
    /// Image and metadata embeddings, concatenated, before fusion.
    pub pre_fusion: Vec<Vec<f32>>,
    /// Fused vectors (the classifier head's input).
    pub post_fusion: Vec<Vec<f32>>,
    pub coordinates: Vec<[f64; 2]>,
    pub eigenvalues: [f64; 2],
}

/// Runs the model over `samples` (inference mode) and collects both
/// embeddings plus PCA coordinates of the fused vectors.
pub fn embed(params: &ModelParams<f32>, samples: &[Sample]) -> Result<EmbeddingDump, EvalError> {
    if samples.len() < 2 {
        return Err(EvalError::BadInput(format!(
            "embedding dump needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let mut rng = Rng::new(0); // inference consumes no randomness
    let mut labels = Vec::with_capacity(samples.len());
    let mut pre_fusion = Vec::with_capacity(samples.len());
    let mut post_fusion = Vec::with_capacity(samples.len());
    for sample in samples {
        let mut g = Graph::new(params, Mode::Infer);
        let img = g.input(sample.image.clone());
        let meta = g.input(sample.meta.clone());
        let out = g.forward(img, meta, &mut rng)?;
        let mut pre = g.value(out.f_img).data().to_vec();
        pre.extend_from_slice(g.value(out.f_pat).data());
        pre_fusion.push(pre);
        post_fusion.push(g.value(out.fused).data().to_vec());
        labels.push(sample.label);
    }
    let rows: Vec<Vec<f64>> =
        post_fusion.iter().map(|v| v.iter().map(|&x| x as f64).collect()).collect();
    let p = pca2(&rows)?;
    Ok(EmbeddingDump {
        labels,
        pre_fusion,
        post_fusion,
        coordinates: p.coordinates,
        eigenvalues: p.eigenvalues,
    })
}
