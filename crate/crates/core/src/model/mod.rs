//! The classifier network: dual-path convolutional stem, depthwise-separable
//! trunk, patient-metadata branch, one of three fusion layers, and a dense
//! head.
//!
//! Parameters live in a flat, ordered registry ([`ModelParams`]); the
//! registry order is the checkpoint serialization order and the
//! initialization draw order, which is what makes builds and checkpoints
//! reproducible. Forward passes are assembled on a [`Tape`](crate::tensor::Tape)
//! by [`forward::Graph`], so the same code path serves training, inference,
//! and saliency.

pub mod budget;
pub mod cca;
pub mod forward;

pub use budget::{count_flops, FlopsReport, LayerCost};
pub use cca::{cca_fit, cca_transform, CcaPairs};
pub use forward::{Graph, Mode};

use crate::preprocess::ClassScheme;
use crate::rng::Rng;
use crate::tensor::{kernels, Real, Tensor, TensorError};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    BadConfig(String),
    #[error("covariance matrix is singular; refit with a positive ridge")]
    SingularCovariance,
    #[error("the CCA fusion projections have not been fitted yet")]
    NotFitted,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// How the trunk embedding and the metadata embedding are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionKind {
    /// Plain concatenation; the head sees `d1 + d2` features.
    Concat,
    /// Classical canonical-correlation projections, refit from data between
    /// epochs; the head sees the `2·min(d1, d2)` canonical variates.
    Cca,
    /// Learned projections into a shared latent space, cross-modulated by
    /// softmax attention vectors and fused by a dense layer.
    Sacc,
}

impl FusionKind {
    pub fn parse(s: &str) -> Option<FusionKind> {
        match s {
            "concat" => Some(FusionKind::Concat),
            "cca" => Some(FusionKind::Cca),
            "sacc" => Some(FusionKind::Sacc),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FusionKind::Concat => "concat",
            FusionKind::Cca => "cca",
            FusionKind::Sacc => "sacc",
        }
    }
}

/// One depthwise-separable trunk block: depthwise 3×3 (stride `stride`),
/// then a pointwise channel change to `out_channels`, then ReLU.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub out_channels: usize,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub scheme: ClassScheme,
    pub fusion: FusionKind,
    /// Input images are `image_size`×`image_size`, one channel.
    pub image_size: usize,
    /// Filters per stem branch; the branches concatenate to twice this.
    pub stem_filters: usize,
    pub trunk: Vec<BlockSpec>,
    /// Dropout rate applied after `trunk_dropout_after` blocks (training only).
    pub trunk_dropout: f64,
    pub trunk_dropout_after: usize,
    /// Dropout rate before the final dense layer of the head.
    pub head_dropout: f64,
    /// Hidden width of the metadata branch; its output is `2 + meta_hidden`.
    pub meta_hidden: usize,
    /// Latent width of the attention fusion.
    pub latent_dim: usize,
    /// Hidden widths of the classifier head (the output layer is implied).
    pub head_dims: Vec<usize>,
}

impl ModelConfig {
    /// The default network: ~445k parameters, 128×128 input.
    pub fn small(scheme: ClassScheme, fusion: FusionKind) -> ModelConfig {
        ModelConfig {
            scheme,
            fusion,
            image_size: 128,
            stem_filters: 32,
            trunk: vec![
                BlockSpec { out_channels: 64, stride: 1 },
                BlockSpec { out_channels: 128, stride: 2 },
                BlockSpec { out_channels: 128, stride: 2 },
                BlockSpec { out_channels: 256, stride: 2 },
                BlockSpec { out_channels: 256, stride: 2 },
                BlockSpec { out_channels: 256, stride: 2 },
            ],
            trunk_dropout: 0.25,
            trunk_dropout_after: 3,
            head_dropout: 0.1,
            meta_hidden: 8,
            latent_dim: 256,
            head_dims: vec![128, 64],
        }
    }

    /// Wider variant: 512-feature latent space and a wider head.
    pub fn medium(scheme: ClassScheme, fusion: FusionKind) -> ModelConfig {
        let mut config = ModelConfig::small(scheme, fusion);
        config.latent_dim = 512;
        config.head_dims = vec![256, 128];
        config
    }

    /// A structurally complete but tiny network (16×16 input) for gradient
    /// checks and fast tests.
    pub fn tiny(scheme: ClassScheme, fusion: FusionKind) -> ModelConfig {
        ModelConfig {
            scheme,
            fusion,
            image_size: 16,
            stem_filters: 3,
            trunk: vec![
                BlockSpec { out_channels: 6, stride: 1 },
                BlockSpec { out_channels: 8, stride: 2 },
            ],
            trunk_dropout: 0.25,
            trunk_dropout_after: 1,
            head_dropout: 0.1,
            meta_hidden: 8,
            latent_dim: 12,
            head_dims: vec![10, 8],
        }
    }

    /// Stage-by-stage feature-map shapes; errors if any stage degenerates.
    pub fn stages(&self) -> Result<StagePlan, ModelError> {
        if self.trunk.is_empty() {
            return Err(ModelError::BadConfig("trunk has no blocks".into()));
        }
        if self.head_dims.is_empty() {
            return Err(ModelError::BadConfig("head has no hidden layers".into()));
        }
        if self.stem_filters == 0 || self.latent_dim == 0 || self.meta_hidden == 0 {
            return Err(ModelError::BadConfig("zero-width layer".into()));
        }
        if self.trunk_dropout_after > self.trunk.len() {
            return Err(ModelError::BadConfig(format!(
                "dropout after block {} but the trunk has {}",
                self.trunk_dropout_after,
                self.trunk.len()
            )));
        }
        let bad = |e: TensorError| ModelError::BadConfig(e.to_string());
        let stem =
            kernels::conv_geometry(self.image_size, self.image_size, 1, 3, self.stem_filters, 2)
                .map_err(bad)?;
        let stem_out = [stem.out_h, stem.out_w, 2 * self.stem_filters];
        let mut cur = stem_out;
        let mut block_out = Vec::with_capacity(self.trunk.len());
        for spec in &self.trunk {
            let g = kernels::conv_geometry(cur[0], cur[1], cur[2], 3, cur[2], spec.stride)
                .map_err(bad)?;
            cur = [g.out_h, g.out_w, spec.out_channels];
            block_out.push(cur);
        }
        if cur[0] % 2 != 0 || cur[1] % 2 != 0 {
            return Err(ModelError::BadConfig(format!(
                "final feature map {}x{} is not poolable by 2",
                cur[0], cur[1]
            )));
        }
        let pooled = [cur[0] / 2, cur[1] / 2, cur[2]];
        Ok(StagePlan { stem_out, block_out, pooled })
    }

    /// Length of the flattened trunk embedding (`d1`).
    pub fn image_embedding_dim(&self) -> Result<usize, ModelError> {
        let s = self.stages()?.pooled;
        Ok(s[0] * s[1] * s[2])
    }

    /// Length of the metadata embedding (`d2`): raw pair + hidden units.
    pub fn meta_embedding_dim(&self) -> usize {
        2 + self.meta_hidden
    }

    /// Width of the fused vector the head consumes.
    pub fn fused_dim(&self) -> Result<usize, ModelError> {
        let d1 = self.image_embedding_dim()?;
        let d2 = self.meta_embedding_dim();
        Ok(match self.fusion {
            FusionKind::Concat => d1 + d2,
            FusionKind::Cca => 2 * d1.min(d2),
            FusionKind::Sacc => self.latent_dim,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.scheme.num_classes()
    }
}

/// Feature-map shapes at each trunk stage, `[height, width, channels]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StagePlan {
    pub stem_out: [usize; 3],
    pub block_out: Vec<[usize; 3]>,
    pub pooled: [usize; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Init {
    /// Uniform in ±sqrt(6 / fan_in).
    HeUniform { fan_in: usize },
    Zero,
}

struct EntrySpec {
    name: String,
    shape: Vec<usize>,
    trainable: bool,
    init: Init,
}

fn weight(spec: &mut Vec<EntrySpec>, name: &str, shape: Vec<usize>, fan_in: usize) {
    spec.push(EntrySpec {
        name: name.to_string(),
        shape,
        trainable: true,
        init: Init::HeUniform { fan_in },
    });
}

fn zero(spec: &mut Vec<EntrySpec>, name: &str, shape: Vec<usize>, trainable: bool) {
    spec.push(EntrySpec { name: name.to_string(), shape, trainable, init: Init::Zero });
}

fn registry_spec(config: &ModelConfig) -> Result<Vec<EntrySpec>, ModelError> {
    let mut s = Vec::new();

    let f = config.stem_filters;
    weight(&mut s, "stem.conv3.weight", vec![3, 3, 1, f], 9);
    zero(&mut s, "stem.conv3.bias", vec![f], true);
    weight(&mut s, "stem.conv5.weight", vec![5, 5, 1, f], 25);
    zero(&mut s, "stem.conv5.bias", vec![f], true);

    let mut c_in = 2 * f;
    for (i, block) in config.trunk.iter().enumerate() {
        let tag = i + 1;
        weight(&mut s, &format!("block{tag}.dw.weight"), vec![3, 3, c_in], 9);
        weight(&mut s, &format!("block{tag}.pw.weight"), vec![c_in, block.out_channels], c_in);
        zero(&mut s, &format!("block{tag}.pw.bias"), vec![block.out_channels], true);
        c_in = block.out_channels;
    }

    weight(&mut s, "meta.dense.weight", vec![2, config.meta_hidden], 2);
    zero(&mut s, "meta.dense.bias", vec![config.meta_hidden], true);

    let d1 = config.image_embedding_dim()?;
    let d2 = config.meta_embedding_dim();
    let n = config.latent_dim;
    match config.fusion {
        FusionKind::Concat => {}
        FusionKind::Sacc => {
            weight(&mut s, "sacc.img_proj.weight", vec![d1, n], d1);
            zero(&mut s, "sacc.img_proj.bias", vec![n], true);
            weight(&mut s, "sacc.pat_proj.weight", vec![d2, n], d2);
            zero(&mut s, "sacc.pat_proj.bias", vec![n], true);
            zero(&mut s, "sacc.attention.alpha_img", vec![n], true);
            zero(&mut s, "sacc.attention.alpha_pat", vec![n], true);
            weight(&mut s, "sacc.fuse.weight", vec![2 * n, n], 2 * n);
            zero(&mut s, "sacc.fuse.bias", vec![n], true);
        }
        FusionKind::Cca => {
            let k = d1.min(d2);
            zero(&mut s, "fusion.cca.state", vec![1], false);
            zero(&mut s, "fusion.cca.x_mean", vec![d1], false);
            zero(&mut s, "fusion.cca.y_mean", vec![d2], false);
            zero(&mut s, "fusion.cca.x_proj", vec![d1, k], false);
            zero(&mut s, "fusion.cca.y_proj", vec![d2, k], false);
        }
    }

    let mut in_dim = config.fused_dim()?;
    for (i, &width) in config.head_dims.iter().enumerate() {
        let tag = i + 1;
        weight(&mut s, &format!("head.fc{tag}.weight"), vec![in_dim, width], in_dim);
        zero(&mut s, &format!("head.fc{tag}.bias"), vec![width], true);
        in_dim = width;
    }
    weight(&mut s, "head.out.weight", vec![in_dim, config.num_classes()], in_dim);
    zero(&mut s, "head.out.bias", vec![config.num_classes()], true);
    Ok(s)
}

/// One named tensor in the parameter registry.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry<F> {
    pub name: String,
    pub tensor: Tensor<F>,
    pub trainable: bool,
}

/// Shape-and-name summary of one registry entry (checkpoint metadata).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

/// All parameters of one network, in a stable, ordered registry.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<F: Real> {
    config: ModelConfig,
    entries: Vec<ParamEntry<F>>,
}

impl<F: Real> ModelParams<F> {
    /// Fresh parameters: weights He-uniform (drawn in registry order from
    /// `rng`), biases and attention vectors zero.
    pub fn build(config: &ModelConfig, rng: &mut Rng) -> Result<ModelParams<F>, ModelError> {
        config.stages()?; // validate early
        let entries = registry_spec(config)?
            .into_iter()
            .map(|e| {
                let tensor = match e.init {
                    Init::Zero => Tensor::zeros(e.shape),
                    Init::HeUniform { fan_in } => {
                        let bound = (6.0 / fan_in as f64).sqrt();
                        Tensor::from_fn(e.shape, |_| F::from_f64(rng.uniform(-bound, bound)))
                    }
                };
                ParamEntry { name: e.name, tensor, trainable: e.trainable }
            })
            .collect();
        Ok(ModelParams { config: config.clone(), entries })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn entries(&self) -> &[ParamEntry<F>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry<F>] {
        &mut self.entries
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn get(&self, name: &str) -> &Tensor<F> {
        let i = self.index_of(name).unwrap_or_else(|| panic!("no parameter named {name}"));
        &self.entries[i].tensor
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor<F> {
        let i = self.index_of(name).unwrap_or_else(|| panic!("no parameter named {name}"));
        &mut self.entries[i].tensor
    }

    /// Name/shape/trainability of every entry, in registry order.
    pub fn manifest(&self) -> Vec<ManifestEntry> {
        self.entries
            .iter()
            .map(|e| ManifestEntry {
                name: e.name.clone(),
                shape: e.tensor.shape().to_vec(),
                trainable: e.trainable,
            })
            .collect()
    }

    /// Total trainable scalar count (weights and biases; fitted CCA
    /// projections are constants and excluded).
    pub fn count_params(&self) -> usize {
        self.entries.iter().filter(|e| e.trainable).map(|e| e.tensor.len()).sum()
    }

    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        ModelParams {
            config: self.config.clone(),
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    tensor: e.tensor.cast(),
                    trainable: e.trainable,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_deterministic_and_ordered() {
        let config = ModelConfig::small(ClassScheme::Mitbih10, FusionKind::Sacc);
        let a = ModelParams::<f32>::build(&config, &mut Rng::new(7)).unwrap();
        let b = ModelParams::<f32>::build(&config, &mut Rng::new(7)).unwrap();
        assert_eq!(a, b);
        let names: Vec<_> = a.entries().iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names[0], "stem.conv3.weight");
        assert_eq!(names[names.len() - 1], "head.out.bias");
        assert!(names.contains(&"sacc.attention.alpha_img"));
        let c = ModelParams::<f32>::build(&config, &mut Rng::new(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn biases_and_alphas_start_at_zero_weights_bounded() {
        let config = ModelConfig::small(ClassScheme::Mitbih10, FusionKind::Sacc);
        let params = ModelParams::<f64>::build(&config, &mut Rng::new(0)).unwrap();
        for entry in params.entries() {
            if entry.name.ends_with(".bias") || entry.name.contains(".alpha_") {
                assert!(entry.tensor.data().iter().all(|&v| v == 0.0), "{}", entry.name);
            } else {
                let bound = match entry.name.as_str() {
                    "stem.conv3.weight" => (6.0f64 / 9.0).sqrt(),
                    "stem.conv5.weight" => (6.0f64 / 25.0).sqrt(),
                    _ => f64::INFINITY,
                };
                assert!(
                    entry.tensor.data().iter().all(|&v| v.abs() <= bound),
                    "{} exceeds its init bound",
                    entry.name
                );
                assert!(entry.tensor.data().iter().any(|&v| v != 0.0), "{}", entry.name);
            }
        }
    }

    #[test]
    fn stage_shapes_match_the_design_table() {
        let config = ModelConfig::small(ClassScheme::Mitbih10, FusionKind::Sacc);
        let stages = config.stages().unwrap();
        assert_eq!(stages.stem_out, [64, 64, 64]);
        assert_eq!(
            stages.block_out,
            vec![
                [64, 64, 64],
                [32, 32, 128],
                [16, 16, 128],
                [8, 8, 256],
                [4, 4, 256],
                [2, 2, 256],
            ]
        );
        assert_eq!(stages.pooled, [1, 1, 256]);
        assert_eq!(config.image_embedding_dim().unwrap(), 256);
        assert_eq!(config.meta_embedding_dim(), 10);
    }

    #[test]
    fn fused_dim_depends_on_the_fusion_kind() {
        let sacc = ModelConfig::small(ClassScheme::Mitbih10, FusionKind::Sacc);
        let concat = ModelConfig::small(ClassScheme::Mitbih10, FusionKind::Concat);
        let cca = ModelConfig::small(ClassScheme::Mitbih10, FusionKind::Cca);
        assert_eq!(sacc.fused_dim().unwrap(), 256);
        assert_eq!(concat.fused_dim().unwrap(), 266);
        assert_eq!(cca.fused_dim().unwrap(), 20);
    }

    #[test]
    fn cca_entries_are_untrainable_and_uncounted() {
        let concat = ModelConfig::small(ClassScheme::Mitbih10, FusionKind::Concat);
        let cca = ModelConfig::small(ClassScheme::Mitbih10, FusionKind::Cca);
        let mut rng = Rng::new(1);
        let p_concat = ModelParams::<f32>::build(&concat, &mut rng).unwrap();
        let p_cca = ModelParams::<f32>::build(&cca, &mut Rng::new(1)).unwrap();
        assert!(p_cca.entries().iter().any(|e| !e.trainable));
        // Trainable-count difference is exactly the head.fc1 resize
        // (266→128 with bias vs 20→128 with bias).
        let diff = p_concat.count_params() - p_cca.count_params();
        assert_eq!(diff, (266 - 20) * 128);
    }

    #[test]
    fn degenerate_configs_are_rejected() {
        let mut config = ModelConfig::tiny(ClassScheme::Aami, FusionKind::Concat);
        config.trunk.clear();
        assert!(matches!(config.stages(), Err(ModelError::BadConfig(_))));

        let mut config = ModelConfig::tiny(ClassScheme::Aami, FusionKind::Concat);
        config.trunk = vec![BlockSpec { out_channels: 8, stride: 2 }; 6];
        // 16 → stem 8 → 4,2,1,1,… the 1×1 map is not poolable.
        assert!(matches!(config.stages(), Err(ModelError::BadConfig(_))));

        let mut config = ModelConfig::tiny(ClassScheme::Aami, FusionKind::Concat);
        config.trunk_dropout_after = 9;
        assert!(matches!(config.stages(), Err(ModelError::BadConfig(_))));
    }

    #[test]
    fn medium_variant_widens_the_latent_space() {
        let config = ModelConfig::medium(ClassScheme::Mitbih10, FusionKind::Sacc);
        assert_eq!(config.latent_dim, 512);
        assert_eq!(config.fused_dim().unwrap(), 512);
        let params = ModelParams::<f32>::build(&config, &mut Rng::new(3)).unwrap();
        assert_eq!(params.get("head.fc1.weight").shape(), &[512, 256]);
    }
}
