//! Assembles forward passes on a [`Tape`].
//!
//! A [`Graph`] leafs every registry entry once (in registry order) and then
//! offers the network stages as composable methods. Training, inference,
//! prediction, and saliency all build through the same code, differing only
//! in [`Mode`] and in whether the image enters as a constant or a
//! differentiable variable.

use super::{FusionKind, ModelError, ModelParams};
use crate::rng::Rng;
use crate::tensor::{NodeId, Real, Tape, Tensor, TensorError};
use crate::tensor::tape::Gradients;

/// Dropout behaviour: active in `Train`, identity in `Infer`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Post-ReLU activations of the two stem branches plus their concatenation.
pub struct StemOut {
    pub branch3: NodeId,
    pub branch5: NodeId,
    pub merged: NodeId,
}

/// Node handles for everything the callers inspect.
pub struct ForwardOut {
    pub f_img: NodeId,
    pub f_pat: NodeId,
    pub fused: NodeId,
    pub logits: NodeId,
    pub probabilities: NodeId,
}

pub struct Graph<'a, F: Real> {
    tape: Tape<'a, F>,
    params: &'a ModelParams<F>,
    ids: Vec<NodeId>,
    mode: Mode,
}

impl<'a, F: Real> Graph<'a, F> {
    pub fn new(params: &'a ModelParams<F>, mode: Mode) -> Graph<'a, F> {
        let mut tape = Tape::new();
        let ids =
            params.entries().iter().map(|e| tape.leaf(&e.tensor, e.trainable)).collect();
        Graph { tape, params, ids, mode }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Node of the registry entry `name`.
    pub fn param(&self, name: &str) -> NodeId {
        let i = self
            .params
            .index_of(name)
            .unwrap_or_else(|| panic!("no parameter named {name}"));
        self.ids[i]
    }

    /// Nodes of all registry entries, in registry order.
    pub fn param_ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn value(&self, id: NodeId) -> &Tensor<F> {
        self.tape.value(id)
    }

    /// The underlying tape, for callers that compose extra nodes on top of
    /// the network stages (linear probes, logit selection).
    pub fn tape_mut(&mut self) -> &mut Tape<'a, F> {
        &mut self.tape
    }

    /// Enters an input tensor that never receives a gradient.
    pub fn input(&mut self, t: Tensor<F>) -> NodeId {
        self.tape.constant(t)
    }

    /// Enters an input tensor that does receive a gradient (saliency).
    pub fn input_variable(&mut self, t: Tensor<F>) -> NodeId {
        self.tape.variable(t)
    }

    fn expect_shape(&self, op: &'static str, id: NodeId, want: &[usize]) -> Result<(), ModelError> {
        let got = self.tape.value(id).shape();
        if got != want {
            return Err(TensorError::ShapeMismatch {
                op,
                left: got.to_vec(),
                right: want.to_vec(),
            }
            .into());
        }
        Ok(())
    }

    /// Dual-branch stem: 3×3/s2 and 5×5/s2 "same" convolutions, each
    /// ReLU-activated, channel-concatenated.
    pub fn stem(&mut self, image: NodeId) -> Result<StemOut, ModelError> {
        let s = self.params.config().image_size;
        self.expect_shape("stem", image, &[s, s, 1])?;
        let c3 = self.tape.conv2d(
            image,
            self.param("stem.conv3.weight"),
            self.param("stem.conv3.bias"),
            2,
        )?;
        let branch3 = self.tape.relu(c3);
        let c5 = self.tape.conv2d(
            image,
            self.param("stem.conv5.weight"),
            self.param("stem.conv5.bias"),
            2,
        )?;
        let branch5 = self.tape.relu(c5);
        let merged = self.tape.concat(branch3, branch5, 2)?;
        Ok(StemOut { branch3, branch5, merged })
    }

    /// Stem plus the depthwise-separable stack, pooled and flattened to the
    /// image embedding.
    pub fn trunk(&mut self, image: NodeId, rng: &mut Rng) -> Result<NodeId, ModelError> {
        let config = self.params.config();
        let blocks = config.trunk.len();
        let dropout_after = config.trunk_dropout_after;
        let trunk_dropout = config.trunk_dropout;
        let mut cur = self.stem(image)?.merged;
        for i in 1..=blocks {
            let dw = self.tape.depthwise_conv2d(
                cur,
                self.param(&format!("block{i}.dw.weight")),
                self.params.config().trunk[i - 1].stride,
            )?;
            let pw = self.tape.pointwise_conv(
                dw,
                self.param(&format!("block{i}.pw.weight")),
                self.param(&format!("block{i}.pw.bias")),
            )?;
            cur = self.tape.relu(pw);
            if i == dropout_after && self.mode == Mode::Train {
                cur = self.tape.dropout(cur, trunk_dropout, rng)?;
            }
        }
        let pooled = self.tape.max_pool2d(cur, 2)?;
        let flat = self.tape.value(pooled).len();
        Ok(self.tape.reshape(pooled, vec![flat])?)
    }

    /// Metadata branch: the raw pair concatenated with a ReLU dense
    /// expansion of itself, so the head keeps lossless access to the inputs.
    pub fn meta(&mut self, meta: NodeId) -> Result<NodeId, ModelError> {
        self.expect_shape("meta", meta, &[2])?;
        let hidden = self.tape.dense(
            meta,
            self.param("meta.dense.weight"),
            self.param("meta.dense.bias"),
        )?;
        let hidden = self.tape.relu(hidden);
        Ok(self.tape.concat(meta, hidden, 0)?)
    }

    /// Attention fusion: both embeddings are projected into a shared latent
    /// space; each projection is gated elementwise by the softmax attention
    /// vector of the *other* modality, and a dense layer fuses the pair.
    pub fn sacc(&mut self, f_img: NodeId, f_pat: NodeId) -> Result<NodeId, ModelError> {
        let zi = self.tape.dense(
            f_img,
            self.param("sacc.img_proj.weight"),
            self.param("sacc.img_proj.bias"),
        )?;
        let z_img = self.tape.relu(zi);
        let zp = self.tape.dense(
            f_pat,
            self.param("sacc.pat_proj.weight"),
            self.param("sacc.pat_proj.bias"),
        )?;
        let z_pat = self.tape.relu(zp);
        let a_img = self.tape.softmax(self.param("sacc.attention.alpha_img"))?;
        let a_pat = self.tape.softmax(self.param("sacc.attention.alpha_pat"))?;
        let m_img = self.tape.hadamard(a_pat, z_img)?;
        let m_pat = self.tape.hadamard(a_img, z_pat)?;
        let cat = self.tape.concat(m_img, m_pat, 0)?;
        let fused = self.tape.dense(
            cat,
            self.param("sacc.fuse.weight"),
            self.param("sacc.fuse.bias"),
        )?;
        Ok(self.tape.relu(fused))
    }

    /// Fuses the two embeddings according to the configured fusion kind.
    pub fn fuse(&mut self, f_img: NodeId, f_pat: NodeId) -> Result<NodeId, ModelError> {
        match self.params.config().fusion {
            FusionKind::Concat => Ok(self.tape.concat(f_img, f_pat, 0)?),
            FusionKind::Sacc => self.sacc(f_img, f_pat),
            FusionKind::Cca => {
                if self.params.get("fusion.cca.state").data()[0] == F::zero() {
                    return Err(ModelError::NotFitted);
                }
                let vx = self.cca_project(f_img, "fusion.cca.x_mean", "fusion.cca.x_proj")?;
                let vy = self.cca_project(f_pat, "fusion.cca.y_mean", "fusion.cca.y_proj")?;
                Ok(self.tape.concat(vx, vy, 0)?)
            }
        }
    }

    /// `(x - mean) · proj` as a dense layer with a precomputed bias
    /// `-mean · proj`; gradients flow into `x` but not into the fitted
    /// projection.
    fn cca_project(
        &mut self,
        x: NodeId,
        mean_name: &str,
        proj_name: &str,
    ) -> Result<NodeId, ModelError> {
        let mean = self.params.get(mean_name).data();
        let proj = self.params.get(proj_name);
        let k = proj.shape()[1];
        let mut bias = vec![F::zero(); k];
        for (i, &m) in mean.iter().enumerate() {
            for (j, b) in bias.iter_mut().enumerate() {
                *b -= m * proj.data()[i * k + j];
            }
        }
        let bias = self.tape.constant(Tensor::new(vec![k], bias)?);
        let proj = self.param(proj_name);
        Ok(self.tape.dense(x, proj, bias)?)
    }

    /// Classifier head: hidden dense+ReLU layers, dropout before the output
    /// layer, softmax probabilities. Returns `(logits, probabilities)`.
    pub fn head(
        &mut self,
        fused: NodeId,
        rng: &mut Rng,
    ) -> Result<(NodeId, NodeId), ModelError> {
        let config = self.params.config();
        let hidden_layers = config.head_dims.len();
        let head_dropout = config.head_dropout;
        let mut cur = fused;
        for i in 1..=hidden_layers {
            let d = self.tape.dense(
                cur,
                self.param(&format!("head.fc{i}.weight")),
                self.param(&format!("head.fc{i}.bias")),
            )?;
            cur = self.tape.relu(d);
        }
        if self.mode == Mode::Train {
            cur = self.tape.dropout(cur, head_dropout, rng)?;
        }
        let logits =
            self.tape.dense(cur, self.param("head.out.weight"), self.param("head.out.bias"))?;
        let probabilities = self.tape.softmax(logits)?;
        Ok((logits, probabilities))
    }

    /// Full composition from raw inputs to class probabilities.
    pub fn forward(
        &mut self,
        image: NodeId,
        meta: NodeId,
        rng: &mut Rng,
    ) -> Result<ForwardOut, ModelError> {
        let f_img = self.trunk(image, rng)?;
        let f_pat = self.meta(meta)?;
        let fused = self.fuse(f_img, f_pat)?;
        let (logits, probabilities) = self.head(fused, rng)?;
        Ok(ForwardOut { f_img, f_pat, fused, logits, probabilities })
    }

    /// Negative log-likelihood of `target` under the probability node.
    pub fn nll_loss(&mut self, probabilities: NodeId, target: usize) -> Result<NodeId, ModelError> {
        Ok(self.tape.nll_loss(probabilities, target)?)
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, root: NodeId) -> Result<Gradients<F>, ModelError> {
        Ok(self.tape.backward(root)?)
    }
}
