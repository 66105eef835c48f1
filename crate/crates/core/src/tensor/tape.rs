//! Reverse-mode differentiation tape.
//!
//! A [`Tape`] records a computation as a flat list of nodes in creation
//! order; creation order is already a topological order, so the backward pass
//! is a single reverse sweep. Leaves may borrow their tensors (model
//! parameters are shared by many tapes without copying) or own them
//! (activations).
//!
//! Gradients accumulate additively when a node feeds several consumers, and
//! a node's partials are only computed when it (transitively) depends on a
//! leaf built with `requires_grad` — the input image usually doesn't, so the
//! first convolution never computes an input gradient during training.

use super::kernels::{self, ConvGeom};
use super::{Real, Tensor, TensorError};
use crate::rng::Rng;

type Result<T> = std::result::Result<T, TensorError>;

/// Probabilities are clamped to at least this before the log in
/// [`Tape::nll_loss`]; below the clamp the gradient is defined as zero.
pub const PROB_CLAMP: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

enum Value<'a, F> {
    Borrowed(&'a Tensor<F>),
    Owned(Tensor<F>),
}

impl<F> Value<'_, F> {
    fn get(&self) -> &Tensor<F> {
        match self {
            Value::Borrowed(t) => t,
            Value::Owned(t) => t,
        }
    }
}

enum Op<F> {
    Leaf,
    Conv2d { x: NodeId, w: NodeId, b: NodeId, geom: ConvGeom },
    Depthwise { x: NodeId, w: NodeId, geom: ConvGeom },
    Pointwise { x: NodeId, w: NodeId, b: NodeId, pixels: usize, c_in: usize },
    Dense { x: NodeId, w: NodeId, b: NodeId },
    Relu { x: NodeId },
    Softmax { x: NodeId },
    MaxPool { x: NodeId, argmax: Vec<u32> },
    Hadamard { a: NodeId, b: NodeId },
    Concat { a: NodeId, b: NodeId, axis: usize },
    Slice { x: NodeId, start: usize },
    Dropout { x: NodeId, mask: Vec<F> },
    Reshape { x: NodeId },
    Sum { x: NodeId },
    Select { x: NodeId, index: usize },
    NllLoss { probs: NodeId, target: usize },
}

struct Node<'a, F> {
    value: Value<'a, F>,
    op: Op<F>,
    requires_grad: bool,
}

/// Gradient of some scalar root with respect to every node that needed one,
/// indexed by [`NodeId`].
pub struct Gradients<F> {
    by_node: Vec<Option<Vec<F>>>,
}

impl<F: Real> Gradients<F> {
    /// Gradient buffer for `id`, if that node participated in the backward
    /// pass. Leaves created without `requires_grad` return `None`.
    pub fn get(&self, id: NodeId) -> Option<&[F]> {
        self.by_node[id.0].as_deref()
    }

    pub fn take(&mut self, id: NodeId) -> Option<Vec<F>> {
        self.by_node[id.0].take()
    }
}

pub struct Tape<'a, F: Real> {
    nodes: Vec<Node<'a, F>>,
}

impl<'a, F: Real> Default for Tape<'a, F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a, F: Real> Tape<'a, F> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Tensor held by a node.
    pub fn value(&self, id: NodeId) -> &Tensor<F> {
        self.nodes[id.0].value.get()
    }

    /// Borrowing leaf; `requires_grad` marks it as a differentiation target.
    pub fn leaf(&mut self, t: &'a Tensor<F>, requires_grad: bool) -> NodeId {
        self.push(Value::Borrowed(t), Op::Leaf, requires_grad)
    }

    /// Owning leaf that never receives a gradient (inputs, constants).
    pub fn constant(&mut self, t: Tensor<F>) -> NodeId {
        self.push(Value::Owned(t), Op::Leaf, false)
    }

    /// Owning leaf that does receive a gradient (used by saliency, tests).
    pub fn variable(&mut self, t: Tensor<F>) -> NodeId {
        self.push(Value::Owned(t), Op::Leaf, true)
    }

    fn push(&mut self, value: Value<'a, F>, op: Op<F>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op, requires_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    fn rank3(&self, op: &'static str, x: NodeId) -> Result<[usize; 3]> {
        let s = self.value(x).shape();
        if s.len() != 3 {
            return Err(TensorError::invalid(op, format!("expected rank-3 input, got {s:?}")));
        }
        Ok([s[0], s[1], s[2]])
    }

    /// "Same"-padded square convolution: `x [H,W,Cin]`, `w [K,K,Cin,Cout]`,
    /// `b [Cout]`.
    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, stride: usize) -> Result<NodeId> {
        let [h, wd, c] = self.rank3("conv2d", x)?;
        let ws = self.value(w).shape().to_vec();
        let bs = self.value(b).shape().to_vec();
        if ws.len() != 4 || ws[0] != ws[1] || ws[2] != c {
            return Err(TensorError::ShapeMismatch { op: "conv2d", left: vec![h, wd, c], right: ws });
        }
        if bs != [ws[3]] {
            return Err(TensorError::ShapeMismatch { op: "conv2d", left: ws, right: bs });
        }
        let geom = kernels::conv_geometry(h, wd, c, ws[0], ws[3], stride)?;
        let mut out = Tensor::zeros(vec![geom.out_h, geom.out_w, geom.out_c]);
        kernels::conv2d_forward(
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
            &geom,
            out.data_mut(),
        );
        let rg = self.needs(&[x, w, b]);
        Ok(self.push(Value::Owned(out), Op::Conv2d { x, w, b, geom }, rg))
    }

    /// Depthwise convolution: `x [H,W,C]`, `w [K,K,C]`, no bias.
    pub fn depthwise_conv2d(&mut self, x: NodeId, w: NodeId, stride: usize) -> Result<NodeId> {
        let [h, wd, c] = self.rank3("depthwise_conv2d", x)?;
        let ws = self.value(w).shape().to_vec();
        if ws.len() != 3 || ws[0] != ws[1] || ws[2] != c {
            return Err(TensorError::ShapeMismatch {
                op: "depthwise_conv2d",
                left: vec![h, wd, c],
                right: ws,
            });
        }
        let geom = kernels::conv_geometry(h, wd, c, ws[0], c, stride)?;
        let mut out = Tensor::zeros(vec![geom.out_h, geom.out_w, c]);
        kernels::depthwise_forward(self.value(x).data(), self.value(w).data(), &geom, out.data_mut());
        let rg = self.needs(&[x, w]);
        Ok(self.push(Value::Owned(out), Op::Depthwise { x, w, geom }, rg))
    }

    /// 1×1 convolution: `x [H,W,Cin]`, `w [Cin,Cout]`, `b [Cout]`.
    pub fn pointwise_conv(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let [h, wd, c] = self.rank3("pointwise_conv", x)?;
        let ws = self.value(w).shape().to_vec();
        let bs = self.value(b).shape().to_vec();
        if ws.len() != 2 || ws[0] != c || bs != [ws[1]] {
            return Err(TensorError::ShapeMismatch {
                op: "pointwise_conv",
                left: vec![h, wd, c],
                right: ws,
            });
        }
        let pixels = h * wd;
        let mut out = Tensor::zeros(vec![h, wd, ws[1]]);
        kernels::pointwise_forward(
            self.value(x).data(),
            pixels,
            c,
            self.value(w).data(),
            self.value(b).data(),
            out.data_mut(),
        );
        let rg = self.needs(&[x, w, b]);
        Ok(self.push(Value::Owned(out), Op::Pointwise { x, w, b, pixels, c_in: c }, rg))
    }

    /// Fully connected: `x [In]`, `w [In,Out]`, `b [Out]`.
    pub fn dense(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        let bs = self.value(b).shape().to_vec();
        if xs.len() != 1 || ws.len() != 2 || ws[0] != xs[0] || bs != [ws[1]] {
            return Err(TensorError::ShapeMismatch { op: "dense", left: xs, right: ws });
        }
        let mut out = Tensor::zeros(vec![ws[1]]);
        kernels::dense_forward(
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
            out.data_mut(),
        );
        let rg = self.needs(&[x, w, b]);
        Ok(self.push(Value::Owned(out), Op::Dense { x, w, b }, rg))
    }

    /// Elementwise `max(0, x)`; the derivative at exactly 0 is 0.
    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let out = Tensor::from_fn(v.shape().to_vec(), |i| v.data()[i].max(F::zero()));
        let rg = self.needs(&[x]);
        self.push(Value::Owned(out), Op::Relu { x }, rg)
    }

    /// Softmax over a vector (max-subtracted for stability).
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x);
        if v.shape().len() != 1 {
            return Err(TensorError::invalid(
                "softmax",
                format!("expected rank-1 input, got {:?}", v.shape()),
            ));
        }
        let mut m = F::neg_infinity();
        for &e in v.data() {
            if e > m {
                m = e;
            }
        }
        let exps: Vec<F> = v.data().iter().map(|&e| (e - m).exp()).collect();
        let total: F = exps.iter().copied().sum();
        let out = Tensor::new(
            v.shape().to_vec(),
            exps.into_iter().map(|e| e / total).collect(),
        )?;
        let rg = self.needs(&[x]);
        Ok(self.push(Value::Owned(out), Op::Softmax { x }, rg))
    }

    /// Non-overlapping `pool`×`pool` max pooling.
    pub fn max_pool2d(&mut self, x: NodeId, pool: usize) -> Result<NodeId> {
        let [h, w, c] = self.rank3("max_pool2d", x)?;
        if pool == 0 || h % pool != 0 || w % pool != 0 {
            return Err(TensorError::invalid(
                "max_pool2d",
                format!("pool {pool} does not divide {h}x{w}"),
            ));
        }
        let (oh, ow) = (h / pool, w / pool);
        let mut out = Tensor::zeros(vec![oh, ow, c]);
        let mut argmax = vec![0u32; oh * ow * c];
        kernels::maxpool2d_forward(self.value(x).data(), h, w, c, pool, out.data_mut(), &mut argmax);
        let rg = self.needs(&[x]);
        Ok(self.push(Value::Owned(out), Op::MaxPool { x, argmax }, rg))
    }

    /// Elementwise product of two same-shape tensors.
    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "hadamard",
                left: va.shape().to_vec(),
                right: vb.shape().to_vec(),
            });
        }
        let out = Tensor::from_fn(va.shape().to_vec(), |i| va.data()[i] * vb.data()[i]);
        let rg = self.needs(&[a, b]);
        Ok(self.push(Value::Owned(out), Op::Hadamard { a, b }, rg))
    }

    /// Concatenation along `axis`; other dims must agree.
    pub fn concat(&mut self, a: NodeId, b: NodeId, axis: usize) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        let (sa, sb) = (va.shape(), vb.shape());
        let ok = sa.len() == sb.len()
            && axis < sa.len()
            && sa.iter().zip(sb).enumerate().all(|(i, (x, y))| i == axis || x == y);
        if !ok {
            return Err(TensorError::ShapeMismatch {
                op: "concat",
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        }
        let inner: usize = sa[axis + 1..].iter().product();
        let (block_a, block_b) = (sa[axis] * inner, sb[axis] * inner);
        let outer: usize = sa[..axis].iter().product();
        let mut shape = sa.to_vec();
        shape[axis] += sb[axis];
        let mut data = Vec::with_capacity(va.len() + vb.len());
        for o in 0..outer {
            data.extend_from_slice(&va.data()[o * block_a..][..block_a]);
            data.extend_from_slice(&vb.data()[o * block_b..][..block_b]);
        }
        let out = Tensor::new(shape, data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(Value::Owned(out), Op::Concat { a, b, axis }, rg))
    }

    /// Contiguous subrange of a vector.
    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let v = self.value(x);
        if v.shape().len() != 1 || start + len > v.len() {
            return Err(TensorError::invalid(
                "slice",
                format!("range {start}..{} out of {:?}", start + len, v.shape()),
            ));
        }
        let out = Tensor::new(vec![len], v.data()[start..start + len].to_vec())?;
        let rg = self.needs(&[x]);
        Ok(self.push(Value::Owned(out), Op::Slice { x, start }, rg))
    }

    /// Inverted dropout: each element is zeroed with probability `p`,
    /// survivors are scaled by `1/(1-p)`. One uniform draw per element, in
    /// flat order, so a given `rng` state fixes the mask exactly.
    pub fn dropout(&mut self, x: NodeId, p: f64, rng: &mut Rng) -> Result<NodeId> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::invalid("dropout", format!("rate {p} outside [0,1)")));
        }
        let v = self.value(x);
        let keep = F::from_f64(1.0 / (1.0 - p));
        let mask: Vec<F> = (0..v.len())
            .map(|_| if rng.next_f64() < p { F::zero() } else { keep })
            .collect();
        let out = Tensor::from_fn(v.shape().to_vec(), |i| v.data()[i] * mask[i]);
        let rg = self.needs(&[x]);
        Ok(self.push(Value::Owned(out), Op::Dropout { x, mask }, rg))
    }

    pub fn reshape(&mut self, x: NodeId, shape: impl Into<Vec<usize>>) -> Result<NodeId> {
        let out = self.value(x).clone().reshaped(shape)?;
        let rg = self.needs(&[x]);
        Ok(self.push(Value::Owned(out), Op::Reshape { x }, rg))
    }

    /// Sum of all elements, as a scalar node.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let total: F = self.value(x).data().iter().copied().sum();
        let rg = self.needs(&[x]);
        self.push(Value::Owned(Tensor::scalar(total)), Op::Sum { x }, rg)
    }

    /// One element of a vector, as a scalar node.
    pub fn select(&mut self, x: NodeId, index: usize) -> Result<NodeId> {
        let v = self.value(x);
        if v.shape().len() != 1 || index >= v.len() {
            return Err(TensorError::invalid(
                "select",
                format!("index {index} out of {:?}", v.shape()),
            ));
        }
        let out = Tensor::scalar(v.data()[index]);
        let rg = self.needs(&[x]);
        Ok(self.push(Value::Owned(out), Op::Select { x, index }, rg))
    }

    /// Negative log likelihood of `target` under a probability vector,
    /// clamped at [`PROB_CLAMP`].
    pub fn nll_loss(&mut self, probs: NodeId, target: usize) -> Result<NodeId> {
        let v = self.value(probs);
        if v.shape().len() != 1 || target >= v.len() {
            return Err(TensorError::invalid(
                "nll_loss",
                format!("target {target} out of {:?}", v.shape()),
            ));
        }
        let clamp = F::from_f64(PROB_CLAMP);
        let loss = -(v.data()[target].max(clamp)).ln();
        let rg = self.needs(&[probs]);
        Ok(self.push(Value::Owned(Tensor::scalar(loss)), Op::NllLoss { probs, target }, rg))
    }

    /// Gradient of the scalar at `root` with respect to every contributing
    /// node, by one reverse sweep in creation order.
    pub fn backward(&self, root: NodeId) -> Result<Gradients<F>> {
        if self.value(root).len() != 1 {
            return Err(TensorError::invalid(
                "backward",
                format!("root must be scalar, got {:?}", self.value(root).shape()),
            ));
        }
        let mut grads: Vec<Option<Vec<F>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(vec![F::one()]);
        for idx in (0..=root.0).rev() {
            let gout = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            self.backprop_node(idx, &gout, &mut grads);
            grads[idx] = Some(gout);
        }
        Ok(Gradients { by_node: grads })
    }

    /// Adds `f`'s contribution into the gradient buffer of `id` (creating it
    /// zeroed on first touch), unless that node doesn't need a gradient.
    fn accumulate(
        &self,
        grads: &mut [Option<Vec<F>>],
        id: NodeId,
        f: impl FnOnce(&Self, &mut [F]),
    ) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        let mut buf = grads[id.0]
            .take()
            .unwrap_or_else(|| vec![F::zero(); self.value(id).len()]);
        f(self, &mut buf);
        grads[id.0] = Some(buf);
    }

    fn backprop_node(&self, idx: usize, gout: &[F], grads: &mut [Option<Vec<F>>]) {
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, geom } => {
                let (xi, wi) = (*x, *w);
                self.accumulate(grads, *x, |t, dx| {
                    kernels::conv2d_backward(
                        t.value(xi).data(),
                        t.value(wi).data(),
                        geom,
                        gout,
                        Some(dx),
                        None,
                        None,
                    );
                });
                self.accumulate(grads, *w, |t, dw| {
                    kernels::conv2d_backward(
                        t.value(xi).data(),
                        t.value(wi).data(),
                        geom,
                        gout,
                        None,
                        Some(dw),
                        None,
                    );
                });
                self.accumulate(grads, *b, |t, db| {
                    kernels::conv2d_backward(
                        t.value(xi).data(),
                        t.value(wi).data(),
                        geom,
                        gout,
                        None,
                        None,
                        Some(db),
                    );
                });
            }
            Op::Depthwise { x, w, geom } => {
                let (xi, wi) = (*x, *w);
                self.accumulate(grads, *x, |t, dx| {
                    kernels::depthwise_backward(
                        t.value(xi).data(),
                        t.value(wi).data(),
                        geom,
                        gout,
                        Some(dx),
                        None,
                    );
                });
                self.accumulate(grads, *w, |t, dw| {
                    kernels::depthwise_backward(
                        t.value(xi).data(),
                        t.value(wi).data(),
                        geom,
                        gout,
                        None,
                        Some(dw),
                    );
                });
            }
            Op::Pointwise { x, w, b, pixels, c_in } => {
                let (xi, wi, pixels, c_in) = (*x, *w, *pixels, *c_in);
                self.accumulate(grads, *x, |t, dx| {
                    kernels::pointwise_backward(
                        t.value(xi).data(),
                        pixels,
                        c_in,
                        t.value(wi).data(),
                        gout,
                        Some(dx),
                        None,
                        None,
                    );
                });
                self.accumulate(grads, *w, |t, dw| {
                    kernels::pointwise_backward(
                        t.value(xi).data(),
                        pixels,
                        c_in,
                        t.value(wi).data(),
                        gout,
                        None,
                        Some(dw),
                        None,
                    );
                });
                self.accumulate(grads, *b, |t, db| {
                    kernels::pointwise_backward(
                        t.value(xi).data(),
                        pixels,
                        c_in,
                        t.value(wi).data(),
                        gout,
                        None,
                        None,
                        Some(db),
                    );
                });
            }
            Op::Dense { x, w, b } => {
                let (xi, wi) = (*x, *w);
                self.accumulate(grads, *x, |t, dx| {
                    kernels::dense_backward(
                        t.value(xi).data(),
                        t.value(wi).data(),
                        gout,
                        Some(dx),
                        None,
                        None,
                    );
                });
                self.accumulate(grads, *w, |t, dw| {
                    kernels::dense_backward(
                        t.value(xi).data(),
                        t.value(wi).data(),
                        gout,
                        None,
                        Some(dw),
                        None,
                    );
                });
                self.accumulate(grads, *b, |t, db| {
                    kernels::dense_backward(
                        t.value(xi).data(),
                        t.value(wi).data(),
                        gout,
                        None,
                        None,
                        Some(db),
                    );
                });
            }
            Op::Relu { x } => {
                let xi = *x;
                self.accumulate(grads, *x, |t, dx| {
                    for ((d, &xv), &gv) in dx.iter_mut().zip(t.value(xi).data()).zip(gout) {
                        if xv > F::zero() {
                            *d += gv;
                        }
                    }
                });
            }
            Op::Softmax { x } => {
                // dx_i = y_i * (g_i - sum_j g_j y_j)
                let y = self.value(NodeId(idx)).data();
                let mut dot = F::zero();
                for (&gv, &yv) in gout.iter().zip(y) {
                    dot += gv * yv;
                }
                self.accumulate(grads, *x, |t, dx| {
                    let y = t.value(NodeId(idx)).data();
                    for ((d, &yv), &gv) in dx.iter_mut().zip(y).zip(gout) {
                        *d += yv * (gv - dot);
                    }
                });
            }
            Op::MaxPool { x, argmax } => {
                self.accumulate(grads, *x, |_, dx| {
                    kernels::maxpool2d_backward(argmax, gout, dx);
                });
            }
            Op::Hadamard { a, b } => {
                let (ai, bi) = (*a, *b);
                self.accumulate(grads, *a, |t, da| {
                    for ((d, &bv), &gv) in da.iter_mut().zip(t.value(bi).data()).zip(gout) {
                        *d += bv * gv;
                    }
                });
                self.accumulate(grads, *b, |t, db| {
                    for ((d, &av), &gv) in db.iter_mut().zip(t.value(ai).data()).zip(gout) {
                        *d += av * gv;
                    }
                });
            }
            Op::Concat { a, b, axis } => {
                let (sa, sb) = (self.value(*a).shape(), self.value(*b).shape());
                let inner: usize = sa[axis + 1..].iter().product();
                let (block_a, block_b) = (sa[*axis] * inner, sb[*axis] * inner);
                let outer: usize = sa[..*axis].iter().product();
                let stride = block_a + block_b;
                self.accumulate(grads, *a, |_, da| {
                    for o in 0..outer {
                        let src = &gout[o * stride..][..block_a];
                        for (d, &gv) in da[o * block_a..][..block_a].iter_mut().zip(src) {
                            *d += gv;
                        }
                    }
                });
                self.accumulate(grads, *b, |_, db| {
                    for o in 0..outer {
                        let src = &gout[o * stride + block_a..][..block_b];
                        for (d, &gv) in db[o * block_b..][..block_b].iter_mut().zip(src) {
                            *d += gv;
                        }
                    }
                });
            }
            Op::Slice { x, start } => {
                self.accumulate(grads, *x, |_, dx| {
                    for (d, &gv) in dx[*start..*start + gout.len()].iter_mut().zip(gout) {
                        *d += gv;
                    }
                });
            }
            Op::Dropout { x, mask } => {
                self.accumulate(grads, *x, |_, dx| {
                    for ((d, &m), &gv) in dx.iter_mut().zip(mask).zip(gout) {
                        *d += m * gv;
                    }
                });
            }
            Op::Reshape { x } => {
                self.accumulate(grads, *x, |_, dx| {
                    for (d, &gv) in dx.iter_mut().zip(gout) {
                        *d += gv;
                    }
                });
            }
            Op::Sum { x } => {
                let gv = gout[0];
                self.accumulate(grads, *x, |_, dx| {
                    for d in dx.iter_mut() {
                        *d += gv;
                    }
                });
            }
            Op::Select { x, index } => {
                let gv = gout[0];
                self.accumulate(grads, *x, |_, dx| {
                    dx[*index] += gv;
                });
            }
            Op::NllLoss { probs, target } => {
                let p = self.value(*probs).data()[*target];
                let clamp = F::from_f64(PROB_CLAMP);
                let gv = gout[0];
                self.accumulate(grads, *probs, |_, dp| {
                    if p > clamp {
                        dp[*target] -= gv / p;
                    }
                });
            }
        }
    }
}
