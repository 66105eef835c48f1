//! Convolution, dense and pooling kernels (forward + backward).
//!
//! Layout conventions, all row-major:
//!
//! * feature maps `[H, W, C]` — channels innermost;
//! * full conv weights `[K, K, Cin, Cout]`;
//! * depthwise weights `[K, K, C]` (no bias);
//! * pointwise / dense weights `[In, Out]`.
//!
//! Every inner loop accumulates over the innermost (channel) axis of the
//! *output*, i.e. `acc[f] += xv * w[..][f]`, which keeps the float additions
//! independent per lane — the compiler can vectorize them without
//! reassociating sums, so optimized results are bit-identical to the plain
//! loops the tests compare against.
//!
//! Gradient buffers are *accumulated into* (`+=`), never overwritten; the tape
//! relies on this when a value feeds several consumers.
//!
//! Weight-gradient reductions that would be scatter-shaped are computed as
//! per-chunk partial sums (chunk boundaries fixed by shape alone) folded in
//! chunk order, so parallel and sequential execution give identical bits.

use super::{Real, TensorError};
use crate::exec;

/// Fixed pixel-block size for partial-sum reductions. Part of the numeric
/// contract: changing it changes summation order (not correctness).
const GRAD_CHUNK_PIXELS: usize = 64;

/// Resolved geometry of a "same"-padded square convolution.
///
/// `out = ceil(in / stride)`; total padding `max((out-1)*stride + k - in, 0)`
/// split evenly with the extra row/column on the high (bottom/right) side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub kernel: usize,
    pub out_c: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn out_len(&self) -> usize {
        self.out_h * self.out_w * self.out_c
    }
}

pub fn conv_geometry(
    in_h: usize,
    in_w: usize,
    in_c: usize,
    kernel: usize,
    out_c: usize,
    stride: usize,
) -> Result<ConvGeom, TensorError> {
    if in_h == 0 || in_w == 0 || in_c == 0 || kernel == 0 || out_c == 0 || stride == 0 {
        return Err(TensorError::invalid(
            "conv_geometry",
            format!("degenerate geometry {in_h}x{in_w}x{in_c} k={kernel} f={out_c} s={stride}"),
        ));
    }
    let out_h = in_h.div_ceil(stride);
    let out_w = in_w.div_ceil(stride);
    let pad_h = ((out_h - 1) * stride + kernel).saturating_sub(in_h);
    let pad_w = ((out_w - 1) * stride + kernel).saturating_sub(in_w);
    Ok(ConvGeom {
        in_h,
        in_w,
        in_c,
        kernel,
        out_c,
        stride,
        pad_top: pad_h / 2,
        pad_left: pad_w / 2,
        out_h,
        out_w,
    })
}

/// Full convolution, weights `[K, K, Cin, Cout]`, bias `[Cout]`.
pub fn conv2d_forward<F: Real>(x: &[F], w: &[F], b: &[F], g: &ConvGeom, out: &mut [F]) {
    let (k, c_in, c_out) = (g.kernel, g.in_c, g.out_c);
    debug_assert_eq!(x.len(), g.in_h * g.in_w * c_in);
    debug_assert_eq!(w.len(), k * k * c_in * c_out);
    debug_assert_eq!(b.len(), c_out);
    debug_assert_eq!(out.len(), g.out_len());
    let row_len = g.out_w * c_out;
    exec::for_each_chunk_mut(out, row_len, |oy, row| {
        for (ox, opix) in row.chunks_mut(c_out).enumerate() {
            opix.copy_from_slice(b);
            for ky in 0..k {
                let iy = (oy * g.stride + ky).wrapping_sub(g.pad_top);
                if iy >= g.in_h {
                    continue;
                }
                for kx in 0..k {
                    let ix = (ox * g.stride + kx).wrapping_sub(g.pad_left);
                    if ix >= g.in_w {
                        continue;
                    }
                    let xpix = &x[(iy * g.in_w + ix) * c_in..][..c_in];
                    let wtap = &w[(ky * k + kx) * c_in * c_out..][..c_in * c_out];
                    for (c, &xv) in xpix.iter().enumerate() {
                        let wrow = &wtap[c * c_out..][..c_out];
                        for (o, &wv) in opix.iter_mut().zip(wrow) {
                            *o += xv * wv;
                        }
                    }
                }
            }
        }
    });
}

/// Backward of [`conv2d_forward`]. Any of `dx`/`dw`/`db` may be absent;
/// present buffers are accumulated into. Runs sequentially — the model uses a
/// full convolution only on its thin stem, where this pass is cheap.
pub fn conv2d_backward<F: Real>(
    x: &[F],
    w: &[F],
    g: &ConvGeom,
    dout: &[F],
    mut dx: Option<&mut [F]>,
    mut dw: Option<&mut [F]>,
    db: Option<&mut [F]>,
) {
    let (k, c_in, c_out) = (g.kernel, g.in_c, g.out_c);
    debug_assert_eq!(dout.len(), g.out_len());
    if let Some(db) = db {
        for opix in dout.chunks_exact(c_out) {
            for (d, &gv) in db.iter_mut().zip(opix) {
                *d += gv;
            }
        }
    }
    if dx.is_none() && dw.is_none() {
        return;
    }
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let dpix = &dout[(oy * g.out_w + ox) * c_out..][..c_out];
            for ky in 0..k {
                let iy = (oy * g.stride + ky).wrapping_sub(g.pad_top);
                if iy >= g.in_h {
                    continue;
                }
                for kx in 0..k {
                    let ix = (ox * g.stride + kx).wrapping_sub(g.pad_left);
                    if ix >= g.in_w {
                        continue;
                    }
                    let xoff = (iy * g.in_w + ix) * c_in;
                    let woff = (ky * k + kx) * c_in * c_out;
                    if let Some(dw) = dw.as_deref_mut() {
                        for c in 0..c_in {
                            let xv = x[xoff + c];
                            let dwrow = &mut dw[woff + c * c_out..][..c_out];
                            for (d, &gv) in dwrow.iter_mut().zip(dpix) {
                                *d += xv * gv;
                            }
                        }
                    }
                    if let Some(dx) = dx.as_deref_mut() {
                        for c in 0..c_in {
                            let wrow = &w[woff + c * c_out..][..c_out];
                            let mut acc = F::zero();
                            for (&wv, &gv) in wrow.iter().zip(dpix) {
                                acc += wv * gv;
                            }
                            dx[xoff + c] += acc;
                        }
                    }
                }
            }
        }
    }
}

/// Depthwise convolution, weights `[K, K, C]`, no bias.
pub fn depthwise_forward<F: Real>(x: &[F], w: &[F], g: &ConvGeom, out: &mut [F]) {
    let (k, c) = (g.kernel, g.in_c);
    debug_assert_eq!(g.out_c, c, "depthwise keeps the channel count");
    debug_assert_eq!(w.len(), k * k * c);
    debug_assert_eq!(out.len(), g.out_len());
    let row_len = g.out_w * c;
    exec::for_each_chunk_mut(out, row_len, |oy, row| {
        for (ox, opix) in row.chunks_mut(c).enumerate() {
            opix.fill(F::zero());
            for ky in 0..k {
                let iy = (oy * g.stride + ky).wrapping_sub(g.pad_top);
                if iy >= g.in_h {
                    continue;
                }
                for kx in 0..k {
                    let ix = (ox * g.stride + kx).wrapping_sub(g.pad_left);
                    if ix >= g.in_w {
                        continue;
                    }
                    let xpix = &x[(iy * g.in_w + ix) * c..][..c];
                    let wtap = &w[(ky * k + kx) * c..][..c];
                    for ((o, &xv), &wv) in opix.iter_mut().zip(xpix).zip(wtap) {
                        *o += xv * wv;
                    }
                }
            }
        }
    });
}

/// Backward of [`depthwise_forward`]. `dx` is gather-form over input rows;
/// `dw` folds fixed per-output-row partials.
pub fn depthwise_backward<F: Real>(
    x: &[F],
    w: &[F],
    g: &ConvGeom,
    dout: &[F],
    dx: Option<&mut [F]>,
    dw: Option<&mut [F]>,
) {
    let (k, c) = (g.kernel, g.in_c);
    debug_assert_eq!(dout.len(), g.out_len());
    if let Some(dx) = dx {
        let row_len = g.in_w * c;
        exec::for_each_chunk_mut(dx, row_len, |iy, dxrow| {
            for ky in 0..k {
                let oy_span = (iy + g.pad_top).wrapping_sub(ky);
                if oy_span % g.stride != 0 {
                    continue;
                }
                let oy = oy_span / g.stride;
                if oy >= g.out_h {
                    continue;
                }
                for (ix, dxpix) in dxrow.chunks_mut(c).enumerate() {
                    for kx in 0..k {
                        let ox_span = (ix + g.pad_left).wrapping_sub(kx);
                        if ox_span % g.stride != 0 {
                            continue;
                        }
                        let ox = ox_span / g.stride;
                        if ox >= g.out_w {
                            continue;
                        }
                        let dpix = &dout[(oy * g.out_w + ox) * c..][..c];
                        let wtap = &w[(ky * k + kx) * c..][..c];
                        for ((d, &gv), &wv) in dxpix.iter_mut().zip(dpix).zip(wtap) {
                            *d += gv * wv;
                        }
                    }
                }
            }
        });
    }
    if let Some(dw) = dw {
        let partials: Vec<Vec<F>> = exec::map_range(g.out_h, |oy| {
            let mut part = vec![F::zero(); k * k * c];
            for ox in 0..g.out_w {
                let dpix = &dout[(oy * g.out_w + ox) * c..][..c];
                for ky in 0..k {
                    let iy = (oy * g.stride + ky).wrapping_sub(g.pad_top);
                    if iy >= g.in_h {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = (ox * g.stride + kx).wrapping_sub(g.pad_left);
                        if ix >= g.in_w {
                            continue;
                        }
                        let xpix = &x[(iy * g.in_w + ix) * c..][..c];
                        let prow = &mut part[(ky * k + kx) * c..][..c];
                        for ((p, &xv), &gv) in prow.iter_mut().zip(xpix).zip(dpix) {
                            *p += xv * gv;
                        }
                    }
                }
            }
            part
        });
        for part in &partials {
            for (d, &p) in dw.iter_mut().zip(part) {
                *d += p;
            }
        }
    }
}

/// 1×1 convolution over `pixels` positions, weights `[Cin, Cout]`, bias
/// `[Cout]`, always stride 1.
pub fn pointwise_forward<F: Real>(
    x: &[F],
    pixels: usize,
    c_in: usize,
    w: &[F],
    b: &[F],
    out: &mut [F],
) {
    let c_out = b.len();
    debug_assert_eq!(x.len(), pixels * c_in);
    debug_assert_eq!(w.len(), c_in * c_out);
    debug_assert_eq!(out.len(), pixels * c_out);
    exec::for_each_chunk_mut(out, GRAD_CHUNK_PIXELS * c_out, |chunk, orows| {
        let base = chunk * GRAD_CHUNK_PIXELS;
        for (p, opix) in orows.chunks_mut(c_out).enumerate() {
            opix.copy_from_slice(b);
            let xpix = &x[(base + p) * c_in..][..c_in];
            for (c, &xv) in xpix.iter().enumerate() {
                let wrow = &w[c * c_out..][..c_out];
                for (o, &wv) in opix.iter_mut().zip(wrow) {
                    *o += xv * wv;
                }
            }
        }
    });
}

/// Backward of [`pointwise_forward`]. `dx` uses a transposed weight copy so
/// its inner loop also accumulates along a contiguous axis; `dw` folds fixed
/// 64-pixel partial sums in chunk order.
pub fn pointwise_backward<F: Real>(
    x: &[F],
    pixels: usize,
    c_in: usize,
    w: &[F],
    dout: &[F],
    dx: Option<&mut [F]>,
    dw: Option<&mut [F]>,
    db: Option<&mut [F]>,
) {
    let c_out = w.len() / c_in;
    debug_assert_eq!(dout.len(), pixels * c_out);
    if let Some(db) = db {
        for dpix in dout.chunks_exact(c_out) {
            for (d, &gv) in db.iter_mut().zip(dpix) {
                *d += gv;
            }
        }
    }
    if let Some(dx) = dx {
        let mut wt = vec![F::zero(); w.len()];
        for c in 0..c_in {
            for f in 0..c_out {
                wt[f * c_in + c] = w[c * c_out + f];
            }
        }
        exec::for_each_chunk_mut(dx, GRAD_CHUNK_PIXELS * c_in, |chunk, dxrows| {
            let base = chunk * GRAD_CHUNK_PIXELS;
            for (p, dxpix) in dxrows.chunks_mut(c_in).enumerate() {
                let dpix = &dout[(base + p) * c_out..][..c_out];
                for (f, &gv) in dpix.iter().enumerate() {
                    let wrow = &wt[f * c_in..][..c_in];
                    for (d, &wv) in dxpix.iter_mut().zip(wrow) {
                        *d += gv * wv;
                    }
                }
            }
        });
    }
    if let Some(dw) = dw {
        let chunks = pixels.div_ceil(GRAD_CHUNK_PIXELS);
        let partials: Vec<Vec<F>> = exec::map_range(chunks, |ci| {
            let lo = ci * GRAD_CHUNK_PIXELS;
            let hi = (lo + GRAD_CHUNK_PIXELS).min(pixels);
            let mut part = vec![F::zero(); c_in * c_out];
            for p in lo..hi {
                let xpix = &x[p * c_in..][..c_in];
                let dpix = &dout[p * c_out..][..c_out];
                for (c, &xv) in xpix.iter().enumerate() {
                    let prow = &mut part[c * c_out..][..c_out];
                    for (d, &gv) in prow.iter_mut().zip(dpix) {
                        *d += xv * gv;
                    }
                }
            }
            part
        });
        for part in &partials {
            for (d, &p) in dw.iter_mut().zip(part) {
                *d += p;
            }
        }
    }
}

/// Fully connected layer on a vector, weights `[In, Out]`, bias `[Out]`.
pub fn dense_forward<F: Real>(x: &[F], w: &[F], b: &[F], out: &mut [F]) {
    let n_out = b.len();
    debug_assert_eq!(w.len(), x.len() * n_out);
    debug_assert_eq!(out.len(), n_out);
    out.copy_from_slice(b);
    for (i, &xv) in x.iter().enumerate() {
        let wrow = &w[i * n_out..][..n_out];
        for (o, &wv) in out.iter_mut().zip(wrow) {
            *o += xv * wv;
        }
    }
}

pub fn dense_backward<F: Real>(
    x: &[F],
    w: &[F],
    dout: &[F],
    dx: Option<&mut [F]>,
    dw: Option<&mut [F]>,
    db: Option<&mut [F]>,
) {
    let n_out = dout.len();
    if let Some(db) = db {
        for (d, &gv) in db.iter_mut().zip(dout) {
            *d += gv;
        }
    }
    if let Some(dw) = dw {
        for (i, &xv) in x.iter().enumerate() {
            let dwrow = &mut dw[i * n_out..][..n_out];
            for (d, &gv) in dwrow.iter_mut().zip(dout) {
                *d += xv * gv;
            }
        }
    }
    if let Some(dx) = dx {
        for (i, d) in dx.iter_mut().enumerate() {
            let wrow = &w[i * n_out..][..n_out];
            let mut acc = F::zero();
            for (&wv, &gv) in wrow.iter().zip(dout) {
                acc += wv * gv;
            }
            *d += acc;
        }
    }
}

/// Non-overlapping max pooling (`pool`×`pool`, stride = pool). Returns the
/// flat input index of each window maximum; ties go to the earliest index in
/// row-major scan order.
pub fn maxpool2d_forward<F: Real>(
    x: &[F],
    h: usize,
    w: usize,
    c: usize,
    pool: usize,
    out: &mut [F],
    argmax: &mut [u32],
) {
    debug_assert_eq!(h % pool, 0);
    debug_assert_eq!(w % pool, 0);
    let (oh, ow) = (h / pool, w / pool);
    debug_assert_eq!(out.len(), oh * ow * c);
    for oy in 0..oh {
        for ox in 0..ow {
            let obase = (oy * ow + ox) * c;
            for ch in 0..c {
                let mut best = F::neg_infinity();
                let mut best_at = 0u32;
                for py in 0..pool {
                    for px in 0..pool {
                        let idx = ((oy * pool + py) * w + (ox * pool + px)) * c + ch;
                        if x[idx] > best {
                            best = x[idx];
                            best_at = idx as u32;
                        }
                    }
                }
                out[obase + ch] = best;
                argmax[obase + ch] = best_at;
            }
        }
    }
}

pub fn maxpool2d_backward<F: Real>(argmax: &[u32], dout: &[F], dx: &mut [F]) {
    for (&at, &gv) in argmax.iter().zip(dout) {
        dx[at as usize] += gv;
    }
}
