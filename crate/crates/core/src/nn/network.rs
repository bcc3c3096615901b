//! Forward pass, softmax cross-entropy and exact backpropagation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arch::{ArchSpec, Layer};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::rng::SplitMix64;
use crate::scalar::{Real, Strided};

/// Samples per gradient chunk. Chunks are summed in index order, so results do
/// not depend on how many threads run them.
const CHUNK: usize = 4;

/// Pixels enter the first layer as `v - INPUT_CENTER`, i.e. in [-0.5, 0.5].
pub const INPUT_CENTER: f64 = 0.5;

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

/// A network: architecture, parameter tensors in declaration order, and training history.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub arch: ArchSpec,
    pub params: Vec<Vec<T>>,
    pub history: Vec<EpochStats>,
    layers: Vec<Layer>,
}

/// He-style initialization: weights ~ N(0, 2/fan_in), biases zero, drawn in declaration order.
///
/// The output layer starts at zero so a fresh model predicts the uniform distribution.
pub fn init_params<T: Real>(arch: &ArchSpec, seed: u64) -> Vec<Vec<T>> {
    let mut rng = SplitMix64::new(seed);
    let shapes = arch.param_shapes();
    let output_weight = shapes.len() - 2;
    shapes
        .into_iter()
        .enumerate()
        .map(|(i, (shape, fan_in))| {
            let n = shape.iter().product();
            if fan_in == 0 || i == output_weight {
                vec![T::zero(); n]
            } else {
                let std = (2.0 / fan_in as f64).sqrt();
                (0..n).map(|_| T::of(rng.normal() * std)).collect()
            }
        })
        .collect()
}

/// Row-wise softmax in f64.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<f64> {
    let max = logits.iter().map(|v| v.f64()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v.f64() - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<V: PartialOrd + Copy>(values: &[V]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

struct Trace<T> {
    acts: Vec<Vec<T>>,
    pool_idx: Vec<Vec<u32>>,
}

impl<T: Real> Model<T> {
    pub fn new(arch: ArchSpec, params: Vec<Vec<T>>) -> Result<Self> {
        arch.validate()?;
        let shapes = arch.param_shapes();
        if shapes.len() != params.len() {
            return Err(Error::shape("parameters", format!("expected {} tensors, got {}", shapes.len(), params.len())));
        }
        for (i, ((shape, _), p)) in shapes.iter().zip(&params).enumerate() {
            let n: usize = shape.iter().product();
            if n != p.len() {
                return Err(Error::shape(format!("parameter #{i}"), format!("expected {n} values, got {}", p.len())));
            }
        }
        let layers = arch.layers();
        Ok(Self { arch, params, history: Vec::new(), layers })
    }

    pub fn init(arch: ArchSpec, seed: u64) -> Result<Self> {
        arch.validate()?;
        let params = init_params(&arch, seed);
        Self::new(arch, params)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_classes(&self) -> usize {
        self.arch.num_classes
    }

    pub fn check_input(&self, img: &ImageTensor<T>) -> Result<()> {
        let [h, w] = self.arch.input_size;
        if img.shape() != (h, w, self.arch.input_channels) {
            let (ih, iw, ic) = img.shape();
            return Err(Error::shape("input", format!("expected {h}x{w}x1, got {ih}x{iw}x{ic}")));
        }
        Ok(())
    }

    fn trace(&self, img: &ImageTensor<T>) -> Trace<T> {
        let mut acts: Vec<Vec<T>> = Vec::with_capacity(self.layers.len() + 1);
        let mut pool_idx = Vec::new();
        let shift = T::of(INPUT_CENTER);
        acts.push(img.data().iter().map(|&v| v - shift).collect());
        for layer in &self.layers {
            let x = acts.last().expect("input pushed");
            let y = match *layer {
                Layer::Conv { cin, cout, h, w, weight } => {
                    conv_forward(x, &self.params[weight], &self.params[weight + 1], cin, cout, h, w)
                }
                Layer::Relu { .. } => x.iter().map(|&v| v.max(T::zero())).collect(),
                Layer::Pool { c, h, w } => {
                    let (y, idx) = pool_forward(x, c, h, w);
                    pool_idx.push(idx);
                    y
                }
                Layer::Dense { inp, out, weight } => {
                    dense_forward(x, &self.params[weight], &self.params[weight + 1], inp, out)
                }
            };
            acts.push(y);
        }
        Trace { acts, pool_idx }
    }

    /// Raw logits for one image.
    pub fn logits(&self, img: &ImageTensor<T>) -> Result<Vec<T>> {
        self.check_input(img)?;
        Ok(self.trace(img).acts.pop().expect("non-empty trace"))
    }

    /// Raw logits, one row per image.
    pub fn forward(&self, batch: &[&ImageTensor<T>]) -> Result<Vec<Vec<T>>> {
        batch.iter().try_for_each(|img| self.check_input(img))?;
        Ok(batch.par_iter().map(|img| self.trace(img).acts.pop().expect("non-empty trace")).collect())
    }

    pub fn probabilities(&self, img: &ImageTensor<T>) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(img)?))
    }

    pub fn predict(&self, img: &ImageTensor<T>) -> Result<usize> {
        Ok(argmax(&self.logits(img)?))
    }

    /// Add the gradients of `scale * CE(softmax(logits), label)` for one sample into `grads`.
    /// Returns the sample's unscaled loss and its logits.
    fn accumulate(&self, img: &ImageTensor<T>, label: usize, scale: f64, grads: &mut [Vec<T>]) -> (f64, Vec<T>) {
        let Trace { acts, pool_idx } = self.trace(img);
        let logits = acts.last().expect("non-empty trace").clone();
        let probs = softmax(&logits);
        let loss = -probs[label].max(f64::MIN_POSITIVE).ln();
        let mut delta: Vec<T> = probs
            .iter()
            .enumerate()
            .map(|(k, &p)| T::of(scale * (p - if k == label { 1.0 } else { 0.0 })))
            .collect();
        let mut pools = pool_idx.len();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &acts[i];
            let need_input_grad = i > 0;
            delta = match *layer {
                Layer::Conv { cin, cout, h, w, weight } => {
                    let (gw, rest) = grads[weight..].split_first_mut().expect("weight grad");
                    conv_backward(x, &self.params[weight], &delta, gw, &mut rest[0], cin, cout, h, w, need_input_grad)
                }
                Layer::Relu { .. } => {
                    let y = &acts[i + 1];
                    delta.iter().zip(y).map(|(&d, &v)| if v > T::zero() { d } else { T::zero() }).collect()
                }
                Layer::Pool { c, h, w } => {
                    pools -= 1;
                    pool_backward(&delta, &pool_idx[pools], c * h * w)
                }
                Layer::Dense { inp, out, weight } => {
                    let (gw, rest) = grads[weight..].split_first_mut().expect("weight grad");
                    dense_backward(x, &self.params[weight], &delta, gw, &mut rest[0], inp, out, need_input_grad)
                }
            };
        }
        (loss, logits)
    }

    pub fn zero_grads(&self) -> Vec<Vec<T>> {
        self.params.iter().map(|p| vec![T::zero(); p.len()]).collect()
    }

    /// Mean softmax cross-entropy over the batch and its exact gradient.
    pub fn loss_and_grads(&self, batch: &[&ImageTensor<T>], labels: &[usize]) -> Result<(f64, Vec<Vec<T>>)> {
        let (loss, grads, _) = self.loss_grads_logits(batch, labels)?;
        Ok((loss, grads))
    }

    /// Like [`Model::loss_and_grads`], also returning the logits of every sample.
    pub fn loss_grads_logits(
        &self,
        batch: &[&ImageTensor<T>],
        labels: &[usize],
    ) -> Result<(f64, Vec<Vec<T>>, Vec<Vec<T>>)> {
        if batch.len() != labels.len() || batch.is_empty() {
            return Err(Error::shape("batch", format!("{} images vs {} labels", batch.len(), labels.len())));
        }
        batch.iter().try_for_each(|img| self.check_input(img))?;
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.num_classes()) {
            return Err(Error::param("label", format!("{bad} >= num_classes {}", self.num_classes())));
        }
        let scale = 1.0 / batch.len() as f64;
        let idx: Vec<usize> = (0..batch.len()).collect();
        let chunks: Vec<(f64, Vec<Vec<T>>, Vec<Vec<T>>)> = idx
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut grads = self.zero_grads();
                let mut loss = 0.0;
                let mut logits = Vec::with_capacity(chunk.len());
                for &i in chunk {
                    let (l, z) = self.accumulate(batch[i], labels[i], scale, &mut grads);
                    loss += l;
                    logits.push(z);
                }
                (loss, grads, logits)
            })
            .collect();
        let mut total: Vec<Vec<f64>> = self.params.iter().map(|p| vec![0.0; p.len()]).collect();
        let mut loss = 0.0;
        let mut logits = Vec::with_capacity(batch.len());
        for (l, grads, z) in chunks {
            loss += l;
            logits.extend(z);
            for (acc, g) in total.iter_mut().zip(&grads) {
                acc.iter_mut().zip(g).for_each(|(a, &v)| *a += v.f64());
            }
        }
        let grads = total.into_iter().map(|g| g.into_iter().map(T::of).collect()).collect();
        Ok((loss * scale, grads, logits))
    }
}

/// Unfold zero-padded 3x3 neighbourhoods: row `ci*9 + ky*3 + kx`, column `y*w + x`.
fn im2col<T: Real>(x: &[T], cin: usize, h: usize, w: usize) -> Vec<T> {
    let plane = h * w;
    let mut cols = vec![T::zero(); cin * 9 * plane];
    for ci in 0..cin {
        let inp = &x[ci * plane..(ci + 1) * plane];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(ci * 9 + ky * 3 + kx) * plane..][..plane];
                let (x_lo, x_hi) = (1usize.saturating_sub(kx), (w + 1 - kx).min(w));
                for oy in 1usize.saturating_sub(ky)..(h + 1 - ky).min(h) {
                    let iy = oy + ky - 1;
                    row[oy * w + x_lo..oy * w + x_hi]
                        .copy_from_slice(&inp[iy * w + x_lo + kx - 1..iy * w + x_hi + kx - 1]);
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`].
fn col2im<T: Real>(cols: &[T], cin: usize, h: usize, w: usize) -> Vec<T> {
    let plane = h * w;
    let mut x = vec![T::zero(); cin * plane];
    for ci in 0..cin {
        let out = &mut x[ci * plane..(ci + 1) * plane];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(ci * 9 + ky * 3 + kx) * plane..][..plane];
                let (x_lo, x_hi) = (1usize.saturating_sub(kx), (w + 1 - kx).min(w));
                for oy in 1usize.saturating_sub(ky)..(h + 1 - ky).min(h) {
                    let iy = oy + ky - 1;
                    let dst = &mut out[iy * w + x_lo + kx - 1..iy * w + x_hi + kx - 1];
                    for (d, &v) in dst.iter_mut().zip(&row[oy * w + x_lo..oy * w + x_hi]) {
                        *d += v;
                    }
                }
            }
        }
    }
    x
}

/// Same-padded 3x3 convolution over CHW planes.
fn conv_forward<T: Real>(x: &[T], wt: &[T], bias: &[T], cin: usize, cout: usize, h: usize, w: usize) -> Vec<T> {
    let plane = h * w;
    let cols = im2col(x, cin, h, w);
    let mut y: Vec<T> = bias.iter().flat_map(|&b| std::iter::repeat(b).take(plane)).collect();
    T::gemm(
        cout,
        cin * 9,
        plane,
        Strided::row_major(wt, cin * 9),
        Strided::row_major(&cols, plane),
        T::one(),
        &mut y,
    );
    y
}

#[allow(clippy::too_many_arguments)]
fn conv_backward<T: Real>(
    x: &[T],
    wt: &[T],
    dy: &[T],
    gw: &mut [T],
    gb: &mut [T],
    cin: usize,
    cout: usize,
    h: usize,
    w: usize,
    need_input_grad: bool,
) -> Vec<T> {
    let plane = h * w;
    for (co, g) in gb.iter_mut().enumerate() {
        *g += dy[co * plane..(co + 1) * plane].iter().copied().sum::<T>();
    }
    let cols = im2col(x, cin, h, w);
    T::gemm(
        cout,
        plane,
        cin * 9,
        Strided::row_major(dy, plane),
        Strided::transposed(&cols, plane),
        T::one(),
        gw,
    );
    if !need_input_grad {
        return Vec::new();
    }
    let mut dcols = vec![T::zero(); cin * 9 * plane];
    T::gemm(
        cin * 9,
        cout,
        plane,
        Strided::transposed(wt, cin * 9),
        Strided::row_major(dy, plane),
        T::zero(),
        &mut dcols,
    );
    col2im(&dcols, cin, h, w)
}

/// 2x2 stride-2 max-pool; records the flat source index of each maximum.
fn pool_forward<T: Real>(x: &[T], c: usize, h: usize, w: usize) -> (Vec<T>, Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut y = Vec::with_capacity(c * oh * ow);
    let mut idx = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let j = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if x[j] > x[best] {
                        best = j;
                    }
                }
                y.push(x[best]);
                idx.push(best as u32);
            }
        }
    }
    (y, idx)
}

fn pool_backward<T: Real>(dy: &[T], idx: &[u32], input_len: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); input_len];
    for (&g, &i) in dy.iter().zip(idx) {
        dx[i as usize] += g;
    }
    dx
}

fn dense_forward<T: Real>(x: &[T], wt: &[T], bias: &[T], inp: usize, out: usize) -> Vec<T> {
    let mut y = bias.to_vec();
    T::gemm(out, inp, 1, Strided::row_major(wt, inp), Strided::row_major(x, 1), T::one(), &mut y);
    y
}

#[allow(clippy::too_many_arguments)]
fn dense_backward<T: Real>(
    x: &[T],
    wt: &[T],
    dy: &[T],
    gw: &mut [T],
    gb: &mut [T],
    inp: usize,
    out: usize,
    need_input_grad: bool,
) -> Vec<T> {
    gb.iter_mut().zip(dy).for_each(|(g, &d)| *g += d);
    T::gemm(out, 1, inp, Strided::row_major(dy, 1), Strided::row_major(x, inp), T::one(), gw);
    if !need_input_grad {
        return Vec::new();
    }
    let mut dx = vec![T::zero(); inp];
    T::gemm(inp, out, 1, Strided::transposed(wt, inp), Strided::row_major(dy, 1), T::zero(), &mut dx);
    dx
}
