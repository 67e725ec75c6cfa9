//! Whole-model forward and backward passes over a [`ModelSpec`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::layers::{
    affine_backward, affine_forward, attention_backward, attention_forward, conv_backward, conv_forward,
    gru_backward, gru_forward, lstm_backward, lstm_forward, AttentionCache, AttentionGrads, AttentionParams,
    ConvCache, GruCache, LstmCache, RecurrentGrads, RecurrentParams, SeqShape,
};
use super::scalar::Scalar;
use super::spec::{Dims, LayerKind, ModelSpec, Reduction, CONV_KERNEL};
use super::tensor::{ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Names and shapes of every tensor of `spec`, in storage order.
pub fn param_layout(spec: &ModelSpec, dims: Dims) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    let mut width = dims.features;
    for (i, l) in spec.layers.iter().enumerate() {
        let u = l.units;
        let input = if !l.kind.is_temporal() && i == 0 { dims.lookback * dims.features } else { width };
        let name = |s: &str| format!("l{i}.{}.{s}", l.kind.token());
        match l.kind {
            LayerKind::Dense => {
                out.push((name("weight"), vec![u, input]));
                out.push((name("bias"), vec![u]));
            }
            LayerKind::Conv1D => {
                out.push((name("weight"), vec![u, input, CONV_KERNEL]));
                out.push((name("bias"), vec![u]));
            }
            LayerKind::Gru | LayerKind::Lstm => {
                let g = if l.kind == LayerKind::Gru { 3 } else { 4 };
                out.push((name("w_ih"), vec![g * u, input]));
                out.push((name("w_hh"), vec![g * u, u]));
                out.push((name("b_ih"), vec![g * u]));
                out.push((name("b_hh"), vec![g * u]));
            }
            LayerKind::Attention => {
                for (proj, fan_in) in [("in", input), ("q", u), ("k", u), ("v", u), ("o", u)] {
                    out.push((name(&format!("w_{proj}")), vec![u, fan_in]));
                    out.push((name(&format!("b_{proj}")), vec![u]));
                }
            }
        }
        width = u;
    }
    let head_in = spec.head_width(dims);
    out.push(("head.weight".into(), vec![dims.features, head_in]));
    out.push(("head.bias".into(), vec![dims.features]));
    out
}

fn tensors_per_layer(kind: LayerKind) -> usize {
    match kind {
        LayerKind::Dense | LayerKind::Conv1D => 2,
        LayerKind::Gru | LayerKind::Lstm => 4,
        LayerKind::Attention => 10,
    }
}

/// Uniform `[-1/√fan_in, 1/√fan_in]` per tensor; a bias uses the fan-in of
/// the weight it belongs to.
pub fn init_weights<F: Scalar>(spec: &ModelSpec, dims: Dims, seed: u64) -> ParamSet<F> {
    let mut rng = seeded(seed);
    let layout = param_layout(spec, dims);
    let mut tensors = Vec::with_capacity(layout.len());
    let mut fan_in = 1usize;
    for (name, shape) in layout {
        if shape.len() >= 2 {
            fan_in = shape[1..].iter().product();
        }
        let bound = 1.0 / libm::sqrt(fan_in as f64);
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| F::of(rng.random_range(-bound..=bound))).collect();
        tensors.push(Tensor { name, shape, data });
    }
    ParamSet::new(tensors)
}

/// Checks that `params` matches the layout `spec` requires.
pub fn check_params<F: Scalar>(spec: &ModelSpec, dims: Dims, params: &ParamSet<F>) -> Result<()> {
    let layout = param_layout(spec, dims);
    if layout.len() != params.tensors.len() {
        return Err(Error::Shape(format!(
            "spec `{spec}` needs {} tensors, found {}",
            layout.len(),
            params.tensors.len()
        )));
    }
    for ((name, shape), t) in layout.iter().zip(&params.tensors) {
        if *name != t.name || *shape != t.shape || t.data.len() != shape.iter().product::<usize>() {
            return Err(Error::Shape(format!(
                "tensor `{}` {:?} does not match expected `{name}` {shape:?}",
                t.name, t.shape
            )));
        }
    }
    Ok(())
}

pub enum Mode<'r, R: Rng> {
    Eval,
    /// Dropout active, masks drawn from the given generator.
    Train(&'r mut R),
}

enum LayerCache<F> {
    Affine { x: Vec<F>, y: Vec<F> },
    Conv(ConvCache<F>),
    Gru(GruCache<F>),
    Lstm(LstmCache<F>),
    Attention(AttentionCache<F>),
}

/// Everything backward needs from one forward call, including the dropout
/// masks actually drawn.
pub struct Trace<F> {
    batch: usize,
    caches: Vec<LayerCache<F>>,
    masks: Vec<Option<Vec<F>>>,
    head_x: Vec<F>,
    pub output: Vec<F>,
}

fn dropout<F: Scalar, R: Rng>(v: &mut [F], rate: f64, rng: &mut R) -> Vec<F> {
    let keep = F::of(1.0 / (1.0 - rate));
    let mask: Vec<F> = (0..v.len()).map(|_| if rng.random::<f64>() < rate { F::zero() } else { keep }).collect();
    for (x, &m) in v.iter_mut().zip(&mask) {
        *x *= m;
    }
    mask
}

/// Runs the model on `batch` windows `[batch × lookback × features]` and
/// returns `[batch × features]` predictions with a trace for [`backward`].
pub fn forward<F: Scalar, R: Rng>(
    spec: &ModelSpec,
    dims: Dims,
    params: &ParamSet<F>,
    x: &[F],
    batch: usize,
    mut mode: Mode<'_, R>,
) -> Result<Trace<F>> {
    let steps = dims.lookback;
    if x.len() != batch * steps * dims.features {
        return Err(Error::Shape(format!(
            "input has {} values, expected {batch}×{steps}×{}",
            x.len(),
            dims.features
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("model input".into()));
    }
    let temporal = spec.temporal_count();
    let mut caches = Vec::with_capacity(spec.layers.len());
    let mut masks = Vec::with_capacity(spec.layers.len());
    let mut act = x.to_vec();
    let mut width = dims.features;
    let mut offset = 0;
    let t = &params.tensors;

    for (i, l) in spec.layers.iter().enumerate() {
        if i == temporal {
            act = reduce_forward(spec.reduction(), &act, batch, steps, width);
            if temporal == 0 {
                width = steps * dims.features;
            }
        }
        let s = SeqShape { batch, steps, input: width, hidden: l.units };
        let (mut out, cache) = match l.kind {
            LayerKind::Dense => {
                let y = affine_forward(&t[offset].data, &t[offset + 1].data, &act, batch, width, l.units, true);
                (y.clone(), LayerCache::Affine { x: core::mem::take(&mut act), y })
            }
            LayerKind::Conv1D => {
                let (y, c) = conv_forward(&t[offset].data, &t[offset + 1].data, &act, batch, steps, width, l.units);
                (y, LayerCache::Conv(c))
            }
            LayerKind::Gru => {
                let (y, c) = gru_forward(&recurrent(t, offset), &act, s);
                (y, LayerCache::Gru(c))
            }
            LayerKind::Lstm => {
                let (y, c) = lstm_forward(&recurrent(t, offset), &act, s);
                (y, LayerCache::Lstm(c))
            }
            LayerKind::Attention => {
                let (y, c) = attention_forward(&attention(t, offset), &act, s);
                (y, LayerCache::Attention(c))
            }
        };
        let mask = match &mut mode {
            Mode::Train(rng) if l.dropout_tenths > 0 => Some(dropout(&mut out, l.dropout(), *rng)),
            _ => None,
        };
        caches.push(cache);
        masks.push(mask);
        act = out;
        width = l.units;
        offset += tensors_per_layer(l.kind);
    }
    if temporal == spec.layers.len() {
        act = reduce_forward(spec.reduction(), &act, batch, steps, width);
    }
    let head_in = spec.head_width(dims);
    let output = affine_forward(&t[offset].data, &t[offset + 1].data, &act, batch, head_in, dims.features, false);
    Ok(Trace { batch, caches, masks, head_x: act, output })
}

fn recurrent<F>(t: &[Tensor<F>], o: usize) -> RecurrentParams<'_, F> {
    RecurrentParams { w_ih: &t[o].data, w_hh: &t[o + 1].data, b_ih: &t[o + 2].data, b_hh: &t[o + 3].data }
}

fn attention<F>(t: &[Tensor<F>], o: usize) -> AttentionParams<'_, F> {
    AttentionParams {
        w: core::array::from_fn(|k| t[o + 2 * k].data.as_slice()),
        b: core::array::from_fn(|k| t[o + 2 * k + 1].data.as_slice()),
    }
}

fn reduce_forward<F: Scalar>(r: Reduction, seq: &[F], batch: usize, steps: usize, width: usize) -> Vec<F> {
    match r {
        Reduction::Flatten => seq.to_vec(),
        Reduction::LastStep => (0..batch)
            .flat_map(|b| seq[((b * steps) + steps - 1) * width..][..width].iter().copied())
            .collect(),
        Reduction::MeanOverTime => {
            let inv = F::one() / F::of(steps as f64);
            let mut out = vec![F::zero(); batch * width];
            for b in 0..batch {
                let dst = &mut out[b * width..(b + 1) * width];
                for t in 0..steps {
                    for (d, &v) in dst.iter_mut().zip(&seq[(b * steps + t) * width..][..width]) {
                        *d += v;
                    }
                }
                for d in dst {
                    *d *= inv;
                }
            }
            out
        }
    }
}

fn reduce_backward<F: Scalar>(r: Reduction, dv: Vec<F>, batch: usize, steps: usize, width: usize) -> Vec<F> {
    match r {
        Reduction::Flatten => dv,
        Reduction::LastStep => {
            let mut ds = vec![F::zero(); batch * steps * width];
            for b in 0..batch {
                ds[((b * steps) + steps - 1) * width..][..width].copy_from_slice(&dv[b * width..(b + 1) * width]);
            }
            ds
        }
        Reduction::MeanOverTime => {
            let inv = F::one() / F::of(steps as f64);
            let mut ds = vec![F::zero(); batch * steps * width];
            for b in 0..batch {
                for t in 0..steps {
                    for (d, &g) in ds[(b * steps + t) * width..][..width].iter_mut().zip(&dv[b * width..(b + 1) * width]) {
                        *d = g * inv;
                    }
                }
            }
            ds
        }
    }
}

/// Mean over all elements of the squared error.
pub fn loss_mse<F: Scalar>(pred: &[F], truth: &[F]) -> Result<F> {
    if pred.len() != truth.len() {
        return Err(Error::shape("prediction and truth lengths differ"));
    }
    if pred.is_empty() {
        return Err(Error::EmptyDataset("empty batch".into()));
    }
    let sum = pred.iter().zip(truth).fold(F::zero(), |acc, (&p, &y)| acc + (p - y) * (p - y));
    Ok(sum / F::of(pred.len() as f64))
}

/// Gradient of [`loss_mse`] with respect to the predictions.
pub fn mse_grad<F: Scalar>(pred: &[F], truth: &[F]) -> Vec<F> {
    let scale = F::of(2.0 / pred.len() as f64);
    pred.iter().zip(truth).map(|(&p, &y)| scale * (p - y)).collect()
}

/// Analytic gradients of the loss with respect to every parameter, given the
/// trace of the forward pass that produced `dpred`'s predictions.
pub fn backward<F: Scalar>(
    spec: &ModelSpec,
    dims: Dims,
    params: &ParamSet<F>,
    trace: &Trace<F>,
    dpred: &[F],
) -> Result<ParamSet<F>> {
    let batch = trace.batch;
    let steps = dims.lookback;
    if dpred.len() != batch * dims.features {
        return Err(Error::shape("output gradient has the wrong length"));
    }
    let mut grads = params.zeros_like();
    let t = &params.tensors;
    let mut offsets = Vec::with_capacity(spec.layers.len());
    let mut off = 0;
    for l in &spec.layers {
        offsets.push(off);
        off += tensors_per_layer(l.kind);
    }
    let head_in = spec.head_width(dims);
    let mut d = {
        let (gw, rest) = grads.tensors[off..].split_at_mut(1);
        affine_backward(
            &t[off].data,
            &trace.head_x,
            &[],
            dpred.to_vec(),
            batch,
            head_in,
            dims.features,
            false,
            &mut gw[0].data,
            &mut rest[0].data,
        )
    };
    let temporal = spec.temporal_count();
    let input_width = |i: usize| -> usize {
        if i == 0 {
            if spec.layers[0].kind.is_temporal() {
                dims.features
            } else {
                steps * dims.features
            }
        } else {
            spec.layers[i - 1].units
        }
    };
    if temporal == spec.layers.len() {
        d = reduce_backward(spec.reduction(), d, batch, steps, spec.layers[temporal - 1].units);
    }
    for i in (0..spec.layers.len()).rev() {
        let l = &spec.layers[i];
        if let Some(mask) = &trace.masks[i] {
            for (g, &m) in d.iter_mut().zip(mask) {
                *g *= m;
            }
        }
        let o = offsets[i];
        let width = input_width(i);
        let s = SeqShape { batch, steps, input: width, hidden: l.units };
        let g = &mut grads.tensors[o..o + tensors_per_layer(l.kind)];
        d = match (&trace.caches[i], l.kind) {
            (LayerCache::Affine { x, y }, LayerKind::Dense) => {
                let (gw, gb) = g.split_at_mut(1);
                affine_backward(&t[o].data, x, y, d, batch, width, l.units, true, &mut gw[0].data, &mut gb[0].data)
            }
            (LayerCache::Conv(c), LayerKind::Conv1D) => {
                let (gw, gb) = g.split_at_mut(1);
                conv_backward(&t[o].data, c, d, batch, steps, width, l.units, &mut gw[0].data, &mut gb[0].data)
            }
            (LayerCache::Gru(c), LayerKind::Gru) => gru_backward(&recurrent(t, o), c, &d, s, &mut recurrent_grads(g)),
            (LayerCache::Lstm(c), LayerKind::Lstm) => lstm_backward(&recurrent(t, o), c, &d, s, &mut recurrent_grads(g)),
            (LayerCache::Attention(c), LayerKind::Attention) => {
                attention_backward(&attention(t, o), c, &d, s, &mut attention_grads(g))
            }
            _ => return Err(Error::shape("trace does not belong to this spec")),
        };
        if i == temporal && i > 0 {
            d = reduce_backward(spec.reduction(), d, batch, steps, spec.layers[i - 1].units);
        }
    }
    Ok(grads)
}

fn recurrent_grads<F>(g: &mut [Tensor<F>]) -> RecurrentGrads<'_, F> {
    let [w_ih, w_hh, b_ih, b_hh] = g else { unreachable!("recurrent layers own four tensors") };
    RecurrentGrads { w_ih: &mut w_ih.data, w_hh: &mut w_hh.data, b_ih: &mut b_ih.data, b_hh: &mut b_hh.data }
}

fn attention_grads<F>(g: &mut [Tensor<F>]) -> AttentionGrads<'_, F> {
    let [wi, bi, wq, bq, wk, bk, wv, bv, wo, bo] = g else { unreachable!("attention owns ten tensors") };
    AttentionGrads {
        w: [&mut wi.data, &mut wq.data, &mut wk.data, &mut wv.data, &mut wo.data],
        b: [&mut bi.data, &mut bq.data, &mut bk.data, &mut bv.data, &mut bo.data],
    }
}

/// Inference in chunks; dropout off.
pub fn predict<F: Scalar>(spec: &ModelSpec, dims: Dims, params: &ParamSet<F>, x: &[F], batch: usize) -> Result<Vec<F>> {
    const CHUNK: usize = 512;
    let w = dims.lookback * dims.features;
    let mut out = Vec::with_capacity(batch * dims.features);
    for start in (0..batch).step_by(CHUNK) {
        let n = CHUNK.min(batch - start);
        let trace = forward::<F, rand_chacha::ChaCha8Rng>(spec, dims, params, &x[start * w..(start + n) * w], n, Mode::Eval)?;
        out.extend_from_slice(&trace.output);
    }
    Ok(out)
}
