//! Forward and backward kernels for each layer kind.
//!
//! Sequences are row-major `[B, T, C]`; vectors are `[B, C]`. Each forward
//! returns the output plus whatever the matching backward needs, and each
//! backward accumulates parameter gradients and returns the input gradient.

use alloc::vec;
use alloc::vec::Vec;

use super::scalar::{add_col_sums, add_row_bias, gemm, sigmoid, Scalar, View, ViewMut};
use super::spec::{ATTENTION_HEADS, CONV_KERNEL};

fn relu_inplace<F: Scalar>(v: &mut [F]) {
    for x in v {
        if *x < F::zero() {
            *x = F::zero();
        }
    }
}

fn relu_mask<F: Scalar>(grad: &mut [F], out: &[F]) {
    for (g, &y) in grad.iter_mut().zip(out) {
        if y <= F::zero() {
            *g = F::zero();
        }
    }
}

/// `y = act(x·wᵀ + b)` on `rows` independent vectors.
pub(crate) fn affine_forward<F: Scalar>(
    w: &[F],
    b: &[F],
    x: &[F],
    rows: usize,
    input: usize,
    units: usize,
    relu: bool,
) -> Vec<F> {
    let mut y = vec![F::zero(); rows * units];
    gemm(View::new(x, rows, input), View::new(w, units, input).t(), F::zero(), ViewMut::new(&mut y, rows, units));
    add_row_bias(&mut y, units, b);
    if relu {
        relu_inplace(&mut y);
    }
    y
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn affine_backward<F: Scalar>(
    w: &[F],
    x: &[F],
    y: &[F],
    mut dy: Vec<F>,
    rows: usize,
    input: usize,
    units: usize,
    relu: bool,
    gw: &mut [F],
    gb: &mut [F],
) -> Vec<F> {
    if relu {
        relu_mask(&mut dy, y);
    }
    gemm(View::new(&dy, rows, units).t(), View::new(x, rows, input), F::one(), ViewMut::new(gw, units, input));
    add_col_sums(&dy, rows, units, gb);
    let mut dx = vec![F::zero(); rows * input];
    gemm(View::new(&dy, rows, units), View::new(w, units, input), F::zero(), ViewMut::new(&mut dx, rows, input));
    dx
}

pub(crate) struct ConvCache<F> {
    col: Vec<F>,
    y: Vec<F>,
}

/// Same-padded 1-D convolution over time (kernel 3) followed by ReLU.
/// Weight layout `[units, channels, 3]`.
pub(crate) fn conv_forward<F: Scalar>(
    w: &[F],
    b: &[F],
    x: &[F],
    batch: usize,
    steps: usize,
    channels: usize,
    units: usize,
) -> (Vec<F>, ConvCache<F>) {
    let k = CONV_KERNEL;
    let width = channels * k;
    let mut col = vec![F::zero(); batch * steps * width];
    for bi in 0..batch {
        for t in 0..steps {
            let dst = &mut col[(bi * steps + t) * width..(bi * steps + t + 1) * width];
            for j in 0..k {
                let src_t = t as isize + j as isize - (k as isize / 2);
                if src_t < 0 || src_t >= steps as isize {
                    continue;
                }
                let src = &x[(bi * steps + src_t as usize) * channels..][..channels];
                for (i, &v) in src.iter().enumerate() {
                    dst[i * k + j] = v;
                }
            }
        }
    }
    let y = affine_forward(w, b, &col, batch * steps, width, units, true);
    (y.clone(), ConvCache { col, y })
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward<F: Scalar>(
    w: &[F],
    cache: &ConvCache<F>,
    dy: Vec<F>,
    batch: usize,
    steps: usize,
    channels: usize,
    units: usize,
    gw: &mut [F],
    gb: &mut [F],
) -> Vec<F> {
    let k = CONV_KERNEL;
    let width = channels * k;
    let dcol = affine_backward(w, &cache.col, &cache.y, dy, batch * steps, width, units, true, gw, gb);
    let mut dx = vec![F::zero(); batch * steps * channels];
    for bi in 0..batch {
        for t in 0..steps {
            let src = &dcol[(bi * steps + t) * width..(bi * steps + t + 1) * width];
            for j in 0..k {
                let dst_t = t as isize + j as isize - (k as isize / 2);
                if dst_t < 0 || dst_t >= steps as isize {
                    continue;
                }
                let dst = &mut dx[(bi * steps + dst_t as usize) * channels..][..channels];
                for (i, d) in dst.iter_mut().enumerate() {
                    *d += src[i * k + j];
                }
            }
        }
    }
    dx
}

/// Recurrent weights shared by GRU and LSTM: `w_ih [G·h, in]`,
/// `w_hh [G·h, h]`, `b_ih [G·h]`, `b_hh [G·h]` with G gate blocks.
pub(crate) struct RecurrentParams<'a, F> {
    pub w_ih: &'a [F],
    pub w_hh: &'a [F],
    pub b_ih: &'a [F],
    pub b_hh: &'a [F],
}

pub(crate) struct RecurrentGrads<'a, F> {
    pub w_ih: &'a mut [F],
    pub w_hh: &'a mut [F],
    pub b_ih: &'a mut [F],
    pub b_hh: &'a mut [F],
}

#[derive(Clone, Copy)]
pub(crate) struct SeqShape {
    pub batch: usize,
    pub steps: usize,
    pub input: usize,
    pub hidden: usize,
}

/// `h_{t-1}·w_hhᵀ + b_hh` for every batch row; zero state at t = 0.
fn hidden_projection<F: Scalar>(p: &RecurrentParams<'_, F>, hs: &[F], t: usize, s: SeqShape, gates: usize, out: &mut [F]) {
    let (h, g) = (s.hidden, gates * s.hidden);
    if t == 0 {
        for row in out.chunks_exact_mut(g) {
            row.copy_from_slice(p.b_hh);
        }
    } else {
        gemm(
            View::strided(&hs[(t - 1) * h..], s.batch, h, s.steps * h),
            View::new(p.w_hh, g, h).t(),
            F::zero(),
            ViewMut::new(out, s.batch, g),
        );
        add_row_bias(out, g, p.b_hh);
    }
}

/// Input-side gradients shared by both recurrent kinds, given the gate
/// pre-activation gradients for every timestep.
fn recurrent_input_backward<F: Scalar>(
    p: &RecurrentParams<'_, F>,
    x: &[F],
    dgates: &[F],
    s: SeqShape,
    g: usize,
    grads: &mut RecurrentGrads<'_, F>,
) -> Vec<F> {
    let rows = s.batch * s.steps;
    gemm(View::new(dgates, rows, g).t(), View::new(x, rows, s.input), F::one(), ViewMut::new(grads.w_ih, g, s.input));
    add_col_sums(dgates, rows, g, grads.b_ih);
    let mut dx = vec![F::zero(); rows * s.input];
    gemm(View::new(dgates, rows, g), View::new(p.w_ih, g, s.input), F::zero(), ViewMut::new(&mut dx, rows, s.input));
    dx
}

fn hidden_weight_backward<F: Scalar>(
    p: &RecurrentParams<'_, F>,
    hs: &[F],
    dg: &[F],
    t: usize,
    s: SeqShape,
    g: usize,
    grads: &mut RecurrentGrads<'_, F>,
    dh_prev: &mut [F],
    accumulate: bool,
) {
    let h = s.hidden;
    add_col_sums(dg, s.batch, g, grads.b_hh);
    if t == 0 {
        return;
    }
    gemm(
        View::new(dg, s.batch, g).t(),
        View::strided(&hs[(t - 1) * h..], s.batch, h, s.steps * h),
        F::one(),
        ViewMut::new(grads.w_hh, g, h),
    );
    let beta = if accumulate { F::one() } else { F::zero() };
    gemm(View::new(dg, s.batch, g), View::new(p.w_hh, g, h), beta, ViewMut::new(dh_prev, s.batch, h));
}

pub(crate) struct GruCache<F> {
    x: Vec<F>,
    hs: Vec<F>,
    r: Vec<F>,
    z: Vec<F>,
    n: Vec<F>,
    ghn: Vec<F>,
}

/// GRU with gate order (r, z, n):
/// `n = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))`, `h' = (1 − z) ⊙ n + z ⊙ h`.
pub(crate) fn gru_forward<F: Scalar>(p: &RecurrentParams<'_, F>, x: &[F], s: SeqShape) -> (Vec<F>, GruCache<F>) {
    let (h, rows) = (s.hidden, s.batch * s.steps);
    let g = 3 * h;
    let gi = affine_forward(p.w_ih, p.b_ih, x, rows, s.input, g, false);
    let mut hs = vec![F::zero(); rows * h];
    let mut r = vec![F::zero(); rows * h];
    let mut z = vec![F::zero(); rows * h];
    let mut n = vec![F::zero(); rows * h];
    let mut ghn = vec![F::zero(); rows * h];
    let mut gh = vec![F::zero(); s.batch * g];
    for t in 0..s.steps {
        hidden_projection(p, &hs, t, s, 3, &mut gh);
        for bi in 0..s.batch {
            let idx = bi * s.steps + t;
            let gi_row = &gi[idx * g..(idx + 1) * g];
            let gh_row = &gh[bi * g..(bi + 1) * g];
            for j in 0..h {
                let rj = sigmoid(gi_row[j] + gh_row[j]);
                let zj = sigmoid(gi_row[h + j] + gh_row[h + j]);
                let nj = (gi_row[2 * h + j] + rj * gh_row[2 * h + j]).tanh();
                let prev = if t > 0 { hs[(idx - 1) * h + j] } else { F::zero() };
                let o = idx * h + j;
                r[o] = rj;
                z[o] = zj;
                n[o] = nj;
                ghn[o] = gh_row[2 * h + j];
                hs[o] = (F::one() - zj) * nj + zj * prev;
            }
        }
    }
    (hs.clone(), GruCache { x: x.to_vec(), hs, r, z, n, ghn })
}

pub(crate) fn gru_backward<F: Scalar>(
    p: &RecurrentParams<'_, F>,
    c: &GruCache<F>,
    dy: &[F],
    s: SeqShape,
    grads: &mut RecurrentGrads<'_, F>,
) -> Vec<F> {
    let (h, rows) = (s.hidden, s.batch * s.steps);
    let g = 3 * h;
    let mut dgi = vec![F::zero(); rows * g];
    let mut dgh = vec![F::zero(); s.batch * g];
    let mut dh_next = vec![F::zero(); s.batch * h];
    let one = F::one();
    for t in (0..s.steps).rev() {
        for bi in 0..s.batch {
            let idx = bi * s.steps + t;
            for j in 0..h {
                let o = idx * h + j;
                let dh = dy[o] + dh_next[bi * h + j];
                let (rj, zj, nj) = (c.r[o], c.z[o], c.n[o]);
                let prev = if t > 0 { c.hs[o - h] } else { F::zero() };
                let dn = dh * (one - zj);
                let dz = dh * (prev - nj);
                let dan = dn * (one - nj * nj);
                let dar = dan * c.ghn[o] * rj * (one - rj);
                let daz = dz * zj * (one - zj);
                let gi_row = &mut dgi[idx * g..(idx + 1) * g];
                gi_row[j] = dar;
                gi_row[h + j] = daz;
                gi_row[2 * h + j] = dan;
                let gh_row = &mut dgh[bi * g..(bi + 1) * g];
                gh_row[j] = dar;
                gh_row[h + j] = daz;
                gh_row[2 * h + j] = dan * rj;
                dh_next[bi * h + j] = dh * zj;
            }
        }
        hidden_weight_backward(p, &c.hs, &dgh, t, s, g, grads, &mut dh_next, true);
    }
    recurrent_input_backward(p, &c.x, &dgi, s, g, grads)
}

pub(crate) struct LstmCache<F> {
    x: Vec<F>,
    hs: Vec<F>,
    cs: Vec<F>,
    /// Activated gates `[B·T, 4h]` in order (i, f, g, o).
    gates: Vec<F>,
}

/// LSTM with gate order (i, f, g, o) and zero initial state.
pub(crate) fn lstm_forward<F: Scalar>(p: &RecurrentParams<'_, F>, x: &[F], s: SeqShape) -> (Vec<F>, LstmCache<F>) {
    let (h, rows) = (s.hidden, s.batch * s.steps);
    let g = 4 * h;
    let mut gates = affine_forward(p.w_ih, p.b_ih, x, rows, s.input, g, false);
    let mut hs = vec![F::zero(); rows * h];
    let mut cs = vec![F::zero(); rows * h];
    let mut gh = vec![F::zero(); s.batch * g];
    for t in 0..s.steps {
        hidden_projection(p, &hs, t, s, 4, &mut gh);
        for bi in 0..s.batch {
            let idx = bi * s.steps + t;
            let row = &mut gates[idx * g..(idx + 1) * g];
            let gh_row = &gh[bi * g..(bi + 1) * g];
            for j in 0..h {
                let i = sigmoid(row[j] + gh_row[j]);
                let f = sigmoid(row[h + j] + gh_row[h + j]);
                let gg = (row[2 * h + j] + gh_row[2 * h + j]).tanh();
                let o = sigmoid(row[3 * h + j] + gh_row[3 * h + j]);
                row[j] = i;
                row[h + j] = f;
                row[2 * h + j] = gg;
                row[3 * h + j] = o;
                let c_prev = if t > 0 { cs[(idx - 1) * h + j] } else { F::zero() };
                let cell = f * c_prev + i * gg;
                cs[idx * h + j] = cell;
                hs[idx * h + j] = o * cell.tanh();
            }
        }
    }
    (hs.clone(), LstmCache { x: x.to_vec(), hs, cs, gates })
}

pub(crate) fn lstm_backward<F: Scalar>(
    p: &RecurrentParams<'_, F>,
    c: &LstmCache<F>,
    dy: &[F],
    s: SeqShape,
    grads: &mut RecurrentGrads<'_, F>,
) -> Vec<F> {
    let (h, rows) = (s.hidden, s.batch * s.steps);
    let g = 4 * h;
    let mut dgates = vec![F::zero(); rows * g];
    let mut dga = vec![F::zero(); s.batch * g];
    let mut dh_next = vec![F::zero(); s.batch * h];
    let mut dc_next = vec![F::zero(); s.batch * h];
    let one = F::one();
    for t in (0..s.steps).rev() {
        for bi in 0..s.batch {
            let idx = bi * s.steps + t;
            let row = &c.gates[idx * g..(idx + 1) * g];
            for j in 0..h {
                let (i, f, gg, o) = (row[j], row[h + j], row[2 * h + j], row[3 * h + j]);
                let cell = c.cs[idx * h + j];
                let c_prev = if t > 0 { c.cs[(idx - 1) * h + j] } else { F::zero() };
                let tc = cell.tanh();
                let dh = dy[idx * h + j] + dh_next[bi * h + j];
                let dout = dh * tc;
                let dc = dc_next[bi * h + j] + dh * o * (one - tc * tc);
                let da = [
                    dc * gg * i * (one - i),
                    dc * c_prev * f * (one - f),
                    dc * i * (one - gg * gg),
                    dout * o * (one - o),
                ];
                dc_next[bi * h + j] = dc * f;
                for (q, &v) in da.iter().enumerate() {
                    dgates[idx * g + q * h + j] = v;
                    dga[bi * g + q * h + j] = v;
                }
            }
        }
        hidden_weight_backward(p, &c.hs, &dga, t, s, g, grads, &mut dh_next, false);
        if t == 0 {
            dh_next.iter_mut().for_each(|v| *v = F::zero());
        }
    }
    recurrent_input_backward(p, &c.x, &dgates, s, g, grads)
}

/// Attention parameters in storage order: input projection, then Q, K, V
/// and output projections, each as (weight, bias).
pub(crate) struct AttentionParams<'a, F> {
    pub w: [&'a [F]; 5],
    pub b: [&'a [F]; 5],
}

pub(crate) struct AttentionGrads<'a, F> {
    pub w: [&'a mut [F]; 5],
    pub b: [&'a mut [F]; 5],
}

const PROJ_IN: usize = 0;
const PROJ_Q: usize = 1;
const PROJ_K: usize = 2;
const PROJ_V: usize = 3;
const PROJ_OUT: usize = 4;

pub(crate) struct AttentionCache<F> {
    x: Vec<F>,
    p: Vec<F>,
    q: Vec<F>,
    k: Vec<F>,
    v: Vec<F>,
    /// Softmax weights `[B, heads, T, T]`.
    a: Vec<F>,
    ctx: Vec<F>,
}

/// Multi-head self-attention over time with a learned input projection,
/// no positional encoding, and a residual around the attention block:
/// `y = P + softmax(QKᵀ/√d_h)V·W_oᵀ + b_o` with `P = x·W_inᵀ + b_in`.
pub(crate) fn attention_forward<F: Scalar>(
    prm: &AttentionParams<'_, F>,
    x: &[F],
    s: SeqShape,
) -> (Vec<F>, AttentionCache<F>) {
    let (d, rows, steps) = (s.hidden, s.batch * s.steps, s.steps);
    let heads = ATTENTION_HEADS;
    let dh = d / heads;
    let scale = F::one() / F::of(dh as f64).sqrt();
    let p = affine_forward(prm.w[PROJ_IN], prm.b[PROJ_IN], x, rows, s.input, d, false);
    let q = affine_forward(prm.w[PROJ_Q], prm.b[PROJ_Q], &p, rows, d, d, false);
    let k = affine_forward(prm.w[PROJ_K], prm.b[PROJ_K], &p, rows, d, d, false);
    let v = affine_forward(prm.w[PROJ_V], prm.b[PROJ_V], &p, rows, d, d, false);
    let mut a = vec![F::zero(); s.batch * heads * steps * steps];
    let mut ctx = vec![F::zero(); rows * d];
    for bi in 0..s.batch {
        for hd in 0..heads {
            let off = hd * dh;
            for t in 0..steps {
                let qt = &q[(bi * steps + t) * d + off..][..dh];
                let arow = &mut a[((bi * heads + hd) * steps + t) * steps..][..steps];
                let mut max = F::neg_infinity();
                for (sx, av) in arow.iter_mut().enumerate() {
                    let ks = &k[(bi * steps + sx) * d + off..][..dh];
                    let dot = qt.iter().zip(ks).fold(F::zero(), |acc, (&a, &b)| acc + a * b) * scale;
                    *av = dot;
                    max = max.max(dot);
                }
                let mut sum = F::zero();
                for av in arow.iter_mut() {
                    *av = (*av - max).exp();
                    sum += *av;
                }
                for av in arow.iter_mut() {
                    *av = *av / sum;
                }
                let ct = &mut ctx[(bi * steps + t) * d + off..][..dh];
                for (sx, &w) in arow.iter().enumerate() {
                    let vs = &v[(bi * steps + sx) * d + off..][..dh];
                    for (c, &vv) in ct.iter_mut().zip(vs) {
                        *c += w * vv;
                    }
                }
            }
        }
    }
    let mut y = affine_forward(prm.w[PROJ_OUT], prm.b[PROJ_OUT], &ctx, rows, d, d, false);
    for (yv, &pv) in y.iter_mut().zip(&p) {
        *yv += pv;
    }
    (y, AttentionCache { x: x.to_vec(), p, q, k, v, a, ctx })
}

pub(crate) fn attention_backward<F: Scalar>(
    prm: &AttentionParams<'_, F>,
    c: &AttentionCache<F>,
    dy: &[F],
    s: SeqShape,
    grads: &mut AttentionGrads<'_, F>,
) -> Vec<F> {
    let (d, rows, steps) = (s.hidden, s.batch * s.steps, s.steps);
    let heads = ATTENTION_HEADS;
    let dh = d / heads;
    let scale = F::one() / F::of(dh as f64).sqrt();

    let [gw_in, gw_q, gw_k, gw_v, gw_o] = &mut grads.w;
    let [gb_in, gb_q, gb_k, gb_v, gb_o] = &mut grads.b;

    // Output projection; the residual passes dy straight to P.
    let mut dp = dy.to_vec();
    let dctx = affine_backward(prm.w[PROJ_OUT], &c.ctx, &[], dy.to_vec(), rows, d, d, false, gw_o, gb_o);

    let mut dq = vec![F::zero(); rows * d];
    let mut dk = vec![F::zero(); rows * d];
    let mut dv = vec![F::zero(); rows * d];
    let mut da = vec![F::zero(); steps];
    for bi in 0..s.batch {
        for hd in 0..heads {
            let off = hd * dh;
            for t in 0..steps {
                let arow = &c.a[((bi * heads + hd) * steps + t) * steps..][..steps];
                let dct = &dctx[(bi * steps + t) * d + off..][..dh];
                for sx in 0..steps {
                    let base = (bi * steps + sx) * d + off;
                    let vs = &c.v[base..base + dh];
                    da[sx] = dct.iter().zip(vs).fold(F::zero(), |acc, (&a, &b)| acc + a * b);
                    for (dvv, &g) in dv[base..base + dh].iter_mut().zip(dct) {
                        *dvv += arow[sx] * g;
                    }
                }
                let dot = arow.iter().zip(&da).fold(F::zero(), |acc, (&a, &b)| acc + a * b);
                let qbase = (bi * steps + t) * d + off;
                for sx in 0..steps {
                    let ds = arow[sx] * (da[sx] - dot) * scale;
                    if ds == F::zero() {
                        continue;
                    }
                    let kbase = (bi * steps + sx) * d + off;
                    for e in 0..dh {
                        dq[qbase + e] += ds * c.k[kbase + e];
                        dk[kbase + e] += ds * c.q[qbase + e];
                    }
                }
            }
        }
    }
    for (grad, which, gw, gb) in [
        (dq, PROJ_Q, &mut **gw_q, &mut **gb_q),
        (dk, PROJ_K, &mut **gw_k, &mut **gb_k),
        (dv, PROJ_V, &mut **gw_v, &mut **gb_v),
    ] {
        let dpi = affine_backward(prm.w[which], &c.p, &[], grad, rows, d, d, false, gw, gb);
        for (a, b) in dp.iter_mut().zip(&dpi) {
            *a += *b;
        }
    }
    affine_backward(prm.w[PROJ_IN], &c.x, &[], dp, rows, s.input, d, false, gw_in, gb_in)
}
