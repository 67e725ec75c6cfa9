use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use wxnas_core::nas::Genome;
use wxnas_core::nn::{backward, count_params, forward, init_weights, mse_grad, param_layout, predict, Dims, Mode, ModelSpec, ParamSet};
use wxnas_core::rng::seeded;

fn spec(s: &str) -> ModelSpec {
    s.parse().unwrap()
}

fn ramp(batch: usize, dims: Dims) -> Vec<f32> {
    (0..batch * dims.lookback * dims.features).map(|i| ((i * 37) % 100) as f32 / 100.0).collect()
}

fn eval(spec: &ModelSpec, dims: Dims, p: &ParamSet<f32>, x: &[f32], batch: usize) -> Vec<f32> {
    forward(spec, dims, p, x, batch, Mode::<ChaCha8Rng>::Eval).unwrap().output
}

#[test]
fn zero_weights_output_head_bias() {
    let dims = Dims::default();
    for desc in ["dense32", "cnn32", "gru32", "lstm32", "attn32", "gru32-lstm32-dense64"] {
        let s = spec(desc);
        let mut p: ParamSet<f32> = init_weights(&s, dims, 1);
        for t in &mut p.tensors {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
        let bias: Vec<f32> = (0..8).map(|f| f as f32 * 0.1 - 0.3).collect();
        p.get_mut("head.bias").unwrap().data.clone_from(&bias);
        let out = eval(&s, dims, &p, &ramp(3, dims), 3);
        for b in 0..3 {
            assert_eq!(&out[b * 8..(b + 1) * 8], bias.as_slice(), "{desc}");
        }
    }
}

#[test]
fn identity_dense_reproduces_reduced_input() {
    // A dense-only model sees the flattened window; identity weights pass its
    // first 32 values, and an identity head exposes the first 8 (the oldest row).
    let dims = Dims::default();
    let s = spec("dense32");
    let mut p: ParamSet<f32> = init_weights(&s, dims, 0);
    for t in &mut p.tensors {
        t.data.iter_mut().for_each(|v| *v = 0.0);
    }
    let w = p.get_mut("l0.dense.weight").unwrap();
    for u in 0..32 {
        w.data[u * 192 + u] = 1.0;
    }
    let h = p.get_mut("head.weight").unwrap();
    for f in 0..8 {
        h.data[f * 32 + f] = 1.0;
    }
    let x = ramp(2, dims);
    let out = eval(&s, dims, &p, &x, 2);
    assert_eq!(&out[..8], &x[..8]);
    assert_eq!(&out[8..], &x[192..200]);
}

#[test]
fn duplicated_rows_give_duplicated_outputs() {
    let dims = Dims::default();
    for desc in ["cnn32-dense32", "gru32x2", "lstm32-attn32", "dense64"] {
        let s = spec(desc);
        let p: ParamSet<f32> = init_weights(&s, dims, 4);
        let one = ramp(1, dims);
        let x: Vec<f32> = one.iter().chain(&one).chain(&one).copied().collect();
        let out = eval(&s, dims, &p, &x, 3);
        assert_eq!(out[..8], out[8..16]);
        assert_eq!(out[..8], out[16..]);
        assert_eq!(eval(&s, dims, &p, &one, 1), out[..8]);
    }
}

#[test]
fn eval_is_deterministic_and_predict_matches_forward() {
    let dims = Dims::default();
    let s = spec("gru32@0.3-dense32@0.5");
    let p: ParamSet<f32> = init_weights(&s, dims, 8);
    let x = ramp(700, dims);
    let a = predict(&s, dims, &p, &x, 700).unwrap();
    assert_eq!(a, predict(&s, dims, &p, &x, 700).unwrap());
    assert_eq!(a, eval(&s, dims, &p, &x, 700));
}

#[test]
fn rejects_bad_inputs() {
    let dims = Dims::default();
    let s = spec("cnn32");
    let p: ParamSet<f32> = init_weights(&s, dims, 0);
    let mut x = ramp(2, dims);
    assert!(forward(&s, dims, &p, &x[..100], 2, Mode::<ChaCha8Rng>::Eval).is_err());
    x[5] = f32::NAN;
    assert!(forward(&s, dims, &p, &x, 2, Mode::<ChaCha8Rng>::Eval).is_err());
}

#[test]
fn head_bias_gradient_closed_form() {
    let dims = Dims::default();
    let s = spec("dense32");
    let mut p: ParamSet<f64> = init_weights(&s, dims, 0);
    for t in &mut p.tensors {
        t.data.iter_mut().for_each(|v| *v = 0.0);
    }
    let batch = 4;
    let x: Vec<f64> = (0..batch * 192).map(|i| (i % 13) as f64 / 13.0).collect();
    let y: Vec<f64> = (0..batch * 8).map(|i| (i % 5) as f64 / 5.0).collect();
    let tr = forward(&s, dims, &p, &x, batch, Mode::<ChaCha8Rng>::Eval).unwrap();
    let g = backward(&s, dims, &p, &tr, &mse_grad(&tr.output, &y)).unwrap();
    let gb = &g.get("head.bias").unwrap().data;
    for f in 0..8 {
        let mean_err: f64 = (0..batch).map(|b| tr.output[b * 8 + f] - y[b * 8 + f]).sum::<f64>() / batch as f64;
        // Loss averages over all B·F elements, so each bias sees 2·mean/F.
        assert!((gb[f] - 2.0 * mean_err / 8.0).abs() < 1e-12);
    }
}

#[test]
fn dropped_units_receive_no_gradient() {
    let dims = Dims::default();
    let s = spec("dense32@0.5");
    let p: ParamSet<f64> = init_weights(&s, dims, 2);
    let x: Vec<f64> = (0..192).map(|i| (i % 7) as f64 / 7.0 + 0.1).collect();
    let y = vec![0.5; 8];
    let mut rng = seeded(3);
    let tr = forward(&s, dims, &p, &x, 1, Mode::Train(&mut rng)).unwrap();
    let g = backward(&s, dims, &p, &tr, &mse_grad(&tr.output, &y)).unwrap();
    let gw = &g.get("l0.dense.weight").unwrap().data;
    let gh = &g.get("head.weight").unwrap().data;
    let mut silent = 0;
    for u in 0..32 {
        let head_col_zero = (0..8).all(|f| gh[f * 32 + u] == 0.0);
        let row_zero = gw[u * 192..(u + 1) * 192].iter().all(|v| *v == 0.0);
        assert_eq!(head_col_zero, row_zero, "unit {u}");
        silent += usize::from(row_zero);
    }
    assert!(silent > 0);
}

#[test]
fn init_is_seeded_and_bounded() {
    let dims = Dims::default();
    let s = spec("gru64-attn64-dense32");
    let a: ParamSet<f32> = init_weights(&s, dims, 5);
    assert_eq!(a, init_weights(&s, dims, 5));
    assert_ne!(a, init_weights::<f32>(&s, dims, 6));
    let mut fan_in = 1;
    for t in &a.tensors {
        if t.shape.len() >= 2 {
            fan_in = t.shape[1..].iter().product::<usize>();
        }
        let bound = 1.0 / (fan_in as f32).sqrt();
        assert!(t.data.iter().all(|v| v.abs() <= bound * (1.0 + 1e-6)), "{}", t.name);
    }
}

proptest! {
    #[test]
    fn count_matches_initialized_scalars(seed in any::<u64>()) {
        let g = Genome::random(&mut seeded(seed));
        let s = g.decode();
        let dims = Dims::default();
        let p: ParamSet<f32> = init_weights(&s, dims, seed);
        prop_assert_eq!(p.scalar_count(), count_params(&s, dims));
        let layout_total: usize = param_layout(&s, dims).iter().map(|(_, sh)| sh.iter().product::<usize>()).sum();
        prop_assert_eq!(layout_total, count_params(&s, dims));
    }
}
