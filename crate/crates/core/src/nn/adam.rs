use alloc::string::ToString;

use super::scalar::Scalar;
use super::tensor::ParamSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub m: ParamSet<F>,
    pub v: ParamSet<F>,
    pub step: u64,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(params: &ParamSet<F>) -> Self {
        Self { m: params.zeros_like(), v: params.zeros_like(), step: 0 }
    }
}

/// One bias-corrected Adam update. The first `frozen` tensors are left
/// untouched. Gradients are checked for finiteness before any weight changes.
pub fn adam_step<F: Scalar>(
    params: &mut ParamSet<F>,
    grads: &ParamSet<F>,
    state: &mut AdamState<F>,
    config: &AdamConfig,
    frozen: usize,
) -> Result<()> {
    if !params.same_layout(grads) || !params.same_layout(&state.m) {
        return Err(Error::shape("parameter, gradient and optimizer layouts differ"));
    }
    if let Some(bad) = grads.tensors.iter().find(|t| t.data.iter().any(|g| !g.is_finite())) {
        return Err(Error::NonFiniteGradient(bad.name.to_string()));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let bc1 = 1.0 - libm::pow(b1, f64::from(t));
    let bc2 = 1.0 - libm::pow(b2, f64::from(t));
    let step_size = F::of(config.learning_rate / bc1);
    let bc2_sqrt = F::of(libm::sqrt(bc2));
    let eps = F::of(config.epsilon);
    let (fb1, fb2) = (F::of(b1), F::of(b2));
    let (ob1, ob2) = (F::of(1.0 - b1), F::of(1.0 - b2));
    for (k, ((p, g), (m, v))) in params
        .tensors
        .iter_mut()
        .zip(&grads.tensors)
        .zip(state.m.tensors.iter_mut().zip(state.v.tensors.iter_mut()))
        .enumerate()
    {
        if k < frozen {
            continue;
        }
        for (((w, &gi), mi), vi) in p.data.iter_mut().zip(&g.data).zip(m.data.iter_mut()).zip(v.data.iter_mut()) {
            *mi = fb1 * *mi + ob1 * gi;
            *vi = fb2 * *vi + ob2 * gi * gi;
            let denom = vi.sqrt() / bc2_sqrt + eps;
            *w -= step_size * *mi / denom;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;
    use alloc::vec;

    fn one(vals: &[f64]) -> ParamSet<f64> {
        ParamSet::new(vec![Tensor { name: "w".into(), shape: vec![vals.len()], data: vals.to_vec() }])
    }

    #[test]
    fn zero_gradient_leaves_weights() {
        let mut p = one(&[1.0, -2.0]);
        let g = one(&[0.0, 0.0]);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, &AdamConfig::default(), 0).unwrap();
        assert_eq!(p.tensors[0].data, vec![1.0, -2.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut p = one(&[0.0, 0.0, 0.0]);
        let g = one(&[3.0, -0.5, 1e-3]);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, &AdamConfig::default(), 0).unwrap();
        // m̂ = g, v̂ = g², update = lr·g/(|g| + eps)
        for (w, gi) in p.tensors[0].data.iter().zip(&g.tensors[0].data) {
            let expected = -1e-3 * gi / (gi.abs() + 1e-8);
            assert!((w - expected).abs() < 1e-12, "{w} vs {expected}");
        }
    }

    #[test]
    fn equal_gradients_equal_updates() {
        let mut p = one(&[0.5, 0.5]);
        let g = one(&[0.2, 0.2]);
        let mut s = AdamState::new(&p);
        for _ in 0..5 {
            adam_step(&mut p, &g, &mut s, &AdamConfig::default(), 0).unwrap();
        }
        assert_eq!(p.tensors[0].data[0], p.tensors[0].data[1]);
    }

    #[test]
    fn non_finite_gradient_named() {
        let mut p = one(&[0.0]);
        let g = one(&[f64::NAN]);
        let mut s = AdamState::new(&p);
        let err = adam_step(&mut p, &g, &mut s, &AdamConfig::default(), 0).unwrap_err();
        assert_eq!(err, Error::NonFiniteGradient("w".into()));
        assert_eq!(s.step, 0);
    }
}
