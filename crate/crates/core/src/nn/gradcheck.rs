//! Central finite-difference verification of the analytic gradients.

use alloc::vec::Vec;

use super::network::{backward, forward, init_weights, loss_mse, mse_grad, Mode};
use super::spec::{Dims, ModelSpec};
use super::tensor::ParamSet;
use crate::error::Result;
use crate::rng::{derive_seed, seeded};

/// Worst mismatch between analytic and finite-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub max_relative_error: f64,
    pub worst_tensor: alloc::string::String,
    pub checked: usize,
}

fn loss_at(spec: &ModelSpec, dims: Dims, p: &ParamSet<f64>, x: &[f64], y: &[f64], batch: usize, seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let tr = forward(spec, dims, p, x, batch, Mode::Train(&mut rng))?;
    loss_mse(&tr.output, y)
}

/// Compares every parameter's analytic gradient of the MSE loss with a
/// central difference of step `h`, on random inputs and targets in double
/// precision. Dropout masks are replayed identically for every evaluation.
/// Relative error is `|a − n| / max(|a|, |n|, floor)`.
pub fn check_gradients(spec: &ModelSpec, dims: Dims, batch: usize, seed: u64, h: f64, floor: f64) -> Result<GradientReport> {
    let mut params: ParamSet<f64> = init_weights(spec, dims, seed);
    let mut rng = seeded(derive_seed(seed, 1));
    let n_in = batch * dims.lookback * dims.features;
    let x: Vec<f64> = (0..n_in).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
    let y: Vec<f64> = (0..batch * dims.features).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
    let mask_seed = derive_seed(seed, 2);

    let mut mrng = seeded(mask_seed);
    let trace = forward(spec, dims, &params, &x, batch, Mode::Train(&mut mrng))?;
    let grads = backward(spec, dims, &params, &trace, &mse_grad(&trace.output, &y))?;

    let mut report = GradientReport { max_relative_error: 0.0, worst_tensor: alloc::string::String::new(), checked: 0 };
    for ti in 0..params.tensors.len() {
        for j in 0..params.tensors[ti].data.len() {
            let orig = params.tensors[ti].data[j];
            params.tensors[ti].data[j] = orig + h;
            let up = loss_at(spec, dims, &params, &x, &y, batch, mask_seed)?;
            params.tensors[ti].data[j] = orig - h;
            let down = loss_at(spec, dims, &params, &x, &y, batch, mask_seed)?;
            params.tensors[ti].data[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.tensors[ti].data[j];
            let denom = libm::fabs(analytic).max(libm::fabs(numeric)).max(floor);
            let err = libm::fabs(analytic - numeric) / denom;
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst_tensor.clone_from(&params.tensors[ti].name);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
