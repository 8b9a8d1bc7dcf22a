//! Central finite-difference verification of the analytic backward pass.
//!
//! The numeric side touches only `forward` + `loss_mse`, so it stays
//! independent of everything `backward` computes.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::forward::{forward, loss_mse, mask_input};
use super::params::{init_params, ModelParams};
use super::{NetConfig, NetError};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub n_params: usize,
}

fn loss_at(params: &ModelParams, input: &Array2<f64>, target: &Array2<f64>) -> Result<f64, NetError> {
    let trace = forward(params, input)?;
    loss_mse(&trace.reconstruction, target)
}

/// Compares every analytic gradient entry against `(L(p+eps) - L(p-eps)) /
/// (2 eps)` on a random masked trial. The per-entry score divides by
/// `max(|analytic|, |numeric|, 1e-4)`, so a reported value below 1e-4 means
/// relative error under 1e-4 with an absolute floor of 1e-8 for entries near
/// zero.
pub fn gradient_check(
    cfg: &NetConfig,
    t_len: usize,
    seed: u64,
    epsilon: f64,
) -> Result<GradCheckReport, NetError> {
    cfg.validate()?;
    let mut params = init_params(cfg, seed)?;

    let mut data_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let x = Array2::from_shape_fn((cfg.n_c, t_len), |_| data_rng.random_range(-1.0..1.0));
    let mut mask_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let masked = mask_input(&x, cfg.p1, cfg.p2, &mut mask_rng);

    let trace = forward(&params, &masked)?;
    let analytic = super::backward::backward(&params, &trace, &x)?;

    let names = params.tensor_names();
    let n_tensors = names.len();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_tensor: String::new(),
        worst_index: 0,
        n_params: params.n_params(),
    };

    for ti in 0..n_tensors {
        let len = analytic.tensors()[ti].len();
        for idx in 0..len {
            let orig = params.tensors()[ti][idx];
            params.tensors_mut()[ti][idx] = orig + epsilon;
            let plus = loss_at(&params, &masked, &x)?;
            params.tensors_mut()[ti][idx] = orig - epsilon;
            let minus = loss_at(&params, &masked, &x)?;
            params.tensors_mut()[ti][idx] = orig;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic.tensors()[ti][idx];
            let denom = a.abs().max(numeric.abs()).max(1e-4);
            let score = (a - numeric).abs() / denom;
            if score > report.max_rel_error {
                report.max_rel_error = score;
                report.worst_tensor = names[ti].clone();
                report.worst_index = idx;
            }
        }
    }
    Ok(report)
}
