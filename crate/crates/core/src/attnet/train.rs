//! Masked-reconstruction training: seeded shuffling, fresh masks every epoch,
//! mini-batch gradient averaging, and an adaptive-moments (or plain SGD)
//! parameter update. Per-trial gradients inside a batch are computed in
//! parallel and reduced in a fixed order, so runs are bit-reproducible.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::par;
use crate::trialio::TrialSet;

use super::backward::backward;
use super::forward::{forward, loss_mse, mask_input};
use super::params::{init_params, ModelParams};
use super::{substream, NetConfig, NetError, Optimizer, TrainConfig};

const TAG_SHUFFLE: u64 = 0x5348;
const TAG_MASK: u64 = 0x4d41;

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub params: ModelParams,
    /// Mean masked-reconstruction loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Mean gradient and mean loss over `(input, target)` pairs; the map over
/// pairs runs in parallel, the reduction is sequential in input order.
pub fn batch_gradient(
    params: &ModelParams,
    pairs: &[(Array2<f64>, Array2<f64>)],
) -> Result<(ModelParams, f64), NetError> {
    let results = par::map_collect(pairs, |(input, target)| -> Result<_, NetError> {
        let trace = forward(params, input)?;
        let loss = loss_mse(&trace.reconstruction, target)?;
        let grads = backward(params, &trace, target)?;
        Ok((grads, loss))
    });
    let mut total = ModelParams::zeros(&params.cfg)?;
    let mut loss_sum = 0.0;
    for r in results {
        let (g, l) = r?;
        total.add_assign(&g);
        loss_sum += l;
    }
    let n = pairs.len() as f64;
    total.scale(1.0 / n);
    Ok((total, loss_sum / n))
}

struct AdamState {
    m: ModelParams,
    v: ModelParams,
    step: u64,
}

fn apply_update(
    params: &mut ModelParams,
    grads: &ModelParams,
    cfg: &TrainConfig,
    adam: &mut Option<AdamState>,
) {
    match cfg.optimizer {
        Optimizer::PlainSgd => {
            for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
                for (x, dg) in p.iter_mut().zip(g) {
                    *x -= cfg.learning_rate * dg;
                }
            }
        }
        Optimizer::AdaptiveMoments => {
            let state = adam.as_mut().expect("adam state initialized");
            state.step += 1;
            let (b1, b2) = cfg.moment_decays;
            let bc1 = 1.0 - b1.powi(state.step as i32);
            let bc2 = 1.0 - b2.powi(state.step as i32);
            let mut m_t = state.m.tensors_mut();
            let mut v_t = state.v.tensors_mut();
            let g_t = grads.tensors();
            for (ti, p) in params.tensors_mut().into_iter().enumerate() {
                let m = &mut m_t[ti];
                let v = &mut v_t[ti];
                let g = g_t[ti];
                for k in 0..p.len() {
                    m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                    v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                    let m_hat = m[k] / bc1;
                    let v_hat = v[k] / bc2;
                    p[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon_hat);
                }
            }
        }
    }
}

/// Trains the autoencoder on all trials of `set` (labels are never read).
pub fn train(
    set: &TrialSet,
    net_cfg: &NetConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainResult, NetError> {
    net_cfg.validate()?;
    train_cfg.validate()?;
    if set.is_empty() {
        return Err(NetError::EmptySet);
    }
    let t_len = set.trials()[0].n_samples();
    for t in set.trials() {
        if t.n_channels() != net_cfg.n_c || t.n_samples() != t_len {
            return Err(NetError::ShapeMismatch {
                what: "training trial",
                expected: format!("{} x {t_len}", net_cfg.n_c),
                found: format!("{} x {}", t.n_channels(), t.n_samples()),
            });
        }
    }

    let mut params = init_params(net_cfg, train_cfg.seed)?;
    let mut adam = match train_cfg.optimizer {
        Optimizer::AdaptiveMoments => Some(AdamState {
            m: ModelParams::zeros(net_cfg)?,
            v: ModelParams::zeros(net_cfg)?,
            step: 0,
        }),
        Optimizer::PlainSgd => None,
    };

    let n_trials = set.len();
    let mut epoch_losses = Vec::with_capacity(train_cfg.epochs);

    for epoch in 0..train_cfg.epochs {
        let mut order: Vec<usize> = (0..n_trials).collect();
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(substream(
            train_cfg.seed,
            TAG_SHUFFLE,
            epoch as u64,
        ));
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        for batch in order.chunks(train_cfg.batch_size) {
            // Masks are a function of (seed, epoch, canonical trial index),
            // not of the shuffled position, so a trial's masked view does not
            // depend on batch composition.
            let pairs: Vec<(Array2<f64>, Array2<f64>)> = batch
                .iter()
                .map(|&idx| {
                    let x = &set.trials()[idx].data;
                    let mut mask_rng = ChaCha8Rng::seed_from_u64(substream(
                        train_cfg.seed.wrapping_add(epoch as u64),
                        TAG_MASK,
                        idx as u64,
                    ));
                    let masked = mask_input(x, net_cfg.p1, net_cfg.p2, &mut mask_rng);
                    (masked, x.clone())
                })
                .collect();
            let (grads, mean_loss) = batch_gradient(&params, &pairs).map_err(|e| match e {
                NetError::NonFiniteActivation(w) => {
                    NetError::NonFiniteActivation(format!("epoch {epoch}: {w}"))
                }
                other => other,
            })?;
            loss_sum += mean_loss * batch.len() as f64;
            apply_update(&mut params, &grads, train_cfg, &mut adam);
        }
        params.assert_finite(&format!("after epoch {epoch}"))?;
        epoch_losses.push(loss_sum / n_trials as f64);
    }

    Ok(TrainResult {
        params,
        epoch_losses,
    })
}
