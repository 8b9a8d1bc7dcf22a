//! Masked-reconstruction autoencoder over EEG trials.
//!
//! The stack is: 1-D convolutional input embedding, unidirectional LSTM
//! encoder, dot-product self-attention over the encoder hidden states, an
//! LSTM decoder seeded with the encoder's final state and fed the attention
//! context vectors, and a small dense head mapping decoder states back to
//! channel space. Training reconstructs the original trial from a randomly
//! masked copy under mean-squared error; the backward pass is written out
//! analytically and verified against central finite differences.

mod backward;
mod forward;
mod gradcheck;
mod params;
mod train;

pub use backward::backward;
pub use forward::{
    attend, attention_logits_unscaled, decode_reconstruct, embed, encode, forward, loss_mse,
    lstm_step, mask_input, ForwardTrace, LstmStepCache, LstmTrace,
};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use params::{init_params, load_model, save_model, DenseLayer, ModelParams};
pub use train::{batch_gradient, train, TrainResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },
    #[error("non-finite activation in {0}; training diverged")]
    NonFiniteActivation(String),
    #[error("trial set is empty")]
    EmptySet,
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("model file {path}: {detail}")]
    ModelFormat { path: String, detail: String },
    #[error("model io error on {path}: {source}")]
    ModelIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Architecture hyperparameters.
///
/// `m` embedding kernels of width `d`, LSTM hidden size `h`, query/key width
/// `n_k`, value width `n_v`, input channels `n_c`, dense head hidden widths,
/// and the masking fractions `p1` (time samples) and `p2` (channels per
/// masked sample).
#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub m: usize,
    pub d: usize,
    pub h: usize,
    pub n_k: usize,
    pub n_v: usize,
    pub n_c: usize,
    pub dense_hidden: Vec<usize>,
    pub p1: f64,
    pub p2: f64,
}

impl NetConfig {
    /// The reference configuration: m=5, d=4, h=4, n_k=n_v=4, dense head
    /// 5-10-15, p1=0.6, p2=0.4.
    pub fn default_for(n_c: usize) -> NetConfig {
        NetConfig {
            m: 5,
            d: 4,
            h: 4,
            n_k: 4,
            n_v: 4,
            n_c,
            dense_hidden: vec![5, 10, 15],
            p1: 0.6,
            p2: 0.4,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let positive = [self.m, self.d, self.h, self.n_k, self.n_v, self.n_c];
        if positive.iter().any(|&v| v == 0) {
            return Err(NetError::InvalidConfig(
                "all dimensions must be >= 1".to_string(),
            ));
        }
        if self.dense_hidden.is_empty() || self.dense_hidden.iter().any(|&v| v == 0) {
            return Err(NetError::InvalidConfig(
                "dense_hidden must be nonempty with positive widths".to_string(),
            ));
        }
        for (name, p) in [("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(NetError::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    AdaptiveMoments,
    PlainSgd,
}

/// Training-loop parameters. The architecture itself lives in [`NetConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub moment_decays: (f64, f64),
    pub epsilon_hat: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            learning_rate: 1e-3,
            batch_size: 8,
            seed: 0,
            optimizer: Optimizer::AdaptiveMoments,
            moment_decays: (0.9, 0.999),
            epsilon_hat: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(NetError::InvalidConfig(
                "epochs and batch_size must be >= 1".to_string(),
            ));
        }
        // 0 is allowed so a zero step can be exercised explicitly.
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(NetError::InvalidConfig(
                "learning_rate must be finite and >= 0".to_string(),
            ));
        }
        Ok(())
    }
}

/// Splitmix-style stream derivation so every (purpose, index) pair gets an
/// independent, order-free RNG seed.
pub(crate) fn substream(seed: u64, tag: u64, idx: u64) -> u64 {
    let mut z = seed
        ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ idx.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
