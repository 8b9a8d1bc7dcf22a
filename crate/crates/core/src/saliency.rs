//! Test-stage saliency extraction: collapse the attention matrix to a
//! per-sample attention vector, split it into `n` equal segments, keep the
//! `r` with the highest mean attention, and concatenate those sample ranges
//! into a pruned trial. The decoder plays no part here.

use ndarray::{Array1, Array2, Axis};
use thiserror::Error;

use crate::attnet::{attend, embed, encode, ModelParams, NetError};
use crate::trialio::Trial;

#[derive(Debug, Error)]
pub enum SaliencyError {
    #[error("attention row {row} sums to {sum}, not 1")]
    NotRowStochastic { row: usize, sum: f64 },
    #[error("attention matrix must be square, got {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("segment count {n} does not divide trial length {t_len}")]
    IndivisibleLength { t_len: usize, n: usize },
    #[error("attention vector length {a_len} does not match trial length {t_len}")]
    LengthMismatch { a_len: usize, t_len: usize },
    #[error("invalid prune config: need 1 <= r <= n, got r={r}, n={n}")]
    InvalidConfig { n: usize, r: usize },
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Segment count `n` and kept-segment count `r`; the pruned length is
/// `r * T / n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PruneConfig {
    pub n: usize,
    pub r: usize,
}

impl PruneConfig {
    pub fn new(n: usize, r: usize) -> Result<PruneConfig, SaliencyError> {
        if r < 1 || r > n {
            return Err(SaliencyError::InvalidConfig { n, r });
        }
        Ok(PruneConfig { n, r })
    }

    /// Kept-length fraction r/n.
    pub fn keep_ratio(&self) -> f64 {
        self.r as f64 / self.n as f64
    }
}

/// The attention matrix with its derived per-sample attention vector.
#[derive(Debug, Clone)]
pub struct AttentionOutput {
    pub lambda: Array2<f64>,
    pub a: Array1<f64>,
}

impl AttentionOutput {
    pub fn from_lambda(lambda: Array2<f64>) -> Result<AttentionOutput, SaliencyError> {
        let a = attention_vector(&lambda)?;
        Ok(AttentionOutput { lambda, a })
    }
}

/// Column means of a row-stochastic matrix: `a_t = (1/T) sum_j Lambda[j, t]`.
pub fn attention_vector(lambda: &Array2<f64>) -> Result<Array1<f64>, SaliencyError> {
    let (rows, cols) = lambda.dim();
    if rows != cols {
        return Err(SaliencyError::NotSquare { rows, cols });
    }
    for (row, r) in lambda.rows().into_iter().enumerate() {
        let sum: f64 = r.sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(SaliencyError::NotRowStochastic { row, sum });
        }
    }
    Ok(lambda.mean_axis(Axis(0)).expect("nonempty matrix"))
}

/// Splits `a` into `n` equal blocks and returns the indices of the `r` blocks
/// with the highest mean attention, in ascending (temporal) order. Ties go to
/// the lower block index.
pub fn select_segments(a: &Array1<f64>, cfg: &PruneConfig) -> Result<Vec<usize>, SaliencyError> {
    PruneConfig::new(cfg.n, cfg.r)?;
    let t_len = a.len();
    if t_len == 0 || t_len % cfg.n != 0 {
        return Err(SaliencyError::IndivisibleLength { t_len, n: cfg.n });
    }
    let seg_len = t_len / cfg.n;
    let mut order: Vec<usize> = (0..cfg.n).collect();
    let means: Vec<f64> = (0..cfg.n)
        .map(|s| {
            a.slice(ndarray::s![s * seg_len..(s + 1) * seg_len])
                .mean()
                .expect("nonempty segment")
        })
        .collect();
    order.sort_by(|&x, &y| {
        means[y]
            .partial_cmp(&means[x])
            .expect("finite attention means")
            .then(x.cmp(&y))
    });
    let mut kept: Vec<usize> = order[..cfg.r].to_vec();
    kept.sort_unstable();
    Ok(kept)
}

/// Outcome of pruning one trial.
#[derive(Debug, Clone)]
pub struct PruneResult {
    /// Kept segment indices, ascending.
    pub kept_segments: Vec<usize>,
    /// Kept `[start, end)` sample ranges, ascending and disjoint.
    pub kept_sample_ranges: Vec<(usize, usize)>,
    pub pruned_trial: Trial,
}

/// Concatenates the selected sample ranges of `trial` in temporal order;
/// metadata is preserved and the result has width `r * T / n`.
pub fn prune_trial(
    trial: &Trial,
    a: &Array1<f64>,
    cfg: &PruneConfig,
) -> Result<PruneResult, SaliencyError> {
    let t_len = trial.n_samples();
    if a.len() != t_len {
        return Err(SaliencyError::LengthMismatch {
            a_len: a.len(),
            t_len,
        });
    }
    let kept_segments = select_segments(a, cfg)?;
    let seg_len = t_len / cfg.n;
    let kept_sample_ranges: Vec<(usize, usize)> = kept_segments
        .iter()
        .map(|&s| (s * seg_len, (s + 1) * seg_len))
        .collect();

    let mut data = Array2::<f64>::zeros((trial.n_channels(), cfg.r * seg_len));
    let mut out_col = 0;
    for &(start, end) in &kept_sample_ranges {
        for t in start..end {
            data.column_mut(out_col).assign(&trial.data.column(t));
            out_col += 1;
        }
    }
    Ok(PruneResult {
        kept_segments,
        kept_sample_ranges,
        pruned_trial: trial.with_data(data),
    })
}

/// Attention vector of one trial under a trained model: embedding, encoder,
/// and self-attention only.
pub fn attention_for_trial(
    params: &ModelParams,
    trial: &Trial,
) -> Result<Array1<f64>, SaliencyError> {
    let embedded = embed(params, &trial.data)?;
    let (enc_hidden, _, _) = encode(params, &embedded)?;
    let (lambda, _) = attend(params, &enc_hidden)?;
    Ok(attention_vector(&lambda)?)
}

/// Full test-stage path for one trial: attention vector, segment selection,
/// pruning. Pure function of `(params, trial, cfg)`.
pub fn extract_saliency(
    params: &ModelParams,
    trial: &Trial,
    cfg: &PruneConfig,
) -> Result<PruneResult, SaliencyError> {
    let a = attention_for_trial(params, trial)?;
    prune_trial(trial, &a, cfg)
}
