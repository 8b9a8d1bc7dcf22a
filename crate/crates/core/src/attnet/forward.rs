//! Forward evaluation of the autoencoder, caching everything the analytic
//! backward pass needs.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;

use super::params::ModelParams;
use super::NetError;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn shape_err(what: &'static str, expected: String, found: String) -> NetError {
    NetError::ShapeMismatch {
        what,
        expected,
        found,
    }
}

/// Per-step LSTM cache: post-activation gates and the new cell state.
#[derive(Debug, Clone)]
pub struct LstmStepCache {
    pub i: Array1<f64>,
    pub f: Array1<f64>,
    pub g: Array1<f64>,
    pub o: Array1<f64>,
    pub c: Array1<f64>,
}

/// Full recurrence cache for one LSTM run over `T` steps.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    /// Hidden states, one column per step.
    pub h: Array2<f64>,
    /// Cell states, one column per step.
    pub c: Array2<f64>,
    pub gate_i: Array2<f64>,
    pub gate_f: Array2<f64>,
    pub gate_g: Array2<f64>,
    pub gate_o: Array2<f64>,
    pub init_h: Array1<f64>,
    pub init_c: Array1<f64>,
}

/// Everything cached by [`forward`]. `lambda` rows are the attention
/// distributions (each sums to 1); `reconstruction` matches the input shape.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// The network input (the masked trial during training).
    pub input: Array2<f64>,
    pub embedded: Array2<f64>,
    pub enc: LstmTrace,
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    pub lambda: Array2<f64>,
    pub context: Array2<f64>,
    pub dec: LstmTrace,
    /// Post-tanh activations of each dense hidden layer.
    pub dense_hidden: Vec<Array2<f64>>,
    pub reconstruction: Array2<f64>,
}

impl ForwardTrace {
    pub fn enc_hidden(&self) -> &Array2<f64> {
        &self.enc.h
    }

    pub fn enc_cell(&self) -> &Array2<f64> {
        &self.enc.c
    }

    pub fn dec_hidden(&self) -> &Array2<f64> {
        &self.dec.h
    }
}

/// 1-D convolution over time: output column t mixes input columns
/// t .. t+d-1 (zero-padded past the end), so input and output share length.
pub fn embed(params: &ModelParams, x: &Array2<f64>) -> Result<Array2<f64>, NetError> {
    let (m, n_c, d) = params.embed_kernels.dim();
    if x.nrows() != n_c {
        return Err(shape_err(
            "embed input",
            format!("{n_c} channels"),
            format!("{}", x.nrows()),
        ));
    }
    let t_len = x.ncols();
    let mut y = Array2::<f64>::zeros((m, t_len));
    for j in 0..m {
        let bias = params.embed_bias[j];
        for t in 0..t_len {
            let mut acc = bias;
            let width = d.min(t_len - t);
            for tau in 0..width {
                for i in 0..n_c {
                    acc += params.embed_kernels[[j, i, tau]] * x[[i, t + tau]];
                }
            }
            y[[j, t]] = acc;
        }
    }
    Ok(y)
}

/// One LSTM cell step; gate order i, f, g, o.
pub fn lstm_step(
    gates_w: &Array2<f64>,
    gates_b: &Array1<f64>,
    input: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
    c_prev: ArrayView1<f64>,
) -> Result<(Array1<f64>, Array1<f64>, LstmStepCache), NetError> {
    let four_h = gates_w.nrows();
    let h_dim = four_h / 4;
    let in_dim = gates_w.ncols() - h_dim;
    if four_h % 4 != 0
        || gates_b.len() != four_h
        || input.len() != in_dim
        || h_prev.len() != h_dim
        || c_prev.len() != h_dim
    {
        return Err(shape_err(
            "lstm_step",
            format!("w 4h x (in+h) with in={in_dim}, h={h_dim}"),
            format!(
                "w {:?}, b {}, input {}, h_prev {}, c_prev {}",
                gates_w.dim(),
                gates_b.len(),
                input.len(),
                h_prev.len(),
                c_prev.len()
            ),
        ));
    }

    let mut pre = gates_b.clone();
    for (row, p) in gates_w.rows().into_iter().zip(pre.iter_mut()) {
        let mut acc = 0.0;
        for (w, x) in row.iter().take(in_dim).zip(input.iter()) {
            acc += w * x;
        }
        for (w, x) in row.iter().skip(in_dim).zip(h_prev.iter()) {
            acc += w * x;
        }
        *p += acc;
    }

    let mut i = Array1::zeros(h_dim);
    let mut f = Array1::zeros(h_dim);
    let mut g = Array1::zeros(h_dim);
    let mut o = Array1::zeros(h_dim);
    for k in 0..h_dim {
        i[k] = sigmoid(pre[k]);
        f[k] = sigmoid(pre[h_dim + k]);
        g[k] = pre[2 * h_dim + k].tanh();
        o[k] = sigmoid(pre[3 * h_dim + k]);
    }
    let mut c = Array1::zeros(h_dim);
    let mut h = Array1::zeros(h_dim);
    for k in 0..h_dim {
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
        h[k] = o[k] * c[k].tanh();
    }
    let cache = LstmStepCache {
        i,
        f,
        g,
        o,
        c: c.clone(),
    };
    Ok((h, c, cache))
}

/// Runs the recurrence over all columns of `inputs` from `(init_h, init_c)`.
fn run_lstm(
    gates_w: &Array2<f64>,
    gates_b: &Array1<f64>,
    inputs: &Array2<f64>,
    init_h: Array1<f64>,
    init_c: Array1<f64>,
) -> Result<LstmTrace, NetError> {
    let t_len = inputs.ncols();
    let h_dim = gates_w.nrows() / 4;
    let mut trace = LstmTrace {
        h: Array2::zeros((h_dim, t_len)),
        c: Array2::zeros((h_dim, t_len)),
        gate_i: Array2::zeros((h_dim, t_len)),
        gate_f: Array2::zeros((h_dim, t_len)),
        gate_g: Array2::zeros((h_dim, t_len)),
        gate_o: Array2::zeros((h_dim, t_len)),
        init_h,
        init_c,
    };
    let mut h_prev = trace.init_h.clone();
    let mut c_prev = trace.init_c.clone();
    for t in 0..t_len {
        let (h, c, cache) = lstm_step(
            gates_w,
            gates_b,
            inputs.column(t),
            h_prev.view(),
            c_prev.view(),
        )?;
        trace.h.column_mut(t).assign(&h);
        trace.c.column_mut(t).assign(&c);
        trace.gate_i.column_mut(t).assign(&cache.i);
        trace.gate_f.column_mut(t).assign(&cache.f);
        trace.gate_g.column_mut(t).assign(&cache.g);
        trace.gate_o.column_mut(t).assign(&cache.o);
        h_prev = h;
        c_prev = c;
    }
    Ok(trace)
}

/// Encoder recurrence from the zero state. Returns the hidden-state matrix
/// and the final hidden/cell pair that seeds the decoder.
pub fn encode(
    params: &ModelParams,
    embedded: &Array2<f64>,
) -> Result<(Array2<f64>, Array1<f64>, Array1<f64>), NetError> {
    let h_dim = params.cfg.h;
    let trace = run_lstm(
        &params.enc_w,
        &params.enc_b,
        embedded,
        Array1::zeros(h_dim),
        Array1::zeros(h_dim),
    )?;
    let t_last = embedded.ncols() - 1;
    let final_h = trace.h.column(t_last).to_owned();
    let final_c = trace.c.column(t_last).to_owned();
    Ok((trace.h, final_h, final_c))
}

/// Raw dot-product attention logits Q^T K (row i holds q_i . k_t for all t).
/// No 1/sqrt(n_k) scaling is applied anywhere in this crate.
pub fn attention_logits_unscaled(q: &Array2<f64>, k: &Array2<f64>) -> Array2<f64> {
    q.t().dot(k)
}

fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

pub(super) struct AttendFull {
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    pub lambda: Array2<f64>,
    pub context: Array2<f64>,
}

pub(super) fn attend_full(params: &ModelParams, enc_hidden: &Array2<f64>) -> AttendFull {
    let q = params.w_q.dot(enc_hidden);
    let k = params.w_k.dot(enc_hidden);
    let v = params.w_v.dot(enc_hidden);
    let lambda = softmax_rows(&attention_logits_unscaled(&q, &k));
    // context column i = sum_t lambda[i, t] * v[:, t]  <=>  C = V Lambda^T
    let context = v.dot(&lambda.t());
    AttendFull {
        q,
        k,
        v,
        lambda,
        context,
    }
}

/// Self-attention over encoder hidden states: row-stochastic weight matrix
/// and the context matrix (one context vector per position).
pub fn attend(
    params: &ModelParams,
    enc_hidden: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>), NetError> {
    if enc_hidden.nrows() != params.cfg.h {
        return Err(shape_err(
            "attend input",
            format!("{} rows", params.cfg.h),
            format!("{}", enc_hidden.nrows()),
        ));
    }
    let full = attend_full(params, enc_hidden);
    Ok((full.lambda, full.context))
}

pub(super) struct DecodeFull {
    pub dec: LstmTrace,
    pub dense_hidden: Vec<Array2<f64>>,
    pub reconstruction: Array2<f64>,
}

pub(super) fn decode_full(
    params: &ModelParams,
    context: &Array2<f64>,
    init_h: Array1<f64>,
    init_c: Array1<f64>,
) -> Result<DecodeFull, NetError> {
    let dec = run_lstm(&params.dec_w, &params.dec_b, context, init_h, init_c)?;
    let n_layers = params.dense.len();
    let mut dense_hidden = Vec::with_capacity(n_layers - 1);
    let mut act = dec.h.clone();
    for (l, layer) in params.dense.iter().enumerate() {
        let mut z = layer.w.dot(&act);
        z += &layer
            .b
            .view()
            .insert_axis(Axis(1))
            .broadcast(z.dim())
            .expect("bias broadcast");
        if l + 1 < n_layers {
            z.mapv_inplace(f64::tanh);
            dense_hidden.push(z.clone());
        }
        act = z;
    }
    Ok(DecodeFull {
        dec,
        dense_hidden,
        reconstruction: act,
    })
}

/// Decoder + dense head: consumes context columns in order from the given
/// initial state and emits one reconstruction column per step.
pub fn decode_reconstruct(
    params: &ModelParams,
    context: &Array2<f64>,
    init_h: &Array1<f64>,
    init_c: &Array1<f64>,
) -> Result<Array2<f64>, NetError> {
    if context.nrows() != params.cfg.n_v {
        return Err(shape_err(
            "decode input",
            format!("{} rows", params.cfg.n_v),
            format!("{}", context.nrows()),
        ));
    }
    Ok(decode_full(params, context, init_h.clone(), init_c.clone())?.reconstruction)
}

/// Zeroes floor(p1*T) random time samples at floor(p2*n_c) random channels
/// each (fresh channel draw per sample); everything else passes through.
pub fn mask_input<R: Rng>(x: &Array2<f64>, p1: f64, p2: f64, rng: &mut R) -> Array2<f64> {
    let (n_c, t_len) = x.dim();
    let n_t = ((p1 * t_len as f64).floor() as usize).min(t_len);
    let n_ch = ((p2 * n_c as f64).floor() as usize).min(n_c);
    let mut out = x.clone();
    let cols = rand::seq::index::sample(rng, t_len, n_t);
    for t in cols.iter() {
        let rows = rand::seq::index::sample(rng, n_c, n_ch);
        for c in rows.iter() {
            out[[c, t]] = 0.0;
        }
    }
    out
}

/// Mean squared error over all entries.
pub fn loss_mse(reconstruction: &Array2<f64>, target: &Array2<f64>) -> Result<f64, NetError> {
    if reconstruction.dim() != target.dim() {
        return Err(shape_err(
            "loss_mse",
            format!("{:?}", target.dim()),
            format!("{:?}", reconstruction.dim()),
        ));
    }
    let n = (reconstruction.nrows() * reconstruction.ncols()) as f64;
    let sum: f64 = reconstruction
        .iter()
        .zip(target.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / n)
}

const ACTIVATION_LIMIT: f64 = 1e100;

fn check_finite(name: &str, m: &Array2<f64>) -> Result<(), NetError> {
    if m.iter().any(|v| v.is_nan() || v.abs() > ACTIVATION_LIMIT) {
        return Err(NetError::NonFiniteActivation(name.to_string()));
    }
    Ok(())
}

/// Full forward pass: embed, encode, attend, decode, reconstruct.
pub fn forward(params: &ModelParams, x: &Array2<f64>) -> Result<ForwardTrace, NetError> {
    if x.ncols() == 0 {
        return Err(shape_err("forward input", "T >= 1".into(), "T = 0".into()));
    }
    let embedded = embed(params, x)?;
    let enc = run_lstm(
        &params.enc_w,
        &params.enc_b,
        &embedded,
        Array1::zeros(params.cfg.h),
        Array1::zeros(params.cfg.h),
    )?;
    let t_last = x.ncols() - 1;
    let att = attend_full(params, &enc.h);
    let decoded = decode_full(
        params,
        &att.context,
        enc.h.column(t_last).to_owned(),
        enc.c.column(t_last).to_owned(),
    )?;

    check_finite("embedded", &embedded)?;
    check_finite("encoder hidden", &enc.h)?;
    check_finite("encoder cell", &enc.c)?;
    check_finite("context", &att.context)?;
    check_finite("decoder hidden", &decoded.dec.h)?;
    check_finite("reconstruction", &decoded.reconstruction)?;

    Ok(ForwardTrace {
        input: x.clone(),
        embedded,
        enc,
        q: att.q,
        k: att.k,
        v: att.v,
        lambda: att.lambda,
        context: att.context,
        dec: decoded.dec,
        dense_hidden: decoded.dense_hidden,
        reconstruction: decoded.reconstruction,
    })
}
