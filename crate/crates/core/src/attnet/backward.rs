//! Exact analytic gradients of the reconstruction loss through the dense
//! head, decoder, attention, encoder, and embedding. Verified end to end
//! against central finite differences (see `gradcheck`).

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis};

use super::forward::{ForwardTrace, LstmTrace};
use super::params::ModelParams;
use super::NetError;

/// Backpropagation through one LSTM run.
///
/// `dh_steps` carries the external gradient arriving at each hidden state;
/// `dh_final_extra`/`dc_final_extra` add to the last step (the decoder's
/// initial-state gradient flowing back into the encoder's final state).
/// Returns (dW, db, d_inputs, d_init_h, d_init_c).
fn lstm_backward(
    w: &Array2<f64>,
    trace: &LstmTrace,
    inputs: &Array2<f64>,
    dh_steps: &Array2<f64>,
    dh_final_extra: Option<&Array1<f64>>,
    dc_final_extra: Option<&Array1<f64>>,
) -> (
    Array2<f64>,
    Array1<f64>,
    Array2<f64>,
    Array1<f64>,
    Array1<f64>,
) {
    let (four_h, comb) = w.dim();
    let h_dim = four_h / 4;
    let in_dim = comb - h_dim;
    let t_len = inputs.ncols();

    let mut d_w = Array2::<f64>::zeros((four_h, comb));
    let mut d_b = Array1::<f64>::zeros(four_h);
    let mut d_inputs = Array2::<f64>::zeros((in_dim, t_len));
    let mut dh_rec = Array1::<f64>::zeros(h_dim);
    let mut dc_rec = Array1::<f64>::zeros(h_dim);
    let mut da = Array1::<f64>::zeros(four_h);

    for t in (0..t_len).rev() {
        let mut dh = dh_steps.column(t).to_owned();
        dh += &dh_rec;
        let mut dc = dc_rec.clone();
        if t == t_len - 1 {
            if let Some(e) = dh_final_extra {
                dh += e;
            }
            if let Some(e) = dc_final_extra {
                dc += e;
            }
        }
        let gi = trace.gate_i.column(t);
        let gf = trace.gate_f.column(t);
        let gg = trace.gate_g.column(t);
        let go = trace.gate_o.column(t);
        let c = trace.c.column(t);
        let c_prev = if t > 0 {
            trace.c.column(t - 1)
        } else {
            trace.init_c.view()
        };
        let h_prev = if t > 0 {
            trace.h.column(t - 1)
        } else {
            trace.init_h.view()
        };
        let x_t = inputs.column(t);

        for k in 0..h_dim {
            let tc = c[k].tanh();
            let d_o = dh[k] * tc;
            let dck = dc[k] + dh[k] * go[k] * (1.0 - tc * tc);
            let d_i = dck * gg[k];
            let d_f = dck * c_prev[k];
            let d_g = dck * gi[k];
            dc_rec[k] = dck * gf[k];
            da[k] = d_i * gi[k] * (1.0 - gi[k]);
            da[h_dim + k] = d_f * gf[k] * (1.0 - gf[k]);
            da[2 * h_dim + k] = d_g * (1.0 - gg[k] * gg[k]);
            da[3 * h_dim + k] = d_o * go[k] * (1.0 - go[k]);
        }

        dh_rec.fill(0.0);
        for r in 0..four_h {
            let dar = da[r];
            d_b[r] += dar;
            if dar == 0.0 {
                continue;
            }
            for (col, xv) in x_t.iter().enumerate() {
                d_w[[r, col]] += dar * xv;
            }
            for (col, hv) in h_prev.iter().enumerate() {
                d_w[[r, in_dim + col]] += dar * hv;
            }
            for col in 0..in_dim {
                d_inputs[[col, t]] += w[[r, col]] * dar;
            }
            for col in 0..h_dim {
                dh_rec[col] += w[[r, in_dim + col]] * dar;
            }
        }
    }
    (d_w, d_b, d_inputs, dh_rec, dc_rec)
}

/// Gradient of `loss_mse(trace.reconstruction, target)` with respect to every
/// parameter, returned in a [`ModelParams`]-shaped record.
pub fn backward(
    params: &ModelParams,
    trace: &ForwardTrace,
    target: &Array2<f64>,
) -> Result<ModelParams, NetError> {
    let (n_c, t_len) = trace.reconstruction.dim();
    if target.dim() != (n_c, t_len) {
        return Err(NetError::ShapeMismatch {
            what: "backward target",
            expected: format!("{:?}", trace.reconstruction.dim()),
            found: format!("{:?}", target.dim()),
        });
    }
    let mut grads = ModelParams::zeros(&params.cfg)?;

    // dQ/d(x_hat) for the mean squared error over all T*n_c entries.
    let scale = 2.0 / (n_c as f64 * t_len as f64);
    let mut g: Array2<f64> = (&trace.reconstruction - target) * scale;

    // Dense head, top down. Hidden activations are tanh outputs; the layer
    // input a_0 is the decoder hidden matrix (no activation).
    let n_layers = params.dense.len();
    for l in (0..n_layers).rev() {
        let a_prev: &Array2<f64> = if l == 0 {
            &trace.dec.h
        } else {
            &trace.dense_hidden[l - 1]
        };
        general_mat_mul(1.0, &g, &a_prev.t(), 0.0, &mut grads.dense[l].w);
        grads.dense[l].b = g.sum_axis(Axis(1));
        let mut g_prev = params.dense[l].w.t().dot(&g);
        if l > 0 {
            g_prev.zip_mut_with(a_prev, |gv, &a| *gv *= 1.0 - a * a);
        }
        g = g_prev;
    }

    // Decoder BPTT; inputs were the context columns.
    let (dec_dw, dec_db, g_ctx, dh_dec0, dc_dec0) =
        lstm_backward(&params.dec_w, &trace.dec, &trace.context, &g, None, None);
    grads.dec_w = dec_dw;
    grads.dec_b = dec_db;

    // Attention: C = V Lambda^T with Lambda = row-softmax(Q^T K).
    let d_v_direct = g_ctx.dot(&trace.lambda);
    let g_lambda = g_ctx.t().dot(&trace.v);
    let mut g_logits = Array2::<f64>::zeros((t_len, t_len));
    for i in 0..t_len {
        let lam = trace.lambda.row(i);
        let gl = g_lambda.row(i);
        let dot: f64 = lam.iter().zip(gl.iter()).map(|(a, b)| a * b).sum();
        for t in 0..t_len {
            g_logits[[i, t]] = lam[t] * (gl[t] - dot);
        }
    }
    let d_q = trace.k.dot(&g_logits.t());
    let d_k = trace.q.dot(&g_logits);

    let enc_h = &trace.enc.h;
    general_mat_mul(1.0, &d_q, &enc_h.t(), 0.0, &mut grads.w_q);
    general_mat_mul(1.0, &d_k, &enc_h.t(), 0.0, &mut grads.w_k);
    general_mat_mul(1.0, &d_v_direct, &enc_h.t(), 0.0, &mut grads.w_v);

    let mut g_h = params.w_q.t().dot(&d_q);
    g_h += &params.w_k.t().dot(&d_k);
    g_h += &params.w_v.t().dot(&d_v_direct);

    // Encoder BPTT; its final state also seeded the decoder.
    let (enc_dw, enc_db, g_emb, _, _) = lstm_backward(
        &params.enc_w,
        &trace.enc,
        &trace.embedded,
        &g_h,
        Some(&dh_dec0),
        Some(&dc_dec0),
    );
    grads.enc_w = enc_dw;
    grads.enc_b = enc_db;

    // Embedding: y[j,t] = b_j + sum_{i,tau} K[j,i,tau] x[i,t+tau].
    let x = &trace.input;
    let (m, n_ch, d) = params.embed_kernels.dim();
    for j in 0..m {
        grads.embed_bias[j] = g_emb.row(j).sum();
        for t in 0..t_len {
            let ge = g_emb[[j, t]];
            if ge == 0.0 {
                continue;
            }
            let width = d.min(t_len - t);
            for tau in 0..width {
                for i in 0..n_ch {
                    grads.embed_kernels[[j, i, tau]] += ge * x[[i, t + tau]];
                }
            }
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attnet::{forward, init_params, loss_mse, NetConfig};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_residual_means_zero_gradients() {
        let cfg = NetConfig::default_for(2);
        let params = ModelParams::zeros(&cfg).unwrap();
        let x = Array2::<f64>::zeros((2, 6));
        let trace = forward(&params, &x).unwrap();
        assert_eq!(loss_mse(&trace.reconstruction, &x).unwrap(), 0.0);
        let grads = backward(&params, &trace, &x).unwrap();
        for t in grads.tensors() {
            assert!(t.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn output_layer_gradient_linear_in_residual() {
        let cfg = NetConfig::default_for(2);
        let params = init_params(&cfg, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Array2::from_shape_fn((2, 8), |_| rng.random_range(-1.0..1.0));
        let trace = forward(&params, &x).unwrap();
        let target1 = x.clone();
        // target2 doubles the residual: recon - t2 = 2 (recon - t1)
        let target2: Array2<f64> = &trace.reconstruction - &((&trace.reconstruction - &x) * 2.0);
        let g1 = backward(&params, &trace, &target1).unwrap();
        let g2 = backward(&params, &trace, &target2).unwrap();
        let last = cfg.dense_hidden.len();
        for (a, b) in g1.dense[last].w.iter().zip(g2.dense[last].w.iter()) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        for (a, b) in g1.dense[last].b.iter().zip(g2.dense[last].b.iter()) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    /// Small-config finite-difference check; the full reference config runs
    /// in the acceptance suite.
    #[test]
    fn gradients_match_finite_differences_small() {
        let cfg = NetConfig {
            m: 2,
            d: 2,
            h: 2,
            n_k: 2,
            n_v: 2,
            n_c: 2,
            dense_hidden: vec![3],
            p1: 0.5,
            p2: 0.5,
        };
        let report = crate::attnet::gradient_check(&cfg, 5, 0, 1e-5).unwrap();
        assert!(
            report.max_rel_error < 1e-4,
            "max relative error {} at {}[{}]",
            report.max_rel_error,
            report.worst_tensor,
            report.worst_index
        );
    }
}
