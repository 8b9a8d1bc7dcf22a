//! Learnable parameters: construction, initialization, and the on-disk model
//! format (versioned header, config block, then tensors in declaration order
//! as little-endian f64).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Array3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::{NetConfig, NetError};

const MODEL_MAGIC: &[u8; 8] = b"EEGSNET\0";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Every learnable weight of the embedding / encoder / attention / decoder /
/// dense stack. Also reused as the gradient record: `backward` returns one
/// of these holding dQ/d(theta) in each slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub cfg: NetConfig,
    /// m x n_c x d convolution kernels.
    pub embed_kernels: Array3<f64>,
    pub embed_bias: Array1<f64>,
    /// Encoder gate weights, 4h x (m + h); gate order i, f, g, o.
    pub enc_w: Array2<f64>,
    pub enc_b: Array1<f64>,
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    /// Decoder gate weights, 4h x (n_v + h).
    pub dec_w: Array2<f64>,
    pub dec_b: Array1<f64>,
    /// Dense head h -> dense_hidden... -> n_c; tanh on hidden layers.
    pub dense: Vec<DenseLayer>,
}

impl ModelParams {
    /// All-zero parameters with shapes taken from `cfg`.
    pub fn zeros(cfg: &NetConfig) -> Result<ModelParams, NetError> {
        cfg.validate()?;
        let (m, d, h, n_k, n_v, n_c) = (cfg.m, cfg.d, cfg.h, cfg.n_k, cfg.n_v, cfg.n_c);
        let mut dense = Vec::with_capacity(cfg.dense_hidden.len() + 1);
        let mut prev = h;
        for &width in cfg.dense_hidden.iter().chain(std::iter::once(&n_c)) {
            dense.push(DenseLayer {
                w: Array2::zeros((width, prev)),
                b: Array1::zeros(width),
            });
            prev = width;
        }
        Ok(ModelParams {
            cfg: cfg.clone(),
            embed_kernels: Array3::zeros((m, n_c, d)),
            embed_bias: Array1::zeros(m),
            enc_w: Array2::zeros((4 * h, m + h)),
            enc_b: Array1::zeros(4 * h),
            w_q: Array2::zeros((n_k, h)),
            w_k: Array2::zeros((n_k, h)),
            w_v: Array2::zeros((n_v, h)),
            dec_w: Array2::zeros((4 * h, n_v + h)),
            dec_b: Array1::zeros(4 * h),
            dense,
        })
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Flat views of every tensor, in declaration (= serialization) order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![
            self.embed_kernels.as_slice().expect("standard layout"),
            self.embed_bias.as_slice().expect("standard layout"),
            self.enc_w.as_slice().expect("standard layout"),
            self.enc_b.as_slice().expect("standard layout"),
            self.w_q.as_slice().expect("standard layout"),
            self.w_k.as_slice().expect("standard layout"),
            self.w_v.as_slice().expect("standard layout"),
            self.dec_w.as_slice().expect("standard layout"),
            self.dec_b.as_slice().expect("standard layout"),
        ];
        for layer in &self.dense {
            v.push(layer.w.as_slice().expect("standard layout"));
            v.push(layer.b.as_slice().expect("standard layout"));
        }
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = vec![
            self.embed_kernels.as_slice_mut().expect("standard layout"),
            self.embed_bias.as_slice_mut().expect("standard layout"),
            self.enc_w.as_slice_mut().expect("standard layout"),
            self.enc_b.as_slice_mut().expect("standard layout"),
            self.w_q.as_slice_mut().expect("standard layout"),
            self.w_k.as_slice_mut().expect("standard layout"),
            self.w_v.as_slice_mut().expect("standard layout"),
            self.dec_w.as_slice_mut().expect("standard layout"),
            self.dec_b.as_slice_mut().expect("standard layout"),
        ];
        for layer in &mut self.dense {
            v.push(layer.w.as_slice_mut().expect("standard layout"));
            v.push(layer.b.as_slice_mut().expect("standard layout"));
        }
        v
    }

    /// Tensor names matching the order of [`ModelParams::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names: Vec<String> = [
            "embed_kernels",
            "embed_bias",
            "enc_w",
            "enc_b",
            "w_q",
            "w_k",
            "w_v",
            "dec_w",
            "dec_b",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for i in 0..self.dense.len() {
            names.push(format!("dense{i}_w"));
            names.push(format!("dense{i}_b"));
        }
        names
    }

    pub fn assert_finite(&self, context: &str) -> Result<(), NetError> {
        for (name, t) in self.tensor_names().iter().zip(self.tensors()) {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(NetError::NonFiniteActivation(format!("{context}: {name}")));
            }
        }
        Ok(())
    }

    /// Adds `rhs` element-wise (used for gradient accumulation).
    pub fn add_assign(&mut self, rhs: &ModelParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(rhs.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    /// Multiplies every entry by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            for x in t.iter_mut() {
                *x *= factor;
            }
        }
    }
}

/// Glorot-uniform weights (per-matrix bound sqrt(6/(fan_in+fan_out))), zero
/// biases except the encoder/decoder forget gates, which start at 1.
pub fn init_params(cfg: &NetConfig, seed: u64) -> Result<ModelParams, NetError> {
    let mut p = ModelParams::zeros(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = cfg.h;

    fn fill(rng: &mut ChaCha8Rng, slice: &mut [f64], fan_in: usize, fan_out: usize) {
        let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for x in slice.iter_mut() {
            *x = rng.random_range(-s..s);
        }
    }

    // The conv tensor is treated as an m x (n_c * d) matrix for fan purposes.
    fill(
        &mut rng,
        p.embed_kernels.as_slice_mut().unwrap(),
        cfg.n_c * cfg.d,
        cfg.m,
    );
    fill(&mut rng, p.enc_w.as_slice_mut().unwrap(), cfg.m + h, 4 * h);
    fill(&mut rng, p.w_q.as_slice_mut().unwrap(), h, cfg.n_k);
    fill(&mut rng, p.w_k.as_slice_mut().unwrap(), h, cfg.n_k);
    fill(&mut rng, p.w_v.as_slice_mut().unwrap(), h, cfg.n_v);
    fill(&mut rng, p.dec_w.as_slice_mut().unwrap(), cfg.n_v + h, 4 * h);
    for layer in &mut p.dense {
        let (out, inp) = layer.w.dim();
        fill(&mut rng, layer.w.as_slice_mut().unwrap(), inp, out);
    }

    for b in [&mut p.enc_b, &mut p.dec_b] {
        for k in h..2 * h {
            b[k] = 1.0;
        }
    }
    Ok(p)
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

/// Serializes a model to `path`.
pub fn save_model(params: &ModelParams, path: &Path) -> Result<(), NetError> {
    let cfg = &params.cfg;
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    push_u32(&mut buf, MODEL_VERSION);
    for v in [cfg.m, cfg.d, cfg.h, cfg.n_k, cfg.n_v, cfg.n_c] {
        push_u32(&mut buf, v as u32);
    }
    push_u32(&mut buf, cfg.dense_hidden.len() as u32);
    for &v in &cfg.dense_hidden {
        push_u32(&mut buf, v as u32);
    }
    push_f64(&mut buf, cfg.p1);
    push_f64(&mut buf, cfg.p2);
    for t in params.tensors() {
        for &v in t {
            push_f64(&mut buf, v);
        }
    }
    let tmp = path.with_extension("tmp~");
    let io_err = |source: std::io::Error| NetError::ModelIo {
        path: path.display().to_string(),
        source,
    };
    let mut f = fs::File::create(&tmp).map_err(io_err)?;
    f.write_all(&buf).map_err(io_err)?;
    f.sync_all().map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NetError> {
        if self.pos + n > self.bytes.len() {
            return Err(NetError::ModelFormat {
                path: self.path.display().to_string(),
                detail: "truncated file".to_string(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, NetError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Loads a model written by [`save_model`].
pub fn load_model(path: &Path) -> Result<ModelParams, NetError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|source| NetError::ModelIo {
            path: path.display().to_string(),
            source,
        })?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };
    let bad = |detail: &str| NetError::ModelFormat {
        path: path.display().to_string(),
        detail: detail.to_string(),
    };
    if r.take(8)? != MODEL_MAGIC {
        return Err(bad("bad magic"));
    }
    if r.u32()? != MODEL_VERSION {
        return Err(bad("unsupported version"));
    }
    let m = r.u32()? as usize;
    let d = r.u32()? as usize;
    let h = r.u32()? as usize;
    let n_k = r.u32()? as usize;
    let n_v = r.u32()? as usize;
    let n_c = r.u32()? as usize;
    let n_dense = r.u32()? as usize;
    let mut dense_hidden = Vec::with_capacity(n_dense);
    for _ in 0..n_dense {
        dense_hidden.push(r.u32()? as usize);
    }
    let p1 = r.f64()?;
    let p2 = r.f64()?;
    let cfg = NetConfig {
        m,
        d,
        h,
        n_k,
        n_v,
        n_c,
        dense_hidden,
        p1,
        p2,
    };
    let mut params = ModelParams::zeros(&cfg)?;
    for t in params.tensors_mut() {
        for x in t.iter_mut() {
            *x = r.f64()?;
        }
    }
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(params)
}
