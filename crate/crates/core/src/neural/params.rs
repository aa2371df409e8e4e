use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{uniform_vec, Matrix};
use crate::scalar::Scalar;

/// Architecture sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub embed_dim: usize,
    /// Hidden size per encoder direction, and of the decoder.
    pub hidden_dim: usize,
    pub attn_dim: usize,
    pub vocab_min_freq: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            embed_dim: 64,
            hidden_dim: 64,
            attn_dim: 64,
            vocab_min_freq: 2,
        }
    }
}

/// Gated recurrent cell; gate rows are ordered update, reset, candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams<T> {
    pub w: Matrix<T>,
    pub u: Matrix<T>,
    pub b: Vec<T>,
}

impl<T: Scalar> GruParams<T> {
    fn zeros(input: usize, hidden: usize) -> Self {
        GruParams {
            w: Matrix::zeros(3 * hidden, input),
            u: Matrix::zeros(3 * hidden, hidden),
            b: vec![T::zero(); 3 * hidden],
        }
    }

    fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let k = 1.0 / (hidden as f64).sqrt();
        GruParams {
            w: Matrix::uniform(3 * hidden, input, k, rng),
            u: Matrix::uniform(3 * hidden, hidden, k, rng),
            b: uniform_vec(3 * hidden, k, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.cols
    }
}

/// Every trainable array of the encoder-decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    /// `V x embed`
    pub embedding: Matrix<T>,
    pub enc_fwd: GruParams<T>,
    pub enc_bwd: GruParams<T>,
    /// Maps the `[CLS]` encoder state (`2 hidden`) to the initial decoder state.
    pub init_w: Matrix<T>,
    pub init_b: Vec<T>,
    /// Input is `[prev embedding; previous context]`.
    pub dec: GruParams<T>,
    pub att_w: Matrix<T>,
    pub att_u: Matrix<T>,
    pub att_b: Vec<T>,
    pub att_v: Vec<T>,
    /// `V x (hidden + 2 hidden)` over `[state; context]`.
    pub out_w: Matrix<T>,
    pub out_b: Vec<T>,
    /// Over `[state; context; prev embedding]`.
    pub gate_w: Vec<T>,
    pub gate_b: Vec<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(cfg: &ModelConfig, vocab: usize) -> Self {
        let (e, h, a) = (cfg.embed_dim, cfg.hidden_dim, cfg.attn_dim);
        ModelParams {
            embedding: Matrix::zeros(vocab, e),
            enc_fwd: GruParams::zeros(e, h),
            enc_bwd: GruParams::zeros(e, h),
            init_w: Matrix::zeros(h, 2 * h),
            init_b: vec![T::zero(); h],
            dec: GruParams::zeros(e + 2 * h, h),
            att_w: Matrix::zeros(a, h),
            att_u: Matrix::zeros(a, 2 * h),
            att_b: vec![T::zero(); a],
            att_v: vec![T::zero(); a],
            out_w: Matrix::zeros(vocab, 3 * h),
            out_b: vec![T::zero(); vocab],
            gate_w: vec![T::zero(); 3 * h + e],
            gate_b: vec![T::zero(); 1],
        }
    }

    pub fn init<R: Rng>(cfg: &ModelConfig, vocab: usize, rng: &mut R) -> Self {
        let (e, h, a) = (cfg.embed_dim, cfg.hidden_dim, cfg.attn_dim);
        let kh = 1.0 / (h as f64).sqrt();
        let k2h = 1.0 / ((2 * h) as f64).sqrt();
        let k3h = 1.0 / ((3 * h) as f64).sqrt();
        ModelParams {
            embedding: Matrix::uniform(vocab, e, 0.5, rng),
            enc_fwd: GruParams::init(e, h, rng),
            enc_bwd: GruParams::init(e, h, rng),
            init_w: Matrix::uniform(h, 2 * h, k2h, rng),
            init_b: uniform_vec(h, k2h, rng),
            dec: GruParams::init(e + 2 * h, h, rng),
            att_w: Matrix::uniform(a, h, kh, rng),
            att_u: Matrix::uniform(a, 2 * h, k2h, rng),
            att_b: uniform_vec(a, kh, rng),
            att_v: uniform_vec(a, 1.0 / (a as f64).sqrt(), rng),
            out_w: Matrix::uniform(vocab, 3 * h, k3h, rng),
            out_b: vec![T::zero(); vocab],
            gate_w: uniform_vec(3 * h + e, k3h, rng),
            gate_b: vec![T::zero(); 1],
        }
    }

    /// Parameter groups in checkpoint order.
    pub fn groups(&self) -> Vec<(&'static str, &[T])> {
        vec![
            ("embedding", &self.embedding.data[..]),
            ("enc_fwd.w", &self.enc_fwd.w.data),
            ("enc_fwd.u", &self.enc_fwd.u.data),
            ("enc_fwd.b", &self.enc_fwd.b),
            ("enc_bwd.w", &self.enc_bwd.w.data),
            ("enc_bwd.u", &self.enc_bwd.u.data),
            ("enc_bwd.b", &self.enc_bwd.b),
            ("init.w", &self.init_w.data),
            ("init.b", &self.init_b),
            ("dec.w", &self.dec.w.data),
            ("dec.u", &self.dec.u.data),
            ("dec.b", &self.dec.b),
            ("attn.w", &self.att_w.data),
            ("attn.u", &self.att_u.data),
            ("attn.b", &self.att_b),
            ("attn.v", &self.att_v),
            ("out.w", &self.out_w.data),
            ("out.b", &self.out_b),
            ("gate.w", &self.gate_w),
            ("gate.b", &self.gate_b),
        ]
    }

    pub fn groups_mut(&mut self) -> Vec<(&'static str, &mut [T])> {
        vec![
            ("embedding", &mut self.embedding.data[..]),
            ("enc_fwd.w", &mut self.enc_fwd.w.data),
            ("enc_fwd.u", &mut self.enc_fwd.u.data),
            ("enc_fwd.b", &mut self.enc_fwd.b),
            ("enc_bwd.w", &mut self.enc_bwd.w.data),
            ("enc_bwd.u", &mut self.enc_bwd.u.data),
            ("enc_bwd.b", &mut self.enc_bwd.b),
            ("init.w", &mut self.init_w.data),
            ("init.b", &mut self.init_b),
            ("dec.w", &mut self.dec.w.data),
            ("dec.u", &mut self.dec.u.data),
            ("dec.b", &mut self.dec.b),
            ("attn.w", &mut self.att_w.data),
            ("attn.u", &mut self.att_u.data),
            ("attn.b", &mut self.att_b),
            ("attn.v", &mut self.att_v),
            ("out.w", &mut self.out_w.data),
            ("out.b", &mut self.out_b),
            ("gate.w", &mut self.gate_w),
            ("gate.b", &mut self.gate_b),
        ]
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, g) in z.groups_mut() {
            g.fill(T::zero());
        }
        z
    }

    pub fn num_params(&self) -> usize {
        self.groups().iter().map(|(_, g)| g.len()).sum()
    }

    pub fn norm(&self) -> T {
        self.groups()
            .iter()
            .flat_map(|(_, g)| g.iter())
            .map(|&v| v * v)
            .sum::<T>()
            .sqrt()
    }

    pub fn scale(&mut self, a: T) {
        for (_, g) in self.groups_mut() {
            for v in g.iter_mut() {
                *v *= a;
            }
        }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: T, other: &Self) {
        for ((_, dst), (_, src)) in self.groups_mut().into_iter().zip(other.groups()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += a * s;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.groups().iter().all(|(_, g)| g.iter().all(|v| v.is_finite()))
    }
}
