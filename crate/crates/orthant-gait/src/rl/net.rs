//! Minimal feed-forward networks with hand-rolled backprop.
//!
//! The actor and critic are small tanh MLPs; gradients are computed by
//! explicit reverse passes rather than a tape. Parameters flatten into a
//! single ordered vector so the optimizer, gradient clipping and
//! finite-difference checks all operate on one layout.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// One dense layer, weights in row-major `[out_dim x in_dim]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { w: vec![0.0; in_dim * out_dim], b: vec![0.0; out_dim], in_dim, out_dim }
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.w[i * self.in_dim..(i + 1) * self.in_dim];
            let mut acc = self.b[i];
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            *o = acc;
        }
    }

    /// Checks that the stored dimensions match the array lengths.
    pub fn shape_consistent(&self) -> bool {
        self.w.len() == self.in_dim * self.out_dim && self.b.len() == self.out_dim
    }
}

/// An MLP with tanh hidden activations and a linear output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Per-layer activations of one forward pass: `post[k]` is the output of
/// layer k after its activation (tanh for hidden layers, identity for the
/// last).
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    pub post: Vec<Vec<f64>>,
}

/// Gradient accumulator shaped like an [`Mlp`].
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl Mlp {
    /// Zero-initialized network with the given layer sizes, e.g.
    /// `[4, 64, 64, 2]`.
    pub fn zeros(dims: &[usize]) -> Self {
        let layers = dims.windows(2).map(|d| Linear::zeros(d[0], d[1])).collect();
        Self { layers }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cache = MlpCache::default();
        self.forward_cached(x, &mut cache);
        cache.post.last().cloned().unwrap_or_default()
    }

    /// Forward pass keeping per-layer activations for the reverse pass.
    pub fn forward_cached(&self, x: &[f64], cache: &mut MlpCache) {
        cache.post.resize(self.layers.len(), Vec::new());
        for (k, layer) in self.layers.iter().enumerate() {
            let last = k + 1 == self.layers.len();
            let (before, rest) = cache.post.split_at_mut(k);
            let input: &[f64] = if k == 0 { x } else { &before[k - 1] };
            let out = &mut rest[0];
            out.resize(layer.out_dim, 0.0);
            layer.forward(input, out);
            if !last {
                for v in out.iter_mut() {
                    *v = v.tanh();
                }
            }
        }
    }

    /// Accumulates parameter gradients for one sample into `grads` given
    /// the gradient of the loss w.r.t. the network output.
    pub fn backward(&self, x: &[f64], cache: &MlpCache, grad_out: &[f64], grads: &mut MlpGrads) {
        let n = self.layers.len();
        let mut delta: Vec<f64> = grad_out.to_vec();
        for k in (0..n).rev() {
            let layer = &self.layers[k];
            let input: &[f64] = if k == 0 { x } else { &cache.post[k - 1] };
            // Parameter gradients.
            for (i, &d) in delta.iter().enumerate() {
                let gw = &mut grads.w[k][i * layer.in_dim..(i + 1) * layer.in_dim];
                for (g, v) in gw.iter_mut().zip(input) {
                    *g += d * v;
                }
                grads.b[k][i] += d;
            }
            if k == 0 {
                break;
            }
            // Input gradient, through the previous layer's tanh.
            let mut prev = vec![0.0; layer.in_dim];
            for (i, &d) in delta.iter().enumerate() {
                let row = &layer.w[i * layer.in_dim..(i + 1) * layer.in_dim];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            let act = &cache.post[k - 1];
            for (p, a) in prev.iter_mut().zip(act) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }

    pub fn grads_like(&self) -> MlpGrads {
        MlpGrads {
            w: self.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            b: self.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }
}

impl MlpGrads {
    pub fn zero(&mut self) {
        for w in &mut self.w {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        for b in &mut self.b {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Orthogonal-style initialization: a standard-normal matrix is
/// orthonormalized (columns if tall, rows if wide) via twice-applied
/// modified Gram-Schmidt, then scaled by `gain`. Row-major `rows x cols`.
pub fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut m: Vec<f64> = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    if rows >= cols {
        orthonormalize_columns(&mut m, rows, cols);
    } else {
        let mut t = transpose(&m, rows, cols);
        orthonormalize_columns(&mut t, cols, rows);
        m = transpose(&t, cols, rows);
    }
    for v in &mut m {
        *v *= gain;
    }
    m
}

fn transpose(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = m[r * cols + c];
        }
    }
    t
}

fn orthonormalize_columns(m: &mut [f64], rows: usize, cols: usize) {
    for _ in 0..2 {
        for j in 0..cols {
            for k in 0..j {
                let mut dot = 0.0;
                for r in 0..rows {
                    dot += m[r * cols + j] * m[r * cols + k];
                }
                for r in 0..rows {
                    m[r * cols + j] -= dot * m[r * cols + k];
                }
            }
            let mut norm = 0.0;
            for r in 0..rows {
                norm += m[r * cols + j] * m[r * cols + j];
            }
            let norm = norm.sqrt().max(1e-12);
            for r in 0..rows {
                m[r * cols + j] /= norm;
            }
        }
    }
}

/// Adam over a flat parameter vector with bias correction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64, n_params: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Scales `grads` in place so its global L2 norm does not exceed
/// `max_norm`; returns the pre-clip norm.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn linear_forward() {
        let mut l = Linear::zeros(2, 2);
        l.w = vec![1.0, 2.0, 3.0, 4.0];
        l.b = vec![0.5, -0.5];
        let mut out = [0.0; 2];
        l.forward(&[1.0, -1.0], &mut out);
        assert_eq!(out, [-0.5, -1.5]);
    }

    #[test]
    fn mlp_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut net = Mlp::zeros(&[3, 8, 8, 2]);
        for layer in &mut net.layers {
            layer.w = orthogonal(layer.out_dim, layer.in_dim, 1.0, &mut rng);
            for b in &mut layer.b {
                *b = rng.gen_range(-0.1..0.1);
            }
        }
        let x = [0.3, -0.7, 1.1];
        // Scalar loss: weighted sum of outputs.
        let weights = [0.8, -1.3];
        let loss = |net: &Mlp| -> f64 {
            let out = net.forward(&x);
            out[0] * weights[0] + out[1] * weights[1]
        };

        let mut cache = MlpCache::default();
        net.forward_cached(&x, &mut cache);
        let mut grads = net.grads_like();
        net.backward(&x, &cache, &weights, &mut grads);

        let h = 1e-6;
        for k in 0..net.layers.len() {
            for idx in 0..net.layers[k].w.len() {
                let orig = net.layers[k].w[idx];
                net.layers[k].w[idx] = orig + h;
                let up = loss(&net);
                net.layers[k].w[idx] = orig - h;
                let down = loss(&net);
                net.layers[k].w[idx] = orig;
                let fd = (up - down) / (2.0 * h);
                assert!(
                    (grads.w[k][idx] - fd).abs() < 1e-6 * fd.abs().max(1.0),
                    "layer {k} w[{idx}]: {} vs fd {}",
                    grads.w[k][idx],
                    fd
                );
            }
            for idx in 0..net.layers[k].b.len() {
                let orig = net.layers[k].b[idx];
                net.layers[k].b[idx] = orig + h;
                let up = loss(&net);
                net.layers[k].b[idx] = orig - h;
                let down = loss(&net);
                net.layers[k].b[idx] = orig;
                let fd = (up - down) / (2.0 * h);
                assert!((grads.b[k][idx] - fd).abs() < 1e-6 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn orthogonal_init_produces_orthonormal_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        // Tall: columns orthonormal.
        let m = orthogonal(64, 4, 1.0, &mut rng);
        for a in 0..4 {
            for b in 0..4 {
                let dot: f64 = (0..64).map(|r| m[r * 4 + a] * m[r * 4 + b]).sum();
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-10, "col {a}.{b}: {dot}");
            }
        }
        // Wide: rows orthonormal, scaled by the gain.
        let gain = 0.01;
        let m = orthogonal(2, 64, gain, &mut rng);
        for a in 0..2 {
            for b in 0..2 {
                let dot: f64 = (0..64).map(|c| m[a * 64 + c] * m[b * 64 + c]).sum();
                let expected = if a == b { gain * gain } else { 0.0 };
                assert!((dot - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn adam_descends_a_quadratic() {
        // Minimize (p - 3)^2; Adam should converge close to 3.
        let mut p = vec![0.0];
        let mut opt = Adam::new(0.1, 1);
        for _ in 0..500 {
            let g = vec![2.0 * (p[0] - 3.0)];
            opt.step(&mut p, &g);
        }
        assert!((p[0] - 3.0).abs() < 1e-3, "p = {}", p[0]);
    }

    #[test]
    fn grad_norm_clipping() {
        let mut g = vec![3.0, 4.0];
        let norm = clip_grad_norm(&mut g, 0.5);
        assert!((norm - 5.0).abs() < 1e-12);
        let clipped: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((clipped - 0.5).abs() < 1e-12);

        let mut small = vec![0.1, 0.1];
        clip_grad_norm(&mut small, 0.5);
        assert_eq!(small, vec![0.1, 0.1]);
    }
}
