//! Two-layer perceptrons with manual backpropagation, and Adam.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Output {
    Linear,
    Sigmoid,
}

/// `x -> tanh(W1 x + b1) -> W2 h + b2 -> output`.
/// Parameters are one flat vector: W1 (row-major), b1, W2 (row-major), b2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    pub output: Output,
    pub params: Vec<f64>,
}

pub struct Forward {
    x: Vec<f64>,
    h: Vec<f64>,
    pub y: Vec<f64>,
}

impl Mlp {
    /// Hidden layer uniform in `±1/sqrt(n_in)`; the output layer starts at zero.
    pub fn new(n_in: usize, n_hidden: usize, n_out: usize, output: Output, r: &mut impl Rng) -> Self {
        let bound = 1.0 / (n_in as f64).sqrt();
        let mut params = Vec::with_capacity(n_hidden * n_in + n_hidden + n_out * n_hidden + n_out);
        for _ in 0..n_hidden * n_in + n_hidden {
            params.push(r.random_range(-bound..bound));
        }
        params.resize(params.capacity(), 0.0);
        Self { n_in, n_hidden, n_out, output, params }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.n_hidden * self.n_in;
        let w2 = b1 + self.n_hidden;
        let b2 = w2 + self.n_out * self.n_hidden;
        (b1, w2, b2)
    }

    pub fn forward(&self, x: &[f64]) -> Forward {
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        let h: Vec<f64> = (0..self.n_hidden)
            .map(|j| {
                let row = &p[j * self.n_in..(j + 1) * self.n_in];
                (p[b1 + j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()).tanh()
            })
            .collect();
        let y = (0..self.n_out)
            .map(|k| {
                let row = &p[w2 + k * self.n_hidden..w2 + (k + 1) * self.n_hidden];
                let z = p[b2 + k] + row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>();
                match self.output {
                    Output::Linear => z,
                    Output::Sigmoid => 1.0 / (1.0 + (-z).exp()),
                }
            })
            .collect();
        Forward { x: x.to_vec(), h, y }
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).y
    }

    /// Gradients of a scalar loss with respect to the parameters and the
    /// input, given its gradient `dy` with respect to the output.
    pub fn backward(&self, f: &Forward, dy: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        let mut g = vec![0.0; p.len()];
        let dz: Vec<f64> = match self.output {
            Output::Linear => dy.to_vec(),
            Output::Sigmoid => dy.iter().zip(&f.y).map(|(d, y)| d * y * (1.0 - y)).collect(),
        };
        let mut dh = vec![0.0; self.n_hidden];
        for k in 0..self.n_out {
            g[b2 + k] += dz[k];
            for j in 0..self.n_hidden {
                g[w2 + k * self.n_hidden + j] += dz[k] * f.h[j];
                dh[j] += dz[k] * p[w2 + k * self.n_hidden + j];
            }
        }
        let mut dx = vec![0.0; self.n_in];
        for j in 0..self.n_hidden {
            let da = dh[j] * (1.0 - f.h[j] * f.h[j]);
            g[b1 + j] += da;
            for i in 0..self.n_in {
                g[j * self.n_in + i] += da * f.x[i];
                dx[i] += da * p[j * self.n_in + i];
            }
        }
        (g, dx)
    }

    /// `self <- tau * other + (1 - tau) * self`.
    pub fn soft_update_from(&mut self, other: &Mlp, tau: f64) {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            *a = tau * b + (1.0 - tau) * *a;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { lr, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// One descent step along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng;

    #[test]
    fn backward_matches_differences() {
        let mut r = rng(5);
        for output in [Output::Linear, Output::Sigmoid] {
            let mut net = Mlp::new(3, 5, 2, output, &mut r);
            for p in net.params.iter_mut() {
                *p = r.random_range(-1.0..1.0);
            }
            let x = [0.3, -0.7, 0.2];
            let dy = [0.6, -1.1];
            let loss = |n: &Mlp, x: &[f64]| -> f64 { n.predict(x).iter().zip(&dy).map(|(a, b)| a * b).sum() };
            let (g, dx) = net.backward(&net.forward(&x), &dy);
            let h = 1e-6;
            for i in 0..net.params.len() {
                let mut a = net.clone();
                a.params[i] += h;
                let mut b = net.clone();
                b.params[i] -= h;
                let fd = (loss(&a, &x) - loss(&b, &x)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-7, "param {i}");
            }
            for i in 0..3 {
                let mut a = x;
                a[i] += h;
                let mut b = x;
                b[i] -= h;
                let fd = (loss(&net, &a) - loss(&net, &b)) / (2.0 * h);
                assert!((fd - dx[i]).abs() < 1e-7, "input {i}");
            }
        }
    }

    #[test]
    fn fresh_output_is_neutral() {
        let net = Mlp::new(4, 8, 3, Output::Sigmoid, &mut rng(1));
        assert_eq!(net.predict(&[1.0, 2.0, 3.0, 4.0]), vec![0.5; 3]);
    }
}
