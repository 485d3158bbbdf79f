use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fully connected network with rectifier hidden layers and a linear output.
/// Parameters are stored flat, layer by layer: the row-major weight matrix
/// (`out × in`) followed by the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

impl Mlp {
    /// He-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "bad layer sizes {sizes:?}");
        let mut params = Vec::with_capacity(Self::param_count(sizes));
        for w in sizes.windows(2) {
            let bound = (6.0 / w[0] as f64).sqrt();
            params.extend((0..w[0] * w[1]).map(|_| rng.random_range(-bound..bound)));
            params.extend(std::iter::repeat_n(0.0, w[1]));
        }
        Self { sizes: sizes.to_vec(), params }
    }

    pub fn from_params(sizes: Vec<usize>, params: Vec<f64>) -> Option<Self> {
        (sizes.len() >= 2 && params.len() == Self::param_count(&sizes)).then_some(Self { sizes, params })
    }

    fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Activations of every layer for a row-major batch of `n` inputs; the
    /// first entry is the input, the last the output.
    pub fn forward_batch(&self, x: &[f64], n: usize) -> Vec<Vec<f64>> {
        assert_eq!(x.len(), n * self.inputs());
        let mut acts = vec![x.to_vec()];
        let mut off = 0;
        let last = self.sizes.len() - 2;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &self.params[off..off + fan_in * fan_out];
            let bias = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            off += fan_in * fan_out + fan_out;
            let input = acts.last().expect("non-empty");
            let mut out = vec![0.0; n * fan_out];
            for b in 0..n {
                let xi = &input[b * fan_in..(b + 1) * fan_in];
                let yo = &mut out[b * fan_out..(b + 1) * fan_out];
                for (o, y) in yo.iter_mut().enumerate() {
                    let row = &weights[o * fan_in..(o + 1) * fan_in];
                    let z = bias[o] + row.iter().zip(xi).map(|(w, x)| w * x).sum::<f64>();
                    *y = if l == last { z } else { z.max(0.0) };
                }
            }
            acts.push(out);
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_batch(x, 1).pop().expect("output layer")
    }

    /// Parameter gradient given the activations of a batch and the loss
    /// gradient with respect to the outputs.
    pub fn backward(&self, acts: &[Vec<f64>], d_out: &[f64], n: usize) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        let mut offsets = Vec::with_capacity(self.sizes.len() - 1);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut delta = d_out.to_vec();
        for l in (0..self.sizes.len() - 1).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &acts[l];
            {
                let (gw, gb) = grad[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                for b in 0..n {
                    let xi = &input[b * fan_in..(b + 1) * fan_in];
                    for o in 0..fan_out {
                        let d = delta[b * fan_out + o];
                        if d == 0.0 {
                            continue;
                        }
                        gb[o] += d;
                        for (g, x) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(xi) {
                            *g += d * x;
                        }
                    }
                }
            }
            if l == 0 {
                break;
            }
            let weights = &self.params[off..off + fan_in * fan_out];
            let mut prev = vec![0.0; n * fan_in];
            for b in 0..n {
                let p = &mut prev[b * fan_in..(b + 1) * fan_in];
                for o in 0..fan_out {
                    let d = delta[b * fan_out + o];
                    if d == 0.0 {
                        continue;
                    }
                    for (pi, w) in p.iter_mut().zip(&weights[o * fan_in..(o + 1) * fan_in]) {
                        *pi += d * w;
                    }
                }
                // rectifier derivative, taken as 0 at the kink
                for (pi, a) in p.iter_mut().zip(&input[b * fan_in..(b + 1) * fan_in]) {
                    if *a <= 0.0 {
                        *pi = 0.0;
                    }
                }
            }
            delta = prev;
        }
        grad
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; num_params], v: vec![0.0; num_params] }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}
