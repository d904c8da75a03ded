//! Two-layer ReLU network with policy and value heads, manual backprop and Adam.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wp: usize,
    bp: usize,
    wv: usize,
    bv: usize,
    total: usize,
}

impl Layout {
    fn new(input: usize, hidden: usize, actions: usize) -> Self {
        let w1 = 0;
        let b1 = w1 + hidden * input;
        let w2 = b1 + hidden;
        let b2 = w2 + hidden * hidden;
        let wp = b2 + hidden;
        let bp = wp + actions * hidden;
        let wv = bp + actions;
        let bv = wv + hidden;
        Layout {
            w1,
            b1,
            w2,
            b2,
            wp,
            bp,
            wv,
            bv,
            total: bv + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input: usize,
    pub hidden: usize,
    pub actions: usize,
    pub params: Vec<f64>,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub x: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub logits: Vec<f64>,
    pub value: f64,
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: usize) -> Vec<f64> {
    let n = x.len();
    (0..out)
        .map(|o| b[o] + w[o * n..(o + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

impl Network {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn new(input: usize, hidden: usize, actions: usize, rng: &mut impl Rng) -> Self {
        let l = Layout::new(input, hidden, actions);
        let mut params = vec![0.0; l.total];
        let mut fill = |from: usize, to: usize, fan_in: usize| {
            let a = 1.0 / (fan_in.max(1) as f64).sqrt();
            for p in &mut params[from..to] {
                *p = rng.gen_range(-a..a);
            }
        };
        fill(l.w1, l.b1, input);
        fill(l.w2, l.b2, hidden);
        fill(l.wp, l.bp, hidden);
        fill(l.wv, l.bv, hidden);
        Network {
            input,
            hidden,
            actions,
            params,
        }
    }

    fn layout(&self) -> Layout {
        Layout::new(self.input, self.hidden, self.actions)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Parameter range of the value head (weights then bias).
    pub fn value_head(&self) -> std::ops::Range<usize> {
        let l = self.layout();
        l.wv..l.total
    }

    pub fn forward(&self, x: &[f64]) -> Forward {
        let l = self.layout();
        let p = &self.params;
        let (h, a) = (self.hidden, self.actions);
        let relu = |v: Vec<f64>| v.into_iter().map(|z| z.max(0.0)).collect::<Vec<_>>();
        let h1 = relu(affine(&p[l.w1..l.b1], &p[l.b1..l.w2], x, h));
        let h2 = relu(affine(&p[l.w2..l.b2], &p[l.b2..l.wp], &h1, h));
        let logits = affine(&p[l.wp..l.bp], &p[l.bp..l.wv], &h2, a);
        let value = affine(&p[l.wv..l.bv], &p[l.bv..l.total], &h2, 1)[0];
        Forward {
            x: x.to_vec(),
            h1,
            h2,
            logits,
            value,
        }
    }

    /// Accumulates parameter gradients into `grad` given upstream gradients
    /// for the logits and the value output.
    pub fn backward(&self, f: &Forward, dlogits: &[f64], dvalue: f64, grad: &mut [f64]) {
        let l = self.layout();
        let p = &self.params;
        let (n, h, a) = (self.input, self.hidden, self.actions);
        let mut dh2 = vec![0.0; h];
        for o in 0..a {
            let g = dlogits[o];
            if g == 0.0 {
                continue;
            }
            grad[l.bp + o] += g;
            for j in 0..h {
                grad[l.wp + o * h + j] += g * f.h2[j];
                dh2[j] += g * p[l.wp + o * h + j];
            }
        }
        grad[l.bv] += dvalue;
        for j in 0..h {
            grad[l.wv + j] += dvalue * f.h2[j];
            dh2[j] += dvalue * p[l.wv + j];
        }
        let mut dh1 = vec![0.0; h];
        for o in 0..h {
            if f.h2[o] <= 0.0 {
                continue;
            }
            let g = dh2[o];
            grad[l.b2 + o] += g;
            for j in 0..h {
                grad[l.w2 + o * h + j] += g * f.h1[j];
                dh1[j] += g * p[l.w2 + o * h + j];
            }
        }
        for o in 0..h {
            if f.h1[o] <= 0.0 {
                continue;
            }
            let g = dh1[o];
            grad[l.b1 + o] += g;
            for j in 0..n {
                grad[l.w1 + o * n + j] += g * f.x[j];
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let n: Network = serde_json::from_str(s)?;
        let want = Layout::new(n.input, n.hidden, n.actions).total;
        if n.params.len() != want {
            return Err(Error::parse(
                "$.params",
                format!("expected {want} parameters, got {}", n.params.len()),
            ));
        }
        Ok(n)
    }
}

/// Softmax over legal entries; illegal entries get exactly 0.
/// All-illegal masks yield all zeros.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Vec<f64> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&z, _)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; logits.len()];
    }
    let e: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(&z, &m)| if m { (z - max).exp() } else { 0.0 })
        .collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn masked_softmax_zeroes_illegal() {
        let p = masked_softmax(&[5.0, 1.0, 2.0], &[false, true, true]);
        assert_eq!(p[0], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(masked_softmax(&[1.0], &[false]), vec![0.0]);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let n = Network::new(3, 4, 2, &mut rng);
        assert_eq!(Network::from_json(&n.to_json()).unwrap(), n);
        assert!(Network::from_json(r#"{"input":3,"hidden":4,"actions":2,"params":[1.0]}"#).is_err());
    }
}
