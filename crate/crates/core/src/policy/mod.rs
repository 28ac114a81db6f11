//! Feed-forward softmax policy over the eight compass actions.
//!
//! `h1 = relu(W1 s + b1)`, `h2 = relu(W2 h1 + b2)`, `π = softmax(W3 h2 + b3)`.
//! Masking happens after the forward pass: unavailable actions get zero
//! probability and the rest are renormalized. Gradients are hand-derived.

mod adam;
mod io;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use io::{load_weights, save_weights};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::rng_from;
use crate::geo::CompassAction;

/// One flag per compass action, indexed by [`CompassAction::index`].
pub type ActionMask = [bool; 8];

pub const OUTPUTS: usize = CompassAction::COUNT;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub hidden1: usize,
    pub hidden2: usize,
    pub seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig { hidden1: 512, hidden2: 256, seed: 0 }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden1 == 0 || self.hidden2 == 0 {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Layer sizes `[in, h1, h2, out]` and all parameters in one flat buffer:
/// W1 (h1×in, row-major), b1, W2 (h2×h1), b2, W3 (out×h2), b3.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNetwork {
    sizes: [usize; 4],
    params: Vec<f64>,
}

/// Gradient with the same flat layout as [`PolicyNetwork::params`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient(pub Vec<f64>);

impl Gradient {
    pub fn zeros_like(net: &PolicyNetwork) -> Self {
        Gradient(vec![0.0; net.params.len()])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&g| g == 0.0)
    }
}

struct Activations {
    pre1: Vec<f64>,
    h1: Vec<f64>,
    pre2: Vec<f64>,
    h2: Vec<f64>,
    probs: [f64; OUTPUTS],
}

fn param_count(s: [usize; 4]) -> usize {
    s[1] * s[0] + s[1] + s[2] * s[1] + s[2] + s[3] * s[2] + s[3]
}

/// `out = W x + b` for a row-major `W`.
fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(b.iter().zip(w.chunks_exact(x.len())).map(|(bi, row)| bi + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()));
}

fn softmax(z: &[f64]) -> [f64; OUTPUTS] {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; OUTPUTS];
    let mut total = 0.0;
    for (pi, zi) in p.iter_mut().zip(z) {
        *pi = (zi - max).exp();
        total += *pi;
    }
    p.iter_mut().for_each(|pi| *pi /= total);
    p
}

impl PolicyNetwork {
    /// Xavier-uniform weights, zero biases.
    pub fn new(input: usize, cfg: &PolicyConfig) -> Result<Self> {
        cfg.validate()?;
        if input == 0 {
            return Err(Error::Config("policy input size must be positive".into()));
        }
        let mut net = Self::zeros([input, cfg.hidden1, cfg.hidden2, OUTPUTS]);
        let mut rng = rng_from(cfg.seed);
        for layer in 0..3 {
            let (fan_in, fan_out) = (net.sizes[layer], net.sizes[layer + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let (w, _) = net.layer_range(layer);
            for p in &mut net.params[w] {
                *p = rng.gen_range(-limit..=limit);
            }
        }
        Ok(net)
    }

    pub fn zeros(sizes: [usize; 4]) -> Self {
        assert_eq!(sizes[3], OUTPUTS, "policy has one output per compass action");
        PolicyNetwork { sizes, params: vec![0.0; param_count(sizes)] }
    }

    pub(crate) fn from_parts(sizes: [usize; 4], params: Vec<f64>) -> Result<Self> {
        if sizes[3] != OUTPUTS || sizes[..3].contains(&0) {
            return Err(Error::Format(format!("invalid layer sizes {sizes:?}")));
        }
        if params.len() != param_count(sizes) {
            return Err(Error::DimensionMismatch { expected: param_count(sizes), actual: params.len() });
        }
        Ok(PolicyNetwork { sizes, params })
    }

    pub fn sizes(&self) -> [usize; 4] {
        self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Ranges of (weights, biases) for layer 0, 1 or 2 within the flat buffer.
    pub fn layer_range(&self, layer: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let mut start = 0;
        for l in 0..3 {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let w = start..start + i * o;
            let b = w.end..w.end + o;
            if l == layer {
                return (w, b);
            }
            start = b.end;
        }
        panic!("layer index {layer} out of range");
    }

    fn layer(&self, layer: usize) -> (&[f64], &[f64]) {
        let (w, b) = self.layer_range(layer);
        (&self.params[w], &self.params[b])
    }

    fn activations(&self, state: &[f64]) -> Result<Activations> {
        if state.len() != self.sizes[0] {
            return Err(Error::DimensionMismatch { expected: self.sizes[0], actual: state.len() });
        }
        let relu = |v: &[f64]| v.iter().map(|x| x.max(0.0)).collect::<Vec<_>>();
        let (mut pre1, mut pre2, mut z) = (Vec::new(), Vec::new(), Vec::new());
        let (w, b) = self.layer(0);
        affine(w, b, state, &mut pre1);
        let h1 = relu(&pre1);
        let (w, b) = self.layer(1);
        affine(w, b, &h1, &mut pre2);
        let h2 = relu(&pre2);
        let (w, b) = self.layer(2);
        affine(w, b, &h2, &mut z);
        Ok(Activations { pre1, h1, pre2, h2, probs: softmax(&z) })
    }

    /// Unmasked action probabilities.
    pub fn forward(&self, state: &[f64]) -> Result<[f64; OUTPUTS]> {
        Ok(self.activations(state)?.probs)
    }

    /// log of the masked, renormalized probability of `action`.
    pub fn log_prob(&self, state: &[f64], action: CompassAction, mask: &ActionMask) -> Result<f64> {
        if !mask[action.index()] {
            return Err(Error::MaskedAction(action));
        }
        let q = mask_and_renormalize(&self.forward(state)?, mask)?;
        Ok(q[action.index()].ln())
    }

    /// ∇θ log q(action), where q is the masked renormalization of π.
    pub fn grad_log_policy(&self, state: &[f64], action: CompassAction, mask: &ActionMask) -> Result<Gradient> {
        let mut g = Gradient::zeros_like(self);
        self.accumulate_grad(state, action, mask, 1.0, &mut g)?;
        Ok(g)
    }

    /// Adds `scale · ∇θ log q(action)` into `grad`.
    pub fn accumulate_grad(
        &self,
        state: &[f64],
        action: CompassAction,
        mask: &ActionMask,
        scale: f64,
        grad: &mut Gradient,
    ) -> Result<()> {
        if !mask[action.index()] {
            return Err(Error::MaskedAction(action));
        }
        let act = self.activations(state)?;
        let q = mask_and_renormalize(&act.probs, mask)?;
        // d log q_a / d z_k = δ_ak − q_k on allowed k; masked logits do not enter q.
        let dz: Vec<f64> = (0..OUTPUTS)
            .map(|k| if mask[k] { scale * (f64::from(u8::from(k == action.index())) - q[k]) } else { 0.0 })
            .collect();

        let inputs: [&[f64]; 3] = [state, &act.h1, &act.h2];
        let pres: [&[f64]; 2] = [&act.pre1, &act.pre2];
        let mut delta = dz;
        for layer in (0..3).rev() {
            let (wr, br) = self.layer_range(layer);
            let x = inputs[layer];
            let n_in = x.len();
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grad.0[br.start + o] += d;
                let row = &mut grad.0[wr.start + o * n_in..wr.start + (o + 1) * n_in];
                for (g, xi) in row.iter_mut().zip(x) {
                    *g += d * xi;
                }
            }
            if layer == 0 {
                break;
            }
            let w = &self.params[wr];
            let pre = pres[layer - 1];
            let mut back = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (b, wi) in back.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *b += d * wi;
                }
            }
            for (b, &p) in back.iter_mut().zip(pre) {
                if p <= 0.0 {
                    *b = 0.0;
                }
            }
            delta = back;
        }
        Ok(())
    }
}

/// Zeroes masked entries and rescales the rest to sum to one.
pub fn mask_and_renormalize(probs: &[f64; OUTPUTS], mask: &ActionMask) -> Result<[f64; OUTPUTS]> {
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyMask);
    }
    let mut out = [0.0; OUTPUTS];
    let mut total = 0.0;
    for k in 0..OUTPUTS {
        if mask[k] {
            out[k] = probs[k];
            total += probs[k];
        }
    }
    if total > 0.0 {
        out.iter_mut().for_each(|p| *p /= total);
    } else {
        // Every allowed entry underflowed: fall back to uniform over the mask.
        let n = mask.iter().filter(|&&m| m).count() as f64;
        for k in 0..OUTPUTS {
            out[k] = if mask[k] { 1.0 / n } else { 0.0 };
        }
    }
    Ok(out)
}

/// Inverse-CDF draw. Entries with zero probability are never returned.
pub fn sample_action<R: Rng + ?Sized>(dist: &[f64; OUTPUTS], rng: &mut R) -> CompassAction {
    let u: f64 = rng.gen();
    let total: f64 = dist.iter().sum();
    let mut cum = 0.0;
    let mut last = None;
    for (k, &p) in dist.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        cum += p;
        last = Some(k);
        if u * total < cum {
            break;
        }
    }
    CompassAction::from_index(last.expect("distribution has positive mass")).unwrap()
}

/// Index of the largest entry; first wins on ties.
pub fn argmax(dist: &[f64; OUTPUTS]) -> CompassAction {
    let mut best = 0;
    for k in 1..OUTPUTS {
        if dist[k] > dist[best] {
            best = k;
        }
    }
    CompassAction::from_index(best).unwrap()
}
