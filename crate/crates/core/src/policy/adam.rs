use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Gradient, PolicyNetwork};
use crate::error::{io_err, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.learning_rate.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// First and second moments plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        AdamState { config, m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    pub fn for_net(net: &PolicyNetwork, config: AdamConfig) -> Self {
        Self::new(net.params().len(), config)
    }

    /// Bias-corrected ascent step on `scale · grads`. Nothing is modified on error.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], scale: f64) -> Result<()> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(Error::DimensionMismatch { expected: params.len(), actual: grads.len() });
        }
        if !scale.is_finite() || grads.iter().any(|g| !(g * scale).is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        let AdamConfig { learning_rate: lr, beta1: b1, beta2: b2, epsilon: eps } = self.config;
        let t = self.t + 1;
        let c1 = 1.0 - b1.powi(t as i32);
        let c2 = 1.0 - b2.powi(t as i32);
        let mut next = Vec::with_capacity(params.len());
        for i in 0..params.len() {
            let g = grads[i] * scale;
            let m = b1 * self.m[i] + (1.0 - b1) * g;
            let v = b2 * self.v[i] + (1.0 - b2) * g * g;
            let p = params[i] + lr * (m / c1) / ((v / c2).sqrt() + eps);
            if !p.is_finite() {
                return Err(Error::NonFiniteParameter);
            }
            next.push((m, v, p));
        }
        for (i, (m, v, p)) in next.into_iter().enumerate() {
            self.m[i] = m;
            self.v[i] = v;
            params[i] = p;
        }
        self.t = t;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = format!("{} {} {:e} {:e} {:e} {:e}\n", self.m.len(), self.t, c.learning_rate, c.beta1, c.beta2, c.epsilon);
        for buf in [&self.m, &self.v] {
            for x in buf.iter() {
                writeln!(out, "{x:.16e}").unwrap();
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = || Error::Format("malformed optimizer state".into());
        let mut tok = text.split_whitespace();
        let len: usize = tok.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let t: u64 = tok.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let mut num = || tok.next().and_then(|s| s.parse::<f64>().ok()).ok_or_else(bad);
        let config = AdamConfig { learning_rate: num()?, beta1: num()?, beta2: num()?, epsilon: num()? };
        let m = (0..len).map(|_| num()).collect::<Result<Vec<_>>>()?;
        let v = (0..len).map(|_| num()).collect::<Result<Vec<_>>>()?;
        if tok.next().is_some() {
            return Err(bad());
        }
        Ok(AdamState { config, m, v, t })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(io_err(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_text(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }
}

pub fn adam_step(net: &mut PolicyNetwork, adam: &mut AdamState, grads: &Gradient, scale: f64) -> Result<()> {
    adam.step(net.params_mut(), &grads.0, scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::rng_from;
    use rand::Rng;

    #[test]
    fn zero_gradient_only_advances_t() {
        let mut net = super::super::tests::random_net([3, 4, 4, 8], 1);
        let before = net.clone();
        let mut adam = AdamState::for_net(&net, AdamConfig::default());
        adam_step(&mut net, &mut adam, &Gradient::zeros_like(&before), 1.0).unwrap();
        assert_eq!(net, before);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = [0.0];
        let mut adam = AdamState::new(1, AdamConfig::default());
        adam.step(&mut p, &[1.0], 1.0).unwrap();
        assert!((p[0] - 1e-3).abs() < 1e-10);
    }

    #[test]
    fn matches_independent_adam() {
        let mut rng = rng_from(4);
        let n = 6;
        let mut p: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut q = p.clone();
        let mut adam = AdamState::new(n, AdamConfig::default());
        let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
        for step in 1..=5 {
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let scale = rng.gen_range(0.1..3.0);
            adam.step(&mut p, &g, scale).unwrap();
            for i in 0..n {
                let gi = scale * g[i];
                m[i] = 0.9 * m[i] + 0.1 * gi;
                v[i] = 0.999 * v[i] + 0.001 * gi * gi;
                let mh = m[i] / (1.0 - 0.9f64.powi(step));
                let vh = v[i] / (1.0 - 0.999f64.powi(step));
                q[i] += 1e-3 * mh / (vh.sqrt() + 1e-8);
            }
        }
        for i in 0..n {
            assert!((p[i] - q[i]).abs() < 1e-12);
            assert!((adam.m[i] - m[i]).abs() < 1e-12);
            assert!((adam.v[i] - v[i]).abs() < 1e-12);
        }
        assert_eq!(adam.t, 5);
    }

    #[test]
    fn non_finite_gradient_rejected_without_mutation() {
        let mut p = [0.5, 0.25];
        let mut adam = AdamState::new(2, AdamConfig::default());
        assert!(matches!(adam.step(&mut p, &[1.0, f64::NAN], 1.0), Err(Error::NonFiniteGradient)));
        assert_eq!(p, [0.5, 0.25]);
        assert_eq!(adam.t, 0);
    }

    #[test]
    fn text_round_trip() {
        let mut p = [0.1, -0.2, 0.3];
        let mut adam = AdamState::new(3, AdamConfig::default());
        adam.step(&mut p, &[0.3, -1.7, 1e-9], 1.0).unwrap();
        assert_eq!(AdamState::from_text(&adam.to_text()).unwrap(), adam);
        assert!(AdamState::from_text("3 1 1e-3 0.9").is_err());
    }
}
