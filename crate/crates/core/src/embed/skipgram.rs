use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::rng_from;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    /// Initial learning rate, decayed linearly to near zero over training.
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig { dim: 64, window: 5, negatives: 5, learning_rate: 0.025, epochs: 5, seed: 0 }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dim >= 2
            && self.window >= 1
            && self.negatives >= 1
            && self.learning_rate.is_finite()
            && self.learning_rate > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid skip-gram configuration {self:?}")))
        }
    }
}

const MIN_LR_FRACTION: f64 = 1e-4;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Skip-gram with negative sampling over integer tokens.
///
/// Input vectors start uniform in ±0.5/dim, context vectors at zero.
/// Negatives are drawn with probability ∝ count^0.75.
pub struct SkipGramTrainer<'w> {
    cfg: SkipGramConfig,
    walks: &'w [Vec<usize>],
    input: Vec<f64>,
    context: Vec<f64>,
    noise: WeightedIndex<f64>,
    noise_tokens: Vec<usize>,
    rng: ChaCha8Rng,
    pairs_per_epoch: usize,
    processed: usize,
    epochs_done: usize,
}

impl<'w> SkipGramTrainer<'w> {
    pub fn new(walks: &'w [Vec<usize>], cfg: &SkipGramConfig) -> Result<Self> {
        cfg.validate()?;
        let vocab = walks.iter().flatten().max().map(|m| m + 1).ok_or(Error::EmptyVocabulary)?;
        let mut counts = vec![0usize; vocab];
        for &t in walks.iter().flatten() {
            counts[t] += 1;
        }
        let noise_tokens: Vec<usize> = (0..vocab).filter(|&t| counts[t] > 0).collect();
        let noise = WeightedIndex::new(noise_tokens.iter().map(|&t| (counts[t] as f64).powf(0.75)))
            .map_err(|_| Error::EmptyVocabulary)?;
        let mut rng = rng_from(cfg.seed);
        let d = cfg.dim;
        let input = (0..vocab * d).map(|_| (rng.gen::<f64>() - 0.5) / d as f64).collect();
        let pairs_per_epoch = walks
            .iter()
            .map(|w| (0..w.len()).map(|i| w.len().min(i + cfg.window + 1) - i.saturating_sub(cfg.window) - 1).sum::<usize>())
            .sum();
        Ok(SkipGramTrainer {
            cfg: cfg.clone(),
            walks,
            input,
            context: vec![0.0; vocab * d],
            noise,
            noise_tokens,
            rng,
            pairs_per_epoch,
            processed: 0,
            epochs_done: 0,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.input.len() / self.cfg.dim
    }

    pub fn vector(&self, token: usize) -> &[f64] {
        let d = self.cfg.dim;
        &self.input[token * d..(token + 1) * d]
    }

    pub fn context_vector(&self, token: usize) -> &[f64] {
        let d = self.cfg.dim;
        &self.context[token * d..(token + 1) * d]
    }

    /// Overwrites both vectors of a token; used to set up exact test states.
    pub fn set_vectors(&mut self, token: usize, input: &[f64], context: &[f64]) {
        let d = self.cfg.dim;
        self.input[token * d..(token + 1) * d].copy_from_slice(input);
        self.context[token * d..(token + 1) * d].copy_from_slice(context);
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    fn current_lr(&self) -> f64 {
        let total = (self.pairs_per_epoch * self.cfg.epochs).max(1) as f64;
        self.cfg.learning_rate * (1.0 - self.processed as f64 / total).max(MIN_LR_FRACTION)
    }

    /// One ascent step on log σ(u·v) + Σ log σ(−u·v_neg) for a single pair.
    /// Negatives equal to the context token are skipped.
    pub fn train_pair(&mut self, center: usize, context: usize, negatives: &[usize], lr: f64) {
        let d = self.cfg.dim;
        let c = center * d;
        let mut grad_in = vec![0.0; d];
        let targets = std::iter::once((context, 1.0)).chain(negatives.iter().filter(|&&n| n != context).map(|&n| (n, 0.0)));
        for (target, label) in targets {
            let t = target * d;
            let dot: f64 = (0..d).map(|k| self.input[c + k] * self.context[t + k]).sum();
            let g = lr * (label - sigmoid(dot));
            for k in 0..d {
                grad_in[k] += g * self.context[t + k];
                self.context[t + k] += g * self.input[c + k];
            }
        }
        for k in 0..d {
            self.input[c + k] += grad_in[k];
        }
    }

    /// A full pass over every (center, context) pair within the window.
    pub fn run_epoch(&mut self) {
        let window = self.cfg.window;
        let mut negs = Vec::with_capacity(self.cfg.negatives);
        for w in self.walks {
            for i in 0..w.len() {
                let lo = i.saturating_sub(window);
                let hi = w.len().min(i + window + 1);
                for j in lo..hi {
                    if j == i {
                        continue;
                    }
                    negs.clear();
                    for _ in 0..self.cfg.negatives {
                        negs.push(self.noise_tokens[self.noise.sample(&mut self.rng)]);
                    }
                    let lr = self.current_lr();
                    let negatives = std::mem::take(&mut negs);
                    self.train_pair(w[i], w[j], &negatives, lr);
                    negs = negatives;
                    self.processed += 1;
                }
            }
        }
        self.epochs_done += 1;
    }

    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        cosine(self.vector(a), self.vector(b))
    }
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Trains for `cfg.epochs` full passes and returns the trainer holding the vectors.
pub fn train_skipgram<'w>(walks: &'w [Vec<usize>], cfg: &SkipGramConfig) -> Result<SkipGramTrainer<'w>> {
    let mut t = SkipGramTrainer::new(walks, cfg)?;
    for _ in 0..cfg.epochs {
        t.run_epoch();
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{walks_on_adjacency, WalkConfig};
    use crate::exec::Execution;

    #[test]
    fn empty_walks_rejected() {
        assert!(matches!(SkipGramTrainer::new(&[], &SkipGramConfig::default()), Err(Error::EmptyVocabulary)));
        assert!(matches!(SkipGramTrainer::new(&[vec![]], &SkipGramConfig::default()), Err(Error::EmptyVocabulary)));
    }

    #[test]
    fn single_step_matches_hand_gradient() {
        let walks = vec![vec![0, 1, 2]];
        let cfg = SkipGramConfig { dim: 3, ..Default::default() };
        let mut t = SkipGramTrainer::new(&walks, &cfg).unwrap();
        let (u, v, n) = ([0.1, -0.2, 0.3], [0.4, 0.1, -0.5], [-0.3, 0.2, 0.6]);
        t.set_vectors(0, &u, &[0.0; 3]);
        t.set_vectors(1, &[0.0; 3], &v);
        t.set_vectors(2, &[0.0; 3], &n);
        let lr = 0.025;
        t.train_pair(0, 1, &[2], lr);

        let s = |x: f64| 1.0 / (1.0 + (-x).exp());
        let uv = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
        let un = u[0] * n[0] + u[1] * n[1] + u[2] * n[2];
        let gp = lr * (1.0 - s(uv));
        let gn = -lr * s(un);
        for k in 0..3 {
            assert!((t.vector(0)[k] - (u[k] + gp * v[k] + gn * n[k])).abs() < 1e-9);
            assert!((t.context_vector(1)[k] - (v[k] + gp * u[k])).abs() < 1e-9);
            assert!((t.context_vector(2)[k] - (n[k] + gn * u[k])).abs() < 1e-9);
        }
    }

    #[test]
    fn repeated_pair_score_grows() {
        // Positive pairs (A,B) and (B,A) are pulled together in input·context space.
        let walks = vec![vec![0, 1]; 50];
        let cfg = SkipGramConfig { dim: 8, window: 1, negatives: 1, epochs: 30, seed: 7, ..Default::default() };
        let mut t = SkipGramTrainer::new(&walks, &cfg).unwrap();
        let score = |t: &SkipGramTrainer| cosine(t.vector(0), t.context_vector(1)) + cosine(t.vector(1), t.context_vector(0));
        let mut last = f64::NEG_INFINITY;
        for checkpoint in [1, 10, 30] {
            while t.epochs_done() < checkpoint {
                t.run_epoch();
            }
            let s = score(&t);
            assert!(s > last, "epoch {checkpoint}: {s} <= {last}");
            last = s;
        }
    }

    #[test]
    fn barbell_cliques_separate() {
        // Two 6-cliques joined by the bridge 5-6.
        let mut adj = vec![Vec::new(); 12];
        for base in [0, 6] {
            for i in base..base + 6 {
                for j in base..base + 6 {
                    if i != j {
                        adj[i].push(j);
                    }
                }
            }
        }
        adj[5].push(6);
        adj[6].push(5);
        for a in &mut adj {
            a.sort();
        }
        let wc = WalkConfig { walk_length: 20, walks_per_node: 20, seed: 2, ..Default::default() };
        let walks = walks_on_adjacency(&adj, &wc, Execution::Sequential).unwrap();
        let cfg = SkipGramConfig { dim: 16, window: 3, seed: 4, ..Default::default() };
        let t = train_skipgram(&walks, &cfg).unwrap();
        let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0, 0.0, 0);
        for i in 0..12 {
            for j in (i + 1)..12 {
                if (i < 6) == (j < 6) {
                    intra += t.cosine(i, j);
                    ni += 1;
                } else {
                    inter += t.cosine(i, j);
                    nx += 1;
                }
            }
        }
        let (intra, inter) = (intra / ni as f64, inter / nx as f64);
        assert!(intra > inter, "intra {intra} inter {inter}");
    }

    #[test]
    fn deterministic_under_seed() {
        let walks = vec![vec![0, 1, 2, 3, 2, 1], vec![3, 2, 1, 0]];
        let cfg = SkipGramConfig { dim: 4, epochs: 2, seed: 11, ..Default::default() };
        let a = train_skipgram(&walks, &cfg).unwrap();
        let b = train_skipgram(&walks, &cfg).unwrap();
        for tok in 0..4 {
            assert_eq!(a.vector(tok), b.vector(tok));
        }
    }
}
