//! Skip-gram with negative sampling, plain SGD over two vector tables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::table::EmbeddingTable;
use super::EmbedError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipGramConfig {
    /// Context window radius, fixed (not sampled per position).
    pub window: usize,
    pub dim: usize,
    /// Negative samples drawn per positive pair.
    pub negatives: usize,
    pub epochs: usize,
    /// Initial learning rate, decayed linearly to ~0 over all steps.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            window: 5,
            dim: 15,
            negatives: 5,
            epochs: 15,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl SkipGramConfig {
    /// window 5 / dim 15, used for the medicinal-property corpus.
    pub fn properties(seed: u64) -> Self {
        SkipGramConfig { seed, ..Default::default() }
    }

    /// window 10 / dim 30, used for the efficacy corpus.
    pub fn efficacy(seed: u64) -> Self {
        SkipGramConfig {
            window: 10,
            dim: 30,
            seed,
            ..Default::default()
        }
    }

    /// window 10 / dim 30; one formula is one sentence in member order.
    pub fn combination(seed: u64) -> Self {
        Self::efficacy(seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipGramStats {
    /// Mean negative-sampling loss per epoch.
    pub epoch_loss: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// ln sigmoid with the usual clamp against -inf for very negative inputs.
fn log_sigmoid(x: f64) -> f64 {
    if x > -30.0 {
        -(1.0 + (-x).exp()).ln()
    } else {
        x
    }
}

/// Trains one embedding table over a tokenized corpus.
///
/// Deterministic under a fixed seed: vocabulary ids are assigned in
/// lexicographic token order and all sampling comes from one seeded stream.
pub fn train_skipgram(
    corpus: &[Vec<String>],
    cfg: &SkipGramConfig,
) -> Result<(EmbeddingTable, SkipGramStats), EmbedError> {
    let mut vocab: Vec<String> = corpus.iter().flatten().cloned().collect();
    vocab.sort();
    vocab.dedup();
    if vocab.len() < 2 {
        return Err(EmbedError::VocabularyTooSmall(vocab.len()));
    }
    let index: std::collections::BTreeMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();

    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.iter().map(|t| index[t.as_str()]).collect())
        .collect();

    // Unigram^0.75 negative-sampling distribution as a cumulative table.
    let mut counts = vec![0u64; vocab.len()];
    for s in &sentences {
        for &t in s {
            counts[t] += 1;
        }
    }
    let mut cumulative = Vec::with_capacity(vocab.len());
    let mut acc = 0.0;
    for c in &counts {
        acc += (*c as f64).powf(0.75);
        cumulative.push(acc);
    }
    let cum_total = acc;

    let v = vocab.len();
    let dim = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut input: Vec<f64> = (0..v * dim)
        .map(|_| (rng.gen::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut output = vec![0.0f64; v * dim];

    let pairs_per_epoch: usize = sentences
        .iter()
        .map(|s| {
            (0..s.len())
                .map(|i| {
                    let lo = i.saturating_sub(cfg.window);
                    let hi = (i + cfg.window).min(s.len().saturating_sub(1));
                    hi - lo // neighbors excluding the center itself
                })
                .sum::<usize>()
        })
        .sum();
    let total_steps = (pairs_per_epoch * cfg.epochs.max(1)) as f64;

    let mut stats = SkipGramStats {
        epoch_loss: Vec::with_capacity(cfg.epochs),
    };
    let mut step = 0usize;
    let mut grad_in = vec![0.0f64; dim];

    for _epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut loss_n = 0usize;
        for s in &sentences {
            for center_pos in 0..s.len() {
                let center = s[center_pos];
                let lo = center_pos.saturating_sub(cfg.window);
                let hi = (center_pos + cfg.window).min(s.len() - 1);
                for ctx_pos in lo..=hi {
                    if ctx_pos == center_pos {
                        continue;
                    }
                    let lr = cfg.learning_rate
                        * (1.0 - step as f64 / total_steps).max(1e-4);
                    step += 1;

                    let context = s[ctx_pos];
                    let vin = center * dim;
                    grad_in.iter_mut().for_each(|g| *g = 0.0);
                    let mut loss = 0.0;

                    // Positive pair plus sampled negatives; label 1 then 0s.
                    for k in 0..=cfg.negatives {
                        let (target, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let r = rng.gen::<f64>() * cum_total;
                            let mut t = cumulative.partition_point(|c| *c < r);
                            if t >= v {
                                t = v - 1;
                            }
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let uout = target * dim;
                        let dot: f64 = (0..dim)
                            .map(|d| input[vin + d] * output[uout + d])
                            .sum();
                        loss -= if label == 1.0 {
                            log_sigmoid(dot)
                        } else {
                            log_sigmoid(-dot)
                        };
                        let g = sigmoid(dot) - label;
                        for d in 0..dim {
                            grad_in[d] += g * output[uout + d];
                            output[uout + d] -= lr * g * input[vin + d];
                        }
                    }
                    for d in 0..dim {
                        input[vin + d] -= lr * grad_in[d];
                    }
                    loss_sum += loss;
                    loss_n += 1;
                }
            }
        }
        stats
            .epoch_loss
            .push(if loss_n > 0 { loss_sum / loss_n as f64 } else { 0.0 });
    }

    let mut table = EmbeddingTable::new(dim);
    for (i, token) in vocab.iter().enumerate() {
        table.insert(token.clone(), input[i * dim..(i + 1) * dim].to_vec());
    }
    Ok((table, stats))
}
