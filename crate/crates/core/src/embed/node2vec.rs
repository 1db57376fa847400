//! Node2Vec: biased second-order random walks fed into skip-gram.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::skipgram::{train_skipgram, SkipGramConfig};
use super::table::EmbeddingTable;
use super::EmbedError;
use crate::kg::{TermGraph, TermId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node2VecConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    /// Return parameter: bias 1/p toward revisiting the previous node.
    pub p: f64,
    /// In-out parameter: bias 1/q toward nodes farther from the previous one.
    pub q: f64,
    pub skipgram: SkipGramConfig,
}

impl Default for Node2VecConfig {
    fn default() -> Self {
        Node2VecConfig {
            walks_per_node: 10,
            walk_length: 80,
            p: 1.0,
            q: 1.0,
            skipgram: SkipGramConfig {
                window: 10,
                dim: 32,
                ..Default::default()
            },
        }
    }
}

impl Node2VecConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.skipgram.seed = seed;
        self
    }
}

struct WalkGraph {
    nodes: Vec<TermId>,
    /// Sorted by neighbor index, weights > 0.
    adj: Vec<Vec<(usize, f64)>>,
    neighbor_sets: Vec<BTreeSet<usize>>,
}

impl WalkGraph {
    fn build(g: &TermGraph) -> Self {
        let nodes: Vec<TermId> = g.nodes.keys().cloned().collect();
        let index: BTreeMap<&TermId, usize> =
            nodes.iter().enumerate().map(|(i, t)| (t, i)).collect();
        let mut adj = vec![Vec::new(); nodes.len()];
        for (a, b, w) in &g.edges {
            let (ia, ib) = (index[a], index[b]);
            adj[ia].push((ib, *w));
            adj[ib].push((ia, *w));
        }
        for list in &mut adj {
            list.sort_by_key(|(i, _)| *i);
        }
        let neighbor_sets = adj
            .iter()
            .map(|list| list.iter().map(|(i, _)| *i).collect())
            .collect();
        WalkGraph {
            nodes,
            adj,
            neighbor_sets,
        }
    }

    /// First-order step: transition probability proportional to edge weight.
    fn step_uniform(&self, cur: usize, rng: &mut ChaCha8Rng) -> Option<usize> {
        let list = &self.adj[cur];
        if list.is_empty() {
            return None;
        }
        let total: f64 = list.iter().map(|(_, w)| w).sum();
        let mut r = rng.gen::<f64>() * total;
        for (n, w) in list {
            r -= w;
            if r <= 0.0 {
                return Some(*n);
            }
        }
        Some(list.last().unwrap().0)
    }

    /// Second-order step from (prev, cur): weight x node2vec bias.
    fn step_biased(
        &self,
        prev: usize,
        cur: usize,
        p: f64,
        q: f64,
        rng: &mut ChaCha8Rng,
    ) -> Option<usize> {
        let list = &self.adj[cur];
        if list.is_empty() {
            return None;
        }
        let prev_neighbors = &self.neighbor_sets[prev];
        let biased: Vec<f64> = list
            .iter()
            .map(|(n, w)| {
                let bias = if *n == prev {
                    1.0 / p
                } else if prev_neighbors.contains(n) {
                    1.0
                } else {
                    1.0 / q
                };
                w * bias
            })
            .collect();
        let total: f64 = biased.iter().sum();
        let mut r = rng.gen::<f64>() * total;
        for ((n, _), bw) in list.iter().zip(&biased) {
            r -= bw;
            if r <= 0.0 {
                return Some(*n);
            }
        }
        Some(list.last().unwrap().0)
    }
}

/// Embeds the term graph. Isolated nodes are excluded from the walk corpus
/// and come back as zero vectors.
pub fn node2vec_embed(
    g: &TermGraph,
    cfg: &Node2VecConfig,
) -> Result<EmbeddingTable, EmbedError> {
    let wg = WalkGraph::build(g);
    let mut corpus: Vec<Vec<String>> = Vec::new();
    for (start, term) in wg.nodes.iter().enumerate() {
        if wg.adj[start].is_empty() {
            continue;
        }
        for walk_idx in 0..cfg.walks_per_node {
            // Per-(node, walk) stream so results do not depend on scheduling.
            let stream = cfg
                .skipgram
                .seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add((start as u64) << 20)
                .wrapping_add(walk_idx as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            let mut walk = vec![start];
            if let Some(next) = wg.step_uniform(start, &mut rng) {
                walk.push(next);
            }
            while walk.len() < cfg.walk_length {
                let cur = walk[walk.len() - 1];
                let prev = walk[walk.len() - 2];
                match wg.step_biased(prev, cur, cfg.p, cfg.q, &mut rng) {
                    Some(next) => walk.push(next),
                    None => break,
                }
            }
            corpus.push(walk.iter().map(|&i| wg.nodes[i].0.clone()).collect());
        }
        let _ = term;
    }

    let mut table = if corpus.is_empty() {
        EmbeddingTable::new(cfg.skipgram.dim)
    } else {
        train_skipgram(&corpus, &cfg.skipgram)?.0
    };
    for (i, term) in wg.nodes.iter().enumerate() {
        if wg.adj[i].is_empty() && !table.contains(term.as_str()) {
            table.insert(term.0.clone(), vec![0.0; cfg.skipgram.dim]);
        }
    }
    Ok(table)
}
