//! Two-phase Louvain community detection on weighted modularity.
//!
//! The local-moving pass visits nodes in a seeded shuffled order; the whole
//! procedure restarts a fixed number of times with derived seeds and keeps
//! the best-modularity partition, which makes tiny graphs reliably land on
//! the global optimum while staying deterministic under the seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::WGraph;
use super::NetError;

const RESTARTS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Community id per node, dense from 0.
    pub assignment: Vec<usize>,
    pub modularity: f64,
}

/// Weighted modularity of an assignment on the original (self-loop-free)
/// graph.
pub fn modularity(g: &WGraph, assignment: &[usize]) -> f64 {
    let m: f64 = g.total_weight();
    if m == 0.0 {
        return 0.0;
    }
    let n_comm = assignment.iter().max().map_or(0, |c| c + 1);
    let mut internal = vec![0.0f64; n_comm];
    let mut strength = vec![0.0f64; n_comm];
    for &(a, b, w) in &g.edges {
        if assignment[a] == assignment[b] {
            internal[assignment[a]] += w;
        }
    }
    for i in 0..g.n() {
        strength[assignment[i]] += g.strength(i);
    }
    (0..n_comm)
        .map(|c| internal[c] / m - (strength[c] / (2.0 * m)).powi(2))
        .sum()
}

/// Aggregated working graph; self-loops carry intra-community weight across
/// levels.
struct LevelGraph {
    adj: Vec<Vec<(usize, f64)>>,
    self_weight: Vec<f64>,
    /// m = sum of edge weights + self weights.
    total: f64,
}

impl LevelGraph {
    fn from_wgraph(g: &WGraph) -> Self {
        LevelGraph {
            adj: g.adj.clone(),
            self_weight: vec![0.0; g.n()],
            total: g.total_weight(),
        }
    }

    fn n(&self) -> usize {
        self.adj.len()
    }

    /// Node strength: incident edge weight plus both ends of the self-loop.
    fn strength(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|(_, w)| w).sum::<f64>() + 2.0 * self.self_weight[i]
    }
}

fn one_level(g: &LevelGraph, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    let init: Vec<usize> = (0..g.n()).collect();
    one_level_from(g, init, rng)
}

/// Local moving from an arbitrary starting assignment; also used as the
/// multilevel refinement pass on the original graph.
fn one_level_from(
    g: &LevelGraph,
    initial: Vec<usize>,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, bool) {
    let n = g.n();
    let two_m = 2.0 * g.total;
    let mut community = initial;
    // One spare slot per node so "move out into a fresh singleton" is always
    // an available candidate; without it local moves can merge communities
    // but never split one.
    let n_comm = community.iter().max().map_or(0, |c| c + 1).max(n) + n;
    let mut comm_strength: Vec<f64> = vec![0.0; n_comm];
    for i in 0..n {
        comm_strength[community[i]] += g.strength(i);
    }
    let mut improved_any = false;

    let mut order: Vec<usize> = (0..n).collect();
    loop {
        let mut moves = 0usize;
        order.shuffle(rng);
        for &node in &order {
            let current = community[node];
            let k_i = g.strength(node);
            comm_strength[current] -= k_i;

            let mut weights: std::collections::BTreeMap<usize, f64> = Default::default();
            for &(nbr, w) in &g.adj[node] {
                *weights.entry(community[nbr]).or_insert(0.0) += w;
            }
            let own_link = weights.get(&current).copied().unwrap_or(0.0);
            let base_gain = own_link - k_i * comm_strength[current] / two_m;

            let mut best = (current, 0.0f64);
            for (&cand, &w_in) in &weights {
                if cand == current {
                    continue;
                }
                let gain = w_in - k_i * comm_strength[cand] / two_m;
                if gain - base_gain > best.1 + 1e-12 {
                    best = (cand, gain - base_gain);
                }
            }
            // Isolation candidate: an empty community has zero link weight
            // and zero strength.
            if comm_strength[current] > 0.0 || own_link > 0.0 {
                let empty = (0..n_comm).find(|&c| comm_strength[c] == 0.0 && c != current);
                if let Some(empty) = empty {
                    let gain = 0.0;
                    if gain - base_gain > best.1 + 1e-12 {
                        best = (empty, gain - base_gain);
                    }
                }
            }
            community[node] = best.0;
            comm_strength[best.0] += k_i;
            if best.0 != current {
                moves += 1;
                improved_any = true;
            }
        }
        if moves == 0 {
            break;
        }
    }
    (community, improved_any)
}

/// Collapses communities into nodes, keeping intra-community weight as
/// self-loops. Returns the new graph and old-node -> new-node mapping.
fn aggregate(g: &LevelGraph, community: &[usize]) -> (LevelGraph, Vec<usize>) {
    let mut relabel: std::collections::BTreeMap<usize, usize> = Default::default();
    let mut mapping = vec![0usize; g.n()];
    for i in 0..g.n() {
        let next = relabel.len();
        mapping[i] = *relabel.entry(community[i]).or_insert(next);
    }
    let n_comm = relabel.len();
    let mut self_weight = vec![0.0f64; n_comm];
    let mut between: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
    for i in 0..g.n() {
        self_weight[mapping[i]] += g.self_weight[i];
        for &(j, w) in &g.adj[i] {
            if j < i {
                continue; // each undirected edge once
            }
            let (ci, cj) = (mapping[i], mapping[j]);
            if ci == cj {
                self_weight[ci] += w;
            } else {
                *between.entry((ci.min(cj), ci.max(cj))).or_insert(0.0) += w;
            }
        }
    }
    let mut adj = vec![Vec::new(); n_comm];
    let mut total: f64 = self_weight.iter().sum();
    for (&(a, b), &w) in &between {
        adj[a].push((b, w));
        adj[b].push((a, w));
        total += w;
    }
    for list in &mut adj {
        list.sort_by_key(|(i, _)| *i);
    }
    (
        LevelGraph {
            adj,
            self_weight,
            total,
        },
        mapping,
    )
}

/// Runs Louvain and returns the best partition found across restarts.
pub fn louvain(g: &WGraph, seed: u64) -> Result<Partition, NetError> {
    if g.edges.is_empty() {
        return Err(NetError::EmptyGraph);
    }
    let mut best: Option<Partition> = None;
    let base = LevelGraph::from_wgraph(g);
    let consider = |candidate: Partition, best: &mut Option<Partition>| {
        if best
            .as_ref()
            .map_or(true, |b| candidate.modularity > b.modularity + 1e-15)
        {
            *best = Some(candidate);
        }
    };

    for restart in 0..RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(restart));
        let mut node_to_comm: Vec<usize> = (0..g.n()).collect();
        let mut level = LevelGraph::from_wgraph(g);
        loop {
            let (community, improved) = one_level(&level, &mut rng);
            if !improved {
                break;
            }
            let (next, mapping) = aggregate(&level, &community);
            for slot in node_to_comm.iter_mut() {
                *slot = mapping[community[*slot]];
            }
            if next.n() == level.n() {
                break;
            }
            level = next;
        }
        // Multilevel refinement: single-node moves on the original graph
        // escape local optima the coarsened passes cannot see.
        loop {
            let (refined, improved) = one_level_from(&base, dense(&node_to_comm), &mut rng);
            node_to_comm = refined;
            if !improved {
                break;
            }
        }
        let assignment = dense(&node_to_comm);
        let candidate = Partition {
            modularity: modularity(g, &assignment),
            assignment,
        };
        consider(candidate, &mut best);
    }

    // Random-start restarts: local moving from random partitions reaches
    // optima that need coordinated multi-node moves from the singleton
    // start. Cheap relative to the hierarchy passes.
    let random_restarts = if g.n() <= 64 { 30 } else { 5 };
    for restart in 0..random_restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(restart),
        );
        let k = (g.n() / 2).max(2);
        let initial: Vec<usize> = (0..g.n())
            .map(|_| rand::Rng::gen_range(&mut rng, 0..k))
            .collect();
        let mut assignment = initial;
        loop {
            let (refined, improved) = one_level_from(&base, dense(&assignment), &mut rng);
            assignment = refined;
            if !improved {
                break;
            }
        }
        let assignment = dense(&assignment);
        let candidate = Partition {
            modularity: modularity(g, &assignment),
            assignment,
        };
        consider(candidate, &mut best);
    }
    Ok(best.expect("at least one restart"))
}

fn dense(assignment: &[usize]) -> Vec<usize> {
    let mut relabel: std::collections::BTreeMap<usize, usize> = Default::default();
    assignment
        .iter()
        .map(|&c| {
            let next = relabel.len();
            *relabel.entry(c).or_insert(next)
        })
        .collect()
}

/// Exhaustive maximum-modularity search over all set partitions, enumerated
/// as restricted growth strings; usable to ~10 nodes. Test oracle, also used
/// by the acceptance suite.
pub fn brute_force_best_partition(g: &WGraph) -> Partition {
    let n = g.n();
    if n == 0 {
        return Partition {
            assignment: vec![],
            modularity: 0.0,
        };
    }
    let mut assignment = vec![0usize; n];
    let mut best_q = modularity(g, &assignment);
    let mut best_assignment = assignment.clone();

    fn recurse(
        g: &WGraph,
        assignment: &mut Vec<usize>,
        pos: usize,
        max_used: usize,
        best_q: &mut f64,
        best_assignment: &mut Vec<usize>,
    ) {
        if pos == assignment.len() {
            let q = modularity(g, assignment);
            if q > *best_q {
                *best_q = q;
                *best_assignment = assignment.clone();
            }
            return;
        }
        for c in 0..=max_used + 1 {
            assignment[pos] = c;
            recurse(g, assignment, pos + 1, max_used.max(c), best_q, best_assignment);
        }
    }
    recurse(g, &mut assignment, 1, 0, &mut best_q, &mut best_assignment);
    Partition {
        assignment: dense(&best_assignment),
        modularity: best_q,
    }
}
