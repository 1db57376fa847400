//! Ten node centralities in one pass.
//!
//! Conventions (the figures the table feeds give none, so these are fixed
//! here): path-based metrics (betweenness, load, closeness, harmonic) use
//! hop-count shortest paths; spectral metrics (eigenvector, PageRank) and
//! degree use edge weights. Betweenness and load are normalized by
//! (n-1)(n-2)/2, degree by (n-1), closeness per Wasserman-Faust, harmonic
//! is the raw sum of reciprocal distances.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::graph::WGraph;
use super::NetError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeCentrality {
    pub degree: f64,
    pub betweenness: f64,
    pub closeness: f64,
    pub eigenvector: f64,
    pub pagerank: f64,
    pub harmonic: f64,
    pub clustering: f64,
    pub avg_neighbor_degree: f64,
    pub k_core: usize,
    pub load: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityTable {
    pub labels: Vec<String>,
    pub rows: Vec<NodeCentrality>,
}

struct Bfs {
    dist: Vec<i64>,
    /// Shortest-path predecessors per node.
    preds: Vec<Vec<usize>>,
    /// Shortest-path counts.
    sigma: Vec<f64>,
    /// Nodes in nondecreasing distance order.
    order: Vec<usize>,
}

fn bfs(g: &WGraph, s: usize) -> Bfs {
    let n = g.n();
    let mut dist = vec![-1i64; n];
    let mut preds = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut order = Vec::with_capacity(n);
    dist[s] = 0;
    sigma[s] = 1.0;
    let mut queue = VecDeque::new();
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &(w, _) in &g.adj[v] {
            if dist[w] < 0 {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[v] + 1 {
                sigma[w] += sigma[v];
                preds[w].push(v);
            }
        }
    }
    Bfs {
        dist,
        preds,
        sigma,
        order,
    }
}

/// Brandes accumulation for betweenness.
fn betweenness(g: &WGraph) -> Vec<f64> {
    let n = g.n();
    let mut out = vec![0.0f64; n];
    for s in 0..n {
        let b = bfs(g, s);
        let mut delta = vec![0.0f64; n];
        for &w in b.order.iter().rev() {
            for &v in &b.preds[w] {
                delta[v] += (b.sigma[v] / b.sigma[w]) * (1.0 + delta[w]);
            }
            if w != s {
                out[w] += delta[w];
            }
        }
    }
    // Each unordered pair was counted twice.
    let norm = normalization(n);
    for v in &mut out {
        *v = *v / 2.0 / norm;
    }
    out
}

/// Newman flow-splitting load: each node ships its accumulated unit flows
/// back toward the source, split equally among its shortest-path
/// predecessors.
fn load(g: &WGraph) -> Vec<f64> {
    let n = g.n();
    let mut out = vec![0.0f64; n];
    for s in 0..n {
        let b = bfs(g, s);
        let mut flow = vec![1.0f64; n];
        for &w in b.order.iter().rev() {
            if w == s || b.preds[w].is_empty() {
                continue;
            }
            let share = flow[w] / b.preds[w].len() as f64;
            for &v in &b.preds[w] {
                flow[v] += share;
            }
        }
        for v in 0..n {
            if v != s && b.dist[v] > 0 {
                out[v] += flow[v] - 1.0;
            }
        }
    }
    let norm = normalization(n);
    for v in &mut out {
        *v = *v / 2.0 / norm;
    }
    out
}

fn normalization(n: usize) -> f64 {
    if n > 2 {
        ((n - 1) * (n - 2)) as f64 / 2.0
    } else {
        1.0
    }
}

fn power_iteration(
    g: &WGraph,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    l1_normalize: bool,
    tol: f64,
) -> Result<Vec<f64>, NetError> {
    let n = g.n();
    let mut v = vec![1.0 / n as f64; n];
    const MAX_ITERS: usize = 100_000;
    for _ in 0..MAX_ITERS {
        let mut next = apply(&v);
        let norm = if l1_normalize {
            next.iter().map(|x| x.abs()).sum::<f64>()
        } else {
            next.iter().map(|x| x * x).sum::<f64>().sqrt()
        };
        if norm > 0.0 {
            for x in &mut next {
                *x /= norm;
            }
        }
        let diff: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if diff < tol {
            return Ok(v);
        }
    }
    Err(NetError::ConvergenceFailure(MAX_ITERS))
}

pub fn centrality_profile(g: &WGraph) -> Result<CentralityTable, NetError> {
    let n = g.n();
    let betweenness = betweenness(g);
    let load = load(g);

    // Closeness (Wasserman-Faust) and harmonic from BFS distances.
    let mut closeness = vec![0.0f64; n];
    let mut harmonic = vec![0.0f64; n];
    for s in 0..n {
        let b = bfs(g, s);
        let reachable: Vec<i64> = b.dist.iter().copied().filter(|d| *d > 0).collect();
        let r = reachable.len(); // others in s's component
        let total: i64 = reachable.iter().sum();
        if total > 0 && n > 1 {
            closeness[s] = (r as f64 / (n - 1) as f64) * (r as f64 / total as f64);
        }
        harmonic[s] = reachable.iter().map(|d| 1.0 / *d as f64).sum();
    }

    // Eigenvector on the weighted adjacency. Iterating with A + I (same
    // eigenvectors) keeps bipartite graphs from oscillating.
    let eigenvector = if g.edges.is_empty() {
        vec![0.0; n]
    } else {
        power_iteration(
            g,
            |v| {
                (0..n)
                    .map(|i| {
                        v[i] + g.adj[i].iter().map(|&(j, w)| w * v[j]).sum::<f64>()
                    })
                    .collect()
            },
            false,
            1e-10,
        )?
    };

    // PageRank with damping 0.85 and weighted transitions; dangling mass
    // redistributes uniformly.
    let damping = 0.85;
    let pagerank = {
        let strengths: Vec<f64> = (0..n).map(|i| g.strength(i)).collect();
        let mut r = vec![1.0 / n as f64; n];
        const MAX_ITERS: usize = 100_000;
        let mut converged = false;
        for _ in 0..MAX_ITERS {
            let dangling: f64 = (0..n)
                .filter(|&i| strengths[i] == 0.0)
                .map(|i| r[i])
                .sum();
            let mut next = vec![(1.0 - damping) / n as f64 + damping * dangling / n as f64; n];
            for i in 0..n {
                if strengths[i] == 0.0 {
                    continue;
                }
                let share = damping * r[i] / strengths[i];
                for &(j, w) in &g.adj[i] {
                    next[j] += share * w;
                }
            }
            let diff: f64 = next.iter().zip(&r).map(|(a, b)| (a - b).abs()).sum();
            r = next;
            if diff < 1e-12 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(NetError::ConvergenceFailure(MAX_ITERS));
        }
        r
    };

    // Local clustering coefficient (unweighted).
    let mut clustering = vec![0.0f64; n];
    for i in 0..n {
        let neighbors: Vec<usize> = g.adj[i].iter().map(|&(j, _)| j).collect();
        let k = neighbors.len();
        if k < 2 {
            continue;
        }
        let mut links = 0usize;
        for a in 0..k {
            for b in (a + 1)..k {
                if g.adj[neighbors[a]].iter().any(|&(x, _)| x == neighbors[b]) {
                    links += 1;
                }
            }
        }
        clustering[i] = 2.0 * links as f64 / (k * (k - 1)) as f64;
    }

    let mut avg_neighbor_degree = vec![0.0f64; n];
    for i in 0..n {
        if !g.adj[i].is_empty() {
            avg_neighbor_degree[i] = g.adj[i]
                .iter()
                .map(|&(j, _)| g.degree(j) as f64)
                .sum::<f64>()
                / g.adj[i].len() as f64;
        }
    }

    // k-core by iterative peeling.
    let k_core = {
        let mut core = vec![0usize; n];
        let mut degree: Vec<usize> = (0..n).map(|i| g.degree(i)).collect();
        let mut removed = vec![false; n];
        let mut k = 0usize;
        let mut remaining = n;
        while remaining > 0 {
            loop {
                let peel: Vec<usize> = (0..n)
                    .filter(|&i| !removed[i] && degree[i] <= k)
                    .collect();
                if peel.is_empty() {
                    break;
                }
                for i in peel {
                    removed[i] = true;
                    core[i] = k;
                    remaining -= 1;
                    for &(j, _) in &g.adj[i] {
                        if !removed[j] && degree[j] > 0 {
                            degree[j] -= 1;
                        }
                    }
                }
            }
            k += 1;
        }
        core
    };

    let degree_norm = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let rows = (0..n)
        .map(|i| NodeCentrality {
            degree: g.degree(i) as f64 / degree_norm,
            betweenness: betweenness[i],
            closeness: closeness[i],
            eigenvector: eigenvector[i],
            pagerank: pagerank[i],
            harmonic: harmonic[i],
            clustering: clustering[i],
            avg_neighbor_degree: avg_neighbor_degree[i],
            k_core: k_core[i],
            load: load[i],
        })
        .collect();
    Ok(CentralityTable {
        labels: g.labels.clone(),
        rows,
    })
}

#[cfg(test)]
pub(crate) mod oracles {
    //! Independent enumeration oracles for the path-based metrics.

    use super::*;

    /// All shortest paths between every pair by BFS path enumeration.
    fn all_shortest_paths(g: &WGraph, s: usize, t: usize) -> Vec<Vec<usize>> {
        let b = bfs(g, s);
        if s == t || b.dist[t] < 0 {
            return vec![];
        }
        // Walk predecessor lists backward from t.
        fn walk(preds: &[Vec<usize>], v: usize, s: usize, acc: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            acc.push(v);
            if v == s {
                let mut path = acc.clone();
                path.reverse();
                out.push(path);
            } else {
                for &p in &preds[v] {
                    walk(preds, p, s, acc, out);
                }
            }
            acc.pop();
        }
        let mut out = Vec::new();
        walk(&b.preds, t, s, &mut Vec::new(), &mut out);
        out
    }

    /// Betweenness by explicit path counting.
    pub fn betweenness_oracle(g: &WGraph) -> Vec<f64> {
        let n = g.n();
        let mut out = vec![0.0f64; n];
        for s in 0..n {
            for t in (s + 1)..n {
                let paths = all_shortest_paths(g, s, t);
                if paths.is_empty() {
                    continue;
                }
                for v in 0..n {
                    if v == s || v == t {
                        continue;
                    }
                    let through = paths.iter().filter(|p| p.contains(&v)).count();
                    out[v] += through as f64 / paths.len() as f64;
                }
            }
        }
        let norm = normalization(n);
        for v in &mut out {
            *v /= norm;
        }
        out
    }

    /// Load by memoized recursion on the same flow-splitting rule.
    pub fn load_oracle(g: &WGraph) -> Vec<f64> {
        let n = g.n();
        let mut out = vec![0.0f64; n];
        for s in 0..n {
            let b = bfs(g, s);
            // flow(v) = 1 + sum over w with v in preds(w) of flow(w)/|preds(w)|
            fn flow(
                v: usize,
                b: &Bfs,
                succs: &[Vec<usize>],
                memo: &mut [Option<f64>],
            ) -> f64 {
                if let Some(f) = memo[v] {
                    return f;
                }
                let mut total = 1.0;
                for &w in &succs[v] {
                    total += flow(w, b, succs, memo) / b.preds[w].len() as f64;
                }
                memo[v] = Some(total);
                total
            }
            let mut succs = vec![Vec::new(); n];
            for w in 0..n {
                for &v in &b.preds[w] {
                    succs[v].push(w);
                }
            }
            let mut memo = vec![None; n];
            for v in 0..n {
                if v != s && b.dist[v] > 0 {
                    out[v] += flow(v, &b, &succs, &mut memo) - 1.0;
                }
            }
        }
        let norm = normalization(n);
        for v in &mut out {
            *v = *v / 2.0 / norm;
        }
        out
    }

    /// Core numbers by brute-force peeling from scratch per k.
    pub fn k_core_oracle(g: &WGraph) -> Vec<usize> {
        let n = g.n();
        let mut core = vec![0usize; n];
        for k in 0..=n {
            // Repeatedly delete nodes with degree < k; survivors have core >= k.
            let mut alive = vec![true; n];
            loop {
                let mut changed = false;
                for i in 0..n {
                    if !alive[i] {
                        continue;
                    }
                    let deg = g.adj[i].iter().filter(|&&(j, _)| alive[j]).count();
                    if deg < k {
                        alive[i] = false;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
            for i in 0..n {
                if alive[i] {
                    core[i] = k;
                }
            }
        }
        core
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> WGraph {
        WGraph::from_edges((0..n).map(|i| format!("n{i}")).collect(), edges)
    }

    #[test]
    fn path_betweenness() {
        // a-b-c: b carries the single (a,c) pair.
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let t = centrality_profile(&g).unwrap();
        assert!((t.rows[1].betweenness - 1.0).abs() < 1e-12);
        assert_eq!(t.rows[0].betweenness, 0.0);
        assert_eq!(t.rows[2].betweenness, 0.0);
    }

    #[test]
    fn triangle_with_pendant_core_numbers() {
        let g = graph(4, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (2, 3, 1.0)]);
        let t = centrality_profile(&g).unwrap();
        let cores: Vec<usize> = t.rows.iter().map(|r| r.k_core).collect();
        assert_eq!(cores, vec![2, 2, 2, 1]);
        assert_eq!(oracles::k_core_oracle(&g), cores);
    }

    #[test]
    fn regular_graph_equal_degree() {
        // 4-cycle: every node has degree 2.
        let g = graph(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)]);
        let t = centrality_profile(&g).unwrap();
        for r in &t.rows {
            assert!((r.degree - t.rows[0].degree).abs() < 1e-15);
        }
    }

    #[test]
    fn pagerank_sums_to_one_and_is_stationary() {
        let g = graph(
            5,
            &[(0, 1, 2.0), (1, 2, 1.0), (2, 3, 3.0), (3, 4, 1.0), (4, 0, 1.0), (1, 3, 1.0)],
        );
        let t = centrality_profile(&g).unwrap();
        let total: f64 = t.rows.iter().map(|r| r.pagerank).sum();
        assert!((total - 1.0).abs() <= 1e-9);

        // ||P^T r - r||_1 <= 1e-8: apply one more transition step.
        let n = g.n();
        let damping = 0.85;
        let r: Vec<f64> = t.rows.iter().map(|x| x.pagerank).collect();
        let mut next = vec![(1.0 - damping) / n as f64; n];
        for i in 0..n {
            let s = g.strength(i);
            if s == 0.0 {
                for x in next.iter_mut() {
                    *x += damping * r[i] / n as f64;
                }
                continue;
            }
            for &(j, w) in &g.adj[i] {
                next[j] += damping * r[i] * w / s;
            }
        }
        let l1: f64 = next.iter().zip(&r).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 <= 1e-8, "stationarity residual {l1}");
    }

    #[test]
    fn betweenness_and_load_match_oracles_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for trial in 0..40 {
            let n = rng.gen_range(3..=8);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen::<f64>() < 0.5 {
                        edges.push((i, j, 1.0));
                    }
                }
            }
            if edges.is_empty() {
                continue;
            }
            let g = graph(n, &edges);
            let t = centrality_profile(&g).unwrap();
            let bo = oracles::betweenness_oracle(&g);
            let lo = oracles::load_oracle(&g);
            for i in 0..n {
                assert!(
                    (t.rows[i].betweenness - bo[i]).abs() <= 1e-9,
                    "trial {trial} node {i}: {} vs {}",
                    t.rows[i].betweenness,
                    bo[i]
                );
                assert!(
                    (t.rows[i].load - lo[i]).abs() <= 1e-9,
                    "trial {trial} node {i}: {} vs {}",
                    t.rows[i].load,
                    lo[i]
                );
            }
        }
    }

    #[test]
    fn harmonic_handles_disconnection() {
        let g = graph(4, &[(0, 1, 1.0), (2, 3, 1.0)]);
        let t = centrality_profile(&g).unwrap();
        // Unreachable pairs contribute 0 (1/inf).
        assert!((t.rows[0].harmonic - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_values_finite() {
        let g = graph(6, &[(0, 1, 1.0), (1, 2, 2.0), (3, 4, 1.0)]);
        let t = centrality_profile(&g).unwrap();
        for r in &t.rows {
            for v in [
                r.degree,
                r.betweenness,
                r.closeness,
                r.eigenvector,
                r.pagerank,
                r.harmonic,
                r.clustering,
                r.avg_neighbor_degree,
                r.load,
            ] {
                assert!(v.is_finite());
            }
        }
    }
}
