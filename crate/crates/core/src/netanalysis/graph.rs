//! Weighted undirected graph shared by the analytics.

use std::collections::BTreeMap;

/// Node labels are kept alongside; algorithms work on indices.
#[derive(Debug, Clone, PartialEq)]
pub struct WGraph {
    pub labels: Vec<String>,
    /// Unique undirected edges (a < b, weight > 0).
    pub edges: Vec<(usize, usize, f64)>,
    /// Adjacency lists sorted by neighbor index.
    pub adj: Vec<Vec<(usize, f64)>>,
}

impl WGraph {
    pub fn from_edges(labels: Vec<String>, raw_edges: &[(usize, usize, f64)]) -> Self {
        let n = labels.len();
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(a, b, w) in raw_edges {
            assert!(a < n && b < n, "edge endpoint out of range");
            assert!(a != b, "self-loops not supported");
            assert!(w > 0.0, "edge weight must be positive");
            let key = (a.min(b), a.max(b));
            *merged.entry(key).or_insert(0.0) += w;
        }
        let edges: Vec<(usize, usize, f64)> =
            merged.into_iter().map(|((a, b), w)| (a, b, w)).collect();
        let mut adj = vec![Vec::new(); n];
        for &(a, b, w) in &edges {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        for list in &mut adj {
            list.sort_by_key(|(i, _)| *i);
        }
        WGraph { labels, edges, adj }
    }

    /// Builds from the knowledge graph's term graph.
    pub fn from_term_graph(terms: &crate::kg::TermGraph) -> Self {
        let labels: Vec<String> = terms.nodes.keys().map(|t| t.0.clone()).collect();
        let index: BTreeMap<&str, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let edges: Vec<(usize, usize, f64)> = terms
            .edges
            .iter()
            .map(|(a, b, w)| (index[a.as_str()], index[b.as_str()], *w))
            .collect();
        WGraph::from_edges(labels, &edges)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Weighted degree (sum of incident weights).
    pub fn strength(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|(_, w)| w).sum()
    }

    /// Unweighted degree.
    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|(_, _, w)| w).sum()
    }
}
