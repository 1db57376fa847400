//! Path-length distances on the taxonomy forest.
//!
//! The source data gives taxonomy positions but no branch lengths, so every
//! edge counts 1: d(i,j) is the number of edges from i up to the lowest
//! common ancestor and back down to j.

use std::collections::BTreeMap;

use super::EmbedError;
use crate::kg::{TaxId, TaxonomyTable};
use crate::linalg::Matrix;

#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    pub leaves: Vec<TaxId>,
    pub matrix: Matrix,
}

/// Ancestor chain from the leaf (inclusive) up to its root (inclusive).
fn chain(tax: &TaxonomyTable, leaf: TaxId) -> Option<Vec<TaxId>> {
    let mut out = vec![leaf];
    let mut cur = leaf;
    loop {
        if !tax.entries.contains_key(&cur) {
            return None;
        }
        match tax.parent(cur) {
            None => return Some(out),
            Some(p) => {
                cur = p;
                out.push(cur);
                if out.len() > tax.entries.len() + 1 {
                    return None; // cycle
                }
            }
        }
    }
}

pub fn phylo_distances(
    tax: &TaxonomyTable,
    leaves: &[TaxId],
) -> Result<DistanceMatrix, EmbedError> {
    let mut chains = Vec::with_capacity(leaves.len());
    for &leaf in leaves {
        let c = chain(tax, leaf).ok_or(EmbedError::UnresolvedLeaf(leaf))?;
        chains.push(c);
    }

    // All leaves must share one tree; report a representative pair per
    // disjoint root group otherwise.
    let mut root_groups: BTreeMap<TaxId, TaxId> = BTreeMap::new(); // root -> first leaf
    for (i, c) in chains.iter().enumerate() {
        root_groups.entry(*c.last().unwrap()).or_insert(leaves[i]);
    }
    if root_groups.len() > 1 {
        let reps: Vec<TaxId> = root_groups.values().copied().collect();
        let mut pairs = Vec::new();
        for i in 0..reps.len() {
            for j in (i + 1)..reps.len() {
                pairs.push((reps[i], reps[j]));
            }
        }
        return Err(EmbedError::DisjointForest(pairs));
    }

    // depth within the chain = index; LCA via depth-aligned walk.
    let depth_maps: Vec<BTreeMap<TaxId, usize>> = chains
        .iter()
        .map(|c| c.iter().enumerate().map(|(d, t)| (*t, d)).collect())
        .collect();

    let n = leaves.len();
    let mut matrix = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            // Walk up from i's leaf until we hit an ancestor of j.
            let mut d = usize::MAX;
            for (up_i, anc) in chains[i].iter().enumerate() {
                if let Some(up_j) = depth_maps[j].get(anc) {
                    d = up_i + up_j;
                    break;
                }
            }
            debug_assert_ne!(d, usize::MAX, "shared root guaranteed above");
            matrix.set(i, j, d as f64);
            matrix.set(j, i, d as f64);
        }
    }
    Ok(DistanceMatrix {
        leaves: leaves.to_vec(),
        matrix,
    })
}
