//! Agglomerative hierarchical clustering (Ward by default) with the merge
//! tree exposed for dendrogram rendering.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::NetError;
use crate::kg::TermType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Linkage {
    Ward,
    Average,
    Complete,
}

/// One agglomeration step: clusters `a` and `b` merged at `height` into a
/// new cluster of `size` points. New clusters take ids n, n+1, ... in merge
/// order, scipy style.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Cluster label per input point, dense from 0, first-occurrence order.
    pub labels: Vec<usize>,
    pub merges: Vec<Merge>,
    pub k: usize,
}

/// Euclidean agglomerative clustering cut at k clusters.
///
/// Ties in the minimum pairwise distance break toward the smallest (i, j)
/// cluster-id pair, so the tree is deterministic.
pub fn hierarchical_cluster(
    points: &[Vec<f64>],
    k: usize,
    linkage: Linkage,
) -> Result<Clustering, NetError> {
    let n = points.len();
    if k > n || k == 0 {
        return Err(NetError::KTooLarge { k, n });
    }

    // Squared distances drive Ward; Average/Complete use plain Euclidean.
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
    };

    // active cluster id -> (member rows, representative distance store key)
    let mut members: BTreeMap<usize, Vec<usize>> = (0..n).map(|i| (i, vec![i])).collect();
    let mut d: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = dist(&points[i], &points[j]);
            let v = match linkage {
                Linkage::Ward => d2, // Lance-Williams on squared distances
                _ => d2.sqrt(),
            };
            d.insert((i, j), v);
        }
    }

    let mut merges = Vec::with_capacity(n - k);
    let mut next_id = n;
    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();

    while members.len() > k {
        // Smallest distance, ties to smallest (i, j).
        let (&(i, j), &best) = d
            .iter()
            .min_by(|(ka, va), (kb, vb)| {
                va.partial_cmp(vb).unwrap().then_with(|| ka.cmp(kb))
            })
            .expect("at least one active pair");
        let size_i = members[&i].len();
        let size_j = members[&j].len();
        let merged_size = size_i + size_j;
        let height = match linkage {
            Linkage::Ward => best.max(0.0).sqrt(),
            _ => best,
        };
        merges.push(Merge {
            a: i,
            b: j,
            height,
            size: merged_size,
        });

        // Lance-Williams update against every other active cluster.
        let others: Vec<usize> = members.keys().copied().filter(|&c| c != i && c != j).collect();
        for c in others {
            let key = |a: usize, b: usize| (a.min(b), a.max(b));
            let d_ic = d[&key(i, c)];
            let d_jc = d[&key(j, c)];
            let size_c = members[&c].len();
            let updated = match linkage {
                Linkage::Ward => {
                    let ni = size_i as f64;
                    let nj = size_j as f64;
                    let nc = size_c as f64;
                    ((ni + nc) * d_ic + (nj + nc) * d_jc - nc * best) / (ni + nj + nc)
                }
                Linkage::Average => {
                    (size_i as f64 * d_ic + size_j as f64 * d_jc) / merged_size as f64
                }
                Linkage::Complete => d_ic.max(d_jc),
            };
            d.remove(&key(i, c));
            d.remove(&key(j, c));
            d.insert(key(next_id, c), updated);
        }
        d.remove(&(i, j));

        let mut merged = members.remove(&i).unwrap();
        merged.extend(members.remove(&j).unwrap());
        members.insert(next_id, merged);
        parent.insert(i, next_id);
        parent.insert(j, next_id);
        next_id += 1;
    }

    // Dense labels by first point index within each final cluster.
    let mut clusters: Vec<(usize, Vec<usize>)> = members
        .into_iter()
        .map(|(_, mut rows)| {
            rows.sort();
            (rows[0], rows)
        })
        .collect();
    clusters.sort();
    let mut labels = vec![0usize; n];
    for (label, (_, rows)) in clusters.into_iter().enumerate() {
        for r in rows {
            labels[r] = label;
        }
    }
    Ok(Clustering { labels, merges, k })
}

/// Per-cluster composition over term types: proportion of each type's terms
/// in each cluster.
pub fn cluster_composition(
    clustering: &Clustering,
    types: &[TermType],
) -> Vec<BTreeMap<TermType, f64>> {
    assert_eq!(clustering.labels.len(), types.len());
    let mut out = vec![BTreeMap::new(); clustering.k];
    let mut counts = vec![0usize; clustering.k];
    for (label, ty) in clustering.labels.iter().zip(types) {
        *out[*label].entry(*ty).or_insert(0.0) += 1.0;
        counts[*label] += 1;
    }
    for (cluster, count) in out.iter_mut().zip(&counts) {
        for v in cluster.values_mut() {
            *v /= *count as f64;
        }
    }
    out
}

/// Mean vector per cluster, in label order.
pub fn cluster_centroids(clustering: &Clustering, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; clustering.k];
    let mut counts = vec![0usize; clustering.k];
    for (label, p) in clustering.labels.iter().zip(points) {
        for (s, x) in sums[*label].iter_mut().zip(p) {
            *s += x;
        }
        counts[*label] += 1;
    }
    for (s, c) in sums.iter_mut().zip(&counts) {
        for v in s.iter_mut() {
            *v /= *c as f64;
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_equals_n_gives_singletons() {
        let points = vec![vec![0.0], vec![1.0], vec![5.0]];
        let c = hierarchical_cluster(&points, 3, Linkage::Ward).unwrap();
        assert_eq!(c.labels, vec![0, 1, 2]);
        assert!(c.merges.is_empty());
    }

    #[test]
    fn k_too_large_is_error() {
        let points = vec![vec![0.0]];
        assert!(matches!(
            hierarchical_cluster(&points, 2, Linkage::Ward),
            Err(NetError::KTooLarge { .. })
        ));
    }

    #[test]
    fn two_blobs_separate_perfectly() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let mut points = Vec::new();
        let mut truth = Vec::new();
        for _ in 0..12 {
            points.push(vec![rng.gen::<f64>() * 0.1, rng.gen::<f64>() * 0.1]);
            truth.push(0usize);
        }
        for _ in 0..10 {
            points.push(vec![10.0 + rng.gen::<f64>() * 0.1, rng.gen::<f64>() * 0.1]);
            truth.push(1usize);
        }
        for linkage in [Linkage::Ward, Linkage::Average, Linkage::Complete] {
            let c = hierarchical_cluster(&points, 2, linkage).unwrap();
            // Same partition as the generator, labels possibly swapped.
            for i in 0..points.len() {
                for j in 0..points.len() {
                    assert_eq!(
                        c.labels[i] == c.labels[j],
                        truth[i] == truth[j],
                        "{linkage:?} points {i},{j}"
                    );
                }
            }
        }
    }

    #[test]
    fn duplicates_merge_first_at_height_zero() {
        let points = vec![vec![5.0, 5.0], vec![0.0, 0.0], vec![5.0, 5.0], vec![9.0, 1.0]];
        let c = hierarchical_cluster(&points, 1, Linkage::Ward).unwrap();
        assert_eq!(c.merges[0].height, 0.0);
        assert_eq!((c.merges[0].a, c.merges[0].b), (0, 2));
        // Heights never decrease for Ward.
        for w in c.merges.windows(2) {
            assert!(w[1].height >= w[0].height - 1e-12);
        }
    }

    #[test]
    fn composition_and_centroids() {
        let points = vec![vec![0.0], vec![0.1], vec![10.0], vec![10.1]];
        let c = hierarchical_cluster(&points, 2, Linkage::Ward).unwrap();
        let types = vec![
            TermType::Etiology,
            TermType::Pathogenesis,
            TermType::Etiology,
            TermType::Etiology,
        ];
        let comp = cluster_composition(&c, &types);
        assert_eq!(comp.len(), 2);
        let cluster_of_0 = c.labels[0];
        assert!((comp[cluster_of_0][&TermType::Etiology] - 0.5).abs() < 1e-12);
        let centroids = cluster_centroids(&c, &points);
        assert!((centroids[cluster_of_0][0] - 0.05).abs() < 1e-12);
        assert!((centroids[1 - cluster_of_0][0] - 10.05).abs() < 1e-12);
    }
}
