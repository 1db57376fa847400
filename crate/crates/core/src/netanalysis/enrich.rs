//! Hypergeometric pathway over-representation with Benjamini-Hochberg
//! correction.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::NetError;
use crate::kg::{EntrezId, PathwayId, PathwayTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentRow {
    pub pathway: PathwayId,
    /// Genes shared by the target set and the pathway.
    pub overlap: usize,
    pub pathway_size: usize,
    pub draws: usize,
    pub universe: usize,
    /// Upper-tail P(X >= overlap).
    pub p_value: f64,
    /// (overlap/draws) / (pathway_size/universe).
    pub fold_enrichment: f64,
    /// BH-adjusted q-value.
    pub q_value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnrichmentTable {
    pub rows: Vec<EnrichmentRow>,
}

/// ln(n!) via a cumulative table; exact to f64 rounding.
struct LnFactorial(Vec<f64>);

impl LnFactorial {
    fn up_to(n: usize) -> Self {
        let mut t = Vec::with_capacity(n + 1);
        t.push(0.0);
        let mut acc = 0.0;
        for k in 1..=n {
            acc += (k as f64).ln();
            t.push(acc);
        }
        LnFactorial(t)
    }

    fn ln_choose(&self, n: usize, k: usize) -> f64 {
        if k > n {
            return f64::NEG_INFINITY;
        }
        self.0[n] - self.0[k] - self.0[n - k]
    }
}

/// P(X >= k) for X ~ Hypergeometric(N, K, n).
pub fn hypergeom_upper_tail(big_n: usize, big_k: usize, n: usize, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let lf = LnFactorial::up_to(big_n);
    let denom = lf.ln_choose(big_n, n);
    let mut p = 0.0;
    for x in k..=n.min(big_k) {
        if n - x > big_n - big_k {
            continue;
        }
        let ln_p = lf.ln_choose(big_k, x) + lf.ln_choose(big_n - big_k, n - x) - denom;
        p += ln_p.exp();
    }
    p.min(1.0)
}

/// Per-pathway upper-tail p, fold enrichment, and BH q over the tested
/// pathways, sorted by ascending p (pathway id breaks ties).
pub fn enrich_pathways(
    targets: &BTreeSet<EntrezId>,
    pt: &PathwayTable,
) -> Result<EnrichmentTable, NetError> {
    if targets.is_empty() {
        return Err(NetError::EmptyTargetSet);
    }
    for t in targets {
        if !pt.universe.contains(t) {
            return Err(NetError::TargetOutsideUniverse(*t));
        }
    }
    let big_n = pt.universe.len();
    let n = targets.len();
    let mut rows: Vec<EnrichmentRow> = pt
        .pathways
        .iter()
        .map(|(pid, members)| {
            let big_k = members.len();
            let overlap = members.intersection(targets).count();
            let p_value = hypergeom_upper_tail(big_n, big_k, n, overlap);
            let fold_enrichment = if big_k > 0 {
                (overlap as f64 / n as f64) / (big_k as f64 / big_n as f64)
            } else {
                0.0
            };
            EnrichmentRow {
                pathway: pid.clone(),
                overlap,
                pathway_size: big_k,
                draws: n,
                universe: big_n,
                p_value,
                fold_enrichment,
                q_value: 1.0,
            }
        })
        .collect();

    rows.sort_by(|a, b| {
        a.p_value
            .partial_cmp(&b.p_value)
            .unwrap()
            .then_with(|| a.pathway.cmp(&b.pathway))
    });
    // Benjamini-Hochberg: q_i = min_{j >= i} p_j * m / j, capped at 1.
    let m = rows.len();
    let mut running_min = 1.0f64;
    for i in (0..m).rev() {
        let candidate = rows[i].p_value * m as f64 / (i + 1) as f64;
        running_min = running_min.min(candidate).min(1.0);
        rows[i].q_value = running_min;
    }
    Ok(EnrichmentTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(pathways: &[(&str, &[i64])], universe: &[i64]) -> PathwayTable {
        let mut pt = PathwayTable::default();
        for (pid, genes) in pathways {
            pt.pathways.insert(
                PathwayId::new(*pid),
                genes.iter().map(|g| EntrezId(*g)).collect(),
            );
        }
        pt.universe = universe.iter().map(|g| EntrezId(*g)).collect();
        pt
    }

    fn targets(genes: &[i64]) -> BTreeSet<EntrezId> {
        genes.iter().map(|g| EntrezId(*g)).collect()
    }

    #[test]
    fn exact_combinatorics_draw_whole_pathway() {
        // Universe 10, pathway 5, draw exactly those 5: p = 1/C(10,5).
        let pt = table(
            &[("P1", &[1, 2, 3, 4, 5])],
            &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
        );
        let t = enrich_pathways(&targets(&[1, 2, 3, 4, 5]), &pt).unwrap();
        assert!((t.rows[0].p_value - 1.0 / 252.0).abs() < 1e-12);
    }

    #[test]
    fn zero_overlap_is_p_one() {
        let pt = table(&[("P1", &[1, 2])], &[1, 2, 3, 4, 5]);
        let t = enrich_pathways(&targets(&[3]), &pt).unwrap();
        assert_eq!(t.rows[0].overlap, 0);
        assert_eq!(t.rows[0].p_value, 1.0);
    }

    /// Exhaustive enumeration over all C(N, n) draws.
    fn enumeration_oracle(universe: &[i64], pathway: &BTreeSet<i64>, n: usize, k: usize) -> f64 {
        fn combos(pool: &[i64], n: usize) -> Vec<Vec<i64>> {
            if n == 0 {
                return vec![vec![]];
            }
            if pool.len() < n {
                return vec![];
            }
            let mut out = Vec::new();
            for (i, &first) in pool.iter().enumerate() {
                for mut rest in combos(&pool[i + 1..], n - 1) {
                    rest.insert(0, first);
                    out.push(rest);
                }
            }
            out
        }
        let all = combos(universe, n);
        let hits = all
            .iter()
            .filter(|draw| draw.iter().filter(|g| pathway.contains(g)).count() >= k)
            .count();
        hits as f64 / all.len() as f64
    }

    #[test]
    fn p_values_match_enumeration_for_small_universes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let big_n = rng.gen_range(4..=12);
            let universe: Vec<i64> = (1..=big_n as i64).collect();
            let big_k = rng.gen_range(1..=big_n);
            let pathway: BTreeSet<i64> = universe[..big_k].iter().copied().collect();
            let n = rng.gen_range(1..=big_n);
            let draw: Vec<i64> = universe[big_n - n..].to_vec();
            let k = draw.iter().filter(|g| pathway.contains(g)).count();

            let got = hypergeom_upper_tail(big_n, big_k, n, k);
            let expected = enumeration_oracle(&universe, &pathway, n, k);
            assert!(
                (got - expected).abs() <= 1e-9,
                "N={big_n} K={big_k} n={n} k={k}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn bh_q_values_monotone_in_p_order() {
        let pt = table(
            &[
                ("P1", &[1, 2, 3]),
                ("P2", &[4, 5]),
                ("P3", &[1, 4, 6, 7]),
                ("P4", &[8]),
            ],
            &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
        );
        let t = enrich_pathways(&targets(&[1, 2, 4]), &pt).unwrap();
        for w in t.rows.windows(2) {
            assert!(w[0].p_value <= w[1].p_value);
            assert!(w[0].q_value <= w[1].q_value + 1e-15);
        }
        for r in &t.rows {
            assert!(r.q_value >= r.p_value - 1e-15);
            assert!(r.q_value <= 1.0);
        }
    }

    #[test]
    fn empty_targets_and_foreign_target_error() {
        let pt = table(&[("P1", &[1])], &[1, 2]);
        assert!(matches!(
            enrich_pathways(&BTreeSet::new(), &pt),
            Err(NetError::EmptyTargetSet)
        ));
        assert!(matches!(
            enrich_pathways(&targets(&[99]), &pt),
            Err(NetError::TargetOutsideUniverse(_))
        ));
    }
}
