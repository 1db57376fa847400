//! Property co-occurrence counting over the herb corpus.

use std::collections::BTreeSet;

use crate::kg::KnowledgeGraph;
use crate::linalg::Matrix;

/// Symmetric token co-occurrence matrix: entry (a,b) is the number of herbs
/// carrying both tokens; the diagonal is plain token frequency. Tokens are
/// the union of nature/flavor/meridian values, sorted.
pub fn cooccurrence_matrix(kg: &KnowledgeGraph) -> (Vec<String>, Matrix) {
    let mut tokens: BTreeSet<String> = BTreeSet::new();
    for herb in kg.herbs.values() {
        for t in KnowledgeGraph::property_tokens(herb) {
            tokens.insert(t.to_string());
        }
    }
    let tokens: Vec<String> = tokens.into_iter().collect();
    let index: std::collections::BTreeMap<&str, usize> = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();

    let mut m = Matrix::zeros(tokens.len(), tokens.len());
    for herb in kg.herbs.values() {
        let carried: BTreeSet<usize> = KnowledgeGraph::property_tokens(herb)
            .into_iter()
            .map(|t| index[t])
            .collect();
        let carried: Vec<usize> = carried.into_iter().collect();
        for (pos, &a) in carried.iter().enumerate() {
            let cur = m.get(a, a);
            m.set(a, a, cur + 1.0);
            for &b in &carried[pos + 1..] {
                let cur = m.get(a, b);
                m.set(a, b, cur + 1.0);
                m.set(b, a, cur + 1.0);
            }
        }
    }
    (tokens, m)
}

/// Graph view of the co-occurrence matrix: off-diagonal counts become edge
/// weights.
pub fn cooccurrence_graph(tokens: &[String], m: &Matrix) -> super::WGraph {
    let mut edges = Vec::new();
    for a in 0..tokens.len() {
        for b in (a + 1)..tokens.len() {
            let w = m.get(a, b);
            if w > 0.0 {
                edges.push((a, b, w));
            }
        }
    }
    super::WGraph::from_edges(tokens.to_vec(), &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::*;

    fn herb(id: &str, natures: &[&str], flavors: &[&str], meridians: &[&str]) -> HerbPiece {
        HerbPiece {
            id: HerbId::new(id),
            name: id.into(),
            kingdom: Kingdom::Plantae,
            taxid: None,
            natures: natures.iter().map(|s| s.to_string()).collect(),
            flavors: flavors.iter().map(|s| s.to_string()).collect(),
            meridians: meridians.iter().map(|s| s.to_string()).collect(),
            efficacy: vec![],
        }
    }

    fn kg_of(herbs: Vec<HerbPiece>) -> KnowledgeGraph {
        let mut kg = KnowledgeGraph::default();
        for h in herbs {
            kg.herbs.insert(h.id.clone(), h);
        }
        kg
    }

    #[test]
    fn two_herbs_sharing_both_tokens() {
        let kg = kg_of(vec![
            herb("CHP00001", &["warm"], &["bitter"], &[]),
            herb("CHP00002", &["warm"], &["bitter"], &[]),
        ]);
        let (tokens, m) = cooccurrence_matrix(&kg);
        let idx = |t: &str| tokens.iter().position(|x| x == t).unwrap();
        assert_eq!(m.get(idx("warm"), idx("bitter")), 2.0);
        assert_eq!(m.get(idx("warm"), idx("warm")), 2.0);
    }

    #[test]
    fn disjoint_sets_zero_off_diagonal() {
        let kg = kg_of(vec![
            herb("CHP00001", &["warm"], &[], &[]),
            herb("CHP00002", &[], &["sweet"], &[]),
        ]);
        let (tokens, m) = cooccurrence_matrix(&kg);
        let idx = |t: &str| tokens.iter().position(|x| x == t).unwrap();
        assert_eq!(m.get(idx("warm"), idx("sweet")), 0.0);
    }

    #[test]
    fn five_herb_fixture_matches_pairwise_oracle() {
        let herbs = vec![
            herb("CHP00001", &["warm", "hot"], &["bitter"], &["lung"]),
            herb("CHP00002", &["warm"], &["sweet", "bitter"], &["liver"]),
            herb("CHP00003", &["cold"], &["bitter"], &["lung", "heart"]),
            herb("CHP00004", &["cold", "cool"], &[], &["liver"]),
            herb("CHP00005", &["warm"], &["sweet"], &["lung", "liver"]),
        ];
        let kg = kg_of(herbs.clone());
        let (tokens, m) = cooccurrence_matrix(&kg);
        // Oracle: straight pairwise intersection counting over herb token sets.
        let sets: Vec<std::collections::BTreeSet<String>> = herbs
            .iter()
            .map(|h| {
                KnowledgeGraph::property_tokens(h)
                    .into_iter()
                    .map(str::to_string)
                    .collect()
            })
            .collect();
        for (i, a) in tokens.iter().enumerate() {
            for (j, b) in tokens.iter().enumerate() {
                let expected = if i == j {
                    sets.iter().filter(|s| s.contains(a)).count()
                } else {
                    sets.iter().filter(|s| s.contains(a) && s.contains(b)).count()
                };
                assert_eq!(m.get(i, j), expected as f64, "({a},{b})");
            }
        }
    }
}
