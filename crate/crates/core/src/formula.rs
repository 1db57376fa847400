//! Virtual-node encoding of a formula.
//!
//! Real nodes are the member herbs; one virtual node exists per distinct
//! property value present in the formula, wired to every member that carries
//! it. Herb-herb interaction is deliberately unwired: it flows through the
//! shared virtual nodes and the models' attention. Each virtual node's herb
//! neighborhood doubles as a hyperedge for the hypergraph model.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{FeatureMatrix, FEATURE_DIM, NODE_ATTR_DIM};
use crate::kg::{Formula, FormulaId, HerbId, KnowledgeGraph, NUM_LABELS};

#[derive(Debug, Error)]
pub enum FormulaGraphError {
    #[error("herb {0} has no feature row")]
    UnknownHerbFeatures(HerbId),
    #[error("herb {0} is not in the knowledge graph")]
    UnknownHerb(HerbId),
    #[error("formula {0} has no members")]
    EmptyFormula(FormulaId),
    #[error("jsonl io: {0}")]
    Io(#[from] std::io::Error),
    #[error("jsonl parse: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Chp,
    TherapeuticNature,
    MedicinalFlavor,
    MeridianTropism,
}

impl NodeKind {
    pub const VIRTUAL: [NodeKind; 3] = [
        NodeKind::TherapeuticNature,
        NodeKind::MedicinalFlavor,
        NodeKind::MeridianTropism,
    ];

    pub fn is_virtual(self) -> bool {
        self != NodeKind::Chp
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Chp => "chp",
            NodeKind::TherapeuticNature => "therapeutic_nature",
            NodeKind::MedicinalFlavor => "medicinal_flavor",
            NodeKind::MeridianTropism => "meridian_tropism",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub kind: NodeKind,
    pub key: String,
    /// 90 herb features plus the dose-weight slot.
    pub attr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub a: usize,
    pub b: usize,
    /// (dose-derived weight, relation-kind flag: 1 = herb-virtual,
    /// 0 = virtual-virtual).
    pub attr: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaGraph {
    pub formula_id: FormulaId,
    pub labels: Option<[bool; NUM_LABELS]>,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl FormulaGraph {
    pub fn chp_indices(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind == NodeKind::Chp)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn virtual_indices(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind.is_virtual())
            .map(|(i, _)| i)
            .collect()
    }

    /// One hyperedge per virtual node: its herb members with the dose-derived
    /// edge weights.
    pub fn hyperedges(&self) -> Vec<(usize, Vec<(usize, f64)>)> {
        let mut out = Vec::new();
        for v in self.virtual_indices() {
            let mut members = Vec::new();
            for e in &self.edges {
                let (chp, virt) = (e.a.min(e.b), e.a.max(e.b));
                let _ = virt;
                if e.attr[1] != 1.0 {
                    continue;
                }
                let (c, vv) = if self.nodes[e.a].kind == NodeKind::Chp {
                    (e.a, e.b)
                } else {
                    (e.b, e.a)
                };
                let _ = chp;
                if vv == v {
                    members.push((c, e.attr[0]));
                }
            }
            out.push((v, members));
        }
        out
    }
}

/// Encodes one formula against the assembled feature matrix.
pub fn encode_formula(
    formula: &Formula,
    feats: &FeatureMatrix,
    kg: &KnowledgeGraph,
) -> Result<FormulaGraph, FormulaGraphError> {
    if formula.members.is_empty() {
        return Err(FormulaGraphError::EmptyFormula(formula.id.clone()));
    }

    // One real node per distinct herb, first-occurrence order. Duplicate
    // member rows merge by summing doses (unknown anywhere means unknown).
    let mut herb_order: Vec<HerbId> = Vec::new();
    let mut herb_dose: BTreeMap<HerbId, Option<f64>> = BTreeMap::new();
    for m in &formula.members {
        if !herb_dose.contains_key(&m.herb) {
            herb_order.push(m.herb.clone());
            herb_dose.insert(m.herb.clone(), m.dose_g);
        } else {
            let entry = herb_dose.get_mut(&m.herb).unwrap();
            *entry = match (*entry, m.dose_g) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            };
        }
    }

    // Dose weights: dose / total, but all zero if any dose is unknown.
    let all_known = herb_order.iter().all(|h| herb_dose[h].is_some());
    let total: f64 = herb_order
        .iter()
        .filter_map(|h| herb_dose[h])
        .sum();
    let weight_of = |h: &HerbId| -> f64 {
        if all_known && total > 0.0 {
            herb_dose[h].unwrap() / total
        } else {
            0.0
        }
    };

    let mut nodes: Vec<GraphNode> = Vec::new();
    let mut chp_index: BTreeMap<&HerbId, usize> = BTreeMap::new();
    for h in &herb_order {
        let features = feats
            .get(h)
            .ok_or_else(|| FormulaGraphError::UnknownHerbFeatures(h.clone()))?;
        let mut attr = vec![0.0; NODE_ATTR_DIM];
        attr[..FEATURE_DIM].copy_from_slice(features);
        attr[FEATURE_DIM] = weight_of(h);
        chp_index.insert(h, nodes.len());
        nodes.push(GraphNode {
            kind: NodeKind::Chp,
            key: h.0.clone(),
            attr,
        });
    }

    // Virtual nodes, one per distinct (kind, value) present.
    let mut virtual_members: BTreeMap<(NodeKind, String), Vec<usize>> = BTreeMap::new();
    for h in &herb_order {
        let herb = kg
            .herbs
            .get(h)
            .ok_or_else(|| FormulaGraphError::UnknownHerb(h.clone()))?;
        let chp = chp_index[h];
        for (kind, values) in [
            (NodeKind::TherapeuticNature, &herb.natures),
            (NodeKind::MedicinalFlavor, &herb.flavors),
            (NodeKind::MeridianTropism, &herb.meridians),
        ] {
            for v in values {
                let members = virtual_members.entry((kind, v.clone())).or_default();
                if !members.contains(&chp) {
                    members.push(chp);
                }
            }
        }
    }

    let mut edges: Vec<GraphEdge> = Vec::new();
    let mut virtual_index: BTreeMap<(NodeKind, String), usize> = BTreeMap::new();
    for ((kind, value), members) in &virtual_members {
        // Attr: dose-weighted mean of connected herb attrs; unweighted when
        // every weight is zero.
        let weights: Vec<f64> = members.iter().map(|&c| nodes[c].attr[FEATURE_DIM]).collect();
        let wsum: f64 = weights.iter().sum();
        let mut attr = vec![0.0; NODE_ATTR_DIM];
        for (&c, &w) in members.iter().zip(&weights) {
            let coef = if wsum > 0.0 { w / wsum } else { 1.0 / members.len() as f64 };
            for (a, x) in attr.iter_mut().zip(&nodes[c].attr) {
                *a += coef * x;
            }
        }
        let v_idx = nodes.len();
        virtual_index.insert((*kind, value.clone()), v_idx);
        nodes.push(GraphNode {
            kind: *kind,
            key: value.clone(),
            attr,
        });
        for &c in members {
            edges.push(GraphEdge {
                a: c,
                b: v_idx,
                attr: [nodes[c].attr[FEATURE_DIM], 1.0],
            });
        }
    }

    // Virtual-virtual edges where two property values share a herb; the
    // weight averages both endpoints' incident herb-edge weights.
    let virtual_list: Vec<(&(NodeKind, String), &Vec<usize>)> =
        virtual_members.iter().collect();
    for i in 0..virtual_list.len() {
        for j in (i + 1)..virtual_list.len() {
            let (key_i, members_i) = virtual_list[i];
            let (key_j, members_j) = virtual_list[j];
            let shares = members_i.iter().any(|c| members_j.contains(c));
            if !shares {
                continue;
            }
            let incident: Vec<f64> = members_i
                .iter()
                .chain(members_j.iter())
                .map(|&c| nodes[c].attr[FEATURE_DIM])
                .collect();
            let mean = incident.iter().sum::<f64>() / incident.len() as f64;
            edges.push(GraphEdge {
                a: virtual_index[key_i],
                b: virtual_index[key_j],
                attr: [mean, 0.0],
            });
        }
    }

    Ok(FormulaGraph {
        formula_id: formula.id.clone(),
        labels: formula.labels,
        nodes,
        edges,
    })
}

/// Encodes every formula in the graph, skipping none; callers that want to
/// tolerate failures filter beforehand.
pub fn encode_corpus(
    kg: &KnowledgeGraph,
    feats: &FeatureMatrix,
) -> Result<Vec<FormulaGraph>, FormulaGraphError> {
    kg.formulas
        .values()
        .map(|f| encode_formula(f, feats, kg))
        .collect()
}

/// One JSON document per line.
pub fn write_jsonl(graphs: &[FormulaGraph], path: &Path) -> Result<(), FormulaGraphError> {
    let mut buf = Vec::new();
    for g in graphs {
        serde_json::to_writer(&mut buf, g)?;
        buf.write_all(b"\n")?;
    }
    crate::io::write_atomic(path, &buf).map_err(|e| match e {
        crate::io::IoError::File { source, .. } => FormulaGraphError::Io(source),
        other => FormulaGraphError::Io(std::io::Error::other(other.to_string())),
    })
}

pub fn read_jsonl(path: &Path) -> Result<Vec<FormulaGraph>, FormulaGraphError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{assemble_chp_features, EmbeddingTable};
    use crate::kg::*;
    use std::collections::BTreeMap as Map;

    fn herb(id: &str, natures: &[&str], flavors: &[&str], meridians: &[&str]) -> HerbPiece {
        HerbPiece {
            id: HerbId::new(id),
            name: id.into(),
            kingdom: Kingdom::Plantae,
            taxid: None,
            natures: natures.iter().map(|s| s.to_string()).collect(),
            flavors: flavors.iter().map(|s| s.to_string()).collect(),
            meridians: meridians.iter().map(|s| s.to_string()).collect(),
            efficacy: vec!["clears heat".into(), "calms".into()],
        }
    }

    fn kg_and_features(
        herbs: Vec<HerbPiece>,
        formulas: Vec<(&str, Vec<(&str, Option<f64>)>)>,
    ) -> (KnowledgeGraph, FeatureMatrix) {
        let mut kg = KnowledgeGraph::default();
        for h in herbs {
            kg.herbs.insert(h.id.clone(), h);
        }
        for (fid, members) in formulas {
            let f = Formula {
                id: FormulaId::new(fid),
                members: members
                    .into_iter()
                    .map(|(h, dose_g)| FormulaMember {
                        herb: HerbId::new(h),
                        dose_g,
                    })
                    .collect(),
                labels: Some([true, false, false, false, false]),
            };
            kg.formulas.insert(f.id.clone(), f);
        }
        // Structure tests only need per-herb rows, not trained vectors; a
        // deterministic stand-in table keeps them exact.
        let mut c = EmbeddingTable::new(30);
        for (i, id) in kg.herbs.keys().enumerate() {
            let mut v = vec![0.0; 30];
            v[i % 30] = 1.0 + i as f64;
            c.insert(id.as_str(), v);
        }
        let (feats, _) = assemble_chp_features(
            &kg,
            &EmbeddingTable::new(15),
            &EmbeddingTable::new(30),
            &c,
            &Map::new(),
        );
        (kg, feats)
    }

    #[test]
    fn single_herb_counts() {
        // 1 nature + 1 flavor + 2 meridians -> 4 virtual nodes, 4 herb-virtual
        // edges, C(4,2) = 6 virtual-virtual edges (all share the one herb).
        let (kg, feats) = kg_and_features(
            vec![herb("CHP00001", &["warm"], &["bitter"], &["lung", "liver"])],
            vec![("F001", vec![("CHP00001", Some(10.0))])],
        );
        let g = encode_formula(&kg.formulas[&FormulaId::new("F001")], &feats, &kg).unwrap();
        assert_eq!(g.chp_indices().len(), 1);
        assert_eq!(g.virtual_indices().len(), 4);
        let hv = g.edges.iter().filter(|e| e.attr[1] == 1.0).count();
        let vv = g.edges.iter().filter(|e| e.attr[1] == 0.0).count();
        assert_eq!(hv, 4);
        assert_eq!(vv, 6);
        // Lone herb's dose weight is 1.
        assert_eq!(g.nodes[0].attr[FEATURE_DIM], 1.0);
    }

    #[test]
    fn shared_flavor_virtual_attr_is_mean() {
        let (kg, feats) = kg_and_features(
            vec![
                herb("CHP00001", &["warm"], &["bitter"], &[]),
                herb("CHP00002", &["cold"], &["bitter"], &[]),
            ],
            vec![(
                "F001",
                vec![("CHP00001", Some(5.0)), ("CHP00002", Some(5.0))],
            )],
        );
        let g = encode_formula(&kg.formulas[&FormulaId::new("F001")], &feats, &kg).unwrap();
        let bitter = g
            .nodes
            .iter()
            .find(|n| n.kind == NodeKind::MedicinalFlavor && n.key == "bitter")
            .unwrap();
        let a = &g.nodes[0].attr;
        let b = &g.nodes[1].attr;
        for ((x, y), z) in a.iter().zip(b).zip(&bitter.attr) {
            assert!(((x + y) / 2.0 - z).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_doses_zero_weights_unweighted_means() {
        let (kg, feats) = kg_and_features(
            vec![
                herb("CHP00001", &["warm"], &[], &[]),
                herb("CHP00002", &["warm"], &[], &[]),
            ],
            vec![("F001", vec![("CHP00001", Some(4.0)), ("CHP00002", None)])],
        );
        let g = encode_formula(&kg.formulas[&FormulaId::new("F001")], &feats, &kg).unwrap();
        for idx in g.chp_indices() {
            assert_eq!(g.nodes[idx].attr[FEATURE_DIM], 0.0);
        }
        for e in &g.edges {
            assert_eq!(e.attr[0], 0.0);
        }
        let warm = g
            .nodes
            .iter()
            .find(|n| n.kind == NodeKind::TherapeuticNature)
            .unwrap();
        let a = &g.nodes[0].attr;
        let b = &g.nodes[1].attr;
        for ((x, y), z) in a.iter().zip(b).zip(&warm.attr) {
            assert!(((x + y) / 2.0 - z).abs() < 1e-12);
        }
    }

    #[test]
    fn dose_weights_sum_to_one_when_known() {
        let (kg, feats) = kg_and_features(
            vec![
                herb("CHP00001", &["warm"], &["bitter"], &["lung"]),
                herb("CHP00002", &["cold"], &["sweet"], &["liver"]),
                herb("CHP00003", &["warm"], &["sweet"], &["lung"]),
            ],
            vec![(
                "F001",
                vec![
                    ("CHP00001", Some(3.0)),
                    ("CHP00002", Some(9.0)),
                    ("CHP00003", Some(6.0)),
                ],
            )],
        );
        let g = encode_formula(&kg.formulas[&FormulaId::new("F001")], &feats, &kg).unwrap();
        let total: f64 = g
            .chp_indices()
            .iter()
            .map(|&i| g.nodes[i].attr[FEATURE_DIM])
            .sum();
        assert!((total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn counts_match_closed_form_for_random_fixtures() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let natures = ["warm", "cold", "hot", "cool"];
        let flavors = ["bitter", "sweet", "sour"];
        let meridians = ["lung", "liver", "heart", "kidney"];
        for trial in 0..20 {
            let n_herbs = rng.gen_range(1..=5);
            let herbs: Vec<HerbPiece> = (0..n_herbs)
                .map(|i| {
                    fn pick<'a>(
                        pool: &[&'a str],
                        rng: &mut rand_chacha::ChaCha8Rng,
                    ) -> Vec<&'a str> {
                        let k = rng.gen_range(0..=pool.len().min(2));
                        let mut chosen: Vec<&str> = pool.to_vec();
                        for _ in 0..(pool.len() - k) {
                            let idx = rng.gen_range(0..chosen.len());
                            chosen.remove(idx);
                        }
                        chosen
                    }
                    herb(
                        &format!("CHP{:05}", trial * 10 + i),
                        &pick(&natures, &mut rng),
                        &pick(&flavors, &mut rng),
                        &pick(&meridians, &mut rng),
                    )
                })
                .collect();
            let ids: Vec<String> = herbs.iter().map(|h| h.id.0.clone()).collect();
            let members: Vec<(&str, Option<f64>)> = ids
                .iter()
                .map(|id| (id.as_str(), Some(rng.gen_range(1..20) as f64)))
                .collect();
            let (kg, feats) = kg_and_features(herbs.clone(), vec![("F001", members)]);
            let g = encode_formula(&kg.formulas[&FormulaId::new("F001")], &feats, &kg).unwrap();

            // Closed forms recomputed independently from the herb lists.
            let mut values: std::collections::BTreeSet<(u8, String)> = Default::default();
            let mut memberships = 0usize;
            for h in &herbs {
                for v in &h.natures {
                    values.insert((0, v.clone()));
                }
                for v in &h.flavors {
                    values.insert((1, v.clone()));
                }
                for v in &h.meridians {
                    values.insert((2, v.clone()));
                }
                memberships += h.natures.len() + h.flavors.len() + h.meridians.len();
            }
            assert_eq!(g.virtual_indices().len(), values.len());
            assert_eq!(
                g.edges.iter().filter(|e| e.attr[1] == 1.0).count(),
                memberships
            );
            let vv_expected = {
                let value_list: Vec<(u8, String)> = values.iter().cloned().collect();
                let covers = |val: &(u8, String), h: &HerbPiece| match val.0 {
                    0 => h.natures.contains(&val.1),
                    1 => h.flavors.contains(&val.1),
                    _ => h.meridians.contains(&val.1),
                };
                let mut count = 0;
                for i in 0..value_list.len() {
                    for j in (i + 1)..value_list.len() {
                        if herbs
                            .iter()
                            .any(|h| covers(&value_list[i], h) && covers(&value_list[j], h))
                        {
                            count += 1;
                        }
                    }
                }
                count
            };
            assert_eq!(
                g.edges.iter().filter(|e| e.attr[1] == 0.0).count(),
                vv_expected
            );
        }
    }

    #[test]
    fn permutation_invariant_canonical_form() {
        let herbs = vec![
            herb("CHP00001", &["warm"], &["bitter"], &["lung"]),
            herb("CHP00002", &["cold"], &["sweet"], &["liver"]),
            herb("CHP00003", &["warm"], &["sweet"], &["heart"]),
        ];
        let forward = vec![
            ("CHP00001", Some(3.0)),
            ("CHP00002", Some(9.0)),
            ("CHP00003", Some(6.0)),
        ];
        let mut reversed = forward.clone();
        reversed.reverse();
        let (kg1, feats1) = kg_and_features(herbs.clone(), vec![("F001", forward)]);
        let (kg2, feats2) = kg_and_features(herbs, vec![("F001", reversed)]);
        let g1 = encode_formula(&kg1.formulas[&FormulaId::new("F001")], &feats1, &kg1).unwrap();
        let g2 = encode_formula(&kg2.formulas[&FormulaId::new("F001")], &feats2, &kg2).unwrap();

        let canon = |g: &FormulaGraph| {
            let mut order: Vec<usize> = (0..g.nodes.len()).collect();
            order.sort_by(|&a, &b| {
                (g.nodes[a].kind, &g.nodes[a].key).cmp(&(g.nodes[b].kind, &g.nodes[b].key))
            });
            let position: Map<usize, usize> =
                order.iter().enumerate().map(|(new, old)| (*old, new)).collect();
            let nodes: Vec<(NodeKind, String, Vec<f64>)> = order
                .iter()
                .map(|&i| (g.nodes[i].kind, g.nodes[i].key.clone(), g.nodes[i].attr.clone()))
                .collect();
            let mut edges: Vec<(usize, usize, [f64; 2])> = g
                .edges
                .iter()
                .map(|e| {
                    let (x, y) = (position[&e.a], position[&e.b]);
                    (x.min(y), x.max(y), e.attr)
                })
                .collect();
            edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
            (nodes, edges)
        };
        assert_eq!(canon(&g1), canon(&g2));
    }

    #[test]
    fn missing_features_error() {
        let (kg, _) = kg_and_features(
            vec![herb("CHP00001", &["warm"], &[], &[])],
            vec![("F001", vec![("CHP00001", Some(1.0))])],
        );
        let (_, empty_feats) = kg_and_features(
            vec![herb("CHP00099", &["warm"], &[], &[])],
            vec![("F099", vec![("CHP00099", Some(1.0))])],
        );
        assert!(matches!(
            encode_formula(&kg.formulas[&FormulaId::new("F001")], &empty_feats, &kg),
            Err(FormulaGraphError::UnknownHerbFeatures(_))
        ));
    }

    #[test]
    fn jsonl_round_trip() {
        let (kg, feats) = kg_and_features(
            vec![
                herb("CHP00001", &["warm"], &["bitter"], &["lung"]),
                herb("CHP00002", &["cold"], &["sweet"], &["liver"]),
            ],
            vec![
                ("F001", vec![("CHP00001", Some(3.0)), ("CHP00002", Some(9.0))]),
                ("F002", vec![("CHP00002", None)]),
            ],
        );
        let graphs = encode_corpus(&kg, &feats).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graphs.jsonl");
        write_jsonl(&graphs, &path).unwrap();
        let back = read_jsonl(&path).unwrap();
        assert_eq!(graphs, back);
    }
}
