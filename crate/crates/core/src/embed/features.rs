//! The assembled herb feature matrix and its frozen segment layout.
//!
//! Per herb: kingdom one-hot (5) || phylo-PCA (10) || properties (15) ||
//! efficacy (30) || combination (30) = 90 columns. The learned segments are
//! z-scored column-wise over the herbs that have them; herbs missing a
//! segment stay zero there and are reported. Slot 90 (dose weight) exists
//! only on encoded formula-graph nodes, not in this matrix.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::phylo::phylo_distances;
use super::table::EmbeddingTable;
use super::EmbedError;
use crate::io::{self, F32Matrix};
use crate::kg::{HerbId, KnowledgeGraph, TaxId};
use crate::linalg::pca_fit_transform;

pub const FEATURE_DIM: usize = 90;
/// Feature width on formula-graph nodes: the 90 herb features plus dose.
pub const NODE_ATTR_DIM: usize = 91;

const PHYLO_COMPONENTS: usize = 10;

/// Ablation groups. The five ranges tile `[0..91)` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureSegment {
    /// Kingdom one-hot + phylogenetic PCA.
    Sources,
    MedicinalProperties,
    Efficacy,
    Combination,
    /// Slot 90 on encoded graph nodes.
    DosageWeight,
}

impl FeatureSegment {
    pub const ALL: [FeatureSegment; 5] = [
        FeatureSegment::Sources,
        FeatureSegment::MedicinalProperties,
        FeatureSegment::Efficacy,
        FeatureSegment::Combination,
        FeatureSegment::DosageWeight,
    ];

    pub fn range(self) -> Range<usize> {
        match self {
            FeatureSegment::Sources => 0..15,
            FeatureSegment::MedicinalProperties => 15..30,
            FeatureSegment::Efficacy => 30..60,
            FeatureSegment::Combination => 60..90,
            FeatureSegment::DosageWeight => 90..91,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSegment::Sources => "sources",
            FeatureSegment::MedicinalProperties => "medicinal_properties",
            FeatureSegment::Efficacy => "efficacy",
            FeatureSegment::Combination => "combination",
            FeatureSegment::DosageWeight => "dosage_weight",
        }
    }
}

/// Serialized layout descriptor; any mismatch on load is a hard error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentLayout {
    pub version: u32,
    pub segments: Vec<(String, usize, usize)>,
}

impl SegmentLayout {
    pub fn current() -> Self {
        SegmentLayout {
            version: 1,
            segments: FeatureSegment::ALL
                .iter()
                .map(|s| {
                    let r = s.range();
                    (s.as_str().to_string(), r.start, r.end)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingFeature {
    pub herb: HerbId,
    pub segment: FeatureSegment,
}

/// herb id -> 90-dim feature vector, with a fixed column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    herb_ids: Vec<HerbId>,
    index: BTreeMap<HerbId, usize>,
    data: Vec<f64>,
    layout: SegmentLayout,
}

#[derive(Serialize, Deserialize)]
struct FeatureSidecar {
    rows: usize,
    cols: usize,
    herbs: Vec<String>,
    layout: SegmentLayout,
}

impl FeatureMatrix {
    fn new(herb_ids: Vec<HerbId>) -> Self {
        let index = herb_ids
            .iter()
            .enumerate()
            .map(|(i, h)| (h.clone(), i))
            .collect();
        let n = herb_ids.len();
        FeatureMatrix {
            herb_ids,
            index,
            data: vec![0.0; n * FEATURE_DIM],
            layout: SegmentLayout::current(),
        }
    }

    pub fn len(&self) -> usize {
        self.herb_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.herb_ids.is_empty()
    }

    pub fn herb_ids(&self) -> &[HerbId] {
        &self.herb_ids
    }

    pub fn layout(&self) -> &SegmentLayout {
        &self.layout
    }

    pub fn get(&self, herb: &HerbId) -> Option<&[f64]> {
        self.index
            .get(herb)
            .map(|&i| &self.data[i * FEATURE_DIM..(i + 1) * FEATURE_DIM])
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * FEATURE_DIM..(i + 1) * FEATURE_DIM]
    }

    pub fn write(&self, path: &Path) -> Result<(), EmbedError> {
        let mut m = F32Matrix::zeros(self.herb_ids.len(), FEATURE_DIM);
        for (i, v) in self.data.iter().enumerate() {
            m.data[i] = *v as f32;
        }
        io::write_f32_matrix(
            path,
            &m,
            &FeatureSidecar {
                rows: self.herb_ids.len(),
                cols: FEATURE_DIM,
                herbs: self.herb_ids.iter().map(|h| h.0.clone()).collect(),
                layout: self.layout.clone(),
            },
        )?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, EmbedError> {
        let (m, side): (F32Matrix, FeatureSidecar) =
            io::read_f32_matrix(path, |s: &FeatureSidecar| (s.rows, s.cols))?;
        if side.layout != SegmentLayout::current() {
            return Err(EmbedError::LayoutMismatch(format!(
                "stored version {} with {} segments",
                side.layout.version,
                side.layout.segments.len()
            )));
        }
        if side.cols != FEATURE_DIM {
            return Err(EmbedError::LayoutMismatch(format!(
                "expected {FEATURE_DIM} columns, got {}",
                side.cols
            )));
        }
        let herb_ids: Vec<HerbId> = side.herbs.into_iter().map(HerbId::new).collect();
        let mut out = FeatureMatrix::new(herb_ids);
        for (i, v) in m.data.iter().enumerate() {
            out.data[i] = *v as f64;
        }
        Ok(out)
    }
}

/// Per-kingdom phylogenetic PCA scores, 10 columns, zero-padded.
///
/// Herbs are grouped by kingdom and taxonomy root; each group with at least
/// two distinct taxids gets path-length distances + PCA over its distance
/// rows. Minerals (no taxid) and singleton groups keep all-zero scores, and
/// small groups pad their < 10 components with zeros.
pub fn phylo_pca_scores(
    kg: &KnowledgeGraph,
) -> Result<BTreeMap<HerbId, Vec<f64>>, EmbedError> {
    let mut scores: BTreeMap<HerbId, Vec<f64>> = kg
        .herbs
        .keys()
        .map(|h| (h.clone(), vec![0.0; PHYLO_COMPONENTS]))
        .collect();

    // (kingdom, root) -> distinct taxids
    let mut groups: BTreeMap<(usize, TaxId), Vec<TaxId>> = BTreeMap::new();
    for herb in kg.herbs.values() {
        let Some(taxid) = herb.taxid else { continue };
        let Some(root) = kg.taxonomy.root_of(taxid) else {
            continue; // unresolved taxids keep zero scores; validate() reports them
        };
        let entry = groups.entry((herb.kingdom.index(), root)).or_default();
        if !entry.contains(&taxid) {
            entry.push(taxid);
        }
    }

    for ((kingdom_idx, _root), taxids) in &groups {
        if taxids.len() < 2 {
            continue;
        }
        let distances = phylo_distances(&kg.taxonomy, taxids)?;
        let k = PHYLO_COMPONENTS.min(taxids.len());
        let pca = pca_fit_transform(&distances.matrix, k)?;
        let taxid_row: BTreeMap<TaxId, usize> = taxids
            .iter()
            .enumerate()
            .map(|(i, t)| (*t, i))
            .collect();
        for herb in kg.herbs.values() {
            if herb.kingdom.index() != *kingdom_idx {
                continue;
            }
            let Some(taxid) = herb.taxid else { continue };
            let Some(&row) = taxid_row.get(&taxid) else { continue };
            let out = scores.get_mut(&herb.id).unwrap();
            for c in 0..k {
                out[c] = pca.scores.get(row, c);
            }
        }
    }
    Ok(scores)
}

struct SegmentSource<'a> {
    segment: FeatureSegment,
    vectors: BTreeMap<&'a HerbId, Vec<f64>>,
}

/// Builds the 90-dim matrix over every herb in the graph.
///
/// Missing embeddings zero-fill their segment and are reported rather than
/// failing the assembly.
pub fn assemble_chp_features(
    kg: &KnowledgeGraph,
    property: &EmbeddingTable,
    efficacy: &EmbeddingTable,
    combination: &EmbeddingTable,
    pca_scores: &BTreeMap<HerbId, Vec<f64>>,
) -> (FeatureMatrix, Vec<MissingFeature>) {
    let herb_ids: Vec<HerbId> = kg.herbs.keys().cloned().collect();
    let mut matrix = FeatureMatrix::new(herb_ids.clone());
    let mut missing = Vec::new();

    for (i, herb_id) in herb_ids.iter().enumerate() {
        let herb = &kg.herbs[herb_id];
        let row = matrix.row_mut(i);
        row[herb.kingdom.index()] = 1.0;
        if let Some(s) = pca_scores.get(herb_id) {
            let n = s.len().min(PHYLO_COMPONENTS);
            row[5..5 + n].copy_from_slice(&s[..n]);
        }
    }

    let mut sources = Vec::new();
    for (segment, table) in [
        (FeatureSegment::MedicinalProperties, property),
        (FeatureSegment::Efficacy, efficacy),
        (FeatureSegment::Combination, combination),
    ] {
        let mut vectors: BTreeMap<&HerbId, Vec<f64>> = BTreeMap::new();
        for herb_id in &herb_ids {
            let herb = &kg.herbs[herb_id];
            let raw = match segment {
                FeatureSegment::MedicinalProperties => {
                    table.mean_of(&KnowledgeGraph::property_tokens(herb))
                }
                FeatureSegment::Efficacy => {
                    let phrases: Vec<&str> =
                        herb.efficacy.iter().map(String::as_str).collect();
                    table.mean_of(&phrases)
                }
                FeatureSegment::Combination => table.get(herb_id.as_str()).map(|v| v.to_vec()),
                _ => unreachable!(),
            };
            match raw {
                Some(v) => {
                    vectors.insert(herb_id, v);
                }
                None => missing.push(MissingFeature {
                    herb: herb_id.clone(),
                    segment,
                }),
            }
        }
        sources.push(SegmentSource { segment, vectors });
    }

    // Z-score each learned segment column-wise over the covered herbs.
    for source in &sources {
        let range = source.segment.range();
        let width = range.len();
        let covered = source.vectors.len();
        if covered == 0 {
            continue;
        }
        let mut mean = vec![0.0; width];
        for v in source.vectors.values() {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= covered as f64;
        }
        let mut sd = vec![0.0; width];
        for v in source.vectors.values() {
            for (s, (x, m)) in sd.iter_mut().zip(v.iter().zip(&mean)) {
                *s += (x - m) * (x - m);
            }
        }
        for s in &mut sd {
            *s = (*s / covered as f64).sqrt();
        }
        for (herb_id, v) in &source.vectors {
            let i = matrix.index[*herb_id];
            let row = matrix.row_mut(i);
            for (c, x) in v.iter().enumerate() {
                // Constant columns z-score to 0.
                row[range.start + c] = if sd[c] > 1e-12 { (x - mean[c]) / sd[c] } else { 0.0 };
            }
        }
    }

    (matrix, missing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::*;

    fn sample_kg() -> KnowledgeGraph {
        let mut kg = KnowledgeGraph::default();
        let herbs = [
            ("CHP00001", Kingdom::Plantae, Some(10), vec!["warm"], vec!["bitter"], vec!["clears heat", "calms"]),
            ("CHP00002", Kingdom::Plantae, Some(11), vec!["cold"], vec!["sweet"], vec!["tonifies qi", "calms"]),
            ("CHP00003", Kingdom::Mineralia, None, vec!["warm"], vec!["bitter"], vec!["clears heat", "tonifies qi"]),
        ];
        for (id, kingdom, taxid, natures, flavors, efficacy) in herbs {
            let h = HerbPiece {
                id: HerbId::new(id),
                name: id.to_string(),
                kingdom,
                taxid: taxid.map(TaxId),
                natures: natures.into_iter().map(String::from).collect(),
                flavors: flavors.into_iter().map(String::from).collect(),
                meridians: vec![],
                efficacy: efficacy.into_iter().map(String::from).collect(),
            };
            kg.herbs.insert(h.id.clone(), h);
        }
        for (t, p) in [(1, None), (10, Some(1)), (11, Some(1))] {
            kg.taxonomy.entries.insert(
                TaxId(t),
                TaxEntry {
                    parent: p.map(TaxId),
                    rank: "clade".into(),
                },
            );
        }
        let f = Formula {
            id: FormulaId::new("F001"),
            members: vec![
                FormulaMember { herb: HerbId::new("CHP00001"), dose_g: Some(10.0) },
                FormulaMember { herb: HerbId::new("CHP00002"), dose_g: Some(30.0) },
            ],
            labels: Some([true, false, false, false, false]),
        };
        kg.formulas.insert(f.id.clone(), f);
        kg
    }

    fn tables(kg: &KnowledgeGraph) -> (EmbeddingTable, EmbeddingTable, EmbeddingTable) {
        let corpora = crate::embed::build_corpora(kg).unwrap();
        let cfg = |dim| crate::embed::SkipGramConfig {
            dim,
            epochs: 2,
            seed: 1,
            ..Default::default()
        };
        let (p, _) = crate::embed::train_skipgram(&corpora.property, &cfg(15)).unwrap();
        let (e, _) = crate::embed::train_skipgram(&corpora.efficacy, &cfg(30))
            .unwrap_or_else(|_| panic!("efficacy corpus"));
        let (c, _) = crate::embed::train_skipgram(&corpora.combination, &cfg(30)).unwrap();
        (p, e, c)
    }

    #[test]
    fn layout_tiles_91_columns() {
        let mut seen = vec![false; NODE_ATTR_DIM];
        for s in FeatureSegment::ALL {
            for i in s.range() {
                assert!(!seen[i], "overlap at {i}");
                seen[i] = true;
            }
        }
        assert!(seen.into_iter().all(|b| b));
    }

    #[test]
    fn mineral_herb_zero_pca_one_hot() {
        let kg = sample_kg();
        let scores = phylo_pca_scores(&kg).unwrap();
        let (fm, _) = {
            let (p, e, c) = tables(&kg);
            assemble_chp_features(&kg, &p, &e, &c, &scores)
        };
        let row = fm.get(&HerbId::new("CHP00003")).unwrap();
        assert_eq!(row[Kingdom::Mineralia.index()], 1.0);
        // one-hot has exactly one 1
        let ones = row[..5].iter().filter(|v| **v == 1.0).count();
        assert_eq!(ones, 1);
        assert!(row[5..15].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn herb_missing_everywhere_has_only_one_hot() {
        let mut kg = sample_kg();
        let orphan = HerbPiece {
            id: HerbId::new("CHP00009"),
            name: "orphan".into(),
            kingdom: Kingdom::Fungi,
            taxid: None,
            natures: vec![],
            flavors: vec![],
            meridians: vec![],
            efficacy: vec![],
        };
        kg.herbs.insert(orphan.id.clone(), orphan);
        let scores = phylo_pca_scores(&kg).unwrap();
        let (p, e, c) = tables(&kg);
        let (fm, missing) = assemble_chp_features(&kg, &p, &e, &c, &scores);
        let row = fm.get(&HerbId::new("CHP00009")).unwrap();
        assert_eq!(row[Kingdom::Fungi.index()], 1.0);
        let nonzero = row.iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 1);
        assert_eq!(
            missing
                .iter()
                .filter(|m| m.herb.as_str() == "CHP00009")
                .count(),
            3
        );
    }

    #[test]
    fn property_segment_columns_centered() {
        let kg = sample_kg();
        let scores = phylo_pca_scores(&kg).unwrap();
        let (p, e, c) = tables(&kg);
        let (fm, _) = assemble_chp_features(&kg, &p, &e, &c, &scores);
        assert_eq!(fm.len(), 3);
        let range = FeatureSegment::MedicinalProperties.range();
        for col in range {
            let mean: f64 = fm
                .herb_ids()
                .iter()
                .map(|h| fm.get(h).unwrap()[col])
                .sum::<f64>()
                / fm.len() as f64;
            assert!(mean.abs() <= 1e-6, "column {col} mean {mean}");
        }
    }

    #[test]
    fn disk_round_trip_and_layout_guard() {
        let kg = sample_kg();
        let scores = phylo_pca_scores(&kg).unwrap();
        let (p, e, c) = tables(&kg);
        let (fm, _) = assemble_chp_features(&kg, &p, &e, &c, &scores);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chp_features.f32");
        fm.write(&path).unwrap();
        let fm2 = FeatureMatrix::read(&path).unwrap();
        assert_eq!(fm.herb_ids(), fm2.herb_ids());

        // Corrupt the stored layout; reload must hard-fail.
        let sidecar = dir.path().join("chp_features.f32.json");
        let text = std::fs::read_to_string(&sidecar).unwrap();
        let tampered = text.replace("\"version\": 1", "\"version\": 99");
        std::fs::write(&sidecar, tampered).unwrap();
        assert!(matches!(
            FeatureMatrix::read(&path),
            Err(EmbedError::LayoutMismatch(_))
        ));
    }
}
