//! Neighbor-diffusion expansion of compound-target associations.
//!
//! Known targets propagate to feature-space neighbors as candidates, which
//! external affinity scoring then confirms or rejects. Thresholding is
//! strict (`affinity > t`) throughout.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{CompoundFeatures, CompoundRecord, CompoundTargetPair, EntrezId, InChIKey, Provenance};
use crate::linalg::{pca_fit_transform, Matrix};

#[derive(Debug, Error)]
pub enum DiffuseError {
    #[error("need at least 2 compounds, got {0}")]
    TooFewCompounds(usize),
    #[error("pair ({0}, {1}) has no affinity; score candidates before filtering")]
    MissingAffinity(InChIKey, EntrezId),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Euclidean,
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub k: usize,
    pub metric: Metric,
    pub affinity_threshold: f64,
    /// PCA down to this many dimensions before the kNN scan. This replaces
    /// the original workflow's nonlinear reduction, so reports flag it.
    pub reduce_dims: Option<usize>,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            k: 10,
            metric: Metric::Cosine,
            affinity_threshold: 5.0,
            reduce_dims: None,
        }
    }
}

/// Exact nearest neighbors per compound, sorted ascending by distance with
/// lexicographic InChIKey tie-breaks; self excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborIndex {
    pub metric: Metric,
    pub neighbors: BTreeMap<InChIKey, Vec<(InChIKey, f64)>>,
}

fn distance(metric: Metric, a: &[f64], b: &[f64]) -> f64 {
    match metric {
        Metric::Euclidean => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
        Metric::Cosine => 1.0 - crate::linalg::cosine(a, b),
    }
}

/// Brute-force exact kNN over the compound feature rows.
pub fn knn_neighbors(
    features: &CompoundFeatures,
    cfg: &DiffusionConfig,
) -> Result<NeighborIndex, DiffuseError> {
    let n = features.row_index.len();
    if n < 2 {
        return Err(DiffuseError::TooFewCompounds(n));
    }

    let cols = features.matrix.cols;
    let mut rows: Matrix = Matrix::zeros(n, cols);
    for (i, v) in features.matrix.data.iter().enumerate() {
        rows.data[i] = *v as f64;
    }
    if let Some(d) = cfg.reduce_dims {
        if d < cols {
            let pca = pca_fit_transform(&rows, d)?;
            rows = pca.scores;
        }
    }

    let mut neighbors = BTreeMap::new();
    for i in 0..n {
        let mut dists: Vec<(f64, &InChIKey)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                (
                    distance(cfg.metric, rows.row(i), rows.row(j)),
                    &features.row_index[j],
                )
            })
            .collect();
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(b.1)));
        dists.truncate(cfg.k);
        neighbors.insert(
            features.row_index[i].clone(),
            dists.into_iter().map(|(d, key)| (key.clone(), d)).collect(),
        );
    }
    Ok(NeighborIndex {
        metric: cfg.metric,
        neighbors,
    })
}

/// Propagates each compound's neighbors' Recorded targets onto it.
///
/// Candidates carry `Provenance::Diffused` and no affinity; pairs already
/// Recorded for the compound are not duplicated. Output is sorted by
/// (compound, target) and independent of input order.
pub fn diffuse_pairs(
    pairs: &[CompoundTargetPair],
    idx: &NeighborIndex,
) -> Vec<CompoundTargetPair> {
    let mut recorded: BTreeMap<&InChIKey, BTreeSet<EntrezId>> = BTreeMap::new();
    for p in pairs {
        if p.provenance == Provenance::Recorded {
            recorded.entry(&p.inchikey).or_default().insert(p.entrez_id);
        }
    }

    let mut candidates: BTreeSet<(InChIKey, EntrezId)> = BTreeSet::new();
    for (compound, neighbors) in &idx.neighbors {
        let own = recorded.get(compound);
        for (neighbor, _) in neighbors {
            let Some(targets) = recorded.get(neighbor) else {
                continue;
            };
            for t in targets {
                if own.map_or(false, |o| o.contains(t)) {
                    continue;
                }
                candidates.insert((compound.clone(), *t));
            }
        }
    }

    candidates
        .into_iter()
        .map(|(inchikey, entrez_id)| CompoundTargetPair {
            inchikey,
            entrez_id,
            affinity: None,
            provenance: Provenance::Diffused,
        })
        .collect()
}

/// Keeps pairs with affinity strictly above the threshold.
pub fn filter_by_affinity(
    pairs: &[CompoundTargetPair],
    threshold: f64,
) -> Result<Vec<CompoundTargetPair>, DiffuseError> {
    for p in pairs {
        if p.affinity.is_none() {
            return Err(DiffuseError::MissingAffinity(p.inchikey.clone(), p.entrez_id));
        }
    }
    Ok(pairs
        .iter()
        .filter(|p| p.affinity.unwrap() > threshold)
        .cloned()
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub threshold: f64,
    pub n_compounds: usize,
    pub compound_coverage: f64,
    pub n_targets: usize,
    pub target_coverage: f64,
    pub n_pairs: usize,
    pub mean_targets_per_compound: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoverageTable {
    pub rows: Vec<CoverageRow>,
}

/// Distinct-compound/target coverage at each threshold. Pairs without an
/// affinity never survive any threshold.
pub fn coverage_report(
    pairs: &[CompoundTargetPair],
    compound_universe: &BTreeSet<InChIKey>,
    target_universe: &BTreeSet<EntrezId>,
    thresholds: &[f64],
) -> CoverageTable {
    let mut rows = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let mut compounds: BTreeSet<&InChIKey> = BTreeSet::new();
        let mut targets: BTreeSet<EntrezId> = BTreeSet::new();
        let mut surviving: BTreeSet<(&InChIKey, EntrezId)> = BTreeSet::new();
        for p in pairs {
            if p.affinity.map_or(false, |a| a > threshold) {
                compounds.insert(&p.inchikey);
                targets.insert(p.entrez_id);
                surviving.insert((&p.inchikey, p.entrez_id));
            }
        }
        let n_pairs = surviving.len();
        rows.push(CoverageRow {
            threshold,
            n_compounds: compounds.len(),
            compound_coverage: if compound_universe.is_empty() {
                0.0
            } else {
                compounds.len() as f64 / compound_universe.len() as f64
            },
            n_targets: targets.len(),
            target_coverage: if target_universe.is_empty() {
                0.0
            } else {
                targets.len() as f64 / target_universe.len() as f64
            },
            n_pairs,
            mean_targets_per_compound: if compounds.is_empty() {
                0.0
            } else {
                n_pairs as f64 / compounds.len() as f64
            },
        });
    }
    CoverageTable { rows }
}

/// One drug-likeness rule: descriptor value must be <= max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub field: String,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

impl Default for RuleSet {
    /// Lipinski: MW <= 500, logP <= 5, H-bond donors <= 5, acceptors <= 10.
    /// Field names follow the compounds.csv descriptor columns.
    fn default() -> Self {
        RuleSet {
            rules: vec![
                Rule { field: "mw".into(), max: 500.0 },
                Rule { field: "logp".into(), max: 5.0 },
                Rule { field: "hbd".into(), max: 5.0 },
                Rule { field: "hba".into(), max: 10.0 },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingDescriptor {
    pub compound: InChIKey,
    pub field: String,
}

/// Compounds passing every rule; compounds lacking a rule's descriptor are
/// excluded and reported.
pub fn filter_druglike(
    compounds: &[CompoundRecord],
    rules: &RuleSet,
) -> (Vec<InChIKey>, Vec<MissingDescriptor>) {
    let mut passing = Vec::new();
    let mut missing = Vec::new();
    'outer: for c in compounds {
        for rule in &rules.rules {
            match c.descriptors.get(&rule.field) {
                None => {
                    missing.push(MissingDescriptor {
                        compound: c.inchikey.clone(),
                        field: rule.field.clone(),
                    });
                    continue 'outer;
                }
                Some(v) if *v > rule.max => continue 'outer,
                Some(_) => {}
            }
        }
        passing.push(c.inchikey.clone());
    }
    (passing, missing)
}
