//! Herb-role quantification: herb-to-herb attention matrices, feature and
//! node nullification, and corpus-level frequency/attention statistics.
//!
//! The encoding has no direct herb-herb edges, so herb-to-herb attention is
//! composed through shared virtual nodes: mass from herb i into virtual v
//! times mass from v into herb j, plus the direct self-loop term, averaged
//! over layers and heads and renormalized per row. Ablations re-score
//! encoded graphs at inference; nothing is retrained.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::FeatureSegment;
use crate::formula::{FormulaGraph, NodeKind};
use crate::gnn::{
    metrics::score_split,
    model::{Attention, GnnModel, Mode},
    Arch, GnnError, MetricsReport, Real,
};
use crate::kg::{FormulaId, HerbId, NUM_LABELS};

#[derive(Debug, Error)]
pub enum InterpretError {
    #[error("attention matrices are defined for GAT; {0:?} exports raw tensors instead")]
    ArchUnsupported(Arch),
    #[error(transparent)]
    Gnn(#[from] GnnError),
}

/// Row-stochastic herb-to-herb attention for one formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionMatrix {
    pub formula_id: FormulaId,
    /// Herb ids in node order.
    pub herbs: Vec<HerbId>,
    /// Row-major n x n; row = herb exerting attention, column = receiving.
    pub weights: Vec<f64>,
}

impl AttentionMatrix {
    pub fn n(&self) -> usize {
        self.herbs.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.herbs.len() + j]
    }

    /// Mean attention each herb receives (column means).
    pub fn received(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|j| (0..n).map(|i| self.get(i, j)).sum::<f64>() / n as f64)
            .collect()
    }

    /// Mean attention each herb emits (row means).
    pub fn emitted(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j)).sum::<f64>() / n as f64)
            .collect()
    }
}

/// Composes herb-to-herb attention through shared virtual nodes.
pub fn attention_matrix<F: Real>(
    model: &GnnModel<F>,
    g: &FormulaGraph,
) -> Result<AttentionMatrix, InterpretError> {
    if model.config.arch != Arch::Gat {
        return Err(InterpretError::ArchUnsupported(model.config.arch));
    }
    let forward = model.forward(g, Mode::Eval)?;
    let chp = g.chp_indices();
    let n_nodes = g.nodes.len();
    let n = chp.len();

    let mut accumulated = vec![0.0f64; n * n];
    let mut n_tensors = 0usize;
    for attn in &forward.attention {
        let Attention::Edges { entries, .. } = attn else {
            continue;
        };
        // alpha[dst][src]
        let mut alpha = vec![0.0f64; n_nodes * n_nodes];
        for (dst, src, a) in entries {
            alpha[dst * n_nodes + src] = a.to_f64();
        }
        for (ci, &node_i) in chp.iter().enumerate() {
            for (cj, &node_j) in chp.iter().enumerate() {
                let mut mass = 0.0;
                for v in 0..n_nodes {
                    if g.nodes[v].kind.is_virtual() {
                        mass += alpha[v * n_nodes + node_i] * alpha[node_j * n_nodes + v];
                    }
                }
                if ci == cj {
                    mass += alpha[node_i * n_nodes + node_i];
                }
                accumulated[ci * n + cj] += mass;
            }
        }
        n_tensors += 1;
    }
    for w in &mut accumulated {
        *w /= n_tensors as f64;
    }
    // Renormalize rows.
    for i in 0..n {
        let sum: f64 = accumulated[i * n..(i + 1) * n].iter().sum();
        if sum > 0.0 {
            for w in &mut accumulated[i * n..(i + 1) * n] {
                *w /= sum;
            }
        } else {
            accumulated[i * n + i] = 1.0;
        }
    }

    Ok(AttentionMatrix {
        formula_id: g.formula_id.clone(),
        herbs: chp
            .iter()
            .map(|&i| HerbId::new(g.nodes[i].key.clone()))
            .collect(),
        weights: accumulated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub formula_id: FormulaId,
    pub label: usize,
    pub baseline_score: f64,
    pub ablated_score: f64,
}

/// Before/after evaluation of a nullification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub what: String,
    pub baseline: MetricsReport,
    pub ablated: MetricsReport,
    /// baseline AUC - ablated AUC, per label; positive means degradation.
    pub delta_auc: [f64; NUM_LABELS],
    pub scatter: Vec<ScatterPoint>,
}

fn delta(
    what: String,
    baseline: MetricsReport,
    ablated: MetricsReport,
    scatter: Vec<ScatterPoint>,
) -> DeltaReport {
    let mut delta_auc = [0.0; NUM_LABELS];
    for k in 0..NUM_LABELS {
        delta_auc[k] = baseline.labels[k].auc - ablated.labels[k].auc;
    }
    DeltaReport {
        what,
        baseline,
        ablated,
        delta_auc,
        scatter,
    }
}

/// Zeroes the group's attribute columns on every node of every graph.
pub fn nullify_feature(split: &[FormulaGraph], group: FeatureSegment) -> Vec<FormulaGraph> {
    let range = group.range();
    split
        .iter()
        .map(|g| {
            let mut g = g.clone();
            for node in &mut g.nodes {
                for c in range.clone() {
                    node.attr[c] = 0.0;
                }
            }
            g
        })
        .collect()
}

/// Zeroes every attribute of nodes of the kind; topology unchanged.
pub fn mask_nodes(split: &[FormulaGraph], kind: NodeKind) -> Vec<FormulaGraph> {
    split
        .iter()
        .map(|g| {
            let mut g = g.clone();
            for node in &mut g.nodes {
                if node.kind == kind {
                    for a in &mut node.attr {
                        *a = 0.0;
                    }
                }
            }
            g
        })
        .collect()
}

pub fn ablate_feature<F: Real>(
    model: &GnnModel<F>,
    split: &[FormulaGraph],
    group: FeatureSegment,
    threshold: f64,
) -> Result<DeltaReport, GnnError> {
    let ablated_split = nullify_feature(split, group);
    let baseline_rows = score_split(model, split)?;
    let ablated_rows = score_split(model, &ablated_split)?;
    let scatter = scatter_points(split, &baseline_rows, &ablated_rows);
    Ok(delta(
        format!("feature:{}", group.as_str()),
        crate::gnn::metrics::metrics_from_scores(&baseline_rows, threshold),
        crate::gnn::metrics::metrics_from_scores(&ablated_rows, threshold),
        scatter,
    ))
}

pub fn mask_node_kind<F: Real>(
    model: &GnnModel<F>,
    split: &[FormulaGraph],
    kind: NodeKind,
    threshold: f64,
) -> Result<DeltaReport, GnnError> {
    let masked_split = mask_nodes(split, kind);
    let baseline_rows = score_split(model, split)?;
    let masked_rows = score_split(model, &masked_split)?;
    let scatter = scatter_points(split, &baseline_rows, &masked_rows);
    Ok(delta(
        format!("node:{}", kind.as_str()),
        crate::gnn::metrics::metrics_from_scores(&baseline_rows, threshold),
        crate::gnn::metrics::metrics_from_scores(&masked_rows, threshold),
        scatter,
    ))
}

type ScoreRows = [([f64; NUM_LABELS], [bool; NUM_LABELS])];

fn scatter_points(
    split: &[FormulaGraph],
    baseline: &ScoreRows,
    ablated: &ScoreRows,
) -> Vec<ScatterPoint> {
    let mut out = Vec::with_capacity(split.len() * NUM_LABELS);
    for ((g, (b, _)), (a, _)) in split.iter().zip(baseline).zip(ablated) {
        for label in 0..NUM_LABELS {
            out.push(ScatterPoint {
                formula_id: g.formula_id.clone(),
                label,
                baseline_score: b[label],
                ablated_score: a[label],
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HerbStat {
    pub herb: HerbId,
    /// Number of formulas containing the herb.
    pub frequency: usize,
    /// Column-mean attention received, averaged over containing formulas.
    pub mean_received_attention: f64,
    /// Row-mean attention emitted, averaged over containing formulas.
    pub mean_emitted_attention: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStat {
    pub a: HerbId,
    pub b: HerbId,
    pub co_occurrence: usize,
    /// Symmetrized (M[a][b] + M[b][a]) / 2, averaged over co-containing
    /// formulas.
    pub mean_attention: f64,
}

/// Frequency and attention statistics over a formula corpus, sorted by
/// descending frequency with id tie-breaks.
pub fn corpus_attention_stats<F: Real>(
    model: &GnnModel<F>,
    graphs: &[FormulaGraph],
) -> Result<(Vec<HerbStat>, Vec<PairStat>), InterpretError> {
    let mut herb_acc: BTreeMap<HerbId, (usize, f64, f64)> = BTreeMap::new();
    let mut pair_acc: BTreeMap<(HerbId, HerbId), (usize, f64)> = BTreeMap::new();

    for g in graphs {
        let m = attention_matrix(model, g)?;
        let received = m.received();
        let emitted = m.emitted();
        for (idx, herb) in m.herbs.iter().enumerate() {
            let e = herb_acc.entry(herb.clone()).or_insert((0, 0.0, 0.0));
            e.0 += 1;
            e.1 += received[idx];
            e.2 += emitted[idx];
        }
        for i in 0..m.n() {
            for j in (i + 1)..m.n() {
                let sym = (m.get(i, j) + m.get(j, i)) / 2.0;
                let (a, b) = if m.herbs[i] < m.herbs[j] {
                    (m.herbs[i].clone(), m.herbs[j].clone())
                } else {
                    (m.herbs[j].clone(), m.herbs[i].clone())
                };
                let e = pair_acc.entry((a, b)).or_insert((0, 0.0));
                e.0 += 1;
                e.1 += sym;
            }
        }
    }

    let mut herbs: Vec<HerbStat> = herb_acc
        .into_iter()
        .map(|(herb, (freq, recv, emit))| HerbStat {
            herb,
            frequency: freq,
            mean_received_attention: recv / freq as f64,
            mean_emitted_attention: emit / freq as f64,
        })
        .collect();
    herbs.sort_by(|x, y| y.frequency.cmp(&x.frequency).then_with(|| x.herb.cmp(&y.herb)));

    let mut pairs: Vec<PairStat> = pair_acc
        .into_iter()
        .map(|((a, b), (count, total))| PairStat {
            a,
            b,
            co_occurrence: count,
            mean_attention: total / count as f64,
        })
        .collect();
    pairs.sort_by(|x, y| {
        y.co_occurrence
            .cmp(&x.co_occurrence)
            .then_with(|| (&x.a, &x.b).cmp(&(&y.a, &y.b)))
    });
    Ok((herbs, pairs))
}

/// Per-label AUC ranking across single-feature nullifications, baseline
/// evaluated once; convenience for the report verb.
pub fn ablation_sweep<F: Real>(
    model: &GnnModel<F>,
    split: &[FormulaGraph],
    threshold: f64,
) -> Result<Vec<DeltaReport>, GnnError> {
    let mut out = Vec::new();
    for group in FeatureSegment::ALL {
        out.push(ablate_feature(model, split, group, threshold)?);
    }
    for kind in [
        NodeKind::Chp,
        NodeKind::TherapeuticNature,
        NodeKind::MedicinalFlavor,
        NodeKind::MeridianTropism,
    ] {
        out.push(mask_node_kind(model, split, kind, threshold)?);
    }
    Ok(out)
}

pub use crate::gnn::metrics::metrics_from_scores;
