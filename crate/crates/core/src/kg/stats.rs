//! Corpus-level formula statistics: membership histogram and dose ratios.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::types::KnowledgeGraph;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no formula has a known dose")]
    NoDosedFormulas,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    /// members-per-formula -> number of formulas.
    pub members_histogram: BTreeMap<usize, usize>,
    pub mean_members: f64,
    /// One ratio per dosed member: dose / sum of the formula's known doses.
    /// Members with unknown doses contribute nothing, to numerator or
    /// denominator.
    pub mean_dose_ratio: f64,
    pub n_formulas: usize,
    pub n_dose_ratios: usize,
}

pub fn formula_stats(kg: &KnowledgeGraph) -> Result<CorpusStats, StatsError> {
    let mut members_histogram: BTreeMap<usize, usize> = BTreeMap::new();
    let mut member_total = 0usize;
    let mut ratio_sum = 0.0;
    let mut ratio_count = 0usize;

    for formula in kg.formulas.values() {
        *members_histogram.entry(formula.members.len()).or_default() += 1;
        member_total += formula.members.len();

        let known: Vec<f64> = formula.members.iter().filter_map(|m| m.dose_g).collect();
        let total: f64 = known.iter().sum();
        if total > 0.0 {
            for dose in &known {
                ratio_sum += dose / total;
                ratio_count += 1;
            }
        }
    }

    if ratio_count == 0 {
        return Err(StatsError::NoDosedFormulas);
    }
    let n_formulas = kg.formulas.len();
    Ok(CorpusStats {
        members_histogram,
        mean_members: member_total as f64 / n_formulas as f64,
        mean_dose_ratio: ratio_sum / ratio_count as f64,
        n_formulas,
        n_dose_ratios: ratio_count,
    })
}
