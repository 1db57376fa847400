//! Token corpora extracted from the knowledge graph.

use serde::{Deserialize, Serialize};

use super::EmbedError;
use crate::kg::KnowledgeGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorpusKind {
    Property,
    Efficacy,
    Combination,
}

/// One sentence per herb (property, efficacy) or per formula (combination).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorpusSet {
    pub property: Vec<Vec<String>>,
    pub efficacy: Vec<Vec<String>>,
    pub combination: Vec<Vec<String>>,
}

impl CorpusSet {
    pub fn get(&self, kind: CorpusKind) -> &[Vec<String>] {
        match kind {
            CorpusKind::Property => &self.property,
            CorpusKind::Efficacy => &self.efficacy,
            CorpusKind::Combination => &self.combination,
        }
    }
}

/// Builds the three training corpora.
///
/// Property sentences list a herb's nature, flavor, and meridian tokens in
/// source order; efficacy sentences are whole controlled-vocabulary phrases;
/// combination sentences are the member herb ids of one formula in source
/// row order, so co-occurrence within a formula is the training signal.
pub fn build_corpora(kg: &KnowledgeGraph) -> Result<CorpusSet, EmbedError> {
    let mut set = CorpusSet::default();
    for herb in kg.herbs.values() {
        let props: Vec<String> = KnowledgeGraph::property_tokens(herb)
            .into_iter()
            .map(str::to_string)
            .collect();
        if !props.is_empty() {
            set.property.push(props);
        }
        if !herb.efficacy.is_empty() {
            set.efficacy.push(herb.efficacy.clone());
        }
    }
    for formula in kg.formulas.values() {
        if formula.members.is_empty() {
            continue;
        }
        set.combination
            .push(formula.members.iter().map(|m| m.herb.0.clone()).collect());
    }

    for kind in [CorpusKind::Property, CorpusKind::Efficacy, CorpusKind::Combination] {
        if set.get(kind).is_empty() {
            return Err(EmbedError::EmptyCorpus(kind));
        }
    }
    Ok(set)
}
