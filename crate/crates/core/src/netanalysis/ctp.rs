//! Component-class -> compound -> target -> pathway network for one herb's
//! high-affinity interactions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::kg::{CompoundRecord, CompoundTargetPair, InChIKey, PathwayTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CtpNodeKind {
    ComponentClass,
    Compound,
    Target,
    Pathway,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CtpNode {
    pub kind: CtpNodeKind,
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CtpNetwork {
    pub nodes: Vec<CtpNode>,
    /// Indices into `nodes`.
    pub edges: Vec<(usize, usize)>,
}

/// Builds the tripartite chain network. Pass the already-enriched pathway
/// subset in `pt`: a pair contributes only when its affinity is strictly
/// above the threshold and its target belongs to at least one listed
/// pathway. Compounds without a class annotation group under "unclassified".
pub fn build_ctp_network(
    pairs: &[CompoundTargetPair],
    compounds: &BTreeMap<InChIKey, CompoundRecord>,
    pt: &PathwayTable,
    affinity_threshold: f64,
) -> CtpNetwork {
    let mut network = CtpNetwork::default();
    let mut index: BTreeMap<CtpNode, usize> = BTreeMap::new();
    let mut edges: std::collections::BTreeSet<(usize, usize)> = Default::default();

    let mut intern = |network: &mut CtpNetwork, node: CtpNode| -> usize {
        if let Some(&i) = index.get(&node) {
            return i;
        }
        network.nodes.push(node.clone());
        index.insert(node, network.nodes.len() - 1);
        network.nodes.len() - 1
    };

    for pair in pairs {
        let Some(affinity) = pair.affinity else { continue };
        if affinity <= affinity_threshold {
            continue;
        }
        let containing: Vec<_> = pt
            .pathways
            .iter()
            .filter(|(_, members)| members.contains(&pair.entrez_id))
            .map(|(pid, _)| pid.clone())
            .collect();
        if containing.is_empty() {
            continue;
        }
        let class = compounds
            .get(&pair.inchikey)
            .and_then(|c| c.class.clone())
            .unwrap_or_else(|| "unclassified".to_string());

        let class_node = intern(&mut network, CtpNode {
            kind: CtpNodeKind::ComponentClass,
            id: class,
        });
        let compound_node = intern(&mut network, CtpNode {
            kind: CtpNodeKind::Compound,
            id: pair.inchikey.0.clone(),
        });
        let target_node = intern(&mut network, CtpNode {
            kind: CtpNodeKind::Target,
            id: pair.entrez_id.to_string(),
        });
        edges.insert((class_node, compound_node));
        edges.insert((compound_node, target_node));
        for pid in containing {
            let pathway_node = intern(&mut network, CtpNode {
                kind: CtpNodeKind::Pathway,
                id: pid.0,
            });
            edges.insert((target_node, pathway_node));
        }
    }
    network.edges = edges.into_iter().collect();
    network
}
