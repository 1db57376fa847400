//! Classical network analytics over property and term graphs: co-occurrence
//! counting, Louvain communities, ForceAtlas2 layout, ten node centralities,
//! Ward hierarchical clustering, hypergeometric pathway enrichment, and the
//! affinity-filtered tripartite network.

mod centrality;
mod cluster;
mod cooccur;
mod ctp;
mod enrich;
mod graph;
mod layout;
mod louvain;

pub use centrality::{centrality_profile, CentralityTable, NodeCentrality};
pub use cluster::{
    cluster_centroids, cluster_composition, hierarchical_cluster, Clustering, Linkage, Merge,
};
pub use cooccur::{cooccurrence_graph, cooccurrence_matrix};
pub use ctp::{build_ctp_network, CtpNetwork, CtpNode, CtpNodeKind};
pub use enrich::{enrich_pathways, EnrichmentRow, EnrichmentTable};
pub use graph::WGraph;
pub use layout::{forceatlas2, LayoutParams, LayoutResult};
pub use louvain::{brute_force_best_partition, louvain, modularity, Partition};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("power iteration did not converge within {0} iterations")]
    ConvergenceFailure(usize),
    #[error("k = {k} exceeds the {n} points")]
    KTooLarge { k: usize, n: usize },
    #[error("empty target set")]
    EmptyTargetSet,
    #[error("target {0} is not in the pathway universe")]
    TargetOutsideUniverse(crate::kg::EntrezId),
}
