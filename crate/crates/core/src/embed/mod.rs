//! Vector representations for herbs and terms.
//!
//! Three skip-gram corpora (properties, efficacy, combination), a taxonomy
//! path-length distance matrix reduced with PCA for origin features, Node2Vec
//! over the diagnostic-term graph, and the assembled 90-dim herb feature
//! matrix with its frozen segment layout.

mod corpus;
mod features;
mod node2vec;
mod phylo;
mod skipgram;
mod table;

pub use corpus::{build_corpora, CorpusKind, CorpusSet};
pub use features::{
    assemble_chp_features, phylo_pca_scores, FeatureMatrix, FeatureSegment, MissingFeature,
    SegmentLayout, FEATURE_DIM, NODE_ATTR_DIM,
};
pub use node2vec::{node2vec_embed, Node2VecConfig};
pub use phylo::{phylo_distances, DistanceMatrix};
pub use skipgram::{train_skipgram, SkipGramConfig, SkipGramStats};
pub use table::EmbeddingTable;

use thiserror::Error;

use crate::kg::TaxId;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("corpus {0:?} is empty")]
    EmptyCorpus(CorpusKind),
    #[error("vocabulary has {0} tokens, need at least 2")]
    VocabularyTooSmall(usize),
    #[error("leaf {0} does not resolve to a taxonomy root")]
    UnresolvedLeaf(TaxId),
    #[error("leaves lie in disjoint taxonomy trees; offending pairs: {0:?}")]
    DisjointForest(Vec<(TaxId, TaxId)>),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error(transparent)]
    Io(#[from] crate::io::IoError),
    #[error("stored segment layout does not match this build: {0}")]
    LayoutMismatch(String),
}
