//! Graph-AI pipeline for quantifying herbal-formula compatibility.
//!
//! The crate is organized along the pipeline's data flow:
//!
//! - [`kg`] loads and validates the knowledge-graph tables every other
//!   module reads (herbal pieces, formulas, compound-target pairs,
//!   taxonomy, diagnostic terms, pathways).
//! - [`embed`] produces vector representations: skip-gram embeddings for
//!   relational attributes, phylogenetic-distance PCA for origin, Node2Vec
//!   for terminology, and the assembled 90-dim herb feature matrix.
//! - [`diffuse`] expands compound-target associations by neighbor
//!   diffusion over compound feature space.
//! - [`formula`] encodes a formula as a heterogeneous graph with real herb
//!   nodes and virtual medicinal-property nodes.
//! - [`gnn`] implements GAT/HGNN/GTN forward and backward passes, training,
//!   dataset splits, grid search, and evaluation metrics.
//! - [`interpret`] extracts attention matrices and measures feature/node
//!   contributions by nullification.
//! - [`netanalysis`] holds the classical network analytics: co-occurrence,
//!   Louvain, ForceAtlas2, centralities, hierarchical clustering, and
//!   pathway enrichment.
//! - [`fixture`] generates the synthetic planted-rule corpus used by tests
//!   and the CLI so nothing depends on the full public dataset.


pub mod diffuse;
pub mod embed;
pub mod fixture;
pub mod formula;
pub mod gnn;
pub mod interpret;




pub mod io;
pub mod kg;
pub mod linalg;
pub mod netanalysis;

