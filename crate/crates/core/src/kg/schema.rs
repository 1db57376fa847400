//! File-name schema for a knowledge-graph directory.
//!
//! The public dataset does not publish a fixed column layout, so the table
//! names here are this artifact's own contract; a config file can remap any
//! of them. Setting an entry to `None` declares the table absent, which
//! loads as empty instead of raising `MissingFile`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    pub chp: Option<String>,
    pub formulas: Option<String>,
    pub formula_members: Option<String>,
    pub compounds: Option<String>,
    /// Binary f32 matrix with a `.json` sidecar `{rows, cols, row_index}`.
    pub compound_features: Option<String>,
    pub pairs: Option<String>,
    pub taxonomy: Option<String>,
    pub terms: Option<String>,
    pub term_edges: Option<String>,
    pub pathways: Option<String>,
    /// Controlled vocabulary `(kind, token)` for natures/flavors/meridians.
    pub property_vocab: Option<String>,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig {
            chp: Some("chp.csv".into()),
            formulas: Some("formulas.csv".into()),
            formula_members: Some("formula_members.csv".into()),
            compounds: Some("compounds.csv".into()),
            compound_features: Some("compound_features.f32".into()),
            pairs: Some("pairs.csv".into()),
            taxonomy: Some("taxonomy.csv".into()),
            terms: Some("terms.csv".into()),
            term_edges: Some("term_edges.csv".into()),
            pathways: Some("pathways.csv".into()),
            property_vocab: Some("property_vocab.csv".into()),
        }
    }
}

impl SchemaConfig {
    /// A schema containing only the herb/formula tables, for small fixtures.
    pub fn minimal() -> Self {
        SchemaConfig {
            chp: Some("chp.csv".into()),
            formulas: Some("formulas.csv".into()),
            formula_members: Some("formula_members.csv".into()),
            compounds: None,
            compound_features: None,
            pairs: None,
            taxonomy: None,
            terms: None,
            term_edges: None,
            pathways: None,
            property_vocab: None,
        }
    }
}
