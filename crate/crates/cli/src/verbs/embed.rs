//! Train the three skip-gram tables, the term Node2Vec embedding, and
//! assemble the herb feature matrix.

use anyhow::{Context, Result};

use herbgraph_core::embed::{
    assemble_chp_features, build_corpora, node2vec_embed, phylo_pca_scores, train_skipgram,
    Node2VecConfig,
};
use herbgraph_core::kg::{load_knowledge_graph, SchemaConfig};

use super::Ctx;
use crate::manifest::{require_artifact, ManifestBuilder};

pub fn run(ctx: &Ctx) -> Result<()> {
    let tables = ctx.ingest_tables_dir();
    require_artifact(&tables.join("chp.csv"))?;
    let (kg, _) = load_knowledge_graph(&tables, &SchemaConfig::default())
        .context("loading normalized tables (run ingest first)")?;

    let mut manifest = ManifestBuilder::new("embed", &ctx.config.out_dir, &ctx.config_bytes);
    for name in ["chp.csv", "formulas.csv", "formula_members.csv", "terms.csv", "term_edges.csv", "taxonomy.csv"] {
        manifest.record_input(&format!("ingest/tables/{name}"), &tables.join(name))?;
    }
    std::fs::create_dir_all(manifest.dir())?;

    let seed = ctx.config.seed;
    let corpora = build_corpora(&kg)?;
    let e = &ctx.config.embed;
    let (property, property_stats) =
        train_skipgram(&corpora.property, &e.property.to_core(seed))?;
    let (efficacy, efficacy_stats) =
        train_skipgram(&corpora.efficacy, &e.efficacy.to_core(seed.wrapping_add(1)))?;
    let (combination, combination_stats) =
        train_skipgram(&corpora.combination, &e.combination.to_core(seed.wrapping_add(2)))?;

    let node2vec_cfg = Node2VecConfig {
        walks_per_node: e.node2vec_walks_per_node,
        walk_length: e.node2vec_walk_length,
        p: e.node2vec_p,
        q: e.node2vec_q,
        skipgram: herbgraph_core::embed::SkipGramConfig {
            window: 10,
            dim: e.node2vec_dim,
            seed: seed.wrapping_add(3),
            ..Default::default()
        },
    };
    let terms = node2vec_embed(&kg.terms, &node2vec_cfg)?;

    let pca_scores = phylo_pca_scores(&kg)?;
    let (features, missing) =
        assemble_chp_features(&kg, &property, &efficacy, &combination, &pca_scores);

    property.write(&manifest.dir().join("property.f32"))?;
    efficacy.write(&manifest.dir().join("efficacy.f32"))?;
    combination.write(&manifest.dir().join("combination.f32"))?;
    terms.write(&manifest.dir().join("terms.f32"))?;
    features.write(&manifest.dir().join("chp_features.f32"))?;
    for name in [
        "property.f32",
        "property.f32.json",
        "efficacy.f32",
        "efficacy.f32.json",
        "combination.f32",
        "combination.f32.json",
        "terms.f32",
        "terms.f32.json",
        "chp_features.f32",
        "chp_features.f32.json",
    ] {
        manifest.record_output(name)?;
    }

    #[derive(serde::Serialize)]
    struct EmbedSummary {
        property_epoch_loss: Vec<f64>,
        efficacy_epoch_loss: Vec<f64>,
        combination_epoch_loss: Vec<f64>,
        missing: Vec<herbgraph_core::embed::MissingFeature>,
    }
    manifest.write_output(
        "summary.json",
        &serde_json::to_vec_pretty(&EmbedSummary {
            property_epoch_loss: property_stats.epoch_loss,
            efficacy_epoch_loss: efficacy_stats.epoch_loss,
            combination_epoch_loss: combination_stats.epoch_loss,
            missing,
        })?,
    )?;
    manifest.finish()?;

    println!(
        "embed: {} herbs featurized, tables {}/{}/{} tokens, {} term vectors",
        features.len(),
        property.len(),
        efficacy.len(),
        combination.len(),
        terms.len()
    );
    Ok(())
}
