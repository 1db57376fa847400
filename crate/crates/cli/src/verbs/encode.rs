//! Encode every formula as a virtual-node graph.

use anyhow::{Context, Result};

use herbgraph_core::embed::FeatureMatrix;
use herbgraph_core::formula::{encode_corpus, write_jsonl};
use herbgraph_core::kg::{load_knowledge_graph, SchemaConfig};

use super::Ctx;
use crate::manifest::{require_artifact, ManifestBuilder};

pub fn run(ctx: &Ctx) -> Result<()> {
    let tables = ctx.ingest_tables_dir();
    let features_path = ctx.config.out_dir.join("embed").join("chp_features.f32");
    require_artifact(&tables.join("chp.csv"))?;
    require_artifact(&features_path)?;

    let (kg, _) = load_knowledge_graph(&tables, &SchemaConfig::default())
        .context("loading normalized tables (run ingest first)")?;
    let features = FeatureMatrix::read(&features_path)?;

    let mut manifest = ManifestBuilder::new("encode", &ctx.config.out_dir, &ctx.config_bytes);
    manifest.record_input("ingest/tables/chp.csv", &tables.join("chp.csv"))?;
    manifest.record_input("ingest/tables/formula_members.csv", &tables.join("formula_members.csv"))?;
    manifest.record_input("embed/chp_features.f32", &features_path)?;
    std::fs::create_dir_all(manifest.dir())?;

    let graphs = encode_corpus(&kg, &features)?;
    write_jsonl(&graphs, &manifest.dir().join("graphs.jsonl"))?;
    manifest.record_output("graphs.jsonl")?;
    manifest.finish()?;

    let nodes: usize = graphs.iter().map(|g| g.nodes.len()).sum();
    let edges: usize = graphs.iter().map(|g| g.edges.len()).sum();
    println!("encode: {} graphs, {nodes} nodes, {edges} edges", graphs.len());
    Ok(())
}
