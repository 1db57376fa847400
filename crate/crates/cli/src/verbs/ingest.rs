//! Load, validate, and normalize the knowledge-graph tables.

use anyhow::{Context, Result};
use serde::Serialize;

use herbgraph_core::fixture::{planted_knowledge_graph, PlantedConfig};
use herbgraph_core::kg::{
    formula_stats, load_knowledge_graph, validate, write_knowledge_graph, SchemaConfig,
};

use super::Ctx;
use crate::manifest::ManifestBuilder;

#[derive(Serialize)]
struct StatsOut {
    n_formulas: usize,
    mean_members: Option<f64>,
    mean_dose_ratio: Option<f64>,
    members_histogram: Vec<(usize, usize)>,
}

/// `fixture = Some("planted")` generates the synthetic corpus into the data
/// directory first, so the rest of the pipeline runs without external data.
pub fn run(ctx: &Ctx, fixture: Option<&str>) -> Result<()> {
    let schema = SchemaConfig::default();
    if let Some(kind) = fixture {
        anyhow::ensure!(kind == "planted", "unknown fixture {kind:?} (expected \"planted\")");
        let kg = planted_knowledge_graph(&PlantedConfig {
            seed: ctx.config.seed,
            ..Default::default()
        });
        std::fs::create_dir_all(&ctx.config.data_dir)?;
        write_knowledge_graph(&kg, &ctx.config.data_dir, &schema)
            .context("writing planted fixture")?;
    }

    let (kg, load_report) = load_knowledge_graph(&ctx.config.data_dir, &schema)?;
    let validation = validate(&kg);
    let stats = match formula_stats(&kg) {
        Ok(s) => StatsOut {
            n_formulas: s.n_formulas,
            mean_members: Some(s.mean_members),
            mean_dose_ratio: Some(s.mean_dose_ratio),
            members_histogram: s.members_histogram.into_iter().collect(),
        },
        Err(_) => StatsOut {
            n_formulas: kg.formulas.len(),
            mean_members: None,
            mean_dose_ratio: None,
            members_histogram: vec![],
        },
    };

    let mut manifest = ManifestBuilder::new("ingest", &ctx.config.out_dir, &ctx.config_bytes);
    for name in data_file_names(&schema) {
        let path = ctx.config.data_dir.join(&name);
        if path.exists() {
            manifest.record_input(&format!("data/{name}"), &path)?;
        }
    }

    // Normalized re-export: the tables every downstream verb reads.
    let tables_dir = manifest.dir().join("tables");
    std::fs::create_dir_all(&tables_dir)?;
    write_knowledge_graph(&kg, &tables_dir, &schema)?;
    for name in data_file_names(&schema) {
        let path = tables_dir.join(&name);
        if path.exists() {
            manifest.record_output(&format!("tables/{name}"))?;
        }
    }
    let sidecar = tables_dir.join("compound_features.f32.json");
    if sidecar.exists() {
        manifest.record_output("tables/compound_features.f32.json")?;
    }

    manifest.write_output("load_report.json", &serde_json::to_vec_pretty(&load_report)?)?;
    manifest.write_output("validation.json", &serde_json::to_vec_pretty(&validation)?)?;
    manifest.write_output("stats.json", &serde_json::to_vec_pretty(&stats)?)?;
    manifest.finish()?;

    println!(
        "ingest: {} herbs, {} formulas, {} pairs, {} load issues, {} validation violations",
        kg.herbs.len(),
        kg.formulas.len(),
        kg.pairs.len(),
        load_report.issues.len(),
        validation.violations.len()
    );
    Ok(())
}

fn data_file_names(schema: &SchemaConfig) -> Vec<String> {
    [
        &schema.chp,
        &schema.formulas,
        &schema.formula_members,
        &schema.compounds,
        &schema.compound_features,
        &schema.pairs,
        &schema.taxonomy,
        &schema.terms,
        &schema.term_edges,
        &schema.pathways,
        &schema.property_vocab,
    ]
    .into_iter()
    .flatten()
    .cloned()
    .collect()
}
