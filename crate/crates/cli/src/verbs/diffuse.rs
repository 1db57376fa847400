//! Neighbor-diffusion of compound-target pairs plus the coverage report and
//! drug-likeness screen.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{Context, Result};

use herbgraph_core::diffuse::{
    coverage_report, diffuse_pairs, filter_druglike, knn_neighbors, DiffusionConfig, RuleSet,
};
use herbgraph_core::kg::{load_knowledge_graph, SchemaConfig};

use super::Ctx;
use crate::csvout::{fmt_f64, Csv};
use crate::manifest::{require_artifact, ManifestBuilder};

/// Flag overrides mirroring the documented one-shot CLI form; each defaults
/// to the pipeline artifact.
pub struct DiffuseArgs {
    pub features: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub k: Option<usize>,
    pub threshold: Option<f64>,
    pub out: Option<PathBuf>,
}

pub fn run(ctx: &Ctx, args: &DiffuseArgs) -> Result<()> {
    let tables = ctx.ingest_tables_dir();
    let features_path = args
        .features
        .clone()
        .unwrap_or_else(|| tables.join("compound_features.f32"));
    let pairs_path = args.pairs.clone().unwrap_or_else(|| tables.join("pairs.csv"));
    require_artifact(&features_path)?;
    require_artifact(&pairs_path)?;

    // Load through the kg loader so the pairs table gets the same parsing
    // and integrity checks as everywhere else.
    let schema = SchemaConfig {
        chp: None,
        formulas: None,
        formula_members: None,
        compounds: Some("compounds.csv".into()),
        compound_features: Some(
            features_path.file_name().unwrap().to_string_lossy().into_owned(),
        ),
        pairs: Some(pairs_path.file_name().unwrap().to_string_lossy().into_owned()),
        taxonomy: None,
        terms: None,
        term_edges: None,
        pathways: None,
        property_vocab: None,
    };
    let dir = features_path.parent().context("feature path has no parent")?;
    let (kg, _) = load_knowledge_graph(dir, &schema)?;
    let features = kg
        .compound_features
        .as_ref()
        .context("compound features missing after load")?;

    let cfg = DiffusionConfig {
        k: args.k.unwrap_or(ctx.config.diffuse.k),
        metric: ctx.config.diffuse.metric()?,
        affinity_threshold: args
            .threshold
            .unwrap_or(ctx.config.diffuse.affinity_threshold),
        reduce_dims: ctx.config.diffuse.reduce_dims,
    };

    let mut manifest = ManifestBuilder::new("diffuse", &ctx.config.out_dir, &ctx.config_bytes);
    manifest.record_input("compound_features.f32", &features_path)?;
    manifest.record_input("pairs.csv", &pairs_path)?;
    std::fs::create_dir_all(manifest.dir())?;

    let index = knn_neighbors(features, &cfg)?;
    let candidates = diffuse_pairs(&kg.pairs, &index);

    let mut pairs_csv = Csv::new(&["inchikey", "entrez_id", "affinity", "provenance"]);
    for p in &candidates {
        pairs_csv.row(&[
            p.inchikey.0.clone(),
            p.entrez_id.to_string(),
            p.affinity.map(fmt_f64).unwrap_or_default(),
            p.provenance.as_str().to_string(),
        ]);
    }
    let out_name = args
        .out
        .as_ref()
        .and_then(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "pairs_out.csv".to_string());
    let written = manifest.write_output(&out_name, &pairs_csv.into_bytes())?;
    if let Some(out) = &args.out {
        if out != &written {
            std::fs::create_dir_all(out.parent().unwrap_or_else(|| std::path::Path::new(".")))?;
            std::fs::copy(&written, out)?;
        }
    }

    // Coverage over the scored (recorded) pairs; the pre-reduction flag is
    // carried so numbers are not conflated with raw-space runs.
    let compound_universe: BTreeSet<_> = features.row_index.iter().cloned().collect();
    let target_universe: BTreeSet<_> = kg.pairs.iter().map(|p| p.entrez_id).collect();
    let coverage = coverage_report(
        &kg.pairs,
        &compound_universe,
        &target_universe,
        &ctx.config.diffuse.thresholds,
    );
    let mut cov_csv = Csv::new(&[
        "threshold", "n_compounds", "compound_cov", "n_targets", "target_cov", "n_pairs",
        "mean_targets_per_compound", "pca_reduced",
    ]);
    for r in &coverage.rows {
        cov_csv.row(&[
            fmt_f64(r.threshold),
            r.n_compounds.to_string(),
            fmt_f64(r.compound_coverage),
            r.n_targets.to_string(),
            fmt_f64(r.target_coverage),
            r.n_pairs.to_string(),
            fmt_f64(r.mean_targets_per_compound),
            cfg.reduce_dims.map(|d| d.to_string()).unwrap_or_default(),
        ]);
    }
    manifest.write_output("coverage.csv", &cov_csv.into_bytes())?;

    let compounds: Vec<_> = kg.compounds.values().cloned().collect();
    let (druglike, missing) = filter_druglike(&compounds, &RuleSet::default());
    let mut dl_csv = Csv::new(&["inchikey"]);
    for key in &druglike {
        dl_csv.row(&[key.0.clone()]);
    }
    manifest.write_output("druglike.csv", &dl_csv.into_bytes())?;
    if !missing.is_empty() {
        manifest.write_output(
            "druglike_missing.json",
            &serde_json::to_vec_pretty(&missing)?,
        )?;
    }
    manifest.finish()?;

    println!(
        "diffuse: {} candidates from {} recorded pairs (k={}, {:?}); {} drug-like compounds",
        candidates.len(),
        kg.pairs.len(),
        cfg.k,
        cfg.metric,
        druglike.len()
    );
    Ok(())
}
