//! Classical network analytics over the loaded tables.

use std::collections::BTreeSet;

use anyhow::{Context, Result};

use herbgraph_core::embed::EmbeddingTable;
use herbgraph_core::kg::{load_knowledge_graph, SchemaConfig, TermType};
use herbgraph_core::netanalysis::{
    build_ctp_network, centrality_profile, cluster_centroids, cluster_composition,
    cooccurrence_graph, cooccurrence_matrix, enrich_pathways, forceatlas2,
    hierarchical_cluster, louvain, LayoutParams, Linkage, WGraph,
};

use super::Ctx;
use crate::csvout::{fmt_f64, Csv};
use crate::manifest::{require_artifact, ManifestBuilder};

pub fn run(ctx: &Ctx) -> Result<()> {
    let tables = ctx.ingest_tables_dir();
    require_artifact(&tables.join("chp.csv"))?;
    let (kg, _) = load_knowledge_graph(&tables, &SchemaConfig::default())
        .context("loading normalized tables (run ingest first)")?;

    let mut manifest = ManifestBuilder::new("analyze", &ctx.config.out_dir, &ctx.config_bytes);
    for name in ["chp.csv", "terms.csv", "term_edges.csv", "pairs.csv", "pathways.csv"] {
        manifest.record_input(&format!("ingest/tables/{name}"), &tables.join(name))?;
    }
    std::fs::create_dir_all(manifest.dir())?;

    // Property co-occurrence matrix plus its graph-side artifacts.
    let (tokens, matrix) = cooccurrence_matrix(&kg);
    let mut cooc_csv = Csv::new(&["token_a", "token_b", "count"]);
    for (i, a) in tokens.iter().enumerate() {
        for (j, b) in tokens.iter().enumerate() {
            if j < i {
                continue;
            }
            let count = matrix.get(i, j);
            if count > 0.0 {
                cooc_csv.row(&[a.clone(), b.clone(), fmt_f64(count)]);
            }
        }
    }
    manifest.write_output("cooccurrence.csv", &cooc_csv.into_bytes())?;

    let property_graph = cooccurrence_graph(&tokens, &matrix);
    if !property_graph.edges.is_empty() {
        let partition = louvain(&property_graph, ctx.config.seed)?;
        let mut comm_csv = Csv::new(&["node", "community", "modularity"]);
        for (i, label) in property_graph.labels.iter().enumerate() {
            comm_csv.row(&[
                label.clone(),
                partition.assignment[i].to_string(),
                fmt_f64(partition.modularity),
            ]);
        }
        manifest.write_output("communities.csv", &comm_csv.into_bytes())?;

        let layout = forceatlas2(
            &property_graph,
            &LayoutParams {
                iterations: ctx.config.analyze.layout_iterations,
                seed: ctx.config.seed,
                ..Default::default()
            },
        );
        let mut layout_csv = Csv::new(&["node", "x", "y"]);
        for (label, (x, y)) in property_graph.labels.iter().zip(&layout.positions) {
            layout_csv.row(&[label.clone(), fmt_f64(*x), fmt_f64(*y)]);
        }
        manifest.write_output("layout.csv", &layout_csv.into_bytes())?;
    }

    // Ten centralities over the term graph.
    let term_graph = WGraph::from_term_graph(&kg.terms);
    if !term_graph.edges.is_empty() {
        let table = centrality_profile(&term_graph)?;
        let mut cent_csv = Csv::new(&[
            "node", "degree", "betweenness", "closeness", "eigenvector", "pagerank",
            "harmonic", "clustering", "avg_neighbor_degree", "k_core", "load",
        ]);
        for (label, row) in table.labels.iter().zip(&table.rows) {
            cent_csv.row(&[
                label.clone(),
                fmt_f64(row.degree),
                fmt_f64(row.betweenness),
                fmt_f64(row.closeness),
                fmt_f64(row.eigenvector),
                fmt_f64(row.pagerank),
                fmt_f64(row.harmonic),
                fmt_f64(row.clustering),
                fmt_f64(row.avg_neighbor_degree),
                row.k_core.to_string(),
                fmt_f64(row.load),
            ]);
        }
        manifest.write_output("centralities.csv", &cent_csv.into_bytes())?;
    }

    // Hierarchical clustering of the Node2Vec term embedding.
    let term_table_path = ctx.config.out_dir.join("embed").join("terms.f32");
    if term_table_path.exists() && !kg.terms.nodes.is_empty() {
        manifest.record_input("embed/terms.f32", &term_table_path)?;
        let table = EmbeddingTable::read(&term_table_path)?;
        let mut ids = Vec::new();
        let mut vectors = Vec::new();
        let mut types = Vec::new();
        for (term, ty) in &kg.terms.nodes {
            if let Some(v) = table.get(term.as_str()) {
                ids.push(term.0.clone());
                vectors.push(v.to_vec());
                types.push(*ty);
            }
        }
        let k = ctx.config.analyze.cluster_k.min(vectors.len());
        if k >= 1 && !vectors.is_empty() {
            let clustering = hierarchical_cluster(&vectors, k, Linkage::Ward)?;
            let mut cl_csv = Csv::new(&["term_id", "type", "cluster"]);
            for ((id, ty), label) in ids.iter().zip(&types).zip(&clustering.labels) {
                cl_csv.row(&[id.clone(), ty.as_str().to_string(), label.to_string()]);
            }
            manifest.write_output("clusters.csv", &cl_csv.into_bytes())?;

            let mut merge_csv = Csv::new(&["step", "a", "b", "height", "size"]);
            for (step, m) in clustering.merges.iter().enumerate() {
                merge_csv.row(&[
                    step.to_string(),
                    m.a.to_string(),
                    m.b.to_string(),
                    fmt_f64(m.height),
                    m.size.to_string(),
                ]);
            }
            manifest.write_output("dendrogram.csv", &merge_csv.into_bytes())?;

            let composition = cluster_composition(&clustering, &types);
            let mut comp_csv = Csv::new(&["cluster", "type", "proportion"]);
            for (cluster, dist) in composition.iter().enumerate() {
                for ty in TermType::ALL {
                    if let Some(p) = dist.get(&ty) {
                        comp_csv.row(&[
                            cluster.to_string(),
                            ty.as_str().to_string(),
                            fmt_f64(*p),
                        ]);
                    }
                }
            }
            manifest.write_output("cluster_composition.csv", &comp_csv.into_bytes())?;

            let centroids = cluster_centroids(&clustering, &vectors);
            manifest.write_output(
                "cluster_centroids.json",
                &serde_json::to_vec_pretty(&centroids)?,
            )?;
        }
    }

    // Enrichment over the scored-pair target set, then the tripartite
    // network under the high-affinity threshold.
    if !kg.pathways.pathways.is_empty() {
        let targets: BTreeSet<_> = kg
            .pairs
            .iter()
            .filter(|p| p.affinity.is_some())
            .map(|p| p.entrez_id)
            .filter(|t| kg.pathways.universe.contains(t))
            .collect();
        if !targets.is_empty() {
            let enrichment = enrich_pathways(&targets, &kg.pathways)?;
            let mut enr_csv = Csv::new(&[
                "pathway", "overlap", "pathway_size", "draws", "universe", "p_value",
                "fold_enrichment", "q_value",
            ]);
            for r in &enrichment.rows {
                enr_csv.row(&[
                    r.pathway.0.clone(),
                    r.overlap.to_string(),
                    r.pathway_size.to_string(),
                    r.draws.to_string(),
                    r.universe.to_string(),
                    fmt_f64(r.p_value),
                    fmt_f64(r.fold_enrichment),
                    fmt_f64(r.q_value),
                ]);
            }
            manifest.write_output("enrichment.csv", &enr_csv.into_bytes())?;

            let mut enriched = kg.pathways.clone();
            let keep: BTreeSet<_> = enrichment
                .rows
                .iter()
                .filter(|r| r.q_value <= ctx.config.analyze.enrich_q_cutoff)
                .map(|r| r.pathway.clone())
                .collect();
            enriched.pathways.retain(|pid, _| keep.contains(pid));
            let network = build_ctp_network(
                &kg.pairs,
                &kg.compounds,
                &enriched,
                ctx.config.analyze.ctp_affinity_threshold,
            );
            manifest.write_output(
                "ctp_network.json",
                &serde_json::to_vec_pretty(&network)?,
            )?;
        }
    }

    manifest.finish()?;
    println!("analyze: artifacts written to {}", manifest_dir(ctx));
    Ok(())
}

fn manifest_dir(ctx: &Ctx) -> String {
    ctx.config.out_dir.join("analyze").display().to_string()
}
