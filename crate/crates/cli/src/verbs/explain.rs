//! Interpretability artifacts: herb/pair attention statistics, per-formula
//! attention matrices, and the nullification sweep.

use anyhow::{bail, Result};

use herbgraph_core::gnn::{Arch, GnnModel, Real};
use herbgraph_core::interpret::{ablation_sweep, attention_matrix, corpus_attention_stats};

use super::eval::load_splits;
use super::Ctx;
use crate::csvout::{fmt_f64, Csv};
use crate::manifest::{require_artifact, ManifestBuilder};

pub fn run(ctx: &Ctx) -> Result<()> {
    match ctx.config.train.precision.as_str() {
        "f64" => run_typed::<f64>(ctx),
        "f32" => run_typed::<f32>(ctx),
        other => bail!("unknown precision {other:?} (f32|f64)"),
    }
}

fn run_typed<F: Real>(ctx: &Ctx) -> Result<()> {
    let model_path = ctx.config.out_dir.join("train").join("model.ckpt");
    require_artifact(&model_path)?;
    let model: GnnModel<F> = GnnModel::load(&model_path)?;
    let (_, _, test_set) = load_splits(ctx)?;
    anyhow::ensure!(!test_set.is_empty(), "test split is empty; nothing to explain");

    let mut manifest = ManifestBuilder::new("explain", &ctx.config.out_dir, &ctx.config_bytes);
    manifest.record_input("train/model.ckpt", &model_path)?;
    std::fs::create_dir_all(manifest.dir())?;

    let threshold = ctx.config.eval.threshold;
    let sweep = ablation_sweep(&model, &test_set, threshold)?;
    let mut delta_csv = Csv::new(&[
        "ablation", "label", "baseline_auc", "ablated_auc", "delta_auc",
    ]);
    for report in &sweep {
        for label in 0..report.delta_auc.len() {
            delta_csv.row(&[
                report.what.clone(),
                label.to_string(),
                fmt_f64(report.baseline.labels[label].auc),
                fmt_f64(report.ablated.labels[label].auc),
                fmt_f64(report.delta_auc[label]),
            ]);
        }
    }
    manifest.write_output("delta_report.csv", &delta_csv.into_bytes())?;

    let mut scatter_csv = Csv::new(&[
        "ablation", "formula_id", "label", "baseline_score", "ablated_score",
    ]);
    for report in &sweep {
        for p in &report.scatter {
            scatter_csv.row(&[
                report.what.clone(),
                p.formula_id.0.clone(),
                p.label.to_string(),
                fmt_f64(p.baseline_score),
                fmt_f64(p.ablated_score),
            ]);
        }
    }
    manifest.write_output("prediction_shift.csv", &scatter_csv.into_bytes())?;

    // Herb-to-herb attention is defined through shared virtual nodes for the
    // GAT; the other architectures export only the sweep above.
    if model.config.arch == Arch::Gat {
        let (herbs, pairs) = corpus_attention_stats(&model, &test_set)?;
        let mut herb_csv = Csv::new(&["chp_id", "freq", "mean_attention", "mean_emitted"]);
        for h in &herbs {
            herb_csv.row(&[
                h.herb.0.clone(),
                h.frequency.to_string(),
                fmt_f64(h.mean_received_attention),
                fmt_f64(h.mean_emitted_attention),
            ]);
        }
        manifest.write_output("herb_stats.csv", &herb_csv.into_bytes())?;

        let mut pair_csv = Csv::new(&["chp_a", "chp_b", "co_occurrence", "mean_attention"]);
        for p in &pairs {
            pair_csv.row(&[
                p.a.0.clone(),
                p.b.0.clone(),
                p.co_occurrence.to_string(),
                fmt_f64(p.mean_attention),
            ]);
        }
        manifest.write_output("pair_stats.csv", &pair_csv.into_bytes())?;

        let mut attn_lines = Vec::new();
        for g in &test_set {
            let m = attention_matrix(&model, g)?;
            serde_json::to_writer(&mut attn_lines, &m)?;
            attn_lines.push(b'\n');
        }
        manifest.write_output("attention.jsonl", &attn_lines)?;
    }

    manifest.finish()?;
    println!(
        "explain: {} nullifications swept over {} test formulas",
        sweep.len(),
        test_set.len()
    );
    Ok(())
}
