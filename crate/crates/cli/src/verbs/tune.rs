//! Two-stage grid search with k-fold cross-validation.

use anyhow::{bail, Result};

use herbgraph_core::formula::read_jsonl;
use herbgraph_core::gnn::{grid_search, Real, TrainConfig};

use super::Ctx;
use crate::csvout::{fmt_f64, Csv};
use crate::manifest::{require_artifact, ManifestBuilder};

pub fn run(ctx: &Ctx) -> Result<()> {
    let graphs_path = ctx.config.out_dir.join("encode").join("graphs.jsonl");
    require_artifact(&graphs_path)?;

    match ctx.config.train.precision.as_str() {
        "f64" => run_typed::<f64>(ctx, &graphs_path),
        "f32" => run_typed::<f32>(ctx, &graphs_path),
        other => bail!("unknown precision {other:?} (f32|f64)"),
    }
}

fn run_typed<F: Real>(ctx: &Ctx, graphs_path: &std::path::Path) -> Result<()> {
    let graphs = read_jsonl(graphs_path)?;
    let t = &ctx.config.tune;
    let arch = ctx.config.train.arch()?;

    let mut stage1 = Vec::new();
    for &h in &t.stage1_hidden {
        for &heads in &t.stage1_heads {
            if h % heads != 0 {
                continue; // incompatible cells are skipped, not errors
            }
            for &d in &t.stage1_dropout {
                stage1.push((h, heads, d));
            }
        }
    }
    let mut stage2 = Vec::new();
    for &lr in &t.stage2_learning_rate {
        for &b in &t.stage2_batch {
            stage2.push((lr, b));
        }
    }
    let base = TrainConfig {
        epochs: t.epochs,
        seed: ctx.config.seed,
        ..ctx.config.train.train_config(ctx.config.seed)
    };

    let outcome = grid_search::<F>(&graphs, arch, &stage1, &stage2, &base, t.folds)?;

    let mut manifest = ManifestBuilder::new("tune", &ctx.config.out_dir, &ctx.config_bytes);
    manifest.record_input("encode/graphs.jsonl", graphs_path)?;
    std::fs::create_dir_all(manifest.dir())?;

    let mut csv = Csv::new(&[
        "stage",
        "hidden_dim",
        "num_heads",
        "dropout_rate",
        "learning_rate",
        "batch_size",
        "mean_val_loss",
        "fold_losses",
    ]);
    for r in &outcome.results {
        csv.row(&[
            r.stage.to_string(),
            r.hidden_dim.to_string(),
            r.num_heads.to_string(),
            fmt_f64(r.dropout_rate),
            fmt_f64(r.learning_rate),
            r.batch_size.to_string(),
            fmt_f64(r.mean_loss),
            r.fold_losses
                .iter()
                .map(|l| fmt_f64(*l))
                .collect::<Vec<_>>()
                .join("|"),
        ]);
    }
    manifest.write_output("grid.csv", &csv.into_bytes())?;
    manifest.write_output(
        "best.json",
        &serde_json::to_vec_pretty(&serde_json::json!({
            "arch": outcome.best_model.arch,
            "hidden_dim": outcome.best_model.hidden_dim,
            "num_heads": outcome.best_model.num_heads,
            "dropout_rate": outcome.best_model.dropout_rate,
            "learning_rate": outcome.best_train.learning_rate,
            "batch_size": outcome.best_train.batch_size,
        }))?,
    )?;
    manifest.finish()?;

    println!(
        "tune: {} cells evaluated; best hidden={} heads={} dropout={} lr={} batch={}",
        outcome.results.len(),
        outcome.best_model.hidden_dim,
        outcome.best_model.num_heads,
        outcome.best_model.dropout_rate,
        outcome.best_train.learning_rate,
        outcome.best_train.batch_size
    );
    Ok(())
}
