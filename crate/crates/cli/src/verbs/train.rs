//! Split the encoded corpus and train one model.

use anyhow::{bail, Result};
use serde::Serialize;

use herbgraph_core::formula::{read_jsonl, FormulaGraph};
use herbgraph_core::gnn::{split_dataset, train, Real, SplitSummary};

use super::Ctx;
use crate::csvout::{fmt_f64, Csv};
use crate::manifest::{require_artifact, ManifestBuilder};

#[derive(Serialize)]
pub struct SplitIds {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let graphs_path = ctx.config.out_dir.join("encode").join("graphs.jsonl");
    require_artifact(&graphs_path)?;
    let graphs = read_jsonl(&graphs_path)?;

    match ctx.config.train.precision.as_str() {
        "f64" => run_typed::<f64>(ctx, &graphs, &graphs_path),
        "f32" => run_typed::<f32>(ctx, &graphs, &graphs_path),
        other => bail!("unknown precision {other:?} (f32|f64)"),
    }
}

fn run_typed<F: Real>(
    ctx: &Ctx,
    graphs: &[FormulaGraph],
    graphs_path: &std::path::Path,
) -> Result<()> {
    let t = &ctx.config.train;
    let counts = (t.split[0], t.split[1], t.split[2]);
    let (train_set, val_set, test_set, summary) =
        split_dataset(graphs, counts, ctx.config.seed)?;

    let mcfg = t.model_config()?;
    let tcfg = t.train_config(ctx.config.seed);
    let (model, history) = train::<F>(&train_set, &val_set, &mcfg, &tcfg)?;

    let mut manifest = ManifestBuilder::new("train", &ctx.config.out_dir, &ctx.config_bytes);
    manifest.record_input("encode/graphs.jsonl", graphs_path)?;
    std::fs::create_dir_all(manifest.dir())?;

    model.save(&manifest.dir().join("model.ckpt"))?;
    manifest.record_output("model.ckpt")?;
    manifest.record_output("model.ckpt.json")?;

    let mut history_csv = Csv::new(&["epoch", "train_loss", "val_loss"]);
    for (epoch, (train_loss, val_loss)) in history.epochs.iter().enumerate() {
        history_csv.row(&[
            epoch.to_string(),
            fmt_f64(*train_loss),
            fmt_f64(*val_loss),
        ]);
    }
    manifest.write_output("history.csv", &history_csv.into_bytes())?;

    let ids = SplitIds {
        train: train_set.iter().map(|g| g.formula_id.0.clone()).collect(),
        val: val_set.iter().map(|g| g.formula_id.0.clone()).collect(),
        test: test_set.iter().map(|g| g.formula_id.0.clone()).collect(),
    };
    manifest.write_output("splits.json", &serde_json::to_vec_pretty(&ids)?)?;
    manifest.write_output("split_summary.csv", &split_summary_csv(&summary))?;
    manifest.finish()?;

    println!(
        "train: {} epochs run, best epoch {:?}, split {:?}",
        history.epochs.len(),
        history.best_epoch,
        summary.sizes
    );
    Ok(())
}

fn split_summary_csv(summary: &SplitSummary) -> Vec<u8> {
    let mut csv = Csv::new(&["split", "size", "label", "positive_rate"]);
    let names = ["train", "val", "test"];
    let sizes = [summary.sizes.0, summary.sizes.1, summary.sizes.2];
    for (s, name) in names.iter().enumerate() {
        for (label, rate) in summary.positive_rates[s].iter().enumerate() {
            csv.row(&[
                name.to_string(),
                sizes[s].to_string(),
                label.to_string(),
                fmt_f64(*rate),
            ]);
        }
    }
    csv.into_bytes()
}
