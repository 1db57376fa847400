//! Evaluate the trained checkpoint on every split.

use std::collections::BTreeMap;

use anyhow::{bail, Result};

use herbgraph_core::formula::{read_jsonl, FormulaGraph};
use herbgraph_core::gnn::{evaluate, GnnModel, MetricsReport, Real};

use super::train::SplitIds;
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

pub(crate) fn load_splits(
    ctx: &Ctx,
) -> Result<(Vec<FormulaGraph>, Vec<FormulaGraph>, Vec<FormulaGraph>)> {
    let graphs_path = ctx.config.out_dir.join("encode").join("graphs.jsonl");
    let splits_path = ctx.config.out_dir.join("train").join("splits.json");
    require_artifact(&graphs_path)?;
    require_artifact(&splits_path)?;
    let graphs = read_jsonl(&graphs_path)?;
    let ids: SplitIdsOwned = serde_json::from_slice(&std::fs::read(&splits_path)?)?;
    let by_id: BTreeMap<&str, &FormulaGraph> = graphs
        .iter()
        .map(|g| (g.formula_id.as_str(), g))
        .collect();
    let collect = |names: &[String]| -> Result<Vec<FormulaGraph>> {
        names
            .iter()
            .map(|n| {
                by_id
                    .get(n.as_str())
                    .map(|g| (*g).clone())
                    .ok_or_else(|| anyhow::anyhow!("split references unknown formula {n}"))
            })
            .collect()
    };
    Ok((collect(&ids.train)?, collect(&ids.val)?, collect(&ids.test)?))
}

#[derive(serde::Deserialize)]
struct SplitIdsOwned {
    train: Vec<String>,
    val: Vec<String>,
    test: Vec<String>,
}

// serde needs an owned mirror of train::SplitIds for reading.
impl From<SplitIds> for SplitIdsOwned {
    fn from(s: SplitIds) -> Self {
        SplitIdsOwned {
            train: s.train,
            val: s.val,
            test: s.test,
        }
    }
}

fn run_typed<F: Real>(ctx: &Ctx) -> Result<()> {
    let model_path = ctx.config.out_dir.join("train").join("model.ckpt");
    require_artifact(&model_path)?;
    let model: GnnModel<F> = GnnModel::load(&model_path)?;
    let (train_set, val_set, test_set) = load_splits(ctx)?;

    let mut manifest = ManifestBuilder::new("eval", &ctx.config.out_dir, &ctx.config_bytes);
    manifest.record_input("train/model.ckpt", &model_path)?;
    manifest.record_input(
        "encode/graphs.jsonl",
        &ctx.config.out_dir.join("encode").join("graphs.jsonl"),
    )?;
    std::fs::create_dir_all(manifest.dir())?;

    let threshold = ctx.config.eval.threshold;
    let mut csv = Csv::new(&[
        "model", "split", "label", "precision", "recall", "f1", "auc", "accuracy",
        "specificity", "tp", "fp", "fn", "tn", "undefined",
    ]);
    let arch = model.config.arch.as_str();
    for (name, split) in [("train", &train_set), ("val", &val_set), ("test", &test_set)] {
        if split.is_empty() {
            continue;
        }
        let report = evaluate(&model, split, threshold)?;
        append_report(&mut csv, arch, name, &report);
    }
    manifest.write_output("metrics.csv", &csv.into_bytes())?;
    manifest.finish()?;
    println!("eval: metrics written for train/val/test at threshold {threshold}");
    Ok(())
}

pub(crate) fn append_report(csv: &mut Csv, model: &str, split: &str, report: &MetricsReport) {
    for (label, m) in report.labels.iter().enumerate() {
        csv.row(&[
            model.to_string(),
            split.to_string(),
            label.to_string(),
            fmt_f64(m.precision),
            fmt_f64(m.recall),
            fmt_f64(m.f1),
            fmt_f64(m.auc),
            fmt_f64(m.accuracy),
            fmt_f64(m.specificity),
            m.tp.to_string(),
            m.fp.to_string(),
            m.fn_.to_string(),
            m.tn.to_string(),
            m.undefined.join("|"),
        ]);
    }
}
