//! Join the evaluation output into one per-model-per-label metrics table.

use anyhow::Result;

use super::Ctx;
use crate::manifest::{require_artifact, ManifestBuilder};

pub fn run(ctx: &Ctx) -> Result<()> {
    let eval_csv = ctx.config.out_dir.join("eval").join("metrics.csv");
    require_artifact(&eval_csv)?;

    let mut manifest = ManifestBuilder::new("report", &ctx.config.out_dir, &ctx.config_bytes);
    manifest.record_input("eval/metrics.csv", &eval_csv)?;
    std::fs::create_dir_all(manifest.dir())?;

    // The eval table already carries (model, split, label, metrics...); the
    // report keeps only the headline columns, one row per model per label
    // per split.
    let text = std::fs::read_to_string(&eval_csv)?;
    let mut out = String::from(
        "model,split,label,precision,recall,f1,auc,accuracy,specificity\n",
    );
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 9 {
            continue;
        }
        out.push_str(&fields[..9].join(","));
        out.push('\n');
    }
    manifest.write_output("metrics.csv", out.as_bytes())?;
    manifest.finish()?;
    println!("report: joined metrics table written");
    Ok(())
}
