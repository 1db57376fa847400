//! PCA-2D coordinates for external plotting. The nonlinear projections the
//! figures used are out of scope; this provides axes with known semantics.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use herbgraph_core::linalg::{pca_fit_transform, Matrix};

use super::Ctx;
use crate::csvout::{fmt_f64, Csv};
use crate::manifest::{require_artifact, ManifestBuilder};

pub fn run(ctx: &Ctx, input: Option<&Path>) -> Result<()> {
    let default = ctx.config.out_dir.join("embed").join("chp_features.f32");
    let input = input.map(PathBuf::from).unwrap_or(default);
    require_artifact(&input)?;

    // Tolerant sidecar read: any of the binary matrix containers works here.
    let sidecar_path = {
        let mut os = input.as_os_str().to_owned();
        os.push(".json");
        PathBuf::from(os)
    };
    let sidecar: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&sidecar_path).with_context(|| {
            format!("missing sidecar {}", sidecar_path.display())
        })?)?;
    let labels: Vec<String> = ["row_index", "tokens", "herbs"]
        .iter()
        .find_map(|key| sidecar.get(*key))
        .and_then(|v| v.as_array())
        .map(|arr| {
            arr.iter()
                .filter_map(|x| x.as_str().map(String::from))
                .collect()
        })
        .context("sidecar lists no row labels (row_index/tokens/herbs)")?;
    let cols = sidecar
        .get("cols")
        .or_else(|| sidecar.get("dim"))
        .and_then(|v| v.as_u64())
        .context("sidecar has no cols/dim")? as usize;
    let rows = labels.len();

    let bytes = std::fs::read(&input)?;
    if bytes.len() != rows * cols * 4 {
        bail!(
            "payload is {} bytes, expected {} ({} rows x {} cols of f32)",
            bytes.len(),
            rows * cols * 4,
            rows,
            cols
        );
    }
    let mut m = Matrix::zeros(rows, cols);
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        m.data[i] = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64;
    }

    let k = 2.min(rows.min(cols));
    let pca = pca_fit_transform(&m, k)?;

    let mut manifest = ManifestBuilder::new("project2d", &ctx.config.out_dir, &ctx.config_bytes);
    manifest.record_input("input.f32", &input)?;
    std::fs::create_dir_all(manifest.dir())?;
    let mut csv = Csv::new(&["id", "x", "y"]);
    for (i, label) in labels.iter().enumerate() {
        let x = pca.scores.get(i, 0);
        let y = if k > 1 { pca.scores.get(i, 1) } else { 0.0 };
        csv.row(&[label.clone(), fmt_f64(x), fmt_f64(y)]);
    }
    manifest.write_output("coords.csv", &csv.into_bytes())?;
    manifest.write_output(
        "explained.json",
        &serde_json::to_vec_pretty(&pca.explained)?,
    )?;
    manifest.finish()?;

    println!(
        "project2d: {} points, explained variance {:?}",
        rows, pca.explained
    );
    Ok(())
}
