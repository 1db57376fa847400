//! Pipeline driver: each verb reads a config file plus flag overrides and
//! writes artifacts with manifests into the run directory.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage/config error.

mod config;
mod csvout;
mod manifest;
mod verbs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use verbs::Ctx;

#[derive(Parser)]
#[command(
    name = "herbgraph",
    version,
    about = "Herbal-formula compatibility pipeline: ingest, embed, encode, train, evaluate, explain, analyze"
)]
struct Cli {
    /// TOML config (JSON accepted with a .json extension).
    #[arg(long, global = true, default_value = "herbgraph.toml")]
    config: PathBuf,
    /// Override the config's data directory.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Override the config's output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Load, validate, and normalize the knowledge-graph tables.
    Ingest {
        /// Generate a synthetic corpus first ("planted").
        #[arg(long)]
        fixture: Option<String>,
    },
    /// Train skip-gram/Node2Vec embeddings and assemble herb features.
    Embed,
    /// Expand compound-target pairs by neighbor diffusion.
    Diffuse {
        /// Feature matrix (.f32 + sidecar); defaults to the ingest artifact.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Pairs CSV; defaults to the ingest artifact.
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Neighbor count.
        #[arg(long)]
        k: Option<usize>,
        /// Affinity threshold for the coverage report.
        #[arg(long)]
        threshold: Option<f64>,
        /// Extra copy of the candidate CSV outside the run dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encode formulas as virtual-node graphs.
    Encode,
    /// Train one model on the encoded corpus.
    Train,
    /// Two-stage grid search with cross-validation.
    Tune,
    /// Evaluate the trained checkpoint on every split.
    Eval,
    /// Attention statistics and nullification sweeps.
    Explain,
    /// Co-occurrence, communities, layout, centralities, clustering,
    /// enrichment, and the tripartite network.
    Analyze,
    /// Emit PCA-2D coordinates for a feature table.
    Project2d {
        /// Binary f32 matrix with a JSON sidecar; defaults to herb features.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Join evaluation metrics into one table.
    Report,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let mut config = match config::load_config(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Some(d) = cli.data_dir {
        config.data_dir = d;
    }
    if let Some(d) = cli.out_dir {
        config.out_dir = d;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }

    let ctx = match Ctx::new(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };

    let result = match &cli.verb {
        Verb::Ingest { fixture } => verbs::ingest::run(&ctx, fixture.as_deref()),
        Verb::Embed => verbs::embed::run(&ctx),
        Verb::Diffuse {
            features,
            pairs,
            k,
            threshold,
            out,
        } => verbs::diffuse::run(
            &ctx,
            &verbs::diffuse::DiffuseArgs {
                features: features.clone(),
                pairs: pairs.clone(),
                k: *k,
                threshold: *threshold,
                out: out.clone(),
            },
        ),
        Verb::Encode => verbs::encode::run(&ctx),
        Verb::Train => verbs::train::run(&ctx),
        Verb::Tune => verbs::tune::run(&ctx),
        Verb::Eval => verbs::eval::run(&ctx),
        Verb::Explain => verbs::explain::run(&ctx),
        Verb::Analyze => verbs::analyze::run(&ctx),
        Verb::Project2d { input } => verbs::project2d::run(&ctx, input.as_deref()),
        Verb::Report => verbs::report::run(&ctx),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
