//! Run configuration: a TOML file (JSON accepted too) plus flag overrides.
//! Unknown keys are rejected everywhere; a seed is mandatory because every
//! artifact must be reproducible.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use herbgraph_core::gnn::Arch;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Reserved for analytics fan-out; accepted so configs stay stable.
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default)]
    pub embed: EmbedConfig,
    #[serde(default)]
    pub diffuse: DiffuseConfig,
    #[serde(default)]
    pub train: TrainBlock,
    #[serde(default)]
    pub tune: TuneBlock,
    #[serde(default)]
    pub eval: EvalBlock,
    #[serde(default)]
    pub analyze: AnalyzeBlock,
}

fn default_threads() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkipGramBlock {
    pub window: usize,
    pub dim: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl SkipGramBlock {
    pub fn to_core(&self, seed: u64) -> herbgraph_core::embed::SkipGramConfig {
        herbgraph_core::embed::SkipGramConfig {
            window: self.window,
            dim: self.dim,
            negatives: self.negatives,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedConfig {
    pub property: SkipGramBlock,
    pub efficacy: SkipGramBlock,
    pub combination: SkipGramBlock,
    pub node2vec_dim: usize,
    pub node2vec_walks_per_node: usize,
    pub node2vec_walk_length: usize,
    pub node2vec_p: f64,
    pub node2vec_q: f64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        let sg = |window, dim| SkipGramBlock {
            window,
            dim,
            negatives: 5,
            epochs: 15,
            learning_rate: 0.025,
        };
        EmbedConfig {
            property: sg(5, 15),
            efficacy: sg(10, 30),
            combination: sg(10, 30),
            node2vec_dim: 32,
            node2vec_walks_per_node: 10,
            node2vec_walk_length: 80,
            node2vec_p: 1.0,
            node2vec_q: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffuseConfig {
    pub k: usize,
    pub metric: String,
    pub affinity_threshold: f64,
    pub reduce_dims: Option<usize>,
    /// Coverage-report thresholds.
    pub thresholds: Vec<f64>,
}

impl Default for DiffuseConfig {
    fn default() -> Self {
        DiffuseConfig {
            k: 10,
            metric: "cosine".into(),
            affinity_threshold: 5.0,
            reduce_dims: None,
            thresholds: vec![0.0, 2.0, 4.0, 5.0, 6.0, 8.0],
        }
    }
}

impl DiffuseConfig {
    pub fn metric(&self) -> Result<herbgraph_core::diffuse::Metric> {
        match self.metric.as_str() {
            "cosine" => Ok(herbgraph_core::diffuse::Metric::Cosine),
            "euclidean" => Ok(herbgraph_core::diffuse::Metric::Euclidean),
            other => bail!("unknown metric {other:?} (cosine|euclidean)"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainBlock {
    pub arch: String,
    pub hidden_dim: usize,
    pub num_heads: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    /// f64 for reproducible tests, f32 for production runs.
    pub precision: String,
    /// Exact split counts (train, val, test); must sum to the corpus size.
    pub split: [usize; 3],
    pub threshold: f64,
}

impl Default for TrainBlock {
    fn default() -> Self {
        TrainBlock {
            arch: "gat".into(),
            hidden_dim: 64,
            num_heads: 4,
            dropout_rate: 0.5,
            learning_rate: 1e-4,
            batch_size: 32,
            epochs: 100,
            weight_decay: 0.0,
            precision: "f64".into(),
            split: [4256, 1222, 602],
            threshold: 0.5,
        }
    }
}

impl TrainBlock {
    pub fn arch(&self) -> Result<Arch> {
        self.arch
            .parse()
            .map_err(|e: String| anyhow::anyhow!(e))
    }

    pub fn model_config(&self) -> Result<herbgraph_core::gnn::ModelConfig> {
        Ok(herbgraph_core::gnn::ModelConfig {
            arch: self.arch()?,
            hidden_dim: self.hidden_dim,
            num_heads: self.num_heads,
            dropout_rate: self.dropout_rate,
        })
    }

    pub fn train_config(&self, seed: u64) -> herbgraph_core::gnn::TrainConfig {
        herbgraph_core::gnn::TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneBlock {
    pub stage1_hidden: Vec<usize>,
    pub stage1_heads: Vec<usize>,
    pub stage1_dropout: Vec<f64>,
    pub stage2_learning_rate: Vec<f64>,
    pub stage2_batch: Vec<usize>,
    pub folds: usize,
    pub epochs: usize,
}

impl Default for TuneBlock {
    fn default() -> Self {
        TuneBlock {
            stage1_hidden: vec![32, 64, 96, 128],
            stage1_heads: vec![2, 4, 8, 16],
            stage1_dropout: vec![0.1, 0.3, 0.4, 0.5],
            stage2_learning_rate: vec![1e-4, 3e-4, 5e-4, 7e-4],
            stage2_batch: vec![16, 32, 64, 128],
            folds: 5,
            epochs: 30,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalBlock {
    pub threshold: f64,
}

impl Default for EvalBlock {
    fn default() -> Self {
        EvalBlock { threshold: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeBlock {
    pub layout_iterations: usize,
    pub cluster_k: usize,
    pub ctp_affinity_threshold: f64,
    /// Pathways with BH q below this feed the tripartite network.
    pub enrich_q_cutoff: f64,
}

impl Default for AnalyzeBlock {
    fn default() -> Self {
        AnalyzeBlock {
            layout_iterations: 300,
            cluster_k: 6,
            ctp_affinity_threshold: 8.0,
            enrich_q_cutoff: 0.25,
        }
    }
}

/// Loads TOML (or JSON when the extension is .json). A missing seed is a
/// hard error; unknown keys fail parsing.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let config: RunConfig = if path.extension().and_then(|e| e.to_str()) == Some("json") {
        serde_json::from_str(&text).with_context(|| format!("bad JSON config {}", path.display()))?
    } else {
        toml::from_str(&text).with_context(|| format!("bad TOML config {}", path.display()))?
    };
    Ok(config)
}
