use herbgraph_core::embed::*;
use herbgraph_core::fixture::*;
use herbgraph_core::formula::{encode_corpus, NodeKind};
use herbgraph_core::gnn::*;
use herbgraph_core::interpret::{ablate_feature, mask_node_kind, DeltaReport};
use std::ops::ControlFlow;
use std::time::Instant;

fn main() {
    let kg = planted_knowledge_graph(&PlantedConfig::default());
    let corpora = build_corpora(&kg).unwrap();
    let (prop, _) = train_skipgram(&corpora.property, &SkipGramConfig::properties(1)).unwrap();
    let (eff, _) = train_skipgram(&corpora.efficacy, &SkipGramConfig::efficacy(1)).unwrap();
    let (comb, _) = train_skipgram(&corpora.combination, &SkipGramConfig::combination(1)).unwrap();
    let scores = phylo_pca_scores(&kg).unwrap();
    let (feats, _) = assemble_chp_features(&kg, &prop, &eff, &comb, &scores);
    let graphs = encode_corpus(&kg, &feats).unwrap();

    let mcfg = ModelConfig { arch: Arch::Gat, hidden_dim: 32, num_heads: 2, dropout_rate: 0.3 };
    let dmean = |d: &DeltaReport| d.delta_auc.iter().sum::<f64>() / 5.0;
    let d0 = |d: &DeltaReport| d.delta_auc[0];
    let mut comb_deltas = vec![]; let mut dose_deltas = vec![];
    let mut chp_deltas = vec![]; let mut virt_max_deltas = vec![];
    for seed in 0..10u64 {
        let t0 = Instant::now();
        let (train_set, val_set, test_set, _) = split_dataset(&graphs, (210, 60, 30), seed).unwrap();
        let tcfg = TrainConfig { learning_rate: 3e-4, batch_size: 32, epochs: 80, seed, weight_decay: 0.0 };
        let (model, _) = train_with::<f64>(&train_set, &val_set, &mcfg, &tcfg, |info| {
            let mean: f64 = metrics::metrics_from_scores(info.val_scores, 0.5).mean_auc();
            if mean >= 0.93 { ControlFlow::Break(()) } else { ControlFlow::Continue(()) }
        }).unwrap();
        let comb_d = ablate_feature(&model, &test_set, FeatureSegment::Combination, 0.5).unwrap();
        let dose_d = ablate_feature(&model, &test_set, FeatureSegment::DosageWeight, 0.5).unwrap();
        let chp_d = mask_node_kind(&model, &test_set, NodeKind::Chp, 0.5).unwrap();
        let vmax = [NodeKind::TherapeuticNature, NodeKind::MedicinalFlavor, NodeKind::MeridianTropism]
            .iter()
            .map(|k| d0(&mask_node_kind(&model, &test_set, *k, 0.5).unwrap()))
            .fold(f64::NEG_INFINITY, f64::max);
        println!("seed {seed}: comb {:.4} dose {:.4} | chp0 {:.4} virt_max0 {:.4} ({:?})",
            dmean(&comb_d), dmean(&dose_d), d0(&chp_d), vmax, t0.elapsed());
        comb_deltas.push(dmean(&comb_d)); dose_deltas.push(dmean(&dose_d));
        chp_deltas.push(d0(&chp_d)); virt_max_deltas.push(vmax);
    }
    let med = |v: &mut Vec<f64>| { v.sort_by(|a,b| a.partial_cmp(b).unwrap()); (v[4]+v[5])/2.0 };
    println!("medians: comb {:.4} dose {:.4} chp0 {:.4} virt_max0 {:.4}",
        med(&mut comb_deltas), med(&mut dose_deltas), med(&mut chp_deltas), med(&mut virt_max_deltas));
}
