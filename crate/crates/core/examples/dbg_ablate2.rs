use herbgraph_core::embed::*;
use herbgraph_core::fixture::*;
use herbgraph_core::formula::{encode_corpus, NodeKind};
use herbgraph_core::gnn::*;
use herbgraph_core::interpret::{ablate_feature, mask_node_kind, DeltaReport};

fn main() {
    let kg = planted_knowledge_graph(&PlantedConfig::default());
    let corpora = build_corpora(&kg).unwrap();
    let (prop, _) = train_skipgram(&corpora.property, &SkipGramConfig::properties(1)).unwrap();
    let (eff, _) = train_skipgram(&corpora.efficacy, &SkipGramConfig::efficacy(1)).unwrap();
    let (comb, _) = train_skipgram(&corpora.combination, &SkipGramConfig::combination(1)).unwrap();
    let scores = phylo_pca_scores(&kg).unwrap();
    let (feats, _) = assemble_chp_features(&kg, &prop, &eff, &comb, &scores);
    let graphs = encode_corpus(&kg, &feats).unwrap();

    let dmean = |d: &DeltaReport| d.delta_auc.iter().sum::<f64>() / 5.0;
    let d0 = |d: &DeltaReport| d.delta_auc[0];
    for (dropout, epochs) in [(0.0, 60), (0.5, 60), (0.1, 100)] {
        let mcfg = ModelConfig { arch: Arch::Gat, hidden_dim: 32, num_heads: 2, dropout_rate: dropout };
        let mut rows = vec![];
        for seed in 0..10u64 {
            let (train_set, val_set, test_set, _) = split_dataset(&graphs, (210, 60, 30), seed).unwrap();
            let tcfg = TrainConfig { learning_rate: 3e-4, batch_size: 32, epochs, seed, weight_decay: 0.0 };
            let (model, _) = train::<f64>(&train_set, &val_set, &mcfg, &tcfg).unwrap();
            let comb_d = dmean(&ablate_feature(&model, &test_set, FeatureSegment::Combination, 0.5).unwrap());
            let dose_d = dmean(&ablate_feature(&model, &test_set, FeatureSegment::DosageWeight, 0.5).unwrap());
            let chp_mean = dmean(&mask_node_kind(&model, &test_set, NodeKind::Chp, 0.5).unwrap());
            let chp0 = d0(&mask_node_kind(&model, &test_set, NodeKind::Chp, 0.5).unwrap());
            let kinds = [NodeKind::TherapeuticNature, NodeKind::MedicinalFlavor, NodeKind::MeridianTropism];
            let vmax_mean = kinds.iter().map(|k| dmean(&mask_node_kind(&model, &test_set, *k, 0.5).unwrap())).fold(f64::NEG_INFINITY, f64::max);
            let vmax0 = kinds.iter().map(|k| d0(&mask_node_kind(&model, &test_set, *k, 0.5).unwrap())).fold(f64::NEG_INFINITY, f64::max);
            rows.push((comb_d, dose_d, chp_mean, vmax_mean, chp0, vmax0));
        }
        let med = |f: &dyn Fn(&(f64,f64,f64,f64,f64,f64)) -> f64| {
            let mut v: Vec<f64> = rows.iter().map(f).collect();
            v.sort_by(|a,b| a.partial_cmp(b).unwrap());
            (v[4]+v[5])/2.0
        };
        println!("dropout={dropout} epochs={epochs}: comb {:.4} dose {:.4} | chp_mean {:.4} vmax_mean {:.4} | chp0 {:.4} vmax0 {:.4}",
            med(&|r| r.0), med(&|r| r.1), med(&|r| r.2), med(&|r| r.3), med(&|r| r.4), med(&|r| r.5));
        let wins_mean = rows.iter().filter(|r| r.2 > r.3).count();
        let wins_0 = rows.iter().filter(|r| r.4 > r.5).count();
        println!("  per-seed wins: chp_mean>{{vmax_mean}} {wins_mean}/10, chp0>vmax0 {wins_0}/10");
    }
}
