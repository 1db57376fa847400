//! Synthetic planted-rule corpus.
//!
//! Every label is a pure function of herb membership, so the combination
//! segment (the per-herb identity embedding) carries the signal while doses
//! carry none: label 0 fires when the two marker herbs co-occur, labels 1-4
//! fire on single marker herbs. The generator emits a complete knowledge
//! graph (herbs, formulas, compounds, pairs, taxonomy, terms, pathways) so
//! the whole pipeline can run against it without the public dataset.

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::io::F32Matrix;
use crate::kg::*;

pub const RULE_PAIR: (&str, &str) = ("CHP00001", "CHP00002");
pub const RULE_SINGLES: [&str; 4] = ["CHP00003", "CHP00004", "CHP00005", "CHP00006"];

#[derive(Debug, Clone)]
pub struct PlantedConfig {
    pub n_formulas: usize,
    pub n_herbs: usize,
    pub seed: u64,
    /// Fraction of formulas with the marker pair forced in.
    pub pair_rate: f64,
    /// Fraction of formulas with one dose withheld.
    pub unknown_dose_rate: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            n_formulas: 300,
            n_herbs: 20,
            seed: 0,
            pair_rate: 0.35,
            unknown_dose_rate: 0.08,
        }
    }
}

/// The label rule, usable as an independent oracle in tests.
pub fn planted_rule_labels(members: &[HerbId]) -> [bool; NUM_LABELS] {
    let has = |name: &str| members.iter().any(|h| h.as_str() == name);
    [
        has(RULE_PAIR.0) && has(RULE_PAIR.1),
        has(RULE_SINGLES[0]),
        has(RULE_SINGLES[1]),
        has(RULE_SINGLES[2]),
        has(RULE_SINGLES[3]),
    ]
}

const NATURES: [&str; 5] = ["warm", "cold", "hot", "cool", "neutral"];
const FLAVORS: [&str; 5] = ["bitter", "sweet", "pungent", "sour", "salty"];
const MERIDIANS: [&str; 5] = ["lung", "liver", "heart", "spleen", "kidney"];
const EFFICACY: [&str; 6] = [
    "clears heat",
    "tonifies qi",
    "calms the spirit",
    "resolves dampness",
    "moves blood",
    "releases the exterior",
];

fn pick<'a>(pool: &[&'a str], count: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut chosen: Vec<&str> = pool.to_vec();
    chosen.shuffle(rng);
    chosen.truncate(count);
    chosen.into_iter().map(String::from).collect()
}

pub fn planted_knowledge_graph(cfg: &PlantedConfig) -> KnowledgeGraph {
    assert!(cfg.n_herbs >= 8, "need at least the 6 marker herbs plus slack");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut kg = KnowledgeGraph::default();

    kg.vocab = Some(PropertyVocab {
        natures: NATURES.iter().map(|s| s.to_string()).collect(),
        flavors: FLAVORS.iter().map(|s| s.to_string()).collect(),
        meridians: MERIDIANS.iter().map(|s| s.to_string()).collect(),
    });

    // Taxonomy: one root, three internal clades, herb leaves below them.
    kg.taxonomy.entries.insert(
        TaxId(1),
        TaxEntry { parent: None, rank: "root".into() },
    );
    for clade in 0..3 {
        kg.taxonomy.entries.insert(
            TaxId(10 + clade),
            TaxEntry { parent: Some(TaxId(1)), rank: "clade".into() },
        );
    }

    for i in 1..=cfg.n_herbs {
        let id = HerbId::new(format!("CHP{i:05}"));
        let kingdom = match rng.gen_range(0..10) {
            0 => Kingdom::Animalia,
            1 => Kingdom::Fungi,
            2 => Kingdom::Mineralia,
            _ => Kingdom::Plantae,
        };
        let taxid = if kingdom == Kingdom::Mineralia {
            None
        } else {
            let leaf = TaxId(100 + i as i64);
            let clade = TaxId(10 + rng.gen_range(0..3));
            kg.taxonomy.entries.insert(
                leaf,
                TaxEntry { parent: Some(clade), rank: "species".into() },
            );
            Some(leaf)
        };
        let herb = HerbPiece {
            id: id.clone(),
            name: format!("herb {i}"),
            kingdom,
            taxid,
            natures: pick(&NATURES, rng.gen_range(1..=2), &mut rng),
            flavors: pick(&FLAVORS, rng.gen_range(1..=2), &mut rng),
            meridians: pick(&MERIDIANS, rng.gen_range(1..=2), &mut rng),
            efficacy: pick(&EFFICACY, rng.gen_range(1..=2), &mut rng),
        };
        kg.herbs.insert(id, herb);
    }

    let herb_ids: Vec<HerbId> = kg.herbs.keys().cloned().collect();
    let pair_a = HerbId::new(RULE_PAIR.0);
    let pair_b = HerbId::new(RULE_PAIR.1);

    for f in 0..cfg.n_formulas {
        let size = rng.gen_range(3..=6);
        let mut members: Vec<HerbId> = Vec::with_capacity(size);
        // Roughly: pair_rate with both markers, then a large single-marker
        // share so the pair label is a genuine conjunction rather than
        // "either marker present".
        let roll = rng.gen::<f64>();
        let force_pair = roll < cfg.pair_rate;
        let force_single = !force_pair && roll < cfg.pair_rate + 0.4;
        if force_pair {
            members.push(pair_a.clone());
            members.push(pair_b.clone());
        } else if force_single {
            members.push(if rng.gen::<bool>() { pair_a.clone() } else { pair_b.clone() });
        }
        let mut pool: Vec<HerbId> = herb_ids
            .iter()
            .filter(|h| !members.contains(h))
            .cloned()
            .collect();
        pool.shuffle(&mut rng);
        for h in pool {
            if members.len() >= size {
                break;
            }
            // Keep the pair rule crisp: never complete the marker pair by
            // accident.
            if !force_pair && (h == pair_a || h == pair_b) {
                continue;
            }
            members.push(h);
        }
        members.shuffle(&mut rng);

        let labels = planted_rule_labels(&members);
        let withhold = rng.gen::<f64>() < cfg.unknown_dose_rate;
        let withheld_slot = rng.gen_range(0..members.len());
        let formula = Formula {
            id: FormulaId::new(format!("F{f:04}")),
            members: members
                .into_iter()
                .enumerate()
                .map(|(slot, herb)| FormulaMember {
                    herb,
                    dose_g: if withhold && slot == withheld_slot {
                        None
                    } else {
                        Some(rng.gen_range(3..=30) as f64)
                    },
                })
                .collect(),
            labels: Some(labels),
        };
        kg.formulas.insert(formula.id.clone(), formula);
    }

    // Small compound/target side tables so diffusion and enrichment verbs
    // have real input.
    let classes = ["terpenoid", "alkaloid", "flavonoid"];
    let mut feature_rows = Vec::new();
    for c in 0..10 {
        let letter = (b'A' + c as u8) as char;
        let key = InChIKey::new(format!(
            "{}{}",
            letter.to_string().repeat(14),
            format!("-{}-{}", "QRSTUVWXYZ", "N")
        ));
        let mut descriptors = std::collections::BTreeMap::new();
        descriptors.insert("mw".to_string(), rng.gen_range(150..900) as f64);
        descriptors.insert("logp".to_string(), (rng.gen::<f64>() * 8.0 * 10.0).round() / 10.0);
        descriptors.insert("hbd".to_string(), rng.gen_range(0..8) as f64);
        descriptors.insert("hba".to_string(), rng.gen_range(0..14) as f64);
        kg.compounds.insert(
            key.clone(),
            CompoundRecord {
                inchikey: key.clone(),
                descriptors,
                class: Some(classes[c % classes.len()].to_string()),
            },
        );
        feature_rows.push(key);
    }
    let mut features = F32Matrix::zeros(feature_rows.len(), 8);
    for v in &mut features.data {
        *v = rng.gen::<f32>() * 2.0 - 1.0;
    }
    kg.compound_features = Some(CompoundFeatures {
        matrix: features,
        row_index: feature_rows.clone(),
    });

    let genes: Vec<i64> = (0..8).map(|k| 1000 + k * 13).collect();
    for (i, key) in feature_rows.iter().enumerate() {
        for &gene in genes.iter().take(2 + i % 3) {
            if rng.gen::<f64>() < 0.6 {
                kg.pairs.push(CompoundTargetPair {
                    inchikey: key.clone(),
                    entrez_id: EntrezId(gene),
                    affinity: Some(((rng.gen::<f64>() * 8.0 + 2.0) * 100.0).round() / 100.0),
                    provenance: Provenance::Recorded,
                });
            }
        }
    }

    // Diagnostic terms across the five types with a connected weighted graph.
    let type_cycle = TermType::ALL;
    for t in 0..12 {
        kg.terms.nodes.insert(
            TermId::new(format!("T{t:02}")),
            type_cycle[t % type_cycle.len()],
        );
    }
    let term_ids: Vec<TermId> = kg.terms.nodes.keys().cloned().collect();
    for w in term_ids.windows(2) {
        kg.terms.edges.push((
            w[0].clone().min(w[1].clone()),
            w[0].clone().max(w[1].clone()),
            rng.gen_range(1..5) as f64,
        ));
    }
    for _ in 0..8 {
        let a = term_ids[rng.gen_range(0..term_ids.len())].clone();
        let b = term_ids[rng.gen_range(0..term_ids.len())].clone();
        if a != b {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if !kg.terms.edges.iter().any(|(x, y, _)| *x == lo && *y == hi) {
                kg.terms.edges.push((lo, hi, rng.gen_range(1..5) as f64));
            }
        }
    }

    for (p, chunk) in genes.chunks(3).enumerate() {
        let pid = PathwayId::new(format!("hsa{:05}", 4000 + p));
        kg.pathways
            .pathways
            .insert(pid, chunk.iter().map(|g| EntrezId(*g)).collect());
    }
    let mut universe: std::collections::BTreeSet<EntrezId> =
        kg.pathways.pathways.values().flatten().copied().collect();
    universe.extend(kg.pairs.iter().map(|p| p.entrez_id));
    kg.pathways.universe = universe;

    kg
}
