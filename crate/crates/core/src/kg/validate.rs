//! Invariant checking over a loaded graph. Report-only: nothing is mutated,
//! and calling it twice yields identical reports.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::types::*;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub table: String,
    pub key: String,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, table: &str, key: impl ToString, rule: impl Into<String>) {
        self.violations.push(Violation {
            table: table.to_string(),
            key: key.to_string(),
            rule: rule.into(),
        });
    }
}

fn is_inchikey(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 27
        && b[14] == b'-'
        && b[25] == b'-'
        && b.iter().enumerate().all(|(i, c)| {
            if i == 14 || i == 25 {
                true
            } else {
                c.is_ascii_uppercase()
            }
        })
}

fn is_herb_id(s: &str) -> bool {
    s.len() == 8 && s.starts_with("CHP") && s[3..].bytes().all(|b| b.is_ascii_digit())
}

/// Checks every type invariant and lists each violation as (table, key, rule).
pub fn validate(kg: &KnowledgeGraph) -> ValidationReport {
    let mut report = ValidationReport::default();

    for (id, herb) in &kg.herbs {
        if !is_herb_id(id.as_str()) {
            report.push("chp", id, "id must be CHP followed by 5 digits");
        }
        if let Some(vocab) = &kg.vocab {
            for token in &herb.natures {
                if !vocab.natures.contains(token) {
                    report.push("chp", id, format!("unknown nature token {token:?}"));
                }
            }
            for token in &herb.flavors {
                if !vocab.flavors.contains(token) {
                    report.push("chp", id, format!("unknown flavor token {token:?}"));
                }
            }
            for token in &herb.meridians {
                if !vocab.meridians.contains(token) {
                    report.push("chp", id, format!("unknown meridian token {token:?}"));
                }
            }
        }
        if let Some(taxid) = herb.taxid {
            if !kg.taxonomy.entries.is_empty() && kg.taxonomy.root_of(taxid).is_none() {
                report.push("chp", id, format!("taxid {taxid} does not resolve to a root"));
            }
        }
    }

    for (id, formula) in &kg.formulas {
        if formula.members.is_empty() {
            report.push("formulas", id, "formula must have at least one member");
        }
        for member in &formula.members {
            if !kg.herbs.contains_key(&member.herb) {
                report.push(
                    "formula_members",
                    id,
                    format!("member {} does not resolve", member.herb),
                );
            }
            if let Some(d) = member.dose_g {
                if !d.is_finite() || d < 0.0 {
                    report.push("formula_members", id, format!("dose must be >= 0, got {d}"));
                }
            }
        }
    }

    for (key, compound) in &kg.compounds {
        if !is_inchikey(key.as_str()) {
            report.push("compounds", key, "inchikey must match [A-Z]{14}-[A-Z]{10}-[A-Z]");
        }
        for (name, v) in &compound.descriptors {
            if !v.is_finite() {
                report.push("compounds", key, format!("descriptor {name} is not finite"));
            }
        }
    }
    if let Some(features) = &kg.compound_features {
        for (i, row) in features.row_index.iter().enumerate() {
            if features.matrix.row(i).iter().any(|v| !v.is_finite()) {
                report.push("compound_features", row, "feature row contains NaN/Inf");
            }
        }
    }

    let mut seen_pairs: BTreeSet<(&InChIKey, EntrezId, Provenance)> = BTreeSet::new();
    for pair in &kg.pairs {
        let pair_key = format!("{}:{}", pair.inchikey, pair.entrez_id);
        if let Some(a) = pair.affinity {
            if !a.is_finite() {
                report.push("pairs", &pair_key, "NonFiniteAffinity");
            }
        }
        if !seen_pairs.insert((&pair.inchikey, pair.entrez_id, pair.provenance)) {
            report.push(
                "pairs",
                &pair_key,
                format!("duplicate pair for provenance {}", pair.provenance.as_str()),
            );
        }
    }

    for (taxid, entry) in &kg.taxonomy.entries {
        if let Some(parent) = entry.parent {
            if !kg.taxonomy.entries.contains_key(&parent) {
                report.push("taxonomy", taxid, format!("parent {parent} missing"));
            }
        }
        if kg.taxonomy.root_of(*taxid).is_none() {
            report.push("taxonomy", taxid, "CycleDetected");
        }
    }

    for (a, b, w) in &kg.terms.edges {
        let key = format!("{a}-{b}");
        if a == b {
            report.push("term_edges", &key, "self-loop");
        }
        if !w.is_finite() || *w <= 0.0 {
            report.push("term_edges", &key, format!("weight must be > 0, got {w}"));
        }
    }

    for (pid, members) in &kg.pathways.pathways {
        for gene in members {
            if !kg.pathways.universe.contains(gene) {
                report.push("pathways", pid, format!("member {gene} outside universe"));
            }
        }
    }

    report
}
