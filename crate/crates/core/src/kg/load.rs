//! CSV ingestion with referential-integrity checks.
//!
//! Structural problems (missing file, malformed row, duplicate id) abort the
//! load. Dangling cross-references do not: the public dataset is large and
//! partially inconsistent, so those rows are dropped and recorded as issues.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::schema::SchemaConfig;
use super::types::*;
use crate::io;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("{file}:{line}: malformed row: {reason}")]
    MalformedRow {
        file: String,
        line: u64,
        reason: String,
    },
    #[error("duplicate id {id} in {file}")]
    DuplicateId { file: String, id: String },
    #[error(transparent)]
    FeatureFile(#[from] io::IoError),
    #[error("csv error in {file}: {source}")]
    Csv { file: String, source: csv::Error },
}

/// A row dropped (or patched) during load, with enough context to audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LoadIssue {
    /// A row referenced a key absent from its target table; the row was
    /// dropped.
    DanglingRef {
        file: String,
        line: u64,
        key: String,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LoadReport {
    /// Rows kept per table, keyed by file name.
    pub row_counts: BTreeMap<String, usize>,
    pub issues: Vec<LoadIssue>,
}

/// Parses every table named in `schema` from `dir` and cross-links them.
pub fn load_knowledge_graph(
    dir: &Path,
    schema: &SchemaConfig,
) -> Result<(KnowledgeGraph, LoadReport), LoadError> {
    let mut kg = KnowledgeGraph::default();
    let mut report = LoadReport::default();

    if let Some(name) = &schema.property_vocab {
        kg.vocab = Some(load_vocab(&dir.join(name), name, &mut report)?);
    }
    if let Some(name) = &schema.chp {
        load_chp(&dir.join(name), name, &mut kg, &mut report)?;
    }
    if let Some(name) = &schema.formulas {
        load_formulas(&dir.join(name), name, &mut kg, &mut report)?;
    }
    if let Some(name) = &schema.formula_members {
        load_members(&dir.join(name), name, &mut kg, &mut report)?;
    }
    if let Some(name) = &schema.compounds {
        load_compounds(&dir.join(name), name, &mut kg, &mut report)?;
    }
    if let Some(name) = &schema.compound_features {
        let path = dir.join(name);
        if !path.exists() {
            return Err(LoadError::MissingFile(path));
        }
        #[derive(Deserialize)]
        struct Side {
            rows: usize,
            cols: usize,
            row_index: Vec<String>,
        }
        let (matrix, side): (io::F32Matrix, Side) =
            io::read_f32_matrix(&path, |s: &Side| (s.rows, s.cols))?;
        if side.row_index.len() != side.rows {
            return Err(LoadError::MalformedRow {
                file: name.clone(),
                line: 0,
                reason: format!(
                    "sidecar row_index has {} entries for {} rows",
                    side.row_index.len(),
                    side.rows
                ),
            });
        }
        kg.compound_features = Some(CompoundFeatures {
            matrix,
            row_index: side.row_index.into_iter().map(InChIKey::new).collect(),
        });
        report
            .row_counts
            .insert(name.clone(), kg.compound_features.as_ref().unwrap().row_index.len());
    }
    if let Some(name) = &schema.pairs {
        load_pairs(&dir.join(name), name, &mut kg, &mut report)?;
    }
    if let Some(name) = &schema.taxonomy {
        load_taxonomy(&dir.join(name), name, &mut kg, &mut report)?;
    }
    if let Some(name) = &schema.terms {
        load_terms(&dir.join(name), name, &mut kg, &mut report)?;
    }
    if let Some(name) = &schema.term_edges {
        load_term_edges(&dir.join(name), name, &mut kg, &mut report)?;
    }
    if let Some(name) = &schema.pathways {
        load_pathways(&dir.join(name), name, &mut kg, &mut report)?;
    }

    // The enrichment universe: every gene named by a pathway or a pair.
    let mut universe: BTreeSet<EntrezId> =
        kg.pathways.pathways.values().flatten().copied().collect();
    universe.extend(kg.pairs.iter().map(|p| p.entrez_id));
    kg.pathways.universe = universe;

    Ok((kg, report))
}

struct Table {
    file: String,
    headers: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

impl Table {
    fn open(path: &Path, file: &str) -> Result<Table, LoadError> {
        if !path.exists() {
            return Err(LoadError::MissingFile(path.to_path_buf()));
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_path(path)
            .map_err(|source| LoadError::Csv {
                file: file.to_string(),
                source,
            })?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|source| LoadError::Csv {
                file: file.to_string(),
                source,
            })?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|source| LoadError::Csv {
                file: file.to_string(),
                source,
            })?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((line, record.iter().map(|s| s.to_string()).collect()));
        }
        Ok(Table {
            file: file.to_string(),
            headers,
            rows,
        })
    }

    fn col(&self, name: &str) -> Result<usize, LoadError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LoadError::MalformedRow {
                file: self.file.clone(),
                line: 1,
                reason: format!("missing column {name:?} (headers: {:?})", self.headers),
            })
    }

    fn opt_col(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn malformed(&self, line: u64, reason: impl Into<String>) -> LoadError {
        LoadError::MalformedRow {
            file: self.file.clone(),
            line,
            reason: reason.into(),
        }
    }
}

fn split_multi(field: &str) -> Vec<String> {
    if field.trim().is_empty() {
        return Vec::new();
    }
    field
        .split('|')
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .collect()
}

fn load_vocab(path: &Path, file: &str, report: &mut LoadReport) -> Result<PropertyVocab, LoadError> {
    let table = Table::open(path, file)?;
    let kind_col = table.col("kind")?;
    let token_col = table.col("token")?;
    let mut vocab = PropertyVocab::default();
    for (line, row) in &table.rows {
        let token = row[token_col].trim().to_string();
        match row[kind_col].trim() {
            "nature" => vocab.natures.insert(token),
            "flavor" => vocab.flavors.insert(token),
            "meridian" => vocab.meridians.insert(token),
            other => return Err(table.malformed(*line, format!("unknown kind {other:?}"))),
        };
    }
    report.row_counts.insert(file.to_string(), table.rows.len());
    Ok(vocab)
}

fn load_chp(
    path: &Path,
    file: &str,
    kg: &mut KnowledgeGraph,
    report: &mut LoadReport,
) -> Result<(), LoadError> {
    let table = Table::open(path, file)?;
    let id = table.col("id")?;
    let name = table.col("name")?;
    let kingdom = table.col("kingdom")?;
    let taxid = table.col("taxid")?;
    let natures = table.col("natures")?;
    let flavors = table.col("flavors")?;
    let meridians = table.col("meridians")?;
    // Efficacy is optional: not every corpus records it.
    let efficacy = table.opt_col("efficacy");

    for (line, row) in &table.rows {
        let herb_id = HerbId::new(row[id].trim());
        let kingdom = Kingdom::from_str(row[kingdom].trim())
            .map_err(|e| table.malformed(*line, e))?;
        let taxid_s = row[taxid].trim();
        let taxid = if taxid_s.is_empty() {
            None
        } else {
            Some(TaxId(taxid_s.parse().map_err(|_| {
                table.malformed(*line, format!("bad taxid {taxid_s:?}"))
            })?))
        };
        let piece = HerbPiece {
            id: herb_id.clone(),
            name: row[name].trim().to_string(),
            kingdom,
            taxid,
            natures: split_multi(&row[natures]),
            flavors: split_multi(&row[flavors]),
            meridians: split_multi(&row[meridians]),
            efficacy: efficacy.map_or_else(Vec::new, |c| split_multi(&row[c])),
        };
        if kg.herbs.insert(herb_id.clone(), piece).is_some() {
            return Err(LoadError::DuplicateId {
                file: file.to_string(),
                id: herb_id.0,
            });
        }
    }
    report.row_counts.insert(file.to_string(), kg.herbs.len());
    Ok(())
}

fn parse_labels(s: &str) -> Result<Option<[bool; NUM_LABELS]>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(None); // unlabeled, prediction-only row
    }
    if s.len() != NUM_LABELS || !s.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(format!("labels must be {NUM_LABELS} chars of 0/1, got {s:?}"));
    }
    let mut bits = [false; NUM_LABELS];
    for (i, b) in s.bytes().enumerate() {
        bits[i] = b == b'1';
    }
    Ok(Some(bits))
}

fn load_formulas(
    path: &Path,
    file: &str,
    kg: &mut KnowledgeGraph,
    report: &mut LoadReport,
) -> Result<(), LoadError> {
    let table = Table::open(path, file)?;
    let id = table.col("id")?;
    let labels = table.col("labels")?;
    for (line, row) in &table.rows {
        let fid = FormulaId::new(row[id].trim());
        let labels = parse_labels(&row[labels]).map_err(|e| table.malformed(*line, e))?;
        let formula = Formula {
            id: fid.clone(),
            members: Vec::new(),
            labels,
        };
        if kg.formulas.insert(fid.clone(), formula).is_some() {
            return Err(LoadError::DuplicateId {
                file: file.to_string(),
                id: fid.0,
            });
        }
    }
    report.row_counts.insert(file.to_string(), kg.formulas.len());
    Ok(())
}

fn load_members(
    path: &Path,
    file: &str,
    kg: &mut KnowledgeGraph,
    report: &mut LoadReport,
) -> Result<(), LoadError> {
    let table = Table::open(path, file)?;
    let formula_id = table.col("formula_id")?;
    let chp_id = table.col("chp_id")?;
    let dose = table.col("dose_g")?;
    let mut kept = 0usize;
    for (line, row) in &table.rows {
        let fid = FormulaId::new(row[formula_id].trim());
        let hid = HerbId::new(row[chp_id].trim());
        if !kg.herbs.contains_key(&hid) {
            report.issues.push(LoadIssue::DanglingRef {
                file: file.to_string(),
                line: *line,
                key: hid.0,
            });
            continue;
        }
        let Some(formula) = kg.formulas.get_mut(&fid) else {
            report.issues.push(LoadIssue::DanglingRef {
                file: file.to_string(),
                line: *line,
                key: fid.0,
            });
            continue;
        };
        let dose_s = row[dose].trim();
        let dose_g = if dose_s.is_empty() {
            None
        } else {
            let d: f64 = dose_s
                .parse()
                .map_err(|_| table.malformed(*line, format!("bad dose {dose_s:?}")))?;
            if !d.is_finite() || d < 0.0 {
                return Err(table.malformed(*line, format!("dose must be >= 0, got {d}")));
            }
            Some(d)
        };
        formula.members.push(FormulaMember { herb: hid, dose_g });
        kept += 1;
    }
    report.row_counts.insert(file.to_string(), kept);
    Ok(())
}

fn load_compounds(
    path: &Path,
    file: &str,
    kg: &mut KnowledgeGraph,
    report: &mut LoadReport,
) -> Result<(), LoadError> {
    let table = Table::open(path, file)?;
    let inchikey = table.col("inchikey")?;
    let class = table.opt_col("class");
    // Every other column is a numeric descriptor.
    let descriptor_cols: Vec<(usize, String)> = table
        .headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != inchikey && Some(*i) != class)
        .map(|(i, h)| (i, h.clone()))
        .collect();

    for (line, row) in &table.rows {
        let key = InChIKey::new(row[inchikey].trim());
        let mut descriptors = BTreeMap::new();
        for (col, name) in &descriptor_cols {
            let s = row[*col].trim();
            if s.is_empty() {
                continue;
            }
            let v: f64 = s
                .parse()
                .map_err(|_| table.malformed(*line, format!("bad descriptor {name}={s:?}")))?;
            descriptors.insert(name.clone(), v);
        }
        let record = CompoundRecord {
            inchikey: key.clone(),
            descriptors,
            class: class.and_then(|c| {
                let s = row[c].trim();
                (!s.is_empty()).then(|| s.to_string())
            }),
        };
        if kg.compounds.insert(key.clone(), record).is_some() {
            return Err(LoadError::DuplicateId {
                file: file.to_string(),
                id: key.0,
            });
        }
    }
    report.row_counts.insert(file.to_string(), kg.compounds.len());
    Ok(())
}

fn load_pairs(
    path: &Path,
    file: &str,
    kg: &mut KnowledgeGraph,
    report: &mut LoadReport,
) -> Result<(), LoadError> {
    let table = Table::open(path, file)?;
    let inchikey = table.col("inchikey")?;
    let entrez = table.col("entrez_id")?;
    let affinity = table.col("affinity")?;
    let provenance = table.col("provenance")?;
    let check_compounds = !kg.compounds.is_empty();
    let mut kept = 0usize;
    for (line, row) in &table.rows {
        let key = InChIKey::new(row[inchikey].trim());
        if check_compounds && !kg.compounds.contains_key(&key) {
            report.issues.push(LoadIssue::DanglingRef {
                file: file.to_string(),
                line: *line,
                key: key.0,
            });
            continue;
        }
        let entrez_s = row[entrez].trim();
        let entrez_id = EntrezId(entrez_s.parse().map_err(|_| {
            table.malformed(*line, format!("bad entrez_id {entrez_s:?}"))
        })?);
        let affinity_s = row[affinity].trim();
        let affinity = if affinity_s.is_empty() {
            None
        } else {
            Some(affinity_s.parse::<f64>().map_err(|_| {
                table.malformed(*line, format!("bad affinity {affinity_s:?}"))
            })?)
        };
        let provenance = Provenance::from_str(row[provenance].trim())
            .map_err(|e| table.malformed(*line, e))?;
        kg.pairs.push(CompoundTargetPair {
            inchikey: key,
            entrez_id,
            affinity,
            provenance,
        });
        kept += 1;
    }
    report.row_counts.insert(file.to_string(), kept);
    Ok(())
}

fn load_taxonomy(
    path: &Path,
    file: &str,
    kg: &mut KnowledgeGraph,
    report: &mut LoadReport,
) -> Result<(), LoadError> {
    let table = Table::open(path, file)?;
    let taxid = table.col("taxid")?;
    let parent = table.col("parent")?;
    let rank = table.col("rank")?;
    for (line, row) in &table.rows {
        let t = TaxId(row[taxid].trim().parse().map_err(|_| {
            table.malformed(*line, format!("bad taxid {:?}", row[taxid]))
        })?);
        let parent_s = row[parent].trim();
        let parent = if parent_s.is_empty() {
            None
        } else {
            let p = TaxId(parent_s.parse().map_err(|_| {
                table.malformed(*line, format!("bad parent {parent_s:?}"))
            })?);
            // NCBI convention: the root lists itself as its own parent.
            (p != t).then_some(p)
        };
        let entry = TaxEntry {
            parent,
            rank: row[rank].trim().to_string(),
        };
        if kg.taxonomy.entries.insert(t, entry).is_some() {
            return Err(LoadError::DuplicateId {
                file: file.to_string(),
                id: t.to_string(),
            });
        }
    }
    report
        .row_counts
        .insert(file.to_string(), kg.taxonomy.entries.len());
    Ok(())
}

fn load_terms(
    path: &Path,
    file: &str,
    kg: &mut KnowledgeGraph,
    report: &mut LoadReport,
) -> Result<(), LoadError> {
    let table = Table::open(path, file)?;
    let term_id = table.col("term_id")?;
    let ty = table.col("type")?;
    for (line, row) in &table.rows {
        let id = TermId::new(row[term_id].trim());
        let term_type =
            TermType::from_str(row[ty].trim()).map_err(|e| table.malformed(*line, e))?;
        if kg.terms.nodes.insert(id.clone(), term_type).is_some() {
            return Err(LoadError::DuplicateId {
                file: file.to_string(),
                id: id.0,
            });
        }
    }
    report.row_counts.insert(file.to_string(), kg.terms.nodes.len());
    Ok(())
}

fn load_term_edges(
    path: &Path,
    file: &str,
    kg: &mut KnowledgeGraph,
    report: &mut LoadReport,
) -> Result<(), LoadError> {
    let table = Table::open(path, file)?;
    let src = table.col("src")?;
    let dst = table.col("dst")?;
    let weight = table.col("weight")?;
    let mut kept = 0usize;
    for (line, row) in &table.rows {
        let a = TermId::new(row[src].trim());
        let b = TermId::new(row[dst].trim());
        let mut dangling = false;
        for id in [&a, &b] {
            if !kg.terms.nodes.contains_key(id) {
                report.issues.push(LoadIssue::DanglingRef {
                    file: file.to_string(),
                    line: *line,
                    key: id.0.clone(),
                });
                dangling = true;
            }
        }
        if dangling {
            continue;
        }
        let w: f64 = row[weight].trim().parse().map_err(|_| {
            table.malformed(*line, format!("bad weight {:?}", row[weight]))
        })?;
        if !w.is_finite() || w <= 0.0 {
            return Err(table.malformed(*line, format!("weight must be > 0, got {w}")));
        }
        if a == b {
            return Err(table.malformed(*line, format!("self-loop on {a}")));
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        kg.terms.edges.push((lo, hi, w));
        kept += 1;
    }
    report.row_counts.insert(file.to_string(), kept);
    Ok(())
}

fn load_pathways(
    path: &Path,
    file: &str,
    kg: &mut KnowledgeGraph,
    report: &mut LoadReport,
) -> Result<(), LoadError> {
    let table = Table::open(path, file)?;
    let pathway_id = table.col("pathway_id")?;
    let entrez = table.col("entrez_id")?;
    let mut kept = 0usize;
    for (line, row) in &table.rows {
        let pid = PathwayId::new(row[pathway_id].trim());
        let gene = EntrezId(row[entrez].trim().parse().map_err(|_| {
            table.malformed(*line, format!("bad entrez_id {:?}", row[entrez]))
        })?);
        kg.pathways.pathways.entry(pid).or_default().insert(gene);
        kept += 1;
    }
    report.row_counts.insert(file.to_string(), kept);
    Ok(())
}
