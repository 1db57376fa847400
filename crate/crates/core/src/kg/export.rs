//! Writes a `KnowledgeGraph` back out as the same CSV tables it loads from,
//! so a load/write/load round-trip is the identity.

use std::path::Path;

use serde::Serialize;

use super::load::LoadError;
use super::schema::SchemaConfig;
use super::types::*;
use crate::io;

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), LoadError> {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    writer.write_record(header).map_err(|source| LoadError::Csv {
        file: path.display().to_string(),
        source,
    })?;
    for row in rows {
        writer.write_record(row).map_err(|source| LoadError::Csv {
            file: path.display().to_string(),
            source,
        })?;
    }
    let bytes = writer.into_inner().expect("vec writer");
    io::write_atomic(path, &bytes)?;
    Ok(())
}

fn fmt_dose(d: Option<f64>) -> String {
    d.map(|v| format!("{v}")).unwrap_or_default()
}

pub fn write_knowledge_graph(
    kg: &KnowledgeGraph,
    dir: &Path,
    schema: &SchemaConfig,
) -> Result<(), LoadError> {
    if let Some(name) = &schema.property_vocab {
        let vocab = kg.vocab.clone().unwrap_or_default();
        let mut rows = Vec::new();
        for t in &vocab.natures {
            rows.push(vec!["nature".into(), t.clone()]);
        }
        for t in &vocab.flavors {
            rows.push(vec!["flavor".into(), t.clone()]);
        }
        for t in &vocab.meridians {
            rows.push(vec!["meridian".into(), t.clone()]);
        }
        write_csv(&dir.join(name), &["kind", "token"], &rows)?;
    }

    if let Some(name) = &schema.chp {
        let rows: Vec<Vec<String>> = kg
            .herbs
            .values()
            .map(|h| {
                vec![
                    h.id.0.clone(),
                    h.name.clone(),
                    h.kingdom.as_str().to_string(),
                    h.taxid.map(|t| t.to_string()).unwrap_or_default(),
                    h.natures.join("|"),
                    h.flavors.join("|"),
                    h.meridians.join("|"),
                    h.efficacy.join("|"),
                ]
            })
            .collect();
        write_csv(
            &dir.join(name),
            &["id", "name", "kingdom", "taxid", "natures", "flavors", "meridians", "efficacy"],
            &rows,
        )?;
    }

    if let Some(name) = &schema.formulas {
        let rows: Vec<Vec<String>> = kg
            .formulas
            .values()
            .map(|f| {
                let labels = f
                    .labels
                    .map(|bits| {
                        bits.iter()
                            .map(|b| if *b { '1' } else { '0' })
                            .collect::<String>()
                    })
                    .unwrap_or_default();
                vec![f.id.0.clone(), labels]
            })
            .collect();
        write_csv(&dir.join(name), &["id", "labels"], &rows)?;
    }

    if let Some(name) = &schema.formula_members {
        let mut rows = Vec::new();
        for f in kg.formulas.values() {
            for m in &f.members {
                rows.push(vec![f.id.0.clone(), m.herb.0.clone(), fmt_dose(m.dose_g)]);
            }
        }
        write_csv(&dir.join(name), &["formula_id", "chp_id", "dose_g"], &rows)?;
    }

    if let Some(name) = &schema.compounds {
        // Union of descriptor names, fixed column order.
        let mut descriptor_names: Vec<String> = kg
            .compounds
            .values()
            .flat_map(|c| c.descriptors.keys().cloned())
            .collect();
        descriptor_names.sort();
        descriptor_names.dedup();
        let mut header: Vec<&str> = vec!["inchikey", "class"];
        header.extend(descriptor_names.iter().map(String::as_str));
        let rows: Vec<Vec<String>> = kg
            .compounds
            .values()
            .map(|c| {
                let mut row = vec![c.inchikey.0.clone(), c.class.clone().unwrap_or_default()];
                for d in &descriptor_names {
                    row.push(c.descriptors.get(d).map(|v| format!("{v}")).unwrap_or_default());
                }
                row
            })
            .collect();
        write_csv(&dir.join(name), &header, &rows)?;
    }

    if let Some(name) = &schema.compound_features {
        if let Some(features) = &kg.compound_features {
            #[derive(Serialize)]
            struct Side<'a> {
                rows: usize,
                cols: usize,
                row_index: Vec<&'a str>,
            }
            io::write_f32_matrix(
                &dir.join(name),
                &features.matrix,
                &Side {
                    rows: features.matrix.rows,
                    cols: features.matrix.cols,
                    row_index: features.row_index.iter().map(|k| k.as_str()).collect(),
                },
            )?;
        }
    }

    if let Some(name) = &schema.pairs {
        let rows: Vec<Vec<String>> = kg
            .pairs
            .iter()
            .map(|p| {
                vec![
                    p.inchikey.0.clone(),
                    p.entrez_id.to_string(),
                    p.affinity.map(|a| format!("{a}")).unwrap_or_default(),
                    p.provenance.as_str().to_string(),
                ]
            })
            .collect();
        write_csv(
            &dir.join(name),
            &["inchikey", "entrez_id", "affinity", "provenance"],
            &rows,
        )?;
    }

    if let Some(name) = &schema.taxonomy {
        let rows: Vec<Vec<String>> = kg
            .taxonomy
            .entries
            .iter()
            .map(|(t, e)| {
                vec![
                    t.to_string(),
                    e.parent.map(|p| p.to_string()).unwrap_or_default(),
                    e.rank.clone(),
                ]
            })
            .collect();
        write_csv(&dir.join(name), &["taxid", "parent", "rank"], &rows)?;
    }

    if let Some(name) = &schema.terms {
        let rows: Vec<Vec<String>> = kg
            .terms
            .nodes
            .iter()
            .map(|(id, ty)| vec![id.0.clone(), ty.as_str().to_string()])
            .collect();
        write_csv(&dir.join(name), &["term_id", "type"], &rows)?;
    }

    if let Some(name) = &schema.term_edges {
        let rows: Vec<Vec<String>> = kg
            .terms
            .edges
            .iter()
            .map(|(a, b, w)| vec![a.0.clone(), b.0.clone(), format!("{w}")])
            .collect();
        write_csv(&dir.join(name), &["src", "dst", "weight"], &rows)?;
    }

    if let Some(name) = &schema.pathways {
        let mut rows = Vec::new();
        for (pid, members) in &kg.pathways.pathways {
            for gene in members {
                rows.push(vec![pid.0.clone(), gene.to_string()]);
            }
        }
        write_csv(&dir.join(name), &["pathway_id", "entrez_id"], &rows)?;
    }

    Ok(())
}
