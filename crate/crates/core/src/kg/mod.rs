//! Knowledge-graph store: ingestion, validation, export, corpus stats.

mod export;
mod load;
mod schema;
mod stats;
mod types;
mod validate;

pub use export::write_knowledge_graph;
pub use load::{load_knowledge_graph, LoadError, LoadIssue, LoadReport};
pub use schema::SchemaConfig;
pub use stats::{formula_stats, CorpusStats, StatsError};
pub use types::*;
pub use validate::{validate, ValidationReport, Violation};

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use std::path::Path;

    /// Writes the 3-herb fixture: 3 herbs, 2 formulas, 2 pairs.
    pub fn write_fixture(dir: &Path) {
        fs::write(
            dir.join("property_vocab.csv"),
            "kind,token\n\
             nature,warm\nnature,cold\n\
             flavor,bitter\nflavor,sweet\n\
             meridian,lung\nmeridian,liver\nmeridian,heart\n",
        )
        .unwrap();
        fs::write(
            dir.join("chp.csv"),
            "id,name,kingdom,taxid,natures,flavors,meridians,efficacy\n\
             CHP00001,herb one,Plantae,10,warm,bitter,lung|liver,clears heat\n\
             CHP00002,herb two,Plantae,11,cold,sweet|bitter,heart,tonifies qi\n\
             CHP00003,herb three,Mineralia,,warm,bitter,lung,\n",
        )
        .unwrap();
        fs::write(
            dir.join("formulas.csv"),
            "id,labels\nF001,10000\nF002,01001\n",
        )
        .unwrap();
        fs::write(
            dir.join("formula_members.csv"),
            "formula_id,chp_id,dose_g\n\
             F001,CHP00001,10\n\
             F001,CHP00002,30\n\
             F002,CHP00002,6\n\
             F002,CHP00003,\n",
        )
        .unwrap();
        fs::write(
            dir.join("compounds.csv"),
            "inchikey,class,mw,logp,hbd,hba\n\
             AAAAAAAAAAAAAA-BBBBBBBBBB-C,terpenoid,400,2,2,5\n\
             DDDDDDDDDDDDDD-EEEEEEEEEE-F,alkaloid,900,6,7,12\n",
        )
        .unwrap();
        fs::write(
            dir.join("pairs.csv"),
            "inchikey,entrez_id,affinity,provenance\n\
             AAAAAAAAAAAAAA-BBBBBBBBBB-C,1017,6.2,Recorded\n\
             DDDDDDDDDDDDDD-EEEEEEEEEE-F,1956,4.1,Recorded\n",
        )
        .unwrap();
        fs::write(
            dir.join("taxonomy.csv"),
            "taxid,parent,rank\n1,,root\n10,1,species\n11,1,species\n",
        )
        .unwrap();
        fs::write(
            dir.join("terms.csv"),
            "term_id,type\nT1,etiology\nT2,pathogenesis\nT3,treatment method\n",
        )
        .unwrap();
        fs::write(
            dir.join("term_edges.csv"),
            "src,dst,weight\nT1,T2,2\nT2,T3,1\n",
        )
        .unwrap();
        fs::write(
            dir.join("pathways.csv"),
            "pathway_id,entrez_id\nhsa04020,1017\nhsa04020,1956\nhsa04010,1017\n",
        )
        .unwrap();
    }

    fn schema_no_features() -> SchemaConfig {
        SchemaConfig {
            compound_features: None,
            ..SchemaConfig::default()
        }
    }

    #[test]
    fn loads_three_herb_fixture() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        let (kg, report) = load_knowledge_graph(dir.path(), &schema_no_features()).unwrap();
        assert_eq!(kg.herbs.len(), 3);
        assert_eq!(kg.formulas.len(), 2);
        assert_eq!(kg.pairs.len(), 2);
        assert!(report.issues.is_empty());
        assert_eq!(report.row_counts["chp.csv"], 3);
        // Member order preserved from source rows.
        let f1 = &kg.formulas[&FormulaId::new("F001")];
        assert_eq!(f1.members[0].herb.as_str(), "CHP00001");
        assert_eq!(f1.members[1].dose_g, Some(30.0));
        // Unknown dose is absent, never 0.
        let f2 = &kg.formulas[&FormulaId::new("F002")];
        assert_eq!(f2.members[1].dose_g, None);
    }

    #[test]
    fn empty_formulas_file_loads_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::write(dir.path().join("formulas.csv"), "id,labels\n").unwrap();
        fs::write(
            dir.path().join("formula_members.csv"),
            "formula_id,chp_id,dose_g\n",
        )
        .unwrap();
        let (kg, report) = load_knowledge_graph(dir.path(), &schema_no_features()).unwrap();
        assert_eq!(kg.formulas.len(), 0);
        assert!(report.issues.is_empty());
    }

    #[test]
    fn dangling_member_dropped_with_issue() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::write(
            dir.path().join("formula_members.csv"),
            "formula_id,chp_id,dose_g\nF001,CHP99999,10\nF001,CHP00001,5\n",
        )
        .unwrap();
        let (kg, report) = load_knowledge_graph(dir.path(), &schema_no_features()).unwrap();
        assert_eq!(report.issues.len(), 1);
        assert!(matches!(
            &report.issues[0],
            LoadIssue::DanglingRef { key, .. } if key == "CHP99999"
        ));
        let f1 = &kg.formulas[&FormulaId::new("F001")];
        assert_eq!(f1.members.len(), 1);
    }

    #[test]
    fn missing_file_and_duplicate_id_abort() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::remove_file(dir.path().join("pairs.csv")).unwrap();
        assert!(matches!(
            load_knowledge_graph(dir.path(), &schema_no_features()),
            Err(LoadError::MissingFile(_))
        ));

        write_fixture(dir.path());
        fs::write(
            dir.path().join("chp.csv"),
            "id,name,kingdom,taxid,natures,flavors,meridians\n\
             CHP00001,a,Plantae,,,,\nCHP00001,b,Plantae,,,,\n",
        )
        .unwrap();
        assert!(matches!(
            load_knowledge_graph(dir.path(), &schema_no_features()),
            Err(LoadError::DuplicateId { .. })
        ));
    }

    #[test]
    fn validate_clean_fixture_is_empty_and_pure() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        let (kg, _) = load_knowledge_graph(dir.path(), &schema_no_features()).unwrap();
        let r1 = validate(&kg);
        let r2 = validate(&kg);
        assert!(r1.is_empty(), "unexpected violations: {:?}", r1.violations);
        assert_eq!(r1, r2);
    }

    #[test]
    fn validate_flags_taxonomy_cycle() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::write(
            dir.path().join("taxonomy.csv"),
            "taxid,parent,rank\n1,,root\n10,11,species\n11,10,species\n",
        )
        .unwrap();
        let (kg, _) = load_knowledge_graph(dir.path(), &schema_no_features()).unwrap();
        let report = validate(&kg);
        assert!(report
            .violations
            .iter()
            .any(|v| v.rule == "CycleDetected" && v.table == "taxonomy"));
    }

    #[test]
    fn validate_flags_nan_affinity() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::write(
            dir.path().join("pairs.csv"),
            "inchikey,entrez_id,affinity,provenance\n\
             AAAAAAAAAAAAAA-BBBBBBBBBB-C,1017,NaN,Recorded\n",
        )
        .unwrap();
        let (kg, _) = load_knowledge_graph(dir.path(), &schema_no_features()).unwrap();
        let report = validate(&kg);
        assert!(report
            .violations
            .iter()
            .any(|v| v.rule == "NonFiniteAffinity"));
    }

    #[test]
    fn validate_flags_unknown_property_token() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::write(
            dir.path().join("chp.csv"),
            "id,name,kingdom,taxid,natures,flavors,meridians\n\
             CHP00001,a,Plantae,10,scorching,bitter,lung\n",
        )
        .unwrap();
        let (kg, _) = load_knowledge_graph(dir.path(), &schema_no_features()).unwrap();
        let report = validate(&kg);
        assert!(report
            .violations
            .iter()
            .any(|v| v.rule.contains("unknown nature token")));
    }

    #[test]
    fn formula_stats_two_dose_example() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::write(dir.path().join("formulas.csv"), "id,labels\nF001,10000\n").unwrap();
        fs::write(
            dir.path().join("formula_members.csv"),
            "formula_id,chp_id,dose_g\nF001,CHP00001,10\nF001,CHP00002,30\n",
        )
        .unwrap();
        let (kg, _) = load_knowledge_graph(dir.path(), &schema_no_features()).unwrap();
        let stats = formula_stats(&kg).unwrap();
        // doses 10 + 30 -> ratios {0.25, 0.75}, mean 0.5
        assert!((stats.mean_dose_ratio - 0.5).abs() < 1e-12);
        assert_eq!(stats.n_dose_ratios, 2);
        assert_eq!(stats.members_histogram[&2], 1);
    }

    #[test]
    fn formula_stats_single_herb_ratio_one() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::write(dir.path().join("formulas.csv"), "id,labels\nF001,10000\n").unwrap();
        fs::write(
            dir.path().join("formula_members.csv"),
            "formula_id,chp_id,dose_g\nF001,CHP00001,12.5\n",
        )
        .unwrap();
        let (kg, _) = load_knowledge_graph(dir.path(), &schema_no_features()).unwrap();
        let stats = formula_stats(&kg).unwrap();
        assert!((stats.mean_dose_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn formula_stats_requires_doses() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        fs::write(
            dir.path().join("formula_members.csv"),
            "formula_id,chp_id,dose_g\nF001,CHP00001,\nF002,CHP00002,\n",
        )
        .unwrap();
        let (kg, _) = load_knowledge_graph(dir.path(), &schema_no_features()).unwrap();
        assert!(matches!(
            formula_stats(&kg),
            Err(StatsError::NoDosedFormulas)
        ));
    }

    #[test]
    fn dose_ratios_sum_to_one_when_all_known() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        let (kg, _) = load_knowledge_graph(dir.path(), &schema_no_features()).unwrap();
        for f in kg.formulas.values().filter(|f| f.all_doses_known()) {
            let total: f64 = f.members.iter().map(|m| m.dose_g.unwrap()).sum();
            let ratio_sum: f64 = f.members.iter().map(|m| m.dose_g.unwrap() / total).sum();
            assert!((ratio_sum - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn export_reload_round_trip_is_identity() {
        let src = tempfile::tempdir().unwrap();
        write_fixture(src.path());
        let (kg, _) = load_knowledge_graph(src.path(), &schema_no_features()).unwrap();

        let out = tempfile::tempdir().unwrap();
        write_knowledge_graph(&kg, out.path(), &schema_no_features()).unwrap();
        let (kg2, report2) = load_knowledge_graph(out.path(), &schema_no_features()).unwrap();
        assert!(report2.issues.is_empty());
        assert_eq!(kg, kg2);
    }
}
