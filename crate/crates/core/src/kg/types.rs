//! Domain types for the knowledge-graph store.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                $name(s.into())
            }
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }
    };
}

string_id!(
    /// Herbal-piece identifier, "CHP" followed by 5 digits.
    HerbId
);
string_id!(FormulaId);
string_id!(
    /// Standard 27-character InChIKey.
    InChIKey
);
string_id!(TermId);
string_id!(PathwayId);

/// NCBI-style taxonomy identifier.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TaxId(pub i64);

impl fmt::Display for TaxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Entrez gene identifier.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct EntrezId(pub i64);

impl fmt::Display for EntrezId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Taxonomic kingdom of a herbal piece's source organism.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum Kingdom {
    Plantae,
    Animalia,
    Fungi,
    Algae,
    Mineralia,
}

impl Kingdom {
    pub const ALL: [Kingdom; 5] = [
        Kingdom::Plantae,
        Kingdom::Animalia,
        Kingdom::Fungi,
        Kingdom::Algae,
        Kingdom::Mineralia,
    ];

    /// Position in the one-hot source segment.
    pub fn index(self) -> usize {
        match self {
            Kingdom::Plantae => 0,
            Kingdom::Animalia => 1,
            Kingdom::Fungi => 2,
            Kingdom::Algae => 3,
            Kingdom::Mineralia => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Kingdom::Plantae => "Plantae",
            Kingdom::Animalia => "Animalia",
            Kingdom::Fungi => "Fungi",
            Kingdom::Algae => "Algae",
            Kingdom::Mineralia => "Mineralia",
        }
    }
}

impl FromStr for Kingdom {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Plantae" => Ok(Kingdom::Plantae),
            "Animalia" => Ok(Kingdom::Animalia),
            "Fungi" => Ok(Kingdom::Fungi),
            "Algae" => Ok(Kingdom::Algae),
            "Mineralia" => Ok(Kingdom::Mineralia),
            other => Err(format!("unknown kingdom {other:?}")),
        }
    }
}

/// The three medicinal-property categories plus efficacy annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HerbPiece {
    pub id: HerbId,
    pub name: String,
    pub kingdom: Kingdom,
    pub taxid: Option<TaxId>,
    /// Therapeutic natures (e.g. warm, cold), in source order.
    pub natures: Vec<String>,
    /// Medicinal flavors (e.g. bitter, sweet), in source order.
    pub flavors: Vec<String>,
    /// Meridian tropisms (organ-channel affinities), in source order.
    pub meridians: Vec<String>,
    /// Efficacy phrases, embedded as whole tokens.
    pub efficacy: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaMember {
    pub herb: HerbId,
    /// Dose in grams; `None` means the source does not record it.
    /// Never encoded as 0 here — 0 is reserved for the model-facing slot.
    pub dose_g: Option<f64>,
}

pub const NUM_LABELS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Formula {
    pub id: FormulaId,
    /// Members in source row order; that order is the combination-corpus
    /// sentence order.
    pub members: Vec<FormulaMember>,
    /// Five etiological-category bits; `None` for unlabeled (prediction-only)
    /// formulas.
    pub labels: Option<[bool; NUM_LABELS]>,
}

impl Formula {
    pub fn all_doses_known(&self) -> bool {
        self.members.iter().all(|m| m.dose_g.is_some())
    }
}

/// Provenance of a compound-target association.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum Provenance {
    Recorded,
    Diffused,
    HighFidelity,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Recorded => "Recorded",
            Provenance::Diffused => "Diffused",
            Provenance::HighFidelity => "HighFidelity",
        }
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Recorded" => Ok(Provenance::Recorded),
            "Diffused" => Ok(Provenance::Diffused),
            "HighFidelity" => Ok(Provenance::HighFidelity),
            other => Err(format!("unknown provenance {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundTargetPair {
    pub inchikey: InChIKey,
    pub entrez_id: EntrezId,
    /// pK-like binding affinity; `None` until external scoring is ingested.
    pub affinity: Option<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundRecord {
    pub inchikey: InChIKey,
    /// Named numeric descriptors (molecular weight, logP, ...).
    pub descriptors: BTreeMap<String, f64>,
    /// Component-class annotation (e.g. NPClassifier class), when ingested.
    pub class: Option<String>,
}

/// Precomputed compound feature vectors, one row per InChIKey.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundFeatures {
    pub matrix: crate::io::F32Matrix,
    /// Row order; `matrix.row(i)` belongs to `row_index[i]`.
    pub row_index: Vec<InChIKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxEntry {
    pub parent: Option<TaxId>,
    pub rank: String,
}

/// Taxonomy forest: parent links, roots have no parent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TaxonomyTable {
    pub entries: BTreeMap<TaxId, TaxEntry>,
}

impl TaxonomyTable {
    pub fn parent(&self, t: TaxId) -> Option<TaxId> {
        self.entries.get(&t).and_then(|e| e.parent)
    }

    /// Walks to the root; returns `None` on a cycle or a dangling parent.
    pub fn root_of(&self, t: TaxId) -> Option<TaxId> {
        let mut cur = t;
        let mut steps = 0usize;
        loop {
            if !self.entries.contains_key(&cur) {
                return None;
            }
            match self.parent(cur) {
                None => return Some(cur),
                Some(p) => {
                    cur = p;
                    steps += 1;
                    if steps > self.entries.len() {
                        return None; // cycle
                    }
                }
            }
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum TermType {
    Etiology,
    Pathogenesis,
    Pattern,
    TreatmentMethod,
    TreatmentPrinciple,
}

impl TermType {
    pub const ALL: [TermType; 5] = [
        TermType::Etiology,
        TermType::Pathogenesis,
        TermType::Pattern,
        TermType::TreatmentMethod,
        TermType::TreatmentPrinciple,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TermType::Etiology => "etiology",
            TermType::Pathogenesis => "pathogenesis",
            TermType::Pattern => "pattern",
            TermType::TreatmentMethod => "treatment method",
            TermType::TreatmentPrinciple => "treatment principle",
        }
    }
}

impl FromStr for TermType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "etiology" => Ok(TermType::Etiology),
            "pathogenesis" => Ok(TermType::Pathogenesis),
            "pattern" => Ok(TermType::Pattern),
            "treatment method" => Ok(TermType::TreatmentMethod),
            "treatment principle" => Ok(TermType::TreatmentPrinciple),
            other => Err(format!("unknown term type {other:?}")),
        }
    }
}

/// Weighted undirected graph over diagnostic terms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TermGraph {
    pub nodes: BTreeMap<TermId, TermType>,
    /// Undirected edges, stored once with src < dst.
    pub edges: Vec<(TermId, TermId, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PathwayTable {
    pub pathways: BTreeMap<PathwayId, BTreeSet<EntrezId>>,
    pub universe: BTreeSet<EntrezId>,
}

/// Controlled vocabulary for the three property categories. When loaded,
/// herb property tokens outside it are invariant violations.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PropertyVocab {
    pub natures: BTreeSet<String>,
    pub flavors: BTreeSet<String>,
    pub meridians: BTreeSet<String>,
}

/// Immutable after load; safe for unlimited concurrent readers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KnowledgeGraph {
    pub herbs: BTreeMap<HerbId, HerbPiece>,
    pub formulas: BTreeMap<FormulaId, Formula>,
    pub compounds: BTreeMap<InChIKey, CompoundRecord>,
    pub compound_features: Option<CompoundFeatures>,
    pub pairs: Vec<CompoundTargetPair>,
    pub taxonomy: TaxonomyTable,
    pub terms: TermGraph,
    pub pathways: PathwayTable,
    pub vocab: Option<PropertyVocab>,
}

impl KnowledgeGraph {
    /// All property tokens a herb carries, natures then flavors then
    /// meridians, each in source order. This is the property-corpus sentence.
    pub fn property_tokens(herb: &HerbPiece) -> Vec<&str> {
        herb.natures
            .iter()
            .chain(&herb.flavors)
            .chain(&herb.meridians)
            .map(String::as_str)
            .collect()
    }
}
