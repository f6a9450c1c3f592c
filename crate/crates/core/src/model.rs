//! Diagrammatic evidence models and the glossary that anchors their
//! vocabulary.
//!
//! An evidence model captures what one primary study claims: a single
//! cause concept, the contextual concepts qualifying it, and one or
//! more effects, each carrying a hypothesis on the intensity scale and
//! a belief value. Concept and effect names are free text tied to a
//! shared glossary so that models from different studies can be lined
//! up term by term.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::EffectStatistics;
use crate::scale::HypothesisSet;

#[derive(Debug, Error)]
pub enum GlossaryError {
    #[error("glossary entry `{0}` has an empty definition")]
    EmptyDefinition(String),
    #[error("term `{term}` is claimed by both `{first}` and `{second}`")]
    AmbiguousTerm {
        term: String,
        first: String,
        second: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlossaryEntry {
    pub definition: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub synonyms: Vec<String>,
}

/// Canonical vocabulary: canonical term -> definition and synonyms.
///
/// Lookup is case-insensitive and whitespace-trimmed. Construction
/// fails if any term (canonical or synonym) could resolve to two
/// different canonical entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GlossaryDocument", into = "GlossaryDocument")]
pub struct Glossary {
    entries: BTreeMap<String, GlossaryEntry>,
    /// Folded term -> canonical spelling.
    lookup: HashMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GlossaryDocument {
    entries: BTreeMap<String, GlossaryEntry>,
}

impl TryFrom<GlossaryDocument> for Glossary {
    type Error = GlossaryError;

    fn try_from(doc: GlossaryDocument) -> Result<Glossary, GlossaryError> {
        Glossary::new(doc.entries)
    }
}

impl From<Glossary> for GlossaryDocument {
    fn from(glossary: Glossary) -> GlossaryDocument {
        GlossaryDocument {
            entries: glossary.entries,
        }
    }
}

fn fold_term(term: &str) -> String {
    term.trim().to_lowercase()
}

impl Glossary {
    pub fn new(entries: BTreeMap<String, GlossaryEntry>) -> Result<Glossary, GlossaryError> {
        let mut lookup: HashMap<String, String> = HashMap::new();
        let mut claim = |term: &str, canonical: &str| -> Result<(), GlossaryError> {
            let folded = fold_term(term);
            match lookup.get(&folded) {
                Some(existing) if existing != canonical => Err(GlossaryError::AmbiguousTerm {
                    term: term.to_string(),
                    first: existing.clone(),
                    second: canonical.to_string(),
                }),
                _ => {
                    lookup.insert(folded, canonical.to_string());
                    Ok(())
                }
            }
        };
        for (canonical, entry) in &entries {
            if entry.definition.trim().is_empty() {
                return Err(GlossaryError::EmptyDefinition(canonical.clone()));
            }
            claim(canonical, canonical)?;
            for synonym in &entry.synonyms {
                claim(synonym, canonical)?;
            }
        }
        Ok(Glossary { entries, lookup })
    }

    pub fn entries(&self) -> &BTreeMap<String, GlossaryEntry> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn resolve(&self, raw: &str) -> Option<&str> {
        self.lookup.get(&fold_term(raw)).map(String::as_str)
    }
}

/// Result of normalizing a raw term against the glossary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NormalizedTerm {
    /// The glossary knows the term; carries the canonical spelling.
    Canonical(String),
    /// Not in the glossary; carries the raw term (trimmed) unchanged.
    Unglossed(String),
}

impl NormalizedTerm {
    pub fn term(&self) -> &str {
        match self {
            NormalizedTerm::Canonical(t) | NormalizedTerm::Unglossed(t) => t,
        }
    }

    pub fn is_glossed(&self) -> bool {
        matches!(self, NormalizedTerm::Canonical(_))
    }
}

impl fmt::Display for NormalizedTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.term())
    }
}

/// Map a raw term to its canonical glossary spelling (case-insensitive,
/// whitespace-trimmed, synonyms included). Unknown terms pass through
/// flagged as unglossed. Idempotent: canonical terms map to themselves.
pub fn normalize_term(raw: &str, glossary: &Glossary) -> NormalizedTerm {
    match glossary.resolve(raw) {
        Some(canonical) => NormalizedTerm::Canonical(canonical.to_string()),
        None => NormalizedTerm::Unglossed(raw.trim().to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConceptKind {
    /// Abstract archetype other concepts specialize.
    Archetype,
    /// The intervention under study; exactly one per model.
    Cause,
    /// Anything qualifying where and how the cause was applied.
    ContextualAspect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationKind {
    IsA,
    PartOf,
    PropertyOf,
}

/// A directed, typed link from the owning concept to `target`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relation {
    pub kind: RelationKind,
    pub target: String,
}

/// A named node of the evidence diagram.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueConcept {
    pub name: String,
    pub kind: ConceptKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<Relation>,
}

impl ValueConcept {
    pub fn new(name: impl Into<String>, kind: ConceptKind) -> ValueConcept {
        ValueConcept {
            name: name.into(),
            kind,
            relations: Vec::new(),
        }
    }

    pub fn with_relation(mut self, kind: RelationKind, target: impl Into<String>) -> ValueConcept {
        self.relations.push(Relation {
            kind,
            target: target.into(),
        });
        self
    }
}

/// One claimed effect of the cause, with the study's support for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Effect {
    pub name: String,
    /// Where on the intensity scale the study places this effect.
    pub hypothesis: HypothesisSet,
    /// How strongly the study supports the hypothesis, in [0, 1].
    pub belief: f64,
    /// Number of measured configurations behind the claim.
    pub sample_count: usize,
    /// Raw improvement statistics, when the study published them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<EffectStatistics>,
}

/// The evidence extracted from one primary study for one studied model
/// or configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EvidenceModel {
    /// Unique id within a corpus, e.g. `S3-E2`.
    pub id: String,
    /// The primary study this model was extracted from, e.g. `S3`.
    pub study_id: String,
    pub cause: ValueConcept,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub context: Vec<ValueConcept>,
    pub effects: Vec<Effect>,
    /// Free-text citation of the source.
    pub provenance: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl EvidenceModel {
    /// All concepts of the diagram: the cause followed by the context.
    pub fn concepts(&self) -> impl Iterator<Item = &ValueConcept> {
        std::iter::once(&self.cause).chain(self.context.iter())
    }
}

/// Why a model failed validation. Violations are data, not errors: a
/// validation run reports all of them instead of stopping at the first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    CauseKindMismatch,
    ExtraCause,
    UnknownRelationTarget,
    RelationCycle,
    DuplicateEffect,
    UnglossedTerm,
    BeliefOutOfRange,
    SampleCountMismatch,
    InconsistentStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Validation outcome for one evidence model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationReport {
    pub model_id: String,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the structural and vocabulary invariants of one model.
///
/// Verified: the cause slot holds a cause concept and nothing else
/// does; relation targets name concepts of the same model; is-a and
/// part-of links form no cycle; effect names are unique after
/// normalization; every concept and effect name is in the glossary;
/// beliefs lie in [0, 1]; sample counts and stored statistics agree
/// with the raw improvements.
pub fn validate_model(model: &EvidenceModel, glossary: &Glossary) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |kind: ViolationKind, message: String| {
        violations.push(Violation { kind, message });
    };

    if model.cause.kind != ConceptKind::Cause {
        push(
            ViolationKind::CauseKindMismatch,
            format!(
                "cause slot holds `{}`, which is not a cause concept",
                model.cause.name
            ),
        );
    }
    for concept in &model.context {
        if concept.kind == ConceptKind::Cause {
            push(
                ViolationKind::ExtraCause,
                format!(
                    "context concept `{}` is a second cause; a model has exactly one",
                    concept.name
                ),
            );
        }
    }

    // Vocabulary: every concept and effect name must resolve against
    // the glossary.
    for concept in model.concepts() {
        if !normalize_term(&concept.name, glossary).is_glossed() {
            push(
                ViolationKind::UnglossedTerm,
                format!("concept `{}` is not in the glossary", concept.name),
            );
        }
    }
    for effect in &model.effects {
        if !normalize_term(&effect.name, glossary).is_glossed() {
            push(
                ViolationKind::UnglossedTerm,
                format!("effect `{}` is not in the glossary", effect.name),
            );
        }
    }

    // Relations must point at concepts of this model (normalized
    // comparison, so a synonym may name its target).
    let canonical_names: BTreeSet<String> = model
        .concepts()
        .map(|c| normalize_term(&c.name, glossary).term().to_string())
        .collect();
    for concept in model.concepts() {
        for relation in &concept.relations {
            let target = normalize_term(&relation.target, glossary);
            if !canonical_names.contains(target.term()) {
                push(
                    ViolationKind::UnknownRelationTarget,
                    format!(
                        "relation target `{}` of concept `{}` names no concept in this model",
                        relation.target, concept.name
                    ),
                );
            }
        }
    }

    // is-a / part-of edges must be acyclic. Walk the normalized-name
    // graph with a plain three-color depth-first search.
    let structural_edges: BTreeMap<String, Vec<String>> = model
        .concepts()
        .map(|c| {
            let from = normalize_term(&c.name, glossary).term().to_string();
            let to = c
                .relations
                .iter()
                .filter(|r| matches!(r.kind, RelationKind::IsA | RelationKind::PartOf))
                .map(|r| normalize_term(&r.target, glossary).term().to_string())
                .collect();
            (from, to)
        })
        .collect();
    if let Some(node) = find_cycle(&structural_edges) {
        push(
            ViolationKind::RelationCycle,
            format!("concept `{node}` participates in an is-a/part-of cycle"),
        );
    }

    let mut seen_effects = BTreeSet::new();
    for effect in &model.effects {
        let canonical = normalize_term(&effect.name, glossary).term().to_string();
        if !seen_effects.insert(canonical) {
            push(
                ViolationKind::DuplicateEffect,
                format!("effect `{}` appears more than once", effect.name),
            );
        }
        if !(0.0..=1.0).contains(&effect.belief) {
            push(
                ViolationKind::BeliefOutOfRange,
                format!(
                    "effect `{}` has belief {}, outside [0, 1]",
                    effect.name, effect.belief
                ),
            );
        }
        if let Some(stats) = &effect.stats {
            if effect.sample_count == 0 {
                push(
                    ViolationKind::SampleCountMismatch,
                    format!(
                        "effect `{}` carries statistics but a sample count of zero",
                        effect.name
                    ),
                );
            }
            if stats.sample_count != stats.improvements.len() {
                push(
                    ViolationKind::SampleCountMismatch,
                    format!(
                        "effect `{}` stores {} improvements but claims {} samples",
                        effect.name,
                        stats.improvements.len(),
                        stats.sample_count
                    ),
                );
            } else if !stats.is_consistent(1e-9) {
                push(
                    ViolationKind::InconsistentStats,
                    format!(
                        "effect `{}` has mean/iqr/ci95 that do not match its improvements",
                        effect.name
                    ),
                );
            }
        }
    }

    ValidationReport {
        model_id: model.id.clone(),
        violations,
    }
}

/// First node found on a cycle of the edge map, if any. Depth-first
/// walk; a node is "open" while its subtree is being explored and
/// "done" afterwards, so hitting an open node again means a cycle.
fn find_cycle(edges: &BTreeMap<String, Vec<String>>) -> Option<String> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    fn visit(
        node: &str,
        edges: &BTreeMap<String, Vec<String>>,
        marks: &mut BTreeMap<String, Mark>,
    ) -> Option<String> {
        match marks.get(node) {
            Some(Mark::Open) => return Some(node.to_string()),
            Some(Mark::Done) => return None,
            None => {}
        }
        marks.insert(node.to_string(), Mark::Open);
        if let Some(targets) = edges.get(node) {
            for target in targets {
                if let Some(found) = visit(target, edges, marks) {
                    return Some(found);
                }
            }
        }
        marks.insert(node.to_string(), Mark::Done);
        None
    }
    let mut marks = BTreeMap::new();
    for node in edges.keys() {
        if let Some(found) = visit(node, edges, &mut marks) {
            return Some(found);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::IntensityPoint;

    fn glossary() -> Glossary {
        let mut entries = BTreeMap::new();
        let mut add = |name: &str, synonyms: &[&str]| {
            entries.insert(
                name.to_string(),
                GlossaryEntry {
                    definition: format!("definition of {name}"),
                    synonyms: synonyms.iter().map(|s| s.to_string()).collect(),
                },
            );
        };
        add("Model quantization", &["Quantization"]);
        add("Model optimization technique", &[]);
        add("DL model", &["Deep learning model", "Large Language Model"]);
        add("Accuracy", &["Top-1 accuracy"]);
        add("Storage size", &["Model size"]);
        Glossary::new(entries).unwrap()
    }

    fn valid_model() -> EvidenceModel {
        EvidenceModel {
            id: "S1-E1".into(),
            study_id: "S1".into(),
            cause: ValueConcept::new("Model quantization", ConceptKind::Cause)
                .with_relation(RelationKind::IsA, "Model optimization technique"),
            context: vec![
                ValueConcept::new("Model optimization technique", ConceptKind::Archetype),
                ValueConcept::new("DL model", ConceptKind::ContextualAspect),
            ],
            effects: vec![Effect {
                name: "Accuracy".into(),
                hypothesis: HypothesisSet::singleton(IntensityPoint::Indifferent),
                belief: 0.37,
                sample_count: 1,
                stats: None,
            }],
            provenance: "synthetic".into(),
            metadata: BTreeMap::new(),
        }
    }

    #[test]
    fn normalization_resolves_synonyms_case_insensitively() {
        let g = glossary();
        assert_eq!(
            normalize_term("quantization", &g),
            NormalizedTerm::Canonical("Model quantization".into())
        );
        assert_eq!(
            normalize_term("  Large language model  ", &g),
            NormalizedTerm::Canonical("DL model".into())
        );
        assert_eq!(
            normalize_term("Blue Paint", &g),
            NormalizedTerm::Unglossed("Blue Paint".into())
        );
    }

    #[test]
    fn normalization_is_idempotent() {
        let g = glossary();
        for raw in ["quantization", "DL model", "Blue Paint"] {
            let once = normalize_term(raw, &g);
            let twice = normalize_term(once.term(), &g);
            assert_eq!(once.term(), twice.term());
        }
    }

    #[test]
    fn glossary_rejects_ambiguous_terms() {
        let mut entries = BTreeMap::new();
        entries.insert(
            "A".to_string(),
            GlossaryEntry {
                definition: "a".into(),
                synonyms: vec!["shared".into()],
            },
        );
        entries.insert(
            "B".to_string(),
            GlossaryEntry {
                definition: "b".into(),
                synonyms: vec!["Shared".into()],
            },
        );
        assert!(matches!(
            Glossary::new(entries),
            Err(GlossaryError::AmbiguousTerm { .. })
        ));
    }

    #[test]
    fn glossary_rejects_empty_definitions() {
        let mut entries = BTreeMap::new();
        entries.insert(
            "A".to_string(),
            GlossaryEntry {
                definition: "  ".into(),
                synonyms: vec![],
            },
        );
        assert!(matches!(
            Glossary::new(entries),
            Err(GlossaryError::EmptyDefinition(_))
        ));
    }

    #[test]
    fn valid_model_passes() {
        let report = validate_model(&valid_model(), &glossary());
        assert!(
            report.is_valid(),
            "unexpected violations: {:?}",
            report.violations
        );
    }

    #[test]
    fn two_causes_are_flagged() {
        let mut model = valid_model();
        model
            .context
            .push(ValueConcept::new("Model quantization", ConceptKind::Cause));
        let report = validate_model(&model, &glossary());
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::ExtraCause));
    }

    #[test]
    fn dangling_relation_target_is_flagged() {
        let mut model = valid_model();
        model.cause.relations[0].target = "Parrot".into();
        let report = validate_model(&model, &glossary());
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::UnknownRelationTarget));
    }

    #[test]
    fn relation_target_may_use_a_synonym() {
        let mut model = valid_model();
        // "Deep learning model" resolves to the "DL model" context concept.
        model.cause.relations.push(Relation {
            kind: RelationKind::PropertyOf,
            target: "Deep learning model".into(),
        });
        let report = validate_model(&model, &glossary());
        assert!(report.is_valid(), "{:?}", report.violations);
    }

    #[test]
    fn structural_cycle_is_flagged() {
        let mut model = valid_model();
        model.context[0] =
            ValueConcept::new("Model optimization technique", ConceptKind::Archetype)
                .with_relation(RelationKind::PartOf, "DL model");
        model.context[1] = ValueConcept::new("DL model", ConceptKind::ContextualAspect)
            .with_relation(RelationKind::PartOf, "Model optimization technique");
        let report = validate_model(&model, &glossary());
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::RelationCycle));
    }

    #[test]
    fn property_of_links_may_point_back() {
        // Only is-a and part-of edges are structural; a property-of
        // back-edge is not a cycle.
        let mut model = valid_model();
        model.context[1] = ValueConcept::new("DL model", ConceptKind::ContextualAspect)
            .with_relation(RelationKind::PropertyOf, "Model quantization");
        model.cause = ValueConcept::new("Model quantization", ConceptKind::Cause)
            .with_relation(RelationKind::PropertyOf, "DL model");
        let report = validate_model(&model, &glossary());
        assert!(report.is_valid(), "{:?}", report.violations);
    }

    #[test]
    fn duplicate_effects_are_flagged_after_normalization() {
        let mut model = valid_model();
        let mut dup = model.effects[0].clone();
        dup.name = "top-1 accuracy".into(); // synonym of Accuracy
        model.effects.push(dup);
        let report = validate_model(&model, &glossary());
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::DuplicateEffect));
    }

    #[test]
    fn unglossed_names_are_flagged() {
        let mut model = valid_model();
        model.effects[0].name = "Parrot count".into();
        let report = validate_model(&model, &glossary());
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::UnglossedTerm));
    }

    #[test]
    fn belief_range_is_checked() {
        let mut model = valid_model();
        model.effects[0].belief = 1.2;
        let report = validate_model(&model, &glossary());
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::BeliefOutOfRange));
    }

    #[test]
    fn stats_must_match_improvements() {
        let mut model = valid_model();
        let mut stats = EffectStatistics::from_improvements(vec![0.4, 0.6]).unwrap();
        stats.mean = 0.9; // corrupted
        model.effects[0].stats = Some(stats);
        model.effects[0].sample_count = 2;
        let report = validate_model(&model, &glossary());
        assert!(report
            .violations
            .iter()
            .any(|v| v.kind == ViolationKind::InconsistentStats));
    }

    #[test]
    fn evidence_model_json_round_trip() {
        let mut model = valid_model();
        model.effects[0].stats = Some(EffectStatistics::from_improvements(vec![0.4, 0.6]).unwrap());
        model.effects[0].sample_count = 2;
        let json = serde_json::to_string_pretty(&model).unwrap();
        let back: EvidenceModel = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
        // Field names follow the document convention.
        assert!(json.contains("\"studyId\""));
        assert!(json.contains("\"sampleCount\""));
        assert!(json.contains("\"ci95\""));
    }

    #[test]
    fn hypothesis_serializes_as_notation() {
        let model = valid_model();
        let json = serde_json::to_string(&model).unwrap();
        assert!(json.contains("\"hypothesis\":\"IF\""));
    }
}
