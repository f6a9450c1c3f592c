//! Cross-study aggregation of evidence models.
//!
//! Models that talk about the same cause are lined up effect by effect
//! (after glossary normalization and any configured joins), each
//! effect's bodies of evidence are pooled with Dempster's rule, and the
//! result is a single aggregated model: one record per effect plus the
//! merged context vocabulary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dst::{combine_all, DstError, SimpleSupport};
use crate::model::normalize_term;
use crate::model::{ConceptKind, EvidenceModel, Glossary, ValueConcept};
use crate::scale::HypothesisSet;

#[derive(Debug, Error)]
pub enum AggregationError {
    #[error("no evidence models to aggregate")]
    EmptyCorpus,
    #[error(
        "models `{model_a}` and `{model_b}` have incompatible causes (`{cause_a}` vs `{cause_b}`)"
    )]
    IncompatibleCauses {
        model_a: String,
        model_b: String,
        cause_a: String,
        cause_b: String,
    },
    #[error("effect `{effect}` of model `{model}` has belief {belief}, outside [0, 1]")]
    InvalidBelief {
        effect: String,
        model: String,
        belief: f64,
    },
    #[error("total conflict pooling effect `{effect}`; contributing models: {}", models.join(", "))]
    TotalConflict { effect: String, models: Vec<String> },
    #[error("join map lists `{member}` in more than one join")]
    OverlappingJoins { member: String },
    #[error("join `{canonical_name}` has no members")]
    EmptyJoin { canonical_name: String },
    #[error("metadata key `{key}` missing on models: {}", models.join(", "))]
    MissingGroupKey { key: String, models: Vec<String> },
}

/// One configured equivalence: all `members` are treated as
/// `canonical_name` during aggregation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Join {
    pub canonical_name: String,
    pub members: Vec<String>,
}

/// Analyst-supplied matching decisions: which differently-named
/// concepts to treat as one, which to discard, and which to carry into
/// the aggregate unmerged even if their names collide.
///
/// Join maps speak the canonical glossary vocabulary; lookups fold case
/// and surrounding whitespace but do not chase synonyms (normalize
/// against the glossary first).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(
    rename_all = "camelCase",
    deny_unknown_fields,
    try_from = "JoinMapDocument"
)]
pub struct JoinMap {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joins: Vec<Join>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drops: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keep_unmerged: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct JoinMapDocument {
    #[serde(default)]
    joins: Vec<Join>,
    #[serde(default)]
    drops: Vec<String>,
    #[serde(default)]
    keep_unmerged: Vec<String>,
}

impl TryFrom<JoinMapDocument> for JoinMap {
    type Error = AggregationError;

    fn try_from(doc: JoinMapDocument) -> Result<JoinMap, AggregationError> {
        JoinMap::new(doc.joins, doc.drops, doc.keep_unmerged)
    }
}

fn fold(term: &str) -> String {
    term.trim().to_lowercase()
}

impl JoinMap {
    pub fn new(
        joins: Vec<Join>,
        drops: Vec<String>,
        keep_unmerged: Vec<String>,
    ) -> Result<JoinMap, AggregationError> {
        let mut seen = std::collections::BTreeSet::new();
        for join in &joins {
            if join.members.is_empty() {
                return Err(AggregationError::EmptyJoin {
                    canonical_name: join.canonical_name.clone(),
                });
            }
            for member in &join.members {
                if !seen.insert(fold(member)) {
                    return Err(AggregationError::OverlappingJoins {
                        member: member.clone(),
                    });
                }
            }
        }
        Ok(JoinMap {
            joins,
            drops,
            keep_unmerged,
        })
    }

    /// Resolve a (glossary-canonical) name through the joins. Returns
    /// the post-join name and whether a join fired.
    pub fn resolve(&self, name: &str) -> (String, bool) {
        let folded = fold(name);
        for join in &self.joins {
            if join.members.iter().any(|m| fold(m) == folded) {
                return (join.canonical_name.clone(), true);
            }
        }
        (name.trim().to_string(), false)
    }

    /// Dropped names are removed from aggregation entirely. Matches the
    /// name either before or after join resolution.
    pub fn is_dropped(&self, name: &str) -> bool {
        let folded = fold(name);
        if self.drops.iter().any(|d| fold(d) == folded) {
            return true;
        }
        let (resolved, _) = self.resolve(name);
        self.drops.iter().any(|d| fold(d) == fold(&resolved))
    }

    pub fn is_kept_unmerged(&self, name: &str) -> bool {
        let folded = fold(name);
        self.keep_unmerged.iter().any(|k| fold(k) == folded)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompatibilityVerdict {
    /// Causes resolve to the same canonical concept directly.
    Compatible,
    /// Causes match only through a configured join.
    CompatibleAfterJoin,
    Incompatible,
}

/// Outcome of checking whether two models may be aggregated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CompatibilityReport {
    pub verdict: CompatibilityVerdict,
    pub cause_a: String,
    pub cause_b: String,
}

/// Two models are aggregation-compatible when their causes name the
/// same concept after normalization and joins.
pub fn check_compatibility(
    a: &EvidenceModel,
    b: &EvidenceModel,
    glossary: &Glossary,
    joins: &JoinMap,
) -> CompatibilityReport {
    let raw_a = normalize_term(&a.cause.name, glossary).term().to_string();
    let raw_b = normalize_term(&b.cause.name, glossary).term().to_string();
    let (cause_a, joined_a) = joins.resolve(&raw_a);
    let (cause_b, joined_b) = joins.resolve(&raw_b);
    let verdict = if fold(&cause_a) != fold(&cause_b) {
        CompatibilityVerdict::Incompatible
    } else if joined_a || joined_b {
        CompatibilityVerdict::CompatibleAfterJoin
    } else {
        CompatibilityVerdict::Compatible
    };
    CompatibilityReport {
        verdict,
        cause_a,
        cause_b,
    }
}

/// Pooled evidence for one effect across models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AggregationRecord {
    pub effect_name: String,
    /// Distinct contributing studies, sorted.
    pub study_ids: Vec<String>,
    /// Number of contributing evidence models.
    pub model_count: usize,
    /// The decided intensity subset.
    pub intensity: HypothesisSet,
    /// Belief in the decided intensity under the pooled mass function.
    pub belief: f64,
    /// Mass discarded as contradictory during pooling, in [0, 1).
    pub conflict: f64,
    /// Pooled belief minus the strongest single input belief; positive
    /// means the sources reinforce each other.
    pub difference: f64,
}

/// How a context concept ended up in the aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextStatus {
    /// Same canonical concept contributed by several models.
    Matched,
    /// Merged through a configured join.
    Joined,
    /// Carried over without merging (single source, or listed in the
    /// join map's keep-unmerged set).
    KeptUnmerged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AggregatedConcept {
    pub name: String,
    pub kind: ConceptKind,
    pub status: ContextStatus,
    /// Contributing model ids, sorted.
    pub sources: Vec<String>,
}

/// The synthesized model: shared cause, merged context, one record per
/// pooled effect.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AggregatedModel {
    pub cause: ValueConcept,
    pub context: Vec<AggregatedConcept>,
    pub records: Vec<AggregationRecord>,
    /// Ids of all aggregated evidence models, sorted.
    pub inputs: Vec<String>,
}

impl AggregatedModel {
    pub fn record(&self, effect_name: &str) -> Option<&AggregationRecord> {
        self.records.iter().find(|r| r.effect_name == effect_name)
    }
}

/// Group every effect of every model under its canonical post-join
/// name, skipping dropped names. Shared by aggregation and reporting so
/// both see the same grouping.
pub fn effect_groups<'a>(
    models: &'a [EvidenceModel],
    glossary: &Glossary,
    joins: &JoinMap,
) -> BTreeMap<String, Vec<(&'a EvidenceModel, &'a crate::model::Effect)>> {
    let mut groups: BTreeMap<String, Vec<(&EvidenceModel, &crate::model::Effect)>> =
        BTreeMap::new();
    for model in models {
        for effect in &model.effects {
            let normalized = normalize_term(&effect.name, glossary);
            if joins.is_dropped(normalized.term()) {
                continue;
            }
            let (canonical, _) = joins.resolve(normalized.term());
            groups.entry(canonical).or_default().push((model, effect));
        }
    }
    groups
}

/// Pool one effect's bodies of evidence with Dempster's rule.
///
/// Each contribution becomes a simple support function (its hypothesis
/// carrying its belief). The record reports the decided intensity, the
/// belief in it, the accumulated conflict, and the difference against
/// the strongest input.
pub fn pool_effect(
    effect_name: &str,
    contributions: &[(&EvidenceModel, &crate::model::Effect)],
) -> Result<AggregationRecord, AggregationError> {
    let mut supports = Vec::with_capacity(contributions.len());
    for (model, effect) in contributions {
        let support = SimpleSupport::new(effect.hypothesis, effect.belief).map_err(|_| {
            AggregationError::InvalidBelief {
                effect: effect_name.to_string(),
                model: model.id.clone(),
                belief: effect.belief,
            }
        })?;
        supports.push(support.mass_function());
    }
    let combination = combine_all(&supports).map_err(|err| match err {
        DstError::TotalConflict => AggregationError::TotalConflict {
            effect: effect_name.to_string(),
            models: contributions.iter().map(|(m, _)| m.id.clone()).collect(),
        },
        // combine_all on valid mass functions can only fail with total
        // conflict; anything else indicates corrupted inputs.
        other => panic!("unexpected combination failure: {other}"),
    })?;
    let (intensity, belief) = combination.mass.decide_intensity();

    let mut study_ids: Vec<String> = contributions
        .iter()
        .map(|(m, _)| m.study_id.clone())
        .collect();
    study_ids.sort();
    study_ids.dedup();

    let strongest_input = contributions
        .iter()
        .map(|(_, e)| e.belief)
        .fold(0.0_f64, f64::max);

    Ok(AggregationRecord {
        effect_name: effect_name.to_string(),
        study_ids,
        model_count: contributions.len(),
        intensity,
        belief,
        conflict: combination.conflict,
        difference: belief - strongest_input,
    })
}

/// Aggregate a corpus of cause-compatible models into one synthesis.
///
/// Effects pool by canonical name; dropped names (join map) are skipped
/// outright. Context concepts merge by canonical name unless kept
/// unmerged. Records and context entries come out sorted by name, so
/// equal inputs produce byte-equal serialized output.
pub fn aggregate(
    models: &[EvidenceModel],
    glossary: &Glossary,
    joins: &JoinMap,
) -> Result<AggregatedModel, AggregationError> {
    let first = models.first().ok_or(AggregationError::EmptyCorpus)?;

    // All models must share a cause; report the first offending pair.
    for model in &models[1..] {
        let report = check_compatibility(first, model, glossary, joins);
        if report.verdict == CompatibilityVerdict::Incompatible {
            return Err(AggregationError::IncompatibleCauses {
                model_a: first.id.clone(),
                model_b: model.id.clone(),
                cause_a: report.cause_a,
                cause_b: report.cause_b,
            });
        }
    }
    let (cause_name, _) = joins.resolve(normalize_term(&first.cause.name, glossary).term());

    let groups = effect_groups(models, glossary, joins);
    let records = groups
        .iter()
        .map(|(name, contributions)| pool_effect(name, contributions))
        .collect::<Result<Vec<_>, _>>()?;

    // Merge the context vocabulary.
    struct Entry {
        kind: ConceptKind,
        joined: bool,
        sources: Vec<String>,
    }
    let mut merged: BTreeMap<String, Entry> = BTreeMap::new();
    let mut unmerged: Vec<AggregatedConcept> = Vec::new();
    for model in models {
        for concept in &model.context {
            let normalized = normalize_term(&concept.name, glossary);
            if joins.is_dropped(normalized.term()) {
                continue;
            }
            let (canonical, joined) = joins.resolve(normalized.term());
            if joins.is_kept_unmerged(&canonical) {
                unmerged.push(AggregatedConcept {
                    name: canonical,
                    kind: concept.kind,
                    status: ContextStatus::KeptUnmerged,
                    sources: vec![model.id.clone()],
                });
                continue;
            }
            let entry = merged.entry(canonical).or_insert(Entry {
                kind: concept.kind,
                joined: false,
                sources: Vec::new(),
            });
            entry.joined |= joined;
            if !entry.sources.contains(&model.id) {
                entry.sources.push(model.id.clone());
            }
        }
    }
    let mut context: Vec<AggregatedConcept> = merged
        .into_iter()
        .map(|(name, entry)| AggregatedConcept {
            name,
            kind: entry.kind,
            status: if entry.joined {
                ContextStatus::Joined
            } else if entry.sources.len() > 1 {
                ContextStatus::Matched
            } else {
                ContextStatus::KeptUnmerged
            },
            sources: {
                let mut s = entry.sources;
                s.sort();
                s
            },
        })
        .collect();
    context.extend(unmerged);
    context.sort_by(|a, b| (&a.name, &a.sources).cmp(&(&b.name, &b.sources)));

    let mut inputs: Vec<String> = models.iter().map(|m| m.id.clone()).collect();
    inputs.sort();

    Ok(AggregatedModel {
        cause: ValueConcept::new(cause_name, ConceptKind::Cause),
        context,
        records,
        inputs,
    })
}

/// Partition a corpus by a metadata key and aggregate each group.
/// Every model must carry the key.
pub fn aggregate_grouped(
    models: &[EvidenceModel],
    glossary: &Glossary,
    joins: &JoinMap,
    key: &str,
) -> Result<BTreeMap<String, AggregatedModel>, AggregationError> {
    let missing: Vec<String> = models
        .iter()
        .filter(|m| !m.metadata.contains_key(key))
        .map(|m| m.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(AggregationError::MissingGroupKey {
            key: key.to_string(),
            models: missing,
        });
    }
    let mut groups: BTreeMap<String, Vec<EvidenceModel>> = BTreeMap::new();
    for model in models {
        groups
            .entry(model.metadata[key].clone())
            .or_default()
            .push(model.clone());
    }
    groups
        .into_iter()
        .map(|(value, group)| aggregate(&group, glossary, joins).map(|agg| (value, agg)))
        .collect()
}
