//! Browser bindings for the synthesis engine: three interactive
//! operations for the static demo page under `www/`.
//!
//! * [`combine_sources`] — combine evidence sources with Dempster's
//!   rule and decide an intensity.
//! * [`assess_series`] — run a pasted baseline/treated measurement
//!   series through statistics, intensity banding, and belief
//!   estimation.
//! * [`forest_svg`] — aggregate a pasted corpus of evidence models and
//!   render the forest plot as inline SVG.
//!
//! Every operation takes and returns JSON strings, so the page needs no
//! binding glue beyond `TextDecoder`-level plumbing that wasm-bindgen
//! already generates. The JSON shapes match the CLI's file formats
//! (`docs/schema.md`). All logic lives in plain functions returning
//! `Result<String, String>`; the `#[wasm_bindgen]` exports are thin
//! wrappers, which keeps the crate testable with a native `cargo test`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use ssm_core::{
    aggregate, base_belief_from_score, combine_all, dispersion_discount, intensity_from_stats,
    render_forest, validate_model, EffectStatistics, EvidenceModel, ForestFormat, Glossary,
    HypothesisSet, IntensityThresholds, JoinMap, MassFunction, MeasurementSeries, Polarity,
    ReportMeta, SimpleSupport, StudyType,
};

/// One evidence source for [`combine_sources`]: either a simple support
/// (`{"focus": "SP", "belief": 0.6}`) or a full mass assignment
/// (`[{"set": "{WP,PO}", "mass": 0.7}, {"set": "full", "mass": 0.3}]`).
#[derive(Deserialize)]
#[serde(untagged)]
enum SourceSpec {
    Support { focus: String, belief: f64 },
    Masses(Vec<MassSpec>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MassSpec {
    set: String,
    mass: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CombinedOut {
    sources: usize,
    masses: Vec<MassOut>,
    conflict: f64,
    decided: DecisionOut,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct MassOut {
    set: String,
    mass: f64,
    belief: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DecisionOut {
    set: String,
    belief: f64,
}

fn parse_set(text: &str) -> Result<HypothesisSet, String> {
    if text.trim().eq_ignore_ascii_case("full") {
        return Ok(HypothesisSet::FULL);
    }
    HypothesisSet::parse(text).map_err(|err| err.to_string())
}

fn source_to_mass(spec: SourceSpec) -> Result<MassFunction, String> {
    match spec {
        SourceSpec::Support { focus, belief } => {
            let focus = parse_set(&focus)?;
            Ok(SimpleSupport::new(focus, belief)
                .map_err(|err| err.to_string())?
                .mass_function())
        }
        SourceSpec::Masses(entries) => {
            let mut assignments = BTreeMap::new();
            for entry in entries {
                let set = parse_set(&entry.set)?;
                *assignments.entry(set).or_insert(0.0) += entry.mass;
            }
            MassFunction::new(assignments).map_err(|err| err.to_string())
        }
    }
}

/// Combine a JSON array of evidence sources: each element is either a
/// simple support (`{"focus": ..., "belief": ...}`) or a full mass
/// assignment (`[{"set": ..., "mass": ...}, ...]`).
pub fn combine_sources_impl(sources_json: &str) -> Result<String, String> {
    let specs: Vec<SourceSpec> =
        serde_json::from_str(sources_json).map_err(|err| format!("cannot parse sources: {err}"))?;
    if specs.is_empty() {
        return Err("no sources: provide at least one support or mass assignment".to_string());
    }
    let count = specs.len();
    let inputs = specs
        .into_iter()
        .map(source_to_mass)
        .collect::<Result<Vec<_>, _>>()?;
    let combined = combine_all(&inputs).map_err(|err| err.to_string())?;
    let (decided_set, decided_belief) = combined.mass.decide_intensity();
    let out = CombinedOut {
        sources: count,
        masses: combined
            .mass
            .iter()
            .map(|(set, mass)| MassOut {
                set: set.notation(),
                mass,
                belief: combined.mass.belief(set),
            })
            .collect(),
        conflict: combined.conflict,
        decided: DecisionOut {
            set: decided_set.notation(),
            belief: decided_belief,
        },
    };
    serde_json::to_string(&out).map_err(|err| err.to_string())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SeriesOut {
    metric: String,
    pairs: usize,
    improvements: Vec<f64>,
    mean: f64,
    iqr: f64,
    ci95: (f64, f64),
    intensity: String,
    base_belief: f64,
    discount: f64,
    final_belief: f64,
}

/// Assess a pasted `baseline,treated` CSV under the given metric
/// polarity, study design, and questionnaire score in [0, 1].
pub fn assess_series_impl(
    csv: &str,
    metric: &str,
    polarity: &str,
    study_type: &str,
    quality_score: f64,
) -> Result<String, String> {
    let polarity: Polarity = serde_json::from_value(serde_json::Value::String(
        polarity.trim().to_string(),
    ))
    .map_err(|_| format!("unknown polarity `{polarity}` (higher-is-better | lower-is-better)"))?;
    let study_type: StudyType = serde_json::from_value(serde_json::Value::String(
        study_type.trim().to_string(),
    ))
    .map_err(|_| {
        format!(
            "unknown study type `{study_type}` (unsystematic | observational | \
             quasi-experiment | randomized-controlled-trial)"
        )
    })?;

    let series = MeasurementSeries::from_csv(csv.as_bytes(), metric, polarity)
        .map_err(|err| err.to_string())?;
    let improvements = series
        .relative_improvements()
        .map_err(|err| err.to_string())?;
    let stats = EffectStatistics::from_improvements(improvements).map_err(|err| err.to_string())?;
    let intensity = intensity_from_stats(&stats, &IntensityThresholds::default());
    let base = base_belief_from_score(study_type, quality_score).map_err(|err| err.to_string())?;
    let discount = dispersion_discount(&stats);

    let out = SeriesOut {
        metric: series.metric().to_string(),
        pairs: series.len(),
        improvements: stats.improvements.clone(),
        mean: stats.mean,
        iqr: stats.iqr,
        ci95: stats.ci95,
        intensity: intensity.notation(),
        base_belief: base,
        discount,
        final_belief: base * (1.0 - discount),
    };
    serde_json::to_string(&out).map_err(|err| err.to_string())
}

/// When the page supplies no glossary, accept the corpus's own
/// vocabulary: every concept name, relation target, and effect name
/// becomes a canonical entry (no synonyms, so no cross-model merging
/// beyond exact spelling).
fn derived_glossary(models: &[ssm_core::EvidenceModel]) -> Result<Glossary, String> {
    let mut entries = BTreeMap::new();
    let mut add = |term: &str| {
        entries
            .entry(term.trim().to_string())
            .or_insert_with(|| ssm_core::model::GlossaryEntry {
                definition: "taken from the pasted corpus".to_string(),
                synonyms: Vec::new(),
            });
    };
    for model in models {
        for concept in model.concepts() {
            add(&concept.name);
            for relation in &concept.relations {
                add(&relation.target);
            }
        }
        for effect in &model.effects {
            add(&effect.name);
        }
    }
    Glossary::new(entries).map_err(|err| err.to_string())
}

/// Aggregate a pasted corpus (JSON array of evidence models) and render
/// the forest plot. `glossary_json` and `joins_json` may be empty
/// strings: the glossary then defaults to the corpus's own vocabulary
/// and the join map to no joins.
pub fn forest_svg_impl(
    models_json: &str,
    glossary_json: &str,
    joins_json: &str,
) -> Result<String, String> {
    let models: Vec<EvidenceModel> =
        serde_json::from_str(models_json).map_err(|err| format!("cannot parse models: {err}"))?;
    let glossary = if glossary_json.trim().is_empty() {
        derived_glossary(&models)?
    } else {
        serde_json::from_str(glossary_json)
            .map_err(|err| format!("cannot parse glossary: {err}"))?
    };
    let joins: JoinMap = if joins_json.trim().is_empty() {
        JoinMap::default()
    } else {
        serde_json::from_str(joins_json).map_err(|err| format!("cannot parse join map: {err}"))?
    };

    let mut invalid = Vec::new();
    for model in &models {
        let report = validate_model(model, &glossary);
        if !report.is_valid() {
            let reasons: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            invalid.push(format!("{}: {}", report.model_id, reasons.join("; ")));
        }
    }
    if !invalid.is_empty() {
        return Err(format!(
            "corpus failed validation — {}",
            invalid.join(" | ")
        ));
    }

    let agg = aggregate(&models, &glossary, &joins).map_err(|err| err.to_string())?;
    render_forest(
        &models,
        &agg,
        &glossary,
        &joins,
        &IntensityThresholds::default(),
        ReportMeta {
            generated_at: "interactive".to_string(),
            tool: "ssm-loom/web".to_string(),
        },
        ForestFormat::Svg,
    )
    .map_err(|err| err.to_string())
}

#[wasm_bindgen]
pub fn combine_sources(sources_json: &str) -> Result<String, JsError> {
    combine_sources_impl(sources_json).map_err(|msg| JsError::new(&msg))
}

#[wasm_bindgen]
pub fn assess_series(
    csv: &str,
    metric: &str,
    polarity: &str,
    study_type: &str,
    quality_score: f64,
) -> Result<String, JsError> {
    assess_series_impl(csv, metric, polarity, study_type, quality_score)
        .map_err(|msg| JsError::new(&msg))
}

#[wasm_bindgen]
pub fn forest_svg(
    models_json: &str,
    glossary_json: &str,
    joins_json: &str,
) -> Result<String, JsError> {
    forest_svg_impl(models_json, glossary_json, joins_json).map_err(|msg| JsError::new(&msg))
}
