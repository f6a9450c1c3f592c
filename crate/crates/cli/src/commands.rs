//! Subcommand implementations: document loading, the four pipeline
//! commands, and the artifact writers.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ssm_core::estimation::{EstimationError, Polarity, StudyType};
use ssm_core::{
    aggregate, aggregate_grouped, assess, intensity_from_stats, render_forest, render_summary,
    validate_model, AggregatedModel, EvidenceModel, ForestFormat, Glossary, IntensityThresholds,
    JoinMap, MeasurementSeries, QuestionnaireDocument, ReportMeta, SummaryFormat,
};

use crate::config::{CommonArgs, RunConfig};
use crate::AppError;

/// Environment variable that pins report timestamps for reproducible
/// runs; when unset, reports carry the current UTC time.
pub const SEED_METADATA_VAR: &str = "SSM_LOOM_SEED_METADATA";

const TOOL_NAME: &str = "ssm-loom";

fn generated_at() -> String {
    match std::env::var(SEED_METADATA_VAR) {
        Ok(value) if !value.trim().is_empty() => value.trim().to_string(),
        _ => chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string(),
    }
}

fn report_meta() -> ReportMeta {
    ReportMeta {
        generated_at: generated_at(),
        tool: TOOL_NAME.to_string(),
    }
}

// ---------------------------------------------------------------------
// Document loading
// ---------------------------------------------------------------------

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, AppError> {
    let text = fs::read_to_string(path)
        .map_err(|err| AppError::io(format!("cannot read {what} {}: {err}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|err| AppError::io(format!("cannot parse {what} {}: {err}", path.display())))
}

/// Read every `*.json` document in the corpus directory, in filename
/// order so repeated runs see the models in the same order.
fn load_corpus(dir: &Path) -> Result<Vec<EvidenceModel>, AppError> {
    let entries = fs::read_dir(dir).map_err(|err| {
        AppError::io(format!(
            "cannot read corpus directory {}: {err}",
            dir.display()
        ))
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|path| path.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(AppError::domain(format!(
            "no models: corpus directory {} contains no *.json documents",
            dir.display()
        )));
    }

    let mut models = Vec::with_capacity(paths.len());
    let mut seen: BTreeMap<String, PathBuf> = BTreeMap::new();
    for path in paths {
        let model: EvidenceModel = parse_json(&path, "evidence model")?;
        if let Some(previous) = seen.insert(model.id.clone(), path.clone()) {
            return Err(AppError::domain(format!(
                "duplicate model id `{}` in {} (already defined by {})",
                model.id,
                path.display(),
                previous.display()
            )));
        }
        models.push(model);
    }
    Ok(models)
}

fn load_glossary(path: &Path) -> Result<Glossary, AppError> {
    parse_json(path, "glossary")
}

/// The join map is optional; without one, names merge only when they
/// already match.
fn load_joins(config: &RunConfig) -> Result<JoinMap, AppError> {
    match &config.join_map_path {
        Some(path) => parse_json(path, "join map"),
        None => Ok(JoinMap::default()),
    }
}

/// Threshold precedence: a thresholds file beats inline config values,
/// which beat the built-in defaults.
fn load_thresholds(config: &RunConfig) -> Result<IntensityThresholds, AppError> {
    if let Some(path) = &config.thresholds_path {
        return parse_json(path, "thresholds");
    }
    Ok(config.inline_thresholds.unwrap_or_default())
}

fn load_questionnaire(config: &RunConfig) -> Result<QuestionnaireDocument, AppError> {
    let path = config
        .questionnaire_path
        .as_deref()
        .ok_or_else(|| AppError::io("no questionnaire given (use --questionnaire)".to_string()))?;
    parse_json(path, "questionnaire")
}

fn domain_from<E: std::fmt::Display>(err: E) -> AppError {
    AppError::domain(err.to_string())
}

// ---------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, AppError> {
    fs::create_dir_all(dir).map_err(|err| {
        AppError::io(format!(
            "cannot create output directory {}: {err}",
            dir.display()
        ))
    })?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|err| AppError::io(format!("cannot write {}: {err}", path.display())))?;
    Ok(path)
}

/// Turn a group value such as `PTQ FP32->INT8 (F)` into a filename
/// fragment (`ptq-fp32-int8-f`).
fn slug(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for ch in value.chars() {
        if ch.is_ascii_alphanumeric() {
            out.push(ch.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    if out.is_empty() {
        "group".to_string()
    } else {
        out
    }
}

/// `{:.p$}` with trailing zeros (and a bare trailing dot) trimmed.
fn fmt_num(value: f64, precision: usize) -> String {
    let text = format!("{value:.precision$}");
    if !text.contains('.') {
        return text;
    }
    let trimmed = text.trim_end_matches('0').trim_end_matches('.');
    if trimmed == "-0" {
        "0".to_string()
    } else {
        trimmed.to_string()
    }
}

/// Plain-text table: the first `left_columns` columns are left-aligned,
/// the rest right-aligned, with a dash rule under the header.
fn render_table(headers: &[&str], rows: &[Vec<String>], left_columns: usize) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    let render_row = |cells: &[String], out: &mut String| {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            if i < left_columns {
                line.push_str(&format!("{cell:<width$}", width = widths[i]));
            } else {
                line.push_str(&format!("{cell:>width$}", width = widths[i]));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    };
    let header_cells: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    render_row(&header_cells, &mut out);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    render_row(&rule, &mut out);
    for row in rows {
        render_row(row, &mut out);
    }
    out
}

// ---------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------

pub fn cmd_validate(args: &CommonArgs) -> Result<(), AppError> {
    let config = RunConfig::resolve(args)?;
    let models = load_corpus(config.corpus_dir()?)?;
    let glossary = load_glossary(config.glossary_path()?)?;

    let mut invalid = Vec::new();
    for model in &models {
        let report = validate_model(model, &glossary);
        if report.is_valid() {
            println!("{}: ok", model.id);
        } else {
            println!("{}: {} violation(s)", model.id, report.violations.len());
            for violation in &report.violations {
                println!("  - {violation}");
            }
            invalid.push(model.id.clone());
        }
    }
    if !invalid.is_empty() {
        return Err(AppError::domain(format!(
            "corpus failed validation: {}",
            invalid.join(", ")
        )));
    }
    println!("{} models valid", models.len());
    Ok(())
}

// ---------------------------------------------------------------------
// beliefs
// ---------------------------------------------------------------------

/// Recompute every effect's belief from the questionnaire and stored
/// improvement statistics, flagging drift against the stored values.
pub fn cmd_beliefs(args: &CommonArgs) -> Result<(), AppError> {
    let config = RunConfig::resolve(args)?;
    let mut models = load_corpus(config.corpus_dir()?)?;
    models.sort_by(|a, b| a.id.cmp(&b.id));
    let questionnaire = load_questionnaire(&config)?;

    let headers = [
        "Model",
        "Study",
        "Effect",
        "BaseBelief",
        "Discount",
        "FinalBelief",
    ];
    let mut rows = Vec::new();
    for model in &models {
        let (study_type, quality) = questionnaire
            .for_study(&model.study_id)
            .map_err(domain_from)?;
        for effect in &model.effects {
            let assessment =
                assess(study_type, &quality, effect.stats.as_ref()).map_err(domain_from)?;
            let mut final_cell = fmt_num(assessment.final_belief, 4);
            if (assessment.final_belief - effect.belief).abs() > 1e-6 {
                final_cell.push_str(&format!(" (stored {})", fmt_num(effect.belief, 4)));
            }
            rows.push(vec![
                model.id.clone(),
                model.study_id.clone(),
                effect.name.clone(),
                fmt_num(assessment.base_belief, 4),
                fmt_num(assessment.discount, 4),
                final_cell,
            ]);
        }
    }

    let table = render_table(&headers, &rows, 3);
    print!("{table}");
    if let Some(dir) = &config.output_dir {
        let path = write_artifact(dir, "beliefs.txt", &table)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Assess one standalone measurement CSV: statistics, intensity under
/// the configured thresholds, and the belief assessment.
pub fn cmd_beliefs_series(
    path: &Path,
    metric: &str,
    polarity: &str,
    study_type: &str,
    quality_score: f64,
) -> Result<(), AppError> {
    let polarity = parse_polarity(polarity)?;
    let study_type = parse_study_type(study_type)?;
    let thresholds = IntensityThresholds::default();

    let file = fs::File::open(path).map_err(|err| {
        AppError::io(format!(
            "cannot read measurements {}: {err}",
            path.display()
        ))
    })?;
    let series = MeasurementSeries::from_csv(file, metric, polarity).map_err(|err| match err {
        EstimationError::Csv(inner) => AppError::io(format!(
            "cannot parse measurements {}: {inner}",
            path.display()
        )),
        other => domain_from(other),
    })?;
    let improvements = series.relative_improvements().map_err(domain_from)?;
    let stats = ssm_core::EffectStatistics::from_improvements(improvements).map_err(domain_from)?;
    let intensity = intensity_from_stats(&stats, &thresholds);

    let base = ssm_core::base_belief_from_score(study_type, quality_score).map_err(domain_from)?;
    let discount = ssm_core::dispersion_discount(&stats);
    let final_belief = base * (1.0 - discount);

    println!("metric: {}", series.metric());
    println!("pairs: {}", stats.sample_count);
    let listed: Vec<String> = stats.improvements.iter().map(|v| fmt_num(*v, 4)).collect();
    println!("improvements: {}", listed.join(", "));
    println!("mean: {}", fmt_num(stats.mean, 6));
    println!("iqr: {}", fmt_num(stats.iqr, 6));
    println!(
        "ci95: [{}, {}]",
        fmt_num(stats.ci95.0, 6),
        fmt_num(stats.ci95.1, 6)
    );
    println!("intensity: {}", intensity.notation());
    println!("baseBelief: {}", fmt_num(base, 6));
    println!("discount: {}", fmt_num(discount, 6));
    println!("finalBelief: {}", fmt_num(final_belief, 6));
    Ok(())
}

fn parse_polarity(raw: &str) -> Result<Polarity, AppError> {
    match raw {
        "higher-is-better" => Ok(Polarity::HigherIsBetter),
        "lower-is-better" => Ok(Polarity::LowerIsBetter),
        other => Err(AppError::io(format!(
            "unknown polarity `{other}` (expected higher-is-better or lower-is-better)"
        ))),
    }
}

fn parse_study_type(raw: &str) -> Result<StudyType, AppError> {
    match raw {
        "unsystematic" => Ok(StudyType::Unsystematic),
        "observational" => Ok(StudyType::Observational),
        "quasi-experiment" => Ok(StudyType::QuasiExperiment),
        "randomized-controlled-trial" => Ok(StudyType::RandomizedControlledTrial),
        other => Err(AppError::io(format!(
            "unknown study type `{other}` (expected unsystematic, observational, \
             quasi-experiment, or randomized-controlled-trial)"
        ))),
    }
}

// ---------------------------------------------------------------------
// aggregate / forest
// ---------------------------------------------------------------------

/// Everything the aggregation stage needs, loaded and validated.
struct Pipeline {
    models: Vec<EvidenceModel>,
    glossary: Glossary,
    joins: JoinMap,
    thresholds: IntensityThresholds,
}

/// One aggregated output: the group value (if grouped), the models the
/// group pooled, and the aggregate itself.
struct GroupRun {
    suffix: Option<String>,
    models: Vec<EvidenceModel>,
    agg: AggregatedModel,
}

fn load_pipeline(config: &RunConfig) -> Result<Pipeline, AppError> {
    let models = load_corpus(config.corpus_dir()?)?;
    let glossary = load_glossary(config.glossary_path()?)?;
    let joins = load_joins(config)?;
    let thresholds = load_thresholds(config)?;

    let mut invalid = Vec::new();
    for model in &models {
        let report = validate_model(model, &glossary);
        if !report.is_valid() {
            eprintln!("{}: {} violation(s)", model.id, report.violations.len());
            for violation in &report.violations {
                eprintln!("  - {violation}");
            }
            invalid.push(model.id.clone());
        }
    }
    if !invalid.is_empty() {
        return Err(AppError::domain(format!(
            "corpus failed validation: {}",
            invalid.join(", ")
        )));
    }

    Ok(Pipeline {
        models,
        glossary,
        joins,
        thresholds,
    })
}

/// Run the aggregation, honoring the optional group-by key.
fn run_groups(pipeline: &Pipeline, config: &RunConfig) -> Result<Vec<GroupRun>, AppError> {
    match &config.group_by_key {
        Some(key) => {
            let grouped =
                aggregate_grouped(&pipeline.models, &pipeline.glossary, &pipeline.joins, key)
                    .map_err(domain_from)?;
            Ok(grouped
                .into_iter()
                .map(|(value, agg)| GroupRun {
                    models: pipeline
                        .models
                        .iter()
                        .filter(|m| m.metadata.get(key) == Some(&value))
                        .cloned()
                        .collect(),
                    suffix: Some(value),
                    agg,
                })
                .collect())
        }
        None => {
            let agg = aggregate(&pipeline.models, &pipeline.glossary, &pipeline.joins)
                .map_err(domain_from)?;
            Ok(vec![GroupRun {
                suffix: None,
                models: pipeline.models.clone(),
                agg,
            }])
        }
    }
}

fn artifact_name(stem: &str, suffix: Option<&str>, extension: &str) -> String {
    match suffix {
        Some(value) => format!("{stem}-{}.{extension}", slug(value)),
        None => format!("{stem}.{extension}"),
    }
}

pub fn cmd_aggregate(args: &CommonArgs) -> Result<(), AppError> {
    let config = RunConfig::resolve(args)?;
    let format = match config.output_format.as_deref() {
        None | Some("text") => SummaryFormat::Text,
        Some("csv") => SummaryFormat::Csv,
        Some(other) => {
            return Err(AppError::io(format!(
                "unknown summary format `{other}` (expected text or csv)"
            )))
        }
    };
    let out_dir = config.output_dir()?.to_path_buf();
    let pipeline = load_pipeline(&config)?;

    for run in run_groups(&pipeline, &config)? {
        let suffix = run.suffix.as_deref();
        if let Some(value) = suffix {
            println!("group: {value}");
        }
        let document = serde_json::to_string_pretty(&run.agg).expect("aggregate serializes");
        let json_path = write_artifact(
            &out_dir,
            &artifact_name("aggregated", suffix, "json"),
            &format!("{document}\n"),
        )?;
        let summary = render_summary(&run.agg, format);
        let extension = match format {
            SummaryFormat::Text => "txt",
            SummaryFormat::Csv => "csv",
        };
        let summary_path = write_artifact(
            &out_dir,
            &artifact_name("summary", suffix, extension),
            &summary,
        )?;
        print!("{summary}");
        println!("wrote {}", json_path.display());
        println!("wrote {}", summary_path.display());
    }
    Ok(())
}

pub fn cmd_forest(args: &CommonArgs) -> Result<(), AppError> {
    let config = RunConfig::resolve(args)?;
    let format = match config.output_format.as_deref() {
        None | Some("svg") => ForestFormat::Svg,
        Some("text") => ForestFormat::Text,
        Some(other) => {
            return Err(AppError::io(format!(
                "unknown forest format `{other}` (expected svg or text)"
            )))
        }
    };
    let out_dir = config.output_dir()?.to_path_buf();
    let pipeline = load_pipeline(&config)?;

    for run in run_groups(&pipeline, &config)? {
        let document = render_forest(
            &run.models,
            &run.agg,
            &pipeline.glossary,
            &pipeline.joins,
            &pipeline.thresholds,
            report_meta(),
            format,
        )
        .map_err(domain_from)?;
        let extension = match format {
            ForestFormat::Svg => "svg",
            ForestFormat::Text => "txt",
        };
        let path = write_artifact(
            &out_dir,
            &artifact_name("forest", run.suffix.as_deref(), extension),
            &document,
        )?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
