//! Run configuration: an optional JSON config file merged with command
//! line flags, flags winning.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use ssm_core::estimation::IntensityThresholds;

use crate::AppError;

/// Shared flags accepted by every subcommand.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its values
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory of evidence model JSON documents
    #[arg(long, value_name = "DIR")]
    pub corpus: Option<PathBuf>,
    /// Glossary JSON document
    #[arg(long, value_name = "FILE")]
    pub glossary: Option<PathBuf>,
    /// Join map JSON document
    #[arg(long, value_name = "FILE")]
    pub joins: Option<PathBuf>,
    /// Intensity thresholds JSON document (defaults: 0.05/0.20/0.50)
    #[arg(long, value_name = "FILE")]
    pub thresholds: Option<PathBuf>,
    /// Questionnaire JSON document (question list plus per-study answers)
    #[arg(long, value_name = "FILE")]
    pub questionnaire: Option<PathBuf>,
    /// Output directory for generated artifacts
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Metadata key used to partition the corpus before aggregation
    #[arg(long, value_name = "KEY")]
    pub group_by: Option<String>,
    /// Output format: text or csv for summaries, svg or text for forest
    #[arg(long, value_name = "FORMAT")]
    pub format: Option<String>,
}

/// The config file mirror of [`CommonArgs`]. Thresholds may be given
/// inline here instead of as a file path.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConfigFile {
    pub corpus_dir: Option<PathBuf>,
    pub glossary_path: Option<PathBuf>,
    pub join_map_path: Option<PathBuf>,
    pub thresholds_path: Option<PathBuf>,
    pub thresholds: Option<IntensityThresholds>,
    pub questionnaire_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub group_by_key: Option<String>,
    pub output_format: Option<String>,
}

/// The resolved configuration a command runs with.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus_dir: Option<PathBuf>,
    pub glossary_path: Option<PathBuf>,
    pub join_map_path: Option<PathBuf>,
    pub thresholds_path: Option<PathBuf>,
    pub inline_thresholds: Option<IntensityThresholds>,
    pub questionnaire_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub group_by_key: Option<String>,
    pub output_format: Option<String>,
}

impl RunConfig {
    /// Merge the optional config file with the flags; every flag takes
    /// precedence over the corresponding file entry.
    pub fn resolve(args: &CommonArgs) -> Result<RunConfig, AppError> {
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|err| {
                    AppError::io(format!("cannot read config {}: {err}", path.display()))
                })?;
                serde_json::from_str::<ConfigFile>(&text).map_err(|err| {
                    AppError::io(format!("cannot parse config {}: {err}", path.display()))
                })?
            }
            None => ConfigFile::default(),
        };
        Ok(RunConfig {
            corpus_dir: args.corpus.clone().or(file.corpus_dir),
            glossary_path: args.glossary.clone().or(file.glossary_path),
            join_map_path: args.joins.clone().or(file.join_map_path),
            thresholds_path: args.thresholds.clone().or(file.thresholds_path),
            inline_thresholds: file.thresholds,
            questionnaire_path: args.questionnaire.clone().or(file.questionnaire_path),
            output_dir: args.out.clone().or(file.output_dir),
            group_by_key: args.group_by.clone().or(file.group_by_key),
            output_format: args.format.clone().or(file.output_format),
        })
    }

    pub fn corpus_dir(&self) -> Result<&Path, AppError> {
        self.corpus_dir
            .as_deref()
            .ok_or_else(|| AppError::io("no corpus directory given (use --corpus)".to_string()))
    }

    pub fn glossary_path(&self) -> Result<&Path, AppError> {
        self.glossary_path
            .as_deref()
            .ok_or_else(|| AppError::io("no glossary given (use --glossary)".to_string()))
    }

    pub fn output_dir(&self) -> Result<&Path, AppError> {
        self.output_dir
            .as_deref()
            .ok_or_else(|| AppError::io("no output directory given (use --out)".to_string()))
    }
}
