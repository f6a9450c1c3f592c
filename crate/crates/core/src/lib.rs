//! Evidence synthesis over diagrammatic study models.
//!
//! The crate turns per-study evidence models (a cause, its context, and
//! effects placed on a seven-point intensity scale with belief values)
//! into an aggregated synthesis: beliefs are estimated from study type,
//! quality, and result dispersion; bodies of evidence for the same
//! effect are pooled with Dempster's rule of combination; and the
//! result is reported as a summary table and an adapted forest plot.
//!
//! Modules map onto the pipeline stages:
//!
//! * [`scale`] — the intensity scale and hypothesis sets over it
//! * [`model`] — evidence models, the glossary, validation
//! * [`dst`] — mass functions and Dempster–Shafer combination
//! * [`estimation`] — beliefs from measurements and study quality
//! * [`aggregation`] — cross-study pooling into one model
//! * [`report`] — summary tables and forest plots
//!
//! All types are plain immutable data (no interior mutability), so
//! sharing them across threads is safe; aggregation itself is
//! single-threaded.

pub mod aggregation;
pub mod dst;
pub mod estimation;
pub mod model;
pub mod report;
pub mod scale;

pub use aggregation::{
    aggregate, aggregate_grouped, check_compatibility, pool_effect, AggregatedModel,
    AggregationError, AggregationRecord, CompatibilityReport, CompatibilityVerdict, JoinMap,
};
pub use dst::{combine_all, Combination, DstError, MassFunction, SimpleSupport};
pub use estimation::{
    assess, base_belief, base_belief_from_score, dispersion_discount, intensity_from_stats,
    BeliefAssessment, EffectStatistics, EstimationError, IntensityThresholds, MeasurementSeries,
    Polarity, QualityQuestionnaire, QuestionnaireDocument, StudyType,
};
pub use model::{
    normalize_term, validate_model, Effect, EvidenceModel, Glossary, GlossaryError, NormalizedTerm,
    ValidationReport, ValueConcept,
};
pub use report::{
    build_document, render_forest, render_summary, ForestFormat, ReportDocument, ReportError,
    ReportMeta, SummaryFormat,
};
pub use scale::{HypothesisSet, IntensityPoint, NotationError};
