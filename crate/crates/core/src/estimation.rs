//! Belief estimation from raw measurements and study quality.
//!
//! The pipeline turns paired baseline/treatment measurements into
//! relative improvements, summarizes them (mean, interquartile range,
//! 95% confidence interval), maps the summary onto the intensity scale,
//! and produces a belief value: a study-type base belief scaled down by
//! a dispersion discount.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scale::{HypothesisSet, IntensityPoint};

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("measurement series is empty")]
    EmptySeries,
    #[error("baseline has {baseline} values but treatment has {treated}")]
    LengthMismatch { baseline: usize, treated: usize },
    #[error("non-finite measurement at data row {row}")]
    NonFiniteMeasurement { row: usize },
    #[error("baseline is zero at data row {row} (treated value {treated}); relative improvement is undefined")]
    ZeroBaseline { row: usize, treated: f64 },
    #[error("failed to read measurement CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("thresholds must satisfy 0 < indifferent < weak < moderate, got {0}")]
    InvalidThresholds(String),
    #[error("quality score {0} lies outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("question `{id}` has weight {weight}; weights must be positive and finite")]
    BadQuestionWeight { id: String, weight: f64 },
    #[error("duplicate question id `{0}`")]
    DuplicateQuestion(String),
    #[error("no answer recorded for question `{0}`")]
    UnansweredQuestion(String),
    #[error("answer recorded for unknown question `{0}`")]
    UnknownQuestion(String),
    #[error("questionnaire has no answers for study `{0}`")]
    UnknownStudy(String),
}

/// Direction in which a metric improves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    /// Larger treated values are better (accuracy, throughput).
    HigherIsBetter,
    /// Smaller treated values are better (energy, latency, size).
    LowerIsBetter,
}

/// Paired baseline/treatment measurements for one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSeries {
    metric: String,
    polarity: Polarity,
    baseline: Vec<f64>,
    treated: Vec<f64>,
}

impl MeasurementSeries {
    pub fn new(
        metric: impl Into<String>,
        polarity: Polarity,
        baseline: Vec<f64>,
        treated: Vec<f64>,
    ) -> Result<MeasurementSeries, EstimationError> {
        if baseline.is_empty() {
            return Err(EstimationError::EmptySeries);
        }
        if baseline.len() != treated.len() {
            return Err(EstimationError::LengthMismatch {
                baseline: baseline.len(),
                treated: treated.len(),
            });
        }
        for (row, (b, t)) in baseline.iter().zip(&treated).enumerate() {
            if !b.is_finite() || !t.is_finite() {
                return Err(EstimationError::NonFiniteMeasurement { row: row + 1 });
            }
        }
        Ok(MeasurementSeries {
            metric: metric.into(),
            polarity,
            baseline,
            treated,
        })
    }

    /// Read a two-column CSV with a `baseline,treated` header row, one
    /// configuration pair per data row.
    pub fn from_csv<R: Read>(
        reader: R,
        metric: impl Into<String>,
        polarity: Polarity,
    ) -> Result<MeasurementSeries, EstimationError> {
        #[derive(Deserialize)]
        struct Row {
            baseline: f64,
            treated: f64,
        }
        let mut csv_reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut baseline = Vec::new();
        let mut treated = Vec::new();
        for row in csv_reader.deserialize::<Row>() {
            let row = row?;
            baseline.push(row.baseline);
            treated.push(row.treated);
        }
        MeasurementSeries::new(metric, polarity, baseline, treated)
    }

    pub fn metric(&self) -> &str {
        &self.metric
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn len(&self) -> usize {
        self.baseline.len()
    }

    pub fn is_empty(&self) -> bool {
        self.baseline.is_empty()
    }

    /// Per-pair relative improvement, polarity-adjusted so that positive
    /// always means "the treatment helped":
    /// `(treated - baseline) / |baseline|` when higher is better,
    /// `(baseline - treated) / |baseline|` when lower is better.
    pub fn relative_improvements(&self) -> Result<Vec<f64>, EstimationError> {
        self.baseline
            .iter()
            .zip(&self.treated)
            .enumerate()
            .map(|(row, (&b, &t))| {
                if b == 0.0 {
                    return Err(EstimationError::ZeroBaseline {
                        row: row + 1,
                        treated: t,
                    });
                }
                let delta = match self.polarity {
                    Polarity::HigherIsBetter => t - b,
                    Polarity::LowerIsBetter => b - t,
                };
                Ok(delta / b.abs())
            })
            .collect()
    }
}

/// Summary statistics of a set of relative improvements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EffectStatistics {
    pub improvements: Vec<f64>,
    pub mean: f64,
    /// Interquartile range, R-7 quartiles (linear interpolation).
    pub iqr: f64,
    /// 95% confidence interval of the mean; collapses to a point when
    /// only one improvement is available.
    pub ci95: (f64, f64),
    pub sample_count: usize,
}

/// Quantile with the R-7 convention: `h = (n - 1) p`, linearly
/// interpolating between the floor and ceiling order statistics.
fn quantile_r7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < n {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

impl EffectStatistics {
    pub fn from_improvements(improvements: Vec<f64>) -> Result<EffectStatistics, EstimationError> {
        if improvements.is_empty() {
            return Err(EstimationError::EmptySeries);
        }
        for (row, v) in improvements.iter().enumerate() {
            if !v.is_finite() {
                return Err(EstimationError::NonFiniteMeasurement { row: row + 1 });
            }
        }
        let n = improvements.len();
        let mean = improvements.iter().sum::<f64>() / n as f64;

        let mut sorted = improvements.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite improvements"));
        let iqr = quantile_r7(&sorted, 0.75) - quantile_r7(&sorted, 0.25);

        let ci95 = if n == 1 {
            (mean, mean)
        } else {
            let variance = improvements
                .iter()
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / (n - 1) as f64;
            let half_width = 1.96 * variance.sqrt() / (n as f64).sqrt();
            (mean - half_width, mean + half_width)
        };

        Ok(EffectStatistics {
            improvements,
            mean,
            iqr,
            ci95,
            sample_count: n,
        })
    }

    /// Recompute the derived fields from `improvements` and check that
    /// they agree with the stored ones within `tolerance`.
    pub fn is_consistent(&self, tolerance: f64) -> bool {
        match EffectStatistics::from_improvements(self.improvements.clone()) {
            Ok(fresh) => {
                (fresh.mean - self.mean).abs() <= tolerance
                    && (fresh.iqr - self.iqr).abs() <= tolerance
                    && (fresh.ci95.0 - self.ci95.0).abs() <= tolerance
                    && (fresh.ci95.1 - self.ci95.1).abs() <= tolerance
                    && fresh.sample_count == self.sample_count
            }
            Err(_) => false,
        }
    }
}

/// Symmetric thresholds that carve the improvement axis into the seven
/// intensity bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    rename_all = "camelCase",
    deny_unknown_fields,
    try_from = "RawThresholds"
)]
pub struct IntensityThresholds {
    pub t_indifferent: f64,
    pub t_weak: f64,
    pub t_moderate: f64,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawThresholds {
    t_indifferent: f64,
    t_weak: f64,
    t_moderate: f64,
}

impl TryFrom<RawThresholds> for IntensityThresholds {
    type Error = EstimationError;

    fn try_from(raw: RawThresholds) -> Result<IntensityThresholds, EstimationError> {
        IntensityThresholds::new(raw.t_indifferent, raw.t_weak, raw.t_moderate)
    }
}

impl IntensityThresholds {
    pub fn new(
        t_indifferent: f64,
        t_weak: f64,
        t_moderate: f64,
    ) -> Result<IntensityThresholds, EstimationError> {
        let ordered = t_indifferent > 0.0
            && t_indifferent < t_weak
            && t_weak < t_moderate
            && t_moderate.is_finite();
        if !ordered {
            return Err(EstimationError::InvalidThresholds(format!(
                "indifferent {t_indifferent}, weak {t_weak}, moderate {t_moderate}"
            )));
        }
        Ok(IntensityThresholds {
            t_indifferent,
            t_weak,
            t_moderate,
        })
    }

    /// The band a single improvement value falls into. Bands are closed
    /// on the side nearer zero: |v| <= indifferent is IF, then (i, w] is
    /// weak, (w, m] is moderate, and beyond m is strong, mirrored for
    /// negative values.
    pub fn band(&self, value: f64) -> IntensityPoint {
        let magnitude = value.abs();
        let positive = value > 0.0;
        if magnitude <= self.t_indifferent {
            IntensityPoint::Indifferent
        } else if magnitude <= self.t_weak {
            if positive {
                IntensityPoint::WeaklyPositive
            } else {
                IntensityPoint::WeaklyNegative
            }
        } else if magnitude <= self.t_moderate {
            if positive {
                IntensityPoint::Positive
            } else {
                IntensityPoint::Negative
            }
        } else if positive {
            IntensityPoint::StronglyPositive
        } else {
            IntensityPoint::StronglyNegative
        }
    }
}

impl Default for IntensityThresholds {
    fn default() -> IntensityThresholds {
        IntensityThresholds {
            t_indifferent: 0.05,
            t_weak: 0.20,
            t_moderate: 0.50,
        }
    }
}

/// Map summary statistics onto the scale: the closed run of bands from
/// the band of the lower confidence bound to the band of the upper one.
/// A tight interval inside a single band yields that singleton; wider
/// intervals widen the hypothesis instead of overstating precision.
pub fn intensity_from_stats(
    stats: &EffectStatistics,
    thresholds: &IntensityThresholds,
) -> HypothesisSet {
    let low = thresholds.band(stats.ci95.0);
    let high = thresholds.band(stats.ci95.1);
    HypothesisSet::range(low, high).expect("band is monotone in the improvement value")
}

/// Study design archetypes in increasing order of evidential strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyType {
    Unsystematic,
    Observational,
    QuasiExperiment,
    RandomizedControlledTrial,
}

impl StudyType {
    /// The base-belief sub-range reserved for this design.
    pub fn belief_range(self) -> (f64, f64) {
        match self {
            StudyType::Unsystematic => (0.0, 0.25),
            StudyType::Observational => (0.25, 0.50),
            StudyType::QuasiExperiment => (0.50, 0.75),
            StudyType::RandomizedControlledTrial => (0.75, 1.00),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            StudyType::Unsystematic => "unsystematic",
            StudyType::Observational => "observational",
            StudyType::QuasiExperiment => "quasi-experiment",
            StudyType::RandomizedControlledTrial => "randomized-controlled-trial",
        }
    }
}

/// One quality-checklist question with its weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Question {
    pub id: String,
    pub text: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Answer {
    Yes,
    No,
    NotApplicable,
}

/// A filled-in quality checklist for one study.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityQuestionnaire {
    questions: Vec<Question>,
    answers: BTreeMap<String, Answer>,
}

impl QualityQuestionnaire {
    /// Pair questions with answers. Every question must be answered,
    /// every answer must refer to a defined question, and weights must
    /// be positive.
    pub fn new(
        questions: Vec<Question>,
        answers: BTreeMap<String, Answer>,
    ) -> Result<QualityQuestionnaire, EstimationError> {
        let mut seen = std::collections::BTreeSet::new();
        for q in &questions {
            if !(q.weight.is_finite() && q.weight > 0.0) {
                return Err(EstimationError::BadQuestionWeight {
                    id: q.id.clone(),
                    weight: q.weight,
                });
            }
            if !seen.insert(q.id.clone()) {
                return Err(EstimationError::DuplicateQuestion(q.id.clone()));
            }
        }
        for id in answers.keys() {
            if !seen.contains(id) {
                return Err(EstimationError::UnknownQuestion(id.clone()));
            }
        }
        for q in &questions {
            if !answers.contains_key(&q.id) {
                return Err(EstimationError::UnansweredQuestion(q.id.clone()));
            }
        }
        Ok(QualityQuestionnaire { questions, answers })
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    /// Weighted share of yes answers among the applicable questions:
    /// `sum(weight | yes) / sum(weight | yes or no)`. Not-applicable
    /// questions drop out of both sums; if nothing is applicable the
    /// score is 0.
    pub fn score(&self) -> f64 {
        let mut yes = 0.0;
        let mut applicable = 0.0;
        for q in &self.questions {
            match self.answers[&q.id] {
                Answer::Yes => {
                    yes += q.weight;
                    applicable += q.weight;
                }
                Answer::No => applicable += q.weight,
                Answer::NotApplicable => {}
            }
        }
        if applicable == 0.0 {
            0.0
        } else {
            yes / applicable
        }
    }
}

/// Base belief from a raw quality score in [0, 1]: the study type picks
/// the sub-range, the score interpolates linearly within it.
pub fn base_belief_from_score(study_type: StudyType, score: f64) -> Result<f64, EstimationError> {
    if !(0.0..=1.0).contains(&score) {
        return Err(EstimationError::ScoreOutOfRange(score));
    }
    let (lower, _) = study_type.belief_range();
    Ok(lower + 0.25 * score)
}

/// Base belief from a filled-in questionnaire.
pub fn base_belief(
    study_type: StudyType,
    quality: &QualityQuestionnaire,
) -> Result<f64, EstimationError> {
    base_belief_from_score(study_type, quality.score())
}

/// Reliability discount from result dispersion: `1 - exp(-0.1 |IQR / mean|)`.
///
/// Widely scattered improvements erode trust in the reported effect. A
/// zero mean with zero spread is perfectly consistent (no discount); a
/// zero mean with any spread makes the ratio unbounded (full discount).
pub fn dispersion_discount(stats: &EffectStatistics) -> f64 {
    if stats.mean == 0.0 {
        return if stats.iqr == 0.0 { 0.0 } else { 1.0 };
    }
    1.0 - (-0.1 * (stats.iqr / stats.mean).abs()).exp()
}

/// The belief bookkeeping for one effect of one study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BeliefAssessment {
    pub base_belief: f64,
    pub discount: f64,
    pub final_belief: f64,
}

/// Combine study quality and result dispersion into a final belief:
/// `base * (1 - discount)`. Effects without raw statistics take no
/// dispersion discount.
pub fn assess(
    study_type: StudyType,
    quality: &QualityQuestionnaire,
    stats: Option<&EffectStatistics>,
) -> Result<BeliefAssessment, EstimationError> {
    let base = base_belief(study_type, quality)?;
    let discount = stats.map(dispersion_discount).unwrap_or(0.0);
    Ok(BeliefAssessment {
        base_belief: base,
        discount,
        final_belief: base * (1.0 - discount),
    })
}

/// On-disk questionnaire document: the shared question list plus one
/// answer set (and declared study type) per study.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct QuestionnaireDocument {
    pub questions: Vec<Question>,
    pub studies: BTreeMap<String, StudyAnswers>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct StudyAnswers {
    pub study_type: StudyType,
    pub answers: BTreeMap<String, Answer>,
}

impl QuestionnaireDocument {
    /// The filled-in questionnaire for one study.
    pub fn for_study(
        &self,
        study_id: &str,
    ) -> Result<(StudyType, QualityQuestionnaire), EstimationError> {
        let study = self
            .studies
            .get(study_id)
            .ok_or_else(|| EstimationError::UnknownStudy(study_id.to_string()))?;
        let questionnaire =
            QualityQuestionnaire::new(self.questions.clone(), study.answers.clone())?;
        Ok((study.study_type, questionnaire))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(polarity: Polarity, baseline: &[f64], treated: &[f64]) -> MeasurementSeries {
        MeasurementSeries::new("metric", polarity, baseline.to_vec(), treated.to_vec()).unwrap()
    }

    #[test]
    fn improvements_higher_is_better() {
        let s = series(Polarity::HigherIsBetter, &[10.0, 10.0], &[16.0, 14.0]);
        assert_eq!(s.relative_improvements().unwrap(), vec![0.6, 0.4]);
    }

    #[test]
    fn improvements_lower_is_better() {
        let s = series(Polarity::LowerIsBetter, &[100.0, 80.0], &[40.0, 60.0]);
        assert_eq!(s.relative_improvements().unwrap(), vec![0.6, 0.25]);
    }

    #[test]
    fn improvements_with_negative_baseline_keep_direction() {
        // |baseline| in the denominator: an improvement from -10 to -4
        // under higher-is-better is +0.6.
        let s = series(Polarity::HigherIsBetter, &[-10.0], &[-4.0]);
        assert_eq!(s.relative_improvements().unwrap(), vec![0.6]);
    }

    #[test]
    fn zero_baseline_is_an_error() {
        let s = series(Polarity::HigherIsBetter, &[10.0, 0.0], &[12.0, 5.0]);
        match s.relative_improvements() {
            Err(EstimationError::ZeroBaseline { row, treated }) => {
                assert_eq!(row, 2);
                assert_eq!(treated, 5.0);
            }
            other => panic!("expected zero-baseline error, got {other:?}"),
        }
    }

    #[test]
    fn series_construction_validates_shape() {
        assert!(matches!(
            MeasurementSeries::new("m", Polarity::HigherIsBetter, vec![], vec![]),
            Err(EstimationError::EmptySeries)
        ));
        assert!(matches!(
            MeasurementSeries::new("m", Polarity::HigherIsBetter, vec![1.0], vec![1.0, 2.0]),
            Err(EstimationError::LengthMismatch { .. })
        ));
        assert!(matches!(
            MeasurementSeries::new("m", Polarity::HigherIsBetter, vec![f64::NAN], vec![1.0]),
            Err(EstimationError::NonFiniteMeasurement { row: 1 })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let csv = "baseline,treated\n250,105\n200,89\n";
        let s =
            MeasurementSeries::from_csv(csv.as_bytes(), "energy", Polarity::LowerIsBetter).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.relative_improvements().unwrap(), vec![0.58, 0.555]);
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        let csv = "baseline,treated\n250\n";
        assert!(matches!(
            MeasurementSeries::from_csv(csv.as_bytes(), "m", Polarity::LowerIsBetter),
            Err(EstimationError::Csv(_))
        ));
    }

    #[test]
    fn stats_use_r7_quartiles() {
        let stats = EffectStatistics::from_improvements(vec![0.6, 0.4, 0.5, 0.7]).unwrap();
        assert!((stats.mean - 0.55).abs() < 1e-12);
        // R-7 on [0.4, 0.5, 0.6, 0.7]: Q1 = 0.475, Q3 = 0.625.
        assert!((stats.iqr - 0.15).abs() < 1e-12);
        assert_eq!(stats.sample_count, 4);
        let s = (0.05_f64 / 3.0).sqrt();
        let half = 1.96 * s / 2.0;
        assert!((stats.ci95.0 - (0.55 - half)).abs() < 1e-12);
        assert!((stats.ci95.1 - (0.55 + half)).abs() < 1e-12);
        assert!(stats.is_consistent(1e-12));
    }

    #[test]
    fn single_sample_has_degenerate_interval() {
        let stats = EffectStatistics::from_improvements(vec![0.5718]).unwrap();
        assert_eq!(stats.ci95, (0.5718, 0.5718));
        assert_eq!(stats.iqr, 0.0);
    }

    #[test]
    fn default_bands() {
        let t = IntensityThresholds::default();
        use IntensityPoint::*;
        assert_eq!(t.band(0.0), Indifferent);
        assert_eq!(t.band(0.05), Indifferent);
        assert_eq!(t.band(-0.05), Indifferent);
        assert_eq!(t.band(0.06), WeaklyPositive);
        assert_eq!(t.band(0.20), WeaklyPositive);
        assert_eq!(t.band(0.21), Positive);
        assert_eq!(t.band(0.50), Positive);
        assert_eq!(t.band(0.51), StronglyPositive);
        assert_eq!(t.band(-0.51), StronglyNegative);
        assert_eq!(t.band(-0.3), Negative);
        assert_eq!(t.band(-0.1), WeaklyNegative);
    }

    #[test]
    fn threshold_validation() {
        assert!(IntensityThresholds::new(0.05, 0.2, 0.5).is_ok());
        assert!(IntensityThresholds::new(0.0, 0.2, 0.5).is_err());
        assert!(IntensityThresholds::new(0.2, 0.2, 0.5).is_err());
        assert!(IntensityThresholds::new(0.05, 0.6, 0.5).is_err());
    }

    #[test]
    fn intensity_covers_the_confidence_interval() {
        let thresholds = IntensityThresholds::default();
        let mut stats = EffectStatistics::from_improvements(vec![0.45]).unwrap();
        stats.ci95 = (0.30, 0.60);
        assert_eq!(
            intensity_from_stats(&stats, &thresholds),
            HypothesisSet::parse("{PO,SP}").unwrap()
        );

        // A wide interval spans every band it crosses, not just the ends.
        stats.ci95 = (-0.10, 0.60);
        assert_eq!(
            intensity_from_stats(&stats, &thresholds),
            HypothesisSet::parse("WN..SP").unwrap()
        );

        // Tight interval: a singleton hypothesis.
        stats.ci95 = (0.56, 0.59);
        assert_eq!(
            intensity_from_stats(&stats, &thresholds),
            HypothesisSet::parse("SP").unwrap()
        );
    }

    #[test]
    fn study_type_ranges() {
        assert_eq!(StudyType::Unsystematic.belief_range(), (0.0, 0.25));
        assert_eq!(StudyType::Observational.belief_range(), (0.25, 0.50));
        assert_eq!(StudyType::QuasiExperiment.belief_range(), (0.50, 0.75));
        assert_eq!(
            StudyType::RandomizedControlledTrial.belief_range(),
            (0.75, 1.00)
        );
    }

    #[test]
    fn base_belief_interpolates_within_the_subrange() {
        assert_eq!(
            base_belief_from_score(StudyType::RandomizedControlledTrial, 0.0).unwrap(),
            0.75
        );
        assert_eq!(
            base_belief_from_score(StudyType::Observational, 1.0).unwrap(),
            0.50
        );
        assert!(
            (base_belief_from_score(StudyType::Observational, 0.48).unwrap() - 0.37).abs() < 1e-12
        );
        assert!(base_belief_from_score(StudyType::Observational, 1.2).is_err());
    }

    fn questionnaire(entries: &[(&str, f64, Answer)]) -> QualityQuestionnaire {
        let questions = entries
            .iter()
            .map(|(id, weight, _)| Question {
                id: id.to_string(),
                text: format!("question {id}"),
                weight: *weight,
            })
            .collect();
        let answers = entries
            .iter()
            .map(|(id, _, answer)| (id.to_string(), *answer))
            .collect();
        QualityQuestionnaire::new(questions, answers).unwrap()
    }

    #[test]
    fn score_is_the_weighted_yes_share() {
        use Answer::*;
        let q = questionnaire(&[("a", 2.0, Yes), ("b", 1.0, No), ("c", 1.0, Yes)]);
        assert!((q.score() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn not_applicable_drops_out_of_both_sums() {
        use Answer::*;
        let q = questionnaire(&[("a", 2.0, Yes), ("b", 5.0, NotApplicable), ("c", 2.0, No)]);
        assert!((q.score() - 0.5).abs() < 1e-12);
        // All questions inapplicable: score collapses to zero.
        let q = questionnaire(&[("a", 2.0, NotApplicable)]);
        assert_eq!(q.score(), 0.0);
    }

    #[test]
    fn questionnaire_validation() {
        use Answer::*;
        let questions = vec![Question {
            id: "a".into(),
            text: "t".into(),
            weight: 1.0,
        }];
        assert!(matches!(
            QualityQuestionnaire::new(questions.clone(), BTreeMap::new()),
            Err(EstimationError::UnansweredQuestion(_))
        ));
        let mut answers = BTreeMap::new();
        answers.insert("zzz".to_string(), Yes);
        assert!(matches!(
            QualityQuestionnaire::new(questions.clone(), answers),
            Err(EstimationError::UnknownQuestion(_))
        ));
        let bad_weight = vec![Question {
            id: "a".into(),
            text: "t".into(),
            weight: 0.0,
        }];
        let mut answers = BTreeMap::new();
        answers.insert("a".to_string(), Yes);
        assert!(matches!(
            QualityQuestionnaire::new(bad_weight, answers),
            Err(EstimationError::BadQuestionWeight { .. })
        ));
    }

    #[test]
    fn discount_follows_the_exponential_law() {
        let mut stats = EffectStatistics::from_improvements(vec![0.5, 0.5]).unwrap();
        stats.mean = 0.2;
        stats.iqr = 0.2;
        let d = dispersion_discount(&stats);
        assert!((d - (1.0 - (-0.1_f64).exp())).abs() < 1e-12);
        assert!((d - 0.095163).abs() < 1e-6);
    }

    #[test]
    fn discount_limits_at_zero_mean() {
        let mut stats = EffectStatistics::from_improvements(vec![0.0]).unwrap();
        assert_eq!(dispersion_discount(&stats), 0.0);
        stats.iqr = 0.1;
        assert_eq!(dispersion_discount(&stats), 1.0);
    }

    #[test]
    fn zero_iqr_means_no_discount() {
        let stats = EffectStatistics::from_improvements(vec![0.37]).unwrap();
        assert_eq!(dispersion_discount(&stats), 0.0);
    }

    #[test]
    fn assessment_scales_base_by_discount() {
        use Answer::*;
        let q = questionnaire(&[("a", 1.0, Yes), ("b", 1.0, No)]);
        // Observational, score 0.5: base 0.375.
        let stats = EffectStatistics::from_improvements(vec![0.4, 0.6]).unwrap();
        let a = assess(StudyType::Observational, &q, Some(&stats)).unwrap();
        assert!((a.base_belief - 0.375).abs() < 1e-12);
        let expected_discount = 1.0 - (-0.1 * (stats.iqr / stats.mean)).exp();
        assert!((a.discount - expected_discount).abs() < 1e-12);
        assert!((a.final_belief - a.base_belief * (1.0 - a.discount)).abs() < 1e-12);

        // No stats: no discount, final equals base.
        let bare = assess(StudyType::Observational, &q, None).unwrap();
        assert_eq!(bare.discount, 0.0);
        assert_eq!(bare.final_belief, bare.base_belief);
    }

    #[test]
    fn questionnaire_document_lookup() {
        let doc: QuestionnaireDocument = serde_json::from_str(
            r#"{
                "questions": [
                    {"id": "q1", "text": "Protocol stated?", "weight": 2.0},
                    {"id": "q2", "text": "Raw data shared?", "weight": 1.0}
                ],
                "studies": {
                    "S1": {"studyType": "observational", "answers": {"q1": "yes", "q2": "no"}}
                }
            }"#,
        )
        .unwrap();
        let (study_type, questionnaire) = doc.for_study("S1").unwrap();
        assert_eq!(study_type, StudyType::Observational);
        assert!((questionnaire.score() - 2.0 / 3.0).abs() < 1e-12);
        assert!(matches!(
            doc.for_study("S9"),
            Err(EstimationError::UnknownStudy(_))
        ));
    }
}
