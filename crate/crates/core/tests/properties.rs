//! Property tests for the library invariants.
//!
//! The Dempster–Shafer checks compare the production fold against an
//! independent brute-force oracle that walks the full cartesian product
//! of focal elements and normalizes exactly once at the end.

use std::collections::BTreeMap;

use proptest::prelude::*;

use ssm_core::aggregation::{aggregate, JoinMap};
use ssm_core::dst::{combine_all, MassFunction, SimpleSupport};
use ssm_core::estimation::{
    base_belief_from_score, dispersion_discount, intensity_from_stats, Answer, EffectStatistics,
    IntensityThresholds, MeasurementSeries, Polarity, QualityQuestionnaire, Question, StudyType,
};
use ssm_core::model::{ConceptKind, Effect, EvidenceModel, Glossary, GlossaryEntry, ValueConcept};
use ssm_core::scale::HypothesisSet;

// ---------------------------------------------------------------------
// oracle: single-normalization joint combination
// ---------------------------------------------------------------------

/// Combine by enumerating every tuple of focal elements across all
/// inputs, intersecting each tuple, and normalizing once at the very
/// end. Returns the normalized masses and the joint conflict, or `None`
/// on total conflict.
fn oracle_joint_combine(functions: &[MassFunction]) -> Option<(BTreeMap<HypothesisSet, f64>, f64)> {
    // `None` as a key stands for the empty intersection.
    let mut partial: BTreeMap<Option<HypothesisSet>, f64> = BTreeMap::new();
    partial.insert(Some(HypothesisSet::FULL), 1.0);
    for function in functions {
        let mut next: BTreeMap<Option<HypothesisSet>, f64> = BTreeMap::new();
        for (&current, &p) in &partial {
            for (set, mass) in function.iter() {
                let joint = current.and_then(|c| c.intersection(set));
                *next.entry(joint).or_insert(0.0) += p * mass;
            }
        }
        partial = next;
    }
    let conflict = partial.get(&None).copied().unwrap_or(0.0);
    let surviving = 1.0 - conflict;
    if surviving < 1e-12 {
        return None;
    }
    let normalized = partial
        .into_iter()
        .filter_map(|(set, mass)| set.map(|s| (s, mass / surviving)))
        .collect();
    Some((normalized, conflict))
}

// ---------------------------------------------------------------------
// strategies
// ---------------------------------------------------------------------

fn arb_hypothesis() -> impl Strategy<Value = HypothesisSet> {
    (1u8..=0x7f).prop_map(|bits| HypothesisSet::from_bits(bits).unwrap())
}

fn arb_mass_function() -> impl Strategy<Value = MassFunction> {
    prop::collection::vec((arb_hypothesis(), 0.01f64..1.0), 1..6).prop_map(|entries| {
        let total: f64 = entries.iter().map(|(_, w)| w).sum();
        MassFunction::new(entries.into_iter().map(|(s, w)| (s, w / total)))
            .expect("normalized weights form a mass function")
    })
}

fn arb_support() -> impl Strategy<Value = MassFunction> {
    (arb_hypothesis(), 0.0f64..=0.99)
        .prop_map(|(focus, belief)| SimpleSupport::new(focus, belief).unwrap().mass_function())
}

fn arb_improvements() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.95f64..1.5, 1..12)
}

fn arb_study_type() -> impl Strategy<Value = StudyType> {
    prop_oneof![
        Just(StudyType::Unsystematic),
        Just(StudyType::Observational),
        Just(StudyType::QuasiExperiment),
        Just(StudyType::RandomizedControlledTrial),
    ]
}

fn arb_answer() -> impl Strategy<Value = Answer> {
    prop_oneof![
        Just(Answer::Yes),
        Just(Answer::No),
        Just(Answer::NotApplicable)
    ]
}

fn arb_questionnaire() -> impl Strategy<Value = QualityQuestionnaire> {
    prop::collection::vec((0.05f64..3.0, arb_answer()), 1..10).prop_map(|entries| {
        let questions: Vec<Question> = entries
            .iter()
            .enumerate()
            .map(|(i, (weight, _))| Question {
                id: format!("q{i}"),
                text: format!("question {i}"),
                weight: *weight,
            })
            .collect();
        let answers = entries
            .iter()
            .enumerate()
            .map(|(i, (_, answer))| (format!("q{i}"), *answer))
            .collect();
        QualityQuestionnaire::new(questions, answers).unwrap()
    })
}

fn arb_thresholds() -> impl Strategy<Value = IntensityThresholds> {
    (0.01f64..0.10, 0.11f64..0.30, 0.31f64..0.90)
        .prop_map(|(i, w, m)| IntensityThresholds::new(i, w, m).unwrap())
}

// ---------------------------------------------------------------------
// scale
// ---------------------------------------------------------------------

proptest! {
    #[test]
    fn notation_round_trips(set in arb_hypothesis()) {
        let notation = set.notation();
        prop_assert_eq!(HypothesisSet::parse(&notation).unwrap(), set);
    }

    #[test]
    fn intersection_is_commutative_and_subset(a in arb_hypothesis(), b in arb_hypothesis()) {
        let ab = a.intersection(b);
        let ba = b.intersection(a);
        prop_assert_eq!(ab, ba);
        if let Some(joint) = ab {
            prop_assert!(joint.is_subset_of(a));
            prop_assert!(joint.is_subset_of(b));
        }
    }

    #[test]
    fn mirror_is_an_involution(set in arb_hypothesis()) {
        prop_assert_eq!(set.mirrored().mirrored(), set);
        prop_assert_eq!(set.mirrored().cardinality(), set.cardinality());
    }
}

// ---------------------------------------------------------------------
// dst
// ---------------------------------------------------------------------

proptest! {
    #[test]
    fn combined_masses_sum_to_one(a in arb_mass_function(), b in arb_mass_function()) {
        if let Ok(combination) = a.combine(&b) {
            let total: f64 = combination.mass.iter().map(|(_, m)| m).sum();
            prop_assert!((total - 1.0).abs() < 1e-9, "sum {total}");
            prop_assert!((0.0..1.0).contains(&combination.conflict));
        }
    }

    #[test]
    fn combination_is_commutative(a in arb_mass_function(), b in arb_mass_function()) {
        let ab = a.combine(&b);
        let ba = b.combine(&a);
        match (ab, ba) {
            (Ok(x), Ok(y)) => {
                prop_assert!((x.conflict - y.conflict).abs() < 1e-9);
                for (set, mass) in x.mass.iter() {
                    prop_assert!((y.mass.mass(set) - mass).abs() < 1e-9);
                }
            }
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "asymmetric outcome: {x:?} vs {y:?}"),
        }
    }

    #[test]
    fn vacuous_is_neutral(m in arb_mass_function()) {
        let combined = m.combine(&MassFunction::vacuous()).unwrap();
        prop_assert_eq!(combined.conflict, 0.0);
        for (set, mass) in m.iter() {
            prop_assert!((combined.mass.mass(set) - mass).abs() < 1e-12);
        }
    }

    #[test]
    fn fold_matches_the_joint_oracle(
        functions in prop::collection::vec(arb_mass_function(), 1..5)
    ) {
        let fold = combine_all(&functions);
        let joint = oracle_joint_combine(&functions);
        match (fold, joint) {
            (Ok(fold), Some((joint_masses, joint_conflict))) => {
                prop_assert!(
                    (fold.conflict - joint_conflict).abs() < 1e-9,
                    "fold conflict {} vs joint {}", fold.conflict, joint_conflict
                );
                for (set, mass) in &joint_masses {
                    prop_assert!(
                        (fold.mass.mass(*set) - mass).abs() < 1e-9,
                        "mass for {set} differs: {} vs {}", fold.mass.mass(*set), mass
                    );
                }
                prop_assert_eq!(fold.mass.focal_count(), joint_masses.len());
            }
            (Err(_), None) => {}
            (fold, joint) => prop_assert!(false, "oracle disagrees: {fold:?} vs {joint:?}"),
        }
    }

    #[test]
    fn fold_is_order_invariant(
        functions in prop::collection::vec(arb_support(), 2..5),
        seed in any::<u64>()
    ) {
        // Simple supports with belief < 1 can never totally conflict.
        let forward = combine_all(&functions).unwrap();
        let mut shuffled = functions.clone();
        // Deterministic Fisher-Yates driven by the seed.
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            shuffled.swap(i, j);
        }
        let backward = combine_all(&shuffled).unwrap();
        prop_assert!((forward.conflict - backward.conflict).abs() < 1e-9);
        for (set, mass) in forward.mass.iter() {
            prop_assert!((backward.mass.mass(set) - mass).abs() < 1e-9);
        }
    }

    #[test]
    fn belief_is_monotone_under_supersets(m in arb_mass_function(), a in arb_hypothesis(), b in arb_hypothesis()) {
        let union = a.union(b);
        prop_assert!(m.belief(a) <= m.belief(union) + 1e-12);
        prop_assert!((m.belief(HypothesisSet::FULL) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn discount_preserves_total_mass(m in arb_mass_function(), alpha in 0.0f64..=1.0) {
        let discounted = m.discount(alpha).unwrap();
        let total: f64 = discounted.iter().map(|(_, mass)| mass).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        // Non-frame mass only shrinks.
        for (set, mass) in discounted.iter() {
            if !set.is_full() {
                prop_assert!(mass <= m.mass(set) + 1e-12);
            }
        }
    }

    #[test]
    fn decided_winner_is_focal_and_carries_belief(m in arb_mass_function()) {
        let (winner, belief) = m.decide_intensity();
        prop_assert!((0.0..=1.0 + 1e-9).contains(&belief));
        if m.is_vacuous() {
            prop_assert!(winner.is_full());
            prop_assert_eq!(belief, 0.0);
        } else {
            prop_assert!(!winner.is_full());
            prop_assert!(m.mass(winner) > 0.0);
            prop_assert!((m.belief(winner) - belief).abs() < 1e-12);
        }
    }
}

// ---------------------------------------------------------------------
// estimation
// ---------------------------------------------------------------------

proptest! {
    #[test]
    fn improvements_match_series_length(
        pairs in prop::collection::vec((0.5f64..100.0, 0.0f64..100.0), 1..20),
        lower_is_better in any::<bool>()
    ) {
        let polarity = if lower_is_better { Polarity::LowerIsBetter } else { Polarity::HigherIsBetter };
        let (baseline, treated): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let series = MeasurementSeries::new("m", polarity, baseline.clone(), treated.clone()).unwrap();
        let improvements = series.relative_improvements().unwrap();
        prop_assert_eq!(improvements.len(), baseline.len());
        for (i, improvement) in improvements.iter().enumerate() {
            let expected = match polarity {
                Polarity::HigherIsBetter => (treated[i] - baseline[i]) / baseline[i].abs(),
                Polarity::LowerIsBetter => (baseline[i] - treated[i]) / baseline[i].abs(),
            };
            prop_assert!((improvement - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn stats_are_internally_consistent(improvements in arb_improvements()) {
        let stats = EffectStatistics::from_improvements(improvements.clone()).unwrap();
        prop_assert_eq!(stats.sample_count, improvements.len());
        prop_assert!(stats.iqr >= 0.0);
        prop_assert!(stats.ci95.0 <= stats.mean + 1e-12);
        prop_assert!(stats.mean <= stats.ci95.1 + 1e-12);
        prop_assert!(stats.is_consistent(1e-9));
        let lo = improvements.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = improvements.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(stats.mean >= lo - 1e-12 && stats.mean <= hi + 1e-12);
        prop_assert!(stats.iqr <= (hi - lo) + 1e-12);
    }

    #[test]
    fn intensity_is_a_contiguous_range_containing_the_mean_band(
        improvements in arb_improvements(),
        thresholds in arb_thresholds()
    ) {
        let stats = EffectStatistics::from_improvements(improvements).unwrap();
        let set = intensity_from_stats(&stats, &thresholds);
        // Contiguous: equals the range between its own extremes.
        prop_assert_eq!(
            set,
            HypothesisSet::range(set.min_point(), set.max_point()).unwrap()
        );
        prop_assert!(set.contains(thresholds.band(stats.mean)));
        prop_assert_eq!(set.min_point(), thresholds.band(stats.ci95.0));
        prop_assert_eq!(set.max_point(), thresholds.band(stats.ci95.1));
    }

    #[test]
    fn band_is_monotone(thresholds in arb_thresholds(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(thresholds.band(lo) <= thresholds.band(hi));
    }

    #[test]
    fn score_and_base_belief_stay_in_range(
        study_type in arb_study_type(),
        questionnaire in arb_questionnaire()
    ) {
        let score = questionnaire.score();
        prop_assert!((0.0..=1.0).contains(&score));
        let base = base_belief_from_score(study_type, score).unwrap();
        let (lo, hi) = study_type.belief_range();
        prop_assert!(base >= lo - 1e-12 && base <= hi + 1e-12);
    }

    #[test]
    fn discount_stays_in_unit_interval(improvements in arb_improvements()) {
        let stats = EffectStatistics::from_improvements(improvements).unwrap();
        let discount = dispersion_discount(&stats);
        prop_assert!((0.0..=1.0).contains(&discount));
        let final_belief = 0.64 * (1.0 - discount);
        prop_assert!(final_belief <= 0.64);
    }
}

// ---------------------------------------------------------------------
// aggregation
// ---------------------------------------------------------------------

fn test_glossary() -> Glossary {
    let mut entries = BTreeMap::new();
    for name in ["Model quantization", "Accuracy"] {
        entries.insert(
            name.to_string(),
            GlossaryEntry {
                definition: format!("definition of {name}"),
                synonyms: vec![],
            },
        );
    }
    Glossary::new(entries).unwrap()
}

fn arb_effect_inputs() -> impl Strategy<Value = Vec<(HypothesisSet, f64)>> {
    prop::collection::vec((arb_hypothesis(), 0.0f64..=0.99), 1..6)
}

fn build_models(inputs: &[(HypothesisSet, f64)]) -> Vec<EvidenceModel> {
    inputs
        .iter()
        .enumerate()
        .map(|(i, (hypothesis, belief))| EvidenceModel {
            id: format!("M{i}"),
            study_id: format!("S{}", i / 2),
            cause: ValueConcept::new("Model quantization", ConceptKind::Cause),
            context: vec![],
            effects: vec![Effect {
                name: "Accuracy".into(),
                hypothesis: *hypothesis,
                belief: *belief,
                sample_count: 1,
                stats: None,
            }],
            provenance: "synthetic".into(),
            metadata: BTreeMap::new(),
        })
        .collect()
}

proptest! {
    #[test]
    fn difference_is_against_the_strongest_input(inputs in arb_effect_inputs()) {
        let models = build_models(&inputs);
        let agg = aggregate(&models, &test_glossary(), &JoinMap::default()).unwrap();
        let record = agg.record("Accuracy").unwrap();
        let strongest = inputs.iter().map(|(_, b)| *b).fold(0.0_f64, f64::max);
        prop_assert!((record.difference - (record.belief - strongest)).abs() < 1e-12);
        prop_assert!((0.0..1.0).contains(&record.conflict));
        prop_assert_eq!(record.model_count, inputs.len());
    }

    #[test]
    fn vacuous_inputs_never_change_records(inputs in arb_effect_inputs()) {
        let mut with_vacuous = inputs.clone();
        with_vacuous.push((HypothesisSet::FULL, 0.5)); // support on the frame is vacuous
        with_vacuous.push((HypothesisSet::parse("SP").unwrap(), 0.0));
        let base = aggregate(&build_models(&inputs), &test_glossary(), &JoinMap::default()).unwrap();
        let extended = aggregate(&build_models(&with_vacuous), &test_glossary(), &JoinMap::default()).unwrap();
        let a = base.record("Accuracy").unwrap();
        let b = extended.record("Accuracy").unwrap();
        prop_assert_eq!(a.intensity, b.intensity);
        prop_assert!((a.belief - b.belief).abs() < 1e-9);
        prop_assert!((a.conflict - b.conflict).abs() < 1e-9);
    }
}

// ---------------------------------------------------------------------
// thread-safety of the shared data types
// ---------------------------------------------------------------------

#[test]
fn shared_types_are_send_and_sync() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<HypothesisSet>();
    assert_send_sync::<MassFunction>();
    assert_send_sync::<EvidenceModel>();
    assert_send_sync::<Glossary>();
    assert_send_sync::<ssm_core::AggregatedModel>();
    assert_send_sync::<ssm_core::ReportDocument>();
}
