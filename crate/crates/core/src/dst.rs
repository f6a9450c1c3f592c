//! Dempster–Shafer belief combination over the intensity scale.
//!
//! A body of evidence is a mass function: an assignment of probability
//! mass to non-empty subsets of the seven-point scale, summing to one.
//! Independent bodies are merged with Dempster's rule of combination,
//! which redistributes the mass of contradictory intersections and
//! reports how much conflict was absorbed in doing so.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::scale::HypothesisSet;

/// Tolerance for the "masses sum to one" check.
const MASS_SUM_TOLERANCE: f64 = 1e-9;

/// Below this much surviving mass, two bodies of evidence are treated as
/// fully contradictory and combination is refused.
const TOTAL_CONFLICT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DstError {
    #[error("mass {mass} for {set} lies outside [0, 1]")]
    MassOutOfRange { set: HypothesisSet, mass: f64 },
    #[error("masses sum to {sum}, expected 1 within {MASS_SUM_TOLERANCE}")]
    UnnormalizedMasses { sum: f64 },
    #[error("mass function has no focal elements")]
    NoFocalElements,
    #[error("total conflict: the bodies of evidence are fully contradictory")]
    TotalConflict,
    #[error("discount factor {0} lies outside [0, 1]")]
    DiscountOutOfRange(f64),
    #[error("belief {0} lies outside [0, 1]")]
    BeliefOutOfRange(f64),
}

/// A basic mass assignment over the intensity scale.
///
/// Only focal elements (subsets with strictly positive mass) are stored;
/// assignments of zero are dropped on construction. Keys are ordered by
/// bit mask, which keeps iteration and serialization deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct MassFunction {
    assignments: BTreeMap<HypothesisSet, f64>,
}

impl MassFunction {
    /// Build a mass function, validating that every mass lies in [0, 1]
    /// and the total is 1 within `1e-9`. Zero-mass entries are dropped.
    pub fn new<I>(assignments: I) -> Result<MassFunction, DstError>
    where
        I: IntoIterator<Item = (HypothesisSet, f64)>,
    {
        let mut focal = BTreeMap::new();
        let mut sum = 0.0;
        for (set, mass) in assignments {
            if !(0.0..=1.0 + MASS_SUM_TOLERANCE).contains(&mass) {
                return Err(DstError::MassOutOfRange { set, mass });
            }
            sum += mass;
            if mass > 0.0 {
                *focal.entry(set).or_insert(0.0) += mass;
            }
        }
        if focal.is_empty() {
            return Err(DstError::NoFocalElements);
        }
        if (sum - 1.0).abs() > MASS_SUM_TOLERANCE {
            return Err(DstError::UnnormalizedMasses { sum });
        }
        Ok(MassFunction { assignments: focal })
    }

    /// The vacuous mass function: all mass on the full frame, expressing
    /// total ignorance. It is the neutral element of combination.
    pub fn vacuous() -> MassFunction {
        let mut assignments = BTreeMap::new();
        assignments.insert(HypothesisSet::FULL, 1.0);
        MassFunction { assignments }
    }

    pub fn is_vacuous(&self) -> bool {
        self.assignments.len() == 1 && self.assignments.contains_key(&HypothesisSet::FULL)
    }

    /// Mass assigned to exactly `set` (zero for non-focal subsets).
    pub fn mass(&self, set: HypothesisSet) -> f64 {
        self.assignments.get(&set).copied().unwrap_or(0.0)
    }

    /// Focal elements with their masses, in bit-mask order.
    pub fn iter(&self) -> impl Iterator<Item = (HypothesisSet, f64)> + '_ {
        self.assignments.iter().map(|(&s, &m)| (s, m))
    }

    pub fn focal_count(&self) -> usize {
        self.assignments.len()
    }

    /// Belief in `hypothesis`: the total mass of focal elements that are
    /// subsets of it. Belief in the full frame is always 1.
    pub fn belief(&self, hypothesis: HypothesisSet) -> f64 {
        self.iter()
            .filter(|(set, _)| set.is_subset_of(hypothesis))
            .map(|(_, mass)| mass)
            .sum()
    }

    /// Dempster's rule of combination.
    ///
    /// Cross-multiplies the focal elements, accumulates products on the
    /// intersections, discards mass `k` falling on the empty set, and
    /// renormalizes the rest by `1 / (1 - k)`. Fails when the surviving
    /// mass is below `1e-12`.
    pub fn combine(&self, other: &MassFunction) -> Result<Combination, DstError> {
        let mut pooled: BTreeMap<HypothesisSet, f64> = BTreeMap::new();
        let mut conflict = 0.0;
        for (a, ma) in self.iter() {
            for (b, mb) in other.iter() {
                let product = ma * mb;
                match a.intersection(b) {
                    Some(joint) => *pooled.entry(joint).or_insert(0.0) += product,
                    None => conflict += product,
                }
            }
        }
        let surviving = 1.0 - conflict;
        if surviving < TOTAL_CONFLICT_EPSILON {
            return Err(DstError::TotalConflict);
        }
        for mass in pooled.values_mut() {
            *mass /= surviving;
        }
        Ok(Combination {
            mass: MassFunction {
                assignments: pooled,
            },
            conflict,
        })
    }

    /// Discount by reliability factor `alpha`: every focal mass shrinks
    /// by `1 - alpha` and the removed mass moves to the full frame.
    /// `alpha = 0` is the identity; `alpha = 1` yields the vacuous
    /// function (the source is ignored entirely).
    pub fn discount(&self, alpha: f64) -> Result<MassFunction, DstError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(DstError::DiscountOutOfRange(alpha));
        }
        let mut assignments = BTreeMap::new();
        for (set, mass) in self.iter() {
            if set.is_full() {
                continue;
            }
            let discounted = (1.0 - alpha) * mass;
            if discounted > 0.0 {
                assignments.insert(set, discounted);
            }
        }
        let theta = alpha + (1.0 - alpha) * self.mass(HypothesisSet::FULL);
        if theta > 0.0 {
            assignments.insert(HypothesisSet::FULL, theta);
        }
        if assignments.is_empty() {
            // alpha = 0 applied to a frame-free function with all mass on
            // focal sets cannot reach here; guard for completeness.
            return Err(DstError::NoFocalElements);
        }
        Ok(MassFunction { assignments })
    }

    /// Pick the scale subset the evidence points at.
    ///
    /// The winner is the focal element with the largest mass, ignoring
    /// the full frame. Ties prefer, in order: smaller cardinality (the
    /// more specific claim), midpoint closer to IF (the more cautious
    /// claim), and finally the lower scale position. The reported value
    /// is the belief in the winner, not its bare mass. A vacuous
    /// function yields the full frame with belief zero.
    pub fn decide_intensity(&self) -> (HypothesisSet, f64) {
        let mut best: Option<(HypothesisSet, f64)> = None;
        for (set, mass) in self.iter() {
            if set.is_full() {
                continue;
            }
            let better = match best {
                None => true,
                Some((cur, cur_mass)) => {
                    if mass != cur_mass {
                        mass > cur_mass
                    } else if set.cardinality() != cur.cardinality() {
                        set.cardinality() < cur.cardinality()
                    } else {
                        let dist = (set.midpoint() - 3.0).abs();
                        let cur_dist = (cur.midpoint() - 3.0).abs();
                        if dist != cur_dist {
                            dist < cur_dist
                        } else {
                            set.bits() < cur.bits()
                        }
                    }
                }
            };
            if better {
                best = Some((set, mass));
            }
        }
        match best {
            Some((set, _)) => (set, self.belief(set)),
            None => (HypothesisSet::FULL, 0.0),
        }
    }
}

/// Outcome of one application of Dempster's rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Combination {
    /// The normalized combined mass function.
    pub mass: MassFunction,
    /// Mass that fell on the empty set before renormalization, in [0, 1).
    pub conflict: f64,
}

/// Combine any number of bodies of evidence by left fold.
///
/// An empty slice yields the vacuous function with zero conflict. The
/// reported conflict is `1 - prod(1 - k_i)` over the fold steps, which
/// equals the mass the single-step joint combination would discard; the
/// combined function itself is order-invariant up to rounding.
pub fn combine_all(functions: &[MassFunction]) -> Result<Combination, DstError> {
    let mut combined = MassFunction::vacuous();
    let mut surviving = 1.0;
    for function in functions {
        let step = combined.combine(function)?;
        surviving *= 1.0 - step.conflict;
        combined = step.mass;
    }
    Ok(Combination {
        mass: combined,
        conflict: 1.0 - surviving,
    })
}

/// A body of evidence that commits mass `belief` to a single hypothesis
/// and leaves the rest on the full frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpleSupport {
    focus: HypothesisSet,
    belief: f64,
}

impl SimpleSupport {
    pub fn new(focus: HypothesisSet, belief: f64) -> Result<SimpleSupport, DstError> {
        if !(0.0..=1.0).contains(&belief) {
            return Err(DstError::BeliefOutOfRange(belief));
        }
        Ok(SimpleSupport { focus, belief })
    }

    pub fn focus(&self) -> HypothesisSet {
        self.focus
    }

    pub fn belief(&self) -> f64 {
        self.belief
    }

    /// The equivalent mass function: `m(focus) = belief`, remainder on
    /// the full frame. Belief 0 yields the vacuous function; a focus
    /// equal to the full frame collapses to it as well.
    pub fn mass_function(&self) -> MassFunction {
        let mut assignments = BTreeMap::new();
        if self.focus.is_full() || self.belief == 0.0 {
            assignments.insert(HypothesisSet::FULL, 1.0);
        } else {
            assignments.insert(self.focus, self.belief);
            if self.belief < 1.0 {
                assignments.insert(HypothesisSet::FULL, 1.0 - self.belief);
            }
        }
        MassFunction { assignments }
    }
}
