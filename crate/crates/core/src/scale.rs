//! The seven-point effect-intensity scale and subsets of it.
//!
//! The frame of discernment for all belief computations is the ordered
//! scale SN < NE < WN < IF < WP < PO < SP (strongly negative through
//! strongly positive). Hypotheses about an effect are non-empty subsets
//! of the scale, stored as a 7-bit mask so that all 127 subsets are
//! representable and cheap to intersect.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// One point of the intensity scale, ordered from strongly negative to
/// strongly positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IntensityPoint {
    StronglyNegative,
    Negative,
    WeaklyNegative,
    Indifferent,
    WeaklyPositive,
    Positive,
    StronglyPositive,
}

impl IntensityPoint {
    /// All seven points in scale order.
    pub const ALL: [IntensityPoint; 7] = [
        IntensityPoint::StronglyNegative,
        IntensityPoint::Negative,
        IntensityPoint::WeaklyNegative,
        IntensityPoint::Indifferent,
        IntensityPoint::WeaklyPositive,
        IntensityPoint::Positive,
        IntensityPoint::StronglyPositive,
    ];

    /// Position on the scale, 0 (SN) through 6 (SP).
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<IntensityPoint> {
        Self::ALL.get(index).copied()
    }

    /// Two-letter notation code used in documents and reports.
    pub fn code(self) -> &'static str {
        match self {
            IntensityPoint::StronglyNegative => "SN",
            IntensityPoint::Negative => "NE",
            IntensityPoint::WeaklyNegative => "WN",
            IntensityPoint::Indifferent => "IF",
            IntensityPoint::WeaklyPositive => "WP",
            IntensityPoint::Positive => "PO",
            IntensityPoint::StronglyPositive => "SP",
        }
    }

    /// Parse a notation code, case-insensitively.
    pub fn from_code(code: &str) -> Option<IntensityPoint> {
        let code = code.trim();
        Self::ALL
            .iter()
            .copied()
            .find(|p| p.code().eq_ignore_ascii_case(code))
    }

    /// The point mirrored across IF (SN <-> SP, NE <-> PO, WN <-> WP).
    pub fn mirrored(self) -> IntensityPoint {
        Self::ALL[6 - self.index()]
    }
}

impl fmt::Display for IntensityPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Errors from parsing hypothesis notation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NotationError {
    #[error("unknown intensity point `{0}`")]
    UnknownPoint(String),
    #[error("empty hypothesis set")]
    Empty,
    #[error("range `{0}` is reversed; endpoints must be in scale order")]
    ReversedRange(String),
}

/// A non-empty subset of the intensity scale, the unit of hypothesis in
/// all belief computations.
///
/// Backed by a 7-bit mask; bit `i` set means point `i` is a member. The
/// full set (all seven points) denotes total ignorance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HypothesisSet(u8);

const FULL_BITS: u8 = 0x7f;

impl HypothesisSet {
    /// The whole frame: total ignorance.
    pub const FULL: HypothesisSet = HypothesisSet(FULL_BITS);

    pub fn singleton(point: IntensityPoint) -> HypothesisSet {
        HypothesisSet(1 << point.index())
    }

    /// Build from an iterator of points; `None` if the iterator is empty.
    pub fn from_points<I: IntoIterator<Item = IntensityPoint>>(points: I) -> Option<HypothesisSet> {
        let bits = points
            .into_iter()
            .fold(0u8, |acc, p| acc | (1 << p.index()));
        HypothesisSet::from_bits(bits)
    }

    /// Closed interval of scale points from `low` to `high` inclusive.
    pub fn range(low: IntensityPoint, high: IntensityPoint) -> Option<HypothesisSet> {
        if low > high {
            return None;
        }
        HypothesisSet::from_points(
            (low.index()..=high.index()).filter_map(IntensityPoint::from_index),
        )
    }

    /// Reconstruct from a raw bit mask; `None` when empty or out of range.
    pub fn from_bits(bits: u8) -> Option<HypothesisSet> {
        if bits == 0 || bits > FULL_BITS {
            None
        } else {
            Some(HypothesisSet(bits))
        }
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, point: IntensityPoint) -> bool {
        self.0 & (1 << point.index()) != 0
    }

    pub fn cardinality(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_full(self) -> bool {
        self.0 == FULL_BITS
    }

    pub fn is_singleton(self) -> bool {
        self.0.count_ones() == 1
    }

    pub fn is_subset_of(self, other: HypothesisSet) -> bool {
        self.0 & other.0 == self.0
    }

    /// Set intersection; `None` when the sets are disjoint.
    pub fn intersection(self, other: HypothesisSet) -> Option<HypothesisSet> {
        HypothesisSet::from_bits(self.0 & other.0)
    }

    pub fn union(self, other: HypothesisSet) -> HypothesisSet {
        HypothesisSet(self.0 | other.0)
    }

    /// Members in scale order.
    pub fn points(self) -> impl Iterator<Item = IntensityPoint> {
        let bits = self.0;
        IntensityPoint::ALL
            .into_iter()
            .filter(move |p| bits & (1 << p.index()) != 0)
    }

    pub fn min_point(self) -> IntensityPoint {
        IntensityPoint::from_index(self.0.trailing_zeros() as usize).expect("non-empty set")
    }

    pub fn max_point(self) -> IntensityPoint {
        IntensityPoint::from_index(8 - self.0.leading_zeros() as usize - 1).expect("non-empty set")
    }

    /// Mean scale index of the members, used as the set's center of mass.
    pub fn midpoint(self) -> f64 {
        let sum: usize = self.points().map(|p| p.index()).sum();
        sum as f64 / self.cardinality() as f64
    }

    /// The set mirrored point-by-point across IF.
    pub fn mirrored(self) -> HypothesisSet {
        HypothesisSet::from_points(self.points().map(IntensityPoint::mirrored))
            .expect("mirror preserves cardinality")
    }

    /// Parse the document notation: a single point (`SP`), a brace list
    /// (`{IF,WP}`), or a closed range (`IF..WP`).
    pub fn parse(text: &str) -> Result<HypothesisSet, NotationError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(NotationError::Empty);
        }
        if let Some(inner) = text.strip_prefix('{') {
            let inner = inner
                .strip_suffix('}')
                .ok_or_else(|| NotationError::UnknownPoint(text.to_string()))?;
            let mut bits = 0u8;
            for token in inner.split(',') {
                let token = token.trim();
                if token.is_empty() {
                    return Err(NotationError::Empty);
                }
                let point = IntensityPoint::from_code(token)
                    .ok_or_else(|| NotationError::UnknownPoint(token.to_string()))?;
                bits |= 1 << point.index();
            }
            return HypothesisSet::from_bits(bits).ok_or(NotationError::Empty);
        }
        if let Some((lo, hi)) = text.split_once("..") {
            let low = IntensityPoint::from_code(lo)
                .ok_or_else(|| NotationError::UnknownPoint(lo.trim().to_string()))?;
            let high = IntensityPoint::from_code(hi)
                .ok_or_else(|| NotationError::UnknownPoint(hi.trim().to_string()))?;
            return HypothesisSet::range(low, high)
                .ok_or_else(|| NotationError::ReversedRange(text.to_string()));
        }
        IntensityPoint::from_code(text)
            .map(HypothesisSet::singleton)
            .ok_or_else(|| NotationError::UnknownPoint(text.to_string()))
    }

    /// The canonical notation: bare code for singletons, brace list
    /// otherwise. `parse` round-trips this exactly.
    pub fn notation(self) -> String {
        if self.is_singleton() {
            self.min_point().code().to_string()
        } else {
            let codes: Vec<&str> = self.points().map(IntensityPoint::code).collect();
            format!("{{{}}}", codes.join(","))
        }
    }
}

impl fmt::Display for HypothesisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.notation())
    }
}

impl FromStr for HypothesisSet {
    type Err = NotationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HypothesisSet::parse(s)
    }
}

impl Serialize for HypothesisSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.notation())
    }
}

impl<'de> Deserialize<'de> for HypothesisSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        HypothesisSet::parse(&text).map_err(D::Error::custom)
    }
}
