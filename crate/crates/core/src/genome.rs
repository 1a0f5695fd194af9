//! Level-separation genome.
//!
//! An organization with `N` leaves (databases) numbered left to right is
//! written as `N - 1` digits. Digit `i` is the level at which leaves `i` and
//! `i + 1` first separate: `1` means they belong to different trees, `2`
//! means they share a mediator but hang under different level-2 nodes, and so
//! on up to the maximum depth `M`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Digit type. Depths beyond 255 are not meaningful for this encoding.
pub type Level = u8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenomeError {
    #[error("genome is empty (an organization needs at least two leaves)")]
    EmptyGenome,
    #[error("maximum depth must be at least 1")]
    InvalidMaxDepth,
    #[error("digit {value} at index {index} is outside [1, {max_depth}]")]
    DigitOutOfRange {
        index: usize,
        value: u32,
        max_depth: Level,
    },
    #[error("leaf index {index} is outside 1..={leaf_count}")]
    IndexOutOfRange { index: usize, leaf_count: usize },
    #[error("genome lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("maximum depths differ ({left} vs {right})")]
    MaxDepthMismatch { left: Level, right: Level },
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error("cannot parse genome: {0}")]
    Parse(String),
}

/// A validated genome: every digit lies in `[1, max_depth]` and there is at
/// least one digit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawGenome", into = "RawGenome")]
pub struct Genome {
    digits: Vec<Level>,
    max_depth: Level,
}

#[derive(Serialize, Deserialize)]
struct RawGenome {
    digits: Vec<u32>,
    max_depth: u32,
}

impl TryFrom<RawGenome> for Genome {
    type Error = GenomeError;

    fn try_from(raw: RawGenome) -> Result<Self, Self::Error> {
        let max_depth = Level::try_from(raw.max_depth).map_err(|_| GenomeError::InvalidMaxDepth)?;
        Genome::validate(&raw.digits, max_depth)
    }
}

impl From<Genome> for RawGenome {
    fn from(g: Genome) -> Self {
        RawGenome {
            digits: g.digits.iter().map(|&d| u32::from(d)).collect(),
            max_depth: u32::from(g.max_depth),
        }
    }
}

impl Genome {
    /// Checks `digits` against `[1, max_depth]` and wraps them.
    pub fn validate(digits: &[u32], max_depth: Level) -> Result<Self, GenomeError> {
        if max_depth == 0 {
            return Err(GenomeError::InvalidMaxDepth);
        }
        if digits.is_empty() {
            return Err(GenomeError::EmptyGenome);
        }
        let mut out = Vec::with_capacity(digits.len());
        for (index, &value) in digits.iter().enumerate() {
            if value == 0 || value > u32::from(max_depth) {
                return Err(GenomeError::DigitOutOfRange {
                    index,
                    value,
                    max_depth,
                });
            }
            out.push(value as Level);
        }
        Ok(Genome {
            digits: out,
            max_depth,
        })
    }

    /// Same as [`Genome::validate`] for digits already held as [`Level`]s.
    pub fn new(digits: Vec<Level>, max_depth: Level) -> Result<Self, GenomeError> {
        if max_depth == 0 {
            return Err(GenomeError::InvalidMaxDepth);
        }
        if digits.is_empty() {
            return Err(GenomeError::EmptyGenome);
        }
        if let Some((index, &value)) = digits
            .iter()
            .enumerate()
            .find(|(_, &d)| d == 0 || d > max_depth)
        {
            return Err(GenomeError::DigitOutOfRange {
                index,
                value: u32::from(value),
                max_depth,
            });
        }
        Ok(Genome { digits, max_depth })
    }

    /// Caller guarantees the digit bounds.
    pub(crate) fn from_raw(digits: Vec<Level>, max_depth: Level) -> Self {
        debug_assert!(!digits.is_empty());
        debug_assert!(digits.iter().all(|&d| d >= 1 && d <= max_depth));
        Genome { digits, max_depth }
    }

    /// Parses the space-separated text form, e.g. `"2 2 3 1 2 3"`.
    pub fn parse(text: &str, max_depth: Level) -> Result<Self, GenomeError> {
        let digits = text
            .split_whitespace()
            .map(|tok| {
                tok.parse::<u32>()
                    .map_err(|e| GenomeError::Parse(format!("{tok:?}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Genome::validate(&digits, max_depth)
    }

    /// Draws every digit independently and uniformly from `[1, max_depth]`.
    pub fn random<R: Rng + ?Sized>(
        leaf_count: usize,
        max_depth: Level,
        rng: &mut R,
    ) -> Result<Self, GenomeError> {
        if max_depth == 0 {
            return Err(GenomeError::InvalidMaxDepth);
        }
        if leaf_count < 2 {
            return Err(GenomeError::EmptyGenome);
        }
        let digits = (0..leaf_count - 1)
            .map(|_| rng.gen_range(1..=max_depth))
            .collect();
        Ok(Genome { digits, max_depth })
    }

    pub fn digits(&self) -> &[Level] {
        &self.digits
    }

    pub fn into_digits(self) -> Vec<Level> {
        self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    /// Always false; a genome holds at least one digit.
    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// `N`, the number of leaves.
    pub fn leaf_count(&self) -> usize {
        self.digits.len() + 1
    }

    /// `M`, the depth bound the digits are validated against.
    pub fn max_depth(&self) -> Level {
        self.max_depth
    }

    /// Largest digit, i.e. the depth of the decoded organization.
    pub fn max_digit(&self) -> Level {
        self.digits.iter().copied().max().unwrap_or(1)
    }

    /// Level of leaf `index` (1-based), taken as the larger of the two
    /// neighbouring digits with virtual `1`s past either end.
    pub fn leaf_level(&self, index: usize) -> Result<Level, GenomeError> {
        let n = self.leaf_count();
        if index == 0 || index > n {
            return Err(GenomeError::IndexOutOfRange {
                index,
                leaf_count: n,
            });
        }
        let left = if index >= 2 { self.digits[index - 2] } else { 1 };
        let right = if index <= self.digits.len() {
            self.digits[index - 1]
        } else {
            1
        };
        Ok(left.max(right))
    }

    /// Removes single-child chains by lowering the minimum of every stage-k
    /// segment to `k + 1`.
    pub fn simplify(&self) -> Genome {
        let mut digits = self.digits.clone();
        simplify_digits(&mut digits, self.max_depth);
        Genome {
            digits,
            max_depth: self.max_depth,
        }
    }

    /// True when `simplify` leaves the genome unchanged.
    pub fn is_canonical(&self) -> bool {
        is_canonical_digits(&self.digits, self.max_depth)
    }

    /// Hamming distance between the digit sequences.
    pub fn distance(&self, other: &Genome) -> Result<usize, GenomeError> {
        if self.len() != other.len() {
            return Err(GenomeError::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        if self.max_depth != other.max_depth {
            return Err(GenomeError::MaxDepthMismatch {
                left: self.max_depth,
                right: other.max_depth,
            });
        }
        Ok(hamming(&self.digits, &other.digits))
    }
}

pub(crate) fn hamming(a: &[Level], b: &[Level]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Visits every maximal run of digits greater than `level` as a half-open
/// index range.
pub(crate) fn runs_above(digits: &[Level], level: Level) -> impl Iterator<Item = (usize, usize)> + '_ {
    let mut i = 0;
    std::iter::from_fn(move || {
        while i < digits.len() && digits[i] <= level {
            i += 1;
        }
        if i >= digits.len() {
            return None;
        }
        let start = i;
        while i < digits.len() && digits[i] > level {
            i += 1;
        }
        Some((start, i))
    })
}

pub(crate) fn simplify_digits(digits: &mut [Level], max_depth: Level) {
    for stage in 1..max_depth {
        let mut i = 0;
        while i < digits.len() {
            if digits[i] <= stage {
                i += 1;
                continue;
            }
            let start = i;
            while i < digits.len() && digits[i] > stage {
                i += 1;
            }
            let segment = &mut digits[start..i];
            let min = segment.iter().copied().min().unwrap_or(stage + 1);
            if min > stage + 1 {
                segment
                    .iter_mut()
                    .filter(|d| **d == min)
                    .for_each(|d| *d = stage + 1);
            }
        }
    }
}

pub(crate) fn is_canonical_digits(digits: &[Level], max_depth: Level) -> bool {
    (1..max_depth).all(|stage| {
        runs_above(digits, stage).all(|(s, e)| digits[s..e].contains(&(stage + 1)))
    })
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.digits.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}
