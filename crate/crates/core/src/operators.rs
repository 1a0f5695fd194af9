//! Crossover and mutation operators on [`Genome`]s.
//!
//! [`hierarchical_crossover`] swaps whole sub-organizations and then repairs
//! the offspring lengths by migrating single digits; the one-point and
//! two-point variants are the position-based baselines.

use std::ops::{Range, RangeInclusive};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::{runs_above, Genome, Level};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("parent lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("parent maximum depths differ ({left} vs {right})")]
    MaxDepthMismatch { left: Level, right: Level },
    #[error("genome of length {len} is too short for this operator (needs {needed})")]
    GenomeTooShort { len: usize, needed: usize },
    #[error("crossover node does not match the genome: {0}")]
    SpanMismatch(String),
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
}

/// An internal node of a decoded genome, located by the digits below it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossoverNode {
    pub level: Level,
    /// 1-based, inclusive.
    pub leaves: RangeInclusive<usize>,
    /// 0-based slice range into the digit array; always non-empty.
    pub digits: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentSplit {
    pub left: Vec<Level>,
    pub center: Vec<Level>,
    pub right: Vec<Level>,
}

fn check_pair(p1: &Genome, p2: &Genome) -> Result<(), OperatorError> {
    if p1.len() != p2.len() {
        return Err(OperatorError::LengthMismatch {
            left: p1.len(),
            right: p2.len(),
        });
    }
    if p1.max_depth() != p2.max_depth() {
        return Err(OperatorError::MaxDepthMismatch {
            left: p1.max_depth(),
            right: p2.max_depth(),
        });
    }
    Ok(())
}

fn check_probability(p: f64) -> Result<(), OperatorError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(OperatorError::InvalidProbability(p))
    }
}

/// Internal nodes on exactly `level`: the maximal runs of digits above it.
pub fn nodes_at_level(genome: &Genome, level: Level) -> Vec<CrossoverNode> {
    runs_above(genome.digits(), level)
        .map(|(start, end)| CrossoverNode {
            level,
            leaves: start + 1..=end + 1,
            digits: start..end,
        })
        .collect()
}

/// All internal nodes on levels `1..=max_level`, ordered by level then by
/// leftmost leaf. Single-leaf nodes are never listed.
pub fn list_crossover_nodes(genome: &Genome, max_level: Level) -> Vec<CrossoverNode> {
    (1..=max_level)
        .flat_map(|level| nodes_at_level(genome, level))
        .collect()
}

/// Cuts the digits into the part left of the node, the node's own
/// sub-structure and the part to its right.
pub fn extract_segments(genome: &Genome, node: &CrossoverNode) -> Result<SegmentSplit, OperatorError> {
    let d = genome.digits();
    let span = node.digits.clone();
    if span.is_empty() || span.end > d.len() {
        return Err(OperatorError::SpanMismatch(format!(
            "digit span {span:?} outside genome of length {}",
            d.len()
        )));
    }
    if *node.leaves.start() != span.start + 1 || *node.leaves.end() != span.end + 1 {
        return Err(OperatorError::SpanMismatch(format!(
            "leaf span {:?} disagrees with digit span {span:?}",
            node.leaves
        )));
    }
    if d[span.clone()].iter().any(|&x| x <= node.level) {
        return Err(OperatorError::SpanMismatch(format!(
            "digit span {span:?} contains a separator at level {} or above",
            node.level
        )));
    }
    let bounded_left = span.start == 0 || d[span.start - 1] <= node.level;
    let bounded_right = span.end == d.len() || d[span.end] <= node.level;
    if !(bounded_left && bounded_right) {
        return Err(OperatorError::SpanMismatch(format!(
            "digit span {span:?} is not a whole level-{} node",
            node.level
        )));
    }
    Ok(SegmentSplit {
        left: d[..span.start].to_vec(),
        center: d[span.clone()].to_vec(),
        right: d[span.end..].to_vec(),
    })
}

/// Random genome whose deepest digit is the depth bound.
fn random_full_depth<R: Rng + ?Sized>(len: usize, max_depth: Level, rng: &mut R) -> Genome {
    loop {
        let digits: Vec<Level> = (0..len).map(|_| rng.gen_range(1..=max_depth)).collect();
        if digits.contains(&max_depth) {
            return Genome::from_raw(digits, max_depth);
        }
    }
}

/// Swaps the sub-structures below `cp1` (in `p1`) and `cp2` (in `p2`).
pub(crate) fn exchange(
    p1: &Genome,
    cp1: &CrossoverNode,
    p2: &Genome,
    cp2: &CrossoverNode,
) -> Result<(Vec<Level>, Vec<Level>), OperatorError> {
    let s1 = extract_segments(p1, cp1)?;
    let s2 = extract_segments(p2, cp2)?;
    let o1 = [s1.left, s2.center, s1.right].concat();
    let o2 = [s2.left, s1.center, s2.right].concat();
    Ok((o1, o2))
}

/// Moves randomly chosen digits from the longer offspring into random slots
/// (both ends included) of the shorter one until both have `target` digits.
pub(crate) fn repair<R: Rng + ?Sized>(
    o1: &mut Vec<Level>,
    o2: &mut Vec<Level>,
    target: usize,
    rng: &mut R,
) {
    debug_assert_eq!(o1.len() + o2.len(), 2 * target);
    let (long, short) = if o1.len() > target {
        (o1, o2)
    } else if o2.len() > target {
        (o2, o1)
    } else {
        return;
    };
    while long.len() > target {
        let take = rng.gen_range(0..long.len());
        let slot = rng.gen_range(0..=short.len());
        let digit = long.remove(take);
        short.insert(slot, digit);
    }
}

/// Hierarchical crossover with length repair.
///
/// The parent with the larger maximum digit acts as the first parent (input
/// order is kept on ties) and the returned pair follows that order. When
/// either parent is one level deep, two fresh genomes reaching the depth
/// bound are returned instead.
pub fn hierarchical_crossover<R: Rng + ?Sized>(
    p1: &Genome,
    p2: &Genome,
    rng: &mut R,
) -> Result<(Genome, Genome), OperatorError> {
    check_pair(p1, p2)?;
    let (p1, p2) = if p1.max_digit() < p2.max_digit() {
        (p2, p1)
    } else {
        (p1, p2)
    };
    let max_depth = p1.max_depth();
    let len = p1.len();
    let top = p1.max_digit();
    let second_top = p2.max_digit();
    if top == 1 || second_top == 1 {
        return Ok((
            random_full_depth(len, max_depth, rng),
            random_full_depth(len, max_depth, rng),
        ));
    }

    let candidates = list_crossover_nodes(p1, top - 1);
    let cp1 = candidates
        .choose(rng)
        .expect("a parent deeper than one level has a level-1 internal node");
    let level2 = cp1.level.min(second_top - 1);
    let targets = nodes_at_level(p2, level2);
    // p2 has a digit above level2, so a node on that level exists
    let cp2 = targets.choose(rng).expect("second parent has a node on the target level");

    let (mut o1, mut o2) = exchange(p1, cp1, p2, cp2)?;
    repair(&mut o1, &mut o2, len, rng);
    Ok((Genome::from_raw(o1, max_depth), Genome::from_raw(o2, max_depth)))
}

/// Exchanges the suffixes after the first `cut` digits.
pub fn one_point_crossover_at(
    p1: &Genome,
    p2: &Genome,
    cut: usize,
) -> Result<(Genome, Genome), OperatorError> {
    check_pair(p1, p2)?;
    if cut > p1.len() {
        return Err(OperatorError::SpanMismatch(format!(
            "cut {cut} beyond length {}",
            p1.len()
        )));
    }
    let (a, b) = (p1.digits(), p2.digits());
    let o1 = [&a[..cut], &b[cut..]].concat();
    let o2 = [&b[..cut], &a[cut..]].concat();
    Ok((
        Genome::from_raw(o1, p1.max_depth()),
        Genome::from_raw(o2, p1.max_depth()),
    ))
}

/// One-point crossover with the cut drawn from `1..=len-1`, so both parents
/// contribute at least one digit to each child.
pub fn one_point_crossover<R: Rng + ?Sized>(
    p1: &Genome,
    p2: &Genome,
    rng: &mut R,
) -> Result<(Genome, Genome), OperatorError> {
    check_pair(p1, p2)?;
    if p1.len() < 2 {
        return Err(OperatorError::GenomeTooShort {
            len: p1.len(),
            needed: 2,
        });
    }
    let cut = rng.gen_range(1..p1.len());
    one_point_crossover_at(p1, p2, cut)
}

/// Exchanges digits `first..=last` (1-based positions).
pub fn two_point_crossover_at(
    p1: &Genome,
    p2: &Genome,
    first: usize,
    last: usize,
) -> Result<(Genome, Genome), OperatorError> {
    check_pair(p1, p2)?;
    if first == 0 || first > last || last > p1.len() {
        return Err(OperatorError::SpanMismatch(format!(
            "positions {first}..={last} invalid for length {}",
            p1.len()
        )));
    }
    let mut o1 = p1.digits().to_vec();
    let mut o2 = p2.digits().to_vec();
    o1[first - 1..last].swap_with_slice(&mut o2[first - 1..last]);
    Ok((
        Genome::from_raw(o1, p1.max_depth()),
        Genome::from_raw(o2, p1.max_depth()),
    ))
}

/// Two-point crossover over two distinct positions drawn uniformly.
pub fn two_point_crossover<R: Rng + ?Sized>(
    p1: &Genome,
    p2: &Genome,
    rng: &mut R,
) -> Result<(Genome, Genome), OperatorError> {
    check_pair(p1, p2)?;
    if p1.len() < 2 {
        return Err(OperatorError::GenomeTooShort {
            len: p1.len(),
            needed: 2,
        });
    }
    let picks = rand::seq::index::sample(rng, p1.len(), 2);
    let (a, b) = (picks.index(0) + 1, picks.index(1) + 1);
    two_point_crossover_at(p1, p2, a.min(b), a.max(b))
}

/// Replaces each digit, with probability `rate`, by a different value drawn
/// uniformly from `[1, M]`.
pub fn bitwise_mutation<R: Rng + ?Sized>(
    genome: &Genome,
    rate: f64,
    rng: &mut R,
) -> Result<Genome, OperatorError> {
    check_probability(rate)?;
    let max_depth = genome.max_depth();
    if max_depth < 2 {
        return Ok(genome.clone());
    }
    let digits = genome
        .digits()
        .iter()
        .map(|&d| {
            if rng.gen_bool(rate) {
                let other = rng.gen_range(1..max_depth);
                if other >= d {
                    other + 1
                } else {
                    other
                }
            } else {
                d
            }
        })
        .collect();
    Ok(Genome::from_raw(digits, max_depth))
}

/// Moves each digit, with probability `rate`, one level up or down; a step
/// past either bound leaves the digit where it was.
pub fn small_perturbation_mutation<R: Rng + ?Sized>(
    genome: &Genome,
    rate: f64,
    rng: &mut R,
) -> Result<Genome, OperatorError> {
    check_probability(rate)?;
    let max_depth = genome.max_depth();
    let digits = genome
        .digits()
        .iter()
        .map(|&d| {
            if !rng.gen_bool(rate) {
                return d;
            }
            let up = rng.gen_bool(0.5);
            match (up, d) {
                (true, d) if d < max_depth => d + 1,
                (false, d) if d > 1 => d - 1,
                _ => d,
            }
        })
        .collect();
    Ok(Genome::from_raw(digits, max_depth))
}
