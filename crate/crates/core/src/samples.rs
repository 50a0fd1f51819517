//! Small hand-built traces with known verdicts.

use crate::trace::{parse_trace, Trace};

/// Non-serializable through a non-increasing cycle; no violated transaction.
pub const NONINCREASING_CYCLE: &str = include_str!("../traces/noninc_cycle.trace");

/// Like [`NONINCREASING_CYCLE`] with one write changed so that region `A` is
/// violated. The violation is hidden from a one-edge-per-pair graph.
pub const STALE_EDGE: &str = include_str!("../traces/stale_edge.trace");

/// Violations on both `A` and `B`; the one on `A` is hidden from a
/// one-edge-per-pair graph for as long as `B` is a region.
pub const SHADOWED: &str = include_str!("../traces/shadowed.trace");

/// Two regions, one increasing cycle: `A` is violated.
pub const INCREASING_PAIR: &str = include_str!("../traces/increasing_pair.trace");

/// Two regions reading each other's writes: non-serializable, nothing violated.
pub const CROSSED_PAIR: &str = include_str!("../traces/crossed_pair.trace");

/// Serializable.
pub const CLEAN: &str = include_str!("../traces/clean.trace");

/// Parses one of the constants above.
pub fn load(text: &str) -> Trace {
    parse_trace(text).expect("sample traces are well formed")
}
