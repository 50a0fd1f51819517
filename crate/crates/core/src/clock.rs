//! Growable vector clocks.
//!
//! Entries are indexed by dense thread index. Reading past the stored length
//! yields 0 and writing past it grows the clock, so clocks of different
//! lengths compare and join as if padded with zeros.

use alloc::vec::Vec;
use core::fmt;

#[derive(Clone, Default)]
pub struct VectorClock {
    stamps: Vec<u64>,
}

impl VectorClock {
    pub fn new() -> Self {
        Self::default()
    }

    /// All-zero clock with room for `threads` entries.
    pub fn with_threads(threads: usize) -> Self {
        Self {
            stamps: alloc::vec![0; threads],
        }
    }

    pub fn from_slice(stamps: &[u64]) -> Self {
        Self {
            stamps: stamps.to_vec(),
        }
    }

    #[inline]
    pub fn get(&self, t: usize) -> u64 {
        self.stamps.get(t).copied().unwrap_or(0)
    }

    pub fn set(&mut self, t: usize, value: u64) {
        if t >= self.stamps.len() {
            if value == 0 {
                return;
            }
            self.stamps.resize(t + 1, 0);
        }
        self.stamps[t] = value;
    }

    /// Increments entry `t`. Overflow is a hard error.
    pub fn inc(&mut self, t: usize) {
        let next = self.get(t).checked_add(1).expect("vector clock overflow");
        self.set(t, next);
    }

    /// Componentwise maximum, in place. Returns whether anything changed.
    pub fn join(&mut self, other: &VectorClock) -> bool {
        if other.stamps.len() > self.stamps.len() {
            self.stamps.resize(other.stamps.len(), 0);
        }
        let mut changed = false;
        for (mine, &theirs) in self.stamps.iter_mut().zip(&other.stamps) {
            if theirs > *mine {
                *mine = theirs;
                changed = true;
            }
        }
        changed
    }

    /// `self ⊑ other`: every entry of `self` is at most the matching entry of `other`.
    pub fn leq(&self, other: &VectorClock) -> bool {
        self.stamps.iter().enumerate().all(|(t, &s)| s <= other.get(t))
    }

    /// Stored entries, trailing zeros included.
    pub fn as_slice(&self) -> &[u64] {
        &self.stamps
    }

    /// Entries up to the last non-zero one.
    pub fn trimmed(&self) -> &[u64] {
        let end = self.stamps.iter().rposition(|&s| s != 0).map_or(0, |i| i + 1);
        &self.stamps[..end]
    }

    /// Entries padded or truncated to `len`; used for fixed-width rendering.
    pub fn to_vec(&self, len: usize) -> Vec<u64> {
        (0..len).map(|t| self.get(t)).collect()
    }

    pub fn len(&self) -> usize {
        self.stamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamps.is_empty()
    }

    pub fn clear(&mut self) {
        self.stamps.iter_mut().for_each(|s| *s = 0);
    }
}

/// Pure increment: returns a copy with entry `t` bumped.
pub fn vc_inc(clock: &VectorClock, t: usize) -> VectorClock {
    let mut out = clock.clone();
    out.inc(t);
    out
}

/// Pure join.
pub fn vc_join(a: &VectorClock, b: &VectorClock) -> VectorClock {
    let mut out = a.clone();
    out.join(b);
    out
}

impl PartialEq for VectorClock {
    fn eq(&self, other: &Self) -> bool {
        self.trimmed() == other.trimmed()
    }
}

impl Eq for VectorClock {}

impl fmt::Debug for VectorClock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.stamps).finish()
    }
}

impl From<&[u64]> for VectorClock {
    fn from(stamps: &[u64]) -> Self {
        Self::from_slice(stamps)
    }
}

impl<const N: usize> From<[u64; N]> for VectorClock {
    fn from(stamps: [u64; N]) -> Self {
        Self::from_slice(&stamps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vc<const N: usize>(s: [u64; N]) -> VectorClock {
        VectorClock::from(s)
    }

    #[test]
    fn inc_examples() {
        assert_eq!(vc_inc(&vc([0, 0]), 0), vc([1, 0]));
        assert_eq!(vc_inc(&vc([1, 1, 0]), 1), vc([1, 2, 0]));
        assert_eq!(vc_inc(&VectorClock::new(), 2).as_slice(), &[0, 0, 1]);
    }

    #[test]
    fn join_examples() {
        assert_eq!(vc_join(&vc([1, 0, 0]), &vc([0, 1, 0])), vc([1, 1, 0]));
        let c = vc([3, 1, 4]);
        assert_eq!(vc_join(&c, &c), c);
        assert_eq!(vc_join(&vc([2]), &vc([0, 3])).as_slice(), &[2, 3]);
    }

    #[test]
    fn leq_examples() {
        assert!(vc([1, 0]).leq(&vc([1, 1])));
        assert!(!vc([1, 1]).leq(&vc([1, 0])));
        assert!(vc([0, 0]).leq(&vc([5])));
        assert!(vc([0, 0]).leq(&VectorClock::new()));
    }

    #[test]
    fn copies_are_independent() {
        let mut orig = vc([1, 2]);
        let copy = orig.clone();
        orig.inc(0);
        assert_eq!(copy, vc([1, 2]));
        assert_eq!(VectorClock::new().clone(), VectorClock::new());

        let mut v_t1 = vc([1, 0, 0]);
        let begin = v_t1.clone();
        v_t1.join(&vc([0, 1, 2]));
        assert_eq!(begin, vc([1, 0, 0]));
        assert_eq!(v_t1, vc([1, 1, 2]));
    }

    #[test]
    fn equality_ignores_trailing_zeros() {
        assert_eq!(vc([1, 0, 0]), vc([1]));
        assert_ne!(vc([1, 0, 1]), vc([1]));
    }

    #[test]
    #[should_panic(expected = "overflow")]
    fn overflow_is_fatal() {
        vc([u64::MAX]).inc(0);
    }

    fn arb_clock() -> impl Strategy<Value = VectorClock> {
        proptest::collection::vec(0u64..6, 0..5).prop_map(|v| VectorClock::from_slice(&v))
    }

    proptest! {
        #[test]
        fn join_is_a_least_upper_bound(a in arb_clock(), b in arb_clock(), c in arb_clock()) {
            let ab = vc_join(&a, &b);
            prop_assert_eq!(&ab, &vc_join(&b, &a));
            prop_assert_eq!(vc_join(&ab, &c), vc_join(&a, &vc_join(&b, &c)));
            prop_assert_eq!(vc_join(&a, &a), a.clone());
            prop_assert!(a.leq(&ab) && b.leq(&ab));
            if a.leq(&c) && b.leq(&c) {
                prop_assert!(ab.leq(&c));
            }
        }

        #[test]
        fn leq_is_a_partial_order(a in arb_clock(), b in arb_clock(), c in arb_clock()) {
            prop_assert!(a.leq(&a));
            if a.leq(&b) && b.leq(&a) {
                prop_assert_eq!(&a, &b);
            }
            if a.leq(&b) && b.leq(&c) {
                prop_assert!(a.leq(&c));
            }
        }

        #[test]
        fn inc_bumps_exactly_one_entry(a in arb_clock(), t in 0usize..6) {
            let b = vc_inc(&a, t);
            for i in 0..7 {
                let want = if i == t { a.get(i) + 1 } else { a.get(i) };
                prop_assert_eq!(b.get(i), want);
            }
        }
    }
}
