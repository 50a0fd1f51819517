use alloc::vec::Vec;

/// Fixed-capacity set of thread indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ThreadSet {
    words: Vec<u64>,
}

impl ThreadSet {
    /// The set `{0, .., n-1}`.
    pub(crate) fn full(n: usize) -> Self {
        let mut words = alloc::vec![u64::MAX; n.div_ceil(64)];
        if !n.is_multiple_of(64) {
            if let Some(last) = words.last_mut() {
                *last = (1u64 << (n % 64)) - 1;
            }
        }
        Self { words }
    }

    #[inline]
    pub(crate) fn contains(&self, t: usize) -> bool {
        self.words.get(t / 64).is_some_and(|w| w & (1 << (t % 64)) != 0)
    }

    #[inline]
    pub(crate) fn remove(&mut self, t: usize) {
        if let Some(w) = self.words.get_mut(t / 64) {
            *w &= !(1 << (t % 64));
        }
    }
}
