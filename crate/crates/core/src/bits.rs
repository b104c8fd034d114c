//! Fixed-width vertex masks.

use std::ops::{BitAnd, BitAndAssign, BitOr, BitOrAssign, Not};

const WORDS: usize = 4;

/// Number of vertices a mask can address.
pub(crate) const CAPACITY: usize = WORDS * 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub(crate) struct Mask([u64; WORDS]);

impl Mask {
    pub(crate) const EMPTY: Mask = Mask([0; WORDS]);

    #[inline]
    pub(crate) fn bit(i: usize) -> Mask {
        let mut m = Mask::EMPTY;
        m.0[i / 64] = 1 << (i % 64);
        m
    }

    /// All ids strictly below `i`.
    pub(crate) fn below(i: usize) -> Mask {
        let mut m = Mask::EMPTY;
        for (w, word) in m.0.iter_mut().enumerate() {
            let lo = w * 64;
            if i >= lo + 64 {
                *word = u64::MAX;
            } else if i > lo {
                *word = (1u64 << (i - lo)) - 1;
            }
        }
        m
    }

    pub(crate) fn full(n: usize) -> Mask {
        Mask::below(n.min(CAPACITY))
    }

    #[inline]
    pub(crate) fn is_empty(self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    #[inline]
    pub(crate) fn count(self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Smallest id in the mask; `CAPACITY` when empty.
    #[inline]
    pub(crate) fn lowest(self) -> usize {
        for (w, &word) in self.0.iter().enumerate() {
            if word != 0 {
                return w * 64 + word.trailing_zeros() as usize;
            }
        }
        CAPACITY
    }

    #[inline]
    pub(crate) fn contains(self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub(crate) fn intersects(self, other: Mask) -> bool {
        !(self & other).is_empty()
    }

    #[inline]
    pub(crate) fn is_subset_of(self, other: Mask) -> bool {
        (self & !other).is_empty()
    }

    pub(crate) fn ones(self) -> Ones {
        Ones(self)
    }
}

impl BitAnd for Mask {
    type Output = Mask;
    #[inline]
    fn bitand(mut self, rhs: Mask) -> Mask {
        self &= rhs;
        self
    }
}

impl BitOr for Mask {
    type Output = Mask;
    #[inline]
    fn bitor(mut self, rhs: Mask) -> Mask {
        self |= rhs;
        self
    }
}

impl BitAndAssign for Mask {
    #[inline]
    fn bitand_assign(&mut self, rhs: Mask) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a &= b;
        }
    }
}

impl BitOrAssign for Mask {
    #[inline]
    fn bitor_assign(&mut self, rhs: Mask) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a |= b;
        }
    }
}

impl Not for Mask {
    type Output = Mask;
    #[inline]
    fn not(mut self) -> Mask {
        for w in self.0.iter_mut() {
            *w = !*w;
        }
        self
    }
}

pub(crate) struct Ones(Mask);

impl Iterator for Ones {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        for (w, word) in self.0 .0.iter_mut().enumerate() {
            if *word != 0 {
                let i = word.trailing_zeros() as usize;
                *word &= *word - 1;
                return Some(w * 64 + i);
            }
        }
        None
    }
}

/// Whether the subgraph induced by `mask` is connected. Empty masks are not.
pub(crate) fn connected(adj: &[Mask], mask: Mask) -> bool {
    if mask.is_empty() {
        return false;
    }
    let mut seen = Mask::bit(mask.lowest());
    let mut frontier = seen;
    while !frontier.is_empty() {
        let mut next = Mask::EMPTY;
        for v in frontier.ones() {
            next |= adj[v];
        }
        next &= mask & !seen;
        seen |= next;
        frontier = next;
    }
    seen == mask
}
