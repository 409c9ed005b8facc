//! Fixed-size bit set used for finite domains and live-leaf sets.

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct BitSet {
    words: Vec<u64>,
    len: usize,
}

impl BitSet {
    pub fn empty(len: usize) -> Self {
        BitSet {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut s = Self::empty(len);
        s.insert_range(0, len);
        s
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut s = Self::empty(len);
        for i in 0..len {
            if f(i) {
                s.insert(i);
            }
        }
        s
    }

    #[inline]
    pub fn capacity(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i >> 6] & (1u64 << (i & 63)) != 0
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i >> 6] |= 1u64 << (i & 63);
    }

    #[inline]
    pub fn remove(&mut self, i: usize) -> bool {
        let had = self.contains(i);
        if had {
            self.words[i >> 6] &= !(1u64 << (i & 63));
        }
        had
    }

    /// Inserts `[lo, hi)`.
    pub fn insert_range(&mut self, lo: usize, hi: usize) {
        let hi = hi.min(self.len);
        if lo >= hi {
            return;
        }
        let (lw, hw) = (lo >> 6, (hi - 1) >> 6);
        let lmask = !0u64 << (lo & 63);
        let hmask = !0u64 >> (63 - ((hi - 1) & 63));
        if lw == hw {
            self.words[lw] |= lmask & hmask;
            return;
        }
        self.words[lw] |= lmask;
        for w in &mut self.words[lw + 1..hw] {
            *w = !0;
        }
        self.words[hw] |= hmask;
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Smallest member `>= i`.
    pub fn next_at_or_after(&self, i: usize) -> Option<usize> {
        if i >= self.len {
            return None;
        }
        let mut wi = i >> 6;
        let mut w = self.words[wi] & (!0u64 << (i & 63));
        loop {
            if w != 0 {
                let r = (wi << 6) + w.trailing_zeros() as usize;
                return (r < self.len).then_some(r);
            }
            wi += 1;
            if wi >= self.words.len() {
                return None;
            }
            w = self.words[wi];
        }
    }

    /// Largest member `<= i`.
    pub fn prev_at_or_before(&self, i: usize) -> Option<usize> {
        if self.len == 0 {
            return None;
        }
        let i = i.min(self.len - 1);
        let mut wi = i >> 6;
        let shift = 63 - (i & 63);
        let mut w = (self.words[wi] << shift) >> shift;
        loop {
            if w != 0 {
                return Some((wi << 6) + 63 - w.leading_zeros() as usize);
            }
            if wi == 0 {
                return None;
            }
            wi -= 1;
            w = self.words[wi];
        }
    }

    pub fn first(&self) -> Option<usize> {
        self.next_at_or_after(0)
    }

    pub fn last(&self) -> Option<usize> {
        self.prev_at_or_before(usize::MAX)
    }

    /// True when some member lies in the inclusive range `[lo, hi]`.
    #[inline]
    pub fn any_in(&self, lo: usize, hi: usize) -> bool {
        matches!(self.next_at_or_after(lo), Some(v) if v <= hi)
    }

    /// Keeps only members inside `[lo, hi]`; returns whether anything changed.
    pub fn retain_range(&mut self, lo: usize, hi: usize) -> bool {
        let mut changed = false;
        for i in 0..self.len {
            if (i < lo || i > hi) && self.remove(i) {
                changed = true;
            }
        }
        changed
    }

    pub fn intersects(&self, other: &BitSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .any(|(a, b)| a & b != 0)
    }

    /// `self &= other`; returns whether anything changed.
    pub fn intersect_with(&mut self, other: &BitSet) -> bool {
        let mut changed = false;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            let n = *a & b;
            changed |= n != *a;
            *a = n;
        }
        changed
    }

    /// True when every member of `self` is in `other`.
    pub fn is_subset(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn union_with(&mut self, other: &BitSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some((wi << 6) + b)
                }
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbours_across_words() {
        let mut s = BitSet::empty(200);
        s.insert(3);
        s.insert(64);
        s.insert(190);
        assert_eq!(s.next_at_or_after(4), Some(64));
        assert_eq!(s.next_at_or_after(65), Some(190));
        assert_eq!(s.next_at_or_after(191), None);
        assert_eq!(s.prev_at_or_before(189), Some(64));
        assert_eq!(s.prev_at_or_before(63), Some(3));
        assert_eq!(s.prev_at_or_before(2), None);
        assert_eq!(s.last(), Some(190));
        assert!(s.any_in(60, 70));
        assert!(!s.any_in(65, 189));
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![3, 64, 190]);
    }

    #[test]
    fn retain_and_count() {
        let mut s = BitSet::full(10);
        assert!(s.retain_range(2, 5));
        assert_eq!(s.count(), 4);
        assert!(!s.retain_range(0, 9));
    }

    #[test]
    fn ranges_and_subsets() {
        let mut s = BitSet::empty(300);
        s.insert_range(60, 130);
        assert_eq!(s.count(), 70);
        assert_eq!(s.first(), Some(60));
        assert_eq!(s.last(), Some(129));
        let mut t = BitSet::empty(300);
        t.insert_range(5, 6);
        assert_eq!(t.iter().collect::<Vec<_>>(), vec![5]);
        assert!(!t.is_subset(&s));
        t.clear();
        t.insert_range(64, 128);
        assert!(t.is_subset(&s));
        assert_eq!(BitSet::full(64).count(), 64);
    }
}
