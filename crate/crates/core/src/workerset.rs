use std::cmp::Ordering;
use std::fmt;

/// Most workers an instance may declare; sets are 64-bit masks.
pub const MAX_WORKERS: usize = 64;

/// A set of worker indices.
///
/// Ordering is canonical: by size, then lexicographically on the sorted
/// member indices. `BTreeMap<WorkerSet, _>` and sorted `Vec<WorkerSet>`
/// therefore list sets in canonical order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct WorkerSet(u64);

impl WorkerSet {
    pub const EMPTY: WorkerSet = WorkerSet(0);

    pub fn from_bits(bits: u64) -> Self {
        WorkerSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(w: usize) -> Self {
        WorkerSet(1u64 << w)
    }

    /// Every worker index below `n`.
    pub fn full(n: usize) -> Self {
        if n >= 64 {
            WorkerSet(u64::MAX)
        } else {
            WorkerSet((1u64 << n) - 1)
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(it: I) -> Self {
        WorkerSet(it.into_iter().fold(0u64, |acc, w| acc | (1u64 << w)))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, w: usize) -> bool {
        w < 64 && (self.0 >> w) & 1 == 1
    }

    pub fn insert(&mut self, w: usize) {
        self.0 |= 1u64 << w;
    }

    pub fn remove(&mut self, w: usize) {
        self.0 &= !(1u64 << w);
    }

    pub fn without(self, w: usize) -> Self {
        WorkerSet(self.0 & !(1u64 << w))
    }

    pub fn union(self, other: Self) -> Self {
        WorkerSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        WorkerSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        WorkerSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    /// `A ∩ B`, `A \ B` and `B \ A` all non-empty.
    pub fn crosses(self, other: Self) -> bool {
        !self.intersection(other).is_empty()
            && !self.difference(other).is_empty()
            && !other.difference(self).is_empty()
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let w = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w)
            }
        })
    }

    /// Member names joined for diagnostics, e.g. `{w1, w3}`.
    pub fn display_with<'a>(self, names: &'a [String]) -> impl fmt::Display + 'a {
        struct Named<'a>(WorkerSet, &'a [String]);
        impl fmt::Display for Named<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("{")?;
                for (i, w) in self.0.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    match self.1.get(w) {
                        Some(name) => f.write_str(name)?,
                        None => write!(f, "#{w}")?,
                    }
                }
                f.write_str("}")
            }
        }
        Named(self, names)
    }
}

impl Ord for WorkerSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| {
            // Equal sizes: the first differing member decides; the set holding
            // the smaller index comes first.
            let diff = self.0 ^ other.0;
            if diff == 0 {
                Ordering::Equal
            } else if self.0 & (diff & diff.wrapping_neg()) != 0 {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        })
    }
}

impl PartialOrd for WorkerSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for WorkerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
