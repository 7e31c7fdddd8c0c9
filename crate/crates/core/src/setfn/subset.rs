use smallvec::SmallVec;

use crate::error::{Error, Result};

/// A subset of a ground set `{0, .., n-1}`.
///
/// Ground sets of up to 64 elements live in a single inline word, so a subset
/// is exactly a bitmask there; larger ground sets spill into extra words.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subset {
    n: usize,
    words: SmallVec<[u64; 1]>,
}

impl Subset {
    pub fn empty(n: usize) -> Self {
        let len = n.div_ceil(64).max(1);
        Subset { n, words: SmallVec::from_elem(0, len) }
    }

    pub fn full(n: usize) -> Self {
        let mut s = Subset::empty(n);
        for i in 0..n {
            s.insert(i);
        }
        s
    }

    /// Builds a subset from element indices, rejecting anything `>= n`.
    /// Duplicates are harmless.
    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        let mut s = Subset::empty(n);
        for &i in indices {
            if i >= n {
                return Err(Error::input(format!(
                    "element index {i} is out of range for a ground set of size {n}"
                )));
            }
            s.insert(i);
        }
        Ok(s)
    }

    /// Subset whose members are the set bits of `mask`; requires `n <= 64`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        debug_assert!(n <= 64);
        debug_assert!(n == 64 || mask >> n == 0);
        let mut s = Subset::empty(n);
        s.words[0] = mask;
        s
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = Subset::empty(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                s.insert(i);
            }
        }
        s
    }

    /// The bitmask of a subset of a ground set with at most 64 elements.
    pub fn mask(&self) -> u64 {
        debug_assert!(self.n <= 64);
        self.words[0]
    }

    pub fn ground_size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        i < self.n && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn insert(&mut self, i: usize) {
        debug_assert!(i < self.n);
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        debug_assert!(i < self.n);
        self.words[i / 64] &= !(1 << (i % 64));
    }

    #[inline]
    pub fn toggle(&mut self, i: usize) {
        debug_assert!(i < self.n);
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn with(&self, i: usize) -> Self {
        let mut s = self.clone();
        s.insert(i);
        s
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_subset_of(&self, other: &Subset) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn union(&self, other: &Subset) -> Subset {
        debug_assert_eq!(self.n, other.n);
        let mut s = self.clone();
        for (a, b) in s.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        s
    }

    pub fn complement(&self) -> Subset {
        let mut s = Subset::empty(self.n);
        for i in 0..self.n {
            if !self.contains(i) {
                s.insert(i);
            }
        }
        s
    }

    /// Members in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w * 64 + tz)
            })
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl std::fmt::Debug for Subset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
