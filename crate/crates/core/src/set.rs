//! Sets of test ids and the bitmask indexing used by the exhaustive solvers.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A set of 0-based test ids, kept sorted and deduplicated.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct TestSet(Vec<usize>);

impl TestSet {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    /// The full ground set `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn singleton(id: usize) -> Self {
        Self(vec![id])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn max_id(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn insert(&mut self, id: usize) -> bool {
        match self.0.binary_search(&id) {
            Ok(_) => false,
            Err(pos) => {
                self.0.insert(pos, id);
                true
            }
        }
    }

    pub fn union(&self, other: &TestSet) -> TestSet {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => {
                    out.push(self.0[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(other.0[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        TestSet(out)
    }

    pub fn intersection(&self, other: &TestSet) -> TestSet {
        TestSet(self.iter().filter(|&id| other.contains(id)).collect())
    }

    pub fn difference(&self, other: &TestSet) -> TestSet {
        TestSet(self.iter().filter(|&id| !other.contains(id)).collect())
    }

    pub fn is_subset(&self, other: &TestSet) -> bool {
        self.iter().all(|id| other.contains(id))
    }

    pub fn is_disjoint(&self, other: &TestSet) -> bool {
        self.iter().all(|id| !other.contains(id))
    }
}

impl From<Vec<usize>> for TestSet {
    fn from(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        Self(ids)
    }
}

impl From<TestSet> for Vec<usize> {
    fn from(set: TestSet) -> Self {
        set.0
    }
}

impl<const N: usize> From<[usize; N]> for TestSet {
    fn from(ids: [usize; N]) -> Self {
        Self::from(ids.to_vec())
    }
}

impl FromIterator<usize> for TestSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self::from(iter.into_iter().collect::<Vec<_>>())
    }
}

impl<'a> IntoIterator for &'a TestSet {
    type Item = usize;
    type IntoIter = std::iter::Copied<std::slice::Iter<'a, usize>>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter().copied()
    }
}

impl fmt::Display for TestSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, id) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{id}")?;
        }
        write!(f, "}}")
    }
}

/// Maps bit `j` of a local mask to the `j`-th smallest id of a ground set.
#[derive(Debug, Clone)]
pub struct SubsetIndex {
    ground: Vec<usize>,
}

impl SubsetIndex {
    pub fn new(ground: &TestSet) -> Self {
        Self {
            ground: ground.as_slice().to_vec(),
        }
    }

    pub fn width(&self) -> usize {
        self.ground.len()
    }

    pub fn full_mask(&self) -> u32 {
        if self.ground.len() >= 32 {
            u32::MAX
        } else {
            (1u32 << self.ground.len()) - 1
        }
    }

    pub fn id(&self, bit: usize) -> usize {
        self.ground[bit]
    }

    pub fn to_set(&self, mask: u32) -> TestSet {
        TestSet(
            (0..self.ground.len())
                .filter(|&b| mask >> b & 1 == 1)
                .map(|b| self.ground[b])
                .collect(),
        )
    }

    /// Mask of `set` restricted to the ground set; ids outside it are ignored.
    pub fn mask_of(&self, set: &TestSet) -> u32 {
        set.iter()
            .filter_map(|id| self.ground.binary_search(&id).ok())
            .fold(0u32, |m, b| m | (1 << b))
    }
}

/// Iterates the nonempty submasks of `mask` in decreasing numeric order.
pub fn submasks(mask: u32) -> impl Iterator<Item = u32> {
    let mut next = Some(mask).filter(|&m| m != 0);
    std::iter::from_fn(move || {
        let cur = next?;
        let following = (cur - 1) & mask;
        next = (following != 0).then_some(following);
        Some(cur)
    })
}

/// Iterates the nonempty submasks of `mask` in increasing numeric order.
pub fn submasks_ascending(mask: u32) -> impl Iterator<Item = u32> {
    let mut cur = 0u32;
    std::iter::from_fn(move || {
        cur = cur.wrapping_sub(mask) & mask;
        (cur != 0).then_some(cur)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_algebra() {
        let a = TestSet::from([3, 1, 2, 1]);
        let b = TestSet::from([2, 5]);
        assert_eq!(a.as_slice(), &[1, 2, 3]);
        assert_eq!(a.union(&b).as_slice(), &[1, 2, 3, 5]);
        assert_eq!(a.intersection(&b).as_slice(), &[2]);
        assert_eq!(a.difference(&b).as_slice(), &[1, 3]);
        assert!(TestSet::from([1, 3]).is_subset(&a));
        assert!(!a.is_disjoint(&b));
    }

    #[test]
    fn subset_index_round_trip() {
        let ground = TestSet::from([2, 4, 7]);
        let idx = SubsetIndex::new(&ground);
        assert_eq!(idx.full_mask(), 0b111);
        assert_eq!(idx.to_set(0b101).as_slice(), &[2, 7]);
        assert_eq!(idx.mask_of(&TestSet::from([4, 7, 9])), 0b110);
    }

    #[test]
    fn submask_enumeration_is_complete() {
        let subs: Vec<u32> = submasks(0b1011).collect();
        assert_eq!(subs, vec![0b1011, 0b1010, 0b1001, 0b1000, 0b0011, 0b0010, 0b0001]);
        assert_eq!(submasks(0).count(), 0);
        let mut up: Vec<u32> = submasks_ascending(0b1011).collect();
        assert!(up.windows(2).all(|w| w[0] < w[1]));
        up.reverse();
        assert_eq!(up, subs);
    }
}
