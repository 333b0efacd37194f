//! Non-private reference linkage over the same encoded inputs.

use std::collections::{BTreeSet, HashSet};

use crate::blocking::{InvertedIndex, OwnerBundle};
use crate::intersect::Threshold;

/// Index pairs sharing at least one blocking key.
pub fn candidate_pairs(b1: &InvertedIndex, b2: &InvertedIndex) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for (key, ids1) in b1 {
        if let Some(ids2) = b2.get(key) {
            for &i in ids1 {
                for &j in ids2 {
                    out.insert((i, j));
                }
            }
        }
    }
    out
}

pub fn intersection_size(a: &[i64], b: &[i64]) -> usize {
    let sa: HashSet<i64> = a.iter().copied().collect();
    b.iter().copied().collect::<HashSet<i64>>().intersection(&sa).count()
}

pub fn jaccard_passes(a: &[i64], b: &[i64], t: Threshold) -> bool {
    t.passes(intersection_size(a, b) as u64, a.len() as u64, b.len() as u64)
}

fn named(o1: &OwnerBundle, o2: &OwnerBundle, cells: impl Iterator<Item = (usize, usize)>) -> Vec<(String, String)> {
    let mut pairs: Vec<(String, String)> = cells
        .map(|(i, j)| (o1.encoded[i].id.clone(), o2.encoded[j].id.clone()))
        .collect();
    pairs.sort();
    pairs
}

/// Blocking followed by the Jaccard decision on candidate pairs.
pub fn link(o1: &OwnerBundle, o2: &OwnerBundle, t: Threshold) -> Vec<(String, String)> {
    let cells = candidate_pairs(&o1.blocks, &o2.blocks)
        .into_iter()
        .filter(|&(i, j)| jaccard_passes(&o1.encoded[i].containers, &o2.encoded[j].containers, t));
    named(o1, o2, cells)
}

/// The Jaccard decision on the full Cartesian product.
pub fn link_without_blocking(o1: &OwnerBundle, o2: &OwnerBundle, t: Threshold) -> Vec<(String, String)> {
    let n2 = o2.encoded.len();
    let cells = (0..o1.encoded.len())
        .flat_map(|i| (0..n2).map(move |j| (i, j)))
        .filter(|&(i, j)| jaccard_passes(&o1.encoded[i].containers, &o2.encoded[j].containers, t));
    named(o1, o2, cells)
}

/// Blocked pairs by external ids.
pub fn blocked_pairs(o1: &OwnerBundle, o2: &OwnerBundle) -> Vec<(String, String)> {
    named(o1, o2, candidate_pairs(&o1.blocks, &o2.blocks).into_iter())
}
