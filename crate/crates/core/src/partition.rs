//! Set partitions of the subsystem index set and their refinement order.
//!
//! Internally subsystems are 0-based. Labels use the 1-based notation
//! `1,3:2,4`: blocks separated by `:`, indices within a block by `,`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, SqeError};
use crate::tensor::SystemShape;

/// Largest `N` accepted by [`enumerate_partitions`]; Bell(12) = 4 213 597.
pub const MAX_ENUMERATED_SITES: usize = 12;

/// A partition `{I_1, ..., I_n}` of `{0, ..., N-1}` in canonical form: each
/// block ascending, blocks ordered by their smallest element.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    num_sites: usize,
}

impl Partition {
    /// Builds a partition from arbitrary-order blocks and canonicalizes it.
    pub fn new(mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.iter().any(|b| b.is_empty()) {
            return Err(SqeError::InvalidArgument("empty block".into()));
        }
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.sort_by_key(|b| b[0]);
        let num_sites: usize = blocks.iter().map(Vec::len).sum();
        let mut seen = vec![false; num_sites];
        for &i in blocks.iter().flatten() {
            if i >= num_sites || seen[i] {
                return Err(SqeError::InvalidArgument(format!("blocks {blocks:?} do not partition 0..{num_sites}")));
            }
            seen[i] = true;
        }
        if num_sites == 0 {
            return Err(SqeError::InvalidArgument("empty partition".into()));
        }
        Ok(Partition { blocks, num_sites })
    }

    /// Decodes a restricted growth string: `rgs[i]` is the block of site `i`.
    pub fn from_rgs(rgs: &[usize]) -> Self {
        let n_blocks = rgs.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); n_blocks];
        for (site, &b) in rgs.iter().enumerate() {
            blocks[b].push(site);
        }
        Partition { blocks, num_sites: rgs.len() }
    }

    /// The one-block partition.
    pub fn trivial(num_sites: usize) -> Self {
        Partition::from_rgs(&vec![0; num_sites])
    }

    /// The finest partition, every site its own party.
    pub fn singletons(num_sites: usize) -> Self {
        Partition::from_rgs(&(0..num_sites).collect::<Vec<_>>())
    }

    /// Parses the 1-based label grammar, e.g. `2,4:1,3`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        for block in s.trim().split(':') {
            let mut b = Vec::new();
            for idx in block.split(',') {
                let idx = idx.trim();
                let v: usize =
                    idx.parse().map_err(|_| SqeError::Parse(format!("bad index {idx:?} in partition {s:?}")))?;
                if v == 0 {
                    return Err(SqeError::Parse(format!("indices are 1-based in {s:?}")));
                }
                b.push(v - 1);
            }
            blocks.push(b);
        }
        Partition::new(blocks).map_err(|e| SqeError::Parse(format!("{s:?}: {e}")))
    }

    /// Canonical 1-based label, e.g. `1,3:2,4`.
    pub fn label(&self) -> String {
        self.blocks
            .iter()
            .map(|b| b.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join(":")
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn is_trivial(&self) -> bool {
        self.blocks.len() == 1
    }

    /// Sites in block order; permuting a system by this makes every party contiguous.
    pub fn site_order(&self) -> Vec<usize> {
        self.blocks.iter().flatten().copied().collect()
    }

    /// Block index of every site.
    pub fn block_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.num_sites];
        for (q, b) in self.blocks.iter().enumerate() {
            for &i in b {
                out[i] = q;
            }
        }
        out
    }

    fn check_shape(&self, shape: &SystemShape) -> Result<()> {
        if shape.len() != self.num_sites {
            return Err(SqeError::InvalidShape(format!(
                "partition {} over {} sites, system has {}",
                self.label(),
                self.num_sites,
                shape.len()
            )));
        }
        Ok(())
    }

    /// Dimension of every party's Hilbert space.
    pub fn party_dims(&self, shape: &SystemShape) -> Result<Vec<usize>> {
        self.check_shape(shape)?;
        Ok(self.blocks.iter().map(|b| b.iter().map(|&i| shape.dims()[i]).product()).collect())
    }

    /// True iff every block of `self` lies inside a block of `coarse`.
    pub fn is_refinement_of(&self, coarse: &Partition) -> Result<bool> {
        if self.num_sites != coarse.num_sites {
            return Err(SqeError::InvalidArgument(format!(
                "partitions over {} and {} sites",
                self.num_sites, coarse.num_sites
            )));
        }
        let owner = coarse.block_of();
        Ok(self.blocks.iter().all(|b| b.iter().all(|&i| owner[i] == owner[b[0]])))
    }

    /// All 2-block partitions obtained by merging blocks of `self`.
    pub fn two_block_coarsenings(&self) -> Vec<Partition> {
        let n = self.blocks.len();
        if n < 2 {
            return Vec::new();
        }
        // block 0 always on the left side; enumerate the subset of others joining it
        (0..(1usize << (n - 1)) - 1)
            .map(|mask| {
                let (mut left, mut right) = (self.blocks[0].clone(), Vec::new());
                for q in 1..n {
                    if mask & (1 << (q - 1)) != 0 {
                        left.extend(&self.blocks[q]);
                    } else {
                        right.extend(&self.blocks[q]);
                    }
                }
                Partition::new(vec![left, right]).expect("coarsening of a valid partition")
            })
            .collect()
    }

    /// The partition of the remaining sites after dropping the listed parties,
    /// with sites relabelled `0..` in ascending order of their old index.
    /// Also returns the old indices of the remaining sites.
    pub fn without_parties(&self, drop: &[usize]) -> Option<(Partition, Vec<usize>)> {
        let kept: Vec<&Vec<usize>> =
            self.blocks.iter().enumerate().filter(|(q, _)| !drop.contains(q)).map(|(_, b)| b).collect();
        if kept.is_empty() {
            return None;
        }
        let mut sites: Vec<usize> = kept.iter().flat_map(|b| b.iter().copied()).collect();
        sites.sort_unstable();
        let relabel = |i: usize| sites.binary_search(&i).unwrap();
        let blocks = kept.iter().map(|b| b.iter().map(|&i| relabel(i)).collect()).collect();
        Some((Partition::new(blocks).expect("sub-partition"), sites))
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Partition {
    type Err = SqeError;

    fn from_str(s: &str) -> Result<Self> {
        Partition::parse(s)
    }
}

impl Serialize for Partition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Partition::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Every partition of `n` sites, in lexicographic order of restricted
/// growth strings (so the one-block partition comes first).
pub fn enumerate_partitions(n: usize) -> Result<Vec<Partition>> {
    if n == 0 || n > MAX_ENUMERATED_SITES {
        return Err(SqeError::Limit(format!(
            "partition enumeration supports 1..={MAX_ENUMERATED_SITES} sites, got {n}"
        )));
    }
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    // prefix_max[i] = max(rgs[0..i])
    let mut prefix_max = vec![0usize; n];
    loop {
        out.push(Partition::from_rgs(&rgs));
        // rightmost position that can still grow
        let mut i = n - 1;
        loop {
            if i == 0 {
                return Ok(out);
            }
            if rgs[i] <= prefix_max[i] {
                break;
            }
            i -= 1;
        }
        rgs[i] += 1;
        for j in i + 1..n {
            rgs[j] = 0;
            prefix_max[j] = prefix_max[j - 1].max(rgs[j - 1]);
        }
    }
}

pub fn is_refinement(fine: &Partition, coarse: &Partition) -> Result<bool> {
    fine.is_refinement_of(coarse)
}

pub fn canonical_label(p: &Partition) -> String {
    p.label()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    /// Bell numbers from the triangle recurrence, independent of the enumerator.
    fn bell(n: usize) -> usize {
        let mut row = vec![1usize];
        for _ in 1..n {
            let mut next = vec![*row.last().unwrap()];
            for &x in &row {
                next.push(next.last().unwrap() + x);
            }
            row = next;
        }
        *row.last().unwrap()
    }

    #[test]
    fn bell_counts() {
        assert_eq!(enumerate_partitions(1).unwrap().len(), 1);
        assert_eq!(enumerate_partitions(4).unwrap().len(), 15);
        assert_eq!(bell(5), 52);
        for n in 1..=8 {
            let all = enumerate_partitions(n).unwrap();
            assert_eq!(all.len(), bell(n), "n = {n}");
            let unique: HashSet<_> = all.iter().collect();
            assert_eq!(unique.len(), all.len());
        }
    }

    #[test]
    fn four_sites_have_fourteen_nontrivial() {
        let nontrivial = enumerate_partitions(4).unwrap().into_iter().filter(|p| !p.is_trivial()).count();
        assert_eq!(nontrivial, 14);
    }

    #[test]
    fn enumeration_limits() {
        assert!(matches!(enumerate_partitions(0), Err(SqeError::Limit(_))));
        assert!(matches!(enumerate_partitions(13), Err(SqeError::Limit(_))));
    }

    #[test]
    fn refinement_examples() {
        let p = |s| Partition::parse(s).unwrap();
        assert!(is_refinement(&p("1,3:2,4"), &p("1,3:2,4")).unwrap());
        assert!(is_refinement(&p("1:2:3:4"), &p("1,3:2,4")).unwrap());
        assert!(!is_refinement(&p("1,2:3,4"), &p("1,3:2,4")).unwrap());
        assert!(is_refinement(&p("1:2"), &p("1:2:3")).is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(Partition::singletons(4).label(), "1:2:3:4");
        assert_eq!(Partition::trivial(4).label(), "1,2,3,4");
        let p = Partition::parse("2,4:1,3").unwrap();
        assert_eq!(p.blocks(), &[vec![0, 2], vec![1, 3]]);
        assert_eq!(canonical_label(&p), "1,3:2,4");
        assert_eq!("3:4:1,2".parse::<Partition>().unwrap().label(), "1,2:3:4");
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "1,1:2", "0:1", "1:3", "a:b", "1::2"] {
            assert!(Partition::parse(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn label_round_trip_all_n5() {
        for p in enumerate_partitions(5).unwrap() {
            assert_eq!(Partition::parse(&p.label()).unwrap(), p);
        }
    }

    #[test]
    fn semi_order_laws_up_to_five() {
        for n in 1..=5 {
            let all = enumerate_partitions(n).unwrap();
            for a in &all {
                assert!(a.is_refinement_of(a).unwrap());
                for b in &all {
                    let ab = a.is_refinement_of(b).unwrap();
                    if ab && b.is_refinement_of(a).unwrap() {
                        assert_eq!(a, b);
                    }
                    if !ab {
                        continue;
                    }
                    for c in &all {
                        if b.is_refinement_of(c).unwrap() {
                            assert!(a.is_refinement_of(c).unwrap());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn coarsenings_of_singletons() {
        let c = Partition::singletons(4).two_block_coarsenings();
        assert_eq!(c.len(), 7);
        let set: HashSet<String> = c.iter().map(Partition::label).collect();
        assert!(set.contains("1,3:2,4"));
        assert!(set.contains("1:2,3,4"));
        assert!(Partition::trivial(3).two_block_coarsenings().is_empty());
    }

    #[test]
    fn dropping_parties() {
        let p = Partition::parse("1:2:3,4").unwrap();
        let (sub, sites) = p.without_parties(&[0]).unwrap();
        assert_eq!(sites, vec![1, 2, 3]);
        assert_eq!(sub.label(), "1:2,3");
        assert!(p.without_parties(&[0, 1, 2]).is_none());
    }
}
