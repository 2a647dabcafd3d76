//! Possible worlds of a single BID relation, their grouping into classes,
//! and exact class probabilities.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::bid::BidRelation;
use crate::tolerance::tie;

pub const DEFAULT_MAX_WORLDS: u128 = 1_000_000;
pub const DEFAULT_MAX_STATES: u128 = 10_000_000;

/// Multiplicity of each support row in a world.
pub type ClassVector = Vec<u32>;

/// One chosen tuple index per block.
pub type World = Vec<usize>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("{count} possible worlds exceed the cap of {cap}")]
    CapExceeded { count: u128, cap: u128 },
    #[error("dynamic programme needs {states} states, cap is {cap}")]
    StateSpaceExceeded { states: u128, cap: u128 },
    #[error("class vector has {got} entries, support has {want}")]
    WrongLength { got: usize, want: usize },
}

/// Distinct rows of a relation in first-appearance order.
#[derive(Clone, Debug, PartialEq)]
pub struct Support {
    pub rows: Vec<Vec<String>>,
    /// Number of blocks containing each row.
    pub multiplicities: Vec<u32>,
    /// Per block, per tuple: (support index, probability).
    pub blocks: Vec<Vec<(usize, f64)>>,
}

impl Support {
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// Number of blocks.
    pub fn n(&self) -> usize {
        self.blocks.len()
    }

    pub fn max_block_size(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn world_count(&self) -> u128 {
        self.blocks.iter().fold(1u128, |acc, b| acc.saturating_mul(b.len() as u128))
    }

    fn check_len(&self, k: &[u32]) -> Result<(), WorldError> {
        if k.len() == self.m() {
            Ok(())
        } else {
            Err(WorldError::WrongLength { got: k.len(), want: self.m() })
        }
    }

    /// Σk = n and k_j ≤ n_j.
    pub fn passes_counts(&self, k: &[u32]) -> bool {
        k.len() == self.m()
            && k.iter().map(|&x| x as usize).sum::<usize>() == self.n()
            && k.iter().zip(&self.multiplicities).all(|(a, b)| a <= b)
    }
}

pub fn support_of(rel: &BidRelation) -> Support {
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut index: BTreeMap<&[String], usize> = BTreeMap::new();
    let mut multiplicities = Vec::new();
    let mut blocks = Vec::with_capacity(rel.blocks.len());
    for b in &rel.blocks {
        let mut out = Vec::with_capacity(b.tuples.len());
        for t in &b.tuples {
            let j = *index.entry(t.values.as_slice()).or_insert_with(|| {
                rows.push(t.values.clone());
                multiplicities.push(0);
                rows.len() - 1
            });
            multiplicities[j] += 1;
            out.push((j, t.prob));
        }
        blocks.push(out);
    }
    Support { rows, multiplicities, blocks }
}

/// Streams every world with its probability, first block varying slowest.
pub struct WorldIter<'a> {
    support: &'a Support,
    current: Option<World>,
}

impl Iterator for WorldIter<'_> {
    type Item = (World, f64);

    fn next(&mut self) -> Option<Self::Item> {
        let w = self.current.take()?;
        let p = world_probability(self.support, &w);
        let mut next = w.clone();
        let mut i = next.len();
        self.current = loop {
            if i == 0 {
                break None;
            }
            i -= 1;
            next[i] += 1;
            if next[i] < self.support.blocks[i].len() {
                break Some(next);
            }
            next[i] = 0;
        };
        Some((w, p))
    }
}

pub fn enumerate_worlds(support: &Support, cap: u128) -> Result<WorldIter<'_>, WorldError> {
    let count = support.world_count();
    if count > cap {
        return Err(WorldError::CapExceeded { count, cap });
    }
    let empty = support.blocks.iter().any(Vec::is_empty);
    Ok(WorldIter { support, current: (!empty).then(|| vec![0; support.n()]) })
}

pub fn world_probability(support: &Support, w: &[usize]) -> f64 {
    w.iter().zip(&support.blocks).map(|(&c, b)| b[c].1).product()
}

pub fn class_of(support: &Support, w: &[usize]) -> ClassVector {
    let mut k = vec![0u32; support.m()];
    for (&c, b) in w.iter().zip(&support.blocks) {
        k[b[c].0] += 1;
    }
    k
}

/// Probability of the class `k`, summed over its worlds by a DP over blocks
/// whose state is the partial multiplicity vector. Inadmissible vectors get 0.
pub fn class_probability(support: &Support, k: &[u32], state_cap: u128) -> Result<f64, WorldError> {
    class_dp(support, k, state_cap, |_, p| p, 0.0, |a, b| a + b)
}

/// Number of worlds in the class `k`.
pub fn class_world_count(support: &Support, k: &[u32], state_cap: u128) -> Result<u128, WorldError> {
    class_dp(support, k, state_cap, |_, _| 1u128, 0u128, |a, b| a.saturating_add(b))
}

fn class_dp<W: Copy + std::ops::Mul<Output = W>>(
    support: &Support,
    k: &[u32],
    state_cap: u128,
    weight: impl Fn(usize, f64) -> W,
    zero: W,
    add: impl Fn(W, W) -> W,
) -> Result<W, WorldError> {
    support.check_len(k)?;
    if !support.passes_counts(k) {
        return Ok(zero);
    }
    let states = k.iter().fold(1u128, |acc, &x| acc.saturating_mul(x as u128 + 1));
    if states > state_cap {
        return Err(WorldError::StateSpaceExceeded { states, cap: state_cap });
    }
    let mut strides = vec![0u64; k.len()];
    let mut s = 1u64;
    for (j, &x) in k.iter().enumerate().rev() {
        strides[j] = s;
        s *= x as u64 + 1;
    }
    let one = weight(usize::MAX, 1.0);
    // State key alongside the explicit counts so bounds are cheap to test.
    let mut layer: BTreeMap<u64, (Vec<u32>, W)> = BTreeMap::new();
    layer.insert(0, (vec![0; k.len()], one));
    for block in &support.blocks {
        let mut next: BTreeMap<u64, (Vec<u32>, W)> = BTreeMap::new();
        for (key, (counts, w)) in &layer {
            for &(j, p) in block {
                if counts[j] < k[j] {
                    let nk = key + strides[j];
                    let contrib = *w * weight(j, p);
                    match next.get_mut(&nk) {
                        Some(e) => e.1 = add(e.1, contrib),
                        None => {
                            let mut c = counts.clone();
                            c[j] += 1;
                            next.insert(nk, (c, contrib));
                        }
                    }
                }
            }
        }
        layer = next;
    }
    Ok(layer.into_values().next().map_or(zero, |(_, w)| w))
}

/// A world realizing `k`, found by augmenting paths from blocks to support
/// rows with quota `k_j`; `None` when `k` is not admissible.
pub fn representative_world(support: &Support, k: &[u32]) -> Option<World> {
    if !support.passes_counts(k) {
        return None;
    }
    let mut assigned: Vec<Option<usize>> = vec![None; support.n()];
    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); support.m()];
    for b in 0..support.n() {
        let mut seen = vec![false; support.m()];
        if !augment(support, k, b, &mut seen, &mut assigned, &mut holders) {
            return None;
        }
    }
    let w: World = assigned
        .iter()
        .zip(&support.blocks)
        .map(|(a, blk)| {
            let j = a.expect("every block assigned");
            blk.iter().position(|&(s, _)| s == j).expect("row in block")
        })
        .collect();
    Some(w)
}

fn augment(
    support: &Support,
    k: &[u32],
    b: usize,
    seen: &mut [bool],
    assigned: &mut [Option<usize>],
    holders: &mut [Vec<usize>],
) -> bool {
    for &(j, _) in &support.blocks[b] {
        if seen[j] {
            continue;
        }
        seen[j] = true;
        if (holders[j].len() as u32) < k[j] {
            holders[j].push(b);
            assigned[b] = Some(j);
            return true;
        }
        for h in 0..holders[j].len() {
            let other = holders[j][h];
            if augment(support, k, other, seen, assigned, holders) {
                holders[j][h] = b;
                assigned[b] = Some(j);
                return true;
            }
        }
    }
    false
}

pub fn is_admissible(support: &Support, k: &[u32]) -> bool {
    representative_world(support, k).is_some()
}

pub fn empirical_distribution(k: &[u32], n: usize) -> Vec<f64> {
    k.iter().map(|&x| x as f64 / n as f64).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassInfo {
    pub k: ClassVector,
    pub probability: f64,
    pub world_count: u128,
}

/// Every admissible class with its probability and size, sorted by vector.
/// Built by a DP over blocks keyed by the full multiplicity vector, so the
/// work is bounded by the number of partial classes rather than worlds.
pub fn all_classes(support: &Support, state_cap: u128) -> Result<Vec<ClassInfo>, WorldError> {
    let mut layer: BTreeMap<Vec<u32>, (f64, u128)> = BTreeMap::new();
    layer.insert(vec![0; support.m()], (1.0, 1));
    for block in &support.blocks {
        let mut next: BTreeMap<Vec<u32>, (f64, u128)> = BTreeMap::new();
        for (counts, &(p, c)) in &layer {
            for &(j, q) in block {
                let mut nk = counts.clone();
                nk[j] += 1;
                let e = next.entry(nk).or_insert((0.0, 0));
                e.0 += p * q;
                e.1 = e.1.saturating_add(c);
            }
        }
        if next.len() as u128 > state_cap {
            return Err(WorldError::StateSpaceExceeded { states: next.len() as u128, cap: state_cap });
        }
        layer = next;
    }
    Ok(layer
        .into_iter()
        .map(|(k, (probability, world_count))| ClassInfo { k, probability, world_count })
        .collect())
}

/// Classes found by grouping enumerated worlds, with summed probability and
/// world count.
pub fn classes_by_enumeration(support: &Support, cap: u128) -> Result<Vec<ClassInfo>, WorldError> {
    let mut groups: BTreeMap<ClassVector, (f64, u128)> = BTreeMap::new();
    for (w, p) in enumerate_worlds(support, cap)? {
        let e = groups.entry(class_of(support, &w)).or_insert((0.0, 0));
        e.0 += p;
        e.1 += 1;
    }
    Ok(groups
        .into_iter()
        .map(|(k, (probability, world_count))| ClassInfo { k, probability, world_count })
        .collect())
}

/// Classes of maximum probability, found by grouping enumerated worlds.
pub fn most_probable_classes_brute(support: &Support, cap: u128) -> Result<Vec<ClassVector>, WorldError> {
    let groups = classes_by_enumeration(support, cap)?;
    let best = groups.iter().map(|c| c.probability).fold(f64::NEG_INFINITY, f64::max);
    Ok(groups.into_iter().filter(|c| tie(c.probability, best)).map(|c| c.k).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bid::{BidTuple, Block};

    pub(crate) fn running_support() -> Support {
        let row = |c: &str| vec!["a".to_string(), if c == "00" { "0" } else { "1" }.to_string(), c[c.len() - 1..].to_string()];
        let single = |tid: &str, c: &str| Block {
            origin: tid.into(),
            tuples: vec![BidTuple { tid: format!("{tid}#1"), values: row(c), prob: 1.0 }],
        };
        let open = |tid: &str| Block {
            origin: tid.into(),
            tuples: ["10", "11", "12"]
                .iter()
                .zip([0.5, 0.25, 0.25])
                .enumerate()
                .map(|(i, (c, p))| BidTuple { tid: format!("{tid}#{}", i + 1), values: row(c), prob: p })
                .collect(),
        };
        let rel = BidRelation {
            name: "R".into(),
            attributes: vec!["A".into(), "B".into(), "C".into()],
            blocks: vec![
                single("t1", "00"),
                single("t2", "00"),
                open("t3"),
                single("t4", "10"),
                open("t5"),
                single("t6", "11"),
                open("t7"),
                single("t8", "12"),
            ],
        };
        support_of(&rel)
    }

    /// World W^[xyz] of the running example.
    fn w(x: usize, y: usize, z: usize) -> World {
        vec![0, 0, x, 0, y, 0, z, 0]
    }

    #[test]
    fn running_support_and_worlds() {
        let s = running_support();
        assert_eq!(s.m(), 4);
        assert_eq!(s.multiplicities, vec![2, 4, 4, 4]);
        assert_eq!(s.rows[2], vec!["a", "1", "1"]);
        let worlds: Vec<_> = enumerate_worlds(&s, 1000).unwrap().collect();
        assert_eq!(worlds.len(), 27);
        assert_eq!(worlds[0].1, 0.125);
        assert_eq!(worlds[26].1, 0.015625);
        assert_eq!(class_of(&s, &w(0, 1, 1)), vec![2, 2, 3, 1]);
        assert!(enumerate_worlds(&s, 26).is_err());
    }

    #[test]
    fn running_classes() {
        let s = running_support();
        let classes = all_classes(&s, 1000).unwrap();
        assert_eq!(classes.len(), 10);
        let c1 = class_of(&s, &w(0, 0, 2));
        assert_eq!(c1, vec![2, 3, 1, 2]);
        assert!((class_probability(&s, &c1, 1000).unwrap() - 0.1875).abs() < 1e-12);
        assert_eq!(class_world_count(&s, &c1, 1000).unwrap(), 3);
        let c8 = class_of(&s, &w(0, 0, 0));
        assert_eq!(class_probability(&s, &c8, 1000).unwrap(), 0.125);
        let total: f64 = classes.iter().map(|c| c.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(classes.iter().map(|c| c.world_count).sum::<u128>(), 27);
    }

    #[test]
    fn most_probable_running() {
        let s = running_support();
        let mp = most_probable_classes_brute(&s, 1000).unwrap();
        let want: Vec<ClassVector> = vec![class_of(&s, &w(0, 0, 1)), class_of(&s, &w(0, 1, 2)), class_of(&s, &w(0, 0, 2))];
        let mut want = want;
        want.sort();
        assert_eq!(mp, want);
    }

    #[test]
    fn admissibility() {
        let s = running_support();
        assert!(is_admissible(&s, &[2, 2, 3, 1]));
        assert!(!is_admissible(&s, &[3, 2, 2, 1]));
        // Counts pass, but t6 can only supply row 3.
        assert!(s.passes_counts(&[2, 4, 0, 2]));
        assert!(!is_admissible(&s, &[2, 4, 0, 2]));
        let rep = representative_world(&s, &[2, 2, 3, 1]).unwrap();
        assert_eq!(class_of(&s, &rep), vec![2, 2, 3, 1]);
        assert_eq!(class_probability(&s, &[2, 4, 0, 2], 1000).unwrap(), 0.0);
        assert_eq!(class_probability(&s, &[2, 1, 1, 4], 1000).unwrap(), 0.015625);
    }

    #[test]
    fn empirical_matches_table() {
        assert_eq!(empirical_distribution(&[2, 3, 1, 2], 8), vec![0.25, 0.375, 0.125, 0.25]);
    }

    #[test]
    fn state_cap() {
        let s = running_support();
        assert!(matches!(class_probability(&s, &[2, 3, 1, 2], 10), Err(WorldError::StateSpaceExceeded { .. })));
    }
}
