use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ops::ControlFlow;

use crate::enclosure::Enclosure;
use crate::error::{Error, Result};
use crate::rational::Q;

/// Strictly increasing list of positive integers.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct FiniteSet(Vec<u64>);

impl FiniteSet {
    pub fn new(elems: Vec<u64>) -> Result<Self> {
        if elems.iter().any(|&e| e == 0) {
            return Err(Error::Parse("set elements must be ≥ 1".into()));
        }
        if elems.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parse("set elements must be strictly increasing".into()));
        }
        Ok(FiniteSet(elems))
    }

    /// Sorts and deduplicates; panics on 0.
    pub fn from_unsorted(mut elems: Vec<u64>) -> Self {
        elems.sort_unstable();
        elems.dedup();
        assert!(elems.first().map_or(true, |&e| e >= 1));
        FiniteSet(elems)
    }

    pub fn empty() -> Self {
        FiniteSet(Vec::new())
    }

    pub fn elems(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min_elem(&self) -> Option<u64> {
        self.0.first().copied()
    }

    pub fn max_elem(&self) -> Option<u64> {
        self.0.last().copied()
    }

    pub fn range(lo: u64, hi: u64) -> Self {
        FiniteSet((lo..=hi).collect())
    }
}

impl TryFrom<Vec<u64>> for FiniteSet {
    type Error = Error;
    fn try_from(v: Vec<u64>) -> Result<Self> {
        FiniteSet::new(v)
    }
}

impl From<FiniteSet> for Vec<u64> {
    fn from(s: FiniteSet) -> Vec<u64> {
        s.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilySpec {
    #[serde(rename = "A")]
    A(u32),
    #[serde(rename = "S")]
    S(u32),
    #[serde(rename = "compose")]
    Compose(Box<FamilySpec>, Box<FamilySpec>),
}

impl FamilySpec {
    pub fn s_a2(n: u32) -> Self {
        FamilySpec::Compose(Box::new(FamilySpec::S(n)), Box::new(FamilySpec::A(2)))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FamilySpec::A(0) => Err(Error::InvalidSpec("A(k) needs k ≥ 1".into())),
            FamilySpec::A(_) | FamilySpec::S(_) => Ok(()),
            FamilySpec::Compose(o, i) => {
                if matches!(**o, FamilySpec::Compose(..)) || matches!(**i, FamilySpec::Compose(..)) {
                    return Err(Error::InvalidSpec("compose nesting deeper than 2".into()));
                }
                o.validate()?;
                i.validate()
            }
        }
    }
}

/// Length of the longest prefix of `elems` lying in S_n (greedy packing).
fn max_prefix(elems: &[u64], n: u32) -> usize {
    if elems.is_empty() {
        return 0;
    }
    if n == 0 {
        return 1;
    }
    let cap = elems[0];
    let mut pos = 0usize;
    let mut count = 0u64;
    while pos < elems.len() && count < cap {
        pos += max_prefix(&elems[pos..], n - 1);
        count += 1;
    }
    pos
}

pub fn member_s(elems: &[u64], n: u32) -> bool {
    max_prefix(elems, n) == elems.len()
}

fn member_slice(elems: &[u64], fam: &FamilySpec) -> bool {
    if elems.is_empty() {
        return true;
    }
    match fam {
        FamilySpec::A(k) => elems.len() <= *k as usize,
        FamilySpec::S(n) => member_s(elems, *n),
        FamilySpec::Compose(outer, inner) => {
            let mut minima = Vec::with_capacity(elems.len());
            grouping_search(elems, inner, &mut minima, &mut |m| member_slice(m, outer))
        }
    }
}

/// Tries every split of `elems` into consecutive chunks belonging to `inner`;
/// calls `accept` on the chunk minima and stops at the first acceptance.
fn grouping_search(
    elems: &[u64],
    inner: &FamilySpec,
    minima: &mut Vec<u64>,
    accept: &mut dyn FnMut(&[u64]) -> bool,
) -> bool {
    if elems.is_empty() {
        return accept(minima);
    }
    for len in 1..=elems.len() {
        if !member_slice(&elems[..len], inner) {
            break;
        }
        minima.push(elems[0]);
        let ok = grouping_search(&elems[len..], inner, minima, accept);
        minima.pop();
        if ok {
            return true;
        }
    }
    false
}

pub fn member(f: &FiniteSet, fam: &FamilySpec) -> bool {
    member_slice(f.elems(), fam)
}

/// Least n with F ∈ S_n; `None` when F starts at 1 and has two or more elements.
pub fn schreier_rank(f: &FiniteSet) -> Option<u32> {
    rank_slice(f.elems())
}

pub fn rank_slice(elems: &[u64]) -> Option<u32> {
    if elems.len() <= 1 {
        return Some(0);
    }
    if elems[0] == 1 {
        return None;
    }
    (1..=elems.len() as u32).find(|&n| member_s(elems, n))
}

/// Least n with F ∈ S_n[inner].
pub fn compose_rank(elems: &[u64], inner: &FamilySpec) -> Option<u32> {
    if elems.is_empty() {
        return Some(0);
    }
    let mut best: Option<u32> = None;
    let mut minima = Vec::new();
    grouping_search(elems, inner, &mut minima, &mut |m| {
        if let Some(r) = rank_slice(m) {
            best = Some(best.map_or(r, |b| b.min(r)));
        }
        best == Some(0)
    });
    best
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub blocks: Vec<FiniteSet>,
    pub modified: bool,
}

impl Partition {
    pub fn validate(&self) -> Result<()> {
        if self.blocks.iter().any(|b| b.is_empty()) {
            return Err(Error::MalformedPartition("empty block".into()));
        }
        let mut all: Vec<u64> = self.blocks.iter().flat_map(|b| b.elems().iter().copied()).collect();
        let total = all.len();
        all.sort_unstable();
        all.dedup();
        if all.len() != total {
            return Err(Error::MalformedPartition("blocks overlap".into()));
        }
        if !self.modified
            && self
                .blocks
                .windows(2)
                .any(|w| w[0].max_elem().unwrap() >= w[1].min_elem().unwrap())
        {
            return Err(Error::MalformedPartition("blocks are not successive".into()));
        }
        Ok(())
    }

    pub fn minima(&self) -> FiniteSet {
        FiniteSet::from_unsorted(self.blocks.iter().filter_map(|b| b.min_elem()).collect())
    }
}

pub fn check_partition(p: &Partition, fam: &FamilySpec) -> Result<bool> {
    p.validate()?;
    Ok(member(&p.minima(), fam))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionItem {
    pub partition: Partition,
    pub rank: Option<u32>,
    pub blocks: usize,
}

pub const CAP_PLAIN: usize = 16;
pub const CAP_MODIFIED: usize = 12;

pub fn default_cap(modified: bool) -> usize {
    if modified {
        CAP_MODIFIED
    } else {
        CAP_PLAIN
    }
}

/// Visits set partitions of `elems` (restricted growth strings), blocks ordered by minimum.
pub fn visit_set_partitions<F>(elems: &[u64], f: &mut F) -> ControlFlow<()>
where
    F: FnMut(&[Vec<u64>]) -> ControlFlow<()>,
{
    fn rec<F>(elems: &[u64], i: usize, blocks: &mut Vec<Vec<u64>>, f: &mut F) -> ControlFlow<()>
    where
        F: FnMut(&[Vec<u64>]) -> ControlFlow<()>,
    {
        if i == elems.len() {
            return f(blocks);
        }
        for b in 0..blocks.len() {
            blocks[b].push(elems[i]);
            let r = rec(elems, i + 1, blocks, f);
            blocks[b].pop();
            r?;
        }
        blocks.push(vec![elems[i]]);
        let r = rec(elems, i + 1, blocks, f);
        blocks.pop();
        r
    }
    let mut blocks = Vec::new();
    rec(elems, 0, &mut blocks, f)
}

/// Streams every partition with at least two blocks (see module docs in README).
pub fn visit_partitions<F>(support: &FiniteSet, modified: bool, cap: usize, mut f: F) -> Result<()>
where
    F: FnMut(PartitionItem) -> ControlFlow<()>,
{
    let s = support.elems();
    if s.len() > cap {
        return Err(Error::CapExceeded { size: s.len(), cap });
    }
    let n = s.len();
    for mask in 1u64..(1u64 << n) {
        if mask.count_ones() < 2 {
            continue;
        }
        let chosen: Vec<u64> = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| s[i]).collect();
        if !modified {
            let mut blocks = Vec::with_capacity(chosen.len());
            for (k, &m) in chosen.iter().enumerate() {
                let next = chosen.get(k + 1).copied().unwrap_or(u64::MAX);
                let block: Vec<u64> = s.iter().copied().filter(|&e| e >= m && e < next).collect();
                blocks.push(FiniteSet(block));
            }
            let item = PartitionItem {
                rank: rank_slice(&chosen),
                blocks: blocks.len(),
                partition: Partition { blocks, modified },
            };
            if f(item).is_break() {
                return Ok(());
            }
        } else {
            let flow = visit_set_partitions(&chosen, &mut |bl| {
                if bl.len() < 2 {
                    return ControlFlow::Continue(());
                }
                let minima: Vec<u64> = bl.iter().map(|b| b[0]).collect();
                f(PartitionItem {
                    rank: rank_slice(&minima),
                    blocks: bl.len(),
                    partition: Partition {
                        blocks: bl.iter().map(|b| FiniteSet(b.clone())).collect(),
                        modified,
                    },
                })
            });
            if flow.is_break() {
                return Ok(());
            }
        }
    }
    Ok(())
}

pub fn enumerate_partitions(support: &FiniteSet, modified: bool, cap: usize) -> Result<Vec<PartitionItem>> {
    let mut out = Vec::new();
    visit_partitions(support, modified, cap, |it| {
        out.push(it);
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

pub const MSS_GENERAL_CAP: usize = 40;

/// sup over F ∈ S_M inside the key set of Σ_{i∈F} w(i).
pub fn max_schreier_sum(weights: &BTreeMap<u64, Q>, m_level: u32) -> Result<Enclosure> {
    let keys: Vec<u64> = weights.keys().copied().collect();
    let w: Vec<Q> = weights.values().cloned().collect();
    if w.iter().any(|x| x < &Q::zero()) {
        return Err(Error::PreconditionFailed("negative weight".into()));
    }
    if keys.first() == Some(&0) {
        return Err(Error::PreconditionFailed("index 0".into()));
    }
    let v = match m_level {
        0 => w.iter().max().cloned().unwrap_or_else(Q::zero),
        1 => mss_level1(&keys, &w),
        _ => {
            if keys.len() > MSS_GENERAL_CAP {
                return Err(Error::CapExceeded {
                    size: keys.len(),
                    cap: MSS_GENERAL_CAP,
                });
            }
            MssDp::new(&keys, &w).best(m_level, 0, keys.len())
        }
    };
    Ok(Enclosure::Exact(v))
}

/// S_1 case: F = {k_q} ∪ (k_q − 1 heaviest later keys); swept right to left over distinct values.
fn mss_level1(keys: &[u64], w: &[Q]) -> Q {
    let mut distinct: Vec<Q> = w.to_vec();
    distinct.sort_unstable_by(|a, b| b.cmp(a));
    distinct.dedup();
    let pos: BTreeMap<&Q, usize> = distinct.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut counts = vec![0u64; distinct.len()];
    let mut best = Q::zero();
    for q in (0..keys.len()).rev() {
        let mut need = keys[q].saturating_sub(1);
        let mut s = w[q].clone();
        for (v, &c) in distinct.iter().zip(&counts) {
            if need == 0 {
                break;
            }
            let t = c.min(need);
            if t > 0 {
                s += v * Q::from_integer(t.into());
                need -= t;
            }
        }
        if s > best {
            best = s;
        }
        counts[pos[&w[q]]] += 1;
    }
    best
}

/// General levels: best(M, q, e) over keys[q..e) and chain(M', q, r, e) = at most r successive S_{M'} sets.
struct MssDp<'a> {
    keys: &'a [u64],
    w: &'a [Q],
    best_memo: std::collections::HashMap<(u32, usize, usize), Q>,
    chain_memo: std::collections::HashMap<(u32, usize, usize, usize), Q>,
}

impl<'a> MssDp<'a> {
    fn new(keys: &'a [u64], w: &'a [Q]) -> Self {
        MssDp {
            keys,
            w,
            best_memo: Default::default(),
            chain_memo: Default::default(),
        }
    }

    fn best(&mut self, level: u32, q: usize, e: usize) -> Q {
        if q >= e {
            return Q::zero();
        }
        if level == 0 {
            return self.w[q..e].iter().max().cloned().unwrap();
        }
        if let Some(v) = self.best_memo.get(&(level, q, e)) {
            return v.clone();
        }
        let skip = self.best(level, q + 1, e);
        let budget = (self.keys[q] as usize).min(e - q);
        let take = self.chain(level - 1, q, budget, e);
        let v = if take > skip { take } else { skip };
        self.best_memo.insert((level, q, e), v.clone());
        v
    }

    fn chain(&mut self, level: u32, q: usize, r: usize, e: usize) -> Q {
        if r == 0 || q >= e {
            return Q::zero();
        }
        let r = r.min(e - q);
        if level == 0 {
            let mut v: Vec<&Q> = self.w[q..e].iter().collect();
            v.sort_unstable_by(|a, b| b.cmp(a));
            return v.into_iter().take(r).fold(Q::zero(), |acc, x| acc + x);
        }
        if let Some(v) = self.chain_memo.get(&(level, q, r, e)) {
            return v.clone();
        }
        let mut v = Q::zero();
        for c in (q + 1)..=e {
            let first = self.best(level, q, c);
            let rest = self.chain(level, c, r - 1, e);
            let t = first + rest;
            if t > v {
                v = t;
            }
        }
        self.chain_memo.insert((level, q, r, e), v.clone());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn fs(v: &[u64]) -> FiniteSet {
        FiniteSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn member_examples() {
        assert!(member(&fs(&[5]), &FamilySpec::S(0)));
        assert!(member(&fs(&[3, 4, 5]), &FamilySpec::S(1)));
        for n in 1..=5 {
            assert!(!member(&fs(&[1, 2]), &FamilySpec::S(n)));
        }
        assert!(member(&fs(&[2, 3, 4]), &FamilySpec::S(2)));
        assert!(!member(&fs(&[2, 3, 4]), &FamilySpec::S(1)));
        assert!(member(&FiniteSet::empty(), &FamilySpec::S(3)));
        assert!(member(&fs(&[1, 2]), &FamilySpec::A(2)));
        assert!(!member(&fs(&[1, 2, 3]), &FamilySpec::A(2)));
    }

    #[test]
    fn compose_examples() {
        // {1,2} is one A_2 chunk with minimum 1
        assert!(member(&fs(&[1, 2]), &FamilySpec::s_a2(0)));
        assert!(!member(&fs(&[1, 2, 3]), &FamilySpec::s_a2(5)));
        // {2,3,4,5}: chunks {2,3},{4,5} -> minima {2,4} ∈ S_1
        assert!(member(&fs(&[2, 3, 4, 5]), &FamilySpec::s_a2(1)));
        assert_eq!(compose_rank(&[2, 3, 4, 5], &FamilySpec::A(2)), Some(1));
        assert_eq!(compose_rank(&[3, 4], &FamilySpec::A(2)), Some(0));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(schreier_rank(&fs(&[7])), Some(0));
        assert_eq!(schreier_rank(&fs(&[2, 3, 4])), Some(2));
        assert_eq!(schreier_rank(&fs(&[1, 2])), None);
        assert_eq!(schreier_rank(&fs(&[1])), Some(0));
    }

    #[test]
    fn partition_examples() {
        let p = Partition {
            blocks: vec![fs(&[2]), fs(&[3])],
            modified: false,
        };
        assert!(check_partition(&p, &FamilySpec::S(1)).unwrap());
        let p = Partition {
            blocks: vec![fs(&[1]), fs(&[2, 3])],
            modified: false,
        };
        assert!(!check_partition(&p, &FamilySpec::S(1)).unwrap());
        let p = Partition {
            blocks: vec![fs(&[2, 4]), fs(&[3, 5])],
            modified: true,
        };
        assert!(check_partition(&p, &FamilySpec::S(1)).unwrap());
        let p = Partition {
            blocks: vec![fs(&[2, 4]), fs(&[3, 5])],
            modified: false,
        };
        assert!(matches!(
            check_partition(&p, &FamilySpec::S(1)),
            Err(Error::MalformedPartition(_))
        ));
        let p = Partition {
            blocks: vec![fs(&[2, 4]), fs(&[4, 5])],
            modified: true,
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn enumeration_examples() {
        let v = enumerate_partitions(&fs(&[2, 3]), false, 16).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].partition.blocks, vec![fs(&[2]), fs(&[3])]);
        assert!(enumerate_partitions(&fs(&[3]), true, 12).unwrap().is_empty());
        assert!(enumerate_partitions(&fs(&[3]), false, 12).unwrap().is_empty());
        // full set: S(3,2)+S(3,3) = 4, plus one split for each of the 3 pairs
        assert_eq!(enumerate_partitions(&fs(&[2, 3, 4]), true, 12).unwrap().len(), 7);
        assert!(matches!(
            enumerate_partitions(&FiniteSet::range(1, 17), false, 16),
            Err(Error::CapExceeded { size: 17, cap: 16 })
        ));
    }

    #[test]
    fn mss_examples() {
        let w: BTreeMap<u64, Q> = (4..=7).map(|i| (i, q(1, 4))).collect();
        assert_eq!(max_schreier_sum(&w, 1).unwrap(), Enclosure::Exact(q(1, 1)));
        let w: BTreeMap<u64, Q> = [(2, q(1, 2)), (3, q(3, 10)), (4, q(1, 5))].into_iter().collect();
        assert_eq!(max_schreier_sum(&w, 1).unwrap(), Enclosure::Exact(q(4, 5)));
        let n = 5u64;
        let w: BTreeMap<u64, Q> = (n..2 * n).map(|i| (i, q(1, n as i64))).collect();
        assert_eq!(max_schreier_sum(&w, 0).unwrap(), Enclosure::Exact(q(1, 5)));
        // level 2 through the general recursion agrees with level-1 fast path on S_1-sized input
        let w: BTreeMap<u64, Q> = [(2, q(1, 2)), (3, q(3, 10)), (4, q(1, 5))].into_iter().collect();
        assert_eq!(max_schreier_sum(&w, 2).unwrap(), Enclosure::Exact(q(1, 1)));
    }
}
