use num_traits::Signed;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::HashMap;

use crate::enclosure::{Enclosure, DEFAULT_PREC};
use crate::error::{Error, Result};
use crate::rational::Q;
use crate::schreier::{default_cap, member, FamilySpec, FiniteSet};
use crate::space::SpaceSpec;
use crate::tree::NormingTree;
use crate::vector::BlockVector;

#[derive(Clone, Debug)]
pub struct NormConfig {
    /// Largest support handled; `None` uses 16 (plain) / 12 (modified).
    pub cap: Option<usize>,
    pub prec: u32,
    /// Restrict to tree-analyses with at most this many internal levels.
    pub max_height: Option<usize>,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig {
            cap: None,
            prec: DEFAULT_PREC,
            max_height: None,
        }
    }
}

impl NormConfig {
    pub fn with_cap(cap: Option<usize>) -> Self {
        NormConfig {
            cap,
            ..Default::default()
        }
    }

    pub fn effective_cap(&self, spec: &SpaceSpec) -> usize {
        self.cap.unwrap_or_else(|| default_cap(spec.modified))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub norm: Enclosure,
    pub functional: NormingTree,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
enum Choice {
    Leaf(usize),
    Split { n: u32, blocks: Vec<u32> },
}

#[derive(Clone, Debug)]
struct Entry {
    value: Enclosure,
    approx: f64,
    best: Enclosure,
    choice: Choice,
    nblocks: usize,
    minima: Vec<u64>,
}

impl Entry {
    /// Strictly preferable: larger value, then fewer blocks, then lexicographically smaller minima.
    fn beats(&self, other: &Entry) -> bool {
        match self.best.cmp_lo(&other.best) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => match self.nblocks.cmp(&other.nblocks) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => self.minima < other.minima,
            },
        }
    }
}

/// Float screen: a candidate whose estimate is clearly below the incumbent can neither win
/// nor tie, nor widen the hull, so its exact evaluation is skipped.
fn hopeless(slot: &Option<Entry>, approx: f64) -> bool {
    match slot {
        Some(cur) => approx < cur.approx - 1e-9 * cur.approx.abs().max(1.0),
        None => false,
    }
}

fn offer(slot: &mut Option<Entry>, cand: Entry) {
    match slot {
        None => *slot = Some(cand),
        Some(cur) => {
            let hull = cur.value.max(&cand.value);
            if cand.beats(cur) {
                *cur = cand;
            }
            cur.approx = cur.approx.max(hull.to_f64());
            cur.value = hull;
        }
    }
}

struct Engine<'a> {
    spec: &'a SpaceSpec,
    prec: u32,
    keys: Vec<u64>,
    abs: Vec<Q>,
    signs: Vec<i8>,
    thetas: HashMap<u32, Option<(Enclosure, f64)>>,
    abs_f: Vec<f64>,
    index_cache: HashMap<u32, Option<u32>>,
}

type Table = Vec<Option<Entry>>;

fn bits(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |i| mask >> i & 1 == 1)
}

fn is_contiguous(mask: u32) -> bool {
    let t = mask >> mask.trailing_zeros();
    t & (t + 1) == 0
}

impl<'a> Engine<'a> {
    fn new(x: &BlockVector, spec: &'a SpaceSpec, prec: u32) -> Self {
        let keys: Vec<u64> = x.coeffs().keys().copied().collect();
        let abs: Vec<Q> = x.coeffs().values().map(|c| c.abs()).collect();
        let abs_f = abs.iter().map(crate::rational::to_f64).collect();
        let signs = x
            .coeffs()
            .values()
            .map(|c| if c.is_negative() { -1 } else { 1 })
            .collect();
        Engine {
            spec,
            prec,
            keys,
            abs,
            abs_f,
            signs,
            thetas: HashMap::new(),
            index_cache: HashMap::new(),
        }
    }

    fn m(&self) -> usize {
        self.keys.len()
    }

    fn theta(&mut self, n: u32) -> Option<(Enclosure, f64)> {
        let (spec, prec) = (self.spec, self.prec);
        self.thetas
            .entry(n)
            .or_insert_with(|| spec.theta(n, prec).map(|t| {
                let f = t.to_f64();
                (t, f)
            }))
            .clone()
    }

    fn min_index(&mut self, minima_mask: u32) -> Option<u32> {
        if let Some(v) = self.index_cache.get(&minima_mask) {
            return *v;
        }
        let minima: Vec<u64> = bits(minima_mask).map(|p| self.keys[p]).collect();
        let v = self.spec.min_index(&minima);
        self.index_cache.insert(minima_mask, v);
        v
    }

    fn leaf_entry(&self, mask: u32) -> Entry {
        let mut best = bits(mask).next().unwrap();
        for p in bits(mask) {
            if self.abs[p] > self.abs[best] {
                best = p;
            }
        }
        let v = Enclosure::Exact(self.abs[best].clone());
        Entry {
            approx: self.abs_f[best],
            value: v.clone(),
            best: v,
            choice: Choice::Leaf(best),
            nblocks: 1,
            minima: vec![self.keys[best]],
        }
    }

    fn split_entry(&mut self, n: u32, blocks: Vec<u32>, minima_mask: u32, child: &Table, slot: &Option<Entry>) -> Option<Entry> {
        let (th, th_f) = self.theta(n)?;
        let est: f64 = blocks
            .iter()
            .map(|b| child[*b as usize].as_ref().expect("sub-block solved").approx)
            .sum::<f64>()
            * th_f;
        if hopeless(slot, est) {
            return None;
        }
        let mut sum = Enclosure::zero();
        for b in &blocks {
            sum = sum.add(&child[*b as usize].as_ref().expect("sub-block solved").value);
        }
        let v = th.mul(&sum);
        Some(Entry {
            approx: v.to_f64(),
            value: v.clone(),
            best: v,
            nblocks: blocks.len(),
            minima: bits(minima_mask).map(|p| self.keys[p]).collect(),
            choice: Choice::Split { n, blocks },
        })
    }

    fn solve_plain(&mut self, mask: u32, child: &Table) -> Entry {
        let mut slot = Some(self.leaf_entry(mask));
        let members: Vec<usize> = bits(mask).collect();
        let hi = *members.last().unwrap();
        // every subset of the segment with ≥ 2 points serves as the block minima
        let mut sub = mask;
        while sub != 0 {
            if sub.count_ones() >= 2 {
                if let Some(n) = self.min_index(sub) {
                    let mins: Vec<usize> = bits(sub).collect();
                    let blocks: Vec<u32> = mins
                        .iter()
                        .enumerate()
                        .map(|(k, &a)| {
                            let b = mins.get(k + 1).map_or(hi, |&nx| nx - 1);
                            (((1u64 << (b + 1)) - 1) as u32) & !(((1u64 << a) - 1) as u32)
                        })
                        .collect();
                    if let Some(e) = self.split_entry(n, blocks, sub, child, &slot) {
                        offer(&mut slot, e);
                    }
                }
            }
            sub = (sub - 1) & mask;
        }
        slot.unwrap()
    }

    /// Best partition of exactly `mask` into ≥ 2 blocks.
    fn cover(&mut self, mask: u32, child: &Table) -> Option<Entry> {
        let mut slot = None;
        let mut blocks = Vec::new();
        self.cover_rec(mask, 0, &mut blocks, child, &mut slot);
        slot
    }

    fn cover_rec(&mut self, rem: u32, minima: u32, blocks: &mut Vec<u32>, child: &Table, slot: &mut Option<Entry>) {
        if rem == 0 {
            if blocks.len() >= 2 {
                if let Some(n) = self.min_index(minima) {
                    if let Some(e) = self.split_entry(n, blocks.clone(), minima, child, slot) {
                        offer(slot, e);
                    }
                }
            }
            return;
        }
        let low = rem & rem.wrapping_neg();
        let rest = rem ^ low;
        // blocks listed by minimum; the lowest remaining point opens the next block
        let mut sub = rest;
        loop {
            let block = low | sub;
            if !(blocks.is_empty() && rest == sub) {
                blocks.push(block);
                self.cover_rec(rem ^ block, minima | low, blocks, child, slot);
                blocks.pop();
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }

    fn solve_modified(&mut self, mask: u32, child: &Table, cov: &mut Table) -> Entry {
        if mask.count_ones() >= 2 {
            cov[mask as usize] = self.cover(mask, child);
        }
        let mut slot = Some(self.leaf_entry(mask));
        let mut t = mask;
        while t.count_ones() >= 2 {
            if let Some(e) = cov[t as usize].clone() {
                offer(&mut slot, e);
            }
            t &= t - 1;
        }
        slot.unwrap()
    }

    fn layer(&mut self, child: Option<&Table>) -> Table {
        let m = self.m();
        let size = 1usize << m;
        let mut tab: Table = vec![None; size];
        let mut cov: Table = if self.spec.modified { vec![None; size] } else { Vec::new() };
        for mask in 1..size as u32 {
            if !self.spec.modified && !is_contiguous(mask) {
                continue;
            }
            let e = {
                let c: &Table = child.unwrap_or(&tab);
                if self.spec.modified {
                    self.solve_modified(mask, c, &mut cov)
                } else {
                    self.solve_plain(mask, c)
                }
            };
            tab[mask as usize] = Some(e);
        }
        tab
    }

    fn leaf_layer(&self) -> Table {
        let m = self.m();
        let size = 1usize << m;
        (0..size as u32)
            .map(|mask| {
                if mask == 0 || (!self.spec.modified && !is_contiguous(mask)) {
                    None
                } else {
                    Some(self.leaf_entry(mask))
                }
            })
            .collect()
    }

    fn build(&self, mask: u32, layers: &[Table], depth: usize) -> NormingTree {
        let tab = &layers[depth];
        let e = tab[mask as usize].as_ref().expect("solved mask");
        match &e.choice {
            Choice::Leaf(p) => NormingTree::leaf(self.keys[*p], self.signs[*p]),
            Choice::Split { n, blocks } => {
                let child_depth = if layers.len() == 1 { 0 } else { depth - 1 };
                NormingTree::node(
                    *n,
                    blocks
                        .iter()
                        .map(|b| self.build(*b, layers, child_depth))
                        .collect(),
                )
            }
        }
    }
}

fn check_cap(x: &BlockVector, spec: &SpaceSpec, cfg: &NormConfig) -> Result<()> {
    let cap = cfg.effective_cap(spec).min(30);
    if x.len() > cap {
        return Err(Error::CapExceeded { size: x.len(), cap });
    }
    Ok(())
}

pub fn norm_report(x: &BlockVector, spec: &SpaceSpec, cfg: &NormConfig) -> Result<NormReport> {
    spec.validate()?;
    check_cap(x, spec, cfg)?;
    let warnings = spec.warnings(cfg.prec);
    if x.is_zero() {
        return Ok(NormReport {
            norm: Enclosure::zero(),
            functional: NormingTree::leaf(1, 1),
            warnings,
        });
    }
    let mut eng = Engine::new(x, spec, cfg.prec);
    let full = ((1u64 << eng.m()) - 1) as u32;
    let layers = match cfg.max_height {
        None => vec![eng.layer(None)],
        Some(h) => {
            let mut layers = vec![eng.leaf_layer()];
            for _ in 0..h.min(eng.m()) {
                let next = eng.layer(Some(layers.last().unwrap()));
                layers.push(next);
            }
            layers
        }
    };
    let top = layers.len() - 1;
    let value = layers[top][full as usize].as_ref().unwrap().value.clone();
    let functional = eng.build(full, &layers, top);
    Ok(NormReport {
        norm: value,
        functional,
        warnings,
    })
}

pub fn norm_with(x: &BlockVector, spec: &SpaceSpec, cfg: &NormConfig) -> Result<Enclosure> {
    norm_report(x, spec, cfg).map(|r| r.norm)
}

pub fn norm(x: &BlockVector, spec: &SpaceSpec) -> Result<Enclosure> {
    norm_with(x, spec, &NormConfig::default())
}

pub fn norming_functional(x: &BlockVector, spec: &SpaceSpec) -> Result<NormingTree> {
    norm_report(x, spec, &NormConfig::default()).map(|r| r.functional)
}

/// Norms of every restriction x|E, indexed by bitmasks over the support positions.
pub fn subset_norms(x: &BlockVector, spec: &SpaceSpec, cfg: &NormConfig) -> Result<Vec<Enclosure>> {
    spec.validate()?;
    check_cap(x, spec, cfg)?;
    let m = x.len();
    let keys = x.support_vec();
    let size = 1usize << m;
    if spec.modified && cfg.max_height.is_none() {
        let mut eng = Engine::new(x, spec, cfg.prec);
        let tab = eng.layer(None);
        return Ok((0..size)
            .map(|mask| {
                tab[mask]
                    .as_ref()
                    .map_or_else(Enclosure::zero, |e| e.value.clone())
            })
            .collect());
    }
    let mut out = Vec::with_capacity(size);
    for mask in 0..size {
        let set: Vec<u64> = bits(mask as u32).map(|p| keys[p]).collect();
        out.push(norm_with(&x.restrict_to(&set), spec, cfg)?);
    }
    Ok(out)
}

/// Best value of Σ_i ‖E_i x‖ over families of pairwise disjoint subsets of the support whose
/// minima lie in `fam` (successive sets only when `successive`). `norms` is indexed by masks
/// over the support positions, as produced by [`subset_norms`].
pub fn max_split_sum(keys: &[u64], norms: &[Enclosure], fam: &FamilySpec, successive: bool) -> (Enclosure, Vec<Vec<u64>>) {
    struct Search<'a> {
        keys: &'a [u64],
        norms: &'a [Enclosure],
        fam: &'a FamilySpec,
        successive: bool,
        best: Enclosure,
        best_blocks: Vec<u32>,
        minima: Vec<u64>,
        blocks: Vec<u32>,
    }
    impl Search<'_> {
        fn go(&mut self, rem: u32, acc: Enclosure) {
            if acc.cmp_lo(&self.best) == Ordering::Greater {
                self.best_blocks = self.blocks.clone();
            }
            self.best = self.best.max(&acc);
            if rem == 0 {
                return;
            }
            let low = rem & rem.wrapping_neg();
            let rest = rem ^ low;
            self.go(rest, acc.clone());
            self.minima.push(self.keys[low.trailing_zeros() as usize]);
            if member(&FiniteSet::new(self.minima.clone()).expect("minima increase"), self.fam) {
                let mut sub = rest;
                loop {
                    let block = low | sub;
                    let next = if self.successive {
                        let top = 31 - block.leading_zeros();
                        rem & !(((2u64 << top) - 1) as u32)
                    } else {
                        rem ^ block
                    };
                    self.blocks.push(block);
                    let val = acc.add(&self.norms[block as usize]);
                    self.go(next, val);
                    self.blocks.pop();
                    if sub == 0 {
                        break;
                    }
                    sub = (sub - 1) & rest;
                }
            }
            self.minima.pop();
        }
    }
    let full = ((1u64 << keys.len()) - 1) as u32;
    let mut s = Search {
        keys,
        norms,
        fam,
        successive,
        best: Enclosure::zero(),
        best_blocks: Vec::new(),
        minima: Vec::new(),
        blocks: Vec::new(),
    };
    s.go(full, Enclosure::zero());
    let blocks = s
        .best_blocks
        .iter()
        .map(|b| bits(*b).map(|p| keys[p]).collect())
        .collect();
    (s.best, blocks)
}
