#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tsl::rational::q;
use tsl::{BlockVector, Enclosure, FamilyKind, SpaceSpec, Q};

/// Membership in S_n straight from the recursive definition: F splits into at most min F
/// successive pieces from S_{n-1}, with S_0 the sets of size ≤ 1.
pub fn brute_s(f: &[u64], n: u32) -> bool {
    brute_s_memo(f, n, &mut HashMap::new())
}

pub type SchreierMemo = HashMap<(Vec<u64>, u32), bool>;

pub fn brute_s_memo(f: &[u64], n: u32, memo: &mut SchreierMemo) -> bool {
    fn rec(f: &[u64], n: u32, memo: &mut SchreierMemo) -> bool {
        if f.len() <= 1 {
            return true;
        }
        if n == 0 {
            return false;
        }
        if let Some(&v) = memo.get(&(f.to_vec(), n)) {
            return v;
        }
        let limit = f[0] as usize;
        let mut found = false;
        // every composition of f into consecutive pieces
        let cuts = f.len() - 1;
        for mask in 0u32..(1 << cuts) {
            let pieces = mask.count_ones() as usize + 1;
            if pieces > limit {
                continue;
            }
            let mut start = 0;
            let mut ok = true;
            for i in 0..cuts {
                if mask >> i & 1 == 1 {
                    ok &= rec(&f[start..=i], n - 1, memo);
                    start = i + 1;
                }
                if !ok {
                    break;
                }
            }
            if ok && rec(&f[start..], n - 1, memo) {
                found = true;
                break;
            }
        }
        memo.insert((f.to_vec(), n), found);
        found
    }
    rec(f, n, memo)
}

/// max Σ_{i∈G} w_i over G ⊆ supp w with G ∈ S_M, by listing every subset.
pub fn brute_mss(w: &BTreeMap<u64, Q>, m: u32, memo: &mut SchreierMemo) -> Q {
    let keys: Vec<u64> = w.keys().copied().collect();
    let mut best = Q::from_integer(0.into());
    for mask in 0u32..(1 << keys.len()) {
        let g: Vec<u64> = (0..keys.len()).filter(|i| mask >> i & 1 == 1).map(|i| keys[i]).collect();
        if brute_s_memo(&g, m, memo) {
            let s: Q = g.iter().map(|k| w[k].clone()).sum();
            if s > best {
                best = s;
            }
        }
    }
    best
}

fn family_admits(spec: &SpaceSpec, n: u32, minima: &[u64]) -> bool {
    match spec.family_kind {
        FamilyKind::A => minima.len() as u32 <= spec.k(n),
        FamilyKind::S => brute_s(minima, spec.k(n)),
    }
}

/// The norm as the largest value of the norming set: every family of disjoint (successive unless
/// modified) nonempty subsets, every weight index whose family admits the minima.
pub struct ClosureOracle<'a> {
    spec: &'a SpaceSpec,
    keys: Vec<u64>,
    vals: Vec<Q>,
    memo: HashMap<u32, Enclosure>,
    max_index: u32,
    prec: u32,
}

impl<'a> ClosureOracle<'a> {
    pub fn new(spec: &'a SpaceSpec, x: &BlockVector) -> Self {
        ClosureOracle {
            spec,
            keys: x.support_vec(),
            vals: x.iter().map(|(_, c)| if *c < Q::from_integer(0.into()) { -c.clone() } else { c.clone() }).collect(),
            memo: HashMap::new(),
            max_index: spec.thetas.horizon().unwrap_or(8).min(8),
            prec: 64,
        }
    }

    pub fn norm(&mut self) -> Enclosure {
        let full = if self.keys.is_empty() { 0 } else { (1u32 << self.keys.len()) - 1 };
        self.value(full)
    }

    fn value(&mut self, mask: u32) -> Enclosure {
        if mask == 0 {
            return Enclosure::zero();
        }
        if let Some(v) = self.memo.get(&mask) {
            return v.clone();
        }
        let elems: Vec<usize> = (0..self.keys.len()).filter(|i| mask >> i & 1 == 1).collect();
        let mut best = Enclosure::Exact(elems.iter().map(|&i| self.vals[i].clone()).max().unwrap());
        let mut blocks: Vec<u32> = Vec::new();
        let mut families: Vec<Vec<u32>> = Vec::new();
        Self::families(&elems, 0, &mut blocks, &mut families);
        for fam in families {
            if fam.len() < 2 {
                continue;
            }
            let mut fam = fam;
            fam.sort_by_key(|b| b.trailing_zeros());
            if !self.spec.modified {
                let successive = fam.windows(2).all(|w| 31 - w[0].leading_zeros() < w[1].trailing_zeros());
                if !successive {
                    continue;
                }
            }
            let minima: Vec<u64> = fam.iter().map(|b| self.keys[b.trailing_zeros() as usize]).collect();
            let mut weight: Option<Enclosure> = None;
            for n in 1..=self.max_index {
                if family_admits(self.spec, n, &minima) {
                    if let Some(t) = self.spec.theta(n, self.prec) {
                        weight = Some(match weight {
                            None => t,
                            Some(w) => w.max(&t),
                        });
                    }
                }
            }
            let Some(w) = weight else { continue };
            let mut s = Enclosure::zero();
            for b in &fam {
                s = s.add(&self.value(*b));
            }
            best = best.max(&w.mul(&s));
        }
        self.memo.insert(mask, best.clone());
        best
    }

    /// Every family of disjoint nonempty blocks drawn from `elems` (each element is skipped,
    /// joins an open block, or opens a new one).
    fn families(elems: &[usize], pos: usize, blocks: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos == elems.len() {
            out.push(blocks.clone());
            return;
        }
        let bit = 1u32 << elems[pos];
        Self::families(elems, pos + 1, blocks, out);
        for i in 0..blocks.len() {
            blocks[i] |= bit;
            Self::families(elems, pos + 1, blocks, out);
            blocks[i] &= !bit;
        }
        blocks.push(bit);
        Self::families(elems, pos + 1, blocks, out);
        blocks.pop();
    }
}

pub fn oracle_norm(spec: &SpaceSpec, x: &BlockVector) -> Enclosure {
    ClosureOracle::new(spec, x).norm()
}

pub fn random_coeff(rng: &mut ChaCha8Rng) -> Q {
    let den = rng.gen_range(1..=4i64);
    let num = rng.gen_range(1..=4 * den);
    let v = q(num, 4 * den);
    if rng.gen_bool(0.3) {
        -v
    } else {
        v
    }
}

pub fn random_vector(rng: &mut ChaCha8Rng, max_support: usize, max_index: u64) -> BlockVector {
    let size = rng.gen_range(1..=max_support);
    let pool: Vec<u64> = (1..=max_index).collect();
    let mut x = BlockVector::new();
    for &i in pool.choose_multiple(rng, size) {
        x.set(i, random_coeff(rng));
    }
    x
}

/// The four spaces of the oracle comparison, with their support limits.
pub fn oracle_specs() -> Vec<(&'static str, SpaceSpec, usize)> {
    vec![
        ("T[S_1,1/2]", SpaceSpec::tsirelson(q(1, 2)), 7),
        ("T[(S_n,2^-n)]", SpaceSpec::geometric(q(1, 2), false), 7),
        ("T_M[(S_n,2^-n)]", SpaceSpec::geometric(q(1, 2), true), 6),
        ("T[(A_n,n^-1/2)]", SpaceSpec::power_law(q(1, 1), q(2, 1)), 7),
    ]
}

/// Exact equality for rational values; otherwise overlapping enclosures, both narrower than 1e-9.
pub fn agree(a: &Enclosure, b: &Enclosure) -> bool {
    match (a, b) {
        (Enclosure::Exact(x), Enclosure::Exact(y)) => x == y,
        _ => a.overlaps(b) && a.width() < q(1, 1_000_000_000) && b.width() < q(1, 1_000_000_000),
    }
}
