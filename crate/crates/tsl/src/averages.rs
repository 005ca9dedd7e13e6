use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::enclosure::{Enclosure, DEFAULT_PREC};
use crate::error::{Error, Result};
use crate::norm::{max_split_sum, norm_with, subset_norms, NormConfig};
use crate::rational::{ceil_dyadic, qi, qopt, qstr, qvec, Q};
use crate::schreier::{max_schreier_sum, member_s, rank_slice, FamilySpec};
use crate::space::SpaceSpec;
use crate::tree::NormingTree;
use crate::vector::BlockVector;

fn pow2(i: usize) -> Q {
    Q::from_integer(BigInt::one() << i)
}

fn qu(n: u64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// x = Σ a_i x_i over successive blocks; G is the set of their minsupps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageCert {
    pub blocks: Vec<BlockVector>,
    #[serde(with = "qvec")]
    pub coeffs: Vec<Q>,
    #[serde(rename = "M")]
    pub m_level: u32,
    #[serde(with = "qstr")]
    pub eps: Q,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageCheck {
    pub ok: bool,
    pub rank: Option<u32>,
    /// sup of Σ a_i over S_{M-1} sets; absent for M = 0
    pub mass: Option<Enclosure>,
    pub failures: Vec<String>,
}

impl AverageCert {
    pub fn uniform(blocks: Vec<BlockVector>, m_level: u32, eps: Q) -> Self {
        let c = Q::new(BigInt::one(), BigInt::from(blocks.len()));
        AverageCert {
            coeffs: vec![c; blocks.len()],
            blocks,
            m_level,
            eps,
        }
    }

    pub fn vector(&self) -> BlockVector {
        let mut v = BlockVector::new();
        for (b, a) in self.blocks.iter().zip(&self.coeffs) {
            v.add_scaled(b, a);
        }
        v
    }

    pub fn minima(&self) -> Vec<u64> {
        self.blocks.iter().filter_map(|b| b.minsupp()).collect()
    }

    /// Coefficients keyed by the minsupp of their block.
    pub fn weights(&self) -> BTreeMap<u64, Q> {
        self.minima().into_iter().zip(self.coeffs.iter().cloned()).collect()
    }

    fn well_formed(&self) -> Result<()> {
        if self.blocks.len() != self.coeffs.len() {
            return Err(Error::MalformedDecomposition(format!(
                "{} blocks but {} coefficients",
                self.blocks.len(),
                self.coeffs.len()
            )));
        }
        if self.blocks.is_empty() || self.blocks.iter().any(|b| b.is_zero()) {
            return Err(Error::MalformedDecomposition("empty decomposition or zero block".into()));
        }
        if let Some(i) = self.blocks.windows(2).position(|w| !w[0].precedes(&w[1])) {
            return Err(Error::MalformedDecomposition(format!("blocks {i} and {} are not successive", i + 1)));
        }
        Ok(())
    }
}

pub fn check_average(cert: &AverageCert) -> Result<AverageCheck> {
    cert.well_formed()?;
    let mut failures = Vec::new();
    let g = cert.minima();
    let rank = rank_slice(&g);
    if !member_s(&g, cert.m_level) {
        failures.push(format!("G ∉ S_{} (rank {:?})", cert.m_level, rank));
    }
    if let Some((i, a)) = cert
        .coeffs
        .iter()
        .enumerate()
        .find(|(_, a)| !a.is_positive() || **a > Q::one())
    {
        failures.push(format!("coefficient {i} = {a} outside (0,1]"));
    }
    let total: Q = cert.coeffs.iter().cloned().sum();
    if !total.is_one() {
        failures.push(format!("coefficients sum to {total}"));
    }
    let mass = if cert.m_level == 0 {
        None
    } else {
        let w: BTreeMap<u64, Q> = cert.weights().into_iter().map(|(k, a)| (k, a.abs())).collect();
        let s = max_schreier_sum(&w, cert.m_level - 1)?;
        if !s.certainly_lt(&Enclosure::Exact(cert.eps.clone())) {
            failures.push(format!("S_{} mass {} not below ε = {}", cert.m_level - 1, s, cert.eps));
        }
        Some(s)
    };
    Ok(AverageCheck {
        ok: failures.is_empty(),
        rank,
        mass,
        failures,
    })
}

/// Source of normalized blocks for building averaging trees.
pub trait Supply {
    /// Next block with minsupp ≥ `from`.
    fn next_from(&mut self, from: u64) -> Result<BlockVector>;
}

#[derive(Clone, Debug)]
pub struct BasisSupply {
    pub next: u64,
    pub limit: Option<u64>,
}

impl BasisSupply {
    pub fn from(start: u64) -> Self {
        BasisSupply {
            next: start.max(1),
            limit: None,
        }
    }
}

impl Supply for BasisSupply {
    fn next_from(&mut self, from: u64) -> Result<BlockVector> {
        let k = self.next.max(from);
        if self.limit.is_some_and(|l| k > l) {
            return Err(Error::SupplyExhausted(format!("basis supply ends at {}", self.limit.unwrap())));
        }
        self.next = k + 1;
        Ok(BlockVector::basis(k))
    }
}

impl<F: FnMut(u64) -> Result<BlockVector>> Supply for F {
    fn next_from(&mut self, from: u64) -> Result<BlockVector> {
        self(from)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvgNode {
    pub vector: BlockVector,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(with = "qopt", default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Q>,
    #[serde(with = "qstr")]
    pub a: Q,
    /// half-open range of child positions on the level below
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub children: Option<(usize, usize)>,
}

/// Levels 0 (leaves) to M (the root).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragingTree {
    pub levels: Vec<Vec<AvgNode>>,
    /// The root may have a number of children different from its weight (restrictions).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub root_exception: bool,
}

impl AveragingTree {
    pub fn height(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn root(&self) -> &AvgNode {
        &self.levels[self.height()][0]
    }

    /// Leaf positions under node i of level j.
    pub fn leaf_range(&self, j: usize, i: usize) -> (usize, usize) {
        let (mut lo, mut hi) = (i, i + 1);
        for l in (1..=j).rev() {
            lo = self.levels[l][lo].children.expect("internal node").0;
            hi = self.levels[l][hi - 1].children.expect("internal node").1;
        }
        (lo, hi)
    }

    /// For every level, the node owning each leaf position.
    pub fn leaf_owner(&self) -> Vec<Vec<usize>> {
        let n0 = self.levels[0].len();
        (0..self.levels.len())
            .map(|j| {
                let mut owner = vec![usize::MAX; n0];
                for i in 0..self.levels[j].len() {
                    let (lo, hi) = self.leaf_range(j, i);
                    owner[lo..hi].iter_mut().for_each(|o| *o = i);
                }
                owner
            })
            .collect()
    }

    /// The root as an (M, ε_root)-average of the leaves.
    pub fn root_cert(&self) -> AverageCert {
        self.node_cert(self.height(), 0)
    }

    /// Node i of level j as a (j, ε_i^j)-average of the leaves below it, with
    /// coefficients relative to that node.
    pub fn node_cert(&self, j: usize, i: usize) -> AverageCert {
        let (lo, hi) = self.leaf_range(j, i);
        let top = &self.levels[j][i];
        AverageCert {
            blocks: self.levels[0][lo..hi].iter().map(|n| n.vector.clone()).collect(),
            coeffs: self.levels[0][lo..hi].iter().map(|n| &n.a / &top.a).collect(),
            m_level: j as u32,
            eps: top.eps.clone().unwrap_or_else(Q::one),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BuildParams {
    pub m_level: u32,
    pub eps: Q,
    pub power_of_two: bool,
    /// θ_M·ε for the strengthened error bounds ε_{i+1} ≤ θ_M ε / (2^i maxsupp x_i), ε_1 ≤ θ_M ε / 2
    pub error_scale: Option<Q>,
    pub max_leaves: usize,
}

impl BuildParams {
    pub fn new(m_level: u32, eps: Q) -> Self {
        BuildParams {
            m_level,
            eps,
            power_of_two: false,
            error_scale: None,
            max_leaves: 1 << 16,
        }
    }
}

struct Builder<'a> {
    supply: &'a mut dyn Supply,
    p: &'a BuildParams,
    levels: Vec<Vec<AvgNode>>,
    cursor: u64,
}

fn least_weight_above(bound: &Q, floor: u64, pow2_only: bool) -> u64 {
    // least integer N > bound with N > floor
    let t = bound.floor().to_integer();
    let mut n: u64 = u64::try_from(t).unwrap_or(u64::MAX - 1).saturating_add(1).max(floor + 1);
    if pow2_only {
        n = n.next_power_of_two();
    }
    n
}

impl Builder<'_> {
    fn node(&mut self, j: usize, first_eps: &Q) -> Result<()> {
        if j == 0 {
            let v = self.supply.next_from(self.cursor)?;
            if v.is_zero() || v.minsupp().unwrap() < self.cursor {
                return Err(Error::SupplyExhausted(format!(
                    "supply returned a block not starting at or after {}",
                    self.cursor
                )));
            }
            self.cursor = v.maxsupp().unwrap() + 1;
            self.levels[0].push(AvgNode {
                vector: v,
                n: None,
                eps: None,
                a: Q::zero(),
                children: None,
            });
            if self.levels[0].len() > self.p.max_leaves {
                return Err(Error::CapExceeded {
                    size: self.levels[0].len(),
                    cap: self.p.max_leaves,
                });
            }
            return Ok(());
        }
        let i = self.levels[j].len();
        let prev_max = self.levels[j].last().map(|n| n.vector.maxsupp().unwrap());
        let eps = match prev_max {
            None => match &self.p.error_scale {
                Some(s) => first_eps.clone().min(s / qi(2)),
                None => first_eps.clone(),
            },
            Some(ms) => {
                let d = pow2(i) * qu(ms);
                let strict = Q::one() / (&d + Q::one());
                match &self.p.error_scale {
                    Some(s) => strict.min(s / &d),
                    None => strict,
                }
            }
        };
        let n = least_weight_above(&(qi(2) / &eps), prev_max.unwrap_or(0), self.p.power_of_two);
        if n as usize > self.p.max_leaves {
            return Err(Error::CapExceeded {
                size: n as usize,
                cap: self.p.max_leaves,
            });
        }
        self.cursor = self.cursor.max(n);
        let start = self.levels[j - 1].len();
        for _ in 0..n {
            self.node(j - 1, &eps)?;
        }
        let end = self.levels[j - 1].len();
        let mut v = BlockVector::new();
        let w = Q::new(BigInt::one(), BigInt::from(n));
        for c in &self.levels[j - 1][start..end] {
            v.add_scaled(&c.vector, &w);
        }
        self.levels[j].push(AvgNode {
            vector: v,
            n: Some(n),
            eps: Some(eps),
            a: Q::zero(),
            children: Some((start, end)),
        });
        Ok(())
    }
}

fn fill_coefficients(levels: &mut [Vec<AvgNode>]) {
    let top = levels.len() - 1;
    levels[top][0].a = Q::one();
    for j in (1..=top).rev() {
        for i in 0..levels[j].len() {
            let node = &levels[j][i];
            let (s, e) = node.children.unwrap();
            let ca = &node.a / qu(node.n.unwrap());
            for c in s..e {
                levels[j - 1][c].a = ca.clone();
            }
        }
    }
}

pub fn build_averaging_tree(supply: &mut dyn Supply, params: &BuildParams) -> Result<AveragingTree> {
    if !params.eps.is_positive() {
        return Err(Error::PreconditionFailed("ε must be positive".into()));
    }
    let m = params.m_level as usize;
    let mut b = Builder {
        supply,
        p: params,
        levels: vec![Vec::new(); m + 1],
        cursor: 1,
    };
    b.node(m, &params.eps)?;
    let mut levels = b.levels;
    fill_coefficients(&mut levels);
    Ok(AveragingTree {
        levels,
        root_exception: false,
    })
}

#[derive(Clone, Debug, Default)]
pub struct TreeRules {
    pub power_of_two: bool,
    pub error_scale: Option<Q>,
}

/// Violations of the averaging-tree conditions and the coefficient identities.
pub fn check_averaging_tree(t: &AveragingTree, rules: &TreeRules) -> Vec<String> {
    let mut out = Vec::new();
    let h = t.height();
    if t.levels.iter().any(|l| l.is_empty()) {
        out.push("empty level".into());
        return out;
    }
    if t.levels[h].len() != 1 {
        out.push(format!("top level has {} nodes", t.levels[h].len()));
        return out;
    }
    for (j, level) in t.levels.iter().enumerate() {
        if level.iter().any(|n| n.vector.is_zero()) {
            out.push(format!("level {j}: zero vector"));
            return out;
        }
        if let Some(i) = level.windows(2).position(|w| !w[0].vector.precedes(&w[1].vector)) {
            out.push(format!("level {j}: nodes {} and {} not successive", i + 1, i + 2));
        }
        if j > 0 && level.len() > t.levels[j - 1].len() {
            out.push(format!("level {j} wider than level {}", j - 1));
        }
    }
    for j in 1..=h {
        let mut expect = 0usize;
        for (i, node) in t.levels[j].iter().enumerate() {
            let tag = format!("x_{}^{}", i + 1, j);
            let (Some(n), Some(eps), Some((s, e))) = (node.n, node.eps.as_ref(), node.children) else {
                out.push(format!("{tag}: missing weight, error or children"));
                continue;
            };
            if s != expect || e <= s || e > t.levels[j - 1].len() {
                out.push(format!("{tag}: children {s}..{e} are not the next interval"));
                expect = e;
                continue;
            }
            expect = e;
            let exempt = j == h && t.root_exception;
            if !exempt && (e - s) as u64 != n {
                out.push(format!("{tag}: {} children but N = {n}", e - s));
            }
            let mut avg = BlockVector::new();
            let w = Q::new(BigInt::one(), BigInt::from(n));
            for c in &t.levels[j - 1][s..e] {
                avg.add_scaled(&c.vector, &w);
            }
            if avg != node.vector {
                out.push(format!("{tag}: vector is not 1/N times the sum of its children"));
            }
            if !(eps.is_positive() && *eps < Q::one()) {
                out.push(format!("{tag}: error {eps} outside (0,1)"));
            }
            if qi(2) / eps >= qu(n) {
                out.push(format!("{tag}: 2/ε = {} not below N = {n}", qi(2) / eps));
            }
            if n > node.vector.minsupp().unwrap() {
                out.push(format!("{tag}: N = {n} exceeds minsupp {}", node.vector.minsupp().unwrap()));
            }
            if rules.power_of_two && !n.is_power_of_two() {
                out.push(format!("{tag}: N = {n} is not a power of two"));
            }
            if i > 0 {
                let prev = t.levels[j][i - 1].vector.maxsupp().unwrap();
                let d = pow2(i) * qu(prev);
                if *eps >= Q::one() / &d {
                    out.push(format!("{tag}: ε = {eps} not below 1/(2^{i}·{prev})"));
                }
                if n <= prev {
                    out.push(format!("{tag}: N = {n} not above previous maxsupp {prev}"));
                }
                if let Some(sc) = &rules.error_scale {
                    if *eps > sc / &d {
                        out.push(format!("{tag}: ε exceeds the strengthened bound"));
                    }
                }
            } else if let Some(sc) = &rules.error_scale {
                if *eps > sc / qi(2) {
                    out.push(format!("{tag}: ε_1 exceeds θ_M ε / 2"));
                }
            }
        }
        if expect != t.levels[j - 1].len() {
            out.push(format!("level {j}: children do not cover level {}", j - 1));
        }
    }
    if !out.is_empty() {
        return out;
    }
    // coefficient identities: Σ_i a_i^j constant in j (1 without the root exception),
    // a_i^j = product of 1/N over strict ancestors, a_i^j = Σ of descendant leaf coefficients
    let root_a = &t.root().a;
    if !root_a.is_one() {
        out.push(format!("root coefficient {root_a} ≠ 1"));
    }
    let sums: Vec<Q> = t.levels.iter().map(|l| l.iter().map(|n| n.a.clone()).sum()).collect();
    let below_root = &sums[..h];
    if below_root.windows(2).any(|w| w[0] != w[1]) {
        out.push(format!("level coefficient sums differ: {below_root:?}"));
    }
    if !t.root_exception && h > 0 && !sums[0].is_one() {
        out.push(format!("leaf coefficients sum to {}", sums[0]));
    }
    for j in (1..=h).rev() {
        for node in &t.levels[j] {
            let (s, e) = node.children.unwrap();
            let want = &node.a / qu(node.n.unwrap());
            if t.levels[j - 1][s..e].iter().any(|c| c.a != want) {
                out.push(format!("level {}: coefficient is not the ancestor-weight product", j - 1));
                break;
            }
        }
    }
    for j in 1..=h {
        for (i, node) in t.levels[j].iter().enumerate() {
            let (lo, hi) = t.leaf_range(j, i);
            let s: Q = t.levels[0][lo..hi].iter().map(|n| n.a.clone()).sum();
            let want = if j == h && t.root_exception {
                sums[0].clone()
            } else {
                node.a.clone()
            };
            if s != want {
                out.push(format!("x_{}^{j}: coefficient {} ≠ leaf mass {s}", i + 1, node.a));
            }
        }
    }
    out
}

/// Restriction of an averaging tree to top-level nodes I at level m, rebuilt as an averaging
/// tree of height m whose root may carry L = N^m_{min I} Σ_{i∈I} a_i^m children.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Restriction {
    pub tree: AveragingTree,
    /// L
    pub root_children: usize,
    /// for each output level and node, the original leaf positions it carries
    pub leaf_sets: Vec<Vec<Vec<usize>>>,
}

/// `indices` are 1-based positions on level m.
pub fn restrict_average(tree: &AveragingTree, m: usize, indices: &[usize]) -> Result<Restriction> {
    let h = tree.height();
    if m == 0 || m > h {
        return Err(Error::PreconditionFailed(format!("output level {m} outside 1..={h}")));
    }
    let mut idx: Vec<usize> = indices.to_vec();
    idx.sort_unstable();
    idx.dedup();
    if idx.is_empty() || idx[0] == 0 || *idx.last().unwrap() > tree.levels[m].len() {
        return Err(Error::PreconditionFailed("I must be a nonempty set of level-m positions".into()));
    }
    let first = &tree.levels[m][idx[0] - 1];
    let n_first = first.n.unwrap();
    let mass: Q = idx.iter().map(|i| tree.levels[m][i - 1].a.clone()).sum();
    let l_q = qu(n_first) * &mass;
    if !l_q.is_integer() {
        return Err(Error::PreconditionFailed(format!(
            "N^{m}_{{min I}} · Σ a_i^{m} = {l_q} is not an integer"
        )));
    }
    for (j, level) in tree.levels.iter().enumerate().skip(1) {
        if let Some(n) = level.iter().find_map(|n| n.n.filter(|v| !v.is_power_of_two())) {
            return Err(Error::NonDyadicCoefficient(format!("weight {n} on level {j}")));
        }
    }
    let big_l: usize = l_q.to_integer().try_into().map_err(|_| Error::PreconditionFailed("L too large".into()))?;
    let eps_i = first.eps.clone().unwrap();
    let owner = tree.leaf_owner();
    let leaves = &tree.levels[0];

    let mut a_set: Vec<usize> = Vec::new();
    for i in &idx {
        let (lo, hi) = tree.leaf_range(m, i - 1);
        a_set.extend(lo..hi);
    }

    struct YNode {
        set: Vec<usize>,
        c: Q,
        w: u64,
        children: Option<(usize, usize)>,
    }
    let min_weight = |l: usize, set: &[usize]| -> Option<u64> {
        let mut best: Option<u64> = None;
        let mut k = 0;
        while k < set.len() {
            let node = owner[l][set[k]];
            let (lo, hi) = tree.leaf_range(l, node);
            let inside = set[k..].iter().take_while(|p| **p < hi).count();
            if set[k] == lo && inside == hi - lo {
                let n = tree.levels[l][node].n.unwrap();
                best = Some(best.map_or(n, |b| b.min(n)));
            }
            k += inside.max(1);
        }
        best
    };

    let mut ylevels: Vec<Vec<YNode>> = (0..=m).map(|_| Vec::new()).collect();
    ylevels[m].push(YNode {
        set: a_set,
        c: Q::one(),
        w: n_first,
        children: None,
    });
    for l in (1..=m).rev() {
        let mut next: Vec<YNode> = Vec::new();
        for k in 0..ylevels[l].len() {
            let (pieces, piece_mass) = {
                let y = &ylevels[l][k];
                let count = if l == m { big_l } else { y.w as usize };
                (count, &y.c / qu(y.w))
            };
            let start = next.len();
            let set = std::mem::take(&mut ylevels[l][k].set);
            let mut cur: Vec<usize> = Vec::new();
            let mut acc = Q::zero();
            for p in set.iter().copied() {
                cur.push(p);
                acc += &leaves[p].a;
                if acc == piece_mass {
                    let w = if l > 1 {
                        min_weight(l - 1, &cur).ok_or_else(|| {
                            Error::PreconditionFailed(format!("piece on level {} contains no whole node", l - 1))
                        })?
                    } else {
                        1
                    };
                    next.push(YNode {
                        set: std::mem::take(&mut cur),
                        c: piece_mass.clone(),
                        w,
                        children: None,
                    });
                    acc = Q::zero();
                } else if acc > piece_mass {
                    return Err(Error::NonDyadicCoefficient(format!(
                        "leaf masses on level {l} cannot be split into pieces of mass {piece_mass}"
                    )));
                }
            }
            if !cur.is_empty() || next.len() - start != pieces {
                return Err(Error::PreconditionFailed(format!(
                    "level {l}: got {} pieces of mass {piece_mass}, expected {pieces}",
                    next.len() - start
                )));
            }
            ylevels[l][k].set = set;
            ylevels[l][k].children = Some((start, next.len()));
        }
        ylevels[l - 1] = next;
    }

    let vec_of = |set: &[usize], scale: &Q| -> BlockVector {
        let mut v = BlockVector::new();
        for &p in set {
            v.add_scaled(&leaves[p].vector, &(&leaves[p].a / scale));
        }
        v
    };
    let mut levels: Vec<Vec<AvgNode>> = Vec::with_capacity(m + 1);
    for (l, ylevel) in ylevels.iter().enumerate() {
        let mut nodes = Vec::with_capacity(ylevel.len());
        for (k, y) in ylevel.iter().enumerate() {
            let eps = if l == 0 {
                None
            } else if k == 0 {
                Some(eps_i.clone())
            } else {
                let prev_last = *ylevel[k - 1].set.last().unwrap();
                let i_k = owner[l][prev_last];
                Some(tree.levels[l][i_k + 1].eps.clone().unwrap())
            };
            nodes.push(AvgNode {
                vector: vec_of(&y.set, &y.c),
                n: if l == 0 { None } else { Some(y.w) },
                eps,
                a: y.c.clone(),
                children: y.children,
            });
        }
        levels.push(nodes);
    }
    let leaf_sets = ylevels
        .into_iter()
        .map(|lv| lv.into_iter().map(|y| y.set).collect())
        .collect();
    Ok(Restriction {
        tree: AveragingTree {
            levels,
            root_exception: true,
        },
        root_children: big_l,
        leaf_sets,
    })
}

/// Checks (P0)–(P3), the tree conditions and identities of the restricted tree.
pub fn check_restriction(tree: &AveragingTree, m: usize, indices: &[usize], r: &Restriction) -> Vec<String> {
    let mut out = Vec::new();
    let y = &r.tree;
    if y.height() != m {
        return vec![format!("restricted tree has height {} not {m}", y.height())];
    }
    let owner = tree.leaf_owner();
    let leaves = &tree.levels[0];
    let mut idx: Vec<usize> = indices.to_vec();
    idx.sort_unstable();
    idx.dedup();
    // (P0)
    for l in 0..=m {
        for (k, node) in y.levels[l].iter().enumerate() {
            let set = &r.leaf_sets[l][k];
            let mut v = BlockVector::new();
            let mut c = Q::zero();
            for &p in set {
                v.add_scaled(&leaves[p].vector, &leaves[p].a);
                c += &leaves[p].a;
            }
            if node.vector.scale(&node.a) != v {
                out.push(format!("(P0) y_{}^{l}: c·y differs from Σ a_m^0 x_m^0", k + 1));
            }
            if l < m && node.a != c {
                out.push(format!("(P0) y_{}^{l}: c = {} but leaf mass {c}", k + 1, node.a));
            }
        }
    }
    // (P1), (P2): relation of every y-node to every x-node on every level
    for l in 0..=m {
        for (k, set) in r.leaf_sets[l].iter().enumerate() {
            for j in 0..tree.levels.len() {
                let mut hits: BTreeMap<usize, usize> = BTreeMap::new();
                for &p in set {
                    *hits.entry(owner[j][p]).or_default() += 1;
                }
                let full = |i: usize, cnt: usize| {
                    let (lo, hi) = tree.leaf_range(j, i);
                    cnt == hi - lo
                };
                let same_level = j == l;
                let ok = if same_level {
                    hits.iter().all(|(i, c)| full(*i, *c))
                } else {
                    hits.len() == 1 || hits.iter().all(|(i, c)| full(*i, *c))
                };
                if !ok {
                    let tag = if same_level { "(P1)" } else { "(P2)" };
                    out.push(format!("{tag} y_{}^{l} meets level-{j} nodes without nesting", k + 1));
                }
            }
        }
    }
    // (P3)
    for l in 1..=m {
        for (k, set) in r.leaf_sets[l].iter().enumerate() {
            let mut hits: BTreeMap<usize, usize> = BTreeMap::new();
            for &p in set {
                *hits.entry(owner[l][p]).or_default() += 1;
            }
            let want = hits.keys().map(|i| tree.levels[l][*i].n.unwrap()).min();
            if want != y.levels[l][k].n {
                out.push(format!("(P3) W_{}^{l} = {:?}, expected {:?}", k + 1, y.levels[l][k].n, want));
            }
        }
    }
    let root_set = &r.leaf_sets[m][0];
    let expect_root: Vec<usize> = idx
        .iter()
        .flat_map(|i| {
            let (lo, hi) = tree.leaf_range(m, i - 1);
            lo..hi
        })
        .collect();
    if *root_set != expect_root {
        out.push("root does not carry exactly the leaves under I".into());
    }
    let kids = y.root().children.map(|(s, e)| e - s);
    if kids != Some(r.root_children) {
        out.push(format!("root has {kids:?} children, expected L = {}", r.root_children));
    }
    for v in check_averaging_tree(y, &TreeRules { power_of_two: true, error_scale: None }) {
        out.push(format!("tree: {v}"));
    }
    out
}

/// Upper bound for ‖y_k^0‖ of every leaf bundle: Σ (a_m/c)‖x_m^0‖, replaced by the exact
/// norm when that sum exceeds 1 and the support fits the cap.
pub fn bundle_norm_bounds(r: &Restriction, tree: &AveragingTree, spec: &SpaceSpec, cfg: &NormConfig) -> Result<Vec<Enclosure>> {
    let cap = cfg.effective_cap(spec);
    let mut leaf_norm: BTreeMap<usize, Enclosure> = BTreeMap::new();
    let mut out = Vec::new();
    for (k, node) in r.tree.levels[0].iter().enumerate() {
        let mut s = Enclosure::zero();
        for &p in &r.leaf_sets[0][k] {
            let leaf = &tree.levels[0][p];
            let nv = match leaf_norm.get(&p) {
                Some(v) => v.clone(),
                None => {
                    let v = if leaf.vector.len() == 1 {
                        Enclosure::Exact(leaf.vector.linf())
                    } else {
                        norm_with(&leaf.vector, spec, cfg)?
                    };
                    leaf_norm.insert(p, v.clone());
                    v
                }
            };
            s = s.add(&nv.scale(&(&leaf.a / &node.a)));
        }
        if !s.certainly_le(&Enclosure::one()) && node.vector.len() <= cap {
            s = norm_with(&node.vector, spec, cfg)?;
        }
        out.push(s);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pick {
    Take,
    Descend,
    Skip,
}

/// Σ_{y∈F} θ^{M-l} e*_{minsupp y} for an antichain F of tree nodes, written as a tree-analysis
/// that mirrors the averaging tree with every internal weight index equal to 1.
pub fn antichain_functional(t: &AveragingTree, pick: &mut dyn FnMut(usize, usize) -> Pick) -> Option<NormingTree> {
    fn rec(t: &AveragingTree, l: usize, k: usize, pick: &mut dyn FnMut(usize, usize) -> Pick, top: bool) -> Option<NormingTree> {
        let node = &t.levels[l][k];
        let choice = if top { Pick::Descend } else { pick(l, k) };
        match choice {
            Pick::Skip => None,
            Pick::Take => Some(NormingTree::leaf(node.vector.minsupp().unwrap(), 1)),
            Pick::Descend if l == 0 => Some(NormingTree::leaf(node.vector.minsupp().unwrap(), 1)),
            Pick::Descend => {
                let (s, e) = node.children.unwrap();
                let kids: Vec<NormingTree> = (s..e).filter_map(|c| rec(t, l - 1, c, pick, false)).collect();
                if kids.is_empty() {
                    None
                } else {
                    Some(NormingTree::node(1, kids))
                }
            }
        }
    }
    rec(t, t.height(), 0, pick, true)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecialLevel {
    pub j: u32,
    pub sup: Enclosure,
    pub target: Enclosure,
    pub within: bool,
    pub witness: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecialReport {
    #[serde(with = "qstr")]
    pub d: Q,
    pub levels: Vec<SpecialLevel>,
    /// smallest D for which every level would pass
    pub empirical_d: f64,
    pub pass: bool,
}

/// For each j ≤ M, sup over S_j-allowable families of Σ‖E_i x‖ against θ^{M-j}.
pub fn check_special_average(cert: &AverageCert, spec: &SpaceSpec, d: &Q, cfg: &NormConfig) -> Result<SpecialReport> {
    let x = cert.vector();
    let norms = subset_norms(&x, spec, cfg)?;
    let keys = x.support_vec();
    let theta = spec.theta_sup(cfg.prec);
    let mut levels = Vec::new();
    let mut emp = 1f64;
    for j in 0..=cert.m_level {
        let (sup, witness) = max_split_sum(&keys, &norms, &FamilySpec::S(j), false);
        let mut target = Enclosure::one();
        for _ in j..cert.m_level {
            target = target.mul(&theta);
        }
        let lower = target.scale(&(Q::one() / d));
        let upper = target.scale(d);
        let within = !d.is_zero() && lower.possibly_le(&sup) && sup.possibly_le(&upper);
        let r = sup.to_f64() / target.to_f64();
        emp = emp.max(r).max(1.0 / r);
        levels.push(SpecialLevel {
            j,
            sup,
            target,
            within,
            witness,
        });
    }
    Ok(SpecialReport {
        d: d.clone(),
        pass: levels.iter().all(|l| l.within),
        levels,
        empirical_d: emp,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsirelsonAverageReport {
    pub pass: bool,
    pub samples: usize,
    pub worst_ratio: f64,
    /// (G, coefficients) of the worst sample
    pub witness: Option<(Vec<usize>, Vec<String>)>,
}

/// θ used for the comparison space T[S_1, θ]: exact when available, else rounded up.
fn comparison_theta(spec: &SpaceSpec, prec: u32) -> Q {
    match spec.theta_sup(prec) {
        Enclosure::Exact(t) => t,
        e => ceil_dyadic(e.hi(), prec).min(Q::one()),
    }
}

/// ‖Σ_{i∈G} a_i x_i‖ ≥ ¼ ‖Σ_{i∈G} a_i ‖x_i‖ e_{minsupp x_i}‖_{T[S_1,θ]} on every sample;
/// G holds 1-based positions into `blocks`.
pub fn check_tsirelson_average(
    blocks: &[BlockVector],
    spec: &SpaceSpec,
    m_level: u32,
    samples: &[(Vec<usize>, Vec<Q>)],
    cfg: &NormConfig,
) -> Result<TsirelsonAverageReport> {
    let t1 = SpaceSpec::tsirelson(comparison_theta(spec, cfg.prec));
    let mut block_norms: BTreeMap<usize, Enclosure> = BTreeMap::new();
    let mut worst = f64::INFINITY;
    let mut witness = None;
    let mut pass = true;
    for (g, a) in samples {
        if g.len() != a.len() || g.iter().any(|&i| i == 0 || i > blocks.len()) {
            return Err(Error::PreconditionFailed("sample positions and coefficients disagree".into()));
        }
        let gs: Vec<u64> = g.iter().map(|&i| i as u64).collect();
        if gs.windows(2).any(|w| w[0] >= w[1]) || !member_s(&gs, m_level) {
            return Err(Error::PreconditionFailed(format!("G = {gs:?} is not an increasing S_{m_level} set")));
        }
        let mut lhs_v = BlockVector::new();
        let mut rhs_v = BlockVector::new();
        for (&i, ai) in g.iter().zip(a) {
            let b = &blocks[i - 1];
            lhs_v.add_scaled(b, ai);
            let nb = match block_norms.get(&i) {
                Some(v) => v.clone(),
                None => {
                    let v = norm_with(b, spec, cfg)?;
                    block_norms.insert(i, v.clone());
                    v
                }
            };
            // the upper end of ‖x_i‖ can only enlarge the right side
            rhs_v.set(b.minsupp().unwrap(), ai * nb.hi());
        }
        let lhs = norm_with(&lhs_v, spec, cfg)?;
        let t_norm = norm_with(&rhs_v, &t1, cfg)?;
        let ok = t_norm.scale(&Q::new(1.into(), 4.into())).possibly_le(&lhs);
        let denom = t_norm.to_f64();
        let ratio = if denom == 0.0 { f64::INFINITY } else { lhs.to_f64() / denom };
        if ratio < worst || (!ok && pass) {
            worst = worst.min(ratio);
            witness = Some((g.clone(), a.iter().map(crate::rational::fmt_q).collect()));
        }
        pass &= ok;
    }
    Ok(TsirelsonAverageReport {
        pass,
        samples: samples.len(),
        worst_ratio: worst,
        witness,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RisStep {
    pub k: usize,
    pub l_next: u64,
    pub lhs: Option<Enclosure>,
    #[serde(with = "qstr")]
    pub rhs: Q,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RisReport {
    pub ok: bool,
    pub steps: Vec<RisStep>,
}

/// θ_{l_{k+1}} ‖x_k‖_{ℓ1} ≤ ε / 2^{k+1} with l_k = max{l : 4l ≤ n_k}.
pub fn check_ris(seq: &[AverageCert], n: &[u64], eps: &Q, spec: &SpaceSpec) -> Result<RisReport> {
    if seq.len() != n.len() {
        return Err(Error::PreconditionFailed("need one n_k per average".into()));
    }
    let vs: Vec<BlockVector> = seq.iter().map(|c| c.vector()).collect();
    if vs.windows(2).any(|w| !w[0].precedes(&w[1])) {
        return Err(Error::MalformedDecomposition("averages are not successive".into()));
    }
    let mut steps = Vec::new();
    for k in 1..seq.len() {
        let l_next = n[k] / 4;
        let rhs = eps / pow2(k + 1);
        let lhs = if l_next == 0 {
            None
        } else {
            spec.theta(l_next as u32, DEFAULT_PREC)
                .map(|t| t.scale(&vs[k - 1].l1()))
        };
        let ok = lhs.as_ref().is_some_and(|v| v.certainly_le(&Enclosure::Exact(rhs.clone())));
        steps.push(RisStep { k, l_next, lhs, rhs, ok });
    }
    Ok(RisReport {
        ok: steps.iter().all(|s| s.ok),
        steps,
    })
}
