use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;

use crate::averages::{check_average, check_ris, check_special_average, AverageCert};
use crate::enclosure::Enclosure;
use crate::error::{Error, Result};
use crate::norm::{norm_with, subset_norms, NormConfig};
use crate::rational::{fmt_q, qi, Q};
use crate::schreier::{member_s, FamilySpec, FiniteSet};
use crate::space::SpaceSpec;
use crate::tree::{evaluate_unchecked, tag_of, validate_tree, NormingTree};
use crate::vector::BlockVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub lemma: String,
    pub params: BTreeMap<String, String>,
    pub instances: usize,
    pub worst_slack: Option<Enclosure>,
    pub pass: bool,
    /// families or instances were sampled rather than enumerated
    #[serde(default)]
    pub sampled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub stats: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerifyReport {
    pub fn new(lemma: &str) -> Self {
        VerifyReport {
            lemma: lemma.to_string(),
            params: BTreeMap::new(),
            instances: 0,
            worst_slack: None,
            pass: true,
            sampled: false,
            witness: None,
            stats: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    /// Records one instance with slack RHS − LHS; the witness is kept for the worst one.
    pub fn record(&mut self, slack: Enclosure, witness: impl FnOnce() -> Value) {
        self.instances += 1;
        let worse = match &self.worst_slack {
            None => true,
            Some(w) => slack.lo() < w.lo(),
        };
        if *slack.lo() < Q::zero() {
            self.pass = false;
        }
        if worse {
            let w = witness();
            self.witness = (!w.is_null()).then_some(w);
            self.worst_slack = Some(slack);
        }
    }

    pub fn stat_min(&mut self, key: &str, v: f64) {
        let e = self.stats.entry(key.to_string()).or_insert(v);
        *e = e.min(v);
    }

    pub fn stat_max(&mut self, key: &str, v: f64) {
        let e = self.stats.entry(key.to_string()).or_insert(v);
        *e = e.max(v);
    }

    pub fn fail(&mut self, note: String) {
        self.pass = false;
        self.notes.push(note);
    }

    /// Folds another report on the same lemma into this one.
    pub fn absorb(&mut self, other: VerifyReport) {
        self.instances += other.instances;
        self.pass &= other.pass;
        self.sampled |= other.sampled;
        if let Some(s) = other.worst_slack {
            let worse = self.worst_slack.as_ref().map_or(true, |w| s.lo() < w.lo());
            if worse {
                self.worst_slack = Some(s);
                self.witness = other.witness;
            }
        }
        for (k, v) in other.stats {
            let e = self.stats.entry(k.clone()).or_insert(v);
            if k.starts_with("min") {
                *e = e.min(v);
            } else {
                *e = e.max(v);
            }
        }
        self.notes.extend(other.notes);
    }
}

fn vec_json(x: &BlockVector) -> Value {
    serde_json::to_value(x).expect("vector serializes")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneOutcome {
    pub tree: Option<NormingTree>,
    pub loss: Enclosure,
    pub within: bool,
}

fn prune_rec(f: &NormingTree, ord: u32, m: u32) -> Option<NormingTree> {
    match f {
        NormingTree::Leaf { .. } => (ord >= m).then(|| f.clone()),
        NormingTree::Node {
            weight_index,
            children,
        } => {
            let kept: Vec<NormingTree> = children
                .iter()
                .filter_map(|c| prune_rec(c, ord + weight_index, m))
                .collect();
            (!kept.is_empty()).then(|| NormingTree::node(*weight_index, kept))
        }
    }
}

/// Drops every terminal node of order < M (and internal nodes left empty);
/// the loss f(x) − f'(x) is compared with 2ε.
pub fn prune_tree(f: &NormingTree, cert: &AverageCert, m_level: u32, spec: &SpaceSpec, prec: u32) -> Result<PruneOutcome> {
    let v = validate_tree(f, spec);
    if !v.is_empty() {
        return Err(Error::InvalidTree(v.join("; ")));
    }
    let chk = check_average(cert)?;
    if !chk.ok {
        return Err(Error::PreconditionFailed(format!("not an average: {}", chk.failures.join("; "))));
    }
    let x = cert.vector();
    let pruned = prune_rec(f, 0, m_level);
    let before = evaluate_unchecked(f, &x, spec, prec);
    let after = pruned
        .as_ref()
        .map_or_else(Enclosure::zero, |g| evaluate_unchecked(g, &x, spec, prec));
    let loss = before.sub(&after);
    let within = loss.possibly_le(&Enclosure::Exact(qi(2) * &cert.eps));
    Ok(PruneOutcome {
        tree: pruned,
        loss,
        within,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regrouped {
    pub tree: NormingTree,
    /// groups of original child positions (children sorted by minsupp)
    pub groups: Vec<Vec<usize>>,
    pub d: u32,
    pub r: u32,
}

fn greedy_groups(minima: &[u64], piece_level: u32) -> Vec<Vec<usize>> {
    let mut groups = Vec::new();
    let mut i = 0;
    while i < minima.len() {
        let mut j = i + 1;
        while j < minima.len() && member_s(&minima[i..=j], piece_level) {
            j += 1;
        }
        groups.push((i..j).collect());
        i = j;
    }
    groups
}

fn exhaustive_groups(minima: &[u64], piece_level: u32, outer: u32) -> Option<Vec<Vec<usize>>> {
    fn rec(minima: &[u64], start: usize, piece: u32, outer: u32, acc: &mut Vec<Vec<usize>>) -> bool {
        if start == minima.len() {
            let heads: Vec<u64> = acc.iter().map(|g| minima[g[0]]).collect();
            return member_s(&heads, outer);
        }
        for end in (start + 1..=minima.len()).rev() {
            if member_s(&minima[start..end], piece) {
                acc.push((start..end).collect());
                if rec(minima, end, piece, outer, acc) {
                    return true;
                }
                acc.pop();
            }
        }
        false
    }
    let mut acc = Vec::new();
    rec(minima, 0, piece_level, outer, &mut acc).then_some(acc)
}

/// Splits the children of the node at `path` into groups: the groups form an S_{k−ord}-allowable
/// family whose members are S_{r−(k−ord)}-allowable. For 0 < k−ord < r the node gets weight
/// index k−ord over new group nodes of weight index r−(k−ord); otherwise the shape is kept.
pub fn regroup_node(f: &NormingTree, path: &[usize], k: u32) -> Result<Regrouped> {
    let ord = f
        .ord_at(path)
        .ok_or_else(|| Error::PreconditionFailed(format!("no node at {path:?}")))?;
    let Some(NormingTree::Node {
        weight_index: r,
        children,
    }) = f.get(path)
    else {
        return Err(Error::PreconditionFailed(format!("node at {path:?} is terminal")));
    };
    let r = *r;
    if k < ord || k > ord + r {
        return Err(Error::PreconditionFailed(format!("k = {k} outside [{ord}, {}]", ord + r)));
    }
    let d = k - ord;
    let mut order: Vec<usize> = (0..children.len()).collect();
    order.sort_by_key(|&i| children[i].minsupp());
    let minima: Vec<u64> = order.iter().map(|&i| children[i].minsupp().unwrap()).collect();
    let groups_local = if d == 0 {
        vec![(0..minima.len()).collect()]
    } else if d == r {
        (0..minima.len()).map(|i| vec![i]).collect()
    } else {
        let g = greedy_groups(&minima, r - d);
        let heads: Vec<u64> = g.iter().map(|g| minima[g[0]]).collect();
        if member_s(&heads, d) {
            g
        } else {
            exhaustive_groups(&minima, r - d, d).ok_or_else(|| {
                Error::PreconditionFailed("children minima admit no regrouping".into())
            })?
        }
    };
    let groups: Vec<Vec<usize>> = groups_local
        .iter()
        .map(|g| g.iter().map(|&p| order[p]).collect())
        .collect();
    let mut out = f.clone();
    if d > 0 && d < r {
        let node = out.get_mut(path).expect("path checked");
        let new_children = groups
            .iter()
            .map(|g| NormingTree::node(r - d, g.iter().map(|&c| children[c].clone()).collect()))
            .collect();
        *node = NormingTree::node(d, new_children);
    }
    Ok(Regrouped {
        tree: out,
        groups,
        d,
        r,
    })
}

/// t(α)·f_α(x) and θ^k Σ_t g_t(x) with g_t = θ_{r−d} Σ_{s∈F_t} f_s (θ_0 = 1).
pub fn regroup_inequality(
    f: &NormingTree,
    path: &[usize],
    k: u32,
    rg: &Regrouped,
    x: &BlockVector,
    spec: &SpaceSpec,
    prec: u32,
) -> Result<(Enclosure, Enclosure)> {
    let node = f.get(path).ok_or_else(|| Error::PreconditionFailed("bad path".into()))?;
    let NormingTree::Node { children, .. } = node else {
        return Err(Error::PreconditionFailed("terminal node".into()));
    };
    let mut weights = Vec::new();
    let mut cur = f;
    for &i in path {
        if let NormingTree::Node {
            weight_index,
            children,
        } = cur
        {
            weights.push(*weight_index);
            cur = &children[i];
        }
    }
    let tag = tag_of(&weights, spec, prec).ok_or_else(|| Error::InvalidTree("undefined weight".into()))?;
    let lhs = tag.mul(&evaluate_unchecked(node, x, spec, prec));
    let inner = if rg.r == rg.d {
        Enclosure::one()
    } else {
        spec.theta(rg.r - rg.d, prec)
            .ok_or_else(|| Error::InvalidTree(format!("θ_{} undefined", rg.r - rg.d)))?
    };
    let mut sum = Enclosure::zero();
    for g in &rg.groups {
        let mut s = Enclosure::zero();
        for &c in g {
            s = s.add(&evaluate_unchecked(&children[c], x, spec, prec));
        }
        sum = sum.add(&inner.mul(&s));
    }
    let theta = spec.theta_sup(prec);
    let mut tk = Enclosure::one();
    for _ in 0..k {
        tk = tk.mul(&theta);
    }
    Ok((lhs, tk.mul(&sum)))
}

fn bits(mask: usize) -> impl Iterator<Item = usize> {
    (0..usize::BITS as usize).filter(move |i| mask >> i & 1 == 1)
}

/// Σ_l ‖E_l x‖ ≤ θ_1^{-1} θ^{M−j−1} Σ_l Σ_i a_i ‖E_l x_i‖ + 4ε/θ_M over every S_j-allowable
/// family inside `window` (support points of x), with ε the exact S_{M−1} mass of the average.
pub fn verify_theta1(cert: &AverageCert, j: u32, spec: &SpaceSpec, window: &[u64], cfg: &NormConfig) -> Result<VerifyReport> {
    let m = cert.m_level;
    if j >= m {
        return Err(Error::PreconditionFailed(format!("need j < M, got j = {j}, M = {m}")));
    }
    let chk = check_average(cert)?;
    if !chk.ok {
        return Err(Error::PreconditionFailed(format!("not an average: {}", chk.failures.join("; "))));
    }
    let eps = chk.mass.clone().expect("M ≥ 1");
    let prec = cfg.prec;
    let x = cert.vector();
    let win: Vec<u64> = {
        let mut w: Vec<u64> = window.iter().copied().filter(|i| !x.get(*i).is_zero()).collect();
        w.sort_unstable();
        w.dedup();
        w
    };
    let cap = cfg.effective_cap(spec).min(12);
    if win.len() > cap {
        return Err(Error::CapExceeded { size: win.len(), cap });
    }
    let theta = spec.theta_sup(prec);
    let t1 = spec.theta(1, prec).ok_or_else(|| Error::InvalidSpec("θ_1 undefined".into()))?;
    let tm = spec.theta(m, prec).ok_or_else(|| Error::InvalidSpec(format!("θ_{m} undefined")))?;
    let mut c = Enclosure::one().div(&t1);
    for _ in 0..(m - j - 1) {
        c = c.mul(&theta);
    }
    let tail = eps.scale(&qi(4)).div(&tm);

    let xw = x.restrict_to(&win);
    let a_norms = subset_norms(&xw, spec, cfg)?;
    let size = 1usize << win.len();
    let mut b_norms = vec![Enclosure::zero(); size];
    for (xi, ai) in cert.blocks.iter().zip(&cert.coeffs) {
        let local: Vec<usize> = (0..win.len()).filter(|&p| !xi.get(win[p]).is_zero()).collect();
        if local.is_empty() {
            continue;
        }
        let piece = xi.restrict_to(&local.iter().map(|&p| win[p]).collect::<Vec<_>>());
        let sub = subset_norms(&piece, spec, cfg)?;
        for (mask, slot) in b_norms.iter_mut().enumerate() {
            let mut lm = 0usize;
            for (t, &p) in local.iter().enumerate() {
                if mask >> p & 1 == 1 {
                    lm |= 1 << t;
                }
            }
            if lm != 0 {
                *slot = slot.add(&sub[lm].scale(ai));
            }
        }
    }
    // per-set excess A(E) − c·B(E); the worst family maximizes the summed excess
    let excess: Vec<Enclosure> = (0..size).map(|e| a_norms[e].sub(&c.mul(&b_norms[e]))).collect();
    let fam = FamilySpec::S(j);
    let mut report = VerifyReport::new("theta1")
        .param("M", m)
        .param("j", j)
        .param("window", format!("{win:?}"))
        .param("eps", eps.to_f64());
    let mut families = 0usize;
    let mut worst = Enclosure::Exact(Q::from_integer((-1000000).into()));
    let mut worst_blocks: Vec<usize> = Vec::new();
    let mut blocks: Vec<usize> = Vec::new();
    let mut minima: Vec<u64> = Vec::new();
    visit(&win, &fam, (size - 1) as u32, Enclosure::zero(), &excess, &mut blocks, &mut minima, &mut |acc, bl| {
        families += 1;
        if acc.cmp_lo(&worst).is_gt() || families == 1 {
            worst = acc.clone();
            worst_blocks = bl.to_vec();
        }
    });
    let slack = tail.sub(&worst);
    let fam_sets: Vec<Vec<u64>> = worst_blocks.iter().map(|b| bits(*b).map(|p| win[p]).collect()).collect();
    report.record(slack, || serde_json::json!({ "family": fam_sets }));
    report.instances = families;
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn visit(
    keys: &[u64],
    fam: &FamilySpec,
    rem: u32,
    acc: Enclosure,
    w: &[Enclosure],
    blocks: &mut Vec<usize>,
    minima: &mut Vec<u64>,
    f: &mut dyn FnMut(&Enclosure, &[usize]),
) {
    if rem == 0 {
        return;
    }
    let low = rem & rem.wrapping_neg();
    let rest = rem ^ low;
    visit(keys, fam, rest, acc.clone(), w, blocks, minima, f);
    minima.push(keys[low.trailing_zeros() as usize]);
    if crate::schreier::member(&FiniteSet::new(minima.clone()).expect("increasing"), fam) {
        let mut sub = rest;
        loop {
            let block = (low | sub) as usize;
            blocks.push(block);
            let val = acc.add(&w[block]);
            f(&val, blocks);
            visit(keys, fam, rem ^ block as u32, val, w, blocks, minima, f);
            blocks.pop();
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    minima.pop();
}

/// ‖x‖ ≤ θ_1^{-1}θ^{M−1} + 4ε/θ_M for averages small enough to normalize exactly.
pub fn theta1_corollary(cert: &AverageCert, spec: &SpaceSpec, cfg: &NormConfig) -> Result<Enclosure> {
    let chk = check_average(cert)?;
    let eps = chk.mass.clone().unwrap_or_else(Enclosure::zero);
    let m = cert.m_level;
    let prec = cfg.prec;
    let t1 = spec.theta(1, prec).ok_or_else(|| Error::InvalidSpec("θ_1 undefined".into()))?;
    let tm = spec.theta(m.max(1), prec).ok_or_else(|| Error::InvalidSpec("θ_M undefined".into()))?;
    let theta = spec.theta_sup(prec);
    let mut bound = Enclosure::one().div(&t1);
    for _ in 0..m.saturating_sub(1) {
        bound = bound.mul(&theta);
    }
    let bound = bound.add(&eps.scale(&qi(4)).div(&tm));
    let x = cert.vector();
    Ok(bound.sub(&norm_with(&x, spec, cfg)?))
}

/// ‖z‖ ≤ 2 f(z) for the best tree-analysis of height ≤ M in T[S_1, θ].
pub fn verify_height_fact(z: &BlockVector, m_level: u32, theta: &Q, cfg: &NormConfig) -> Result<VerifyReport> {
    let s = z.support_vec();
    if !member_s(&s, m_level) {
        return Err(Error::PreconditionFailed(format!("support {s:?} not in S_{m_level}")));
    }
    if z.iter().any(|(_, c)| *c < Q::zero() || *c > Q::one()) {
        return Err(Error::PreconditionFailed("coefficients must lie in [0,1]".into()));
    }
    let t = SpaceSpec::tsirelson(theta.clone());
    let full = norm_with(z, &t, cfg)?;
    let capped_cfg = NormConfig {
        max_height: Some(m_level as usize),
        ..cfg.clone()
    };
    let capped = norm_with(z, &t, &capped_cfg)?;
    let mut r = VerifyReport::new("height")
        .param("M", m_level)
        .param("theta", fmt_q(theta));
    if z.is_zero() {
        r.record(Enclosure::zero(), || vec_json(z));
        return Ok(r);
    }
    let ratio = full.to_f64() / capped.to_f64();
    r.stat_min("min_ratio", ratio);
    r.stat_max("max_ratio", ratio);
    if full.certainly_lt(&capped) {
        r.fail("depth-capped value exceeds the full norm".into());
    }
    r.record(capped.scale(&qi(2)).sub(&full), || vec_json(z));
    Ok(r)
}

/// Norm ratios between a modified space and its S_n[A_2] variant lie in [1/3, 3].
pub fn verify_x2(spec: &SpaceSpec, samples: &[BlockVector], cfg: &NormConfig) -> Result<VerifyReport> {
    if !spec.modified {
        return Err(Error::PreconditionFailed("the comparison is stated for modified spaces".into()));
    }
    let variant = spec.clone().with_compose_a2();
    let mut r = VerifyReport::new("x2").param("samples", samples.len());
    for x in samples {
        let a = norm_with(x, spec, cfg)?;
        let b = norm_with(x, &variant, cfg)?;
        if x.is_zero() {
            r.record(Enclosure::zero(), || vec_json(x));
            continue;
        }
        let ratio = a.to_f64() / b.to_f64();
        r.stat_min("min_ratio", ratio);
        r.stat_max("max_ratio", ratio);
        let s1 = b.scale(&qi(3)).sub(&a);
        let s2 = a.scale(&qi(3)).sub(&b);
        let slack = if s1.cmp_lo(&s2).is_lt() { s1 } else { s2 };
        r.record(slack, || vec_json(x));
    }
    Ok(r)
}

#[derive(Clone, Debug)]
pub struct RisAverage {
    /// inner special averages, normalized inside the check
    pub inner: Vec<AverageCert>,
    pub n: Vec<u64>,
    pub ris_eps: Q,
    /// outer coefficients a_k and level M
    pub outer: Vec<Q>,
    pub m_level: u32,
    pub eps: Q,
}

/// ‖x‖/θ_M against (D²θ^{-2} + 5) with D measured on the inner averages.
pub fn verify_ave1(inst: &RisAverage, spec: &SpaceSpec, cfg: &NormConfig) -> Result<VerifyReport> {
    let prec = cfg.prec;
    let tm = spec
        .theta(inst.m_level, prec)
        .ok_or_else(|| Error::InvalidSpec(format!("θ_{} undefined", inst.m_level)))?;
    if !Enclosure::Exact(inst.eps.clone()).certainly_lt(&tm) {
        return Err(Error::PreconditionFailed("need ε < θ_M".into()));
    }
    // normalize each inner average exactly: x_k = v_k / ‖v_k‖ (rational specs only)
    let mut normalized = Vec::new();
    let mut d_emp = 1f64;
    for c in &inst.inner {
        let v = c.vector();
        let nv = norm_with(&v, spec, cfg)?;
        let Some(nq) = nv.as_exact().cloned() else {
            return Err(Error::PreconditionFailed("inner norms must be exact to normalize".into()));
        };
        let scaled = AverageCert {
            blocks: c.blocks.iter().map(|b| b.scale(&(Q::one() / &nq))).collect(),
            ..c.clone()
        };
        let sp = check_special_average(&scaled, spec, &qi(1), cfg)?;
        d_emp = d_emp.max(sp.empirical_d);
        normalized.push(scaled);
    }
    let ris = check_ris(&normalized, &inst.n, &inst.ris_eps, spec)?;
    if !ris.ok {
        return Err(Error::PreconditionFailed("inner averages do not form an RIS".into()));
    }
    let outer = AverageCert {
        blocks: normalized.iter().map(|c| c.vector()).collect(),
        coeffs: inst.outer.clone(),
        m_level: inst.m_level,
        eps: inst.eps.clone(),
    };
    let chk = check_average(&outer)?;
    if !chk.ok {
        return Err(Error::PreconditionFailed(format!("outer combination: {}", chk.failures.join("; "))));
    }
    let x = outer.vector();
    let nx = norm_with(&x, spec, cfg)?;
    let ratio = nx.div(&tm);
    let theta = spec.theta_sup(prec).to_f64();
    let bound = d_emp * d_emp / (theta * theta) + 5.0;
    let mut r = VerifyReport::new("ave1")
        .param("M", inst.m_level)
        .param("n", format!("{:?}", inst.n));
    r.stats.insert("empirical_D".into(), d_emp);
    r.stats.insert("empirical_D_prime".into(), ratio.to_f64());
    r.stats.insert("bound".into(), bound);
    let bound_q = Q::from_float(bound).unwrap_or_else(Q::zero);
    r.record(Enclosure::Exact(bound_q).sub(&ratio), || vec_json(&x));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn l(i: u64) -> NormingTree {
        NormingTree::leaf(i, 1)
    }

    #[test]
    fn prune_examples() {
        let spec = SpaceSpec::geometric(q(1, 2), true);
        let cert = AverageCert::uniform((4..=7).map(BlockVector::basis).collect(), 1, q(3, 10));
        let deep = NormingTree::node(1, vec![l(4), l(5)]);
        let out = prune_tree(&deep, &cert, 1, &spec, 64).unwrap();
        assert_eq!(out.tree, Some(deep.clone()));
        assert_eq!(out.loss, Enclosure::zero());
        let out = prune_tree(&l(5), &cert, 1, &spec, 64).unwrap();
        assert_eq!(out.tree, None);
        assert_eq!(out.loss, Enclosure::Exact(q(1, 4)));
        assert!(out.within);
    }

    #[test]
    fn regroup_examples() {
        let spec = SpaceSpec::geometric(q(1, 2), true);
        let f = NormingTree::node(2, vec![l(3), l(4), l(5), l(6)]);
        let x = BlockVector::flat(3, 6, qi(1));
        let same = regroup_node(&f, &[], 0).unwrap();
        assert_eq!(same.tree, f);
        assert_eq!(same.groups.len(), 1);
        let each = regroup_node(&f, &[], 2).unwrap();
        assert_eq!(each.groups.len(), 4);
        let mid = regroup_node(&f, &[], 1).unwrap();
        assert!(validate_tree(&mid.tree, &spec).is_empty());
        assert_eq!(mid.groups, vec![vec![0, 1, 2], vec![3]]);
        for k in 0..=2 {
            let rg = regroup_node(&f, &[], k).unwrap();
            let (lhs, rhs) = regroup_inequality(&f, &[], k, &rg, &x, &spec, 64).unwrap();
            assert!(lhs.possibly_le(&rhs));
        }
        assert!(matches!(regroup_node(&f, &[], 3), Err(Error::PreconditionFailed(_))));
    }

    #[test]
    fn height_fact_examples() {
        let cfg = NormConfig::default();
        let r = verify_height_fact(&BlockVector::basis(4), 1, &q(1, 2), &cfg).unwrap();
        assert!(r.pass);
        assert_eq!(r.stats["max_ratio"], 1.0);
        let r = verify_height_fact(&BlockVector::flat(3, 5, qi(1)), 1, &q(1, 2), &cfg).unwrap();
        assert!(r.pass);
        assert_eq!(r.worst_slack, Some(Enclosure::Exact(q(3, 2))));
        assert!(verify_height_fact(&BlockVector::flat(1, 2, qi(1)), 1, &q(1, 2), &cfg).is_err());
    }

    #[test]
    fn x2_and_theta1() {
        let spec = SpaceSpec::geometric(q(1, 2), true);
        let cfg = NormConfig::default();
        let r = verify_x2(&spec, &[BlockVector::basis(3), BlockVector::flat(3, 6, q(1, 2))], &cfg).unwrap();
        assert!(r.pass);
        let cert = AverageCert::uniform((4..=7).map(BlockVector::basis).collect(), 1, q(3, 10));
        let r = verify_theta1(&cert, 0, &spec, &[4, 5, 6, 7], &cfg).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.instances, 15);
    }

    #[test]
    fn ave1_small() {
        let spec = SpaceSpec::geometric(q(1, 2), true);
        let inner = vec![
            AverageCert::uniform(vec![BlockVector::basis(2)], 0, qi(1)),
            AverageCert::uniform(vec![BlockVector::basis(40)], 0, qi(1)),
        ];
        let inst = RisAverage {
            inner,
            n: vec![4, 16],
            ris_eps: q(1, 2),
            outer: vec![q(1, 2), q(1, 2)],
            m_level: 1,
            eps: q(1, 4),
        };
        // the outer S_0 mass is 1/2, so ε = 1/4 is rejected
        assert!(verify_ave1(&inst, &spec, &NormConfig::default()).is_err());
    }
}
