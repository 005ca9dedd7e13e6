use num_bigint::BigUint;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::enclosure::{exp2_enc, log2_enc, log2_uint, pow_q, Enclosure};
use crate::error::{Error, Result};
use crate::estimates::VerifyReport;
use crate::norm::{norm_with, NormConfig};
use crate::rational::{fmt_q, qi, qvec, Q};
use crate::schreier::{max_schreier_sum, member, member_s, FiniteSet};
use crate::space::{SpaceSpec, ThetaGen};
use crate::vector::BlockVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PSpaceParams {
    pub generator: String,
    pub horizon: u32,
    /// `None` means q = ∞ (the case p = 1)
    pub q: Option<Enclosure>,
    /// `None` when the weights do not describe a p-space
    pub p: Option<Enclosure>,
    /// q_n for n = 1..=horizon; undefined where θ_n = 1
    pub q_n: Vec<Option<Enclosure>>,
    pub c_n: Vec<Enclosure>,
    pub p_space: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn q_of(n: u32, theta: &Enclosure, prec: u32) -> Option<Enclosure> {
    if n < 2 || *theta.lo() >= Q::one() {
        return None;
    }
    let num = log2_uint(&BigUint::from(n), prec);
    let den = log2_enc(theta, prec).neg();
    Some(num.div(&den))
}

/// n^{1/q} for an enclosed q.
fn root_power(n: u32, q: &Enclosure, prec: u32) -> Enclosure {
    let l = log2_uint(&BigUint::from(n), prec);
    exp2_enc(&l.div(q), prec)
}

pub fn p_space_params(thetas: &ThetaGen, horizon: u32, prec: u32) -> Result<PSpaceParams> {
    thetas.validate()?;
    let horizon = thetas.horizon().map_or(horizon, |h| h.min(horizon));
    if horizon < 2 {
        return Err(Error::PreconditionFailed("horizon must be at least 2".into()));
    }
    let th: Vec<Enclosure> = (1..=horizon)
        .map(|n| thetas.theta(n, prec).expect("within horizon"))
        .collect();
    let q_n: Vec<Option<Enclosure>> = th.iter().zip(1..).map(|(t, n)| q_of(n, t, prec)).collect();
    let mut warnings = Vec::new();
    let (generator, q, p_space) = match thetas {
        ThetaGen::PowerLaw { c, q } => (format!("PowerLaw(c={}, q={})", fmt_q(c), fmt_q(q)), Some(Enclosure::Exact(q.clone())), *q > Q::one()),
        ThetaGen::LogReciprocal => ("LogReciprocal".to_string(), None, true),
        ThetaGen::Geometric(t) => {
            warnings.push("geometric weights: q_n → 0, not a p-space".into());
            (format!("Geometric({})", fmt_q(t)), None, false)
        }
        ThetaGen::Table(_) => {
            let mut best: Option<Enclosure> = None;
            for v in q_n.iter().flatten() {
                best = Some(match best {
                    None => v.clone(),
                    Some(b) => b.max(v),
                });
            }
            let half = horizon as usize / 2;
            let first = q_n[..half].iter().flatten().map(|e| e.to_f64()).fold(f64::MIN, f64::max);
            let second = q_n[half..].iter().flatten().map(|e| e.to_f64()).fold(f64::MIN, f64::max);
            if second > first * (1.0 + 1e-3) {
                warnings.push(format!("divergence: q_n still growing over the last half ({first:.4} → {second:.4})"));
            }
            let ok = best.as_ref().is_some_and(|b| *b.lo() > Q::one());
            ("Table".to_string(), best, ok)
        }
    };
    let p = match (&q, p_space) {
        (_, false) => None,
        (None, true) => Some(Enclosure::one()),
        (Some(q), true) => Some(q.div(&q.sub(&Enclosure::one()))),
    };
    let c_n = match (thetas, &q) {
        (ThetaGen::PowerLaw { c, .. }, _) => vec![Enclosure::Exact(c.clone()); horizon as usize],
        (_, Some(qv)) if p_space => th.iter().zip(1..).map(|(t, n)| t.mul(&root_power(n, qv, prec))).collect(),
        _ => th.clone(),
    };
    Ok(PSpaceParams {
        generator,
        horizon,
        q,
        p,
        q_n,
        c_n,
        p_space,
        warnings,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Class {
    Class1,
    Class2,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: Class,
    pub horizon: u32,
    pub first_quarter_mean: f64,
    pub last_quarter_mean: f64,
    pub tail_min: f64,
    pub tail_max: f64,
    pub factor: f64,
    pub heuristic: String,
}

pub const TREND_FACTOR: f64 = 1.25;

/// Trend test on c_1..c_H: decay of the quarter means gives Class2, a flat bounded-below tail Class1.
pub fn classify_values(c: &[f64], factor: f64) -> Classification {
    let h = c.len();
    let quarter = (h / 4).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let first = mean(&c[..quarter]);
    let last = mean(&c[h - quarter..]);
    let tail = &c[h / 2..];
    let tmin = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let tmax = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let class = if last < first / factor {
        Class::Class2
    } else if tmin >= 1e-3 && tmax / tmin <= 2.0 {
        Class::Class1
    } else {
        Class::Unknown
    };
    Classification {
        class,
        horizon: h as u32,
        first_quarter_mean: first,
        last_quarter_mean: last,
        tail_min: tmin,
        tail_max: tmax,
        factor,
        heuristic: "finite-horizon trend of c_n".into(),
    }
}

pub fn classify(params: &PSpaceParams) -> Classification {
    let c: Vec<f64> = params.c_n.iter().map(|e| e.to_f64()).collect();
    let mut out = classify_values(&c, TREND_FACTOR);
    if !params.p_space || !params.warnings.is_empty() {
        out.class = Class::Unknown;
    }
    out
}

fn lr_norm(a: &[Q], r: &Q, prec: u32) -> Enclosure {
    let mut s = Enclosure::zero();
    for x in a {
        if !x.is_zero() {
            s = s.add(&pow_q(&x.abs(), r, prec));
        }
    }
    match s.as_exact() {
        Some(z) if z.is_zero() => s,
        _ => crate::enclosure::pow_enc(&s, &r.recip(), prec),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrReport {
    pub ok: bool,
    pub patterns: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::rational::qvec_opt")]
    pub witness: Option<Vec<Q>>,
}

/// Checks C^{-1}‖a‖_r ≤ ‖Σ a_i x_i‖ ≤ C‖a‖_r on every ±1 pattern (m ≤ 10), the all-ones
/// pattern and the extra coefficient samples.
pub fn lr_average_check(blocks: &[BlockVector], r: &Q, c: &Q, spec: &SpaceSpec, extra: &[Vec<Q>], cfg: &NormConfig) -> Result<LrReport> {
    let m = blocks.len();
    if *r < Q::one() || *c < Q::one() {
        return Err(Error::PreconditionFailed("need r ≥ 1 and C ≥ 1".into()));
    }
    for w in blocks.windows(2) {
        if !w[0].precedes(&w[1]) {
            return Err(Error::PreconditionFailed("blocks must be successive".into()));
        }
    }
    for b in blocks {
        let nb = norm_with(b, spec, cfg)?;
        if !nb.contains(&Q::one()) && (nb.to_f64() - 1.0).abs() > 1e-9 {
            return Err(Error::PreconditionFailed("blocks must be normalized".into()));
        }
    }
    let mut patterns: Vec<Vec<Q>> = Vec::new();
    if m <= 10 {
        for s in 0u32..(1 << m) {
            patterns.push((0..m).map(|i| if s >> i & 1 == 1 { -Q::one() } else { Q::one() }).collect());
        }
    } else {
        patterns.push(vec![Q::one(); m]);
    }
    for e in extra {
        if e.len() != m {
            return Err(Error::PreconditionFailed("sample length differs from block count".into()));
        }
        patterns.push(e.clone());
    }
    let cq = Enclosure::Exact(c.clone());
    let mut rep = LrReport {
        ok: true,
        patterns: 0,
        min_ratio: f64::INFINITY,
        max_ratio: 0.0,
        witness: None,
    };
    for a in &patterns {
        let lr = lr_norm(a, r, cfg.prec);
        if lr.as_exact().is_some_and(|z| z.is_zero()) {
            continue;
        }
        let mut x = BlockVector::new();
        for (b, ai) in blocks.iter().zip(a) {
            x.add_scaled(b, ai);
        }
        let nx = norm_with(&x, spec, cfg)?;
        rep.patterns += 1;
        let ratio = nx.to_f64() / lr.to_f64();
        rep.min_ratio = rep.min_ratio.min(ratio);
        rep.max_ratio = rep.max_ratio.max(ratio);
        let upper = nx.certainly_le(&cq.mul(&lr)) || nx.overlaps(&cq.mul(&lr));
        let lower = lr.certainly_le(&cq.mul(&nx)) || lr.overlaps(&cq.mul(&nx));
        if !(upper && lower) && rep.ok {
            rep.ok = false;
            rep.witness = Some(a.clone());
        }
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub n: u32,
    pub tail_n: u64,
    pub cap_f: usize,
    /// smallest grid value found: an upper estimate of the finite-level index
    pub value: Enclosure,
    /// certified lower bound from single-level functionals (basis inputs only)
    pub lower: Option<Enclosure>,
    pub worst_set: Vec<u64>,
    #[serde(with = "qvec")]
    pub worst_coeffs: Vec<Q>,
    pub grid: u32,
    pub sets: usize,
    pub method: String,
}

fn compositions(total: u32, parts: usize, out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>) {
    if parts == 1 {
        cur.push(total);
        out.push(cur.clone());
        cur.pop();
        return;
    }
    for v in 0..=total {
        cur.push(v);
        compositions(total - v, parts - 1, out, cur);
        cur.pop();
    }
}

struct SimplexMin<'a> {
    xs: Vec<&'a BlockVector>,
    spec: &'a SpaceSpec,
    cfg: &'a NormConfig,
    memo: BTreeMap<Vec<u32>, Enclosure>,
}

impl SimplexMin<'_> {
    /// ‖Σ (k_i/2^g) x_i‖ for integer weights k summing to 2^g
    fn eval(&mut self, k: &[u32], g: u32) -> Result<Enclosure> {
        let scale = 1u32 << (MAX_GRID - g);
        let key: Vec<u32> = k.iter().map(|v| v * scale).collect();
        if let Some(v) = self.memo.get(&key) {
            return Ok(v.clone());
        }
        let den = Q::from_integer((1i64 << MAX_GRID).into());
        let mut x = BlockVector::new();
        for (xi, &ki) in self.xs.iter().zip(&key) {
            if ki > 0 {
                x.add_scaled(xi, &(Q::from_integer((ki as i64).into()) / &den));
            }
        }
        let v = norm_with(&x, self.spec, self.cfg)?;
        self.memo.insert(key, v.clone());
        Ok(v)
    }

    /// Full dyadic grid at a coarse mesh, then pattern search along e_i − e_j down to mesh 2^{-g}.
    fn minimize(&mut self, g: u32) -> Result<(Enclosure, Vec<Q>)> {
        let d = self.xs.len();
        let mut coarse = 0;
        while coarse < g {
            let mut pts = 1u64;
            for i in 0..(d as u64 - 1) {
                pts = pts * ((1u64 << (coarse + 1)) + d as u64 - 1 - i) / (i + 1);
            }
            if pts > 256 {
                break;
            }
            coarse += 1;
        }
        let mut grid = Vec::new();
        compositions(1 << coarse, d, &mut grid, &mut Vec::new());
        let mut best: Option<(Enclosure, Vec<u32>)> = None;
        for k in grid {
            let v = self.eval(&k, coarse)?;
            if best.as_ref().map_or(true, |(b, _)| v.cmp_lo(b).is_lt()) {
                best = Some((v, k));
            }
        }
        let (mut bv, mut bk) = best.expect("grid is nonempty");
        let mut level = coarse;
        loop {
            let mut improved = true;
            while improved {
                improved = false;
                for i in 0..d {
                    for j in 0..d {
                        if i == j || bk[j] == 0 {
                            continue;
                        }
                        let mut k = bk.clone();
                        k[j] -= 1;
                        k[i] += 1;
                        let v = self.eval(&k, level)?;
                        if v.cmp_lo(&bv).is_lt() {
                            bv = v;
                            bk = k;
                            improved = true;
                        }
                    }
                }
            }
            if level == g {
                break;
            }
            level += 1;
            bk.iter_mut().for_each(|v| *v *= 2);
        }
        let den = Q::from_integer((1i64 << level).into());
        Ok((bv, bk.iter().map(|&v| Q::from_integer((v as i64).into()) / &den).collect()))
    }
}

const MAX_GRID: u32 = 20;

fn subsets_in_family(pool: &[u64], cap: usize, n: u32, out: &mut Vec<Vec<u64>>, cur: &mut Vec<u64>, start: usize) {
    if !cur.is_empty() {
        out.push(cur.clone());
    }
    if cur.len() == cap {
        return;
    }
    for i in start..pool.len() {
        cur.push(pool[i]);
        if member_s(cur, n) {
            subsets_in_family(pool, cap, n, out, cur, i + 1);
        }
        cur.pop();
    }
}

/// min over F ∈ S_n, min F ≥ tailN, #F ≤ capF of min over the simplex of ‖Σ_{i∈F} a_i x_i‖,
/// with x_i the i-th vector (1-based).
pub fn delta_estimate(
    vectors: &[BlockVector],
    n: u32,
    tail_n: u64,
    cap_f: usize,
    spec: &SpaceSpec,
    grid: u32,
    cfg: &NormConfig,
) -> Result<DeltaEstimate> {
    if grid > MAX_GRID {
        return Err(Error::PreconditionFailed(format!("grid exponent at most {MAX_GRID}")));
    }
    for w in vectors.windows(2) {
        if !w[0].precedes(&w[1]) {
            return Err(Error::PreconditionFailed("vectors must be successive".into()));
        }
    }
    if cap_f > 10 {
        return Err(Error::CapExceeded { size: cap_f, cap: 10 });
    }
    let pool: Vec<u64> = (tail_n.max(1)..=vectors.len() as u64).collect();
    if pool.is_empty() {
        return Err(Error::PreconditionFailed("no vectors at or beyond tailN".into()));
    }
    let mut sets = Vec::new();
    subsets_in_family(&pool, cap_f, n, &mut sets, &mut Vec::new(), 0);
    let basis_index = |v: &BlockVector| -> Option<u64> {
        let mut it = v.iter();
        match (it.next(), it.next()) {
            (Some((k, c)), None) if c.is_one() => Some(*k),
            _ => None,
        }
    };
    let basis: Option<Vec<u64>> = vectors.iter().map(basis_index).collect();
    let mut best: Option<(Enclosure, Vec<u64>, Vec<Q>)> = None;
    let mut lower: Option<Enclosure> = None;
    for f in &sets {
        let xs: Vec<&BlockVector> = f.iter().map(|&i| &vectors[i as usize - 1]).collect();
        let (v, coeffs) = if xs.len() == 1 {
            (norm_with(xs[0], spec, cfg)?, vec![Q::one()])
        } else {
            SimplexMin {
                xs,
                spec,
                cfg,
                memo: BTreeMap::new(),
            }
            .minimize(grid)?
        };
        if best.as_ref().map_or(true, |(b, _, _)| v.cmp_lo(b).is_lt()) {
            best = Some((v, f.clone(), coeffs));
        }
        if let Some(b) = &basis {
            let idx: Vec<u64> = f.iter().map(|&i| b[i as usize - 1]).collect();
            let cert = single_level_certificate(&idx, spec, cfg.prec);
            lower = Some(match lower {
                None => cert,
                Some(l) => l.min(&cert),
            });
        }
    }
    let (value, worst_set, worst_coeffs) = best.expect("at least one set");
    Ok(DeltaEstimate {
        n,
        tail_n,
        cap_f,
        value,
        lower,
        worst_set,
        worst_coeffs,
        grid,
        sets: sets.len(),
        method: "multi-resolution dyadic simplex grid with pattern refinement".into(),
    })
}

/// Best θ_m with the index set in the m-th family (1 for a singleton): θ_m Σ e_k^* is a norming
/// functional worth θ_m on every convex combination of these basis vectors.
fn single_level_certificate(idx: &[u64], spec: &SpaceSpec, prec: u32) -> Enclosure {
    if idx.len() == 1 {
        return Enclosure::one();
    }
    let set = FiniteSet::from_unsorted(idx.to_vec());
    let mut best: Option<Enclosure> = None;
    let limit = spec.thetas.horizon().unwrap_or(64);
    for m in 1..=limit {
        if member(&set, &spec.family(m)) {
            if let Some(t) = spec.theta(m, prec) {
                best = Some(match best {
                    None => t,
                    Some(b) => b.max(&t),
                });
            }
        }
    }
    best.unwrap_or_else(Enclosure::zero)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    /// no sample refutes the inequality
    pub ok: bool,
    /// every sample satisfies it with certified enclosures
    pub certified: bool,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::rational::qvec_opt")]
    pub witness: Option<Vec<Q>>,
}

/// ‖Σ a_i v_i‖ ≤ max_n δ_n max_{#F ≤ n} ‖Σ_{i∈F} a_i u_i‖ on each sample.
pub fn strong_domination_check(
    u_norm: &dyn Fn(&[Q]) -> Enclosure,
    v_norm: &dyn Fn(&[Q]) -> Enclosure,
    deltas: &[Enclosure],
    samples: &[Vec<Q>],
) -> Result<DominationReport> {
    if deltas.is_empty() || deltas.iter().any(|d| !d.lo().is_positive()) {
        return Err(Error::PreconditionFailed("deltas must be positive".into()));
    }
    if deltas.windows(2).any(|w| w[0].certainly_lt(&w[1])) {
        return Err(Error::PreconditionFailed("deltas must be nonincreasing".into()));
    }
    let mut rep = DominationReport {
        ok: true,
        certified: true,
        samples: 0,
        witness: None,
    };
    for a in samples {
        let nz: Vec<usize> = (0..a.len()).filter(|&i| !a[i].is_zero()).collect();
        if nz.len() > 10 {
            return Err(Error::CapExceeded { size: nz.len(), cap: 10 });
        }
        // best u-norm over subsets of each size
        let mut by_size = vec![Enclosure::zero(); nz.len() + 1];
        for mask in 1u32..(1 << nz.len()) {
            let mut b = vec![Q::zero(); a.len()];
            for (t, &i) in nz.iter().enumerate() {
                if mask >> t & 1 == 1 {
                    b[i] = a[i].clone();
                }
            }
            let s = mask.count_ones() as usize;
            by_size[s] = by_size[s].max(&u_norm(&b));
        }
        for s in 1..by_size.len() {
            by_size[s] = by_size[s].max(&by_size[s - 1]);
        }
        let mut rhs = Enclosure::zero();
        for (n, d) in deltas.iter().enumerate() {
            let upto = (n + 1).min(nz.len());
            rhs = rhs.max(&d.mul(&by_size[upto]));
        }
        let lhs = v_norm(a);
        rep.samples += 1;
        if !lhs.certainly_le(&rhs) {
            rep.certified = false;
        }
        if !lhs.possibly_le(&rhs) && rep.ok {
            rep.ok = false;
            rep.witness = Some(a.clone());
        }
    }
    Ok(rep)
}

/// LHS ‖Σ a_i x_i‖ against 4 Σ_k δ_{α_{k−1}} sup_{F ∈ S_{α_k}, min F ≥ k} Σ_{i∈F} |a_i|.
pub fn eq3_check(
    xs: &[BlockVector],
    alpha: &[u32],
    deltas: &[Q],
    samples: &[Vec<Q>],
    spec: &SpaceSpec,
    cfg: &NormConfig,
) -> Result<VerifyReport> {
    if alpha.len() < 2 || deltas.len() + 1 < alpha.len() {
        return Err(Error::PreconditionFailed("need α_0..α_K and δ for α_0..α_{K−1}".into()));
    }
    if alpha.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::PreconditionFailed("α must be increasing".into()));
    }
    if deltas.iter().any(|d| !d.is_positive()) {
        return Err(Error::PreconditionFailed("δ must be positive".into()));
    }
    let mut rep = VerifyReport::new("eq3")
        .param("alpha", format!("{alpha:?}"))
        .param("deltas", deltas.iter().map(fmt_q).collect::<Vec<_>>().join(","));
    for a in samples {
        let mut x = BlockVector::new();
        for (xi, ai) in xs.iter().zip(a) {
            x.add_scaled(xi, ai);
        }
        let lhs = norm_with(&x, spec, cfg)?;
        let mut rhs = Enclosure::zero();
        for k in 1..alpha.len() {
            let w: BTreeMap<u64, Q> = a
                .iter()
                .enumerate()
                .map(|(i, c)| (i as u64 + 1, c.abs()))
                .filter(|(i, c)| *i >= k as u64 && !c.is_zero())
                .collect();
            if w.is_empty() {
                continue;
            }
            let s = max_schreier_sum(&w, alpha[k])?;
            rhs = rhs.add(&s.scale(&deltas[k - 1]));
        }
        let rhs = rhs.scale(&qi(4));
        let slack = rhs.sub(&lhs);
        rep.stat_min("min_slack", slack.to_f64());
        rep.record(slack, || serde_json::json!({ "coeffs": a.iter().map(fmt_q).collect::<Vec<_>>() }));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::norm;
    use crate::rational::q;

    #[test]
    fn params_and_classes() {
        let tz = p_space_params(&ThetaGen::PowerLaw { c: q(1, 2), q: qi(2) }, 64, 64).unwrap();
        assert!(tz.c_n.iter().all(|c| *c == Enclosure::Exact(q(1, 2))));
        assert_eq!(tz.p, Some(Enclosure::Exact(qi(2))));
        // θ_n n^{1/q} recomputed through logarithms still encloses c
        let th = ThetaGen::PowerLaw { c: q(1, 2), q: qi(2) }.theta(7, 64).unwrap();
        let c7 = th.mul(&root_power(7, &Enclosure::Exact(qi(2)), 64));
        assert!(c7.contains(&q(1, 2)));
        assert_eq!(classify(&tz).class, Class::Class1);

        let sc = p_space_params(&ThetaGen::LogReciprocal, 1024, 64).unwrap();
        assert_eq!(sc.p, Some(Enclosure::one()));
        let cl = classify(&sc);
        assert_eq!(cl.class, Class::Class2, "{cl:?}");

        let geo = p_space_params(&ThetaGen::Geometric(q(1, 2)), 32, 64).unwrap();
        assert!(!geo.p_space);
        assert_eq!(classify(&geo).class, Class::Unknown);
    }

    #[test]
    fn oscillating_values_are_unknown() {
        let c: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 0.5 } else { 0.05 }).collect();
        assert_eq!(classify_values(&c, TREND_FACTOR).class, Class::Unknown);
    }

    #[test]
    fn lr_examples() {
        let spec = SpaceSpec::power_law(qi(1), qi(2));
        let cfg = NormConfig::default();
        let blocks: Vec<BlockVector> = (1..=4).map(BlockVector::basis).collect();
        let r = lr_average_check(&blocks, &qi(2), &qi(2), &spec, &[vec![qi(1), q(1, 2), q(-1, 4), qi(0)]], &cfg).unwrap();
        assert!(r.ok, "{r:?}");
        assert_eq!(r.patterns, 17);
        let one = lr_average_check(&blocks[..1], &qi(2), &qi(1), &spec, &[], &cfg).unwrap();
        assert!(one.ok);
        let skew = vec![BlockVector::basis(2), BlockVector::flat(3, 6, q(1, 2))];
        assert_eq!(norm(&skew[1], &spec).unwrap().to_f64(), 1.0);
        let r = lr_average_check(&skew, &qi(1), &q(101, 100), &spec, &[], &cfg).unwrap();
        assert!(!r.ok);
        assert!(r.witness.is_some());
    }

    #[test]
    fn delta_basis_bracket() {
        let spec = SpaceSpec::geometric(q(1, 2), false);
        let cfg = NormConfig::default();
        let basis: Vec<BlockVector> = (1..=8).map(BlockVector::basis).collect();
        let d1 = delta_estimate(&basis, 1, 4, 4, &spec, 6, &cfg).unwrap();
        assert_eq!(d1.value, Enclosure::Exact(q(1, 2)));
        assert_eq!(d1.lower, Some(Enclosure::Exact(q(1, 2))));
        let single = delta_estimate(&basis[..1], 1, 1, 1, &spec, 6, &cfg).unwrap();
        assert_eq!(single.value, Enclosure::one());
    }

    #[test]
    fn domination_examples() {
        let l1 = |a: &[Q]| Enclosure::Exact(a.iter().map(|x| x.abs()).sum());
        let l2 = |a: &[Q]| {
            let s: Q = a.iter().map(|x| x * x).sum();
            crate::enclosure::root_q(&s, 2, 64)
        };
        let flat = vec![vec![qi(1); 4], vec![qi(1), qi(-1), qi(0), qi(1)]];
        let ones = vec![Enclosure::one(); 4];
        assert!(strong_domination_check(&l1, &l1, &ones, &flat).unwrap().certified);
        let inv: Vec<Enclosure> = (1..=4).map(|n| Enclosure::one().div(&crate::enclosure::root_q(&qi(n), 2, 64))).collect();
        let r = strong_domination_check(&l1, &l2, &inv, &flat).unwrap();
        assert!(r.ok);
        let tiny = vec![Enclosure::Exact(q(1, 10)); 4];
        let r = strong_domination_check(&l1, &l1, &tiny, &flat).unwrap();
        assert!(!r.ok && r.witness.is_some());
    }

    #[test]
    fn eq3_examples() {
        let spec = SpaceSpec::geometric(q(1, 2), false);
        let cfg = NormConfig::default();
        let xs: Vec<BlockVector> = (1..=8).map(BlockVector::basis).collect();
        let alpha = vec![1, 2, 3];
        let deltas = vec![qi(1), q(1, 2)];
        let samples = vec![vec![qi(0), qi(1)], vec![qi(1); 8], vec![q(1, 2), qi(-1), qi(0), q(1, 3)]];
        let r = eq3_check(&xs, &alpha, &deltas, &samples, &spec, &cfg).unwrap();
        assert!(r.pass, "{r:?}");
        let tiny = vec![q(1, 1000), q(1, 1000)];
        let r = eq3_check(&xs, &alpha, &tiny, &samples, &spec, &cfg).unwrap();
        assert!(!r.pass && r.witness.is_some());
    }
}
