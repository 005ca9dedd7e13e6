use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::collections::BTreeMap;

use crate::averages::{
    build_averaging_tree, bundle_norm_bounds, check_restriction, restrict_average, AverageCert, BasisSupply, BuildParams,
};
use crate::enclosure::Enclosure;
use crate::error::{Error, Result};
use crate::estimates::{
    prune_tree, regroup_inequality, regroup_node, theta1_corollary, verify_ave1, verify_height_fact, verify_theta1,
    verify_x2, RisAverage, VerifyReport,
};
use crate::norm::{norm_with, NormConfig};
use crate::rational::{q, qi, Q};
use crate::schreier::member_s;
use crate::space::SpaceSpec;
use crate::spreading::{delta_estimate, eq3_check};
use crate::tree::{validate_tree, NormingTree};
use crate::vector::BlockVector;

pub const SUITES: &[&str] = &[
    "basis-fact",
    "height-fact",
    "x2",
    "theta1",
    "prune",
    "regroup",
    "ave1",
    "restrict",
    "delta",
    "eq3",
];

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub samples: usize,
    pub seed: u64,
    pub m_level: Option<u32>,
    pub norm: NormConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            samples: 100,
            seed: 7,
            m_level: None,
            norm: NormConfig::default(),
        }
    }
}

/// Runs one suite by id, or every suite for "all".
pub fn run_suite(id: &str, cfg: &SuiteConfig) -> Result<Vec<VerifyReport>> {
    if id == "all" {
        let mut out = Vec::new();
        for s in SUITES {
            out.extend(run_suite(s, cfg)?);
        }
        return Ok(out);
    }
    let mut reports = match id {
        "basis-fact" => vec![basis_fact(cfg)?],
        "height-fact" => height_suite(cfg)?,
        "x2" => vec![x2_suite(cfg)?],
        "theta1" => theta1_suite(cfg)?,
        "prune" => vec![prune_suite(cfg)?],
        "regroup" => vec![regroup_suite(cfg)?],
        "ave1" => vec![ave1_suite(cfg)?],
        "restrict" => vec![restrict_suite(cfg)?],
        "delta" => vec![delta_suite(cfg)?],
        "eq3" => vec![eq3_suite(cfg)?],
        other => return Err(Error::Parse(format!("unknown suite {other:?}; known: {}", SUITES.join(", ")))),
    };
    for r in &mut reports {
        r.params.insert("seed".into(), cfg.seed.to_string());
        r.params.insert("suite".into(), id.to_string());
    }
    Ok(reports)
}

fn rng(cfg: &SuiteConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed)
}

fn quarter(rng: &mut ChaCha8Rng, signed: bool) -> Q {
    let k = rng.gen_range(1..=4);
    let v = q(k, 4);
    if signed && rng.gen_bool(0.5) {
        -v
    } else {
        v
    }
}

fn random_vector(rng: &mut ChaCha8Rng, support: &[u64], signed: bool) -> BlockVector {
    let mut x = BlockVector::new();
    for &i in support {
        x.set(i, quarter(rng, signed));
    }
    x
}

fn random_subset(rng: &mut ChaCha8Rng, lo: u64, hi: u64, size: usize) -> Vec<u64> {
    let pool: Vec<u64> = (lo..=hi).collect();
    let mut s: Vec<u64> = pool.choose_multiple(rng, size.min(pool.len())).copied().collect();
    s.sort_unstable();
    s
}

/// A random valid tree-analysis on `pool` (sorted): consecutive segments become children,
/// the weight is the least index whose family admits their minima.
pub fn random_tree(rng: &mut ChaCha8Rng, pool: &[u64], spec: &SpaceSpec, depth: u32, signed: bool) -> NormingTree {
    let sign = if signed && rng.gen_bool(0.5) { -1 } else { 1 };
    if pool.len() == 1 || depth == 0 || rng.gen_bool(0.15) {
        return NormingTree::leaf(pool[rng.gen_range(0..pool.len())], sign);
    }
    let parts = rng.gen_range(2..=pool.len().min(5));
    let mut cuts: Vec<usize> = (1..pool.len()).collect::<Vec<_>>().choose_multiple(rng, parts - 1).copied().collect();
    cuts.sort_unstable();
    let mut segs = Vec::new();
    let mut start = 0;
    for c in cuts.into_iter().chain([pool.len()]) {
        segs.push(&pool[start..c]);
        start = c;
    }
    let minima: Vec<u64> = segs.iter().map(|s| s[0]).collect();
    let Some(n) = spec.min_index(&minima) else {
        return NormingTree::leaf(pool[0], sign);
    };
    let children = segs
        .iter()
        .map(|s| {
            // keep the segment minimum so the admissibility of the minima is unchanged
            let mut sub = vec![s[0]];
            sub.extend(s[1..].iter().filter(|_| rng.gen_bool(0.8)));
            random_tree(rng, &sub, spec, depth - 1, signed)
        })
        .collect();
    NormingTree::node(n, children)
}

fn basis_fact(cfg: &SuiteConfig) -> Result<VerifyReport> {
    let spec = SpaceSpec::geometric(q(1, 2), false);
    let mut r = VerifyReport::new("basis-fact").param("space", "T[(S_n, 2^-n)]");
    for (n, set) in maximal_schreier_sets() {
        let c = Q::new(1.into(), (set.len() as i64).into());
        let x = BlockVector::from_pairs(set.iter().map(|&i| (i, c.clone())))?;
        let v = norm_with(&x, &spec, &cfg.norm)?;
        let th = spec.theta(n, cfg.norm.prec).expect("geometric weights");
        let lo = v.sub(&th);
        let hi = th.scale(&qi(2)).sub(&v);
        let slack = if lo.cmp_lo(&hi).is_lt() { lo } else { hi };
        r.record(slack, || json!({ "n": n, "set": set }));
    }
    Ok(r)
}

/// Maximal S_1 and S_2 sets with minimum ≥ 2 and at most 12 points.
pub fn maximal_schreier_sets() -> Vec<(u32, Vec<u64>)> {
    let mut out = Vec::new();
    for k in 2..=12u64 {
        out.push((1, (k..2 * k).collect()));
        if k <= 6 {
            // a maximal set that is not an interval: skip one point after the minimum
            let mut s = vec![k];
            s.extend(k + 2..2 * k + 1);
            out.push((1, s));
        }
    }
    for a in 3..=5u64 {
        for b in (a + 1)..=10u64 {
            let mut s = vec![2, a];
            s.extend(b..2 * b);
            if s.len() <= 12 {
                out.push((2, s));
            }
        }
    }
    out
}

fn height_suite(cfg: &SuiteConfig) -> Result<Vec<VerifyReport>> {
    let levels: Vec<u32> = cfg.m_level.map_or(vec![1, 2, 3], |m| vec![m]);
    let mut rng = rng(cfg);
    let theta = q(1, 2);
    let mut out = Vec::new();
    for m in levels {
        let mut r = VerifyReport::new("height").param("M", m).param("samples", cfg.samples);
        let mut done = 0;
        while done < cfg.samples {
            let start = rng.gen_range(2..=6u64);
            let size = rng.gen_range(1..=8usize);
            let mut s = random_subset(&mut rng, start + 1, start + 12, size - 1);
            s.insert(0, start);
            if !member_s(&s, m) {
                continue;
            }
            let z = random_vector(&mut rng, &s, false);
            r.absorb(verify_height_fact(&z, m, &theta, &cfg.norm)?);
            done += 1;
        }
        r.lemma = "height".into();
        out.push(r);
    }
    Ok(out)
}

fn x2_suite(cfg: &SuiteConfig) -> Result<VerifyReport> {
    let spec = SpaceSpec::geometric(q(1, 2), true);
    let mut rng = rng(cfg);
    let samples: Vec<BlockVector> = (0..cfg.samples)
        .map(|_| {
            let size = rng.gen_range(1..=8usize);
            let s = random_subset(&mut rng, 1, 14, size);
            random_vector(&mut rng, &s, true)
        })
        .collect();
    Ok(verify_x2(&spec, &samples, &cfg.norm)?.param("space", "T_M[(S_n, 2^-n)]"))
}

fn theta1_suite(cfg: &SuiteConfig) -> Result<Vec<VerifyReport>> {
    let spec = SpaceSpec::geometric(q(1, 2), true);
    let mut rng = rng(cfg);
    let windows_per = (cfg.samples / 50).clamp(1, 4);
    let mut certs: Vec<(String, AverageCert)> = Vec::new();
    let small = build_averaging_tree(&mut BasisSupply::from(8), &BuildParams::new(1, q(1, 2)))?;
    certs.push(("tree M=1".into(), small.root_cert()));
    let mut p = BuildParams::new(2, q(7, 10));
    p.power_of_two = true;
    let two = build_averaging_tree(&mut BasisSupply::from(1), &p)?;
    certs.push(("tree M=2".into(), two.root_cert()));
    let s3: Vec<BlockVector> = (2..=11).map(BlockVector::basis).collect();
    certs.push(("uniform S_3 average".into(), AverageCert::uniform(s3, 3, Q::one())));
    let mut out = Vec::new();
    for (label, mut cert) in certs {
        if let Some(m) = cfg.m_level {
            if cert.m_level != m {
                continue;
            }
        }
        // the tightest admissible ε is the exact S_{M−1} mass
        let chk = crate::averages::check_average(&AverageCert {
            eps: qi(2),
            ..cert.clone()
        })?;
        let mass = chk.mass.expect("M ≥ 1");
        cert.eps = mass.hi().clone() + q(1, 1 << 20);
        let support = cert.vector().support_vec();
        for j in 0..cert.m_level {
            let mut r = VerifyReport::new("theta1").param("average", &label).param("M", cert.m_level).param("j", j);
            for w in 0..windows_per {
                let len = support.len().min(10);
                let start = if w == 0 { 0 } else { rng.gen_range(0..=support.len().min(600) - len) };
                let window = &support[start..start + len];
                r.absorb(verify_theta1(&cert, j, &spec, window, &cfg.norm)?);
            }
            if support.len() <= 12 {
                let s = theta1_corollary(&cert, &spec, &cfg.norm)?;
                r.instances += 1;
                if *s.lo() < Q::zero() {
                    r.fail(format!("corollary bound fails with slack {}", s.to_f64()));
                }
                r.stats.insert("corollary_slack".into(), s.to_f64());
            }
            out.push(r);
        }
    }
    Ok(out)
}

/// x = Σ_{i=4}^{63} a_i e_i with a_i ∝ 1/i: an S_2 average whose S_1 mass is about 1/4.
pub fn harmonic_average() -> AverageCert {
    let idx: Vec<u64> = (4..=63).collect();
    let total: Q = idx.iter().map(|&i| Q::new(1.into(), (i as i64).into())).sum();
    let coeffs: Vec<Q> = idx.iter().map(|&i| Q::new(1.into(), (i as i64).into()) / &total).collect();
    let mut cert = AverageCert {
        blocks: idx.iter().map(|&i| BlockVector::basis(i)).collect(),
        coeffs,
        m_level: 2,
        eps: qi(2),
    };
    let mass = crate::averages::check_average(&cert).expect("well formed").mass.expect("M = 2");
    cert.eps = mass.hi().clone() + q(1, 1000);
    cert
}

fn prune_suite(cfg: &SuiteConfig) -> Result<VerifyReport> {
    let spec = SpaceSpec::geometric(q(1, 2), true);
    let cert = harmonic_average();
    let mut rng = rng(cfg);
    let two_eps = qi(2) * &cert.eps;
    let mut r = VerifyReport::new("prune").param("M", 2).param("eps", crate::rational::fmt_q(&cert.eps));
    for _ in 0..cfg.samples {
        let size = rng.gen_range(1..=16usize);
        let pool = random_subset(&mut rng, 4, 63, size);
        let f = random_tree(&mut rng, &pool, &spec, 4, true);
        debug_assert!(validate_tree(&f, &spec).is_empty());
        let o = prune_tree(&f, &cert, 2, &spec, cfg.norm.prec)?;
        let slack = Enclosure::Exact(two_eps.clone()).sub(&o.loss);
        r.stat_max("max_loss", o.loss.to_f64());
        r.record(slack, || serde_json::to_value(&f).expect("tree serializes"));
    }
    Ok(r)
}

fn internal_paths(f: &NormingTree, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if let NormingTree::Node { children, .. } = f {
        out.push(path.clone());
        for (i, c) in children.iter().enumerate() {
            path.push(i);
            internal_paths(c, path, out);
            path.pop();
        }
    }
}

fn regroup_suite(cfg: &SuiteConfig) -> Result<VerifyReport> {
    let spec = SpaceSpec::geometric(q(1, 2), true);
    let mut rng = rng(cfg);
    let mut r = VerifyReport::new("regroup").param("space", "T_M[(S_n, 2^-n)]");
    let mut done = 0;
    while done < cfg.samples {
        let size = rng.gen_range(2..=12usize);
        let pool = random_subset(&mut rng, 1, 30, size);
        let f = random_tree(&mut rng, &pool, &spec, 3, false);
        let mut paths = Vec::new();
        internal_paths(&f, &mut Vec::new(), &mut paths);
        let Some(path) = paths.choose(&mut rng).cloned() else {
            continue;
        };
        let ord = f.ord_at(&path).expect("path exists");
        let NormingTree::Node { weight_index, .. } = f.get(&path).expect("path exists") else {
            unreachable!()
        };
        let k = ord + rng.gen_range(0..=*weight_index);
        let rg = regroup_node(&f, &path, k)?;
        let errs = validate_tree(&rg.tree, &spec);
        if !errs.is_empty() {
            r.fail(format!("regrouped tree invalid: {}", errs.join("; ")));
        }
        let x = random_vector(&mut rng, &pool, false);
        let (lhs, rhs) = regroup_inequality(&f, &path, k, &rg, &x, &spec, cfg.norm.prec)?;
        r.record(rhs.sub(&lhs), || json!({ "tree": f, "path": path, "k": k }));
        done += 1;
    }
    Ok(r)
}

fn ave1_suite(cfg: &SuiteConfig) -> Result<VerifyReport> {
    let spec = SpaceSpec::geometric(q(1, 2), true);
    let mut rng = rng(cfg);
    let count = cfg.samples.min(20).max(1);
    let mut r = VerifyReport::new("ave1").param("samples", count);
    for _ in 0..count {
        let mut inner = Vec::new();
        let mut next = rng.gen_range(3..=5u64);
        for _ in 0..3 {
            let size = rng.gen_range(1..=3usize);
            let idx: Vec<u64> = (next..next + size as u64).collect();
            next += size as u64 + rng.gen_range(0..=2u64);
            let blocks: Vec<BlockVector> = idx.iter().map(|&i| BlockVector::basis(i)).collect();
            let cert = if size == 1 {
                AverageCert::uniform(blocks, 0, Q::one())
            } else {
                AverageCert::uniform(blocks, 1, Q::new(1.into(), (size as i64).into()) + q(1, 100))
            };
            inner.push(cert);
        }
        let inst = RisAverage {
            inner,
            n: vec![4, 16, 24],
            ris_eps: Q::one(),
            outer: vec![q(1, 3); 3],
            m_level: 1,
            eps: q(2, 5),
        };
        let rep = verify_ave1(&inst, &spec, &cfg.norm)?;
        let d_prime = rep.stats["empirical_D_prime"];
        r.absorb(rep);
        r.stat_max("max_D_prime", d_prime);
    }
    r.stats.remove("empirical_D_prime");
    r.lemma = "ave1".into();
    Ok(r)
}

fn restrict_suite(cfg: &SuiteConfig) -> Result<VerifyReport> {
    let spec = SpaceSpec::geometric(q(1, 2), true);
    let mut rng = rng(cfg);
    let mut p = BuildParams::new(2, q(7, 10));
    p.power_of_two = true;
    let starts: Vec<u64> = (1..=7).collect();
    let mut instances: Vec<(u64, usize, Vec<usize>)> = Vec::new();
    for &s in &starts {
        instances.push((s, 2, vec![1]));
        for mask in 1u32..16 {
            instances.push((s, 1, (0..4).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect()));
        }
    }
    instances.shuffle(&mut rng);
    instances.truncate(cfg.samples);
    instances.sort();
    let mut r = VerifyReport::new("restrict").param("M", 2).param("eps", "7/10");
    let mut trees = BTreeMap::new();
    for (s, m, idx) in instances {
        let tree = match trees.get(&s) {
            Some(t) => t,
            None => {
                let t = build_averaging_tree(&mut BasisSupply::from(s), &p)?;
                trees.entry(s).or_insert(t)
            }
        };
        let res = restrict_average(tree, m, &idx)?;
        let viol = check_restriction(tree, m, &idx, &res);
        if !viol.is_empty() {
            r.fail(format!("start {s}, m {m}, I {idx:?}: {}", viol.join("; ")));
        }
        let bounds = bundle_norm_bounds(&res, tree, &spec, &cfg.norm)?;
        let worst = bounds.iter().fold(Enclosure::zero(), |a, b| a.max(b));
        r.record(Enclosure::one().sub(&worst), || json!({ "start": s, "m": m, "I": idx }));
    }
    Ok(r)
}

fn delta_suite(cfg: &SuiteConfig) -> Result<VerifyReport> {
    let spec = SpaceSpec::geometric(q(1, 2), false);
    let basis: Vec<BlockVector> = (1..=8).map(BlockVector::basis).collect();
    let mut r = VerifyReport::new("delta").param("tailN", 4).param("capF", 4).param("grid", 6);
    let tol = Enclosure::Exact(q(1, 64));
    for n in 1..=2u32 {
        let d = delta_estimate(&basis, n, 4, 4, &spec, 6, &cfg.norm)?;
        let th = spec.theta(n, cfg.norm.prec).expect("geometric weights");
        let lower = d.lower.clone().expect("basis input");
        let lo_slack = lower.sub(&th);
        let hi_slack = th.scale(&qi(2)).add(&tol).sub(&d.value);
        let cert_slack = d.value.sub(&lower);
        for s in [lo_slack, hi_slack, cert_slack] {
            r.record(s, || json!({ "n": n, "value": d.value, "lower": lower, "set": d.worst_set }));
        }
        r.stats.insert(format!("value_n{n}"), d.value.to_f64());
    }
    Ok(r)
}

fn eq3_suite(cfg: &SuiteConfig) -> Result<VerifyReport> {
    let spec = SpaceSpec::geometric(q(1, 2), false);
    let xs: Vec<BlockVector> = (1..=12).map(BlockVector::basis).collect();
    let alpha = vec![1, 2, 3];
    let deltas: Vec<Q> = alpha[..2].iter().map(|&a| qi(2) * spec.theta(a, 64).unwrap().lo()).collect();
    let mut rng = rng(cfg);
    let samples: Vec<Vec<Q>> = (0..cfg.samples)
        .map(|_| {
            let size = rng.gen_range(1..=12usize);
            let s = random_subset(&mut rng, 1, 12, size);
            let mut a = vec![Q::from_integer(0.into()); 12];
            for i in s {
                a[i as usize - 1] = quarter(&mut rng, true);
            }
            a
        })
        .collect();
    eq3_check(&xs, &alpha, &deltas, &samples, &spec, &cfg.norm)
}
