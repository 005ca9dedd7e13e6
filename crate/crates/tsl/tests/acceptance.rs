mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsl::enclosure::root_q;
use tsl::norm::{norm, norm_with, norming_functional, NormConfig};
use tsl::rational::{q, qi};
use tsl::report::{merge_reports, MergedReport};
use tsl::schreier::max_schreier_sum;
use tsl::spreading::{classify, delta_estimate, p_space_params, Class};
use tsl::suites::{maximal_schreier_sets, run_suite, SuiteConfig};
use tsl::tree::{evaluate, validate_tree};
use tsl::{BlockVector, Enclosure, SpaceSpec, Q};

use common::{agree, brute_mss, oracle_norm, oracle_specs, random_vector, SchreierMemo};

const PREC: u32 = 64;

fn show(e: &Enclosure) -> String {
    serde_json::to_string(e).unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// The seeded vectors shared by criteria 1, 2 and 5.
fn oracle_corpus() -> Vec<(String, SpaceSpec, Vec<BlockVector>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    oracle_specs()
        .into_iter()
        .map(|(name, spec, support)| {
            let xs = (0..60).map(|_| random_vector(&mut rng, support, 9)).collect();
            (name.to_string(), spec, xs)
        })
        .collect()
}

fn criterion_oracle(corpus: &[(String, SpaceSpec, Vec<BlockVector>)]) -> Outcome {
    let start = Instant::now();
    let mut total = 0;
    let mut bad = Vec::new();
    for (name, spec, xs) in corpus {
        for x in xs {
            total += 1;
            let dp = norm(x, spec).expect("norm");
            let brute = oracle_norm(spec, x);
            if !agree(&dp, &brute) {
                bad.push(format!("{name}: {x:?} dp {dp:?} oracle {brute:?}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = bad.is_empty() && total >= 200 && elapsed < Duration::from_secs(300);
    outcome(
        pass,
        format!("{total} vectors, {} mismatches, {:.1}s {}", bad.len(), elapsed.as_secs_f64(), bad.join(" | ")),
    )
}

fn criterion_duality(corpus: &[(String, SpaceSpec, Vec<BlockVector>)]) -> Outcome {
    let mut bad = Vec::new();
    let mut total = 0;
    for (name, spec, xs) in corpus {
        for x in xs {
            total += 1;
            let f = norming_functional(x, spec).expect("functional");
            let problems = validate_tree(&f, spec);
            let value = evaluate(&f, x, spec, PREC).expect("valid functional");
            let n = norm(x, spec).expect("norm");
            if !problems.is_empty() || !agree(&value, &n) {
                bad.push(format!("{name}: {x:?} f(x) {value:?} norm {n:?} {problems:?}"));
            }
        }
    }
    outcome(bad.is_empty(), format!("{total} functionals, {} failures {}", bad.len(), bad.join(" | ")))
}

fn criterion_special_combination() -> Outcome {
    let spec = SpaceSpec::geometric(q(1, 2), false);
    let mut checked = 0;
    let mut bad = Vec::new();
    for (n, set) in maximal_schreier_sets() {
        let a = Q::new(1.into(), (set.len() as i64).into());
        let x = BlockVector::from_pairs(set.iter().map(|&i| (i, a.clone()))).expect("vector");
        let v = norm(&x, &spec).expect("norm");
        let th = spec.theta(n, PREC).expect("weight");
        checked += 1;
        let exact = v.is_exact() && th.is_exact();
        if !exact || v.certainly_lt(&th) || th.scale(&qi(2)).certainly_lt(&v) {
            bad.push(format!("n={n} {set:?}: {v:?}"));
        }
    }
    outcome(bad.is_empty() && checked > 0, format!("{checked} maximal sets, {} outside [θ_n, 2θ_n] {}", bad.len(), bad.join(" | ")))
}

fn criterion_lp() -> Outcome {
    let spec = SpaceSpec::power_law(q(1, 1), qi(2));
    let tol = q(1, 1_000_000_000);
    let four = norm(&BlockVector::flat(1, 4, qi(1)), &spec).expect("norm");
    let eight = norm(&BlockVector::flat(1, 8, qi(1)), &spec).expect("norm");
    let root8 = root_q(&qi(8), 2, 96);
    let ok4 = four.contains(&qi(2)) && four.width() < tol;
    let ok8 = eight.overlaps(&root8) && eight.width() < tol;
    outcome(ok4 && ok8, format!("‖Σ_1^4 e_i‖ ∈ {}, ‖Σ_1^8 e_i‖ ∈ {}", show(&four), show(&eight)))
}

fn criterion_modified(corpus: &[(String, SpaceSpec, Vec<BlockVector>)]) -> Outcome {
    let cfg = NormConfig::with_cap(Some(8));
    let mut total = 0;
    let mut bad = Vec::new();
    for (name, spec, xs) in corpus {
        let m = spec.clone().with_modified(true);
        let plain = spec.clone().with_modified(false);
        for x in xs {
            total += 1;
            let a = norm_with(x, &m, &cfg).expect("modified norm");
            let b = norm_with(x, &plain, &cfg).expect("norm");
            let ok = match (a.as_exact(), b.as_exact()) {
                (Some(a), Some(b)) => a >= b,
                _ => !a.certainly_lt(&b),
            };
            if !ok {
                bad.push(format!("{name}: {x:?}"));
            }
        }
    }
    outcome(bad.is_empty(), format!("{total} vectors, {} violations {}", bad.len(), bad.join(" | ")))
}

fn rows<'a>(m: &'a MergedReport, lemma: &str) -> Vec<&'a tsl::estimates::VerifyReport> {
    m.rows.values().filter(|r| r.lemma == lemma).collect()
}

fn criterion_x2(m: &MergedReport) -> Outcome {
    let r = rows(m, "x2");
    let instances: usize = r.iter().map(|r| r.instances).sum();
    let pass = !r.is_empty() && r.iter().all(|r| r.pass) && instances >= 100;
    let lo = r.iter().filter_map(|r| r.stats.get("min_ratio")).fold(f64::INFINITY, |a, &b| a.min(b));
    let hi = r.iter().filter_map(|r| r.stats.get("max_ratio")).fold(0.0, |a: f64, &b| a.max(b));
    outcome(pass, format!("{instances} vectors, ratios in [{lo:.4}, {hi:.4}]"))
}

fn criterion_height(m: &MergedReport) -> Outcome {
    let r = rows(m, "height");
    let levels: Vec<&String> = r.iter().filter_map(|r| r.params.get("M")).collect();
    let lo = r.iter().filter_map(|r| r.stats.get("min_ratio")).fold(f64::INFINITY, |a, &b| a.min(b));
    let hi = r.iter().filter_map(|r| r.stats.get("max_ratio")).fold(0.0, |a: f64, &b| a.max(b));
    let pass = r.len() == 3 && r.iter().all(|r| r.pass && r.instances >= 100) && lo >= 1.0 && hi <= 2.0;
    outcome(pass, format!("M ∈ {levels:?}, 100 vectors each, full/capped in [{lo:.4}, {hi:.4}]"))
}

fn criterion_theta1(m: &MergedReport) -> Outcome {
    let r = rows(m, "theta1");
    let instances: usize = r.iter().map(|r| r.instances).sum();
    let worst = r
        .iter()
        .filter_map(|r| r.worst_slack.as_ref())
        .map(|s| s.to_f64())
        .fold(f64::INFINITY, f64::min);
    let pass = !r.is_empty() && r.iter().all(|r| r.pass) && instances > 0;
    outcome(pass, format!("{} (average, j) rows, {instances} families, worst slack {worst:.6}", r.len()))
}

fn criterion_restrict(m: &MergedReport) -> Outcome {
    let r = rows(m, "restrict");
    let instances: usize = r.iter().map(|r| r.instances).sum();
    let notes: Vec<&String> = r.iter().flat_map(|r| &r.notes).collect();
    let pass = !r.is_empty() && r.iter().all(|r| r.pass) && instances >= 100;
    outcome(pass, format!("{instances} (tree, I) instances, {} violations", notes.len()))
}

fn criterion_mss() -> Outcome {
    let mut memo = SchreierMemo::new();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut bad = Vec::new();
    let mut count = 0;
    let compare = |w: &BTreeMap<u64, Q>, m: u32, bad: &mut Vec<String>, memo: &mut SchreierMemo| {
        let got = max_schreier_sum(w, m).expect("mss");
        let want = brute_mss(w, m, memo);
        if got.as_exact() != Some(&want) {
            bad.push(format!("M={m} {w:?}: {got:?} vs {want}"));
        }
    };
    for _ in 0..500 {
        let size = rng.gen_range(1..=10usize);
        let lo = rng.gen_range(1..=6u64);
        let mut w = BTreeMap::new();
        while w.len() < size {
            let i = rng.gen_range(lo..lo + 14);
            w.insert(i, q(rng.gen_range(0..=12), rng.gen_range(1..=6)));
        }
        let m = rng.gen_range(1..=3u32);
        compare(&w, m, &mut bad, &mut memo);
        count += 1;
    }
    // every support ⊆ {1..8} with ≤ 6 points, coefficients from {1, 1/3}
    let pool: Vec<u64> = (1..=8).collect();
    for mask in 1u32..(1 << pool.len()) {
        if mask.count_ones() > 6 {
            continue;
        }
        let support: Vec<u64> = (0..pool.len()).filter(|b| mask >> b & 1 == 1).map(|b| pool[b]).collect();
        for pattern in 0u32..(1 << support.len()) {
            let w: BTreeMap<u64, Q> = support
                .iter()
                .enumerate()
                .map(|(k, &i)| (i, if pattern >> k & 1 == 1 { q(1, 3) } else { qi(1) }))
                .collect();
            for m in 1..=3 {
                compare(&w, m, &mut bad, &mut memo);
                count += 1;
            }
        }
    }
    outcome(bad.is_empty(), format!("{count} instances, {} mismatches {}", bad.len(), bad.iter().take(3).cloned().collect::<Vec<_>>().join(" | ")))
}

fn criterion_delta() -> Outcome {
    let spec = SpaceSpec::geometric(q(1, 2), false);
    let basis: Vec<BlockVector> = (1..=8).map(BlockVector::basis).collect();
    let tol = Enclosure::Exact(q(1, 64));
    let mut pass = true;
    let mut detail = Vec::new();
    for n in 1..=2 {
        let d = delta_estimate(&basis, n, 4, 4, &spec, 6, &NormConfig::default()).expect("delta");
        let th = spec.theta(n, PREC).expect("weight");
        let lower_ok = d.lower.as_ref().is_some_and(|l| l.is_exact() && !l.certainly_lt(&th) && !d.value.certainly_lt(l));
        let upper_ok = !th.scale(&qi(2)).add(&tol).certainly_lt(&d.value);
        pass &= lower_ok && upper_ok;
        let lower = d.lower.as_ref().map_or("none".to_string(), show);
        detail.push(format!("δ_{n} ≈ {} (certified lower {lower}, θ_{n} = {})", d.value.to_f64(), show(&th)));
    }
    outcome(pass, detail.join(", "))
}

fn criterion_classify() -> Outcome {
    let tz = classify(&p_space_params(&SpaceSpec::tzafriri().thetas, 1024, PREC).expect("params"));
    let sc = classify(&p_space_params(&SpaceSpec::schlumprecht().thetas, 1024, PREC).expect("params"));
    outcome(
        tz.class == Class::Class1 && sc.class == Class::Class2,
        format!("PowerLaw(1/2,2) → {:?}, LogReciprocal → {:?}", tz.class, sc.class),
    )
}

fn criterion_determinism(a: &str, b: &str) -> Outcome {
    outcome(a == b, format!("merged reports of {} and {} bytes", a.len(), b.len()))
}

fn main() {
    let corpus = oracle_corpus();
    let cfg = SuiteConfig::default();
    let first = merge_reports(run_suite("all", &cfg).expect("suite run"));
    let second = merge_reports(run_suite("all", &cfg).expect("suite run"));
    let a = serde_json::to_string_pretty(&first).unwrap();
    let b = serde_json::to_string_pretty(&second).unwrap();

    let results = vec![
        ("1 oracle equivalence", criterion_oracle(&corpus)),
        ("2 duality certificate", criterion_duality(&corpus)),
        ("3 special convex combinations", criterion_special_combination()),
        ("4 l_p identity", criterion_lp()),
        ("5 modified dominance", criterion_modified(&corpus)),
        ("6 S_n[A_2] ratio", criterion_x2(&first)),
        ("7 height check", criterion_height(&first)),
        ("8 averaging-tree family bound", criterion_theta1(&first)),
        ("9 restriction construction", criterion_restrict(&first)),
        ("10 max_schreier_sum brute force", criterion_mss()),
        ("11 delta bracket", criterion_delta()),
        ("12 classification", criterion_classify()),
        ("13 determinism", criterion_determinism(&a, &b)),
    ];
    let mut failed = Vec::new();
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(*name);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
