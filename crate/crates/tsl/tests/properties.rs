mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tsl::averages::{build_averaging_tree, check_averaging_tree, BasisSupply, BuildParams, TreeRules};
use tsl::estimates::{prune_tree, verify_height_fact};
use tsl::norm::{norm, norm_with, NormConfig};
use tsl::rational::{q, qi};
use tsl::schreier::member_s;
use tsl::spreading::{classify_values, strong_domination_check, TREND_FACTOR};
use tsl::suites::{harmonic_average, random_tree};
use tsl::{BlockVector, Enclosure, SpaceSpec, Q};

use common::{brute_s, oracle_specs};

fn set_strategy(max: usize) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::btree_set(1u64..=14, 0..=max).prop_map(|s| s.into_iter().collect())
}

fn vector_strategy(max_support: usize) -> impl Strategy<Value = BlockVector> {
    prop::collection::btree_map(1u64..=9, (1i64..=8, 1i64..=4, any::<bool>()), 1..=max_support).prop_map(|m| {
        let mut x = BlockVector::new();
        for (i, (n, d, neg)) in m {
            x.set(i, if neg { q(-n, d) } else { q(n, d) });
        }
        x
    })
}

fn spec_strategy() -> impl Strategy<Value = SpaceSpec> {
    (0usize..4).prop_map(|i| oracle_specs().swap_remove(i).1)
}

/// a ≤ b, exactly when both are rational.
fn le(a: &Enclosure, b: &Enclosure) -> bool {
    match (a.as_exact(), b.as_exact()) {
        (Some(a), Some(b)) => a <= b,
        _ => a.possibly_le(b),
    }
}

fn same(a: &Enclosure, b: &Enclosure) -> bool {
    match (a.as_exact(), b.as_exact()) {
        (Some(a), Some(b)) => a == b,
        _ => a.overlaps(b),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schreier_matches_definition(f in set_strategy(8), n in 0u32..=3) {
        prop_assert_eq!(member_s(&f, n), brute_s(&f, n));
    }

    #[test]
    fn schreier_hereditary(f in set_strategy(10), n in 0u32..=3, drop in any::<u16>()) {
        prop_assume!(member_s(&f, n));
        let g: Vec<u64> = f.iter().enumerate().filter(|(i, _)| drop >> i & 1 == 0).map(|(_, &v)| v).collect();
        prop_assert!(member_s(&g, n));
    }

    #[test]
    fn schreier_spreading(f in set_strategy(10), n in 0u32..=3, shifts in prop::collection::vec(0u64..3, 10)) {
        prop_assume!(member_s(&f, n));
        let mut g = Vec::new();
        let mut offset = 0;
        for (i, &v) in f.iter().enumerate() {
            offset += shifts[i];
            g.push(v + offset);
        }
        prop_assert!(member_s(&g, n));
    }

    #[test]
    fn schreier_monotone_in_n(f in set_strategy(10), n in 0u32..=3) {
        if member_s(&f, n) {
            prop_assert!(member_s(&f, n + 1));
        }
    }

    #[test]
    fn norm_unconditional(spec in spec_strategy(), x in vector_strategy(5), flips in any::<u16>()) {
        let mut y = BlockVector::new();
        for (k, (i, c)) in x.iter().enumerate() {
            y.set(*i, if flips >> k & 1 == 1 { -c.clone() } else { c.clone() });
        }
        prop_assert!(same(&norm(&x, &spec).unwrap(), &norm(&y, &spec).unwrap()));
    }

    #[test]
    fn norm_between_sup_and_l1(spec in spec_strategy(), x in vector_strategy(5)) {
        let v = norm(&x, &spec).unwrap();
        prop_assert!(le(&Enclosure::Exact(x.linf()), &v));
        prop_assert!(le(&v, &Enclosure::Exact(x.l1())));
    }

    #[test]
    fn norm_homogeneous(spec in spec_strategy(), x in vector_strategy(5), k in 1i64..=5) {
        let v = norm(&x, &spec).unwrap();
        let w = norm(&x.scale(&q(k, 3)), &spec).unwrap();
        prop_assert!(same(&v.scale(&q(k, 3)), &w));
    }

    #[test]
    fn modified_dominates(spec in spec_strategy(), x in vector_strategy(5)) {
        let plain = norm(&x, &spec.clone().with_modified(false)).unwrap();
        let modified = norm(&x, &spec.with_modified(true)).unwrap();
        prop_assert!(le(&plain, &modified));
    }

    #[test]
    fn triangle_inequality(spec in spec_strategy(), x in vector_strategy(3), y in vector_strategy(3)) {
        let cfg = NormConfig::with_cap(Some(8));
        let s = norm_with(&x.add(&y), &spec, &cfg).unwrap();
        let t = norm_with(&x, &spec, &cfg).unwrap().add(&norm_with(&y, &spec, &cfg).unwrap());
        prop_assert!(le(&s, &t));
    }

    #[test]
    fn restriction_monotone(spec in spec_strategy(), x in vector_strategy(5), keep in any::<u16>()) {
        let y = x.restrict(|i| keep >> i & 1 == 1);
        prop_assert!(le(&norm(&y, &spec).unwrap(), &norm(&x, &spec).unwrap()));
    }

    #[test]
    fn height_ratio_between_one_and_two(start in 2u64..=6, extra in prop::collection::btree_set(0u64..10, 0..6), m in 1u32..=3) {
        let mut s = vec![start];
        s.extend(extra.iter().map(|e| start + 1 + e));
        prop_assume!(member_s(&s, m));
        let z = BlockVector::from_pairs(s.iter().map(|&i| (i, q(1 + (i as i64 % 4), 4)))).unwrap();
        let r = verify_height_fact(&z, m, &q(1, 2), &NormConfig::default()).unwrap();
        prop_assert!(r.pass);
        prop_assert!(r.stats["min_ratio"] >= 1.0 && r.stats["max_ratio"] <= 2.0);
    }

    #[test]
    fn prune_loss_at_most_two_eps(seed in any::<u64>(), size in 1usize..=12) {
        let spec = SpaceSpec::geometric(q(1, 2), true);
        let cert = harmonic_average();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pool: Vec<u64> = (0..size as u64).map(|k| 4 + 5 * k).collect();
        let f = random_tree(&mut rng, &pool, &spec, 3, true);
        let o = prune_tree(&f, &cert, 2, &spec, 64).unwrap();
        prop_assert!(o.within);
        prop_assert!(le(&o.loss, &Enclosure::Exact(qi(2) * &cert.eps)));
    }

    #[test]
    fn built_trees_pass_their_checks(start in 1u64..=12, den in 2i64..=5) {
        let p = BuildParams::new(1, q(1, den));
        let t = build_averaging_tree(&mut BasisSupply::from(start), &p).unwrap();
        let rules = TreeRules { power_of_two: false, error_scale: None };
        prop_assert!(check_averaging_tree(&t, &rules).is_empty());
    }

    #[test]
    fn classification_ignores_the_first_values(k in 1usize..=4, factors in prop::collection::vec(0.8f64..1.25, 4)) {
        let flat: Vec<f64> = vec![0.5; 1024];
        let decaying: Vec<f64> = (1..=1024).map(|n| (n as f64).sqrt().recip()).collect();
        for c in [flat, decaying] {
            let base = classify_values(&c, TREND_FACTOR).class;
            let mut d = c.clone();
            for i in 0..k {
                d[i] *= factors[i];
            }
            prop_assert_eq!(classify_values(&d, TREND_FACTOR).class, base);
        }
    }

    #[test]
    fn domination_monotone_in_deltas(a in prop::collection::vec(-4i64..=4, 6), d in prop::collection::vec(1i64..=8, 3)) {
        let a: Vec<Q> = a.into_iter().map(|v| q(v, 4)).collect();
        let mut d = d;
        d.sort_unstable_by(|x, y| y.cmp(x));
        let spec = SpaceSpec::tsirelson(q(1, 2));
        let to_vec = |a: &[Q]| {
            let mut x = BlockVector::new();
            for (i, c) in a.iter().enumerate() {
                x.set(i as u64 + 3, c.clone());
            }
            x
        };
        let u = |a: &[Q]| norm(&to_vec(a), &spec).unwrap();
        let v = |a: &[Q]| Enclosure::Exact(to_vec(a).l1());
        let small: Vec<Enclosure> = d.iter().map(|&k| Enclosure::Exact(q(k, 4))).collect();
        let large: Vec<Enclosure> = small.iter().map(|e| e.scale(&qi(2))).collect();
        let samples = vec![a];
        let r1 = strong_domination_check(&u, &v, &small, &samples).unwrap();
        let r2 = strong_domination_check(&u, &v, &large, &samples).unwrap();
        prop_assert!(!r1.ok || r2.ok);
    }
}
