use tsl::norm::{norm, NormConfig};
use tsl::rational::{q, qi};
use tsl::spreading::{delta_estimate, p_space_params};
use tsl::{BlockVector, Enclosure, SpaceSpec};

#[test]
fn delta_of_basis_with_short_tail() {
    let spec = SpaceSpec::geometric(q(1, 2), false);
    let basis: Vec<BlockVector> = (1..=8).map(BlockVector::basis).collect();
    let d = delta_estimate(&basis, 1, 2, 4, &spec, 6, &NormConfig::default()).unwrap();
    assert!(!d.value.certainly_lt(&Enclosure::Exact(q(1, 2))));
    assert!(d.value.certainly_le(&Enclosure::Exact(qi(1) + q(1, 64))));
}

#[test]
fn schlumprecht_is_the_p_equals_one_case() {
    let spec = SpaceSpec::schlumprecht();
    let p = p_space_params(&spec.thetas, 64, 64).unwrap();
    assert_eq!(p.p, Some(Enclosure::one()));
    assert!(p.q.is_none());
    for (n, c) in p.c_n.iter().enumerate() {
        assert_eq!(Some(c.clone()), spec.theta(n as u32 + 1, 64));
    }
}

#[test]
fn tsirelson_small_vectors() {
    let t = SpaceSpec::tsirelson(q(1, 2));
    // e_1 cannot start an admissible pair, so ‖e_1 + e_2‖ = 1
    assert_eq!(norm(&BlockVector::flat(1, 2, qi(1)), &t).unwrap(), Enclosure::Exact(qi(1)));
    assert_eq!(norm(&BlockVector::flat(3, 5, qi(1)), &t).unwrap(), Enclosure::Exact(q(3, 2)));
    assert_eq!(norm(&BlockVector::flat(2, 3, qi(1)), &t).unwrap(), Enclosure::Exact(qi(1)));
}
