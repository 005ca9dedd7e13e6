use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::rational::{fmt_q, parse_q, Q};
use crate::schreier::FiniteSet;

/// Finitely supported vector; zero coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct BlockVector {
    coeffs: BTreeMap<u64, Q>,
}

impl BlockVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (u64, Q)>>(pairs: I) -> Result<Self> {
        let mut v = BlockVector::new();
        for (i, c) in pairs {
            if i == 0 {
                return Err(Error::Parse("coordinate index must be ≥ 1".into()));
            }
            v.set(i, c);
        }
        Ok(v)
    }

    pub fn basis(k: u64) -> Self {
        let mut v = BlockVector::new();
        v.set(k, Q::from_integer(1.into()));
        v
    }

    /// Σ_{i=lo}^{hi} c e_i
    pub fn flat(lo: u64, hi: u64, c: Q) -> Self {
        let mut v = BlockVector::new();
        for i in lo..=hi {
            v.set(i, c.clone());
        }
        v
    }

    pub fn set(&mut self, i: u64, c: Q) {
        if c.is_zero() {
            self.coeffs.remove(&i);
        } else {
            self.coeffs.insert(i, c);
        }
    }

    pub fn get(&self, i: u64) -> Q {
        self.coeffs.get(&i).cloned().unwrap_or_else(Q::zero)
    }

    pub fn coeffs(&self) -> &BTreeMap<u64, Q> {
        &self.coeffs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&u64, &Q)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn support(&self) -> FiniteSet {
        FiniteSet::new(self.coeffs.keys().copied().collect()).expect("support is sorted")
    }

    pub fn support_vec(&self) -> Vec<u64> {
        self.coeffs.keys().copied().collect()
    }

    pub fn minsupp(&self) -> Option<u64> {
        self.coeffs.keys().next().copied()
    }

    pub fn maxsupp(&self) -> Option<u64> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn restrict<F: Fn(u64) -> bool>(&self, keep: F) -> Self {
        BlockVector {
            coeffs: self
                .coeffs
                .iter()
                .filter(|(i, _)| keep(**i))
                .map(|(i, c)| (*i, c.clone()))
                .collect(),
        }
    }

    pub fn restrict_to(&self, set: &[u64]) -> Self {
        BlockVector {
            coeffs: set
                .iter()
                .filter_map(|i| self.coeffs.get(i).map(|c| (*i, c.clone())))
                .collect(),
        }
    }

    pub fn linf(&self) -> Q {
        self.coeffs.values().map(|c| c.abs()).max().unwrap_or_else(Q::zero)
    }

    pub fn l1(&self) -> Q {
        self.coeffs.values().fold(Q::zero(), |a, c| a + c.abs())
    }

    pub fn abs(&self) -> Self {
        BlockVector {
            coeffs: self.coeffs.iter().map(|(i, c)| (*i, c.abs())).collect(),
        }
    }

    pub fn scale(&self, k: &Q) -> Self {
        let mut v = BlockVector::new();
        for (i, c) in &self.coeffs {
            v.set(*i, c * k);
        }
        v
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut v = self.clone();
        for (i, c) in &other.coeffs {
            let s = v.get(*i) + c;
            v.set(*i, s);
        }
        v
    }

    pub fn add_scaled(&mut self, other: &Self, k: &Q) {
        for (i, c) in &other.coeffs {
            let s = self.get(*i) + c * k;
            self.set(*i, s);
        }
    }

    /// Supports are successive: every index of self precedes every index of other.
    pub fn precedes(&self, other: &Self) -> bool {
        match (self.maxsupp(), other.minsupp()) {
            (Some(a), Some(b)) => a < b,
            _ => true,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Repr {
    coeffs: BTreeMap<String, String>,
}

impl Serialize for BlockVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        // keys sorted numerically in output
        use serde::ser::SerializeMap;
        struct Coeffs<'a>(&'a BTreeMap<u64, Q>);
        impl Serialize for Coeffs<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut m = s.serialize_map(Some(self.0.len()))?;
                for (i, c) in self.0 {
                    m.serialize_entry(&i.to_string(), &fmt_q(c))?;
                }
                m.end()
            }
        }
        let mut m = s.serialize_map(Some(1))?;
        m.serialize_entry("coeffs", &Coeffs(&self.coeffs))?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for BlockVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = Repr::deserialize(d)?;
        let mut pairs = Vec::with_capacity(r.coeffs.len());
        for (k, v) in r.coeffs {
            let i: u64 = k
                .trim()
                .parse()
                .map_err(|_| serde::de::Error::custom(format!("bad index {k:?}")))?;
            let c = parse_q(&v).map_err(serde::de::Error::custom)?;
            pairs.push((i, c));
        }
        BlockVector::from_pairs(pairs).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn json_round_trip() {
        let v = BlockVector::from_pairs([(3, q(1, 2)), (4, q(-2, 7)), (10, q(0, 1))]).unwrap();
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"coeffs":{"3":"1/2","4":"-2/7"}}"#);
        let back: BlockVector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<BlockVector>(r#"{"coeffs":{"0":"1"}}"#).is_err());
    }

    #[test]
    fn norms_and_support() {
        let v = BlockVector::from_pairs([(5, q(-3, 2)), (2, q(1, 4))]).unwrap();
        assert_eq!(v.linf(), q(3, 2));
        assert_eq!(v.l1(), q(7, 4));
        assert_eq!(v.support_vec(), vec![2, 5]);
        assert!(BlockVector::basis(1).precedes(&v));
    }
}
