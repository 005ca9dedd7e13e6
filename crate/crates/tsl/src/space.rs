use num_bigint::BigUint;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::enclosure::{log2_uint, pow_q, root_q, Enclosure};
use crate::error::{Error, Result};
use crate::rational::{q, qi, qstr, qvec, Q};
use crate::schreier::{compose_rank, rank_slice, FamilySpec};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThetaGen {
    /// θ_n = θ^n
    Geometric(#[serde(with = "qstr")] Q),
    /// θ_n = c / n^{1/q}
    PowerLaw {
        #[serde(with = "qstr")]
        c: Q,
        #[serde(with = "qstr")]
        q: Q,
    },
    /// θ_n = 1 / log2(n+1)
    LogReciprocal,
    /// θ_n listed explicitly; undefined past the end of the list
    Table(#[serde(with = "qvec")] Vec<Q>),
}

impl ThetaGen {
    pub fn theta(&self, n: u32, prec: u32) -> Option<Enclosure> {
        if n == 0 {
            return None;
        }
        Some(match self {
            ThetaGen::Geometric(t) => Enclosure::Exact(num_traits::pow(t.clone(), n as usize)),
            ThetaGen::PowerLaw { c, q } => {
                let root = pow_q(&qi(n as i64), &q.recip(), prec + 4);
                Enclosure::Exact(c.clone()).div(&root)
            }
            ThetaGen::LogReciprocal => {
                let l = log2_uint(&BigUint::from(n + 1), prec + 4);
                Enclosure::one().div(&l)
            }
            ThetaGen::Table(v) => Enclosure::Exact(v.get(n as usize - 1)?.clone()),
        })
    }

    /// Largest n with θ_n defined, if finite.
    pub fn horizon(&self) -> Option<u32> {
        match self {
            ThetaGen::Table(v) => Some(v.len() as u32),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: &Q| x.is_positive() && x <= &Q::one();
        match self {
            ThetaGen::Geometric(t) => {
                if !(t.is_positive() && t < &Q::one()) {
                    return Err(Error::InvalidSpec("Geometric θ must lie in (0,1)".into()));
                }
            }
            ThetaGen::PowerLaw { c, q } => {
                if !in_unit(c) {
                    return Err(Error::InvalidSpec("PowerLaw c must lie in (0,1]".into()));
                }
                if q < &Q::one() {
                    return Err(Error::InvalidSpec("PowerLaw q must be ≥ 1".into()));
                }
            }
            ThetaGen::LogReciprocal => {}
            ThetaGen::Table(v) => {
                if v.is_empty() {
                    return Err(Error::InvalidSpec("empty θ table".into()));
                }
                if !v.iter().all(in_unit) {
                    return Err(Error::InvalidSpec("θ table values must lie in (0,1]".into()));
                }
                if v.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::InvalidSpec("θ table must be nonincreasing".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyKind {
    A,
    S,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub family_kind: FamilyKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub exponents: BTreeMap<u32, u32>,
    pub thetas: ThetaGen,
    #[serde(default)]
    pub modified: bool,
    #[serde(default)]
    pub compose_inner_a2: bool,
}

impl SpaceSpec {
    pub fn new(family_kind: FamilyKind, thetas: ThetaGen, modified: bool) -> Self {
        SpaceSpec {
            family_kind,
            exponents: BTreeMap::new(),
            thetas,
            modified,
            compose_inner_a2: false,
        }
    }

    /// T[S_1, θ]
    pub fn tsirelson(theta: Q) -> Self {
        Self::new(FamilyKind::S, ThetaGen::Table(vec![theta]), false)
    }

    /// T[(S_n, θ^n)] or its modified version
    pub fn geometric(theta: Q, modified: bool) -> Self {
        Self::new(FamilyKind::S, ThetaGen::Geometric(theta), modified)
    }

    /// T[(A_n, c/n^{1/q})]
    pub fn power_law(c: Q, qexp: Q) -> Self {
        Self::new(FamilyKind::A, ThetaGen::PowerLaw { c, q: qexp }, false)
    }

    pub fn tzafriri() -> Self {
        Self::power_law(q(1, 2), qi(2))
    }

    pub fn schlumprecht() -> Self {
        Self::new(FamilyKind::A, ThetaGen::LogReciprocal, false)
    }

    pub fn with_compose_a2(mut self) -> Self {
        self.compose_inner_a2 = true;
        self
    }

    pub fn with_modified(mut self, modified: bool) -> Self {
        self.modified = modified;
        self
    }

    pub fn k(&self, n: u32) -> u32 {
        self.exponents.get(&n).copied().unwrap_or(n)
    }

    pub fn validate(&self) -> Result<()> {
        self.thetas.validate()?;
        if self.exponents.iter().any(|(&n, &k)| n == 0 || k == 0) {
            return Err(Error::InvalidSpec("exponents must map n ≥ 1 to k_n ≥ 1".into()));
        }
        let ks: Vec<u32> = (1..=self.exponents.keys().max().copied().unwrap_or(0) + 1)
            .map(|n| self.k(n))
            .collect();
        if ks.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidSpec("exponents k_n must be nondecreasing".into()));
        }
        if self.compose_inner_a2 && self.family_kind != FamilyKind::S {
            return Err(Error::InvalidSpec("S_n[A_2] variant requires S-kind families".into()));
        }
        Ok(())
    }

    pub fn theta(&self, n: u32, prec: u32) -> Option<Enclosure> {
        self.thetas.theta(n, prec)
    }

    pub fn family(&self, n: u32) -> FamilySpec {
        let k = self.k(n);
        match (self.family_kind, self.compose_inner_a2) {
            (FamilyKind::A, _) => FamilySpec::A(k),
            (FamilyKind::S, false) => FamilySpec::S(k),
            (FamilyKind::S, true) => FamilySpec::s_a2(k),
        }
    }

    fn least_n_with_k_at_least(&self, r: u32) -> u32 {
        let mut n = 1;
        while self.k(n) < r {
            n += 1;
        }
        n
    }

    /// Least n for which a sequence of blocks with these (sorted) minima is M_n-admissible
    /// and θ_n is defined.
    pub fn min_index(&self, minima: &[u64]) -> Option<u32> {
        let r = match self.family_kind {
            FamilyKind::A => minima.len() as u32,
            FamilyKind::S => {
                if self.compose_inner_a2 {
                    compose_rank(minima, &FamilySpec::A(2))?
                } else {
                    rank_slice(minima)?
                }
            }
        };
        let n = self.least_n_with_k_at_least(r.max(1));
        match self.thetas.horizon() {
            Some(h) if n > h => None,
            _ => Some(n),
        }
    }

    /// θ := sup_n θ_n^{1/n}
    pub fn theta_sup(&self, prec: u32) -> Enclosure {
        match &self.thetas {
            ThetaGen::Geometric(t) => Enclosure::Exact(t.clone()),
            ThetaGen::PowerLaw { .. } | ThetaGen::LogReciprocal => Enclosure::one(),
            ThetaGen::Table(v) => {
                let mut best = Enclosure::Exact(v[0].clone());
                for (i, t) in v.iter().enumerate().skip(1) {
                    best = best.max(&root_q(t, i as u32 + 1, prec));
                }
                best
            }
        }
    }

    /// Violations of θ_{n+m} ≥ θ_n θ_m for n+m ≤ bound.
    pub fn regularity_violations(&self, bound: u32, prec: u32) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for n in 1..bound {
            for m in n..=(bound - n) {
                let (Some(a), Some(b), Some(c)) = (
                    self.theta(n, prec),
                    self.theta(m, prec),
                    self.theta(n + m, prec),
                ) else {
                    continue;
                };
                if c.certainly_lt(&a.mul(&b)) {
                    out.push((n, m));
                }
            }
        }
        out
    }

    /// Violations of θ_{n+m} ≤ θ_n θ^m for n+m ≤ bound.
    pub fn clubsuit_violations(&self, bound: u32, prec: u32) -> Vec<(u32, u32)> {
        let th = self.theta_sup(prec);
        let mut out = Vec::new();
        for n in 1..bound {
            for m in 1..=(bound - n) {
                let (Some(a), Some(c)) = (self.theta(n, prec), self.theta(n + m, prec)) else {
                    continue;
                };
                let mut pw = Enclosure::one();
                for _ in 0..m {
                    pw = pw.mul(&th);
                }
                if a.mul(&pw).certainly_lt(&c) {
                    out.push((n, m));
                }
            }
        }
        out
    }

    pub fn warnings(&self, prec: u32) -> Vec<String> {
        let bound = self.thetas.horizon().map_or(12, |h| h.min(12));
        let mut w = Vec::new();
        let v = self.regularity_violations(bound, prec);
        if let Some((n, m)) = v.first() {
            w.push(format!("NonRegularSpec: θ_{} < θ_{}·θ_{}", n + m, n, m));
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_values() {
        let g = ThetaGen::Geometric(q(1, 2));
        assert_eq!(g.theta(3, 40), Some(Enclosure::Exact(q(1, 8))));
        let p = ThetaGen::PowerLaw { c: qi(1), q: qi(2) };
        assert_eq!(p.theta(4, 40), Some(Enclosure::Exact(q(1, 2))));
        let t = p.theta(2, 40).unwrap();
        assert!((t.to_f64() - 0.5f64.sqrt()).abs() < 1e-11);
        let l = ThetaGen::LogReciprocal;
        assert_eq!(l.theta(3, 40), Some(Enclosure::Exact(q(1, 2))));
        assert!((l.theta(2, 40).unwrap().to_f64() - 1.0 / 3f64.log2()).abs() < 1e-11);
        let tb = ThetaGen::Table(vec![q(1, 2)]);
        assert_eq!(tb.theta(2, 40), None);
    }

    #[test]
    fn spec_json() {
        let s = SpaceSpec::tsirelson(q(1, 2));
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(
            j,
            r#"{"family_kind":"S","thetas":{"Table":["1/2"]},"modified":false,"compose_inner_a2":false}"#
        );
        let back: SpaceSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        let p: SpaceSpec =
            serde_json::from_str(r#"{"family_kind":"A","thetas":{"PowerLaw":{"c":"1","q":"2"}}}"#).unwrap();
        assert_eq!(p, SpaceSpec::power_law(qi(1), qi(2)));
    }

    #[test]
    fn minimal_index() {
        let t = SpaceSpec::tsirelson(q(1, 2));
        assert_eq!(t.min_index(&[3, 4, 5]), Some(1));
        assert_eq!(t.min_index(&[2, 3, 4]), None);
        let g = SpaceSpec::geometric(q(1, 2), false);
        assert_eq!(g.min_index(&[2, 3, 4]), Some(2));
        assert_eq!(g.min_index(&[1, 2]), None);
        let a = SpaceSpec::power_law(qi(1), qi(2));
        assert_eq!(a.min_index(&[1, 2, 3]), Some(3));
    }

    #[test]
    fn theta_sup_and_conditions() {
        let g = SpaceSpec::geometric(q(1, 2), true);
        assert_eq!(g.theta_sup(40), Enclosure::Exact(q(1, 2)));
        assert!(g.regularity_violations(10, 40).is_empty());
        assert!(g.clubsuit_violations(10, 40).is_empty());
        let t = SpaceSpec::new(FamilyKind::S, ThetaGen::Table(vec![q(1, 2), q(1, 16)]), false);
        assert_eq!(t.theta_sup(40), Enclosure::Exact(q(1, 2)));
        assert!(!t.regularity_violations(2, 40).is_empty());
        assert!(SpaceSpec::new(FamilyKind::S, ThetaGen::Table(vec![q(1, 2), q(3, 4)]), false)
            .validate()
            .is_err());
    }
}
