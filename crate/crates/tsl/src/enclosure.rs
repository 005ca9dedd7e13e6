use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;

use crate::rational::{ceil_dyadic, floor_dyadic, fmt_q, parse_q, Q};

pub const DEFAULT_PREC: u32 = 64;

/// A certified value: either an exact rational or a dyadic interval containing the true value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Enclosure {
    Exact(Q),
    Interval { lo: Q, hi: Q, prec: u32 },
}

impl Enclosure {
    pub fn exact(x: Q) -> Self {
        Enclosure::Exact(x)
    }

    pub fn zero() -> Self {
        Enclosure::Exact(Q::zero())
    }

    pub fn one() -> Self {
        Enclosure::Exact(Q::one())
    }

    /// Interval rounded outward to the 2^-prec grid. Collapses to `Exact` when lo == hi.
    pub fn interval(lo: Q, hi: Q, prec: u32) -> Self {
        debug_assert!(lo <= hi, "inverted interval");
        if lo == hi {
            return Enclosure::Exact(lo);
        }
        Enclosure::Interval {
            lo: floor_dyadic(&lo, prec),
            hi: ceil_dyadic(&hi, prec),
            prec,
        }
    }

    pub fn lo(&self) -> &Q {
        match self {
            Enclosure::Exact(x) => x,
            Enclosure::Interval { lo, .. } => lo,
        }
    }

    pub fn hi(&self) -> &Q {
        match self {
            Enclosure::Exact(x) => x,
            Enclosure::Interval { hi, .. } => hi,
        }
    }

    pub fn prec(&self) -> u32 {
        match self {
            Enclosure::Exact(_) => 0,
            Enclosure::Interval { prec, .. } => *prec,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Enclosure::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&Q> {
        match self {
            Enclosure::Exact(x) => Some(x),
            _ => None,
        }
    }

    pub fn width(&self) -> Q {
        self.hi() - self.lo()
    }

    fn joint_prec(&self, other: &Self) -> u32 {
        self.prec().max(other.prec())
    }

    pub fn add(&self, other: &Self) -> Self {
        match (self, other) {
            (Enclosure::Exact(a), Enclosure::Exact(b)) => Enclosure::Exact(a + b),
            _ => Enclosure::interval(
                self.lo() + other.lo(),
                self.hi() + other.hi(),
                self.joint_prec(other),
            ),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        match self {
            Enclosure::Exact(a) => Enclosure::Exact(-a),
            Enclosure::Interval { lo, hi, prec } => Enclosure::Interval {
                lo: -hi,
                hi: -lo,
                prec: *prec,
            },
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        match (self, other) {
            (Enclosure::Exact(a), Enclosure::Exact(b)) => Enclosure::Exact(a * b),
            _ => {
                let c = [
                    self.lo() * other.lo(),
                    self.lo() * other.hi(),
                    self.hi() * other.lo(),
                    self.hi() * other.hi(),
                ];
                let lo = c.iter().min().unwrap().clone();
                let hi = c.iter().max().unwrap().clone();
                Enclosure::interval(lo, hi, self.joint_prec(other))
            }
        }
    }

    pub fn scale(&self, k: &Q) -> Self {
        self.mul(&Enclosure::Exact(k.clone()))
    }

    /// Division by an enclosure that is certainly positive.
    pub fn div(&self, other: &Self) -> Self {
        assert!(other.lo().is_positive(), "division by a non-positive enclosure");
        match other {
            Enclosure::Exact(b) => self.scale(&b.recip()),
            Enclosure::Interval { lo, hi, prec } => {
                self.mul(&Enclosure::interval(hi.recip(), lo.recip(), *prec))
            }
        }
    }

    pub fn abs(&self) -> Self {
        if !self.lo().is_negative() {
            self.clone()
        } else if !self.hi().is_positive() {
            self.neg()
        } else {
            let hi = self.hi().clone().max(-self.lo());
            Enclosure::interval(Q::zero(), hi, self.prec())
        }
    }

    pub fn max(&self, other: &Self) -> Self {
        match (self, other) {
            (Enclosure::Exact(a), Enclosure::Exact(b)) => Enclosure::Exact(a.max(b).clone()),
            _ => {
                if self.certainly_ge(other) {
                    return self.clone();
                }
                if other.certainly_ge(self) {
                    return other.clone();
                }
                Enclosure::interval(
                    self.lo().max(other.lo()).clone(),
                    self.hi().max(other.hi()).clone(),
                    self.joint_prec(other),
                )
            }
        }
    }

    pub fn min(&self, other: &Self) -> Self {
        self.neg().max(&other.neg()).neg()
    }

    pub fn contains(&self, x: &Q) -> bool {
        self.lo() <= x && x <= self.hi()
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.lo() <= other.hi() && other.lo() <= self.hi()
    }

    pub fn certainly_le(&self, other: &Self) -> bool {
        self.hi() <= other.lo()
    }

    pub fn certainly_lt(&self, other: &Self) -> bool {
        self.hi() < other.lo()
    }

    pub fn certainly_ge(&self, other: &Self) -> bool {
        other.certainly_le(self)
    }

    pub fn possibly_le(&self, other: &Self) -> bool {
        self.lo() <= other.hi()
    }

    /// Ordering used for argmax: by lower end, then upper end.
    pub fn cmp_lo(&self, other: &Self) -> Ordering {
        self.lo()
            .cmp(other.lo())
            .then_with(|| self.hi().cmp(other.hi()))
    }

    pub fn to_f64(&self) -> f64 {
        let m = (self.lo() + self.hi()) / Q::from_integer(BigInt::from(2));
        m.to_f64().unwrap_or(f64::NAN)
    }
}

impl From<Q> for Enclosure {
    fn from(x: Q) -> Self {
        Enclosure::Exact(x)
    }
}

impl fmt::Display for Enclosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Enclosure::Exact(x) => write!(f, "{x}"),
            Enclosure::Interval { lo, hi, prec } => write!(f, "[{lo}, {hi}]@{prec}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct IntervalRepr {
    lo: String,
    hi: String,
    prec: u32,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Repr {
    Exact(String),
    Interval(IntervalRepr),
}

impl Serialize for Enclosure {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Enclosure::Exact(x) => s.serialize_str(&fmt_q(x)),
            Enclosure::Interval { lo, hi, prec } => IntervalRepr {
                lo: fmt_q(lo),
                hi: fmt_q(hi),
                prec: *prec,
            }
            .serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Enclosure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Exact(s) => parse_q(&s)
                .map(Enclosure::Exact)
                .map_err(serde::de::Error::custom),
            Repr::Interval(r) => {
                let lo = parse_q(&r.lo).map_err(serde::de::Error::custom)?;
                let hi = parse_q(&r.hi).map_err(serde::de::Error::custom)?;
                if lo > hi {
                    return Err(serde::de::Error::custom("lo > hi"));
                }
                if lo == hi {
                    return Ok(Enclosure::Exact(lo));
                }
                Ok(Enclosure::Interval {
                    lo,
                    hi,
                    prec: r.prec,
                })
            }
        }
    }
}

fn dyadic(n: BigUint, prec: u32) -> Q {
    Q::new(BigInt::from(n), BigInt::one() << prec as usize)
}

/// k-th root of a nonnegative integer; exact when the root is an integer.
pub fn root_uint(n: &BigUint, k: u32, prec: u32) -> Enclosure {
    assert!(k >= 1);
    let r0 = n.nth_root(k);
    if num_traits::pow(r0.clone(), k as usize) == *n {
        return Enclosure::Exact(Q::from_integer(BigInt::from(r0)));
    }
    let scaled: BigUint = n << (prec as usize * k as usize);
    let r = scaled.nth_root(k);
    Enclosure::interval(dyadic(r.clone(), prec), dyadic(r + 1u32, prec), prec)
}

/// k-th root of a nonnegative rational.
pub fn root_q(x: &Q, k: u32, prec: u32) -> Enclosure {
    assert!(!x.is_negative(), "root of a negative rational");
    if x.is_zero() || k == 1 {
        return Enclosure::Exact(x.clone());
    }
    let a = x.numer().magnitude().clone();
    let b = x.denom().magnitude().clone();
    // x^(1/k) = (a b^(k-1))^(1/k) / b
    let m = a * num_traits::pow(b.clone(), (k - 1) as usize);
    let r = root_uint(&m, k, prec + b.bits() as u32 + 2);
    let bq = Enclosure::Exact(Q::from_integer(BigInt::from(b)));
    match r.div(&bq) {
        Enclosure::Exact(v) => Enclosure::Exact(v),
        e => Enclosure::interval(e.lo().clone(), e.hi().clone(), prec),
    }
}

/// x^r for x ≥ 0 and rational r > 0.
pub fn pow_q(x: &Q, r: &Q, prec: u32) -> Enclosure {
    assert!(r.is_positive());
    let u = r.numer().to_u32().expect("exponent numerator too large");
    let v = r.denom().to_u32().expect("exponent denominator too large");
    let p = num_traits::pow(x.clone(), u as usize);
    root_q(&p, v, prec)
}

/// Monotone extension of `pow_q` to enclosures of nonnegative values.
pub fn pow_enc(x: &Enclosure, r: &Q, prec: u32) -> Enclosure {
    match x {
        Enclosure::Exact(v) => pow_q(v, r, prec),
        Enclosure::Interval { lo, hi, .. } => {
            let lo = if lo.is_negative() { Q::zero() } else { lo.clone() };
            let a = pow_q(&lo, r, prec);
            let b = pow_q(hi, r, prec);
            Enclosure::interval(a.lo().clone(), b.hi().clone(), prec)
        }
    }
}

/// log2 of a positive integer, by interval repeated squaring.
pub fn log2_uint(m: &BigUint, prec: u32) -> Enclosure {
    assert!(!m.is_zero(), "log2 of zero");
    let k = m.bits() - 1;
    if m.count_ones() == 1 {
        return Enclosure::Exact(Q::from_integer(BigInt::from(k)));
    }
    let w = 2 * prec as usize + 16;
    let shifted: BigUint = m << w;
    let mut ylo: BigUint = &shifted >> k as usize;
    let mut yhi: BigUint = if (&ylo << k as usize) == shifted {
        ylo.clone()
    } else {
        &ylo + 1u32
    };
    let two: BigUint = BigUint::one() << (w + 1);
    let mut f = BigUint::zero();
    let mut j: usize = 0;
    let mut ambiguous = false;
    for _ in 0..(prec as usize + 2) {
        let sq_lo = &ylo * &ylo;
        let sq_hi = &yhi * &yhi;
        let nlo = &sq_lo >> w;
        let mut nhi = &sq_hi >> w;
        if (&nhi << w) != sq_hi {
            nhi += 1u32;
        }
        if nlo >= two {
            f = (f << 1usize) + 1u32;
            j += 1;
            ylo = nlo >> 1usize;
            let odd = nhi.bit(0);
            yhi = (nhi >> 1usize) + if odd { 1u32 } else { 0u32 };
        } else if nhi < two {
            f <<= 1usize;
            j += 1;
            ylo = nlo;
            yhi = nhi;
        } else {
            ambiguous = true;
            break;
        }
    }
    let _ = ambiguous;
    let base = Q::from_integer(BigInt::from(k));
    let den = BigInt::one() << j;
    let lo = &base + Q::new(BigInt::from(f.clone()), den.clone());
    let hi = &base + Q::new(BigInt::from(f + 1u32), den);
    Enclosure::interval(lo, hi, prec)
}

pub fn log2_q(x: &Q, prec: u32) -> Enclosure {
    assert!(x.is_positive(), "log2 of a non-positive rational");
    let a = log2_uint(x.numer().magnitude(), prec + 2);
    let b = log2_uint(x.denom().magnitude(), prec + 2);
    match a.sub(&b) {
        Enclosure::Exact(v) => Enclosure::Exact(v),
        e => Enclosure::interval(e.lo().clone(), e.hi().clone(), prec),
    }
}

pub fn log2_enc(x: &Enclosure, prec: u32) -> Enclosure {
    match x {
        Enclosure::Exact(v) => log2_q(v, prec),
        Enclosure::Interval { lo, hi, .. } => {
            let a = log2_q(lo, prec);
            let b = log2_q(hi, prec);
            Enclosure::interval(a.lo().clone(), b.hi().clone(), prec)
        }
    }
}

/// 2^e for rational e, by bisection against `log2_uint`.
pub fn exp2_q(e: &Q, prec: u32) -> Enclosure {
    let k = e.floor().to_integer();
    let f = e - Q::from_integer(k.clone());
    let scale = if k.is_negative() {
        Q::new(BigInt::one(), BigInt::one() << (-&k).to_usize().unwrap())
    } else {
        Q::from_integer(BigInt::one() << k.to_usize().unwrap())
    };
    if f.is_zero() {
        return Enclosure::Exact(scale);
    }
    let p = prec + 2;
    let pq = Q::from_integer(BigInt::from(p));
    let mut lo_t: BigUint = BigUint::one() << p as usize;
    let mut hi_t: BigUint = BigUint::one() << (p as usize + 1);
    while &hi_t - &lo_t > BigUint::one() {
        let mid: BigUint = (&lo_t + &hi_t) >> 1usize;
        let l = log2_uint(&mid, p + 8).sub(&Enclosure::Exact(pq.clone()));
        if l.hi() <= &f {
            lo_t = mid;
        } else if l.lo() >= &f {
            hi_t = mid;
        } else {
            break;
        }
    }
    let lo = dyadic(lo_t, p) * &scale;
    let hi = dyadic(hi_t, p) * &scale;
    Enclosure::interval(lo, hi, prec)
}

pub fn exp2_enc(x: &Enclosure, prec: u32) -> Enclosure {
    match x {
        Enclosure::Exact(v) => exp2_q(v, prec),
        Enclosure::Interval { lo, hi, .. } => {
            let a = exp2_q(lo, prec);
            let b = exp2_q(hi, prec);
            Enclosure::interval(a.lo().clone(), b.hi().clone(), prec)
        }
    }
}
